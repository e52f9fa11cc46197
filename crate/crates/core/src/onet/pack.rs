//! ONetPack model files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{decode, encode, f64s_to_bytes, read_f64s};
use crate::error::{Error, Result};

use super::model::{Activation, BoundaryMask, Branch, Layer, LayerKind, OnetModel, SensorGrid};

const MAGIC: &[u8; 4] = b"ONPK";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    kind: String,
    shape: Vec<usize>,
    activation: Activation,
    weight_offset: Option<usize>,
    bias_offset: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridEntry {
    dim: usize,
    shape: Vec<usize>,
    coords_offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    input_len: usize,
    layers: Vec<LayerEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sensor_grid: Option<GridEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrunkEntry {
    input_dim: usize,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    p: usize,
    nf: usize,
    branches: Vec<BranchEntry>,
    trunk: TrunkEntry,
    boundary_mask: BoundaryMask,
    dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rhs_branch: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, serde_json::Value>,
}

fn kind_entry(kind: LayerKind) -> (String, Vec<usize>) {
    match kind {
        LayerKind::Dense { input, output } => ("dense".into(), vec![input, output]),
        LayerKind::Conv { dim, c_in, c_out } => ("conv".into(), vec![dim, c_in, c_out]),
        LayerKind::Flatten => ("flatten".into(), vec![]),
    }
}

fn write_layers(layers: &[Layer], payload: &mut Vec<u8>) -> Vec<LayerEntry> {
    layers
        .iter()
        .map(|l| {
            let (kind, shape) = kind_entry(l.kind);
            let (mut weight_offset, mut bias_offset) = (None, None);
            if l.kind != LayerKind::Flatten {
                weight_offset = Some(payload.len());
                f64s_to_bytes(&l.weight, payload);
                bias_offset = Some(payload.len());
                f64s_to_bytes(&l.bias, payload);
            }
            LayerEntry { kind, shape, activation: l.activation, weight_offset, bias_offset }
        })
        .collect()
}

fn read_layers(entries: &[LayerEntry], payload: &[u8]) -> Result<Vec<Layer>> {
    entries
        .iter()
        .map(|e| {
            let kind = match (e.kind.as_str(), e.shape.as_slice()) {
                ("dense", &[input, output]) => LayerKind::Dense { input, output },
                ("conv", &[dim, c_in, c_out]) => LayerKind::Conv { dim, c_in, c_out },
                ("flatten", &[]) => LayerKind::Flatten,
                (k, s) => return Err(Error::Format(format!("unknown layer kind `{k}` with shape {s:?}"))),
            };
            let mut layer = Layer { kind, activation: e.activation, weight: Vec::new(), bias: Vec::new() };
            if kind != LayerKind::Flatten {
                let (Some(wo), Some(bo)) = (e.weight_offset, e.bias_offset) else {
                    return Err(Error::Format(format!("layer `{}` lacks weight offsets", e.kind)));
                };
                layer.weight = read_f64s(payload, wo, layer.weight_len())?;
                layer.bias = read_f64s(payload, bo, layer.bias_len())?;
            }
            layer.check_sizes()?;
            Ok(layer)
        })
        .collect()
}

impl OnetModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut payload = Vec::new();
        let mut branches = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let layers = write_layers(&b.layers, &mut payload);
            let sensor_grid = b.sensors.as_ref().map(|g| {
                let coords_offset = payload.len();
                f64s_to_bytes(&g.coords, &mut payload);
                GridEntry { dim: g.dim, shape: g.shape.clone(), coords_offset }
            });
            branches.push(BranchEntry { input: b.input.clone(), input_len: b.input_len, layers, sensor_grid });
        }
        let trunk = TrunkEntry { input_dim: self.trunk_input, layers: write_layers(&self.trunk, &mut payload) };
        let manifest = Manifest {
            p: self.p,
            nf: self.branches.len(),
            branches,
            trunk,
            boundary_mask: self.boundary_mask,
            dtype: "f64le".into(),
            rhs_branch: self.rhs_branch,
            meta: self.meta.clone(),
        };
        Ok(encode(MAGIC, VERSION, &serde_json::to_vec(&manifest)?, &payload))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (version, manifest, payload) = decode(bytes, MAGIC)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported ONetPack version {version}")));
        }
        let m: Manifest = serde_json::from_slice(manifest)?;
        if m.dtype != "f64le" {
            return Err(Error::Format(format!("unsupported dtype `{}`", m.dtype)));
        }
        if m.nf != m.branches.len() {
            return Err(Error::Format(format!("nf = {} but {} branches listed", m.nf, m.branches.len())));
        }
        let mut branches = Vec::with_capacity(m.nf);
        for b in &m.branches {
            let sensors = match &b.sensor_grid {
                Some(g) => {
                    let n: usize = g.shape.iter().product();
                    let coords = read_f64s(payload, g.coords_offset, n * g.dim)?;
                    if !coords.iter().all(|c| c.is_finite()) {
                        return Err(Error::NonFinite("sensor coordinates"));
                    }
                    Some(SensorGrid { dim: g.dim, shape: g.shape.clone(), coords })
                }
                None => None,
            };
            branches.push(Branch {
                input: b.input.clone(),
                layers: read_layers(&b.layers, payload)?,
                sensors,
                input_len: b.input_len,
            });
        }
        let model = OnetModel {
            p: m.p,
            branches,
            trunk: read_layers(&m.trunk.layers, payload)?,
            trunk_input: m.trunk.input_dim,
            boundary_mask: m.boundary_mask,
            rhs_branch: m.rhs_branch,
            meta: m.meta,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
