use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    None,
}

impl Activation {
    fn apply(self, v: &mut [f64]) {
        match self {
            Activation::Tanh => v.iter_mut().for_each(|x| *x = x.tanh()),
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Activation::None => {}
        }
    }
}

pub const CONV_KERNEL: usize = 3;
pub const CONV_STRIDE: usize = 2;
pub const CONV_PADDING: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// `y = W x + b`, `W` stored row-major as `output × input`.
    Dense { input: usize, output: usize },
    /// Kernel 3, stride 2, padding 1; `W` stored as `c_out × c_in × 3^dim`.
    Conv { dim: usize, c_in: usize, c_out: usize },
    Flatten,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub activation: Activation,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn dense(input: usize, output: usize, activation: Activation, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let l = Self { kind: LayerKind::Dense { input, output }, activation, weight, bias };
        l.check_sizes()?;
        Ok(l)
    }

    pub fn conv(dim: usize, c_in: usize, c_out: usize, activation: Activation, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let l = Self { kind: LayerKind::Conv { dim, c_in, c_out }, activation, weight, bias };
        l.check_sizes()?;
        Ok(l)
    }

    pub fn flatten() -> Self {
        Self { kind: LayerKind::Flatten, activation: Activation::None, weight: Vec::new(), bias: Vec::new() }
    }

    pub(crate) fn weight_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { input, output } => input * output,
            LayerKind::Conv { dim, c_in, c_out } => c_out * c_in * CONV_KERNEL.pow(dim as u32),
            LayerKind::Flatten => 0,
        }
    }

    pub(crate) fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { output, .. } => output,
            LayerKind::Conv { c_out, .. } => c_out,
            LayerKind::Flatten => 0,
        }
    }

    pub(crate) fn check_sizes(&self) -> Result<()> {
        if let LayerKind::Conv { dim, .. } = self.kind {
            if !(1..=3).contains(&dim) {
                return Err(Error::Format(format!("conv dimension {dim} not in 1..=3")));
            }
        }
        if self.weight.len() != self.weight_len() || self.bias.len() != self.bias_len() {
            return Err(Error::Format(format!("layer {:?}: weight/bias sizes do not match", self.kind)));
        }
        if !self.weight.iter().chain(&self.bias).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("layer weights"));
        }
        Ok(())
    }
}

/// Activation tensor flowing through a layer stack.
#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Flat(usize),
    /// Channels and spatial extents, slowest axis first.
    Spatial { c: usize, dims: Vec<usize> },
}

fn conv_out(n: usize) -> usize {
    (n + 2 * CONV_PADDING - CONV_KERNEL) / CONV_STRIDE + 1
}

fn propagate(shape: &Shape, layer: &Layer) -> Result<Shape> {
    match (&layer.kind, shape) {
        (LayerKind::Dense { input, output }, Shape::Flat(n)) if n == input => Ok(Shape::Flat(*output)),
        (LayerKind::Conv { dim, c_in, c_out }, Shape::Spatial { c, dims }) if c == c_in && dims.len() == *dim => {
            if dims.contains(&0) {
                return Err(Error::Format("empty spatial extent".into()));
            }
            Ok(Shape::Spatial { c: *c_out, dims: dims.iter().map(|&d| conv_out(d)).collect() })
        }
        (LayerKind::Flatten, Shape::Spatial { c, dims }) => Ok(Shape::Flat(c * dims.iter().product::<usize>())),
        (LayerKind::Flatten, Shape::Flat(n)) => Ok(Shape::Flat(*n)),
        (kind, s) => Err(Error::Format(format!("layer {kind:?} cannot consume {s:?}"))),
    }
}

/// Sensor locations of a branch input, stored like mesh nodes: x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorGrid {
    pub dim: usize,
    /// Points per axis in x, y, z order.
    pub shape: Vec<usize>,
    /// Row-major `n × dim`.
    pub coords: Vec<f64>,
}

impl SensorGrid {
    /// Tensor-product grid over [0,1]^dim including the end points.
    pub fn uniform(shape: Vec<usize>) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 || shape.iter().any(|&s| s < 2) {
            return Err(Error::invalid("uniform sensor grid needs at least 2 points per axis"));
        }
        let n: usize = shape.iter().product();
        let mut coords = Vec::with_capacity(n * dim);
        for id in 0..n {
            let mut rest = id;
            for &s in &shape {
                coords.push((rest % s) as f64 / (s - 1) as f64);
                rest /= s;
            }
        }
        Ok(Self { dim, shape, coords })
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Name of the problem input this branch reads (e.g. `"f"`, `"K"`).
    pub input: Option<String>,
    pub layers: Vec<Layer>,
    pub sensors: Option<SensorGrid>,
    /// Length of the raw input vector.
    pub input_len: usize,
}

impl Branch {
    fn input_shape(&self) -> Shape {
        match (&self.sensors, self.layers.first().map(|l| l.kind)) {
            (Some(g), Some(LayerKind::Conv { .. })) => {
                Shape::Spatial { c: 1, dims: g.shape.iter().rev().copied().collect() }
            }
            _ => Shape::Flat(self.input_len),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMask {
    None,
    /// `b(x) = Π 4 x_i (1 − x_i)`.
    Poly,
}

impl BoundaryMask {
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            BoundaryMask::None => 1.0,
            BoundaryMask::Poly => x.iter().map(|&xi| 4.0 * xi * (1.0 - xi)).product(),
        }
    }
}

/// Multi-input DeepONet: `G(y¹..y^nf)(ξ) = Σ_k Π_l B^l_k(y^l) T_k(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnetModel {
    pub p: usize,
    pub branches: Vec<Branch>,
    pub trunk: Vec<Layer>,
    pub trunk_input: usize,
    pub boundary_mask: BoundaryMask,
    /// Branch fed with the (restricted) residual in direct preconditioning.
    pub rhs_branch: Option<usize>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl OnetModel {
    /// Checks shape chains and widths.
    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::Format("model has no branch".into()));
        }
        for (i, b) in self.branches.iter().enumerate() {
            if let Some(g) = &b.sensors {
                if g.len() != b.input_len || g.coords.len() != g.len() * g.dim || g.shape.len() != g.dim {
                    return Err(Error::Format(format!("branch {i}: sensor grid inconsistent with its input")));
                }
            }
            let mut s = b.input_shape();
            for l in &b.layers {
                l.check_sizes()?;
                s = propagate(&s, l)?;
            }
            if s != Shape::Flat(self.p) {
                return Err(Error::Format(format!("branch {i} ends in {s:?}, expected width {}", self.p)));
            }
        }
        let mut s = Shape::Flat(self.trunk_input);
        for l in &self.trunk {
            l.check_sizes()?;
            s = propagate(&s, l)?;
        }
        if s != Shape::Flat(self.p) {
            return Err(Error::Format(format!("trunk ends in {s:?}, expected width {}", self.p)));
        }
        if let Some(r) = self.rhs_branch {
            if r >= self.branches.len() {
                return Err(Error::Format(format!("rhs branch {r} out of range")));
            }
        }
        Ok(())
    }

    pub fn nf(&self) -> usize {
        self.branches.len()
    }

    /// Output of branch `l` for raw input `y`.
    pub fn branch_eval(&self, l: usize, y: &[f64]) -> Result<Vec<f64>> {
        let b = self.branches.get(l).ok_or_else(|| Error::invalid(format!("no branch {l}")))?;
        if y.len() != b.input_len {
            return Err(Error::dim("branch input", b.input_len, y.len()));
        }
        run_stack(&b.layers, b.input_shape(), y.to_vec())
    }

    /// Trunk rows `T(x_j)` (masked if the model carries a boundary mask).
    pub fn trunk_eval(&self, points: &[f64]) -> Result<DenseMatrix> {
        let d = self.trunk_input;
        if d == 0 || !points.len().is_multiple_of(d) {
            return Err(Error::dim("trunk points", d, points.len()));
        }
        let n = points.len() / d;
        let mut out = DenseMatrix::zeros(n, self.p);
        for j in 0..n {
            let x = &points[j * d..(j + 1) * d];
            let mut row = run_stack(&self.trunk, Shape::Flat(d), x.to_vec())?;
            let b = self.boundary_mask.eval(x);
            row.iter_mut().for_each(|v| *v *= b);
            out.row_mut(j).copy_from_slice(&row);
        }
        Ok(out)
    }

    /// Product of all branch outputs, entry by entry.
    pub fn branch_product(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        if inputs.len() != self.nf() {
            return Err(Error::dim("branch inputs", self.nf(), inputs.len()));
        }
        let mut prod = vec![1.0; self.p];
        for (l, y) in inputs.iter().enumerate() {
            let b = self.branch_eval(l, y)?;
            prod.iter_mut().zip(&b).for_each(|(p, v)| *p *= v);
        }
        Ok(prod)
    }

    /// Operator output at `points` for one set of branch inputs.
    pub fn infer(&self, inputs: &[&[f64]], points: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self.branch_product(inputs)?;
        self.trunk_eval(points)?.matvec(&coeffs)
    }
}

fn run_stack(layers: &[Layer], mut shape: Shape, mut x: Vec<f64>) -> Result<Vec<f64>> {
    for l in layers {
        let next = propagate(&shape, l)?;
        x = match (l.kind, &shape) {
            (LayerKind::Dense { input, output }, _) => {
                let mut y = l.bias.clone();
                for (o, yo) in y.iter_mut().enumerate() {
                    let w = &l.weight[o * input..(o + 1) * input];
                    *yo += w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                }
                debug_assert_eq!(y.len(), output);
                y
            }
            (LayerKind::Conv { dim, c_in, c_out }, Shape::Spatial { dims, .. }) => {
                let Shape::Spatial { dims: out_dims, .. } = &next else { unreachable!() };
                conv_forward(&x, dims, out_dims, dim, c_in, c_out, &l.weight, &l.bias)
            }
            (LayerKind::Flatten, _) => x,
            _ => unreachable!("checked by propagate"),
        };
        l.activation.apply(&mut x);
        shape = next;
    }
    Ok(x)
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    x: &[f64],
    in_dims: &[usize],
    out_dims: &[usize],
    dim: usize,
    c_in: usize,
    c_out: usize,
    w: &[f64],
    b: &[f64],
) -> Vec<f64> {
    // Pad to three axes so one loop nest handles 1D, 2D and 3D.
    let pad3 = |d: &[usize]| -> [usize; 3] {
        let mut o = [1usize; 3];
        o[3 - dim..].copy_from_slice(d);
        o
    };
    let (id, od) = (pad3(in_dims), pad3(out_dims));
    let ksz = |axis: usize| if axis < 3 - dim { 1 } else { CONV_KERNEL };
    let (k0, k1, k2) = (ksz(0), ksz(1), ksz(2));
    let in_size = id[0] * id[1] * id[2];
    let out_size = od[0] * od[1] * od[2];
    let kvol = k0 * k1 * k2;
    let mut y = vec![0.0; c_out * out_size];
    let pad = |axis: usize| if axis < 3 - dim { 0isize } else { CONV_PADDING as isize };
    let stride = |axis: usize| if axis < 3 - dim { 1 } else { CONV_STRIDE };
    for co in 0..c_out {
        for o0 in 0..od[0] {
            for o1 in 0..od[1] {
                for o2 in 0..od[2] {
                    let mut acc = b[co];
                    for ci in 0..c_in {
                        let wbase = (co * c_in + ci) * kvol;
                        let xbase = ci * in_size;
                        for a in 0..k0 {
                            let i0 = (o0 * stride(0)) as isize + a as isize - pad(0);
                            if i0 < 0 || i0 >= id[0] as isize {
                                continue;
                            }
                            for bb in 0..k1 {
                                let i1 = (o1 * stride(1)) as isize + bb as isize - pad(1);
                                if i1 < 0 || i1 >= id[1] as isize {
                                    continue;
                                }
                                for c in 0..k2 {
                                    let i2 = (o2 * stride(2)) as isize + c as isize - pad(2);
                                    if i2 < 0 || i2 >= id[2] as isize {
                                        continue;
                                    }
                                    let xi = xbase + (i0 as usize * id[1] + i1 as usize) * id[2] + i2 as usize;
                                    acc += w[wbase + (a * k1 + bb) * k2 + c] * x[xi];
                                }
                            }
                        }
                    }
                    y[co * out_size + (o0 * od[1] + o1) * od[2] + o2] = acc;
                }
            }
        }
    }
    y
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tiny_model() -> OnetModel {
        // Branch Dense(2→4), trunk Dense(1→4); B = e_1 · y_0, T_1(x) = x.
        let mut bw = vec![0.0; 8];
        bw[0] = 1.0;
        let mut tw = vec![0.0; 4];
        tw[0] = 1.0;
        OnetModel {
            p: 4,
            branches: vec![Branch {
                input: Some("f".into()),
                layers: vec![Layer::dense(2, 4, Activation::None, bw, vec![0.0; 4]).unwrap()],
                sensors: None,
                input_len: 2,
            }],
            trunk: vec![Layer::dense(1, 4, Activation::None, tw, vec![0.0; 4]).unwrap()],
            trunk_input: 1,
            boundary_mask: BoundaryMask::None,
            rhs_branch: Some(0),
            meta: BTreeMap::new(),
        }
    }

    #[test]
    fn hand_built_model_reproduces_function() {
        let m = tiny_model();
        m.validate().unwrap();
        let pts = [0.0, 0.25, 0.7];
        let out = m.infer(&[&[2.0, 5.0]], &pts).unwrap();
        assert_eq!(out, vec![0.0, 0.5, 1.4]);
        let zero = m.infer(&[&[0.0, 5.0]], &pts).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_zeroes_boundary_and_is_one_at_center() {
        let mut m = tiny_model();
        m.trunk[0].bias = vec![1.0; 4];
        m.boundary_mask = BoundaryMask::Poly;
        let t = m.trunk_eval(&[0.0, 0.5, 1.0]).unwrap();
        assert!(t.row(0).iter().all(|&v| v == 0.0));
        assert!(t.row(2).iter().all(|&v| v == 0.0));
        assert_eq!(t.row(1), &[1.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn conv_chain_halves_spatial_widths() {
        // Conv[40, 60, 100, 180] on 16×16 sensors collapses to 1×1.
        let widths = [1, 40, 60, 100, 180];
        let mut layers = Vec::new();
        for w in widths.windows(2) {
            let n = w[0] * w[1] * 9;
            layers.push(Layer::conv(2, w[0], w[1], Activation::Relu, vec![0.001; n], vec![0.0; w[1]]).unwrap());
        }
        layers.push(Layer::flatten());
        layers.push(Layer::dense(180, 8, Activation::None, vec![0.01; 180 * 8], vec![0.0; 8]).unwrap());
        let sensors = SensorGrid::uniform(vec![16, 16]).unwrap();
        let b = Branch { input: None, layers, sensors: Some(sensors), input_len: 256 };
        let mut m = tiny_model();
        m.p = 8;
        m.branches = vec![b];
        m.trunk = vec![Layer::dense(1, 8, Activation::Tanh, vec![0.1; 8], vec![0.0; 8]).unwrap()];
        m.validate().unwrap();
        let out = m.branch_eval(0, &vec![1.0; 256]).unwrap();
        assert_eq!(out.len(), 8);
    }

    #[test]
    fn conv_against_direct_sum() {
        // 1D: input length 5 → 3 outputs, padding 1.
        let w = vec![1.0, 2.0, 3.0];
        let l = Layer::conv(1, 1, 1, Activation::None, w, vec![0.5]).unwrap();
        let x = [1.0, -1.0, 2.0, 0.5, 4.0];
        let y = run_stack(&[l], Shape::Spatial { c: 1, dims: vec![5] }, x.to_vec()).unwrap();
        let expected = [
            0.5 + 2.0 * 1.0 + -3.0,
            0.5 + -1.0 + 2.0 * 2.0 + 3.0 * 0.5,
            0.5 + 1.0 * 0.5 + 2.0 * 4.0,
        ];
        assert_eq!(y, expected);
    }

    #[test]
    fn broken_chain_rejected() {
        let mut m = tiny_model();
        m.trunk_input = 2;
        assert!(m.validate().is_err());
        let mut m = tiny_model();
        m.p = 5;
        assert!(m.validate().is_err());
    }
}
