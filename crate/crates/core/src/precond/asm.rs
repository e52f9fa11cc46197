use crate::error::{Error, Result};
use crate::fem::StructuredMesh;
use crate::linalg::{is_positive_definite, BandedLu, CsrMatrix};

use super::{check_len, is_symmetric, Preconditioner};

/// Overlapping and non-overlapping index sets of a domain decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// 𝓘̃_s: disjoint, covering all dofs, sorted.
    pub owned: Vec<Vec<usize>>,
    /// 𝓘_s: `owned[s]` grown by `overlap` adjacency layers, sorted.
    pub overlapping: Vec<Vec<usize>>,
    pub overlap: usize,
    /// Blocks per axis.
    pub blocks: [usize; 3],
}

impl Partition {
    pub fn n_subdomains(&self) -> usize {
        self.owned.len()
    }

    /// Subdomain owning each dof.
    pub fn owner(&self) -> Vec<usize> {
        let n = self.owned.iter().map(Vec::len).sum();
        let mut out = vec![usize::MAX; n];
        for (s, set) in self.owned.iter().enumerate() {
            for &i in set {
                out[i] = s;
            }
        }
        out
    }
}

/// Most balanced split of `s` into `dim` factors, each at most `max_per_axis`.
fn axis_factors(s: usize, dim: usize, max_per_axis: usize) -> Option<[usize; 3]> {
    let mut best: Option<([usize; 3], usize)> = None;
    let divisors: Vec<usize> = (1..=s).filter(|d| s.is_multiple_of(*d) && *d <= max_per_axis).collect();
    let mut consider = |f: [usize; 3]| {
        let used = &f[..dim];
        let spread = used.iter().max().unwrap() - used.iter().min().unwrap();
        if best.is_none_or(|(_, b)| spread < b) {
            best = Some((f, spread));
        }
    };
    match dim {
        1 => {
            if s <= max_per_axis {
                consider([s, 1, 1]);
            }
        }
        2 => {
            for &a in divisors.iter().rev() {
                if divisors.contains(&(s / a)) {
                    consider([a, s / a, 1]);
                }
            }
        }
        _ => {
            for &a in divisors.iter().rev() {
                for &b in divisors.iter().rev() {
                    if (s / a).is_multiple_of(b) && divisors.contains(&(s / a / b)) {
                        consider([a, b, s / a / b]);
                    }
                }
            }
        }
    }
    best.map(|(f, _)| f)
}

/// Axis-aligned block partition of a structured mesh with `overlap`
/// layers of mesh-graph neighbours added to each block.
pub fn partition_structured(mesh: &StructuredMesh, s: usize, overlap: usize) -> Result<Partition> {
    let dim = mesh.dim();
    let per_axis = mesh.nodes_per_axis();
    if s == 0 {
        return Err(Error::invalid("need at least one subdomain"));
    }
    let blocks = axis_factors(s, dim, per_axis)
        .ok_or_else(|| Error::invalid(format!("{s} subdomains do not tile a {dim}D grid of {per_axis} nodes per axis")))?;
    let mut owned = vec![Vec::new(); s];
    for node in 0..mesh.n_nodes() {
        let idx = mesh.node_index(node);
        let mut id = 0;
        let mut stride = 1;
        for a in 0..dim {
            id += (idx[a] * blocks[a] / per_axis) * stride;
            stride *= blocks[a];
        }
        owned[id].push(node);
    }
    let overlapping = if overlap == 0 {
        owned.clone()
    } else {
        let adj = mesh.adjacency();
        owned.iter().map(|set| grow(set, &adj, overlap, mesh.n_nodes())).collect()
    };
    Ok(Partition { owned, overlapping, overlap, blocks })
}

fn grow(set: &[usize], adj: &[Vec<usize>], layers: usize, n: usize) -> Vec<usize> {
    let mut member = vec![false; n];
    set.iter().for_each(|&i| member[i] = true);
    let mut frontier = set.to_vec();
    for _ in 0..layers {
        let mut next = Vec::new();
        for &i in &frontier {
            for &j in &adj[i] {
                if !member[j] {
                    member[j] = true;
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    (0..n).filter(|&i| member[i]).collect()
}

/// One-level additive Schwarz, `z = Σ R_sᵀ A_s⁻¹ R_s r`.
#[derive(Debug, Clone)]
pub struct Asm {
    n: usize,
    sets: Vec<Vec<usize>>,
    solvers: Vec<BandedLu>,
    spd: bool,
}

impl Asm {
    pub fn new(a: &CsrMatrix, partition: &Partition) -> Result<Self> {
        Self::from_sets(a, partition.overlapping.clone())
    }

    pub fn from_sets(a: &CsrMatrix, sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = a.n_rows();
        let mut solvers = Vec::with_capacity(sets.len());
        let mut spd = is_symmetric(a);
        for (s, set) in sets.iter().enumerate() {
            if set.is_empty() || set.iter().any(|&i| i >= n) {
                return Err(Error::invalid(format!("subdomain {s} has an invalid index set")));
            }
            let local = a.submatrix(set);
            let lu = BandedLu::factor(&local).map_err(|_| Error::SingularSubdomain { subdomain: s })?;
            spd = spd && is_positive_definite(&local);
            solvers.push(lu);
        }
        Ok(Self { n, sets, solvers, spd })
    }

    pub fn n_subdomains(&self) -> usize {
        self.sets.len()
    }
}

impl Preconditioner for Asm {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("Asm::apply", self.n, r)?;
        let mut z = vec![0.0; self.n];
        for (set, lu) in self.sets.iter().zip(&self.solvers) {
            let local: Vec<f64> = set.iter().map(|&i| r[i]).collect();
            let y = lu.solve(&local)?;
            for (&i, v) in set.iter().zip(y) {
                z[i] += v;
            }
        }
        Ok(z)
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn is_spd(&self) -> bool {
        self.spd
    }
    fn label(&self) -> String {
        format!("asm(S={})", self.sets.len())
    }
}
