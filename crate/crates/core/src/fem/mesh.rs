use crate::error::{Error, Result};

/// Uniform structured mesh of [0,1]^dim split into P1 simplices.
///
/// Nodes are numbered lexicographically with the x index running fastest.
/// Squares are cut along the (0,0)-(1,1) diagonal; cubes into the six
/// Kuhn tetrahedra sharing the main diagonal, so uniform refinement nests.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    dim: usize,
    cells: usize,
    coords: Vec<f64>,
    elements: Vec<usize>,
    dirichlet: Vec<bool>,
}

impl StructuredMesh {
    pub fn new(dim: usize, cells: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("mesh dimension {dim} not in 1..=3")));
        }
        if cells < 2 {
            return Err(Error::invalid("a structured mesh needs at least 2 cells per axis"));
        }
        let per_axis = cells + 1;
        let n = per_axis.pow(dim as u32);
        let h = 1.0 / cells as f64;
        let mut coords = Vec::with_capacity(n * dim);
        let mut dirichlet = Vec::with_capacity(n);
        for node in 0..n {
            let idx = grid_index(node, per_axis, dim);
            let mut on_boundary = false;
            for &i in &idx[..dim] {
                coords.push(i as f64 * h);
                on_boundary |= i == 0 || i == cells;
            }
            dirichlet.push(on_boundary);
        }
        let mut elements = Vec::new();
        let n_cells = cells.pow(dim as u32);
        for cell in 0..n_cells {
            let c = grid_index(cell, cells, dim);
            let node = |offset: [usize; 3]| -> usize {
                let mut id = 0;
                let mut stride = 1;
                for a in 0..dim {
                    id += (c[a] + offset[a]) * stride;
                    stride *= per_axis;
                }
                id
            };
            match dim {
                1 => elements.extend([node([0, 0, 0]), node([1, 0, 0])]),
                2 => {
                    let (n00, n10, n01, n11) =
                        (node([0, 0, 0]), node([1, 0, 0]), node([0, 1, 0]), node([1, 1, 0]));
                    elements.extend([n00, n10, n11]);
                    elements.extend([n00, n11, n01]);
                }
                _ => {
                    // Kuhn split: one tet per permutation of the axes
                    for perm in KUHN_PERMUTATIONS {
                        let mut off = [0usize; 3];
                        elements.push(node(off));
                        for axis in perm {
                            off[axis] = 1;
                            elements.push(node(off));
                        }
                    }
                }
            }
        }
        Ok(Self { dim, cells, coords, elements, dirichlet })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.cells + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len() / self.nodes_per_element()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.nodes_per_element();
        &self.elements[e * k..(e + 1) * k]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.elements.chunks_exact(self.nodes_per_element())
    }

    pub fn coord(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    /// Flat row-major n×dim coordinate array.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| !self.dirichlet[i]).collect()
    }

    /// Per-axis grid index of a node.
    pub fn node_index(&self, node: usize) -> [usize; 3] {
        grid_index(node, self.nodes_per_axis(), self.dim)
    }

    pub fn node_at(&self, idx: [usize; 3]) -> usize {
        let per_axis = self.nodes_per_axis();
        let mut id = 0;
        let mut stride = 1;
        for &i in &idx[..self.dim] {
            id += i * stride;
            stride *= per_axis;
        }
        id
    }

    /// Centroid of element `e`.
    pub fn centroid(&self, e: usize) -> Vec<f64> {
        let nodes = self.element(e);
        let mut c = vec![0.0; self.dim];
        for &n in nodes {
            for (ci, x) in c.iter_mut().zip(self.coord(n)) {
                *ci += x;
            }
        }
        c.iter_mut().for_each(|v| *v /= nodes.len() as f64);
        c
    }

    /// Node adjacency through shared elements, sorted, without self loops.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for el in self.elements() {
            for &a in el {
                for &b in el {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Mesh obtained by halving every cell.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dim, 2 * self.cells)
    }
}

const KUHN_PERMUTATIONS: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn grid_index(mut id: usize, per_axis: usize, dim: usize) -> [usize; 3] {
    let mut idx = [0usize; 3];
    for slot in idx.iter_mut().take(dim) {
        *slot = id % per_axis;
        id /= per_axis;
    }
    idx
}

/// Cells per axis of mesh level `level` (1-based) in the benchmark hierarchy:
/// 39·2^(l-1) in 2D and 15·2^(l-1) in 3D.
pub fn level_cells(dim: usize, level: u32) -> Result<usize> {
    if level == 0 {
        return Err(Error::invalid("mesh levels start at 1"));
    }
    let base = match dim {
        2 => 39,
        3 => 15,
        _ => return Err(Error::invalid(format!("no benchmark hierarchy in {dim}D"))),
    };
    Ok(base << (level - 1))
}
