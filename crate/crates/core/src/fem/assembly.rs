use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};

use super::mesh::StructuredMesh;

/// Geometry of one P1 simplex: volume and barycentric gradients.
struct ElementGeometry {
    volume: f64,
    /// grads[a][i]: derivative of the a-th barycentric function along axis i.
    grads: [[f64; 3]; 4],
}

fn element_geometry(mesh: &StructuredMesh, el: &[usize]) -> ElementGeometry {
    let d = mesh.dim();
    let x0 = mesh.coord(el[0]);
    // Columns of J are the edge vectors x_a - x_0.
    let mut j = [[0.0; 3]; 3];
    for (c, &n) in el[1..].iter().enumerate() {
        let x = mesh.coord(n);
        for r in 0..d {
            j[r][c] = x[r] - x0[r];
        }
    }
    let (det, inv) = invert(&j, d);
    let fact = [1.0, 1.0, 2.0, 6.0][d];
    // grad λ_a (a ≥ 1) is row a-1 of J⁻¹; grad λ_0 = -Σ of the others.
    let mut grads = [[0.0; 3]; 4];
    for a in 1..=d {
        for i in 0..d {
            grads[a][i] = inv[a - 1][i];
            grads[0][i] -= inv[a - 1][i];
        }
    }
    ElementGeometry { volume: det.abs() / fact, grads }
}

fn invert(j: &[[f64; 3]; 3], d: usize) -> (f64, [[f64; 3]; 3]) {
    let mut inv = [[0.0; 3]; 3];
    let det = match d {
        1 => {
            inv[0][0] = 1.0 / j[0][0];
            j[0][0]
        }
        2 => {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
            det
        }
        _ => {
            let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
                j[r0][c0] * j[r1][c1] - j[r0][c1] * j[r1][c0]
            };
            let det = j[0][0] * cof(1, 2, 1, 2) - j[0][1] * cof(1, 2, 0, 2)
                + j[0][2] * cof(1, 2, 0, 1);
            // adjugate / det
            inv[0][0] = cof(1, 2, 1, 2) / det;
            inv[0][1] = -cof(0, 2, 1, 2) / det;
            inv[0][2] = cof(0, 1, 1, 2) / det;
            inv[1][0] = -cof(1, 2, 0, 2) / det;
            inv[1][1] = cof(0, 2, 0, 2) / det;
            inv[1][2] = -cof(0, 1, 0, 2) / det;
            inv[2][0] = cof(1, 2, 0, 1) / det;
            inv[2][1] = -cof(0, 2, 0, 1) / det;
            inv[2][2] = cof(0, 1, 0, 1) / det;
            det
        }
    };
    (det, inv)
}

/// Stiffness `K_e` scaled by `kappa[e]` plus `shift · M_e`, without boundary treatment.
fn assemble_raw(mesh: &StructuredMesh, kappa: Option<&[f64]>, shift: f64, stiff: bool) -> CsrMatrix {
    let n = mesh.n_nodes();
    let d = mesh.dim();
    let k = d + 1;
    let mut tb = TripletBuilder::with_capacity(n, n, mesh.n_elements() * k * k);
    for (e, el) in mesh.elements().enumerate() {
        let g = element_geometry(mesh, el);
        let coef = kappa.map_or(1.0, |kv| kv[e]);
        let mass_scale = g.volume / ((k * (k + 1)) as f64);
        for a in 0..k {
            for b in 0..k {
                let mut v = 0.0;
                if stiff {
                    let gg: f64 = (0..d).map(|i| g.grads[a][i] * g.grads[b][i]).sum();
                    v += coef * g.volume * gg;
                }
                if shift != 0.0 {
                    v += shift * mass_scale * if a == b { 2.0 } else { 1.0 };
                }
                tb.push(el[a], el[b], v);
            }
        }
    }
    tb.build()
}

/// Replace Dirichlet rows and columns by identity rows and columns.
pub fn eliminate_dirichlet(a: &CsrMatrix, mask: &[bool]) -> Result<CsrMatrix> {
    if mask.len() != a.n_rows() || a.n_rows() != a.n_cols() {
        return Err(Error::dim("eliminate_dirichlet", a.n_rows(), mask.len()));
    }
    let mut tb = TripletBuilder::with_capacity(a.n_rows(), a.n_cols(), a.nnz());
    for i in 0..a.n_rows() {
        if mask[i] {
            tb.push(i, i, 1.0);
            continue;
        }
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if !mask[j] {
                tb.push(i, j, v);
            }
        }
    }
    Ok(tb.build())
}

/// Per-element coefficient as the mean of its nodal values.
pub fn nodal_to_element(mesh: &StructuredMesh, nodal: &[f64]) -> Result<Vec<f64>> {
    if nodal.len() != mesh.n_nodes() {
        return Err(Error::dim("nodal_to_element", mesh.n_nodes(), nodal.len()));
    }
    let k = mesh.nodes_per_element() as f64;
    Ok(mesh.elements().map(|el| el.iter().map(|&n| nodal[n]).sum::<f64>() / k).collect())
}

/// `-∇·(K∇u)` with element coefficient equal to the mean nodal `K`.
pub fn assemble_diffusion(mesh: &StructuredMesh, k_nodal: &[f64]) -> Result<CsrMatrix> {
    if k_nodal.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::invalid("diffusion coefficient must be positive and finite"));
    }
    let k_elem = nodal_to_element(mesh, k_nodal)?;
    assemble_diffusion_elementwise(mesh, &k_elem)
}

/// `-∇·(K∇u)` with one coefficient per element.
pub fn assemble_diffusion_elementwise(mesh: &StructuredMesh, k_elem: &[f64]) -> Result<CsrMatrix> {
    if k_elem.len() != mesh.n_elements() {
        return Err(Error::dim("assemble_diffusion_elementwise", mesh.n_elements(), k_elem.len()));
    }
    if k_elem.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::invalid("diffusion coefficient must be positive and finite"));
    }
    eliminate_dirichlet(&assemble_raw(mesh, Some(k_elem), 0.0, true), mesh.dirichlet_mask())
}

/// Largest mesh size resolving wave number `k_h` with five points per half wavelength.
pub fn helmholtz_h_bound(k_h: f64) -> f64 {
    std::f64::consts::PI / (5.0 * k_h)
}

/// `-Δu - k_H² u`. Fails when `h > π/(5 k_H)` unless `allow_underresolved`.
pub fn assemble_helmholtz(mesh: &StructuredMesh, k_h: f64, allow_underresolved: bool) -> Result<CsrMatrix> {
    if !k_h.is_finite() || k_h < 0.0 {
        return Err(Error::invalid("wave number must be finite and nonnegative"));
    }
    if k_h > 0.0 && !allow_underresolved {
        let bound = helmholtz_h_bound(k_h);
        if mesh.h() > bound * (1.0 + 1e-12) {
            return Err(Error::UnderResolved { h: mesh.h(), bound });
        }
    }
    eliminate_dirichlet(&assemble_raw(mesh, None, -k_h * k_h, true), mesh.dirichlet_mask())
}

/// Consistent P1 mass matrix on all nodes (no boundary treatment).
pub fn assemble_mass(mesh: &StructuredMesh) -> CsrMatrix {
    assemble_raw(mesh, None, 1.0, false)
}

/// Row sums of the consistent mass matrix.
pub fn lump_mass(mesh: &StructuredMesh) -> Vec<f64> {
    let m = assemble_mass(mesh);
    (0..m.n_rows()).map(|i| m.row(i).1.iter().sum()).collect()
}

/// Load vector `M f` for a nodal forcing, zeroed on Dirichlet nodes.
pub fn load_vector(mesh: &StructuredMesh, f_nodal: &[f64]) -> Result<Vec<f64>> {
    let mut b = assemble_mass(mesh).spmv(f_nodal)?;
    for (bi, &dir) in b.iter_mut().zip(mesh.dirichlet_mask()) {
        if dir {
            *bi = 0.0;
        }
    }
    Ok(b)
}
