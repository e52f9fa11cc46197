use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::linalg::CsrMatrix;
use crate::precond::Preconditioner;

use super::{a_norm, initial, SolveReport, StopCriteria, Termination};

/// Preconditioned conjugate gradients. `m` must be linear and SPD.
pub fn pcg(a: &CsrMatrix, f: &[f64], m: &dyn Preconditioner, x0: &[f64], stop: &StopCriteria) -> Result<SolveReport> {
    pcg_observed(a, f, m, x0, stop, |_, _, _| {})
}

/// [`pcg`] calling `observe(i, r_i, z_i)` for every preconditioned residual.
pub fn pcg_observed<O>(
    a: &CsrMatrix,
    f: &[f64],
    m: &dyn Preconditioner,
    x0: &[f64],
    stop: &StopCriteria,
    mut observe: O,
) -> Result<SolveReport>
where
    O: FnMut(usize, &[f64], &[f64]),
{
    stop.validate()?;
    if !(m.is_linear() && m.is_spd()) {
        return Err(Error::Contract { label: m.label(), required: "linear and SPD" });
    }
    if m.dim() != a.n_rows() {
        return Err(Error::dim("pcg: preconditioner", a.n_rows(), m.dim()));
    }
    let (mut r, r0) = initial(a, f, x0)?;
    let mut x = x0.to_vec();
    let mut history = vec![r0];
    let done = |x: Vec<f64>, history: Vec<f64>, t| SolveReport {
        iterations: history.len() - 1,
        residual_history: history,
        termination: t,
        solution: x,
    };
    if let Some(t) = stop.check(r0, r0, None, 0) {
        return Ok(done(x, history, t));
    }
    let mut z = m.apply(&r)?;
    observe(0, &r, &z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; x.len()];
    loop {
        if !(rz > 0.0) {
            return Ok(done(x, history, Termination::Breakdown));
        }
        a.spmv_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Ok(done(x, history, Termination::Breakdown));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let res = norm2(&r);
        history.push(res);
        let inc = stop.a_norm_increment.map(|_| alpha.abs() * a_norm(pap));
        if let Some(t) = stop.check(res, r0, inc, history.len() - 1) {
            return Ok(done(x, history, t));
        }
        z = m.apply(&r)?;
        observe(history.len() - 1, &r, &z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
}
