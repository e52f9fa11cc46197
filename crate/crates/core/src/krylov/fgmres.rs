use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::precond::Preconditioner;

use super::{a_norm, initial, SolveReport, StopCriteria, Termination};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgmresOptions {
    /// Restart length `m`.
    pub restart: usize,
    /// Second Gram-Schmidt pass against the basis.
    pub reorthogonalize: bool,
    /// Record Z, V and H̄ of every cycle.
    pub capture: bool,
}

impl Default for FgmresOptions {
    fn default() -> Self {
        Self { restart: 50, reorthogonalize: false, capture: false }
    }
}

/// Flexible Arnoldi data of one restart cycle: `A Z = V H̄`.
#[derive(Debug, Clone)]
pub struct ArnoldiCapture {
    pub z: DenseMatrix,
    pub v: DenseMatrix,
    pub hbar: DenseMatrix,
    /// Least-squares residual `‖ζ e₁ − H̄ y‖` at cycle end.
    pub implicit_residual: f64,
    /// `‖f − A u‖` after the cycle's update.
    pub explicit_residual: f64,
}

/// Restarted flexible GMRES with right preconditioning; `m` may be nonlinear.
pub fn fgmres(
    a: &CsrMatrix,
    f: &[f64],
    m: &dyn Preconditioner,
    x0: &[f64],
    stop: &StopCriteria,
    opts: &FgmresOptions,
) -> Result<(SolveReport, Vec<ArnoldiCapture>)> {
    stop.validate()?;
    if opts.restart == 0 {
        return Err(Error::invalid("restart length must be at least 1"));
    }
    let n = a.n_rows();
    if m.dim() != n {
        return Err(Error::dim("fgmres: preconditioner", n, m.dim()));
    }
    let (mut r, r0) = initial(a, f, x0)?;
    let mut x = x0.to_vec();
    let mut history = vec![r0];
    let mut captures = Vec::new();
    let report = |x: Vec<f64>, history: Vec<f64>, t| SolveReport {
        iterations: history.len() - 1,
        residual_history: history,
        termination: t,
        solution: x,
    };
    if let Some(t) = stop.check(r0, r0, None, 0) {
        return Ok((report(x, history, t), captures));
    }
    let mm = opts.restart;
    loop {
        let beta = norm2(&r);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(mm);
        // Columns of H̄ before and after Givens rotations.
        let mut h_raw: Vec<Vec<f64>> = Vec::with_capacity(mm);
        let mut h_rot: Vec<Vec<f64>> = Vec::with_capacity(mm);
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(mm), Vec::with_capacity(mm));
        let mut g = vec![beta];
        let mut y_prev: Vec<f64> = Vec::new();
        let mut outcome = None;
        let mut breakdown = false;
        for j in 0..mm {
            let zj = m.apply(&v[j])?;
            let mut w = a.spmv(&zj)?;
            z.push(zj);
            let w_norm0 = norm2(&w);
            let mut h = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                h[i] = dot(&w, vi);
                axpy(-h[i], vi, &mut w);
            }
            if opts.reorthogonalize {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    h[i] += c;
                    axpy(-c, vi, &mut w);
                }
            }
            let hn = norm2(&w);
            h[j + 1] = hn;
            h_raw.push(h.clone());
            for i in 0..j {
                let (c, s): (f64, f64) = (cs[i], sn[i]);
                let (a0, a1) = (h[i], h[i + 1]);
                h[i] = c * a0 + s * a1;
                h[i + 1] = -s * a0 + c * a1;
            }
            let denom = h[j].hypot(h[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[j] / denom, h[j + 1] / denom) };
            cs.push(c);
            sn.push(s);
            h[j] = denom;
            h[j + 1] = 0.0;
            g.push(-s * g[j]);
            g[j] *= c;
            h_rot.push(h);
            let res = g[j + 1].abs();
            history.push(res);

            let inc = match stop.a_norm_increment {
                Some(_) => {
                    let y = back_substitute(&h_rot, &g)?;
                    let mut du = vec![0.0; n];
                    for (k, zk) in z.iter().enumerate() {
                        axpy(y[k] - y_prev.get(k).copied().unwrap_or(0.0), zk, &mut du);
                    }
                    y_prev = y;
                    Some(a_norm(dot(&du, &a.spmv(&du)?)))
                }
                None => None,
            };
            if hn > 0.0 {
                v.push(w.iter().map(|wi| wi / hn).collect());
            } else {
                v.push(vec![0.0; n]);
            }
            outcome = stop.check(res, r0, inc, history.len() - 1);
            breakdown = hn <= 1e-14 * w_norm0;
            if outcome.is_some() || breakdown {
                break;
            }
        }
        let k = z.len();
        let y = back_substitute(&h_rot, &g)?;
        for (zk, yk) in z.iter().zip(&y) {
            axpy(*yk, zk, &mut x);
        }
        r = a.residual(f, &x)?;
        if opts.capture {
            captures.push(ArnoldiCapture {
                z: DenseMatrix::from_columns(&z)?,
                v: DenseMatrix::from_columns(&v)?,
                hbar: DenseMatrix::from_fn(k + 1, k, |i, jj| h_raw[jj].get(i).copied().unwrap_or(0.0)),
                implicit_residual: g[k].abs(),
                explicit_residual: norm2(&r),
            });
        }
        if let Some(t) = outcome {
            return Ok((report(x, history, t), captures));
        }
        if breakdown {
            let res = norm2(&r);
            let t = stop.check(res, r0, None, usize::MAX).filter(|t| t.converged());
            return Ok((report(x, history, t.unwrap_or(Termination::Breakdown)), captures));
        }
    }
}

/// Solve the leading k×k triangle of the rotated H̄ for `y`.
fn back_substitute(h: &[Vec<f64>], g: &[f64]) -> Result<Vec<f64>> {
    let k = h.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in (i + 1)..k {
            s -= h[j][i] * y[j];
        }
        if h[i][i] == 0.0 {
            return Err(Error::SingularPivot { column: i, pivot: 0.0 });
        }
        y[i] = s / h[i][i];
    }
    Ok(y)
}
