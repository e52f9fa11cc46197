use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::vector::axpy;
use crate::linalg::CsrMatrix;

use super::{check_len, Preconditioner, SharedPrec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionMode {
    /// `z_s = z_{s−1} + γ_s M_s (r − A z_{s−1})`, so `E = Π (I − γ_s A M_s)`.
    Multiplicative,
    /// `z = Σ γ_s M_s r`, so `E = I − Σ γ_s A M_s`.
    Additive,
}

/// Ordered combination of preconditioners with per-part weights.
#[derive(Clone)]
pub struct Composite {
    a: Arc<CsrMatrix>,
    parts: Vec<(SharedPrec, f64)>,
    mode: CompositionMode,
}

impl Composite {
    pub fn new(a: Arc<CsrMatrix>, parts: Vec<(SharedPrec, f64)>, mode: CompositionMode) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("composite preconditioner needs at least one part"));
        }
        let n = a.n_rows();
        if let Some((p, _)) = parts.iter().find(|(p, _)| p.dim() != n) {
            return Err(Error::dim("Composite::new", n, p.dim()));
        }
        Ok(Self { a, parts, mode })
    }

    pub fn multiplicative(a: Arc<CsrMatrix>, parts: Vec<SharedPrec>) -> Result<Self> {
        Self::new(a, parts.into_iter().map(|p| (p, 1.0)).collect(), CompositionMode::Multiplicative)
    }

    pub fn additive(a: Arc<CsrMatrix>, parts: Vec<SharedPrec>) -> Result<Self> {
        Self::new(a, parts.into_iter().map(|p| (p, 1.0)).collect(), CompositionMode::Additive)
    }

    pub fn mode(&self) -> CompositionMode {
        self.mode
    }

    pub fn parts(&self) -> &[(SharedPrec, f64)] {
        &self.parts
    }

    fn same_part(x: &(SharedPrec, f64), y: &(SharedPrec, f64)) -> bool {
        x.1 == y.1 && (Arc::ptr_eq(&x.0, &y.0) || x.0.label() == y.0.label())
    }
}

impl Preconditioner for Composite {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let n = self.a.n_rows();
        check_len("Composite::apply", n, r)?;
        let mut z = vec![0.0; n];
        match self.mode {
            CompositionMode::Additive => {
                for (p, g) in &self.parts {
                    axpy(*g, &p.apply(r)?, &mut z);
                }
            }
            CompositionMode::Multiplicative => {
                let mut res = r.to_vec();
                for (s, (p, g)) in self.parts.iter().enumerate() {
                    if s > 0 {
                        res = self.a.residual(r, &z)?;
                    }
                    axpy(*g, &p.apply(&res)?, &mut z);
                }
            }
        }
        Ok(z)
    }

    fn dim(&self) -> usize {
        self.a.n_rows()
    }

    fn is_linear(&self) -> bool {
        self.parts.iter().all(|(p, _)| p.is_linear())
    }

    /// Additive: every part SPD with a positive weight. Multiplicative:
    /// additionally the part sequence must read the same backwards, which
    /// makes `(I − E) A⁻¹` symmetric.
    fn is_spd(&self) -> bool {
        let parts_ok = self.parts.iter().all(|(p, g)| p.is_spd() && p.is_linear() && *g > 0.0);
        match self.mode {
            CompositionMode::Additive => parts_ok,
            CompositionMode::Multiplicative => {
                let k = self.parts.len();
                parts_ok && (0..k / 2).all(|i| Self::same_part(&self.parts[i], &self.parts[k - 1 - i]))
            }
        }
    }

    fn label(&self) -> String {
        let name = match self.mode {
            CompositionMode::Multiplicative => "mult",
            CompositionMode::Additive => "add",
        };
        let inner: Vec<String> = self
            .parts
            .iter()
            .map(|(p, g)| if *g == 1.0 { p.label() } else { format!("{g}*{}", p.label()) })
            .collect();
        format!("{name}({})", inner.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::{Identity, Jacobi};

    #[test]
    fn single_part_is_transparent() {
        let a = Arc::new(CsrMatrix::identity(4).scaled(3.0));
        let j: SharedPrec = Arc::new(Jacobi::new(a.clone(), 0.5, 2).unwrap());
        let r = [1.0, -2.0, 0.5, 4.0];
        for mode in [CompositionMode::Multiplicative, CompositionMode::Additive] {
            let c = Composite::new(a.clone(), vec![(j.clone(), 1.0)], mode).unwrap();
            assert_eq!(c.apply(&r).unwrap(), j.apply(&r).unwrap());
        }
    }

    #[test]
    fn spd_flag_follows_palindrome_rule() {
        let a = Arc::new(CsrMatrix::identity(3));
        let j: SharedPrec = Arc::new(Jacobi::new(a.clone(), 0.5, 1).unwrap());
        let i: SharedPrec = Arc::new(Identity::new(3));
        assert!(Composite::multiplicative(a.clone(), vec![j.clone(), i.clone(), j.clone()]).unwrap().is_spd());
        assert!(!Composite::multiplicative(a.clone(), vec![j.clone(), i.clone()]).unwrap().is_spd());
        assert!(Composite::additive(a.clone(), vec![j.clone(), i.clone()]).unwrap().is_spd());
        assert!(Composite::multiplicative(a, vec![]).is_err());
    }
}
