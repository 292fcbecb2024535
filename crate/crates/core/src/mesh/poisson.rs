use crate::error::{Error, Result};
use crate::numerics::{max_abs, norm2, SparseLu, SparseMatrix};

/// Factorized regularized Poisson operator `Lbar`.
///
/// When `L` annihilates constants (closed or periodic domains) the system is
/// bordered with one Lagrange multiplier enforcing zero mean pressure; otherwise
/// `Lbar = L` is factorized directly.
#[derive(Debug)]
pub struct PoissonSolver {
    n: usize,
    bordered: bool,
    a: SparseMatrix,
    lu: SparseLu,
}

/// Relative residual every Poisson solve has to meet.
pub const POISSON_TOL: f64 = 1e-10;

impl PoissonSolver {
    pub fn new(l: &SparseMatrix) -> Result<Self> {
        let n = l.nrows();
        let scale = l.max_abs().max(f64::MIN_POSITIVE);
        let constant_null = max_abs(&l.row_sums()) <= 1e-12 * scale;
        if !constant_null {
            if let Ok(lu) = SparseLu::new(l) {
                return Ok(Self {
                    n,
                    bordered: false,
                    a: l.clone(),
                    lu,
                });
            }
        }
        let mut t = l.triplets();
        for i in 0..n {
            t.push((i, n, 1.0));
            t.push((n, i, 1.0));
        }
        let a = SparseMatrix::from_triplets(n + 1, n + 1, &t);
        let lu = SparseLu::new(&a)?;
        Ok(Self {
            n,
            bordered: true,
            a,
            lu,
        })
    }

    /// True when the mean-pressure constraint was added.
    pub fn is_bordered(&self) -> bool {
        self.bordered
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Applies `Lbar^-1`, failing if the residual contract is breached.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Dimension {
                context: "Poisson right-hand side",
                expected: self.n,
                got: rhs.len(),
            });
        }
        let b: Vec<f64> = if self.bordered {
            rhs.iter().copied().chain(std::iter::once(0.0)).collect()
        } else {
            rhs.to_vec()
        };
        let x = self.lu.solve(&b);
        let r = self.a.mul_vec(&x);
        let res = norm2(&r.iter().zip(&b).map(|(a, b)| a - b).collect::<Vec<_>>());
        let bn = norm2(&b);
        if !res.is_finite() || res > POISSON_TOL * bn.max(f64::MIN_POSITIVE) && res > 1e-300 {
            return Err(Error::Residual {
                context: "Poisson solve",
                residual: res / bn.max(f64::MIN_POSITIVE),
                tol: POISSON_TOL,
            });
        }
        Ok(x[..self.n].to_vec())
    }
}
