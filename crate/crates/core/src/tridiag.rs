//! Thomas algorithm for tridiagonal systems.
//!
//! All implicit solves in the crate (stationary Newton steps, the IMEX
//! diffusion updates, the pinned v-equation) reduce to tridiagonal systems,
//! so this is the only linear algebra needed.

/// A tridiagonal system `A x = d` with diagonals stored as three vectors.
///
/// `sub[0]` and `sup[n-1]` are unused. The solver overwrites nothing; it
/// keeps scratch space internal so a solver can be reused across steps.
#[derive(Debug, Clone)]
pub struct Tridiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiag {
    pub fn zeros(n: usize) -> Tridiag {
        Tridiag {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Solves `A x = rhs`, writing the solution over `rhs`.
    ///
    /// Returns `None` on a zero pivot (singular system). `scratch` must
    /// have length n and is clobbered.
    pub fn solve_in_place(&self, rhs: &mut [f64], scratch: &mut [f64]) -> Option<()> {
        let n = self.n();
        debug_assert_eq!(rhs.len(), n);
        debug_assert_eq!(scratch.len(), n);

        // forward sweep: scratch holds the modified super-diagonal
        let mut pivot = self.diag[0];
        if pivot == 0.0 {
            return None;
        }
        scratch[0] = self.sup[0] / pivot;
        rhs[0] /= pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.sub[i] * scratch[i - 1];
            if pivot == 0.0 {
                return None;
            }
            if i < n - 1 {
                scratch[i] = self.sup[i] / pivot;
            }
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) / pivot;
        }

        // back substitution
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
        Some(())
    }

    /// Convenience wrapper allocating its own scratch and output.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let mut x = rhs.to_vec();
        let mut scratch = vec![0.0; self.n()];
        self.solve_in_place(&mut x, &mut scratch)?;
        Some(x)
    }

    /// Computes `A x` (for residual checks in tests).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sub[i] * x[i - 1];
            }
            if i < n - 1 {
                s += self.sup[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }
}
