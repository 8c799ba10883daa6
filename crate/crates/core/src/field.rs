//! Uniform nodal grids on `[0, 1]` and the discrete calculus used
//! throughout the crate.
//!
//! The grid is vertex-centered: node `i` sits at `x_i = i / (n - 1)`, so
//! Dirichlet data lands exactly on the boundary nodes. All quadrature is
//! composite trapezoid, and [`Field::antiderivative`] accumulates the same
//! panel sums as [`Field::integrate`], which makes the endpoint identity
//! `antiderivative(f)[n-1] == integrate(f)` hold bit-exactly.

use crate::{Error, Result};

/// Uniform mesh of `n >= 3` nodes on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Grid> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("grid needs n >= 3 nodes, got {n}")));
        }
        Ok(Grid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing h = 1/(n-1).
    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    /// Node coordinate; `node(0) == 0.0` and `node(n-1) == 1.0` exactly.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        i as f64 / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }
}

/// Real-valued nodal function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

/// Discrete norms of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// sqrt of the trapezoid integral of f².
    pub l2: f64,
    /// max |f_i|.
    pub linf: f64,
    /// L² norm of the discrete derivative.
    pub h1_semi: f64,
}

impl Field {
    /// Wraps raw nodal values; rejects shape mismatches and non-finite entries.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n() {
            return Err(Error::InvalidInput(format!(
                "field length {} does not match grid n = {}",
                values.len(),
                grid.n()
            )));
        }
        let f = Field { grid, values };
        f.check_finite("Field::new")?;
        Ok(f)
    }

    pub fn zeros(grid: Grid) -> Field {
        Field { grid, values: vec![0.0; grid.n()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Field {
        Field { grid, values: vec![c; grid.n()] }
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Field {
        let values = grid.nodes().map(f).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { context })
        }
    }

    /// Composite trapezoid approximation of ∫₀¹ f dx; exact for affine f.
    pub fn integrate(&self) -> f64 {
        trapezoid_sum(&self.values, self.grid.h(), |_, _| ())
    }

    /// Cumulative trapezoid F(x_i) = ∫₀^{x_i} f dy with F(0) = 0.
    ///
    /// Shares its panel accumulation with [`Field::integrate`], so the
    /// last entry equals `integrate()` bit-exactly.
    pub fn antiderivative(&self) -> Field {
        let mut out = vec![0.0; self.values.len()];
        trapezoid_sum(&self.values, self.grid.h(), |i, partial| out[i + 1] = partial);
        Field { grid: self.grid, values: out }
    }

    /// Second-order derivative: centered in the interior, one-sided
    /// three-point stencils at the endpoints.
    pub fn derivative(&self) -> Field {
        let n = self.grid.n();
        let h = self.grid.h();
        let f = &self.values;
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        for i in 1..n - 1 {
            d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        }
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
        Field { grid: self.grid, values: d }
    }

    pub fn norms(&self) -> Norms {
        let sq = Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * v).collect(),
        };
        let l2 = sq.integrate().max(0.0).sqrt();
        let linf = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let h1_semi = self.derivative().norms_l2_only();
        Norms { l2, linf, h1_semi }
    }

    fn norms_l2_only(&self) -> f64 {
        let sq = Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * v).collect(),
        };
        sq.integrate().max(0.0).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// max |self - other| over nodes.
    pub fn linf_distance(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Nodewise combination a*self + b*other.
    pub fn linear_combination(&self, a: f64, other: &Field, b: f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Field { grid: self.grid, values }
    }
}

/// Accumulates trapezoid panels left to right, invoking `record(i, partial)`
/// after adding panel `[x_i, x_{i+1}]`. Returns the total.
fn trapezoid_sum(values: &[f64], h: f64, mut record: impl FnMut(usize, f64)) -> f64 {
    let mut acc = 0.0;
    for i in 0..values.len() - 1 {
        acc += 0.5 * h * (values[i] + values[i + 1]);
        record(i, acc);
    }
    acc
}

/// Trapezoid weights: h at interior nodes, h/2 at the two boundary nodes.
pub(crate) fn trapezoid_weight(grid: Grid, i: usize) -> f64 {
    let h = grid.h();
    if i == 0 || i == grid.n() - 1 {
        0.5 * h
    } else {
        h
    }
}
