//! Stationary states of the system for D > 0.
//!
//! Reducing the stationary problem by the zero-flux identity
//! `ū_x - ū v̄_x = 0` and mass normalization gives `ū = λ e^v̄` with
//! `λ = M / ∫ e^v̄`, so it suffices to solve the semilinear Dirichlet
//! problem
//!
//! ```text
//! D v̄'' = λ e^v̄ v̄,    v̄(0) = v̄(1) = v*,
//! ```
//!
//! with λ determined by an outer fixed point. The inner problem is solved
//! by damped Newton with the tridiagonal Jacobian `D Δ_h - λ e^v̄ (1 + v̄)`.
//! λ is frozen during each inner solve; the outer loop terminates when the
//! λ update is below tolerance and the full nonlinear residual (with the
//! updated λ) is below tolerance in the sup norm.

use serde::Serialize;

use crate::field::{Field, Grid};
use crate::model::ModelParams;
use crate::tridiag::Tridiag;
use crate::{Error, Result};

/// Converged stationary pair (ū, v̄) with its mass multiplier λ.
///
/// `u_bar` is always computed as `λ e^v̄`, never stored independently, so
/// the structural identity holds to machine precision by construction.
#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub params: ModelParams,
    pub v_bar: Field,
    pub u_bar: Field,
    /// λ = M / ∫ e^v̄ (trapezoid quadrature).
    pub lambda: f64,
    /// Total inner Newton iterations across all outer passes.
    pub newton_iters: usize,
    /// Outer λ fixed-point passes used by the final solve.
    pub outer_iters: usize,
    /// Sup-norm residual of D Δ_h v̄ - λ e^v̄ v̄ at interior nodes.
    pub residual_inf: f64,
}

/// Structural checks on a converged solution; values are reported, the
/// caller decides what to enforce.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// min over nodes of v̄²ū - D v̄_x² (negative = inequality violated).
    pub lemma_slack_min: f64,
    /// max over nodes of v̄²ū (scale for the slack).
    pub lemma_scale: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// sup |ū_x - ū v̄_x| with the discrete derivative.
    pub flux_sup: f64,
    /// sup |ū - λ e^v̄| (zero by construction unless the pair was edited).
    pub identity_sup: f64,
    /// |∫ū - M|.
    pub mass_defect: f64,
}

/// One entry of a continuation sweep in D.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub solution: StationarySolution,
    /// Smallest grid node x with v̄(x) <= v*/2 (left side); `None` when the
    /// profile never dips that low (large D).
    pub layer_width: Option<f64>,
}

/// Default sup-norm tolerance on the stationary residual.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default outer iteration budget.
pub const DEFAULT_MAX_OUTER: usize = 50;

const MAX_INNER: usize = 50;
const MAX_HALVINGS: usize = 30;
/// Below this D the constant initial guess is warmed up by a factor-2
/// continuation ladder in D.
const CONTINUATION_THRESHOLD: f64 = 0.5;

/// Solves the stationary problem for D > 0.
///
/// The initial guess is v̄ ≡ v*; for D below 0.5 the solve continues down
/// a geometric ladder in D, warm-starting each stage from the previous
/// profile. The degenerate M = 0 case (zero consumption) returns the exact
/// pair v̄ ≡ v*, ū ≡ 0 without iterating.
pub fn solve_stationary(
    params: &ModelParams,
    grid: Grid,
    tol: f64,
    max_outer: usize,
) -> Result<StationarySolution> {
    params.validate()?;
    if params.d <= 0.0 {
        return Err(Error::InvalidInput(
            "solve_stationary requires D > 0; the D = 0 steady state is the constant (M, 0)".into(),
        ));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
    }

    if params.mass == 0.0 {
        // v̄ is harmonic with equal boundary values, hence constant.
        let v_bar = Field::constant(grid, params.v_star);
        let u_bar = Field::zeros(grid);
        return Ok(StationarySolution {
            params: *params,
            v_bar,
            u_bar,
            lambda: 0.0,
            newton_iters: 0,
            outer_iters: 0,
            residual_inf: 0.0,
        });
    }

    let mut v = vec![params.v_star; grid.n()];
    let mut total_inner = 0;

    // continuation ladder: 0.5, 0.25, ... down to (but not including) d
    if params.d < CONTINUATION_THRESHOLD {
        let mut stage = CONTINUATION_THRESHOLD;
        while stage > params.d * 2.0 {
            let (inner, _, _) = outer_fixed_point(&mut v, stage, params, grid, tol, max_outer)?;
            total_inner += inner;
            stage *= 0.5;
        }
    }

    let (inner, outer, _) = outer_fixed_point(&mut v, params.d, params, grid, tol, max_outer)?;
    total_inner += inner;
    finish(v, params, grid, total_inner, outer)
}

/// Solves with an explicit warm start (continuation within a sweep).
fn solve_warm(
    params: &ModelParams,
    grid: Grid,
    tol: f64,
    max_outer: usize,
    warm: &Field,
) -> Result<StationarySolution> {
    let mut v = warm.values().to_vec();
    let (inner, outer, _) = outer_fixed_point(&mut v, params.d, params, grid, tol, max_outer)?;
    finish(v, params, grid, inner, outer)
}

fn finish(
    v: Vec<f64>,
    params: &ModelParams,
    grid: Grid,
    newton_iters: usize,
    outer_iters: usize,
) -> Result<StationarySolution> {
    let v_bar = Field::new(grid, v)?;
    let exp_values: Vec<f64> = v_bar.values().iter().map(|x| x.exp()).collect();
    let exp_field = Field::new(grid, exp_values)?;
    let lambda = params.mass / exp_field.integrate();
    let u_bar = Field::new(grid, exp_field.values().iter().map(|e| lambda * e).collect())?;
    let residual_inf = residual_sup(v_bar.values(), lambda, params.d, grid.h());
    Ok(StationarySolution {
        params: *params,
        v_bar,
        u_bar,
        lambda,
        newton_iters,
        outer_iters,
        residual_inf,
    })
}

/// Outer λ fixed point around the inner Newton solve. Returns
/// (inner iterations, outer passes, final residual).
fn outer_fixed_point(
    v: &mut Vec<f64>,
    d: f64,
    params: &ModelParams,
    grid: Grid,
    tol: f64,
    max_outer: usize,
) -> Result<(usize, usize, f64)> {
    let h = grid.h();
    let mut lambda = params.mass / trapezoid_exp(v, grid);
    let mut total_inner = 0;

    for outer in 1..=max_outer {
        total_inner += newton_solve(v, lambda, d, grid, 0.05 * tol)?;
        let lambda_new = params.mass / trapezoid_exp(v, grid);
        let res = residual_sup(v, lambda_new, d, h);
        // the 0.25 keeps the residual shift from the final λ update well
        // inside the tolerance budget
        if res < tol
            && (lambda_new - lambda).abs() <= 0.25 * tol * lambda.abs().max(f64::MIN_POSITIVE)
        {
            return Ok((total_inner, outer, res));
        }
        lambda = lambda_new;
    }

    Err(Error::NonConvergence {
        d,
        residual: residual_sup(v, lambda, d, h),
        outer_iters: max_outer,
    })
}

/// Damped Newton on D v'' = λ e^v v with pinned Dirichlet rows.
/// Returns the number of iterations taken.
fn newton_solve(v: &mut [f64], lambda: f64, d: f64, grid: Grid, tol: f64) -> Result<usize> {
    let n = grid.n();
    let h = grid.h();
    let mut jac = Tridiag::zeros(n);
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut trial = vec![0.0; n];

    let mut res = residual_sup(v, lambda, d, h);
    for iter in 0..MAX_INNER {
        if res < tol {
            return Ok(iter);
        }

        let off = d / (h * h);
        for i in 0..n {
            jac.sub[i] = off;
            jac.diag[i] = -2.0 * off - lambda * v[i].exp() * (1.0 + v[i]);
            jac.sup[i] = off;
        }
        // Dirichlet rows: delta v = 0 at the boundary
        jac.diag[0] = 1.0;
        jac.sup[0] = 0.0;
        jac.diag[n - 1] = 1.0;
        jac.sub[n - 1] = 0.0;

        residual_into(v, lambda, d, h, &mut rhs);
        for r in rhs.iter_mut() {
            *r = -*r;
        }
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        jac.solve_in_place(&mut rhs, &mut scratch)
            .ok_or(Error::LinearSolveFailure { t: f64::NAN })?;

        // halve the step until the iterate stays positive and the
        // residual decreases
        let mut step = 1.0;
        let mut accepted = false;
        let mut saw_positive = false;
        for _ in 0..=MAX_HALVINGS {
            for i in 0..n {
                trial[i] = v[i] + step * rhs[i];
            }
            let positive = trial.iter().all(|&x| x > 0.0);
            if positive {
                saw_positive = true;
                let new_res = residual_sup(&trial, lambda, d, h);
                if new_res < res {
                    v.copy_from_slice(&trial);
                    res = new_res;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            if !saw_positive {
                return Err(Error::NonPositivity { d });
            }
            // positive but no residual decrease: the iterate sits at the
            // evaluation round-off floor
            return Ok(iter + 1);
        }
    }
    Ok(MAX_INNER)
}

/// Residual of the inner equation at interior nodes, in flux form
/// D ((v_{i+1}-v_i)/h - (v_i-v_{i-1})/h)/h to avoid the cancellation of
/// the naive second difference.
fn residual_into(v: &[f64], lambda: f64, d: f64, h: f64, out: &mut [f64]) {
    let n = v.len();
    out[0] = 0.0;
    out[n - 1] = 0.0;
    for i in 1..n - 1 {
        let left = (v[i] - v[i - 1]) / h;
        let right = (v[i + 1] - v[i]) / h;
        out[i] = d * (right - left) / h - lambda * v[i].exp() * v[i];
    }
}

fn residual_sup(v: &[f64], lambda: f64, d: f64, h: f64) -> f64 {
    let n = v.len();
    let mut sup = 0.0_f64;
    for i in 1..n - 1 {
        let left = (v[i] - v[i - 1]) / h;
        let right = (v[i + 1] - v[i]) / h;
        let r = d * (right - left) / h - lambda * v[i].exp() * v[i];
        sup = sup.max(r.abs());
    }
    sup
}

/// ∫ e^v via the same panel accumulation as `Field::integrate`, so the λ
/// used inside the iteration and the one recomputed for the returned
/// solution agree bit-exactly.
fn trapezoid_exp(v: &[f64], grid: Grid) -> f64 {
    let exp_values: Vec<f64> = v.iter().map(|x| x.exp()).collect();
    Field::new(grid, exp_values).expect("finite exp field").integrate()
}

/// Structural verification of a converged solution.
pub fn verify_stationary(sol: &StationarySolution) -> VerificationReport {
    let v = &sol.v_bar;
    let u = &sol.u_bar;
    let d = sol.params.d;
    let vx = v.derivative();
    let ux = u.derivative();

    let mut lemma_slack_min = f64::INFINITY;
    let mut lemma_scale = 0.0_f64;
    let mut flux_sup = 0.0_f64;
    let mut identity_sup = 0.0_f64;
    for i in 0..v.grid().n() {
        let (vi, ui, vxi, uxi) = (v.values()[i], u.values()[i], vx.values()[i], ux.values()[i]);
        let weighted = vi * vi * ui;
        lemma_slack_min = lemma_slack_min.min(weighted - d * vxi * vxi);
        lemma_scale = lemma_scale.max(weighted);
        flux_sup = flux_sup.max((uxi - ui * vxi).abs());
        identity_sup = identity_sup.max((ui - sol.lambda * vi.exp()).abs());
    }

    VerificationReport {
        lemma_slack_min,
        lemma_scale,
        v_min: v.min(),
        v_max: v.max(),
        u_min: u.min(),
        u_max: u.max(),
        flux_sup,
        identity_sup,
        mass_defect: (u.integrate() - sol.params.mass).abs(),
    }
}

/// Solves a descending family of D values with continuation, reporting the
/// left-side layer-width proxy for each.
pub fn stationary_sweep(
    base: &ModelParams,
    d_values: &[f64],
    grid: Grid,
    tol: f64,
    max_outer: usize,
) -> Result<Vec<SweepEntry>> {
    if d_values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one D value".into()));
    }
    if d_values.iter().any(|&d| d.is_nan() || d <= 0.0) {
        return Err(Error::InvalidInput("sweep D values must be strictly positive".into()));
    }
    if d_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("sweep D values must be strictly descending".into()));
    }

    let mut out = Vec::with_capacity(d_values.len());
    let mut warm: Option<Field> = None;
    for &d in d_values {
        let params = ModelParams { d, ..*base };
        let solution = match &warm {
            None => solve_stationary(&params, grid, tol, max_outer)?,
            Some(prev) => solve_warm(&params, grid, tol, max_outer, prev)?,
        };
        warm = Some(solution.v_bar.clone());
        let layer_width = layer_width_proxy(&solution);
        out.push(SweepEntry { solution, layer_width });
    }
    Ok(out)
}

/// Smallest node x with v̄(x) <= v*/2, scanning from the left boundary.
fn layer_width_proxy(sol: &StationarySolution) -> Option<f64> {
    let half = 0.5 * sol.params.v_star;
    let grid = sol.v_bar.grid();
    sol.v_bar
        .values()
        .iter()
        .position(|&v| v <= half)
        .map(|i| grid.node(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn params(d: f64) -> ModelParams {
        ModelParams::new(d, 1.0, 1.0).unwrap()
    }

    fn solve(d: f64, n: usize) -> StationarySolution {
        solve_stationary(&params(d), grid(n), DEFAULT_TOL, DEFAULT_MAX_OUTER).unwrap()
    }

    #[test]
    fn degenerate_zero_mass() {
        let p = ModelParams::new(0.1, 1.0, 0.0).unwrap();
        let sol = solve_stationary(&p, grid(101), DEFAULT_TOL, DEFAULT_MAX_OUTER).unwrap();
        assert_eq!(sol.lambda, 0.0);
        assert!(sol.v_bar.values().iter().all(|&v| v == 1.0));
        assert!(sol.u_bar.values().iter().all(|&u| u == 0.0));
        let report = verify_stationary(&sol);
        assert_eq!(report.flux_sup, 0.0);
        assert!(report.lemma_slack_min.abs() < 1e-15);
    }

    #[test]
    fn rejects_d_zero_and_bad_tol() {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        assert!(solve_stationary(&p, grid(11), DEFAULT_TOL, 50).is_err());
        assert!(solve_stationary(&params(0.1), grid(11), 0.0, 50).is_err());
    }

    #[test]
    fn reference_case_converges() {
        let sol = solve(0.1, 401);
        assert!(sol.residual_inf < DEFAULT_TOL, "residual {}", sol.residual_inf);
        assert!(sol.outer_iters <= DEFAULT_MAX_OUTER);
        // bracket forced by 0 < v̄ <= v*
        assert!(sol.lambda >= 1.0 * (-1.0_f64).exp() && sol.lambda <= 1.0);
        // boundary rows pinned exactly
        assert_eq!(sol.v_bar.values()[0], 1.0);
        assert_eq!(sol.v_bar.values()[400], 1.0);
        // 0 < v̄ <= v* + 1e-12, interior minimum below the boundary value
        assert!(sol.v_bar.min() > 0.0 && sol.v_bar.max() <= 1.0 + 1e-12);
        assert!(sol.v_bar.min() < 0.999);
    }

    #[test]
    fn lambda_matches_continuum_shooting_value() {
        // frozen independent value: RK4 shooting on the continuum BVP,
        // cross-checked by a collocation solver to 7e-14. The n = 401
        // finite-difference lambda carries its O(h^2) bias, hence 5e-6.
        let sol = solve(0.1, 401);
        assert!(
            (sol.lambda - 0.545594392979).abs() < 5e-6,
            "lambda {}",
            sol.lambda
        );
    }

    #[test]
    fn lambda_discretization_bias_is_second_order() {
        let continuum = 0.545594392979;
        let e1 = (solve(0.1, 201).lambda - continuum).abs();
        let e2 = (solve(0.1, 401).lambda - continuum).abs();
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "lambda bias ratio {ratio}");
    }

    #[test]
    fn large_d_asymptotics() {
        // one ulp of v̄ moves the residual by ~D/h² * eps ≈ 7e-9 at D = 100,
        // so the tolerance must sit above that representability floor
        let sol =
            solve_stationary(&params(100.0), grid(401), 1e-8, DEFAULT_MAX_OUTER).unwrap();
        // v* M e^{v*} / (8 D) bounds the deviation from the constant state
        let bound = 1.0 * 1.0 * 1.0_f64.exp() / (8.0 * 100.0);
        let dev = sol
            .v_bar
            .values()
            .iter()
            .fold(0.0_f64, |m, &v| m.max((v - 1.0).abs()));
        assert!(dev <= bound, "deviation {dev} > bound {bound}");
        let u_dev = sol
            .u_bar
            .values()
            .iter()
            .fold(0.0_f64, |m, &u| m.max((u - 1.0).abs()));
        assert!(u_dev <= 2e-3, "u deviation {u_dev}");
    }

    #[test]
    fn mass_and_identity_by_construction() {
        let sol = solve(0.1, 401);
        let report = verify_stationary(&sol);
        assert!(report.mass_defect <= 1e-12);
        assert!(report.identity_sup <= 1e-12 * sol.u_bar.max());
    }

    #[test]
    fn reflection_symmetry() {
        // uniqueness plus x -> 1-x invariance force a symmetric profile
        let sol = solve(0.1, 401);
        let v = sol.v_bar.values();
        let asym = (0..v.len())
            .map(|i| (v[i] - v[v.len() - 1 - i]).abs())
            .fold(0.0_f64, f64::max);
        assert!(asym <= 10.0 * DEFAULT_TOL, "asymmetry {asym}");
    }

    #[test]
    fn refinement_ratio_second_order() {
        let coarse = solve(0.1, 201);
        let mid = solve(0.1, 401);
        let fine = solve(0.1, 801);
        let dist = |a: &StationarySolution, b: &StationarySolution| {
            let (va, vb) = (a.v_bar.values(), b.v_bar.values());
            let stride = (vb.len() - 1) / (va.len() - 1);
            (0..va.len())
                .map(|i| (va[i] - vb[i * stride]).abs())
                .fold(0.0_f64, f64::max)
        };
        let ratio = dist(&coarse, &mid) / dist(&mid, &fine);
        assert!((3.5..=4.5).contains(&ratio), "refinement ratio {ratio}");
    }

    #[test]
    fn lemma_inequality_holds_with_margin() {
        for d in [1.0, 0.5, 0.1, 0.05] {
            let report = verify_stationary(&solve(d, 401));
            assert!(
                report.lemma_slack_min >= -1e-8 * report.lemma_scale.max(1.0),
                "D={d}: slack {}",
                report.lemma_slack_min
            );
        }
    }

    #[test]
    fn corrupted_profile_fails_flux_check() {
        let mut sol = solve(0.1, 401);
        let bump = Field::from_fn(sol.v_bar.grid(), |x| {
            0.1 * (2.0 * std::f64::consts::PI * x).sin()
        });
        sol.v_bar = sol.v_bar.linear_combination(1.0, &bump, 1.0);
        let report = verify_stationary(&sol);
        assert!(report.flux_sup > 1e-2, "flux_sup {}", report.flux_sup);
    }

    #[test]
    fn sweep_single_entry_matches_direct_solve() {
        let direct = solve(0.1, 201);
        let sweep =
            stationary_sweep(&params(0.1), &[0.1], grid(201), DEFAULT_TOL, DEFAULT_MAX_OUTER)
                .unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].solution.lambda, direct.lambda);
        assert_eq!(sweep[0].solution.v_bar.values(), direct.v_bar.values());
    }

    #[test]
    fn sweep_interior_minimum_deepens() {
        let entries =
            stationary_sweep(&params(1.0), &[1.0, 0.5], grid(201), DEFAULT_TOL, DEFAULT_MAX_OUTER)
                .unwrap();
        assert!(entries[1].solution.v_bar.min() <= entries[0].solution.v_bar.min());
    }

    #[test]
    fn sweep_layer_width_shrinks() {
        let entries = stationary_sweep(
            &params(0.1),
            &[0.1, 0.05, 0.02],
            grid(401),
            DEFAULT_TOL,
            DEFAULT_MAX_OUTER,
        )
        .unwrap();
        let widths: Vec<f64> = entries
            .iter()
            .map(|e| e.layer_width.expect("profile dips below v*/2"))
            .collect();
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "widths {widths:?}");
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        let g = grid(101);
        assert!(stationary_sweep(&params(0.1), &[], g, DEFAULT_TOL, 50).is_err());
        assert!(stationary_sweep(&params(0.1), &[0.5, 0.5], g, DEFAULT_TOL, 50).is_err());
        assert!(stationary_sweep(&params(0.1), &[0.5, -0.1], g, DEFAULT_TOL, 50).is_err());
        assert!(stationary_sweep(&params(0.1), &[0.1, 0.5], g, DEFAULT_TOL, 50).is_err());
    }
}
