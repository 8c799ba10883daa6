//! Antiderivative reformulation and energy functionals.
//!
//! Replacing the density by its spatial primitive φ(x) = ∫₀ˣ (u - ū) dy
//! (or w = ∫₀ˣ (u - M) dy when D = 0) turns the conserved cross-diffusion
//! equation into one with homogeneous Dirichlet data:
//!
//! ```text
//! φ_t = φ_xx - φ_x v̄_x - ū ψ_x - φ_x ψ_x
//! ψ_t = D ψ_xx - ū ψ - v̄ φ_x - φ_x ψ        (ψ = v - v̄, D > 0)
//!
//! w_t = w_xx - M v_x - w_x v_x
//! v_t = -M v - w_x v                          (D = 0)
//! ```
//!
//! The module computes the transform, the weighted energy
//! `∫ (φ²/ū + ψ²/v̄)` whose monotone decay drives the stability mechanism,
//! and integrates the perturbation system directly — a second, independent
//! discretization of the same dynamics used as an oracle against the
//! primal solver.

use crate::evolution::{SchemeParams, State};
use crate::field::{Field, Grid};
use crate::model::ModelParams;
use crate::stationary::StationarySolution;
use crate::tridiag::Tridiag;
use crate::{Error, Result};

/// Reference state a perturbation is measured against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    /// The non-constant stationary pair (ū, v̄), D > 0.
    Stationary(&'a StationarySolution),
    /// The constant pair (M, 0), D = 0.
    Constant { mass: f64, grid: Grid },
}

impl<'a> Reference<'a> {
    pub fn grid(&self) -> Grid {
        match self {
            Reference::Stationary(sol) => sol.v_bar.grid(),
            Reference::Constant { grid, .. } => *grid,
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Reference::Stationary(sol) => sol.params.mass,
            Reference::Constant { mass, .. } => *mass,
        }
    }

    pub fn u_field(&self) -> Field {
        match self {
            Reference::Stationary(sol) => sol.u_bar.clone(),
            Reference::Constant { mass, grid } => Field::constant(*grid, *mass),
        }
    }

    pub fn v_field(&self) -> Field {
        match self {
            Reference::Stationary(sol) => sol.v_bar.clone(),
            Reference::Constant { grid, .. } => Field::zeros(*grid),
        }
    }
}

/// Perturbation variables: φ (or w) and ψ (or v).
///
/// φ vanishes at both boundaries by mass conservation; ψ vanishes there by
/// the shared Dirichlet data when D > 0 (for D = 0 the companion is v
/// itself, which carries no boundary condition).
#[derive(Debug, Clone)]
pub struct PerturbationState {
    pub t: f64,
    /// φ = ∫₀ˣ (u - ū) dy, or w = ∫₀ˣ (u - M) dy for the constant reference.
    pub phi: Field,
    /// ψ = v - v̄, or v itself for the constant reference.
    pub psi: Field,
}

/// Values of the monitored functionals at one instant.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    /// ∫ (φ²/ū + ψ²/v̄); requires a stationary reference.
    pub e_weighted: Option<f64>,
    /// e_weighted + ∫ φ_x².
    pub e_extended: Option<f64>,
    /// D = 0 functional σ̃⁴∫v² + ∫v_x² with the reporting convention σ̃ = 1.
    pub e_d0: Option<f64>,
    /// ‖φ‖_{H¹} + ‖ψ‖_{L²}.
    pub smallness_h1: f64,
}

/// Transforms a primal state into perturbation variables, checking that
/// the antiderivative closes at x = 1 (mass agreement with the reference).
pub fn to_perturbation(state: &State, reference: &Reference) -> Result<PerturbationState> {
    let p = to_perturbation_unchecked(state, reference);
    let endpoint = p.phi.values()[p.phi.grid().n() - 1].abs();
    let bound = 1e-8 * reference.mass();
    if endpoint > bound {
        return Err(Error::MassMismatch { endpoint, bound });
    }
    Ok(p)
}

/// The transform without the mass check (diagnostics sampling path).
pub(crate) fn to_perturbation_unchecked(state: &State, reference: &Reference) -> PerturbationState {
    let u_ref = reference.u_field();
    let v_ref = reference.v_field();
    let phi = state.u.linear_combination(1.0, &u_ref, -1.0).antiderivative();
    let psi = state.v.linear_combination(1.0, &v_ref, -1.0);
    PerturbationState { t: state.t, phi, psi }
}

/// Weighted energy functionals against a stationary reference.
///
/// The weights 1/ū and 1/v̄ are well defined because the stationary profile
/// is bounded away from zero; a corrupted reference with min v̄ < 1e-8 is
/// rejected.
pub fn weighted_energy(
    p: &PerturbationState,
    reference: &StationarySolution,
) -> Result<EnergyReport> {
    let v_min = reference.v_bar.min();
    let u_min = reference.u_bar.min();
    if v_min < 1e-8 || u_min <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "weighted energy needs a positive reference (min ū = {u_min:.3e}, min v̄ = {v_min:.3e})"
        )));
    }
    let grid = p.phi.grid();
    let weighted = Field::new(
        grid,
        (0..grid.n())
            .map(|i| {
                let phi = p.phi.values()[i];
                let psi = p.psi.values()[i];
                phi * phi / reference.u_bar.values()[i] + psi * psi / reference.v_bar.values()[i]
            })
            .collect(),
    )?;
    let e_weighted = weighted.integrate();
    let phi_norms = p.phi.norms();
    let psi_norms = p.psi.norms();
    let e_extended = e_weighted + phi_norms.h1_semi * phi_norms.h1_semi;
    Ok(EnergyReport {
        e_weighted: Some(e_weighted),
        e_extended: Some(e_extended),
        e_d0: None,
        smallness_h1: (phi_norms.l2 * phi_norms.l2 + phi_norms.h1_semi * phi_norms.h1_semi)
            .sqrt()
            + psi_norms.l2,
    })
}

/// The D = 0 decay functional σ̃⁴∫v² + ∫v_x², reported with σ̃ = 1 (the
/// proof treats σ̃ as a free device; no canonical value exists).
pub fn decay_energy_d0(p: &PerturbationState) -> EnergyReport {
    let psi_norms = p.psi.norms();
    let phi_norms = p.phi.norms();
    EnergyReport {
        e_weighted: None,
        e_extended: None,
        e_d0: Some(psi_norms.l2 * psi_norms.l2 + psi_norms.h1_semi * psi_norms.h1_semi),
        smallness_h1: (phi_norms.l2 * phi_norms.l2 + phi_norms.h1_semi * phi_norms.h1_semi)
            .sqrt()
            + psi_norms.l2,
    }
}

/// Integrates the perturbation system directly: implicit Laplacian on φ
/// (or w) with homogeneous Dirichlet rows, implicit linear damping ū ψ,
/// explicit remaining lower-order and nonlinear terms. Samples on the same
/// schedule as [`crate::evolution::evolve`].
pub fn solve_perturbation_direct(
    p0: &PerturbationState,
    model: &ModelParams,
    reference: &Reference,
    scheme: &SchemeParams,
) -> Result<Vec<PerturbationState>> {
    model.validate()?;
    scheme.validate()?;
    let grid = p0.phi.grid();
    if p0.psi.grid() != grid || reference.grid() != grid {
        return Err(Error::InvalidInput("perturbation/reference grid mismatch".into()));
    }
    if (model.d > 0.0) != matches!(reference, Reference::Stationary(_)) {
        return Err(Error::InvalidInput(
            "D > 0 needs a stationary reference; D = 0 the constant one".into(),
        ));
    }

    let n = grid.n();
    let h = grid.h();
    let dt = scheme.dt;
    let steps = (scheme.t_final / dt).round().max(1.0) as usize;

    // (I - dt Δ_h) with homogeneous Dirichlet rows for the primitive
    let r = dt / (h * h);
    let mut phi_matrix = Tridiag::zeros(n);
    for i in 0..n {
        phi_matrix.sub[i] = -r;
        phi_matrix.diag[i] = 1.0 + 2.0 * r;
        phi_matrix.sup[i] = -r;
    }
    phi_matrix.diag[0] = 1.0;
    phi_matrix.sup[0] = 0.0;
    phi_matrix.diag[n - 1] = 1.0;
    phi_matrix.sub[n - 1] = 0.0;

    let (u_bar, v_bar, v_bar_x): (Vec<f64>, Vec<f64>, Vec<f64>) = match reference {
        Reference::Stationary(sol) => (
            sol.u_bar.values().to_vec(),
            sol.v_bar.values().to_vec(),
            sol.v_bar.derivative().into_values(),
        ),
        Reference::Constant { mass, .. } => (vec![*mass; n], vec![0.0; n], vec![0.0; n]),
    };

    let mut phi = p0.phi.values().to_vec();
    let mut psi = p0.psi.values().to_vec();
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut psi_matrix = Tridiag::zeros(n);
    let rd = dt * model.d / (h * h);

    let record = |t: f64,
                  phi: &[f64],
                  psi: &[f64],
                  out: &mut Vec<PerturbationState>|
     -> Result<()> {
        out.push(PerturbationState {
            t,
            phi: Field::new(grid, phi.to_vec())?,
            psi: Field::new(grid, psi.to_vec())?,
        });
        Ok(())
    };

    let mut out = Vec::with_capacity(steps / scheme.sample_every + 2);
    record(p0.t, &phi, &psi, &mut out)?;

    for k in 1..=steps {
        let t = p0.t + k as f64 * dt;

        // primitive update; for D = 0 the same expression with ū = M and
        // v̄_x = 0 is w_t = w_xx - M v_x - w_x v_x, since ψ is v itself
        let phi_x = derivative_raw(&phi, h);
        let psi_x = derivative_raw(&psi, h);
        for i in 0..n {
            rhs[i] =
                phi[i] + dt * (-phi_x[i] * v_bar_x[i] - u_bar[i] * psi_x[i] - phi_x[i] * psi_x[i]);
        }
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        phi_matrix
            .solve_in_place(&mut rhs, &mut scratch)
            .ok_or(Error::LinearSolveFailure { t })?;
        std::mem::swap(&mut phi, &mut rhs);

        let phi_x_new = derivative_raw(&phi, h);
        if model.d > 0.0 {
            for i in 0..n {
                psi_matrix.sub[i] = -rd;
                psi_matrix.diag[i] = 1.0 + 2.0 * rd + dt * u_bar[i];
                psi_matrix.sup[i] = -rd;
            }
            psi_matrix.diag[0] = 1.0;
            psi_matrix.sup[0] = 0.0;
            psi_matrix.diag[n - 1] = 1.0;
            psi_matrix.sub[n - 1] = 0.0;
            for i in 0..n {
                rhs[i] = psi[i] + dt * (-v_bar[i] * phi_x_new[i] - phi_x_new[i] * psi[i]);
            }
            rhs[0] = 0.0;
            rhs[n - 1] = 0.0;
            psi_matrix
                .solve_in_place(&mut rhs, &mut scratch)
                .ok_or(Error::LinearSolveFailure { t })?;
            std::mem::swap(&mut psi, &mut rhs);
        } else {
            // v_t = -(M + w_x) v: nodewise integrating factor, mirroring
            // the primal stepper through u = w_x + M
            let mass = reference.mass();
            for i in 0..n {
                psi[i] *= (-dt * (mass + phi_x_new[i])).exp();
            }
        }

        if k % scheme.sample_every == 0 || k == steps {
            record(t, &phi, &psi, &mut out)?;
        }
    }
    Ok(out)
}

fn derivative_raw(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{make_initial_data, PerturbationMode};
    use crate::stationary::{solve_stationary, DEFAULT_MAX_OUTER, DEFAULT_TOL};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn reference_solution(n: usize) -> StationarySolution {
        let p = ModelParams::new(0.1, 1.0, 1.0).unwrap();
        solve_stationary(&p, grid(n), DEFAULT_TOL, DEFAULT_MAX_OUTER).unwrap()
    }

    #[test]
    fn reference_state_transforms_to_zero() {
        let sol = reference_solution(101);
        let state = State { t: 0.0, u: sol.u_bar.clone(), v: sol.v_bar.clone() };
        let p = to_perturbation(&state, &Reference::Stationary(&sol)).unwrap();
        assert!(p.phi.norms().linf < 1e-13);
        assert!(p.psi.norms().linf < 1e-13);
    }

    #[test]
    fn cosine_bump_transforms_to_sine() {
        let sol = reference_solution(401);
        let reference = Reference::Stationary(&sol);
        let (u0, v0) = make_initial_data(&reference, 0.01, PerturbationMode::CosSine).unwrap();
        let p = to_perturbation(&State { t: 0.0, u: u0, v: v0 }, &reference).unwrap();
        let exact = Field::from_fn(grid(401), |x| 0.01 * (PI * x).sin());
        assert!(p.phi.linf_distance(&exact) < 1e-7);
        // both endpoints vanish
        assert_eq!(p.phi.values()[0], 0.0);
        assert!(p.phi.values()[400].abs() < 1e-12);
    }

    #[test]
    fn mass_mismatch_is_detected() {
        let sol = reference_solution(101);
        let reference = Reference::Stationary(&sol);
        let bad_u =
            Field::new(grid(101), sol.u_bar.values().iter().map(|u| u + 0.1).collect()).unwrap();
        let state = State { t: 0.0, u: bad_u, v: sol.v_bar.clone() };
        let err = to_perturbation(&state, &reference).unwrap_err();
        assert!(matches!(err, Error::MassMismatch { .. }));
    }

    #[test]
    fn zero_perturbation_zero_energy() {
        let sol = reference_solution(101);
        let p = PerturbationState {
            t: 0.0,
            phi: Field::zeros(grid(101)),
            psi: Field::zeros(grid(101)),
        };
        let report = weighted_energy(&p, &sol).unwrap();
        assert_eq!(report.e_weighted, Some(0.0));
        assert_eq!(report.e_extended, Some(0.0));
        assert_eq!(report.smallness_h1, 0.0);
    }

    #[test]
    fn sine_energy_matches_analytic() {
        // phi = eps sin(pi x), psi = 0 against a formal ū ≡ 1 reference:
        // E = eps² ∫ sin² = eps²/2
        let g = grid(401);
        let eps = 0.01;
        let sol = {
            let mut s = reference_solution(401);
            s.u_bar = Field::constant(g, 1.0);
            s.v_bar = Field::constant(g, 1.0);
            s
        };
        let p = PerturbationState {
            t: 0.0,
            phi: Field::from_fn(g, |x| eps * (PI * x).sin()),
            psi: Field::zeros(g),
        };
        let e = weighted_energy(&p, &sol).unwrap().e_weighted.unwrap();
        assert!((e - eps * eps / 2.0).abs() < 1e-6, "E = {e}");
    }

    #[test]
    fn corrupted_reference_rejected() {
        let mut sol = reference_solution(101);
        sol.v_bar = Field::zeros(grid(101));
        let p = PerturbationState {
            t: 0.0,
            phi: Field::zeros(grid(101)),
            psi: Field::zeros(grid(101)),
        };
        assert!(weighted_energy(&p, &sol).is_err());
    }

    #[test]
    fn zero_perturbation_stays_zero_direct() {
        let sol = reference_solution(101);
        let reference = Reference::Stationary(&sol);
        let p0 = PerturbationState {
            t: 0.0,
            phi: Field::zeros(grid(101)),
            psi: Field::zeros(grid(101)),
        };
        let scheme = SchemeParams::new(1e-4, 0.05, 100).unwrap();
        let states = solve_perturbation_direct(&p0, &sol.params, &reference, &scheme).unwrap();
        let last = states.last().unwrap();
        assert!(last.phi.norms().linf < 1e-14);
        assert!(last.psi.norms().linf < 1e-14);
    }

    #[test]
    fn d0_direct_preserves_positivity_of_v() {
        let g = grid(201);
        let model = ModelParams::new(0.0, 0.0, 1.0).unwrap();
        let reference = Reference::Constant { mass: 1.0, grid: g };
        let eps = 0.01;
        let p0 = PerturbationState {
            t: 0.0,
            phi: Field::from_fn(g, |x| eps * (PI * x).sin()),
            psi: Field::from_fn(g, |x| eps * (1.0 + (PI * x).sin())),
        };
        let scheme = SchemeParams::new(2e-4, 2.0, 200).unwrap();
        let states = solve_perturbation_direct(&p0, &model, &reference, &scheme).unwrap();
        for s in &states {
            assert!(s.psi.min() > 0.0, "v positivity at t = {}", s.t);
        }
        // once |w_x| <= M/2 the decay is at least e^{-(M/2) t}
        let first = &states[0];
        let last = states.last().unwrap();
        let bound = first.psi.norms().linf * (-0.5 * 2.0_f64).exp();
        assert!(last.psi.norms().linf <= bound, "v decay too slow");
    }

    #[test]
    fn direct_solver_rejects_mismatched_reference() {
        let g = grid(101);
        let model = ModelParams::new(0.0, 0.0, 1.0).unwrap();
        let sol = reference_solution(101);
        let p0 = PerturbationState { t: 0.0, phi: Field::zeros(g), psi: Field::zeros(g) };
        let scheme = SchemeParams::new(1e-4, 0.01, 10).unwrap();
        // D = 0 with a stationary reference is inconsistent
        assert!(
            solve_perturbation_direct(&p0, &model, &Reference::Stationary(&sol), &scheme).is_err()
        );
    }
}
