//! Time integration of the system for D > 0 and D = 0.
//!
//! The cell-density update is a conservative flux form on the nodal grid:
//! node i owns the control volume of width h (h/2 at the boundaries), and
//! the face flux between nodes i and i+1 is the exponentially fitted
//!
//! ```text
//! F_{i+1/2} = [ B(δ) u_{i+1} - B(-δ) u_i ] / h,   δ = v_{i+1} - v_i,
//! ```
//!
//! with the Bernoulli weight B(z) = z/(e^z - 1). The boundary face fluxes
//! are identically zero, so the trapezoid mass telescopes exactly, and the
//! flux vanishes identically on u ∝ e^v, which makes the discrete
//! stationary pair an exact fixed point of the update. Diffusion (the
//! B → 1 part) is implicit, the fitted drift correction explicit.
//!
//! The chemical update for D > 0 solves
//! `(I - dt D Δ_h + dt diag(u^{new})) v^{new} = v^{old}` with the boundary
//! rows pinned to v*; for D = 0 it is the nodewise exact integrating factor
//! `v ← v e^{-dt u^{new}}`, which preserves positivity unconditionally.

use crate::energy::{self, Reference};
use crate::field::{trapezoid_weight, Field, Grid};
use crate::model::ModelParams;
use crate::stationary::StationarySolution;
use crate::tridiag::Tridiag;
use crate::{Error, Result};

/// Time-stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub dt: f64,
    /// Final time T.
    pub t_final: f64,
    /// Record a sample every this many steps (plus t = 0 and t = T).
    pub sample_every: usize,
    /// Safety factor in (0, 1] for the advective step-size restriction
    /// dt <= cfl_safety * h / (1 + sup|v_x|). Diffusion is implicit and
    /// imposes no restriction.
    pub cfl_safety: f64,
}

impl SchemeParams {
    pub fn new(dt: f64, t_final: f64, sample_every: usize) -> Result<SchemeParams> {
        let s = SchemeParams { dt, t_final, sample_every, cfl_safety: 0.9 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt.is_nan() || self.dt <= 0.0 || self.t_final.is_nan() || self.t_final <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "dt and T must be > 0, got dt={} T={}",
                self.dt, self.t_final
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidInput("sample_every must be >= 1".into()));
        }
        if self.cfl_safety.is_nan() || self.cfl_safety <= 0.0 || self.cfl_safety > 1.0 {
            return Err(Error::InvalidInput(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        Ok(())
    }

    /// Checks dt against the advective restriction for the given grid and
    /// chemical-gradient estimate.
    pub fn check_dt(&self, grid: Grid, vx_sup: f64) -> Result<()> {
        let bound = self.cfl_safety * grid.h() / (1.0 + vx_sup);
        if self.dt > bound {
            return Err(Error::InvalidInput(format!(
                "dt = {} exceeds the advective restriction {bound:.3e} (h = {}, sup|v_x| ~ {vx_sup:.3})",
                self.dt,
                grid.h()
            )));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}

/// Instantaneous state of the system.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

/// Per-sample diagnostics recorded along a trajectory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub min_u: f64,
    pub min_v: f64,
    /// sup |u - ū| (D > 0) or sup |u - M| (D = 0).
    pub linf_u_err: f64,
    /// sup |v - v̄| (D > 0) or sup |v| (D = 0).
    pub linf_v_err: f64,
    /// L² norm of φ = ∫₀ˣ (u - reference).
    pub l2_phi: f64,
    /// L² norm of ψ = v - reference (= ‖v‖ when D = 0).
    pub l2_psi: f64,
    /// Weighted energy ∫ (φ²/ū + ψ²/v̄); absent when no stationary
    /// reference exists (D = 0).
    pub e_weighted: Option<f64>,
    /// E_weighted + ∫ φ_x².
    pub e_extended: Option<f64>,
    /// D = 0 functional ∫ (v² + v_x²) (σ̃ = 1 convention).
    pub e_d0: Option<f64>,
    /// ‖φ‖_{H¹} + ‖ψ‖_{L²}.
    pub smallness_h1: f64,
}

/// A completed run: parameters plus the sample series.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub scheme: SchemeParams,
    pub samples: Vec<Sample>,
}

/// Perturbation shapes for initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationMode {
    /// u₀ = ū + ε π cos(πx), v₀ = v̄ + ε sin(πx); the cosine integrates to
    /// zero exactly under the trapezoid rule, so the perturbed mass is
    /// still M, and the sine vanishes at both boundaries. For the constant
    /// reference (D = 0): u₀ = M + ε π cos(πx), v₀ = ε (1 + sin(πx)).
    CosSine,
}

/// Builds admissible initial data near the reference state.
pub fn make_initial_data(
    reference: &Reference,
    eps: f64,
    _mode: PerturbationMode,
) -> Result<(Field, Field)> {
    let grid = reference.grid();
    let pi = std::f64::consts::PI;
    let (u0, v0) = match reference {
        Reference::Stationary(sol) => {
            let bump_u = Field::from_fn(grid, |x| eps * pi * (pi * x).cos());
            let bump_v = Field::from_fn(grid, |x| eps * (pi * x).sin());
            (
                sol.u_bar.linear_combination(1.0, &bump_u, 1.0),
                sol.v_bar.linear_combination(1.0, &bump_v, 1.0),
            )
        }
        Reference::Constant { mass, .. } => (
            Field::from_fn(grid, |x| mass + eps * pi * (pi * x).cos()),
            Field::from_fn(grid, |x| eps * (1.0 + (pi * x).sin())),
        ),
    };
    let (min_u, min_v) = (u0.min(), v0.min());
    if min_u <= 0.0 || min_v < 0.0 {
        return Err(Error::PositivityViolation { eps, min_u, min_v });
    }
    Ok((u0, v0))
}

/// One IMEX step of the parabolic system (D > 0).
pub fn step_parabolic(state: &State, model: &ModelParams, scheme: &SchemeParams) -> Result<State> {
    if model.d <= 0.0 {
        return Err(Error::InvalidInput("step_parabolic requires D > 0".into()));
    }
    step_once(state, model, scheme)
}

/// One step of the PDE-ODE system (D = 0).
pub fn step_pde_ode(state: &State, model: &ModelParams, scheme: &SchemeParams) -> Result<State> {
    if model.d != 0.0 {
        return Err(Error::InvalidInput("step_pde_ode requires D = 0".into()));
    }
    step_once(state, model, scheme)
}

fn step_once(state: &State, model: &ModelParams, scheme: &SchemeParams) -> Result<State> {
    scheme.validate()?;
    scheme.check_dt(state.u.grid(), state.v.derivative().norms().linf)?;
    let mut ws = StepWorkspace::new(state.u.grid(), scheme.dt);
    let mut u = state.u.values().to_vec();
    let mut v = state.v.values().to_vec();
    ws.step(&mut u, &mut v, model, state.t)?;
    Ok(State {
        t: state.t + scheme.dt,
        u: Field::new(state.u.grid(), u)?,
        v: Field::new(state.v.grid(), v)?,
    })
}

/// Integrates from (u0, v0) to T, recording diagnostics.
///
/// For D > 0 a stationary reference is required (error norms and the
/// weighted energy are measured against it); for D = 0 the reference is
/// the constant (M, 0).
pub fn evolve(
    u0: &Field,
    v0: &Field,
    model: &ModelParams,
    scheme: &SchemeParams,
    stationary: Option<&StationarySolution>,
) -> Result<Trajectory> {
    evolve_impl(u0, v0, model, scheme, stationary, |_, _, _| {})
}

/// Like [`evolve`], additionally returning the full state at every sample
/// time (used by the oracle-equivalence pipeline).
pub fn evolve_recording(
    u0: &Field,
    v0: &Field,
    model: &ModelParams,
    scheme: &SchemeParams,
    stationary: Option<&StationarySolution>,
) -> Result<(Trajectory, Vec<State>)> {
    let grid = u0.grid();
    let mut states = Vec::new();
    let traj = evolve_impl(u0, v0, model, scheme, stationary, |t, u, v| {
        states.push(State {
            t,
            u: Field::new(grid, u.to_vec()).expect("finite state"),
            v: Field::new(grid, v.to_vec()).expect("finite state"),
        });
    })?;
    Ok((traj, states))
}

fn evolve_impl(
    u0: &Field,
    v0: &Field,
    model: &ModelParams,
    scheme: &SchemeParams,
    stationary: Option<&StationarySolution>,
    mut on_sample: impl FnMut(f64, &[f64], &[f64]),
) -> Result<Trajectory> {
    model.validate()?;
    scheme.validate()?;
    let grid = u0.grid();
    if v0.grid() != grid {
        return Err(Error::InvalidInput("u0 and v0 live on different grids".into()));
    }
    u0.check_finite("evolve u0")?;
    v0.check_finite("evolve v0")?;
    scheme.check_dt(grid, v0.derivative().norms().linf)?;

    let reference = match (model.d > 0.0, stationary) {
        (true, Some(sol)) => {
            if sol.v_bar.grid() != grid {
                return Err(Error::InvalidInput("stationary reference grid mismatch".into()));
            }
            Reference::Stationary(sol)
        }
        (true, None) => {
            return Err(Error::InvalidInput(
                "evolve with D > 0 needs the stationary reference for error diagnostics".into(),
            ));
        }
        (false, _) => Reference::Constant { mass: model.mass, grid },
    };

    let mut u = u0.values().to_vec();
    let mut v = v0.values().to_vec();
    let mut ws = StepWorkspace::new(grid, scheme.dt);
    let steps = scheme.steps();

    let mut samples = Vec::with_capacity(steps / scheme.sample_every + 2);
    samples.push(sample(0.0, &u, &v, grid, &reference)?);
    on_sample(0.0, &u, &v);

    for k in 1..=steps {
        let t = k as f64 * scheme.dt;
        ws.step(&mut u, &mut v, model, t)?;
        if k % scheme.sample_every == 0 || k == steps {
            samples.push(sample(t, &u, &v, grid, &reference)?);
            on_sample(t, &u, &v);
        }
    }

    Ok(Trajectory { params: *model, scheme: *scheme, samples })
}

fn sample(t: f64, u: &[f64], v: &[f64], grid: Grid, reference: &Reference) -> Result<Sample> {
    let state = State {
        t,
        u: Field::new(grid, u.to_vec())?,
        v: Field::new(grid, v.to_vec())?,
    };
    let p = energy::to_perturbation_unchecked(&state, reference);
    let phi_norms = p.phi.norms();
    let psi_norms = p.psi.norms();

    let (e_weighted, e_extended, e_d0) = match reference {
        Reference::Stationary(sol) => {
            let report = energy::weighted_energy(&p, sol)?;
            (report.e_weighted, report.e_extended, None)
        }
        Reference::Constant { .. } => {
            let report = energy::decay_energy_d0(&p);
            (None, None, report.e_d0)
        }
    };

    Ok(Sample {
        t,
        mass: state.u.integrate(),
        min_u: state.u.min(),
        min_v: state.v.min(),
        linf_u_err: state.u.linf_distance(&reference.u_field()),
        linf_v_err: state.v.linf_distance(&reference.v_field()),
        l2_phi: phi_norms.l2,
        l2_psi: psi_norms.l2,
        e_weighted,
        e_extended,
        e_d0,
        smallness_h1: (phi_norms.l2 * phi_norms.l2 + phi_norms.h1_semi * phi_norms.h1_semi)
            .sqrt()
            + psi_norms.l2,
    })
}

/// Shared stepping machinery: constant implicit diffusion matrix for u,
/// per-step reaction-diffusion matrix for v, and flux scratch space.
pub(crate) struct StepWorkspace {
    grid: Grid,
    dt: f64,
    u_matrix: Tridiag,
    v_matrix: Tridiag,
    flux: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl StepWorkspace {
    pub(crate) fn new(grid: Grid, dt: f64) -> StepWorkspace {
        let n = grid.n();
        let h = grid.h();
        let r = dt / (h * h);
        let mut u_matrix = Tridiag::zeros(n);
        for i in 0..n {
            u_matrix.sub[i] = -r;
            u_matrix.diag[i] = 1.0 + 2.0 * r;
            u_matrix.sup[i] = -r;
        }
        // boundary control volumes have width h/2: du_0 = 2 (u_1 - u_0)/h²
        u_matrix.sup[0] = -2.0 * r;
        u_matrix.sub[n - 1] = -2.0 * r;
        StepWorkspace {
            grid,
            dt,
            u_matrix,
            v_matrix: Tridiag::zeros(n),
            flux: vec![0.0; n - 1],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    /// Advances (u, v) by one step in place. `t` is the time being stepped
    /// to, used only for error reporting.
    pub(crate) fn step(
        &mut self,
        u: &mut [f64],
        v: &mut [f64],
        model: &ModelParams,
        t: f64,
    ) -> Result<()> {
        self.step_u(u, v, t)?;
        if model.d > 0.0 {
            self.step_v_parabolic(v, u, model, t)?;
        } else {
            for (vi, ui) in v.iter_mut().zip(u.iter()) {
                *vi *= (-self.dt * ui).exp();
            }
        }
        Ok(())
    }

    /// Conservative u update: explicit fitted drift, implicit diffusion.
    fn step_u(&mut self, u: &mut [f64], v: &[f64], t: f64) -> Result<()> {
        let n = self.grid.n();
        let h = self.grid.h();
        let dt = self.dt;

        // explicit drift-correction face fluxes
        for i in 0..n - 1 {
            let delta = v[i + 1] - v[i];
            self.flux[i] =
                (bernoulli_minus_one(delta) * u[i + 1] - bernoulli_minus_one(-delta) * u[i]) / h;
        }

        self.rhs[0] = u[0] + dt * self.flux[0] / (0.5 * h);
        for i in 1..n - 1 {
            self.rhs[i] = u[i] + dt * (self.flux[i] - self.flux[i - 1]) / h;
        }
        self.rhs[n - 1] = u[n - 1] - dt * self.flux[n - 2] / (0.5 * h);

        self.u_matrix
            .solve_in_place(&mut self.rhs, &mut self.scratch)
            .ok_or(Error::LinearSolveFailure { t })?;
        u.copy_from_slice(&self.rhs);
        Ok(())
    }

    /// Implicit v update with reaction damping dt·u^{new} and pinned
    /// Dirichlet rows.
    fn step_v_parabolic(
        &mut self,
        v: &mut [f64],
        u_new: &[f64],
        model: &ModelParams,
        t: f64,
    ) -> Result<()> {
        let n = self.grid.n();
        let h = self.grid.h();
        let r = self.dt * model.d / (h * h);

        let m = &mut self.v_matrix;
        for i in 0..n {
            m.sub[i] = -r;
            m.diag[i] = 1.0 + 2.0 * r + self.dt * u_new[i];
            m.sup[i] = -r;
        }
        m.diag[0] = 1.0;
        m.sup[0] = 0.0;
        m.diag[n - 1] = 1.0;
        m.sub[n - 1] = 0.0;

        self.rhs.copy_from_slice(v);
        self.rhs[0] = model.v_star;
        self.rhs[n - 1] = model.v_star;
        m.solve_in_place(&mut self.rhs, &mut self.scratch)
            .ok_or(Error::LinearSolveFailure { t })?;
        v.copy_from_slice(&self.rhs);
        Ok(())
    }
}

/// B(z) - 1 with B(z) = z / (e^z - 1), stable for small z.
fn bernoulli_minus_one(z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        let em = z.exp_m1();
        (z - em) / em
    }
}

/// Trapezoid-weighted sum over raw values (mass checks in tests).
#[allow(dead_code)]
pub(crate) fn weighted_mass(grid: Grid, u: &[f64]) -> f64 {
    u.iter()
        .enumerate()
        .map(|(i, ui)| trapezoid_weight(grid, i) * ui)
        .sum()
}
