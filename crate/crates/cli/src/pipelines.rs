//! Mode pipelines: run the requested computation, write artifacts, and
//! collect machine-readable verdicts.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use exochem::diagnostics::{fit_decay_rate, mass_audit, self_convergence, DEFAULT_FLOOR};
use exochem::energy::{solve_perturbation_direct, to_perturbation, Reference};
use exochem::evolution::{
    evolve, evolve_recording, make_initial_data, PerturbationMode, SchemeParams, Trajectory,
};
use exochem::export::{write_energies_csv, write_stationary_csv, write_trajectory_csv};
use exochem::stationary::{
    solve_stationary, stationary_sweep, verify_stationary, StationarySolution, DEFAULT_MAX_OUTER,
    DEFAULT_TOL,
};
use exochem::{Grid, ModelParams};

use crate::config::{ExperimentConfig, Mode};

/// Norm floors below which trailing-window fits would see only the
/// scheme's accuracy plateau (stationary reference solved to 1e-10).
const LINF_FLOOR: f64 = 1e-9;
const ENERGY_FLOOR: f64 = 1e-19;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub check_name: String,
    pub pass: bool,
    pub measured: f64,
    pub bound: f64,
}

impl Verdict {
    fn new(name: &str, pass: bool, measured: f64, bound: f64) -> Verdict {
        Verdict { check_name: name.into(), pass, measured, bound }
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<String>,
    /// Mode-specific payload (λ and residuals, decay fits, orders, ...).
    pub results: serde_json::Value,
    pub wall_time_s: f64,
}

/// Pipeline failure: solver or I/O trouble (exit code 2 territory).
#[derive(Debug)]
pub enum RunError {
    Solver(exochem::Error),
    Io(std::io::Error),
}

impl From<exochem::Error> for RunError {
    fn from(e: exochem::Error) -> Self {
        RunError::Solver(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Solver(e) => write!(f, "solver failure: {e}"),
            RunError::Io(e) => write!(f, "i/o failure: {e}"),
        }
    }
}

/// Executes the configured pipeline and writes every artifact, including
/// summary.json, into the output directory.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    std::fs::create_dir_all(&config.output_dir)?;
    let stamp = config.timestamp.then(now_unix);

    let mut ctx = Context {
        config,
        stamp,
        verdicts: Vec::new(),
        artifacts: Vec::new(),
        results: json!({}),
    };
    match config.mode {
        Mode::Stationary => ctx.run_stationary()?,
        Mode::Sweep => ctx.run_sweep()?,
        Mode::Evolve => ctx.run_evolve()?,
        Mode::Decay => ctx.run_decay()?,
        Mode::Oracle => ctx.run_oracle()?,
        Mode::Convergence => ctx.run_convergence()?,
    }

    let summary = RunSummary {
        config: config.clone(),
        verdicts: ctx.verdicts,
        artifacts: ctx.artifacts,
        results: ctx.results,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let path = config.output_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).expect("serializable"))?;
    Ok(summary)
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    stamp: Option<u64>,
    verdicts: Vec<Verdict>,
    artifacts: Vec<String>,
    results: serde_json::Value,
}

impl<'a> Context<'a> {
    fn model(&self) -> Result<ModelParams, RunError> {
        let m = &self.config.model;
        Ok(ModelParams::new(m.d, m.v_star, m.mass)?)
    }

    fn grid(&self) -> Result<Grid, RunError> {
        Ok(Grid::new(self.config.grid.n)?)
    }

    fn scheme(&self) -> Result<SchemeParams, RunError> {
        let s = self.config.scheme.as_ref().expect("validated by config");
        Ok(SchemeParams::new(s.dt, s.t_final, s.sample_every)?)
    }

    fn eps(&self) -> f64 {
        self.config.perturbation.as_ref().expect("validated by config").eps
    }

    fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.config.output_dir.join(name)
    }

    fn check(&mut self, name: &str, pass: bool, measured: f64, bound: f64) {
        self.verdicts.push(Verdict::new(name, pass, measured, bound));
    }

    fn stationary_checks(&mut self, sol: &StationarySolution, tag: &str) {
        let report = verify_stationary(sol);
        let v_star = sol.params.v_star;
        let mass = sol.params.mass;
        self.check(&format!("{tag}residual_inf"), sol.residual_inf < 1e-10, sol.residual_inf, 1e-10);
        self.check(
            &format!("{tag}identity_u_eq_lambda_exp_v"),
            report.identity_sup <= 1e-12,
            report.identity_sup,
            1e-12,
        );
        self.check(&format!("{tag}v_positive"), report.v_min > 0.0, report.v_min, 0.0);
        self.check(
            &format!("{tag}v_below_v_star"),
            report.v_max <= v_star + 1e-12,
            report.v_max,
            v_star + 1e-12,
        );
        self.check(
            &format!("{tag}mass_defect"),
            report.mass_defect <= 1e-10,
            report.mass_defect,
            1e-10,
        );
        let lambda_lo = mass * (-v_star).exp();
        self.check(
            &format!("{tag}lambda_in_bracket"),
            sol.lambda >= lambda_lo && sol.lambda <= mass,
            sol.lambda,
            mass,
        );
        let slack_bound = -1e-8 * report.lemma_scale.max(1.0);
        self.check(
            &format!("{tag}gradient_inequality_slack"),
            report.lemma_slack_min >= slack_bound,
            report.lemma_slack_min,
            slack_bound,
        );
    }

    fn run_stationary(&mut self) -> Result<(), RunError> {
        let sol = solve_stationary(&self.model()?, self.grid()?, DEFAULT_TOL, DEFAULT_MAX_OUTER)?;
        let path = self.artifact("stationary.csv");
        write_stationary_csv(&path, &sol, self.stamp)?;
        self.stationary_checks(&sol, "");
        let report = verify_stationary(&sol);
        self.results = json!({
            "lambda": sol.lambda,
            "residual_inf": sol.residual_inf,
            "newton_iters": sol.newton_iters,
            "outer_iters": sol.outer_iters,
            "verification": report,
        });
        Ok(())
    }

    fn run_sweep(&mut self) -> Result<(), RunError> {
        let d_values = &self.config.sweep.as_ref().expect("validated by config").d_values;
        let entries =
            stationary_sweep(&self.model()?, d_values, self.grid()?, DEFAULT_TOL, DEFAULT_MAX_OUTER)?;
        let mut rows = Vec::new();
        for (k, entry) in entries.iter().enumerate() {
            let name = format!("stationary_{k:02}.csv");
            let path = self.artifact(&name);
            write_stationary_csv(&path, &entry.solution, self.stamp)?;
            rows.push(json!({
                "d": entry.solution.params.d,
                "lambda": entry.solution.lambda,
                "v_min": entry.solution.v_bar.min(),
                "layer_width": entry.layer_width,
                "residual_inf": entry.solution.residual_inf,
                "csv": name,
            }));
        }
        let widths: Vec<Option<f64>> = entries.iter().map(|e| e.layer_width).collect();
        let defined: Vec<f64> = widths.iter().flatten().copied().collect();
        let violations = defined.windows(2).filter(|w| w[1] >= w[0]).count();
        self.check(
            "layer_width_monotone",
            violations == 0,
            violations as f64,
            0.0,
        );
        self.results = json!({ "entries": rows });
        Ok(())
    }

    /// Shared by evolve and decay: run the time integration with its
    /// reference, write the CSV artifacts, and apply the run-level checks.
    fn evolution_run(&mut self) -> Result<Trajectory, RunError> {
        let model = self.model()?;
        let grid = self.grid()?;
        let scheme = self.scheme()?;
        let eps = self.eps();

        let (traj, stationary) = if model.d > 0.0 {
            let sol = solve_stationary(&model, grid, DEFAULT_TOL, DEFAULT_MAX_OUTER)?;
            let path = self.artifact("stationary.csv");
            write_stationary_csv(&path, &sol, self.stamp)?;
            let (u0, v0) =
                make_initial_data(&Reference::Stationary(&sol), eps, PerturbationMode::CosSine)?;
            (evolve(&u0, &v0, &model, &scheme, Some(&sol))?, Some(sol))
        } else {
            let reference = Reference::Constant { mass: model.mass, grid };
            let (u0, v0) = make_initial_data(&reference, eps, PerturbationMode::CosSine)?;
            (evolve(&u0, &v0, &model, &scheme, None)?, None)
        };

        let tpath = self.artifact("trajectory.csv");
        write_trajectory_csv(&tpath, &traj, self.stamp)?;
        let epath = self.artifact("energies.csv");
        write_energies_csv(&epath, &traj, self.stamp)?;

        let audit = mass_audit(&traj)?;
        self.check(
            "mass_drift",
            audit.max_abs_drift <= 1e-10 * model.mass,
            audit.max_abs_drift,
            1e-10 * model.mass,
        );
        let min_u = traj.samples.iter().fold(f64::INFINITY, |m, s| m.min(s.min_u));
        let min_v = traj.samples.iter().fold(f64::INFINITY, |m, s| m.min(s.min_v));
        self.check("u_positive", min_u > 0.0, min_u, 0.0);
        self.check("v_nonnegative", min_v >= 0.0, min_v, 0.0);

        if model.d > 0.0 {
            if eps == 0.0 {
                let worst = traj.samples.iter().fold(0.0_f64, |m, s| m.max(s.linf_u_err));
                self.check("stationary_persistence", worst <= 1e-6, worst, 1e-6);
            }
            // weighted-energy monotonicity: strict above the floor; below
            // it the values are round-off dust, flagged only if a sample
            // climbs back above the floor by more than 1e-10 of E(0)
            let energies: Vec<f64> =
                traj.samples.iter().filter_map(|s| s.e_weighted).collect();
            let mut worst_uptick = 0.0_f64;
            let mut monotone = true;
            for pair in energies.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if a > ENERGY_FLOOR && b > ENERGY_FLOOR {
                    if b > a * (1.0 + 1e-10) {
                        monotone = false;
                        worst_uptick = worst_uptick.max((b - a) / a);
                    }
                } else if b > ENERGY_FLOOR && b - a > 1e-10 * energies[0] {
                    monotone = false;
                    worst_uptick = worst_uptick.max(b - a);
                }
            }
            self.check("energy_monotone", monotone, worst_uptick, 1e-10);
        }

        if let Some(sol) = &stationary {
            self.results["lambda"] = json!(sol.lambda);
        }
        Ok(traj)
    }

    fn run_evolve(&mut self) -> Result<(), RunError> {
        let traj = self.evolution_run()?;
        let last = traj.samples.last().expect("nonempty trajectory");
        self.results["final"] = json!({
            "t": last.t,
            "linf_u_err": last.linf_u_err,
            "linf_v_err": last.linf_v_err,
            "mass": last.mass,
        });
        Ok(())
    }

    fn run_decay(&mut self) -> Result<(), RunError> {
        let model = self.model()?;
        let traj = self.evolution_run()?;
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        let linf_u: Vec<f64> = traj.samples.iter().map(|s| s.linf_u_err).collect();
        let linf_v: Vec<f64> = traj.samples.iter().map(|s| s.linf_v_err).collect();

        let mut fits = json!({});
        if model.d > 0.0 {
            let fit_u = fit_decay_rate(&times, &linf_u, 0.5, LINF_FLOOR)?;
            let fit_v = fit_decay_rate(&times, &linf_v, 0.5, LINF_FLOOR)?;
            let energies: Vec<f64> = traj.samples.iter().filter_map(|s| s.e_weighted).collect();
            let fit_e = fit_decay_rate(&times, &energies, 0.5, ENERGY_FLOOR)?;
            self.check("alpha_u_positive", fit_u.alpha > 0.0, fit_u.alpha, 0.0);
            self.check("r2_u", fit_u.r_squared >= 0.999, fit_u.r_squared, 0.999);
            let ratio = linf_u.last().unwrap() / linf_u[0];
            self.check("u_err_contraction", ratio <= 1e-3, ratio, 1e-3);
            self.check("r2_energy", fit_e.r_squared >= 0.999, fit_e.r_squared, 0.999);
            fits = json!({ "linf_u": fit_u, "linf_v": fit_v, "e_weighted": fit_e });
        } else {
            let fit_v = fit_decay_rate(&times, &linf_v, 0.5, DEFAULT_FLOOR)?;
            let fit_u = fit_decay_rate(&times, &linf_u, 0.5, DEFAULT_FLOOR)?;
            let mass = model.mass;
            self.check(
                "alpha_v_in_bracket",
                fit_v.alpha >= 0.5 * mass && fit_v.alpha <= 1.5 * mass,
                fit_v.alpha,
                1.5 * mass,
            );
            self.check(
                "alpha_v_near_mass",
                (fit_v.alpha - mass).abs() <= 0.1 * mass,
                fit_v.alpha,
                mass,
            );
            self.check("alpha_u_positive", fit_u.alpha > 0.0, fit_u.alpha, 0.0);
            self.check("r2_u", fit_u.r_squared >= 0.99, fit_u.r_squared, 0.99);
            fits = json!({ "linf_u": fit_u, "linf_v": fit_v });
        }

        let path = self.artifact("decay.json");
        std::fs::write(&path, serde_json::to_string_pretty(&fits).expect("serializable"))?;
        self.results["fits"] = fits;
        Ok(())
    }

    fn run_oracle(&mut self) -> Result<(), RunError> {
        let model = self.model()?;
        let grid = self.grid()?;
        let scheme = self.scheme()?;
        let eps = self.eps();

        let sup = if model.d > 0.0 {
            let sol = solve_stationary(&model, grid, DEFAULT_TOL, DEFAULT_MAX_OUTER)?;
            let reference = Reference::Stationary(&sol);
            let (u0, v0) = make_initial_data(&reference, eps, PerturbationMode::CosSine)?;
            let (_, states) = evolve_recording(&u0, &v0, &model, &scheme, Some(&sol))?;
            let p0 = to_perturbation(&states[0], &reference)?;
            let direct = solve_perturbation_direct(&p0, &model, &reference, &scheme)?;
            let mut sup = 0.0_f64;
            for (state, d) in states.iter().zip(&direct) {
                let p = to_perturbation(state, &reference)?;
                sup = sup.max(p.phi.linf_distance(&d.phi)).max(p.psi.linf_distance(&d.psi));
            }
            sup
        } else {
            let reference = Reference::Constant { mass: model.mass, grid };
            let (u0, v0) = make_initial_data(&reference, eps, PerturbationMode::CosSine)?;
            let (_, states) = evolve_recording(&u0, &v0, &model, &scheme, None)?;
            let p0 = to_perturbation(&states[0], &reference)?;
            let direct = solve_perturbation_direct(&p0, &model, &reference, &scheme)?;
            let mut sup = 0.0_f64;
            for (state, d) in states.iter().zip(&direct) {
                let p = to_perturbation(state, &reference)?;
                sup = sup.max(p.phi.linf_distance(&d.phi)).max(p.psi.linf_distance(&d.psi));
            }
            sup
        };

        self.check("oracle_equivalence_sup", sup <= 1e-4, sup, 1e-4);
        let payload = json!({ "sup_discrepancy": sup, "bound": 1e-4 });
        let path = self.artifact("oracle.json");
        std::fs::write(&path, serde_json::to_string_pretty(&payload).expect("serializable"))?;
        self.results = payload;
        Ok(())
    }

    fn run_convergence(&mut self) -> Result<(), RunError> {
        let model = self.model()?;
        let levels = self.config.convergence.as_ref().expect("validated by config").levels;
        let scheme = self.config.scheme.as_ref().expect("validated by config");
        let eps = self.eps();

        let mut ladder = Vec::with_capacity(levels);
        let mut n = self.config.grid.n;
        let mut dt = scheme.dt;
        for _ in 0..levels {
            ladder.push((n, dt));
            n = 2 * n - 1;
            dt /= 4.0;
        }
        let report = self_convergence(&model, eps, scheme.t_final, &ladder)?;

        if report.degenerate {
            self.check("convergence_degenerate_flagged", true, f64::NAN, f64::NAN);
        } else {
            for (k, p) in report
                .observed_orders_u
                .iter()
                .chain(&report.observed_orders_v)
                .enumerate()
            {
                self.check(
                    &format!("observed_order_{k:02}"),
                    (1.8..=2.2).contains(p),
                    *p,
                    2.2,
                );
            }
        }
        let payload = serde_json::to_value(&report).expect("serializable");
        let path = self.artifact("convergence.json");
        std::fs::write(&path, serde_json::to_string_pretty(&payload).expect("serializable"))?;
        self.results = payload;
        Ok(())
    }
}
