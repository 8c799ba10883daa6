//! Independent oracles for the acceptance suite.
//!
//! Both solvers here avoid the library's damped-Newton/tridiagonal path
//! entirely: they march initial value problems and root-find on the
//! missing initial slope.

use exochem::{Field, Grid};

/// Shooting solve of the discrete stationary problem: marches the same
/// three-point recurrence
///
/// D (v_{i+1} - 2 v_i + v_{i-1}) / h² = λ e^{v_i} v_i
///
/// from the left boundary, bisecting on v_1, with the λ = M/∫e^v fixed
/// point on the outside. Returns (λ, v profile).
pub fn discrete_shooting(d: f64, v_star: f64, mass: f64, grid: Grid) -> (f64, Vec<f64>) {
    let n = grid.n();
    let h = grid.h();

    let march = |v1: f64, lambda: f64| -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = v_star;
        v[1] = v1;
        for i in 1..n - 1 {
            v[i + 1] = 2.0 * v[i] - v[i - 1] + (h * h / d) * lambda * v[i].exp() * v[i];
            if v[i + 1] > 50.0 {
                for slot in v.iter_mut().skip(i + 2) {
                    *slot = 50.0;
                }
                v[n - 1] = f64::INFINITY;
                return v;
            }
        }
        v
    };

    let mut lambda = mass / v_star.exp();
    let mut profile = vec![v_star; n];
    for _ in 0..200 {
        // v(1) is increasing in the initial slope guess
        let (mut lo, mut hi) = (1e-12_f64, v_star);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if march(mid, lambda)[n - 1] > v_star {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        profile = march(0.5 * (lo + hi), lambda);
        let integral = Field::new(grid, profile.iter().map(|v| v.exp()).collect())
            .expect("finite profile")
            .integrate();
        let lambda_new = mass / integral;
        let done = (lambda_new - lambda).abs() <= 1e-13 * lambda;
        lambda = lambda_new;
        if done {
            break;
        }
    }
    (lambda, profile)
}

/// Continuum shooting oracle: RK4 on v'' = (λ/D) e^v v from the symmetry
/// point x = 1/2 (v = m, v' = 0), with ∫ e^v carried as quadrature state,
/// bisecting on m and fixed-pointing λ. Returns (λ, v(1/2)).
pub fn continuum_shooting(d: f64, v_star: f64, mass: f64, rk_steps: usize) -> (f64, f64) {
    let h = 0.5 / rk_steps as f64;

    // integrate (v, p, z) to x = 1; returns (v(1), ∫_{1/2}^1 e^v)
    let shoot = |m: f64, lambda: f64| -> (f64, f64) {
        let c = lambda / d;
        let (mut v, mut p, mut z) = (m, 0.0, 0.0);
        for _ in 0..rk_steps {
            if v > 50.0 {
                return (f64::INFINITY, z);
            }
            let f = |v: f64, p: f64| (p, c * v.exp() * v, v.exp());
            let (k1v, k1p, k1z) = f(v, p);
            let (k2v, k2p, k2z) = f(v + 0.5 * h * k1v, p + 0.5 * h * k1p);
            let (k3v, k3p, k3z) = f(v + 0.5 * h * k2v, p + 0.5 * h * k2p);
            let (k4v, k4p, k4z) = f(v + h * k3v, p + h * k3p);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        }
        (v, z)
    };

    let mut lambda = mass / v_star.exp();
    let mut m_mid = 0.5 * v_star;
    for _ in 0..200 {
        let (mut lo, mut hi) = (1e-12_f64, v_star);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if shoot(mid, lambda).0 > v_star {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        m_mid = 0.5 * (lo + hi);
        let (_, z) = shoot(m_mid, lambda);
        let lambda_new = mass / (2.0 * z);
        let done = (lambda_new - lambda).abs() <= 1e-13 * lambda;
        lambda = lambda_new;
        if done {
            break;
        }
    }
    (lambda, m_mid)
}
