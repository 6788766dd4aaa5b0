//! Null control from a subdomain on the finite eigenspace `V_m`.
//!
//! The control `g(x,t) = Σ_j e^{λ_j (T-t)} s_j η_j(x)` acts through `g χ_ω`;
//! the coefficients solve `α s = β` with
//! `α_ij = (1 - e^{(λ_i+λ_j)T}) / |λ_i+λ_j| ⟨η_i, η_j⟩_{L²(ω)}` and
//! `β_i = e^{λ_i T} ⟨η_i, u_0⟩`.

use serde::Serialize;

use crate::domain::{Field, SpectralDomain};
use crate::error::{invalid, HeatError, Result};
use crate::kernel::{semigroup_apply, SubdomainWindow};
use crate::linalg::{cholesky, cholesky_solve, mat_vec};
use crate::numeric::{dot, norm2, one_minus_exp_over, pairwise_sum_by, weighted_dot};
use crate::oracle;
use crate::par;

/// Tolerance for the agreement of the two `β` routes, relative to `max(1, ‖β‖_∞)`.
pub const BETA_ROUTE_TOLERANCE: f64 = 1e-10;

fn check_modes(domain: &SpectralDomain, m: usize) -> Result<()> {
    if m == 0 || m > domain.n_modes() {
        return Err(invalid(format!(
            "mode count {m} must be in 1..={}",
            domain.n_modes()
        )));
    }
    Ok(())
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// `⟨η_i, η_j⟩_{L²(ω)}` for `i, j < m` (row-major).
pub fn window_gram(
    domain: &SpectralDomain,
    window: &SubdomainWindow,
    m: usize,
) -> Result<Vec<f64>> {
    check_modes(domain, m)?;
    let w = domain.window_weights(window)?;
    let mut g = vec![0.0; m * m];
    par::fill_rows(&mut g, m, |i, row| {
        for (j, r) in row.iter_mut().enumerate() {
            *r = weighted_dot(&w, domain.mode(i), domain.mode(j));
        }
    });
    // exact symmetry
    for i in 0..m {
        for j in 0..i {
            g[i * m + j] = g[j * m + i];
        }
    }
    Ok(g)
}

/// The `m×m` matrix `α` (row-major).
pub fn assemble_alpha(
    domain: &SpectralDomain,
    window: &SubdomainWindow,
    horizon: f64,
    m: usize,
) -> Result<Vec<f64>> {
    check_horizon(horizon)?;
    let gram = window_gram(domain, window, m)?;
    let lambda = domain.eigenvalues();
    let mut alpha = vec![0.0; m * m];
    par::fill_rows(&mut alpha, m, |i, row| {
        for (j, a) in row.iter_mut().enumerate() {
            *a = one_minus_exp_over(lambda[i] + lambda[j], horizon) * gram[i * m + j];
        }
    });
    Ok(alpha)
}

/// `β` computed by two routes.
#[derive(Debug, Clone, Serialize)]
pub struct BetaVector {
    /// `e^{λ_i T} ⟨u_0, η_i⟩`.
    pub values: Vec<f64>,
    /// `⟨ψ, η_i⟩` with `ψ = e^{TP} u_0` evaluated on the grid.
    pub via_semigroup: Vec<f64>,
    pub discrepancy: f64,
}

pub fn assemble_beta(
    domain: &SpectralDomain,
    u0: &Field,
    horizon: f64,
    m: usize,
) -> Result<BetaVector> {
    check_horizon(horizon)?;
    check_modes(domain, m)?;
    let c = domain.coefficients_of(u0)?;
    let values: Vec<f64> = (0..m)
        .map(|i| (domain.eigenvalue(i) * horizon).exp() * c[i])
        .collect();
    let psi = semigroup_apply(domain, horizon, u0)?;
    let psi_grid = Field::from_values(psi.values().to_vec());
    let projected = domain.project(&psi_grid)?;
    let via_semigroup = projected[..m].to_vec();
    let discrepancy = values
        .iter()
        .zip(&via_semigroup)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = values.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let tolerance = BETA_ROUTE_TOLERANCE * scale;
    if discrepancy > tolerance {
        return Err(HeatError::RouteDisagreement {
            what: "beta",
            discrepancy,
            tolerance,
        });
    }
    Ok(BetaVector {
        values,
        via_semigroup,
        discrepancy,
    })
}

/// The assembled and solved system on `V_m`.
#[derive(Debug, Clone)]
pub struct SubdomainControlSystem<'d> {
    domain: &'d SpectralDomain,
    pub window: SubdomainWindow,
    pub horizon: f64,
    pub m: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub solution: Vec<f64>,
    /// Lower Cholesky factor of `α`.
    pub cholesky: Vec<f64>,
    /// `(max pivot / min pivot)²` of the Cholesky factor.
    pub condition_estimate: f64,
    /// `‖α s − β‖_∞`.
    pub solve_residual: f64,
    /// `Σ β_j s_j`.
    pub energy: f64,
    /// Fraction of `‖u_0‖²` outside `V_m`.
    pub discarded_mass_fraction: f64,
    pub window_gram: Vec<f64>,
}

/// Build `α`, `β`, factor and solve. `u_0` outside `V_m` is projected.
pub fn solve_control<'d>(
    domain: &'d SpectralDomain,
    window: &SubdomainWindow,
    horizon: f64,
    m: usize,
    u0: &Field,
) -> Result<SubdomainControlSystem<'d>> {
    let alpha = assemble_alpha(domain, window, horizon, m)?;
    let beta = assemble_beta(domain, u0, horizon, m)?.values;
    let l = cholesky(&alpha, m)?;
    let mut s = cholesky_solve(&l, m, &beta);
    // one step of iterative refinement
    let r: Vec<f64> = mat_vec(&alpha, m, m, &s)
        .iter()
        .zip(&beta)
        .map(|(a, b)| b - a)
        .collect();
    let ds = cholesky_solve(&l, m, &r);
    for (si, d) in s.iter_mut().zip(&ds) {
        *si += d;
    }
    let solve_residual = mat_vec(&alpha, m, m, &s)
        .iter()
        .zip(&beta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let pivots: Vec<f64> = (0..m).map(|i| l[i * m + i]).collect();
    let pmax = pivots.iter().cloned().fold(0.0, f64::max);
    let pmin = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    let c = domain.coefficients_of(u0)?;
    let total = dot(&c, &c);
    let kept = dot(&c[..m], &c[..m]);
    let discarded_mass_fraction = if total > 0.0 {
        ((total - kept) / total).max(0.0)
    } else {
        0.0
    };
    let energy = dot(&beta, &s);
    Ok(SubdomainControlSystem {
        domain,
        window: window.clone(),
        horizon,
        m,
        window_gram: window_gram(domain, window, m)?,
        alpha,
        beta,
        solution: s,
        cholesky: l,
        condition_estimate: (pmax / pmin).powi(2),
        solve_residual,
        energy,
        discarded_mass_fraction,
    })
}

/// Terminal norms of the controlled Galerkin system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GalerkinReport {
    pub initial_norm: f64,
    /// `‖β − α s‖₂ / ‖u_0‖₂` from the Duhamel closed form.
    pub closed_form_relative: f64,
    /// Same ratio from classical RK4 integration.
    pub integrated_relative: f64,
    pub steps: usize,
}

/// JSON summary of a solved system.
#[derive(Debug, Clone, Serialize)]
pub struct SubdomainSummary {
    pub m: usize,
    pub window: SubdomainWindow,
    pub horizon: f64,
    pub condition_estimate: f64,
    pub solve_residual: f64,
    pub relative_solve_residual: f64,
    pub energy: f64,
    pub discarded_mass_fraction: f64,
    /// `ln|s_j| / (|λ_j| T)`: values below 1 mean `s_j` grows slower than `e^{|λ_j| T}`.
    pub coefficient_growth: Vec<f64>,
}

impl<'d> SubdomainControlSystem<'d> {
    pub fn domain(&self) -> &'d SpectralDomain {
        self.domain
    }

    /// `φ = Σ s_j η_j`.
    pub fn phi(&self) -> Result<Field> {
        self.domain.synthesize(&self.solution)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(invalid(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    fn control_coefficients(&self, t: f64) -> Vec<f64> {
        self.solution
            .iter()
            .enumerate()
            .map(|(j, s)| (self.domain.eigenvalue(j) * (self.horizon - t)).exp() * s)
            .collect()
    }

    /// `g(x, t) = Σ_j e^{λ_j (T-t)} s_j η_j(x)`.
    pub fn control_evaluate(&self, x: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let c = self.control_coefficients(t);
        Ok(pairwise_sum_by(self.m, |j| {
            c[j] * self.domain.eigenfunction_at(j, x)
        }))
    }

    /// `g(·, t)` on the grid.
    pub fn control_field(&self, t: f64) -> Result<Field> {
        self.check_time(t)?;
        self.domain.synthesize(&self.control_coefficients(t))
    }

    /// `Σ β_j s_j = ‖g‖²_H`.
    pub fn control_energy(&self) -> f64 {
        self.energy
    }

    /// `Σ α_ij s_i s_j`.
    pub fn quadratic_energy(&self) -> f64 {
        let m = self.m;
        pairwise_sum_by(m, |i| {
            self.solution[i] * dot(&self.alpha[i * m..(i + 1) * m], &self.solution)
        })
    }

    /// `∫₀^T ∫_ω g²` by space-time quadrature.
    pub fn control_energy_quadrature(&self, time_steps: usize) -> Result<f64> {
        oracle::window_energy_quadrature(self.domain, &self.window, self.horizon, time_steps, |t| {
            self.control_coefficients(t)
        })
    }

    /// Integrate `u_i' = λ_i u_i − Σ_j ⟨η_i,η_j⟩_ω e^{λ_j(T-t)} s_j` from the
    /// projection of `u_0` two ways.
    pub fn galerkin_verify(&self, u0: &Field, steps: usize) -> Result<GalerkinReport> {
        if steps < oracle::RK4_MIN_STEPS {
            return Err(invalid(format!(
                "need at least {} steps",
                oracle::RK4_MIN_STEPS
            )));
        }
        let m = self.m;
        let c = self.domain.coefficients_of(u0)?;
        let start = c[..m].to_vec();
        let initial_norm = norm2(&start);
        let closed: Vec<f64> = mat_vec(&self.alpha, m, m, &self.solution)
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| b - a)
            .collect();
        let lambda = &self.domain.eigenvalues()[..m];
        let gram = &self.window_gram;
        let horizon = self.horizon;
        let s = &self.solution;
        let terminal = oracle::rk4_linear_system(
            |t, u, du| {
                let forcing: Vec<f64> = (0..m)
                    .map(|j| (lambda[j] * (horizon - t)).exp() * s[j])
                    .collect();
                for i in 0..m {
                    du[i] = lambda[i] * u[i] - dot(&gram[i * m..(i + 1) * m], &forcing);
                }
            },
            &start,
            horizon,
            steps,
        )?;
        let denom = if initial_norm > 0.0 {
            initial_norm
        } else {
            1.0
        };
        Ok(GalerkinReport {
            initial_norm,
            closed_form_relative: norm2(&closed) / denom,
            integrated_relative: norm2(&terminal) / denom,
            steps,
        })
    }

    pub fn coefficient_growth(&self) -> Vec<f64> {
        self.solution
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let rate = self.domain.eigenvalue(j).abs() * self.horizon;
                if *s == 0.0 || rate == 0.0 {
                    0.0
                } else {
                    s.abs().ln() / rate
                }
            })
            .collect()
    }

    pub fn summary(&self) -> SubdomainSummary {
        let bmax = self.beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        SubdomainSummary {
            m: self.m,
            window: self.window.clone(),
            horizon: self.horizon,
            condition_estimate: self.condition_estimate,
            solve_residual: self.solve_residual,
            relative_solve_residual: if bmax > 0.0 {
                self.solve_residual / bmax
            } else {
                0.0
            },
            energy: self.energy,
            discarded_mass_fraction: self.discarded_mass_fraction,
            coefficient_growth: self.coefficient_growth(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Lcg64;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn problem() -> (SpectralDomain, SubdomainWindow) {
        (
            SpectralDomain::interval(PI, 16, 512).unwrap(),
            SubdomainWindow::interval(0.5, 1.5).unwrap(),
        )
    }

    #[test]
    fn alpha_whole_domain_is_diagonal() {
        let d = SpectralDomain::interval(PI, 6, 64).unwrap();
        let a = assemble_alpha(&d, &SubdomainWindow::whole(&d), 1.0, 6).unwrap();
        assert_abs_diff_eq!(a[0], 0.43233235838169365, epsilon = 1e-14);
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!(a[i * 6 + j].abs() < 1e-14);
                }
            }
        }
        assert!(assemble_alpha(&d, &SubdomainWindow::whole(&d), 1.0, 7).is_err());
    }

    #[test]
    fn alpha_symmetric_and_zero_mode_limit() {
        let (d, w) = problem();
        let a = assemble_alpha(&d, &w, 1.0, 8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(a[i * 8 + j], a[j * 8 + i]);
            }
        }
        let c = SpectralDomain::circle(2.0 * PI, 5, 40).unwrap();
        let wc = SubdomainWindow::interval(1.0, 2.0).unwrap();
        let ac = assemble_alpha(&c, &wc, 0.7, 3).unwrap();
        let g = window_gram(&c, &wc, 3).unwrap();
        assert_abs_diff_eq!(ac[0], 0.7 * g[0], epsilon = 1e-15);
    }

    #[test]
    fn beta_routes_and_linearity() {
        let (d, _) = problem();
        let b = assemble_beta(&d, &d.mode_field(0), 1.0, 4).unwrap();
        assert_abs_diff_eq!(b.values[0], 0.36787944117144233, epsilon = 1e-14);
        let far = d.mode_field(10);
        let b = assemble_beta(&d, &far, 1.0, 4).unwrap();
        assert!(b.values.iter().all(|v| v.abs() < 1e-15));
        let mut rng = Lcg64::new(5);
        let u = d.synthesize(&rng.signed_vec(6)).unwrap();
        let v = d.synthesize(&rng.signed_vec(6)).unwrap();
        let buv = assemble_beta(&d, &u.plus(&v).unwrap(), 1.0, 6)
            .unwrap()
            .values;
        let bu = assemble_beta(&d, &u, 1.0, 6).unwrap().values;
        let bv = assemble_beta(&d, &v, 1.0, 6).unwrap().values;
        for i in 0..6 {
            assert_abs_diff_eq!(buv[i], bu[i] + bv[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn scalar_system_whole_domain() {
        let d = SpectralDomain::interval(PI, 4, 64).unwrap();
        let u0 = d.mode_field(0);
        let sys = solve_control(&d, &SubdomainWindow::whole(&d), 1.0, 1, &u0).unwrap();
        let alpha = (1.0 - (-2.0f64).exp()) / 2.0;
        let beta = (-1.0f64).exp();
        assert_abs_diff_eq!(sys.solution[0], beta / alpha, epsilon = 1e-13);
        assert_abs_diff_eq!(sys.solution[0], 0.8509181282393216, epsilon = 1e-12);
        assert_abs_diff_eq!(sys.control_energy(), 0.3130352854993313, epsilon = 1e-12);
        let x = 1.1;
        let g0 = sys.control_evaluate(x, 0.0).unwrap();
        assert_abs_diff_eq!(
            g0,
            beta * sys.solution[0] * d.eigenfunction_at(0, x),
            epsilon = 1e-14
        );
        let phi = sys.phi().unwrap();
        let gt = sys.control_field(1.0).unwrap();
        assert_eq!(phi.values(), gt.values());
        assert!(sys.control_evaluate(x, 1.5).is_err());
    }

    #[test]
    fn zero_initial_state_gives_zero_control() {
        let (d, w) = problem();
        let sys = solve_control(&d, &w, 1.0, 8, &d.synthesize(&[]).unwrap()).unwrap();
        assert!(sys.solution.iter().all(|&s| s == 0.0));
        assert_eq!(sys.control_energy(), 0.0);
        assert_eq!(sys.control_evaluate(1.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn eight_mode_system_solves_and_steers_to_zero() {
        let (d, w) = problem();
        let mut rng = Lcg64::new(2024);
        let u0 = d.synthesize(&rng.signed_vec(8)).unwrap();
        let sys = solve_control(&d, &w, 1.0, 8, &u0).unwrap();
        let bmax = sys.beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(sys.solve_residual < 1e-10 * bmax);
        let e1 = sys.quadratic_energy();
        assert!((e1 - sys.control_energy()).abs() < 1e-10 * e1.abs());
        let rep = sys.galerkin_verify(&u0, 2000).unwrap();
        assert!(rep.closed_form_relative < 1e-12, "{rep:?}");
        assert!(rep.integrated_relative < 1e-6, "{rep:?}");
        assert!(sys.galerkin_verify(&u0, 8).is_err());
        let q = sys.control_energy_quadrature(8192).unwrap();
        assert!((q - sys.control_energy()).abs() < 1e-6);
    }

    #[test]
    fn free_flow_when_control_is_zero() {
        let (d, w) = problem();
        let mut rng = Lcg64::new(9);
        let u0 = d.synthesize(&rng.signed_vec(4)).unwrap();
        let mut sys = solve_control(&d, &w, 1.0, 4, &u0).unwrap();
        sys.solution = vec![0.0; 4];
        let rep = sys.galerkin_verify(&u0, 400).unwrap();
        let c = u0.coefficients().unwrap();
        let free: Vec<f64> = (0..4).map(|i| (d.eigenvalue(i)).exp() * c[i]).collect();
        assert_abs_diff_eq!(
            rep.integrated_relative,
            norm2(&free) / norm2(&c[..4]),
            epsilon = 1e-9
        );
    }

    #[test]
    fn shrinking_window_raises_condition() {
        let d = SpectralDomain::interval(PI, 8, 256).unwrap();
        let u0 = d.mode_field(0);
        let wide = solve_control(
            &d,
            &SubdomainWindow::interval(0.5, 2.5).unwrap(),
            1.0,
            6,
            &u0,
        )
        .unwrap();
        let narrow = solve_control(
            &d,
            &SubdomainWindow::interval(1.0, 1.5).unwrap(),
            1.0,
            6,
            &u0,
        )
        .unwrap();
        assert!(narrow.condition_estimate >= wide.condition_estimate);
    }
}
