//! Heat kernel `G(x,t,y) = Σ e^{λ_j t} η_j(x) η_j(y)`, the semigroup
//! `e^{tP}`, the composed kernel `K(x,T,y) = ∫₀^T ∫_ω G(x,s,z) G(z,s,y) dz ds`,
//! the operator `L φ = ∫ K(·,T,y) φ(y) dy` and the observation norm
//! `‖φ‖_H = ‖e^{sP} φ‖_{L²(ω × (0,T))}`.

use serde::{Deserialize, Serialize};

use crate::domain::{Field, SpectralDomain};
use crate::error::{invalid, HeatError, Result};
use crate::numeric::{dot, pairwise_sum, pairwise_sum_by, simpson_rule, weighted_dot};
use crate::par;
use crate::subctl::assemble_alpha;

/// Default number of Simpson subintervals for time integrals over `(0, T)`.
pub const DEFAULT_TIME_STEPS: usize = 256;

/// The control region `ω ⊂ D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubdomainWindow {
    Interval {
        start: f64,
        end: f64,
    },
    /// Explicit set of grid nodes.
    Mask {
        nodes: Vec<usize>,
    },
}

impl SubdomainWindow {
    pub fn interval(start: f64, end: f64) -> Result<Self> {
        if !(start < end) || !start.is_finite() || !end.is_finite() {
            return Err(HeatError::EmptyWindow(format!("({start}, {end})")));
        }
        Ok(Self::Interval { start, end })
    }

    pub fn mask(nodes: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(HeatError::EmptyWindow("empty node mask".into()));
        }
        Ok(Self::Mask { nodes })
    }

    /// The whole domain.
    pub fn whole(domain: &SpectralDomain) -> Self {
        Self::Interval {
            start: 0.0,
            end: domain.length(),
        }
    }
}

/// A truncated kernel value with its tail bound `N e^{λ_N t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("kernel time must be positive, got {t}")));
    }
    Ok(())
}

/// Tail estimate `N e^{λ_N t}` of the truncated eigen-sum.
pub fn truncation_tail(domain: &SpectralDomain, t: f64) -> f64 {
    let n = domain.n_modes();
    n as f64 * (domain.eigenvalue(n - 1) * t).exp()
}

/// `G(x, t, y)` by the truncated eigen-sum.
pub fn heat_kernel(domain: &SpectralDomain, t: f64, x: f64, y: f64) -> Result<KernelValue> {
    check_time(t)?;
    let value = pairwise_sum_by(domain.n_modes(), |k| {
        (domain.eigenvalue(k) * t).exp()
            * (domain.eigenfunction_at(k, x) * domain.eigenfunction_at(k, y))
    });
    Ok(KernelValue {
        value,
        tail_bound: truncation_tail(domain, t),
    })
}

/// `G(x_a, t, x_b)` on all pairs of grid nodes (row-major `M×M`).
pub fn heat_kernel_matrix(domain: &SpectralDomain, t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    let n = domain.n_modes();
    let m = domain.grid_len();
    let decay: Vec<f64> = domain.eigenvalues().iter().map(|l| (l * t).exp()).collect();
    let mut out = vec![0.0; m * m];
    par::fill_rows(&mut out, m, |a, row| {
        for (b, r) in row.iter_mut().enumerate() {
            *r = pairwise_sum_by(n, |k| {
                let mode = domain.mode(k);
                decay[k] * (mode[a] * mode[b])
            });
        }
    });
    Ok(out)
}

/// `e^{tP} u`: coefficient-wise multiplication by `e^{λ_j t}`.
pub fn semigroup_apply(domain: &SpectralDomain, t: f64, field: &Field) -> Result<Field> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!(
            "semigroup time must be non-negative, got {t}; use the backward inversion routines"
        )));
    }
    let mut c = domain.coefficients_of(field)?;
    for (ck, l) in c.iter_mut().zip(domain.eigenvalues()) {
        *ck *= (l * t).exp();
    }
    domain.synthesize(&c)
}

/// `∫_D G(x, t, y) dy` by grid quadrature in `y`.
pub fn kernel_mass(domain: &SpectralDomain, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    let n = domain.n_modes();
    let row: Vec<f64> = domain
        .nodes()
        .iter()
        .map(|&y| {
            pairwise_sum_by(n, |k| {
                (domain.eigenvalue(k) * t).exp()
                    * domain.eigenfunction_at(k, x)
                    * domain.eigenfunction_at(k, y)
            })
        })
        .collect();
    Ok(weighted_dot(domain.weights(), &row, &vec![1.0; row.len()]))
}

/// `K(x, T, y)` by the eigen-form `Σ_{ij} α_ij η_i(x) η_j(y)` over all `N` modes.
pub fn composed_kernel(
    domain: &SpectralDomain,
    window: &SubdomainWindow,
    horizon: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    let n = domain.n_modes();
    let alpha = assemble_alpha(domain, window, horizon, n)?;
    let ex: Vec<f64> = (0..n).map(|k| domain.eigenfunction_at(k, x)).collect();
    let ey: Vec<f64> = (0..n).map(|k| domain.eigenfunction_at(k, y)).collect();
    let rows: Vec<f64> = (0..n)
        .map(|i| ex[i] * dot(&alpha[i * n..(i + 1) * n], &ey))
        .collect();
    Ok(pairwise_sum(&rows))
}

/// `K(x, T, y)` by Simpson in time of the grid quadrature
/// `∫_ω G(x,s,z) G(z,s,y) dz`, independent of the `α` formula.
pub fn composed_kernel_quadrature(
    domain: &SpectralDomain,
    window: &SubdomainWindow,
    horizon: f64,
    x: f64,
    y: f64,
    time_steps: usize,
) -> Result<f64> {
    check_time(horizon)?;
    let w = domain.window_weights(window)?;
    let n = domain.n_modes();
    let ex: Vec<f64> = (0..n).map(|k| domain.eigenfunction_at(k, x)).collect();
    let ey: Vec<f64> = (0..n).map(|k| domain.eigenfunction_at(k, y)).collect();
    let rule = simpson_rule(0.0, horizon, time_steps);
    let terms = par::map_range(rule.len(), |idx| {
        let (s, weight) = rule[idx];
        let decay: Vec<f64> = domain.eigenvalues().iter().map(|l| (l * s).exp()).collect();
        let cx: Vec<f64> = (0..n).map(|k| decay[k] * ex[k]).collect();
        let cy: Vec<f64> = (0..n).map(|k| decay[k] * ey[k]).collect();
        let gx = synthesize_values(domain, &cx);
        let gy = synthesize_values(domain, &cy);
        weight * weighted_dot(&w, &gx, &gy)
    });
    Ok(pairwise_sum(&terms))
}

fn synthesize_values(domain: &SpectralDomain, c: &[f64]) -> Vec<f64> {
    let m = domain.grid_len();
    (0..m)
        .map(|i| pairwise_sum_by(c.len(), |k| c[k] * domain.mode(k)[i]))
        .collect()
}

/// The operator `L` restricted to the span of the domain's `N` modes,
/// stored as its coefficient matrix `α`.
#[derive(Debug, Clone)]
pub struct LOperator<'d> {
    domain: &'d SpectralDomain,
    window: SubdomainWindow,
    horizon: f64,
    alpha: Vec<f64>,
}

impl<'d> LOperator<'d> {
    pub fn new(domain: &'d SpectralDomain, window: &SubdomainWindow, horizon: f64) -> Result<Self> {
        let alpha = assemble_alpha(domain, window, horizon, domain.n_modes())?;
        Ok(Self {
            domain,
            window: window.clone(),
            horizon,
            alpha,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn window(&self) -> &SubdomainWindow {
        &self.window
    }

    /// `(Lφ)_i = Σ_j α_ij φ_j`.
    pub fn apply(&self, phi: &Field) -> Result<Field> {
        let c = self.domain.coefficients_of(phi)?;
        let n = c.len();
        let out: Vec<f64> = (0..n)
            .map(|i| dot(&self.alpha[i * n..(i + 1) * n], &c))
            .collect();
        self.domain.synthesize(&out)
    }

    /// `Σ_{ij} α_ij φ_i φ_j`.
    pub fn quadratic_form(&self, phi: &Field) -> Result<f64> {
        let c = self.domain.coefficients_of(phi)?;
        Ok(alpha_form(&self.alpha, &c, &c))
    }

    /// `‖φ‖_H` by both routes.
    pub fn h_norm(&self, phi: &Field, time_steps: usize) -> Result<HNorm> {
        let eigen = self.quadratic_form(phi)?.max(0.0).sqrt();
        let quad = h_norm_quadrature(self.domain, &self.window, self.horizon, phi, time_steps)?;
        Ok(HNorm {
            by_eigen_form: eigen,
            by_quadrature: quad,
        })
    }
}

fn alpha_form(alpha: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    pairwise_sum_by(n, |i| a[i] * dot(&alpha[i * n..(i + 1) * n], b))
}

/// Two evaluations of `‖φ‖_H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HNorm {
    /// `√(Σ α_ij φ_i φ_j)`.
    pub by_eigen_form: f64,
    /// Simpson in time of `‖e^{sP} φ‖²_{L²(ω)}`.
    pub by_quadrature: f64,
}

/// `‖φ‖_H` for the given window and horizon.
pub fn h_norm(
    domain: &SpectralDomain,
    window: &SubdomainWindow,
    horizon: f64,
    phi: &Field,
    time_steps: usize,
) -> Result<HNorm> {
    LOperator::new(domain, window, horizon)?.h_norm(phi, time_steps)
}

fn h_norm_quadrature(
    domain: &SpectralDomain,
    window: &SubdomainWindow,
    horizon: f64,
    phi: &Field,
    time_steps: usize,
) -> Result<f64> {
    check_time(horizon)?;
    let w = domain.window_weights(window)?;
    let c = domain.coefficients_of(phi)?;
    let rule = simpson_rule(0.0, horizon, time_steps);
    let terms = par::map_range(rule.len(), |idx| {
        let (s, weight) = rule[idx];
        let cs: Vec<f64> = c
            .iter()
            .zip(domain.eigenvalues())
            .map(|(ck, l)| ck * (l * s).exp())
            .collect();
        let v = synthesize_values(domain, &cs);
        weight * weighted_dot(&w, &v, &v)
    });
    Ok(pairwise_sum(&terms).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Lcg64;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// Method-of-images Dirichlet kernel on `(0, L)`, independent of the eigenbasis.
    fn image_kernel(length: f64, t: f64, x: f64, y: f64, images: i32) -> f64 {
        let g = |r: f64| (-r * r / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
        (-images..=images)
            .map(|n| {
                let shift = 2.0 * n as f64 * length;
                g(x - y + shift) - g(x + y + shift)
            })
            .sum()
    }

    #[test]
    fn circle_kernel_long_time_limit() {
        let d = SpectralDomain::circle(2.0 * PI, 17, 68).unwrap();
        for &(x, y) in &[(0.0, 0.0), (1.0, 4.0), (3.0, 0.5)] {
            let g = heat_kernel(&d, 50.0, x, y).unwrap();
            assert_abs_diff_eq!(g.value, 1.0 / (2.0 * PI), epsilon = 1e-12);
        }
        assert!(heat_kernel(&d, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn interval_kernel_matches_images() {
        let d = SpectralDomain::interval(PI, 64, 256).unwrap();
        let x = PI / 2.0;
        let g = heat_kernel(&d, 0.05, x, x).unwrap();
        let oracle = image_kernel(PI, 0.05, x, x, 7);
        assert_abs_diff_eq!(g.value, oracle, epsilon = 1e-10);
        let a = heat_kernel(&d, 0.05, 0.3, 1.9).unwrap().value;
        let b = heat_kernel(&d, 0.05, 1.9, 0.3).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn semigroup_properties() {
        let d = SpectralDomain::interval(PI, 8, 64).unwrap();
        let u = d.synthesize(&[1.0, 0.3, -0.2, 0.1]).unwrap();
        assert_eq!(
            semigroup_apply(&d, 0.0, &u).unwrap().coefficients(),
            u.coefficients()
        );
        let ts = semigroup_apply(&d, 0.2, &semigroup_apply(&d, 0.3, &u).unwrap()).unwrap();
        let direct = semigroup_apply(&d, 0.5, &u).unwrap();
        for (a, b) in ts.values().iter().zip(direct.values()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-13);
        }
        let e = semigroup_apply(&d, 1.0, &d.mode_field(0)).unwrap();
        assert_abs_diff_eq!(
            e.coefficients().unwrap()[0],
            0.36787944117144233,
            epsilon = 1e-15
        );
        assert!(semigroup_apply(&d, -0.1, &u).is_err());
    }

    #[test]
    fn kernel_mass_behaviour() {
        let c = SpectralDomain::circle(2.0 * PI, 9, 64).unwrap();
        for &t in &[0.01, 0.5, 3.0] {
            assert_abs_diff_eq!(kernel_mass(&c, t, 1.3).unwrap(), 1.0, epsilon = 1e-12);
        }
        let d = SpectralDomain::interval(PI, 32, 256).unwrap();
        let m1 = kernel_mass(&d, 1.0, 1.0).unwrap();
        assert!(m1 > 0.0 && m1 < 1.0);
        let mut prev = m1;
        for &t in &[2.0, 5.0, 10.0] {
            let m = kernel_mass(&d, t, 1.0).unwrap();
            assert!(m < prev);
            prev = m;
        }
        assert!(prev < (-9.0f64).exp() * 4.0 / PI);
    }

    #[test]
    fn composed_kernel_routes_agree() {
        let d = SpectralDomain::interval(PI, 16, 64).unwrap();
        let w = SubdomainWindow::interval(1.0, 2.0).unwrap();
        let eig = composed_kernel(&d, &w, 0.5, 0.7, 2.2).unwrap();
        let quad = composed_kernel_quadrature(&d, &w, 0.5, 0.7, 2.2, 4096).unwrap();
        assert_abs_diff_eq!(eig, quad, epsilon = 1e-6);
        assert_abs_diff_eq!(
            eig,
            composed_kernel(&d, &w, 0.5, 2.2, 0.7).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn composed_kernel_whole_domain_is_time_integral_of_g() {
        let d = SpectralDomain::interval(PI, 16, 64).unwrap();
        let whole = SubdomainWindow::whole(&d);
        let (x, y, horizon) = (0.9, 1.4, 0.5);
        let eig = composed_kernel(&d, &whole, horizon, x, y).unwrap();
        let integral: f64 = simpson_rule(0.0, horizon, 8192)
            .iter()
            .map(|&(s, w)| w * heat_kernel(&d, (2.0 * s).max(1e-300), x, y).unwrap().value)
            .sum();
        assert_abs_diff_eq!(eig, integral, epsilon = 1e-8);
    }

    #[test]
    fn l_operator_properties() {
        let d = SpectralDomain::interval(PI, 8, 64).unwrap();
        let whole = SubdomainWindow::whole(&d);
        let l = LOperator::new(&d, &whole, 1.0).unwrap();
        let lphi = l.apply(&d.mode_field(0)).unwrap();
        let c = lphi.coefficients().unwrap();
        assert_abs_diff_eq!(c[0], 0.43233235838169365, epsilon = 1e-14);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-14));

        let w = SubdomainWindow::interval(0.5, 1.5).unwrap();
        let l = LOperator::new(&d, &w, 1.0).unwrap();
        let mut rng = Lcg64::new(3);
        let phi = d.synthesize(&rng.signed_vec(8)).unwrap();
        let psi = d.synthesize(&rng.signed_vec(8)).unwrap();
        let a = d.inner_product(&l.apply(&phi).unwrap(), &psi).unwrap();
        let b = d.inner_product(&phi, &l.apply(&psi).unwrap()).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        assert!(d.inner_product(&l.apply(&phi).unwrap(), &phi).unwrap() >= 0.0);
    }

    #[test]
    fn h_norm_routes() {
        let d = SpectralDomain::interval(PI, 4, 64).unwrap();
        let w = SubdomainWindow::interval(0.5, 1.5).unwrap();
        let zero = d.synthesize(&[0.0; 4]).unwrap();
        let hz = h_norm(&d, &w, 1.0, &zero, 64).unwrap();
        assert_eq!(hz.by_eigen_form, 0.0);
        assert_eq!(hz.by_quadrature, 0.0);
        let mut rng = Lcg64::new(11);
        for _ in 0..5 {
            let phi = d.synthesize(&rng.signed_vec(4)).unwrap();
            let h = h_norm(&d, &w, 1.0, &phi, 1024).unwrap();
            assert_abs_diff_eq!(h.by_eigen_form, h.by_quadrature, epsilon = 1e-7);
            let l = LOperator::new(&d, &w, 1.0).unwrap();
            let lq = d.inner_product(&l.apply(&phi).unwrap(), &phi).unwrap();
            assert_abs_diff_eq!(h.by_eigen_form.powi(2), lq, epsilon = 1e-10);
        }
    }
}
