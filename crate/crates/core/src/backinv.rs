//! Backward heat flow by the Taylor series `u(t) = Σ_k (t−T)^k/k! Δ^k u(T)`.
//!
//! The series is guaranteed only for `t ∈ ((1−e^{−1})T, T]`. The spectral
//! backend sums it per mode, where it converges for every `t`; the grid
//! backend applies the three-point stencil and shows the window in practice.
//! Longer steps chain several inversions through intermediate times.

use serde::Serialize;

use crate::domain::{Field, SpectralDomain};
use crate::error::{invalid, HeatError, Result};
use crate::fullctl::fit_growth_constant;
use crate::numeric::norm2;

/// `1 − e^{−1}`.
pub fn window_ratio() -> f64 {
    -(-1.0f64).exp_m1()
}

/// Reachability growth rates up to `RATE_FACTOR / t` are accepted per stage.
pub const RATE_FACTOR: f64 = 3.0;

/// The half-open interval `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionWindow {
    pub lower: f64,
    pub upper: f64,
}

impl InversionWindow {
    pub fn contains(&self, t: f64) -> bool {
        t > self.lower && t <= self.upper
    }
}

/// `((1−e^{−1})T, T]`.
pub fn inversion_window(horizon: f64) -> Result<InversionWindow> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    Ok(InversionWindow {
        lower: window_ratio() * horizon,
        upper: horizon,
    })
}

fn check_times(t: f64, horizon: f64) -> Result<()> {
    if !(t > 0.0 && t <= horizon && horizon.is_finite()) {
        return Err(invalid(format!(
            "need 0 < t <= T, got t = {t}, T = {horizon}"
        )));
    }
    Ok(())
}

/// Result of [`invert_spectral`].
#[derive(Debug, Clone)]
pub struct SpectralInversion {
    pub field: Field,
    /// `|c_j| · |e^{(t−T)λ_j} − Σ_{k≤K} ((t−T)λ_j)^k/k!|` per mode.
    pub truncation: Vec<f64>,
}

/// Per-mode partial sums of the exponential series.
pub fn invert_spectral(
    domain: &SpectralDomain,
    u_t: &Field,
    t: f64,
    horizon: f64,
    terms: usize,
) -> Result<SpectralInversion> {
    check_times(t, horizon)?;
    let c = domain.coefficients_of(u_t)?;
    let s = t - horizon;
    let mut out = Vec::with_capacity(c.len());
    let mut truncation = Vec::with_capacity(c.len());
    for (ck, l) in c.iter().zip(domain.eigenvalues()) {
        let x = s * l;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=terms {
            term *= x / k as f64;
            sum += term;
        }
        out.push(sum * ck);
        truncation.push(ck.abs() * (x.exp() - sum).abs());
    }
    Ok(SpectralInversion {
        field: domain.synthesize(&out)?,
        truncation,
    })
}

/// Result of [`invert_grid`].
#[derive(Debug, Clone)]
pub struct GridInversion {
    /// Partial sum with the smallest trace error.
    pub best: Field,
    pub best_terms: usize,
    /// Relative L² error of the partial sum with `K = 0, 1, …` terms.
    pub trace: Vec<f64>,
    pub grid: usize,
}

impl GridInversion {
    pub fn min_error(&self) -> f64 {
        self.trace[self.best_terms]
    }

    /// Whether the trace never increases before its minimum.
    pub fn monotone_to_minimum(&self) -> bool {
        self.trace[..=self.best_terms]
            .windows(2)
            .all(|w| w[1] <= w[0])
    }

    /// Whether the final error exceeds `factor` times the minimum.
    pub fn diverges(&self, factor: f64) -> bool {
        let last = *self.trace.last().unwrap_or(&0.0);
        !last.is_finite() || last > factor * self.min_error()
    }
}

/// Partial sums with the grid stencil, scored against `reference`.
pub fn invert_grid(
    domain: &SpectralDomain,
    u_t: &Field,
    t: f64,
    horizon: f64,
    terms: usize,
    reference: &Field,
) -> Result<GridInversion> {
    check_times(t, horizon)?;
    if reference.len() != u_t.len() || u_t.len() != domain.grid_len() {
        return Err(HeatError::LengthMismatch {
            expected: domain.grid_len(),
            found: reference.len().min(u_t.len()),
        });
    }
    let s = t - horizon;
    let ref_norm = domain.norm(reference)?;
    let scale = if ref_norm > 0.0 { ref_norm } else { 1.0 };
    let error_of = |sum: &[f64]| -> Result<f64> {
        let d: Vec<f64> = sum
            .iter()
            .zip(reference.values())
            .map(|(a, b)| a - b)
            .collect();
        Ok(domain.norm(&Field::from_values(d))? / scale)
    };
    let mut term = u_t.values().to_vec();
    let mut sum = term.clone();
    let mut trace = vec![error_of(&sum)?];
    let mut best = sum.clone();
    let mut best_terms = 0;
    for k in 1..=terms {
        term = domain.apply_grid_laplacian(&term);
        let factor = s / k as f64;
        for (tv, sv) in term.iter_mut().zip(sum.iter_mut()) {
            *tv *= factor;
            *sv += *tv;
        }
        let e = error_of(&sum)?;
        trace.push(e);
        if e < trace[best_terms] {
            best_terms = k;
            best.clone_from(&sum);
        }
    }
    Ok(GridInversion {
        best: Field::from_values(best),
        best_terms,
        trace,
        grid: domain.grid_len(),
    })
}

/// Reachability check of one intermediate state.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub from: f64,
    pub to: f64,
    /// Fitted growth rate `A_i` of the state at `from`.
    pub growth: f64,
    /// `RATE_FACTOR / from`.
    pub allowed: f64,
    pub reachable: bool,
}

/// Result of [`invert_segmented`].
#[derive(Debug, Clone)]
pub struct SegmentedInversion {
    pub field: Field,
    /// `T = t_0 > t_1 > … > t_segments`.
    pub times: Vec<f64>,
    pub ratio: f64,
    pub stages: Vec<StageReport>,
}

/// Chain spectral inversions through `t_i = T r^i` with
/// `r = (t_target/T)^{1/segments}`, which must exceed `1 − e^{−1}`.
pub fn invert_segmented(
    domain: &SpectralDomain,
    u_t: &Field,
    t_target: f64,
    horizon: f64,
    segments: usize,
    terms: usize,
) -> Result<SegmentedInversion> {
    check_times(t_target, horizon)?;
    if segments == 0 {
        return Err(invalid("need at least one segment"));
    }
    let ratio = (t_target / horizon).powf(1.0 / segments as f64);
    if ratio <= window_ratio() {
        return Err(HeatError::SegmentationInfeasible(format!(
            "ratio {ratio:.6} per segment does not exceed 1 − 1/e with {segments} segments"
        )));
    }
    let mut times = vec![horizon];
    for i in 1..segments {
        times.push(horizon * ratio.powi(i as i32));
    }
    times.push(t_target);
    let mut state = domain
        .coefficients_of(u_t)
        .and_then(|c| domain.synthesize(&c))?;
    let mut stages = Vec::with_capacity(segments);
    for w in times.windows(2) {
        let (from, to) = (w[0], w[1]);
        let growth = fit_growth_constant(domain, &state, 20)?.a;
        let allowed = RATE_FACTOR / from;
        stages.push(StageReport {
            from,
            to,
            growth,
            allowed,
            reachable: growth <= allowed,
        });
        state = invert_spectral(domain, &state, to, from, terms)?.field;
    }
    Ok(SegmentedInversion {
        field: state,
        times,
        ratio,
        stages,
    })
}

/// Relative L² distance `‖a − b‖ / ‖b‖` in coefficient space.
pub fn relative_error(domain: &SpectralDomain, a: &Field, b: &Field) -> Result<f64> {
    let ca = domain.coefficients_of(a)?;
    let cb = domain.coefficients_of(b)?;
    let d: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x - y).collect();
    let nb = norm2(&cb);
    Ok(norm2(&d) / if nb > 0.0 { nb } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::semigroup_apply;
    use crate::numeric::Lcg64;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn window_endpoints() {
        let w = inversion_window(1.0).unwrap();
        assert_abs_diff_eq!(w.lower, 0.6321205588285577, epsilon = 1e-15);
        assert!(w.contains(1.0) && !w.contains(w.lower));
        assert_abs_diff_eq!(
            inversion_window(2.0).unwrap().lower,
            1.2642411176571153,
            epsilon = 1e-15
        );
        assert!(inversion_window(0.0).is_err());
    }

    #[test]
    fn spectral_inversion() {
        let d = SpectralDomain::interval(PI, 16, 128).unwrap();
        let u = d.mode_field(0);
        let r = invert_spectral(&d, &u, 0.7, 1.0, 30).unwrap();
        assert_abs_diff_eq!(
            r.field.coefficients().unwrap()[0],
            1.3498588075760032,
            epsilon = 1e-14
        );
        let same = invert_spectral(&d, &u, 1.0, 1.0, 5).unwrap();
        assert_eq!(same.field.coefficients(), u.coefficients());
        let mut rng = Lcg64::new(3);
        let v = d.synthesize(&rng.signed_vec(6)).unwrap();
        let fwd = semigroup_apply(&d, 0.3, &v).unwrap();
        let back = invert_spectral(&d, &fwd, 0.7, 1.0, 40).unwrap();
        assert!(relative_error(&d, &back.field, &v).unwrap() < 1e-10);
        let w = d.synthesize(&rng.signed_vec(6)).unwrap();
        let lin = invert_spectral(&d, &fwd.scaled(2.0).plus(&w).unwrap(), 0.7, 1.0, 40).unwrap();
        let sep = invert_spectral(&d, &fwd, 0.7, 1.0, 40)
            .unwrap()
            .field
            .scaled(2.0)
            .plus(&invert_spectral(&d, &w, 0.7, 1.0, 40).unwrap().field)
            .unwrap();
        assert!(relative_error(&d, &lin.field, &sep).unwrap() < 1e-14);
        assert!(invert_spectral(&d, &u, 1.2, 1.0, 5).is_err());
    }

    #[test]
    fn grid_inversion_trace() {
        let d = SpectralDomain::interval(PI, 16, 256).unwrap();
        let v = d.synthesize(&[1.0, 1.0]).unwrap();
        let u_t = semigroup_apply(&d, 1.0, &v).unwrap();
        let reference = semigroup_apply(&d, 0.7, &v).unwrap();
        let inside = invert_grid(&d, &u_t, 0.7, 1.0, 25, &reference).unwrap();
        assert_eq!(inside.trace.len(), 26);
        assert!(inside.monotone_to_minimum());
        assert!(inside.min_error() < 1e-2);
        let reference = semigroup_apply(&d, 0.3, &v).unwrap();
        let outside = invert_grid(&d, &u_t, 0.3, 1.0, 25, &reference).unwrap();
        assert!(outside.diverges(10.0));
        let k0 = invert_grid(&d, &u_t, 0.7, 1.0, 0, &reference).unwrap();
        assert_eq!(k0.best.values(), u_t.values());
    }

    #[test]
    fn segmented_inversion() {
        let d = SpectralDomain::interval(PI, 16, 128).unwrap();
        let v = d.synthesize(&[1.0, 0.5, -0.25]).unwrap();
        let u_t = semigroup_apply(&d, 1.0, &v).unwrap();
        let target = semigroup_apply(&d, 0.3, &v).unwrap();
        let r = invert_segmented(&d, &u_t, 0.3, 1.0, 3, 40).unwrap();
        assert_abs_diff_eq!(r.ratio, 0.3f64.powf(1.0 / 3.0), epsilon = 1e-15);
        assert!(relative_error(&d, &r.field, &target).unwrap() < 1e-8);
        assert!(r.stages.iter().all(|s| s.reachable));
        assert!(invert_segmented(&d, &u_t, 0.5, 1.0, 2, 40).is_ok());
        assert!(matches!(
            invert_segmented(&d, &u_t, 0.3, 1.0, 2, 40),
            Err(HeatError::SegmentationInfeasible(_))
        ));
        let one = invert_segmented(&d, &u_t, 0.7, 1.0, 1, 30).unwrap();
        let direct = invert_spectral(&d, &u_t, 0.7, 1.0, 30).unwrap();
        assert_eq!(one.field.values(), direct.field.values());
    }
}
