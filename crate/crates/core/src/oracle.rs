//! Independent reference engines: the closed-form mode ODE, a Crank–Nicolson
//! finite-difference stepper, classical RK4, scalar series summers and the
//! method-of-images heat kernel. None of these touch the eigen-decomposition
//! of the code they check.

use crate::domain::{DomainKind, SpectralDomain};
use crate::error::{invalid, HeatError, Result};
use crate::fullctl::SeriesVariant;
use crate::kernel::SubdomainWindow;
use crate::linalg::{solve_cyclic_tridiagonal, solve_tridiagonal};
use crate::numeric::{pairwise_sum, simpson_rule, weighted_dot};
use crate::par;

pub const CN_MIN_STEPS: usize = 64;
pub const RK4_MIN_STEPS: usize = 16;

/// Scalar series are summed until the next term drops below this.
pub const SCALAR_SERIES_CUTOFF: f64 = 1e-17;
const SCALAR_SERIES_MAX_TERMS: usize = 100_000_000;

/// `u(τ)` for `u' = λ u − f` with constant `f`.
pub fn mode_ode_exact(lambda: f64, u_start: f64, f_const: f64, tau: f64) -> f64 {
    let x = lambda * tau;
    if x == 0.0 {
        return u_start - f_const * tau;
    }
    x.exp() * u_start - f_const * x.exp_m1() / lambda
}

/// `Σ_{k≥1} q^k` or `Σ_{k≥1} q^{2^k}` by plain term-by-term summation.
pub fn scalar_series(q: f64, variant: SeriesVariant) -> Result<f64> {
    if !(q < 1.0) || !(q >= 0.0) {
        return Err(invalid(format!("scalar series needs 0 <= q < 1, got {q}")));
    }
    let mut sum = 0.0;
    match variant {
        SeriesVariant::AllIntegers => {
            let mut term = q;
            let mut k = 0;
            while term >= SCALAR_SERIES_CUTOFF {
                sum += term;
                term *= q;
                k += 1;
                if k > SCALAR_SERIES_MAX_TERMS {
                    return Err(HeatError::SeriesNotConverged {
                        what: "scalar geometric series",
                        terms: k,
                        last_ratio: q,
                    });
                }
            }
        }
        SeriesVariant::DyadicAsPrinted => {
            let mut term = q * q;
            while term >= SCALAR_SERIES_CUTOFF {
                sum += term;
                term *= term;
            }
        }
    }
    Ok(sum)
}

/// `G(x, t, y)` by the method of images: Dirichlet reflections on an
/// interval or periodic copies on a circle, `images` copies each side.
pub fn image_sum_kernel(circle: bool, length: f64, t: f64, x: f64, y: f64, images: i32) -> f64 {
    let gauss = |z: f64| (-z * z / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt();
    let terms: Vec<f64> = (-images..=images)
        .map(|n| {
            if circle {
                gauss(x - y + n as f64 * length)
            } else {
                let shift = 2.0 * n as f64 * length;
                gauss(x - y + shift) - gauss(x + y + shift)
            }
        })
        .collect();
    pairwise_sum(&terms)
}

/// Three-point finite-difference operator on a uniform grid.
#[derive(Debug, Clone)]
pub struct FdGrid {
    pub periodic: bool,
    pub spacing: f64,
    /// Sub-, main and super-diagonal of the operator (`lower[0]`/`upper[n-1]`
    /// are the periodic wrap entries).
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl FdGrid {
    /// Dirichlet `∂²` on `n` interior nodes with spacing `h`.
    pub fn dirichlet(n: usize, h: f64) -> Self {
        let c = 1.0 / (h * h);
        Self {
            periodic: false,
            spacing: h,
            lower: vec![c; n],
            diag: vec![-2.0 * c; n],
            upper: vec![c; n],
        }
    }

    /// Periodic `∂²` on `n` nodes.
    pub fn periodic(n: usize, h: f64) -> Self {
        Self {
            periodic: true,
            ..Self::dirichlet(n, h)
        }
    }

    /// Dirichlet `∂(a ∂·)` with `a` given at the `n + 1` cell faces.
    pub fn variable(faces: &[f64], h: f64) -> Self {
        let n = faces.len() - 1;
        let c = 1.0 / (h * h);
        Self {
            periodic: false,
            spacing: h,
            lower: (0..n).map(|i| faces[i] * c).collect(),
            diag: (0..n).map(|i| -(faces[i] + faces[i + 1]) * c).collect(),
            upper: (0..n).map(|i| faces[i + 1] * c).collect(),
        }
    }

    /// The grid matching a domain's nodes.
    pub fn from_domain(domain: &SpectralDomain) -> Self {
        let (m, h) = (domain.grid_len(), domain.spacing());
        match domain.kind() {
            DomainKind::Interval => Self::dirichlet(m, h),
            DomainKind::Circle => Self::periodic(m, h),
            DomainKind::SturmLiouville { conductivity } => Self::variable(conductivity, h),
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 {
                    u[i - 1]
                } else if self.periodic {
                    u[n - 1]
                } else {
                    0.0
                };
                let right = if i + 1 < n {
                    u[i + 1]
                } else if self.periodic {
                    u[0]
                } else {
                    0.0
                };
                self.lower[i] * left + self.diag[i] * u[i] + self.upper[i] * right
            })
            .collect()
    }
}

/// Recorded states of a time-stepping run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Crank–Nicolson for `u_t = A u − F(t)` on `[t0, t1]` with `nt` steps.
///
/// `forcing(t, out)` fills `F` at the half-step time. States are recorded at
/// `t0`, every `record_every` steps, and at `t1`.
pub fn crank_nicolson(
    grid: &FdGrid,
    u0: &[f64],
    forcing: impl Fn(f64, &mut [f64]),
    t0: f64,
    t1: f64,
    nt: usize,
    record_every: usize,
) -> Result<Trajectory> {
    if nt < CN_MIN_STEPS {
        return Err(invalid(format!(
            "Crank–Nicolson needs at least {CN_MIN_STEPS} steps"
        )));
    }
    if !(t1 >= t0) {
        return Err(invalid(format!("empty time interval [{t0}, {t1}]")));
    }
    let n = grid.len();
    if u0.len() != n {
        return Err(HeatError::LengthMismatch {
            expected: n,
            found: u0.len(),
        });
    }
    let k = (t1 - t0) / nt as f64;
    let half = 0.5 * k;
    let lhs_lower: Vec<f64> = grid.lower.iter().map(|a| -half * a).collect();
    let lhs_diag: Vec<f64> = grid.diag.iter().map(|a| 1.0 - half * a).collect();
    let lhs_upper: Vec<f64> = grid.upper.iter().map(|a| -half * a).collect();
    let record_every = record_every.max(1);
    let mut u = u0.to_vec();
    let mut src = vec![0.0; n];
    let mut out = Trajectory {
        times: vec![t0],
        states: vec![u.clone()],
    };
    for step in 0..nt {
        let t_mid = t0 + (step as f64 + 0.5) * k;
        src.iter_mut().for_each(|s| *s = 0.0);
        forcing(t_mid, &mut src);
        let au = grid.apply(&u);
        let rhs: Vec<f64> = (0..n).map(|i| u[i] + half * au[i] - k * src[i]).collect();
        u = if grid.periodic {
            solve_cyclic_tridiagonal(&lhs_lower, &lhs_diag, &lhs_upper, &rhs)?
        } else {
            solve_tridiagonal(&lhs_lower, &lhs_diag, &lhs_upper, &rhs)?
        };
        if u.iter().any(|v| !v.is_finite()) {
            return Err(HeatError::SolverBreakdown(format!(
                "non-finite state at step {step}"
            )));
        }
        let done = step + 1;
        if done % record_every == 0 || done == nt {
            out.times
                .push(if done == nt { t1 } else { t0 + done as f64 * k });
            out.states.push(u.clone());
        }
    }
    Ok(out)
}

/// Classical RK4 for `u' = rhs(t, u)` on `[0, T]` with `nt` steps.
pub fn rk4_linear_system(
    rhs: impl Fn(f64, &[f64], &mut [f64]),
    u0: &[f64],
    horizon: f64,
    nt: usize,
) -> Result<Vec<f64>> {
    if nt < RK4_MIN_STEPS {
        return Err(invalid(format!("RK4 needs at least {RK4_MIN_STEPS} steps")));
    }
    let n = u0.len();
    let h = horizon / nt as f64;
    let mut u = u0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for step in 0..nt {
        let t = step as f64 * h;
        rhs(t, &u, &mut k1);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = u[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(u)
}

/// `∫₀^T ∫_ω (Σ_j c_j(t) η_j)²` by Simpson in time and grid quadrature on `ω`.
pub fn window_energy_quadrature(
    domain: &SpectralDomain,
    window: &SubdomainWindow,
    horizon: f64,
    time_steps: usize,
    coefficients: impl Fn(f64) -> Vec<f64> + Sync,
) -> Result<f64> {
    let w = domain.window_weights(window)?;
    let rule = simpson_rule(0.0, horizon, time_steps);
    let m = domain.grid_len();
    let values = par::map_range(rule.len(), |k| {
        let (t, wt) = rule[k];
        let c = coefficients(t);
        let mut field = vec![0.0; m];
        for (j, cj) in c.iter().enumerate() {
            for (f, e) in field.iter_mut().zip(domain.mode(j)) {
                *f += cj * e;
            }
        }
        wt * weighted_dot(&w, &field, &field)
    });
    Ok(pairwise_sum(&values))
}
