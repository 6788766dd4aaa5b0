//! Spectral representations of the Dirichlet Laplacian on an interval,
//! the Laplacian on a circle, and a finite-difference Sturm–Liouville
//! operator `∂(a ∂·)`, together with the grid quadrature used for every
//! inner product in the crate.
//!
//! Mode indices are 0-based: mode `k` carries the `k+1`-th eigenvalue in
//! the descending order `λ_1 ≥ λ_2 ≥ …`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, HeatError, Result};
use crate::kernel::SubdomainWindow;
use crate::linalg::symmetric_tridiagonal_eigen;
use crate::numeric::{pairwise_sum_by, weighted_dot};
use crate::par;

/// Grid nodes required per retained mode.
pub const MIN_NODES_PER_MODE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    /// `(0, L)` with zero Dirichlet data.
    Interval,
    /// Periodic domain of circumference `L`.
    Circle,
    /// `(0, L)` with operator `∂(a ∂·)` and zero Dirichlet data; holds the
    /// conductivity at the `M + 1` cell faces `x_{m+1/2}`.
    SturmLiouville { conductivity: Vec<f64> },
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Interval => "interval",
            DomainKind::Circle => "circle",
            DomainKind::SturmLiouville { .. } => "sturm_liouville",
        }
    }
}

/// Eigenpairs, grid and quadrature for one model domain.
#[derive(Debug, Clone)]
pub struct SpectralDomain {
    kind: DomainKind,
    length: f64,
    spacing: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Mode `k` sampled on the grid, stored at `[k*M, (k+1)*M)`.
    modes: Vec<f64>,
}

/// A real function on a domain grid, optionally with its eigen-coefficients.
///
/// When coefficients are present they are authoritative for spectral
/// operations; grid values are kept consistent with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    coefficients: Option<Vec<f64>>,
}

impl Field {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            coefficients: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        self.coefficients.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            values: self.values.iter().map(|v| c * v).collect(),
            coefficients: self
                .coefficients
                .as_ref()
                .map(|cs| cs.iter().map(|v| c * v).collect()),
        }
    }

    /// `self + other`; coefficients survive only if both operands carry them.
    pub fn plus(&self, other: &Field) -> Result<Field> {
        if self.len() != other.len() {
            return Err(HeatError::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let coefficients = match (&self.coefficients, &other.coefficients) {
            (Some(a), Some(b)) if a.len() == b.len() => {
                Some(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            _ => None,
        };
        Ok(Field {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
            coefficients,
        })
    }

    /// `self - other`.
    pub fn minus(&self, other: &Field) -> Result<Field> {
        self.plus(&other.scaled(-1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianBackend {
    /// Multiply eigen-coefficients by `λ^j`.
    Spectral,
    /// Apply the three-point stencil `j` times on the grid.
    Grid,
}

/// Result of [`SpectralDomain::laplacian_power`].
#[derive(Debug, Clone)]
pub struct LaplacianPower {
    pub field: Field,
    /// `ρ^j ‖u‖ / ‖Δ^j u‖` with `ρ` the stencil's spectral radius bound;
    /// large values mean stencil roundoff dominates. Always 1 for the
    /// spectral backend.
    pub condition_estimate: f64,
}

/// JSON descriptor of a domain.
#[derive(Debug, Clone, Serialize)]
pub struct DomainDescriptor {
    pub kind: &'static str,
    pub length: f64,
    pub modes: usize,
    pub grid: usize,
    pub eigenvalues: Vec<f64>,
}

fn check_sizes(length: f64, n_modes: usize, grid: usize) -> Result<()> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(invalid(format!(
            "domain length must be positive, got {length}"
        )));
    }
    if n_modes == 0 {
        return Err(invalid("at least one mode is required"));
    }
    let required = MIN_NODES_PER_MODE * n_modes;
    if grid < required {
        return Err(HeatError::GridTooCoarse {
            modes: n_modes,
            grid,
            required,
        });
    }
    Ok(())
}

impl SpectralDomain {
    /// Dirichlet interval `(0, L)`: `λ_j = -(jπ/L)²`, `η_j = √(2/L) sin(jπx/L)`,
    /// sampled on the `M` interior nodes `x_m = m L/(M+1)` with equal
    /// trapezoid weights.
    pub fn interval(length: f64, n_modes: usize, grid: usize) -> Result<Self> {
        check_sizes(length, n_modes, grid)?;
        let h = length / (grid + 1) as f64;
        let nodes: Vec<f64> = (1..=grid).map(|m| m as f64 * h).collect();
        let eigenvalues: Vec<f64> = (1..=n_modes)
            .map(|j| -(j as f64 * PI / length).powi(2))
            .collect();
        let amp = (2.0 / length).sqrt();
        let rows = par::map_range(n_modes, |k| {
            let freq = (k + 1) as f64 * PI / length;
            nodes
                .iter()
                .map(|x| amp * (freq * x).sin())
                .collect::<Vec<f64>>()
        });
        let domain = Self {
            kind: DomainKind::Interval,
            length,
            spacing: h,
            weights: vec![h; grid],
            nodes,
            eigenvalues,
            modes: rows.concat(),
        };
        domain.check_spectrum()?;
        Ok(domain)
    }

    /// Circle of circumference `L` on the periodic grid `x_m = m L/M`.
    ///
    /// Mode 0 is the constant `1/√L`; modes `2k-1`, `2k` are the cosine and
    /// sine of frequency `2πk/L`, both with eigenvalue `-(2πk/L)²`.
    pub fn circle(length: f64, n_modes: usize, grid: usize) -> Result<Self> {
        check_sizes(length, n_modes, grid)?;
        let h = length / grid as f64;
        let nodes: Vec<f64> = (0..grid).map(|m| m as f64 * h).collect();
        let eigenvalues: Vec<f64> = (0..n_modes)
            .map(|k| -(circle_frequency(k, length)).powi(2))
            .collect();
        let rows = par::map_range(n_modes, |k| {
            nodes
                .iter()
                .map(|&x| circle_mode(k, length, x))
                .collect::<Vec<f64>>()
        });
        let domain = Self {
            kind: DomainKind::Circle,
            length,
            spacing: h,
            weights: vec![h; grid],
            nodes,
            eigenvalues,
            modes: rows.concat(),
        };
        domain.check_spectrum()?;
        Ok(domain)
    }

    /// Second-order finite-difference discretisation of `∂(a ∂·)` on `(0, L)`
    /// with Dirichlet ends.
    ///
    /// `coefficient` holds `a` at the `M + 2` uniform nodes `x_0 = 0, …,
    /// x_{M+1} = L`; face values are arithmetic means of neighbours. The
    /// `n_modes` eigenvalues closest to zero are kept, with eigenvectors
    /// normalised in the weighted grid inner product.
    pub fn sturm_liouville(coefficient: &[f64], length: f64, n_modes: usize) -> Result<Self> {
        if coefficient.len() < 3 {
            return Err(invalid(
                "Sturm–Liouville coefficient needs at least 3 samples",
            ));
        }
        let grid = coefficient.len() - 2;
        check_sizes(length, n_modes, grid)?;
        for (index, &value) in coefficient.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(HeatError::NotElliptic { index, value });
            }
        }
        let h = length / (grid + 1) as f64;
        let faces: Vec<f64> = coefficient
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect();
        let inv_h2 = 1.0 / (h * h);
        let diag: Vec<f64> = (0..grid)
            .map(|i| -(faces[i] + faces[i + 1]) * inv_h2)
            .collect();
        let off: Vec<f64> = (0..grid - 1).map(|i| faces[i + 1] * inv_h2).collect();
        let eig = symmetric_tridiagonal_eigen(&diag, &off)?;
        let scale = 1.0 / h.sqrt();
        let mut modes = Vec::with_capacity(n_modes * grid);
        for k in 0..n_modes {
            let v = eig.vector(k);
            let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = v
                .iter()
                .find(|x| x.abs() > 1e-8 * peak)
                .copied()
                .unwrap_or(1.0);
            let sign = if first < 0.0 { -scale } else { scale };
            modes.extend(v.iter().map(|x| sign * x));
        }
        let domain = Self {
            kind: DomainKind::SturmLiouville {
                conductivity: faces,
            },
            length,
            spacing: h,
            nodes: (1..=grid).map(|m| m as f64 * h).collect(),
            weights: vec![h; grid],
            eigenvalues: eig.values[..n_modes].to_vec(),
            modes,
        };
        domain.check_spectrum()?;
        Ok(domain)
    }

    /// [`SpectralDomain::sturm_liouville`] with `a` sampled from a function.
    pub fn sturm_liouville_from_fn(
        a: impl Fn(f64) -> f64,
        length: f64,
        n_modes: usize,
        grid: usize,
    ) -> Result<Self> {
        let h = length / (grid + 1) as f64;
        let samples: Vec<f64> = (0..grid + 2).map(|m| a(m as f64 * h)).collect();
        Self::sturm_liouville(&samples, length, n_modes)
    }

    fn check_spectrum(&self) -> Result<()> {
        let strict = !matches!(self.kind, DomainKind::Circle);
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            if l > 0.0 || (strict && l >= 0.0) || !l.is_finite() {
                return Err(invalid(format!("eigenvalue {k} = {l} has the wrong sign")));
            }
            if k > 0 && l > self.eigenvalues[k - 1] {
                return Err(invalid(format!("eigenvalues not descending at {k}")));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `|D|`.
    pub fn measure(&self) -> f64 {
        self.length
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn grid_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    /// Grid samples of mode `k`.
    pub fn mode(&self, k: usize) -> &[f64] {
        let m = self.grid_len();
        &self.modes[k * m..(k + 1) * m]
    }

    /// Grid samples of mode `k` as a [`Field`] carrying its unit coefficient.
    pub fn mode_field(&self, k: usize) -> Field {
        let mut c = vec![0.0; self.n_modes()];
        c[k] = 1.0;
        Field {
            values: self.mode(k).to_vec(),
            coefficients: Some(c),
        }
    }

    /// Value of mode `k` at an arbitrary point: closed form on the interval
    /// and circle, linear interpolation of the grid vector for the
    /// Sturm–Liouville operator.
    pub fn eigenfunction_at(&self, k: usize, x: f64) -> f64 {
        match &self.kind {
            DomainKind::Interval => {
                (2.0 / self.length).sqrt() * ((k + 1) as f64 * PI * x / self.length).sin()
            }
            DomainKind::Circle => circle_mode(k, self.length, x),
            DomainKind::SturmLiouville { .. } => {
                let v = self.mode(k);
                let m = v.len();
                let s = (x / self.spacing).clamp(0.0, (m + 1) as f64);
                let p = (s.floor() as usize).min(m);
                let frac = s - p as f64;
                // node p sits at index p-1 of the interior vector; ends are zero
                let at = |q: usize| if q == 0 || q > m { 0.0 } else { v[q - 1] };
                (1.0 - frac) * at(p) + frac * at(p + 1)
            }
        }
    }

    pub fn descriptor(&self) -> DomainDescriptor {
        DomainDescriptor {
            kind: self.kind.name(),
            length: self.length,
            modes: self.n_modes(),
            grid: self.grid_len(),
            eigenvalues: self.eigenvalues.clone(),
        }
    }

    fn check_field(&self, field: &Field) -> Result<()> {
        if field.len() != self.grid_len() {
            return Err(HeatError::LengthMismatch {
                expected: self.grid_len(),
                found: field.len(),
            });
        }
        if let Some(c) = field.coefficients() {
            if c.len() != self.n_modes() {
                return Err(HeatError::LengthMismatch {
                    expected: self.n_modes(),
                    found: c.len(),
                });
            }
        }
        Ok(())
    }

    /// Sample `f` on the grid.
    pub fn field_from_fn(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_values(self.nodes.iter().map(|&x| f(x)).collect())
    }

    /// `c_j = Σ_m w_m u(x_m) η_j(x_m)`, always computed from the grid values.
    pub fn project(&self, field: &Field) -> Result<Vec<f64>> {
        self.check_field(field)?;
        Ok(par::map_range(self.n_modes(), |k| {
            weighted_dot(&self.weights, field.values(), self.mode(k))
        }))
    }

    /// Eigen-coefficients of `field`: the cached ones when present,
    /// otherwise a projection.
    pub fn coefficients_of(&self, field: &Field) -> Result<Vec<f64>> {
        self.check_field(field)?;
        match field.coefficients() {
            Some(c) => Ok(c.to_vec()),
            None => self.project(field),
        }
    }

    /// Finite eigen-sum `Σ_j c_j η_j`; shorter coefficient vectors are
    /// zero-padded.
    pub fn synthesize(&self, coefficients: &[f64]) -> Result<Field> {
        let n = self.n_modes();
        if coefficients.len() > n {
            return Err(HeatError::LengthMismatch {
                expected: n,
                found: coefficients.len(),
            });
        }
        let mut c = coefficients.to_vec();
        c.resize(n, 0.0);
        let m = self.grid_len();
        let values = par::map_range(m, |i| pairwise_sum_by(n, |k| c[k] * self.modes[k * m + i]));
        Ok(Field {
            values,
            coefficients: Some(c),
        })
    }

    /// Band-limited copy of `field`: its projection re-synthesised.
    pub fn band_limit(&self, field: &Field) -> Result<Field> {
        let c = self.project(field)?;
        self.synthesize(&c)
    }

    /// One application of the grid operator (three-point stencil with ghost
    /// zeros, periodic wrap, or the variable-coefficient stencil).
    pub fn apply_grid_laplacian(&self, values: &[f64]) -> Vec<f64> {
        let m = values.len();
        let inv_h2 = 1.0 / (self.spacing * self.spacing);
        match &self.kind {
            DomainKind::Interval => (0..m)
                .map(|i| {
                    let left = if i == 0 { 0.0 } else { values[i - 1] };
                    let right = if i + 1 == m { 0.0 } else { values[i + 1] };
                    (left - 2.0 * values[i] + right) * inv_h2
                })
                .collect(),
            DomainKind::Circle => (0..m)
                .map(|i| {
                    let left = values[(i + m - 1) % m];
                    let right = values[(i + 1) % m];
                    (left - 2.0 * values[i] + right) * inv_h2
                })
                .collect(),
            DomainKind::SturmLiouville { conductivity } => (0..m)
                .map(|i| {
                    let left = if i == 0 { 0.0 } else { values[i - 1] };
                    let right = if i + 1 == m { 0.0 } else { values[i + 1] };
                    let (al, ar) = (conductivity[i], conductivity[i + 1]);
                    (al * (left - values[i]) + ar * (right - values[i])) * inv_h2
                })
                .collect(),
        }
    }

    /// Upper bound on the spectral radius of the grid operator.
    pub fn stencil_radius(&self) -> f64 {
        let amax = match &self.kind {
            DomainKind::SturmLiouville { conductivity } => {
                conductivity.iter().fold(0.0f64, |a, &b| a.max(b))
            }
            _ => 1.0,
        };
        4.0 * amax / (self.spacing * self.spacing)
    }

    /// `Δ^power u` with the chosen backend.
    pub fn laplacian_power(
        &self,
        field: &Field,
        power: usize,
        backend: LaplacianBackend,
    ) -> Result<LaplacianPower> {
        self.check_field(field)?;
        match backend {
            LaplacianBackend::Spectral => {
                let mut c = self.coefficients_of(field)?;
                for _ in 0..power {
                    for (ck, l) in c.iter_mut().zip(&self.eigenvalues) {
                        *ck *= l;
                    }
                }
                Ok(LaplacianPower {
                    field: self.synthesize(&c)?,
                    condition_estimate: 1.0,
                })
            }
            LaplacianBackend::Grid => {
                let mut v = field.values().to_vec();
                for _ in 0..power {
                    v = self.apply_grid_laplacian(&v);
                }
                let before = self.norm_values(field.values());
                let after = self.norm_values(&v);
                let condition_estimate = if power == 0 {
                    1.0
                } else if after > 0.0 {
                    self.stencil_radius().powi(power as i32) * before / after
                } else {
                    f64::INFINITY
                };
                Ok(LaplacianPower {
                    field: Field::from_values(v),
                    condition_estimate,
                })
            }
        }
    }

    fn norm_values(&self, v: &[f64]) -> f64 {
        weighted_dot(&self.weights, v, v).sqrt()
    }

    /// `⟨f, g⟩_D` by grid quadrature.
    pub fn inner_product(&self, f: &Field, g: &Field) -> Result<f64> {
        self.check_field(f)?;
        self.check_field(g)?;
        Ok(weighted_dot(&self.weights, f.values(), g.values()))
    }

    /// `‖f‖_{L²(D)}`.
    pub fn norm(&self, f: &Field) -> Result<f64> {
        Ok(self.inner_product(f, f)?.sqrt())
    }

    /// Quadrature weights restricted to `ω`: each node's cell
    /// `[x_m - h/2, x_m + h/2]` contributes in proportion to its overlap
    /// with `ω` (periodic images included on the circle).
    pub fn window_weights(&self, window: &SubdomainWindow) -> Result<Vec<f64>> {
        let m = self.grid_len();
        let weights = match window {
            SubdomainWindow::Interval { start, end } => {
                let (a, b) = (*start, *end);
                let tol = 1e-12 * self.length;
                if !(a < b) || a < -tol || b > self.length + tol {
                    return Err(HeatError::EmptyWindow(format!(
                        "({a}, {b}) is not a nonempty subinterval of (0, {})",
                        self.length
                    )));
                }
                let h = self.spacing;
                let shifts: &[f64] = match self.kind {
                    DomainKind::Circle => &[-1.0, 0.0, 1.0],
                    _ => &[0.0],
                };
                (0..m)
                    .map(|i| {
                        let overlap: f64 = shifts
                            .iter()
                            .map(|s| {
                                let c = self.nodes[i] + s * self.length;
                                ((c + 0.5 * h).min(b) - (c - 0.5 * h).max(a)).max(0.0)
                            })
                            .sum();
                        let frac = overlap / h;
                        if frac >= 1.0 - 1e-12 {
                            self.weights[i]
                        } else {
                            self.weights[i] * frac
                        }
                    })
                    .collect::<Vec<f64>>()
            }
            SubdomainWindow::Mask { nodes } => {
                let mut w = vec![0.0; m];
                for &i in nodes {
                    if i >= m {
                        return Err(HeatError::EmptyWindow(format!(
                            "mask node {i} outside grid of {m}"
                        )));
                    }
                    w[i] = self.weights[i];
                }
                w
            }
        };
        if weights.iter().all(|&w| w == 0.0) {
            return Err(HeatError::EmptyWindow(
                "window covers no quadrature weight".into(),
            ));
        }
        Ok(weights)
    }

    /// `|ω|` as seen by the quadrature.
    pub fn window_measure(&self, window: &SubdomainWindow) -> Result<f64> {
        Ok(crate::numeric::pairwise_sum(&self.window_weights(window)?))
    }

    /// `⟨f, g⟩_{L²(ω)}`.
    pub fn inner_product_on(&self, f: &Field, g: &Field, window: &SubdomainWindow) -> Result<f64> {
        self.check_field(f)?;
        self.check_field(g)?;
        let w = self.window_weights(window)?;
        Ok(weighted_dot(&w, f.values(), g.values()))
    }

    /// Discrete Gram matrix `Σ_m w_m η_i η_j` (row-major `N×N`).
    pub fn gram_matrix(&self) -> Vec<f64> {
        let n = self.n_modes();
        let mut g = vec![0.0; n * n];
        par::fill_rows(&mut g, n, |i, row| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = weighted_dot(&self.weights, self.mode(i), self.mode(j));
            }
        });
        g
    }

    /// `max_{ij} |G_ij - δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.n_modes();
        self.gram_matrix()
            .iter()
            .enumerate()
            .map(|(idx, g)| {
                let want = if idx / n == idx % n { 1.0 } else { 0.0 };
                (g - want).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn circle_frequency(k: usize, length: f64) -> f64 {
    k.div_ceil(2) as f64 * 2.0 * PI / length
}

fn circle_mode(k: usize, length: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0 / length.sqrt();
    }
    let amp = (2.0 / length).sqrt();
    let arg = circle_frequency(k, length) * x;
    if k % 2 == 1 {
        amp * arg.cos()
    } else {
        amp * arg.sin()
    }
}
