//! Scalar helpers shared across modules: deterministic summation, the
//! stable `(1 - e^{sT}) / |s|` kernel, composite Simpson nodes and the
//! portable random generator used for test fields.

/// Block size below which [`pairwise_sum`] sums sequentially.
const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation with a fixed split tree.
///
/// The split points depend only on the length, so the result is
/// bit-identical across runs and thread counts.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n`.
pub fn pairwise_sum_by(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    let buf: Vec<f64> = (0..n).map(f).collect();
    pairwise_sum(&buf)
}

/// Weighted dot product `Σ w_i a_i b_i` with pairwise summation.
pub fn weighted_dot(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(weights.len() == a.len() && a.len() == b.len());
    pairwise_sum_by(a.len(), |i| weights[i] * a[i] * b[i])
}

/// Plain dot product with pairwise summation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    pairwise_sum_by(a.len(), |i| a[i] * b[i])
}

/// Euclidean norm with pairwise summation.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Below this |sT| the Taylor expansion replaces `exp_m1`.
pub const SMALL_EXPONENT: f64 = 1e-8;

/// `∫₀^T e^{s t} dt = (1 - e^{sT}) / |s|` for `s ≤ 0`, and `T` when `s = 0`.
///
/// Written as `expm1(sT) / s`, which carries no cancellation for small `|sT|`.
pub fn one_minus_exp_over(s: f64, horizon: f64) -> f64 {
    let x = s * horizon;
    if x.abs() < SMALL_EXPONENT {
        horizon * (1.0 + 0.5 * x)
    } else {
        x.exp_m1() / s
    }
}

/// Nodes and weights of composite Simpson's rule on `[a, b]` with `n`
/// subintervals (`n` is rounded up to the next even number).
pub fn simpson_rule(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let n = if n % 2 == 1 { n + 1 } else { n.max(2) };
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + h * k as f64, w * h / 3.0)
        })
        .collect()
}

/// `k!` as a float.
pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// 64-bit linear congruential generator (Knuth's MMIX constants).
///
/// `state ← state · 6364136223846793005 + 1442695040888963407 (mod 2⁶⁴)`;
/// a uniform double is the top 53 bits of the new state divided by 2⁵³.
/// The recurrence is fully specified so seeded fixtures can be reproduced
/// in any language.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub const MULTIPLIER: u64 = 6364136223846793005;
    pub const INCREMENT: u64 = 1442695040888963407;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(Self::MULTIPLIER)
            .wrapping_add(Self::INCREMENT);
        self.state
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    pub fn signed_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_signed()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn one_minus_exp_limits() {
        assert_eq!(one_minus_exp_over(0.0, 2.5), 2.5);
        let tiny = one_minus_exp_over(-1e-12, 1.0);
        assert!((tiny - 1.0).abs() < 1e-12);
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((one_minus_exp_over(-2.0, 1.0) - exact).abs() < 1e-15);
        // both sides of the Taylor switch agree
        for x in [-0.99e-8, -1.01e-8] {
            assert!((one_minus_exp_over(x, 1.0) - f64::exp_m1(x) / x).abs() < 1e-15);
        }
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let q: f64 = simpson_rule(0.0, 2.0, 4)
            .iter()
            .map(|(t, w)| w * (t * t * t - t))
            .sum();
        assert!((q - 2.0).abs() < 1e-14);
        assert_eq!(simpson_rule(0.0, 1.0, 3).len(), 5);
    }

    #[test]
    fn lcg_sequence_is_pinned() {
        let mut g = Lcg64::new(0);
        assert_eq!(g.next_u64(), 1442695040888963407);
        assert_eq!(
            g.next_u64(),
            1442695040888963407u64
                .wrapping_mul(Lcg64::MULTIPLIER)
                .wrapping_add(Lcg64::INCREMENT)
        );
        let mut g = Lcg64::new(42);
        for _ in 0..1000 {
            let x = g.next_signed();
            assert!((-1.0..1.0).contains(&x));
        }
    }
}
