/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanEstimate {
    /// Two-pass estimate; the input order fixes the rounding, so callers that
    /// need determinism pass samples in index order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanEstimate::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            count: n,
        }
    }

    /// `|mean − target| ≤ k·stderr`; a zero stderr demands near-equality.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + 1e-12
    }
}

/// Upper tail `Pr(X ≥ x)` of `Beta(a, b)` for positive integers `a`, `b`,
/// via the binomial identity `I_x(a, b) = Σ_{j=a}^{a+b−1} C(a+b−1, j) x^j (1−x)^{a+b−1−j}`.
pub fn beta_upper_tail(a: u64, b: u64, x: f64) -> f64 {
    assert!(a >= 1 && b >= 1, "integer Beta parameters must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let n = a + b - 1;
    // Pr(X ≥ x) = 1 − I_x(a, b) = Σ_{j<a} C(n, j) x^j (1−x)^{n−j}
    let ln_x = x.ln();
    let ln_1mx = (-x).ln_1p();
    (0..a)
        .map(|j| (ln_choose(n, j) + j as f64 * ln_x + (n - j) as f64 * ln_1mx).exp())
        .sum::<f64>()
        .min(1.0)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// Coverage probability `Pr(⟨ψ|B|ψ⟩ ≥ 2^{m−n−1})` for Haar `ψ` and a rank-`2^m`
/// projector `B` in dimension `2^n`. `⟨ψ|B|ψ⟩ ~ Beta(2^m, 2^n − 2^m)`;
/// when `m = n` the overlap is identically one.
pub fn coverage_tail(n: u32, m: u32) -> f64 {
    if m == n {
        return 1.0;
    }
    let rank = 1u64 << m;
    let dim = 1u64 << n;
    beta_upper_tail(rank, dim - rank, 2f64.powi(m as i32 - n as i32 - 1))
}
