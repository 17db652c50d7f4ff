//! Simultaneous one-sided confidence bounds on label probabilities.
//!
//! Given Monte Carlo label counts `n_1..n_c`, the target label `l` gets a
//! lower bound `B(α/c; n_l, n - n_l + 1)` and every other label `j` an upper
//! bound `B(1 - α/c; n_j + 1, n - n_j)`, where `B(q; ξ, ζ)` is the `q`-quantile
//! of `Beta(ξ, ζ)`. Splitting `α` evenly over the `c` one-sided intervals makes
//! all of them hold jointly with probability at least `1 - α`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x) - ((x - 1/2) ln x - x + ln √(2π))` for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0, -691.0 / 360_360.0];
    let inv2 = 1.0 / (x * x);
    COEFFS.iter().rev().fold(0.0, |acc, c| acc * inv2 + c) / x
}

/// `ln B(a, b)`, keeping the large `ln Γ` terms from cancelling for big shapes.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    let (p, q) = if a <= b { (a, b) } else { (b, a) };
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * (p / (p + q)).ln() + q * (-p / (p + q)).ln_1p()
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(p + q);
        ln_gamma(p) + corr + p - p * (p + q).ln() + (q - 0.5) * (-p / (p + q)).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * continued_fraction(x, a, b) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - ln_front.exp() * continued_fraction(1.0 - x, b, a) / b).clamp(0.0, 1.0)
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    let max_iter = 200 + (20.0 * (a.max(b)).sqrt()) as usize;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

fn beta_density(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)).exp()
}

/// The `q`-quantile of `Beta(xi, zeta)`.
pub fn beta_quantile(q: f64, xi: f64, zeta: f64) -> Result<f64> {
    if !(xi > 0.0 && xi.is_finite() && zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::invalid(format!("beta shape parameters must be positive and finite, got ({xi}, {zeta})")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(1.0);
    }
    // Solve in whichever tail keeps the target away from 1.
    if q > 0.5 {
        return Ok(1.0 - lower_tail_root(1.0 - q, zeta, xi));
    }
    Ok(lower_tail_root(q, xi, zeta))
}

/// `beta_quantile(1 - tail, xi, zeta)` without forming `1 - tail`.
pub fn beta_quantile_upper(tail: f64, xi: f64, zeta: f64) -> Result<f64> {
    Ok(1.0 - beta_quantile(tail, zeta, xi)?)
}

/// Root of `I_x(a, b) = q` for `q` in `(0, 0.5]`.
fn lower_tail_root(q: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if incomplete_beta(mid, a, b) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.max(1e-3) {
            break;
        }
    }
    // Newton polish inside the bracket.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..4 {
        let pdf = beta_density(x, a, b);
        if pdf <= 0.0 || !pdf.is_finite() {
            break;
        }
        let next = x - (incomplete_beta(x, a, b) - q) / pdf;
        if !(next >= lo && next <= hi) || next == x {
            break;
        }
        x = next;
    }
    x
}

/// Label counts from `n` Monte Carlo evaluations of the base classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    counts: Vec<u64>,
    label: usize,
}

impl SampleCounts {
    /// `label` is 0-based and must index into `counts`.
    pub fn new(counts: Vec<u64>, label: usize) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 labels, got {}", counts.len())));
        }
        if label >= counts.len() {
            return Err(Error::invalid(format!("target label {} out of range for {} labels", label + 1, counts.len())));
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::invalid("sample counts are all zero"));
        }
        Ok(SampleCounts { counts, label })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn num_labels(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// The most frequent label, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &n) in self.counts.iter().enumerate() {
            if n > self.counts[best] {
                best = j;
            }
        }
        best
    }

    /// Same counts, certifying a different label.
    pub fn with_label(&self, label: usize) -> Result<Self> {
        Self::new(self.counts.clone(), label)
    }

    /// All counts and `n` multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        SampleCounts { counts: self.counts.iter().map(|n| n * factor).collect(), label: self.label }
    }
}

/// Floating-point bounds before quantization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawBounds {
    /// Lower bound on the target label's probability.
    pub lower: f64,
    /// Upper bounds per label; `None` at the target label.
    pub upper: Vec<Option<f64>>,
    pub label: usize,
    pub alpha: f64,
}

impl RawBounds {
    pub fn new(lower: f64, upper: Vec<Option<f64>>, label: usize, alpha: f64) -> Result<Self> {
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if !in_unit(lower) {
            return Err(Error::invalid(format!("lower bound {lower} outside [0, 1]")));
        }
        if label >= upper.len() {
            return Err(Error::invalid("target label out of range"));
        }
        for (j, u) in upper.iter().enumerate() {
            match (j == label, u) {
                (true, None) => {}
                (false, Some(p)) if in_unit(*p) => {}
                (true, Some(_)) => return Err(Error::invalid("upper bound given for the target label")),
                (false, _) => return Err(Error::invalid(format!("label {} needs an upper bound in [0, 1]", j + 1))),
            }
        }
        Ok(RawBounds { lower, upper, label, alpha })
    }

    pub fn num_labels(&self) -> usize {
        self.upper.len()
    }
}

/// Bonferroni-split Clopper-Pearson bounds for every label at once.
pub fn simuem_bounds(counts: &SampleCounts, alpha: f64) -> Result<RawBounds> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let c = counts.num_labels();
    let n = counts.total() as f64;
    let tail = alpha / c as f64;
    let l = counts.label();

    let n_l = counts.counts()[l] as f64;
    let lower = if n_l == 0.0 { 0.0 } else { beta_quantile(tail, n_l, n - n_l + 1.0)? };

    let mut upper = Vec::with_capacity(c);
    for (j, &n_j) in counts.counts().iter().enumerate() {
        if j == l {
            upper.push(None);
            continue;
        }
        let n_j = n_j as f64;
        let u = if n_j == n { 1.0 } else { beta_quantile_upper(tail, n_j + 1.0, n - n_j)? };
        upper.push(Some(u));
    }
    RawBounds::new(lower, upper, l, alpha)
}
