//! Exact binomial coefficients and rational probabilities.
//!
//! Every label probability of a classifier smoothed by ablation is an integer
//! multiple of `1 / C(d, e)`, so the whole certification path can be carried
//! out on that lattice without rounding. Binomials are arbitrary precision:
//! `C(3072, 50)` alone needs well over 64 bits.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// `C(m, e)`, exact. Zero when `m < e`.
pub fn binomial(m: u64, e: u64) -> BigUint {
    if e > m {
        return BigUint::zero();
    }
    let e = e.min(m - e);
    let mut acc = BigUint::one();
    for i in 1..=e {
        // acc holds C(m - e + i - 1, i - 1); the product below is divisible by i.
        acc *= m - e + i;
        acc /= i;
    }
    acc
}

/// A probability in `[0, 1]` stored as a reduced fraction.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ExactProb(Ratio<BigUint>);

impl ExactProb {
    pub fn new(numer: BigUint, denom: BigUint) -> Result<Self> {
        if denom.is_zero() {
            return Err(Error::invalid("probability denominator is zero"));
        }
        if numer > denom {
            return Err(Error::invalid(format!("{numer}/{denom} exceeds one")));
        }
        Ok(ExactProb(Ratio::new(numer, denom)))
    }

    pub fn zero() -> Self {
        ExactProb(Ratio::zero())
    }

    pub fn one() -> Self {
        ExactProb(Ratio::one())
    }

    /// `count / total`, i.e. a point on the `1/total` lattice.
    pub fn lattice(count: BigUint, total: &BigUint) -> Result<Self> {
        Self::new(count, total.clone())
    }

    pub fn from_u64(numer: u64, denom: u64) -> Result<Self> {
        Self::new(BigUint::from(numer), BigUint::from(denom))
    }

    pub fn numer(&self) -> &BigUint {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigUint {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    /// Sum, or `None` if it would leave `[0, 1]`.
    pub fn checked_add(&self, other: &ExactProb) -> Option<ExactProb> {
        let sum = &self.0 + &other.0;
        (sum <= Ratio::one()).then_some(ExactProb(sum))
    }

    /// Difference, or `None` if it would be negative.
    pub fn checked_sub(&self, other: &ExactProb) -> Option<ExactProb> {
        (self.0 >= other.0).then(|| ExactProb(&self.0 - &other.0))
    }

    /// `1 - self`.
    pub fn complement(&self) -> ExactProb {
        ExactProb(Ratio::one() - &self.0)
    }

    /// The numerator this value has over `total`, if it lies on that lattice.
    pub fn lattice_count(&self, total: &BigUint) -> Option<BigUint> {
        let (q, r) = (self.0.numer() * total).div_rem(self.0.denom());
        r.is_zero().then_some(q)
    }

    /// Nearest `f64`; for display and reporting only.
    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(self.0.numer(), self.0.denom())
    }
}

impl PartialOrd for ExactProb {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactProb {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for ExactProb {
    type Err = Error;

    /// Accepts `"n/d"` or a bare integer (`"0"`, `"1"`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| BigUint::from_str(t.trim()).map_err(|_| Error::invalid(format!("bad fraction {s:?}")));
        match s.split_once('/') {
            Some((n, d)) => ExactProb::new(parse(n)?, parse(d)?),
            None => ExactProb::new(parse(s)?, BigUint::one()),
        }
    }
}

impl Serialize for ExactProb {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExactProb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub(crate) fn ratio_to_f64(numer: &BigUint, denom: &BigUint) -> f64 {
    // Shift both sides down so the quotient survives the conversion to f64.
    let shift = denom.bits().saturating_sub(1000).max(numer.bits().saturating_sub(1000));
    let n = (numer >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (denom >> shift).to_f64().unwrap_or(f64::INFINITY);
    if d == 0.0 {
        return 0.0;
    }
    n / d
}

/// `C(m, e)` for every `m` in `0..=d`, with `e` fixed.
#[derive(Clone, Debug)]
pub struct BinomialTable {
    d: u64,
    e: u64,
    by_m: Vec<BigUint>,
}

impl BinomialTable {
    pub fn new(d: u64, e: u64) -> Result<Self> {
        if d == 0 || e == 0 {
            return Err(Error::invalid(format!("need d >= 1 and e >= 1, got d={d}, e={e}")));
        }
        if e > d {
            return Err(Error::invalid(format!("retained count e={e} exceeds d={d}")));
        }
        let mut by_m = Vec::with_capacity(d as usize + 1);
        by_m.extend((0..e).map(|_| BigUint::zero()));
        let mut cur = BigUint::one();
        by_m.push(cur.clone());
        for m in e + 1..=d {
            // C(m, e) = C(m-1, e) * m / (m - e)
            cur *= m;
            cur /= m - e;
            by_m.push(cur.clone());
        }
        Ok(BinomialTable { d, e, by_m })
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn e(&self) -> u64 {
        self.e
    }

    /// `C(m, e)`; zero for `m < e` including negative `m`.
    pub fn get(&self, m: i64) -> BigUint {
        if m < 0 || m < self.e as i64 {
            return BigUint::zero();
        }
        match self.by_m.get(m as usize) {
            Some(v) => v.clone(),
            None => binomial(m as u64, self.e),
        }
    }

    /// `C(d, e)`, the number of distinct ablations of one input.
    pub fn total(&self) -> &BigUint {
        &self.by_m[self.d as usize]
    }

    /// `C(d, e) - C(d - r, e)`: how many ablations touch at least one of `r` fixed features.
    pub fn delta_count(&self, r: u64) -> BigUint {
        let r = r.min(self.d);
        self.total() - &self.by_m[(self.d - r) as usize]
    }

    /// `Δ(r) = 1 - C(d - r, e) / C(d, e)`.
    pub fn delta(&self, r: u64) -> Result<ExactProb> {
        if r > self.d {
            return Err(Error::invalid(format!("perturbation size r={r} exceeds d={}", self.d)));
        }
        ExactProb::lattice(self.delta_count(r), self.total())
    }

    pub fn quantize_lower(&self, p: f64) -> Result<ExactProb> {
        quantize(p, self.total(), Rounding::Up)
    }

    pub fn quantize_upper(&self, p: f64) -> Result<ExactProb> {
        quantize(p, self.total(), Rounding::Down)
    }
}

/// `Δ(r)` for one-off use; see [`BinomialTable::delta`].
pub fn delta(d: u64, e: u64, r: u64) -> Result<ExactProb> {
    BinomialTable::new(d, e)?.delta(r)
}

/// `⌈p · C(d,e)⌉ / C(d,e)`: the smallest lattice point at or above `p`.
pub fn quantize_lower(p: f64, d: u64, e: u64) -> Result<ExactProb> {
    BinomialTable::new(d, e)?.quantize_lower(p)
}

/// `⌊p · C(d,e)⌋ / C(d,e)`: the largest lattice point at or below `p`.
pub fn quantize_upper(p: f64, d: u64, e: u64) -> Result<ExactProb> {
    BinomialTable::new(d, e)?.quantize_upper(p)
}

#[derive(Clone, Copy)]
enum Rounding {
    Up,
    Down,
}

fn quantize(p: f64, total: &BigUint, rounding: Rounding) -> Result<ExactProb> {
    let (numer, denom) = decimal_fraction(p)?;
    let scaled = numer * total;
    let (q, r) = scaled.div_rem(&denom);
    let count = match rounding {
        Rounding::Up if !r.is_zero() => q + 1u32,
        _ => q,
    };
    ExactProb::lattice(count, total)
}

/// Exact value of the shortest decimal that round-trips to `p`, as `(numer, denom)`.
pub(crate) fn decimal_fraction(p: f64) -> Result<(BigUint, BigUint)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    // `{:e}` prints the shortest round-trip mantissa, e.g. "6.1e-1".
    let text = format!("{p:e}");
    let (mantissa, exp) =
        text.split_once('e').ok_or_else(|| Error::Invariant(format!("unexpected float rendering {text:?}")))?;
    let exp: i64 = exp.parse().map_err(|_| Error::Invariant(format!("unexpected float rendering {text:?}")))?;
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigUint = format!("{int_part}{frac_part}")
        .parse()
        .map_err(|_| Error::Invariant(format!("unexpected float rendering {text:?}")))?;
    let scale = exp - frac_part.len() as i64;
    let ten = BigUint::from(10u32);
    if scale >= 0 {
        Ok((digits * ten.pow(scale as u32), BigUint::one()))
    } else {
        Ok((digits, ten.pow((-scale) as u32)))
    }
}
