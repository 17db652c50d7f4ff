//! The certified-radius optimization.
//!
//! With `N = C(d, e)`, a lower bound `p'_l` on the target label and upper
//! bounds `p̄'_j` on the others (all multiples of `1/N`), the radius is the
//! largest `r` such that
//!
//! ```text
//! p'_l - Δ(r)  >  min_{t=1..k} (p̄'_{Υ_t} + Δ(r)) / t
//! ```
//!
//! where `Υ_t` holds the `t` smallest of the `k` largest upper bounds and
//! `p̄'_{Υ_t} = min(Σ_{j∈Υ_t} p̄'_j, 1 - p'_l)`. Both sides are monotone in
//! `r`, so the feasible set is a prefix of `0..=d` and binary search finds
//! its end. Everything is evaluated on integer numerators over `N`.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::beta_bounds::RawBounds;
use crate::error::{Error, Result};
use crate::exact_prob::{decimal_fraction, BinomialTable, ExactProb};

/// Sizes and target label of one certification problem. Labels are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: u64,
    pub e: u64,
    pub c: usize,
    pub k: usize,
    pub label: usize,
}

impl ProblemSpec {
    pub fn new(d: u64, e: u64, c: usize, k: usize, label: usize) -> Result<Self> {
        if e == 0 || e > d {
            return Err(Error::invalid(format!("need 1 <= e <= d, got e={e}, d={d}")));
        }
        if c < 2 {
            return Err(Error::invalid(format!("need at least 2 labels, got {c}")));
        }
        if k == 0 || k >= c {
            return Err(Error::invalid(format!("need 1 <= k <= c-1, got k={k}, c={c}")));
        }
        if label >= c {
            return Err(Error::invalid(format!("label {} out of range 1..={c}", label + 1)));
        }
        Ok(ProblemSpec { d, e, c, k, label })
    }

    pub fn with_k(self, k: usize) -> Result<Self> {
        Self::new(self.d, self.e, self.c, k, self.label)
    }

    fn check_table(&self, table: &BinomialTable) -> Result<()> {
        if table.d() != self.d || table.e() != self.e {
            return Err(Error::invalid(format!(
                "binomial table is for (d={}, e={}), problem has (d={}, e={})",
                table.d(),
                table.e(),
                self.d,
                self.e
            )));
        }
        Ok(())
    }
}

/// Lattice bounds: a lower bound for the target label, upper bounds for the rest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedBounds {
    pub lower: ExactProb,
    /// `None` at the target label.
    pub upper: Vec<Option<ExactProb>>,
}

impl QuantizedBounds {
    pub fn new(lower: ExactProb, upper: Vec<Option<ExactProb>>, label: usize) -> Result<Self> {
        if label >= upper.len() {
            return Err(Error::invalid("target label out of range"));
        }
        for (j, u) in upper.iter().enumerate() {
            if (j == label) != u.is_none() {
                return Err(Error::invalid(format!(
                    "upper bounds must be present exactly for labels other than {}",
                    label + 1
                )));
            }
        }
        Ok(QuantizedBounds { lower, upper })
    }

    /// Bounds given as numerators over `total`.
    pub fn from_counts(lower: u64, upper: &[Option<u64>], total: &BigUint) -> Result<Self> {
        let label = upper.iter().position(Option::is_none).ok_or_else(|| Error::invalid("no target label marked"))?;
        let lower = ExactProb::lattice(BigUint::from(lower), total)?;
        let upper = upper
            .iter()
            .map(|u| u.map(|u| ExactProb::lattice(BigUint::from(u), total)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Self::new(lower, upper, label)
    }

    /// Ceil the lower bound and floor the upper bounds onto the `1/C(d,e)` lattice.
    pub fn from_raw(raw: &RawBounds, table: &BinomialTable) -> Result<Self> {
        let lower = table.quantize_lower(raw.lower)?;
        let upper =
            raw.upper.iter().map(|u| u.map(|p| table.quantize_upper(p)).transpose()).collect::<Result<Vec<_>>>()?;
        Self::new(lower, upper, raw.label)
    }

    pub fn label(&self) -> usize {
        self.upper.iter().position(Option::is_none).unwrap_or(0)
    }

    fn upper_of(&self, j: usize) -> &ExactProb {
        self.upper[j].as_ref().expect("upper bound for a non-target label")
    }
}

/// `a_1..a_k`: the labels with the `k` largest upper bounds, smallest bound first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopKOrder(Vec<usize>);

impl TopKOrder {
    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    /// `Υ_t = {a_1, .., a_t}`.
    pub fn upsilon(&self, t: usize) -> &[usize] {
        &self.0[..t]
    }
}

/// A certified `ℓ0` radius, or no certificate at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CertifiedRadius {
    /// The certificate already fails with zero perturbed features.
    Abstain,
    /// Label stays in the top-k for every perturbation of at most this many features.
    Radius(u64),
}

impl CertifiedRadius {
    pub fn value(self) -> Option<u64> {
        match self {
            CertifiedRadius::Radius(r) => Some(r),
            CertifiedRadius::Abstain => None,
        }
    }

    /// Whether the certificate covers perturbations of `r` features.
    pub fn covers(self, r: u64) -> bool {
        self.value().is_some_and(|radius| radius >= r)
    }
}

impl fmt::Display for CertifiedRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertifiedRadius::Abstain => f.write_str("abstain"),
            CertifiedRadius::Radius(r) => write!(f, "{r}"),
        }
    }
}

impl Serialize for CertifiedRadius {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CertifiedRadius::Abstain => serializer.serialize_str("abstain"),
            CertifiedRadius::Radius(r) => serializer.serialize_u64(*r),
        }
    }
}

impl<'de> Deserialize<'de> for CertifiedRadius {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(r) => Ok(CertifiedRadius::Radius(r)),
            Repr::Text(s) if s == "abstain" => Ok(CertifiedRadius::Abstain),
            Repr::Text(s) => Err(serde::de::Error::custom(format!("bad radius {s:?}"))),
        }
    }
}

/// Pick the `k` labels with the largest upper bounds and order them ascending.
///
/// Ties prefer the lower label index both when selecting and when ordering.
pub fn order_top_bounds(bounds: &QuantizedBounds, spec: &ProblemSpec) -> TopKOrder {
    let mut others: Vec<usize> = (0..bounds.upper.len()).filter(|&j| j != spec.label).collect();
    others.sort_by(|&a, &b| bounds.upper_of(b).cmp(bounds.upper_of(a)).then(a.cmp(&b)));
    others.truncate(spec.k);
    others.sort_by(|&a, &b| bounds.upper_of(a).cmp(bounds.upper_of(b)).then(a.cmp(&b)));
    TopKOrder(others)
}

/// `p̄'_{Υ_t} = min(Σ_{j∈Υ_t} p̄'_j, 1 - p'_l)`.
pub fn upsilon_sum(order: &TopKOrder, bounds: &QuantizedBounds, t: usize) -> Result<ExactProb> {
    if t == 0 || t > order.0.len() {
        return Err(Error::invalid(format!("t={t} outside 1..={}", order.0.len())));
    }
    let cap = bounds.lower.complement();
    let mut sum = ExactProb::zero();
    for &j in order.upsilon(t) {
        match sum.checked_add(bounds.upper_of(j)) {
            Some(s) if s <= cap => sum = s,
            _ => return Ok(cap),
        }
    }
    Ok(sum)
}

/// Evaluates the certification constraint for a fixed problem on lattice numerators.
#[derive(Clone, Debug)]
pub struct RadiusSolver<'a> {
    table: &'a BinomialTable,
    lower: BigUint,
    /// Capped `Υ_t` numerators for `t = 1..=k`.
    upsilon: Vec<BigUint>,
    order: TopKOrder,
}

impl<'a> RadiusSolver<'a> {
    pub fn new(spec: &ProblemSpec, table: &'a BinomialTable, bounds: &QuantizedBounds) -> Result<Self> {
        spec.check_table(table)?;
        if bounds.upper.len() != spec.c || bounds.label() != spec.label {
            return Err(Error::invalid("bounds do not match the problem's labels"));
        }
        let total = table.total();
        let on_lattice = |p: &ExactProb| {
            p.lattice_count(total).ok_or_else(|| Error::invalid(format!("bound {p} is not a multiple of 1/{total}")))
        };
        let lower = on_lattice(&bounds.lower)?;
        let order = order_top_bounds(bounds, spec);
        let cap = total - &lower;
        let mut upsilon = Vec::with_capacity(spec.k);
        let mut running = BigUint::zero();
        for &j in order.labels() {
            running += on_lattice(bounds.upper_of(j))?;
            upsilon.push(running.clone().min(cap.clone()));
        }
        Ok(RadiusSolver { table, lower, upsilon, order })
    }

    pub fn order(&self) -> &TopKOrder {
        &self.order
    }

    /// The strict inequality at perturbation size `r`.
    pub fn constraint_holds(&self, r: u64) -> bool {
        let delta = self.table.delta_count(r);
        if self.lower <= delta {
            return false;
        }
        let margin = &self.lower - &delta;
        // LHS > min_t RHS_t  <=>  some t has t * (L - D) > S_t + D.
        self.upsilon.iter().enumerate().any(|(i, s)| &margin * (i as u64 + 1) > s + &delta)
    }

    pub fn certified_radius(&self) -> CertifiedRadius {
        max_satisfying(self.table.d(), |r| self.constraint_holds(r))
    }
}

/// Largest `r` in `0..=d` with `pred(r)`, for a predicate that is true on a prefix.
fn max_satisfying(d: u64, pred: impl Fn(u64) -> bool) -> CertifiedRadius {
    if !pred(0) {
        return CertifiedRadius::Abstain;
    }
    let (mut lo, mut hi) = (0u64, d + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    CertifiedRadius::Radius(lo)
}

pub fn constraint_holds(spec: &ProblemSpec, table: &BinomialTable, bounds: &QuantizedBounds, r: u64) -> Result<bool> {
    if r > spec.d {
        return Err(Error::invalid(format!("r={r} exceeds d={}", spec.d)));
    }
    Ok(RadiusSolver::new(spec, table, bounds)?.constraint_holds(r))
}

pub fn certified_radius(
    spec: &ProblemSpec,
    table: &BinomialTable,
    bounds: &QuantizedBounds,
) -> Result<CertifiedRadius> {
    Ok(RadiusSolver::new(spec, table, bounds)?.certified_radius())
}

/// Top-1 radius from unquantized bounds: largest `r` with `p_l - p̄_{a_1} > 2Δ(r)`.
pub fn levine_radius_top1(raw: &RawBounds, spec: &ProblemSpec, table: &BinomialTable) -> Result<CertifiedRadius> {
    if spec.k != 1 {
        return Err(Error::invalid(format!("top-1 radius requested with k={}", spec.k)));
    }
    spec.check_table(table)?;
    let runner_up = raw.upper.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let (ln, ld) = decimal_fraction(raw.lower)?;
    let (un, ud) = decimal_fraction(runner_up)?;
    // (ln/ld - un/ud) * N > 2 * D   <=>   (ln*ud - un*ld) * N > 2 * D * ld * ud
    let gap = BigInt::from(ln * &ud) - BigInt::from(un * &ld);
    if !gap.is_positive() {
        return Ok(CertifiedRadius::Abstain);
    }
    let lhs = gap.magnitude() * table.total();
    let scale = ld * ud * 2u32;
    Ok(max_satisfying(spec.d, |r| lhs > table.delta_count(r) * &scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frac(n: u64, d: u64) -> ExactProb {
        ExactProb::from_u64(n, d).unwrap()
    }

    fn bounds(lower: ExactProb, upper: &[Option<(u64, u64)>]) -> QuantizedBounds {
        let label = upper.iter().position(Option::is_none).unwrap();
        let upper = upper.iter().map(|u| u.map(|(n, d)| frac(n, d))).collect();
        QuantizedBounds::new(lower, upper, label).unwrap()
    }

    #[test]
    fn order_example() {
        let b = bounds(frac(1, 10), &[None, Some((3, 10)), Some((5, 10)), Some((1, 10))]);
        let spec = ProblemSpec::new(5, 2, 4, 2, 0).unwrap();
        assert_eq!(order_top_bounds(&b, &spec).labels(), &[1, 2]);
        let spec1 = spec.with_k(1).unwrap();
        assert_eq!(order_top_bounds(&b, &spec1).labels(), &[2]);
    }

    #[test]
    fn order_ties_prefer_small_indices() {
        let b = bounds(frac(1, 10), &[Some((2, 10)), Some((2, 10)), None, Some((2, 10)), Some((2, 10))]);
        let spec = ProblemSpec::new(5, 2, 5, 3, 2).unwrap();
        assert_eq!(order_top_bounds(&b, &spec).labels(), &[0, 1, 3]);
    }

    #[test]
    fn upsilon_examples() {
        let b = bounds(frac(4, 10), &[None, Some((3, 10)), Some((5, 10)), Some((0, 1))]);
        let spec = ProblemSpec::new(5, 2, 4, 2, 0).unwrap();
        let order = order_top_bounds(&b, &spec);
        assert_eq!(upsilon_sum(&order, &b, 2).unwrap(), frac(6, 10));
        assert_eq!(upsilon_sum(&order, &b, 1).unwrap(), frac(3, 10));
        assert!(upsilon_sum(&order, &b, 3).is_err());

        let full = bounds(ExactProb::one(), &[None, Some((3, 10)), Some((5, 10)), Some((0, 1))]);
        assert!(upsilon_sum(&order, &full, 1).unwrap().is_zero());
        assert!(upsilon_sum(&order, &full, 2).unwrap().is_zero());
    }

    #[test]
    fn constraint_examples() {
        let table = BinomialTable::new(10, 2).unwrap();
        let spec = ProblemSpec::new(10, 2, 2, 1, 0).unwrap();
        let b = bounds(ExactProb::one(), &[None, Some((0, 1))]);
        assert!(constraint_holds(&spec, &table, &b, 2).unwrap());
        assert!(!constraint_holds(&spec, &table, &b, 3).unwrap());
        let zero = bounds(ExactProb::zero(), &[None, Some((0, 1))]);
        for r in 0..=10 {
            assert!(!constraint_holds(&spec, &table, &zero, r).unwrap());
        }
        assert!(constraint_holds(&spec, &table, &b, 11).is_err());
    }

    #[test]
    fn radius_examples() {
        let table = BinomialTable::new(10, 2).unwrap();
        let spec = ProblemSpec::new(10, 2, 2, 1, 0).unwrap();
        let b = bounds(ExactProb::one(), &[None, Some((0, 1))]);
        assert_eq!(certified_radius(&spec, &table, &b).unwrap(), CertifiedRadius::Radius(2));

        let table = BinomialTable::new(8, 2).unwrap();
        let spec = ProblemSpec::new(8, 2, 3, 2, 0).unwrap();
        let b = bounds(frac(20, 28), &[None, Some((4, 28)), Some((4, 28))]);
        let solver = RadiusSolver::new(&spec, &table, &b).unwrap();
        assert!(solver.constraint_holds(1));
        assert!(!solver.constraint_holds(2));
        assert_eq!(solver.certified_radius(), CertifiedRadius::Radius(1));

        let table = BinomialTable::new(5, 2).unwrap();
        let spec = ProblemSpec::new(5, 2, 2, 1, 0).unwrap();
        let b = bounds(frac(3, 10), &[None, Some((4, 10))]);
        assert_eq!(certified_radius(&spec, &table, &b).unwrap(), CertifiedRadius::Abstain);
    }

    #[test]
    fn solver_rejects_off_lattice_bounds() {
        let table = BinomialTable::new(5, 2).unwrap();
        let spec = ProblemSpec::new(5, 2, 2, 1, 0).unwrap();
        let b = bounds(frac(1, 3), &[None, Some((1, 10))]);
        assert!(certified_radius(&spec, &table, &b).is_err());
    }

    #[test]
    fn problem_spec_validation() {
        assert!(ProblemSpec::new(5, 0, 3, 1, 0).is_err());
        assert!(ProblemSpec::new(5, 6, 3, 1, 0).is_err());
        assert!(ProblemSpec::new(5, 2, 3, 3, 0).is_err());
        assert!(ProblemSpec::new(5, 2, 3, 0, 0).is_err());
        assert!(ProblemSpec::new(5, 2, 3, 1, 3).is_err());
    }

    #[test]
    fn levine_examples() {
        let table = BinomialTable::new(10, 2).unwrap();
        let spec = ProblemSpec::new(10, 2, 2, 1, 0).unwrap();
        let raw = RawBounds::new(1.0, vec![None, Some(0.0)], 0, 0.001).unwrap();
        assert_eq!(levine_radius_top1(&raw, &spec, &table).unwrap(), CertifiedRadius::Radius(2));
        let tie = RawBounds::new(0.4, vec![None, Some(0.4)], 0, 0.001).unwrap();
        assert_eq!(levine_radius_top1(&tie, &spec, &table).unwrap(), CertifiedRadius::Abstain);

        // 0.9 > 2Δ(r): Δ(1) = 9/45 and Δ(2) = 17/45 qualify, Δ(3) = 24/45 does not.
        let raw = RawBounds::new(0.95, vec![None, Some(0.05)], 0, 0.001).unwrap();
        let scan = (0..=10u64)
            .filter(|&r| 0.9 * 45.0 > 2.0 * table.delta_count(r).to_string().parse::<f64>().unwrap())
            .max()
            .unwrap();
        assert_eq!(scan, 2);
        assert_eq!(levine_radius_top1(&raw, &spec, &table).unwrap(), CertifiedRadius::Radius(scan));
    }

    #[test]
    fn radius_display_and_serde() {
        assert_eq!(CertifiedRadius::Radius(4).to_string(), "4");
        assert_eq!(CertifiedRadius::Abstain.to_string(), "abstain");
        assert_eq!(serde_json::to_string(&CertifiedRadius::Radius(4)).unwrap(), "4");
        assert_eq!(serde_json::to_string(&CertifiedRadius::Abstain).unwrap(), "\"abstain\"");
        let back: CertifiedRadius = serde_json::from_str("\"abstain\"").unwrap();
        assert_eq!(back, CertifiedRadius::Abstain);
        assert!(CertifiedRadius::Radius(3).covers(3));
        assert!(!CertifiedRadius::Radius(3).covers(4));
        assert!(!CertifiedRadius::Abstain.covers(0));
    }

    fn random_problem() -> impl Strategy<Value = (u64, u64, usize, usize, u64, Vec<u64>)> {
        (2u64..30, 0.0f64..1.0, 2usize..7).prop_flat_map(|(d, ef, c)| {
            let e = 1 + ((d - 1) as f64 * ef * 0.5) as u64;
            let total = crate::exact_prob::binomial(d, e).to_string().parse::<u64>().unwrap();
            (Just(d), Just(e), Just(c), 1usize..c, 0..=total, prop::collection::vec(0..=total, c - 1))
        })
    }

    fn make(d: u64, e: u64, c: usize, lower: u64, upper: &[u64]) -> (BinomialTable, QuantizedBounds) {
        let table = BinomialTable::new(d, e).unwrap();
        let mut u: Vec<Option<u64>> = upper.iter().copied().map(Some).collect();
        u.insert(0, None);
        assert_eq!(u.len(), c);
        let b = QuantizedBounds::from_counts(lower, &u, table.total()).unwrap();
        (table, b)
    }

    proptest! {
        #[test]
        fn feasible_set_is_a_prefix((d, e, c, k, lower, upper) in random_problem()) {
            let (table, b) = make(d, e, c, lower, &upper);
            let spec = ProblemSpec::new(d, e, c, k, 0).unwrap();
            let solver = RadiusSolver::new(&spec, &table, &b).unwrap();
            for r in 1..=d {
                if solver.constraint_holds(r) {
                    prop_assert!(solver.constraint_holds(r - 1));
                }
            }
        }

        #[test]
        fn radius_grows_with_k((d, e, c, k, lower, upper) in random_problem()) {
            prop_assume!(k + 1 < c);
            let (table, b) = make(d, e, c, lower, &upper);
            let spec = ProblemSpec::new(d, e, c, k, 0).unwrap();
            let r_k = certified_radius(&spec, &table, &b).unwrap();
            let r_k1 = certified_radius(&spec.with_k(k + 1).unwrap(), &table, &b).unwrap();
            prop_assert!(r_k1 >= r_k);
        }

        #[test]
        fn radius_grows_with_tighter_bounds((d, e, c, k, lower, upper) in random_problem(), which in 0usize..8) {
            let (table, b) = make(d, e, c, lower, &upper);
            let spec = ProblemSpec::new(d, e, c, k, 0).unwrap();
            let base = certified_radius(&spec, &table, &b).unwrap();
            let total: u64 = table.total().to_string().parse().unwrap();
            if lower < total {
                let (_, raised) = make(d, e, c, lower + 1, &upper);
                prop_assert!(certified_radius(&spec, &table, &raised).unwrap() >= base);
            }
            let j = which % upper.len();
            if upper[j] > 0 {
                let mut lowered = upper.clone();
                lowered[j] -= 1;
                let (_, tighter) = make(d, e, c, lower, &lowered);
                prop_assert!(certified_radius(&spec, &table, &tighter).unwrap() >= base);
            }
        }

        #[test]
        fn tie_break_does_not_change_radius((d, e, c, k, lower, upper) in random_problem(), tied in 0u64..5) {
            prop_assume!(c >= 3);
            // Force ties among the top bounds, then reverse the label naming.
            let mut upper = upper;
            let top = *upper.iter().max().unwrap();
            for u in upper.iter_mut().take(2) {
                *u = top.saturating_sub(tied);
            }
            let (table, b) = make(d, e, c, lower, &upper);
            let mut reversed = upper.clone();
            reversed.reverse();
            let (_, b_rev) = make(d, e, c, lower, &reversed);
            let spec = ProblemSpec::new(d, e, c, k, 0).unwrap();
            prop_assert_eq!(
                certified_radius(&spec, &table, &b).unwrap(),
                certified_radius(&spec, &table, &b_rev).unwrap()
            );
        }
    }
}
