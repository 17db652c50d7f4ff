//! Brute-force ground truth on instances small enough to enumerate.
//!
//! For an input `x` and a perturbation `δ`, write `U = h(x, e)` and
//! `V = h(x + δ, e)`. Every ablated input falls in one of three regions:
//! `A` (derivable from `x` only), `B` (from `x + δ` only) or `C` (from both,
//! because it retains none of the perturbed positions). This module tallies
//! those regions exactly, checks certificates against every bounded
//! perturbation, and builds the worst-case base classifier showing that a
//! certified radius cannot be beaten by more than one step (two for `k > 1`).

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ablation::{
    apply_perturbation, enumerate_ablations, label_counts_exact, smoothed_topk_exact, AblatedInput, BaseClassifier,
    EnumGuard, InputVector, Perturbation, TableClassifier,
};
use crate::error::{Error, Result};
use crate::exact_prob::{binomial, BinomialTable, ExactProb};
use crate::radius::{order_top_bounds, CertifiedRadius, ProblemSpec, QuantizedBounds, RadiusSolver};

/// Probability that `U` and `V` land in each region.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionProbabilities {
    pub pr_u_a: ExactProb,
    pub pr_u_b: ExactProb,
    pub pr_u_c: ExactProb,
    pub pr_v_a: ExactProb,
    pub pr_v_b: ExactProb,
    pub pr_v_c: ExactProb,
}

/// Region masses from binomial counts alone.
pub fn region_probabilities_analytic(d: u64, e: u64, r: u64) -> Result<RegionProbabilities> {
    let table = BinomialTable::new(d, e)?;
    if r > d {
        return Err(Error::invalid(format!("perturbation size {r} exceeds d={d}")));
    }
    let shared = ExactProb::lattice(table.get((d - r) as i64), table.total())?;
    let touched = shared.complement();
    Ok(RegionProbabilities {
        pr_u_a: touched.clone(),
        pr_u_b: ExactProb::zero(),
        pr_u_c: shared.clone(),
        pr_v_a: ExactProb::zero(),
        pr_v_b: touched,
        pr_v_c: shared,
    })
}

/// Region masses by classifying every ablation of `x` and of `x + δ`.
pub fn region_probabilities_enum(
    x: &InputVector,
    delta: &Perturbation,
    e: usize,
    guard: EnumGuard,
) -> Result<RegionProbabilities> {
    let moved = apply_perturbation(x, delta)?;
    let support_u = enumerate_ablations(x, e, guard)?;
    let support_v = enumerate_ablations(&moved, e, guard)?;
    let total = support_u.len() as u64;
    // (only x, only x + δ, both)
    let tally = |support: &[AblatedInput]| {
        let mut counts = [0u64; 3];
        for z in support {
            match (z.derivable_from(x), z.derivable_from(&moved)) {
                (true, false) => counts[0] += 1,
                (false, true) => counts[1] += 1,
                (true, true) => counts[2] += 1,
                (false, false) => {}
            }
        }
        counts
    };
    let [ua, ub, uc] = tally(&support_u);
    let [va, vb, vc] = tally(&support_v);
    let p = |n: u64| ExactProb::from_u64(n, total);
    Ok(RegionProbabilities {
        pr_u_a: p(ua)?,
        pr_u_b: p(ub)?,
        pr_u_c: p(uc)?,
        pr_v_a: p(va)?,
        pr_v_b: p(vb)?,
        pr_v_c: p(vc)?,
    })
}

/// `p_j = Pr(f(h(x, e)) = j)` for every label, by enumeration.
pub fn exact_label_probs<F: BaseClassifier + ?Sized>(
    f: &F,
    x: &InputVector,
    e: usize,
    guard: EnumGuard,
) -> Result<Vec<ExactProb>> {
    let (counts, total) = label_counts_exact(f, x, e, guard)?;
    counts.into_iter().map(|n| ExactProb::from_u64(n, total)).collect()
}

/// A perturbation within the radius that knocks the label out of the top-k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub perturbation: Perturbation,
    /// Ablation counts per label at `x + δ`.
    pub counts: Vec<u64>,
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessVerdict {
    /// Number of perturbations examined, including `δ = 0`.
    pub checked: u64,
    pub counterexample: Option<Counterexample>,
}

impl SoundnessVerdict {
    pub fn is_sound(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Number of perturbations of `d` features over a `domain`-value alphabet with `‖δ‖₀ <= r`.
pub fn perturbation_count(d: u64, domain: u32, r: u64) -> BigUint {
    let others = BigUint::from(domain.saturating_sub(1));
    (0..=r.min(d)).map(|s| binomial(d, s) * others.pow(s as u32)).sum()
}

/// Every perturbation with `‖δ‖₀ <= r`, smallest first.
fn perturbations(x: &InputVector, r: usize) -> impl Iterator<Item = Perturbation> + '_ {
    let d = x.d();
    let domain = x.domain();
    (0..=r.min(d)).flat_map(move |s| {
        (0..d).combinations(s).flat_map(move |indices| {
            let choices: Vec<Vec<u32>> =
                indices.iter().map(|&i| (0..domain).filter(|&v| v != x.features()[i]).collect()).collect();
            let assignments: Box<dyn Iterator<Item = Vec<u32>>> = if choices.is_empty() {
                Box::new(std::iter::once(Vec::new()))
            } else {
                Box::new(choices.into_iter().multi_cartesian_product())
            };
            let indices = indices.clone();
            assignments
                .map(move |values| Perturbation::new(indices.clone(), values).expect("distinct combination indices"))
        })
    })
}

/// Checks that `label` stays strictly in the exact top-k at every `x + δ` with `‖δ‖₀ <= r`.
pub fn soundness_check<F: BaseClassifier + ?Sized>(
    f: &F,
    x: &InputVector,
    label: usize,
    e: usize,
    k: usize,
    r: u64,
    guard: EnumGuard,
) -> Result<SoundnessVerdict> {
    if label >= f.num_labels() {
        return Err(Error::invalid(format!("label {} out of range", label + 1)));
    }
    guard.check("perturbation set", &perturbation_count(x.d() as u64, x.domain(), r))?;
    let mut checked = 0;
    for delta in perturbations(x, r as usize) {
        checked += 1;
        let moved = apply_perturbation(x, &delta)?;
        let pred = smoothed_topk_exact(f, &moved, e, k, guard)?;
        if !pred.strictly_in_top_k(label, k) {
            return Ok(SoundnessVerdict {
                checked,
                counterexample: Some(Counterexample { perturbation: delta, counts: pred.counts, total: pred.total }),
            });
        }
    }
    Ok(SoundnessVerdict { checked, counterexample: None })
}

/// Which way the target label's mass is placed in the worst case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstCase {
    /// The whole lower bound fits inside `A`, so the label vanishes under `V`.
    LabelInsideA,
    /// The label covers `A` and spills into `C`.
    LabelCoversA,
}

/// The adversarial base classifier and the mass plan behind it.
#[derive(Clone, Debug)]
pub struct WorstCaseConstruction {
    /// `1 / C(d, e)`.
    pub nu: ExactProb,
    pub case: WorstCase,
    /// Minimizing `t` (1-based), when the label covers `A`.
    pub w: Option<usize>,
    /// `(Σ_{Υ_w} p̄'_j + Δ) / w` with `Δ` at the attack size, when the label covers `A`.
    pub tau: Option<ExactProb>,
    /// The certified radius the construction attacks.
    pub radius: u64,
    /// `D_j` for each label `j`, over the joint support of `U` and `V`.
    pub regions: Vec<Vec<AblatedInput>>,
    pub classifier: TableClassifier,
    pub attack: Perturbation,
}

impl WorstCaseConstruction {
    /// `Pr(U ∈ D_j)` and `Pr(V ∈ D_j)` as counts over `C(d, e)`.
    pub fn region_counts(&self, x: &InputVector) -> Result<(Vec<u64>, Vec<u64>)> {
        let moved = apply_perturbation(x, &self.attack)?;
        let tally = |z: &InputVector| {
            self.regions.iter().map(|d_j| d_j.iter().filter(|a| a.derivable_from(z)).count() as u64).collect()
        };
        Ok((tally(x), tally(&moved)))
    }
}

fn assumption(msg: &str) -> Error {
    Error::AssumptionFailed(msg.to_owned())
}

/// Builds `f*` and an attack of size `r_l + 1 + 1(k != 1)` that puts `k` other
/// labels at or above the target under `V`, while `f*` respects every bound at `x`.
///
/// Refuses, naming the violated condition, unless
/// `C(d - r_l - 2, e - 1) >= 1`, `p'_l + Σ_{Υ_k} p̄'_j <= 1` and
/// `p'_l + Σ_{j≠l} p̄'_j >= 1`.
pub fn construct_worst_case(
    spec: &ProblemSpec,
    bounds: &QuantizedBounds,
    x: &InputVector,
    guard: EnumGuard,
) -> Result<WorstCaseConstruction> {
    if x.d() as u64 != spec.d {
        return Err(Error::invalid(format!("input has {} features, problem has d={}", x.d(), spec.d)));
    }
    if x.domain() < 2 {
        return Err(Error::invalid("a one-value domain admits no perturbation"));
    }
    let table = BinomialTable::new(spec.d, spec.e)?;
    let n = guard.check("joint ablation support", &(table.total() * 2u32))? / 2;
    let solver = RadiusSolver::new(spec, &table, bounds)?;
    let r_l = match solver.certified_radius() {
        CertifiedRadius::Radius(r) => r,
        CertifiedRadius::Abstain => return Err(assumption("the bounds certify no radius (abstain)")),
    };
    let spare = spec.d as i64 - r_l as i64 - 2;
    if spare < 0 || binomial(spare as u64, spec.e - 1) == BigUint::ZERO {
        return Err(assumption("C(d - r - 2, e - 1) >= 1"));
    }
    let count = |p: &ExactProb| {
        p.lattice_count(table.total())
            .and_then(|c| c.to_u64())
            .ok_or_else(|| Error::Invariant(format!("bound {p} left the lattice")))
    };
    let lower = count(&bounds.lower)?;
    let mut upper = vec![0u64; spec.c];
    for (j, u) in bounds.upper.iter().enumerate() {
        if let Some(u) = u {
            upper[j] = count(u)?;
        }
    }
    let order = order_top_bounds(bounds, spec);
    let top: &[usize] = order.labels();
    let top_sum: u64 = top.iter().map(|&j| upper[j]).sum();
    if lower + top_sum > n {
        return Err(assumption("p'_l + sum of the k largest other upper bounds <= 1"));
    }
    let all_sum: u64 = upper.iter().sum();
    if lower + all_sum < n {
        return Err(assumption("p'_l + sum of all other upper bounds >= 1"));
    }

    let attack_size = r_l as usize + 1 + usize::from(spec.k != 1);
    let attack = Perturbation::shift(x, (0..attack_size).collect())?;
    let moved = apply_perturbation(x, &attack)?;
    let e = spec.e as usize;
    let touches = |s: &[u32]| s.iter().any(|&i| (i as usize) < attack_size);
    let subsets: Vec<Vec<u32>> = (0..spec.d as u32).combinations(e).collect();
    let mut region_a: Vec<AblatedInput> = Vec::new();
    let mut region_b: Vec<AblatedInput> = Vec::new();
    let mut region_c: Vec<AblatedInput> = Vec::new();
    for s in &subsets {
        if touches(s) {
            region_a.push(x.ablate(s));
            region_b.push(moved.ablate(s));
        } else {
            region_c.push(x.ablate(s));
        }
    }
    let a = region_a.len() as u64;
    let label = spec.label;
    let a_k = top[spec.k - 1];
    let mut regions: Vec<Vec<AblatedInput>> = vec![Vec::new(); spec.c];
    let mut b_iter = region_b.into_iter();

    let (case, w, tau) = if lower <= a {
        // D_l is the first p'_l mass of A; everything else on the x side goes
        // to the other labels up to their upper bounds, top-k labels first.
        let mut x_side = region_a.into_iter().chain(region_c);
        regions[label].extend(x_side.by_ref().take(lower as usize));
        fill_capacities(&mut regions, &mut x_side, &capacity_order(top, label, spec.c), &upper)?;
        (WorstCase::LabelInsideA, None, None)
    } else {
        let mut c_iter = region_c.into_iter();
        regions[label].extend(region_a);
        regions[label].extend(c_iter.by_ref().take((lower - a) as usize));
        // w minimizes (S_t + a) / t; smallest t on ties.
        let mut w = 1usize;
        let mut s_w = upper[top[0]];
        let mut s_t = 0u64;
        for (t, &j) in top.iter().enumerate() {
            s_t += upper[j];
            let t = t as u64 + 1;
            if (s_t + a) * (w as u64) < (s_w + a) * t {
                w = t as usize;
                s_w = s_t;
            }
        }
        let target = (s_w + a) / w as u64;
        for &j in &top[..w] {
            if upper[j] > target {
                return Err(Error::Invariant("upsilon bound exceeds the per-label target".into()));
            }
            regions[j].extend(c_iter.by_ref().take(upper[j] as usize));
            regions[j].extend(b_iter.by_ref().take((target - upper[j]) as usize));
        }
        for &j in &top[w..] {
            regions[j].extend(c_iter.by_ref().take(upper[j] as usize));
        }
        let rest: Vec<usize> = (0..spec.c).filter(|&j| j != label && !top.contains(&j)).collect();
        fill_capacities(&mut regions, &mut c_iter, &rest, &upper)?;
        let tau = ExactProb::from_u64(s_w + a, w as u64 * n)?;
        (WorstCase::LabelCoversA, Some(w), Some(tau))
    };
    // Leftover B only adds mass to the top-k labels under V.
    for (i, z) in b_iter.enumerate() {
        regions[top[spec.k - 1 - i % spec.k]].push(z);
    }

    let mut classifier = TableClassifier::new(spec.c, a_k)?;
    for (j, d_j) in regions.iter().enumerate() {
        for z in d_j {
            classifier.insert(z.clone(), j)?;
        }
    }
    Ok(WorstCaseConstruction { nu: ExactProb::from_u64(1, n)?, case, w, tau, radius: r_l, regions, classifier, attack })
}

/// Non-target labels, top-k from `a_k` down, then the rest by index.
fn capacity_order(top: &[usize], label: usize, c: usize) -> Vec<usize> {
    top.iter().rev().copied().chain((0..c).filter(|j| *j != label && !top.contains(j))).collect()
}

fn fill_capacities(
    regions: &mut [Vec<AblatedInput>],
    source: &mut impl Iterator<Item = AblatedInput>,
    labels: &[usize],
    upper: &[u64],
) -> Result<()> {
    for &j in labels {
        let room = upper[j] as usize - regions[j].len();
        regions[j].extend(source.by_ref().take(room));
    }
    if source.next().is_some() {
        return Err(Error::Invariant("upper bounds cannot absorb the remaining mass".into()));
    }
    Ok(())
}

/// How the target label fared at a perturbed input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackOutcome {
    /// Some `k` other labels are strictly more likely.
    Dethroned,
    /// The label equals the `k`-th most likely other label.
    Tie,
    /// The label is still strictly in the top-k.
    Held,
}

impl AttackOutcome {
    fn classify(label_count: u64, kth_count: u64) -> Self {
        match kth_count.cmp(&label_count) {
            std::cmp::Ordering::Greater => AttackOutcome::Dethroned,
            std::cmp::Ordering::Equal => AttackOutcome::Tie,
            std::cmp::Ordering::Less => AttackOutcome::Held,
        }
    }

    pub fn is_success(self) -> bool {
        self != AttackOutcome::Held
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightnessVerdict {
    pub radius: u64,
    pub attack_size: usize,
    pub case: WorstCase,
    pub w: Option<usize>,
    /// Outcome of the full attack.
    pub outcome: AttackOutcome,
    /// `p_{k-th other}(x + δ) - p_l(x + δ)`, as counts over `total`.
    pub gap: i64,
    pub total: u64,
    /// Outcome of the same attack cut back to the certified radius.
    pub within_radius: AttackOutcome,
    /// `f*` reproduces the bounds at `x`: `p_l >= p'_l` and `p_j <= p̄'_j`.
    pub respects_bounds: bool,
}

impl TightnessVerdict {
    /// The attack lands beyond the radius and fails within it.
    pub fn confirmed(&self) -> bool {
        self.outcome.is_success() && !self.within_radius.is_success() && self.respects_bounds
    }
}

/// Builds the worst case and evaluates it exactly.
pub fn tightness_check(
    spec: &ProblemSpec,
    bounds: &QuantizedBounds,
    x: &InputVector,
    guard: EnumGuard,
) -> Result<TightnessVerdict> {
    let built = construct_worst_case(spec, bounds, x, guard)?;
    let e = spec.e as usize;
    let at_x = exact_label_probs(&built.classifier, x, e, guard)?;
    let respects_bounds = at_x[spec.label] >= bounds.lower
        && bounds.upper.iter().zip(&at_x).all(|(u, p)| u.as_ref().is_none_or(|u| p <= u));
    let evaluate = |delta: &Perturbation| -> Result<(u64, u64, u64)> {
        let moved = apply_perturbation(x, delta)?;
        let pred = smoothed_topk_exact(&built.classifier, &moved, e, spec.k, guard)?;
        Ok((pred.counts[spec.label], pred.kth_other(spec.label, spec.k), pred.total))
    };
    let (label_count, kth_count, total) = evaluate(&built.attack)?;
    let (inner_label, inner_kth, _) = evaluate(&built.attack.truncate(built.radius as usize))?;
    Ok(TightnessVerdict {
        radius: built.radius,
        attack_size: built.attack.l0(),
        case: built.case,
        w: built.w,
        outcome: AttackOutcome::classify(label_count, kth_count),
        gap: kth_count as i64 - label_count as i64,
        total,
        within_radius: AttackOutcome::classify(inner_label, inner_kth),
        respects_bounds,
    })
}

/// Bounds that equal the exact label probabilities.
pub fn exact_bounds(probs: &[ExactProb], label: usize) -> Result<QuantizedBounds> {
    let lower = probs.get(label).cloned().ok_or_else(|| Error::invalid(format!("label {} out of range", label + 1)))?;
    let upper = probs.iter().enumerate().map(|(j, p)| (j != label).then(|| p.clone())).collect();
    QuantizedBounds::new(lower, upper, label)
}

/// One random soundness trial: a random full table classifier, a random
/// input, a label drawn from the exact top-k, and its radius from exact probabilities.
///
/// Table labels lean toward one randomly chosen label by a random amount, so
/// that trials also reach radii above zero.
#[derive(Clone, Debug)]
pub struct SoundnessTrial {
    pub label: usize,
    pub radius: CertifiedRadius,
    /// `None` when the exact bounds abstain and there is nothing to check.
    pub verdict: Option<SoundnessVerdict>,
}

pub fn random_soundness_trial<R: Rng + ?Sized>(
    rng: &mut R,
    spec: TrialShape,
    guard: EnumGuard,
) -> Result<SoundnessTrial> {
    let TrialShape { d, e, c, k, domain } = spec;
    let favourite = rng.random_range(0..c);
    let lean = rng.random_range(0.0..4.0 * c as f64);
    let weights: Vec<f64> = (0..c).map(|j| if j == favourite { 1.0 + lean } else { 1.0 }).collect();
    let f = TableClassifier::random_full_weighted(d, e, domain, &weights, rng, guard)?;
    let x = InputVector::new((0..d).map(|_| rng.random_range(0..domain)).collect(), domain)?;
    let pred = smoothed_topk_exact(&f, &x, e, k, guard)?;
    let label = pred.top_k[rng.random_range(0..k)];
    let bounds = exact_bounds(&pred.probabilities(), label)?;
    let problem = ProblemSpec::new(d as u64, e as u64, c, k, label)?;
    let table = BinomialTable::new(d as u64, e as u64)?;
    let radius = RadiusSolver::new(&problem, &table, &bounds)?.certified_radius();
    let verdict = match radius {
        CertifiedRadius::Radius(r) => Some(soundness_check(&f, &x, label, e, k, r, guard)?),
        CertifiedRadius::Abstain => None,
    };
    Ok(SoundnessTrial { label, radius, verdict })
}

/// Sizes for randomly generated oracle instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialShape {
    pub d: usize,
    pub e: usize,
    pub c: usize,
    pub k: usize,
    pub domain: u32,
}

/// A random input and lattice bounds for a tightness trial.
///
/// The lower bound is drawn from the upper half of the lattice and the other
/// labels split the remaining mass, with an occasional extra step of slack so
/// that some instances miss the construction's preconditions.
pub fn random_tightness_instance<R: Rng + ?Sized>(
    rng: &mut R,
    shape: TrialShape,
) -> Result<(ProblemSpec, QuantizedBounds, InputVector)> {
    let TrialShape { d, e, c, k, domain } = shape;
    let table = BinomialTable::new(d as u64, e as u64)?;
    let n = table.total().to_u64().ok_or_else(|| Error::invalid("ablation space too large for a random instance"))?;
    let label = rng.random_range(0..c);
    let lower = rng.random_range(n / 2..=n);
    let mut cuts: Vec<u64> = (0..c - 2).map(|_| rng.random_range(0..=n - lower)).collect();
    cuts.push(0);
    cuts.push(n - lower);
    cuts.sort_unstable();
    let mut parts = cuts.windows(2).map(|w| w[1] - w[0]);
    let mut upper: Vec<Option<u64>> = (0..c).map(|j| (j != label).then(|| parts.next().unwrap_or(0))).collect();
    if rng.random_bool(0.25) {
        let j = (label + rng.random_range(1..c)) % c;
        if let Some(u) = upper[j].as_mut() {
            *u = (*u + 1).min(n);
        }
    }
    let bounds = QuantizedBounds::from_counts(lower, &upper, table.total())?;
    let spec = ProblemSpec::new(d as u64, e as u64, c, k, label)?;
    let x = InputVector::new((0..d).map(|_| rng.random_range(0..domain)).collect(), domain)?;
    Ok((spec, bounds, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ablation::ConstantClassifier;

    fn binary(bits: &[u32]) -> InputVector {
        InputVector::new(bits.to_vec(), 2).unwrap()
    }

    fn frac(s: &str) -> ExactProb {
        s.parse().unwrap()
    }

    #[test]
    fn analytic_regions() {
        let r = region_probabilities_analytic(4, 2, 1).unwrap();
        assert_eq!(r.pr_u_c, frac("1/2"));
        assert_eq!(r.pr_u_a, frac("1/2"));
        assert_eq!(r.pr_v_b, frac("1/2"));
        assert!(r.pr_u_b.is_zero() && r.pr_v_a.is_zero());
        let r = region_probabilities_analytic(4, 2, 0).unwrap();
        assert!(r.pr_u_c.is_one() && r.pr_u_a.is_zero());
        let r = region_probabilities_analytic(4, 2, 3).unwrap();
        assert!(r.pr_u_c.is_zero());
        assert!(region_probabilities_analytic(4, 2, 5).is_err());
    }

    #[test]
    fn enumerated_regions() {
        let x = binary(&[0, 1, 0, 1, 1]);
        let r = region_probabilities_enum(&x, &Perturbation::empty(), 2, EnumGuard::default()).unwrap();
        assert!(r.pr_u_c.is_one() && r.pr_v_c.is_one());

        let x4 = binary(&[0, 0, 0, 0]);
        let flip = Perturbation::shift(&x4, vec![2]).unwrap();
        let r = region_probabilities_enum(&x4, &flip, 2, EnumGuard::default()).unwrap();
        assert_eq!(r, region_probabilities_analytic(4, 2, 1).unwrap());

        let flip2 = Perturbation::shift(&x, vec![1, 3]).unwrap();
        let r = region_probabilities_enum(&x, &flip2, 2, EnumGuard::default()).unwrap();
        assert_eq!(r.pr_u_c, frac("3/10"));
        assert_eq!(r, region_probabilities_analytic(5, 2, 2).unwrap());
    }

    #[test]
    fn constant_classifier_probabilities() {
        let x = binary(&[0, 1, 1, 0]);
        let f = ConstantClassifier { label: 1, num_labels: 3 };
        let p = exact_label_probs(&f, &x, 2, EnumGuard::default()).unwrap();
        assert_eq!(p, vec![ExactProb::zero(), ExactProb::one(), ExactProb::zero()]);
    }

    #[test]
    fn table_classifier_probabilities() {
        let x = binary(&[0, 1, 1, 0]);
        let mut f = TableClassifier::new(3, 0).unwrap();
        for s in [[0u32, 1], [2, 3]] {
            f.insert(x.ablate(&s), 1).unwrap();
        }
        let p = exact_label_probs(&f, &x, 2, EnumGuard::default()).unwrap();
        assert_eq!(p, vec![frac("2/3"), frac("1/3"), ExactProb::zero()]);
    }

    #[test]
    fn perturbation_enumeration_is_complete() {
        let x = InputVector::new(vec![0, 2, 1, 0], 3).unwrap();
        for r in 0..=4 {
            let all: Vec<_> = perturbations(&x, r).collect();
            assert_eq!(BigUint::from(all.len()), perturbation_count(4, 3, r as u64));
            assert!(all.iter().all(|p| apply_perturbation(&x, p).is_ok()));
        }
    }

    #[test]
    fn zero_radius_checks_only_the_input() {
        let x = binary(&[0, 1, 1, 0]);
        let f = ConstantClassifier { label: 0, num_labels: 3 };
        let v = soundness_check(&f, &x, 0, 2, 1, 0, EnumGuard::default()).unwrap();
        assert_eq!(v.checked, 1);
        assert!(v.is_sound());
        let v = soundness_check(&f, &x, 2, 2, 1, 0, EnumGuard::default()).unwrap();
        assert!(!v.is_sound());
    }

    #[test]
    fn guard_refuses_large_perturbation_sets() {
        let x = binary(&[0; 10]);
        let f = ConstantClassifier { label: 0, num_labels: 2 };
        let err = soundness_check(&f, &x, 0, 2, 1, 10, EnumGuard::new(100)).unwrap_err();
        assert!(matches!(err, Error::GuardExceeded { .. }));
    }

    fn spec_bounds(d: u64, e: u64, k: usize, lower: u64, upper: &[Option<u64>]) -> (ProblemSpec, QuantizedBounds) {
        let table = BinomialTable::new(d, e).unwrap();
        let bounds = QuantizedBounds::from_counts(lower, upper, table.total()).unwrap();
        let spec = ProblemSpec::new(d, e, upper.len(), k, bounds.label()).unwrap();
        (spec, bounds)
    }

    #[test]
    fn top1_attack_one_step_past_the_radius() {
        let (spec, bounds) = spec_bounds(10, 2, 1, 45, &[None, Some(0), Some(0)]);
        let x = binary(&[0, 1, 0, 1, 1, 0, 0, 1, 0, 1]);
        let v = tightness_check(&spec, &bounds, &x, EnumGuard::default()).unwrap();
        assert_eq!(v.radius, 2);
        assert_eq!(v.attack_size, 3);
        assert!(v.outcome.is_success(), "{v:?}");
        assert_eq!(v.within_radius, AttackOutcome::Held);
        assert!(v.confirmed());
    }

    #[test]
    fn top2_attack_two_steps_past_the_radius() {
        // d=8, e=2: N=28, p'_l = 20/28, two rivals at 4/28.
        let (spec, bounds) = spec_bounds(8, 2, 2, 20, &[None, Some(4), Some(4), Some(0)]);
        let x = binary(&[1, 1, 0, 0, 1, 0, 1, 0]);
        let v = tightness_check(&spec, &bounds, &x, EnumGuard::default()).unwrap();
        assert_eq!(v.radius, 1);
        assert_eq!(v.attack_size, 3);
        assert!(v.confirmed(), "{v:?}");
    }

    #[test]
    fn refusals_name_the_assumption() {
        let x = binary(&[0; 8]);
        // Top-k bounds plus the lower bound exceed one.
        let (spec, bounds) = spec_bounds(8, 2, 1, 20, &[None, Some(10), Some(0)]);
        let err = construct_worst_case(&spec, &bounds, &x, EnumGuard::default()).unwrap_err();
        assert!(matches!(&err, Error::AssumptionFailed(m) if m.contains("k largest")), "{err}");
        // Bounds that leave mass unaccounted for.
        let (spec, bounds) = spec_bounds(8, 2, 1, 20, &[None, Some(1), Some(1)]);
        let err = construct_worst_case(&spec, &bounds, &x, EnumGuard::default()).unwrap_err();
        assert!(matches!(&err, Error::AssumptionFailed(m) if m.contains("all other")), "{err}");
        // Abstain.
        let (spec, bounds) = spec_bounds(8, 2, 1, 10, &[None, Some(18), Some(0)]);
        let err = construct_worst_case(&spec, &bounds, &x, EnumGuard::default()).unwrap_err();
        assert!(matches!(&err, Error::AssumptionFailed(m) if m.contains("abstain")), "{err}");
        // Radius too close to d.
        let (spec, bounds) = spec_bounds(3, 2, 3, 3, &[None, Some(0), Some(0), Some(0)]);
        let err = construct_worst_case(&spec, &bounds, &binary(&[0; 3]), EnumGuard::default()).unwrap_err();
        assert!(matches!(&err, Error::AssumptionFailed(m) if m.contains("C(d - r - 2")), "{err}");
    }

    #[test]
    fn construction_partitions_the_joint_support() {
        let (spec, bounds) = spec_bounds(7, 2, 2, 13, &[Some(3), None, Some(3), Some(2)]);
        let x = binary(&[1, 0, 0, 1, 0, 1, 1]);
        let built = construct_worst_case(&spec, &bounds, &x, EnumGuard::default()).unwrap();
        let (at_x, at_moved) = built.region_counts(&x).unwrap();
        assert_eq!(at_x.iter().sum::<u64>(), 21);
        assert_eq!(at_moved.iter().sum::<u64>(), 21);
        let mut all: Vec<_> = built.regions.iter().flatten().collect();
        let len = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), len, "regions overlap");
        assert_eq!(at_x[1], 13);
        assert!(at_x[0] <= 3 && at_x[2] <= 3 && at_x[3] <= 2);
    }

    #[test]
    fn inflated_radius_finds_counterexample() {
        let (spec, bounds) = spec_bounds(8, 2, 1, 20, &[None, Some(8), Some(0)]);
        let x = binary(&[0, 1, 1, 0, 1, 0, 0, 1]);
        let built = construct_worst_case(&spec, &bounds, &x, EnumGuard::default()).unwrap();
        let v = soundness_check(&built.classifier, &x, 0, 2, 1, built.radius, EnumGuard::default()).unwrap();
        assert!(v.is_sound());
        let v = soundness_check(&built.classifier, &x, 0, 2, 1, built.radius + 3, EnumGuard::default()).unwrap();
        assert!(!v.is_sound());
    }

    #[test]
    fn random_constructions_are_confirmed() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (mut confirmed, mut skipped) = (0, 0);
        for trial in 0..600 {
            let shape = TrialShape {
                d: 5 + trial % 5,
                e: 1 + trial % 3,
                c: 4 + trial % 3,
                k: 1 + trial % 3,
                domain: 2 + (trial % 2) as u32,
            };
            let (spec, bounds, x) = random_tightness_instance(&mut rng, shape).unwrap();
            match tightness_check(&spec, &bounds, &x, EnumGuard::default()) {
                Ok(v) => {
                    assert!(v.confirmed(), "{spec:?} {bounds:?} {v:?}");
                    confirmed += 1;
                }
                Err(Error::AssumptionFailed(_)) => skipped += 1,
                Err(e) => panic!("{spec:?} {bounds:?}: {e}"),
            }
        }
        assert!(confirmed > 300, "confirmed {confirmed}, skipped {skipped}");
    }

    #[test]
    fn random_soundness_trials_hold() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for k in [1, 2] {
            for _ in 0..10 {
                let shape = TrialShape { d: 6, e: 2, c: 4, k, domain: 2 };
                let trial = random_soundness_trial(&mut rng, shape, EnumGuard::default()).unwrap();
                assert!(trial.verdict.is_none_or(|v| v.is_sound()));
            }
        }
    }
}
