//! Inputs over finite feature domains, ablation, and base classifiers.
//!
//! An ablation keeps `e` of the `d` features, chosen uniformly without
//! replacement, and replaces the rest with [`MASK`]. Ablated inputs are keyed
//! canonically by their sorted retained indices and the values found there.

use std::collections::HashMap;

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_prob::{binomial, ExactProb};

/// Placeholder for features that were not retained. Never a valid feature value.
pub const MASK: u32 = u32::MAX;

/// Default cap on the number of elements any exhaustive enumeration may visit.
pub const DEFAULT_ENUM_LIMIT: u64 = 1_000_000;

/// Environment variable that overrides [`DEFAULT_ENUM_LIMIT`].
pub const ENUM_LIMIT_ENV: &str = "ABLACERT_ENUM_GUARD";

/// Size limit for exhaustive enumerations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumGuard {
    pub limit: u64,
}

impl Default for EnumGuard {
    fn default() -> Self {
        EnumGuard { limit: DEFAULT_ENUM_LIMIT }
    }
}

impl EnumGuard {
    pub fn new(limit: u64) -> Self {
        EnumGuard { limit }
    }

    /// The limit from `ABLACERT_ENUM_GUARD`, or the default when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(ENUM_LIMIT_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(EnumGuard::new)
                .map_err(|_| Error::invalid(format!("{ENUM_LIMIT_ENV}={v:?} is not an integer"))),
            Err(_) => Ok(EnumGuard::default()),
        }
    }

    /// Fails with [`Error::GuardExceeded`] when `size` is over the limit.
    pub fn check(&self, what: &'static str, size: &BigUint) -> Result<u64> {
        match size.to_u64() {
            Some(n) if n <= self.limit => Ok(n),
            _ => Err(Error::GuardExceeded { what, size: size.to_string(), limit: self.limit }),
        }
    }
}

/// A point `x` with `d` features, each in `0..domain`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputVector {
    features: Vec<u32>,
    domain: u32,
}

impl InputVector {
    pub fn new(features: Vec<u32>, domain: u32) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("input has no features"));
        }
        if domain == 0 || domain == MASK {
            return Err(Error::invalid(format!("invalid feature domain size {domain}")));
        }
        if let Some((i, v)) = features.iter().enumerate().find(|(_, &v)| v >= domain) {
            return Err(Error::invalid(format!("feature {i} has value {v}, domain is 0..{domain}")));
        }
        Ok(InputVector { features, domain })
    }

    pub fn features(&self) -> &[u32] {
        &self.features
    }

    pub fn d(&self) -> usize {
        self.features.len()
    }

    pub fn domain(&self) -> u32 {
        self.domain
    }

    /// The ablation of `self` that retains exactly `indices` (sorted, distinct).
    pub fn ablate(&self, indices: &[u32]) -> AblatedInput {
        AblatedInput {
            retained: indices.to_vec(),
            values: indices.iter().map(|&i| self.features[i as usize]).collect(),
            d: self.d() as u32,
        }
    }
}

/// `h(x, e)` for one draw: retained indices and their values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AblatedInput {
    retained: Vec<u32>,
    values: Vec<u32>,
    d: u32,
}

impl AblatedInput {
    pub fn new(retained: Vec<u32>, values: Vec<u32>, d: u32) -> Result<Self> {
        if retained.len() != values.len() {
            return Err(Error::invalid("retained indices and values differ in length"));
        }
        if !retained.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("retained indices must be strictly increasing"));
        }
        if retained.last().is_some_and(|&i| i >= d) {
            return Err(Error::invalid(format!("retained index out of range 0..{d}")));
        }
        if values.contains(&MASK) {
            return Err(Error::invalid("retained value collides with the mask symbol"));
        }
        Ok(AblatedInput { retained, values, d })
    }

    pub fn retained(&self) -> &[u32] {
        &self.retained
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn d(&self) -> usize {
        self.d as usize
    }

    /// Full-length view with [`MASK`] at every dropped position.
    pub fn to_dense(&self) -> Vec<u32> {
        let mut dense = vec![MASK; self.d as usize];
        for (&i, &v) in self.retained.iter().zip(&self.values) {
            dense[i as usize] = v;
        }
        dense
    }

    /// Whether this ablated input is a possible draw of `h(x, e)`.
    pub fn derivable_from(&self, x: &InputVector) -> bool {
        x.d() == self.d as usize && self.retained.iter().zip(&self.values).all(|(&i, &v)| x.features[i as usize] == v)
    }
}

/// `δ`: new values at a set of positions. `‖δ‖₀` is the number of positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    indices: Vec<usize>,
    values: Vec<u32>,
}

impl Perturbation {
    pub fn new(indices: Vec<usize>, values: Vec<u32>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::invalid("perturbation indices and values differ in length"));
        }
        if indices.iter().duplicates().next().is_some() {
            return Err(Error::invalid("perturbation repeats an index"));
        }
        Ok(Perturbation { indices, values })
    }

    pub fn empty() -> Self {
        Perturbation { indices: Vec::new(), values: Vec::new() }
    }

    /// Moves each listed feature to `(value + 1) mod domain`; a flip for binary features.
    pub fn shift(x: &InputVector, indices: Vec<usize>) -> Result<Self> {
        if x.domain() < 2 {
            return Err(Error::invalid("a one-value domain admits no perturbation"));
        }
        let values = indices
            .iter()
            .map(|&i| {
                x.features()
                    .get(i)
                    .map(|&v| (v + 1) % x.domain())
                    .ok_or_else(|| Error::invalid(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Perturbation::new(indices, values)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn l0(&self) -> usize {
        self.indices.len()
    }

    /// The first `r` changed positions of this perturbation.
    pub fn truncate(&self, r: usize) -> Perturbation {
        let r = r.min(self.indices.len());
        Perturbation { indices: self.indices[..r].to_vec(), values: self.values[..r].to_vec() }
    }
}

/// `x + δ`.
pub fn apply_perturbation(x: &InputVector, delta: &Perturbation) -> Result<InputVector> {
    let mut features = x.features.clone();
    for (&i, &v) in delta.indices.iter().zip(&delta.values) {
        let slot = features
            .get_mut(i)
            .ok_or_else(|| Error::invalid(format!("perturbation index {i} out of range 0..{}", x.d())))?;
        if v >= x.domain {
            return Err(Error::invalid(format!("perturbed value {v} outside domain 0..{}", x.domain)));
        }
        if *slot == v {
            return Err(Error::invalid(format!("perturbation leaves feature {i} unchanged")));
        }
        *slot = v;
    }
    Ok(InputVector { features, domain: x.domain })
}

/// A deterministic map from ablated inputs to 0-based labels.
pub trait BaseClassifier: Sync {
    fn num_labels(&self) -> usize;

    fn classify(&self, input: &AblatedInput) -> usize;
}

impl<T: BaseClassifier + ?Sized> BaseClassifier for &T {
    fn num_labels(&self) -> usize {
        (**self).num_labels()
    }

    fn classify(&self, input: &AblatedInput) -> usize {
        (**self).classify(input)
    }
}

impl<T: BaseClassifier + ?Sized + Send> BaseClassifier for Box<T> {
    fn num_labels(&self) -> usize {
        (**self).num_labels()
    }

    fn classify(&self, input: &AblatedInput) -> usize {
        (**self).classify(input)
    }
}

/// Always predicts the same label.
#[derive(Clone, Debug)]
pub struct ConstantClassifier {
    pub label: usize,
    pub num_labels: usize,
}

impl BaseClassifier for ConstantClassifier {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, _: &AblatedInput) -> usize {
        self.label
    }
}

/// An explicit lookup table over ablated inputs, with a label for anything unlisted.
#[derive(Clone, Debug)]
pub struct TableClassifier {
    table: HashMap<AblatedInput, usize>,
    fallback: usize,
    num_labels: usize,
}

impl TableClassifier {
    pub fn new(num_labels: usize, fallback: usize) -> Result<Self> {
        if fallback >= num_labels {
            return Err(Error::invalid(format!("fallback label {} out of range", fallback + 1)));
        }
        Ok(TableClassifier { table: HashMap::new(), fallback, num_labels })
    }

    pub fn insert(&mut self, key: AblatedInput, label: usize) -> Result<()> {
        if label >= self.num_labels {
            return Err(Error::invalid(format!("label {} out of range 1..={}", label + 1, self.num_labels)));
        }
        self.table.insert(key, label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn fallback(&self) -> usize {
        self.fallback
    }

    /// A uniformly random label for every possible ablated input over `domain^d`.
    pub fn random_full<R: Rng + ?Sized>(
        d: usize,
        e: usize,
        domain: u32,
        num_labels: usize,
        rng: &mut R,
        guard: EnumGuard,
    ) -> Result<Self> {
        Self::random_full_weighted(d, e, domain, &vec![1.0; num_labels], rng, guard)
    }

    /// Like [`TableClassifier::random_full`], drawing labels in proportion to `weights`.
    pub fn random_full_weighted<R: Rng + ?Sized>(
        d: usize,
        e: usize,
        domain: u32,
        weights: &[f64],
        rng: &mut R,
        guard: EnumGuard,
    ) -> Result<Self> {
        if e == 0 || e > d {
            return Err(Error::invalid(format!("need 1 <= e <= d, got e={e}, d={d}")));
        }
        let labels = WeightedIndex::new(weights).map_err(|err| Error::invalid(format!("label weights: {err}")))?;
        let size = binomial(d as u64, e as u64) * BigUint::from(domain).pow(e as u32);
        guard.check("ablated-input domain", &size)?;
        let mut table = TableClassifier::new(weights.len(), 0)?;
        for subset in (0..d as u32).combinations(e) {
            for values in (0..e).map(|_| 0..domain).multi_cartesian_product() {
                let key = AblatedInput { retained: subset.clone(), values, d: d as u32 };
                table.table.insert(key, labels.sample(rng));
            }
        }
        Ok(table)
    }
}

impl BaseClassifier for TableClassifier {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, input: &AblatedInput) -> usize {
        self.table.get(input).copied().unwrap_or(self.fallback)
    }
}

/// Scores each class by how many retained features agree with its prototype.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrototypeClassifier {
    prototypes: Vec<Vec<u32>>,
}

impl PrototypeClassifier {
    pub fn new(prototypes: Vec<Vec<u32>>) -> Result<Self> {
        if prototypes.len() < 2 {
            return Err(Error::invalid("need a prototype for at least 2 classes"));
        }
        let d = prototypes[0].len();
        if d == 0 || prototypes.iter().any(|p| p.len() != d) {
            return Err(Error::invalid("prototypes must share a non-zero length"));
        }
        Ok(PrototypeClassifier { prototypes })
    }

    pub fn prototypes(&self) -> &[Vec<u32>] {
        &self.prototypes
    }

    pub fn d(&self) -> usize {
        self.prototypes[0].len()
    }
}

impl BaseClassifier for PrototypeClassifier {
    fn num_labels(&self) -> usize {
        self.prototypes.len()
    }

    fn classify(&self, input: &AblatedInput) -> usize {
        let score = |p: &Vec<u32>| {
            input.retained.iter().zip(&input.values).filter(|(&i, &v)| p.get(i as usize) == Some(&v)).count()
        };
        let mut best = (0, score(&self.prototypes[0]));
        for (j, p) in self.prototypes.iter().enumerate().skip(1) {
            let s = score(p);
            if s > best.1 {
                best = (j, s);
            }
        }
        best.0
    }
}

/// Per-example key from which one independent random stream per sample is derived.
///
/// Sample `i` always sees the same stream, so Monte Carlo counts do not depend
/// on evaluation order or on how the work is split across threads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleStreams([u8; 32]);

impl SampleStreams {
    pub fn new(master_seed: u64, example: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(example);
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        SampleStreams(key)
    }

    pub fn rng(&self, sample: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(sample);
        rng
    }
}

/// One draw of `h(x, e)`.
pub fn sample_ablation<R: Rng + ?Sized>(x: &InputVector, e: usize, rng: &mut R) -> Result<AblatedInput> {
    if e > x.d() {
        return Err(Error::invalid(format!("cannot retain {e} of {} features", x.d())));
    }
    let mut picked: Vec<u32> = rand::seq::index::sample(rng, x.d(), e).into_iter().map(|i| i as u32).collect();
    picked.sort_unstable();
    Ok(x.ablate(&picked))
}

/// Every ablation of `x`, one per `e`-subset, in lexicographic subset order.
pub fn enumerate_ablations(x: &InputVector, e: usize, guard: EnumGuard) -> Result<Vec<AblatedInput>> {
    if e > x.d() {
        return Err(Error::invalid(format!("cannot retain {e} of {} features", x.d())));
    }
    guard.check("ablation support", &binomial(x.d() as u64, e as u64))?;
    Ok((0..x.d() as u32).combinations(e).map(|s| x.ablate(&s)).collect())
}

/// Exact label distribution of `f(h(x, e))` and its top-k labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmoothedPrediction {
    /// Number of ablations mapped to each label.
    pub counts: Vec<u64>,
    /// `C(d, e)`.
    pub total: u64,
    /// Labels ordered by count descending, ties by index; truncated to `k`.
    pub top_k: Vec<usize>,
}

impl SmoothedPrediction {
    pub fn probability(&self, label: usize) -> ExactProb {
        ExactProb::from_u64(self.counts[label], self.total).expect("count within total")
    }

    pub fn probabilities(&self) -> Vec<ExactProb> {
        (0..self.counts.len()).map(|j| self.probability(j)).collect()
    }

    /// The `k`-th largest count among labels other than `label`.
    pub fn kth_other(&self, label: usize, k: usize) -> u64 {
        let mut others: Vec<u64> =
            self.counts.iter().enumerate().filter(|&(j, _)| j != label).map(|(_, &n)| n).collect();
        others.sort_unstable_by(|a, b| b.cmp(a));
        others.get(k - 1).copied().unwrap_or(0)
    }

    /// `label` strictly beats every `k`-subset of the other labels.
    pub fn strictly_in_top_k(&self, label: usize, k: usize) -> bool {
        self.counts[label] > self.kth_other(label, k)
    }
}

pub fn label_counts_exact<F: BaseClassifier + ?Sized>(
    f: &F,
    x: &InputVector,
    e: usize,
    guard: EnumGuard,
) -> Result<(Vec<u64>, u64)> {
    let ablations = enumerate_ablations(x, e, guard)?;
    let mut counts = vec![0u64; f.num_labels()];
    for a in &ablations {
        let label = f.classify(a);
        *counts
            .get_mut(label)
            .ok_or_else(|| Error::Invariant(format!("classifier returned label {}", label + 1)))? += 1;
    }
    Ok((counts, ablations.len() as u64))
}

/// `g_k(x)` by full enumeration of the ablation support.
pub fn smoothed_topk_exact<F: BaseClassifier + ?Sized>(
    f: &F,
    x: &InputVector,
    e: usize,
    k: usize,
    guard: EnumGuard,
) -> Result<SmoothedPrediction> {
    if k == 0 || k > f.num_labels() {
        return Err(Error::invalid(format!("k={k} outside 1..={}", f.num_labels())));
    }
    let (counts, total) = label_counts_exact(f, x, e, guard)?;
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(SmoothedPrediction { counts, total, top_k: order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(bits: &[u32]) -> InputVector {
        InputVector::new(bits.to_vec(), 2).unwrap()
    }

    #[test]
    fn input_validation() {
        assert!(InputVector::new(vec![], 2).is_err());
        assert!(InputVector::new(vec![0, 2], 2).is_err());
        assert!(InputVector::new(vec![0, 1], MASK).is_err());
    }

    #[test]
    fn single_feature_always_retained() {
        let x = binary(&[1]);
        let streams = SampleStreams::new(7, 0);
        for i in 0..20 {
            let a = sample_ablation(&x, 1, &mut streams.rng(i)).unwrap();
            assert_eq!(a.retained(), &[0]);
            assert_eq!(a.values(), &[1]);
        }
    }

    #[test]
    fn full_retention_is_identity() {
        let x = InputVector::new(vec![3, 0, 2, 1], 4).unwrap();
        let a = sample_ablation(&x, 4, &mut SampleStreams::new(1, 1).rng(0)).unwrap();
        assert_eq!(a.to_dense(), x.features());
        assert!(sample_ablation(&x, 5, &mut SampleStreams::new(1, 1).rng(0)).is_err());
    }

    #[test]
    fn sampled_subsets_are_uniform() {
        let x = binary(&[0, 1, 0, 1]);
        let streams = SampleStreams::new(2024, 3);
        let mut freq: HashMap<Vec<u32>, u64> = HashMap::new();
        let n = 60_000u64;
        for i in 0..n {
            let a = sample_ablation(&x, 2, &mut streams.rng(i)).unwrap();
            *freq.entry(a.retained().to_vec()).or_default() += 1;
        }
        assert_eq!(freq.len(), 6);
        let expected = n as f64 / 6.0;
        let mut chi2 = 0.0;
        for &count in freq.values() {
            assert!((count as f64 / n as f64 - 1.0 / 6.0).abs() < 0.01);
            chi2 += (count as f64 - expected).powi(2) / expected;
        }
        // 5 degrees of freedom; 20.5 is the 0.999 quantile.
        assert!(chi2 < 20.5, "chi2 = {chi2}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = SampleStreams::new(5, 0);
        let b = SampleStreams::new(5, 0);
        let c = SampleStreams::new(5, 1);
        assert_eq!(a.rng(9).next_u64(), b.rng(9).next_u64());
        assert_ne!(a.rng(9).next_u64(), a.rng(10).next_u64());
        assert_ne!(a.rng(9).next_u64(), c.rng(9).next_u64());
    }

    #[test]
    fn enumeration_counts_and_order() {
        let x = binary(&[0, 1, 1, 0]);
        let all = enumerate_ablations(&x, 2, EnumGuard::default()).unwrap();
        assert_eq!(all.len(), 6);
        let subsets: Vec<_> = all.iter().map(|a| a.retained().to_vec()).collect();
        assert_eq!(subsets, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(enumerate_ablations(&binary(&[1, 1, 0]), 3, EnumGuard::default()).unwrap().len(), 1);
        let singles = enumerate_ablations(&binary(&[1, 1, 0, 0, 1]), 1, EnumGuard::default()).unwrap();
        let subsets: Vec<_> = singles.iter().map(|a| a.retained()[0]).collect();
        assert_eq!(subsets, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn enumeration_respects_guard() {
        let x = binary(&[0; 30]);
        let err = enumerate_ablations(&x, 15, EnumGuard::new(1000)).unwrap_err();
        assert!(matches!(err, Error::GuardExceeded { .. }));
    }

    #[test]
    fn perturbation_examples() {
        let x = binary(&[0, 0, 0, 0]);
        assert_eq!(apply_perturbation(&x, &Perturbation::empty()).unwrap(), x);
        let flip = Perturbation::new(vec![2], vec![1]).unwrap();
        assert_eq!(apply_perturbation(&x, &flip).unwrap().features(), &[0, 0, 1, 0]);
        assert!(Perturbation::new(vec![2, 2], vec![1, 1]).is_err());
        assert!(apply_perturbation(&x, &Perturbation::new(vec![4], vec![1]).unwrap()).is_err());
        assert!(apply_perturbation(&x, &Perturbation::new(vec![1], vec![2]).unwrap()).is_err());
        assert!(apply_perturbation(&x, &Perturbation::new(vec![1], vec![0]).unwrap()).is_err());
    }

    #[test]
    fn shift_moves_every_listed_feature() {
        let x = InputVector::new(vec![0, 2, 1], 3).unwrap();
        let delta = Perturbation::shift(&x, vec![0, 1]).unwrap();
        let moved = apply_perturbation(&x, &delta).unwrap();
        assert_eq!(moved.features(), &[1, 0, 1]);
        assert_eq!(delta.l0(), 2);
    }

    #[test]
    fn ablation_avoiding_perturbation_is_unchanged() {
        let x = binary(&[0, 1, 1, 0, 1, 0]);
        let delta = Perturbation::shift(&x, vec![1, 4]).unwrap();
        let moved = apply_perturbation(&x, &delta).unwrap();
        for a in enumerate_ablations(&x, 3, EnumGuard::default()).unwrap() {
            let disjoint = a.retained().iter().all(|&i| i != 1 && i != 4);
            assert_eq!(disjoint, moved.ablate(a.retained()) == a);
        }
    }

    #[test]
    fn derivable_from_checks_values() {
        let x = binary(&[0, 1, 1]);
        let y = binary(&[0, 0, 1]);
        let a = x.ablate(&[1, 2]);
        assert!(a.derivable_from(&x));
        assert!(!a.derivable_from(&y));
        assert!(x.ablate(&[0, 2]).derivable_from(&y));
        assert_eq!(a.to_dense(), vec![MASK, 1, 1]);
    }

    #[test]
    fn constant_classifier_top_k() {
        let f = ConstantClassifier { label: 2, num_labels: 5 };
        let x = binary(&[0, 1, 0, 1]);
        let pred = smoothed_topk_exact(&f, &x, 2, 3, EnumGuard::default()).unwrap();
        assert_eq!(pred.top_k, vec![2, 0, 1]);
        assert!(pred.probability(2).is_one());
        let all = smoothed_topk_exact(&f, &x, 2, 5, EnumGuard::default()).unwrap();
        assert_eq!(all.top_k.len(), 5);
    }

    #[test]
    fn table_classifier_probabilities() {
        let x = binary(&[0, 1, 1, 0]);
        let mut f = TableClassifier::new(2, 0).unwrap();
        for (n, a) in enumerate_ablations(&x, 2, EnumGuard::default()).unwrap().into_iter().enumerate() {
            f.insert(a, usize::from(n >= 4)).unwrap();
        }
        let pred = smoothed_topk_exact(&f, &x, 2, 1, EnumGuard::default()).unwrap();
        assert_eq!(pred.probabilities(), vec![ExactProb::from_u64(2, 3).unwrap(), ExactProb::from_u64(1, 3).unwrap()]);
        assert_eq!(pred.top_k, vec![0]);
        assert!(f.insert(x.ablate(&[0, 1]), 2).is_err());
    }

    #[test]
    fn prototype_classifier_is_symmetric() {
        let f = PrototypeClassifier::new(vec![vec![0, 0, 0, 0], vec![1, 1, 1, 1]]).unwrap();
        let x = binary(&[0, 0, 1, 1]);
        let pred = smoothed_topk_exact(&f, &x, 1, 1, EnumGuard::default()).unwrap();
        assert_eq!(pred.counts, vec![2, 2]);
        assert_eq!(pred.top_k, vec![0]);
        assert_eq!(f.classify(&x.ablate(&[2])), 1);
    }

    #[test]
    fn random_full_table_covers_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = TableClassifier::random_full(6, 2, 2, 4, &mut rng, EnumGuard::default()).unwrap();
        assert_eq!(f.len(), 15 * 4);
        let probs: Vec<_> = {
            let x = binary(&[1, 0, 1, 1, 0, 0]);
            smoothed_topk_exact(&f, &x, 2, 2, EnumGuard::default()).unwrap().probabilities()
        };
        let sum = probs.iter().fold(ExactProb::zero(), |acc, p| acc.checked_add(p).unwrap());
        assert!(sum.is_one());
    }
}
