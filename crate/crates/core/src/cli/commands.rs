//! Drivers behind each subcommand. They return the text to print; the binary
//! does the file and terminal I/O.

use std::fmt::Write as _;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ablation::{EnumGuard, InputVector, Perturbation};
use crate::beta_bounds::{simuem_bounds, SampleCounts};
use crate::certify::{certify_dataset, CertificationRecord, TargetMode};
use crate::cli::config::RunConfig;
use crate::cli::dataset::Dataset;
use crate::cli::report::Report;
use crate::error::{Error, Result};
use crate::exact_prob::{BinomialTable, ExactProb};
use crate::oracle::{
    random_soundness_trial, random_tightness_instance, region_probabilities_analytic, region_probabilities_enum,
    tightness_check, RegionProbabilities, TightnessVerdict, TrialShape,
};
use crate::radius::{upsilon_sum, ProblemSpec, QuantizedBounds, RadiusSolver};

/// Process exit status for a library error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::AssumptionFailed(_) => 1,
        Error::GuardExceeded { .. } => 2,
        Error::Invariant(_) => 3,
    }
}

/// Certifies every example and assembles the report. `progress` sees each
/// finished record, in completion order.
pub fn run_certify(
    dataset: &Dataset,
    config: &RunConfig,
    progress: impl Fn(&CertificationRecord) + Sync,
) -> Result<Report> {
    let f = config.classifier.load(&dataset.header)?;
    if config.params.e > dataset.header.d {
        return Err(Error::invalid(format!("e={} exceeds the dataset's d={}", config.params.e, dataset.header.d)));
    }
    if config.params.k >= dataset.header.c {
        return Err(Error::invalid(format!("k={} must be below c={}", config.params.k, dataset.header.c)));
    }
    let records = certify_dataset(&f, &dataset.examples, &config.params, config.mode, progress)?;
    let report = Report::build(&dataset.header, config, &records)?;
    report.verify()?;
    Ok(report)
}

/// A lattice value as `count/N`, without reducing the fraction.
fn on_lattice(p: &ExactProb, total: &BigUint) -> String {
    match p.lattice_count(total) {
        Some(count) => format!("{count}/{total}"),
        None => p.to_string(),
    }
}

pub struct RadiusArgs {
    pub counts: Vec<u64>,
    /// 1-based.
    pub label: usize,
    pub d: u64,
    pub e: u64,
    pub k: usize,
    pub alpha: f64,
}

/// Bounds, their quantization, the top-k order and the radius for one set of counts.
pub fn run_radius(args: &RadiusArgs) -> Result<String> {
    let label = args.label.checked_sub(1).ok_or_else(|| Error::invalid("--l is 1-based"))?;
    let counts = SampleCounts::new(args.counts.clone(), label)?;
    let spec = ProblemSpec::new(args.d, args.e, counts.num_labels(), args.k, label)?;
    let table = BinomialTable::new(args.d, args.e)?;
    let raw = simuem_bounds(&counts, args.alpha)?;
    let bounds = QuantizedBounds::from_raw(&raw, &table)?;
    let solver = RadiusSolver::new(&spec, &table, &bounds)?;
    let total = table.total();

    let mut out = String::new();
    let c = counts.num_labels();
    writeln!(out, "samples: n={} over c={c} labels, target label {}", counts.total(), args.label).unwrap();
    writeln!(out, "ablation space: C({}, {}) = {total}", args.d, args.e).unwrap();
    writeln!(out, "alpha: {} ({} per label)", args.alpha, args.alpha / c as f64).unwrap();
    writeln!(
        out,
        "lower bound, label {}: raw {} quantized {}",
        args.label,
        raw.lower,
        on_lattice(&bounds.lower, total)
    )
    .unwrap();
    for j in (0..c).filter(|&j| j != label) {
        let (Some(r), Some(q)) = (raw.upper[j], bounds.upper[j].as_ref()) else { continue };
        writeln!(out, "upper bound, label {}: raw {r} quantized {}", j + 1, on_lattice(q, total)).unwrap();
    }
    let order = solver.order();
    let names: Vec<String> = order.labels().iter().map(|j| (j + 1).to_string()).collect();
    writeln!(out, "top-k order (smallest bound first): {}", names.join(", ")).unwrap();
    for t in 1..=args.k {
        writeln!(out, "upsilon sum t={t}: {}", on_lattice(&upsilon_sum(order, &bounds, t)?, total)).unwrap();
    }
    writeln!(out, "radius: {}", solver.certified_radius()).unwrap();
    Ok(out)
}

/// Shape and seed for randomized oracle runs. A `k` of `None` cycles through
/// `1..=k_max` across trials.
#[derive(Clone, Copy, Debug)]
pub struct OracleArgs {
    pub d: usize,
    pub e: usize,
    pub c: usize,
    pub k: Option<usize>,
    pub domain: u32,
    pub trials: usize,
    pub seed: u64,
}

impl OracleArgs {
    fn shape(&self, trial: usize, k_max: usize) -> TrialShape {
        let k = self.k.unwrap_or(1 + trial % k_max.min(self.c - 1).max(1));
        TrialShape { d: self.d, e: self.e, c: self.c, k, domain: self.domain }
    }

    fn validate(&self) -> Result<()> {
        if self.e == 0 || self.e > self.d {
            return Err(Error::invalid(format!("need 1 <= e <= d, got e={}, d={}", self.e, self.d)));
        }
        if self.c < 2 {
            return Err(Error::invalid("need c >= 2"));
        }
        if self.k.is_some_and(|k| k == 0 || k >= self.c) {
            return Err(Error::invalid("need 1 <= k <= c-1"));
        }
        if self.domain < 2 {
            return Err(Error::invalid("need a feature domain of at least 2 values"));
        }
        Ok(())
    }
}

pub struct OracleOutcome {
    pub text: String,
    /// Soundness counterexamples, or confirmed attacks that failed.
    pub failures: usize,
}

/// Random full table classifiers checked against every perturbation within their exact-bound radius.
pub fn run_soundness(args: &OracleArgs, guard: EnumGuard) -> Result<OracleOutcome> {
    args.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (mut certified, mut abstained, mut checked, mut violations) = (0, 0, 0u64, 0);
    let mut radii = std::collections::BTreeMap::new();
    let mut text = String::new();
    for trial in 0..args.trials {
        let shape = args.shape(trial, 2);
        let result = random_soundness_trial(&mut rng, shape, guard)?;
        match result.verdict {
            None => abstained += 1,
            Some(v) => {
                certified += 1;
                *radii.entry(result.radius.value().unwrap_or(0)).or_insert(0) += 1;
                checked += v.checked;
                if let Some(cx) = v.counterexample {
                    violations += 1;
                    writeln!(
                        text,
                        "trial {trial}: k={} label {} radius {} broken by indices {:?} -> values {:?} (counts {:?})",
                        shape.k,
                        result.label + 1,
                        result.radius,
                        cx.perturbation.indices(),
                        cx.perturbation.values(),
                        cx.counts
                    )
                    .unwrap();
                }
            }
        }
    }
    writeln!(
        text,
        "soundness: {} trials (d={}, e={}, c={}, domain={}), {certified} certified, {abstained} abstained, {checked} perturbations checked",
        args.trials, args.d, args.e, args.c, args.domain
    )
    .unwrap();
    let histogram: Vec<String> = radii.iter().map(|(r, n)| format!("r={r}: {n}")).collect();
    writeln!(text, "certified radii: {}", histogram.join(", ")).unwrap();
    writeln!(text, "{violations} violations").unwrap();
    Ok(OracleOutcome { text, failures: violations })
}

/// An explicit tightness instance: numerators over `C(d, e)`.
pub struct ExplicitBounds {
    /// 1-based.
    pub label: usize,
    pub lower: u64,
    /// Upper bounds for every label except `label`, in label order.
    pub upper: Vec<u64>,
}

fn describe(v: &TightnessVerdict) -> String {
    format!(
        "radius {}, attack of size {}: {:?} (gap {}/{}), at the radius: {:?}",
        v.radius, v.attack_size, v.outcome, v.gap, v.total, v.within_radius
    )
    .to_lowercase()
}

/// Worst-case classifiers attacked just past the certified radius.
pub fn run_tightness(args: &OracleArgs, explicit: Option<&ExplicitBounds>, guard: EnumGuard) -> Result<OracleOutcome> {
    args.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut text = String::new();
    let (mut confirmed, mut failed, mut skipped) = (0, 0, 0);
    let trials = if explicit.is_some() { 1 } else { args.trials };
    for trial in 0..trials {
        let shape = args.shape(trial, 3);
        let (spec, bounds, x) = match explicit {
            Some(b) => explicit_instance(args, shape.k, b, &mut rng)?,
            None => random_tightness_instance(&mut rng, shape)?,
        };
        match tightness_check(&spec, &bounds, &x, guard) {
            Ok(v) => {
                let ok = v.confirmed();
                if ok {
                    confirmed += 1;
                } else {
                    failed += 1;
                }
                writeln!(text, "trial {trial}: k={} {}{}", spec.k, describe(&v), if ok { "" } else { "  FAILED" })
                    .unwrap();
            }
            Err(Error::AssumptionFailed(why)) => {
                skipped += 1;
                writeln!(text, "trial {trial}: k={} skipped, assumption not satisfied: {why}", spec.k).unwrap();
            }
            Err(e) => return Err(e),
        }
    }
    let attempted = confirmed + failed;
    let rate = if attempted == 0 { 100.0 } else { 100.0 * confirmed as f64 / attempted as f64 };
    writeln!(text, "tightness: {confirmed} of {attempted} instances confirmed ({rate:.1}%), {skipped} skipped")
        .unwrap();
    Ok(OracleOutcome { text, failures: failed })
}

fn explicit_instance(
    args: &OracleArgs,
    k: usize,
    b: &ExplicitBounds,
    rng: &mut ChaCha8Rng,
) -> Result<(ProblemSpec, QuantizedBounds, InputVector)> {
    let label = b.label.checked_sub(1).ok_or_else(|| Error::invalid("--l is 1-based"))?;
    if label >= args.c {
        return Err(Error::invalid(format!("--l {} outside 1..={}", b.label, args.c)));
    }
    if b.upper.len() + 1 != args.c {
        return Err(Error::invalid(format!("--upper needs c-1 = {} values", args.c - 1)));
    }
    let mut rest = b.upper.iter().copied();
    let upper: Vec<Option<u64>> = (0..args.c).map(|j| if j == label { None } else { rest.next() }).collect();
    let table = BinomialTable::new(args.d as u64, args.e as u64)?;
    let bounds = QuantizedBounds::from_counts(b.lower, &upper, table.total())?;
    let spec = ProblemSpec::new(args.d as u64, args.e as u64, args.c, k, label)?;
    let x = InputVector::new((0..args.d).map(|_| rand::Rng::random_range(rng, 0..args.domain)).collect(), args.domain)?;
    Ok((spec, bounds, x))
}

fn region_row(p: &RegionProbabilities) -> String {
    format!(
        "U(A)={} U(B)={} U(C)={} V(A)={} V(B)={} V(C)={}",
        p.pr_u_a, p.pr_u_b, p.pr_u_c, p.pr_v_a, p.pr_v_b, p.pr_v_c
    )
}

/// Closed-form region masses next to enumerated ones on a random input.
pub fn run_regions(
    d: usize,
    e: usize,
    r: Option<usize>,
    domain: u32,
    seed: u64,
    guard: EnumGuard,
) -> Result<OracleOutcome> {
    if domain < 2 {
        return Err(Error::invalid("need a feature domain of at least 2 values"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = InputVector::new((0..d).map(|_| rand::Rng::random_range(&mut rng, 0..domain)).collect(), domain)?;
    let sizes: Vec<usize> = match r {
        Some(r) if r > d => return Err(Error::invalid(format!("r={r} exceeds d={d}"))),
        Some(r) => vec![r],
        None => (0..=d).collect(),
    };
    let mut text = String::new();
    let mut mismatches = 0;
    for r in sizes {
        let analytic = region_probabilities_analytic(d as u64, e as u64, r as u64)?;
        let enumerated = region_probabilities_enum(&x, &Perturbation::shift(&x, (0..r).collect())?, e, guard)?;
        let agree = analytic == enumerated;
        mismatches += usize::from(!agree);
        writeln!(text, "r={r}").unwrap();
        writeln!(text, "  analytic:   {}", region_row(&analytic)).unwrap();
        writeln!(text, "  enumerated: {}", region_row(&enumerated)).unwrap();
        writeln!(text, "  {}", if agree { "agree" } else { "DISAGREE" }).unwrap();
    }
    Ok(OracleOutcome { text, failures: mismatches })
}

/// Target mode from its command-line spelling.
pub fn parse_mode(s: &str) -> Result<TargetMode> {
    match s {
        "true-label" => Ok(TargetMode::TrueLabel),
        "empirical-top1" => Ok(TargetMode::EmpiricalTop1),
        _ => Err(Error::invalid(format!("unknown mode {s:?}, expected true-label or empirical-top1"))),
    }
}
