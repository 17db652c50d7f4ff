//! Synthetic prototype datasets for demos and trend checks.

use rand::Rng;

use crate::ablation::InputVector;
use crate::certify::Example;
use crate::cli::dataset::{Dataset, DatasetHeader};
use crate::error::{Error, Result};

/// A dataset drawn around random class prototypes, and the prototypes.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub prototypes: Vec<Vec<u32>>,
}

/// Each example copies its class prototype and redraws every feature with
/// probability `noise` to a different value.
pub fn synthetic_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    examples: usize,
    header: DatasetHeader,
    noise: f64,
) -> Result<SyntheticData> {
    let DatasetHeader { d, c, domain } = header;
    if d == 0 || c < 2 || domain < 2 {
        return Err(Error::invalid("synthetic data needs d >= 1, c >= 2 and domain >= 2"));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::invalid(format!("noise {noise} outside [0, 1]")));
    }
    let prototypes: Vec<Vec<u32>> = (0..c).map(|_| (0..d).map(|_| rng.random_range(0..domain)).collect()).collect();
    let examples = (0..examples)
        .map(|i| {
            let label = rng.random_range(0..c);
            let features = prototypes[label]
                .iter()
                .map(|&v| if rng.random_bool(noise) { (v + rng.random_range(1..domain)) % domain } else { v })
                .collect();
            Ok(Example { id: format!("ex{i:05}"), label, input: InputVector::new(features, domain)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticData { dataset: Dataset { header, examples }, prototypes })
}

/// One comma-separated prototype per line.
pub fn write_prototypes(prototypes: &[Vec<u32>]) -> String {
    prototypes.iter().map(|p| p.iter().map(u32::to_string).collect::<Vec<_>>().join(",") + "\n").collect()
}
