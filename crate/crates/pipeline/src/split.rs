//! Stratified train/test splitting on the joint (action, ASD) label.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{PipelineError, Result};

/// A stratified partition plus any stratum warnings raised while making it.
#[derive(Debug)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Stratified split on label pairs alone. Per (action, asd) stratum the
/// indices are shuffled by the seed and the first floor(ratio * n) go to
/// train; a single-sample stratum goes to train with a warning. The returned
/// index lists are sorted, disjoint, and exhaustive.
pub fn split_indices(
    labels: &[(usize, usize)],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<String>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PipelineError::config("split", format!("ratio {ratio} not in (0, 1)")));
    }
    let mut strata: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, &key) in labels.iter().enumerate() {
        strata.entry(key).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for ((action, asd), mut members) in strata {
        if members.len() == 1 {
            warnings.push(format!(
                "stratum (action {action}, asd {asd}) has a single sample; placed in train"
            ));
            train.push(members[0]);
            continue;
        }
        members.shuffle(&mut rng);
        let take = (ratio * members.len() as f64).floor() as usize;
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test, warnings))
}

/// Split a dataset into stratified train and test partitions. Samples move
/// rather than copy; both partitions keep the input's relative order and
/// provenance.
pub fn stratified_split(ds: Dataset, ratio: f64, seed: u64) -> Result<Split> {
    let labels: Vec<(usize, usize)> =
        ds.samples().iter().map(|s| (s.action_label, s.asd_label)).collect();
    let (train_idx, test_idx, warnings) = split_indices(&labels, ratio, seed)?;
    let provenance = ds.provenance();
    let mut slots: Vec<Option<mmkit_data::Sample>> = ds.into_samples().into_iter().map(Some).collect();
    let mut take = |indices: &[usize]| -> Vec<mmkit_data::Sample> {
        indices.iter().map(|&i| slots[i].take().expect("split indices are disjoint")).collect()
    };
    let train = Dataset::new(take(&train_idx), provenance)?;
    let test = Dataset::new(take(&test_idx), provenance)?;
    Ok(Split { train, test, warnings })
}
