use std::collections::HashSet;

use rand::seq::SliceRandom;

use crate::{rng, Error, Result};

pub const DEFAULT_TEST_COUNT: usize = 20;

/// Disjoint train/validation/test id lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Fails if any test id also appears in train or validation.
    pub fn check_disjoint(&self) -> Result<()> {
        let test: HashSet<&str> = self.test_ids.iter().map(String::as_str).collect();
        if let Some(id) = self
            .train_ids
            .iter()
            .chain(&self.val_ids)
            .find(|id| test.contains(id.as_str()))
        {
            return Err(Error::TestLeak(id.clone()));
        }
        Ok(())
    }
}

/// Draws `test_count` test ids, then splits the rest 90/10 into train and
/// validation (train gets `floor(0.9·n)`). Deterministic in `seed`.
pub fn make_splits(ids: &[String], seed: u64, test_count: usize) -> Result<DatasetSplit> {
    const MIN_IDS: usize = 30;
    if ids.len() < MIN_IDS || ids.len() <= test_count {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_IDS} ids and more than {test_count}, got {}",
            ids.len()
        )));
    }
    let unique: HashSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::InvalidArgument("duplicate ids".into()));
    }
    let mut order: Vec<String> = ids.to_vec();
    order.shuffle(&mut rng::stream(seed, rng::STREAM_SPLIT));
    let rest = order.split_off(test_count);
    let n_train = rest.len() * 9 / 10;
    let (train, val) = rest.split_at(n_train);
    Ok(DatasetSplit {
        train_ids: train.to_vec(),
        val_ids: val.to_vec(),
        test_ids: order,
        seed,
    })
}
