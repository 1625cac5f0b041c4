//! Seeded train/validation/test split.
//!
//! After a seeded shuffle, `floor(n / 10)` ids go to validation, the next
//! `floor(n / 10)` to test and the rest to training.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("need at least 3 image ids to split, got {0}")]
    TooFewImages(usize),
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

pub fn split_dataset(image_ids: &[String], seed: u64) -> Result<DatasetSplit, SplitError> {
    let n = image_ids.len();
    if n < 3 {
        return Err(SplitError::TooFewImages(n));
    }
    let mut seen = HashSet::with_capacity(n);
    if let Some(dup) = image_ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(SplitError::DuplicateId(dup.clone()));
    }

    let mut ids = image_ids.to_vec();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let tenth = n / 10;
    let train = ids.split_off(2 * tenth);
    let test = ids.split_off(tenth);
    Ok(DatasetSplit {
        seed,
        train,
        val: ids,
        test,
    })
}
