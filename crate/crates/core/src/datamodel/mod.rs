//! Feature schema, embeddings, interaction records and the dataset file format.

mod encode;
mod io;

pub use encode::{EmbeddingTable, FeatureEncoder, DEFAULT_EMBEDDING_DIM};
pub use io::{
    load_dataset, read_dataset, save_dataset, write_dataset, DATASET_FORMAT, DATASET_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::error::{PrsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: u32,
    pub gender: u32,
    pub age: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemProfile {
    pub item_id: u32,
    pub category: u32,
    pub brand: u32,
    pub price: f64,
}

/// Vocabulary sizes of the sparse fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub users: u32,
    pub genders: u32,
    pub items: u32,
    pub categories: u32,
    pub brands: u32,
}

impl Schema {
    pub const USER_SPARSE_FIELDS: usize = 2;
    pub const USER_DENSE_FIELDS: usize = 1;
    pub const ITEM_SPARSE_FIELDS: usize = 3;
    pub const ITEM_DENSE_FIELDS: usize = 1;

    pub fn user_dim(embedding_dim: usize) -> usize {
        Self::USER_SPARSE_FIELDS * embedding_dim + Self::USER_DENSE_FIELDS
    }

    pub fn item_dim(embedding_dim: usize) -> usize {
        Self::ITEM_SPARSE_FIELDS * embedding_dim + Self::ITEM_DENSE_FIELDS
    }

    fn check_user(&self, u: &UserProfile) -> std::result::Result<(), String> {
        if u.user_id >= self.users || u.gender >= self.genders {
            return Err(format!("user {u:?} outside vocabulary"));
        }
        if !u.age.is_finite() || u.age < 0.0 {
            return Err(format!("user {} has invalid age {}", u.user_id, u.age));
        }
        Ok(())
    }

    fn check_item(&self, i: &ItemProfile) -> std::result::Result<(), String> {
        if i.item_id >= self.items || i.category >= self.categories || i.brand >= self.brands {
            return Err(format!("item {i:?} outside vocabulary"));
        }
        if !i.price.is_finite() || i.price <= 0.0 {
            return Err(format!("item {} has invalid price {}", i.item_id, i.price));
        }
        Ok(())
    }
}

/// Z-score statistics of the dense fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub age_mean: f64,
    pub age_std: f64,
    pub price_mean: f64,
    pub price_std: f64,
}

impl Default for NormStats {
    fn default() -> Self {
        Self {
            age_mean: 0.0,
            age_std: 1.0,
            price_mean: 0.0,
            price_std: 1.0,
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        sum += v;
        sq += v * v;
    }
    if n == 0 {
        return (0.0, 1.0);
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

impl NormStats {
    /// Statistics over the users and input-list items of `records`.
    pub fn from_records(records: &[InteractionRecord]) -> Self {
        let (age_mean, age_std) = mean_std(records.iter().map(|r| r.user.age));
        let (price_mean, price_std) = mean_std(
            records
                .iter()
                .flat_map(|r| r.candidates.iter().map(|i| i.price)),
        );
        Self {
            age_mean,
            age_std,
            price_mean,
            price_std,
        }
    }

    pub fn normalize_age(&self, age: f64) -> f64 {
        (age - self.age_mean) / self.age_std
    }

    pub fn normalize_price(&self, price: f64) -> f64 {
        (price - self.price_mean) / self.price_std
    }
}

/// One logged session: input list `C`, exhibited list `V` and its labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user: UserProfile,
    /// Input ranking list `C` (length m).
    pub candidates: Vec<ItemProfile>,
    /// Exhibited list `V` (length n).
    pub exhibited: Vec<ItemProfile>,
    pub y_ctr: Vec<bool>,
    pub y_next: Vec<bool>,
    pub exposure: Vec<bool>,
}

impl InteractionRecord {
    pub fn exposed_len(&self) -> usize {
        self.exposure.iter().take_while(|&&e| e).count()
    }

    /// Position of each exhibited item inside the input list.
    pub fn exhibited_positions(&self) -> std::result::Result<Vec<usize>, String> {
        self.exhibited
            .iter()
            .map(|v| {
                self.candidates
                    .iter()
                    .position(|c| c.item_id == v.item_id)
                    .ok_or_else(|| format!("exhibited item {} not in input list", v.item_id))
            })
            .collect()
    }

    /// Checks every record invariant. Returns a description of the first violation.
    pub fn check(&self, schema: &Schema) -> std::result::Result<(), String> {
        let n = self.exhibited.len();
        let m = self.candidates.len();
        if n == 0 || n > m {
            return Err(format!("exhibited length {n} with input length {m}"));
        }
        if self.y_ctr.len() != n || self.y_next.len() != n || self.exposure.len() != n {
            return Err("label vectors must match the exhibited length".into());
        }
        schema.check_user(&self.user)?;
        for item in &self.candidates {
            schema.check_item(item)?;
        }
        let mut ids: Vec<u32> = self.candidates.iter().map(|c| c.item_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err("duplicate item in input list".into());
        }
        let positions = self.exhibited_positions()?;
        for (v, &p) in self.exhibited.iter().zip(&positions) {
            if self.candidates[p] != *v {
                return Err(format!(
                    "exhibited item {} differs from its input entry",
                    v.item_id
                ));
            }
        }
        let mut sorted = positions.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err("duplicate item in exhibited list".into());
        }
        let exposed = self.exposed_len();
        if self.exposure[exposed..].iter().any(|&e| e) {
            return Err("exposure mask is not a prefix".into());
        }
        for t in exposed..n {
            if self.y_ctr[t] || self.y_next[t] {
                return Err(format!("unexposed position {t} carries a label"));
            }
        }
        for t in 0..exposed {
            if t + 1 < n && self.y_next[t] != self.exposure[t + 1] {
                return Err(format!(
                    "continue label at position {t} disagrees with exposure"
                ));
            }
        }
        Ok(())
    }
}

/// A set of interaction logs together with its schema and dense-field statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Schema,
    pub stats: NormStats,
    pub records: Vec<InteractionRecord>,
}

impl Dataset {
    pub fn new(schema: Schema, records: Vec<InteractionRecord>) -> Self {
        let stats = NormStats::from_records(&records);
        Self {
            schema,
            stats,
            records,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (idx, r) in self.records.iter().enumerate() {
            r.check(&self.schema)
                .map_err(|msg| PrsError::Format(format!("record {idx}: {msg}")))?;
        }
        Ok(())
    }

    /// Splits off the trailing `valid_fraction` of records as a validation set.
    pub fn split(&self, valid_fraction: f64) -> (&[InteractionRecord], &[InteractionRecord]) {
        let n = self.records.len();
        let n_valid = ((n as f64) * valid_fraction.clamp(0.0, 1.0)).round() as usize;
        let n_valid = if n > 1 { n_valid.clamp(1, n - 1) } else { 0 };
        self.records.split_at(n - n_valid)
    }
}
