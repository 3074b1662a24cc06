use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ItemProfile, NormStats, Schema, UserProfile};
use crate::numerics::matrix::{axpy, DenseMatrix};
use crate::numerics::mlp::INIT_SCALE;
use crate::numerics::ParamSet;

pub const DEFAULT_EMBEDDING_DIM: usize = 8;

/// Embedding rows for one sparse field; row `vocab` is the out-of-vocabulary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    vocab: u32,
    table: DenseMatrix,
}

impl EmbeddingTable {
    pub fn new<R: Rng + ?Sized>(vocab: u32, dim: usize, rng: &mut R) -> Self {
        Self {
            vocab,
            table: DenseMatrix::uniform(vocab as usize + 1, dim, INIT_SCALE, rng),
        }
    }

    pub fn zeros(vocab: u32, dim: usize) -> Self {
        Self {
            vocab,
            table: DenseMatrix::zeros(vocab as usize + 1, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn vocab(&self) -> u32 {
        self.vocab
    }

    pub fn row_index(&self, id: u32) -> usize {
        if id < self.vocab {
            id as usize
        } else {
            self.vocab as usize
        }
    }

    pub fn lookup(&self, id: u32) -> &[f64] {
        self.table.row(self.row_index(id))
    }

    pub fn lookup_mut(&mut self, id: u32) -> &mut [f64] {
        let r = self.row_index(id);
        self.table.row_mut(r)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.table.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.table.as_mut_slice()
    }
}

/// Embedding tables for every sparse field plus dense-field normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub schema: Schema,
    pub stats: NormStats,
    pub user_id: EmbeddingTable,
    pub gender: EmbeddingTable,
    pub item_id: EmbeddingTable,
    pub category: EmbeddingTable,
    pub brand: EmbeddingTable,
}

impl FeatureEncoder {
    pub fn new<R: Rng + ?Sized>(schema: Schema, stats: NormStats, dim: usize, rng: &mut R) -> Self {
        Self {
            schema,
            stats,
            user_id: EmbeddingTable::new(schema.users, dim, rng),
            gender: EmbeddingTable::new(schema.genders, dim, rng),
            item_id: EmbeddingTable::new(schema.items, dim, rng),
            category: EmbeddingTable::new(schema.categories, dim, rng),
            brand: EmbeddingTable::new(schema.brands, dim, rng),
        }
    }

    pub fn zeros(schema: Schema, stats: NormStats, dim: usize) -> Self {
        Self {
            schema,
            stats,
            user_id: EmbeddingTable::zeros(schema.users, dim),
            gender: EmbeddingTable::zeros(schema.genders, dim),
            item_id: EmbeddingTable::zeros(schema.items, dim),
            category: EmbeddingTable::zeros(schema.categories, dim),
            brand: EmbeddingTable::zeros(schema.brands, dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.schema, self.stats, self.dim())
    }

    pub fn dim(&self) -> usize {
        self.user_id.dim()
    }

    pub fn user_dim(&self) -> usize {
        Schema::user_dim(self.dim())
    }

    pub fn item_dim(&self) -> usize {
        Schema::item_dim(self.dim())
    }

    /// `[emb(user_id) ⊕ emb(gender) ⊕ z(age)]`
    pub fn encode_user(&self, u: &UserProfile) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.user_dim());
        out.extend_from_slice(self.user_id.lookup(u.user_id));
        out.extend_from_slice(self.gender.lookup(u.gender));
        out.push(self.stats.normalize_age(u.age));
        out
    }

    /// `[emb(item_id) ⊕ emb(category) ⊕ emb(brand) ⊕ z(price)]`
    pub fn encode_item(&self, i: &ItemProfile) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.item_dim());
        out.extend_from_slice(self.item_id.lookup(i.item_id));
        out.extend_from_slice(self.category.lookup(i.category));
        out.extend_from_slice(self.brand.lookup(i.brand));
        out.push(self.stats.normalize_price(i.price));
        out
    }

    /// Adds the gradient of a user feature vector into the embedding rows of `self`.
    pub fn accumulate_user(&mut self, u: &UserProfile, grad: &[f64]) {
        let d = self.dim();
        axpy(1.0, &grad[..d], self.user_id.lookup_mut(u.user_id));
        axpy(1.0, &grad[d..2 * d], self.gender.lookup_mut(u.gender));
    }

    /// Adds the gradient of an item feature vector into the embedding rows of `self`.
    pub fn accumulate_item(&mut self, i: &ItemProfile, grad: &[f64]) {
        let d = self.dim();
        axpy(1.0, &grad[..d], self.item_id.lookup_mut(i.item_id));
        axpy(1.0, &grad[d..2 * d], self.category.lookup_mut(i.category));
        axpy(1.0, &grad[2 * d..3 * d], self.brand.lookup_mut(i.brand));
    }
}

impl ParamSet for FeatureEncoder {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            self.user_id.as_slice(),
            self.gender.as_slice(),
            self.item_id.as_slice(),
            self.category.as_slice(),
            self.brand.as_slice(),
        ]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.user_id.as_mut_slice(),
            self.gender.as_mut_slice(),
            self.item_id.as_mut_slice(),
            self.category.as_mut_slice(),
            self.brand.as_mut_slice(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encoder() -> FeatureEncoder {
        let schema = Schema {
            users: 3,
            genders: 2,
            items: 5,
            categories: 2,
            brands: 2,
        };
        let stats = NormStats {
            age_mean: 30.0,
            age_std: 5.0,
            price_mean: 20.0,
            price_std: 4.0,
        };
        FeatureEncoder::new(
            schema,
            stats,
            DEFAULT_EMBEDDING_DIM,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
    }

    #[test]
    fn default_lengths() {
        let enc = encoder();
        let u = UserProfile {
            user_id: 0,
            gender: 1,
            age: 30.0,
        };
        let i = ItemProfile {
            item_id: 2,
            category: 1,
            brand: 0,
            price: 20.0,
        };
        assert_eq!(enc.encode_user(&u).len(), 17);
        assert_eq!(enc.encode_item(&i).len(), 25);
        assert_eq!(enc.encode_user(&u)[16], 0.0);
        assert_eq!(enc.encode_item(&i)[24], 0.0);
        assert_eq!(enc.encode_item(&i), enc.encode_item(&i));
    }

    #[test]
    fn unknown_ids_use_oov_rows() {
        let enc = encoder();
        let u = UserProfile {
            user_id: 99,
            gender: 7,
            age: 35.0,
        };
        let v = enc.encode_user(&u);
        assert_eq!(&v[..8], enc.user_id.lookup(3));
        assert_eq!(&v[8..16], enc.gender.lookup(2));
        assert_eq!(v[16], 1.0);
        let i = ItemProfile {
            item_id: 42,
            category: 9,
            brand: 9,
            price: 24.0,
        };
        let w = enc.encode_item(&i);
        assert_eq!(&w[..8], enc.item_id.lookup(5));
        assert_eq!(w[24], 1.0);
    }

    #[test]
    fn distinct_ids_give_distinct_vectors() {
        let enc = encoder();
        let a = ItemProfile {
            item_id: 0,
            category: 0,
            brand: 0,
            price: 10.0,
        };
        let b = ItemProfile { item_id: 1, ..a };
        assert_ne!(enc.encode_item(&a), enc.encode_item(&b));
    }

    #[test]
    fn gradient_lands_on_looked_up_rows() {
        let enc = encoder();
        let mut g = enc.zeros_like();
        let i = ItemProfile {
            item_id: 3,
            category: 1,
            brand: 1,
            price: 1.0,
        };
        let grad: Vec<f64> = (0..25).map(|k| k as f64).collect();
        g.accumulate_item(&i, &grad);
        assert_eq!(g.item_id.lookup(3), &grad[..8]);
        assert_eq!(g.brand.lookup(1), &grad[16..24]);
        assert!(g.item_id.lookup(2).iter().all(|&v| v == 0.0));
    }
}
