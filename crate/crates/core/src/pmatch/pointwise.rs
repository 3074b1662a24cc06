use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    Dataset, FeatureEncoder, InteractionRecord, ItemProfile, NormStats, Schema, UserProfile,
};
use crate::error::{PrsError, Result};
use crate::eval::auc;
use crate::numerics::{
    bce_logit_centered, bce_single, bce_single_grad, mlp_backward, mlp_forward, mlp_predict,
    Checkpoint, MlpParams, ParamSet,
};
use crate::train::{fit, TrainConfig, TrainLog};

/// Which per-item label a point-wise model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Ctr,
    Next,
}

impl Target {
    pub fn label(self, record: &InteractionRecord, position: usize) -> bool {
        match self {
            Target::Ctr => record.y_ctr[position],
            Target::Next => record.y_next[position],
        }
    }

    fn kind(self) -> &'static str {
        match self {
            Target::Ctr => "pointwise-ctr",
            Target::Next => "pointwise-next",
        }
    }
}

/// `σ(MLP(x_item ⊕ x_user))` over jointly trained embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseModel {
    pub target: Target,
    pub seed: u64,
    pub encoder: FeatureEncoder,
    pub mlp: MlpParams,
}

impl ParamSet for PointwiseModel {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.encoder.param_slices();
        out.extend(self.mlp.param_slices());
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.param_slices_mut();
        out.extend(self.mlp.param_slices_mut());
        out
    }
}

/// One labelled exposure: (record index, position in the exhibited list).
pub type PositionSample = (usize, usize);

impl PointwiseModel {
    pub fn new(
        schema: Schema,
        stats: NormStats,
        target: Target,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = FeatureEncoder::new(schema, stats, cfg.embedding_dim, &mut rng);
        let input = encoder.item_dim() + encoder.user_dim();
        let mlp = MlpParams::new(input, &cfg.hidden, &mut rng);
        Self {
            target,
            seed,
            encoder,
            mlp,
        }
    }

    /// Model with every parameter zero (predicts 0.5 everywhere).
    pub fn zeros(schema: Schema, target: Target, cfg: &TrainConfig) -> Self {
        let encoder = FeatureEncoder::zeros(schema, NormStats::default(), cfg.embedding_dim);
        let input = encoder.item_dim() + encoder.user_dim();
        Self {
            target,
            seed: 0,
            mlp: MlpParams::zeros(input, &cfg.hidden),
            encoder,
        }
    }

    fn input(&self, user_vec: &[f64], item: &ItemProfile) -> Vec<f64> {
        let mut x = self.encoder.encode_item(item);
        x.extend_from_slice(user_vec);
        x
    }

    pub fn predict(&self, user: &UserProfile, item: &ItemProfile) -> f64 {
        self.predict_encoded(&self.encoder.encode_user(user), item)
    }

    /// Prediction with a pre-encoded user vector.
    pub fn predict_encoded(&self, user_vec: &[f64], item: &ItemProfile) -> f64 {
        mlp_predict(&self.mlp, &self.input(user_vec, item)).expect("encoder and mlp dims agree")
    }

    /// Exposed positions of `records` (unexposed positions carry no label).
    pub fn samples(records: &[InteractionRecord]) -> Vec<PositionSample> {
        records
            .iter()
            .enumerate()
            .flat_map(|(r, rec)| (0..rec.exposed_len()).map(move |t| (r, t)))
            .collect()
    }

    /// Mean masked BCE of `samples`, accumulating its gradient into `grads`.
    pub fn batch_loss_grad(
        &self,
        records: &[InteractionRecord],
        samples: &[PositionSample],
        grads: &mut PointwiseModel,
    ) -> f64 {
        let scale = 1.0 / samples.len().max(1) as f64;
        let user_dim = self.encoder.user_dim();
        let item_dim = self.encoder.item_dim();
        let mut loss = 0.0;
        for &(r, t) in samples {
            let rec = &records[r];
            let item = &rec.exhibited[t];
            let user_vec = self.encoder.encode_user(&rec.user);
            let x = self.input(&user_vec, item);
            let (p, cache) = mlp_forward(&self.mlp, &x).expect("dims agree");
            let y = self.target.label(rec, t);
            loss += bce_single(y, p) * scale;
            let upstream = bce_single_grad(y, p) * scale;
            let dx = mlp_backward(&self.mlp, &cache, upstream, &mut grads.mlp).expect("dims agree");
            grads.encoder.accumulate_item(item, &dx[..item_dim]);
            grads
                .encoder
                .accumulate_user(&rec.user, &dx[item_dim..item_dim + user_dim]);
        }
        loss
    }

    /// Batch loss of [`Self::batch_loss_grad`] minus ln 2, computed from logits.
    ///
    /// Same gradient away from the probability clamp, with far less rounding
    /// near the initial loss; used for finite-difference checks.
    pub fn centered_loss(&self, records: &[InteractionRecord], samples: &[PositionSample]) -> f64 {
        self.centered_loss_pattern(records, samples).0
    }

    /// `centered_loss` plus the ReLU sign pattern of every sample, for
    /// kink-aware gradient checks.
    pub fn centered_loss_pattern(
        &self,
        records: &[InteractionRecord],
        samples: &[PositionSample],
    ) -> (f64, Vec<bool>) {
        let scale = 1.0 / samples.len().max(1) as f64;
        let mut pattern = Vec::new();
        let mut loss = 0.0;
        for &(r, t) in samples {
            let rec = &records[r];
            let x = self.input(&self.encoder.encode_user(&rec.user), &rec.exhibited[t]);
            let (_, cache) = mlp_forward(&self.mlp, &x).expect("dims agree");
            cache.relu_pattern(&mut pattern);
            loss += bce_logit_centered(self.target.label(rec, t), cache.logit()) * scale;
        }
        (loss, pattern)
    }

    /// Mean BCE and AUC over the exposed positions of `records`.
    pub fn evaluate(&self, records: &[InteractionRecord]) -> Result<(f64, f64)> {
        let (labels, probs) = self.labels_and_scores(records);
        if labels.is_empty() {
            return Err(PrsError::Metric("no exposed positions to evaluate".into()));
        }
        let loss = labels
            .iter()
            .zip(&probs)
            .map(|(&y, &p)| bce_single(y, p))
            .sum::<f64>()
            / labels.len() as f64;
        Ok((loss, auc(&labels, &probs)?))
    }

    pub fn labels_and_scores(&self, records: &[InteractionRecord]) -> (Vec<bool>, Vec<f64>) {
        let mut labels = Vec::new();
        let mut probs = Vec::new();
        for rec in records {
            let user_vec = self.encoder.encode_user(&rec.user);
            for t in 0..rec.exposed_len() {
                labels.push(self.target.label(rec, t));
                probs.push(self.predict_encoded(&user_vec, &rec.exhibited[t]));
            }
        }
        (labels, probs)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new(self.target.kind(), self.seed);
        insert_encoder_meta(&mut ckpt, &self.encoder);
        for (i, h) in self.mlp.hidden_dims().iter().enumerate() {
            ckpt.dims.insert(format!("hidden_{i}"), *h);
        }
        ckpt.params = self.to_flat();
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, target: Target) -> Result<Self> {
        ckpt.expect_kind(target.kind())?;
        let (schema, stats, dim) = encoder_meta(ckpt)?;
        let hidden = hidden_dims(ckpt)?;
        let cfg = TrainConfig {
            embedding_dim: dim,
            hidden,
            ..TrainConfig::default()
        };
        let mut model = Self::zeros(schema, target, &cfg);
        model.encoder.stats = stats;
        model.seed = ckpt.seed;
        model.load_flat(&ckpt.params)?;
        Ok(model)
    }
}

pub(crate) fn hidden_dims(ckpt: &Checkpoint) -> Result<Vec<usize>> {
    let mut hidden = Vec::new();
    while let Some(&h) = ckpt.dims.get(&format!("hidden_{}", hidden.len())) {
        hidden.push(h);
    }
    Ok(hidden)
}

pub(crate) fn insert_encoder_meta(ckpt: &mut Checkpoint, enc: &FeatureEncoder) {
    let s = enc.schema;
    for (k, v) in [
        ("vocab_users", s.users),
        ("vocab_genders", s.genders),
        ("vocab_items", s.items),
        ("vocab_categories", s.categories),
        ("vocab_brands", s.brands),
    ] {
        ckpt.dims.insert(k.into(), v as usize);
    }
    ckpt.dims.insert("embedding_dim".into(), enc.dim());
    let st = enc.stats;
    for (k, v) in [
        ("age_mean", st.age_mean),
        ("age_std", st.age_std),
        ("price_mean", st.price_mean),
        ("price_std", st.price_std),
    ] {
        ckpt.constants.insert(k.into(), v);
    }
}

pub(crate) fn encoder_meta(ckpt: &Checkpoint) -> Result<(Schema, NormStats, usize)> {
    let vocab = |k: &str| -> Result<u32> {
        u32::try_from(ckpt.dim(k)?).map_err(|_| PrsError::Format(format!("{k} too large")))
    };
    let schema = Schema {
        users: vocab("vocab_users")?,
        genders: vocab("vocab_genders")?,
        items: vocab("vocab_items")?,
        categories: vocab("vocab_categories")?,
        brands: vocab("vocab_brands")?,
    };
    let stats = NormStats {
        age_mean: ckpt.constant("age_mean")?,
        age_std: ckpt.constant("age_std")?,
        price_mean: ckpt.constant("price_mean")?,
        price_std: ckpt.constant("price_std")?,
    };
    Ok((schema, stats, ckpt.dim("embedding_dim")?))
}

/// Trains a CTR or NEXT model on the exposed positions of `dataset`.
///
/// Dense-field statistics come from the training split only.
pub fn train_pointwise(
    dataset: &Dataset,
    target: Target,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(PointwiseModel, TrainLog)> {
    cfg.validate()?;
    if dataset.records.is_empty() {
        return Err(PrsError::Training("empty dataset".into()));
    }
    let (train, valid) = dataset.split(cfg.valid_fraction);
    let samples = PointwiseModel::samples(train);
    if samples.is_empty() {
        return Err(PrsError::Training(
            "no exposed positions in the training split".into(),
        ));
    }
    let valid_samples = PointwiseModel::samples(valid);
    let stats = NormStats::from_records(train);
    let model = PointwiseModel::new(dataset.schema, stats, target, cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    fit(
        model,
        samples,
        &valid_samples,
        cfg,
        &mut rng,
        |m, batch, grads| {
            m.batch_loss_grad(train, batch, grads);
        },
        |m, batch| {
            let mut scratch = m.clone();
            scratch.fill_zero();
            m.batch_loss_grad(valid, batch, &mut scratch)
        },
    )
}
