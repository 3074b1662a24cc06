//! List-level ranking: a bidirectional LSTM over the displayed permutation
//! feeds an MLP head that scores every position, and the sum of those scores
//! (LR) picks the final list out of a candidate set.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    Dataset, FeatureEncoder, InteractionRecord, ItemProfile, NormStats, Schema, UserProfile,
};
use crate::error::{PrsError, Result};
use crate::eval::auc;
use crate::numerics::{
    bce_logit_centered, bce_single, bce_single_grad, bilstm_backward, bilstm_forward, mlp_backward,
    mlp_forward, mlp_predict, BiLstmParams, CellUpdate, Checkpoint, MlpParams, ParamSet,
};
use crate::pmatch::{
    encoder_meta, hidden_dims, insert_encoder_meta, CandidateSet, PointwiseModel, Reward,
};
use crate::train::{fit, TrainConfig, TrainLog};

const KIND: &str = "dpwn";

/// Embeddings, Bi-LSTM over item vectors, and a head over `user ⊕ item ⊕ h_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpwnModel {
    pub seed: u64,
    pub encoder: FeatureEncoder,
    pub lstm: BiLstmParams,
    pub head: MlpParams,
}

impl ParamSet for DpwnModel {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.encoder.param_slices();
        out.extend(self.lstm.param_slices());
        out.extend(self.head.param_slices());
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.param_slices_mut();
        out.extend(self.lstm.param_slices_mut());
        out.extend(self.head.param_slices_mut());
        out
    }
}

/// Per-position probabilities of one list and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListScore {
    pub probs: Vec<f64>,
    pub lr: f64,
}

impl DpwnModel {
    pub fn new(schema: Schema, stats: NormStats, cfg: &TrainConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = FeatureEncoder::new(schema, stats, cfg.embedding_dim, &mut rng);
        let lstm = BiLstmParams::new(encoder.item_dim(), cfg.lstm_hidden, &mut rng);
        let head_in = encoder.user_dim() + encoder.item_dim() + lstm.output_dim();
        let head = MlpParams::new(head_in, &cfg.hidden, &mut rng);
        Self {
            seed,
            encoder,
            lstm,
            head,
        }
    }

    pub fn zeros(schema: Schema, cfg: &TrainConfig) -> Self {
        let encoder = FeatureEncoder::zeros(schema, NormStats::default(), cfg.embedding_dim);
        let lstm = BiLstmParams::zeros(encoder.item_dim(), cfg.lstm_hidden);
        let head_in = encoder.user_dim() + encoder.item_dim() + lstm.output_dim();
        Self {
            seed: 0,
            head: MlpParams::zeros(head_in, &cfg.hidden),
            encoder,
            lstm,
        }
    }

    pub fn head_input_dim(&self) -> usize {
        self.head.input_dim()
    }

    fn head_input(user_vec: &[f64], item_vec: &[f64], h: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(user_vec.len() + item_vec.len() + h.len());
        x.extend_from_slice(user_vec);
        x.extend_from_slice(item_vec);
        x.extend_from_slice(h);
        x
    }

    fn score_encoded(&self, user_vec: &[f64], items: &[Vec<f64>]) -> Vec<f64> {
        if items.is_empty() {
            return Vec::new();
        }
        let (hs, _) = bilstm_forward(&self.lstm, items).expect("encoder and lstm dims agree");
        items
            .iter()
            .zip(&hs)
            .map(|(x, h)| {
                mlp_predict(&self.head, &Self::head_input(user_vec, x, h)).expect("head dims agree")
            })
            .collect()
    }

    /// Records with at least one exposed position.
    pub fn samples(records: &[InteractionRecord]) -> Vec<usize> {
        records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.exposed_len() > 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Mean masked BCE over the exposed positions of the batch lists,
    /// accumulating its gradient into `grads`.
    pub fn batch_loss_grad(
        &self,
        records: &[InteractionRecord],
        batch: &[usize],
        grads: &mut DpwnModel,
    ) -> f64 {
        let positions: usize = batch.iter().map(|&r| records[r].exposed_len()).sum();
        let scale = 1.0 / positions.max(1) as f64;
        let user_dim = self.encoder.user_dim();
        let item_dim = self.encoder.item_dim();
        let mut loss = 0.0;
        for &r in batch {
            let rec = &records[r];
            let exposed = rec.exposed_len();
            if exposed == 0 {
                continue;
            }
            let user_vec = self.encoder.encode_user(&rec.user);
            let xs: Vec<Vec<f64>> = rec
                .exhibited
                .iter()
                .map(|i| self.encoder.encode_item(i))
                .collect();
            let (hs, state) = bilstm_forward(&self.lstm, &xs).expect("dims agree");
            let mut dh = vec![vec![0.0; self.lstm.output_dim()]; xs.len()];
            let mut d_items = vec![vec![0.0; item_dim]; xs.len()];
            for t in 0..exposed {
                let input = Self::head_input(&user_vec, &xs[t], &hs[t]);
                let (p, cache) = mlp_forward(&self.head, &input).expect("dims agree");
                let y = rec.y_ctr[t];
                loss += bce_single(y, p) * scale;
                let upstream = bce_single_grad(y, p) * scale;
                let dx = mlp_backward(&self.head, &cache, upstream, &mut grads.head)
                    .expect("dims agree");
                grads.encoder.accumulate_user(&rec.user, &dx[..user_dim]);
                d_items[t].copy_from_slice(&dx[user_dim..user_dim + item_dim]);
                dh[t].copy_from_slice(&dx[user_dim + item_dim..]);
            }
            let dxs =
                bilstm_backward(&self.lstm, &state, &dh, &mut grads.lstm).expect("dims agree");
            for ((item, d_head), d_lstm) in rec.exhibited.iter().zip(&mut d_items).zip(&dxs) {
                for (a, b) in d_head.iter_mut().zip(d_lstm) {
                    *a += b;
                }
                grads.encoder.accumulate_item(item, d_head);
            }
        }
        loss
    }

    /// Batch loss of [`Self::batch_loss_grad`] minus ln 2, computed from logits;
    /// used for finite-difference checks.
    pub fn centered_loss(&self, records: &[InteractionRecord], batch: &[usize]) -> f64 {
        self.centered_loss_pattern(records, batch).0
    }

    /// `centered_loss` plus the head's ReLU sign pattern at every position.
    pub fn centered_loss_pattern(
        &self,
        records: &[InteractionRecord],
        batch: &[usize],
    ) -> (f64, Vec<bool>) {
        let positions: usize = batch.iter().map(|&r| records[r].exposed_len()).sum();
        let scale = 1.0 / positions.max(1) as f64;
        let mut pattern = Vec::new();
        let mut loss = 0.0;
        for &r in batch {
            let rec = &records[r];
            let exposed = rec.exposed_len();
            if exposed == 0 {
                continue;
            }
            let user_vec = self.encoder.encode_user(&rec.user);
            let xs: Vec<Vec<f64>> = rec
                .exhibited
                .iter()
                .map(|i| self.encoder.encode_item(i))
                .collect();
            let (hs, _) = bilstm_forward(&self.lstm, &xs).expect("dims agree");
            for t in 0..exposed {
                let input = Self::head_input(&user_vec, &xs[t], &hs[t]);
                let (_, cache) = mlp_forward(&self.head, &input).expect("dims agree");
                cache.relu_pattern(&mut pattern);
                loss += bce_logit_centered(rec.y_ctr[t], cache.logit()) * scale;
            }
        }
        (loss, pattern)
    }

    /// Labels and probabilities of every exposed position, each list scored as displayed.
    pub fn labels_and_scores(&self, records: &[InteractionRecord]) -> (Vec<bool>, Vec<f64>) {
        let mut labels = Vec::new();
        let mut probs = Vec::new();
        for rec in records {
            let exposed = rec.exposed_len();
            if exposed == 0 {
                continue;
            }
            let p = dpwn_score(self, &rec.user, &rec.exhibited);
            labels.extend_from_slice(&rec.y_ctr[..exposed]);
            probs.extend_from_slice(&p[..exposed]);
        }
        (labels, probs)
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

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new(KIND, self.seed);
        insert_encoder_meta(&mut ckpt, &self.encoder);
        ckpt.dims.insert("lstm_hidden".into(), self.lstm.hidden_dim);
        let literal = matches!(self.lstm.cell_update, CellUpdate::Literal);
        ckpt.dims
            .insert("literal_cell_update".into(), usize::from(literal));
        for (i, h) in self.head.hidden_dims().iter().enumerate() {
            ckpt.dims.insert(format!("hidden_{i}"), *h);
        }
        ckpt.params = self.to_flat();
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(KIND)?;
        let (schema, stats, dim) = encoder_meta(ckpt)?;
        let cfg = TrainConfig {
            embedding_dim: dim,
            hidden: hidden_dims(ckpt)?,
            lstm_hidden: ckpt.dim("lstm_hidden")?,
            ..TrainConfig::default()
        };
        cfg.validate()?;
        let mut model = Self::zeros(schema, &cfg);
        if ckpt.dims.get("literal_cell_update").copied().unwrap_or(0) == 1 {
            model.lstm.cell_update = CellUpdate::Literal;
        }
        model.encoder.stats = stats;
        model.seed = ckpt.seed;
        model.load_flat(&ckpt.params)?;
        Ok(model)
    }
}

/// Trains the list model on the displayed lists of `dataset` against click labels.
///
/// Every list runs through the LSTM in full; positions past the exposure
/// boundary contribute no loss.
pub fn train_dpwn(
    dataset: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(DpwnModel, TrainLog)> {
    cfg.validate()?;
    if dataset.records.is_empty() {
        return Err(PrsError::Training("empty dataset".into()));
    }
    let (train, valid) = dataset.split(cfg.valid_fraction);
    let samples = DpwnModel::samples(train);
    if samples.is_empty() {
        return Err(PrsError::Training(
            "no exposed positions in the training split".into(),
        ));
    }
    let valid_samples = DpwnModel::samples(valid);
    let stats = NormStats::from_records(train);
    let model = DpwnModel::new(dataset.schema, stats, cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0002);
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

/// Click probability of every position given the whole list.
pub fn dpwn_score(model: &DpwnModel, user: &UserProfile, list: &[ItemProfile]) -> Vec<f64> {
    let user_vec = model.encoder.encode_user(user);
    let xs: Vec<Vec<f64>> = list.iter().map(|i| model.encoder.encode_item(i)).collect();
    model.score_encoded(&user_vec, &xs)
}

pub fn list_score(
    model: &DpwnModel,
    user: &UserProfile,
    list: &[ItemProfile],
) -> Result<ListScore> {
    if list.is_empty() {
        return Err(PrsError::Domain("cannot score an empty list".into()));
    }
    let probs = dpwn_score(model, user, list);
    let lr = probs.iter().sum();
    Ok(ListScore { probs, lr })
}

/// Sum of the list model's per-position probabilities.
pub fn lr_metric(model: &DpwnModel, user: &UserProfile, list: &[ItemProfile]) -> Result<f64> {
    list_score(model, user, list).map(|s| s.lr)
}

/// Sum of point-wise probabilities; blind to order.
pub fn sr_metric(model: &PointwiseModel, user: &UserProfile, list: &[ItemProfile]) -> Result<f64> {
    if list.is_empty() {
        return Err(PrsError::Domain("cannot score an empty list".into()));
    }
    let user_vec = model.encoder.encode_user(user);
    Ok(list
        .iter()
        .map(|i| model.predict_encoded(&user_vec, i))
        .sum())
}

/// Scores every list of a candidate set; `candidates` resolves list indices.
///
/// The user and each distinct item are encoded once per call.
pub fn score_candidate_set(
    model: &DpwnModel,
    user: &UserProfile,
    set: &CandidateSet,
    candidates: &[ItemProfile],
) -> Result<Vec<ListScore>> {
    let user_vec = model.encoder.encode_user(user);
    let mut cache: HashMap<usize, Vec<f64>> = HashMap::new();
    set.lists
        .iter()
        .map(|l| {
            let mut xs = Vec::with_capacity(l.entry.items.len());
            for &i in &l.entry.items {
                let item = candidates
                    .get(i)
                    .ok_or_else(|| PrsError::Lookup(format!("candidate index {i} out of range")))?;
                xs.push(
                    cache
                        .entry(i)
                        .or_insert_with(|| model.encoder.encode_item(item))
                        .clone(),
                );
            }
            if xs.is_empty() {
                return Err(PrsError::Domain("cannot score an empty list".into()));
            }
            let probs = model.score_encoded(&user_vec, &xs);
            let lr = probs.iter().sum();
            Ok(ListScore { probs, lr })
        })
        .collect()
}

/// One list of a candidate set with its list-model score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    /// Position of the list in the candidate set.
    pub index: usize,
    pub items: Vec<usize>,
    pub reward: Reward,
    pub score: ListScore,
}

/// Orders by LR, then `r_sum`, both descending, then by item sequence.
pub fn rank_order(a: &RankedList, b: &RankedList) -> Ordering {
    b.score
        .lr
        .total_cmp(&a.score.lr)
        .then_with(|| b.reward.r_sum.total_cmp(&a.reward.r_sum))
        .then_with(|| a.items.cmp(&b.items))
}

/// Picks the highest-LR list; returns it and the full ranking, best first.
pub fn select_best(
    set: &CandidateSet,
    model: &DpwnModel,
    user: &UserProfile,
    candidates: &[ItemProfile],
) -> Result<(RankedList, Vec<RankedList>)> {
    if set.is_empty() {
        return Err(PrsError::Config("empty candidate set".into()));
    }
    let scores = score_candidate_set(model, user, set, candidates)?;
    let mut ranking: Vec<RankedList> = set
        .lists
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(index, (l, score))| RankedList {
            index,
            items: l.entry.items.clone(),
            reward: l.entry.reward(),
            score,
        })
        .collect();
    ranking.sort_by(rank_order);
    Ok((ranking[0].clone(), ranking))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check_piecewise, GradCheckOptions};
    use crate::pmatch::{
        score_candidates, BeamEntry, CandidateList, Provenance, ScoredCandidate, Target,
    };
    use crate::simulator::{gen_catalog, LoggingPolicy, SimSpec};

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            hidden: vec![16, 8],
            lstm_hidden: 8,
            batch_size: 32,
            ..TrainConfig::default()
        }
    }

    fn dataset(sessions: usize) -> Dataset {
        let spec = SimSpec {
            users: 20,
            items: 50,
            ..SimSpec::default()
        };
        gen_catalog(&spec)
            .unwrap()
            .gen_logs(sessions, 10, 4, &LoggingPolicy::default())
            .unwrap()
    }

    fn items(k: u32) -> Vec<ItemProfile> {
        (0..k)
            .map(|i| ItemProfile {
                item_id: i,
                category: i % 3,
                brand: i % 5,
                price: 10.0 + 7.0 * i as f64,
            })
            .collect()
    }

    fn user() -> UserProfile {
        UserProfile {
            user_id: 3,
            gender: 1,
            age: 29.0,
        }
    }

    #[test]
    fn zero_model_scores_half() {
        let ds = dataset(5);
        let model = DpwnModel::zeros(ds.schema, &TrainConfig::default());
        assert_eq!(model.head_input_dim(), 17 + 25 + 64);
        let list = &ds.records[0].exhibited;
        assert_eq!(dpwn_score(&model, &user(), list), vec![0.5; 4]);
        assert_eq!(lr_metric(&model, &user(), list).unwrap(), 2.0);
        assert!(lr_metric(&model, &user(), &[]).is_err());
    }

    #[test]
    fn singleton_uses_one_lstm_step() {
        let ds = dataset(5);
        let model = DpwnModel::new(ds.schema, ds.stats, &small_cfg(), 4);
        let item = ds.records[0].exhibited[0];
        let x = model.encoder.encode_item(&item);
        let (hs, _) = bilstm_forward(&model.lstm, std::slice::from_ref(&x)).unwrap();
        let u = model.encoder.encode_user(&user());
        let expected = mlp_predict(&model.head, &DpwnModel::head_input(&u, &x, &hs[0])).unwrap();
        assert_eq!(dpwn_score(&model, &user(), &[item]), vec![expected]);
    }

    #[test]
    fn lr_is_sum_and_order_matters() {
        let ds = dataset(5);
        let model = DpwnModel::new(ds.schema, ds.stats, &small_cfg(), 9);
        let list = items(4);
        let s = list_score(&model, &user(), &list).unwrap();
        assert_eq!(s.lr, s.probs.iter().sum::<f64>());
        assert!(s.lr > 0.0 && s.lr < 4.0);
        let mut rev = list.clone();
        rev.reverse();
        let p_rev = dpwn_score(&model, &user(), &rev);
        assert_ne!(p_rev.iter().rev().copied().collect::<Vec<_>>(), s.probs);
    }

    #[test]
    fn sr_is_order_blind() {
        let schema = dataset(1).schema;
        let cfg = TrainConfig {
            hidden: vec![8],
            ..TrainConfig::default()
        };
        let zero = PointwiseModel::zeros(schema, Target::Ctr, &cfg);
        assert_eq!(sr_metric(&zero, &user(), &items(4)).unwrap(), 2.0);
        let model = PointwiseModel::new(schema, NormStats::default(), Target::Ctr, &cfg, 2);
        let list = items(4);
        let mut rev = list.clone();
        rev.reverse();
        let a = sr_metric(&model, &user(), &list).unwrap();
        let b = sr_metric(&model, &user(), &rev).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert_eq!(
            sr_metric(&model, &user(), &list[..1]).unwrap(),
            model.predict(&user(), &list[0])
        );
    }

    fn set_of(lists: &[Vec<usize>], r_sums: &[f64]) -> CandidateSet {
        CandidateSet {
            n: lists[0].len(),
            lists: lists
                .iter()
                .zip(r_sums)
                .map(|(l, &r)| CandidateList {
                    entry: BeamEntry {
                        items: l.clone(),
                        r_pv: 0.0,
                        r_ipv: 0.0,
                        r_sum: r,
                        p_expose: 1.0,
                    },
                    source: Provenance::Fpsa,
                })
                .collect(),
        }
    }

    #[test]
    fn select_best_tie_rules() {
        let schema = dataset(1).schema;
        let zero = DpwnModel::zeros(schema, &small_cfg());
        let cands = items(4);
        let set = set_of(
            &[vec![0, 1], vec![2, 3], vec![1, 0], vec![3, 2]],
            &[1.0, 3.0, 3.0, 2.0],
        );
        let (best, ranking) = select_best(&set, &zero, &user(), &cands).unwrap();
        assert_eq!(best.items, vec![1, 0]);
        assert_eq!(
            ranking.iter().map(|r| r.index).collect::<Vec<_>>(),
            vec![2, 1, 3, 0]
        );
        assert!(matches!(
            select_best(&CandidateSet::empty(2), &zero, &user(), &cands),
            Err(PrsError::Config(_))
        ));
        let single = set_of(&[vec![3, 1]], &[0.0]);
        assert_eq!(
            select_best(&single, &zero, &user(), &cands)
                .unwrap()
                .0
                .items,
            vec![3, 1]
        );
    }

    #[test]
    fn select_best_ignores_set_order() {
        let ds = dataset(5);
        let model = DpwnModel::new(ds.schema, ds.stats, &small_cfg(), 1);
        let cands = items(5);
        let lists: Vec<Vec<usize>> =
            vec![vec![0, 1, 2], vec![4, 3, 2], vec![2, 0, 4], vec![1, 3, 0]];
        let set = set_of(&lists, &[1.0, 1.0, 1.0, 1.0]);
        let mut rev = set.clone();
        rev.lists.reverse();
        let a = select_best(&set, &model, &user(), &cands).unwrap().0;
        let b = select_best(&rev, &model, &user(), &cands).unwrap().0;
        assert_eq!(a.items, b.items);
        let direct = lr_metric(
            &model,
            &user(),
            &a.items.iter().map(|&i| cands[i]).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(a.score.lr, direct);
    }

    #[test]
    fn batch_scores_match_single_calls() {
        let ds = dataset(5);
        let model = DpwnModel::new(ds.schema, ds.stats, &small_cfg(), 6);
        let rec = &ds.records[0];
        let ctr = PointwiseModel::zeros(ds.schema, Target::Ctr, &small_cfg());
        let next = PointwiseModel::zeros(ds.schema, Target::Next, &small_cfg());
        let scored: Vec<ScoredCandidate> =
            score_candidates(&ctr, &next, &rec.user, &rec.candidates);
        let set = crate::pmatch::fpsa(
            &scored,
            &crate::pmatch::FpsaConfig {
                beam_k: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let batch = score_candidate_set(&model, &rec.user, &set, &rec.candidates).unwrap();
        for (l, s) in set.lists.iter().zip(&batch) {
            let list: Vec<_> = l.entry.items.iter().map(|&i| rec.candidates[i]).collect();
            assert_eq!(s.probs, dpwn_score(&model, &rec.user, &list));
        }
    }

    #[test]
    fn zero_epochs_and_determinism() {
        let ds = dataset(60);
        let cfg0 = TrainConfig {
            epochs: 0,
            ..small_cfg()
        };
        let (m0, log) = train_dpwn(&ds, &cfg0, 8).unwrap();
        let (train, _) = ds.split(cfg0.valid_fraction);
        assert_eq!(
            m0,
            DpwnModel::new(ds.schema, NormStats::from_records(train), &cfg0, 8)
        );
        assert_eq!(log.epochs_run, 0);
        let a = train_dpwn(&ds, &small_cfg(), 8).unwrap().0;
        let b = train_dpwn(&ds, &small_cfg(), 8).unwrap().0;
        assert_eq!(
            a.to_checkpoint().to_string_pretty(),
            b.to_checkpoint().to_string_pretty()
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let ds = dataset(30);
        let model = DpwnModel::new(ds.schema, ds.stats, &small_cfg(), 12);
        let text = model.to_checkpoint().to_string_pretty();
        let back = DpwnModel::from_checkpoint(&Checkpoint::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, model);
        let pw = PointwiseModel::zeros(ds.schema, Target::Ctr, &small_cfg()).to_checkpoint();
        assert!(DpwnModel::from_checkpoint(&pw).is_err());
    }

    #[test]
    fn empty_training_sets_are_rejected() {
        let mut ds = dataset(10);
        for r in &mut ds.records {
            r.exposure.fill(false);
            r.y_ctr.fill(false);
            r.y_next.fill(false);
        }
        assert!(matches!(
            train_dpwn(&ds, &small_cfg(), 0),
            Err(PrsError::Training(_))
        ));
        ds.records.clear();
        assert!(matches!(
            train_dpwn(&ds, &small_cfg(), 0),
            Err(PrsError::Training(_))
        ));
    }

    #[test]
    fn centered_loss_tracks_batch_loss() {
        let ds = dataset(30);
        let model = DpwnModel::new(ds.schema, ds.stats, &small_cfg(), 5);
        let batch: Vec<usize> = DpwnModel::samples(&ds.records)
            .into_iter()
            .take(6)
            .collect();
        let mut scratch = model.clone();
        let full = model.batch_loss_grad(&ds.records, &batch, &mut scratch);
        let centered = model.centered_loss(&ds.records, &batch);
        assert!((full - std::f64::consts::LN_2 - centered).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let ds = dataset(30);
        let model = DpwnModel::new(ds.schema, ds.stats, &small_cfg(), 0);
        let batch: Vec<usize> = DpwnModel::samples(&ds.records)
            .into_iter()
            .take(4)
            .collect();
        let mut grads = model.clone();
        grads.fill_zero();
        model.batch_loss_grad(&ds.records, &batch, &mut grads);
        let mut probe = model.clone();
        let report = grad_check_piecewise(
            |flat| {
                probe.load_flat(flat).unwrap();
                probe.centered_loss_pattern(&ds.records, &batch)
            },
            &model.to_flat(),
            &grads.to_flat(),
            &GradCheckOptions {
                max_coords: Some(600),
                ..Default::default()
            },
        );
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        assert!(
            report.coords_checked > report.coords_skipped * 10,
            "{report:?}"
        );
    }
}
