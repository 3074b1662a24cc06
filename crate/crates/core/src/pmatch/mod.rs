//! Candidate-list generation: point-wise CTR/NEXT scoring, reward-guided beam
//! search over permutations, and merging with externally generated lists.

mod candidates;
mod fpsa;
mod pointwise;
mod topk;

pub use candidates::{
    greedy_ctr_list, merge_candidates, read_candidate_file, write_candidate_file, CandidateList,
    CandidateSet, Provenance, SessionCandidates,
};
pub use fpsa::{calc_estimated_reward, fpsa, BeamEntry, FpsaConfig, Reward};
pub use pointwise::{train_pointwise, PointwiseModel, PositionSample, Target};
pub use topk::BoundedTopK;

pub(crate) use pointwise::{encoder_meta, hidden_dims, insert_encoder_meta};

use serde::{Deserialize, Serialize};

use crate::datamodel::{ItemProfile, UserProfile};

/// An input-list item with its point-wise click and continue probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub item: ItemProfile,
    pub p_ctr: f64,
    pub p_next: f64,
}

/// Scores every item of the input list with both point-wise models, preserving order.
pub fn score_candidates(
    ctr: &PointwiseModel,
    next: &PointwiseModel,
    user: &UserProfile,
    candidates: &[ItemProfile],
) -> Vec<ScoredCandidate> {
    let u_ctr = ctr.encoder.encode_user(user);
    let u_next = next.encoder.encode_user(user);
    candidates
        .iter()
        .map(|item| ScoredCandidate {
            item: *item,
            p_ctr: ctr.predict_encoded(&u_ctr, item),
            p_next: next.predict_encoded(&u_next, item),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Schema;
    use crate::train::TrainConfig;

    #[test]
    fn zero_models_score_half() {
        let schema = Schema {
            users: 2,
            genders: 2,
            items: 6,
            categories: 2,
            brands: 2,
        };
        let cfg = TrainConfig::default();
        let ctr = PointwiseModel::zeros(schema, Target::Ctr, &cfg);
        let next = PointwiseModel::zeros(schema, Target::Next, &cfg);
        let user = UserProfile {
            user_id: 1,
            gender: 0,
            age: 33.0,
        };
        let items: Vec<ItemProfile> = (0..6)
            .map(|i| ItemProfile {
                item_id: i,
                category: 0,
                brand: 1,
                price: 5.0 + i as f64,
            })
            .collect();
        let scored = score_candidates(&ctr, &next, &user, &items);
        assert_eq!(scored.len(), 6);
        assert!(scored.iter().all(|s| s.p_ctr == 0.5 && s.p_next == 0.5));
        assert_eq!(scored.iter().map(|s| s.item).collect::<Vec<_>>(), items);
        assert_eq!(scored, score_candidates(&ctr, &next, &user, &items));
    }
}
