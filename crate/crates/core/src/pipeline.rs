//! In-process serving path: score the input list, generate candidate lists,
//! merge external lists, and pick the final list.

use serde::{Deserialize, Serialize};

use crate::datamodel::{InteractionRecord, ItemProfile, UserProfile};
use crate::error::Result;
use crate::eval::relative_improvement;
use crate::pmatch::{
    fpsa, greedy_ctr_list, merge_candidates, score_candidates, CandidateSet, FpsaConfig,
    PointwiseModel, Reward, ScoredCandidate,
};
use crate::prank::{select_best, DpwnModel, RankedList};
use crate::simulator::Catalog;

/// The three trained models plus search settings.
#[derive(Debug, Clone)]
pub struct Reranker {
    pub ctr: PointwiseModel,
    pub next: PointwiseModel,
    pub dpwn: DpwnModel,
    pub fpsa: FpsaConfig,
    /// Merge the descending-CTR list into every candidate set.
    pub include_greedy: bool,
}

/// Outcome of one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankResult {
    /// Indices into the input list.
    pub positions: Vec<usize>,
    pub item_ids: Vec<u32>,
    pub lr: f64,
    pub probs: Vec<f64>,
    pub reward: Reward,
    pub candidate_lists: usize,
}

impl RerankResult {
    fn from_ranked(best: &RankedList, candidates: &[ItemProfile], lists: usize) -> Self {
        Self {
            positions: best.items.clone(),
            item_ids: best.items.iter().map(|&i| candidates[i].item_id).collect(),
            lr: best.score.lr,
            probs: best.score.probs.clone(),
            reward: best.reward,
            candidate_lists: lists,
        }
    }
}

impl Reranker {
    pub fn score(&self, user: &UserProfile, candidates: &[ItemProfile]) -> Vec<ScoredCandidate> {
        score_candidates(&self.ctr, &self.next, user, candidates)
    }

    /// FPSA lists, plus the greedy list when enabled, merged and deduplicated.
    pub fn candidate_set(&self, scored: &[ScoredCandidate]) -> Result<CandidateSet> {
        let beam = fpsa(scored, &self.fpsa)?;
        let mut sets = vec![beam];
        if self.include_greedy {
            sets.push(greedy_ctr_list(
                scored,
                self.fpsa.n,
                self.fpsa.alpha,
                self.fpsa.beta,
            )?);
        }
        merge_candidates(&sets, scored, self.fpsa.alpha, self.fpsa.beta)
    }

    /// Selects the final list for one request from a prepared candidate set.
    pub fn select(
        &self,
        user: &UserProfile,
        candidates: &[ItemProfile],
        set: &CandidateSet,
    ) -> Result<RerankResult> {
        let (best, _) = select_best(set, &self.dpwn, user, candidates)?;
        Ok(RerankResult::from_ranked(&best, candidates, set.len()))
    }

    pub fn rerank(&self, user: &UserProfile, candidates: &[ItemProfile]) -> Result<RerankResult> {
        let scored = self.score(user, candidates);
        let set = self.candidate_set(&scored)?;
        self.select(user, candidates, &set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftReport {
    pub sessions: usize,
    pub prs_e_ipv: f64,
    pub greedy_e_ipv: f64,
    pub prs_e_pv: f64,
    pub greedy_e_pv: f64,
    pub ri_ipv: Option<f64>,
}

/// Mean true E_IPV / E_PV of the selected and the greedy-CTR lists.
pub fn uplift(
    catalog: &Catalog,
    rr: &Reranker,
    records: &[InteractionRecord],
) -> Result<UpliftReport> {
    let (mut prs_ipv, mut prs_pv, mut g_ipv, mut g_pv) = (0.0, 0.0, 0.0, 0.0);
    for rec in records {
        let scored = rr.score(&rec.user, &rec.candidates);
        let set = rr.candidate_set(&scored)?;
        let chosen = rr.select(&rec.user, &rec.candidates, &set)?;
        let list: Vec<_> = chosen
            .positions
            .iter()
            .map(|&i| rec.candidates[i])
            .collect();
        let (pv, ipv) = catalog.true_expected_reward(&rec.user, &list)?;
        prs_pv += pv;
        prs_ipv += ipv;
        let greedy = greedy_ctr_list(&scored, rr.fpsa.n, rr.fpsa.alpha, rr.fpsa.beta)?;
        let glist: Vec<_> = greedy.lists[0]
            .entry
            .items
            .iter()
            .map(|&i| rec.candidates[i])
            .collect();
        let (pv, ipv) = catalog.true_expected_reward(&rec.user, &glist)?;
        g_pv += pv;
        g_ipv += ipv;
    }
    let n = records.len().max(1) as f64;
    Ok(UpliftReport {
        sessions: records.len(),
        prs_e_ipv: prs_ipv / n,
        greedy_e_ipv: g_ipv / n,
        prs_e_pv: prs_pv / n,
        greedy_e_pv: g_pv / n,
        ri_ipv: relative_improvement(prs_ipv, g_ipv).ok(),
    })
}
