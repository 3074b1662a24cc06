use std::cmp::Ordering;
use std::iter::once;

use serde::{Deserialize, Serialize};

use super::candidates::{CandidateList, CandidateSet, Provenance};
use super::topk::BoundedTopK;
use super::ScoredCandidate;
use crate::error::{PrsError, Result};

/// Estimated page-view, click and mixed rewards of a list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub r_pv: f64,
    pub r_ipv: f64,
    pub r_sum: f64,
}

/// Walks the list once, accumulating rewards under the transitive expose
/// probability: `r_pv` starts at 1, `r_ipv` at 0, and each item adds
/// `p_expose·P_next` and `p_expose·P_ctr` before `p_expose *= P_next`.
///
/// `items` are indices into `scores`.
pub fn calc_estimated_reward(
    items: &[usize],
    scores: &[ScoredCandidate],
    alpha: f64,
    beta: f64,
) -> Result<Reward> {
    if items.is_empty() {
        return Err(PrsError::Domain("reward of an empty list".into()));
    }
    let mut r_pv = 1.0;
    let mut r_ipv = 0.0;
    let mut p_expose = 1.0;
    for &i in items {
        let s = scores
            .get(i)
            .ok_or_else(|| PrsError::Lookup(format!("no score for candidate {i}")))?;
        r_pv += p_expose * s.p_next;
        r_ipv += p_expose * s.p_ctr;
        p_expose *= s.p_next;
    }
    Ok(Reward {
        r_pv,
        r_ipv,
        r_sum: alpha * r_pv + beta * r_ipv,
    })
}

/// A partial or complete permutation with incrementally maintained rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamEntry {
    /// Indices into the scored input list.
    pub items: Vec<usize>,
    pub r_pv: f64,
    pub r_ipv: f64,
    pub r_sum: f64,
    pub p_expose: f64,
}

impl BeamEntry {
    fn root(alpha: f64) -> Self {
        Self {
            items: Vec::new(),
            r_pv: 1.0,
            r_ipv: 0.0,
            r_sum: alpha,
            p_expose: 1.0,
        }
    }

    pub fn reward(&self) -> Reward {
        Reward {
            r_pv: self.r_pv,
            r_ipv: self.r_ipv,
            r_sum: self.r_sum,
        }
    }

    /// Entry built from a from-scratch reward evaluation.
    pub fn from_items(
        items: Vec<usize>,
        scores: &[ScoredCandidate],
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let r = calc_estimated_reward(&items, scores, alpha, beta)?;
        let p_expose = items.iter().map(|&i| scores[i].p_next).product();
        Ok(Self {
            items,
            r_pv: r.r_pv,
            r_ipv: r.r_ipv,
            r_sum: r.r_sum,
            p_expose,
        })
    }
}

/// Beam-search knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpsaConfig {
    /// Output list length.
    pub n: usize,
    /// Beam width.
    pub beam_k: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FpsaConfig {
    fn default() -> Self {
        Self {
            n: 4,
            beam_k: 50,
            alpha: 7.0,
            beta: 1.0,
        }
    }
}

impl FpsaConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.n == 0 || self.n > m {
            return Err(PrsError::Config(format!(
                "output length n={} must lie in 1..={m}",
                self.n
            )));
        }
        if self.beam_k == 0 {
            return Err(PrsError::Config("beam width must be at least 1".into()));
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.alpha) || !ok(self.beta) || (self.alpha == 0.0 && self.beta == 0.0) {
            return Err(PrsError::Config(
                "alpha and beta must be non-negative and not both zero".into(),
            ));
        }
        Ok(())
    }
}

struct Expansion {
    parent: usize,
    cand: usize,
    r_pv: f64,
    r_ipv: f64,
    r_sum: f64,
    p_expose: f64,
}

fn seq_cmp(pa: &[usize], ca: usize, pb: &[usize], cb: usize) -> Ordering {
    pa.iter().chain(once(&ca)).cmp(pb.iter().chain(once(&cb)))
}

/// Reward-guided beam search over ordered `n`-selections of `scored`.
///
/// Each round extends every beam by every unused candidate and keeps the `k`
/// best by `r_sum`; ties go to the lexicographically smaller index sequence.
/// Returns up to `k` complete lists, best first.
pub fn fpsa(scored: &[ScoredCandidate], cfg: &FpsaConfig) -> Result<CandidateSet> {
    let m = scored.len();
    cfg.validate(m)?;
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let mut beams = vec![BeamEntry::root(alpha)];
    let mut used = vec![false; m];
    for _ in 0..cfg.n {
        let parents = &beams;
        let rank = |a: &Expansion, b: &Expansion| {
            a.r_sum.total_cmp(&b.r_sum).then_with(|| {
                seq_cmp(
                    &parents[b.parent].items,
                    b.cand,
                    &parents[a.parent].items,
                    a.cand,
                )
            })
        };
        let mut top = BoundedTopK::new(cfg.beam_k, rank);
        for (pi, beam) in parents.iter().enumerate() {
            used.fill(false);
            for &i in &beam.items {
                used[i] = true;
            }
            for (ci, s) in scored.iter().enumerate() {
                if used[ci] {
                    continue;
                }
                let r_pv = beam.r_pv + beam.p_expose * s.p_next;
                let r_ipv = beam.r_ipv + beam.p_expose * s.p_ctr;
                let exp = Expansion {
                    parent: pi,
                    cand: ci,
                    r_pv,
                    r_ipv,
                    r_sum: alpha * r_pv + beta * r_ipv,
                    p_expose: beam.p_expose * s.p_next,
                };
                top.offer(exp);
            }
        }
        let next: Vec<BeamEntry> = top
            .into_sorted_vec()
            .into_iter()
            .map(|e| {
                let mut items = Vec::with_capacity(parents[e.parent].items.len() + 1);
                items.extend_from_slice(&parents[e.parent].items);
                items.push(e.cand);
                BeamEntry {
                    items,
                    r_pv: e.r_pv,
                    r_ipv: e.r_ipv,
                    r_sum: e.r_sum,
                    p_expose: e.p_expose,
                }
            })
            .collect();
        beams = next;
    }
    Ok(CandidateSet {
        n: cfg.n,
        lists: beams
            .into_iter()
            .map(|entry| CandidateList {
                entry,
                source: Provenance::Fpsa,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::ItemProfile;
    use crate::eval::exhaustive_oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn scored_from(pairs: &[(f64, f64)]) -> Vec<ScoredCandidate> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(p_next, p_ctr))| ScoredCandidate {
                item: ItemProfile {
                    item_id: i as u32,
                    category: 0,
                    brand: 0,
                    price: 1.0 + i as f64,
                },
                p_ctr,
                p_next,
            })
            .collect()
    }

    fn random_scored(m: usize, rng: &mut ChaCha8Rng) -> Vec<ScoredCandidate> {
        let pairs: Vec<(f64, f64)> = (0..m)
            .map(|_| (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99)))
            .collect();
        scored_from(&pairs)
    }

    fn cfg(n: usize, k: usize, alpha: f64, beta: f64) -> FpsaConfig {
        FpsaConfig {
            n,
            beam_k: k,
            alpha,
            beta,
        }
    }

    fn perms(m: usize, n: usize) -> usize {
        (m - n + 1..=m).product()
    }

    #[test]
    fn worked_example_trace() {
        let s = scored_from(&[(0.5, 0.2), (0.5, 0.4)]);
        let r = calc_estimated_reward(&[0, 1], &s, 1.0, 1.0).unwrap();
        assert!((r.r_pv - 1.75).abs() < 1e-12);
        assert!((r.r_ipv - 0.4).abs() < 1e-12);
        assert!((r.r_sum - 2.15).abs() < 1e-12);
    }

    #[test]
    fn reward_extremes() {
        let s = scored_from(&[(1.0, 0.3), (1.0, 0.6), (1.0, 0.1)]);
        let r = calc_estimated_reward(&[0, 1, 2], &s, 1.0, 0.0).unwrap();
        assert_eq!((r.r_sum, r.r_pv), (4.0, 4.0));
        let s = scored_from(&[(0.0, 0.3), (0.0, 0.6), (0.0, 0.1)]);
        let r = calc_estimated_reward(&[1, 0, 2], &s, 0.0, 1.0).unwrap();
        assert_eq!(r.r_sum, 0.6);
        assert!(matches!(
            calc_estimated_reward(&[0, 7], &s, 1.0, 1.0),
            Err(PrsError::Lookup(_))
        ));
    }

    #[test]
    fn config_errors() {
        let s = scored_from(&[(0.5, 0.5); 3]);
        assert!(matches!(
            fpsa(&s, &cfg(4, 5, 1.0, 1.0)),
            Err(PrsError::Config(_))
        ));
        assert!(fpsa(&s, &cfg(2, 0, 1.0, 1.0)).is_err());
        assert!(fpsa(&s, &cfg(2, 5, 0.0, 0.0)).is_err());
        assert!(fpsa(&s, &cfg(2, 5, -1.0, 1.0)).is_err());
    }

    #[test]
    fn full_beam_matches_exhaustive_m6_n3() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = random_scored(6, &mut rng);
        let out = fpsa(&s, &cfg(3, perms(6, 3), 7.0, 1.0)).unwrap();
        assert_eq!(out.lists.len(), 120);
        let oracle = exhaustive_oracle(6, 3, false, |items| {
            calc_estimated_reward(items, &s, 7.0, 1.0).map(|r| r.r_sum)
        })
        .unwrap();
        assert_eq!(out.lists[0].entry.items, oracle.best);
        assert_eq!(out.lists[0].entry.r_sum, oracle.best_value);
    }

    #[test]
    fn equal_scores_follow_tie_rule() {
        let s = scored_from(&[(0.4, 0.3); 5]);
        let out = fpsa(&s, &cfg(3, 7, 1.0, 1.0)).unwrap();
        assert_eq!(out.lists.len(), 7);
        assert_eq!(out.lists[0].entry.items, vec![0, 1, 2]);
        assert_eq!(out.lists[1].entry.items, vec![0, 1, 3]);
        let sums: Vec<f64> = out.lists.iter().map(|l| l.entry.r_sum).collect();
        assert!(sums.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_round_picks_best_one_step_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_scored(9, &mut rng);
        let (alpha, beta) = (2.0, 3.0);
        let out = fpsa(&s, &cfg(1, 3, alpha, beta)).unwrap();
        let best = (0..9)
            .max_by(|&a, &b| {
                let f = |i: usize| alpha * (1.0 + s[i].p_next) + beta * s[i].p_ctr;
                f(a).total_cmp(&f(b))
            })
            .unwrap();
        assert_eq!(out.lists[0].entry.items, vec![best]);
    }

    #[test]
    fn beam_one_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let s = random_scored(10, &mut rng);
            let out = fpsa(&s, &cfg(4, 1, 1.5, 1.0)).unwrap();
            let mut chosen: Vec<usize> = Vec::new();
            for _ in 0..4 {
                let best = (0..10)
                    .filter(|i| !chosen.contains(i))
                    .max_by(|&a, &b| {
                        let f = |i: usize| {
                            let mut seq = chosen.clone();
                            seq.push(i);
                            calc_estimated_reward(&seq, &s, 1.5, 1.0).unwrap().r_sum
                        };
                        f(a).total_cmp(&f(b)).then(b.cmp(&a))
                    })
                    .unwrap();
                chosen.push(best);
            }
            assert_eq!(out.lists[0].entry.items, chosen);
        }
    }

    #[test]
    fn large_instance_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_scored(100, &mut rng);
        let out = fpsa(&s, &cfg(10, 50, 7.0, 1.0)).unwrap();
        assert_eq!(out.lists.len(), 50);
        assert!(out.lists.iter().all(|l| l.entry.items.len() == 10));
        assert!(out
            .lists
            .windows(2)
            .all(|w| w[0].entry.r_sum >= w[1].entry.r_sum));
    }

    proptest! {
        #[test]
        fn incremental_rewards_match_recomputation(seed: u64, m in 3usize..12, k in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_scored(m, &mut rng);
            let n = rng.random_range(1..=m.min(5));
            let out = fpsa(&s, &cfg(n, k, 3.0, 2.0)).unwrap();
            for l in &out.lists {
                let r = calc_estimated_reward(&l.entry.items, &s, 3.0, 2.0).unwrap();
                prop_assert_eq!(r, l.entry.reward());
                let mut sorted = l.entry.items.clone();
                sorted.sort_unstable();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), n);
                prop_assert!(l.entry.p_expose > 0.0 && l.entry.p_expose <= 1.0);
            }
        }

        #[test]
        fn best_reward_monotone_in_beam_width(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_scored(10, &mut rng);
            let mut prev = f64::NEG_INFINITY;
            for k in [1, 2, 5, 10, 40] {
                let best = fpsa(&s, &cfg(4, k, 7.0, 1.0)).unwrap().lists[0].entry.r_sum;
                prop_assert!(best >= prev);
                prev = best;
            }
        }

        #[test]
        fn argmax_invariant_under_common_scaling(seed: u64, scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_scored(6, &mut rng);
            let full = perms(6, 3);
            let a = fpsa(&s, &cfg(3, full, 2.0, 1.0)).unwrap();
            let b = fpsa(&s, &cfg(3, full, 2.0 * scale, scale)).unwrap();
            let best_a = a.lists[0].entry.r_sum;
            let best_b = b.lists[0].entry.r_sum;
            // Either the same argmax, or an exact tie in the unscaled problem.
            let b_top = &b.lists[0].entry.items;
            let b_in_a = a.lists.iter().find(|l| &l.entry.items == b_top).unwrap();
            prop_assert!((b_in_a.entry.r_sum - best_a).abs() <= 1e-12 * best_a.abs());
            prop_assert!(best_b.is_finite());
        }
    }
}
