//! Synthetic cascade user with a price-anchoring permutation effect.
//!
//! The user inspects the list top-down. At each exposed position they click
//! with probability `σ(base_click(u,i) + γ_price·[price_{t−1} > price_t])` and
//! continue to the next item with probability `σ(base_next(u,i) + γ_pos·t)`,
//! where `t` is the 1-based rank. Browsing stops at the first non-continue.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, InteractionRecord, ItemProfile, Schema, UserProfile};
use crate::error::{PrsError, Result};
use crate::numerics::{sigmoid, DenseMatrix};

/// Ground-truth generative parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub users: u32,
    pub items: u32,
    pub genders: u32,
    pub categories: u32,
    pub brands: u32,
    pub click_mean: f64,
    pub click_user_std: f64,
    pub click_item_std: f64,
    pub click_pair_std: f64,
    pub next_mean: f64,
    pub next_user_std: f64,
    pub next_item_std: f64,
    pub next_pair_std: f64,
    pub price_log_mean: f64,
    pub price_log_std: f64,
    /// Click-logit boost when the preceding item is pricier.
    pub gamma_price: f64,
    /// Continue-logit change per rank; must be ≤ 0.
    pub gamma_pos: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            users: 100,
            items: 200,
            genders: 2,
            categories: 10,
            brands: 20,
            click_mean: -1.0,
            click_user_std: 0.5,
            click_item_std: 1.0,
            click_pair_std: 0.3,
            next_mean: 1.0,
            next_user_std: 0.3,
            next_item_std: 0.8,
            next_pair_std: 0.2,
            price_log_mean: 3.0,
            price_log_std: 0.6,
            gamma_price: 1.0,
            gamma_pos: -0.15,
            seed: 0,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.users,
            self.items,
            self.genders,
            self.categories,
            self.brands,
        ];
        if sizes.contains(&0) {
            return Err(PrsError::Config("simulator sizes must be positive".into()));
        }
        let reals = [
            self.click_mean,
            self.click_user_std,
            self.click_item_std,
            self.click_pair_std,
            self.next_mean,
            self.next_user_std,
            self.next_item_std,
            self.next_pair_std,
            self.price_log_mean,
            self.price_log_std,
            self.gamma_price,
            self.gamma_pos,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            return Err(PrsError::Config(
                "simulator parameters must be finite".into(),
            ));
        }
        let stds = [
            self.click_user_std,
            self.click_item_std,
            self.click_pair_std,
            self.next_user_std,
            self.next_item_std,
            self.next_pair_std,
            self.price_log_std,
        ];
        if stds.iter().any(|&s| s < 0.0) {
            return Err(PrsError::Config(
                "standard deviations must be non-negative".into(),
            ));
        }
        if self.gamma_pos > 0.0 {
            return Err(PrsError::Config("gamma_pos must be ≤ 0".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema {
            users: self.users,
            genders: self.genders,
            items: self.items,
            categories: self.categories,
            brands: self.brands,
        }
    }
}

/// Users, items and their latent per-pair logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub spec: SimSpec,
    pub users: Vec<UserProfile>,
    pub items: Vec<ItemProfile>,
    /// `users × items` base click logits.
    pub base_click: DenseMatrix,
    /// `users × items` base continue logits.
    pub base_next: DenseMatrix,
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("validated std")
}

pub fn gen_catalog(spec: &SimSpec) -> Result<Catalog> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let users: Vec<UserProfile> = (0..spec.users)
        .map(|user_id| UserProfile {
            user_id,
            gender: rng.random_range(0..spec.genders),
            age: rng.random_range(18.0..65.0_f64).floor(),
        })
        .collect();
    let price_dist = LogNormal::new(spec.price_log_mean, spec.price_log_std)
        .map_err(|e| PrsError::Config(e.to_string()))?;
    let items: Vec<ItemProfile> = (0..spec.items)
        .map(|item_id| ItemProfile {
            item_id,
            category: rng.random_range(0..spec.categories),
            brand: rng.random_range(0..spec.brands),
            price: (price_dist.sample(&mut rng) * 100.0).round().max(1.0) / 100.0,
        })
        .collect();
    let draw = |n: u32, std: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let d = normal(std);
        (0..n).map(|_| d.sample(rng)).collect()
    };
    let click_user = draw(spec.users, spec.click_user_std, &mut rng);
    let click_item = draw(spec.items, spec.click_item_std, &mut rng);
    let next_user = draw(spec.users, spec.next_user_std, &mut rng);
    let next_item = draw(spec.items, spec.next_item_std, &mut rng);
    let (nu, ni) = (spec.users as usize, spec.items as usize);
    let click_pair = normal(spec.click_pair_std);
    let next_pair = normal(spec.next_pair_std);
    let mut base_click = DenseMatrix::zeros(nu, ni);
    let mut base_next = DenseMatrix::zeros(nu, ni);
    for u in 0..nu {
        for i in 0..ni {
            let c = spec.click_mean + click_user[u] + click_item[i] + click_pair.sample(&mut rng);
            let n = spec.next_mean + next_user[u] + next_item[i] + next_pair.sample(&mut rng);
            base_click.set(u, i, c);
            base_next.set(u, i, n);
        }
    }
    Ok(Catalog {
        spec: spec.clone(),
        users,
        items,
        base_click,
        base_next,
    })
}

/// Exposure outcome and labels of one simulated session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    pub y_ctr: Vec<bool>,
    pub y_next: Vec<bool>,
    pub exposure: Vec<bool>,
}

impl Catalog {
    fn index(&self, user: &UserProfile, item: &ItemProfile) -> Result<(usize, usize)> {
        if user.user_id >= self.spec.users || item.item_id >= self.spec.items {
            return Err(PrsError::Domain(format!(
                "user {} / item {} not in catalog",
                user.user_id, item.item_id
            )));
        }
        Ok((user.user_id as usize, item.item_id as usize))
    }

    fn check_position(list: &[ItemProfile], position: usize) -> Result<()> {
        if position >= list.len() {
            return Err(PrsError::Domain(format!(
                "position {position} outside list of length {}",
                list.len()
            )));
        }
        Ok(())
    }

    /// Click probability at 0-based `position`; depends on the preceding item only.
    pub fn click_prob(
        &self,
        user: &UserProfile,
        list: &[ItemProfile],
        position: usize,
    ) -> Result<f64> {
        Self::check_position(list, position)?;
        let item = &list[position];
        let (u, i) = self.index(user, item)?;
        let mut logit = self.base_click.get(u, i);
        if position > 0 && list[position - 1].price > item.price {
            logit += self.spec.gamma_price;
        }
        Ok(sigmoid(logit))
    }

    /// Continue probability after the item at 0-based `position`.
    pub fn continue_prob(
        &self,
        user: &UserProfile,
        list: &[ItemProfile],
        position: usize,
    ) -> Result<f64> {
        Self::check_position(list, position)?;
        let (u, i) = self.index(user, &list[position])?;
        Ok(sigmoid(
            self.base_next.get(u, i) + self.spec.gamma_pos * (position + 1) as f64,
        ))
    }

    /// Draws one cascade browse of `list`.
    pub fn simulate_session<R: Rng + ?Sized>(
        &self,
        user: &UserProfile,
        list: &[ItemProfile],
        rng: &mut R,
    ) -> Result<SessionOutcome> {
        let n = list.len();
        let mut out = SessionOutcome {
            y_ctr: vec![false; n],
            y_next: vec![false; n],
            exposure: vec![false; n],
        };
        for t in 0..n {
            out.exposure[t] = true;
            let click = self.click_prob(user, list, t)?;
            let cont = self.continue_prob(user, list, t)?;
            out.y_ctr[t] = rng.random::<f64>() < click;
            let continues = rng.random::<f64>() < cont;
            out.y_next[t] = continues;
            if !continues {
                break;
            }
        }
        Ok(out)
    }

    /// Closed-form expected page views and clicks of `list` under the cascade.
    pub fn true_expected_reward(
        &self,
        user: &UserProfile,
        list: &[ItemProfile],
    ) -> Result<(f64, f64)> {
        let mut expose = 1.0;
        let (mut pv, mut ipv) = (0.0, 0.0);
        for t in 0..list.len() {
            pv += expose;
            ipv += expose * self.click_prob(user, list, t)?;
            expose *= self.continue_prob(user, list, t)?;
        }
        Ok((pv, ipv))
    }

    pub fn item(&self, id: u32) -> &ItemProfile {
        &self.items[id as usize]
    }
}

/// How the logged exhibited list is chosen from the input list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoggingPolicy {
    /// Per-position probability of a random swap or substitution.
    pub epsilon: f64,
}

impl Default for LoggingPolicy {
    fn default() -> Self {
        Self { epsilon: 0.2 }
    }
}

/// Seed of session `index`, independent of generation order.
pub fn session_seed(global: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(global ^ splitmix(index))
}

impl Catalog {
    /// Samples a user and an input list of `m` items ordered by descending base click logit.
    pub fn sample_request<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
    ) -> (UserProfile, Vec<ItemProfile>) {
        let user = self.users[rng.random_range(0..self.users.len())];
        let u = user.user_id as usize;
        let mut ids = sample(rng, self.items.len(), m).into_vec();
        ids.sort_by(|&a, &b| {
            self.base_click
                .get(u, b)
                .total_cmp(&self.base_click.get(u, a))
                .then(a.cmp(&b))
        });
        (user, ids.into_iter().map(|i| self.items[i]).collect())
    }

    /// Generates `sessions` logged records with input length `m` and exhibited length `n`.
    pub fn gen_logs(
        &self,
        sessions: usize,
        m: usize,
        n: usize,
        policy: &LoggingPolicy,
    ) -> Result<Dataset> {
        self.gen_logs_range(0..sessions, m, n, policy)
    }

    /// Like [`Catalog::gen_logs`] for the session indices in `sessions`; disjoint
    /// ranges give independent records, which is how held-out requests are drawn.
    pub fn gen_logs_range(
        &self,
        sessions: std::ops::Range<usize>,
        m: usize,
        n: usize,
        policy: &LoggingPolicy,
    ) -> Result<Dataset> {
        if n == 0 || n > m || m > self.items.len() {
            return Err(PrsError::Config(format!(
                "need 0 < n ≤ m ≤ catalog size, got n={n}, m={m}, items={}",
                self.items.len()
            )));
        }
        if !(0.0..=1.0).contains(&policy.epsilon) {
            return Err(PrsError::Config(
                "logging epsilon must lie in [0, 1]".into(),
            ));
        }
        let mut records = Vec::with_capacity(sessions.len());
        for s in sessions {
            let mut rng = ChaCha8Rng::seed_from_u64(session_seed(self.spec.seed, s as u64));
            let (user, candidates) = self.sample_request(m, &mut rng);
            let mut exhibited: Vec<ItemProfile> = candidates[..n].to_vec();
            for t in 0..n {
                if rng.random::<f64>() < policy.epsilon {
                    let j = rng.random_range(0..m);
                    let pick = candidates[j];
                    match exhibited.iter().position(|v| v.item_id == pick.item_id) {
                        Some(s) => exhibited.swap(t, s),
                        None => exhibited[t] = pick,
                    }
                }
            }
            let outcome = self.simulate_session(&user, &exhibited, &mut rng)?;
            records.push(InteractionRecord {
                user,
                candidates,
                exhibited,
                y_ctr: outcome.y_ctr,
                y_next: outcome.y_next,
                exposure: outcome.exposure,
            });
        }
        Ok(Dataset::new(self.spec.schema(), records))
    }

    /// Logs whose click labels are a pure function of order: every position is
    /// exposed and clicked iff the preceding item is pricier. Displayed lists
    /// are uniform random selections from `C`, so no item carries signal alone.
    pub fn anchor_only_logs(
        &self,
        sessions: usize,
        m: usize,
        n: usize,
        seed: u64,
    ) -> Result<Dataset> {
        if n == 0 || n > m || m > self.items.len() {
            return Err(PrsError::Config(format!(
                "need 0 < n ≤ m ≤ catalog size, got n={n}, m={m}, items={}",
                self.items.len()
            )));
        }
        let records = (0..sessions)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(session_seed(seed, s as u64));
                let (user, candidates) = self.sample_request(m, &mut rng);
                let exhibited: Vec<ItemProfile> = sample(&mut rng, m, n)
                    .into_iter()
                    .map(|i| candidates[i])
                    .collect();
                let y_ctr = (0..n)
                    .map(|t| t > 0 && exhibited[t - 1].price > exhibited[t].price)
                    .collect();
                let y_next = (0..n).map(|t| t + 1 < n).collect();
                InteractionRecord {
                    user,
                    candidates,
                    exhibited,
                    y_ctr,
                    y_next,
                    exposure: vec![true; n],
                }
            })
            .collect();
        Ok(Dataset::new(self.spec.schema(), records))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SimSpec {
        SimSpec {
            users: 10,
            items: 100,
            ..SimSpec::default()
        }
    }

    fn pair(cat: &Catalog) -> (ItemProfile, ItemProfile) {
        let mut items = cat.items.clone();
        items.sort_by(|a, b| a.price.total_cmp(&b.price));
        (items[0], items[items.len() - 1])
    }

    #[test]
    fn catalog_is_deterministic_and_positive() {
        let a = gen_catalog(&spec()).unwrap();
        let b = gen_catalog(&spec()).unwrap();
        assert_eq!(a, b);
        assert!(a.items.iter().all(|i| i.price > 0.0));
        let c = gen_catalog(&SimSpec { seed: 1, ..spec() }).unwrap();
        assert_ne!(a.base_click, c.base_click);
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(matches!(
            gen_catalog(&SimSpec { items: 0, ..spec() }),
            Err(PrsError::Config(_))
        ));
        assert!(gen_catalog(&SimSpec {
            gamma_pos: 0.1,
            ..spec()
        })
        .is_err());
    }

    #[test]
    fn modifiers_off_gives_base_probabilities() {
        let cat = gen_catalog(&SimSpec {
            gamma_price: 0.0,
            gamma_pos: 0.0,
            ..spec()
        })
        .unwrap();
        let user = cat.users[3];
        let list: Vec<ItemProfile> = cat.items[..5].to_vec();
        let mut rev = list.clone();
        rev.reverse();
        for (t, item) in list.iter().enumerate() {
            let base = sigmoid(cat.base_click.get(3, item.item_id as usize));
            assert_eq!(cat.click_prob(&user, &list, t).unwrap(), base);
            assert_eq!(cat.click_prob(&user, &rev, 4 - t).unwrap(), base);
            let next = sigmoid(cat.base_next.get(3, item.item_id as usize));
            assert_eq!(cat.continue_prob(&user, &list, t).unwrap(), next);
        }
    }

    #[test]
    fn pricier_predecessor_lifts_click() {
        let cat = gen_catalog(&spec()).unwrap();
        let (cheap, dear) = pair(&cat);
        let user = cat.users[0];
        let anchored = cat.click_prob(&user, &[dear, cheap], 1).unwrap();
        let plain = cat.click_prob(&user, &[cheap, dear], 0).unwrap();
        assert!(anchored > plain);
        let (_, ipv_anchor) = cat.true_expected_reward(&user, &[dear, cheap]).unwrap();
        let (_, ipv_plain) = cat.true_expected_reward(&user, &[cheap, dear]).unwrap();
        assert_ne!(ipv_anchor, ipv_plain);
    }

    #[test]
    fn continue_decreases_with_rank() {
        let cat = gen_catalog(&spec()).unwrap();
        let item = cat.items[7];
        let user = cat.users[1];
        let list = vec![item; 6];
        let probs: Vec<f64> = (0..6)
            .map(|t| cat.continue_prob(&user, &list, t).unwrap())
            .collect();
        assert!(probs.windows(2).all(|w| w[1] < w[0]));
        assert!(cat.continue_prob(&user, &list, 6).is_err());
    }

    #[test]
    fn extreme_continue_probabilities() {
        let mut cat = gen_catalog(&SimSpec {
            gamma_pos: 0.0,
            ..spec()
        })
        .unwrap();
        let user = cat.users[0];
        let list: Vec<ItemProfile> = cat.items[..4].to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        cat.base_next.as_mut_slice().fill(1000.0);
        let all = cat.simulate_session(&user, &list, &mut rng).unwrap();
        assert!(all.exposure.iter().all(|&e| e));
        let (pv, _) = cat.true_expected_reward(&user, &list).unwrap();
        assert!((pv - 4.0).abs() < 1e-12);
        cat.base_next.as_mut_slice().fill(-1000.0);
        let one = cat.simulate_session(&user, &list, &mut rng).unwrap();
        assert_eq!(one.exposure, vec![true, false, false, false]);
    }

    #[test]
    fn closed_form_hand_example() {
        // continue (0.5, ·), clicks (0.2, 0.4) → E_IPV = 0.2 + 0.5·0.4
        let mut cat = gen_catalog(&SimSpec {
            gamma_price: 0.0,
            gamma_pos: 0.0,
            ..spec()
        })
        .unwrap();
        let user = cat.users[0];
        let list = vec![cat.items[0], cat.items[1]];
        cat.base_click.set(0, 0, (0.2f64 / 0.8).ln());
        cat.base_click.set(0, 1, (0.4f64 / 0.6).ln());
        cat.base_next.set(0, 0, 0.0);
        let (pv, ipv) = cat.true_expected_reward(&user, &list).unwrap();
        assert!((pv - 1.5).abs() < 1e-12);
        assert!((ipv - 0.4).abs() < 1e-12);
        let (_, single) = cat.true_expected_reward(&user, &list[..1]).unwrap();
        assert!((single - 0.2).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let cat = gen_catalog(&spec()).unwrap();
        let user = cat.users[2];
        let list: Vec<ItemProfile> = cat.items[10..15].to_vec();
        let (pv, ipv) = cat.true_expected_reward(&user, &list).unwrap();
        let p1 = cat.click_prob(&user, &list, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let runs = 10_000;
        let (mut sum_pv, mut sq_pv, mut sum_ipv, mut sq_ipv, mut first) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..runs {
            let o = cat.simulate_session(&user, &list, &mut rng).unwrap();
            let v = o.exposure.iter().filter(|&&e| e).count() as f64;
            let c = o.y_ctr.iter().filter(|&&e| e).count() as f64;
            sum_pv += v;
            sq_pv += v * v;
            sum_ipv += c;
            sq_ipv += c * c;
            first += f64::from(u8::from(o.y_ctr[0]));
        }
        let n = runs as f64;
        let se = |s: f64, sq: f64| ((sq / n - (s / n).powi(2)) / n).sqrt();
        assert!((sum_pv / n - pv).abs() < 3.0 * se(sum_pv, sq_pv));
        assert!((sum_ipv / n - ipv).abs() < 3.0 * se(sum_ipv, sq_ipv));
        let se1 = (p1 * (1.0 - p1) / n).sqrt();
        assert!((first / n - p1).abs() < 3.0 * se1);
    }

    #[test]
    fn logs_are_valid_and_deterministic() {
        let cat = gen_catalog(&spec()).unwrap();
        let policy = LoggingPolicy::default();
        let a = cat.gen_logs(300, 20, 4, &policy).unwrap();
        a.validate().unwrap();
        assert_eq!(a, cat.gen_logs(300, 20, 4, &policy).unwrap());
        assert!(cat.gen_logs(0, 20, 4, &policy).unwrap().records.is_empty());
        assert!(cat.gen_logs(1, 3, 4, &policy).is_err());
    }

    #[test]
    fn logs_show_price_anchor_lift() {
        let cat = gen_catalog(&spec()).unwrap();
        let logs = cat
            .gen_logs(3000, 20, 4, &LoggingPolicy::default())
            .unwrap();
        let (mut hit_a, mut n_a, mut hit_b, mut n_b) = (0.0, 0.0, 0.0, 0.0);
        for r in &logs.records {
            for t in 1..r.exposed_len() {
                let click = f64::from(u8::from(r.y_ctr[t]));
                if r.exhibited[t - 1].price > r.exhibited[t].price {
                    hit_a += click;
                    n_a += 1.0;
                } else {
                    hit_b += click;
                    n_b += 1.0;
                }
            }
        }
        assert!(
            hit_a / n_a > hit_b / n_b,
            "{} vs {}",
            hit_a / n_a,
            hit_b / n_b
        );
    }
}
