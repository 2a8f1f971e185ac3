//! Leave-one-out splitting and BPR triple sampling.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::MultiDomainScenario;
use crate::error::{Error, Result};

/// One pairwise ranking example: user `user` prefers `pos` over `neg`
/// inside domain `domain`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainingTriple {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
    pub domain: usize,
}

/// Output of [`split_leave_one_out`]: training interactions plus, per
/// domain and user, one validation item, one test item, and a frozen set
/// of evaluation negatives. Users without enough interactions in a domain
/// stay in training but are skipped by evaluation there (`None` entries).
#[derive(Clone, Debug, PartialEq)]
pub struct SplitScenario {
    pub train: MultiDomainScenario,
    /// `validation[domain][user]`
    pub validation: Vec<Vec<Option<u32>>>,
    /// `test[domain][user]`
    pub test: Vec<Vec<Option<u32>>>,
    /// `eval_negatives[domain][user]`
    pub eval_negatives: Vec<Vec<Option<Vec<u32>>>>,
}

impl SplitScenario {
    pub fn num_domains(&self) -> usize {
        self.train.num_domains()
    }

    pub fn num_users(&self) -> usize {
        self.train.num_users
    }

    /// Every item the user ever interacted with in `domain`
    /// (training + held-out).
    pub fn full_interaction_set(&self, domain: usize, user: usize) -> HashSet<u32> {
        let mut set: HashSet<u32> = self.train.domains[domain].interactions[user]
            .iter()
            .copied()
            .collect();
        if let Some(v) = self.validation[domain][user] {
            set.insert(v);
        }
        if let Some(t) = self.test[domain][user] {
            set.insert(t);
        }
        set
    }

    /// A split containing only domain `s`, for single-target training.
    pub fn restrict_to_domain(&self, s: usize) -> SplitScenario {
        SplitScenario {
            train: self.train.restrict_to_domain(s),
            validation: vec![self.validation[s].clone()],
            test: vec![self.test[s].clone()],
            eval_negatives: vec![self.eval_negatives[s].clone()],
        }
    }
}

/// Per user and domain, holds out one test and one validation item chosen
/// uniformly under `seed`, and freezes `num_negatives` evaluation
/// negatives drawn without replacement from never-interacted items.
/// Users with fewer than 3 interactions in a domain are not evaluated
/// there but keep all their interactions for training.
pub fn split_leave_one_out(
    scenario: &MultiDomainScenario,
    seed: u64,
    num_negatives: usize,
) -> Result<SplitScenario> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = scenario.num_users;
    let mut train = scenario.clone();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    let mut eval_negatives = Vec::new();

    for (s, domain) in scenario.domains.iter().enumerate() {
        let num_items = domain.num_items() as u32;
        let mut val_col = vec![None; n];
        let mut test_col = vec![None; n];
        let mut neg_col: Vec<Option<Vec<u32>>> = vec![None; n];
        for user in 0..n {
            let list = &domain.interactions[user];
            if list.len() < 3 {
                continue;
            }
            let test_pos = rng.gen_range(0..list.len());
            let test_item = list[test_pos];
            let mut rest: Vec<u32> = list
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != test_pos)
                .map(|(_, &it)| it)
                .collect();
            let val_pos = rng.gen_range(0..rest.len());
            let val_item = rest.remove(val_pos);

            let full: HashSet<u32> = list.iter().copied().collect();
            let negatives = sample_eval_negatives(&full, num_items, num_negatives, &mut rng)
                .map_err(|msg| {
                    Error::Protocol(format!(
                        "domain `{}`: user {}: {} (lower the negative count)",
                        domain.name, user, msg
                    ))
                })?;

            val_col[user] = Some(val_item);
            test_col[user] = Some(test_item);
            neg_col[user] = Some(negatives);
            train.domains[s].interactions[user] = list
                .iter()
                .copied()
                .filter(|&it| it != test_item && it != val_item)
                .collect();
        }
        validation.push(val_col);
        test.push(test_col);
        eval_negatives.push(neg_col);
    }

    Ok(SplitScenario {
        train,
        validation,
        test,
        eval_negatives,
    })
}

/// Draws `count` items uniformly without replacement from the items
/// outside `full_set`. With a 100-item catalog and one interacted item,
/// the result is forced to be the other 99.
pub fn sample_eval_negatives(
    full_set: &HashSet<u32>,
    num_items: u32,
    count: usize,
    rng: &mut ChaCha20Rng,
) -> std::result::Result<Vec<u32>, String> {
    let mut eligible: Vec<u32> = (0..num_items).filter(|it| !full_set.contains(it)).collect();
    if eligible.len() < count {
        return Err(format!(
            "only {} never-interacted items, cannot sample {} evaluation negatives",
            eligible.len(),
            count
        ));
    }
    // partial Fisher-Yates: the first `count` entries become a uniform
    // sample without replacement
    for i in 0..count {
        let j = rng.gen_range(i..eligible.len());
        eligible.swap(i, j);
    }
    eligible.truncate(count);
    Ok(eligible)
}

/// Emits `negatives_per_positive` triples per training interaction of
/// `domain`, negatives drawn uniformly from items the user never
/// interacted with. Deterministic in `seed`. Users who interacted with
/// the whole catalog are skipped with a warning.
pub fn sample_bpr_triples(
    split: &SplitScenario,
    domain: usize,
    negatives_per_positive: usize,
    seed: u64,
) -> Result<Vec<TrainingTriple>> {
    if negatives_per_positive == 0 {
        return Err(Error::Config("negatives_per_positive must be >= 1".into()));
    }
    // decorrelate domains drawing from the same seed
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ ((domain as u64 + 1) * 0x9E37_79B9_7F4A_7C15));
    let d = &split.train.domains[domain];
    let num_items = d.num_items() as u32;
    let mut triples = Vec::new();
    for user in 0..split.num_users() {
        let positives = &d.interactions[user];
        if positives.is_empty() {
            continue;
        }
        let full = split.full_interaction_set(domain, user);
        if full.len() as u32 >= num_items {
            log::warn!(
                "domain `{}`: user {} interacted with the whole catalog; skipped",
                d.name,
                user
            );
            continue;
        }
        for &pos in positives {
            for _ in 0..negatives_per_positive {
                let neg = loop {
                    let candidate = rng.gen_range(0..num_items);
                    if !full.contains(&candidate) {
                        break candidate;
                    }
                };
                triples.push(TrainingTriple {
                    user: user as u32,
                    pos,
                    neg,
                    domain,
                });
            }
        }
    }
    Ok(triples)
}

/// Removes `round_half_up(fraction * total)` training interactions per
/// domain, uniformly at random under `seed`. Held-out items and frozen
/// negatives are untouched. Users may end up with zero training
/// interactions in a domain; downstream encoders treat that as the
/// empty-domain case.
pub fn remove_training_fraction(split: &SplitScenario, fraction: f64, seed: u64) -> SplitScenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = split.clone();
    for d in out.train.domains.iter_mut() {
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for (user, list) in d.interactions.iter().enumerate() {
            for pos in 0..list.len() {
                slots.push((user, pos));
            }
        }
        let remove = super::round_half_up(fraction * slots.len() as f64).min(slots.len());
        slots.shuffle(&mut rng);
        let mut drop_by_user: Vec<Vec<usize>> = vec![Vec::new(); d.interactions.len()];
        for &(user, pos) in &slots[..remove] {
            drop_by_user[user].push(pos);
        }
        for (user, drops) in drop_by_user.into_iter().enumerate() {
            if drops.is_empty() {
                continue;
            }
            let keep: Vec<u32> = d.interactions[user]
                .iter()
                .enumerate()
                .filter(|(i, _)| !drops.contains(i))
                .map(|(_, &it)| it)
                .collect();
            d.interactions[user] = keep;
        }
    }
    out
}
