//! Dataset representation, file ingestion, synthetic scenario generation,
//! leave-one-out splitting, and negative sampling.
//!
//! A scenario is a set of domains sharing one user universe. Users and
//! items carry dense 0-based indices internally; the original string ids
//! from data files are kept alongside for reporting.

mod files;
mod split;
mod synthetic;

pub use files::{load_scenario, load_schema, save_scenario, DomainPaths};
pub use split::{
    remove_training_fraction, sample_bpr_triples, sample_eval_negatives, split_leave_one_out,
    SplitScenario, TrainingTriple,
};
pub use synthetic::{generate_synthetic, GeneratedScenario, SyntheticConfig, SyntheticTruth};

use crate::error::{Error, Result};

/// Feature field encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    OneHot,
    MultiHot,
}

impl Encoding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Encoding::OneHot => "one-hot",
            Encoding::MultiHot => "multi-hot",
        }
    }

    pub fn parse(s: &str) -> Option<Encoding> {
        match s {
            "one-hot" => Some(Encoding::OneHot),
            "multi-hot" => Some(Encoding::MultiHot),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureField {
    pub name: String,
    pub cardinality: usize,
    pub encoding: Encoding,
}

/// Per-domain feature layout. The feature vector of an item is the
/// concatenation of the field slices, `total_dim()` wide.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    pub fields: Vec<FeatureField>,
}

impl FeatureSchema {
    pub fn new(fields: Vec<FeatureField>) -> Result<Self> {
        let schema = FeatureSchema { fields };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            return Err(Error::Config("schema has no fields".into()));
        }
        for f in &self.fields {
            if f.cardinality == 0 {
                return Err(Error::Config(format!(
                    "field `{}` has cardinality 0",
                    f.name
                )));
            }
        }
        Ok(())
    }

    pub fn total_dim(&self) -> usize {
        self.fields.iter().map(|f| f.cardinality).sum()
    }

    /// (offset, field) pairs in declaration order.
    pub fn slices(&self) -> impl Iterator<Item = (usize, &FeatureField)> {
        let mut off = 0;
        self.fields.iter().map(move |f| {
            let o = off;
            off += f.cardinality;
            (o, f)
        })
    }
}

/// One domain: its items with feature vectors, and per-user interaction
/// lists over the shared user index space.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainDataset {
    /// 0-based position of the domain inside the scenario.
    pub domain_id: usize,
    pub name: String,
    pub schema: FeatureSchema,
    /// Dense binary feature vectors; item id = index.
    pub items: Vec<Vec<f64>>,
    /// Original item identifiers aligned with `items`.
    pub item_ids: Vec<String>,
    /// Per user (index 0..N), the ordered list of interacted item ids.
    pub interactions: Vec<Vec<u32>>,
}

impl DomainDataset {
    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn total_interactions(&self) -> usize {
        self.interactions.iter().map(|l| l.len()).sum()
    }

    pub fn validate(&self, num_users: usize) -> Result<()> {
        let d_s = self.schema.total_dim();
        if self.items.len() != self.item_ids.len() {
            return Err(Error::Integrity(format!(
                "domain `{}`: {} feature rows vs {} item ids",
                self.name,
                self.items.len(),
                self.item_ids.len()
            )));
        }
        for (idx, feat) in self.items.iter().enumerate() {
            if feat.len() != d_s {
                return Err(Error::Integrity(format!(
                    "domain `{}` item `{}`: feature width {} != schema width {}",
                    self.name,
                    self.item_ids[idx],
                    feat.len(),
                    d_s
                )));
            }
            for (off, field) in self.schema.slices() {
                let ones = feat[off..off + field.cardinality]
                    .iter()
                    .filter(|&&v| v != 0.0)
                    .count();
                if field.encoding == Encoding::OneHot && ones != 1 {
                    return Err(Error::Integrity(format!(
                        "domain `{}` item `{}`: one-hot field `{}` has {} set bits",
                        self.name, self.item_ids[idx], field.name, ones
                    )));
                }
            }
        }
        if self.interactions.len() != num_users {
            return Err(Error::Integrity(format!(
                "domain `{}`: {} interaction lists vs {} users",
                self.name,
                self.interactions.len(),
                num_users
            )));
        }
        for (user, list) in self.interactions.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            for &item in list {
                if item as usize >= self.items.len() {
                    return Err(Error::Integrity(format!(
                        "domain `{}` user {} references unknown item index {}",
                        self.name, user, item
                    )));
                }
                if !seen.insert(item) {
                    return Err(Error::Integrity(format!(
                        "domain `{}` user {} lists item {} twice",
                        self.name, user, item
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The unit of every experiment: `S >= 2` domains over one user universe.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiDomainScenario {
    pub num_users: usize,
    /// Original user identifiers; index = internal user id.
    pub user_ids: Vec<String>,
    pub domains: Vec<DomainDataset>,
}

impl MultiDomainScenario {
    pub fn num_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.len() < 2 {
            return Err(Error::Config(format!(
                "a scenario needs at least 2 domains, got {}",
                self.domains.len()
            )));
        }
        self.validate_any_arity()
    }

    /// Validation without the S >= 2 requirement, for internal single-domain
    /// restrictions used by per-target training.
    pub fn validate_any_arity(&self) -> Result<()> {
        if self.user_ids.len() != self.num_users {
            return Err(Error::Integrity(format!(
                "{} user ids vs num_users {}",
                self.user_ids.len(),
                self.num_users
            )));
        }
        for d in &self.domains {
            d.validate(self.num_users)?;
        }
        Ok(())
    }

    /// A scenario containing only domain `s` (domain_id rewritten to 0).
    /// Used by single-target training; skips the S >= 2 rule.
    pub fn restrict_to_domain(&self, s: usize) -> MultiDomainScenario {
        let mut d = self.domains[s].clone();
        d.domain_id = 0;
        MultiDomainScenario {
            num_users: self.num_users,
            user_ids: self.user_ids.clone(),
            domains: vec![d],
        }
    }
}

/// Observed interactions over all possible user-item pairs.
pub fn compute_sparsity(dataset: &DomainDataset, num_users: usize) -> Result<f64> {
    if num_users == 0 {
        return Err(Error::Config("sparsity needs at least one user".into()));
    }
    if dataset.num_items() == 0 {
        return Err(Error::Config("sparsity needs at least one item".into()));
    }
    let possible = (num_users as f64) * (dataset.num_items() as f64);
    Ok(dataset.total_interactions() as f64 / possible)
}

/// Rounds half away from zero for nonnegative inputs ("round half up").
pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}
