//! Binormal data-generating process with prescribed per-group AUCs.
//!
//! Within a group, negatives score `N(0, 1)` and positives `N(mu, 1)`, which
//! gives a population AUC of `Φ(mu / √2)`. Inverting that relation calibrates
//! `mu` to any target AUC.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dataset::ScoredDataset;
use crate::error::{Error, Result};
use crate::roc::RankedScores;
use crate::stream::{stream_rng, TAG_DATA};

pub const DEFAULT_MAX_N_TOTAL: usize = 10_000_000;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Binormal mean shift giving population AUC `auc`: `√2 · Φ⁻¹(auc)`.
pub fn mu_from_auc(auc: f64) -> Result<f64> {
    if !(auc > 0.0 && auc < 1.0) {
        return Err(Error::Domain { what: "auc", value: auc });
    }
    let n = standard_normal();
    let mut z = n.inverse_cdf(auc);
    // the closed-form quantile is only good to ~1e-12; polish against the CDF
    for _ in 0..2 {
        let d = n.pdf(z);
        if d > 0.0 {
            z -= (n.cdf(z) - auc) / d;
        }
    }
    Ok(std::f64::consts::SQRT_2 * z)
}

/// Population AUC of the binormal model with mean shift `mu`: `Φ(mu / √2)`.
pub fn auc_from_mu(mu: f64) -> f64 {
    standard_normal().cdf(mu / std::f64::consts::SQRT_2)
}

/// Draws `n_neg` negatives from N(0,1) then `n_pos` positives from N(mu,1).
pub fn simulate_group<R: Rng + ?Sized>(n_neg: usize, n_pos: usize, mu: f64, rng: &mut R) -> (Vec<f64>, Vec<bool>) {
    let mut scores = Vec::with_capacity(n_neg + n_pos);
    let mut labels = Vec::with_capacity(n_neg + n_pos);
    for _ in 0..n_neg {
        scores.push(rng.sample::<f64, _>(StandardNormal));
        labels.push(false);
    }
    for _ in 0..n_pos {
        scores.push(mu + rng.sample::<f64, _>(StandardNormal));
        labels.push(true);
    }
    (scores, labels)
}

/// Data-generating conditions without a seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Population AUC of group 0.
    pub auc_1: f64,
    /// Population AUC of group 1.
    pub auc_2: f64,
    /// Total number of instances over both groups.
    pub n_total: usize,
    /// Fraction of instances in group 0.
    pub ratio_group: f64,
    /// Fraction of positive outcomes within each group.
    pub ratio_pos_case: f64,
    /// Separate positive fraction for group 1; `ratio_pos_case` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_pos_case_group1: Option<f64>,
}

/// A scenario plus the seed that fixes its random draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(flatten)]
    pub scenario: Scenario,
    pub seed: u64,
}

/// Instance counts per group and outcome, after rounding and clamping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    /// Instances in group 0 and group 1.
    pub group: [usize; 2],
    /// Positives in group 0 and group 1.
    pub positives: [usize; 2],
    /// Human-readable notes for every count that had to be clamped.
    pub clamps: Vec<String>,
}

impl CellCounts {
    pub fn negatives(&self) -> [usize; 2] {
        [self.group[0] - self.positives[0], self.group[1] - self.positives[1]]
    }
}

fn open_unit(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value: v })
    }
}

impl Scenario {
    /// Balanced scenario (equal groups, equal outcome classes).
    pub fn balanced(auc_1: f64, auc_2: f64, n_total: usize) -> Self {
        Self {
            auc_1,
            auc_2,
            n_total,
            ratio_group: 0.5,
            ratio_pos_case: 0.5,
            ratio_pos_case_group1: None,
        }
    }

    pub fn with_seed(self, seed: u64) -> SimConfig {
        SimConfig { scenario: self, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_cap(DEFAULT_MAX_N_TOTAL)
    }

    pub fn validate_with_cap(&self, max_n_total: usize) -> Result<()> {
        open_unit("auc_1", self.auc_1)?;
        open_unit("auc_2", self.auc_2)?;
        open_unit("ratio_group", self.ratio_group)?;
        open_unit("ratio_pos_case", self.ratio_pos_case)?;
        if let Some(r) = self.ratio_pos_case_group1 {
            open_unit("ratio_pos_case_group1", r)?;
        }
        if self.n_total < 4 {
            return Err(Error::InfeasibleConfig(format!(
                "n_total {} cannot hold one instance per group and outcome",
                self.n_total
            )));
        }
        if self.n_total > max_n_total {
            return Err(Error::InvalidConfig(format!(
                "n_total {} exceeds the cap of {max_n_total}",
                self.n_total
            )));
        }
        Ok(())
    }

    /// Rounds (half to even) the requested fractions to counts, then clamps so
    /// every group has at least 2 instances and at least one of each outcome.
    pub fn cell_counts(&self) -> Result<CellCounts> {
        self.validate()?;
        let n = self.n_total;
        let mut clamps = Vec::new();
        let raw0 = (self.ratio_group * n as f64).round_ties_even() as usize;
        let g0 = raw0.clamp(2, n - 2);
        if g0 != raw0 {
            clamps.push(format!("group 0 size {raw0} clamped to {g0}"));
        }
        let group = [g0, n - g0];
        let ratios = [self.ratio_pos_case, self.ratio_pos_case_group1.unwrap_or(self.ratio_pos_case)];
        let mut positives = [0; 2];
        for g in 0..2 {
            let raw = (ratios[g] * group[g] as f64).round_ties_even() as usize;
            positives[g] = raw.clamp(1, group[g] - 1);
            if positives[g] != raw {
                clamps.push(format!("group {g} positives {raw} clamped to {}", positives[g]));
            }
        }
        Ok(CellCounts {
            group,
            positives,
            clamps,
        })
    }

    /// Draws one dataset from the scenario with the given generator.
    /// Rows are ordered group 0 then group 1, negatives before positives.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ScoredDataset> {
        let counts = self.cell_counts()?;
        let mus = [mu_from_auc(self.auc_1)?, mu_from_auc(self.auc_2)?];
        let neg = counts.negatives();
        let mut scores = Vec::with_capacity(self.n_total);
        let mut labels = Vec::with_capacity(self.n_total);
        let mut groups = Vec::with_capacity(self.n_total);
        for g in 0..2 {
            let (s, l) = simulate_group(neg[g], counts.positives[g], mus[g], rng);
            groups.extend(std::iter::repeat_n(g as u8, s.len()));
            scores.extend(s);
            labels.extend(l);
        }
        ScoredDataset::new(scores, labels, groups)
    }

    /// `n_draws` ABROCA values, one per independently simulated dataset.
    /// Draw `i` uses the stream `(seed, i)`.
    pub fn abroca_draws(&self, n_draws: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        (0..n_draws as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, &[i, TAG_DATA]);
                let ds = self.simulate(&mut rng)?;
                let ranked = RankedScores::from_dataset(&ds);
                Ok(ranked
                    .abroca_for(ds.groups(), &mut Default::default())
                    .expect("simulated groups contain both classes"))
            })
            .collect()
    }
}

impl SimConfig {
    pub fn cell_counts(&self) -> Result<CellCounts> {
        self.scenario.cell_counts()
    }
}

/// Draws the dataset fixed by `cfg` (its seed selects the stream).
pub fn simulate_dataset(cfg: &SimConfig) -> Result<ScoredDataset> {
    let mut rng = stream_rng(cfg.seed, &[TAG_DATA]);
    cfg.scenario.simulate(&mut rng)
}
