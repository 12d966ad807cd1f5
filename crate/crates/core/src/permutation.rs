//! Randomization test for ABROCA: shuffle the group column, recompute ABROCA,
//! and locate the observed value in the resulting null distribution.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ScoredDataset;
use crate::error::{Error, Result};
use crate::roc::{RankedScores, Scratch};
use crate::stream::{stream_rng, TAG_PERMUTATIONS};

pub const MIN_N_ITER_TEST: usize = 100;

/// Upper bound on the number of group assignments [`exact_randomization_test`] will enumerate.
pub const MAX_ENUMERATED: u64 = 10_000_000;

/// How the p-value is formed from the null samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PConvention {
    /// `#{null > observed} / n`; can be zero.
    Paper,
    /// `(#{null >= observed} + 1) / (n + 1)`; always in (0, 1].
    #[default]
    Smoothed,
}

impl PConvention {
    pub fn name(self) -> &'static str {
        match self {
            PConvention::Paper => "paper",
            PConvention::Smoothed => "smoothed",
        }
    }
}

impl std::str::FromStr for PConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Self::Paper),
            "smoothed" => Ok(Self::Smoothed),
            other => Err(format!("unknown p-value convention `{other}` (paper|smoothed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Number of permutations.
    pub n_iter_test: usize,
    pub p_convention: PConvention,
    /// Redraws allowed for a permutation that leaves a group with one outcome class.
    pub max_resample: u32,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            n_iter_test: 1000,
            p_convention: PConvention::Smoothed,
            max_resample: 100,
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter_test < MIN_N_ITER_TEST {
            return Err(Error::InvalidConfig(format!(
                "n_iter_test must be at least {MIN_N_ITER_TEST}, got {}",
                self.n_iter_test
            )));
        }
        if self.max_resample < 1 {
            return Err(Error::InvalidConfig("max_resample must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub observed_abroca: f64,
    /// Null ABROCA values, one per permutation (or per enumerated assignment).
    #[serde(skip)]
    pub null_samples: Vec<f64>,
    pub p_value: f64,
    pub p_convention: PConvention,
    pub n_iter_test: usize,
    /// Redrawn permutations; for exhaustive tests, assignments left out because
    /// a group lacked an outcome class.
    pub n_degenerate_resampled: usize,
    pub exhaustive: bool,
}

impl TestResult {
    /// One `abroca` column with a row per null sample.
    pub fn write_null_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "abroca")?;
        for v in &self.null_samples {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

/// Relative gap below which a null value counts as tied with the observed one.
/// Equal areas reached through different summation orders differ by a few ulps.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// p-value of `observed` against `null` under `convention`.
pub fn p_value(observed: f64, null: &[f64], convention: PConvention) -> f64 {
    let n = null.len();
    let tol = TIE_TOLERANCE * observed.abs();
    match convention {
        PConvention::Paper => null.iter().filter(|&&v| v > observed + tol).count() as f64 / n as f64,
        PConvention::Smoothed => {
            (null.iter().filter(|&&v| v >= observed - tol).count() + 1) as f64 / (n + 1) as f64
        }
    }
}

/// Uniformly random rearrangement of a group column.
pub fn shuffle_groups<R: Rng + ?Sized>(groups: &[u8], rng: &mut R) -> Vec<u8> {
    let mut out = groups.to_vec();
    out.shuffle(rng);
    out
}

/// The dataset with its group column uniformly permuted; (score, label) pairs
/// stay together and group sizes are preserved. Fails if the shuffle leaves a
/// group with a single outcome class.
pub fn permute_groups<R: Rng + ?Sized>(ds: &ScoredDataset, rng: &mut R) -> Result<ScoredDataset> {
    ds.with_groups(shuffle_groups(ds.groups(), rng))
}

/// Monte Carlo randomization test.
///
/// Permutation `j`, attempt `a` draws from the stream `(seed, PERMUTATIONS, j, a)`,
/// so the result does not depend on how the permutations are scheduled.
pub fn randomization_test(ds: &ScoredDataset, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let ranked = RankedScores::from_dataset(ds);
    let groups = ds.groups();
    let observed = ranked
        .abroca_for(groups, &mut Scratch::default())
        .map_err(Error::SingleClassGroup)?;

    let draws: Vec<Result<(f64, u32)>> = (0..cfg.n_iter_test)
        .into_par_iter()
        .with_min_len(32)
        .map_init(
            || (Scratch::default(), groups.to_vec()),
            |(scratch, buf), j| {
                for attempt in 0..=cfg.max_resample {
                    let mut rng = stream_rng(cfg.seed, &[TAG_PERMUTATIONS, j as u64, attempt as u64]);
                    buf.copy_from_slice(groups);
                    buf.shuffle(&mut rng);
                    if let Ok(v) = ranked.abroca_for(buf, scratch) {
                        return Ok((v, attempt));
                    }
                }
                Err(Error::DegenerateNull(format!(
                    "permutation {j} left a group with one outcome class after {} redraws",
                    cfg.max_resample
                )))
            },
        )
        .collect();

    let mut null_samples = Vec::with_capacity(cfg.n_iter_test);
    let mut resampled = 0usize;
    for d in draws {
        let (v, redraws) = d?;
        null_samples.push(v);
        resampled += redraws as usize;
    }
    Ok(TestResult {
        observed_abroca: observed,
        p_value: p_value(observed, &null_samples, cfg.p_convention),
        null_samples,
        p_convention: cfg.p_convention,
        n_iter_test: cfg.n_iter_test,
        n_degenerate_resampled: resampled,
        exhaustive: false,
    })
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Exact randomization test over every assignment of the group sizes.
///
/// Assignments leaving a group without one of the outcome classes are left
/// out (the Monte Carlo test redraws them). The observed assignment is part
/// of the enumeration, and the p-value applies `convention` to the full set
/// of enumerated values.
pub fn exact_randomization_test(ds: &ScoredDataset, convention: PConvention) -> Result<TestResult> {
    let n = ds.len();
    let n0 = ds.group_sizes()[0];
    let total = binomial(n as u64, n0 as u64).filter(|&c| c <= MAX_ENUMERATED).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "C({n}, {n0}) group assignments exceed the enumeration limit of {MAX_ENUMERATED}"
        ))
    })?;
    let ranked = RankedScores::from_dataset(ds);
    let mut scratch = Scratch::default();
    let observed = ranked
        .abroca_for(ds.groups(), &mut scratch)
        .map_err(Error::SingleClassGroup)?;

    let mut null_samples = Vec::with_capacity(total as usize);
    let mut excluded = 0usize;
    // positions of group 0, in lexicographic order
    let mut pick: Vec<usize> = (0..n0).collect();
    let mut groups = vec![1u8; n];
    loop {
        groups.iter_mut().for_each(|g| *g = 1);
        for &i in &pick {
            groups[i] = 0;
        }
        match ranked.abroca_for(&groups, &mut scratch) {
            Ok(v) => null_samples.push(v),
            Err(_) => excluded += 1,
        }
        let Some(i) = (0..n0).rev().find(|&i| pick[i] < n - n0 + i) else {
            break;
        };
        pick[i] += 1;
        for j in i + 1..n0 {
            pick[j] = pick[j - 1] + 1;
        }
    }
    Ok(TestResult {
        observed_abroca: observed,
        p_value: p_value(observed, &null_samples, convention),
        n_iter_test: null_samples.len(),
        null_samples,
        p_convention: convention,
        n_degenerate_resampled: excluded,
        exhaustive: true,
    })
}
