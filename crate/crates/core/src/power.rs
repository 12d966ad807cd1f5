//! Monte Carlo power of the randomization test, for a single scenario and
//! over grids of sample size, effect size and imbalance.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Scenario;
use crate::permutation::{randomization_test, TestConfig};
use crate::stream::{derive_seed, stream_rng, TAG_DATA, TAG_PERMUTATIONS};

/// Replicate counts below this are allowed but flagged as smoke runs.
pub const MIN_REPORTED_N_ITER_POWER: usize = 100;

/// Baseline AUC around which effect sizes are split symmetrically.
pub const DEFAULT_BASELINE_AUC: f64 = 0.725;

/// Largest tolerated share of replicates whose permutation null was degenerate.
pub const MAX_DEGENERATE_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub scenario: Scenario,
    /// Permutation settings; its seed is replaced per replicate.
    pub test: TestConfig,
    pub n_iter_power: usize,
    pub alpha: f64,
    pub master_seed: u64,
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.test.validate()?;
        if self.n_iter_power == 0 {
            return Err(Error::InvalidConfig("n_iter_power must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain {
                what: "alpha",
                value: self.alpha,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub power: f64,
    pub n_rejections: usize,
    pub n_iter_power: usize,
    /// Binomial standard error `sqrt(p(1-p)/n)` of `power`.
    pub mc_stderr: f64,
    /// Replicates whose null could not be built; counted as non-rejections.
    pub n_degenerate_replicates: usize,
    /// Fewer than [`MIN_REPORTED_N_ITER_POWER`] replicates.
    pub smoke_run: bool,
    pub config_echo: PowerConfig,
}

/// Outcome of replicate `i`: whether the test rejected at `alpha`.
///
/// The dataset comes from stream `(master, i, DATA)` and permutation `j` of
/// its test from `(derive(master, i, PERMUTATIONS), PERMUTATIONS, j, attempt)`.
fn replicate(cfg: &PowerConfig, i: u64) -> Result<bool> {
    let mut rng = stream_rng(cfg.master_seed, &[i, TAG_DATA]);
    let ds = cfg.scenario.simulate(&mut rng)?;
    let test = TestConfig {
        seed: derive_seed(cfg.master_seed, &[i, TAG_PERMUTATIONS]),
        ..cfg.test
    };
    Ok(randomization_test(&ds, &test)?.p_value < cfg.alpha)
}

/// Runs `n_iter_power` generate-and-test replicates and reports the share of
/// rejections at level `alpha`.
pub fn estimate_power(cfg: &PowerConfig) -> Result<PowerEstimate> {
    cfg.validate()?;
    let outcomes: Vec<Result<bool>> = (0..cfg.n_iter_power)
        .into_par_iter()
        .map(|i| replicate(cfg, i as u64))
        .collect();

    let mut rejections = 0;
    let mut degenerate = 0;
    for o in outcomes {
        match o {
            Ok(true) => rejections += 1,
            Ok(false) => {}
            Err(Error::DegenerateNull(_)) => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if degenerate as f64 > MAX_DEGENERATE_SHARE * cfg.n_iter_power as f64 {
        return Err(Error::DegenerateNull(format!(
            "{degenerate} of {} replicates had a degenerate permutation null",
            cfg.n_iter_power
        )));
    }
    let n = cfg.n_iter_power as f64;
    let power = rejections as f64 / n;
    Ok(PowerEstimate {
        power,
        n_rejections: rejections,
        n_iter_power: cfg.n_iter_power,
        mc_stderr: (power * (1.0 - power) / n).sqrt(),
        n_degenerate_replicates: degenerate,
        smoke_run: cfg.n_iter_power < MIN_REPORTED_N_ITER_POWER,
        config_echo: *cfg,
    })
}

/// Axes of a power sweep; the sweep visits their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n_total: Vec<usize>,
    pub auc_diff: Vec<f64>,
    pub ratio_group: Vec<f64>,
    pub ratio_pos_case: Vec<f64>,
}

fn dedup_f64(v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for &x in v {
        if !out.iter().any(|y| y.to_bits() == x.to_bits()) {
            out.push(x);
        }
    }
    out
}

impl SweepGrid {
    /// Drops repeated values on each axis, keeping first occurrences.
    pub fn deduplicated(&self) -> Self {
        let mut n_total = Vec::new();
        for &n in &self.n_total {
            if !n_total.contains(&n) {
                n_total.push(n);
            }
        }
        Self {
            n_total,
            auc_diff: dedup_f64(&self.auc_diff),
            ratio_group: dedup_f64(&self.ratio_group),
            ratio_pos_case: dedup_f64(&self.ratio_pos_case),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_total.is_empty() || self.auc_diff.is_empty() || self.ratio_group.is_empty() || self.ratio_pos_case.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.n_total.len() * self.auc_diff.len() * self.ratio_group.len() * self.ratio_pos_case.len()
    }

    /// Cells in output order: effect size, then group ratio, then outcome
    /// ratio, with sample size varying fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.n_cells());
        for &auc_diff in &self.auc_diff {
            for &ratio_group in &self.ratio_group {
                for &ratio_pos_case in &self.ratio_pos_case {
                    for &n_total in &self.n_total {
                        out.push(Cell {
                            n_total,
                            auc_diff,
                            ratio_group,
                            ratio_pos_case,
                        });
                    }
                }
            }
        }
        out
    }
}

/// One combination of sweep conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n_total: usize,
    pub auc_diff: f64,
    pub ratio_group: f64,
    pub ratio_pos_case: f64,
}

impl Cell {
    /// Scenario with `auc_1 = baseline + d/2` and `auc_2 = baseline - d/2`.
    pub fn scenario(&self, baseline_auc: f64) -> Scenario {
        Scenario {
            auc_1: baseline_auc + self.auc_diff / 2.0,
            auc_2: baseline_auc - self.auc_diff / 2.0,
            n_total: self.n_total,
            ratio_group: self.ratio_group,
            ratio_pos_case: self.ratio_pos_case,
            ratio_pos_case_group1: None,
        }
    }

    pub fn config(&self, base: &PowerConfig, baseline_auc: f64) -> PowerConfig {
        PowerConfig {
            scenario: self.scenario(baseline_auc),
            ..*base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    #[serde(flatten)]
    pub cell: Cell,
    /// `None` when the cell failed; see `error`.
    pub power: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub n_iter_power: usize,
    pub n_iter_test: usize,
    pub alpha: f64,
    pub baseline_auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PowerCurve {
    pub rows: Vec<PowerRow>,
}

pub const POWER_CSV_HEADER: &str =
    "n_total,auc_diff,ratio_group,ratio_pos_case,power,mc_stderr,n_iter_power,n_iter_test,alpha,baseline_auc";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

impl PowerCurve {
    /// CSV with one row per cell; failed cells leave `power` and `mc_stderr` empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{POWER_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.cell.n_total,
                r.cell.auc_diff,
                r.cell.ratio_group,
                r.cell.ratio_pos_case,
                opt(r.power),
                opt(r.mc_stderr),
                r.n_iter_power,
                r.n_iter_test,
                r.alpha,
                r.baseline_auc
            )?;
        }
        Ok(())
    }

    pub fn failed(&self) -> impl Iterator<Item = &PowerRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

/// Estimates power for every cell of `grid`. Every cell reuses `base.master_seed`,
/// so a single-cell sweep reproduces [`estimate_power`]. A failing cell is
/// recorded in its row and the sweep moves on. `on_row` sees each row as it
/// completes, in output order.
pub fn power_sweep(
    base: &PowerConfig,
    baseline_auc: f64,
    grid: &SweepGrid,
    mut on_row: impl FnMut(usize, usize, &PowerRow),
) -> Result<PowerCurve> {
    let grid = grid.deduplicated();
    if grid.is_empty() {
        return Err(Error::InvalidConfig("every sweep axis needs at least one value".into()));
    }
    base.test.validate()?;
    let cells = grid.cells();
    let mut rows = Vec::with_capacity(cells.len());
    for (k, cell) in cells.iter().enumerate() {
        let cfg = cell.config(base, baseline_auc);
        let row = match estimate_power(&cfg) {
            Ok(est) => PowerRow {
                cell: *cell,
                power: Some(est.power),
                mc_stderr: Some(est.mc_stderr),
                n_iter_power: base.n_iter_power,
                n_iter_test: base.test.n_iter_test,
                alpha: base.alpha,
                baseline_auc,
                error: None,
            },
            Err(e) => PowerRow {
                cell: *cell,
                power: None,
                mc_stderr: None,
                n_iter_power: base.n_iter_power,
                n_iter_test: base.test.n_iter_test,
                alpha: base.alpha,
                baseline_auc,
                error: Some(e.to_string()),
            },
        };
        on_row(k, cells.len(), &row);
        rows.push(row);
    }
    Ok(PowerCurve { rows })
}
