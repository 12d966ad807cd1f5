//! Maximum-likelihood fits of candidate families to (null) ABROCA samples,
//! Kolmogorov-Smirnov goodness of fit, Q-Q points and sample skewness.
//!
//! Families and parameter order:
//!
//! | family      | params                       |
//! |-------------|------------------------------|
//! | `weibull`   | shape `k`, scale `λ`         |
//! | `normal`    | mean, sd                     |
//! | `student_t` | location, scale, df          |
//! | `fisher_f`  | `d1`, `d2`, scale            |
//!
//! `fisher_f` is the F distribution of `x / scale`; the raw F has no scale
//! parameter and cannot follow the magnitude of ABROCA values.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::stream::stream_rng;

pub const MIN_FIT_SAMPLES: usize = 50;
pub const MIN_KS_SAMPLES: usize = 8;
/// Random restarts of the simplex search, on top of the default start.
pub const SIMPLEX_RESTARTS: usize = 5;
/// Largest gradient component accepted at a fitted optimum (standardized data).
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
/// Scaled-F denominator degrees of freedom past which the fit is taken to be
/// heading for the chi-square boundary.
const F_D2_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Weibull,
    Normal,
    StudentT,
    FisherF,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Weibull, Family::Normal, Family::StudentT, Family::FisherF];

    pub fn name(self) -> &'static str {
        match self {
            Family::Weibull => "weibull",
            Family::Normal => "normal",
            Family::StudentT => "student_t",
            Family::FisherF => "fisher_f",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Weibull => &["shape", "scale"],
            Family::Normal => &["mean", "sd"],
            Family::StudentT => &["location", "scale", "df"],
            Family::FisherF => &["d1", "d2", "scale"],
        }
    }

    pub fn positive_support(self) -> bool {
        matches!(self, Family::Weibull | Family::FisherF)
    }

    /// Whether `params` lie inside the family's parameter space.
    pub fn valid_params(self, p: &[f64]) -> bool {
        let all_finite = p.iter().all(|v| v.is_finite());
        all_finite
            && match self {
                Family::Weibull => p.len() == 2 && p[0] > 0.0 && p[1] > 0.0,
                Family::Normal => p.len() == 2 && p[1] > 0.0,
                Family::StudentT => p.len() == 3 && p[1] > 0.0 && p[2] > 0.0,
                Family::FisherF => p.len() == 3 && p.iter().all(|&v| v > 0.0),
            }
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family `{s}` (weibull|normal|student_t|fisher_f)"))
    }
}

/// Log-density of one observation.
pub fn ln_pdf(family: Family, p: &[f64], x: f64) -> f64 {
    match family {
        Family::Weibull => {
            let (k, lam) = (p[0], p[1]);
            if x <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let u = x / lam;
            k.ln() - lam.ln() + (k - 1.0) * u.ln() - u.powf(k)
        }
        Family::Normal => {
            let z = (x - p[0]) / p[1];
            -0.5 * (2.0 * std::f64::consts::PI).ln() - p[1].ln() - 0.5 * z * z
        }
        Family::StudentT => {
            let (loc, s, nu) = (p[0], p[1], p[2]);
            let z = (x - loc) / s;
            ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln() - s.ln()
                - (nu + 1.0) / 2.0 * (z * z / nu).ln_1p()
        }
        Family::FisherF => {
            let (d1, d2, s) = (p[0], p[1], p[2]);
            if x <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let y = x / s;
            0.5 * d1 * d1.ln() + 0.5 * d2 * d2.ln() + (0.5 * d1 - 1.0) * y.ln()
                - 0.5 * (d1 + d2) * (d1 * y + d2).ln()
                - ln_beta(0.5 * d1, 0.5 * d2)
                - s.ln()
        }
    }
}

/// Total log-likelihood of `samples`. Same value as summing [`ln_pdf`], with
/// the normalizing constants computed once.
pub fn log_likelihood(family: Family, p: &[f64], samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    match family {
        Family::Weibull | Family::Normal => samples.iter().map(|&x| ln_pdf(family, p, x)).sum(),
        Family::StudentT => {
            let (loc, s, nu) = (p[0], p[1], p[2]);
            let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln() - s.ln();
            let tail: f64 = samples
                .iter()
                .map(|&x| {
                    let z = (x - loc) / s;
                    (z * z / nu).ln_1p()
                })
                .sum();
            n * c - (nu + 1.0) / 2.0 * tail
        }
        Family::FisherF => {
            let (d1, d2, s) = (p[0], p[1], p[2]);
            let c = 0.5 * d1 * d1.ln() + 0.5 * d2 * d2.ln() - ln_beta(0.5 * d1, 0.5 * d2) - s.ln();
            let mut acc = 0.0;
            for &x in samples {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let y = x / s;
                acc += (0.5 * d1 - 1.0) * y.ln() - 0.5 * (d1 + d2) * (d1 * y + d2).ln();
            }
            n * c + acc
        }
    }
}

/// Analytic gradient of the total log-likelihood in the natural parameters.
pub fn log_likelihood_gradient(family: Family, p: &[f64], samples: &[f64]) -> Vec<f64> {
    let n = samples.len() as f64;
    match family {
        Family::Weibull => {
            let (k, lam) = (p[0], p[1]);
            let mut dk = n / k;
            let mut sum_uk = 0.0;
            for &x in samples {
                let lu = (x / lam).ln();
                let uk = (k * lu).exp();
                dk += lu - uk * lu;
                sum_uk += uk;
            }
            vec![dk, k / lam * (sum_uk - n)]
        }
        Family::Normal => {
            let (m, s) = (p[0], p[1]);
            let (mut dm, mut ss) = (0.0, 0.0);
            for &x in samples {
                let z = (x - m) / s;
                dm += z;
                ss += z * z;
            }
            vec![dm / s, (ss - n) / s]
        }
        Family::StudentT => {
            let (loc, s, nu) = (p[0], p[1], p[2]);
            let base = 0.5 * digamma((nu + 1.0) / 2.0) - 0.5 * digamma(nu / 2.0) - 0.5 / nu;
            let (mut dl, mut ds, mut dnu) = (0.0, -n / s, n * base);
            for &x in samples {
                let z = (x - loc) / s;
                let q = nu + z * z;
                dl += (nu + 1.0) * z / (s * q);
                ds += (nu + 1.0) * z * z / (s * q);
                dnu += -0.5 * (z * z / nu).ln_1p() + (nu + 1.0) * z * z / (2.0 * nu * q);
            }
            vec![dl, ds, dnu]
        }
        Family::FisherF => {
            let (d1, d2, s) = (p[0], p[1], p[2]);
            let half_sum = 0.5 * (d1 + d2);
            let psi_sum = digamma(half_sum);
            let c1 = 0.5 * d1.ln() + 0.5 - 0.5 * (digamma(0.5 * d1) - psi_sum);
            let c2 = 0.5 * d2.ln() + 0.5 - 0.5 * (digamma(0.5 * d2) - psi_sum);
            let (mut g1, mut g2, mut gs) = (n * c1, n * c2, 0.0);
            for &x in samples {
                let y = x / s;
                let w = d1 * y + d2;
                let lw = w.ln();
                g1 += 0.5 * y.ln() - 0.5 * lw - half_sum * y / w;
                g2 += -0.5 * lw - half_sum / w;
                gs += -0.5 * d1 + half_sum * d1 * y / w;
            }
            vec![g1, g2, gs / s]
        }
    }
}

/// A fitted family with its goodness-of-fit statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistFit {
    pub family: Family,
    pub params: Vec<f64>,
    pub log_likelihood: f64,
    pub ks_statistic: f64,
    /// Asymptotic Kolmogorov p-value, not corrected for estimated parameters.
    pub ks_p_value: f64,
}

impl DistFit {
    pub fn cdf(&self, x: f64) -> f64 {
        cdf(self.family, &self.params, x)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile(self.family, &self.params, q)
    }
}

pub fn cdf(family: Family, p: &[f64], x: f64) -> f64 {
    match family {
        Family::Weibull => {
            if x <= 0.0 {
                0.0
            } else {
                -(-(x / p[1]).powf(p[0])).exp_m1()
            }
        }
        Family::Normal => Normal::new(p[0], p[1]).map_or(f64::NAN, |d| d.cdf(x)),
        Family::StudentT => StudentsT::new(p[0], p[1], p[2]).map_or(f64::NAN, |d| d.cdf(x)),
        Family::FisherF => {
            if x <= 0.0 {
                0.0
            } else {
                FisherSnedecor::new(p[0], p[1]).map_or(f64::NAN, |d| d.cdf(x / p[2]))
            }
        }
    }
}

pub fn quantile(family: Family, p: &[f64], q: f64) -> f64 {
    match family {
        Family::Weibull => p[1] * (-(-q).ln_1p()).powf(1.0 / p[0]),
        Family::Normal => Normal::new(p[0], p[1]).map_or(f64::NAN, |d| d.inverse_cdf(q)),
        Family::StudentT => StudentsT::new(p[0], p[1], p[2]).map_or(f64::NAN, |d| d.inverse_cdf(q)),
        Family::FisherF => FisherSnedecor::new(p[0], p[1]).map_or(f64::NAN, |d| p[2] * d.inverse_cdf(q)),
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_samples(samples: &[f64], family: Family) -> Result<()> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain {
            what: "sample",
            value: samples[i],
        });
    }
    if family.positive_support() {
        if let Some(index) = samples.iter().position(|&v| v <= 0.0) {
            return Err(Error::NonPositiveSample {
                family: family.name(),
                index,
                value: samples[index],
            });
        }
    }
    Ok(())
}

/// Maximum-likelihood fit of `family` to `samples`.
///
/// Normal is closed form; Weibull solves the shape profile equation by
/// safeguarded Newton. Student-t and scaled F run a Nelder-Mead search on
/// log-parameters from a default start plus [`SIMPLEX_RESTARTS`] random
/// restarts drawn from `seed`, then polish the best optimum with Newton steps
/// until every gradient component is below [`GRADIENT_TOLERANCE`]. Searches
/// run on data rescaled to unit size and the parameters are mapped back.
pub fn fit_mle(samples: &[f64], family: Family, seed: u64) -> Result<DistFit> {
    check_samples(samples, family)?;
    let params = match family {
        Family::Normal => {
            let m = mean(samples);
            let var = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / samples.len() as f64;
            if var <= 0.0 {
                return Err(Error::ZeroVariance);
            }
            vec![m, var.sqrt()]
        }
        Family::Weibull => {
            let c = mean(samples);
            let y: Vec<f64> = samples.iter().map(|x| x / c).collect();
            let (k, lam) = weibull_profile(&y)?;
            vec![k, lam * c]
        }
        Family::StudentT => {
            let m = mean(samples);
            let sd = (samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / samples.len() as f64).sqrt();
            if sd <= 0.0 {
                return Err(Error::ZeroVariance);
            }
            let z: Vec<f64> = samples.iter().map(|x| (x - m) / sd).collect();
            let p = fit_iterative(family, &z, seed)?;
            vec![m + sd * p[0], sd * p[1], p[2]]
        }
        Family::FisherF => {
            let c = mean(samples);
            let y: Vec<f64> = samples.iter().map(|x| x / c).collect();
            let p = fit_iterative(family, &y, seed)?;
            vec![p[0], p[1], p[2] * c]
        }
    };
    if !family.valid_params(&params) {
        return Err(Error::NonConvergence {
            family: family.name(),
            detail: format!("parameters left the valid domain: {params:?}"),
        });
    }
    let ll = log_likelihood(family, &params, samples);
    let (d, p) = ks_test(samples, |x| cdf(family, &params, x))?;
    Ok(DistFit {
        family,
        params,
        log_likelihood: ll,
        ks_statistic: d,
        ks_p_value: p,
    })
}

/// Fits every family in `families`, keeping per-family failures.
pub fn fit_families(samples: &[f64], families: &[Family], seed: u64) -> Vec<(Family, Result<DistFit>)> {
    families.iter().map(|&f| (f, fit_mle(samples, f, seed))).collect()
}

/// Weibull MLE: root of the shape profile equation
/// `Σ y^k ln y / Σ y^k − 1/k − mean(ln y) = 0`, then `λ = (mean y^k)^(1/k)`.
fn weibull_profile(y: &[f64]) -> Result<(f64, f64)> {
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean_log = mean(&logs);
    let var_log = logs.iter().map(|l| (l - mean_log).powi(2)).sum::<f64>() / logs.len() as f64;
    if var_log <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    // Shift logs by their max so y^k never overflows; the profile is invariant to it.
    let max_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eval = |k: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (k * (l - max_log)).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let a = s1 / s0;
        let g = a - 1.0 / k - mean_log;
        let dg = s2 / s0 - a * a + 1.0 / (k * k);
        (g, dg)
    };
    // g is increasing in k; bracket the root then Newton with bisection fallback.
    let mut k = 1.2 / var_log.sqrt();
    let (mut lo, mut hi) = (k, k);
    while eval(lo).0 > 0.0 {
        lo *= 0.5;
        if lo < 1e-8 {
            return Err(Error::NonConvergence {
                family: "weibull",
                detail: "shape bracket collapsed".into(),
            });
        }
    }
    while eval(hi).0 < 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NonConvergence {
                family: "weibull",
                detail: "shape bracket diverged".into(),
            });
        }
    }
    let mut converged = false;
    for _ in 0..200 {
        let (g, dg) = eval(k);
        if g == 0.0 {
            converged = true;
            break;
        }
        if g > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let mut next = k - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= 1e-15 * k {
            k = next;
            converged = true;
            break;
        }
        k = next;
    }
    if !converged {
        return Err(Error::NonConvergence {
            family: "weibull",
            detail: "profile Newton did not settle".into(),
        });
    }
    let mean_yk = y.iter().map(|v| v.powf(k)).sum::<f64>() / y.len() as f64;
    Ok((k, mean_yk.powf(1.0 / k)))
}

/// Unconstrained coordinates used by the simplex search.
fn to_free(family: Family, p: &[f64]) -> Vec<f64> {
    match family {
        Family::StudentT => vec![p[0], p[1].ln(), p[2].ln()],
        _ => p.iter().map(|v| v.ln()).collect(),
    }
}

fn from_free(family: Family, t: &[f64]) -> Vec<f64> {
    match family {
        Family::StudentT => vec![t[0], t[1].exp(), t[2].exp()],
        _ => t.iter().map(|v| v.exp()).collect(),
    }
}

fn default_start(family: Family, data: &[f64]) -> Vec<f64> {
    match family {
        Family::StudentT => {
            let mut s = data.to_vec();
            s.sort_unstable_by(f64::total_cmp);
            vec![s[s.len() / 2], 0.8, 5.0]
        }
        // data has mean 1; a scaled F(5, 10) with scale 0.8 has mean 1 too
        _ => vec![5.0, 10.0, 0.8],
    }
}

fn fit_iterative(family: Family, data: &[f64], seed: u64) -> Result<Vec<f64>> {
    let objective = |t: &[f64]| {
        let p = from_free(family, t);
        if !family.valid_params(&p) {
            return f64::INFINITY;
        }
        let ll = log_likelihood(family, &p, data);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let start = to_free(family, &default_start(family, data));
    let mut rng = stream_rng(seed, &[family as u64]);
    let mut candidates = vec![nelder_mead(&objective, &start, 0.3, 4000)];
    for _ in 0..SIMPLEX_RESTARTS {
        let jittered: Vec<f64> = start.iter().map(|v| v + 0.7 * rng.sample::<f64, _>(StandardNormal)).collect();
        candidates.push(nelder_mead(&objective, &jittered, 0.3, 4000));
    }
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut last_detail = String::from("no finite optimum");
    for (t, f) in candidates {
        if !f.is_finite() {
            continue;
        }
        match newton_polish(family, data, from_free(family, &t)) {
            Ok(p) => return Ok(p),
            Err(detail) => last_detail = detail,
        }
    }
    Err(Error::NonConvergence {
        family: family.name(),
        detail: last_detail,
    })
}

/// Minimizes `f` from `start` (simplex edge `step`). Returns the best vertex and value.
pub fn nelder_mead(f: &impl Fn(&[f64]) -> f64, start: &[f64], step: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += step;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[dim].1);
        let spread = simplex.iter().skip(1).map(|(v, _)| {
            v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        });
        if (worst - best).abs() <= 1e-13 * (1.0 + best.abs()) && spread.fold(0.0, f64::max) < 1e-9 {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for (v, _) in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let reflected = combine(&centroid, &simplex[dim].0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &simplex[dim].0, -2.0);
            let fe = f(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[dim].1 {
                combine(&centroid, &reflected, 0.5)
            } else {
                combine(&centroid, &simplex[dim].0, 0.5)
            };
            let fc = f(&contracted);
            if fc < fr.min(simplex[dim].1) {
                simplex[dim] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for (v, fv) in simplex.iter_mut().skip(1) {
                    *v = combine(&best, v, 0.5);
                    *fv = f(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let factor = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= factor * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Newton iterations on the score equations, Hessian from central
/// differences of the analytic gradient, with step halving on the likelihood.
fn newton_polish(family: Family, data: &[f64], mut p: Vec<f64>) -> std::result::Result<Vec<f64>, String> {
    let ll = |p: &[f64]| log_likelihood(family, p, data);
    let grad = |p: &[f64]| log_likelihood_gradient(family, p, data);
    let mut cur = ll(&p);
    for _ in 0..200 {
        let g = grad(&p);
        if g.iter().all(|v| v.abs() < GRADIENT_TOLERANCE) {
            return Ok(p);
        }
        let mut h = [[0.0; 3]; 3];
        for j in 0..3 {
            let step = 1e-5 * p[j].abs().max(1e-3);
            let mut up = p.clone();
            let mut dn = p.clone();
            up[j] += step;
            dn[j] -= step;
            if !family.valid_params(&dn) {
                return Err("optimum on the parameter boundary".into());
            }
            let (gu, gd) = (grad(&up), grad(&dn));
            for i in 0..3 {
                h[i][j] = (gu[i] - gd[i]) / (2.0 * step);
            }
        }
        for i in 0..3 {
            for j in 0..i {
                let avg = 0.5 * (h[i][j] + h[j][i]);
                h[i][j] = avg;
                h[j][i] = avg;
            }
        }
        // ascent direction: solve (-H) d = g; fall back to scaled gradient
        let neg_h = h.map(|row| row.map(|v| -v));
        let dir = solve3(neg_h, [g[0], g[1], g[2]])
            .filter(|d| d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() > 0.0)
            .unwrap_or_else(|| {
                let mut d = [0.0; 3];
                for i in 0..3 {
                    d[i] = g[i] / h[i][i].abs().max(1.0);
                }
                d
            });
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            if family.valid_params(&cand) {
                let v = ll(&cand);
                if v.is_finite() && v >= cur - 1e-10 * (1.0 + cur.abs()) {
                    p = cand;
                    cur = v.max(cur);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err("line search failed".into());
        }
        if family == Family::FisherF && p[1] > F_D2_LIMIT {
            return Err("no finite optimum: the likelihood keeps rising as d2 grows (scaled chi-square limit)".into());
        }
        if p.iter().any(|v| v.abs() > 1e8) {
            return Err(format!("parameters diverging: {p:?}"));
        }
    }
    Err(format!("gradient tolerance not reached at {p:?} (gradient {:?})", grad(&p)))
}

/// `sup |ECDF − CDF|` over the sample points, checking both sides of each jump.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
/// Series are summed until a term drops below 1e-10.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // P(K <= λ) = √(2π)/λ Σ exp(−(2k−1)²π²/(8λ²))
        let mut sum = 0.0;
        for k in 1.. {
            let m = (2 * k - 1) as f64;
            let term = (-(m * m) * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < 1e-10 {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        // P(K > λ) = 2 Σ (−1)^(k−1) exp(−2k²λ²)
        let mut sum = 0.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-10 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// One-sample K-S test: statistic and asymptotic p-value at `√n · D`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_KS_SAMPLES,
            got: samples.len(),
        });
    }
    let d = ks_statistic(samples, cdf);
    Ok((d, kolmogorov_sf((samples.len() as f64).sqrt() * d)))
}

/// `(theoretical, sample)` quantile pairs at plotting positions `(i − 0.5)/n`.
pub fn qq_points(samples: &[f64], quantile: impl Fn(f64) -> f64) -> Result<Vec<(f64, f64)>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &x)| (quantile((i as f64 + 0.5) / n), x))
        .collect())
}

/// Adjusted Fisher-Pearson skewness `g1 · √(n(n−1)) / (n−2)`.
pub fn sample_skewness(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let m = mean(samples);
    let (mut m2, mut m3) = (0.0, 0.0);
    for &x in samples {
        let d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    let nf = n as f64;
    m2 /= nf;
    m3 /= nf;
    if m2 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let g1 = m3 / m2.powf(1.5);
    Ok(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StudentT as TDist};

    fn weibull_draws(k: f64, lam: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, &[]);
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                lam * (-(1.0 - u).ln()).powf(1.0 / k)
            })
            .collect()
    }

    fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, &[]);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn brute_force_d(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
        let n = samples.len() as f64;
        let mut d: f64 = 0.0;
        for &x in samples {
            let le = samples.iter().filter(|&&y| y <= x).count() as f64 / n;
            let lt = samples.iter().filter(|&&y| y < x).count() as f64 / n;
            d = d.max((le - cdf(x)).abs()).max((lt - cdf(x)).abs());
        }
        d
    }

    /// Central-difference gradient, independent of the analytic one.
    fn fd_gradient(family: Family, p: &[f64], x: &[f64]) -> Vec<f64> {
        (0..p.len())
            .map(|j| {
                let h = 1e-5 * p[j].abs().max(1.0);
                let mut up = p.to_vec();
                let mut dn = p.to_vec();
                up[j] += h;
                dn[j] -= h;
                (log_likelihood(family, &up, x) - log_likelihood(family, &dn, x)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn hoisted_likelihood_matches_pointwise_sum() {
        let x = weibull_draws(1.7, 1.3, 200, 13);
        for (fam, p) in [
            (Family::StudentT, vec![1.1, 0.6, 4.0]),
            (Family::FisherF, vec![4.0, 9.0, 1.2]),
        ] {
            let direct: f64 = x.iter().map(|&v| ln_pdf(fam, &p, v)).sum();
            assert!((log_likelihood(fam, &p, &x) - direct).abs() < 1e-9 * direct.abs());
        }
    }

    #[test]
    fn weibull_recovers_parameters() {
        let x = weibull_draws(1.5, 0.1, 5000, 1);
        let fit = fit_mle(&x, Family::Weibull, 0).unwrap();
        assert!((fit.params[0] / 1.5 - 1.0).abs() < 0.05, "{:?}", fit.params);
        assert!((fit.params[1] / 0.1 - 1.0).abs() < 0.05, "{:?}", fit.params);
    }

    #[test]
    fn weibull_on_exponential_draws() {
        let x = weibull_draws(1.0, 2.0, 5000, 2);
        let fit = fit_mle(&x, Family::Weibull, 0).unwrap();
        assert!((fit.params[1] / mean(&x) - 1.0).abs() < 0.05);
    }

    #[test]
    fn scaled_f_reports_chi_square_boundary() {
        // light right tail: the F likelihood increases without bound in d2
        let x = weibull_draws(2.0, 0.06, 300, 5);
        match fit_mle(&x, Family::FisherF, 0) {
            Err(Error::NonConvergence { family, detail }) => {
                assert_eq!(family, "fisher_f");
                assert!(detail.contains("d2"), "{detail}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn normal_is_closed_form() {
        let x = normal_draws(500, 3);
        let fit = fit_mle(&x, Family::Normal, 0).unwrap();
        let m = x.iter().sum::<f64>() / 500.0;
        let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 500.0).sqrt();
        assert_eq!(fit.params, vec![m, sd]);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let x = weibull_draws(1.7, 1.3, 300, 4);
        let cases: [(Family, Vec<f64>); 4] = [
            (Family::Weibull, vec![1.5, 1.1]),
            (Family::Normal, vec![1.0, 0.7]),
            (Family::StudentT, vec![1.1, 0.6, 4.0]),
            (Family::FisherF, vec![4.0, 9.0, 1.2]),
        ];
        for (fam, p) in cases {
            let a = log_likelihood_gradient(fam, &p, &x);
            let f = fd_gradient(fam, &p, &x);
            for (u, v) in a.iter().zip(&f) {
                assert!((u - v).abs() < 1e-4 * (1.0 + u.abs()), "{fam:?}: {a:?} vs {f:?}");
            }
        }
    }

    #[test]
    fn fitted_optima_are_stationary() {
        let mut rng = stream_rng(5, &[]);
        let t = TDist::new(5.0).unwrap();
        let t_draws: Vec<f64> = (0..1000).map(|_| 0.5 + 2.0 * t.sample(&mut rng)).collect();
        let f = rand_distr::FisherF::new(6.0, 12.0).unwrap();
        let f_draws: Vec<f64> = (0..1000).map(|_| 1.5 * f.sample(&mut rng)).collect();
        let cases = [
            (Family::Weibull, weibull_draws(1.5, 1.0, 1000, 6)),
            (Family::Normal, normal_draws(1000, 7)),
            (Family::StudentT, t_draws),
            (Family::FisherF, f_draws),
        ];
        for (fam, x) in cases {
            let fit = fit_mle(&x, fam, 0).unwrap();
            let g = fd_gradient(fam, &fit.params, &x);
            assert!(g.iter().all(|v| v.abs() < 1e-6), "{fam:?} {:?} grad {g:?}", fit.params);
            assert!(fit.ks_p_value > 0.01, "{fam:?} conforming data rejected: {fit:?}");
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let x = weibull_draws(2.0, 1.0, 200, 8);
        assert_eq!(fit_mle(&x, Family::FisherF, 3), fit_mle(&x, Family::FisherF, 3));
    }

    #[test]
    fn fit_input_errors() {
        let mut x = weibull_draws(2.0, 1.0, 100, 9);
        assert!(matches!(fit_mle(&x[..10], Family::Normal, 0), Err(Error::TooFewSamples { .. })));
        x[5] = -0.1;
        assert!(matches!(
            fit_mle(&x, Family::Weibull, 0),
            Err(Error::NonPositiveSample { index: 5, .. })
        ));
        assert!(matches!(fit_mle(&x, Family::FisherF, 0), Err(Error::NonPositiveSample { .. })));
        assert!(fit_mle(&x, Family::Normal, 0).is_ok());
        assert!(matches!(fit_mle(&[1.0; 60], Family::Normal, 0), Err(Error::ZeroVariance)));
    }

    #[test]
    fn ks_on_quantile_grid_is_small() {
        let n = 99;
        let x: Vec<f64> = (1..=n).map(|i| quantile(Family::Normal, &[0.0, 1.0], i as f64 / (n + 1) as f64)).collect();
        let (d, _) = ks_test(&x, |v| cdf(Family::Normal, &[0.0, 1.0], v)).unwrap();
        assert!(d <= 1.0 / (n + 1) as f64 + 1e-12, "{d}");
    }

    #[test]
    fn ks_matches_brute_force() {
        let mut rng = stream_rng(10, &[]);
        for _ in 0..20 {
            let x: Vec<f64> = (0..30).map(|_| (rng.gen::<f64>() * 20.0).round() / 10.0 - 1.0).collect();
            let c = |v: f64| cdf(Family::Normal, &[0.0, 1.0], v);
            assert!((ks_statistic(&x, c) - brute_force_d(&x, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_rejects_gross_misfit() {
        let mut rng = stream_rng(11, &[]);
        let x: Vec<f64> = (0..200).map(|_| rng.gen()).collect();
        let (_, p) = ks_test(&x, |v| cdf(Family::Normal, &[0.0, 1.0], v)).unwrap();
        assert!(p < 0.001);
        assert!(ks_test(&x[..7], |v| v).is_err());
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // reference values of P(K > λ)
        assert!((kolmogorov_sf(1.0) - 0.26999967167735456).abs() < 1e-9);
        assert!((kolmogorov_sf(1.36) - 0.04946).abs() < 1e-4);
        assert!((kolmogorov_sf(0.5) - 0.9639452436648751).abs() < 1e-9);
        // the two series agree where they meet
        let just_below = kolmogorov_sf(1.0 - 1e-12);
        assert!((just_below - kolmogorov_sf(1.0)).abs() < 1e-9);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn qq_plotting_positions() {
        let pts = qq_points(&[5.0, 1.0], |q| q).unwrap();
        assert_eq!(pts, vec![(0.25, 1.0), (0.75, 5.0)]);
        assert!(qq_points(&[1.0], |q| q).is_err());
    }

    #[test]
    fn qq_self_fit_is_near_identity() {
        let x = normal_draws(20_000, 12);
        let pts = qq_points(&x, |q| quantile(Family::Normal, &[0.0, 1.0], q)).unwrap();
        let central = &pts[200..pts.len() - 200];
        assert!(central.iter().all(|(t, s)| (t - s).abs() < 0.1));
    }

    #[test]
    fn skewness_values() {
        assert_eq!(sample_skewness(&[-1.0, 0.0, 1.0]).unwrap(), 0.0);
        assert!((sample_skewness(&[0.0, 0.0, 1.0]).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!(matches!(sample_skewness(&[2.0, 2.0, 2.0]), Err(Error::ZeroVariance)));
        assert!(sample_skewness(&[1.0, 2.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn ks_statistic_bounds(x in proptest::collection::vec(-3.0f64..3.0, 8..60), dup in 0usize..60) {
            let c = |v: f64| cdf(Family::Normal, &[0.0, 1.0], v);
            let d = ks_statistic(&x, c);
            proptest::prop_assert!((0.0..=1.0).contains(&d));
            let mut y = x.clone();
            y.push(x[dup % x.len()]);
            proptest::prop_assert!((ks_statistic(&y, c) - d).abs() <= 1.0 / x.len() as f64 + 1e-12);
        }

        #[test]
        fn qq_is_monotone(x in proptest::collection::vec(0.01f64..5.0, 2..80)) {
            let pts = qq_points(&x, |q| quantile(Family::Weibull, &[1.3, 1.0], q)).unwrap();
            for w in pts.windows(2) {
                proptest::prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
        }
    }
}
