use std::fs;
use std::path::Path;

use abroca::distfit::{fit_families, qq_points, sample_skewness, Family};
use abroca::permutation::{exact_randomization_test, randomization_test};
use abroca::power::{power_sweep, PowerConfig, SweepGrid};
use abroca::{Scenario, ScoredDataset, TestConfig};
use serde_json::{json, Value};

use crate::args::{FitArgs, Format, GenNullArgs, PowerArgs, TestArgs};
use crate::error::CliError;
use crate::manifest::OutputSink;
use crate::svg::render_power_svg;

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn in_file(path: &Path, e: abroca::Error) -> CliError {
    match e {
        abroca::Error::Parse { line, message } => CliError::Data(format!("{}:{line}: {message}", path.display())),
        other => CliError::from(other).with_context(&path.display().to_string()),
    }
}

impl CliError {
    fn with_context(self, ctx: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{ctx}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
        }
    }
}

pub fn cmd_test(args: &TestArgs, seed: u64, format: Format, sink: &mut OutputSink) -> Result<(), CliError> {
    let text = read_file(&args.input)?;
    let (ds, meta) = ScoredDataset::read_csv(text.as_bytes()).map_err(|e| in_file(&args.input, e))?;
    let cfg = TestConfig {
        n_iter_test: args.perm.n_iter_test,
        p_convention: args.perm.p_convention,
        max_resample: args.perm.max_resample,
        seed,
    };
    let result = if args.exact {
        exact_randomization_test(&ds, cfg.p_convention)?
    } else {
        randomization_test(&ds, &cfg)?
    };
    if result.n_degenerate_resampled > 0 {
        let what = if result.exhaustive { "assignments excluded" } else { "permutations redrawn" };
        sink.warn(format!("{} degenerate {what}", result.n_degenerate_resampled));
    }
    let significant = result.p_value < args.perm.alpha;
    println!("observed_abroca  {}", result.observed_abroca);
    println!("p_value          {}", result.p_value);
    println!("p_convention     {}", result.p_convention.name());
    println!("n_iter_test      {}", result.n_iter_test);
    println!("significant      {significant} (alpha {})", args.perm.alpha);

    let sizes = ds.group_sizes();
    let out = match format {
        Format::Json => {
            let v = json!({
                "observed_abroca": result.observed_abroca,
                "p_value": result.p_value,
                "p_convention": result.p_convention.name(),
                "n_iter_test": result.n_iter_test,
                "n_degenerate_resampled": result.n_degenerate_resampled,
                "exhaustive": result.exhaustive,
                "alpha": args.perm.alpha,
                "significant": significant,
                "group_sizes": sizes,
                "group_levels": meta.group.levels,
                "label_levels": meta.label.levels,
            });
            serde_json::to_vec_pretty(&v)?
        }
        Format::Csv => format!(
            "observed_abroca,p_value,p_convention,n_iter_test,n_degenerate_resampled,exhaustive,alpha,significant,group_0_size,group_1_size,group_levels,label_levels\n{},{},{},{},{},{},{},{},{},{},{}|{},{}|{}\n",
            result.observed_abroca,
            result.p_value,
            result.p_convention.name(),
            result.n_iter_test,
            result.n_degenerate_resampled,
            result.exhaustive,
            args.perm.alpha,
            significant,
            sizes[0],
            sizes[1],
            meta.group.levels[0],
            meta.group.levels[1],
            meta.label.levels[0],
            meta.label.levels[1],
        )
        .into_bytes(),
    };
    sink.write(&format!("test_result.{}", format.ext()), &out)?;
    if let Some(path) = &args.null_out {
        let mut buf = Vec::new();
        result.write_null_csv(&mut buf)?;
        sink.write_path(path, &buf)?;
    }
    Ok(())
}

fn expand_ints(flag: &str, items: &[String]) -> Result<Vec<usize>, CliError> {
    let bad = |v: &str| CliError::Usage(format!("--{flag}: `{v}` is not a size or start:stop:step range"));
    let mut out = Vec::new();
    for item in items {
        let item = item.trim();
        if item.is_empty() {
            return Err(CliError::Usage(format!("--{flag} needs at least one value")));
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(v.parse().map_err(|_| bad(item))?),
            [a, b, step] => {
                let (a, b, step): (usize, usize, usize) = (
                    a.parse().map_err(|_| bad(item))?,
                    b.parse().map_err(|_| bad(item))?,
                    step.parse().map_err(|_| bad(item))?,
                );
                if step == 0 || b < a {
                    return Err(bad(item));
                }
                out.extend((a..=b).step_by(step));
            }
            _ => return Err(bad(item)),
        }
    }
    Ok(out)
}

fn parse_reals(flag: &str, items: &[String]) -> Result<Vec<f64>, CliError> {
    items
        .iter()
        .map(|v| {
            let v = v.trim();
            if v.is_empty() {
                return Err(CliError::Usage(format!("--{flag} needs at least one value")));
            }
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("--{flag}: `{v}` is not a number")))
        })
        .collect()
}

pub fn cmd_power(args: &PowerArgs, seed: u64, format: Format, sink: &mut OutputSink) -> Result<(), CliError> {
    let grid = SweepGrid {
        n_total: expand_ints("n-total", &args.n_total)?,
        auc_diff: parse_reals("auc-diff", &args.auc_diff)?,
        ratio_group: parse_reals("ratio-group", &args.ratio_group)?,
        ratio_pos_case: parse_reals("ratio-pos-case", &args.ratio_pos_case)?,
    }
    .deduplicated();
    if grid.is_empty() {
        return Err(CliError::Usage("every grid flag needs at least one value".into()));
    }
    let base = PowerConfig {
        scenario: Scenario::balanced(args.baseline_auc, args.baseline_auc, grid.n_total[0]),
        test: TestConfig {
            n_iter_test: args.perm.n_iter_test,
            p_convention: args.perm.p_convention,
            max_resample: args.perm.max_resample,
            seed: 0,
        },
        n_iter_power: args.n_iter_power,
        alpha: args.perm.alpha,
        master_seed: seed,
    };
    base.test.validate().map_err(CliError::from)?;
    if args.n_iter_power == 0 {
        return Err(CliError::Usage("--n-iter-power must be positive".into()));
    }
    if !(args.perm.alpha > 0.0 && args.perm.alpha < 1.0) {
        return Err(CliError::Usage("--alpha must lie in (0, 1)".into()));
    }
    if args.n_iter_power < abroca::power::MIN_REPORTED_N_ITER_POWER {
        sink.warn(format!(
            "n_iter_power {} is below {}; estimates are smoke-test quality",
            args.n_iter_power,
            abroca::power::MIN_REPORTED_N_ITER_POWER
        ));
    }
    for cell in grid.cells() {
        if let Ok(c) = cell.scenario(args.baseline_auc).cell_counts() {
            for clamp in c.clamps {
                sink.warn(format!("n_total {} / ratio_group {}: {clamp}", cell.n_total, cell.ratio_group));
            }
        }
    }

    let curve = power_sweep(&base, args.baseline_auc, &grid, |k, total, row| match (&row.power, &row.error) {
        (Some(p), _) => eprintln!(
            "[{}/{total}] n_total={} auc_diff={} ratio_group={} ratio_pos_case={} power={p} (se {})",
            k + 1,
            row.cell.n_total,
            row.cell.auc_diff,
            row.cell.ratio_group,
            row.cell.ratio_pos_case,
            row.mc_stderr.unwrap_or(f64::NAN)
        ),
        (None, e) => eprintln!("[{}/{total}] n_total={} failed: {}", k + 1, row.cell.n_total, e.as_deref().unwrap_or("")),
    })?;
    for row in curve.failed() {
        sink.warn(format!(
            "cell n_total={} auc_diff={} ratio_group={} ratio_pos_case={} failed: {}",
            row.cell.n_total,
            row.cell.auc_diff,
            row.cell.ratio_group,
            row.cell.ratio_pos_case,
            row.error.as_deref().unwrap_or("")
        ));
    }

    let bytes = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            buf
        }
        Format::Json => serde_json::to_vec_pretty(&curve)?,
    };
    sink.write(&format!("power_curve.{}", format.ext()), &bytes)?;
    if args.svg {
        sink.write("power_curve.svg", render_power_svg(&curve, args.perm.alpha).as_bytes())?;
    }

    if curve.rows.iter().all(|r| r.error.is_some()) {
        let first = grid.cells()[0].config(&base, args.baseline_auc);
        return Err(match first.validate() {
            Err(e) => CliError::from(e),
            Ok(()) => CliError::Numerical(format!(
                "all {} cells failed: {}",
                curve.rows.len(),
                curve.rows[0].error.as_deref().unwrap_or("")
            )),
        });
    }
    Ok(())
}

pub fn cmd_gen_null(args: &GenNullArgs, seed: u64, format: Format, sink: &mut OutputSink) -> Result<(), CliError> {
    let auc_2 = args.auc_2.unwrap_or(args.auc_1);
    if auc_2 != args.auc_1 && !args.allow_alt {
        return Err(CliError::Usage(format!(
            "--auc-2 {auc_2} differs from --auc-1 {}; pass --allow-alt to simulate an alternative",
            args.auc_1
        )));
    }
    let scenario = Scenario {
        auc_1: args.auc_1,
        auc_2,
        n_total: args.n_total,
        ratio_group: args.ratio_group,
        ratio_pos_case: args.ratio_pos_case,
        ratio_pos_case_group1: args.ratio_pos_case_group1,
    };
    let counts = scenario.cell_counts()?;
    for clamp in counts.clamps {
        sink.warn(clamp);
    }
    let draws = scenario.abroca_draws(args.n_draws as usize, seed)?;
    let bytes = match format {
        Format::Csv => {
            let mut s = String::with_capacity(draws.len() * 22 + 8);
            s.push_str("abroca\n");
            for v in &draws {
                s.push_str(&v.to_string());
                s.push('\n');
            }
            s.into_bytes()
        }
        Format::Json => serde_json::to_vec_pretty(&json!({ "abroca": draws }))?,
    };
    sink.write(&format!("null_abroca.{}", format.ext()), &bytes)?;
    eprintln!("wrote {} ABROCA draws", draws.len());
    Ok(())
}

/// Reads one column of reals: `abroca` if such a header exists, else the first
/// column. A non-numeric first line is taken as a header.
pub fn read_samples(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = read_file(path)?;
    if text.trim_start().starts_with('[') || text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let arr = v.get("abroca").unwrap_or(&v);
        return arr
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
            .ok_or_else(|| CliError::Data(format!("{}: expected an array of numbers", path.display())));
    }
    let mut col = 0;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && fields[0].parse::<f64>().is_err() {
            col = fields.iter().position(|f| *f == "abroca").unwrap_or(0);
            continue;
        }
        let field = fields
            .get(col)
            .ok_or_else(|| CliError::Data(format!("{}:{line_no}: missing column {}", path.display(), col + 1)))?;
        let v: f64 = field
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| CliError::Data(format!("{}:{line_no}: `{field}` is not a finite number", path.display())))?;
        out.push(v);
    }
    Ok(out)
}

pub fn cmd_fit(args: &FitArgs, seed: u64, format: Format, sink: &mut OutputSink) -> Result<(), CliError> {
    let samples = read_samples(&args.input)?;
    let mut families: Vec<Family> = Vec::new();
    for f in &args.family {
        if !families.contains(f) {
            families.push(*f);
        }
    }
    if families.is_empty() {
        return Err(CliError::Usage("--family needs at least one value".into()));
    }
    let skewness = sample_skewness(&samples);
    let fits = fit_families(&samples, &families, seed);

    let mut entries = Vec::new();
    let mut qq_files = Vec::new();
    let mut first_error = None;
    for (family, fit) in fits {
        match fit {
            Ok(fit) => {
                let params: serde_json::Map<String, Value> = family
                    .param_names()
                    .iter()
                    .zip(&fit.params)
                    .map(|(n, v)| (n.to_string(), json!(v)))
                    .collect();
                println!(
                    "{:<10} logLik {:>14.4}  D {:.6}  p {:.4e}  params {:?}",
                    family.name(),
                    fit.log_likelihood,
                    fit.ks_statistic,
                    fit.ks_p_value,
                    fit.params
                );
                entries.push(json!({
                    "family": family.name(),
                    "params": params,
                    "log_likelihood": fit.log_likelihood,
                    "ks_statistic": fit.ks_statistic,
                    "ks_p_value": fit.ks_p_value,
                }));
                let pts = qq_points(&samples, |q| fit.quantile(q))?;
                let bytes = match format {
                    Format::Csv => {
                        let mut s = String::from("theoretical,sample\n");
                        for (t, x) in &pts {
                            s.push_str(&format!("{t},{x}\n"));
                        }
                        s.into_bytes()
                    }
                    Format::Json => serde_json::to_vec_pretty(
                        &pts.iter().map(|(t, x)| json!({"theoretical": t, "sample": x})).collect::<Vec<_>>(),
                    )?,
                };
                qq_files.push((format!("qq_{}.{}", family.name(), format.ext()), bytes));
            }
            Err(e) => {
                println!("{:<10} failed: {e}", family.name());
                entries.push(json!({ "family": family.name(), "error": e.to_string() }));
                sink.warn(format!("{} fit failed: {e}", family.name()));
                first_error.get_or_insert(e);
            }
        }
    }
    let summary = json!({
        "n_samples": samples.len(),
        "skewness": skewness.as_ref().ok(),
        "fits": entries,
    });
    if let Ok(s) = &skewness {
        println!("skewness   {s}");
    }
    sink.write("fits.json", &serde_json::to_vec_pretty(&summary)?)?;
    for (name, bytes) in qq_files {
        sink.write(&name, &bytes)?;
    }
    match first_error {
        Some(e) if entries.iter().all(|v| v.get("error").is_some()) => Err(in_file(&args.input, e)),
        _ => Ok(()),
    }
}
