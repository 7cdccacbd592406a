use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::experiment::RunRecord;
use super::metrics::{mean, percentile, Histogram};
use super::problems::ProblemSetup;
use crate::error::{Error, Result};
use crate::io::fields_to_csv;

pub const PERCENTILE_CONVENTION: &str = "percentiles by linear interpolation between order statistics at rank (n-1)p/100";

/// Long-format histogram table `seed,coordinate,bin,lo,hi,density`.
pub fn histogram_csv(entries: &[(u64, String, Histogram)]) -> String {
    let mut out = String::from("seed,coordinate,bin,lo,hi,density\n");
    for (seed, name, h) in entries {
        let w = h.width();
        for (b, d) in h.densities().iter().enumerate() {
            let lo = h.lo + b as f64 * w;
            let _ = writeln!(out, "{seed},{name},{b},{:.17e},{:.17e},{:.17e}", lo, lo + w, d);
        }
    }
    out
}

fn prefixed(records: &[&RunRecord], pick: impl Fn(&RunRecord) -> &str) -> String {
    let mut out = String::new();
    for r in records {
        let mut lines = pick(r).lines();
        let header = lines.next().unwrap_or_default();
        if out.is_empty() {
            let _ = writeln!(out, "seed,{header}");
        }
        for l in lines {
            let _ = writeln!(out, "{},{l}", r.seed);
        }
    }
    out
}

pub const RMSE_HEADER: &str = "seed,method,M,rmse_log_k,rmse_pressure,iterations,model_evaluations";

pub fn rmse_csv(records: &[&RunRecord]) -> String {
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
    let mut out = format!("{RMSE_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.seed,
            r.method.name(),
            r.ensemble_size,
            opt(r.rmse_log_k),
            opt(r.rmse_pressure),
            r.iterations,
            r.model_evaluations
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMeta {
    pub seed: u64,
    pub iterations: usize,
    pub model_evaluations: usize,
    pub expected_evaluations: usize,
    pub acceptance_rate: Option<f64>,
    pub warning: Option<String>,
}

/// JSON sidecar written next to the CSV outputs of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSidecar {
    pub name: String,
    pub method: Method,
    pub config_hash: String,
    pub problem_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedMeta>,
    /// Seeds that aborted, with the reason.
    pub failed: Vec<(u64, String)>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Writes the CSV outputs and the sidecar of one experiment. Aborted seeds
/// leave their partial diagnostics in `diagnostics_aborted_<seed>.csv`.
/// Returns the number of failed seeds.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, setup: &ProblemSetup, results: &[(u64, Result<RunRecord>)]) -> Result<usize> {
    fs::create_dir_all(dir)?;
    let done: Vec<&RunRecord> = results.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let mut failed = Vec::new();
    for (seed, r) in results {
        if let Err(e) = r {
            if let Error::Aborted { partial_csv, .. } = e {
                fs::write(dir.join(format!("diagnostics_aborted_{seed}.csv")), partial_csv)?;
            }
            log::error!("seed {seed} failed: {e}");
            failed.push((*seed, e.to_string()));
        }
    }
    fs::write(dir.join("diagnostics.csv"), prefixed(&done, |r| &r.diagnostics_csv))?;
    fs::write(dir.join("timing.csv"), prefixed(&done, |r| &r.timing_csv))?;
    fs::write(dir.join("rmse.csv"), rmse_csv(&done))?;

    let (mut us, mut qs) = (Vec::new(), Vec::new());
    for r in &done {
        for (name, h) in r.histograms(setup, cfg.histogram_bins)? {
            if name.starts_with('u') {
                us.push((r.seed, name, h));
            } else {
                qs.push((r.seed, name, h));
            }
        }
    }
    fs::write(dir.join("posterior_u.csv"), histogram_csv(&us))?;
    fs::write(dir.join("posterior_q.csv"), histogram_csv(&qs))?;

    if let Some(d) = &setup.darcy {
        let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
        for r in &done {
            if let Some(f) = &r.fields {
                cols.push((format!("mean_log_k_{}", r.seed), f.mean_log_k.clone()));
                cols.push((format!("var_log_k_{}", r.seed), f.var_log_k.clone()));
                cols.push((format!("mean_pressure_{}", r.seed), f.mean_pressure.clone()));
            }
        }
        let refs: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
        fs::write(dir.join("fields.csv"), fields_to_csv(&d.grid(), &refs)?)?;
    }

    let sidecar = RunSidecar {
        name: cfg.name.clone(),
        method: cfg.method,
        config_hash: cfg.hash(),
        problem_hash: cfg.problem_hash(),
        config: cfg.clone(),
        seeds: done
            .iter()
            .map(|r| SeedMeta {
                seed: r.seed,
                iterations: r.iterations,
                model_evaluations: r.model_evaluations,
                expected_evaluations: r.expected_evaluations,
                acceptance_rate: r.acceptance_rate,
                warning: r.warning.clone(),
            })
            .collect(),
        failed: failed.clone(),
    };
    write_json(&dir.join("run.json"), &sidecar)?;
    Ok(failed.len())
}

/// One line of `rmse.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseRow {
    pub seed: u64,
    pub method: String,
    pub ensemble_size: usize,
    pub rmse_log_k: Option<f64>,
    pub rmse_pressure: Option<f64>,
    pub iterations: usize,
    pub model_evaluations: usize,
}

pub fn parse_rmse_csv(text: &str) -> Result<Vec<RmseRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RMSE_HEADER => {}
        h => return Err(Error::Parse(format!("unexpected rmse header {h:?}"))),
    }
    let bad = |l: &str| Error::Parse(format!("bad rmse row {l:?}"));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let t: Vec<&str> = l.split(',').collect();
            if t.len() != 7 {
                return Err(bad(l));
            }
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { s.parse::<f64>().map(Some).map_err(|_| bad(l)) };
            Ok(RmseRow {
                seed: t[0].parse().map_err(|_| bad(l))?,
                method: t[1].to_string(),
                ensemble_size: t[2].parse().map_err(|_| bad(l))?,
                rmse_log_k: opt(t[3])?,
                rmse_pressure: opt(t[4])?,
                iterations: t[5].parse().map_err(|_| bad(l))?,
                model_evaluations: t[6].parse().map_err(|_| bad(l))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub p2: f64,
    pub p98: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Result<Self> {
        Ok(Self {
            median: percentile(values, 50.0)?,
            p25: percentile(values, 25.0)?,
            p75: percentile(values, 75.0)?,
            p2: percentile(values, 2.0)?,
            p98: percentile(values, 98.0)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub ensemble_size: usize,
    pub runs: usize,
    pub mean_iterations: f64,
    pub rmse_log_k: Option<Quantiles>,
    pub rmse_pressure: Option<Quantiles>,
}

/// Groups rows by method and ensemble size.
pub fn aggregate(rows: &[RmseRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("nothing to aggregate".into()));
    }
    let mut groups: BTreeMap<(String, usize), Vec<&RmseRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.clone(), r.ensemble_size)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, m), g)| {
            let its: Vec<f64> = g.iter().map(|r| r.iterations as f64).collect();
            let quant = |f: fn(&RmseRow) -> Option<f64>| -> Result<Option<Quantiles>> {
                let v: Vec<f64> = g.iter().filter_map(|r| f(r)).collect();
                if v.is_empty() {
                    Ok(None)
                } else {
                    Quantiles::of(&v).map(Some)
                }
            };
            Ok(SummaryRow {
                method,
                ensemble_size: m,
                runs: g.len(),
                mean_iterations: mean(&its),
                rmse_log_k: quant(|r| r.rmse_log_k)?,
                rmse_pressure: quant(|r| r.rmse_pressure)?,
            })
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("# {PERCENTILE_CONVENTION}\n");
    out.push_str("method,M,runs,mean_iterations");
    for f in ["log_k", "pressure"] {
        for q in ["median", "p25", "p75", "p2", "p98"] {
            let _ = write!(out, ",rmse_{f}_{q}");
        }
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{},{:.17e}", r.method, r.ensemble_size, r.runs, r.mean_iterations);
        for q in [r.rmse_log_k, r.rmse_pressure] {
            match q {
                Some(q) => {
                    for v in [q.median, q.p25, q.p75, q.p2, q.p98] {
                        let _ = write!(out, ",{v:.17e}");
                    }
                }
                None => out.push_str(",,,,,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Mean iteration counts with one row per ensemble size and one column per method.
pub fn table1_csv(rows: &[SummaryRow]) -> String {
    let mut methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    methods.sort_by_key(|m| method_order(m));
    methods.dedup();
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.ensemble_size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut out = format!("M,{}\n", methods.join(","));
    for m in sizes {
        let _ = write!(out, "{m}");
        for meth in &methods {
            match rows.iter().find(|r| r.ensemble_size == m && r.method == *meth) {
                Some(r) => {
                    let _ = write!(out, ",{:.6}", r.mean_iterations);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn method_order(name: &str) -> usize {
    ["TETPF", "TLETPF", "REnKF", "RLEnKF", "MCMC"].iter().position(|m| *m == name).unwrap_or(usize::MAX)
}

fn find_files(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_files(&p, name, out)?;
        } else if p.file_name().is_some_and(|f| f == name) {
            out.push(p);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSidecar {
    pub percentile_convention: String,
    /// `(relative run directory, config hash)` for every aggregated run.
    pub runs: Vec<(String, Option<String>)>,
}

/// Collects every `rmse.csv` below `dir` (MCMC runs excluded) and writes
/// `summary.csv`, `table1.csv` and `aggregate.json` into `dir`.
pub fn aggregate_dir(dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut files = Vec::new();
    find_files(dir, "rmse.csv", &mut files)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for f in &files {
        let parsed = parse_rmse_csv(&fs::read_to_string(f)?)?;
        rows.extend(parsed.into_iter().filter(|r| r.method != Method::Mcmc.name()));
        let parent = f.parent().unwrap_or(dir);
        let hash = fs::read_to_string(parent.join("run.json"))
            .ok()
            .and_then(|t| serde_json::from_str::<RunSidecar>(&t).ok())
            .map(|s| s.config_hash);
        let rel = parent.strip_prefix(dir).unwrap_or(parent).display().to_string();
        runs.push((rel, hash));
    }
    let summary = aggregate(&rows)?;
    fs::write(dir.join("summary.csv"), summary_csv(&summary))?;
    fs::write(dir.join("table1.csv"), table1_csv(&summary))?;
    write_json(&dir.join("aggregate.json"), &AggregateSidecar { percentile_convention: PERCENTILE_CONVENTION.into(), runs })?;
    Ok(summary)
}

/// Plain-text report of the aggregated results below `dir`.
pub fn report(dir: &Path) -> Result<String> {
    let summary = aggregate_dir(dir)?;
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:>6} {:>5} {:>9} {:>28} {:>28}", "method", "M", "runs", "mean T", "RMSE log k (median [25,75])", "RMSE P (median [25,75])");
    let fmt = |q: Option<Quantiles>| match q {
        Some(q) => format!("{:.4} [{:.4}, {:.4}]", q.median, q.p25, q.p75),
        None => "-".into(),
    };
    for r in &summary {
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>5} {:>9.2} {:>28} {:>28}",
            r.method,
            r.ensemble_size,
            r.runs,
            r.mean_iterations,
            fmt(r.rmse_log_k),
            fmt(r.rmse_pressure)
        );
    }
    let mut sidecars = Vec::new();
    find_files(dir, "run.json", &mut sidecars)?;
    for p in sidecars {
        let s: RunSidecar = serde_json::from_str(&fs::read_to_string(&p)?)?;
        let mismatched = s.seeds.iter().filter(|m| m.model_evaluations != m.expected_evaluations).count();
        let _ = writeln!(
            out,
            "{} ({}): {} seeds done, {} failed, {} evaluation-count mismatches",
            s.name,
            s.method.name(),
            s.seeds.len(),
            s.failed.len(),
            mismatched
        );
        for m in s.seeds.iter().filter(|m| m.warning.is_some()) {
            let _ = writeln!(out, "  seed {}: {}", m.seed, m.warning.as_deref().unwrap_or_default());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, m: usize, seed: u64, x: f64, its: usize) -> RmseRow {
        RmseRow { seed, method: method.into(), ensemble_size: m, rmse_log_k: Some(x), rmse_pressure: None, iterations: its, model_evaluations: 0 }
    }

    #[test]
    fn single_record_percentiles_collapse() {
        let s = aggregate(&[row("TETPF", 100, 1, 2.5, 7)]).unwrap();
        let q = s[0].rmse_log_k.unwrap();
        assert_eq!([q.median, q.p25, q.p75, q.p2, q.p98], [2.5; 5]);
        assert!(s[0].rmse_pressure.is_none());
    }

    #[test]
    fn hundred_records() {
        let rows: Vec<RmseRow> = (1..=100).map(|k| row("REnKF", 100, k, k as f64, 10)).collect();
        let q = aggregate(&rows).unwrap()[0].rmse_log_k.unwrap();
        assert!((q.p25 - 25.75).abs() < 1e-12);
        assert!((q.median - 50.5).abs() < 1e-12);
    }

    #[test]
    fn table_layout() {
        let rows = vec![row("REnKF", 100, 1, 1.0, 11), row("TETPF", 100, 1, 1.0, 62), row("TETPF", 1000, 1, 1.0, 65), row("TETPF", 1000, 2, 1.0, 64)];
        let t = table1_csv(&aggregate(&rows).unwrap());
        assert_eq!(t, "M,TETPF,REnKF\n100,62.000000,11.000000\n1000,64.500000,\n");
    }

    #[test]
    fn rmse_csv_round_trip() {
        let text = format!("{RMSE_HEADER}\n3,TLETPF,100,1.5e0,,12,26400\n");
        let rows = parse_rmse_csv(&text).unwrap();
        assert_eq!(rows[0].rmse_pressure, None);
        assert_eq!(rows[0].model_evaluations, 26400);
        assert!(parse_rmse_csv("a,b\n").is_err());
    }
}
