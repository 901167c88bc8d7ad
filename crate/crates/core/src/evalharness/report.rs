use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EvalError, Strategy};
use crate::attack::{AttackOutcome, Flip, Method, TargetLink};

/// One attacked target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target: TargetLink,
    pub success: bool,
    pub q: usize,
    pub p_before: f64,
    pub p_after: f64,
    pub gradient_evals: usize,
    pub forward_evals: usize,
    pub elapsed_ms: f64,
    /// The budget could not be spent.
    pub exhausted: bool,
    pub flips: Vec<Flip>,
}

impl TargetRecord {
    pub fn from_outcome(o: &AttackOutcome, exhausted: bool, record_timings: bool) -> Self {
        Self {
            target: o.target,
            success: o.success,
            q: o.q,
            p_before: o.p_before,
            p_after: o.p_after(),
            gradient_evals: o.gradient_evals,
            forward_evals: o.forward_evals,
            elapsed_ms: if record_timings {
                o.elapsed.as_secs_f64() * 1e3
            } else {
                0.0
            },
            exhausted,
            flips: o.example.flips.clone(),
        }
    }
}

/// Results of one method on one target list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub dataset: String,
    pub method: Method,
    pub strategy: Strategy,
    pub horizon: usize,
    pub history_length: usize,
    pub budget: usize,
    pub add_only: bool,
    pub asr: f64,
    pub aml: f64,
    pub records: Vec<TargetRecord>,
}

/// Labels shared by every record of a report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportMeta {
    pub dataset: String,
    pub method: Method,
    pub strategy: Strategy,
    pub horizon: usize,
    pub history_length: usize,
    pub budget: usize,
    pub add_only: bool,
}

impl AttackReport {
    pub fn new(meta: ReportMeta, records: Vec<TargetRecord>) -> Result<Self, EvalError> {
        let mut r = Self {
            dataset: meta.dataset,
            method: meta.method,
            strategy: meta.strategy,
            horizon: meta.horizon,
            history_length: meta.history_length,
            budget: meta.budget,
            add_only: meta.add_only,
            asr: 0.0,
            aml: 0.0,
            records,
        };
        r.asr = asr(&r)?;
        r.aml = aml(&r)?;
        Ok(r)
    }

    pub fn targets(&self) -> Vec<TargetLink> {
        self.records.iter().map(|r| r.target).collect()
    }

    pub fn mean_gradient_evals(&self) -> f64 {
        mean(self.records.iter().map(|r| r.gradient_evals as f64))
    }

    pub fn mean_ms(&self) -> f64 {
        mean(self.records.iter().map(|r| r.elapsed_ms))
    }

    /// Column label: the method, marked when run in add-only mode.
    pub fn label(&self) -> String {
        if self.add_only {
            format!("{} (add-only)", self.method)
        } else {
            self.method.to_string()
        }
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

/// Fraction of targets hidden.
pub fn asr(report: &AttackReport) -> Result<f64, EvalError> {
    if report.records.is_empty() {
        return Err(EvalError::Argument("report has no targets".into()));
    }
    let hits = report.records.iter().filter(|r| r.success).count();
    Ok(hits as f64 / report.records.len() as f64)
}

/// Mean flips per target, counting each failure as the full budget.
pub fn aml(report: &AttackReport) -> Result<f64, EvalError> {
    if report.records.is_empty() {
        return Err(EvalError::Argument("report has no targets".into()));
    }
    let total: usize = report
        .records
        .iter()
        .map(|r| if r.success { r.q } else { report.budget })
        .sum();
    Ok(total as f64 / report.records.len() as f64)
}

/// `(asr_a - asr_b, aml_a - aml_b)` for two reports over the same targets.
pub fn gain(a: &AttackReport, b: &AttackReport) -> Result<(f64, f64), EvalError> {
    if a.targets() != b.targets() {
        return Err(EvalError::Mismatch("reports cover different target lists".into()));
    }
    Ok((asr(a)? - asr(b)?, aml(a)? - aml(b)?))
}

pub fn write_json<W: Write>(reports: &[AttackReport], out: W) -> Result<(), EvalError> {
    serde_json::to_writer_pretty(out, reports)?;
    Ok(())
}

pub fn read_json(input: &[u8]) -> Result<Vec<AttackReport>, EvalError> {
    Ok(serde_json::from_slice(input)?)
}

/// One aggregate row per report.
pub fn write_summary_csv<W: Write>(reports: &[AttackReport], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "method",
        "strategy",
        "horizon",
        "n_s",
        "gamma",
        "add_only",
        "asr",
        "aml",
        "mean_grad_evals",
        "mean_ms",
    ])?;
    for r in reports {
        w.write_record([
            r.dataset.clone(),
            r.method.to_string(),
            r.strategy.to_string(),
            r.horizon.to_string(),
            r.history_length.to_string(),
            r.budget.to_string(),
            r.add_only.to_string(),
            format!("{:.4}", r.asr),
            format!("{:.4}", r.aml),
            format!("{:.4}", r.mean_gradient_evals()),
            format!("{:.4}", r.mean_ms()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per flip of every record: `target_i,target_j,k,v,direction`.
pub fn write_flips_csv<W: Write>(report: &AttackReport, out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target_i", "target_j", "k", "v", "direction"])?;
    for r in &report.records {
        for f in &r.flips {
            w.write_record([
                r.target.i.to_string(),
                r.target.j.to_string(),
                f.k.to_string(),
                f.v.to_string(),
                f.direction.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runtime against budget: `gamma,method,mean_ms,mean_grad_evals,asr`, sorted by gamma then method.
pub fn write_runtime_csv<W: Write>(reports: &[AttackReport], out: W) -> Result<(), EvalError> {
    let mut rows: Vec<&AttackReport> = reports.iter().collect();
    rows.sort_by_key(|r| (r.budget, r.method));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma", "method", "mean_ms", "mean_grad_evals", "asr"])?;
    for r in rows {
        w.write_record([
            r.budget.to_string(),
            r.method.to_string(),
            format!("{:.4}", r.mean_ms()),
            format!("{:.4}", r.mean_gradient_evals()),
            format!("{:.4}", r.asr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Text table of ASR and AML with one column per method and a block per
/// strategy and horizon. Gain columns are added for every add-only report
/// that has a matching rewiring report.
pub fn render_table(reports: &[AttackReport]) -> String {
    let labels: BTreeSet<(Method, bool)> = reports.iter().map(|r| (r.method, r.add_only)).collect();
    let labels: Vec<(Method, bool)> = labels.into_iter().collect();
    let groups: BTreeSet<(Strategy, usize, usize, usize, String)> = reports
        .iter()
        .map(|r| (r.strategy, r.horizon, r.history_length, r.budget, r.dataset.clone()))
        .collect();
    let find = |g: &(Strategy, usize, usize, usize, String), m: Method, add_only: bool| {
        reports.iter().find(|r| {
            r.method == m
                && r.add_only == add_only
                && (r.strategy, r.horizon, r.history_length, r.budget, &r.dataset) == (g.0, g.1, g.2, g.3, &g.4)
        })
    };
    let gains: Vec<Method> = labels
        .iter()
        .filter(|&&(m, add_only)| {
            add_only
                && groups.iter().any(|g| {
                    matches!((find(g, m, true), find(g, m, false)), (Some(a), Some(b)) if gain(a, b).is_ok())
                })
        })
        .map(|&(m, _)| m)
        .collect();

    let mut header = vec!["dataset".to_string(), "strategy".into(), "h".into(), "n_s".into(), "gamma".into(), "metric".into()];
    for &(m, add_only) in &labels {
        header.push(if add_only {
            format!("{m} (add-only)")
        } else {
            m.to_string()
        });
    }
    for m in &gains {
        header.push(format!("gain {m}"));
    }
    let mut rows = vec![header];
    for g in &groups {
        for (metric, pick) in [("ASR", 0usize), ("AML", 1)] {
            let mut row = vec![
                g.4.clone(),
                g.0.to_string(),
                g.1.to_string(),
                g.2.to_string(),
                g.3.to_string(),
                metric.to_string(),
            ];
            for &(m, add_only) in &labels {
                row.push(match find(g, m, add_only) {
                    Some(r) => format!("{:.2}", if pick == 0 { r.asr } else { r.aml }),
                    None => "-".into(),
                });
            }
            for &m in &gains {
                row.push(match (find(g, m, true), find(g, m, false)) {
                    (Some(a), Some(b)) => match gain(a, b) {
                        Ok((ga, gm)) => format!("{:+.2}", if pick == 0 { ga } else { gm }),
                        Err(_) => "-".into(),
                    },
                    _ => "-".into(),
                });
            }
            rows.push(row);
        }
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
