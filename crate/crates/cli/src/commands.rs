use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tga::ddne::{load_checkpoint, save_checkpoint, train_on, DdneModel, TrainingData};
use tga::dynnet::{ingest_edge_list, DynamicNetwork, NetError};
use tga::evalharness::{
    generate_synthetic, read_json, render_table, run_experiment_with, split, write_flips_csv, write_json,
    write_runtime_csv, write_summary_csv, AttackReport, EvalError,
};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn load_network(cfg: &RunConfig) -> Result<DynamicNetwork, CliError> {
    let d = &cfg.dataset;
    if let Some(spec) = &d.synthetic {
        return generate_synthetic(spec).map_err(|e| CliError::Input(e.to_string()));
    }
    let path = d.path.as_ref().expect("validated");
    let spec = d.snapshots.as_ref().expect("validated");
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot open dataset {}: {e}", path.display())))?;
    ingest_edge_list(BufReader::new(file), spec).map_err(|e| match e {
        NetError::Parse { line, message } => CliError::Input(format!("{}:{line}: {message}", path.display())),
        e => CliError::Input(format!("{}: {e}", path.display())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn checkpoint_path(dir: &Path, history_length: usize, horizon: usize) -> PathBuf {
    dir.join(format!("model-n{history_length}-h{horizon}.ckpt"))
}

#[derive(Serialize)]
struct IngestStats<'a> {
    dataset: &'a str,
    n: usize,
    snapshots: usize,
    links_per_snapshot: &'a [usize],
    density_per_snapshot: &'a [f64],
}

/// Per-snapshot CSVs and a stats JSON.
pub fn ingest(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let net = load_network(cfg)?;
    let stats = net.stats();
    for k in 0..net.num_snapshots() {
        let mut w = create(&out.join("snapshots").join(format!("snapshot-{k}.csv")))?;
        net.write_snapshot_csv(k, &mut w).map_err(|e| CliError::Other(e.to_string()))?;
        w.flush()?;
    }
    let mut w = create(&out.join("stats.json"))?;
    serde_json::to_writer_pretty(
        &mut w,
        &IngestStats {
            dataset: &cfg.dataset.name,
            n: stats.nodes,
            snapshots: stats.snapshots,
            links_per_snapshot: &stats.links_per_snapshot,
            density_per_snapshot: &stats.density_per_snapshot,
        },
    )
    .map_err(|e| CliError::Other(e.to_string()))?;
    w.flush()?;
    println!(
        "{}: {} nodes, {} snapshots, links per snapshot {:?}",
        cfg.dataset.name, stats.nodes, stats.snapshots, stats.links_per_snapshot
    );
    Ok(())
}

/// One checkpoint and loss trajectory per history length and horizon.
pub fn train(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let net = load_network(cfg)?;
    for len in cfg.history_lengths() {
        let plan = cfg.plan(len);
        let s = split(&net, len, &plan.horizons)?;
        for (h, truth) in &s.targets {
            let data = TrainingData::new(s.window.clone(), truth.clone());
            let t = train_on(&data, &plan.hyper)?;
            let ckpt = checkpoint_path(out, len, *h);
            if let Some(parent) = ckpt.parent() {
                fs::create_dir_all(parent)?;
            }
            save_checkpoint(&t.model, &ckpt)?;
            let mut w = create(&out.join(format!("loss-n{len}-h{h}.csv")))?;
            writeln!(w, "epoch,mean_loss")?;
            for (e, l) in t.epoch_losses.iter().enumerate() {
                writeln!(w, "{e},{l}")?;
            }
            w.flush()?;
            println!(
                "trained N={len} h={h}: final loss {:.6} -> {}",
                t.epoch_losses.last().copied().unwrap_or(f64::NAN),
                ckpt.display()
            );
        }
    }
    Ok(())
}

/// Runs the configured experiment against saved checkpoints.
pub fn attack(cfg: &RunConfig, out: &Path, checkpoints: &Path) -> Result<(), CliError> {
    let net = load_network(cfg)?;
    let mut reports = Vec::new();
    for len in cfg.history_lengths() {
        let plan = cfg.plan(len);
        let r = run_experiment_with(&net, &plan, |h, _| {
            let path = checkpoint_path(checkpoints, len, h);
            if !path.exists() {
                return Err(EvalError::Spec(format!(
                    "missing checkpoint {}; run `tga train` first",
                    path.display()
                )));
            }
            let model: DdneModel = load_checkpoint(&path)?;
            if model.node_count() != net.node_count() || model.history_length() != len {
                return Err(EvalError::Incompatible(format!(
                    "{} was trained for {} nodes and history length {}, dataset has {} nodes and history length {len}",
                    path.display(),
                    model.node_count(),
                    model.history_length(),
                    net.node_count()
                )));
            }
            Ok(model)
        })?;
        reports.extend(r);
    }
    write_reports(&reports, out)?;
    print!("{}", render_table(&reports));
    Ok(())
}

fn write_reports(reports: &[AttackReport], out: &Path) -> Result<(), CliError> {
    let other = |e: EvalError| CliError::Other(e.to_string());
    let mut w = create(&out.join("report.json"))?;
    write_json(reports, &mut w).map_err(other)?;
    w.flush()?;
    let mut w = create(&out.join("summary.csv"))?;
    write_summary_csv(reports, &mut w).map_err(other)?;
    for r in reports {
        let name = format!(
            "flips-{}-{}-n{}-h{}{}.csv",
            r.method,
            r.strategy,
            r.history_length,
            r.horizon,
            if r.add_only { "-add-only" } else { "" }
        );
        let mut w = create(&out.join("flips").join(name))?;
        write_flips_csv(r, &mut w).map_err(other)?;
    }
    Ok(())
}

/// Comparison table of one or more report files.
pub fn report(files: &[PathBuf], out: &Path) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Report("no report files given".into()));
    }
    let mut reports = Vec::new();
    for f in files {
        let bytes = fs::read(f).map_err(|e| CliError::Report(format!("cannot read {}: {e}", f.display())))?;
        let r = read_json(&bytes).map_err(|e| CliError::Report(format!("{}: {e}", f.display())))?;
        reports.extend(r);
    }
    if reports.is_empty() {
        return Err(CliError::Report("report files contain no reports".into()));
    }
    let table = render_table(&reports);
    let mut w = create(&out.join("table.txt"))?;
    w.write_all(table.as_bytes())?;
    w.flush()?;
    let report_err = |e: EvalError| CliError::Report(e.to_string());
    let mut w = create(&out.join("comparison.csv"))?;
    write_summary_csv(&reports, &mut w).map_err(report_err)?;
    let budgets: BTreeSet<usize> = reports.iter().map(|r| r.budget).collect();
    if budgets.len() > 1 {
        let mut w = create(&out.join("runtime.csv"))?;
        write_runtime_csv(&reports, &mut w).map_err(report_err)?;
    }
    print!("{table}");
    Ok(())
}
