use std::path::PathBuf;
use std::sync::Mutex;

use anyhow::{bail, Result};
use relu_align::analysis::arrival_times;

use crate::config::{DatasetKind, RunConfig};
use crate::pipeline;

struct Job {
    theta: Option<f64>,
    seed: u64,
    cfg: RunConfig,
}

#[derive(Clone, Debug)]
struct Row {
    theta: Option<f64>,
    seed: u64,
    mu: f64,
    compliant: bool,
    t1_measured: Option<f64>,
    t1_bound: Option<f64>,
    all_pass: Option<bool>,
    aborted: bool,
    dir: String,
}

fn jobs(cfg: &RunConfig) -> Result<Vec<Job>> {
    let seeds = if cfg.sweep_seeds.is_empty() { vec![cfg.seed] } else { cfg.sweep_seeds.clone() };
    let thetas: Vec<Option<f64>> = if cfg.sweep_theta.is_empty() {
        vec![None]
    } else {
        if cfg.dataset != DatasetKind::AnglePair {
            bail!("sweep_theta requires dataset \"angle_pair\"");
        }
        cfg.sweep_theta.iter().copied().map(Some).collect()
    };
    let mut out = Vec::new();
    for (k, &theta) in thetas.iter().enumerate() {
        for &seed in &seeds {
            let mut c = cfg.clone();
            c.seed = seed;
            if let Some(t) = theta {
                c.theta = t;
            }
            c.out = cfg.out.join(match theta {
                Some(_) => format!("theta{k}_seed{seed}"),
                None => format!("seed{seed}"),
            });
            c.sweep_seeds.clear();
            c.sweep_theta.clear();
            c.validate()?;
            out.push(Job { theta, seed, cfg: c });
        }
    }
    Ok(out)
}

fn run_one(job: &Job, force: bool) -> Result<Row> {
    let p = pipeline::prepare(&job.cfg)?;
    let mut row = Row {
        theta: job.theta,
        seed: job.seed,
        mu: p.stats.mu,
        compliant: p.compliant(),
        t1_measured: None,
        t1_bound: p.bounds.as_ref().map(|b| b.t1_bound),
        all_pass: None,
        aborted: false,
        dir: job.cfg.out.display().to_string(),
    };
    if !row.compliant && !force {
        return Ok(row);
    }
    let outcome = pipeline::run(&job.cfg, &p, &job.cfg.out)?;
    row.aborted = outcome.abort.is_some();
    row.all_pass = outcome.summary.as_ref().map(|s| s.all_pass);
    let rec: relu_align::TrajectoryRecord64 =
        serde_json::from_str(&std::fs::read_to_string(job.cfg.out.join("record.json"))?)?;
    row.t1_measured = arrival_times(&rec).t1_measured;
    Ok(row)
}

/// Runs every (θ, seed) pair, each in its own directory, and writes sweep.csv.
pub fn sweep(cfg: &RunConfig, force: bool) -> Result<u8> {
    let jobs = jobs(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    let threads = match cfg.sweep_threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len())
    .max(1);
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<Row>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = {
                    let mut n = next.lock().expect("poisoned");
                    let k = *n;
                    *n += 1;
                    k
                };
                let Some(job) = jobs.get(k) else { break };
                let r = run_one(job, force);
                results.lock().expect("poisoned")[k] = Some(r);
            });
        }
    });
    let mut rows = Vec::new();
    for r in results.into_inner().expect("poisoned") {
        rows.push(r.expect("every job ran")?);
    }

    let path: PathBuf = cfg.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["theta", "seed", "mu", "compliant", "t1_measured", "t1_bound", "all_pass", "aborted"])?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in &rows {
        w.write_record([
            opt(r.theta),
            r.seed.to_string(),
            r.mu.to_string(),
            r.compliant.to_string(),
            opt(r.t1_measured),
            opt(r.t1_bound),
            r.all_pass.map_or(String::new(), |b| b.to_string()),
            r.aborted.to_string(),
        ])?;
    }
    w.flush()?;

    let skipped = rows.iter().filter(|r| !r.compliant && !force).count();
    for r in &rows {
        println!(
            "{:<28} mu={:<12.6e} t1={:<12} {}",
            r.dir,
            r.mu,
            opt(r.t1_measured),
            if !r.compliant && !force { "skipped (non-compliant)" } else if r.aborted { "aborted" } else { "done" }
        );
    }
    println!("sweep table: {}", path.display());
    if skipped > 0 {
        eprintln!("{skipped} non-compliant runs skipped; pass --force to run them");
        return Ok(2);
    }
    Ok(if rows.iter().any(|r| r.aborted) { 1 } else { 0 })
}
