use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use relu_align::analysis::{
    alignment_curves, directional_error, phase_diagnostics, stable_rank, summarize, write_series_csv, SummaryOptions,
    SummaryReport,
};
use relu_align::data::{angle_pair, center, compute_stats, generate_separable, load_idx, DataStats};
use relu_align::flow::{integrate, reference_integrate, write_ndjson, FlowAbort, Mode};
use relu_align::geometry::{estimate_margins, Margins};
use relu_align::model::{gaussian_shape, init_balanced, init_gaussian, LossKind};
use relu_align::{Dataset64, NetworkState64, TheoryBounds64, TrajectoryRecord64};
use serde::Serialize;

use crate::config::{DatasetKind, EpsRule, InitKind, RunConfig};

pub fn load_dataset(cfg: &RunConfig) -> Result<(Dataset64, String)> {
    let (ds, name) = match cfg.dataset {
        DatasetKind::Synthetic => (
            generate_separable(cfg.dim, cfg.n_plus, cfg.n_minus, cfg.target_mu, cfg.data_seed)?,
            format!(
                "synthetic:D={},n+={},n-={},mu>={},seed={}",
                cfg.dim, cfg.n_plus, cfg.n_minus, cfg.target_mu, cfg.data_seed
            ),
        ),
        DatasetKind::AnglePair => (angle_pair(cfg.theta)?, format!("angle_pair:theta={}", cfg.theta)),
        DatasetKind::Idx => {
            let (img, lab) = (cfg.idx_images.as_ref().expect("validated"), cfg.idx_labels.as_ref().expect("validated"));
            let ds = load_idx(img, lab, cfg.digit_pos, cfg.digit_neg, cfg.max_per_class)
                .with_context(|| format!("loading IDX files {} / {}", img.display(), lab.display()))?;
            (ds, format!("idx:{}vs{},max={}", cfg.digit_pos, cfg.digit_neg, cfg.max_per_class))
        }
        DatasetKind::File => {
            let p = cfg.dataset_file.as_ref().expect("validated");
            let ds = Dataset64::load_json(p).with_context(|| format!("loading dataset {}", p.display()))?;
            (ds, format!("file:{}", p.display()))
        }
        DatasetKind::Inline => (Dataset64::new(cfg.points.clone())?, "inline".to_string()),
    };
    if cfg.center {
        Ok((center(&ds)?, format!("{name},centered")))
    } else {
        Ok((ds, name))
    }
}

/// Dataset, initial state and (when the data allow it) margins and bounds.
pub struct Prepared {
    pub ds: Dataset64,
    pub dataset_ref: String,
    pub stats: DataStats<f64>,
    pub init: Option<NetworkState64>,
    pub margins: Option<Margins<f64>>,
    pub bounds: Option<TheoryBounds64>,
    pub witnesses: Vec<String>,
}

impl Prepared {
    pub fn compliant(&self) -> bool {
        self.witnesses.is_empty()
    }
}

fn mu_witness(stats: &DataStats<f64>) -> String {
    let mut best = (0, 0);
    for (i, row) in stats.correlation_matrix.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c == stats.mu {
                best = (i, j);
            }
        }
    }
    format!("separability fails: μ={} attained by points {} and {}", stats.mu, best.0, best.1)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let (ds, dataset_ref) = load_dataset(cfg)?;
    let stats = compute_stats(&ds)?;
    let mut p = Prepared { ds, dataset_ref, stats, init: None, margins: None, bounds: None, witnesses: Vec::new() };
    let (dim, h) = (p.ds.dim(), cfg.h);

    let mut init = match cfg.init {
        InitKind::Gaussian => init_gaussian(dim, h, cfg.alpha_init, cfg.seed)?,
        InitKind::Balanced => {
            let (w0, signs) = gaussian_shape(dim, h, cfg.seed);
            let eps = match cfg.eps_rule {
                EpsRule::Fixed => cfg.eps,
                EpsRule::Threshold => {
                    if p.stats.mu <= 0.0 {
                        bail!("eps_rule \"threshold\" needs μ > 0; {}", mu_witness(&p.stats));
                    }
                    let unit = init_balanced(w0.clone(), 1.0, signs.clone())?;
                    let m = estimate_margins(&p.ds, &unit, cfg.margin_samples, cfg.seed)?;
                    let b = relu_align::theory::bounds_from(&p.ds, &unit, &m)?;
                    let eps = cfg.eps_factor * b.ln_eps_threshold.exp();
                    if !(eps > 0.0) {
                        bail!("threshold ε = exp({}) underflows f64", b.ln_eps_threshold);
                    }
                    eps
                }
            };
            init_balanced(w0, eps, signs)?
        }
    };
    init.leaky_alpha = cfg.leaky_alpha;

    if p.stats.mu <= 0.0 {
        p.witnesses.push(mu_witness(&p.stats));
        p.init = Some(init);
        return Ok(p);
    }
    match estimate_margins(&p.ds, &init, cfg.margin_samples, cfg.seed) {
        Ok(m) => {
            match relu_align::theory::bounds_from(&p.ds, &init, &m) {
                Ok(b) => {
                    if !b.eps_compliant() {
                        p.witnesses.push(format!(
                            "initialization too large: ln ε = {:.6} > ln eps_threshold = {:.6}",
                            init.eps.ln(),
                            b.ln_eps_threshold
                        ));
                    }
                    p.bounds = Some(b);
                }
                Err(e) => p.witnesses.push(e.to_string()),
            }
            p.margins = Some(m);
        }
        Err(e) => p.witnesses.push(e.to_string()),
    }
    if cfg.init == InitKind::Gaussian {
        p.witnesses.push("initialization is not balanced".into());
    }
    p.init = Some(init);
    Ok(p)
}

pub fn render_check(p: &Prepared) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k:<18} {v}\n"));
    line("dataset", p.dataset_ref.clone());
    line("n / n+ / n-", format!("{} / {} / {}", p.ds.n(), p.ds.n_plus(), p.ds.n_minus()));
    line("D", p.ds.dim().to_string());
    line("mu", format!("{:.12e}", p.stats.mu));
    line("X_max / X_min", format!("{:.6e} / {:.6e}", p.stats.x_max, p.stats.x_min));
    if let Some(m) = &p.margins {
        line("zeta1 / zeta2", format!("{:.6e} / {:.6e}", m.zeta1, m.zeta2));
        line("xi", format!("{:.6e}{}", m.xi, if m.xi_vacuous { " (vacuous)" } else { "" }));
        line("margin method", format!("{:?}, {} samples", m.method, m.sample_count));
    }
    if let Some(b) = &p.bounds {
        line("eps", format!("{:.6e}", b.eps));
        line("eps_threshold", format!("{:.6e} (ln {:.6})", b.eps_threshold, b.ln_eps_threshold));
        line("eps terms", format!("{:.6e}, {:.6e}, {:.6e}", b.eps_terms[0], b.eps_terms[1], b.eps_terms[2]));
        line("W_max / W_min", format!("{:.6e} / {:.6e}", b.w_max, b.w_min));
        line("T_align", format!("{:.6e}", b.t_align));
        line("err_bound", format!("{:.6e}", b.err_bound));
        line("norm_ub", format!("{:.6e}", b.norm_ub));
        line("f_ub", format!("{:.6e}", b.f_ub));
        line("rate c", format!("{:.6e}", b.transition_rate));
        line("t1_bound", format!("{:.6e}", b.t1_bound));
        line("t2_bound", b.t2_bound.map_or("-".into(), |v| format!("{v:.6e}")));
        line("alpha_rate", format!("{:.6e}", b.alpha_rate));
        for d in &b.degenerate {
            line("note", d.clone());
        }
    }
    if p.compliant() {
        line("verdict", "compliant".into());
    } else {
        line("verdict", "non-compliant".into());
        for w in &p.witnesses {
            line("witness", w.clone());
        }
    }
    s
}

/// Integration horizon: the configured one, or t₂ bound + 10/α from the theory.
pub fn horizon(cfg: &RunConfig, p: &Prepared) -> f64 {
    if cfg.mode == Mode::GradientDescent {
        return cfg.step * cfg.iterations as f64;
    }
    if cfg.max_time > 0.0 {
        return cfg.max_time;
    }
    match &p.bounds {
        Some(b) => b.t2_bound.unwrap_or(2.0 * b.t1_bound) + 10.0 / b.alpha_rate,
        None => 100.0,
    }
}

pub struct RunOutcome {
    pub summary: Option<SummaryReport>,
    pub abort: Option<String>,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    t: f64,
    reason: &'a str,
    snapshots_kept: usize,
}

pub fn run(cfg: &RunConfig, p: &Prepared, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out.join("metrics")).with_context(|| format!("creating {}", out.display()))?;
    let init = p.init.as_ref().expect("prepared");
    write_json(&out.join("config.json"), cfg)?;
    p.ds.save_json(&out.join("dataset.json"))?;
    fs::write(out.join("state_initial.json"), init.to_json()?)?;
    if let Some(b) = &p.bounds {
        write_json(&out.join("bounds.json"), b)?;
    }

    let t_end = horizon(cfg, p);
    let result = if cfg.reference {
        reference_integrate(init, &p.ds, cfg.loss, cfg.step, t_end)
    } else {
        integrate(init, &p.ds, cfg.loss, &cfg.integrator(t_end), cfg.snapshot_every)
    };
    let (mut rec, abort) = match result {
        Ok(r) => (r, None),
        Err(FlowAbort { t, reason, record }) => {
            write_json(
                &out.join("error.json"),
                &ErrorRecord { t, reason: &reason, snapshots_kept: record.snapshots.len() },
            )?;
            (record, Some(format!("integration aborted at t={t}: {reason}")))
        }
    };
    rec.dataset_ref = p.dataset_ref.clone();
    rec.bounds = p.bounds.clone();
    write_artifacts(&rec, p, cfg.loss, out)?;

    let summary = match (&abort, rec.bounds.is_some() && !rec.snapshots.is_empty()) {
        (None, true) => {
            let s = summarize(&rec, &p.ds, cfg.loss, &summary_options(cfg))?;
            write_json(&out.join("summary.json"), &s)?;
            Some(s)
        }
        _ => None,
    };
    Ok(RunOutcome { summary, abort })
}

pub fn summary_options(cfg: &RunConfig) -> SummaryOptions {
    SummaryOptions { slack: cfg.slack, reference: cfg.reference, gradient_flow: cfg.mode == Mode::GradientFlow }
}

fn write_json<S: Serialize>(path: &Path, v: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_artifacts(rec: &TrajectoryRecord64, p: &Prepared, lk: LossKind, out: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(out.join("record.json"))?);
    serde_json::to_writer(&mut w, rec)?;
    w.flush()?;
    let mut nd = BufWriter::new(File::create(out.join("trajectory.ndjson"))?);
    write_ndjson(rec, &p.ds, &mut nd)?;
    nd.flush()?;
    if let Some(last) = rec.last() {
        fs::write(out.join("state_final.json"), last.state.to_json()?)?;
    }

    let m = out.join("metrics");
    let tv = ["t", "value"];
    let tvmm = ["t", "value", "min", "max"];
    let series = |f: &dyn Fn(&relu_align::analysis::Snapshot<f64>) -> Option<f64>| -> Vec<Vec<f64>> {
        rec.snapshots.iter().filter_map(|s| f(s).map(|v| vec![s.t(), v])).collect()
    };
    write_series_csv(&m.join("loss.csv"), &tv, &series(&|s| Some(s.loss)))?;
    write_series_csv(&m.join("max_output.csv"), &tv, &series(&|s| Some(s.max_abs_output())))?;
    write_series_csv(
        &m.join("max_norm_sq.csv"),
        &tv,
        &series(&|s| Some((0..s.state.h()).map(|j| s.neuron_norm(j).powi(2)).fold(0.0, f64::max))),
    )?;
    write_series_csv(&m.join("stable_rank.csv"), &tv, &series(&|s| stable_rank(&s.state.w).ok()))?;
    write_series_csv(
        &m.join("directional_error.csv"),
        &tv,
        &series(&|s| directional_error(&s.state, &p.ds, lk).ok()),
    )?;
    let phase = phase_diagnostics(rec, &p.ds, lk);
    write_series_csv(&m.join("phase_norm.csv"), &tv, &phase.iter().map(|q| vec![q.t, q.norm_change]).collect::<Vec<_>>())?;
    write_series_csv(
        &m.join("phase_direction.csv"),
        &tv,
        &phase.iter().map(|q| vec![q.t, q.direction_change]).collect::<Vec<_>>(),
    )?;
    let curves = alignment_curves(rec, &p.ds);
    for (name, side) in [("align_plus.csv", &curves.plus), ("align_minus.csv", &curves.minus)] {
        if let Some(pts) = side {
            let rows: Vec<Vec<f64>> = pts.iter().map(|a| vec![a.t, a.mean, a.min, a.max]).collect();
            write_series_csv(&m.join(name), &tvmm, &rows)?;
        }
    }
    Ok(())
}

/// Recomputes the summary from a run directory's artifacts.
pub fn report(dir: &Path) -> Result<SummaryReport> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let need = ["config.json", "dataset.json", "record.json"];
    let missing: Vec<&str> = need.iter().copied().filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        bail!("{} lacks run artifacts: {}", dir.display(), missing.join(", "));
    }
    let cfg: RunConfig = serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)
        .with_context(|| format!("corrupt {}", dir.join("config.json").display()))?;
    let ds = Dataset64::load_json(&dir.join("dataset.json")).context("corrupt dataset.json")?;
    let rec: TrajectoryRecord64 = serde_json::from_str(&fs::read_to_string(dir.join("record.json"))?)
        .context("corrupt record.json")?;
    if !rec.is_well_formed() {
        bail!("record.json is not a well-formed trajectory");
    }
    if rec.bounds.is_none() {
        bail!("record.json carries no theory bounds (data violate the separability assumption)");
    }
    let s = summarize(&rec, &ds, cfg.loss, &summary_options(&cfg))?;
    write_json(&dir.join("summary.json"), &s)?;
    Ok(s)
}
