use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    activation_audit, arrival_times, frozen_audit, alignment_check, loss_monotonicity_check, low_rank_residual,
    norm_lower_bound_check, norm_monotonicity_check, norm_output_checks, rate_fit_with, spectral_norm_of,
    stable_rank, trapping_audit, CheckOutcome, TrajectoryRecord,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{ConeLabel, MarginMethod};
use crate::linalg::dot;
use crate::model::LossKind;
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub bound: Option<f64>,
    pub measured: Option<f64>,
    pub satisfied: bool,
    pub applicable: bool,
    pub detail: String,
}

impl SummaryRow {
    fn from_check(c: CheckOutcome, applicable: bool) -> Self {
        SummaryRow { bound: c.bound, measured: c.measured, satisfied: c.satisfied, applicable, detail: c.detail }
    }

    fn not_applicable(detail: impl Into<String>) -> Self {
        SummaryRow { bound: None, measured: None, satisfied: false, applicable: false, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema_version: u32,
    pub dataset_ref: String,
    pub compliant: bool,
    pub all_pass: bool,
    pub rows: BTreeMap<String, SummaryRow>,
    pub measurements: BTreeMap<String, Option<f64>>,
}

impl SummaryReport {
    pub fn render_table(&self) -> String {
        let mut s = format!("{:<32} {:>14} {:>14}  {:<6}\n", "check", "bound", "measured", "status");
        let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
        for (name, r) in &self.rows {
            let status = match (r.applicable, r.satisfied) {
                (false, _) => "n/a",
                (true, true) => "pass",
                (true, false) => "FAIL",
            };
            s.push_str(&format!("{:<32} {:>14} {:>14}  {:<6}\n", name, fmt(r.bound), fmt(r.measured), status));
        }
        s.push_str(&format!("overall: {}\n", if self.all_pass { "pass" } else { "FAIL" }));
        s
    }
}

#[derive(Clone, Debug)]
pub struct SummaryOptions {
    pub slack: f64,
    /// Run came from the fine-step reference integrator.
    pub reference: bool,
    pub gradient_flow: bool,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions { slack: 0.05, reference: false, gradient_flow: true }
    }
}

fn count_row(name: &str, n: usize) -> SummaryRow {
    SummaryRow {
        bound: Some(0.0),
        measured: Some(n as f64),
        satisfied: n == 0,
        applicable: true,
        detail: format!("{name}: {n} violations"),
    }
}

/// Evaluates every check on a record that carries theory bounds.
pub fn summarize<T: Scalar>(
    rec: &TrajectoryRecord<T>,
    ds: &Dataset<T>,
    lk: LossKind,
    opts: &SummaryOptions,
) -> Result<SummaryReport> {
    let b = rec
        .bounds
        .as_ref()
        .ok_or_else(|| Error::Precondition("record carries no theory bounds".into()))?;
    let first = rec.first().ok_or_else(|| Error::Precondition("empty record".into()))?;
    let last = rec.last().expect("non-empty");
    let mut rows = BTreeMap::new();
    let mut m = BTreeMap::new();

    let compliant = b.mu > T::zero() && b.eps_compliant();
    rows.insert(
        "compliance".to_string(),
        SummaryRow {
            bound: Some(b.ln_eps_threshold),
            measured: Some(b.eps.as_f64().ln()),
            satisfied: compliant,
            applicable: true,
            detail: format!(
                "log ε vs log eps_threshold; μ={}, ζ={}, ξ={}",
                b.mu,
                b.margins.zeta(),
                b.margins.xi
            ),
        },
    );

    rows.insert("early_alignment_error".into(), SummaryRow::from_check(alignment_check(rec, ds, lk)?, true));
    let (nb, fb) = norm_output_checks(rec, opts.slack)?;
    rows.insert("neuron_norm_bound".into(), SummaryRow::from_check(nb, true));
    rows.insert("output_bound".into(), SummaryRow::from_check(fb, true));

    let arr = arrival_times(rec);
    m.insert("t1_measured".into(), arr.t1_measured.map(Scalar::as_f64));
    m.insert("t1_any_cone".into(), arr.t1_any_cone.map(Scalar::as_f64));
    let certified = b.margins.method == MarginMethod::Exact2d;
    let t1_lim = b.t1_bound + rec.snapshot_every;
    rows.insert(
        "t1_arrival".into(),
        SummaryRow {
            bound: Some(t1_lim.as_f64()),
            measured: arr.t1_measured.map(Scalar::as_f64),
            satisfied: arr.t1_measured.is_some_and(|t| t <= t1_lim),
            applicable: certified,
            detail: if certified {
                "t₁ vs bound plus one snapshot interval".into()
            } else {
                "estimated-bound: margins were sampled".into()
            },
        },
    );

    // V₊ neurons activated by some positive point at t=0 must end in S₊.
    let mut stray = 0;
    for j in first.state.tagged(1) {
        let touches = ds.plus().iter().any(|&i| dot(first.state.w(j), ds.x(i)) > T::zero());
        if !touches {
            continue;
        }
        let bad_dest = arr.per_neuron[j].destination != Some(ConeLabel::SPlus);
        let ever_dead = rec.snapshots.iter().any(|s| s.labels[j] == ConeLabel::SDead);
        if bad_dest || ever_dead {
            stray += 1;
        }
    }
    rows.insert("positive_neurons_reach_s_plus".into(), count_row("V+ neurons with positive activation", stray));
    rows.insert("activation_monotonicity".into(), count_row("forbidden transitions", activation_audit(rec, ds).len()));
    rows.insert("trapping".into(), count_row("cone exits", trapping_audit(rec).len()));
    rows.insert("dead_frozen".into(), count_row("moving dead neurons", frozen_audit(rec).len()));
    rows.insert(
        "sign_preservation".into(),
        SummaryRow {
            bound: None,
            measured: None,
            satisfied: !rec.sign_flip,
            applicable: opts.gradient_flow,
            detail: "sign(v_j) matches its initial tag".into(),
        },
    );

    let fit = rate_fit_with(rec, ds, T::lit(opts.slack), None);
    m.insert("t2_measured".into(), fit.t2_measured.map(Scalar::as_f64));
    rows.insert(
        "loss_rate".into(),
        match fit.t2_measured {
            Some(_) => SummaryRow {
                bound: Some(1.0 + opts.slack),
                measured: Some(fit.worst_ratio.as_f64()),
                satisfied: fit.rate_ok,
                applicable: true,
                detail: format!("L/envelope over {} snapshots up to t={}", fit.checked, fit.window_end.map_or(f64::NAN, Scalar::as_f64)),
            },
            None => SummaryRow::not_applicable("t₂ not reached or a cone is empty at t₁"),
        },
    );

    let sr = stable_rank(&last.state.w).ok();
    let spec = spectral_norm_of(&last.state.w).as_f64();
    let sr_bound = 2.0
        + 4.0 * (b.h as f64).sqrt() * b.eps.as_f64() * b.w_max.as_f64().powi(2) / (spec * spec)
        + opts.slack;
    m.insert("terminal_stable_rank".into(), sr.map(Scalar::as_f64));
    rows.insert(
        "stable_rank".into(),
        SummaryRow {
            bound: Some(sr_bound),
            measured: sr.map(Scalar::as_f64),
            satisfied: sr.is_some_and(|v| v.as_f64() <= sr_bound),
            applicable: fit.t2_measured.is_some(),
            detail: "terminal ‖W‖_F²/‖W‖₂²".into(),
        },
    );

    let lr = low_rank_residual(rec).map(Scalar::as_f64);
    rows.insert(
        "low_rank_residual".into(),
        SummaryRow {
            bound: Some(1e-6),
            measured: lr,
            satisfied: lr.is_some_and(|v| v <= 1e-6),
            applicable: opts.reference && lr.is_some(),
            detail: "conservation of W₊ᵀW₊ − v₊v₊ᵀ after t₁".into(),
        },
    );

    rows.insert(
        "norm_lower_bound_t1".into(),
        match norm_lower_bound_check(rec, opts.slack)? {
            Some(c) => SummaryRow::from_check(c, true),
            None => SummaryRow::not_applicable("no populated cone at t₁"),
        },
    );
    rows.insert(
        "norm_monotonicity".into(),
        match norm_monotonicity_check(rec, 1e-9) {
            Some(c) => SummaryRow::from_check(c, opts.gradient_flow),
            None => SummaryRow::not_applicable("t₁ not reached"),
        },
    );
    rows.insert(
        "loss_monotonicity".into(),
        SummaryRow::from_check(loss_monotonicity_check(rec), opts.gradient_flow),
    );

    let all_pass = rows.values().filter(|r| r.applicable).all(|r| r.satisfied);
    Ok(SummaryReport {
        schema_version: SCHEMA_VERSION,
        dataset_ref: rec.dataset_ref.clone(),
        compliant,
        all_pass,
        rows,
        measurements: m,
    })
}

/// Writes a metric series as CSV with the given header. Values use the
/// shortest round-trip representation, so output is bit-stable.
pub fn write_series_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::DimensionMismatch { expected: header.len(), got: r.len() });
        }
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
