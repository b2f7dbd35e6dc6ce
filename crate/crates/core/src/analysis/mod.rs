//! Measurements over trajectories and the bound checks built on them.

mod record;
mod report;

pub use record::{Snapshot, TrajectoryRecord};
pub use report::{summarize, write_series_csv, SummaryOptions, SummaryReport, SummaryRow, SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::data::{compute_stats, Dataset};
use crate::error::{Error, Result};
use crate::flow::EventKind;
use crate::geometry::{x_a, ConeLabel};
use crate::linalg::{cos, dot, frobenius_sq, norm, norm_sq, project_out, spectral_norm};
use crate::model::{evaluate, sigma, LossKind, NetworkState};
use crate::scalar::Scalar;

const POWER_TOL: f64 = 1e-10;
const POWER_ITERS: usize = 100_000;

/// max_j ‖P_w(ẇ)/‖w‖ − sign_j · P_w x_a(w_j)‖ at one state.
pub fn directional_error<T: Scalar>(s: &NetworkState<T>, ds: &Dataset<T>, lk: LossKind) -> Result<T> {
    let e = evaluate(s, ds, lk);
    let mut worst = T::zero();
    for j in 0..s.h() {
        let w = s.w(j);
        let nw = norm(w);
        if nw <= T::zero() {
            return Err(Error::Degenerate(format!("neuron {j} has zero norm")));
        }
        let wdot: Vec<T> = e.gw[j].iter().map(|&g| -g / nw).collect();
        let actual = project_out(w, &wdot);
        let sgn = if s.sign_tags[j] > 0 { T::one() } else { -T::one() };
        let target = project_out(w, &x_a(w, ds, s.leaky_alpha)?);
        let diff: Vec<T> = actual.iter().zip(&target).map(|(&a, &b)| a - sgn * b).collect();
        worst = worst.max(norm(&diff));
    }
    Ok(worst)
}

/// Sign-aware settling: V₊ neurons settle in S₊ or S_dead, V₋ in S₋ or S_dead.
pub fn settled(tag: i8, label: ConeLabel) -> bool {
    match label {
        ConeLabel::SDead => true,
        ConeLabel::SPlus => tag > 0,
        ConeLabel::SMinus => tag < 0,
        ConeLabel::Other => false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NeuronArrival<T> {
    pub neuron: usize,
    pub time: Option<T>,
    pub destination: Option<ConeLabel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Arrivals<T> {
    /// First snapshot where every neuron is settled (sign-aware).
    pub t1_measured: Option<T>,
    pub t1_index: Option<usize>,
    /// First snapshot where every label is S₊, S₋ or S_dead, regardless of sign.
    pub t1_any_cone: Option<T>,
    pub per_neuron: Vec<NeuronArrival<T>>,
}

pub fn arrival_times<T: Scalar>(rec: &TrajectoryRecord<T>) -> Arrivals<T> {
    let h = rec.h();
    let tags = rec.first().map(|s| s.state.sign_tags.clone()).unwrap_or_default();
    let mut per_neuron: Vec<NeuronArrival<T>> =
        (0..h).map(|j| NeuronArrival { neuron: j, time: None, destination: None }).collect();
    let (mut t1, mut idx, mut any) = (None, None, None);
    for (k, snap) in rec.snapshots.iter().enumerate() {
        let mut all = true;
        for j in 0..h {
            let ok = settled(tags[j], snap.labels[j]);
            if ok && per_neuron[j].time.is_none() {
                per_neuron[j].time = Some(snap.t());
                per_neuron[j].destination = Some(snap.labels[j]);
            }
            all &= ok;
        }
        if all && t1.is_none() {
            t1 = Some(snap.t());
            idx = Some(k);
        }
        if any.is_none() && snap.labels.iter().all(|&l| l != ConeLabel::Other) {
            any = Some(snap.t());
        }
    }
    Arrivals { t1_measured: t1, t1_index: idx, t1_any_cone: any, per_neuron }
}

/// Neurons in the given cone at the t₁ snapshot.
pub fn cone_members<T: Scalar>(rec: &TrajectoryRecord<T>, label: ConeLabel) -> Option<(usize, Vec<usize>)> {
    let k = arrival_times(rec).t1_index?;
    let members = (0..rec.h()).filter(|&j| rec.snapshots[k].labels[j] == label).collect();
    Some((k, members))
}

/// Output of the sub-network `members` on datum i.
fn partial_output<T: Scalar>(s: &NetworkState<T>, members: &[usize], x: &[T]) -> T {
    members
        .iter()
        .fold(T::zero(), |acc, &j| acc + s.v[j] * sigma(dot(s.w(j), x), s.leaky_alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RateFit<T> {
    pub t2_measured: Option<T>,
    pub rate_ok: bool,
    /// max of L(t)/envelope(t) over the checked window.
    pub worst_ratio: T,
    pub checked: usize,
    pub window_end: Option<T>,
}

/// Locates t₂ and checks the hyperbolic loss envelope on [t₂, t₂ + window]
/// (default window 10/α) with relative slack.
pub fn rate_fit_with<T: Scalar>(rec: &TrajectoryRecord<T>, ds: &Dataset<T>, slack: T, window: Option<T>) -> RateFit<T> {
    let none = RateFit { t2_measured: None, rate_ok: false, worst_ratio: T::zero(), checked: 0, window_end: None };
    let Some(bounds) = rec.bounds.as_ref() else { return none };
    let Some((k1, vp)) = cone_members(rec, ConeLabel::SPlus) else { return none };
    let vm = cone_members(rec, ConeLabel::SMinus).map(|c| c.1).unwrap_or_default();
    let classes: Vec<(&[usize], &[usize])> = [(ds.plus(), vp.as_slice()), (ds.minus(), vm.as_slice())]
        .into_iter()
        .filter(|(idx, _)| !idx.is_empty())
        .collect();
    if classes.iter().any(|(_, members)| members.is_empty()) {
        return none;
    }
    let quarter = T::lit(0.25);
    let mut t2_idx = None;
    let mut trig: Vec<Option<usize>> = vec![None; classes.len()];
    for k in k1..rec.snapshots.len() {
        let s = &rec.snapshots[k].state;
        for (c, (idx, members)) in classes.iter().enumerate() {
            if trig[c].is_none() && idx.iter().any(|&i| partial_output(s, members, ds.x(i)).abs() > quarter) {
                trig[c] = Some(k);
            }
        }
        if trig.iter().all(Option::is_some) {
            t2_idx = Some(k);
            break;
        }
    }
    let Some(k2) = t2_idx else { return none };
    let t2 = rec.snapshots[k2].t();
    let l2 = rec.snapshots[k2].loss;
    let window = window.unwrap_or_else(|| T::lit(10.0) / bounds.alpha_rate);
    let end = t2 + window;
    let mut worst = T::zero();
    let mut checked = 0;
    let mut ok = true;
    for snap in &rec.snapshots[k2..] {
        if snap.t() > end {
            break;
        }
        let env = bounds.loss_envelope(l2, snap.t() - t2);
        let ratio = snap.loss / env;
        worst = worst.max(ratio);
        checked += 1;
        ok &= snap.loss <= env * (T::one() + slack);
    }
    RateFit { t2_measured: Some(t2), rate_ok: ok, worst_ratio: worst, checked, window_end: Some(end) }
}

pub fn rate_fit<T: Scalar>(rec: &TrajectoryRecord<T>, ds: &Dataset<T>) -> RateFit<T> {
    rate_fit_with(rec, ds, T::lit(0.05), None)
}

/// ‖W‖_F² / ‖W‖₂².
pub fn stable_rank<T: Scalar>(w: &[Vec<T>]) -> Result<T> {
    let fro = frobenius_sq(w);
    if !(fro > T::zero()) {
        return Err(Error::Degenerate("zero matrix has no stable rank".into()));
    }
    let s = spectral_norm(w, POWER_TOL, POWER_ITERS);
    Ok(fro / (s * s))
}

pub fn spectral_norm_of<T: Scalar>(w: &[Vec<T>]) -> T {
    spectral_norm(w, POWER_TOL, POWER_ITERS)
}

/// ‖W_Vᵀ W_V − v_V v_Vᵀ‖₂ for the neuron subset V.
pub fn gram_gap<T: Scalar>(s: &NetworkState<T>, members: &[usize]) -> T {
    let cols: Vec<Vec<T>> = members
        .iter()
        .map(|&b| members.iter().map(|&a| dot(s.w(a), s.w(b)) - s.v[a] * s.v[b]).collect())
        .collect();
    spectral_norm(&cols, 1e-13, POWER_ITERS)
}

/// max over snapshots after t₁ of |gap(t) − gap(t₁)| for the neurons in
/// `label` at t₁; `None` when that set is empty.
pub fn low_rank_residual_for<T: Scalar>(rec: &TrajectoryRecord<T>, label: ConeLabel) -> Option<T> {
    let (k1, members) = cone_members(rec, label)?;
    if members.is_empty() {
        return None;
    }
    let g0 = gram_gap(&rec.snapshots[k1].state, &members);
    Some(
        rec.snapshots[k1..]
            .iter()
            .map(|s| (gram_gap(&s.state, &members) - g0).abs())
            .fold(T::zero(), T::max),
    )
}

pub fn low_rank_residual<T: Scalar>(rec: &TrajectoryRecord<T>) -> Option<T> {
    low_rank_residual_for(rec, ConeLabel::SPlus)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PhasePoint<T> {
    pub t: T,
    pub norm_change: T,
    pub direction_change: T,
    pub skipped: usize,
}

/// Σ_j 2⟨−∇_{w_j}L, w_j⟩ and Σ_j ‖P_{w_j}(−∇_{w_j}L/‖w_j‖)‖ per snapshot.
pub fn phase_diagnostics<T: Scalar>(rec: &TrajectoryRecord<T>, ds: &Dataset<T>, lk: LossKind) -> Vec<PhasePoint<T>> {
    rec.snapshots
        .iter()
        .map(|snap| {
            let s = &snap.state;
            let e = evaluate(s, ds, lk);
            let (mut nc, mut dc, mut skipped) = (T::zero(), T::zero(), 0);
            for j in 0..s.h() {
                let w = s.w(j);
                let nw = norm(w);
                if nw <= T::zero() {
                    skipped += 1;
                    continue;
                }
                nc += T::lit(2.0) * -dot(&e.gw[j], w);
                let g: Vec<T> = e.gw[j].iter().map(|&x| -x / nw).collect();
                dc += norm(&project_out(w, &g));
            }
            PhasePoint { t: snap.t(), norm_change: nc, direction_change: dc, skipped }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AlignPoint<T> {
    pub t: T,
    pub mean: T,
    pub min: T,
    pub max: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AlignmentCurves<T> {
    /// `None` when the side has no neurons or its class is empty.
    pub plus: Option<Vec<AlignPoint<T>>>,
    pub minus: Option<Vec<AlignPoint<T>>>,
}

/// cos(w̄±, x±) and the min/max of cos(w_j, x±) over V±(t) = {j : sign v_j(t) = ±}.
pub fn alignment_curves<T: Scalar>(rec: &TrajectoryRecord<T>, ds: &Dataset<T>) -> AlignmentCurves<T> {
    let Ok(stats) = compute_stats(ds) else {
        return AlignmentCurves { plus: None, minus: None };
    };
    let side = |sign: T, target: &[T]| -> Option<Vec<AlignPoint<T>>> {
        if norm(target) <= T::zero() {
            return None;
        }
        let mut out = Vec::with_capacity(rec.snapshots.len());
        for snap in &rec.snapshots {
            let s = &snap.state;
            let members: Vec<usize> = (0..s.h()).filter(|&j| s.v[j] * sign > T::zero()).collect();
            if members.is_empty() {
                return None;
            }
            let mut mean = vec![T::zero(); s.dim()];
            let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
            for &j in &members {
                crate::linalg::axpy(T::one() / T::from_usize_lossy(members.len()), s.w(j), &mut mean);
                let c = cos(s.w(j), target);
                lo = lo.min(c);
                hi = hi.max(c);
            }
            out.push(AlignPoint { t: snap.t(), mean: cos(&mean, target), min: lo, max: hi });
        }
        Some(out)
    };
    AlignmentCurves { plus: side(T::one(), &stats.x_plus), minus: side(-T::one(), &stats.x_minus) }
}

/// One measured-vs-bound comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub bound: Option<f64>,
    pub measured: Option<f64>,
    pub satisfied: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(bound: Option<f64>, measured: Option<f64>, satisfied: bool, detail: impl Into<String>) -> Self {
        CheckOutcome { bound, measured, satisfied, detail: detail.into() }
    }
}

fn bounds_of<T: Scalar>(rec: &TrajectoryRecord<T>) -> Result<&crate::theory::TheoryBounds<T>> {
    rec.bounds
        .as_ref()
        .ok_or_else(|| Error::Precondition("record carries no theory bounds".into()))
}

/// directional_error ≤ err_bound at every snapshot with t ≤ T_align.
pub fn alignment_check<T: Scalar>(rec: &TrajectoryRecord<T>, ds: &Dataset<T>, lk: LossKind) -> Result<CheckOutcome> {
    let b = bounds_of(rec)?;
    let (mut worst, mut violations, mut checked) = (0.0f64, 0usize, 0usize);
    let mut defect = 0.0f64;
    for snap in rec.snapshots.iter().filter(|s| s.t() <= b.t_align) {
        let e = directional_error(&snap.state, ds, lk)?;
        checked += 1;
        worst = worst.max(e.as_f64());
        if e > b.err_bound {
            violations += 1;
        }
        for j in 0..snap.state.h() {
            let n2 = crate::linalg::norm_sq(snap.state.w(j));
            if n2 > T::zero() {
                defect = defect.max(((snap.state.v[j] * snap.state.v[j] - n2) / n2).abs().as_f64());
            }
        }
    }
    // The relative balancedness defect left by the integrator puts a floor
    // under the measurable error; it is reported, not subtracted.
    Ok(CheckOutcome::new(
        Some(b.err_bound.as_f64()),
        (checked > 0).then_some(worst),
        violations == 0,
        format!(
            "{violations} violations over {checked} snapshots with t ≤ {}; max relative balancedness defect {defect:.3e}",
            b.t_align
        ),
    ))
}

/// Number of snapshots with t ≤ T_align whose directional error exceeds the bound.
pub fn alignment_violations<T: Scalar>(rec: &TrajectoryRecord<T>, ds: &Dataset<T>, lk: LossKind) -> Result<(usize, f64)> {
    let b = bounds_of(rec)?;
    let mut v = 0;
    let mut ratio = 0.0f64;
    for snap in rec.snapshots.iter().filter(|s| s.t() <= b.t_align) {
        let e = directional_error(&snap.state, ds, lk)?;
        ratio = ratio.max((e / b.err_bound).as_f64());
        if e > b.err_bound {
            v += 1;
        }
    }
    Ok((v, ratio))
}

/// (max_j ‖w_j‖² check, max_i |f(x_i)| check) over t ≤ T_align.
pub fn norm_output_checks<T: Scalar>(rec: &TrajectoryRecord<T>, slack: f64) -> Result<(CheckOutcome, CheckOutcome)> {
    let b = bounds_of(rec)?;
    let (mut wn, mut fo) = (0.0f64, 0.0f64);
    for snap in rec.snapshots.iter().filter(|s| s.t() <= b.t_align) {
        for j in 0..snap.state.h() {
            wn = wn.max(norm_sq(snap.state.w(j)).as_f64());
        }
        fo = fo.max(snap.max_abs_output().as_f64());
    }
    let (nb, fb) = (b.norm_ub.as_f64(), b.f_ub.as_f64());
    Ok((
        CheckOutcome::new(Some(nb), Some(wn), wn <= nb * (1.0 + slack), "max_j ‖w_j‖² for t ≤ T_align"),
        CheckOutcome::new(Some(fb), Some(fo), fo <= fb * (1.0 + slack), "max_i |f(x_i)| for t ≤ T_align"),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AuditViolation<T> {
    pub time: T,
    pub neuron: usize,
    pub detail: String,
}

/// Forbidden activation transitions: a V₊ neuron losing a positive point or
/// gaining a negative one, and the mirror image for V₋. Checked on events
/// and on per-snapshot activation counts.
pub fn activation_audit<T: Scalar>(rec: &TrajectoryRecord<T>, ds: &Dataset<T>) -> Vec<AuditViolation<T>> {
    let Some(first) = rec.first() else { return Vec::new() };
    let tags = &first.state.sign_tags;
    let mut out = Vec::new();
    for e in &rec.events {
        let Some(i) = e.data_index else { continue };
        let same_side = ds.label(i) == tags[e.neuron];
        let bad = matches!(
            (e.kind, same_side),
            (EventKind::LostActivation, true) | (EventKind::GainedActivation, false)
        );
        if bad {
            out.push(AuditViolation {
                time: e.time,
                neuron: e.neuron,
                detail: format!("{:?} on datum {i} (label {})", e.kind, ds.label(i)),
            });
        }
    }
    for w in rec.snapshots.windows(2) {
        for (j, &tag) in tags.iter().enumerate() {
            let (own, other) = if tag > 0 { (ds.plus(), ds.minus()) } else { (ds.minus(), ds.plus()) };
            let count = |s: &Snapshot<T>, idx: &[usize]| idx.iter().filter(|&&i| s.masks[j].contains(i)).count();
            if count(&w[1], own) < count(&w[0], own) || count(&w[1], other) > count(&w[0], other) {
                out.push(AuditViolation {
                    time: w[1].t(),
                    neuron: j,
                    detail: "activation counts moved the wrong way".into(),
                });
            }
        }
    }
    out
}

/// Once a neuron sits in its sign-matched cone (or S_dead) it must stay there.
/// Membership at t = 0 counts as an entry.
pub fn trapping_audit<T: Scalar>(rec: &TrajectoryRecord<T>) -> Vec<AuditViolation<T>> {
    let mut out = Vec::new();
    let h = rec.h();
    for j in 0..h {
        let tag = rec.snapshots[0].state.sign_tags[j];
        let mut trapped: Option<ConeLabel> = None;
        for snap in &rec.snapshots {
            let l = snap.labels[j];
            match trapped {
                Some(t) if t != l => {
                    out.push(AuditViolation {
                        time: snap.t(),
                        neuron: j,
                        detail: format!("left {} for {}", t.as_str(), l.as_str()),
                    });
                    trapped = Some(l).filter(|&l| settled(tag, l));
                }
                Some(_) => {}
                None => {
                    if settled(tag, l) {
                        trapped = Some(l);
                    }
                }
            }
        }
    }
    out
}

/// Neurons frozen by the regular-solution rule (or announced dead) must be
/// bitwise constant in every later snapshot.
pub fn frozen_audit<T: Scalar>(rec: &TrajectoryRecord<T>) -> Vec<AuditViolation<T>> {
    let mut out = Vec::new();
    for j in 0..rec.h() {
        let dead_event = rec
            .events
            .iter()
            .filter(|e| e.neuron == j && e.kind == EventKind::EnteredSDead)
            .map(|e| e.time)
            .next();
        let start = match (rec.frozen_at[j], dead_event) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let Some(t0) = start else { continue };
        let mut reference: Option<(&[T], T)> = None;
        for snap in rec.snapshots.iter().filter(|s| s.t() >= t0) {
            let cur = (snap.state.w(j), snap.state.v[j]);
            match reference {
                None => reference = Some(cur),
                Some((w, v)) => {
                    let same = w.iter().zip(cur.0).all(|(a, b)| a.to_bits_eq(*b)) && v.to_bits_eq(cur.1);
                    if !same {
                        out.push(AuditViolation { time: snap.t(), neuron: j, detail: "dead neuron moved".into() });
                        break;
                    }
                }
            }
        }
    }
    out
}

trait BitsEq {
    fn to_bits_eq(self, other: Self) -> bool;
}

impl<T: Scalar> BitsEq for T {
    fn to_bits_eq(self, other: Self) -> bool {
        // Same value and same sign of zero.
        self == other && self.is_sign_negative() == other.is_sign_negative()
    }
}

/// Σ_{Ṽ}‖w_j(t₁)‖² ≥ exp(−4nX_max t₁)·Σ_{Ṽ}‖w_j(0)‖² for the S₊ and S₋ members at t₁.
pub fn norm_lower_bound_check<T: Scalar>(rec: &TrajectoryRecord<T>, slack: f64) -> Result<Option<CheckOutcome>> {
    let b = bounds_of(rec)?;
    let Some(k1) = arrival_times(rec).t1_index else { return Ok(None) };
    let snap = &rec.snapshots[k1];
    let t1 = snap.t().as_f64();
    let mut worst_ratio = f64::INFINITY;
    let mut any = false;
    for label in [ConeLabel::SPlus, ConeLabel::SMinus] {
        let members: Vec<usize> = (0..rec.h()).filter(|&j| snap.labels[j] == label).collect();
        if members.is_empty() {
            continue;
        }
        any = true;
        let now: f64 = members.iter().map(|&j| norm_sq(snap.state.w(j)).as_f64()).sum();
        let init: f64 = members.iter().map(|&j| norm_sq(rec.snapshots[0].state.w(j)).as_f64()).sum();
        // Compare in log space: both sides may sit far below f64 range.
        let ln_lb = -4.0 * b.n as f64 * b.x_max.as_f64() * t1 + init.ln();
        worst_ratio = worst_ratio.min((now.ln() - ln_lb).exp());
    }
    if !any {
        return Ok(None);
    }
    Ok(Some(CheckOutcome::new(
        Some(1.0),
        Some(worst_ratio),
        worst_ratio >= 1.0 - slack,
        "ratio of Σ‖w_j(t₁)‖² to its lower bound",
    )))
}

/// Σ_{Ṽ±}‖w_j‖² nondecreasing after the last cone-entry event, relative tolerance `tol`.
pub fn norm_monotonicity_check<T: Scalar>(rec: &TrajectoryRecord<T>, tol: f64) -> Option<CheckOutcome> {
    let k1 = arrival_times(rec).t1_index?;
    let last_entry = rec
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::EnteredSPlus | EventKind::EnteredSMinus))
        .map(|e| e.time)
        .fold(rec.snapshots[k1].t(), T::max);
    let snap1 = &rec.snapshots[k1];
    let mut worst_drop = 0.0f64;
    for label in [ConeLabel::SPlus, ConeLabel::SMinus] {
        let members: Vec<usize> = (0..rec.h()).filter(|&j| snap1.labels[j] == label).collect();
        if members.is_empty() {
            continue;
        }
        let mut prev: Option<f64> = None;
        for snap in rec.snapshots.iter().filter(|s| s.t() >= last_entry) {
            let s: f64 = members.iter().map(|&j| norm_sq(snap.state.w(j)).as_f64()).sum();
            if let Some(p) = prev {
                if s < p {
                    worst_drop = worst_drop.max((p - s) / p);
                }
            }
            prev = Some(s);
        }
    }
    Some(CheckOutcome::new(Some(tol), Some(worst_drop), worst_drop <= tol, "largest relative drop of Σ‖w_j‖²"))
}

/// Loss nonincreasing between snapshots up to 1e−8·(1+L).
pub fn loss_monotonicity_check<T: Scalar>(rec: &TrajectoryRecord<T>) -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for w in rec.snapshots.windows(2) {
        let (a, b) = (w[0].loss.as_f64(), w[1].loss.as_f64());
        worst = worst.max(b - a);
        ok &= b <= a + 1e-8 * (1.0 + a);
    }
    CheckOutcome::new(Some(0.0), Some(worst), ok, "largest loss increase between snapshots")
}
