//! Gradient-flow integration with activation-event localization and the
//! regular-solution freeze rule, plus a plain gradient-descent mode.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{Snapshot, TrajectoryRecord};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{activation_mask, membership_from_mask, ActivationPattern, ConeLabel};
use crate::model::{evaluate, Evaluation, LossKind, NetworkState};
use crate::scalar::Scalar;

/// Largest −yŷ tolerated with the exponential loss.
pub const EXP_GUARD: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    GradientFlow,
    GradientDescent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IntegratorConfig<T> {
    pub method: Method,
    pub step: T,
    pub max_time: T,
    pub event_tolerance: T,
    pub freeze_dead: bool,
    pub mode: Mode,
    pub gd_step: T,
    pub max_bisections: usize,
}

impl<T: Scalar> IntegratorConfig<T> {
    /// RK4 gradient flow with event refinement and the freeze rule on.
    pub fn rk4(step: T, max_time: T) -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            step,
            max_time,
            event_tolerance: T::lit(1e-9),
            freeze_dead: true,
            mode: Mode::GradientFlow,
            gd_step: step,
            max_bisections: 80,
        }
    }

    /// Gradient descent with learning rate `eta` for `iterations` steps.
    pub fn gradient_descent(eta: T, iterations: usize) -> Self {
        IntegratorConfig {
            method: Method::Euler,
            step: eta,
            max_time: eta * T::from_usize_lossy(iterations),
            event_tolerance: T::zero(),
            freeze_dead: false,
            mode: Mode::GradientDescent,
            gd_step: eta,
            max_bisections: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x.is_finite();
        if !(self.step > T::zero()) || !ok(self.step) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.max_time >= T::zero()) || !ok(self.max_time) {
            return Err(Error::Config(format!("max_time must be non-negative, got {}", self.max_time)));
        }
        if !(self.event_tolerance >= T::zero()) {
            return Err(Error::Config("event_tolerance must be non-negative".into()));
        }
        if self.mode == Mode::GradientDescent && !(self.gd_step > T::zero()) {
            return Err(Error::Config("gd_step must be positive in gradient-descent mode".into()));
        }
        Ok(())
    }

    fn dt(&self) -> T {
        match self.mode {
            Mode::GradientFlow => self.step,
            Mode::GradientDescent => self.gd_step,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    GainedActivation,
    LostActivation,
    EnteredSPlus,
    EnteredSMinus,
    EnteredSDead,
    SignFlipDetected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FlowEvent<T> {
    pub time: T,
    pub neuron: usize,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_index: Option<usize>,
}

/// Integration stopped early; `record` holds everything up to the last valid state.
#[derive(Debug)]
pub struct FlowAbort<T: Scalar> {
    pub t: T,
    pub reason: String,
    pub record: TrajectoryRecord<T>,
}

impl<T: Scalar> fmt::Display for FlowAbort<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "integration aborted at t={}: {}", self.t, self.reason)
    }
}

impl<T: Scalar> std::error::Error for FlowAbort<T> {}

impl<T: Scalar> From<FlowAbort<T>> for Error {
    fn from(a: FlowAbort<T>) -> Self {
        Error::IntegrationAborted { t: a.t.as_f64(), reason: a.reason }
    }
}

type Masks = Vec<Vec<bool>>;

struct Stepper<'a, T: Scalar> {
    ds: &'a Dataset<T>,
    lk: LossKind,
    cfg: &'a IntegratorConfig<T>,
    frozen: Vec<bool>,
}

impl<T: Scalar> Stepper<'_, T> {
    fn masks(&self, s: &NetworkState<T>) -> Masks {
        s.w.iter().map(|w| activation_mask(w, self.ds)).collect()
    }

    /// s + dt·(−gW, −gv) with frozen neurons untouched.
    fn shifted(&self, s: &NetworkState<T>, dt: T, gw: &[Vec<T>], gv: &[T]) -> NetworkState<T> {
        let mut out = s.clone();
        for j in 0..s.h() {
            if self.frozen[j] {
                continue;
            }
            for (o, &g) in out.w[j].iter_mut().zip(&gw[j]) {
                *o -= dt * g;
            }
            out.v[j] -= dt * gv[j];
        }
        out
    }

    fn advance(&self, s: &NetworkState<T>, e0: &Evaluation<T>, dt: T) -> NetworkState<T> {
        let mut next = match self.cfg.method {
            Method::Euler => self.shifted(s, dt, &e0.gw, &e0.gv),
            Method::Rk4 => {
                let half = dt / T::lit(2.0);
                let k1 = (&e0.gw, &e0.gv);
                let s2 = self.shifted(s, half, k1.0, k1.1);
                let e2 = evaluate(&s2, self.ds, self.lk);
                let s3 = self.shifted(s, half, &e2.gw, &e2.gv);
                let e3 = evaluate(&s3, self.ds, self.lk);
                let s4 = self.shifted(s, dt, &e3.gw, &e3.gv);
                let e4 = evaluate(&s4, self.ds, self.lk);
                let two = T::lit(2.0);
                let six = T::lit(6.0);
                let gw: Vec<Vec<T>> = (0..s.h())
                    .map(|j| {
                        (0..s.dim())
                            .map(|r| (k1.0[j][r] + two * e2.gw[j][r] + two * e3.gw[j][r] + e4.gw[j][r]) / six)
                            .collect()
                    })
                    .collect();
                let gv: Vec<T> = (0..s.h())
                    .map(|j| (k1.1[j] + two * e2.gv[j] + two * e3.gv[j] + e4.gv[j]) / six)
                    .collect();
                self.shifted(s, dt, &gw, &gv)
            }
        };
        next.t = s.t + dt;
        next
    }

    fn flipped(&self, a: &Masks, b: &Masks) -> bool {
        (0..a.len()).any(|j| !self.frozen[j] && a[j] != b[j])
    }

    /// True when every pair that flipped between `a` and `cand` sits within
    /// the tolerance band of its hyperplane at `cand`.
    fn localized(&self, a: &Masks, cand: &NetworkState<T>, b: &Masks) -> bool {
        for j in 0..a.len() {
            if self.frozen[j] || a[j] == b[j] {
                continue;
            }
            let wn = crate::linalg::norm(cand.w(j));
            for i in 0..self.ds.n() {
                if a[j][i] != b[j][i] {
                    let ip = crate::linalg::dot(cand.w(j), self.ds.x(i)).abs();
                    if ip > self.cfg.event_tolerance * self.ds.norm(i) * wn {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn guard(&self, s: &NetworkState<T>, e: &Evaluation<T>) -> Option<String> {
        if self.lk == LossKind::Exponential {
            let worst = (0..self.ds.n())
                .map(|i| -self.ds.y(i) * e.outputs[i])
                .fold(T::neg_infinity(), T::max);
            if worst > T::lit(EXP_GUARD) {
                return Some(format!("exponential-loss exponent {worst} exceeds {EXP_GUARD}"));
            }
        }
        let finite = e.loss.is_finite()
            && s.v.iter().all(|x| x.is_finite())
            && s.w.iter().flatten().all(|x| x.is_finite());
        if !finite {
            return Some("non-finite state or loss".into());
        }
        None
    }

    fn grad_is_zero(e: &Evaluation<T>, j: usize) -> bool {
        e.gv[j] == T::zero() && e.gw[j].iter().all(|&g| g == T::zero())
    }
}

fn snapshot<T: Scalar>(s: &NetworkState<T>, masks: &Masks, ds: &Dataset<T>, e: &Evaluation<T>) -> Snapshot<T> {
    Snapshot {
        state: s.clone(),
        labels: masks.iter().map(|m| membership_from_mask(m, ds).label).collect(),
        masks: masks.iter().map(|m| ActivationPattern::from_mask(m)).collect(),
        loss: e.loss,
        outputs: e.outputs.clone(),
    }
}

fn entered(label: ConeLabel) -> Option<EventKind> {
    match label {
        ConeLabel::SPlus => Some(EventKind::EnteredSPlus),
        ConeLabel::SMinus => Some(EventKind::EnteredSMinus),
        ConeLabel::SDead => Some(EventKind::EnteredSDead),
        ConeLabel::Other => None,
    }
}

/// Integrates from `s0` until `cfg.max_time`, recording a snapshot every
/// `snapshot_every` time units and at every event.
pub fn integrate<T: Scalar>(
    s0: &NetworkState<T>,
    ds: &Dataset<T>,
    lk: LossKind,
    cfg: &IntegratorConfig<T>,
    snapshot_every: T,
) -> std::result::Result<TrajectoryRecord<T>, FlowAbort<T>> {
    let empty = TrajectoryRecord {
        snapshots: Vec::new(),
        events: Vec::new(),
        dataset_ref: String::new(),
        bounds: None,
        frozen_at: vec![None; s0.h()],
        sign_flip: false,
        snapshot_every,
    };
    let abort = |t: T, reason: String, record: TrajectoryRecord<T>| FlowAbort { t, reason, record };
    if let Err(e) = cfg.validate() {
        return Err(abort(s0.t, e.to_string(), empty));
    }
    if s0.dim() != ds.dim() {
        return Err(abort(s0.t, format!("state dimension {} vs data {}", s0.dim(), ds.dim()), empty));
    }
    if !(snapshot_every > T::zero()) {
        return Err(abort(s0.t, "snapshot_every must be positive".into(), empty));
    }

    let mut stepper = Stepper { ds, lk, cfg, frozen: vec![false; s0.h()] };
    let mut rec = empty;
    let mut state = s0.clone();
    let mut eval = evaluate(&state, ds, lk);
    if let Some(reason) = stepper.guard(&state, &eval) {
        return Err(abort(state.t, reason, rec));
    }
    let mut masks = stepper.masks(&state);
    let mut labels: Vec<ConeLabel> = masks.iter().map(|m| membership_from_mask(m, ds).label).collect();
    let mut flip_flagged = vec![false; s0.h()];
    if cfg.freeze_dead {
        for j in 0..s0.h() {
            if labels[j] == ConeLabel::SDead && Stepper::grad_is_zero(&eval, j) {
                stepper.frozen[j] = true;
                rec.frozen_at[j] = Some(state.t);
            }
        }
    }
    rec.snapshots.push(snapshot(&state, &masks, ds, &eval));

    let end = s0.t + cfg.max_time;
    let tiny = cfg.dt() * T::lit(1e-9);
    let mut next_snap = s0.t + snapshot_every;
    while end - state.t > tiny {
        if stepper.frozen.iter().all(|&f| f) {
            // Nothing moves: jump to the end.
            let mut last = state.clone();
            last.t = end;
            let e = evaluate(&last, ds, lk);
            rec.snapshots.push(snapshot(&last, &masks, ds, &e));
            return Ok(rec);
        }
        let dt = cfg.dt().min(end - state.t);
        let mut cand = stepper.advance(&state, &eval, dt);
        let mut cand_masks = stepper.masks(&cand);
        if cfg.mode == Mode::GradientFlow && stepper.flipped(&masks, &cand_masks) {
            let (mut lo, mut hi) = (T::zero(), dt);
            for _ in 0..cfg.max_bisections {
                if stepper.localized(&masks, &cand, &cand_masks) {
                    break;
                }
                let mid = (lo + hi) / T::lit(2.0);
                if !(mid > lo && mid < hi) {
                    break;
                }
                let m_state = stepper.advance(&state, &eval, mid);
                let m_masks = stepper.masks(&m_state);
                if stepper.flipped(&masks, &m_masks) {
                    hi = mid;
                    cand = m_state;
                    cand_masks = m_masks;
                } else {
                    lo = mid;
                }
            }
        }
        let cand_eval = evaluate(&cand, ds, lk);
        if let Some(reason) = stepper.guard(&cand, &cand_eval) {
            if rec.last().is_none_or(|s| s.t() < state.t) {
                rec.snapshots.push(snapshot(&state, &masks, ds, &eval));
            }
            return Err(abort(cand.t, reason, rec));
        }

        let t = cand.t;
        let mut emitted = false;
        for j in 0..cand.h() {
            if stepper.frozen[j] {
                continue;
            }
            if masks[j] != cand_masks[j] {
                for i in 0..ds.n() {
                    if masks[j][i] != cand_masks[j][i] {
                        let kind = if cand_masks[j][i] {
                            EventKind::GainedActivation
                        } else {
                            EventKind::LostActivation
                        };
                        rec.events.push(FlowEvent { time: t, neuron: j, kind, data_index: Some(i) });
                    }
                }
                let new_label = membership_from_mask(&cand_masks[j], ds).label;
                if new_label != labels[j] {
                    if let Some(kind) = entered(new_label) {
                        rec.events.push(FlowEvent { time: t, neuron: j, kind, data_index: None });
                    }
                    labels[j] = new_label;
                }
                emitted = true;
            }
            if cfg.freeze_dead && labels[j] == ConeLabel::SDead && Stepper::grad_is_zero(&cand_eval, j) {
                stepper.frozen[j] = true;
                rec.frozen_at[j] = Some(t);
            }
            let v = cand.v[j];
            if !flip_flagged[j] && v != T::zero() && (v > T::zero()) != (cand.sign_tags[j] > 0) {
                flip_flagged[j] = true;
                rec.sign_flip = true;
                rec.events.push(FlowEvent { time: t, neuron: j, kind: EventKind::SignFlipDetected, data_index: None });
                emitted = true;
            }
        }
        state = cand;
        eval = cand_eval;
        masks = cand_masks;
        let due = state.t >= next_snap - tiny;
        if due {
            while next_snap <= state.t + tiny {
                next_snap += snapshot_every;
            }
        }
        if emitted || due || end - state.t <= tiny {
            rec.snapshots.push(snapshot(&state, &masks, ds, &eval));
        }
    }
    if rec.last().is_none_or(|s| s.t() < state.t) {
        rec.snapshots.push(snapshot(&state, &masks, ds, &eval));
    }
    Ok(rec)
}

/// RK4 at `fine_step` with a snapshot after every step.
pub fn reference_integrate<T: Scalar>(
    s0: &NetworkState<T>,
    ds: &Dataset<T>,
    lk: LossKind,
    fine_step: T,
    max_time: T,
) -> std::result::Result<TrajectoryRecord<T>, FlowAbort<T>> {
    let cfg = IntegratorConfig::rk4(fine_step, max_time);
    integrate(s0, ds, lk, &cfg, fine_step)
}

#[derive(Serialize)]
struct NeuronLine<'a> {
    j: usize,
    norm: f64,
    v: f64,
    label: &'a str,
    active_pos: usize,
    active_neg: usize,
}

#[derive(Serialize)]
struct StreamLine<'a, T: Scalar> {
    t: f64,
    loss: f64,
    neurons: Vec<NeuronLine<'a>>,
    events: Vec<&'a FlowEvent<T>>,
}

/// Writes one JSON line per snapshot with the events since the previous one.
pub fn write_ndjson<T: Scalar, W: Write>(rec: &TrajectoryRecord<T>, ds: &Dataset<T>, mut out: W) -> Result<()> {
    let mut ev = rec.events.iter().peekable();
    for snap in &rec.snapshots {
        let mut events = Vec::new();
        while let Some(e) = ev.next_if(|e| e.time <= snap.t()) {
            events.push(e);
        }
        let neurons = (0..snap.state.h())
            .map(|j| {
                let m = membership_from_mask(
                    &(0..ds.n()).map(|i| snap.masks[j].contains(i)).collect::<Vec<_>>(),
                    ds,
                );
                NeuronLine {
                    j,
                    norm: snap.neuron_norm(j).as_f64(),
                    v: snap.state.v[j].as_f64(),
                    label: snap.labels[j].as_str(),
                    active_pos: m.activated_pos,
                    active_neg: m.activated_neg,
                }
            })
            .collect();
        let line = StreamLine { t: snap.t().as_f64(), loss: snap.loss.as_f64(), neurons, events };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_balanced;

    fn toy() -> Dataset<f64> {
        Dataset::from_arrays(vec![vec![1.0, 0.3], vec![-0.6, 1.0]], vec![1, -1]).unwrap()
    }

    #[test]
    fn dead_neuron_stays_put() {
        let ds = Dataset::from_arrays(vec![vec![1.0, 0.0]], vec![1]).unwrap();
        let s0 = init_balanced(vec![vec![-1.0, 0.2]], 1e-3, vec![1]).unwrap();
        let rec = integrate(&s0, &ds, LossKind::Exponential, &IntegratorConfig::rk4(0.01, 1.0), 0.1).unwrap();
        assert!(rec.events.is_empty());
        for s in &rec.snapshots {
            assert_eq!(s.state.w, s0.w);
            assert_eq!(s.state.v, s0.v);
        }
        assert_eq!(rec.frozen_at[0], Some(0.0));
    }

    #[test]
    fn mixed_neuron_drops_negative_first() {
        // Neuron activates both points; as a V+ neuron it must drop x₂ and
        // settle in S₊ without ever regaining x₂.
        let ds = toy();
        let s0 = init_balanced(vec![vec![0.7, 0.7]], 1e-8, vec![1]).unwrap();
        let rec = integrate(&s0, &ds, LossKind::Exponential, &IntegratorConfig::rk4(0.01, 5.0), 0.05).unwrap();
        let kinds: Vec<_> = rec.events.iter().map(|e| (e.kind, e.data_index)).collect();
        let lost = kinds.iter().position(|k| *k == (EventKind::LostActivation, Some(1))).unwrap();
        let entered = kinds.iter().position(|k| k.0 == EventKind::EnteredSPlus).unwrap();
        assert!(lost <= entered);
        assert!(!kinds.contains(&(EventKind::GainedActivation, Some(1))));
        assert!(rec.is_well_formed());
    }

    #[test]
    fn events_are_localized() {
        let ds = toy();
        let s0 = init_balanced(vec![vec![0.7, 0.7]], 1e-8, vec![1]).unwrap();
        let cfg = IntegratorConfig::rk4(0.05, 5.0);
        let rec = integrate(&s0, &ds, LossKind::Exponential, &cfg, 0.5).unwrap();
        let e = rec.events.iter().find(|e| e.kind == EventKind::LostActivation).unwrap();
        let snap = rec.snapshots.iter().find(|s| s.t() == e.time).unwrap();
        let w = snap.state.w(0);
        let ip = crate::linalg::dot(w, ds.x(1));
        assert!(ip <= 0.0);
        assert!(ip.abs() <= 1e-9 * ds.norm(1) * crate::linalg::norm(w) * 1.0001);
    }

    #[test]
    fn exponential_overflow_aborts_with_partial_record() {
        // Misclassified point with exponent 625; a coarse Euler step overshoots
        // and the leaky slope keeps the output growing.
        let ds = Dataset::from_arrays(vec![vec![1.0, 0.0]], vec![-1]).unwrap();
        let mut s0 = init_balanced(vec![vec![25.0, 0.0]], 1.0, vec![1]).unwrap();
        s0.leaky_alpha = 0.1;
        let mut cfg = IntegratorConfig::rk4(0.5, 1.0);
        cfg.method = Method::Euler;
        let err = integrate(&s0, &ds, LossKind::Exponential, &cfg, 0.1).unwrap_err();
        assert_eq!(err.record.snapshots.len(), 1);
        assert_eq!(err.record.snapshots[0].state, s0);
        let s_bad = init_balanced(vec![vec![30.0, 0.0]], 1.0, vec![1]).unwrap();
        let err = integrate(&s_bad, &ds, LossKind::Exponential, &cfg, 0.1).unwrap_err();
        assert!(err.reason.contains("exceeds"));
        assert!(err.record.snapshots.is_empty());
    }

    #[test]
    fn gd_mode_counts_iterations() {
        let ds = toy();
        let s0 = crate::model::init_gaussian::<f64>(2, 4, 1e-3, 1).unwrap();
        let cfg = IntegratorConfig::gradient_descent(0.01, 100);
        let rec = integrate(&s0, &ds, LossKind::Logistic, &cfg, 0.1).unwrap();
        assert!((rec.last().unwrap().t() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bad_config_rejected() {
        let ds = toy();
        let s0 = init_balanced(vec![vec![0.7, 0.7]], 1e-3, vec![1]).unwrap();
        let mut cfg = IntegratorConfig::rk4(0.01, 1.0);
        cfg.step = 0.0;
        assert!(integrate(&s0, &ds, LossKind::Exponential, &cfg, 0.1).is_err());
    }

    #[test]
    fn ndjson_has_one_line_per_snapshot() {
        let ds = toy();
        let s0 = init_balanced(vec![vec![0.7, 0.7], vec![-0.2, 0.9]], 1e-6, vec![1, -1]).unwrap();
        let rec = integrate(&s0, &ds, LossKind::Exponential, &IntegratorConfig::rk4(0.01, 2.0), 0.5).unwrap();
        let mut buf = Vec::new();
        write_ndjson(&rec, &ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), rec.snapshots.len());
        let total: usize = text
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["events"].as_array().unwrap().len())
            .sum();
        assert_eq!(total, rec.events.len());
    }
}
