use serde::{Deserialize, Serialize};

use crate::flow::FlowEvent;
use crate::geometry::{ActivationPattern, ConeLabel};
use crate::linalg::norm;
use crate::model::NetworkState;
use crate::scalar::Scalar;
use crate::theory::TheoryBounds;

/// Full network state plus the per-neuron cone labels and activation masks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Snapshot<T: Scalar> {
    pub state: NetworkState<T>,
    pub labels: Vec<ConeLabel>,
    pub masks: Vec<ActivationPattern>,
    pub loss: T,
    pub outputs: Vec<T>,
}

impl<T: Scalar> Snapshot<T> {
    pub fn t(&self) -> T {
        self.state.t
    }

    pub fn neuron_norm(&self, j: usize) -> T {
        norm(self.state.w(j))
    }

    /// Unit direction of neuron j (zero vector for a zero neuron).
    pub fn direction(&self, j: usize) -> Vec<T> {
        let n = self.neuron_norm(j);
        if n > T::zero() {
            self.state.w(j).iter().map(|&x| x / n).collect()
        } else {
            vec![T::zero(); self.state.dim()]
        }
    }

    pub fn max_abs_output(&self) -> T {
        self.outputs.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrajectoryRecord<T: Scalar> {
    pub snapshots: Vec<Snapshot<T>>,
    pub events: Vec<FlowEvent<T>>,
    pub dataset_ref: String,
    pub bounds: Option<TheoryBounds<T>>,
    /// Time each neuron was frozen by the regular-solution rule.
    pub frozen_at: Vec<Option<T>>,
    pub sign_flip: bool,
    pub snapshot_every: T,
}

impl<T: Scalar> TrajectoryRecord<T> {
    pub fn first(&self) -> Option<&Snapshot<T>> {
        self.snapshots.first()
    }

    pub fn last(&self) -> Option<&Snapshot<T>> {
        self.snapshots.last()
    }

    pub fn h(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.state.h())
    }

    /// Snapshot times strictly increase and every event lies within the span.
    pub fn is_well_formed(&self) -> bool {
        let times_ok = self.snapshots.windows(2).all(|w| w[0].t() < w[1].t());
        let (Some(a), Some(b)) = (self.first(), self.last()) else {
            return self.events.is_empty();
        };
        let ev_ok = self.events.iter().all(|e| e.time >= a.t() && e.time <= b.t());
        let ordered = self.events.windows(2).all(|w| w[0].time <= w[1].time);
        times_ok && ev_ok && ordered
    }
}
