//! Closed-form constants derived from a dataset and an initialization, and
//! the path calculus bounding total activation-transition time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{compute_stats, Dataset};
use crate::error::{Error, Result};
use crate::geometry::Margins;
use crate::model::NetworkState;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TheoryBounds<T> {
    pub eps: T,
    pub h: usize,
    pub n: usize,
    pub mu: T,
    pub x_max: T,
    pub x_min: T,
    pub w_max: T,
    pub w_min: T,
    pub eps_threshold: T,
    /// Natural log of eps_threshold; finite even when the threshold underflows.
    pub ln_eps_threshold: f64,
    /// (coherence term, exponential term in log form, norm cap).
    pub eps_terms: [f64; 3],
    pub eps_cap: T,
    pub t_align: T,
    pub err_bound: T,
    pub norm_ub: T,
    pub f_ub: T,
    /// c = min{ζ,ξ}·√μ·X_min.
    pub transition_rate: T,
    pub t1_bound: T,
    pub t2_bound: Option<T>,
    pub alpha_rate: T,
    pub margins: Margins<T>,
    pub degenerate: Vec<String>,
    /// Formula behind each number.
    pub provenance: BTreeMap<String, String>,
}

impl<T: Scalar> TheoryBounds<T> {
    /// Longest time a neuron can keep an activation pattern with n_a active points.
    pub fn dt_transition(&self, n_a: usize) -> T {
        T::lit(4.0) / (self.transition_rate * T::from_usize_lossy(n_a))
    }

    /// ε ≤ eps_threshold, compared in log space so underflow does not hide it.
    pub fn eps_compliant(&self) -> bool {
        self.eps.as_f64().ln() <= self.ln_eps_threshold + 1e-12 * self.ln_eps_threshold.abs()
    }

    /// Loss envelope L(t₂)/(L(t₂)·α·(t−t₂)+1).
    pub fn loss_envelope(&self, l_t2: T, dt: T) -> T {
        l_t2 / (l_t2 * self.alpha_rate * dt + T::one())
    }
}

/// Evaluates every bound. Requires μ > 0 and an init carrying its scale ε.
pub fn bounds_from<T: Scalar>(ds: &Dataset<T>, init: &NetworkState<T>, margins: &Margins<T>) -> Result<TheoryBounds<T>> {
    let stats = compute_stats(ds)?;
    if stats.mu <= T::zero() {
        return Err(Error::AssumptionFailed(format!("separability: μ={} ≤ 0", stats.mu)));
    }
    if !(margins.xi > T::zero()) || !(margins.zeta() > T::zero()) {
        return Err(Error::AssumptionFailed(format!(
            "degenerate margins ζ={}, ξ={}",
            margins.zeta(),
            margins.xi
        )));
    }
    let (w_max, w_min) = init.shape_norm_extremes()?;
    let f = |x: T| x.as_f64();
    let eps = f(init.eps);
    let h = init.h();
    let n = ds.n();
    let (hf, nf) = (h as f64, n as f64);
    let sh = hf.sqrt();
    let (mu, xmax, xmin, wmax, wmin) = (f(stats.mu), f(stats.x_max), f(stats.x_min), f(w_max), f(w_min));
    let zeta = f(margins.zeta());
    let xi = f(margins.xi);
    let zx = zeta.min(xi);
    let smu = mu.sqrt();
    let c = zx * smu * xmin;
    let ln_n = nf.ln();

    let err_bound = 4.0 * eps * nf * sh * xmax * xmax * wmax * wmax;
    let norm_ub = 2.0 * eps * wmax * wmax / sh;
    let f_ub = 2.0 * eps * sh * xmax * wmax * wmax;
    let t_align = (1.0 / (4.0 * nf * xmax)) * -(sh.ln() + eps.ln());
    let t1_bound = 16.0 * ln_n / c;
    let term1 = mu.min(zeta).min(xi) * smu * xmin / (4.0 * sh * nf * xmax * xmax * wmax * wmax);
    let ln_term2 = -64.0 * nf * xmax * ln_n / c - sh.ln();
    let cap = 1.0 / (4.0 * sh * xmax * wmax * wmax);
    let ln_thr = term1.ln().min(ln_term2).min(cap.ln());
    let alpha_rate = (mu * xmin).powi(2) / (32.0 * xmax);

    let mut t2: Option<f64> = None;
    for n_k in [ds.n_plus(), ds.n_minus()] {
        if n_k == 0 {
            continue;
        }
        let a = smu * n_k as f64 * xmin;
        // log(2/(ε²√μ X_min W_min²)) evaluated in log space.
        let ln_arg = 2f64.ln() - 2.0 * eps.ln() - (smu * xmin * wmin * wmin).ln();
        let v = t1_bound + 6.0 / a + 4.0 / a * (ln_arg + 4.0 * nf * xmax * t1_bound);
        t2 = Some(t2.map_or(v, |u: f64| u.max(v)));
    }

    let mut degenerate = Vec::new();
    if n == 1 {
        degenerate.push("n=1: log n vanishes, t1_bound is 0".to_string());
    }
    if ds.n_minus() == 0 || ds.n_plus() == 0 {
        degenerate.push("one class is empty".to_string());
    }
    if margins.xi_vacuous {
        degenerate.push("complement of S+ ∪ S- is empty; ξ reported as 1".to_string());
    }

    let prov: BTreeMap<String, String> = [
        ("err_bound", "early alignment: 4·ε·n·√h·X_max²·W_max²"),
        ("norm_ub", "small-norm phase: 2·ε·W_max²/√h"),
        ("f_ub", "small-norm phase: 2·ε·√h·X_max·W_max²"),
        ("t_align", "small-norm phase: log(1/(√h·ε))/(4·n·X_max)"),
        ("t1_bound", "maximal path: 16·log n/(min{ζ,ξ}·√μ·X_min)"),
        ("eps_threshold", "initialization scale: three-term minimum"),
        ("alpha_rate", "late phase: (μ·X_min)²/(32·X_max)"),
        ("t2_bound", "late phase: t₂ condition, max over classes"),
        ("dt_transition", "pattern transition: 4/(min{ζ,ξ}·√μ·X_min·n_a)"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    Ok(TheoryBounds {
        eps: init.eps,
        h,
        n,
        mu: stats.mu,
        x_max: stats.x_max,
        x_min: stats.x_min,
        w_max,
        w_min,
        eps_threshold: T::lit(ln_thr.exp()),
        ln_eps_threshold: ln_thr,
        eps_terms: [term1, ln_term2.exp(), cap],
        eps_cap: T::lit(cap),
        t_align: T::lit(t_align),
        err_bound: T::lit(err_bound),
        norm_ub: T::lit(norm_ub),
        f_ub: T::lit(f_ub),
        transition_rate: T::lit(c),
        t1_bound: T::lit(t1_bound),
        t2_bound: t2.map(T::lit),
        alpha_rate: T::lit(alpha_rate),
        margins: margins.clone(),
        degenerate,
        provenance: prov,
    })
}

/// Sequence of (k₊, k₋) activation counts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<(usize, usize)>,
    pub n_plus: usize,
    pub n_minus: usize,
}

impl Path {
    pub fn new(nodes: Vec<(usize, usize)>, n_plus: usize, n_minus: usize) -> Self {
        Path { nodes, n_plus, n_minus }
    }

    /// Checks the four axioms: bounds, monotone progress (k₊ nondecreasing,
    /// k₋ nonincreasing, no repeated node), terminal node (n₊,0), no (0,0).
    pub fn validate(&self) -> Result<()> {
        let bad = |axiom: &'static str, detail: String| Err(Error::InvalidPath { axiom, detail });
        if self.nodes.is_empty() {
            return bad("terminal", "empty path".into());
        }
        for &(kp, km) in &self.nodes {
            if kp > self.n_plus || km > self.n_minus {
                return bad("bounds", format!("node ({kp},{km}) outside [0,{}]×[0,{}]", self.n_plus, self.n_minus));
            }
        }
        for (l, w) in self.nodes.windows(2).enumerate() {
            let ((a, b), (c, d)) = (w[0], w[1]);
            if c < a || d > b || (a, b) == (c, d) {
                return bad("progress", format!("step {l}: ({a},{b}) → ({c},{d})"));
            }
        }
        if *self.nodes.last().expect("non-empty") != (self.n_plus, 0) {
            return bad("terminal", format!("last node is not ({},0)", self.n_plus));
        }
        if self.nodes.contains(&(0, 0)) {
            return bad("no-dead-node", "path visits (0,0)".into());
        }
        Ok(())
    }
}

/// Σ over all nodes but the last of 4/(c·(k₊+k₋)).
pub fn path_travel_time(p: &Path, c: f64) -> Result<f64> {
    p.validate()?;
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("rate c={c} must be positive")));
    }
    Ok(p.nodes[..p.nodes.len() - 1]
        .iter()
        .map(|&(a, b)| 4.0 / (c * (a + b) as f64))
        .sum())
}

/// (0,n₋), …, (0,1), (1,1), (1,0), (2,0), …, (n₊,0).
pub fn maximal_path(n_plus: usize, n_minus: usize) -> Result<Path> {
    if n_plus == 0 && n_minus == 0 {
        return Err(Error::Degenerate("both classes empty".into()));
    }
    if n_plus == 0 {
        return Err(Error::InvalidPath {
            axiom: "no-dead-node",
            detail: "terminal node would be (0,0)".into(),
        });
    }
    let mut nodes: Vec<(usize, usize)> = (1..=n_minus).rev().map(|k| (0, k)).collect();
    if n_minus > 0 {
        nodes.push((1, 1));
    }
    nodes.extend((1..=n_plus).map(|k| (k, 0)));
    Ok(Path::new(nodes, n_plus, n_minus))
}

/// (T(p), T(P_max)).
pub fn dominance_check(p: &Path, c: f64) -> Result<(f64, f64)> {
    let tp = path_travel_time(p, c)?;
    let tm = path_travel_time(&maximal_path(p.n_plus, p.n_minus)?, c)?;
    Ok((tp, tm))
}
