//! Two-layer network f(x) = Σ_j v_j σ_α(⟨w_j, x⟩), its losses and closed-form
//! gradients under the subgradient σ′(0) = α (0 for ReLU).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, norm_sq};
use crate::scalar::Scalar;

/// Network weights. `w` holds the h columns of W, each of length D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", into = "StateDoc<T>", try_from = "StateDoc<T>")]
pub struct NetworkState<T: Scalar> {
    pub w: Vec<Vec<T>>,
    pub v: Vec<T>,
    pub sign_tags: Vec<i8>,
    pub t: T,
    pub leaky_alpha: T,
    /// Initialization scale ε (for Gaussian init, the standard deviation).
    pub eps: T,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
struct StateDoc<T> {
    t: T,
    /// Row-major D×h.
    #[serde(rename = "W")]
    w: Vec<Vec<T>>,
    v: Vec<T>,
    sign_tags: Vec<i8>,
    leaky_alpha: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<T>,
}

impl<T: Scalar> From<NetworkState<T>> for StateDoc<T> {
    fn from(s: NetworkState<T>) -> Self {
        let d = s.dim();
        let rows = (0..d).map(|r| s.w.iter().map(|c| c[r]).collect()).collect();
        StateDoc { t: s.t, w: rows, v: s.v, sign_tags: s.sign_tags, leaky_alpha: s.leaky_alpha, eps: Some(s.eps) }
    }
}

impl<T: Scalar> TryFrom<StateDoc<T>> for NetworkState<T> {
    type Error = Error;

    fn try_from(doc: StateDoc<T>) -> Result<Self> {
        let h = doc.v.len();
        if doc.sign_tags.len() != h {
            return Err(Error::DimensionMismatch { expected: h, got: doc.sign_tags.len() });
        }
        if doc.w.is_empty() {
            return Err(Error::Degenerate("W has no rows".into()));
        }
        if let Some(r) = doc.w.iter().find(|r| r.len() != h) {
            return Err(Error::DimensionMismatch { expected: h, got: r.len() });
        }
        if doc.sign_tags.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Content("sign_tags must be ±1".into()));
        }
        let cols = (0..h).map(|j| doc.w.iter().map(|r| r[j]).collect()).collect();
        Ok(NetworkState {
            w: cols,
            v: doc.v,
            sign_tags: doc.sign_tags,
            t: doc.t,
            leaky_alpha: doc.leaky_alpha,
            eps: doc.eps.unwrap_or_else(T::zero),
        })
    }
}

impl<T: Scalar> NetworkState<T> {
    pub fn h(&self) -> usize {
        self.v.len()
    }

    pub fn dim(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn w(&self, j: usize) -> &[T] {
        &self.w[j]
    }

    /// max_j |v_j² − ‖w_j‖²|.
    pub fn balancedness_residual(&self) -> T {
        self.w
            .iter()
            .zip(&self.v)
            .fold(T::zero(), |acc, (w, &v)| acc.max((v * v - norm_sq(w)).abs()))
    }

    /// Neurons whose sign tag is +1 (V₊) or −1 (V₋).
    pub fn tagged(&self, sign: i8) -> Vec<usize> {
        (0..self.h()).filter(|&j| self.sign_tags[j] == sign).collect()
    }

    /// max_j ‖w_j‖ / ε and min_j ‖w_j‖ / ε, i.e. W_max and W_min of the
    /// unscaled shape when this is an initial state.
    pub fn shape_norm_extremes(&self) -> Result<(T, T)> {
        if self.eps <= T::zero() {
            return Err(Error::Precondition("state carries no positive init scale ε".into()));
        }
        let norms: Vec<T> = self.w.iter().map(|c| norm(c) / self.eps).collect();
        let max = norms.iter().fold(T::zero(), |a, &b| a.max(b));
        let min = norms.iter().fold(T::infinity(), |a, &b| a.min(b));
        Ok((max, min))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Balanced initialization: W = εW₀, v_j = s_j ‖εW₀[:,j]‖.
pub fn init_balanced<T: Scalar>(w0: Vec<Vec<T>>, eps: T, signs: Vec<i8>) -> Result<NetworkState<T>> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::Degenerate(format!("init scale ε={eps} must be positive")));
    }
    if w0.is_empty() {
        return Err(Error::Degenerate("W0 has no columns".into()));
    }
    if signs.len() != w0.len() {
        return Err(Error::DimensionMismatch { expected: w0.len(), got: signs.len() });
    }
    let d = w0[0].len();
    let mut w = Vec::with_capacity(w0.len());
    let mut v = Vec::with_capacity(w0.len());
    for (j, (col, &s)) in w0.iter().zip(&signs).enumerate() {
        if col.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: col.len() });
        }
        if s != 1 && s != -1 {
            return Err(Error::Content(format!("sign {s} for neuron {j}, expected ±1")));
        }
        if norm(col) <= T::zero() {
            return Err(Error::Degenerate(format!("W0 column {j} is zero")));
        }
        let wj: Vec<T> = col.iter().map(|&x| eps * x).collect();
        let nv = norm(&wj);
        if nv <= T::zero() {
            return Err(Error::Degenerate(format!("column {j} underflows at ε={eps}")));
        }
        v.push(if s > 0 { nv } else { -nv });
        w.push(wj);
    }
    Ok(NetworkState { w, v, sign_tags: signs, t: T::zero(), leaky_alpha: T::zero(), eps })
}

/// Random shape for balanced init: entries N(0, 1/D) and uniform random signs.
pub fn gaussian_shape<T: Scalar>(dim: usize, h: usize, seed: u64) -> (Vec<Vec<T>>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = 1.0 / (dim as f64).sqrt();
    let w0 = (0..h)
        .map(|_| (0..dim).map(|_| T::lit(sd * rng.sample::<f64, _>(StandardNormal))).collect())
        .collect();
    let signs = (0..h).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    (w0, signs)
}

/// Unbalanced Gaussian init: all entries of W and v drawn from N(0, scale²);
/// sign tags record sign(v_j(0)).
pub fn init_gaussian<T: Scalar>(dim: usize, h: usize, scale: T, seed: u64) -> Result<NetworkState<T>> {
    if !(scale > T::zero()) {
        return Err(Error::Degenerate(format!("init scale {scale} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = || T::lit(rng.sample::<f64, _>(StandardNormal));
    let w: Vec<Vec<T>> = (0..h).map(|_| (0..dim).map(|_| scale * g()).collect()).collect();
    let v: Vec<T> = (0..h).map(|_| scale * g()).collect();
    let sign_tags = v.iter().map(|&x| if x < T::zero() { -1 } else { 1 }).collect();
    Ok(NetworkState { w, v, sign_tags, t: T::zero(), leaky_alpha: T::zero(), eps: scale })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Exponential,
    /// 2·log(1 + e^{−yŷ}).
    Logistic,
    /// log(1 + e^{−yŷ}).
    LogisticUnscaled,
}

fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl LossKind {
    pub fn value<T: Scalar>(self, y: T, yhat: T) -> T {
        let m = -y * yhat;
        match self {
            LossKind::Exponential => m.exp(),
            LossKind::Logistic => T::lit(2.0) * softplus(m),
            LossKind::LogisticUnscaled => softplus(m),
        }
    }

    /// ∂ℓ/∂ŷ.
    pub fn derivative<T: Scalar>(self, y: T, yhat: T) -> T {
        let m = -y * yhat;
        match self {
            LossKind::Exponential => -y * m.exp(),
            LossKind::Logistic => -T::lit(2.0) * y * sigmoid(m),
            LossKind::LogisticUnscaled => -y * sigmoid(m),
        }
    }
}

pub fn sigma<T: Scalar>(z: T, alpha: T) -> T {
    if z > T::zero() {
        z
    } else {
        alpha * z
    }
}

pub fn sigma_prime<T: Scalar>(z: T, alpha: T) -> T {
    if z > T::zero() {
        T::one()
    } else {
        alpha
    }
}

pub fn forward<T: Scalar>(s: &NetworkState<T>, x: &[T]) -> Result<T> {
    if x.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: x.len() });
    }
    Ok(s.w
        .iter()
        .zip(&s.v)
        .fold(T::zero(), |acc, (w, &v)| acc + v * sigma(dot(w, x), s.leaky_alpha)))
}

/// Loss, outputs, per-datum loss derivatives and gradients at one state.
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub loss: T,
    pub outputs: Vec<T>,
    pub dloss: Vec<T>,
    pub gw: Vec<Vec<T>>,
    pub gv: Vec<T>,
}

pub fn evaluate<T: Scalar>(s: &NetworkState<T>, ds: &Dataset<T>, lk: LossKind) -> Evaluation<T> {
    let (n, h) = (ds.n(), s.h());
    let alpha = s.leaky_alpha;
    // pre[j][i] = ⟨w_j, x_i⟩
    let pre: Vec<Vec<T>> = s.w.iter().map(|w| (0..n).map(|i| dot(w, ds.x(i))).collect()).collect();
    let mut outputs = vec![T::zero(); n];
    for j in 0..h {
        for i in 0..n {
            outputs[i] += s.v[j] * sigma(pre[j][i], alpha);
        }
    }
    let mut loss = T::zero();
    let mut dloss = Vec::with_capacity(n);
    for (i, &f) in outputs.iter().enumerate() {
        loss += lk.value(ds.y(i), f);
        dloss.push(lk.derivative(ds.y(i), f));
    }
    let mut gw = vec![vec![T::zero(); ds.dim()]; h];
    let mut gv = vec![T::zero(); h];
    for j in 0..h {
        for i in 0..n {
            let sp = sigma_prime(pre[j][i], alpha);
            if sp != T::zero() {
                axpy(sp * dloss[i] * s.v[j], ds.x(i), &mut gw[j]);
            }
            gv[j] += dloss[i] * sigma(pre[j][i], alpha);
        }
    }
    Evaluation { loss, outputs, dloss, gw, gv }
}

/// (loss, ∂L/∂W, ∂L/∂v).
pub fn loss_and_grads<T: Scalar>(
    s: &NetworkState<T>,
    ds: &Dataset<T>,
    lk: LossKind,
) -> (T, Vec<Vec<T>>, Vec<T>) {
    let e = evaluate(s, ds, lk);
    (e.loss, e.gw, e.gv)
}

/// Both sides of |−∂ℓ/∂ŷ − y| ≤ 2|ŷ|, valid for |ŷ| ≤ 1.
pub fn loss_derivative_bound_check<T: Scalar>(y: T, yhat: T, lk: LossKind) -> Result<(T, T)> {
    if yhat.abs() > T::one() {
        return Err(Error::Precondition(format!("|ŷ|={} exceeds 1", yhat.abs())));
    }
    let lhs = (-lk.derivative(y, yhat) - y).abs();
    Ok((lhs, T::lit(2.0) * yhat.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_init_example() {
        let s = init_balanced(vec![vec![3.0, 4.0]], 0.1, vec![1]).unwrap();
        assert!((s.w[0][0] - 0.3f64).abs() < 1e-15 && (s.w[0][1] - 0.4f64).abs() < 1e-15);
        assert!((s.v[0] - 0.5f64).abs() < 1e-15);
        assert_eq!(s.t, 0.0);
        assert!(init_balanced(vec![vec![3.0, 4.0]], 0.0, vec![1]).is_err());
        assert!(init_balanced(vec![vec![0.0, 0.0]], 0.1, vec![1]).is_err());
    }

    #[test]
    fn balanced_init_residual_is_zero() {
        let (w0, signs) = gaussian_shape::<f64>(5, 16, 3);
        let s = init_balanced(w0, 1e-3, signs).unwrap();
        for j in 0..s.h() {
            assert_eq!(s.v[j].abs(), norm(s.w(j)));
        }
    }

    #[test]
    fn forward_examples() {
        let s = init_balanced(vec![vec![1.0, 0.0]], 1.0, vec![1]).unwrap();
        assert_eq!(forward(&s, &[2.0, 5.0]).unwrap(), 2.0);
        assert_eq!(forward(&s, &[-2.0, 5.0]).unwrap(), 0.0);
        assert!(forward(&s, &[1.0]).is_err());
        let s2 = init_balanced(vec![vec![1.0, 0.0], vec![0.0, 2.0]], 1.0, vec![1, -1]).unwrap();
        // 1·2 − 2·(2·5)
        assert_eq!(forward(&s2, &[2.0, 5.0]).unwrap(), 2.0 - 20.0);
    }

    #[test]
    fn dead_neuron_has_zero_gradient() {
        let ds = Dataset::from_arrays(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![1, -1]).unwrap();
        let s = init_balanced(vec![vec![-1.0, -1.0], vec![1.0, 0.0]], 0.5, vec![1, 1]).unwrap();
        let (_, gw, gv) = loss_and_grads(&s, &ds, LossKind::Exponential);
        assert_eq!(gw[0], vec![0.0, 0.0]);
        assert_eq!(gv[0], 0.0);
    }

    #[test]
    fn zero_output_gradient_is_minus_y_x_v() {
        // Two copies of the same neuron with opposite output weights give f = 0.
        let ds = Dataset::from_arrays(vec![vec![1.0, 2.0]], vec![-1]).unwrap();
        let s = init_balanced(vec![vec![1.0, 1.0], vec![1.0, 1.0]], 0.5, vec![1, -1]).unwrap();
        let e = evaluate(&s, &ds, LossKind::Exponential);
        assert_eq!(e.outputs[0], 0.0);
        assert_eq!(e.loss, 1.0);
        let v0 = s.v[0];
        assert_eq!(e.gw[0], vec![v0, 2.0 * v0]);
        assert_eq!(e.gw[1], vec![-v0, -2.0 * v0]);
    }

    #[test]
    fn derivative_bound_examples() {
        let (l, r) = loss_derivative_bound_check(1.0, 0.0, LossKind::Exponential).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
        let (l, r) = loss_derivative_bound_check(-1.0, 0.5, LossKind::Exponential).unwrap();
        assert!((l - (0.5f64.exp() - 1.0)).abs() < 1e-15 && l <= r);
        assert!((l - 0.6487).abs() < 1e-4);
        let (l, r) = loss_derivative_bound_check(1.0, 1.0, LossKind::Logistic).unwrap();
        let e = (-1.0f64).exp();
        assert!((l - (1.0 - 2.0 * e / (1.0 + e))).abs() < 1e-15 && l <= r);
        assert!((l - 0.4621).abs() < 1e-4);
        assert!(loss_derivative_bound_check(1.0, 1.5, LossKind::Logistic).is_err());
    }

    #[test]
    fn logistic_forms_differ_by_two() {
        for z in [-30.0f64, -1.0, 0.0, 0.3, 40.0] {
            let a = LossKind::Logistic.value(1.0, z);
            let b = LossKind::LogisticUnscaled.value(1.0, z);
            assert!((a - 2.0 * b).abs() <= 1e-15 * a.abs().max(1.0));
            let expect = (-z).exp().ln_1p();
            assert!((b - expect).abs() <= 1e-12 * expect.max(1e-300));
        }
    }

    #[test]
    fn state_json_is_row_major() {
        let s = init_balanced(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], 1.0, vec![1, -1]).unwrap();
        let j = s.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["W"][0], serde_json::json!([1.0, 4.0]));
        assert_eq!(v["W"].as_array().unwrap().len(), 3);
        assert_eq!(NetworkState::<f64>::from_json(&j).unwrap(), s);
    }

    #[test]
    fn gaussian_init_tags_follow_v() {
        let s = init_gaussian::<f64>(2, 50, 1e-6, 4).unwrap();
        for j in 0..s.h() {
            assert_eq!(s.v[j] < 0.0, s.sign_tags[j] < 0);
        }
    }
}
