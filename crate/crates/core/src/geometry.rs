//! Activation cones, the signed activated sum x_a(w) and the margin constants
//! ζ₁, ζ₂, ξ.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{compute_stats, DataStats, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{axpy, cos, dot, norm};
use crate::model::NetworkState;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeLabel {
    SPlus,
    SMinus,
    SDead,
    Other,
}

impl ConeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ConeLabel::SPlus => "S_plus",
            ConeLabel::SMinus => "S_minus",
            ConeLabel::SDead => "S_dead",
            ConeLabel::Other => "other",
        }
    }
}

/// Activation bitmask of one neuron over the data indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivationPattern {
    n: usize,
    bits: Vec<u64>,
}

impl ActivationPattern {
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut bits = vec![0u64; mask.len().div_ceil(64)];
        for (i, _) in mask.iter().enumerate().filter(|(_, &a)| a) {
            bits[i / 64] |= 1 << (i % 64);
        }
        ActivationPattern { n: mask.len(), bits }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Indices set here but not in `other`.
    pub fn minus(&self, other: &ActivationPattern) -> Vec<usize> {
        (0..self.n).filter(|&i| self.contains(i) && !other.contains(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeMembership {
    pub label: ConeLabel,
    pub activated_pos: usize,
    pub activated_neg: usize,
}

/// Label from activation counts. When a class is empty, S_dead takes
/// precedence over the cone that coincides with it.
pub fn label_from_counts(pos: usize, neg: usize, n_plus: usize, n_minus: usize) -> ConeLabel {
    if pos == 0 && neg == 0 {
        ConeLabel::SDead
    } else if pos == n_plus && neg == 0 {
        ConeLabel::SPlus
    } else if neg == n_minus && pos == 0 {
        ConeLabel::SMinus
    } else {
        ConeLabel::Other
    }
}

/// Per-datum activation flags, strict rule ⟨x_i,w⟩ > 0.
pub fn activation_mask<T: Scalar>(w: &[T], ds: &Dataset<T>) -> Vec<bool> {
    (0..ds.n()).map(|i| dot(ds.x(i), w) > T::zero()).collect()
}

pub fn membership_from_mask<T: Scalar>(mask: &[bool], ds: &Dataset<T>) -> ConeMembership {
    let pos = ds.plus().iter().filter(|&&i| mask[i]).count();
    let neg = ds.minus().iter().filter(|&&i| mask[i]).count();
    ConeMembership {
        label: label_from_counts(pos, neg, ds.n_plus(), ds.n_minus()),
        activated_pos: pos,
        activated_neg: neg,
    }
}

pub fn classify<T: Scalar>(w: &[T], ds: &Dataset<T>) -> Result<ConeMembership> {
    check_w(w, ds)?;
    Ok(membership_from_mask(&activation_mask(w, ds), ds))
}

fn check_w<T: Scalar>(w: &[T], ds: &Dataset<T>) -> Result<()> {
    if w.len() != ds.dim() {
        return Err(Error::DimensionMismatch { expected: ds.dim(), got: w.len() });
    }
    if norm(w) <= T::zero() {
        return Err(Error::Degenerate("zero weight vector".into()));
    }
    Ok(())
}

/// Number of data points activating `w`.
pub fn n_active<T: Scalar>(w: &[T], ds: &Dataset<T>) -> usize {
    activation_mask(w, ds).into_iter().filter(|&a| a).count()
}

/// Σ_{active} y_i x_i + α Σ_{inactive} y_i x_i.
pub fn x_a<T: Scalar>(w: &[T], ds: &Dataset<T>, leaky_alpha: T) -> Result<Vec<T>> {
    check_w(w, ds)?;
    if !(leaky_alpha >= T::zero() && leaky_alpha <= T::one()) {
        return Err(Error::Precondition(format!("leaky_alpha {leaky_alpha} outside [0,1]")));
    }
    let mut s = vec![T::zero(); ds.dim()];
    for i in 0..ds.n() {
        let coef = if dot(ds.x(i), w) > T::zero() { T::one() } else { leaky_alpha };
        if coef != T::zero() {
            axpy(coef * ds.y(i), ds.x(i), &mut s);
        }
    }
    Ok(s)
}

/// √μ · n_a · X_min.
pub fn x_a_norm_lower_bound<T: Scalar>(stats: &DataStats<T>, n_a: usize) -> Result<T> {
    if stats.mu < T::zero() {
        return Err(Error::Precondition(format!("μ={} is negative", stats.mu)));
    }
    Ok(stats.mu.sqrt() * T::from_usize_lossy(n_a) * stats.x_min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMethod {
    Exact2d,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Margins<T> {
    pub zeta1: T,
    pub zeta2: T,
    pub xi: T,
    pub method: MarginMethod,
    pub sample_count: usize,
    /// Set when the complement of S₊ ∪ S₋ was empty (or never sampled) and ξ
    /// was reported as 1.
    pub xi_vacuous: bool,
}

impl<T: Scalar> Margins<T> {
    /// ζ = max{ζ₁, ζ₂}.
    pub fn zeta(&self) -> T {
        self.zeta1.max(self.zeta2)
    }

    /// min{ζ, ξ}.
    pub fn zeta_xi(&self) -> T {
        self.zeta().min(self.xi)
    }
}

/// ζ₂ from the initial directions: 1 − c² where c is the largest cosine of a
/// V₊ neuron with x₋ or of a V₋ neuron with x₊ (clamped at 0).
pub fn zeta2<T: Scalar>(stats: &DataStats<T>, init: &NetworkState<T>) -> Result<T> {
    let mut worst = T::zero();
    let has_minus = norm(&stats.x_minus) > T::zero();
    let has_plus = norm(&stats.x_plus) > T::zero();
    for j in 0..init.h() {
        let (target, present, name) = if init.sign_tags[j] > 0 {
            (&stats.x_minus, has_minus, "x_minus")
        } else {
            (&stats.x_plus, has_plus, "x_plus")
        };
        if !present {
            continue;
        }
        let c = cos(init.w(j), target);
        if c >= T::one() - T::lit(1e-12) {
            return Err(Error::AssumptionFailed(format!(
                "initial non-degeneracy: neuron {j} is aligned with {name} (cos={c})"
            )));
        }
        worst = worst.max(c);
    }
    Ok(T::one() - worst * worst)
}

/// ζ₁ in closed form: the cap around x₊ inside S₊ has angular radius
/// min_i asin|cos(x_i, x₊)|, so its sin² is min_i cos²(x_i, x₊); same for x₋.
pub fn zeta1_closed_form<T: Scalar>(ds: &Dataset<T>, stats: &DataStats<T>) -> T {
    let mut z = T::one();
    for centre in [&stats.x_plus, &stats.x_minus] {
        if norm(centre) <= T::zero() {
            continue;
        }
        for i in 0..ds.n() {
            let c = cos(ds.x(i), centre);
            z = z.min(c * c);
        }
    }
    z
}

fn wrap(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Distance on the circle between two angles.
fn ang_dist(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

/// Angular distance from a point to a closed arc [lo, lo+len].
fn point_arc_dist(p: f64, lo: f64, len: f64) -> f64 {
    let rel = (p - lo).rem_euclid(2.0 * PI);
    if rel <= len {
        0.0
    } else {
        ang_dist(p, lo).min(ang_dist(p, lo + len))
    }
}

/// Distance between two closed arcs.
fn arc_arc_dist(lo1: f64, len1: f64, lo2: f64, len2: f64) -> f64 {
    point_arc_dist(lo1, lo2, len2)
        .min(point_arc_dist(lo1 + len1, lo2, len2))
        .min(point_arc_dist(lo2, lo1, len1))
        .min(point_arc_dist(lo2 + len2, lo1, len1))
}

fn label_at_angle(
    phi: f64,
    xs: &[[f64; 2]],
    ys: &[i8],
    crit_owner: Option<&[usize]>,
    n_plus: usize,
    n_minus: usize,
) -> ConeLabel {
    let z = [phi.cos(), phi.sin()];
    let (mut pos, mut neg) = (0, 0);
    for (i, x) in xs.iter().enumerate() {
        let tie = crit_owner.is_some_and(|o| o.contains(&i));
        if !tie && x[0] * z[0] + x[1] * z[1] > 0.0 {
            if ys[i] > 0 {
                pos += 1;
            } else {
                neg += 1;
            }
        }
    }
    label_from_counts(pos, neg, n_plus, n_minus)
}

/// Exact ξ for planar data. The circle is cut at the critical angles
/// angle(x_i) ± π/2; every open arc and every cut point has a constant label.
/// ξ = sin² of the angular distance from the arc K ∩ S¹ to the closure of the
/// complement of S₊ ∪ S₋ and its antipode. Returns (ξ, vacuous flag).
fn xi_exact_2d<T: Scalar>(ds: &Dataset<T>) -> (f64, bool) {
    let xs: Vec<[f64; 2]> = (0..ds.n()).map(|i| [ds.x(i)[0].as_f64(), ds.x(i)[1].as_f64()]).collect();
    let ys: Vec<i8> = (0..ds.n()).map(|i| ds.label(i)).collect();
    let angles: Vec<f64> = xs.iter().map(|x| x[1].atan2(x[0])).collect();

    // K: arc spanned by the label-signed generators.
    let gen: Vec<f64> = angles
        .iter()
        .zip(&ys)
        .map(|(&a, &y)| if y > 0 { a } else { wrap(a + PI) })
        .collect();
    let rel: Vec<f64> = gen.iter().map(|&g| wrap(g - gen[0])).collect();
    let k_min = rel.iter().cloned().fold(f64::INFINITY, f64::min);
    let k_max = rel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k_lo = gen[0] + k_min;
    let k_len = k_max - k_min;

    // Critical angles with owning data indices, merged when coincident.
    let mut crit: Vec<(f64, usize)> = Vec::new();
    for (i, &a) in angles.iter().enumerate() {
        crit.push(((a + PI / 2.0).rem_euclid(2.0 * PI), i));
        crit.push(((a - PI / 2.0).rem_euclid(2.0 * PI), i));
    }
    crit.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cuts: Vec<(f64, Vec<usize>)> = Vec::new();
    for (a, i) in crit {
        match cuts.last_mut() {
            Some((b, owners)) if (a - *b).abs() < 1e-12 => owners.push(i),
            _ => cuts.push((a, vec![i])),
        }
    }
    if cuts.len() > 1 && (cuts[0].0 + 2.0 * PI - cuts[cuts.len() - 1].0).abs() < 1e-12 {
        let (_, owners) = cuts.pop().expect("non-empty");
        cuts[0].1.extend(owners);
    }

    let (np, nm) = (ds.n_plus(), ds.n_minus());
    let outside = |l: ConeLabel| l != ConeLabel::SPlus && l != ConeLabel::SMinus;
    let mut best = f64::INFINITY;
    let mut any = false;
    let m = cuts.len();
    for k in 0..m {
        let (a, owners) = &cuts[k];
        if outside(label_at_angle(*a, &xs, &ys, Some(owners), np, nm)) {
            any = true;
            best = best.min(point_arc_dist(*a, k_lo, k_len)).min(point_arc_dist(*a + PI, k_lo, k_len));
        }
        let b = if k + 1 < m { cuts[k + 1].0 } else { cuts[0].0 + 2.0 * PI };
        let len = b - a;
        if len > 0.0 && outside(label_at_angle(a + len / 2.0, &xs, &ys, None, np, nm)) {
            any = true;
            best = best
                .min(arc_arc_dist(*a, len, k_lo, k_len))
                .min(arc_arc_dist(*a + PI, len, k_lo, k_len));
        }
    }
    if !any {
        return (1.0, true);
    }
    let d = best.min(PI / 2.0);
    (d.sin().powi(2), false)
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

/// Sampled ξ estimate for D > 2.
fn xi_sampled<T: Scalar>(ds: &Dataset<T>, samples: usize, seed: u64) -> (f64, bool) {
    let ds64: Dataset<f64> = ds.cast();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens: Vec<Vec<f64>> = (0..ds64.n())
        .map(|i| ds64.x(i).iter().map(|v| v * f64::from(ds64.label(i))).collect())
        .collect();
    let mut k_pts: Vec<Vec<f64>> = gens.clone();
    for _ in 0..samples {
        let mut z = vec![0.0; ds64.dim()];
        for g in &gens {
            axpy(rng.random::<f64>(), g, &mut z);
        }
        if norm(&z) > 0.0 {
            k_pts.push(z);
        }
    }
    let mut sup: f64 = 0.0;
    let mut any = false;
    for _ in 0..samples {
        let z = random_unit(&mut rng, ds64.dim());
        let l = membership_from_mask(&activation_mask(&z, &ds64), &ds64).label;
        if l == ConeLabel::SPlus || l == ConeLabel::SMinus {
            continue;
        }
        any = true;
        for k in &k_pts {
            sup = sup.max(cos(k, &z).abs());
        }
    }
    if !any {
        return (1.0, true);
    }
    (1.0 - sup * sup, false)
}

/// Margin constants for a dataset and an initialization. Exact in D = 2,
/// sampled (and flagged) otherwise; ζ₁ uses its closed form in any D.
pub fn estimate_margins<T: Scalar>(
    ds: &Dataset<T>,
    init: &NetworkState<T>,
    samples: usize,
    seed: u64,
) -> Result<Margins<T>> {
    let stats = compute_stats(ds)?;
    if stats.mu <= T::zero() {
        let (mut wi, mut wj) = (0, 0);
        for (i, row) in stats.correlation_matrix.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c == stats.mu {
                    (wi, wj) = (i, j);
                }
            }
        }
        return Err(Error::AssumptionFailed(format!(
            "separability: μ={} ≤ 0 (witness pair {wi},{wj})",
            stats.mu
        )));
    }
    if init.dim() != ds.dim() {
        return Err(Error::DimensionMismatch { expected: ds.dim(), got: init.dim() });
    }
    let zeta2 = zeta2(&stats, init)?;
    let zeta1 = zeta1_closed_form(ds, &stats);
    let (xi, vacuous, method, count) = if ds.dim() == 2 {
        let (xi, v) = xi_exact_2d(ds);
        (xi, v, MarginMethod::Exact2d, 0)
    } else {
        let (xi, v) = xi_sampled(ds, samples, seed);
        (xi, v, MarginMethod::Sampled, samples)
    };
    Ok(Margins {
        zeta1,
        zeta2,
        xi: T::lit(xi),
        method,
        sample_count: count,
        xi_vacuous: vacuous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_balanced;

    fn toy() -> Dataset<f64> {
        Dataset::from_arrays(
            vec![vec![1.0, 0.2], vec![0.8, -0.3], vec![-1.0, -0.1], vec![-0.7, 0.4]],
            vec![1, 1, -1, -1],
        )
        .unwrap()
    }

    #[test]
    fn x_plus_is_in_s_plus_and_its_negation_in_s_minus() {
        let d = toy();
        let s = compute_stats(&d).unwrap();
        assert_eq!(classify(&s.x_plus, &d).unwrap().label, ConeLabel::SPlus);
        let neg: Vec<f64> = s.x_plus.iter().map(|v| -v).collect();
        assert_eq!(classify(&neg, &d).unwrap().label, ConeLabel::SMinus);
    }

    #[test]
    fn dead_single_point() {
        let d = Dataset::from_arrays(vec![vec![1.0, 0.0]], vec![1]).unwrap();
        let m = classify(&[-1.0, 0.0], &d).unwrap();
        assert_eq!(m.label, ConeLabel::SDead);
        assert!(classify(&[0.0, 0.0], &d).is_err());
    }

    #[test]
    fn ties_are_inactive() {
        let d = Dataset::from_arrays(vec![vec![1.0, 0.0]], vec![1]).unwrap();
        assert_eq!(classify(&[0.0, 1.0], &d).unwrap().label, ConeLabel::SDead);
    }

    #[test]
    fn x_a_examples() {
        // x1 pos and x2 neg activated, x3 neg inactive.
        let d = Dataset::from_arrays(
            vec![vec![1.0, 0.5], vec![0.5, 1.0], vec![-1.0, 0.2]],
            vec![1, -1, -1],
        )
        .unwrap();
        let w = [1.0, 1.0];
        assert_eq!(x_a(&w, &d, 0.0).unwrap(), vec![0.5, -0.5]);
        assert_eq!(x_a(&w, &d, 1.0).unwrap(), vec![1.5, -0.7]);
        assert_eq!(x_a(&[-1.0, -1.0], &Dataset::from_arrays(vec![vec![1.0, 0.5]], vec![1]).unwrap(), 0.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn lower_bound_examples() {
        let d = crate::data::angle_pair::<f64>(0.1).unwrap();
        let s = compute_stats(&d).unwrap();
        let b = x_a_norm_lower_bound(&s, 1).unwrap();
        assert!((b - 0.1f64.sin().sqrt()).abs() < 1e-12);
        assert!((b - 0.3160).abs() < 1e-4);
        assert_eq!(x_a_norm_lower_bound(&s, 0).unwrap(), 0.0);
    }

    #[test]
    fn assumption_two_violation_detected() {
        let d = toy();
        let s = compute_stats(&d).unwrap();
        let init = init_balanced(vec![s.x_minus.clone(), vec![0.0, 1.0]], 0.1, vec![1, -1]).unwrap();
        assert!(matches!(estimate_margins(&d, &init, 0, 0), Err(Error::AssumptionFailed(_))));
    }

    #[test]
    fn colinear_data_gives_unit_xi() {
        let d: Dataset<f64> = Dataset::from_arrays(vec![vec![1.0, 0.0], vec![-2.0, 0.0]], vec![1, -1]).unwrap();
        let init = init_balanced(vec![vec![0.0, 1.0]], 0.1, vec![1]).unwrap();
        let m = estimate_margins(&d, &init, 0, 0).unwrap();
        assert_eq!(m.method, MarginMethod::Exact2d);
        assert!((m.xi - 1.0).abs() < 1e-12);
        assert!((m.zeta1 - 1.0).abs() < 1e-12);
        assert!(!m.xi_vacuous);
    }

    #[test]
    fn symmetric_data_margins() {
        // Positives at ±0.2 rad, negatives at π ± 0.2 rad: K spans [−0.2, 0.2]
        // and the nearest non-S± direction sits at π/2 − 0.2.
        let a: f64 = 0.2;
        let d = Dataset::from_arrays(
            vec![
                vec![a.cos(), a.sin()],
                vec![a.cos(), -a.sin()],
                vec![-a.cos(), a.sin()],
                vec![-a.cos(), -a.sin()],
            ],
            vec![1, 1, -1, -1],
        )
        .unwrap();
        let init = init_balanced(vec![vec![0.0, 1.0]], 0.1, vec![1]).unwrap();
        let m = estimate_margins(&d, &init, 0, 0).unwrap();
        let expect_xi = (PI / 2.0 - 2.0 * a).sin().powi(2);
        assert!((m.xi - expect_xi).abs() < 1e-12, "{} vs {}", m.xi, expect_xi);
        assert!((m.zeta1 - a.cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn sampled_margins_are_flagged() {
        let d = crate::data::generate_separable::<f64>(3, 3, 3, 0.4, 2).unwrap();
        let init = init_balanced(vec![vec![0.3, -0.2, 0.9]], 0.1, vec![1]).unwrap();
        let m = estimate_margins(&d, &init, 500, 9).unwrap();
        assert_eq!(m.method, MarginMethod::Sampled);
        assert_eq!(m.sample_count, 500);
        assert!(m.xi > 0.0 && m.xi <= 1.0);
        assert_eq!(m, estimate_margins(&d, &init, 500, 9).unwrap());
    }

    #[test]
    fn non_separable_rejected() {
        let d = Dataset::from_arrays(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 1]).unwrap();
        let init = init_balanced(vec![vec![1.0, 1.0]], 0.1, vec![1]).unwrap();
        assert!(matches!(estimate_margins(&d, &init, 10, 0), Err(Error::AssumptionFailed(_))));
    }
}
