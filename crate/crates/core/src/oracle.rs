//! Brute-force baselines for tests. Nothing here calls into the code it checks
//! beyond the shared data types.

use std::f64::consts::PI;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{MarginMethod, Margins};
use crate::model::{LossKind, NetworkState};
use crate::scalar::Scalar;
use crate::theory::Path;

/// Central-difference gradient of `f` at `x`.
pub fn central_difference<T: Scalar>(f: impl Fn(&[T]) -> T, x: &[T], h: T) -> Vec<T> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + h;
            let up = f(&p);
            p[k] = orig - h;
            let down = f(&p);
            p[k] = orig;
            (up - down) / (h + h)
        })
        .collect()
}

fn oracle_loss<T: Scalar>(w: &[Vec<T>], v: &[T], alpha: T, ds: &Dataset<T>, lk: LossKind) -> T {
    let mut total = T::zero();
    for p in ds.points() {
        let mut f = T::zero();
        for (wj, &vj) in w.iter().zip(v) {
            let z = wj.iter().zip(&p.x).fold(T::zero(), |a, (&b, &c)| a + b * c);
            f += vj * if z > T::zero() { z } else { alpha * z };
        }
        let y = if p.y > 0 { T::one() } else { -T::one() };
        let m = -y * f;
        let one_plus = |m: T| if m > T::zero() { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
        total += match lk {
            LossKind::Exponential => m.exp(),
            LossKind::Logistic => T::lit(2.0) * one_plus(m),
            LossKind::LogisticUnscaled => one_plus(m),
        };
    }
    total
}

#[derive(Clone, Debug, PartialEq)]
pub enum FdOutcome<T> {
    Gradient { gw: Vec<Vec<T>>, gv: Vec<T> },
    /// Some ⟨x_i, w_j⟩ lies inside the kink-exclusion band.
    Skipped { neuron: usize, datum: usize },
}

/// Central finite differences of the scalar loss with respect to W and v.
pub fn fd_gradient<T: Scalar>(s: &NetworkState<T>, ds: &Dataset<T>, lk: LossKind, h_step: T) -> Result<FdOutcome<T>> {
    if s.dim() != ds.dim() {
        return Err(Error::DimensionMismatch { expected: ds.dim(), got: s.dim() });
    }
    for (j, w) in s.w.iter().enumerate() {
        for (i, p) in ds.points().iter().enumerate() {
            let z = w.iter().zip(&p.x).fold(T::zero(), |a, (&b, &c)| a + b * c);
            let nx = p.x.iter().fold(T::zero(), |a, &b| a + b * b).sqrt();
            if z.abs() < T::lit(10.0) * h_step * nx {
                return Ok(FdOutcome::Skipped { neuron: j, datum: i });
            }
        }
    }
    let (h, d) = (s.h(), s.dim());
    let mut flat: Vec<T> = s.w.iter().flatten().copied().collect();
    flat.extend_from_slice(&s.v);
    let f = |p: &[T]| {
        let w: Vec<Vec<T>> = (0..h).map(|j| p[j * d..(j + 1) * d].to_vec()).collect();
        oracle_loss(&w, &p[h * d..], s.leaky_alpha, ds, lk)
    };
    let g = central_difference(f, &flat, h_step);
    let gw = (0..h).map(|j| g[j * d..(j + 1) * d].to_vec()).collect();
    Ok(FdOutcome::Gradient { gw, gv: g[h * d..].to_vec() })
}

/// Every valid path for (n₊, n₋), starting from any admissible node.
pub fn enumerate_paths(n_plus: usize, n_minus: usize) -> Result<Vec<Path>> {
    if n_plus + n_minus > 10 {
        return Err(Error::SizeGuard(format!("n₊+n₋={} exceeds 10", n_plus + n_minus)));
    }
    let mut out = Vec::new();
    if n_plus == 0 {
        return Ok(out);
    }
    let nodes: Vec<(usize, usize)> = (0..=n_plus)
        .flat_map(|a| (0..=n_minus).map(move |b| (a, b)))
        .filter(|&n| n != (0, 0))
        .collect();
    fn extend(
        cur: &mut Vec<(usize, usize)>,
        nodes: &[(usize, usize)],
        goal: (usize, usize),
        np: usize,
        nm: usize,
        out: &mut Vec<Path>,
    ) {
        let (a, b) = *cur.last().expect("non-empty");
        if (a, b) == goal {
            out.push(Path::new(cur.clone(), np, nm));
            return;
        }
        for &(c, d) in nodes {
            if c >= a && d <= b && (c, d) != (a, b) {
                cur.push((c, d));
                extend(cur, nodes, goal, np, nm, out);
                cur.pop();
            }
        }
    }
    for &start in &nodes {
        let mut cur = vec![start];
        extend(&mut cur, &nodes, (n_plus, 0), n_plus, n_minus, &mut out);
    }
    Ok(out)
}

/// Independent edge-sum of a path's travel time, no validation.
pub fn brute_travel_time(nodes: &[(usize, usize)], c: f64) -> f64 {
    let mut t = 0.0;
    for l in 0..nodes.len().saturating_sub(1) {
        t += 4.0 / (c * (nodes[l].0 + nodes[l].1) as f64);
    }
    t
}

/// Grid estimate of ζ₁ and ξ in the plane. Both are shrunk by one grid
/// spacing so they err low. ζ₂ is not computed here and is reported as 0.
pub fn sweep_margins_2d<T: Scalar>(ds: &Dataset<T>, grid: usize) -> Result<Margins<f64>> {
    if ds.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: ds.dim() });
    }
    if grid < 8 {
        return Err(Error::Precondition("grid must have at least 8 points".into()));
    }
    let pts: Vec<(f64, f64, i8)> = ds
        .points()
        .iter()
        .map(|p| (p.x[0].as_f64(), p.x[1].as_f64(), p.y))
        .collect();
    let np = pts.iter().filter(|p| p.2 > 0).count();
    let nm = pts.len() - np;
    let step = 2.0 * PI / grid as f64;
    // 0 = other/dead, 1 = S₊, 2 = S₋
    let region = |phi: f64| -> u8 {
        let (c, s) = (phi.cos(), phi.sin());
        let (mut pa, mut na) = (0, 0);
        for &(x, y, lab) in &pts {
            if x * c + y * s > 0.0 {
                if lab > 0 {
                    pa += 1
                } else {
                    na += 1
                }
            }
        }
        if pa + na == 0 {
            0
        } else if pa == np && na == 0 {
            1
        } else if na == nm && pa == 0 {
            2
        } else {
            0
        }
    };
    let labels: Vec<u8> = (0..grid).map(|k| region(k as f64 * step)).collect();
    let circ = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    };
    let sum_angle = |sign: i8| -> Option<f64> {
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(x, y, lab) in &pts {
            if lab == sign {
                sx += x;
                sy += y;
            }
        }
        (sx != 0.0 || sy != 0.0).then(|| sy.atan2(sx))
    };
    let mut radius = f64::INFINITY;
    for (sign, own) in [(1i8, 1u8), (-1i8, 2u8)] {
        if let Some(theta) = sum_angle(sign) {
            for (k, &l) in labels.iter().enumerate() {
                if l != own {
                    radius = radius.min(circ(k as f64 * step, theta));
                }
            }
        }
    }
    let zeta1 = if radius.is_finite() {
        (radius - step).max(0.0).min(PI / 2.0).sin().powi(2)
    } else {
        1.0
    };
    // K as a set of grid directions: conic combinations of the signed points.
    let signed: Vec<f64> = pts
        .iter()
        .map(|&(x, y, lab)| if lab > 0 { y.atan2(x) } else { (-y).atan2(-x) })
        .collect();
    let in_k = |phi: f64| -> bool {
        // phi lies between two generators within a half-plane.
        signed.iter().any(|&a| circ(a, phi) < 1e-15)
            || signed.iter().any(|&a| {
                signed.iter().any(|&b| {
                    let ab = circ(a, b);
                    ab < PI && (circ(a, phi) + circ(phi, b) - ab).abs() < 1e-12
                })
            })
    };
    let k_dirs: Vec<f64> = (0..grid).map(|k| k as f64 * step).filter(|&p| in_k(p)).chain(signed.iter().copied()).collect();
    let mut dist = f64::INFINITY;
    let mut any = false;
    for (k, &l) in labels.iter().enumerate() {
        if l != 0 {
            continue;
        }
        any = true;
        let phi = k as f64 * step;
        for &kd in &k_dirs {
            let d = circ(phi, kd);
            dist = dist.min(d.min(PI - d));
        }
    }
    let xi = if any { (dist - step).max(0.0).min(PI / 2.0).sin().powi(2) } else { 1.0 };
    Ok(Margins {
        zeta1,
        zeta2: 0.0,
        xi,
        method: MarginMethod::Sampled,
        sample_count: grid,
        xi_vacuous: !any,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub max_abs_dev: f64,
    pub max_rel_dev: f64,
    pub cases: usize,
    pub worst_case: serde_json::Value,
}

impl OracleReport {
    pub fn new(name: impl Into<String>) -> Self {
        OracleReport { name: name.into(), max_abs_dev: 0.0, max_rel_dev: 0.0, cases: 0, worst_case: serde_json::Value::Null }
    }

    /// Records one case; keeps the input of the worst relative deviation.
    pub fn record(&mut self, abs_dev: f64, rel_dev: f64, input: impl FnOnce() -> serde_json::Value) {
        self.cases += 1;
        self.max_abs_dev = self.max_abs_dev.max(abs_dev);
        if rel_dev > self.max_rel_dev || self.worst_case.is_null() {
            self.max_rel_dev = self.max_rel_dev.max(rel_dev);
            self.worst_case = input();
        }
    }

    /// Writes `<dir>/<name>.json` and returns the path.
    pub fn write_to(&self, dir: &FsPath) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let p = dir.join(format!("{}.json", self.name));
        std::fs::write(&p, serde_json::to_string_pretty(self)?)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_calibration() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5 * x[1] * x[1];
        let g = central_difference(f, &[0.7, -1.3], 1e-4);
        assert!((g[0] - (6.0 * 0.7 + 2.0 * 1.3)).abs() < 1e-9);
        assert!((g[1] - (-2.0 * 0.7 - 1.3)).abs() < 1e-9);
    }

    #[test]
    fn kink_is_skipped() {
        let ds = Dataset::from_arrays(vec![vec![1.0, 0.0]], vec![1]).unwrap();
        let s = crate::model::init_balanced(vec![vec![0.0, 1.0]], 1.0, vec![1]).unwrap();
        assert_eq!(
            fd_gradient(&s, &ds, LossKind::Exponential, 1e-6).unwrap(),
            FdOutcome::Skipped { neuron: 0, datum: 0 }
        );
    }

    #[test]
    fn path_counts() {
        assert_eq!(enumerate_paths(1, 1).unwrap().len(), 4);
        assert!(enumerate_paths(0, 1).unwrap().is_empty());
        let p10 = enumerate_paths(1, 0).unwrap();
        assert_eq!(p10, vec![Path::new(vec![(1, 0)], 1, 0)]);
        assert_eq!(enumerate_paths(2, 2).unwrap().len(), 44);
        assert!(enumerate_paths(6, 5).is_err());
    }

    #[test]
    fn grid_rejects_non_planar() {
        let ds = Dataset::from_arrays(vec![vec![1.0, 0.0, 0.0]], vec![1]).unwrap();
        assert!(sweep_margins_2d(&ds, 100).is_err());
    }
}
