//! Small dense helpers over slices. Matrices are stored as a list of columns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

fn max_abs<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Euclidean norm; rescales when the plain sum of squares under- or overflows.
pub fn norm<T: Scalar>(a: &[T]) -> T {
    let s = norm_sq(a);
    if s.is_normal() {
        return s.sqrt();
    }
    let m = max_abs(a);
    if m == T::zero() || !m.is_finite() {
        return m;
    }
    a.iter().fold(T::zero(), |acc, &x| acc + (x / m) * (x / m)).sqrt() * m
}

/// Cosine of the angle between two vectors; zero if either is zero.
pub fn cos<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (ma, mb) = (max_abs(a), max_abs(b));
    if ma == T::zero() || mb == T::zero() {
        return T::zero();
    }
    let d = dot(a, b);
    let (na, nb) = (norm(a), norm(b));
    let den = na * nb;
    if d.is_normal() && den.is_normal() || d == T::zero() && den.is_normal() {
        return d / den;
    }
    let sa: Vec<T> = a.iter().map(|&x| x / ma).collect();
    let sb: Vec<T> = b.iter().map(|&x| x / mb).collect();
    dot(&sa, &sb) / (norm(&sa) * norm(&sb))
}

pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled<T: Scalar>(alpha: T, x: &[T]) -> Vec<T> {
    x.iter().map(|&v| alpha * v).collect()
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Component of `u` orthogonal to `w`: (I − ŵŵᵀ)u.
pub fn project_out<T: Scalar>(w: &[T], u: &[T]) -> Vec<T> {
    let nn = norm_sq(w);
    if nn <= T::zero() {
        return u.to_vec();
    }
    let c = dot(w, u) / nn;
    u.iter().zip(w).map(|(&ui, &wi)| ui - c * wi).collect()
}

pub fn frobenius_sq<T: Scalar>(cols: &[Vec<T>]) -> T {
    cols.iter().fold(T::zero(), |acc, c| acc + norm_sq(c))
}

/// Largest singular value of the matrix whose columns are `cols`, by power
/// iteration on the smaller Gram matrix. The start vector comes from a fixed
/// seed so repeated calls are bit-identical.
pub fn spectral_norm<T: Scalar>(cols: &[Vec<T>], rel_tol: f64, max_iter: usize) -> T {
    let h = cols.len();
    if h == 0 {
        return T::zero();
    }
    let d = cols[0].len();
    // Gram matrix of size min(d, h).
    let gram: Vec<Vec<T>> = if h <= d {
        (0..h)
            .map(|a| (0..h).map(|b| dot(&cols[a], &cols[b])).collect())
            .collect()
    } else {
        (0..d)
            .map(|r| {
                (0..d)
                    .map(|s| cols.iter().fold(T::zero(), |acc, c| acc + c[r] * c[s]))
                    .collect()
            })
            .collect()
    };
    let m = gram.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<T> = (0..m).map(|_| T::lit(rng.random::<f64>() + 0.5)).collect();
    let nx = norm(&x);
    if nx == T::zero() {
        return T::zero();
    }
    x.iter_mut().for_each(|v| *v = *v / nx);
    let tol = T::lit(rel_tol);
    let mut lambda = T::zero();
    for _ in 0..max_iter {
        let y: Vec<T> = gram.iter().map(|row| dot(row, &x)).collect();
        let ny = norm(&y);
        if ny == T::zero() {
            return T::zero();
        }
        let next = dot(&x, &y);
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= tol * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // Rayleigh quotient with the final iterate.
    let y: Vec<T> = gram.iter().map(|row| dot(row, &x)).collect();
    let rq = dot(&x, &y);
    rq.max(lambda).max(T::zero()).sqrt()
}
