//! Labeled datasets: construction, validation, statistics, synthetic
//! generation, centering and the IDX loader.

use std::path::Path;

use byteorder::{BigEndian, ByteOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::scalar::Scalar;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const GENERATION_RETRIES: usize = 100;

/// One labeled sample. `y` is +1 or −1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Point<T> {
    pub x: Vec<T>,
    pub y: i8,
}

/// Validated dataset with cached norms and the label partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", into = "DatasetDoc<T>", try_from = "DatasetDoc<T>")]
pub struct Dataset<T: Scalar> {
    points: Vec<Point<T>>,
    dim: usize,
    norms: Vec<T>,
    plus: Vec<usize>,
    minus: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
struct DatasetDoc<T> {
    #[serde(rename = "D")]
    dim: usize,
    n: usize,
    points: Vec<Point<T>>,
}

impl<T: Scalar> From<Dataset<T>> for DatasetDoc<T> {
    fn from(ds: Dataset<T>) -> Self {
        DatasetDoc { dim: ds.dim, n: ds.points.len(), points: ds.points }
    }
}

impl<T: Scalar> TryFrom<DatasetDoc<T>> for Dataset<T> {
    type Error = Error;

    fn try_from(doc: DatasetDoc<T>) -> Result<Self> {
        if doc.n != doc.points.len() {
            return Err(Error::Content(format!(
                "n={} but {} points listed",
                doc.n,
                doc.points.len()
            )));
        }
        let ds = Dataset::new(doc.points)?;
        if ds.dim != doc.dim {
            return Err(Error::DimensionMismatch { expected: doc.dim, got: ds.dim });
        }
        Ok(ds)
    }
}

impl<T: Scalar> Dataset<T> {
    /// Validates labels, dimensions and norms.
    pub fn new(points: Vec<Point<T>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::EmptyDataset("no points".into()))?;
        let dim = first.x.len();
        if dim == 0 {
            return Err(Error::Degenerate("dimension D must be at least 1".into()));
        }
        let mut norms = Vec::with_capacity(points.len());
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.x.len() });
            }
            if p.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Degenerate(format!("point {i} has a non-finite entry")));
            }
            let nx = norm(&p.x);
            if nx <= T::zero() {
                return Err(Error::Degenerate(format!("point {i} has zero norm")));
            }
            match p.y {
                1 => plus.push(i),
                -1 => minus.push(i),
                other => {
                    return Err(Error::Content(format!("point {i} has label {other}, expected ±1")))
                }
            }
            norms.push(nx);
        }
        Ok(Dataset { points, dim, norms, plus, minus })
    }

    pub fn from_arrays(xs: Vec<Vec<T>>, ys: Vec<i8>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
        }
        Self::new(xs.into_iter().zip(ys).map(|(x, y)| Point { x, y }).collect())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn x(&self, i: usize) -> &[T] {
        &self.points[i].x
    }

    pub fn label(&self, i: usize) -> i8 {
        self.points[i].y
    }

    /// Label as a scalar (±1).
    pub fn y(&self, i: usize) -> T {
        if self.points[i].y > 0 {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn norm(&self, i: usize) -> T {
        self.norms[i]
    }

    pub fn norms(&self) -> &[T] {
        &self.norms
    }

    pub fn plus(&self) -> &[usize] {
        &self.plus
    }

    pub fn minus(&self) -> &[usize] {
        &self.minus
    }

    pub fn n_plus(&self) -> usize {
        self.plus.len()
    }

    pub fn n_minus(&self) -> usize {
        self.minus.len()
    }

    pub fn x_max(&self) -> T {
        self.norms.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    pub fn x_min(&self) -> T {
        self.norms.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    /// Sum of x_i over the given index set.
    pub fn class_sum(&self, idx: &[usize]) -> Vec<T> {
        let mut s = vec![T::zero(); self.dim];
        for &i in idx {
            axpy(T::one(), self.x(i), &mut s);
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        let pts = self
            .points
            .iter()
            .map(|p| Point { x: p.x.iter().map(|v| U::lit(v.as_f64())).collect(), y: p.y })
            .collect();
        Dataset::new(pts).expect("cast preserves validity")
    }
}

/// Summary statistics of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DataStats<T> {
    pub mu: T,
    pub x_max: T,
    pub x_min: T,
    pub x_plus: Vec<T>,
    pub x_minus: Vec<T>,
    /// Row-major n×n matrix of label-signed cosines.
    pub correlation_matrix: Vec<Vec<T>>,
}

/// Computes μ (over all ordered pairs, diagonal included), norms extremes and
/// class sums. Does not require μ > 0.
pub fn compute_stats<T: Scalar>(ds: &Dataset<T>) -> Result<DataStats<T>> {
    let n = ds.n();
    if let Some(i) = (0..n).find(|&i| ds.norm(i) <= T::zero()) {
        return Err(Error::Degenerate(format!("point {i} has zero norm")));
    }
    let mut corr = vec![vec![T::zero(); n]; n];
    let mut mu = T::infinity();
    for i in 0..n {
        for j in i..n {
            let c = if i == j {
                T::one()
            } else {
                ds.y(i) * ds.y(j) * dot(ds.x(i), ds.x(j)) / (ds.norm(i) * ds.norm(j))
            };
            corr[i][j] = c;
            corr[j][i] = c;
            mu = mu.min(c);
        }
    }
    Ok(DataStats {
        mu,
        x_max: ds.x_max(),
        x_min: ds.x_min(),
        x_plus: ds.class_sum(ds.plus()),
        x_minus: ds.class_sum(ds.minus()),
        correlation_matrix: corr,
    })
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

/// Random direction within angle `half_angle` of the unit vector `anchor`.
fn cap_point(rng: &mut ChaCha8Rng, anchor: &[f64], half_angle: f64) -> Vec<f64> {
    let theta = half_angle * rng.random::<f64>();
    let u = loop {
        let r = random_unit(rng, anchor.len());
        let p = crate::linalg::project_out(anchor, &r);
        let np = norm(&p);
        if np > 1e-9 {
            break p.into_iter().map(|x| x / np).collect::<Vec<_>>();
        }
    };
    anchor
        .iter()
        .zip(&u)
        .map(|(&a, &b)| theta.cos() * a + theta.sin() * b)
        .collect()
}

/// Synthetic linearly separable data with μ ≥ `target_mu`. Positives lie in a
/// spherical cap around a random anchor, negatives in the antipodal cap; norms
/// are drawn from [0.9, 1.1].
pub fn generate_separable<T: Scalar>(
    dim: usize,
    n_plus: usize,
    n_minus: usize,
    target_mu: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if dim < 2 {
        return Err(Error::Precondition(format!("D must be at least 2, got {dim}")));
    }
    if !(target_mu > 0.0 && target_mu <= 1.0) {
        return Err(Error::Precondition(format!("target_mu must lie in (0,1], got {target_mu}")));
    }
    if n_plus + n_minus == 0 {
        return Err(Error::EmptyDataset("requested zero points".into()));
    }
    // Two points within β of the same axis are at most 2β apart, so β = acos(μ)/2
    // realises the target by construction; the post-check guards rounding.
    let half_angle = 0.5 * target_mu.acos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_mu = f64::NAN;
    for _ in 0..GENERATION_RETRIES {
        let anchor = random_unit(&mut rng, dim);
        let neg_anchor: Vec<f64> = anchor.iter().map(|a| -a).collect();
        let mut points = Vec::with_capacity(n_plus + n_minus);
        for (count, axis, y) in [(n_plus, &anchor, 1i8), (n_minus, &neg_anchor, -1i8)] {
            for _ in 0..count {
                let r = 0.9 + 0.2 * rng.random::<f64>();
                let dir = cap_point(&mut rng, axis, half_angle);
                points.push(Point { x: dir.into_iter().map(|v| T::lit(v * r)).collect(), y });
            }
        }
        let ds = Dataset::new(points)?;
        last_mu = compute_stats(&ds)?.mu.as_f64();
        if last_mu >= target_mu {
            return Ok(ds);
        }
    }
    Err(Error::GenerationFailed {
        attempts: GENERATION_RETRIES,
        detail: format!("best μ={last_mu} below target {target_mu}"),
    })
}

/// Two positive points x₁=(1,0), x₂=(sin θ, cos θ); μ = sin θ.
pub fn angle_pair<T: Scalar>(theta: f64) -> Result<Dataset<T>> {
    Dataset::from_arrays(
        vec![vec![T::one(), T::zero()], vec![T::lit(theta.sin()), T::lit(theta.cos())]],
        vec![1, 1],
    )
}

/// Subtracts the mean of all points from every point.
pub fn center<T: Scalar>(ds: &Dataset<T>) -> Result<Dataset<T>> {
    let n = T::from_usize_lossy(ds.n());
    let mut mean = vec![T::zero(); ds.dim()];
    for p in ds.points() {
        axpy(T::one() / n, &p.x, &mut mean);
    }
    let mut points = Vec::with_capacity(ds.n());
    for (i, p) in ds.points().iter().enumerate() {
        let x: Vec<T> = p.x.iter().zip(&mean).map(|(&a, &m)| a - m).collect();
        if norm(&x) <= T::zero() {
            return Err(Error::Degenerate(format!("centering maps point {i} to zero")));
        }
        points.push(Point { x, y: p.y });
    }
    Dataset::new(points)
}

fn be_u32(buf: &[u8], offset: usize, what: &str) -> Result<u32> {
    if buf.len() < offset + 4 {
        return Err(Error::Format {
            offset: buf.len() as u64,
            detail: format!("truncated while reading {what}"),
        });
    }
    Ok(BigEndian::read_u32(&buf[offset..offset + 4]))
}

/// Parsed IDX images: `count` images of `rows*cols` raw bytes.
struct IdxImages {
    count: usize,
    pixels: usize,
    data: Vec<u8>,
}

fn parse_idx_images(buf: Vec<u8>) -> Result<IdxImages> {
    let magic = be_u32(&buf, 0, "images magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            detail: format!("images magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        });
    }
    let count = be_u32(&buf, 4, "image count")? as usize;
    let rows = be_u32(&buf, 8, "row count")? as usize;
    let cols = be_u32(&buf, 12, "column count")? as usize;
    let pixels = rows * cols;
    let need = 16 + count * pixels;
    if buf.len() < need {
        return Err(Error::Format {
            offset: buf.len() as u64,
            detail: format!("images file truncated: header promises {need} bytes"),
        });
    }
    Ok(IdxImages { count, pixels, data: buf })
}

fn parse_idx_labels(buf: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(buf, 0, "labels magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            detail: format!("labels magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"),
        });
    }
    let count = be_u32(buf, 4, "label count")? as usize;
    if buf.len() < 8 + count {
        return Err(Error::Format {
            offset: buf.len() as u64,
            detail: format!("labels file truncated: header promises {} bytes", 8 + count),
        });
    }
    Ok(&buf[8..8 + count])
}

/// Loads a two-digit binary task from IDX files. Pixels are scaled by 1/255;
/// at most `max_per_class` images per digit are kept, in file order.
pub fn load_idx<T: Scalar>(
    images_path: &Path,
    labels_path: &Path,
    digit_pos: u8,
    digit_neg: u8,
    max_per_class: usize,
) -> Result<Dataset<T>> {
    if digit_pos == digit_neg {
        return Err(Error::Precondition("positive and negative digits must differ".into()));
    }
    if max_per_class == 0 {
        return Err(Error::EmptyDataset("max_per_class is 0".into()));
    }
    let images = parse_idx_images(std::fs::read(images_path)?)?;
    let label_buf = std::fs::read(labels_path)?;
    let labels = parse_idx_labels(&label_buf)?;
    if labels.len() != images.count {
        return Err(Error::Content(format!(
            "{} labels for {} images",
            labels.len(),
            images.count
        )));
    }
    let scale = T::lit(1.0 / 255.0);
    let (mut kept_pos, mut kept_neg) = (0usize, 0usize);
    let mut points = Vec::new();
    for (k, &lab) in labels.iter().enumerate() {
        let y = if lab == digit_pos && kept_pos < max_per_class {
            kept_pos += 1;
            1
        } else if lab == digit_neg && kept_neg < max_per_class {
            kept_neg += 1;
            -1
        } else {
            continue;
        };
        let start = 16 + k * images.pixels;
        let x = images.data[start..start + images.pixels]
            .iter()
            .map(|&b| T::lit(f64::from(b)) * scale)
            .collect();
        points.push(Point { x, y });
        if kept_pos == max_per_class && kept_neg == max_per_class {
            break;
        }
    }
    if kept_pos == 0 {
        return Err(Error::Content(format!("digit {digit_pos} absent from labels file")));
    }
    if kept_neg == 0 {
        return Err(Error::Content(format!("digit {digit_neg} absent from labels file")));
    }
    Dataset::new(points)
}
