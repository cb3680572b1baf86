//! Finite metric spaces and their invariants.
//!
//! A [`FiniteMetricSpace`] stores a dense, fully validated distance matrix.
//! Generators for graphs live in [`graph`], sphere samplers in [`sphere`].

pub mod graph;
pub mod sphere;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Absolute slack allowed when checking the triangle inequality.
pub const TRIANGLE_TOL: f64 = 1e-9;

/// `n` points with a dense symmetric distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FiniteMetricSpace<T> {
    n: usize,
    dist: Vec<T>,
    labels: Option<Vec<String>>,
}

impl<T: Real> FiniteMetricSpace<T> {
    /// Validates a square matrix against the metric axioms.
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, row: i, len: row.len() });
            }
            dist.extend_from_slice(row);
        }
        Self::from_flat(n, dist)
    }

    pub fn from_flat(n: usize, dist: Vec<T>) -> Result<Self> {
        if dist.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: dist.len() });
        }
        let space = Self { n, dist, labels: None };
        space.validate()?;
        Ok(space)
    }

    /// Builds the space from a distance function, then validates it.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut dist = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self::from_flat(n, dist)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Checks every axiom; errors carry the offending indices.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let sym_tol = T::tol(1e-12);
        for i in 0..n {
            let dii = self.d(i, i);
            if dii != T::zero() {
                return Err(Error::NonzeroDiagonal { i, value: dii.to_f64_lossy() });
            }
            for j in 0..n {
                let v = self.d(i, j);
                if !v.is_finite() || v < T::zero() {
                    return Err(Error::InvalidEntry { i, j, value: v.to_f64_lossy() });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (self.d(i, j), self.d(j, i));
                if (a - b).abs() > sym_tol * T::one().max(a.abs()) {
                    return Err(Error::Asymmetric { i, j, a: a.to_f64_lossy(), b: b.to_f64_lossy() });
                }
                if a == T::zero() {
                    return Err(Error::ZeroDistance { i, j });
                }
            }
        }
        let tri = T::tol(TRIANGLE_TOL);
        for i in 0..n {
            let row_i = &self.dist[i * n..(i + 1) * n];
            for j in 0..n {
                let dij = row_i[j];
                let row_j = &self.dist[j * n..(j + 1) * n];
                for k in (i + 1)..n {
                    if row_i[k] > dij + row_j[k] + tri {
                        return Err(Error::TriangleViolation {
                            i,
                            j,
                            k,
                            direct: row_i[k].to_f64_lossy(),
                            detour: (dij + row_j[k]).to_f64_lossy(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> T {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Unordered pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j)))
    }

    /// Sub-space on the given points, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, len: self.n });
            }
        }
        let m = indices.len();
        let dist = indices
            .iter()
            .flat_map(|&i| indices.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.d(i, j))
            .collect();
        Self::from_flat(m, dist)
    }

    /// `(aspect ratio, diameter)`. Needs at least two points.
    pub fn aspect_ratio_and_diameter(&self) -> Result<(T, T)> {
        if self.n < 2 {
            return Err(Error::InvalidParameter("aspect ratio needs at least two points".into()));
        }
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for (i, j) in self.pairs() {
            let d = self.d(i, j);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        Ok((hi / lo, hi))
    }

    pub fn diameter(&self) -> T {
        self.dist.iter().fold(T::zero(), |m, &d| m.max(d))
    }

    /// Replaces every distance by its `alpha` power, `0 < alpha <= 1`.
    pub fn snowflake(&self, alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        let dist = self.dist.iter().map(|&d| if alpha == T::one() { d } else { d.powf(alpha) }).collect();
        let mut out = Self::from_flat(self.n, dist)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Writes the matrix as headerless CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for i in 0..self.n {
            wr.write_record(self.row(i).iter().map(|v| format!("{v}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map(T::lit).map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }
}

pub(crate) fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Ordered, distinct indices of reference points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkSet {
    indices: Vec<usize>,
}

impl LandmarkSet {
    pub fn new(indices: Vec<usize>, n_points: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter("landmark set is empty".into()));
        }
        let mut seen = vec![false; n_points];
        for &i in &indices {
            if i >= n_points {
                return Err(Error::IndexOutOfRange { index: i, len: n_points });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!("duplicate landmark {i}")));
            }
        }
        Ok(Self { indices })
    }

    /// Every point is a landmark: the Fréchet embedding.
    pub fn all(n_points: usize) -> Result<Self> {
        Self::new((0..n_points).collect(), n_points)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn check_against<T: Real>(&self, space: &FiniteMetricSpace<T>) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= space.len()) {
            Some(&index) => Err(Error::IndexOutOfRange { index, len: space.len() }),
            None => Ok(()),
        }
    }
}

/// Distances from `point` to each landmark, in landmark order.
pub fn landmark_features<T: Real>(
    space: &FiniteMetricSpace<T>,
    landmarks: &LandmarkSet,
    point: usize,
) -> Result<Vec<T>> {
    if point >= space.len() {
        return Err(Error::IndexOutOfRange { index: point, len: space.len() });
    }
    landmarks.check_against(space)?;
    Ok(landmarks.indices().iter().map(|&l| space.d(point, l)).collect())
}

/// Largest number of disjoint `r/5` balls packed in an `r` ball, maximized
/// over centers and radii. Exponential; limited to 14 points.
pub fn metric_capacity_bruteforce<T: Real>(space: &FiniteMetricSpace<T>) -> Result<usize> {
    const LIMIT: usize = 14;
    let n = space.len();
    if n > LIMIT {
        return Err(Error::InvalidParameter(format!(
            "metric capacity search is exponential; at most {LIMIT} points supported, got {n}"
        )));
    }
    if n == 0 {
        return Ok(0);
    }

    // Ball membership only changes when r crosses some d(u,v) or 5 d(u,v).
    let five = T::lit(5.0);
    let mut thresholds: Vec<T> = vec![T::zero()];
    for (i, j) in space.pairs() {
        thresholds.push(space.d(i, j));
        thresholds.push(space.d(i, j) * five);
    }
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    thresholds.dedup();
    let nudge = T::one() + T::lit(1e-9);
    let mut radii: Vec<T> = thresholds.windows(2).map(|w| (w[0] + w[1]) * T::lit(0.5)).collect();
    radii.extend(thresholds.iter().map(|&t| t * nudge).filter(|&r| r > T::zero()));

    let mut best = 1;
    for &r in &radii {
        let small = r / five;
        // ball[i]: bitmask of points strictly within r/5 of i
        let ball: Vec<u32> = (0..n)
            .map(|i| (0..n).filter(|&j| space.d(i, j) < small).fold(0u32, |m, j| m | (1 << j)))
            .collect();
        let conflicts: Vec<u32> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && ball[i] & ball[j] != 0).fold(0u32, |m, j| m | (1 << j)))
            .collect();
        for center in 0..n {
            let big = (0..n).filter(|&j| space.d(center, j) < r).fold(0u32, |m, j| m | (1 << j));
            let allowed = (0..n).filter(|&i| ball[i] & !big == 0).fold(0u32, |m, i| m | (1 << i));
            if (allowed.count_ones() as usize) <= best {
                continue;
            }
            best = best.max(max_independent(allowed, &conflicts));
        }
    }
    Ok(best)
}

fn max_independent(candidates: u32, conflicts: &[u32]) -> usize {
    if candidates == 0 {
        return 0;
    }
    let v = candidates.trailing_zeros() as usize;
    let rest = candidates & !(1 << v);
    let with = 1 + max_independent(rest & !conflicts[v], conflicts);
    if conflicts[v] & rest == 0 {
        return with;
    }
    with.max(max_independent(rest, conflicts))
}
