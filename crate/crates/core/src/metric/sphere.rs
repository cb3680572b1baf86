//! Uniform samples, geodesic distance and quasi-uniform landmarks on `S^N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::scalar::Real;

/// Unit vectors in `R^{N+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpherePointSet<T> {
    pub ambient_dim: usize,
    pub points: Vec<Vec<T>>,
}

impl<T: Real> SpherePointSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Geodesic metric on the points. Duplicate samples are rejected.
    pub fn metric_space(&self) -> Result<FiniteMetricSpace<T>> {
        let pts = &self.points;
        FiniteMetricSpace::from_fn(pts.len(), |i, j| unchecked_distance(&pts[i], &pts[j]))
    }

    /// Concatenation of two point sets on the same sphere.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.ambient_dim != other.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, got: other.ambient_dim });
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        Ok(Self { ambient_dim: self.ambient_dim, points })
    }
}

fn gaussian_unit_vector<T: Real>(rng: &mut ChaCha8Rng, ambient: usize) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..ambient).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| T::lit(x / norm)).collect();
        }
    }
}

/// `count` i.i.d. uniform points on `S^N` (normalized standard Gaussians).
pub fn sphere_sample<T: Real>(sphere_dim: usize, count: usize, seed: u64) -> Result<SpherePointSet<T>> {
    if sphere_dim < 1 || count < 1 {
        return Err(Error::InvalidParameter(format!(
            "sphere sampling needs N >= 1 and count >= 1, got N = {sphere_dim}, count = {count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ambient = sphere_dim + 1;
    let points = (0..count).map(|_| gaussian_unit_vector(&mut rng, ambient)).collect();
    Ok(SpherePointSet { ambient_dim: ambient, points })
}

fn unchecked_distance<T: Real>(x: &[T], y: &[T]) -> T {
    let dot: T = x.iter().zip(y).map(|(&a, &b)| a * b).sum();
    dot.max(-T::one()).min(T::one()).acos()
}

/// Great-circle distance `arccos(<x, y>)` between unit vectors.
pub fn sphere_distance<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let tol = T::tol(1e-9);
    for v in [x, y] {
        let norm = v.iter().map(|&a| a * a).sum::<T>().sqrt();
        if (norm - T::one()).abs() > tol {
            return Err(Error::InvalidParameter(format!("not a unit vector: norm {norm}")));
        }
    }
    Ok(unchecked_distance(x, y))
}

/// Greedy farthest-point selection of `count` landmarks from a uniform pool
/// of `100 * count` candidates.
pub fn quasi_uniform_landmarks<T: Real>(sphere_dim: usize, count: usize, seed: u64) -> Result<SpherePointSet<T>> {
    if count < 1 {
        return Err(Error::InvalidParameter("need at least one landmark".into()));
    }
    let pool = sphere_sample::<T>(sphere_dim, 100 * count, seed)?;
    let mut chosen = vec![0usize];
    let mut nearest: Vec<T> = pool.points.iter().map(|p| unchecked_distance(p, &pool.points[0])).collect();
    while chosen.len() < count {
        let (next, _) = nearest
            .iter()
            .enumerate()
            .fold((0, -T::one()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        chosen.push(next);
        for (i, p) in pool.points.iter().enumerate() {
            nearest[i] = nearest[i].min(unchecked_distance(p, &pool.points[next]));
        }
    }
    Ok(SpherePointSet {
        ambient_dim: pool.ambient_dim,
        points: chosen.into_iter().map(|i| pool.points[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn samples_are_unit_and_deterministic() {
        let a = sphere_sample::<f64>(2, 3, 7).unwrap();
        assert_eq!(a.ambient_dim, 3);
        assert_eq!(a.len(), 3);
        for p in &a.points {
            assert!((p.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        }
        assert_eq!(a, sphere_sample::<f64>(2, 3, 7).unwrap());
        assert_ne!(a, sphere_sample::<f64>(2, 3, 8).unwrap());
    }

    #[test]
    fn many_samples_mean_norm() {
        let s = sphere_sample::<f64>(10, 10_000, 1).unwrap();
        let mean = s.points.iter().map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt()).sum::<f64>() / 1e4;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(sphere_sample::<f64>(0, 3, 1).is_err());
        assert!(sphere_sample::<f64>(2, 0, 1).is_err());
        assert!(sphere_distance(&[2.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn distance_special_cases() {
        let x = [1.0, 0.0, 0.0];
        assert_eq!(sphere_distance(&x, &x).unwrap(), 0.0);
        assert!((sphere_distance(&x, &[-1.0, 0.0, 0.0]).unwrap() - PI).abs() < 1e-15);
        assert!((sphere_distance(&x, &[0.0, 1.0, 0.0]).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn distance_is_a_metric_on_random_triples() {
        let s = sphere_sample::<f64>(3, 3000, 42).unwrap();
        for t in s.points.chunks(3) {
            let (a, b, c) = (&t[0], &t[1], &t[2]);
            let ab = sphere_distance(a, b).unwrap();
            assert!((ab - sphere_distance(b, a).unwrap()).abs() <= 1e-12);
            let ac = sphere_distance(a, c).unwrap();
            let bc = sphere_distance(b, c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn circle_landmarks_are_spread() {
        let lm = quasi_uniform_landmarks::<f64>(1, 4, 3).unwrap();
        assert_eq!(lm.len(), 4);
        let mut min = f64::INFINITY;
        for i in 0..4 {
            for j in (i + 1)..4 {
                min = min.min(sphere_distance(&lm.points[i], &lm.points[j]).unwrap());
            }
        }
        assert!(min >= PI / 4.0, "min separation {min}");
        let single = quasi_uniform_landmarks::<f64>(2, 1, 0).unwrap();
        assert_eq!((single.len(), single.ambient_dim), (1, 3));
        for l in [1, 5, 13] {
            assert_eq!(quasi_uniform_landmarks::<f64>(2, l, 9).unwrap().len(), l);
        }
    }
}
