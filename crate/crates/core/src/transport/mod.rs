//! Transport distances between Gaussians and Gaussian mixtures.
//!
//! The mixture-Wasserstein distance restricts couplings to mixtures of
//! Gaussian couplings; its square is the value of a small transportation
//! problem whose costs are the pairwise W₂² between components:
//!
//! ```text
//! MW₂²(P, Q) = min_V  Σ_ij V_ij W₂²(P_i, Q_j)   s.t.  V 1 = w_P,  Vᵀ 1 = w_Q,  V ≥ 0
//! ```
//!
//! [`mw2`] solves it exactly with the transportation simplex in [`simplex`];
//! [`gradient`] turns the optimal plan and duals into derivatives.

pub mod gradient;
pub mod quantile;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, Mat};
use crate::scalar::Real;

pub use gradient::{mw2_gradients, mw2_gradients_d, MixtureGradient, MixtureGradientD, Mw2Gradients, Mw2GradientsD};
pub use quantile::{erf, erfc, mixture_cdf, normal_cdf, w2_empirical_1d, w2_mixture_1d_numeric};
pub use simplex::{solve_transport, TransportPlan};

/// Univariate Gaussian; `std == 0` is a point mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Gaussian1D<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Real> Gaussian1D<T> {
    pub fn new(mean: T, std: T) -> Result<Self> {
        if !mean.is_finite() || !std.is_finite() || std < T::zero() {
            return Err(Error::InvalidParameter(format!("invalid Gaussian N({mean}, {std})")));
        }
        Ok(Self { mean, std })
    }

    pub fn point_mass(at: T) -> Self {
        Self { mean: at, std: T::zero() }
    }
}

/// One weighted component of a univariate mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Component1D<T> {
    pub w: T,
    pub mean: T,
    pub std: T,
}

impl<T: Real> Component1D<T> {
    pub fn gaussian(&self) -> Gaussian1D<T> {
        Gaussian1D { mean: self.mean, std: self.std }
    }
}

/// Finite mixture of univariate Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "RawMixture1D<T>")]
pub struct GaussianMixture1D<T> {
    components: Vec<Component1D<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Real")]
struct RawMixture1D<T> {
    components: Vec<Component1D<T>>,
}

impl<T: Real> TryFrom<RawMixture1D<T>> for GaussianMixture1D<T> {
    type Error = Error;
    fn try_from(raw: RawMixture1D<T>) -> Result<Self> {
        Self::from_components(raw.components)
    }
}

impl<T: Real> GaussianMixture1D<T> {
    /// Builds from `(weight, mean, std)` triples.
    pub fn new(components: Vec<(T, T, T)>) -> Result<Self> {
        Self::from_components(components.into_iter().map(|(w, mean, std)| Component1D { w, mean, std }).collect())
    }

    pub fn from_components(components: Vec<Component1D<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::NotSimplex("mixture has no components".into()));
        }
        for c in &components {
            Gaussian1D::new(c.mean, c.std)?;
        }
        let w: Vec<T> = components.iter().map(|c| c.w).collect();
        simplex::check_simplex(&w, "mixture weights")?;
        Ok(Self { components })
    }

    pub fn single(g: Gaussian1D<T>) -> Self {
        Self { components: vec![Component1D { w: T::one(), mean: g.mean, std: g.std }] }
    }

    /// Uniform mixture of point masses.
    pub fn empirical(locations: &[T]) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::NotSimplex("empirical measure needs at least one atom".into()));
        }
        let w = T::one() / T::from_usize_lossy(locations.len());
        Self::from_components(locations.iter().map(|&mean| Component1D { w, mean, std: T::zero() }).collect())
    }

    pub fn components(&self) -> &[Component1D<T>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<T> {
        self.components.iter().map(|c| c.w).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.components.iter().all(|c| c.std == T::zero())
    }

    /// `(weight, location)` atoms; meaningful when every std is zero.
    pub fn atoms(&self) -> Vec<(T, T)> {
        self.components.iter().map(|c| (c.w, c.mean)).collect()
    }

    /// Probability density at `x`, ignoring point-mass components.
    pub fn density(&self, x: T) -> T {
        let norm = (T::lit(2.0) * T::pi()).sqrt();
        self.components
            .iter()
            .filter(|c| c.std > T::zero())
            .map(|c| {
                let z = (x - c.mean) / c.std;
                c.w * (-(z * z) * T::lit(0.5)).exp() / (c.std * norm)
            })
            .sum()
    }

    pub fn to_multivariate(&self) -> GaussianMixtureD<T> {
        GaussianMixtureD {
            dim: 1,
            components: self
                .components
                .iter()
                .map(|c| ComponentD { w: c.w, mean: vec![c.mean], cov: vec![vec![c.std * c.std]] })
                .collect(),
        }
    }
}

/// Multivariate Gaussian with a positive-semidefinite covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianD<T> {
    pub mean: Vec<T>,
    pub cov: Mat<T>,
}

impl<T: Real> GaussianD<T> {
    pub fn new(mean: Vec<T>, cov: Mat<T>) -> Result<Self> {
        let d = mean.len();
        if cov.rows != d || cov.cols != d {
            return Err(Error::DimensionMismatch { expected: d, got: cov.rows.max(cov.cols) });
        }
        if mean.iter().chain(&cov.data).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Gaussian parameter".into()));
        }
        let scale = cov.frobenius().max(T::one());
        if cov.asymmetry() > T::tol(1e-12) * scale {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        let (vals, _) = crate::linalg::symmetric_eigen(&cov)?;
        if let Some(&neg) = vals.iter().find(|&&l| l < -T::tol(1e-10) * scale) {
            return Err(Error::NotPsd(neg.to_f64_lossy()));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// One weighted component of a multivariate mixture, in its JSON layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ComponentD<T> {
    pub w: T,
    pub mean: Vec<T>,
    pub cov: Vec<Vec<T>>,
}

impl<T: Real> ComponentD<T> {
    pub fn gaussian(&self) -> Result<GaussianD<T>> {
        GaussianD::new(self.mean.clone(), Mat::from_rows(&self.cov)?)
    }
}

/// Finite mixture of `dim`-variate Gaussians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "RawMixtureD<T>", into = "RawMixtureD<T>")]
pub struct GaussianMixtureD<T: Real> {
    dim: usize,
    components: Vec<ComponentD<T>>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct RawMixtureD<T> {
    components: Vec<ComponentD<T>>,
}

impl<T: Real> TryFrom<RawMixtureD<T>> for GaussianMixtureD<T> {
    type Error = Error;
    fn try_from(raw: RawMixtureD<T>) -> Result<Self> {
        Self::new(raw.components)
    }
}

impl<T: Real> From<GaussianMixtureD<T>> for RawMixtureD<T> {
    fn from(m: GaussianMixtureD<T>) -> Self {
        Self { components: m.components }
    }
}

impl<T: Real> GaussianMixtureD<T> {
    pub fn new(components: Vec<ComponentD<T>>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::NotSimplex("mixture has no components".into()));
        };
        let dim = first.mean.len();
        for c in &components {
            if c.mean.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.mean.len() });
            }
            c.gaussian()?;
        }
        let w: Vec<T> = components.iter().map(|c| c.w).collect();
        simplex::check_simplex(&w, "mixture weights")?;
        Ok(Self { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[ComponentD<T>] {
        &self.components
    }

    pub fn weights(&self) -> Vec<T> {
        self.components.iter().map(|c| c.w).collect()
    }

    /// Univariate view (std = sqrt of the 1×1 covariance).
    pub fn to_univariate(&self) -> Result<GaussianMixture1D<T>> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.dim });
        }
        GaussianMixture1D::from_components(
            self.components
                .iter()
                .map(|c| Component1D { w: c.w, mean: c.mean[0], std: c.cov[0][0].max(T::zero()).sqrt() })
                .collect(),
        )
    }
}

/// Closed-form W₂ between univariate Gaussians: `sqrt(Δμ² + Δσ²)`.
pub fn w2_gaussian_1d<T: Real>(a: &Gaussian1D<T>, b: &Gaussian1D<T>) -> T {
    w2_squared_1d(a, b).sqrt()
}

#[inline]
pub(crate) fn w2_squared_1d<T: Real>(a: &Gaussian1D<T>, b: &Gaussian1D<T>) -> T {
    let dm = a.mean - b.mean;
    let ds = a.std - b.std;
    dm * dm + ds * ds
}

/// Bures–Wasserstein squared distance
/// `‖μ₁-μ₂‖² + tr(Σ₁ + Σ₂ - 2 (√Σ₁ Σ₂ √Σ₁)^{1/2})`.
pub fn w2_squared_d<T: Real>(a: &GaussianD<T>, b: &GaussianD<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let mean_part: T = a.mean.iter().zip(&b.mean).map(|(&x, &y)| (x - y) * (x - y)).sum();
    let ra = psd_sqrt(&a.cov)?;
    let cross = psd_sqrt(&ra.matmul(&b.cov).matmul(&ra))?;
    let bures = a.cov.trace() + b.cov.trace() - T::lit(2.0) * cross.trace();
    Ok((mean_part + bures).max(T::zero()))
}

pub fn w2_gaussian_d<T: Real>(a: &GaussianD<T>, b: &GaussianD<T>) -> Result<T> {
    Ok(w2_squared_d(a, b)?.sqrt())
}

/// Pairwise W₂² cost matrix between the components of two mixtures.
pub fn cost_matrix_1d<T: Real>(p: &GaussianMixture1D<T>, q: &GaussianMixture1D<T>) -> Mat<T> {
    let (pc, qc) = (p.components(), q.components());
    Mat::from_fn(pc.len(), qc.len(), |i, j| w2_squared_1d(&pc[i].gaussian(), &qc[j].gaussian()))
}

pub fn cost_matrix_d<T: Real>(p: &GaussianMixtureD<T>, q: &GaussianMixtureD<T>) -> Result<Mat<T>> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
    }
    let pg: Vec<_> = p.components().iter().map(ComponentD::gaussian).collect::<Result<_>>()?;
    let qg: Vec<_> = q.components().iter().map(ComponentD::gaussian).collect::<Result<_>>()?;
    let mut cost = Mat::zeros(pg.len(), qg.len());
    for (i, a) in pg.iter().enumerate() {
        for (j, b) in qg.iter().enumerate() {
            cost[(i, j)] = w2_squared_d(a, b)?;
        }
    }
    Ok(cost)
}

/// Mixture-Wasserstein distance between univariate mixtures with its plan.
pub fn mw2<T: Real>(p: &GaussianMixture1D<T>, q: &GaussianMixture1D<T>) -> Result<(T, TransportPlan<T>)> {
    let plan = solve_transport(&cost_matrix_1d(p, q), &p.weights(), &q.weights())?;
    Ok((plan.value.max(T::zero()).sqrt(), plan))
}

/// Mixture-Wasserstein distance between multivariate mixtures with its plan.
pub fn mw2_d<T: Real>(p: &GaussianMixtureD<T>, q: &GaussianMixtureD<T>) -> Result<(T, TransportPlan<T>)> {
    let plan = solve_transport(&cost_matrix_d(p, q)?, &p.weights(), &q.weights())?;
    Ok((plan.value.max(T::zero()).sqrt(), plan))
}
