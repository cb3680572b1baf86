//! Derivatives of MW₂² from an optimal plan.
//!
//! With the plan held fixed (envelope theorem), component parameters enter
//! only through the costs, and the weights enter only through the marginal
//! constraints, whose multipliers are the LP duals.

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, symmetric_eigen, Mat};
use crate::scalar::Real;

use super::{cost_matrix_1d, cost_matrix_d, GaussianMixture1D, GaussianMixtureD, TransportPlan};

/// Gradient of MW₂² with respect to one univariate mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureGradient<T> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
    /// Row (or column) duals centered to zero weighted mean; a tangent
    /// vector of the simplex.
    pub weights: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mw2Gradients<T> {
    pub p: MixtureGradient<T>,
    pub q: MixtureGradient<T>,
}

/// Gradient of MW₂² with respect to one multivariate mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureGradientD<T> {
    pub means: Vec<Vec<T>>,
    /// Symmetric gradients with respect to each covariance.
    pub covs: Vec<Mat<T>>,
    pub weights: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mw2GradientsD<T> {
    pub p: MixtureGradientD<T>,
    pub q: MixtureGradientD<T>,
}

fn centered<T: Real>(duals: &[T], w: &[T]) -> Vec<T> {
    let mean: T = duals.iter().zip(w).map(|(&d, &w)| d * w).sum();
    duals.iter().map(|&d| d - mean).collect()
}

/// Envelope-theorem gradients of MW₂²(p, q) given an optimal `plan`.
///
/// The plan is certified first; a plan that is not optimal for `(p, q)` is
/// rejected.
pub fn mw2_gradients<T: Real>(
    p: &GaussianMixture1D<T>,
    q: &GaussianMixture1D<T>,
    plan: &TransportPlan<T>,
) -> Result<Mw2Gradients<T>> {
    let (wp, wq) = (p.weights(), q.weights());
    plan.certify(&cost_matrix_1d(p, q), &wp, &wq)?;
    let (pc, qc) = (p.components(), q.components());
    let two = T::lit(2.0);
    let mut gp = MixtureGradient {
        means: vec![T::zero(); pc.len()],
        stds: vec![T::zero(); pc.len()],
        weights: centered(&plan.dual_row, &wp),
    };
    let mut gq = MixtureGradient {
        means: vec![T::zero(); qc.len()],
        stds: vec![T::zero(); qc.len()],
        weights: centered(&plan.dual_col, &wq),
    };
    for (i, a) in pc.iter().enumerate() {
        for (j, b) in qc.iter().enumerate() {
            let v = plan.matrix[(i, j)];
            if v == T::zero() {
                continue;
            }
            let dm = two * v * (a.mean - b.mean);
            let ds = two * v * (a.std - b.std);
            gp.means[i] += dm;
            gp.stds[i] += ds;
            gq.means[j] -= dm;
            gq.stds[j] -= ds;
        }
    }
    Ok(Mw2Gradients { p: gp, q: gq })
}

/// `∂ W₂²(N(·, A), N(·, B)) / ∂A = I - T`, where `T` is the matrix of the
/// optimal linear map from `N(0, A)` to `N(0, B)`. Singular `A` uses the
/// pseudo-inverse square root.
fn bures_gradient<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    let n = a.rows;
    let (vals, vecs) = symmetric_eigen(a)?;
    let scale = vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let cutoff = T::tol(1e-12) * scale.max(T::min_positive_value());
    let sqrt_vals: Vec<T> = vals.iter().map(|&l| l.max(T::zero()).sqrt()).collect();
    let inv_sqrt: Vec<T> = vals.iter().map(|&l| if l > cutoff { T::one() / l.sqrt() } else { T::zero() }).collect();
    let build = |f: &[T]| Mat::from_fn(n, n, |i, j| (0..n).map(|k| vecs[(i, k)] * f[k] * vecs[(j, k)]).sum());
    let ra = build(&sqrt_vals);
    let ra_inv = build(&inv_sqrt);
    let mid = psd_sqrt(&ra.matmul(b).matmul(&ra))?;
    let t = ra_inv.matmul(&mid).matmul(&ra_inv);
    Ok(Mat::from_fn(n, n, |i, j| {
        let tij = (t[(i, j)] + t[(j, i)]) * T::lit(0.5);
        if i == j {
            T::one() - tij
        } else {
            -tij
        }
    }))
}

/// Multivariate counterpart of [`mw2_gradients`]; covariance gradients are
/// exact where the covariance is nonsingular.
pub fn mw2_gradients_d<T: Real>(
    p: &GaussianMixtureD<T>,
    q: &GaussianMixtureD<T>,
    plan: &TransportPlan<T>,
) -> Result<Mw2GradientsD<T>> {
    let (wp, wq) = (p.weights(), q.weights());
    plan.certify(&cost_matrix_d(p, q)?, &wp, &wq)?;
    let d = p.dim();
    let (pc, qc) = (p.components(), q.components());
    let pcov: Vec<Mat<T>> = pc.iter().map(|c| Mat::from_rows(&c.cov)).collect::<Result<_>>()?;
    let qcov: Vec<Mat<T>> = qc.iter().map(|c| Mat::from_rows(&c.cov)).collect::<Result<_>>()?;
    let two = T::lit(2.0);
    let mut gp = MixtureGradientD {
        means: vec![vec![T::zero(); d]; pc.len()],
        covs: vec![Mat::zeros(d, d); pc.len()],
        weights: centered(&plan.dual_row, &wp),
    };
    let mut gq = MixtureGradientD {
        means: vec![vec![T::zero(); d]; qc.len()],
        covs: vec![Mat::zeros(d, d); qc.len()],
        weights: centered(&plan.dual_col, &wq),
    };
    for i in 0..pc.len() {
        for j in 0..qc.len() {
            let v = plan.matrix[(i, j)];
            if v == T::zero() {
                continue;
            }
            for k in 0..d {
                let dm = two * v * (pc[i].mean[k] - qc[j].mean[k]);
                gp.means[i][k] += dm;
                gq.means[j][k] -= dm;
            }
            let ga = bures_gradient(&pcov[i], &qcov[j])?;
            let gb = bures_gradient(&qcov[j], &pcov[i])?;
            for (dst, src) in gp.covs[i].data.iter_mut().zip(&ga.data) {
                *dst += v * *src;
            }
            for (dst, src) in gq.covs[j].data.iter_mut().zip(&gb.data) {
                *dst += v * *src;
            }
        }
    }
    if gp.means.iter().flatten().chain(gq.means.iter().flatten()).any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite mixture gradient".into()));
    }
    Ok(Mw2GradientsD { p: gp, q: gq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{mw2, mw2_d, ComponentD};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn value(p: &GaussianMixture1D<f64>, q: &GaussianMixture1D<f64>) -> f64 {
        mw2(p, q).unwrap().1.value
    }

    fn perturb(p: &GaussianMixture1D<f64>, f: impl Fn(usize, &mut (f64, f64, f64))) -> GaussianMixture1D<f64> {
        let mut raw: Vec<(f64, f64, f64)> = p.components().iter().map(|c| (c.w, c.mean, c.std)).collect();
        for (i, c) in raw.iter_mut().enumerate() {
            f(i, c);
        }
        GaussianMixture1D::new(raw).unwrap()
    }

    #[test]
    fn identical_single_components_have_zero_gradient() {
        let p = GaussianMixture1D::new(vec![(1.0, 0.4, 1.3)]).unwrap();
        let (_, plan) = mw2(&p, &p).unwrap();
        let g = mw2_gradients(&p, &p, &plan).unwrap();
        for v in [g.p.means, g.p.stds, g.p.weights, g.q.means, g.q.stds, g.q.weights].concat() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn location_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for _ in 0..40 {
            let (k1, k2) = (rng.random_range(1..5), rng.random_range(1..5));
            let mk = |rng: &mut ChaCha8Rng, k: usize, point: bool| {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
                let s: f64 = raw.iter().sum();
                GaussianMixture1D::new(
                    raw.iter()
                        .map(|w| {
                            let std = if point { 0.0 } else { rng.random_range(0.1..2.0) };
                            (w / s, rng.random_range(-3.0..3.0), std)
                        })
                        .collect(),
                )
                .unwrap()
            };
            let point = rng.random_bool(0.5);
            let p = mk(&mut rng, k1, point);
            let q = mk(&mut rng, k2, point);
            let (_, plan) = mw2(&p, &q).unwrap();
            let g = mw2_gradients(&p, &q, &plan).unwrap();
            for i in 0..k1 {
                let plus = perturb(&p, |k, c| if k == i { c.1 += h });
                let minus = perturb(&p, |k, c| if k == i { c.1 -= h });
                let fd = (value(&plus, &q) - value(&minus, &q)) / (2.0 * h);
                assert!((fd - g.p.means[i]).abs() <= 1e-5 * fd.abs().max(1.0), "mean {i}: {fd} vs {}", g.p.means[i]);
                if !point {
                    let plus = perturb(&p, |k, c| if k == i { c.2 += h });
                    let minus = perturb(&p, |k, c| if k == i { c.2 -= h });
                    let fd = (value(&plus, &q) - value(&minus, &q)) / (2.0 * h);
                    assert!((fd - g.p.stds[i]).abs() <= 1e-5 * fd.abs().max(1.0), "std {i}");
                }
            }
            for j in 0..k2 {
                let plus = perturb(&q, |k, c| if k == j { c.1 += h });
                let minus = perturb(&q, |k, c| if k == j { c.1 -= h });
                let fd = (value(&p, &plus) - value(&p, &minus)) / (2.0 * h);
                assert!((fd - g.q.means[j]).abs() <= 1e-5 * fd.abs().max(1.0), "q mean {j}");
            }
        }
    }

    #[test]
    fn weight_gradient_matches_directional_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 30 {
            let k = rng.random_range(2..5);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let p = GaussianMixture1D::new(
                raw.iter().map(|w| (w / s, rng.random_range(-3.0..3.0), rng.random_range(0.1..1.0))).collect(),
            )
            .unwrap();
            let q = GaussianMixture1D::new(vec![
                (0.35, rng.random_range(-3.0..3.0), 0.5),
                (0.65, rng.random_range(-3.0..3.0), 1.0),
            ])
            .unwrap();
            let (_, plan) = mw2(&p, &q).unwrap();
            // non-degenerate: every basic cell carries mass
            if plan.basis.iter().any(|&(r, c)| plan.matrix[(r, c)] < 1e-3) {
                continue;
            }
            let g = mw2_gradients(&p, &q, &plan).unwrap();
            let dir_raw: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = dir_raw.iter().sum::<f64>() / k as f64;
            let dir: Vec<f64> = dir_raw.iter().map(|d| d - mean).collect();
            let plus = perturb(&p, |i, c| c.0 += h * dir[i]);
            let minus = perturb(&p, |i, c| c.0 -= h * dir[i]);
            let fd = (value(&plus, &q) - value(&minus, &q)) / (2.0 * h);
            let analytic: f64 = g.p.weights.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((fd - analytic).abs() <= 1e-4 * fd.abs().max(1.0), "{fd} vs {analytic}");
            let wmean: f64 = g.p.weights.iter().zip(p.weights()).map(|(a, b)| a * b).sum();
            assert!(wmean.abs() < 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn rejects_non_optimal_plan() {
        let p = GaussianMixture1D::new(vec![(0.5, 0.0, 0.0), (0.5, 2.0, 0.0)]).unwrap();
        let q = GaussianMixture1D::new(vec![(0.5, 0.0, 0.0), (0.5, 2.0, 0.0)]).unwrap();
        let (_, mut plan) = mw2(&p, &q).unwrap();
        plan.matrix = Mat::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        plan.value = 4.0;
        assert!(matches!(mw2_gradients(&p, &q, &plan), Err(Error::NotOptimal(_))));
    }

    #[test]
    fn covariance_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = 1e-6;
        let mk = |rng: &mut ChaCha8Rng, w: f64| {
            let b = Mat::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
            let mut cov = b.matmul(&b.transpose());
            cov[(0, 0)] += 0.3;
            cov[(1, 1)] += 0.3;
            ComponentD { w, mean: vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)], cov: cov.to_rows() }
        };
        for _ in 0..10 {
            let p = GaussianMixtureD::new(vec![mk(&mut rng, 0.4), mk(&mut rng, 0.6)]).unwrap();
            let q = GaussianMixtureD::new(vec![mk(&mut rng, 0.7), mk(&mut rng, 0.3)]).unwrap();
            let (_, plan) = mw2_d(&p, &q).unwrap();
            let g = mw2_gradients_d(&p, &q, &plan).unwrap();
            let val = |p: &GaussianMixtureD<f64>| mw2_d(p, &q).unwrap().1.value;
            for i in 0..2 {
                // symmetric perturbation of the off-diagonal entry and a diagonal one
                for (r, c) in [(0, 0), (0, 1), (1, 1)] {
                    let shift = |s: f64| {
                        let mut comps = p.components().to_vec();
                        comps[i].cov[r][c] += s;
                        if r != c {
                            comps[i].cov[c][r] += s;
                        }
                        GaussianMixtureD::new(comps).unwrap()
                    };
                    let fd = (val(&shift(h)) - val(&shift(-h))) / (2.0 * h);
                    let analytic = if r == c { g.p.covs[i][(r, c)] } else { 2.0 * g.p.covs[i][(r, c)] };
                    assert!((fd - analytic).abs() < 1e-5 * fd.abs().max(1.0), "{fd} vs {analytic}");
                }
                for k in 0..2 {
                    let shift = |s: f64| {
                        let mut comps = p.components().to_vec();
                        comps[i].mean[k] += s;
                        GaussianMixtureD::new(comps).unwrap()
                    };
                    let fd = (val(&shift(h)) - val(&shift(-h))) / (2.0 * h);
                    assert!((fd - g.p.means[i][k]).abs() < 1e-5 * fd.abs().max(1.0));
                }
            }
        }
    }
}
