//! Size accounting and evaluated complexity bounds.
//!
//! Bounds whose statements carry an unspecified absolute constant are
//! evaluated with that constant set to 1; their keys end in `[C=1]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::pac::{pac_probability_bound, pac_theta_from_distortion};
use crate::error::{Error, Result};
use crate::metric::check_alpha;
use crate::scalar::Real;

use super::PTParams;

/// `(n, aspect ratio, diameter)` of the embedded point set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceStats {
    pub n: usize,
    pub aspect: f64,
    pub diameter: f64,
}

/// Optional geometric inputs; each enables the bounds that need it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoremExtras {
    pub capacity: Option<usize>,
    pub spectral_radius: Option<f64>,
    pub manifold_dim: Option<usize>,
    pub alpha: Option<f64>,
    pub distortion: Option<f64>,
    /// The space is a combinatorial tree.
    pub tree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub par: usize,
    pub width: usize,
    pub depth: usize,
    pub effdim: usize,
    pub theorem_bounds: BTreeMap<String, f64>,
}

/// `(2 log(5√(2π)) + (3/2) log n − ½ log(n+1)) / (2 log 2)`.
pub fn dimensional_constant(n: usize) -> f64 {
    let n = n as f64;
    (2.0 * (5.0 * (2.0 * std::f64::consts::PI).sqrt()).ln() + 1.5 * n.ln() - 0.5 * (n + 1.0).ln())
        / (2.0 * std::f64::consts::LN_2)
}

/// `n (1 + √(n log n) (1 + log 2 / log n · [c + log(n^{5/2} scale) / log 2]₊))`.
fn depth_bound(n: usize, scale: f64) -> f64 {
    let nf = n as f64;
    let ln2 = std::f64::consts::LN_2;
    let bracket = (dimensional_constant(n) + (nf.powf(2.5) * scale).ln() / ln2).max(0.0);
    nf * (1.0 + (nf * nf.ln()).sqrt() * (1.0 + ln2 / nf.ln() * bracket))
}

pub fn complexity_report<T: Real>(p: &PTParams<T>, stats: SpaceStats, extras: &TheoremExtras) -> Result<ComplexityReport> {
    if stats.n < 2 {
        return Err(Error::InvalidParameter("complexity bounds need n >= 2".into()));
    }
    let n = stats.n;
    let nf = n as f64;
    let k = p.mixture_count();
    let d = p.output_dim();
    let effdim = p.effdim();
    let mut b = BTreeMap::new();
    let mut put = |key: &str, v: f64| {
        b.insert(key.to_string(), v);
    };

    put("C_n", dimensional_constant(n));
    put("general.depth [C=1]", depth_bound(n, stats.aspect));
    put("general.width", (effdim as f64).max(nf * (nf - 1.0) + 12.0));

    if let Some(alpha) = extras.alpha {
        check_alpha(alpha)?;
    }
    if let (Some(cap), Some(alpha)) = (extras.capacity, extras.alpha) {
        let log_cap = (cap as f64).ln();
        put("general.effdim [C=1]", 2.0 * (12.0 * log_cap / alpha).ceil());
        if alpha < 1.0 {
            put("general.distortion [C=1]", (12.0 * log_cap / (1.0 - alpha)).powf(1.0 + alpha).ceil());
        }
    }
    if extras.tree {
        put("tree.effdim", 2.0 * k as f64);
        put("tree.depth [C=1]", depth_bound(n, stats.diameter));
        if k >= 2 {
            put("tree.distortion [C=1]", nf.powf(1.0 / (k as f64 - 1.0)));
        }
    }
    if let (Some(rho), Some(alpha)) = (extras.spectral_radius, extras.alpha) {
        let comps = (12.0 * (1.0 + rho).ln() / alpha).ceil();
        put("two_hop.components [C=1]", comps);
        put("two_hop.effdim [C=1]", 2.0 * comps);
        put("two_hop.depth [C=1]", depth_bound(n, stats.diameter));
        if alpha < 1.0 {
            put("two_hop.distortion [C=1]", (12.0 * (1.0 + rho).ln() / (1.0 - alpha)).powf(1.0 + alpha).ceil());
        }
    }
    if let (Some(m), Some(alpha)) = (extras.manifold_dim, extras.alpha) {
        if alpha < 1.0 {
            let m = m as f64;
            put("ricci.effdim [C=1]", 2.0 * (m.powf(1.0 + alpha) / (alpha * (1.0 - alpha).powf(1.0 + alpha))).ceil());
            put("ricci.distortion [C=1]", (m / (1.0 - alpha)).powf(1.0 + alpha).ceil());
        }
    }
    if d >= 2 {
        let kb = 5.0 * nf.powi(4) * stats.aspect * stats.aspect / (2.0 * (d as f64 - 1.0));
        put("multivariate.components", kb);
        put("multivariate.max_params", nf * (nf - 1.0) / 2.0 * (5.0 * kb + 2.0));
    }
    if let Some(dist) = extras.distortion {
        let theta = pac_theta_from_distortion(dist)?;
        put("pac.theta", theta);
        put("pac.probability", pac_probability_bound(n, theta));
        put("pac.effdim [C=1]", theta * nf.log2() / ((dist - 2.0) * (dist - 2.0)));
        put("pac.probability_intro n^(-4e/(1+D))", nf.powf(-4.0 * std::f64::consts::E / (1.0 + dist)));
        put("pac.probability_proof n^(-4e/D)", nf.powf(-4.0 * std::f64::consts::E / dist));
    }

    Ok(ComplexityReport { par: p.param_count(), width: p.width(), depth: p.depth(), effdim, theorem_bounds: b })
}
