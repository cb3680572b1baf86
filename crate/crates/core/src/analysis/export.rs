//! CSV and JSON writers for reports, histories and mixture densities.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transport::GaussianMixture1D;

use super::{DistortionReport, PacCurve};

/// Pretty-printed JSON followed by a newline.
pub fn write_json<W: Write, S: Serialize + ?Sized>(mut w: W, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// `iteration,loss,lr`, iterations counted from 1.
pub fn write_loss_history_csv<W: Write, T: Real>(w: W, loss: &[T], lr: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "loss", "lr"])?;
    for (i, (l, r)) in loss.iter().zip(lr).enumerate() {
        out.write_record([(i + 1).to_string(), l.to_string(), r.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `metric,value` summary rows.
pub fn write_report_csv<W: Write, T: Real>(w: W, report: &DistortionReport<T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "value"])?;
    for (name, v) in [
        ("pairs", T::from_usize_lossy(report.pair_ratios.len())),
        ("mean_rel_error", report.mean_rel_error),
        ("max_rel_error", report.max_rel_error),
        ("scale_s", report.scale_s),
        ("distortion_d", report.distortion_d),
    ] {
        out.write_record([name.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `distortion,fraction` rows.
pub fn write_pac_curve_csv<W: Write, T: Real>(w: W, curve: &PacCurve<T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["distortion", "fraction"])?;
    for (d, f) in curve.distortion.iter().zip(&curve.fraction) {
        out.write_record([d.to_string(), f.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityOptions {
    pub points: usize,
    /// Replace each std `σ` by `log₁₀(σ + 2.1)` before sampling.
    pub sigma_transform: bool,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { points: 512, sigma_transform: false }
    }
}

/// Applies the display transform `σ ↦ log₁₀(σ + 2.1)`.
pub fn transform_sigma<T: Real>(m: &GaussianMixture1D<T>) -> Result<GaussianMixture1D<T>> {
    GaussianMixture1D::new(
        m.components().iter().map(|c| (c.w, c.mean, (c.std + T::lit(2.1)).log10())).collect(),
    )
}

/// Rows `mixture,kind,x,value`. Components with positive std contribute a
/// density sampled on a uniform grid spanning every mixture's `±4σ` range;
/// point masses are listed as `atom` rows with their weight.
pub fn write_density_csv<W: Write, T: Real>(
    w: W,
    mixtures: &[(String, GaussianMixture1D<T>)],
    options: DensityOptions,
) -> Result<()> {
    let prepared: Vec<(&str, GaussianMixture1D<T>)> = mixtures
        .iter()
        .map(|(name, m)| Ok((name.as_str(), if options.sigma_transform { transform_sigma(m)? } else { m.clone() })))
        .collect::<Result<_>>()?;
    let four = T::lit(4.0);
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for (_, m) in &prepared {
        for c in m.components().iter().filter(|c| c.std > T::zero()) {
            lo = lo.min(c.mean - four * c.std);
            hi = hi.max(c.mean + four * c.std);
        }
    }
    if lo < hi && !(hi - lo).is_finite() {
        return Err(Error::Numeric(format!("density grid [{lo}, {hi}] is not finite")));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["mixture", "kind", "x", "value"])?;
    for (name, m) in &prepared {
        if lo < hi && !m.is_degenerate() && options.points >= 2 {
            let step = (hi - lo) / T::from_usize_lossy(options.points - 1);
            for k in 0..options.points {
                let x = lo + step * T::from_usize_lossy(k);
                out.write_record([name.to_string(), "density".into(), x.to_string(), m.density(x).to_string()])?;
            }
        }
        for c in m.components().iter().filter(|c| c.std == T::zero()) {
            out.write_record([name.to_string(), "atom".into(), c.mean.to_string(), c.w.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
