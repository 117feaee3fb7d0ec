//! Error norms against exact solutions and convergence tables.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::band::NarrowBand;
use crate::geometry::Point3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no sample points given")]
    EmptySamples,
    #[error("sample {0:?} lies outside the band")]
    SampleOutsideBand([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l1: f64,
    pub linf: f64,
    pub h: f64,
    pub eps: f64,
    pub node_count: usize,
}

/// `K_eps(d) = (1 + cos(pi d / eps)) / (2 eps)` for `|d| < eps`, else 0.
#[inline]
pub fn kernel(d: f64, eps: f64) -> f64 {
    if d.abs() >= eps {
        0.0
    } else {
        (1.0 + (PI * d / eps).cos()) / (2.0 * eps)
    }
}

/// Sum in a fixed binary tree so the result does not depend on thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 256;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    let (a, b) = rayon::join(|| pairwise_sum(&xs[..mid]), || pairwise_sum(&xs[mid..]));
    a + b
}

/// Band quadrature `sum_i w_i K(d_i) J_i h³` of per-node values `w_i`.
pub fn band_integral(band: &NarrowBand, w: impl Fn(usize) -> f64 + Sync) -> f64 {
    let eps = band.eps();
    let h3 = band.h().powi(3);
    let terms: Vec<f64> = band
        .band_nodes()
        .par_iter()
        .enumerate()
        .map(|(s, n)| w(s) * kernel(n.rec.dist, eps) * n.rec.sigma1 * n.rec.sigma2 * h3)
        .collect();
    pairwise_sum(&terms)
}

/// Surface-integral estimate of `|u - v|` over Γ from band values.
pub fn l1_band_error(
    values: &[f64],
    exact: impl Fn(&Point3) -> f64 + Sync,
    band: &NarrowBand,
) -> f64 {
    let nodes = band.band_nodes();
    band_integral(band, |s| (exact(&nodes[s].rec.cp) - values[s]).abs())
}

/// Like [`l1_band_error`] but skipping nodes rejected by `keep`.
pub fn l1_band_error_masked(
    values: &[f64],
    exact: impl Fn(&Point3) -> f64 + Sync,
    band: &NarrowBand,
    keep: impl Fn(&Point3) -> bool + Sync,
) -> f64 {
    let nodes = band.band_nodes();
    band_integral(band, |s| {
        let cp = &nodes[s].rec.cp;
        if keep(cp) {
            (exact(cp) - values[s]).abs()
        } else {
            0.0
        }
    })
}

/// Max of `|u - v|` over surface samples, `v` interpolated tricubically.
pub fn linf_surface_error(
    values: &[f64],
    exact: impl Fn(&Point3) -> f64 + Sync,
    band: &NarrowBand,
    samples: &[Point3],
) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    samples
        .par_iter()
        .map(|x| {
            let v = band
                .interpolate(values, x)
                .ok_or(MetricsError::SampleOutsideBand([x.x, x.y, x.z]))?;
            Ok((exact(x) - v).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Great-circle distance from `source` on the sphere `(center, r0)`.
///
/// Directions are normalized before taking the angle, so points slightly off
/// the sphere are measured at their radial projection.
pub fn sphere_exact_distance(
    center: Point3,
    r0: f64,
    source: Point3,
) -> impl Fn(&Point3) -> f64 + Send + Sync + Clone {
    let s = (source - center).normalize();
    move |x: &Point3| {
        let d = (x - center).normalize();
        r0 * d.dot(&s).clamp(-1.0, 1.0).acos()
    }
}

pub fn order(e1: f64, e2: f64, h1: f64, h2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

/// Orders between consecutive runs; the first row has none.
pub fn convergence_table(runs: &[ErrorReport]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(runs.len());
    for (i, r) in runs.iter().enumerate() {
        if i == 0 {
            out.push(None);
        } else {
            out.push(Some(order(runs[i - 1].l1, r.l1, runs[i - 1].h, r.h)));
        }
    }
    out
}

/// CSV with columns `h,eps,error,order`.
pub fn write_convergence_csv<W: Write>(mut w: W, runs: &[ErrorReport]) -> std::io::Result<()> {
    writeln!(w, "h,eps,error,order")?;
    for (r, o) in runs.iter().zip(convergence_table(runs)) {
        match o {
            Some(o) => writeln!(w, "{},{},{},{}", r.h, r.eps, r.l1, o)?,
            None => writeln!(w, "{},{},{},", r.h, r.eps, r.l1)?,
        }
    }
    Ok(())
}
