//! L^q-spectrum and multifractal spectrum estimation from a scale matrix:
//! partition sums, log-log regression for tau(q), the kappa/lambda
//! cross-estimator, and the finite-difference Legendre transform.
//!
//! Sign convention: tau(q) is the slope of log Z_n(q) against log eps_n.
//! Since log eps_n decreases with depth, the strict convexity of the
//! underlying pressure kappa(q) appears as *negative* curvature of tau
//! itself. Curvature diagnostics are therefore reported in the pressure
//! orientation (second differences of tau negated), so "strictly convex"
//! matches the non-degenerate cascade and "affine" the degenerate one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::ScaleMatrix;
use crate::num::Real;
use crate::stats::{linear_fit, log_sum_exp, median, pairwise_sum};

/// Verdict below which |curvature| counts as affine.
pub const AFFINE_TOL: f64 = 1e-6;

/// Default number of leading (transient) depths excluded from fits.
pub const DEFAULT_SKIP_DEPTHS: usize = 3;

/// Fits need at least this many retained depths.
pub const MIN_FIT_DEPTHS: usize = 3;

/// Arithmetic q-grid; contains q = 0 and q = 1 exactly when in range.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QGrid<T> {
    pub q_min: T,
    pub q_max: T,
    pub q_step: T,
}

impl<T: Real> QGrid<T> {
    pub fn new(q_min: T, q_max: T, q_step: T) -> Result<Self> {
        if !(q_step > T::zero()) || q_step > T::from_f64_lossy(0.25) {
            return Err(Error::invalid_config(
                "q.step",
                "must be in (0, 0.25] for Legendre differencing",
            ));
        }
        if !(q_min <= q_max) {
            return Err(Error::invalid_config("q.range", "need q_min <= q_max"));
        }
        Ok(QGrid {
            q_min,
            q_max,
            q_step,
        })
    }

    pub fn values(&self) -> Vec<T> {
        if self.q_max == self.q_min {
            return vec![self.q_min];
        }
        let span = (self.q_max - self.q_min) / self.q_step;
        let steps = span.round().to_usize().unwrap_or(0).max(1);
        let mut values: Vec<T> = (0..=steps)
            .map(|i| self.q_min + T::from_usize_lossy(i) * self.q_step)
            .collect();
        // snap the nearest grid point onto 0 and 1 exactly
        for target in [T::zero(), T::one()] {
            if target < self.q_min || target > self.q_max {
                continue;
            }
            let idx = ((target - self.q_min) / self.q_step)
                .round()
                .to_usize()
                .unwrap_or(0)
                .min(steps);
            if (values[idx] - target).abs() < self.q_step / T::from_f64_lossy(2.0) {
                values[idx] = target;
            }
        }
        values
    }

    pub fn default_grid() -> Self {
        QGrid {
            q_min: T::from_f64_lossy(-2.0),
            q_max: T::from_f64_lossy(4.0),
            q_step: T::from_f64_lossy(0.1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MeshMode {
    Max,
    GeoMean,
    Median,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MassSource {
    Mass,
    Diameter,
}

/// Z(row, q) = sum_i row_i^q.
///
/// Computed in log space; rows at depth ~50 hold entries near 1e-60 whose
/// powers under/overflow binary64 directly.
pub fn log_partition_function<T: Real>(row: &[T], q: T) -> Result<T> {
    if row.is_empty() {
        return Err(Error::EmptyRow);
    }
    let scaled: Vec<T> = row
        .iter()
        .map(|&x| {
            debug_assert!(x > T::zero());
            q * x.ln()
        })
        .collect();
    Ok(log_sum_exp(&scaled))
}

pub fn partition_function<T: Real>(row: &[T], q: T) -> Result<T> {
    Ok(log_partition_function(row, q)?.exp())
}

/// Representative leaf scale of a depth row.
pub fn mesh_scale<T: Real>(diameters: &[T], mode: MeshMode) -> T {
    assert!(!diameters.is_empty());
    match mode {
        MeshMode::Max => diameters.iter().copied().fold(T::neg_infinity(), T::max),
        MeshMode::GeoMean => {
            let logs: Vec<T> = diameters.iter().map(|&d| d.ln()).collect();
            (pairwise_sum(&logs) / T::from_usize_lossy(logs.len())).exp()
        }
        MeshMode::Median => median(diameters),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumEstimate<T> {
    pub q: Vec<T>,
    pub tau: Vec<T>,
    pub alpha: Vec<T>,
    pub f: Vec<T>,
    pub fit_r2: Vec<T>,
    pub kappa_hat: Vec<T>,
    pub lambda_hat: T,
    pub depth_window: (usize, usize),
    pub mesh_mode: MeshMode,
    pub source: MassSource,
    pub hull_applied: bool,
    pub low_depth_warning: bool,
    #[serde(skip)]
    pub retained_depths: Vec<usize>,
    #[serde(skip)]
    pub log_z: Vec<Vec<T>>,
}

/// Depths usable for slope fits: past the transient, with >= 2 leaves.
pub fn retained_depths<T: Real>(matrix: &ScaleMatrix<T>, skip_depths: usize) -> Result<Vec<usize>> {
    let depths: Vec<usize> = (skip_depths..matrix.rows.len())
        .filter(|&n| matrix.rows[n].leaf_count() >= 2)
        .collect();
    if depths.len() < MIN_FIT_DEPTHS {
        return Err(Error::InsufficientData(format!(
            "{} usable depths, need at least {MIN_FIT_DEPTHS}",
            depths.len()
        )));
    }
    Ok(depths)
}

fn source_row<'a, T>(matrix: &'a ScaleMatrix<T>, depth: usize, source: MassSource) -> &'a [T] {
    match source {
        MassSource::Mass => &matrix.rows[depth].masses,
        MassSource::Diameter => &matrix.rows[depth].diameters,
    }
}

/// Per-q slope of log Z_n(q) against log eps_n over the retained depths.
pub fn tau_fit<T: Real>(
    matrix: &ScaleMatrix<T>,
    grid: &QGrid<T>,
    mesh_mode: MeshMode,
    source: MassSource,
    skip_depths: usize,
) -> Result<SpectrumEstimate<T>> {
    let depths = retained_depths(matrix, skip_depths)?;
    let qs = grid.values();

    let log_eps: Vec<T> = depths
        .iter()
        .map(|&n| mesh_scale(&matrix.rows[n].diameters, mesh_mode).ln())
        .collect();
    let depth_idx: Vec<T> = depths.iter().map(|&n| T::from_usize_lossy(n)).collect();
    let lambda_hat = linear_fit(&depth_idx, &log_eps).slope;

    let mut log_z = vec![Vec::with_capacity(qs.len()); depths.len()];
    for (row, &n) in log_z.iter_mut().zip(&depths) {
        for &q in &qs {
            row.push(log_partition_function(source_row(matrix, n, source), q)?);
        }
    }

    let mut tau = Vec::with_capacity(qs.len());
    let mut kappa_hat = Vec::with_capacity(qs.len());
    let mut fit_r2 = Vec::with_capacity(qs.len());
    for qi in 0..qs.len() {
        let ys: Vec<T> = log_z.iter().map(|row| row[qi]).collect();
        let fit = linear_fit(&log_eps, &ys);
        tau.push(fit.slope);
        fit_r2.push(fit.r2);
        kappa_hat.push(linear_fit(&depth_idx, &ys).slope);
    }

    let window = (depths[0], *depths.last().unwrap());
    let low_depth_warning = depths.len() < 6;
    Ok(SpectrumEstimate {
        q: qs,
        tau,
        alpha: Vec::new(),
        f: Vec::new(),
        fit_r2,
        kappa_hat,
        lambda_hat,
        depth_window: window,
        mesh_mode,
        source,
        hull_applied: false,
        low_depth_warning,
        retained_depths: depths,
        log_z,
    })
}

/// Independent cross-check: kappa_hat(q) / lambda_hat, with kappa_hat the
/// slope of log Z_n(q) against n and lambda_hat the geometric-mean mesh
/// decay rate against n.
pub fn tau_via_kappa<T: Real>(
    matrix: &ScaleMatrix<T>,
    grid: &QGrid<T>,
    source: MassSource,
    skip_depths: usize,
) -> Result<Vec<T>> {
    let estimate = tau_fit(matrix, grid, MeshMode::GeoMean, source, skip_depths)?;
    Ok(estimate
        .kappa_hat
        .iter()
        .map(|&k| k / estimate.lambda_hat)
        .collect())
}

/// Finite-difference Legendre transform: alpha = dtau/dq (central in the
/// interior, one-sided at the ends), f = q*alpha - tau pointwise.
pub fn legendre<T: Real>(tau: &[T], qs: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    if tau.len() < 3 || tau.len() != qs.len() {
        return Err(Error::InsufficientData(
            "need at least 3 grid points for the Legendre transform".into(),
        ));
    }
    let n = tau.len();
    let mut alpha = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            (tau[1] - tau[0]) / (qs[1] - qs[0])
        } else if i == n - 1 {
            (tau[n - 1] - tau[n - 2]) / (qs[n - 1] - qs[n - 2])
        } else {
            (tau[i + 1] - tau[i - 1]) / (qs[i + 1] - qs[i - 1])
        };
        alpha.push(d);
    }
    let f = qs
        .iter()
        .zip(tau.iter().zip(&alpha))
        .map(|(&q, (&t, &a))| q * a - t)
        .collect();
    Ok((alpha, f))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConvexityVerdict {
    /// Pressure curvature indistinguishable from zero: degenerate cascade.
    Affine,
    /// Strictly positive pressure curvature everywhere.
    StrictlyConvex,
    /// Mixed signs beyond tolerance; estimate is noisy or non-convex.
    NotStrictlyConvex,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport<T> {
    /// Second differences of tau in the pressure orientation (negated raw
    /// second differences; see the module doc on the sign convention).
    pub second_differences: Vec<T>,
    pub min: T,
    pub max: T,
    pub verdict: ConvexityVerdict,
}

/// Curvature diagnostics for a tau estimate on a uniform q-grid.
pub fn convexity_report<T: Real>(tau: &[T], qs: &[T]) -> Result<ConvexityReport<T>> {
    if tau.len() < 3 {
        return Err(Error::InsufficientData(
            "need at least 3 grid points for curvature".into(),
        ));
    }
    let _ = qs;
    let d2: Vec<T> = tau
        .windows(3)
        .map(|w| -(w[2] - T::from_f64_lossy(2.0) * w[1] + w[0]))
        .collect();
    let min = d2.iter().copied().fold(T::infinity(), T::min);
    let max = d2.iter().copied().fold(T::neg_infinity(), T::max);
    let tol = T::from_f64_lossy(AFFINE_TOL);
    let verdict = if min.abs().max(max.abs()) <= tol {
        ConvexityVerdict::Affine
    } else if min > T::zero() {
        ConvexityVerdict::StrictlyConvex
    } else {
        ConvexityVerdict::NotStrictlyConvex
    };
    Ok(ConvexityReport {
        second_differences: d2,
        min,
        max,
        verdict,
    })
}

/// Upper concave hull of tau over q (the Legendre transform only depends on
/// it). Returned curve matches tau where tau already lies on the hull.
pub fn concave_hull<T: Real>(tau: &[T], qs: &[T]) -> Vec<T> {
    // lower convex hull of (q, -tau) by monotone chain, then interpolate
    let pts: Vec<(T, T)> = qs.iter().copied().zip(tau.iter().map(|&t| -t)).collect();
    let mut hull: Vec<(T, T)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= T::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::with_capacity(qs.len());
    let mut seg = 0usize;
    for &q in qs {
        while seg + 1 < hull.len() - 1 && hull[seg + 1].0 < q {
            seg += 1;
        }
        let (x0, y0) = hull[seg];
        let (x1, y1) = hull[(seg + 1).min(hull.len() - 1)];
        let y = if x1 == x0 {
            y0
        } else {
            y0 + (y1 - y0) * (q - x0) / (x1 - x0)
        };
        out.push(-y);
    }
    out
}

/// Full pipeline: tau fit, curvature check, Legendre transform. When the
/// curvature verdict is neither affine nor strict, tau is replaced by its
/// concave hull before differencing and the substitution is flagged.
pub fn estimate_spectrum<T: Real>(
    matrix: &ScaleMatrix<T>,
    grid: &QGrid<T>,
    mesh_mode: MeshMode,
    source: MassSource,
    skip_depths: usize,
) -> Result<SpectrumEstimate<T>> {
    let mut estimate = tau_fit(matrix, grid, mesh_mode, source, skip_depths)?;
    if estimate.q.len() < 3 {
        // too few grid points to difference; report tau only
        return Ok(estimate);
    }
    let report = convexity_report(&estimate.tau, &estimate.q)?;
    let tau_for_legendre = if report.verdict == ConvexityVerdict::NotStrictlyConvex {
        estimate.hull_applied = true;
        concave_hull(&estimate.tau, &estimate.q)
    } else {
        estimate.tau.clone()
    };
    let (alpha, f) = legendre(&tau_for_legendre, &estimate.q)?;
    estimate.alpha = alpha;
    estimate.f = f;
    Ok(estimate)
}
