//! Evaluation quantities: accuracy, precision, smoothness, IOU, center error.

use crate::model::{EllipseParams, GeometryError, Point};

/// Fraction trimmed from each end of the sorted deviations before the
/// accuracy and precision statistics are computed.
pub const TRIM_FRACTION: f64 = 0.025;

/// Contribution cap for zero or near-zero steps in the smoothness sum; the
/// reciprocal-step formula is undefined for repeated centers.
pub const SMOOTHNESS_STEP_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    /// No samples survived blink filtering (or trimming).
    EmptyAfterFiltering,
    /// Too few samples for the requested statistic.
    InsufficientSamples { needed: usize, got: usize },
    /// Mask dimensions differ.
    DimensionMismatch,
    /// A degenerate conic was passed to the center-error computation.
    Degenerate(GeometryError),
}

impl std::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::EmptyAfterFiltering => write!(f, "no samples left after filtering"),
            Self::InsufficientSamples { needed, got } => {
                write!(f, "need at least {} samples, got {}", needed, got)
            }
            Self::DimensionMismatch => write!(f, "mask dimensions differ"),
            Self::Degenerate(e) => write!(f, "{}", e),
        }
    }
}

impl std::error::Error for MetricsError {}

/// One gaze estimate paired with its ground truth, both in (unsigned)
/// visual-angle degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t: u64,
    pub estimate: (f64, f64),
    pub truth: (f64, f64),
    pub blink: bool,
}

/// Binary occupancy raster of a filled pupil ellipse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PupilMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl PupilMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    /// Rasterizes the interior of an ellipse. Interior pixels share the
    /// residual sign of the center, which makes the test independent of the
    /// overall coefficient scale.
    pub fn from_ellipse(e: &EllipseParams, width: usize, height: usize) -> Self {
        let mut mask = Self::empty(width, height);
        let center_sign = match e.center() {
            Ok(c) => e.residual(c),
            Err(_) => return mask,
        };
        for y in 0..height {
            for x in 0..width {
                let r = e.residual(Point::new(x as f64, y as f64));
                // Boundary pixels (residual 0) count as interior.
                mask.bits[y * width + x] = r * center_sign >= 0.0;
            }
        }
        mask
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

fn trim_count(n: usize) -> usize {
    (n as f64 * TRIM_FRACTION).floor() as usize
}

/// Sorts ascending and removes `trim_count(n)` values from each end.
fn trim_symmetric(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics input"));
    let k = trim_count(values.len());
    values[k..values.len() - k].to_vec()
}

/// Mean angular error ‖estimate − truth‖₂ over non-blink samples, after
/// symmetric trimming of the per-sample errors.
pub fn accuracy(samples: &[GazeSample]) -> Result<f64, MetricsError> {
    let errors: Vec<f64> = samples
        .iter()
        .filter(|s| !s.blink)
        .map(|s| {
            let dx = s.estimate.0 - s.truth.0;
            let dy = s.estimate.1 - s.truth.1;
            (dx * dx + dy * dy).sqrt()
        })
        .collect();
    if errors.is_empty() {
        return Err(MetricsError::EmptyAfterFiltering);
    }
    let kept = trim_symmetric(errors);
    if kept.is_empty() {
        return Err(MetricsError::EmptyAfterFiltering);
    }
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Spread of the estimates about their own mean, as the n−1 standard
/// deviation of the 2-vector deviations (component variances summed).
///
/// Trimming removes the samples with the largest and smallest deviation
/// norms from the untrimmed mean; the statistic is then recomputed on the
/// kept samples about their own mean.
pub fn precision(samples: &[GazeSample]) -> Result<f64, MetricsError> {
    let est: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| !s.blink)
        .map(|s| s.estimate)
        .collect();
    if est.len() < 2 {
        return Err(MetricsError::InsufficientSamples { needed: 2, got: est.len() });
    }
    let n = est.len() as f64;
    let mean = (
        est.iter().map(|e| e.0).sum::<f64>() / n,
        est.iter().map(|e| e.1).sum::<f64>() / n,
    );
    let mut by_dev: Vec<(f64, (f64, f64))> = est
        .iter()
        .map(|e| {
            let d = ((e.0 - mean.0).powi(2) + (e.1 - mean.1).powi(2)).sqrt();
            (d, *e)
        })
        .collect();
    by_dev.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite metrics input"));
    let k = trim_count(by_dev.len());
    let kept: Vec<(f64, f64)> = by_dev[k..by_dev.len() - k].iter().map(|e| e.1).collect();
    if kept.len() < 2 {
        return Err(MetricsError::InsufficientSamples { needed: 2, got: kept.len() });
    }
    let m = kept.len() as f64;
    let kmean = (
        kept.iter().map(|e| e.0).sum::<f64>() / m,
        kept.iter().map(|e| e.1).sum::<f64>() / m,
    );
    let ss: f64 = kept
        .iter()
        .map(|e| (e.0 - kmean.0).powi(2) + (e.1 - kmean.1).powi(2))
        .sum();
    Ok((ss / (m - 1.0)).sqrt())
}

/// Mean reciprocal step length of a time-ordered center track; larger is
/// smoother. Steps shorter than 1/cap contribute the cap value.
pub fn smoothness(track: &[Point]) -> Result<f64, MetricsError> {
    if track.len() < 2 {
        return Err(MetricsError::InsufficientSamples { needed: 2, got: track.len() });
    }
    let sum: f64 = track
        .windows(2)
        .map(|w| {
            let step = (w[1] - w[0]).norm();
            if step <= 1.0 / SMOOTHNESS_STEP_CAP {
                SMOOTHNESS_STEP_CAP
            } else {
                1.0 / step
            }
        })
        .sum();
    Ok(sum / (track.len() - 1) as f64)
}

/// Intersection over union of two occupancy masks; 1 when both are empty.
pub fn iou(a: &PupilMask, b: &PupilMask) -> Result<f64, MetricsError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::DimensionMismatch);
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.bits.iter().zip(b.bits.iter()) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Euclidean distance between the two ellipse centers, in pixels.
pub fn center_error(estimate: &EllipseParams, truth: &EllipseParams) -> Result<f64, MetricsError> {
    let a = estimate.center().map_err(MetricsError::Degenerate)?;
    let b = truth.center().map_err(MetricsError::Degenerate)?;
    Ok((a - b).norm())
}
