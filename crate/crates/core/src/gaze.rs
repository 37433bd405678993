//! Pupil-center → screen-coordinate regression and angle conversion.
//!
//! Each screen axis is regressed independently as a bivariate polynomial of
//! the pupil center. Inputs are centered and scaled to [−1, 1] before the
//! least-squares solve so that high-degree monomials stay well conditioned;
//! the affine transform is stored with the coefficients.

use nalgebra::{DMatrix, DVector};

use crate::model::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GazeError {
    /// Fewer calibration pairs than polynomial coefficients.
    TooFewPairs { needed: usize, got: usize },
    /// Collinear or otherwise rank-deficient calibration geometry.
    RankDeficient,
    /// Only degrees 2 and 5 are supported.
    InvalidDegree(usize),
}

impl std::fmt::Display for GazeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TooFewPairs { needed, got } => {
                write!(f, "need at least {} calibration pairs, got {}", needed, got)
            }
            Self::RankDeficient => write!(f, "rank-deficient calibration design matrix"),
            Self::InvalidDegree(d) => write!(f, "unsupported polynomial degree {}", d),
        }
    }
}

impl std::error::Error for GazeError {}

/// One calibration observation: extracted pupil center against the known
/// on-screen target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPair {
    pub pupil: Point,
    pub screen: Point,
}

/// Screen placement relative to the eye, all lengths in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenGeometry {
    pub cx: f64,
    pub cy: f64,
    /// Eye-to-screen distance in the same pixel units.
    pub distance: f64,
    pub width: f64,
    pub height: f64,
}

impl ScreenGeometry {
    /// Horizontal and vertical visual angles in degrees, unsigned.
    pub fn screen_to_angles(&self, x_s: f64, y_s: f64) -> (f64, f64) {
        let deg = 180.0 / std::f64::consts::PI;
        (
            deg * ((x_s - self.cx).abs() / self.distance).atan(),
            deg * ((y_s - self.cy).abs() / self.distance).atan(),
        )
    }
}

/// Number of bivariate monomials up to `degree`.
pub fn coefficient_count(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponent pairs (i, j) of the monomial basis uⁱvʲ in graded
/// lexicographic order: 1, u, v, u², uv, v², ...
pub fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(coefficient_count(degree));
    for total in 0..=degree {
        for i in (0..=total).rev() {
            out.push((i, total - i));
        }
    }
    out
}

/// Calibrated per-axis polynomial map from pupil center to screen point.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeMap {
    degree: usize,
    // u = (x − x_off) / x_scale, v = (y − y_off) / y_scale
    x_off: f64,
    x_scale: f64,
    y_off: f64,
    y_scale: f64,
    coeffs_x: Vec<f64>,
    coeffs_y: Vec<f64>,
}

impl GazeMap {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficients over the scaled basis plus the input transform, in the
    /// order produced by [`monomial_exponents`].
    pub fn scaled_parts(&self) -> (usize, [f64; 4], &[f64], &[f64]) {
        (
            self.degree,
            [self.x_off, self.x_scale, self.y_off, self.y_scale],
            &self.coeffs_x,
            &self.coeffs_y,
        )
    }

    /// Rebuilds a map from its stored parts (the file round-trip path).
    pub fn from_scaled_parts(
        degree: usize,
        transform: [f64; 4],
        coeffs_x: Vec<f64>,
        coeffs_y: Vec<f64>,
    ) -> Result<Self, GazeError> {
        if degree != 2 && degree != 5 {
            return Err(GazeError::InvalidDegree(degree));
        }
        let m = coefficient_count(degree);
        if coeffs_x.len() != m || coeffs_y.len() != m {
            return Err(GazeError::TooFewPairs { needed: m, got: coeffs_x.len().min(coeffs_y.len()) });
        }
        Ok(Self {
            degree,
            x_off: transform[0],
            x_scale: transform[1],
            y_off: transform[2],
            y_scale: transform[3],
            coeffs_x,
            coeffs_y,
        })
    }

    /// Evaluates both axis polynomials at a pupil center.
    pub fn map(&self, pupil: Point) -> Point {
        let u = (pupil.x - self.x_off) / self.x_scale;
        let v = (pupil.y - self.y_off) / self.y_scale;
        let mut pu = [1.0f64; 6];
        let mut pv = [1.0f64; 6];
        for i in 1..=self.degree {
            pu[i] = pu[i - 1] * u;
            pv[i] = pv[i - 1] * v;
        }
        let (mut xs, mut ys) = (0.0, 0.0);
        for (idx, (i, j)) in monomial_exponents(self.degree).into_iter().enumerate() {
            let m = pu[i] * pv[j];
            xs += self.coeffs_x[idx] * m;
            ys += self.coeffs_y[idx] * m;
        }
        Point::new(xs, ys)
    }

    /// Coefficients expressed over the raw (unscaled) pixel monomial basis,
    /// obtained by expanding the affine input substitution.
    pub fn unscaled_coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        (
            expand_affine(self.degree, &self.coeffs_x, self.x_off, self.x_scale, self.y_off, self.y_scale),
            expand_affine(self.degree, &self.coeffs_y, self.x_off, self.x_scale, self.y_off, self.y_scale),
        )
    }
}

/// Expands Σ c·((x−a)/s)ⁱ((y−b)/t)ʲ into raw monomial coefficients.
fn expand_affine(degree: usize, coeffs: &[f64], a: f64, s: f64, b: f64, t: f64) -> Vec<f64> {
    let exps = monomial_exponents(degree);
    // grid[i][j] accumulates the coefficient of xⁱyʲ.
    let mut grid = vec![vec![0.0f64; degree + 1]; degree + 1];
    for (idx, &(i, j)) in exps.iter().enumerate() {
        let c = coeffs[idx];
        if c == 0.0 {
            continue;
        }
        // ((x − a)/s)^i = Σ_k binom(i,k) x^k (−a)^{i−k} / s^i
        let xs = binomial_expansion(i, a, s);
        let ys = binomial_expansion(j, b, t);
        for (k, &cx) in xs.iter().enumerate() {
            for (l, &cy) in ys.iter().enumerate() {
                grid[k][l] += c * cx * cy;
            }
        }
    }
    exps.iter().map(|&(i, j)| grid[i][j]).collect()
}

/// Coefficients of ((x − a)/s)^n in powers of x, index = power.
fn binomial_expansion(n: usize, a: f64, s: f64) -> Vec<f64> {
    let mut out = vec![0.0f64; n + 1];
    let s_inv_n = s.powi(n as i32).recip();
    let mut binom = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            binom *= (n - k + 1) as f64 / k as f64;
        }
        out[k] = binom * (-a).powi((n - k) as i32) * s_inv_n;
    }
    out
}

/// Per-axis linear least squares over the monomial basis.
pub fn calibrate(pairs: &[CalibrationPair], degree: usize) -> Result<GazeMap, GazeError> {
    if degree != 2 && degree != 5 {
        return Err(GazeError::InvalidDegree(degree));
    }
    let m = coefficient_count(degree);
    if pairs.len() < m {
        return Err(GazeError::TooFewPairs { needed: m, got: pairs.len() });
    }

    let (x_off, x_scale) = centering(pairs.iter().map(|p| p.pupil.x));
    let (y_off, y_scale) = centering(pairs.iter().map(|p| p.pupil.y));

    let exps = monomial_exponents(degree);
    let mut design = DMatrix::<f64>::zeros(pairs.len(), m);
    for (row, pair) in pairs.iter().enumerate() {
        let u = (pair.pupil.x - x_off) / x_scale;
        let v = (pair.pupil.y - y_off) / y_scale;
        for (col, &(i, j)) in exps.iter().enumerate() {
            design[(row, col)] = u.powi(i as i32) * v.powi(j as i32);
        }
    }

    let svd = design.svd(true, true);
    let rank = svd.rank(svd.singular_values.max() * 1e-10);
    if rank < m {
        return Err(GazeError::RankDeficient);
    }
    let tx = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.screen.x));
    let ty = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.screen.y));
    let cx = svd.solve(&tx, 0.0).map_err(|_| GazeError::RankDeficient)?;
    let cy = svd.solve(&ty, 0.0).map_err(|_| GazeError::RankDeficient)?;

    Ok(GazeMap {
        degree,
        x_off,
        x_scale,
        y_off,
        y_scale,
        coeffs_x: cx.iter().copied().collect(),
        coeffs_y: cy.iter().copied().collect(),
    })
}

/// Midpoint and half-range of an input coordinate, guarding degenerate spans.
fn centering(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    let off = 0.5 * (min + max);
    let half = 0.5 * (max - min);
    (off, if half > 1e-12 { half } else { 1.0 })
}

/// Root-mean-square residual of a map over a pair set, in screen pixels.
pub fn rms_residual(map: &GazeMap, pairs: &[CalibrationPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let ss: f64 = pairs
        .iter()
        .map(|p| (map.map(p.pupil) - p.screen).norm_squared())
        .sum();
    (ss / pairs.len() as f64).sqrt()
}
