//! Parametric eye model and closed-form conic geometry.
//!
//! The eye is described by three sub-models fitted independently from the
//! same data streams: an ellipse for the pupil, a parabola for the eyelid
//! and a circle for the glint. All curve parameters live in image
//! coordinates (x along columns, y along rows, y growing downward).

use nalgebra::{Point2, Vector2};

/// Image-plane point, f64 pixel coordinates.
pub type Point = Point2<f64>;

/// Tolerance below which |h² − 4ab| is treated as a degenerate conic.
pub const DEGENERACY_TOL: f64 = 1e-12;

// ── Errors ─────────────────────────────────────────────────────────────────

/// Failures of the closed-form geometry operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryError {
    /// |h² − 4ab| below tolerance: the conic has no unique center.
    DegenerateConic,
    /// Projection ray undefined: the query point coincides with the center.
    PointAtCenter,
    /// The quadratic form does not describe a real ellipse with positive radii.
    NotAnEllipse,
    /// Minor radius below tolerance; eccentricity unbounded.
    DegenerateRadius,
}

impl std::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::DegenerateConic => write!(f, "degenerate conic: h^2 - 4ab is ~0"),
            Self::PointAtCenter => write!(f, "projection undefined at the ellipse center"),
            Self::NotAnEllipse => write!(f, "parameters do not describe a real ellipse"),
            Self::DegenerateRadius => write!(f, "minor radius below tolerance"),
        }
    }
}

impl std::error::Error for GeometryError {}

// ── Stream primitives ──────────────────────────────────────────────────────

/// One change packet from the event stream: timestamp (µs), pixel location
/// and contrast-change sign (±1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: i8,
}

impl Event {
    pub fn point(&self) -> Point {
        Point::new(self.x as f64, self.y as f64)
    }
}

/// Grayscale frame, 8-bit row-major pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub t: u64,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    /// Builds a frame, checking that the pixel buffer matches the dimensions.
    pub fn new(t: u64, width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return None;
        }
        Some(Self { t, width, height, pixels })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

// ── Pupil ellipse ──────────────────────────────────────────────────────────

/// Implicit ellipse a·x² + h·xy + b·y² + g·x + f·y = 1.
///
/// The constant term is fixed to −1, which removes the scale freedom of the
/// conic equation; conics passing through the origin cannot be represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams {
    pub a: f64,
    pub h: f64,
    pub b: f64,
    pub g: f64,
    pub f: f64,
}

impl EllipseParams {
    pub fn new(a: f64, h: f64, b: f64, g: f64, f: f64) -> Self {
        Self { a, h, b, g, f }
    }

    /// Builds the implicit form from center, semi-axes and rotation angle.
    ///
    /// Returns `None` when the ellipse passes through the origin (constant
    /// term of the un-normalized conic vanishes) or the radii are not positive.
    pub fn from_geometric(cx: f64, cy: f64, rx: f64, ry: f64, angle: f64) -> Option<Self> {
        if rx <= 0.0 || ry <= 0.0 {
            return None;
        }
        let (sin, cos) = angle.sin_cos();
        // Quadratic form Q = R diag(1/rx², 1/ry²) Rᵀ.
        let inv_rx2 = 1.0 / (rx * rx);
        let inv_ry2 = 1.0 / (ry * ry);
        let q00 = cos * cos * inv_rx2 + sin * sin * inv_ry2;
        let q01 = sin * cos * (inv_rx2 - inv_ry2);
        let q11 = sin * sin * inv_rx2 + cos * cos * inv_ry2;
        // (z−c)ᵀ Q (z−c) = 1 expanded; normalize the constant term to −1.
        let qc_x = q00 * cx + q01 * cy;
        let qc_y = q01 * cx + q11 * cy;
        let konst = cx * qc_x + cy * qc_y - 1.0;
        if konst.abs() < 1e-12 {
            return None;
        }
        let s = -1.0 / konst;
        Some(Self {
            a: s * q00,
            h: s * 2.0 * q01,
            b: s * q11,
            g: s * -2.0 * qc_x,
            f: s * -2.0 * qc_y,
        })
    }

    /// Signed residual a·x² + h·xy + b·y² + g·x + f·y − 1; zero on the curve.
    #[inline]
    pub fn residual(&self, p: Point) -> f64 {
        let (x, y) = (p.x, p.y);
        self.a * x * x + self.h * x * y + self.b * y * y + self.g * x + self.f * y - 1.0
    }

    #[inline]
    pub fn discriminant(&self) -> f64 {
        self.h * self.h - 4.0 * self.a * self.b
    }

    /// True when the discriminant marks an ellipse-type conic.
    #[inline]
    pub fn is_ellipse_type(&self) -> bool {
        self.discriminant() < 0.0
    }

    /// Center of the conic, from the stationary point of the quadratic.
    pub fn center(&self) -> Result<Point, GeometryError> {
        let det = self.discriminant();
        if det.abs() < DEGENERACY_TOL {
            return Err(GeometryError::DegenerateConic);
        }
        let x = (2.0 * self.b * self.g - self.h * self.f) / det;
        let y = (2.0 * self.a * self.f - self.h * self.g) / det;
        Ok(Point::new(x, y))
    }

    /// Intersection of the ray from the center through `p` with the curve,
    /// on `p`'s side of the center.
    ///
    /// Along the ray c + s·(p − c) the linear term vanishes (the gradient is
    /// zero at the center), leaving one quadratic equation in s.
    pub fn project(&self, p: Point) -> Result<Point, GeometryError> {
        let c = self.center()?;
        let d: Vector2<f64> = p - c;
        let dist2 = d.norm_squared();
        if dist2 < 1e-24 {
            return Err(GeometryError::PointAtCenter);
        }
        let quad = self.a * d.x * d.x + self.h * d.x * d.y + self.b * d.y * d.y;
        let at_center = self.residual(c);
        // Inside a real ellipse the center residual and the quadratic form
        // have opposite signs regardless of the overall coefficient sign.
        let s2 = -at_center / quad;
        if !(s2 > 0.0) || !s2.is_finite() {
            return Err(GeometryError::NotAnEllipse);
        }
        let s = s2.sqrt();
        Ok(c + d * s)
    }

    /// Semi-axis lengths (major, minor) from the 2×2 form eigenvalues and
    /// the centered constant term.
    pub fn radii(&self) -> Result<(f64, f64), GeometryError> {
        let c = self.center()?;
        let at_center = self.residual(c);
        let mean = 0.5 * (self.a + self.b);
        let spread = (0.25 * (self.a - self.b) * (self.a - self.b)
            + 0.25 * self.h * self.h)
            .sqrt();
        let l1 = mean - spread;
        let l2 = mean + spread;
        let r1 = -at_center / l1;
        let r2 = -at_center / l2;
        if !(r1 > 0.0) || !(r2 > 0.0) || !r1.is_finite() || !r2.is_finite() {
            return Err(GeometryError::NotAnEllipse);
        }
        let (major2, minor2) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
        Ok((major2.sqrt(), minor2.sqrt()))
    }

    /// Major/minor radius ratio, ≥ 1 for a real ellipse.
    pub fn eccentricity(&self) -> Result<f64, GeometryError> {
        let (major, minor) = self.radii()?;
        if minor < 1e-12 {
            return Err(GeometryError::DegenerateRadius);
        }
        Ok(major / minor)
    }

    /// `n` points on the curve, evenly spaced in the parametric angle.
    pub fn sample_points(&self, n: usize) -> Result<Vec<Point>, GeometryError> {
        let c = self.center()?;
        let at_center = self.residual(c);
        let mean = 0.5 * (self.a + self.b);
        let spread = (0.25 * (self.a - self.b) * (self.a - self.b)
            + 0.25 * self.h * self.h)
            .sqrt();
        // The direction 0.5·atan2(h, a−b) carries the eigenvalue mean+spread
        // of [[a, h/2], [h/2, b]]; its radius is −E(c)/(mean+spread).
        let r_along2 = -at_center / (mean + spread);
        let r_perp2 = -at_center / (mean - spread);
        if !(r_along2 > 0.0) || !(r_perp2 > 0.0) {
            return Err(GeometryError::NotAnEllipse);
        }
        let (r_along, r_perp) = (r_along2.sqrt(), r_perp2.sqrt());
        let angle = if self.h.abs() < 1e-15 && (self.a - self.b).abs() < 1e-15 {
            0.0
        } else {
            0.5 * self.h.atan2(self.a - self.b)
        };
        let (sin, cos) = angle.sin_cos();
        Ok((0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let px = r_along * t.cos();
                let py = r_perp * t.sin();
                Point::new(c.x + cos * px - sin * py, c.y + sin * px + cos * py)
            })
            .collect())
    }
}

// ── Eyelid parabola ────────────────────────────────────────────────────────

/// Eyelid curve x = a·y² + g·y + d (column as a function of row).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaParams {
    pub a: f64,
    pub g: f64,
    pub d: f64,
}

impl ParabolaParams {
    pub fn new(a: f64, g: f64, d: f64) -> Self {
        Self { a, g, d }
    }

    /// Curve abscissa at row `y`.
    #[inline]
    pub fn x_at(&self, y: f64) -> f64 {
        self.a * y * y + self.g * y + self.d
    }

    /// Signed residual a·y² + g·y + d − x; zero on the curve.
    #[inline]
    pub fn residual(&self, p: Point) -> f64 {
        self.x_at(p.y) - p.x
    }

    /// A valid eyelid curve must not degenerate to a line.
    pub fn is_valid(&self) -> bool {
        self.a.is_finite() && self.g.is_finite() && self.d.is_finite() && self.a != 0.0
    }
}

// ── Glint circle ───────────────────────────────────────────────────────────

/// Glint circle with center (cx, cy) and radius r, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleParams {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl CircleParams {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, r }
    }

    /// Quadric residual x² + y² − 2x·cx − 2y·cy + (cx² + cy² − r²).
    ///
    /// Equals ‖p − c‖² − r², so it vanishes exactly on the circle.
    #[inline]
    pub fn residual(&self, p: Point) -> f64 {
        let (x, y) = (p.x, p.y);
        x * x + y * y - 2.0 * x * self.cx - 2.0 * y * self.cy
            + (self.cx * self.cx + self.cy * self.cy - self.r * self.r)
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn is_valid(&self) -> bool {
        self.r > 0.0 && self.r.is_finite() && self.cx.is_finite() && self.cy.is_finite()
    }
}

// ── Combined eye model ─────────────────────────────────────────────────────

/// The full eye model: pupil ellipse, eyelid parabola and glint circle.
///
/// Each sub-model is `None` until its fitter has produced a first valid
/// solve; afterwards it always holds the last valid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EyeModel {
    pub ellipse: Option<EllipseParams>,
    pub eyelid: Option<ParabolaParams>,
    pub glint: Option<CircleParams>,
    /// Timestamp (µs) of the last successful sub-model update.
    pub last_update_t: u64,
}

impl EyeModel {
    /// Pupil center, when the ellipse is valid and non-degenerate.
    pub fn pupil_center(&self) -> Option<Point> {
        self.ellipse.and_then(|e| e.center().ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Unit circle in d=−1 form: x² + y² = 1.
    fn unit_circle() -> EllipseParams {
        EllipseParams::new(1.0, 0.0, 1.0, 0.0, 0.0)
    }

    #[test]
    fn residual_on_and_off_curve() {
        let e = unit_circle();
        assert_eq!(e.residual(Point::new(1.0, 0.0)), 0.0);
        assert_eq!(e.residual(Point::new(0.0, 0.0)), -1.0);
    }

    #[test]
    fn residual_zero_after_geometric_construction() {
        // x²/4 + y² = 1; the origin is interior so d=−1 scaling exists.
        let e = EllipseParams::from_geometric(0.0, 0.0, 2.0, 1.0, 0.0).expect("construction");
        assert_relative_eq!(e.residual(Point::new(2.0, 0.0)), 0.0, epsilon = 1e-9);
        assert_relative_eq!(e.residual(Point::new(0.0, 1.0)), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn center_trivial_and_translated() {
        assert_eq!(unit_circle().center().unwrap(), Point::new(0.0, 0.0));

        // (x−3)² + (y−4)² = 1, expanded and normalized to d=−1.
        let c = EllipseParams::from_geometric(3.0, 4.0, 1.0, 1.0, 0.0).unwrap();
        let p = c.center().unwrap();
        assert_relative_eq!(p.x, 3.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 4.0, epsilon = 1e-12);

        let e = EllipseParams::from_geometric(10.0, 20.0, 4.0, 2.0, 0.0).unwrap();
        let p = e.center().unwrap();
        assert_relative_eq!(p.x, 10.0, epsilon = 1e-9);
        assert_relative_eq!(p.y, 20.0, epsilon = 1e-9);
    }

    #[test]
    fn center_invariant_under_uniform_coefficient_scaling() {
        // The center formula is homogeneous of degree zero in the
        // coefficient vector, so rescaling (a,h,b,g,f) leaves it unchanged.
        let e = EllipseParams::from_geometric(40.0, 30.0, 8.0, 5.0, 0.7).unwrap();
        let c0 = e.center().unwrap();
        for s in [0.25, 3.0, 1e4, -2.0] {
            let scaled = EllipseParams::new(e.a * s, e.h * s, e.b * s, e.g * s, e.f * s);
            let c = scaled.center().unwrap();
            assert_relative_eq!(c.x, c0.x, epsilon = 1e-9);
            assert_relative_eq!(c.y, c0.y, epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_center_rejected() {
        // h² − 4ab = 0 (parabola-type)
        let e = EllipseParams::new(1.0, 2.0, 1.0, 0.0, 0.0);
        assert_eq!(e.center(), Err(GeometryError::DegenerateConic));
    }

    #[test]
    fn projection_radial_cases() {
        let e = unit_circle();
        let p = e.project(Point::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);

        // Interior points project outward along the same ray.
        let p = e.project(Point::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(p.x, 1.0, epsilon = 1e-12);

        // Ellipse x²/4 + y² = 1, query above the top vertex.
        let e = EllipseParams::from_geometric(0.0, 0.0, 2.0, 1.0, 0.0).unwrap();
        let p = e.project(Point::new(0.0, 3.0)).unwrap();
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn projection_at_center_errors() {
        let e = unit_circle();
        assert_eq!(e.project(Point::new(0.0, 0.0)), Err(GeometryError::PointAtCenter));
    }

    #[test]
    fn projection_lands_on_curve_for_many_query_points() {
        let e = EllipseParams::from_geometric(120.0, 90.0, 25.0, 14.0, 0.4).unwrap();
        for i in 0..64 {
            let ang = i as f64 * 0.1;
            let p = Point::new(120.0 + 60.0 * ang.cos(), 90.0 + 45.0 * ang.sin());
            let proj = e.project(p).unwrap();
            assert!(
                e.residual(proj).abs() < 1e-9,
                "residual {} at query {:?}",
                e.residual(proj),
                p
            );
        }
    }

    #[test]
    fn eccentricity_circle_and_axis_aligned() {
        let c = EllipseParams::from_geometric(50.0, 60.0, 7.0, 7.0, 0.0).unwrap();
        assert_relative_eq!(c.eccentricity().unwrap(), 1.0, epsilon = 1e-12);

        let e = EllipseParams::from_geometric(10.0, 20.0, 4.0, 2.0, 0.0).unwrap();
        assert_relative_eq!(e.eccentricity().unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn eccentricity_invariant_under_rotation() {
        let base = EllipseParams::from_geometric(80.0, 70.0, 3.0, 1.0, 0.0).unwrap();
        let expected = base.eccentricity().unwrap();
        assert_relative_eq!(expected, 3.0, epsilon = 1e-9);
        for k in 1..8 {
            let angle = k as f64 * std::f64::consts::FRAC_PI_8;
            let rot = EllipseParams::from_geometric(80.0, 70.0, 3.0, 1.0, angle).unwrap();
            assert_relative_eq!(rot.eccentricity().unwrap(), expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn radii_match_geometric_construction() {
        let e = EllipseParams::from_geometric(100.0, 80.0, 20.0, 12.0, 1.1).unwrap();
        let (major, minor) = e.radii().unwrap();
        assert_relative_eq!(major, 20.0, epsilon = 1e-9);
        assert_relative_eq!(minor, 12.0, epsilon = 1e-9);
    }

    #[test]
    fn sampled_points_satisfy_residual() {
        let e = EllipseParams::from_geometric(100.0, 80.0, 20.0, 12.0, 0.6).unwrap();
        for p in e.sample_points(40).unwrap() {
            assert!(e.residual(p).abs() < 1e-9);
        }
    }

    #[test]
    fn parabola_residual_cases() {
        let p = ParabolaParams::new(1.0, 0.0, 0.0); // x = y²
        assert_eq!(p.residual(Point::new(4.0, 2.0)), 0.0);
        assert_eq!(p.residual(Point::new(0.0, 2.0)), 4.0);

        let q = ParabolaParams::new(2.0, 1.0, 5.0); // x = 2y² + y + 5
        assert_eq!(q.residual(Point::new(q.x_at(-3.0), -3.0)), 0.0);
    }

    #[test]
    fn circle_residual_cases() {
        let c = CircleParams::new(0.0, 0.0, 1.0);
        assert_eq!(c.residual(Point::new(1.0, 0.0)), 0.0);
        assert_eq!(c.residual(Point::new(0.0, 0.0)), -1.0);

        let c = CircleParams::new(3.0, 4.0, 2.0);
        assert_eq!(c.residual(Point::new(5.0, 4.0)), 0.0);
    }

    #[test]
    fn circle_residual_zero_iff_on_circle() {
        let c = CircleParams::new(7.0, -2.0, 3.5);
        for i in 0..32 {
            let ang = i as f64 * 0.2;
            let on = Point::new(7.0 + 3.5 * ang.cos(), -2.0 + 3.5 * ang.sin());
            assert!(c.residual(on).abs() < 1e-9);
            let off = Point::new(7.0 + 3.6 * ang.cos(), -2.0 + 3.6 * ang.sin());
            assert!(c.residual(off).abs() > 1e-3);
        }
    }

    #[test]
    fn frame_construction_validates_buffer() {
        assert!(Frame::new(0, 4, 3, vec![0; 12]).is_some());
        assert!(Frame::new(0, 4, 3, vec![0; 11]).is_none());
        assert!(Frame::new(0, 0, 3, vec![]).is_none());
    }
}
