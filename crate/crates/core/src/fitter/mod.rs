//! Online least-squares over quadric feature vectors.
//!
//! All three sub-models reduce to the same normal-equation form: a k×k
//! accumulator Ā = Σ v vᵀ and a k-vector b̄ = Σ τ·v, where v is the feature
//! vector of a candidate point and τ its scalar target. Frames contribute
//! whole batches; events contribute single rows, applied either batched or
//! through a rank-1 update of the cached inverse.

mod engine;

pub use engine::{gate_event, process_stream, Emission, FitSource, Membership, ModelBus, TrackingEngine};

use nalgebra::{SMatrix, SVector};

use crate::model::Point;

// ── Errors ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitError {
    /// Fewer observations than parameters; a solve would be meaningless.
    InsufficientObservations { needed: usize, got: usize },
    /// Ā is not invertible to working precision.
    Singular,
    /// The rank-1 update denominator fell below tolerance.
    NumericalBreakdown,
}

impl std::fmt::Display for FitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::InsufficientObservations { needed, got } => {
                write!(f, "insufficient observations: need {}, got {}", needed, got)
            }
            Self::Singular => write!(f, "singular accumulator matrix"),
            Self::NumericalBreakdown => write!(f, "rank-1 update denominator below tolerance"),
        }
    }
}

impl std::error::Error for FitError {}

// ── Configuration ──────────────────────────────────────────────────────────

/// Blending and gating knobs shared by all three sub-model fitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Frame-batch blend: old state weight; new frame data gets 1−γ.
    pub gamma: f64,
    /// Event blend: old state weight per event batch (or per event when
    /// `events_per_fit` is 1).
    pub gamma_prime: f64,
    /// Gating distance in pixels.
    pub delta: f64,
    /// Number of gated events accumulated before one solve.
    pub events_per_fit: usize,
    /// Rank-1 updates between full re-inversions of the cached inverse.
    pub refresh_period: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            gamma: 0.4,
            gamma_prime: 0.9,
            delta: 2.0,
            events_per_fit: 20,
            refresh_period: 1000,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma must be in [0,1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gamma_prime) {
            return Err(format!("gamma_prime must be in [0,1], got {}", self.gamma_prime));
        }
        if self.delta <= 0.0 {
            return Err(format!("delta must be positive, got {}", self.delta));
        }
        if self.events_per_fit == 0 {
            return Err("events_per_fit must be >= 1".into());
        }
        if self.refresh_period == 0 {
            return Err("refresh_period must be >= 1".into());
        }
        Ok(())
    }
}

// ── Feature vectors and targets ────────────────────────────────────────────

/// Ellipse row: v = (x², xy, y², x, y), target 1 (constant term fixed at −1).
#[inline]
pub fn ellipse_feature(p: Point) -> SVector<f64, 5> {
    let (x, y) = (p.x, p.y);
    SVector::<f64, 5>::new(x * x, x * y, y * y, x, y)
}

#[inline]
pub fn ellipse_target(_p: Point) -> f64 {
    1.0
}

/// Parabola row: v = (y², y, 1), target x.
#[inline]
pub fn parabola_feature(p: Point) -> SVector<f64, 3> {
    SVector::<f64, 3>::new(p.y * p.y, p.y, 1.0)
}

#[inline]
pub fn parabola_target(p: Point) -> f64 {
    p.x
}

/// Circle row: v = (x, y, 1) for the linearized form with a = b = 1, h = 0;
/// the solved parameters are (g, f, d) with target −(x² + y²).
#[inline]
pub fn circle_feature(p: Point) -> SVector<f64, 3> {
    SVector::<f64, 3>::new(p.x, p.y, 1.0)
}

#[inline]
pub fn circle_target(p: Point) -> f64 {
    -(p.x * p.x + p.y * p.y)
}

/// Sums feature outer products and target-weighted features over a batch.
pub fn accumulate<const K: usize>(
    points: &[Point],
    feature: impl Fn(Point) -> SVector<f64, K>,
    target: impl Fn(Point) -> f64,
) -> (SMatrix<f64, K, K>, SVector<f64, K>) {
    let mut a = SMatrix::<f64, K, K>::zeros();
    let mut b = SVector::<f64, K>::zeros();
    for &p in points {
        let v = feature(p);
        a.ger(1.0, &v, &v, 1.0);
        b.axpy(target(p), &v, 1.0);
    }
    (a, b)
}

pub fn accumulate_ellipse(points: &[Point]) -> (SMatrix<f64, 5, 5>, SVector<f64, 5>) {
    accumulate(points, ellipse_feature, ellipse_target)
}

pub fn accumulate_parabola(points: &[Point]) -> (SMatrix<f64, 3, 3>, SVector<f64, 3>) {
    accumulate(points, parabola_feature, parabola_target)
}

pub fn accumulate_circle(points: &[Point]) -> (SMatrix<f64, 3, 3>, SVector<f64, 3>) {
    accumulate(points, circle_feature, circle_target)
}

// ── Solution → parameter mapping ───────────────────────────────────────────

pub fn ellipse_from_solution(v: &SVector<f64, 5>) -> crate::model::EllipseParams {
    crate::model::EllipseParams::new(v[0], v[1], v[2], v[3], v[4])
}

pub fn parabola_from_solution(v: &SVector<f64, 3>) -> crate::model::ParabolaParams {
    crate::model::ParabolaParams::new(v[0], v[1], v[2])
}

/// Maps the linear solution (g, f, d) back to center/radius form.
/// Returns `None` when the implied squared radius is not positive.
pub fn circle_from_solution(v: &SVector<f64, 3>) -> Option<crate::model::CircleParams> {
    let cx = -0.5 * v[0];
    let cy = -0.5 * v[1];
    let r2 = cx * cx + cy * cy - v[2];
    if r2 <= 0.0 || !r2.is_finite() {
        return None;
    }
    Some(crate::model::CircleParams::new(cx, cy, r2.sqrt()))
}

// ── Fit state ──────────────────────────────────────────────────────────────

/// Scale of the ridge prior Ā₀ = ε·I. The prior exists only to keep the
/// state invertible before data arrives; it must sit far below the data
/// magnitude so it cannot bias weak directions of the accumulator. (In a
/// raw-pixel formulation the accumulator entries are ~1e8 and ε = 1 is
/// equally negligible; fitting here runs in normalized coordinates.)
pub const PRIOR_SCALE: f64 = 1e-9;

/// Accumulators for one sub-model: Ā, b̄ and the cached inverse.
///
/// Initialized to Ā = ε·I, b̄ = 0 so the state is invertible from the
/// start; the ridge prior decays geometrically under blending.
#[derive(Debug, Clone, PartialEq)]
pub struct FitState<const K: usize> {
    a_bar: SMatrix<f64, K, K>,
    b_bar: SVector<f64, K>,
    /// Fresh inverse of `a_bar`, or `None` after a batch blend.
    a_inv: Option<SMatrix<f64, K, K>>,
    observations: usize,
    rank1_since_refresh: usize,
}

impl<const K: usize> Default for FitState<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const K: usize> FitState<K> {
    pub fn new() -> Self {
        Self {
            a_bar: SMatrix::identity() * PRIOR_SCALE,
            b_bar: SVector::zeros(),
            a_inv: Some(SMatrix::identity() / PRIOR_SCALE),
            observations: 0,
            rank1_since_refresh: 0,
        }
    }

    pub fn a_bar(&self) -> &SMatrix<f64, K, K> {
        &self.a_bar
    }

    pub fn b_bar(&self) -> &SVector<f64, K> {
        &self.b_bar
    }

    pub fn cached_inverse(&self) -> Option<&SMatrix<f64, K, K>> {
        self.a_inv.as_ref()
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn rank1_updates_since_refresh(&self) -> usize {
        self.rank1_since_refresh
    }

    /// Ā ← γ·Ā + (1−γ)·A and likewise for b̄; invalidates the cached inverse.
    pub fn blend_batch(
        &mut self,
        a: &SMatrix<f64, K, K>,
        b: &SVector<f64, K>,
        gamma: f64,
        count: usize,
    ) {
        self.a_bar = self.a_bar * gamma + a * (1.0 - gamma);
        self.b_bar = self.b_bar * gamma + b * (1.0 - gamma);
        self.a_inv = None;
        self.observations += count;
    }

    /// Rank-1 blend of one feature row, updating the cached inverse in place:
    ///
    ///   Ā⁻¹ ← (1/γ′)Ā⁻¹ − ((1−γ′)/γ′) · (Ā⁻¹ v vᵀ Ā⁻¹) / (γ′ + (1−γ′)·vᵀĀ⁻¹v)
    ///
    /// which is the exact inverse of γ′·Ā + (1−γ′)·v vᵀ.
    pub fn rank1_update(
        &mut self,
        v: &SVector<f64, K>,
        target: f64,
        gamma_prime: f64,
    ) -> Result<(), FitError> {
        if gamma_prime < 1e-12 {
            return Err(FitError::NumericalBreakdown);
        }
        if gamma_prime >= 1.0 {
            // Degenerate blend: new data carries zero weight.
            self.observations += 1;
            return Ok(());
        }
        if self.a_inv.is_none() {
            self.refresh()?;
        }
        let inv = self.a_inv.expect("inverse is fresh");
        let inv_v = inv * v;
        let denom = gamma_prime + (1.0 - gamma_prime) * v.dot(&inv_v);
        if denom.abs() < 1e-12 {
            return Err(FitError::NumericalBreakdown);
        }
        let scale = (1.0 - gamma_prime) / (gamma_prime * denom);
        let mut new_inv = inv / gamma_prime;
        new_inv.ger(-scale, &inv_v, &inv_v, 1.0);
        self.a_inv = Some(new_inv);
        // Keep Ā itself current so refreshes and diagnostics stay exact.
        self.a_bar *= gamma_prime;
        self.a_bar.ger(1.0 - gamma_prime, v, v, 1.0);
        self.b_bar = self.b_bar * gamma_prime + v * ((1.0 - gamma_prime) * target);
        self.observations += 1;
        self.rank1_since_refresh += 1;
        Ok(())
    }

    /// Recomputes the cached inverse by full inversion.
    pub fn refresh(&mut self) -> Result<(), FitError> {
        let inv = self.a_bar.try_inverse().ok_or(FitError::Singular)?;
        // Guard against ill-conditioned "successes".
        let id_err = (self.a_bar * inv - SMatrix::<f64, K, K>::identity()).abs().max();
        if !id_err.is_finite() || id_err > 1e-6 {
            return Err(FitError::Singular);
        }
        self.a_inv = Some(inv);
        self.rank1_since_refresh = 0;
        Ok(())
    }

    /// Solves for the parameter vector, refreshing the inverse if stale.
    pub fn solve(&mut self) -> Result<SVector<f64, K>, FitError> {
        if self.observations < K {
            return Err(FitError::InsufficientObservations {
                needed: K,
                got: self.observations,
            });
        }
        if self.a_inv.is_none() {
            self.refresh()?;
        }
        Ok(self.a_inv.as_ref().expect("inverse is fresh") * self.b_bar)
    }
}
