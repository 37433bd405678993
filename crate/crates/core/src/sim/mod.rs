//! Synthetic eye renderer and DVS event generator.
//!
//! Provides ground truth for every end-to-end test: an analytic pupil
//! ellipse moving under scripted trajectories, rendered into 8-bit frames,
//! with per-pixel log-intensity change events generated along the way. The
//! pupil compresses along its displacement direction (cos-projection of a
//! disk on a rotating eyeball), so off-center gaze produces genuinely
//! rotated ellipses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gaze::ScreenGeometry;
use crate::metrics::PupilMask;
use crate::model::{CircleParams, EllipseParams, Event, Frame, ParabolaParams, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimError {
    /// The eye state extends outside the sensor at the requested time.
    OutOfBounds,
    /// The requested time lies outside the scripted trajectory span.
    OutOfSpan,
    /// Scene parameters violate an invariant.
    InvalidScene,
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::OutOfBounds => write!(f, "eye state outside sensor bounds"),
            Self::OutOfSpan => write!(f, "time outside the trajectory span"),
            Self::InvalidScene => write!(f, "invalid scene configuration"),
        }
    }
}

impl std::error::Error for SimError {}

// ── Scene ──────────────────────────────────────────────────────────────────

/// Static scene description: sensor, palette, geometry and DVS parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    /// Resting eyeball center in image coordinates.
    pub eye_center: (f64, f64),
    /// Gaze displacement scale: pupil center offset = radius · sin(angle).
    pub eyeball_radius: f64,
    pub pupil_radius_min: f64,
    pub pupil_radius_max: f64,
    /// Iris radius as a multiple of the pupil radius; the iris moves with
    /// the pupil (they are concentric).
    pub iris_scale: f64,
    pub pupil_intensity: u8,
    pub iris_intensity: u8,
    pub sclera_intensity: u8,
    pub glint_intensity: u8,
    /// Eyelid skin intensity (stripe A of the banded texture).
    pub eyelid_intensity: u8,
    /// Stripe B of the banded eyelid texture.
    pub eyelid_band_intensity: u8,
    /// Stripe height in pixels.
    pub eyelid_band_px: usize,
    /// Eyelid parabola x = a·y² + g·y + d at rest.
    pub eyelid_rest: ParabolaParams,
    /// How far the eyelid apex sweeps across the eye during a blink.
    pub blink_sweep_px: f64,
    /// Glint center offset from the eye center; the glint is static.
    pub glint_offset: (f64, f64),
    pub glint_radius: f64,
    /// DVS firing threshold in log-intensity units.
    pub contrast_threshold: f64,
    pub frame_rate_hz: f64,
    /// Uniform timestamp jitter added to each event, microseconds.
    pub jitter_us: u64,
    /// Internal sampling rate of the continuous trajectory.
    pub sample_rate_hz: f64,
    /// Uniform background noise events per second over the whole array.
    pub noise_rate_hz: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 346,
            height: 260,
            eye_center: (173.0, 130.0),
            eyeball_radius: 110.0,
            pupil_radius_min: 18.0,
            pupil_radius_max: 22.0,
            iris_scale: 2.2,
            pupil_intensity: 10,
            iris_intensity: 80,
            sclera_intensity: 170,
            glint_intensity: 250,
            eyelid_intensity: 100,
            eyelid_band_intensity: 62,
            eyelid_band_px: 12,
            eyelid_rest: ParabolaParams::new(-0.004, 1.04, 42.4),
            blink_sweep_px: 150.0,
            glint_offset: (45.0, -45.0),
            glint_radius: 2.5,
            contrast_threshold: 0.38,
            frame_rate_hz: 25.0,
            jitter_us: 3,
            sample_rate_hz: 100_000.0,
            noise_rate_hz: 0.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let ordered = self.pupil_intensity < self.iris_intensity
            && self.iris_intensity < self.sclera_intensity
            && self.sclera_intensity < self.glint_intensity;
        let positive = self.contrast_threshold > 0.0
            && self.sample_rate_hz > 0.0
            && self.frame_rate_hz > 0.0
            && self.pupil_radius_min > 0.0
            && self.pupil_radius_min <= self.pupil_radius_max
            && self.eyeball_radius > 0.0
            && self.width > 0
            && self.height > 0;
        if ordered && positive {
            Ok(())
        } else {
            Err(SimError::InvalidScene)
        }
    }

    /// Pupil radius used by the scripted scene (middle of the range).
    pub fn pupil_radius(&self) -> f64 {
        0.5 * (self.pupil_radius_min + self.pupil_radius_max)
    }

    pub fn iris_radius(&self) -> f64 {
        self.iris_scale * self.pupil_radius()
    }

    pub fn glint(&self) -> CircleParams {
        CircleParams::new(
            self.eye_center.0 + self.glint_offset.0,
            self.eye_center.1 + self.glint_offset.1,
            self.glint_radius,
        )
    }
}

// ── Trajectories ───────────────────────────────────────────────────────────

/// Saccade peak velocity (px/s) at which the default scene produces a
/// gated pupil-boundary event rate of ~200 events/ms: with the default
/// palette each pupil-edge pixel crossing fires 5 events
/// (⌊ln(80/10)/0.38⌋), and the swept-band rate is 4·r·v̄ crossings/s.
pub const CALIBRATED_PEAK_VELOCITY: f64 = 937.5;

/// Minimum-jerk interpolation factor over τ ∈ [0, 1].
#[inline]
pub fn min_jerk(tau: f64) -> f64 {
    let t3 = tau * tau * tau;
    t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)
}

/// One scripted motion segment of the pupil center, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trajectory {
    Fixation {
        center: (f64, f64),
        duration_us: u64,
    },
    /// Ballistic jump with a minimum-jerk (symmetric-acceleration) profile.
    Saccade {
        start: (f64, f64),
        end: (f64, f64),
        duration_us: u64,
    },
    /// Horizontal triangle sweeps descending a fixed amount per period.
    SmoothPursuitSquareWave {
        start: (f64, f64),
        width: f64,
        period_us: u64,
        descent_px: f64,
        duration_us: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Fixation,
    Saccade,
    Pursuit,
}

impl Trajectory {
    /// Saccade whose duration realizes the requested peak velocity under
    /// the minimum-jerk profile (peak = 1.875 · distance / duration).
    pub fn saccade_with_peak_velocity(
        start: (f64, f64),
        end: (f64, f64),
        peak_px_per_s: f64,
    ) -> Self {
        let dist = ((end.0 - start.0).powi(2) + (end.1 - start.1).powi(2)).sqrt();
        let duration_s = 1.875 * dist / peak_px_per_s;
        Trajectory::Saccade {
            start,
            end,
            duration_us: (duration_s * 1e6).round().max(1.0) as u64,
        }
    }

    pub fn duration_us(&self) -> u64 {
        match *self {
            Trajectory::Fixation { duration_us, .. }
            | Trajectory::Saccade { duration_us, .. }
            | Trajectory::SmoothPursuitSquareWave { duration_us, .. } => duration_us,
        }
    }

    pub fn kind(&self) -> SegmentKind {
        match self {
            Trajectory::Fixation { .. } => SegmentKind::Fixation,
            Trajectory::Saccade { .. } => SegmentKind::Saccade,
            Trajectory::SmoothPursuitSquareWave { .. } => SegmentKind::Pursuit,
        }
    }

    /// Pupil center at a segment-local time.
    pub fn center_at(&self, local_us: f64) -> (f64, f64) {
        match *self {
            Trajectory::Fixation { center, .. } => center,
            Trajectory::Saccade { start, end, duration_us } => {
                let tau = (local_us / duration_us as f64).clamp(0.0, 1.0);
                let s = min_jerk(tau);
                (start.0 + (end.0 - start.0) * s, start.1 + (end.1 - start.1) * s)
            }
            Trajectory::SmoothPursuitSquareWave {
                start,
                width,
                period_us,
                descent_px,
                duration_us: _,
            } => {
                let p = period_us as f64;
                let phase = (local_us / p).fract();
                let tri = if phase < 0.5 { 2.0 * phase } else { 2.0 - 2.0 * phase };
                (start.0 + width * tri, start.1 + descent_px * (local_us / p))
            }
        }
    }

    /// End position, used to chain segments.
    pub fn end_center(&self) -> (f64, f64) {
        self.center_at(self.duration_us() as f64)
    }
}

/// Eyelid sweep overlay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlinkSpec {
    pub t0_us: u64,
    pub duration_us: u64,
}

impl BlinkSpec {
    /// Sweep profile in [0, 1]: sin², fully closed at the midpoint.
    fn closure(&self, t_us: f64) -> f64 {
        let tau = (t_us - self.t0_us as f64) / self.duration_us as f64;
        if !(0.0..=1.0).contains(&tau) {
            return 0.0;
        }
        let s = (std::f64::consts::PI * tau).sin();
        s * s
    }
}

// ── Scenario: scene + script ───────────────────────────────────────────────

/// A complete reproducible run: scene, screen geometry, motion script,
/// blink overlay and RNG seed. This is exactly what the ground-truth
/// sidecar stores.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scene: SceneConfig,
    pub screen: ScreenGeometry,
    pub segments: Vec<Trajectory>,
    pub blinks: Vec<BlinkSpec>,
    pub seed: u64,
}

/// Analytic eye pose at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeState {
    pub pupil_center: Point,
    /// Semi-axis along the displacement direction (compressed).
    pub r_along: f64,
    /// Semi-axis perpendicular to the displacement.
    pub r_perp: f64,
    /// Displacement direction angle.
    pub angle: f64,
    pub eyelid: ParabolaParams,
    pub glint: CircleParams,
}

impl EyeState {
    pub fn pupil_params(&self) -> Option<EllipseParams> {
        EllipseParams::from_geometric(
            self.pupil_center.x,
            self.pupil_center.y,
            self.r_along,
            self.r_perp,
            self.angle,
        )
    }

    #[inline]
    fn pupil_contains(&self, x: f64, y: f64) -> bool {
        let (sin, cos) = self.angle.sin_cos();
        let dx = x - self.pupil_center.x;
        let dy = y - self.pupil_center.y;
        let lx = (cos * dx + sin * dy) / self.r_along;
        let ly = (-sin * dx + cos * dy) / self.r_perp;
        lx * lx + ly * ly <= 1.0
    }
}

/// Ground-truth bundle at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub pupil_center: Point,
    pub ellipse: EllipseParams,
    pub mask: PupilMask,
    pub screen: (f64, f64),
    /// Unsigned visual angles (degrees) of the screen point.
    pub angles: (f64, f64),
}

/// Frames plus the time-sorted event stream of one synthesized run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub frames: Vec<Frame>,
    pub events: Vec<Event>,
}

impl Scenario {
    pub fn total_duration_us(&self) -> u64 {
        self.segments.iter().map(|s| s.duration_us()).sum()
    }

    /// Time windows of each scripted segment.
    pub fn segment_windows(&self) -> Vec<(SegmentKind, u64, u64)> {
        let mut t = 0u64;
        self.segments
            .iter()
            .map(|s| {
                let window = (s.kind(), t, t + s.duration_us());
                t += s.duration_us();
                window
            })
            .collect()
    }

    pub fn pupil_center_at(&self, t_us: f64) -> (f64, f64) {
        let mut t0 = 0.0f64;
        for seg in &self.segments {
            let d = seg.duration_us() as f64;
            if t_us < t0 + d {
                return seg.center_at(t_us - t0);
            }
            t0 += d;
        }
        match self.segments.last() {
            Some(seg) => seg.end_center(),
            None => self.scene.eye_center,
        }
    }

    /// Full analytic eye pose at `t_us`, including any blink sweep.
    pub fn eye_state_at(&self, t_us: f64) -> EyeState {
        let scene = &self.scene;
        let (cx, cy) = self.pupil_center_at(t_us);
        let ux = cx - scene.eye_center.0;
        let uy = cy - scene.eye_center.1;
        let dist = (ux * ux + uy * uy).sqrt();
        let r = scene.pupil_radius();
        let sin_alpha = (dist / scene.eyeball_radius).min(0.95);
        let cos_alpha = (1.0 - sin_alpha * sin_alpha).sqrt();
        let angle = if dist > 1e-9 { uy.atan2(ux) } else { 0.0 };

        let mut lid = scene.eyelid_rest;
        for blink in &self.blinks {
            let w = blink.closure(t_us);
            if w > 0.0 {
                lid.d += w * scene.blink_sweep_px;
            }
        }

        EyeState {
            pupil_center: Point::new(cx, cy),
            r_along: r * cos_alpha,
            r_perp: r,
            angle,
            eyelid: lid,
            glint: scene.glint(),
        }
    }

    /// Screen point corresponding to a pupil center under the forward gaze
    /// model: displacement = eyeball_radius · sin(angle), screen offset =
    /// distance · tan(angle), per axis.
    pub fn screen_point_for_center(&self, center: Point) -> (f64, f64) {
        let ux = (center.x - self.scene.eye_center.0) / self.scene.eyeball_radius;
        let uy = (center.y - self.scene.eye_center.1) / self.scene.eyeball_radius;
        let sx = self.screen.cx + self.screen.distance * (ux.clamp(-0.99, 0.99).asin()).tan();
        let sy = self.screen.cy + self.screen.distance * (uy.clamp(-0.99, 0.99).asin()).tan();
        (sx, sy)
    }

    /// Pupil center that looks at a given screen point (inverse of
    /// [`Self::screen_point_for_center`]).
    pub fn center_for_screen_point(&self, sx: f64, sy: f64) -> Point {
        let th = ((sx - self.screen.cx) / self.screen.distance).atan();
        let ph = ((sy - self.screen.cy) / self.screen.distance).atan();
        Point::new(
            self.scene.eye_center.0 + self.scene.eyeball_radius * th.sin(),
            self.scene.eye_center.1 + self.scene.eyeball_radius * ph.sin(),
        )
    }

    /// Exact pupil ellipse, occupancy mask and gaze target at `t_us`.
    pub fn ground_truth(&self, t_us: u64) -> Result<GroundTruth, SimError> {
        if t_us > self.total_duration_us() {
            return Err(SimError::OutOfSpan);
        }
        let state = self.eye_state_at(t_us as f64);
        let ellipse = state.pupil_params().ok_or(SimError::OutOfBounds)?;
        let mask = PupilMask::from_ellipse(&ellipse, self.scene.width, self.scene.height);
        let screen = self.screen_point_for_center(state.pupil_center);
        let angles = self.screen.screen_to_angles(screen.0, screen.1);
        Ok(GroundTruth { pupil_center: state.pupil_center, ellipse, mask, screen, angles })
    }

    /// Scene intensity at a pixel for a given eye pose.
    #[inline]
    fn intensity(&self, state: &EyeState, x: usize, y: usize) -> u8 {
        let scene = &self.scene;
        let (fx, fy) = (x as f64, y as f64);
        if fx <= state.eyelid.x_at(fy) {
            if (y / scene.eyelid_band_px) % 2 == 0 {
                return scene.eyelid_intensity;
            }
            return scene.eyelid_band_intensity;
        }
        let gdx = fx - state.glint.cx;
        let gdy = fy - state.glint.cy;
        if gdx * gdx + gdy * gdy <= state.glint.r * state.glint.r {
            return scene.glint_intensity;
        }
        if state.pupil_contains(fx, fy) {
            return scene.pupil_intensity;
        }
        let dx = fx - state.pupil_center.x;
        let dy = fy - state.pupil_center.y;
        let iris_r = scene.iris_radius();
        if dx * dx + dy * dy <= iris_r * iris_r {
            return scene.iris_intensity;
        }
        scene.sclera_intensity
    }

    fn check_bounds(&self, state: &EyeState) -> Result<(), SimError> {
        let r = state.r_perp.max(state.r_along);
        let c = state.pupil_center;
        if c.x - r < 0.0
            || c.y - r < 0.0
            || c.x + r >= self.scene.width as f64
            || c.y + r >= self.scene.height as f64
        {
            return Err(SimError::OutOfBounds);
        }
        Ok(())
    }

    /// Rasterizes the full frame for the eye pose at `t_us`.
    pub fn render_frame(&self, t_us: u64) -> Result<Frame, SimError> {
        let state = self.eye_state_at(t_us as f64);
        self.check_bounds(&state)?;
        let (w, h) = (self.scene.width, self.scene.height);
        let mut pixels = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                pixels[y * w + x] = self.intensity(&state, x, y);
            }
        }
        Ok(Frame::new(t_us, w, h, pixels).expect("buffer matches dimensions"))
    }

    /// Generates the event stream over (t0, t1] by stepping the scene at
    /// the internal sample rate and firing per-pixel threshold crossings of
    /// the log intensity against a per-pixel reference that advances by one
    /// threshold per event.
    pub fn generate_events(&self, t0_us: u64, t1_us: u64) -> Result<Vec<Event>, SimError> {
        if t1_us <= t0_us {
            return Err(SimError::OutOfSpan);
        }
        self.scene.validate()?;
        let scene = &self.scene;
        let (w, h) = (scene.width, scene.height);
        let c = scene.contrast_threshold;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_e7e4);

        // Log lookup for the 8-bit palette; intensity 0 clamps to 1.
        let log_lut: Vec<f64> = (0..256u32).map(|v| f64::from(v.max(1)).ln()).collect();

        let step_us = (1e6 / scene.sample_rate_hz).round().max(1.0) as u64;
        let mut refs: Vec<f64> = {
            let state = self.eye_state_at(t0_us as f64);
            self.check_bounds(&state)?;
            let mut v = vec![0.0f64; w * h];
            for y in 0..h {
                for x in 0..w {
                    v[y * w + x] = log_lut[self.intensity(&state, x, y) as usize];
                }
            }
            v
        };

        let mut events: Vec<Event> = Vec::new();
        let mut prev_state = self.eye_state_at(t0_us as f64);
        let mut noise_debt = 0.0f64;

        let mut t = t0_us + step_us;
        while t <= t1_us {
            let state = self.eye_state_at(t as f64);
            let moved = state != prev_state;
            if moved {
                self.check_bounds(&state)?;
                // Pixels that can change: the union of the iris disks at the
                // two poses, plus the strip between the two eyelid curves.
                let iris_r = scene.iris_radius() + 1.0;
                let min_x = (prev_state.pupil_center.x.min(state.pupil_center.x) - iris_r)
                    .floor()
                    .max(0.0) as usize;
                let max_x = (prev_state.pupil_center.x.max(state.pupil_center.x) + iris_r)
                    .ceil()
                    .min((w - 1) as f64) as usize;
                let min_y = (prev_state.pupil_center.y.min(state.pupil_center.y) - iris_r)
                    .floor()
                    .max(0.0) as usize;
                let max_y = (prev_state.pupil_center.y.max(state.pupil_center.y) + iris_r)
                    .ceil()
                    .min((h - 1) as f64) as usize;
                for y in min_y..=max_y {
                    for x in min_x..=max_x {
                        self.fire_pixel(&state, x, y, w, t, c, &log_lut, &mut refs, &mut events, &mut rng);
                    }
                }
                if state.eyelid != prev_state.eyelid {
                    for y in 0..h {
                        let fy = y as f64;
                        let (a, b) = (prev_state.eyelid.x_at(fy), state.eyelid.x_at(fy));
                        let lo = (a.min(b) - 1.0).floor().max(0.0) as usize;
                        let hi = (a.max(b) + 1.0).ceil().min((w - 1) as f64) as usize;
                        for x in lo..=hi {
                            if y < min_y || y > max_y || x < min_x || x > max_x {
                                self.fire_pixel(
                                    &state, x, y, w, t, c, &log_lut, &mut refs, &mut events, &mut rng,
                                );
                            }
                        }
                    }
                }
                prev_state = state;
            }
            // Uniform background noise, independent of motion.
            if scene.noise_rate_hz > 0.0 {
                noise_debt += scene.noise_rate_hz * step_us as f64 * 1e-6;
                while noise_debt >= 1.0 {
                    noise_debt -= 1.0;
                    let x = rng.gen_range(0..w) as u16;
                    let y = rng.gen_range(0..h) as u16;
                    let polarity = if rng.gen::<bool>() { 1 } else { -1 };
                    events.push(Event { t: self.jittered(t, &mut rng), x, y, polarity });
                }
            }
            t += step_us;
        }

        events.sort_by_key(|e| e.t);
        Ok(events)
    }

    #[inline]
    fn jittered(&self, t: u64, rng: &mut ChaCha8Rng) -> u64 {
        if self.scene.jitter_us == 0 {
            t
        } else {
            t + rng.gen_range(0..=self.scene.jitter_us)
        }
    }

    /// Fires all threshold crossings accumulated at one pixel.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn fire_pixel(
        &self,
        state: &EyeState,
        x: usize,
        y: usize,
        w: usize,
        t: u64,
        c: f64,
        log_lut: &[f64],
        refs: &mut [f64],
        events: &mut Vec<Event>,
        rng: &mut ChaCha8Rng,
    ) {
        let cur = log_lut[self.intensity(state, x, y) as usize];
        let idx = y * w + x;
        let diff = cur - refs[idx];
        if diff.abs() < c {
            return;
        }
        let n = (diff.abs() / c).floor() as usize;
        let polarity: i8 = if diff > 0.0 { 1 } else { -1 };
        for _ in 0..n {
            events.push(Event { t: self.jittered(t, rng), x: x as u16, y: y as u16, polarity });
        }
        refs[idx] += polarity as f64 * n as f64 * c;
    }

    /// Renders frames at the configured frame rate and the full event
    /// stream over the scripted duration.
    pub fn synthesize(&self) -> Result<SimOutput, SimError> {
        self.scene.validate()?;
        let total = self.total_duration_us();
        let period = (1e6 / self.scene.frame_rate_hz).round() as u64;
        let mut frames = Vec::new();
        let mut t = 0u64;
        while t <= total {
            frames.push(self.render_frame(t)?);
            t += period;
        }
        let events = self.generate_events(0, total)?;
        Ok(SimOutput { frames, events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub fn test_screen() -> ScreenGeometry {
        ScreenGeometry { cx: 960.0, cy: 540.0, distance: 1300.0, width: 1920.0, height: 1080.0 }
    }

    fn fixation_scenario(center: (f64, f64), duration_us: u64) -> Scenario {
        Scenario {
            scene: SceneConfig::default(),
            screen: test_screen(),
            segments: vec![Trajectory::Fixation { center, duration_us }],
            blinks: vec![],
            seed: 7,
        }
    }

    #[test]
    fn rendering_is_deterministic_and_centered() {
        let sc = fixation_scenario((173.0, 130.0), 100_000);
        let f1 = sc.render_frame(0).unwrap();
        let f2 = sc.render_frame(0).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(f1.get(173, 130), sc.scene.pupil_intensity);
        // Outside the iris: sclera.
        assert_eq!(f1.get(300, 130), sc.scene.sclera_intensity);
    }

    #[test]
    fn out_of_bounds_state_errors() {
        let sc = fixation_scenario((5.0, 130.0), 100_000);
        assert_eq!(sc.render_frame(0), Err(SimError::OutOfBounds));
    }

    #[test]
    fn fixation_generates_no_events() {
        let sc = fixation_scenario((173.0, 130.0), 200_000);
        let events = sc.generate_events(0, 200_000).unwrap();
        assert!(events.is_empty(), "got {} events", events.len());
    }

    #[test]
    fn ground_truth_trivial_poses() {
        let sc = Scenario {
            scene: SceneConfig::default(),
            screen: test_screen(),
            segments: vec![Trajectory::Saccade {
                start: (150.0, 130.0),
                end: (196.0, 130.0),
                duration_us: 100_000,
            }],
            blinks: vec![],
            seed: 1,
        };
        let start = sc.ground_truth(0).unwrap();
        assert_relative_eq!(start.pupil_center.x, 150.0, epsilon = 1e-12);
        // Symmetric profile: midpoint of time is midpoint of path.
        let mid = sc.ground_truth(50_000).unwrap();
        assert_relative_eq!(mid.pupil_center.x, 173.0, epsilon = 1e-9);
        assert!(sc.ground_truth(200_000).is_err());
    }

    #[test]
    fn min_jerk_matches_numeric_integral_of_its_velocity() {
        // Position from integrating the analytic velocity profile
        // v(τ) = 30τ² − 60τ³ + 30τ⁴ by fine trapezoid steps.
        let n = 100_000;
        let mut pos = 0.0;
        for i in 0..n {
            let a = i as f64 / n as f64;
            let b = (i + 1) as f64 / n as f64;
            let v = |t: f64| 30.0 * t * t - 60.0 * t * t * t + 30.0 * t * t * t * t;
            pos += 0.5 * (v(a) + v(b)) / n as f64;
        }
        assert_relative_eq!(pos, min_jerk(1.0), epsilon = 1e-9);
        assert_relative_eq!(min_jerk(0.5), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn downward_saccade_polarity_pattern() {
        let scene = SceneConfig::default();
        let (cx, cy) = (173.0, 120.0);
        let sc = Scenario {
            scene,
            screen: test_screen(),
            segments: vec![
                Trajectory::Fixation { center: (cx, cy), duration_us: 10_000 },
                Trajectory::Saccade {
                    start: (cx, cy),
                    end: (cx, cy + 30.0),
                    duration_us: 80_000,
                },
            ],
            blinks: vec![],
            seed: 3,
        };
        let events = sc.generate_events(0, 90_000).unwrap();
        assert!(!events.is_empty());
        // Leading (lower) pupil edge: iris → pupil, negative. Trailing
        // (upper) edge: pupil → iris, positive. Look only at pupil-scale
        // bands around the path to avoid iris-edge events.
        let r = sc.scene.pupil_radius();
        let lead: Vec<&Event> = events
            .iter()
            .filter(|e| {
                (e.x as f64 - cx).abs() < r * 0.6
                    && (e.y as f64) > cy + r * 0.5
                    && (e.y as f64) < cy + r * 1.8
            })
            .collect();
        let trail: Vec<&Event> = events
            .iter()
            .filter(|e| {
                (e.x as f64 - cx).abs() < r * 0.6
                    && (e.y as f64) < cy + 30.0 - r * 0.5
                    && (e.y as f64) > cy - r
            })
            .collect();
        assert!(!lead.is_empty() && !trail.is_empty());
        let neg_lead = lead.iter().filter(|e| e.polarity < 0).count() as f64 / lead.len() as f64;
        let pos_trail = trail.iter().filter(|e| e.polarity > 0).count() as f64 / trail.len() as f64;
        assert!(neg_lead > 0.8, "leading-edge negative fraction {}", neg_lead);
        assert!(pos_trail > 0.8, "trailing-edge positive fraction {}", pos_trail);
    }

    #[test]
    fn event_stream_is_sorted_and_deterministic() {
        let sc = Scenario {
            scene: SceneConfig::default(),
            screen: test_screen(),
            segments: vec![Trajectory::Saccade {
                start: (150.0, 130.0),
                end: (196.0, 130.0),
                duration_us: 100_000,
            }],
            blinks: vec![],
            seed: 11,
        };
        let a = sc.generate_events(0, 100_000).unwrap();
        let b = sc.generate_events(0, 100_000).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(a.iter().all(|e| (e.x as usize) < 346 && (e.y as usize) < 260));
    }

    #[test]
    fn event_count_grows_with_speed() {
        let mk = |duration_us: u64| Scenario {
            scene: SceneConfig::default(),
            screen: test_screen(),
            segments: vec![Trajectory::Saccade {
                start: (150.0, 130.0),
                end: (196.0, 130.0),
                duration_us,
            }],
            blinks: vec![],
            seed: 5,
        };
        // Same path swept in half the time: same total contrast change at
        // twice the rate.
        let slow = mk(160_000).generate_events(0, 160_000).unwrap();
        let fast = mk(80_000).generate_events(0, 80_000).unwrap();
        let slow_rate = slow.len() as f64 / 160.0;
        let fast_rate = fast.len() as f64 / 80.0;
        assert!(
            fast_rate > 1.5 * slow_rate,
            "rates: fast {} evts/ms vs slow {} evts/ms",
            fast_rate,
            slow_rate
        );
    }

    #[test]
    fn events_reconstruct_final_log_image() {
        let sc = Scenario {
            scene: SceneConfig::default(),
            screen: test_screen(),
            segments: vec![Trajectory::Saccade {
                start: (160.0, 130.0),
                end: (186.0, 140.0),
                duration_us: 60_000,
            }],
            blinks: vec![],
            seed: 9,
        };
        let events = sc.generate_events(0, 60_000).unwrap();
        let first = sc.render_frame(0).unwrap();
        let last = sc.render_frame(60_000).unwrap();
        let c = sc.scene.contrast_threshold;
        let lut: Vec<f64> = (0..256u32).map(|v| f64::from(v.max(1)).ln()).collect();
        let mut recon: Vec<f64> = first.pixels.iter().map(|&p| lut[p as usize]).collect();
        for e in &events {
            recon[e.y as usize * 346 + e.x as usize] += e.polarity as f64 * c;
        }
        for (i, &p) in last.pixels.iter().enumerate() {
            let err = (recon[i] - lut[p as usize]).abs();
            assert!(err < c + 1e-9, "pixel {} reconstruction error {}", i, err);
        }
    }

    #[test]
    fn rendered_frame_closes_loop_with_frame_pipeline() {
        use crate::frames::{pupil_candidates, FramePipelineConfig};
        let sc = fixation_scenario((173.0, 130.0), 50_000);
        let frame = sc.render_frame(0).unwrap();
        let pts = pupil_candidates(&frame, &FramePipelineConfig::default());
        assert!(pts.len() >= 20);
        let (a, b) = crate::fitter::accumulate_ellipse(&pts);
        let mut st = crate::fitter::FitState::<5>::new();
        st.blend_batch(&a, &b, 0.0, pts.len());
        let e = crate::fitter::ellipse_from_solution(&st.solve().unwrap());
        let center = e.center().unwrap();
        assert!((center.x - 173.0).abs() < 0.5, "cx {}", center.x);
        assert!((center.y - 130.0).abs() < 0.5, "cy {}", center.y);
    }

    #[test]
    fn blink_sweep_covers_and_uncovers_pupil() {
        let mut sc = fixation_scenario((173.0, 130.0), 400_000);
        sc.blinks = vec![BlinkSpec { t0_us: 100_000, duration_us: 160_000 }];
        // Mid-blink the lid apex reaches past the pupil.
        let mid = sc.eye_state_at(180_000.0);
        assert!(mid.eyelid.d > sc.scene.eyelid_rest.d + 0.9 * sc.scene.blink_sweep_px);
        // Before and after, the lid is at rest.
        assert_eq!(sc.eye_state_at(50_000.0).eyelid, sc.scene.eyelid_rest);
        assert_eq!(sc.eye_state_at(300_000.0).eyelid, sc.scene.eyelid_rest);
        // The rendered mid-blink frame has (almost) no dark pupil pixels.
        let frame = sc.render_frame(180_000).unwrap();
        let dark = frame.pixels.iter().filter(|&&p| p < 60).count();
        assert!(dark < 100, "dark pixels during closure: {}", dark);
    }

    #[test]
    fn gated_event_rate_during_saccade_is_calibrated() {
        // Saccade consistent with a fast (~490°/s peak) eye movement.
        let scene = SceneConfig::default();
        let start = (143.0, 130.0);
        let end = (203.0, 130.0);
        let sac = Trajectory::saccade_with_peak_velocity(start, end, CALIBRATED_PEAK_VELOCITY);
        let duration = sac.duration_us();
        let sc = Scenario {
            scene,
            screen: test_screen(),
            segments: vec![sac],
            blinks: vec![],
            seed: 21,
        };
        let events = sc.generate_events(0, duration).unwrap();
        // Gate against the analytic truth ellipse, the same δ-band the
        // tracker uses.
        let delta = 2.0;
        let mut gated = 0usize;
        for e in &events {
            let truth = sc.eye_state_at(e.t as f64);
            let params = truth.pupil_params().unwrap();
            if let Ok(proj) = params.project(e.point()) {
                if (proj - e.point()).norm() < delta {
                    gated += 1;
                }
            }
        }
        let ms = duration as f64 / 1000.0;
        let rate = gated as f64 / ms;
        println!(
            "saccade {} ms, {} events total, gated rate {:.1} evts/ms",
            ms,
            events.len(),
            rate
        );
        assert!(
            (100.0..=400.0).contains(&rate),
            "gated rate {:.1} evts/ms outside the calibrated band",
            rate
        );
    }
}
