//! Stream orchestration: gating, per-frame and per-event model updates.
//!
//! The engine owns the three fit states and the current eye model. Frames
//! re-anchor all three sub-models through batch blends with full
//! re-inversion; gated events are buffered per sub-model and applied every
//! `events_per_fit` gated points, through the rank-1 inverse update when
//! that count is 1 and through a batch blend otherwise.
//!
//! Fitting runs in coordinates divided by max(sensor_width, sensor_height);
//! the quadratic feature columns are badly scaled in raw pixels. Emitted
//! parameters are denormalized back to pixels.

use std::sync::{Arc, RwLock};

use crate::blink::{BlinkConfig, BlinkDetector};
use crate::frames::{self, FramePipelineConfig};
use crate::model::{
    CircleParams, EllipseParams, Event, EyeModel, Frame, ParabolaParams, Point,
};

use super::{
    accumulate_circle, accumulate_ellipse, accumulate_parabola, circle_feature,
    circle_from_solution, circle_target, ellipse_feature, ellipse_from_solution, ellipse_target,
    parabola_feature, parabola_from_solution, parabola_target, FitConfig, FitState,
};

/// Which datum produced an emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitSource {
    Frame,
    Events,
}

/// Sub-model an event is admitted to, or rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Pupil,
    Eyelid,
    Glint,
    Rejected,
}

/// One published model state, stamped with the triggering datum's time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub t: u64,
    pub model: EyeModel,
    pub source: FitSource,
    pub blink: bool,
}

/// Classifies an event against the current model curves.
///
/// Pupil membership requires the radial projection onto the ellipse to be
/// within `delta` pixels; the eyelid uses the absolute parabola residual and
/// the glint its squared quadric residual. When a point is close to several
/// curves the pupil wins, then the glint, then the eyelid. Sub-models that
/// are not yet valid never match.
pub fn gate_event(model: &EyeModel, p: Point, delta: f64) -> Membership {
    if let Some(e) = &model.ellipse {
        if let Ok(proj) = e.project(p) {
            if (proj - p).norm() < delta {
                return Membership::Pupil;
            }
        }
    }
    if let Some(c) = &model.glint {
        let r = c.residual(p);
        if r * r < delta * delta {
            return Membership::Glint;
        }
    }
    if let Some(l) = &model.eyelid {
        if l.residual(p).abs() < delta {
            return Membership::Eyelid;
        }
    }
    Membership::Rejected
}

/// Single-writer tracking engine fusing a frame stream and an event stream.
pub struct TrackingEngine {
    fit: FitConfig,
    frame_cfg: FramePipelineConfig,
    /// All fitting runs in coordinates divided by this.
    scale: f64,
    pupil_fit: FitState<5>,
    lid_fit: FitState<3>,
    glint_fit: FitState<3>,
    pending_pupil: Vec<Point>,
    pending_lid: Vec<Point>,
    pending_glint: Vec<Point>,
    blink: BlinkDetector,
    blink_active: bool,
    model: EyeModel,
}

impl TrackingEngine {
    pub fn new(
        sensor_width: usize,
        sensor_height: usize,
        fit: FitConfig,
        frame_cfg: FramePipelineConfig,
        blink_cfg: BlinkConfig,
    ) -> Result<Self, String> {
        fit.validate()?;
        frame_cfg.validate()?;
        blink_cfg.validate()?;
        if sensor_width == 0 || sensor_height == 0 {
            return Err("sensor dimensions must be positive".into());
        }
        Ok(Self {
            fit,
            frame_cfg,
            scale: sensor_width.max(sensor_height) as f64,
            pupil_fit: FitState::new(),
            lid_fit: FitState::new(),
            glint_fit: FitState::new(),
            pending_pupil: Vec::new(),
            pending_lid: Vec::new(),
            pending_glint: Vec::new(),
            blink: BlinkDetector::new(blink_cfg),
            blink_active: false,
            model: EyeModel::default(),
        })
    }

    pub fn model(&self) -> &EyeModel {
        &self.model
    }

    pub fn blink_active(&self) -> bool {
        self.blink_active
    }

    pub fn config(&self) -> &FitConfig {
        &self.fit
    }

    #[inline]
    fn normalize(&self, p: Point) -> Point {
        Point::new(p.x / self.scale, p.y / self.scale)
    }

    /// Processes one frame: candidate extraction, batch blends with γ and
    /// full re-inversion for every sub-model with enough candidates.
    ///
    /// Event batches still pending from before the frame are discarded; the
    /// frame supersedes them as the fresher anchor.
    pub fn push_frame(&mut self, frame: &Frame) -> Emission {
        self.pending_pupil.clear();
        self.pending_lid.clear();
        self.pending_glint.clear();

        let pupil_points = frames::pupil_candidates(frame, &self.frame_cfg);
        if pupil_points.len() >= 5 {
            let norm: Vec<Point> = pupil_points.iter().map(|&p| self.normalize(p)).collect();
            let (a, b) = accumulate_ellipse(&norm);
            self.pupil_fit.blend_batch(&a, &b, self.fit.gamma, norm.len());
            self.solve_pupil(frame.t);
        }

        if let Some(e) = &self.model.ellipse {
            if let Ok(r) = e.eccentricity() {
                self.blink_active = self.blink.observe(r);
            }
        }

        if let Some(center) = self.model.pupil_center() {
            let lid_points = frames::eyelid_candidates(frame, center, &self.frame_cfg);
            if lid_points.len() >= 3 {
                let norm: Vec<Point> = lid_points.iter().map(|&p| self.normalize(p)).collect();
                let (a, b) = accumulate_parabola(&norm);
                self.lid_fit.blend_batch(&a, &b, self.fit.gamma, norm.len());
                self.solve_lid(frame.t);
            }
            let glint_points = frames::glint_candidates(frame, center, &self.frame_cfg);
            if glint_points.len() >= 3 {
                let norm: Vec<Point> = glint_points.iter().map(|&p| self.normalize(p)).collect();
                let (a, b) = accumulate_circle(&norm);
                self.glint_fit.blend_batch(&a, &b, self.fit.gamma, norm.len());
                self.solve_glint(frame.t);
            }
        }

        Emission {
            t: frame.t,
            model: self.model,
            source: FitSource::Frame,
            blink: self.blink_active,
        }
    }

    /// Gates one event and applies a sub-model update when its pending
    /// buffer reaches `events_per_fit`. Returns an emission only when an
    /// update was applied.
    pub fn push_event(&mut self, ev: &Event) -> Option<Emission> {
        let p = ev.point();
        let n = self.fit.events_per_fit;
        match gate_event(&self.model, p, self.fit.delta) {
            Membership::Rejected => None,
            Membership::Pupil => {
                self.pending_pupil.push(self.normalize(p));
                if self.pending_pupil.len() >= n {
                    self.apply_pupil_events(ev.t);
                    Some(self.event_emission(ev.t))
                } else {
                    None
                }
            }
            Membership::Eyelid => {
                self.pending_lid.push(self.normalize(p));
                if self.pending_lid.len() >= n {
                    self.apply_lid_events(ev.t);
                    Some(self.event_emission(ev.t))
                } else {
                    None
                }
            }
            Membership::Glint => {
                self.pending_glint.push(self.normalize(p));
                if self.pending_glint.len() >= n {
                    self.apply_glint_events(ev.t);
                    Some(self.event_emission(ev.t))
                } else {
                    None
                }
            }
        }
    }

    fn event_emission(&self, t: u64) -> Emission {
        Emission { t, model: self.model, source: FitSource::Events, blink: self.blink_active }
    }

    fn apply_pupil_events(&mut self, t: u64) {
        let gp = self.fit.gamma_prime;
        if self.pending_pupil.len() == 1 {
            let p = self.pending_pupil[0];
            let v = ellipse_feature(p);
            if self.pupil_fit.rank1_update(&v, ellipse_target(p), gp).is_ok() {
                if self.pupil_fit.rank1_updates_since_refresh() >= self.fit.refresh_period {
                    let _ = self.pupil_fit.refresh();
                }
                self.solve_pupil(t);
            }
        } else {
            let (a, b) = accumulate_ellipse(&self.pending_pupil);
            let count = self.pending_pupil.len();
            self.pupil_fit.blend_batch(&a, &b, gp, count);
            self.solve_pupil(t);
        }
        self.pending_pupil.clear();
    }

    fn apply_lid_events(&mut self, t: u64) {
        let gp = self.fit.gamma_prime;
        if self.pending_lid.len() == 1 {
            let p = self.pending_lid[0];
            let v = parabola_feature(p);
            if self.lid_fit.rank1_update(&v, parabola_target(p), gp).is_ok() {
                if self.lid_fit.rank1_updates_since_refresh() >= self.fit.refresh_period {
                    let _ = self.lid_fit.refresh();
                }
                self.solve_lid(t);
            }
        } else {
            let (a, b) = accumulate_parabola(&self.pending_lid);
            let count = self.pending_lid.len();
            self.lid_fit.blend_batch(&a, &b, gp, count);
            self.solve_lid(t);
        }
        self.pending_lid.clear();
    }

    fn apply_glint_events(&mut self, t: u64) {
        let gp = self.fit.gamma_prime;
        if self.pending_glint.len() == 1 {
            let p = self.pending_glint[0];
            let v = circle_feature(p);
            if self.glint_fit.rank1_update(&v, circle_target(p), gp).is_ok() {
                if self.glint_fit.rank1_updates_since_refresh() >= self.fit.refresh_period {
                    let _ = self.glint_fit.refresh();
                }
                self.solve_glint(t);
            }
        } else {
            let (a, b) = accumulate_circle(&self.pending_glint);
            let count = self.pending_glint.len();
            self.glint_fit.blend_batch(&a, &b, gp, count);
            self.solve_glint(t);
        }
        self.pending_glint.clear();
    }

    /// Solves the pupil state; on success and a real-ellipse result, installs
    /// the denormalized parameters. Singular solves keep the previous model.
    fn solve_pupil(&mut self, t: u64) {
        if let Ok(sol) = self.pupil_fit.solve() {
            let n = ellipse_from_solution(&sol);
            let s = self.scale;
            let e = EllipseParams::new(
                n.a / (s * s),
                n.h / (s * s),
                n.b / (s * s),
                n.g / s,
                n.f / s,
            );
            let valid = e.is_ellipse_type()
                && e.radii().is_ok()
                && [e.a, e.h, e.b, e.g, e.f].iter().all(|c| c.is_finite());
            if valid {
                self.model.ellipse = Some(e);
                self.model.last_update_t = t;
            }
        }
    }

    fn solve_lid(&mut self, t: u64) {
        if let Ok(sol) = self.lid_fit.solve() {
            let n = parabola_from_solution(&sol);
            let s = self.scale;
            // x/s = a·(y/s)² + g·(y/s) + d  ⇒  x = (a/s)·y² + g·y + d·s
            let p = ParabolaParams::new(n.a / s, n.g, n.d * s);
            if p.is_valid() {
                self.model.eyelid = Some(p);
                self.model.last_update_t = t;
            }
        }
    }

    fn solve_glint(&mut self, t: u64) {
        if let Ok(sol) = self.glint_fit.solve() {
            if let Some(n) = circle_from_solution(&sol) {
                let s = self.scale;
                let c = CircleParams::new(n.cx * s, n.cy * s, n.r * s);
                if c.is_valid() {
                    self.model.glint = Some(c);
                    self.model.last_update_t = t;
                }
            }
        }
    }
}

/// Merges a frame stream and an event stream by timestamp and drives the
/// engine over the result, collecting every emission.
///
/// Both inputs must be time-ordered. At equal timestamps events are
/// processed before the frame.
pub fn process_stream(
    engine: &mut TrackingEngine,
    frames: &[Frame],
    events: &[Event],
) -> Vec<Emission> {
    let mut out = Vec::new();
    let mut ei = 0usize;
    for frame in frames {
        while ei < events.len() && events[ei].t <= frame.t {
            if let Some(em) = engine.push_event(&events[ei]) {
                out.push(em);
            }
            ei += 1;
        }
        out.push(engine.push_frame(frame));
    }
    while ei < events.len() {
        if let Some(em) = engine.push_event(&events[ei]) {
            out.push(em);
        }
        ei += 1;
    }
    out
}

/// Latest-model publisher decoupling readers from the update thread.
///
/// `publish` uses a non-blocking try-write: if a reader briefly holds the
/// lock the snapshot is skipped rather than stalling the update path, and
/// the next publish supersedes it.
#[derive(Clone)]
pub struct ModelBus {
    slot: Arc<RwLock<Emission>>,
}

impl ModelBus {
    pub fn new(initial: Emission) -> Self {
        Self { slot: Arc::new(RwLock::new(initial)) }
    }

    pub fn publish(&self, emission: Emission) {
        if let Ok(mut slot) = self.slot.try_write() {
            *slot = emission;
        }
    }

    pub fn latest(&self) -> Emission {
        *self.slot.read().expect("model bus poisoned")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EllipseParams;

    fn engine(w: usize, h: usize) -> TrackingEngine {
        TrackingEngine::new(
            w,
            h,
            FitConfig::default(),
            FramePipelineConfig::default(),
            BlinkConfig::default(),
        )
        .unwrap()
    }

    fn model_with_pupil(cx: f64, cy: f64, r: f64) -> EyeModel {
        EyeModel {
            ellipse: Some(EllipseParams::from_geometric(cx, cy, r, r, 0.0).unwrap()),
            eyelid: None,
            glint: None,
            last_update_t: 0,
        }
    }

    #[test]
    fn gate_on_boundary_is_pupil() {
        let m = model_with_pupil(100.0, 100.0, 20.0);
        assert_eq!(gate_event(&m, Point::new(120.0, 100.0), 2.0), Membership::Pupil);
        // Radial distance exactly 1 px.
        assert_eq!(gate_event(&m, Point::new(121.0, 100.0), 2.0), Membership::Pupil);
    }

    #[test]
    fn gate_far_from_everything_rejects() {
        let mut m = model_with_pupil(100.0, 100.0, 20.0);
        m.eyelid = Some(ParabolaParams::new(-0.001, 0.0, 30.0));
        m.glint = Some(CircleParams::new(160.0, 60.0, 4.0));
        assert_eq!(gate_event(&m, Point::new(250.0, 250.0), 2.0), Membership::Rejected);
    }

    #[test]
    fn gate_requires_valid_submodels() {
        let m = EyeModel::default();
        assert_eq!(gate_event(&m, Point::new(10.0, 10.0), 2.0), Membership::Rejected);
    }

    #[test]
    fn gate_priority_pupil_over_glint() {
        // Glint circle crossing the pupil boundary: a point on both curves
        // must be classified as pupil.
        let mut m = model_with_pupil(100.0, 100.0, 20.0);
        m.glint = Some(CircleParams::new(120.0, 100.0, 1.0));
        // (120, 100) lies on the pupil boundary; glint residual there is
        // -1 (inside the glint), squared = 1 < δ².
        assert_eq!(gate_event(&m, Point::new(120.0, 100.0), 2.0), Membership::Pupil);
    }

    #[test]
    fn gate_eyelid_band() {
        let mut m = EyeModel::default();
        m.eyelid = Some(ParabolaParams::new(0.002, 0.0, 40.0));
        let lid = m.eyelid.unwrap();
        let on = Point::new(lid.x_at(80.0), 80.0);
        assert_eq!(gate_event(&m, on, 2.0), Membership::Eyelid);
        let off = Point::new(lid.x_at(80.0) + 5.0, 80.0);
        assert_eq!(gate_event(&m, off, 2.0), Membership::Rejected);
    }

    /// Synthetic frame: dark pupil disk on a bright background.
    fn pupil_frame(t: u64, w: usize, h: usize, cx: f64, cy: f64, r: f64) -> Frame {
        let mut pixels = vec![200u8; w * h];
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r {
                    pixels[y * w + x] = 10;
                }
            }
        }
        Frame::new(t, w, h, pixels).unwrap()
    }

    #[test]
    fn static_frames_give_constant_model() {
        let mut eng = engine(200, 160);
        let emissions = process_stream(
            &mut eng,
            &(0..5)
                .map(|k| pupil_frame(k * 40_000, 200, 160, 100.0, 80.0, 20.0))
                .collect::<Vec<_>>(),
            &[],
        );
        assert_eq!(emissions.len(), 5);
        let first = emissions[0].model.ellipse.expect("valid after first frame");
        let c0 = first.center().unwrap();
        assert!((c0.x - 100.0).abs() < 0.5 && (c0.y - 80.0).abs() < 0.5);
        for em in &emissions[1..] {
            let c = em.model.ellipse.unwrap().center().unwrap();
            assert!((c.x - c0.x).abs() < 1e-6 && (c.y - c0.y).abs() < 1e-6);
            assert_eq!(em.source, FitSource::Frame);
        }
    }

    #[test]
    fn frozen_blend_keeps_model_constant() {
        // γ = 1 and γ' = 1: after the state is initialized nothing moves.
        let mut cfg = FitConfig::default();
        cfg.gamma = 1.0;
        cfg.gamma_prime = 1.0;
        let mut eng = TrackingEngine::new(
            200,
            160,
            cfg,
            FramePipelineConfig::default(),
            BlinkConfig::default(),
        )
        .unwrap();
        let frames: Vec<Frame> = (0..4)
            .map(|k| pupil_frame(k * 40_000, 200, 160, 100.0 + 5.0 * k as f64, 80.0, 20.0))
            .collect();
        let emissions = process_stream(&mut eng, &frames, &[]);
        // With γ=1 the state never absorbs data: b̄ stays zero and no valid
        // ellipse ever forms, so the model stays at its default.
        for em in &emissions {
            assert!(em.model.ellipse.is_none());
        }
    }

    #[test]
    fn merge_is_deterministic_and_ordered() {
        let frames: Vec<Frame> = (0..3)
            .map(|k| pupil_frame(k * 40_000, 200, 160, 100.0, 80.0, 20.0))
            .collect();
        let events: Vec<Event> = (0..200)
            .map(|i| Event { t: 10_000 + i * 400, x: 120, y: 80, polarity: 1 })
            .collect();
        let mut e1 = engine(200, 160);
        let mut e2 = engine(200, 160);
        let a = process_stream(&mut e1, &frames, &events);
        let b = process_stream(&mut e2, &frames, &events);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn event_batches_emit_every_n_gated_events() {
        let mut cfg = FitConfig::default();
        cfg.events_per_fit = 10;
        let mut eng = TrackingEngine::new(
            200,
            160,
            cfg,
            FramePipelineConfig::default(),
            BlinkConfig::default(),
        )
        .unwrap();
        // Anchor with one frame.
        eng.push_frame(&pupil_frame(0, 200, 160, 100.0, 80.0, 20.0));
        assert!(eng.model().ellipse.is_some());
        // Feed events on the pupil boundary.
        let boundary = eng.model().ellipse.unwrap().sample_points(40).unwrap();
        let mut emissions = 0;
        for (i, p) in boundary.iter().enumerate() {
            let ev = Event {
                t: 1000 + i as u64,
                x: p.x.round() as u16,
                y: p.y.round() as u16,
                polarity: 1,
            };
            if eng.push_event(&ev).is_some() {
                emissions += 1;
            }
        }
        assert_eq!(emissions, 40 / 10);
    }

    #[test]
    fn model_bus_publish_and_read_across_threads() {
        let initial = Emission {
            t: 0,
            model: EyeModel::default(),
            source: FitSource::Frame,
            blink: false,
        };
        let bus = ModelBus::new(initial);
        let reader = bus.clone();
        let handle = std::thread::spawn(move || {
            let mut last = 0;
            for _ in 0..1000 {
                last = reader.latest().t;
            }
            last
        });
        for t in 1..=10_000 {
            bus.publish(Emission { t, ..initial });
        }
        let seen = handle.join().unwrap();
        assert!(seen <= 10_000);
        assert_eq!(bus.latest().t, 10_000);
    }
}
