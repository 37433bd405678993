//! Flat `key = value` run configuration.
//!
//! One namespace covers every stage: fitter, frame pipeline, blink
//! detector, gaze regression, screen geometry, simulator scene and the
//! simulate script. Unknown keys are hard errors so typos cannot silently
//! fall back to defaults. `#` starts a comment; blank lines are ignored.

use super::IoError;
use crate::blink::BlinkConfig;
use crate::fitter::FitConfig;
use crate::frames::FramePipelineConfig;
use crate::gaze::ScreenGeometry;
use crate::sim::SceneConfig;

/// What the `simulate` command synthesizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptConfig {
    /// One of `saccades`, `grid`, `pursuit`, `fixation`.
    pub kind: String,
    /// Number of saccades in the `saccades` script.
    pub saccades: usize,
    /// Target disk radius around the eye center, pixels.
    pub amplitude_px: f64,
    /// Fixation dwell between movements, milliseconds.
    pub fixation_ms: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    /// Full horizontal/vertical field of view of the grid, degrees.
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub pursuit_width_px: f64,
    pub pursuit_period_ms: f64,
    pub pursuit_descent_px: f64,
    pub pursuit_duration_ms: f64,
    /// Number of blinks overlaid on the script.
    pub blinks: usize,
}

impl Default for ScriptConfig {
    fn default() -> Self {
        Self {
            kind: "saccades".into(),
            saccades: 15,
            amplitude_px: 33.0,
            fixation_ms: 200.0,
            grid_nx: 11,
            grid_ny: 11,
            fov_h_deg: 40.0,
            fov_v_deg: 20.0,
            pursuit_width_px: 60.0,
            pursuit_period_ms: 800.0,
            pursuit_descent_px: 12.0,
            pursuit_duration_ms: 4000.0,
            blinks: 0,
        }
    }
}

/// Complete run configuration with a documented default for every key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fit: FitConfig,
    pub frames: FramePipelineConfig,
    pub blink: BlinkConfig,
    /// Polynomial degree of the gaze map (2 or 5).
    pub gaze_degree: usize,
    pub screen: ScreenGeometry,
    pub scene: SceneConfig,
    /// When false, `track` ignores the event stream (frame-only mode).
    pub use_events: bool,
    pub script: ScriptConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            frames: FramePipelineConfig::default(),
            blink: BlinkConfig::default(),
            gaze_degree: 2,
            screen: ScreenGeometry {
                cx: 960.0,
                cy: 540.0,
                distance: 1300.0,
                width: 1920.0,
                height: 1080.0,
            },
            scene: SceneConfig::default(),
            use_events: true,
            script: ScriptConfig::default(),
        }
    }
}

macro_rules! parse_as {
    ($value:expr, $key:expr, $ty:ty) => {
        $value.parse::<$ty>().map_err(|e| {
            IoError::BadConfig(format!("key '{}': cannot parse '{}': {}", $key, $value, e))
        })?
    };
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), IoError> {
        match key {
            "gamma" => self.fit.gamma = parse_as!(value, key, f64),
            "gamma_prime" => self.fit.gamma_prime = parse_as!(value, key, f64),
            "delta" => self.fit.delta = parse_as!(value, key, f64),
            "events_per_fit" => self.fit.events_per_fit = parse_as!(value, key, usize),
            "refresh_period" => self.fit.refresh_period = parse_as!(value, key, usize),

            "theta" => self.frames.theta = parse_as!(value, key, u8),
            "sigma" => self.frames.sigma = parse_as!(value, key, f64),
            "t1" => self.frames.t1 = parse_as!(value, key, u8),
            "t2" => self.frames.t2 = parse_as!(value, key, u8),
            "t3" => self.frames.t3 = parse_as!(value, key, u8),
            "rho_prime" => self.frames.rho_prime = parse_as!(value, key, f64),
            "rho_double_prime" => self.frames.rho_double_prime = parse_as!(value, key, f64),
            "harris_k" => self.frames.harris_k = parse_as!(value, key, f64),
            "harris_rel_thresh" => self.frames.harris_rel_thresh = parse_as!(value, key, f64),

            "blink_window" => self.blink.window = parse_as!(value, key, usize),
            "blink_lambda" => self.blink.lambda = parse_as!(value, key, f64),
            "blink_hold" => self.blink.hold = parse_as!(value, key, usize),

            "gaze_degree" => self.gaze_degree = parse_as!(value, key, usize),
            "use_events" => self.use_events = parse_as!(value, key, bool),

            "screen_cx" => self.screen.cx = parse_as!(value, key, f64),
            "screen_cy" => self.screen.cy = parse_as!(value, key, f64),
            "screen_distance" => self.screen.distance = parse_as!(value, key, f64),
            "screen_width" => self.screen.width = parse_as!(value, key, f64),
            "screen_height" => self.screen.height = parse_as!(value, key, f64),

            "sim_width" => self.scene.width = parse_as!(value, key, usize),
            "sim_height" => self.scene.height = parse_as!(value, key, usize),
            "sim_eye_cx" => self.scene.eye_center.0 = parse_as!(value, key, f64),
            "sim_eye_cy" => self.scene.eye_center.1 = parse_as!(value, key, f64),
            "sim_eyeball_radius" => self.scene.eyeball_radius = parse_as!(value, key, f64),
            "sim_pupil_radius_min" => self.scene.pupil_radius_min = parse_as!(value, key, f64),
            "sim_pupil_radius_max" => self.scene.pupil_radius_max = parse_as!(value, key, f64),
            "sim_iris_scale" => self.scene.iris_scale = parse_as!(value, key, f64),
            "sim_pupil_intensity" => self.scene.pupil_intensity = parse_as!(value, key, u8),
            "sim_iris_intensity" => self.scene.iris_intensity = parse_as!(value, key, u8),
            "sim_sclera_intensity" => self.scene.sclera_intensity = parse_as!(value, key, u8),
            "sim_glint_intensity" => self.scene.glint_intensity = parse_as!(value, key, u8),
            "sim_eyelid_intensity" => self.scene.eyelid_intensity = parse_as!(value, key, u8),
            "sim_eyelid_band_intensity" => {
                self.scene.eyelid_band_intensity = parse_as!(value, key, u8)
            }
            "sim_eyelid_band_px" => self.scene.eyelid_band_px = parse_as!(value, key, usize),
            "sim_eyelid_a" => self.scene.eyelid_rest.a = parse_as!(value, key, f64),
            "sim_eyelid_g" => self.scene.eyelid_rest.g = parse_as!(value, key, f64),
            "sim_eyelid_d" => self.scene.eyelid_rest.d = parse_as!(value, key, f64),
            "sim_blink_sweep_px" => self.scene.blink_sweep_px = parse_as!(value, key, f64),
            "sim_glint_dx" => self.scene.glint_offset.0 = parse_as!(value, key, f64),
            "sim_glint_dy" => self.scene.glint_offset.1 = parse_as!(value, key, f64),
            "sim_glint_radius" => self.scene.glint_radius = parse_as!(value, key, f64),
            "sim_contrast_threshold" => {
                self.scene.contrast_threshold = parse_as!(value, key, f64)
            }
            "sim_frame_rate" => self.scene.frame_rate_hz = parse_as!(value, key, f64),
            "sim_jitter_us" => self.scene.jitter_us = parse_as!(value, key, u64),
            "sim_sample_rate" => self.scene.sample_rate_hz = parse_as!(value, key, f64),
            "sim_noise_rate" => self.scene.noise_rate_hz = parse_as!(value, key, f64),

            "script" => self.script.kind = value.to_string(),
            "script_saccades" => self.script.saccades = parse_as!(value, key, usize),
            "script_amplitude_px" => self.script.amplitude_px = parse_as!(value, key, f64),
            "script_fixation_ms" => self.script.fixation_ms = parse_as!(value, key, f64),
            "script_grid_nx" => self.script.grid_nx = parse_as!(value, key, usize),
            "script_grid_ny" => self.script.grid_ny = parse_as!(value, key, usize),
            "script_fov_h_deg" => self.script.fov_h_deg = parse_as!(value, key, f64),
            "script_fov_v_deg" => self.script.fov_v_deg = parse_as!(value, key, f64),
            "script_pursuit_width_px" => {
                self.script.pursuit_width_px = parse_as!(value, key, f64)
            }
            "script_pursuit_period_ms" => {
                self.script.pursuit_period_ms = parse_as!(value, key, f64)
            }
            "script_pursuit_descent_px" => {
                self.script.pursuit_descent_px = parse_as!(value, key, f64)
            }
            "script_pursuit_duration_ms" => {
                self.script.pursuit_duration_ms = parse_as!(value, key, f64)
            }
            "script_blinks" => self.script.blinks = parse_as!(value, key, usize),

            _ => return Err(IoError::BadConfig(format!("unknown key '{}'", key))),
        }
        Ok(())
    }

    /// Parses a whole config file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines from `text` onto `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), IoError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                IoError::BadConfig(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Renders every key with its current value; `parse` of the result
    /// reproduces `self`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        s.push_str("# fitter\n");
        kv(&mut s, "gamma", self.fit.gamma.to_string());
        kv(&mut s, "gamma_prime", self.fit.gamma_prime.to_string());
        kv(&mut s, "delta", self.fit.delta.to_string());
        kv(&mut s, "events_per_fit", self.fit.events_per_fit.to_string());
        kv(&mut s, "refresh_period", self.fit.refresh_period.to_string());
        s.push_str("# frame pipeline\n");
        kv(&mut s, "theta", self.frames.theta.to_string());
        kv(&mut s, "sigma", self.frames.sigma.to_string());
        kv(&mut s, "t1", self.frames.t1.to_string());
        kv(&mut s, "t2", self.frames.t2.to_string());
        kv(&mut s, "t3", self.frames.t3.to_string());
        kv(&mut s, "rho_prime", self.frames.rho_prime.to_string());
        kv(&mut s, "rho_double_prime", self.frames.rho_double_prime.to_string());
        kv(&mut s, "harris_k", self.frames.harris_k.to_string());
        kv(&mut s, "harris_rel_thresh", self.frames.harris_rel_thresh.to_string());
        s.push_str("# blink detector\n");
        kv(&mut s, "blink_window", self.blink.window.to_string());
        kv(&mut s, "blink_lambda", self.blink.lambda.to_string());
        kv(&mut s, "blink_hold", self.blink.hold.to_string());
        s.push_str("# gaze / tracking\n");
        kv(&mut s, "gaze_degree", self.gaze_degree.to_string());
        kv(&mut s, "use_events", self.use_events.to_string());
        s.push_str("# screen geometry\n");
        kv(&mut s, "screen_cx", self.screen.cx.to_string());
        kv(&mut s, "screen_cy", self.screen.cy.to_string());
        kv(&mut s, "screen_distance", self.screen.distance.to_string());
        kv(&mut s, "screen_width", self.screen.width.to_string());
        kv(&mut s, "screen_height", self.screen.height.to_string());
        s.push_str("# simulator scene\n");
        kv(&mut s, "sim_width", self.scene.width.to_string());
        kv(&mut s, "sim_height", self.scene.height.to_string());
        kv(&mut s, "sim_eye_cx", self.scene.eye_center.0.to_string());
        kv(&mut s, "sim_eye_cy", self.scene.eye_center.1.to_string());
        kv(&mut s, "sim_eyeball_radius", self.scene.eyeball_radius.to_string());
        kv(&mut s, "sim_pupil_radius_min", self.scene.pupil_radius_min.to_string());
        kv(&mut s, "sim_pupil_radius_max", self.scene.pupil_radius_max.to_string());
        kv(&mut s, "sim_iris_scale", self.scene.iris_scale.to_string());
        kv(&mut s, "sim_pupil_intensity", self.scene.pupil_intensity.to_string());
        kv(&mut s, "sim_iris_intensity", self.scene.iris_intensity.to_string());
        kv(&mut s, "sim_sclera_intensity", self.scene.sclera_intensity.to_string());
        kv(&mut s, "sim_glint_intensity", self.scene.glint_intensity.to_string());
        kv(&mut s, "sim_eyelid_intensity", self.scene.eyelid_intensity.to_string());
        kv(&mut s, "sim_eyelid_band_intensity", self.scene.eyelid_band_intensity.to_string());
        kv(&mut s, "sim_eyelid_band_px", self.scene.eyelid_band_px.to_string());
        kv(&mut s, "sim_eyelid_a", self.scene.eyelid_rest.a.to_string());
        kv(&mut s, "sim_eyelid_g", self.scene.eyelid_rest.g.to_string());
        kv(&mut s, "sim_eyelid_d", self.scene.eyelid_rest.d.to_string());
        kv(&mut s, "sim_blink_sweep_px", self.scene.blink_sweep_px.to_string());
        kv(&mut s, "sim_glint_dx", self.scene.glint_offset.0.to_string());
        kv(&mut s, "sim_glint_dy", self.scene.glint_offset.1.to_string());
        kv(&mut s, "sim_glint_radius", self.scene.glint_radius.to_string());
        kv(&mut s, "sim_contrast_threshold", self.scene.contrast_threshold.to_string());
        kv(&mut s, "sim_frame_rate", self.scene.frame_rate_hz.to_string());
        kv(&mut s, "sim_jitter_us", self.scene.jitter_us.to_string());
        kv(&mut s, "sim_sample_rate", self.scene.sample_rate_hz.to_string());
        kv(&mut s, "sim_noise_rate", self.scene.noise_rate_hz.to_string());
        s.push_str("# simulate script\n");
        kv(&mut s, "script", self.script.kind.clone());
        kv(&mut s, "script_saccades", self.script.saccades.to_string());
        kv(&mut s, "script_amplitude_px", self.script.amplitude_px.to_string());
        kv(&mut s, "script_fixation_ms", self.script.fixation_ms.to_string());
        kv(&mut s, "script_grid_nx", self.script.grid_nx.to_string());
        kv(&mut s, "script_grid_ny", self.script.grid_ny.to_string());
        kv(&mut s, "script_fov_h_deg", self.script.fov_h_deg.to_string());
        kv(&mut s, "script_fov_v_deg", self.script.fov_v_deg.to_string());
        kv(&mut s, "script_pursuit_width_px", self.script.pursuit_width_px.to_string());
        kv(&mut s, "script_pursuit_period_ms", self.script.pursuit_period_ms.to_string());
        kv(&mut s, "script_pursuit_descent_px", self.script.pursuit_descent_px.to_string());
        kv(&mut s, "script_pursuit_duration_ms", self.script.pursuit_duration_ms.to_string());
        kv(&mut s, "script_blinks", self.script.blinks.to_string());
        s
    }
}
