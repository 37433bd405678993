//! Text sidecars: the ground-truth scenario and gaze-map coefficients.

use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::IoError;
use crate::gaze::GazeMap;
use crate::sim::{BlinkSpec, Scenario, Trajectory};

/// Conventional sidecar path: the recording path plus a `.truth` suffix.
pub fn sidecar_path(recording: &Path) -> PathBuf {
    let mut s = recording.as_os_str().to_os_string();
    s.push(".truth");
    PathBuf::from(s)
}

/// Renders a scenario as `key = value` lines plus segment/blink lines.
/// Floats print in shortest round-trip form, so parsing is lossless.
pub fn render_scenario(sc: &Scenario) -> String {
    let mut out = String::new();
    out.push_str(&format!("seed = {}\n", sc.seed));
    // Scene and screen keys share the run-config namespace.
    let mut carrier = RunConfig::default();
    carrier.scene = sc.scene.clone();
    carrier.screen = sc.screen;
    for line in carrier.dump().lines() {
        if line.starts_with("sim_") || line.starts_with("screen_") {
            out.push_str(line);
            out.push('\n');
        }
    }
    for seg in &sc.segments {
        match *seg {
            Trajectory::Fixation { center, duration_us } => {
                out.push_str(&format!(
                    "segment = fixation {} {} {}\n",
                    center.0, center.1, duration_us
                ));
            }
            Trajectory::Saccade { start, end, duration_us } => {
                out.push_str(&format!(
                    "segment = saccade {} {} {} {} {}\n",
                    start.0, start.1, end.0, end.1, duration_us
                ));
            }
            Trajectory::SmoothPursuitSquareWave {
                start,
                width,
                period_us,
                descent_px,
                duration_us,
            } => {
                out.push_str(&format!(
                    "segment = pursuit {} {} {} {} {} {}\n",
                    start.0, start.1, width, period_us, descent_px, duration_us
                ));
            }
        }
    }
    for b in &sc.blinks {
        out.push_str(&format!("blink = {} {}\n", b.t0_us, b.duration_us));
    }
    out
}

fn split_fields(value: &str, n: usize, what: &str) -> Result<Vec<f64>, IoError> {
    let fields: Vec<f64> = value
        .split_whitespace()
        .map(|f| f.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::BadConfig(format!("{}: {}", what, e)))?;
    if fields.len() != n {
        return Err(IoError::BadConfig(format!(
            "{}: expected {} fields, got {}",
            what,
            n,
            fields.len()
        )));
    }
    Ok(fields)
}

/// Parses a scenario sidecar produced by [`render_scenario`].
pub fn parse_scenario(text: &str) -> Result<Scenario, IoError> {
    let mut carrier = RunConfig::default();
    let mut seed = 0u64;
    let mut segments = Vec::new();
    let mut blinks = Vec::new();
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
            IoError::BadConfig(format!("sidecar line {}: expected 'key = value'", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|e| IoError::BadConfig(format!("seed: {}", e)))?;
            }
            "segment" => {
                let (kind, rest) = value.split_once(' ').ok_or_else(|| {
                    IoError::BadConfig(format!("segment line {} missing fields", lineno + 1))
                })?;
                match kind {
                    "fixation" => {
                        let f = split_fields(rest, 3, "fixation segment")?;
                        segments.push(Trajectory::Fixation {
                            center: (f[0], f[1]),
                            duration_us: f[2] as u64,
                        });
                    }
                    "saccade" => {
                        let f = split_fields(rest, 5, "saccade segment")?;
                        segments.push(Trajectory::Saccade {
                            start: (f[0], f[1]),
                            end: (f[2], f[3]),
                            duration_us: f[4] as u64,
                        });
                    }
                    "pursuit" => {
                        let f = split_fields(rest, 6, "pursuit segment")?;
                        segments.push(Trajectory::SmoothPursuitSquareWave {
                            start: (f[0], f[1]),
                            width: f[2],
                            period_us: f[3] as u64,
                            descent_px: f[4],
                            duration_us: f[5] as u64,
                        });
                    }
                    other => {
                        return Err(IoError::BadConfig(format!(
                            "unknown segment kind '{}'",
                            other
                        )))
                    }
                }
            }
            "blink" => {
                let f = split_fields(value, 2, "blink line")?;
                blinks.push(BlinkSpec { t0_us: f[0] as u64, duration_us: f[1] as u64 });
            }
            k if k.starts_with("sim_") || k.starts_with("screen_") => {
                carrier.apply(k, value)?;
            }
            other => {
                return Err(IoError::BadConfig(format!("unknown sidecar key '{}'", other)));
            }
        }
    }
    Ok(Scenario {
        scene: carrier.scene,
        screen: carrier.screen,
        segments,
        blinks,
        seed,
    })
}

/// Renders a calibrated gaze map (scaled basis plus input transform).
pub fn render_gaze_map(map: &GazeMap) -> String {
    let (degree, tf, cx, cy) = map.scaled_parts();
    let join = |v: &[f64]| {
        v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    };
    format!(
        "degree = {}\nx_off = {}\nx_scale = {}\ny_off = {}\ny_scale = {}\ncoeffs_x = {}\ncoeffs_y = {}\n",
        degree, tf[0], tf[1], tf[2], tf[3], join(cx), join(cy)
    )
}

/// Parses a gaze-map file produced by [`render_gaze_map`].
pub fn parse_gaze_map(text: &str) -> Result<GazeMap, IoError> {
    let mut degree = None;
    let mut tf = [0.0f64, 1.0, 0.0, 1.0];
    let mut cx = Vec::new();
    let mut cy = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| IoError::BadConfig("gaze map: expected 'key = value'".into()))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "degree" => {
                degree = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| IoError::BadConfig(format!("degree: {}", e)))?,
                )
            }
            "x_off" => tf[0] = split_fields(value, 1, "x_off")?[0],
            "x_scale" => tf[1] = split_fields(value, 1, "x_scale")?[0],
            "y_off" => tf[2] = split_fields(value, 1, "y_off")?[0],
            "y_scale" => tf[3] = split_fields(value, 1, "y_scale")?[0],
            "coeffs_x" => cx = split_fields(value, value.split_whitespace().count(), "coeffs_x")?,
            "coeffs_y" => cy = split_fields(value, value.split_whitespace().count(), "coeffs_y")?,
            other => {
                return Err(IoError::BadConfig(format!("unknown gaze map key '{}'", other)))
            }
        }
    }
    let degree = degree.ok_or_else(|| IoError::BadConfig("gaze map: missing degree".into()))?;
    GazeMap::from_scaled_parts(degree, tf, cx, cy)
        .map_err(|e| IoError::BadConfig(format!("gaze map: {}", e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{calibrate, CalibrationPair};
    use crate::model::Point;
    use crate::sim::SceneConfig;

    #[test]
    fn scenario_roundtrip_exact() {
        let sc = Scenario {
            scene: SceneConfig { contrast_threshold: 0.123456789012345, ..Default::default() },
            screen: crate::gaze::ScreenGeometry {
                cx: 960.5,
                cy: 540.25,
                distance: 1300.125,
                width: 1920.0,
                height: 1080.0,
            },
            segments: vec![
                Trajectory::Fixation { center: (173.0, 130.0), duration_us: 200_000 },
                Trajectory::Saccade {
                    start: (173.0, 130.0),
                    end: (150.33333333333334, 110.1),
                    duration_us: 120_000,
                },
                Trajectory::SmoothPursuitSquareWave {
                    start: (140.0, 100.0),
                    width: 60.0,
                    period_us: 800_000,
                    descent_px: 12.5,
                    duration_us: 2_000_000,
                },
            ],
            blinks: vec![BlinkSpec { t0_us: 500_000, duration_us: 160_000 }],
            seed: 12345,
        };
        let text = render_scenario(&sc);
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn scenario_rejects_unknown_keys() {
        assert!(parse_scenario("segment = orbit 1 2 3\n").is_err());
        assert!(parse_scenario("gamma = 0.5\n").is_err());
    }

    #[test]
    fn gaze_map_roundtrip() {
        let pairs: Vec<CalibrationPair> = (0..4)
            .flat_map(|i| {
                (0..4).map(move |j| CalibrationPair {
                    pupil: Point::new(100.0 + 20.0 * i as f64, 90.0 + 15.0 * j as f64),
                    screen: Point::new(
                        300.0 + 55.0 * i as f64 + 0.3 * (j * j) as f64,
                        200.0 + 40.0 * j as f64,
                    ),
                })
            })
            .collect();
        let map = calibrate(&pairs, 2).unwrap();
        let text = render_gaze_map(&map);
        let back = parse_gaze_map(&text).unwrap();
        assert_eq!(back, map);
    }
}
