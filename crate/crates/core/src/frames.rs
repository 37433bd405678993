//! Per-frame candidate point extraction.
//!
//! Frames anchor the three fitters: the pupil from the boundary of a
//! thresholded-and-opened dark mask, the eyelid from Harris corners of a
//! contrast-clipped image, the glint from bright pixels near the pupil.

use crate::model::{Frame, Point};

/// Thresholds and radii of the frame pipeline. All intensity values are
/// 8-bit; radii are in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePipelineConfig {
    /// Pupil binarization threshold: pixels strictly below are mask pixels.
    pub theta: u8,
    /// Radius of the disk structuring element used by the opening.
    pub sigma: f64,
    /// Lower eyelid clip bound.
    pub t1: u8,
    /// Upper eyelid clip bound.
    pub t2: u8,
    /// Glint intensity threshold: pixels strictly above are candidates.
    pub t3: u8,
    /// Eyelid candidates must lie within this radius of the pupil center.
    pub rho_prime: f64,
    /// Glint candidates must lie within this radius of the pupil center.
    pub rho_double_prime: f64,
    /// Harris sensitivity k in det(M) − k·trace(M)².
    pub harris_k: f64,
    /// Keep Harris responses above this fraction of the maximum response.
    pub harris_rel_thresh: f64,
}

impl Default for FramePipelineConfig {
    fn default() -> Self {
        Self {
            theta: 60,
            sigma: 2.0,
            t1: 40,
            t2: 120,
            t3: 220,
            rho_prime: 100.0,
            rho_double_prime: 70.0,
            harris_k: 0.04,
            harris_rel_thresh: 0.05,
        }
    }
}

impl FramePipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.t1 >= self.t2 {
            return Err(format!("t1 must be < t2, got {} >= {}", self.t1, self.t2));
        }
        if self.sigma <= 0.0 || self.rho_prime <= 0.0 || self.rho_double_prime <= 0.0 {
            return Err("sigma, rho_prime and rho_double_prime must be positive".into());
        }
        Ok(())
    }
}

/// Offsets of the discrete disk {(i, j) : i² + j² ≤ σ²}.
fn disk_offsets(sigma: f64) -> Vec<(i32, i32)> {
    let r = sigma.floor() as i32;
    let r2 = sigma * sigma;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx * dx + dy * dy) as f64 <= r2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn erode(mask: &[bool], w: usize, h: usize, offsets: &[(i32, i32)]) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let mut keep = true;
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                    keep = false;
                    break;
                }
                if !mask[ny as usize * w + nx as usize] {
                    keep = false;
                    break;
                }
            }
            out[y as usize * w + x as usize] = keep;
        }
    }
    out
}

fn dilate(mask: &[bool], w: usize, h: usize, offsets: &[(i32, i32)]) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            if !mask[y as usize * w + x as usize] {
                continue;
            }
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w as i32 && ny < h as i32 {
                    out[ny as usize * w + nx as usize] = true;
                }
            }
        }
    }
    out
}

/// Binary opening (erosion then dilation) with a disk of radius `sigma`.
pub fn open_mask(mask: &[bool], w: usize, h: usize, sigma: f64) -> Vec<bool> {
    let offsets = disk_offsets(sigma);
    dilate(&erode(mask, w, h, &offsets), w, h, &offsets)
}

/// Mask pixels with at least one 4-neighbor outside the mask. Pixels beyond
/// the image border count as outside.
pub fn mask_boundary(mask: &[bool], w: usize, h: usize) -> Vec<Point> {
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                continue;
            }
            let interior = x > 0
                && mask[y * w + x - 1]
                && x + 1 < w
                && mask[y * w + x + 1]
                && y > 0
                && mask[(y - 1) * w + x]
                && y + 1 < h
                && mask[(y + 1) * w + x];
            if !interior {
                out.push(Point::new(x as f64, y as f64));
            }
        }
    }
    out
}

/// Candidate pupil boundary points: edge of the opened below-threshold mask.
///
/// An empty result is valid output; the caller skips the batch update.
pub fn pupil_candidates(frame: &Frame, config: &FramePipelineConfig) -> Vec<Point> {
    let (w, h) = (frame.width, frame.height);
    let mask: Vec<bool> = frame.pixels.iter().map(|&p| p < config.theta).collect();
    let opened = open_mask(&mask, w, h, config.sigma);
    mask_boundary(&opened, w, h)
}

/// Harris corner response over an f64 image, with 3×3 Sobel gradients and a
/// 5×5 uniform window. Returns corners after 3×3 non-maximum suppression and
/// a threshold relative to the maximum response.
pub fn harris_corners(img: &[f64], w: usize, h: usize, k: f64, rel_thresh: f64) -> Vec<Point> {
    if w < 7 || h < 7 {
        return Vec::new();
    }
    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = |dx: i32, dy: i32| {
                img[(y as i32 + dy) as usize * w + (x as i32 + dx) as usize]
            };
            gx[y * w + x] = (i(1, -1) + 2.0 * i(1, 0) + i(1, 1))
                - (i(-1, -1) + 2.0 * i(-1, 0) + i(-1, 1));
            gy[y * w + x] = (i(-1, 1) + 2.0 * i(0, 1) + i(1, 1))
                - (i(-1, -1) + 2.0 * i(0, -1) + i(1, -1));
        }
    }
    let mut response = vec![0.0f64; w * h];
    let mut max_r = 0.0f64;
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for wy in y - 2..=y + 2 {
                for wx in x - 2..=x + 2 {
                    let (a, b) = (gx[wy * w + wx], gy[wy * w + wx]);
                    sxx += a * a;
                    sxy += a * b;
                    syy += b * b;
                }
            }
            let det = sxx * syy - sxy * sxy;
            let trace = sxx + syy;
            let r = det - k * trace * trace;
            response[y * w + x] = r;
            if r > max_r {
                max_r = r;
            }
        }
    }
    if max_r <= 0.0 {
        return Vec::new();
    }
    let thresh = rel_thresh * max_r;
    let mut corners = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let r = response[y * w + x];
            if r <= thresh {
                continue;
            }
            let mut is_max = true;
            'nms: for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = response[(y as i32 + dy) as usize * w + (x as i32 + dx) as usize];
                    if n > r {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if is_max {
                corners.push(Point::new(x as f64, y as f64));
            }
        }
    }
    corners
}

/// Candidate eyelid points: Harris corners of the clipped image, within
/// `rho_prime` of the pupil center and in the upper half of the image.
pub fn eyelid_candidates(
    frame: &Frame,
    pupil_center: Point,
    config: &FramePipelineConfig,
) -> Vec<Point> {
    let (w, h) = (frame.width, frame.height);
    let clipped: Vec<f64> = frame
        .pixels
        .iter()
        .map(|&p| p.clamp(config.t1, config.t2) as f64)
        .collect();
    harris_corners(&clipped, w, h, config.harris_k, config.harris_rel_thresh)
        .into_iter()
        .filter(|p| {
            (p - pupil_center).norm() < config.rho_prime && p.y < h as f64 / 2.0
        })
        .collect()
}

/// Candidate glint points: pixels brighter than `t3` within
/// `rho_double_prime` of the pupil center.
pub fn glint_candidates(
    frame: &Frame,
    pupil_center: Point,
    config: &FramePipelineConfig,
) -> Vec<Point> {
    let mut out = Vec::new();
    let r2 = config.rho_double_prime * config.rho_double_prime;
    for y in 0..frame.height {
        for x in 0..frame.width {
            if frame.get(x, y) > config.t3 {
                let p = Point::new(x as f64, y as f64);
                if (p - pupil_center).norm_squared() < r2 {
                    out.push(p);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitter::{accumulate_circle, circle_from_solution, FitState};

    fn uniform_frame(w: usize, h: usize, v: u8) -> Frame {
        Frame::new(0, w, h, vec![v; w * h]).unwrap()
    }

    /// Paints a filled disk into a frame buffer.
    fn paint_disk(frame: &mut Frame, cx: f64, cy: f64, r: f64, v: u8) {
        for y in 0..frame.height {
            for x in 0..frame.width {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r {
                    frame.pixels[y * frame.width + x] = v;
                }
            }
        }
    }

    fn fit_circle_to(points: &[Point]) -> crate::model::CircleParams {
        let (a, b) = accumulate_circle(points);
        let mut st = FitState::<3>::new();
        st.blend_batch(&a, &b, 0.0, points.len());
        circle_from_solution(&st.solve().unwrap()).unwrap()
    }

    #[test]
    fn white_frame_has_no_pupil_candidates() {
        let frame = uniform_frame(64, 48, 255);
        assert!(pupil_candidates(&frame, &FramePipelineConfig::default()).is_empty());
    }

    #[test]
    fn disk_boundary_recovers_center_and_radius() {
        let mut frame = uniform_frame(200, 160, 200);
        paint_disk(&mut frame, 100.0, 80.0, 20.0, 10);
        let pts = pupil_candidates(&frame, &FramePipelineConfig::default());
        assert!(pts.len() > 20);
        let c = fit_circle_to(&pts);
        assert!((c.cx - 100.0).abs() < 0.5, "cx {}", c.cx);
        assert!((c.cy - 80.0).abs() < 0.5, "cy {}", c.cy);
        assert!((c.r - 20.0).abs() < 1.0, "r {}", c.r);
    }

    #[test]
    fn opening_removes_salt_noise() {
        let mut clean = uniform_frame(200, 160, 200);
        paint_disk(&mut clean, 100.0, 80.0, 20.0, 10);
        let mut noisy = clean.clone();
        // 1-px dark speckles away from the disk.
        for &(x, y) in &[(10usize, 10usize), (150, 30), (40, 140), (190, 100)] {
            noisy.pixels[y * noisy.width + x] = 5;
        }
        let cfg = FramePipelineConfig::default();
        assert_eq!(pupil_candidates(&noisy, &cfg), pupil_candidates(&clean, &cfg));
    }

    #[test]
    fn opening_is_idempotent() {
        let mut frame = uniform_frame(120, 100, 200);
        paint_disk(&mut frame, 60.0, 50.0, 17.0, 10);
        let cfg = FramePipelineConfig::default();
        let mask: Vec<bool> = frame.pixels.iter().map(|&p| p < cfg.theta).collect();
        let once = open_mask(&mask, 120, 100, cfg.sigma);
        let twice = open_mask(&once, 120, 100, cfg.sigma);
        assert_eq!(once, twice);
    }

    #[test]
    fn candidates_translate_with_the_frame() {
        let cfg = FramePipelineConfig::default();
        let mut base = uniform_frame(200, 160, 200);
        paint_disk(&mut base, 90.0, 70.0, 15.0, 10);
        let mut shifted = uniform_frame(200, 160, 200);
        paint_disk(&mut shifted, 103.0, 77.0, 15.0, 10);
        let a = pupil_candidates(&base, &cfg);
        let b = pupil_candidates(&shifted, &cfg);
        assert_eq!(a.len(), b.len());
        let mut moved: Vec<(i64, i64)> = a
            .iter()
            .map(|p| (p.x as i64 + 13, p.y as i64 + 7))
            .collect();
        let mut got: Vec<(i64, i64)> = b.iter().map(|p| (p.x as i64, p.y as i64)).collect();
        moved.sort_unstable();
        got.sort_unstable();
        assert_eq!(moved, got);
    }

    #[test]
    fn boundary_points_have_an_outside_neighbor() {
        let mut frame = uniform_frame(120, 100, 200);
        paint_disk(&mut frame, 60.0, 50.0, 17.0, 10);
        let cfg = FramePipelineConfig::default();
        let mask: Vec<bool> = frame.pixels.iter().map(|&p| p < cfg.theta).collect();
        let opened = open_mask(&mask, 120, 100, cfg.sigma);
        for p in pupil_candidates(&frame, &cfg) {
            let (x, y) = (p.x as usize, p.y as usize);
            assert!(opened[y * 120 + x], "candidate must be a mask pixel");
            let all_inside = x > 0
                && opened[y * 120 + x - 1]
                && x < 119
                && opened[y * 120 + x + 1]
                && y > 0
                && opened[(y - 1) * 120 + x]
                && y < 99
                && opened[(y + 1) * 120 + x];
            assert!(!all_inside, "candidate with all 4 neighbors inside at {:?}", p);
        }
    }

    #[test]
    fn uniform_frame_has_no_corners() {
        let frame = uniform_frame(64, 48, 90);
        let pts = eyelid_candidates(
            &frame,
            Point::new(32.0, 24.0),
            &FramePipelineConfig::default(),
        );
        assert!(pts.is_empty());
    }

    #[test]
    fn checker_corner_is_detected() {
        // A 2×2 checkerboard junction is the canonical Harris corner.
        let mut frame = uniform_frame(64, 64, 90);
        for y in 0..32 {
            for x in 0..32 {
                frame.pixels[y * 64 + x] = 50;
            }
        }
        for y in 32..64 {
            for x in 32..64 {
                frame.pixels[y * 64 + x] = 50;
            }
        }
        let corners = harris_corners(
            &frame.pixels.iter().map(|&p| p as f64).collect::<Vec<_>>(),
            64,
            64,
            0.04,
            0.1,
        );
        assert!(
            corners.iter().any(|p| (p.x - 31.5).abs() <= 2.0 && (p.y - 31.5).abs() <= 2.0),
            "no corner near the junction: {:?}",
            corners
        );
    }

    #[test]
    fn lower_half_corners_are_discarded() {
        // Texture entirely in the lower half of the image.
        let mut frame = uniform_frame(64, 64, 90);
        for y in 48..56 {
            for x in 20..28 {
                frame.pixels[y * 64 + x] = 50;
            }
        }
        let pts = eyelid_candidates(
            &frame,
            Point::new(24.0, 50.0),
            &FramePipelineConfig::default(),
        );
        assert!(pts.is_empty());
    }

    #[test]
    fn glint_spot_found_and_distance_filtered() {
        let cfg = FramePipelineConfig::default();
        let mut frame = uniform_frame(128, 96, 120);
        // 3-px bright spot near the pupil center.
        paint_disk(&mut frame, 70.0, 40.0, 1.6, 250);
        let near = glint_candidates(&frame, Point::new(60.0, 45.0), &cfg);
        assert!(!near.is_empty());
        assert!(near.iter().all(|p| frame.get(p.x as usize, p.y as usize) > cfg.t3));
        // Same spot but the pupil is 2ρ″ away.
        let far = glint_candidates(&frame, Point::new(70.0 - 2.0 * cfg.rho_double_prime, 40.0), &cfg);
        assert!(far.is_empty());
    }

    #[test]
    fn black_frame_has_no_glint() {
        let frame = uniform_frame(64, 48, 0);
        let pts = glint_candidates(&frame, Point::new(32.0, 24.0), &FramePipelineConfig::default());
        assert!(pts.is_empty());
    }
}
