//! Adaptive-threshold blink detection from per-frame ellipse eccentricities.
//!
//! During a blink the pupil fit deforms toward a long thin ellipse, so the
//! eccentricity jumps well above its recent baseline. The detector keeps a
//! ring of the last `window` eccentricities and flags a frame whose value
//! exceeds mean + lambda·std of that ring, plus `hold` follow-on frames.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlinkConfig {
    /// Ring buffer length n.
    pub window: usize,
    /// Threshold multiplier λ on the buffer standard deviation.
    pub lambda: f64,
    /// Follow-on frames k flagged after a trigger.
    pub hold: usize,
}

impl Default for BlinkConfig {
    fn default() -> Self {
        Self { window: 30, lambda: 3.0, hold: 3 }
    }
}

impl BlinkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.window < 2 {
            return Err(format!("blink window must be >= 2, got {}", self.window));
        }
        if self.lambda <= 0.0 {
            return Err(format!("blink lambda must be > 0, got {}", self.lambda));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BlinkDetector {
    config: BlinkConfig,
    buffer: VecDeque<f64>,
    cooldown: usize,
}

impl BlinkDetector {
    pub fn new(config: BlinkConfig) -> Self {
        Self {
            buffer: VecDeque::with_capacity(config.window),
            config,
            cooldown: 0,
        }
    }

    pub fn config(&self) -> &BlinkConfig {
        &self.config
    }

    /// Observes one eccentricity and returns whether the frame is flagged.
    ///
    /// No flags are produced until the buffer holds `window` values. A
    /// triggering value does not enter the buffer, so blink eccentricities
    /// never contaminate the baseline statistics; frames consumed by the
    /// follow-on hold leave the buffer untouched as well.
    pub fn observe(&mut self, eccentricity: f64) -> bool {
        if self.cooldown > 0 {
            self.cooldown -= 1;
            return true;
        }
        if self.buffer.len() == self.config.window {
            let n = self.buffer.len() as f64;
            let mean: f64 = self.buffer.iter().sum::<f64>() / n;
            let var: f64 = self
                .buffer
                .iter()
                .map(|r| (r - mean) * (r - mean))
                .sum::<f64>()
                / (n - 1.0);
            if eccentricity > mean + self.config.lambda * var.sqrt() {
                self.cooldown = self.config.hold;
                return true;
            }
        }
        self.buffer.push_back(eccentricity);
        if self.buffer.len() > self.config.window {
            self.buffer.pop_front();
        }
        false
    }

    pub fn is_warm(&self) -> bool {
        self.buffer.len() == self.config.window
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn detector(window: usize, lambda: f64, hold: usize) -> BlinkDetector {
        BlinkDetector::new(BlinkConfig { window, lambda, hold })
    }

    #[test]
    fn constant_stream_never_flags() {
        let mut det = detector(10, 3.0, 3);
        for _ in 0..200 {
            assert!(!det.observe(1.2));
        }
    }

    #[test]
    fn no_flags_during_warmup() {
        let mut det = detector(20, 0.1, 3);
        // Wild swings before the buffer is full must not flag.
        for i in 0..20 {
            assert!(!det.observe(1.0 + (i % 5) as f64));
        }
        assert!(det.is_warm());
    }

    #[test]
    fn spike_over_noisy_baseline_flags_and_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut det = detector(20, 3.0, 3);
        let baseline: Vec<f64> = (0..20)
            .map(|_| 1.3 + 0.01 * rng.gen_range(-1.0..1.0))
            .collect();
        for &r in &baseline {
            assert!(!det.observe(r));
        }
        // Verify the spike really exceeds mean + 3σ of the recorded buffer.
        let mean = baseline.iter().sum::<f64>() / 20.0;
        let sd = (baseline.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / 19.0).sqrt();
        assert!(3.0 > mean + 3.0 * sd);
        assert!(det.observe(3.0));
        for _ in 0..3 {
            assert!(det.observe(1.3), "hold frames flagged regardless of value");
        }
        assert!(!det.observe(1.3));
    }

    #[test]
    fn single_outlier_yields_exactly_one_plus_hold_flags() {
        let hold = 3;
        let mut det = detector(10, 3.0, hold);
        for _ in 0..10 {
            det.observe(1.25);
        }
        let mut stream = vec![4.0];
        stream.extend(std::iter::repeat(1.25).take(20));
        let flags: usize = stream.iter().filter(|&&r| det.observe(r)).count();
        assert_eq!(flags, 1 + hold);
    }

    #[test]
    fn flag_decision_invariant_under_positive_scaling() {
        for scale in [0.5, 1.0, 7.3] {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut det = detector(15, 2.5, 2);
            let mut flags = Vec::new();
            for i in 0..60 {
                let base = if i == 40 { 2.8 } else { 1.2 + 0.02 * rng.gen_range(-1.0..1.0) };
                flags.push(det.observe(base * scale));
            }
            let mut rng2 = ChaCha8Rng::seed_from_u64(42);
            let mut det2 = detector(15, 2.5, 2);
            let mut flags2 = Vec::new();
            for i in 0..60 {
                let base = if i == 40 { 2.8 } else { 1.2 + 0.02 * rng2.gen_range(-1.0..1.0) };
                flags2.push(det2.observe(base));
            }
            assert_eq!(flags, flags2, "scaling by {} changed decisions", scale);
        }
    }
}
