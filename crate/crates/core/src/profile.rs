//! Scalar profiles over the arm arclength.

use serde::{Deserialize, Serialize};

/// Desired-value profile over `s in [0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Constant(f64),
    /// Linear from `start` at the base to `end` at the tip.
    Linear {
        start: f64,
        end: f64,
    },
}

impl Profile {
    pub fn eval(&self, s: f64, length: f64) -> f64 {
        match *self {
            Profile::Constant(v) => v,
            Profile::Linear { start, end } => {
                let u = (s / length).clamp(0.0, 1.0);
                start + (end - start) * u
            }
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            Profile::Constant(v) => v,
            Profile::Linear { start, end } => start.min(end),
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            Profile::Constant(v) => v,
            Profile::Linear { start, end } => start.max(end),
        }
    }
}

/// Values on the uniform grid `s_j = j*h`, linearly interpolated in between
/// and clamped outside.
#[derive(Debug, Clone, PartialEq)]
pub struct GridProfile {
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridProfile {
    pub fn new(h: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 2 && h > 0.0);
        GridProfile { h, values }
    }

    pub fn zeros(length: f64, steps: usize) -> Self {
        Self::new(length / steps as f64, vec![0.0; steps + 1])
    }

    pub fn from_fn<F: Fn(f64) -> f64>(length: f64, steps: usize, f: F) -> Self {
        let h = length / steps as f64;
        Self::new(h, (0..=steps).map(|j| f(j as f64 * h)).collect())
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let n = self.steps();
        let u = (s / self.h).clamp(0.0, n as f64);
        let j = (u.floor() as usize).min(n - 1);
        let t = u - j as f64;
        self.values[j] + t * (self.values[j + 1] - self.values[j])
    }

    /// Resamples onto a grid with a different step count over the same length.
    pub fn resample(&self, steps: usize) -> GridProfile {
        let length = self.h * self.steps() as f64;
        GridProfile::from_fn(length, steps, |s| self.eval(s))
    }
}
