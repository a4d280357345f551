use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Shared FFT planner. Plans are cached by the planner itself.
pub(crate) struct FftCache {
    planner: Mutex<FftPlanner<f64>>,
}

impl Default for FftCache {
    fn default() -> Self {
        Self { planner: Mutex::new(FftPlanner::new()) }
    }
}

impl FftCache {
    pub(crate) fn forward(&self, len: usize) -> Arc<dyn Fft<f64>> {
        self.planner.lock().expect("fft planner poisoned").plan_fft_forward(len)
    }

    pub(crate) fn inverse(&self, len: usize) -> Arc<dyn Fft<f64>> {
        self.planner.lock().expect("fft planner poisoned").plan_fft_inverse(len)
    }
}

impl std::fmt::Debug for FftCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FftCache")
    }
}

/// `sum |x|^2`
pub(crate) fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}
