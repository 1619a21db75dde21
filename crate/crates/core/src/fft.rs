//! Multi-dimensional complex FFTs over the periodic lattice.
//!
//! Transforms run axis by axis with one-dimensional `rustfft` plans. Plans are
//! cached process-wide and shared read-only; scratch buffers are per call.

use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::SpaceGrid;

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

/// Forward/inverse plan pair for an `n^dim` lattice.
#[derive(Clone)]
pub struct FftNd {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("n", &self.n).field("dim", &self.dim).finish()
    }
}

impl FftNd {
    pub fn new(n: usize, dim: usize) -> Self {
        let mut planner = planner().lock().unwrap_or_else(|e| e.into_inner());
        Self {
            n,
            dim,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn for_space(space: &SpaceGrid) -> Self {
        Self::new(space.n, space.dim)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Unnormalized forward DFT, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.forward);
    }

    /// Inverse DFT normalized by `1/N`, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.inverse);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        assert_eq!(data.len(), self.len(), "FFT buffer has the wrong length");
        let n = self.n;
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // Axis 0 is contiguous.
        fft.process_with_scratch(data, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let mut lines = vec![Complex64::default(); data.len()];
        for axis in 1..self.dim {
            let stride = n.pow(axis as u32);
            let block = stride * n;
            let mut pos = 0;
            for start in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    for i in 0..n {
                        lines[pos] = data[start + offset + i * stride];
                        pos += 1;
                    }
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            pos = 0;
            for start in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    for i in 0..n {
                        data[start + offset + i * stride] = lines[pos];
                        pos += 1;
                    }
                }
            }
        }
    }

    /// DFT of real samples.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Real part of the inverse DFT; the imaginary part is the anti-Hermitian
    /// component, which multipliers with real kernels never produce beyond rounding.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spectrum);
        spectrum.into_iter().map(|c| c.re).collect()
    }
}
