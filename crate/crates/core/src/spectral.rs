//! N-dimensional FFT on cubic periodic grids.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct GridFft {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridFft {
    pub(crate) fn new(n: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dim,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalised transform along every axis, row-major layout.
    pub(crate) fn process(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n.pow(self.dim as u32));
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut lines = vec![Complex64::default(); block];
            for chunk in data.chunks_mut(block) {
                for j in 0..stride {
                    for i in 0..n {
                        lines[j * n + i] = chunk[i * stride + j];
                    }
                }
                fft.process_with_scratch(&mut lines, &mut scratch);
                for j in 0..stride {
                    for i in 0..n {
                        chunk[i * stride + j] = lines[j * n + i];
                    }
                }
            }
        }
    }
}

/// Signed integer wavenumber of DFT index i.
pub(crate) fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Multi-index of a flat row-major index.
pub(crate) fn unflatten(mut idx: usize, n: usize, dim: usize, out: &mut [usize]) {
    for d in (0..dim).rev() {
        out[d] = idx % n;
        idx /= n;
    }
}
