//! Separable n-dimensional complex FFT over row-major arrays, last axis contiguous.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Transform {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Transform {
    pub fn new(n: usize, dim: usize) -> Self {
        let mut p = FftPlanner::new();
        Self { n, dim, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut buf = vec![Complex64::default(); data.len()];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                data.par_chunks_mut(n).for_each(|line| plan.process(line));
                continue;
            }
            {
                let src = &*data;
                buf.par_chunks_mut(n).enumerate().for_each(|(line, out)| {
                    let base = (line / stride) * n * stride + line % stride;
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = src[base + i * stride];
                    }
                    plan.process(out);
                });
            }
            let src = &buf;
            data.par_chunks_mut(n * stride).enumerate().for_each(|(o, block)| {
                for i in 0..n {
                    for j in 0..stride {
                        block[i * stride + j] = src[(o * stride + j) * n + i];
                    }
                }
            });
        }
    }

    /// Fourier coefficients: unnormalized forward transform divided by the point count.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.fwd);
        let s = 1.0 / self.len() as f64;
        data.par_iter_mut().for_each(|c| *c *= s);
    }

    /// Synthesis from Fourier coefficients.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inv);
    }
}
