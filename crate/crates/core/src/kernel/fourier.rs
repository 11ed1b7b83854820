use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::DiscreteGeometry;
use crate::par::{self, ExecMode};

/// FFT diagonalization of the nearest-neighbour Laplacian on a uniform
/// periodic grid. The symbol factorizes over axes:
/// `e^{−hλ_k} = Π_a exp(−h (2/Δx²)(1 − cos 2πk_a/n))`.
pub struct FourierPlan {
    side: usize,
    dim: usize,
    spacing: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FourierPlan {
    pub fn new(geom: &DiscreteGeometry) -> Result<Self> {
        let (side, dim) = geom.grid_shape().ok_or(Error::BackendUnavailable {
            backend: "fourier",
            reason: "requires a periodic grid".into(),
        })?;
        if !geom.is_uniform() {
            return Err(Error::NonUniformDensity { backend: "fourier" });
        }
        let mut planner = FftPlanner::new();
        Ok(FourierPlan {
            side,
            dim,
            spacing: geom.spacing().unwrap(),
            forward: planner.plan_fft_forward(side),
            inverse: planner.plan_fft_inverse(side),
        })
    }

    /// Per-axis eigenvalue `(2/Δx²)(1 − cos 2πk/n)`.
    pub fn axis_eigenvalue(&self, k: usize) -> f64 {
        2.0 / (self.spacing * self.spacing) * (1.0 - (2.0 * PI * k as f64 / self.side as f64).cos())
    }

    /// Eigenvalue of the full Laplacian at wave vector `k` (`k.len() == dim`).
    pub fn eigenvalue(&self, k: &[usize]) -> f64 {
        k.iter().map(|&ka| self.axis_eigenvalue(ka)).sum()
    }

    fn axis_symbol(&self, h: f64) -> Vec<f64> {
        (0..self.side)
            .map(|k| (-h * self.axis_eigenvalue(k)).exp())
            .collect()
    }

    pub fn apply(&self, h: f64, field: &[f64], mode: ExecMode) -> Vec<f64> {
        let n = self.side;
        let symbol = self.axis_symbol(h);
        let mut out = field.to_vec();
        self.filter_rows(&mut out, &symbol, mode);
        if self.dim == 2 {
            let mut t = transpose(&out, n);
            self.filter_rows(&mut t, &symbol, mode);
            out = transpose(&t, n);
        }
        out
    }

    /// Multiplies each contiguous row's spectrum by `symbol`.
    fn filter_rows(&self, data: &mut [f64], symbol: &[f64], mode: ExecMode) {
        let n = self.side;
        let scale = 1.0 / n as f64;
        par::for_each_chunk_mut(mode, data, n, |_, row| {
            let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let mut scratch = vec![Complex64::default(); self.forward.get_inplace_scratch_len()];
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (b, s) in buf.iter_mut().zip(symbol) {
                *b *= s * scale;
            }
            scratch.resize(self.inverse.get_inplace_scratch_len(), Complex64::default());
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            for (r, b) in row.iter_mut().zip(&buf) {
                *r = b.re;
            }
        });
    }

    /// `T(δ) = Σ_k a(k) cos(2πkδ/n)`, the per-axis factor of the μ-density.
    fn axis_table(&self, h: f64) -> Vec<f64> {
        let n = self.side;
        let symbol = self.axis_symbol(h);
        (0..n)
            .map(|d| {
                symbol
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * (2.0 * PI * ((k * d) % n) as f64 / n as f64).cos())
                    .sum()
            })
            .collect()
    }

    fn offsets(&self, x: usize, y: usize) -> [usize; 2] {
        let n = self.side;
        let (xi, xj) = (x % n, x / n);
        let (yi, yj) = (y % n, y / n);
        [(xi + n - yi) % n, (xj + n - yj) % n]
    }

    pub fn entry(&self, h: f64, x: usize, y: usize) -> f64 {
        let t = self.axis_table(h);
        let [di, dj] = self.offsets(x, y);
        if self.dim == 2 {
            t[di] * t[dj]
        } else {
            t[di]
        }
    }

    pub fn row(&self, h: f64, x: usize) -> Vec<f64> {
        let t = self.axis_table(h);
        let total = self.side.pow(self.dim as u32);
        (0..total)
            .map(|y| {
                let [di, dj] = self.offsets(x, y);
                if self.dim == 2 {
                    t[di] * t[dj]
                } else {
                    t[di]
                }
            })
            .collect()
    }
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    const B: usize = 32;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    t[j * n + i] = a[i * n + j];
                }
            }
        }
    }
    t
}
