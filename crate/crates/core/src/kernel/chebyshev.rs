//! Matrix-free `e^{−hL} f` by Chebyshev expansion on `[0, λ_max]`.
//!
//! With `t = 2λ/λ_max − 1` and `a = hλ_max/2`,
//! `e^{−hλ} = e^{−a} e^{−a t} = Σ_k c_k T_k(t)`, `c_k = (2 − δ_k0)(−1)^k e^{−a} I_k(a)`.
//! Long times are split into equal substeps so that `a` stays moderate.

use super::LaplacianMatrix;
use crate::geometry::DiscreteGeometry;
use crate::par::ExecMode;

/// Largest `a = τλ_max/2` handled in a single polynomial.
const MAX_HALF_WIDTH: f64 = 40.0;

/// `e^{−a} I_k(a)` for `k = 0..=k_max`, by Miller's backward recurrence
/// normalized with `e^{a} = I_0(a) + 2 Σ_{k≥1} I_k(a)`.
pub fn scaled_bessel_i(a: f64, k_max: usize) -> Vec<f64> {
    if a == 0.0 {
        let mut v = vec![0.0; k_max + 1];
        v[0] = 1.0;
        return v;
    }
    let start = k_max + 40 + (2.0 * a).ceil() as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = vals[k + 1] + (2.0 * k as f64 / a) * vals[k];
        if vals[k - 1] > 1e250 {
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
    vals.truncate(k_max + 1);
    vals.iter_mut().for_each(|v| *v /= norm);
    vals
}

pub struct ChebyshevAction {
    lambda_max: f64,
    tolerance: f64,
}

/// Coefficients for one substep plus the substep count.
pub struct ChebyshevPlan {
    coefficients: Vec<f64>,
    substeps: usize,
}

impl ChebyshevPlan {
    pub fn degree_and_substeps(&self) -> (usize, usize) {
        (self.coefficients.len() - 1, self.substeps)
    }
}

impl ChebyshevAction {
    pub fn new(geom: &DiscreteGeometry, tolerance: f64) -> Self {
        ChebyshevAction {
            lambda_max: LaplacianMatrix::new(geom).gershgorin_bound(),
            tolerance,
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Chooses substeps and the smallest degree whose coefficient tail is
    /// below `tolerance / substeps`; the coefficients are rescaled so the
    /// polynomial equals one at `λ = 0`.
    pub fn plan(&self, h: f64) -> ChebyshevPlan {
        let total = 0.5 * h * self.lambda_max;
        let substeps = (total / MAX_HALF_WIDTH).ceil().max(1.0) as usize;
        let a = total / substeps as f64;
        let budget = self.tolerance / substeps as f64;
        let k_max = (2.0 * a + 60.0).ceil() as usize;
        let bessel = scaled_bessel_i(a, k_max);
        let mut c: Vec<f64> = bessel
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 { *b } else { 2.0 * sign * b }
            })
            .collect();
        let mut tail = 0.0;
        let mut degree = k_max;
        for k in (1..=k_max).rev() {
            tail += c[k].abs();
            if tail > budget {
                degree = k;
                break;
            }
            degree = k - 1;
        }
        c.truncate(degree + 1);
        // value at t = −1 is Σ c_k (−1)^k
        let at_zero: f64 = c
            .iter()
            .enumerate()
            .map(|(k, v)| if k % 2 == 0 { *v } else { -*v })
            .sum();
        c.iter_mut().for_each(|v| *v /= at_zero);
        ChebyshevPlan {
            coefficients: c,
            substeps,
        }
    }

    pub fn apply(&self, geom: &DiscreteGeometry, h: f64, f: &[f64], mode: ExecMode) -> Vec<f64> {
        let plan = self.plan(h);
        let lap = LaplacianMatrix::new(geom);
        let mut v = f.to_vec();
        for _ in 0..plan.substeps {
            v = self.apply_polynomial(&lap, &plan.coefficients, &v, mode);
        }
        v
    }

    fn apply_polynomial(
        &self,
        lap: &LaplacianMatrix,
        c: &[f64],
        f: &[f64],
        mode: ExecMode,
    ) -> Vec<f64> {
        let n = f.len();
        let scale = 2.0 / self.lambda_max;
        // A g = scale·L g − g maps the spectrum into [−1, 1]
        let shifted = |g: &[f64], out: &mut [f64]| {
            lap.apply_into(g, out, mode);
            for (o, gi) in out.iter_mut().zip(g) {
                *o = scale * *o - gi;
            }
        };
        let mut acc: Vec<f64> = f.iter().map(|v| c[0] * v).collect();
        if c.len() == 1 {
            return acc;
        }
        let mut prev = f.to_vec();
        let mut cur = vec![0.0; n];
        shifted(&prev, &mut cur);
        for (a, t) in acc.iter_mut().zip(&cur) {
            *a += c[1] * t;
        }
        let mut next = vec![0.0; n];
        for ck in &c[2..] {
            shifted(&cur, &mut next);
            for i in 0..n {
                next[i] = 2.0 * next[i] - prev[i];
                acc[i] += ck * next[i];
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        acc
    }
}
