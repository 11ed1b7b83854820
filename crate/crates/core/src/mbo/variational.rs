use crate::error::{Error, Result};
use crate::geometry::PhaseField;
use crate::kernel::HeatKernelOperator;

use super::multiplier::MultiplierVector;
use super::threshold::{threshold, threshold_to_targets, TieRule};

pub const MAX_ITERATIONS: usize = 5000;
/// Stop once the Frank–Wolfe gap, an upper bound on `J(u) − min J`, drops
/// below `GAP_TOL · max(|J(u)|, 1)`.
pub const GAP_TOL: f64 = 1e-13;

/// Minimizer of `E_h^ℓ(u) + (1/2s) d_h²(u, χ^{ℓ−1})` at offset `s ∈ (0, h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalIterate {
    pub s: f64,
    pub u: PhaseField,
    /// `E_h(u) + Λ·Vol(u) + (1/2s) d_h²(u, χ^{ℓ−1})`.
    pub objective: f64,
    /// `E_h(u) + Λ·Vol(u)`.
    pub constrained_energy: f64,
    /// `(1/2h) d_h²(u, χ^{ℓ−1})`.
    pub dist2_over_2h: f64,
    /// `d_h(u, χ^{ℓ−1}) / s`.
    pub slope_estimate: f64,
    pub iterations: usize,
}

/// `d_h(u, χ^{ℓ−1}) / s`.
pub fn metric_slope_estimate(iterate: &VariationalIterate) -> f64 {
    iterate.slope_estimate
}

struct Problem<'a> {
    op: &'a HeatKernelOperator,
    h: f64,
    /// `h/s`
    ratio: f64,
    lambda: &'a [f64],
    chi: &'a PhaseField,
    p_chi: Vec<Vec<f64>>,
    measure: &'a [f64],
}

/// Values of the pieces of the objective at one point.
#[derive(Clone, Copy)]
struct Parts {
    energy: f64,
    volume_term: f64,
    metric: f64,
}

impl Parts {
    fn objective(self, ratio: f64) -> f64 {
        self.energy + self.volume_term + ratio * self.metric
    }
}

impl Problem<'_> {
    fn p(&self) -> usize {
        self.chi.n_phases()
    }

    fn n(&self) -> usize {
        self.chi.n_vertices()
    }

    fn diffuse(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        let refs: Vec<&[f64]> = u.chunks(self.n()).collect();
        self.op.apply_many(self.h, &refs)
    }

    fn parts(&self, u: &[f64], pu: &[Vec<f64>]) -> Parts {
        let n = self.n();
        let (mut energy, mut volume_term, mut metric) = (0.0, 0.0, 0.0);
        for i in 0..self.p() {
            let ui = &u[i * n..(i + 1) * n];
            let c = self.chi.phase(i);
            let (mut e, mut v, mut d) = (0.0, 0.0, 0.0);
            for x in 0..n {
                let w = self.measure[x];
                e += w * ui[x] * (1.0 - pu[i][x]);
                v += w * ui[x];
                d += w * (ui[x] - c[x]) * (pu[i][x] - self.p_chi[i][x]);
            }
            energy += e;
            volume_term += self.lambda[i] * v;
            metric += d;
        }
        let scale = 1.0 / self.h.sqrt();
        Parts {
            energy: energy * scale,
            volume_term,
            metric: metric * scale,
        }
    }

    /// μ-gradient `(1/√h)(1 − 2pu_i) + Λ_i + (h/s)(2/√h)(pu_i − pχ_i)`.
    fn gradient(&self, pu: &[Vec<f64>]) -> Vec<f64> {
        let n = self.n();
        let scale = 1.0 / self.h.sqrt();
        let mut g = vec![0.0; self.p() * n];
        for i in 0..self.p() {
            for x in 0..n {
                g[i * n + x] = scale * (1.0 - 2.0 * pu[i][x])
                    + self.lambda[i]
                    + self.ratio * 2.0 * scale * (pu[i][x] - self.p_chi[i][x]);
            }
        }
        g
    }

    /// `Σ_x μ_x (Σ_i g_ix u_ix − min_i g_ix)`.
    fn gap(&self, u: &[f64], grad: &[f64]) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for x in 0..n {
            let (mut dot, mut low) = (0.0, f64::INFINITY);
            for i in 0..self.p() {
                dot += grad[i * n + x] * u[i * n + x];
                low = low.min(grad[i * n + x]);
            }
            acc += self.measure[x] * (dot - low);
        }
        acc
    }

    fn iterate(&self, s: f64, u: Vec<f64>, parts: Parts, iterations: usize) -> VariationalIterate {
        let metric = parts.metric.max(0.0);
        let d = (2.0 * self.h * metric).sqrt();
        VariationalIterate {
            s,
            u: PhaseField::from_raw(self.p(), self.n(), u),
            objective: parts.objective(self.ratio),
            constrained_energy: parts.energy + parts.volume_term,
            dist2_over_2h: metric,
            slope_estimate: d / s,
            iterations,
        }
    }
}

/// Euclidean projection of `v` onto the probability simplex.
pub(crate) fn project_simplex(v: &mut [f64], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in scratch.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Solves the variational interpolation program at offset `s` after `χ_prev`.
///
/// For `s < h` the objective is convex with quadratic part
/// `((h/s − 1)/√h) Σ_i ⟨u_i, p u_i⟩_μ`; it is minimized by accelerated
/// projected gradient with per-vertex simplex projection, backtracking and
/// restarts whenever the objective would increase, until the Frank–Wolfe gap
/// certifies `J(u) − min J ≤ GAP_TOL·max(|J|, 1)`. At `s = h` the objective is
/// linear; the minimizer returned is the thresholded field itself, with ties
/// split to keep the volumes of `χ_prev` (evenly when `m = 0`).
pub fn variational_interpolate(
    chi_prev: &PhaseField,
    multiplier: &MultiplierVector,
    s: f64,
    op: &HeatKernelOperator,
    h: f64,
) -> Result<VariationalIterate> {
    if !(h > 0.0) || !(s > 0.0 && s <= h * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("need 0 < s ≤ h, got s = {s}, h = {h}")));
    }
    if multiplier.lambda.len() != chi_prev.n_phases() {
        return Err(Error::InvalidArgument("multiplier length must match the phase count".into()));
    }
    let ratio = (h / s).max(1.0);
    let prob = Problem {
        op,
        h,
        ratio,
        lambda: &multiplier.lambda,
        chi: chi_prev,
        p_chi: op.apply_phases(h, chi_prev)?,
        measure: op.geometry().measure(),
    };
    let (p, n) = (prob.p(), prob.n());
    let curvature = 2.0 * (ratio - 1.0) / h.sqrt();
    if curvature * h.sqrt() < 1e-12 {
        // linear objective, minimized by the scheme's own threshold step; ties
        // are resolved as the scheme resolves them so that u = χ^ℓ
        let u = if multiplier.m.iter().all(|v| *v == 0.0) {
            threshold(&prob.p_chi, &multiplier.m, TieRule::FractionalSplit)
        } else {
            let targets = chi_prev.volumes(prob.measure);
            threshold_to_targets(&prob.p_chi, &multiplier.m, prob.measure, &targets, &vec![true; p])
        };
        let u = u.values().to_vec();
        let pu = prob.diffuse(&u)?;
        let parts = prob.parts(&u, &pu);
        return Ok(prob.iterate(s, u, parts, 1));
    }

    let mut lipschitz = curvature;
    let mut u = chi_prev.values().to_vec();
    let mut pu = prob.p_chi.clone();
    let mut parts_u = prob.parts(&u, &pu);
    let mut j_u = parts_u.objective(ratio);
    let mut u_old = u.clone();
    let mut pu_old = pu.clone();
    let mut t = 1.0f64;
    let mut scratch = Vec::with_capacity(p);
    let mut column = vec![0.0; p];
    let mut gap = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        gap = prob.gap(&u, &prob.gradient(&pu));
        if gap <= GAP_TOL * j_u.abs().max(1.0) {
            return Ok(prob.iterate(s, u, parts_u, iteration));
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let (y, py) = if beta > 0.0 {
            let y: Vec<f64> = u.iter().zip(&u_old).map(|(a, b)| a + beta * (a - b)).collect();
            let py: Vec<Vec<f64>> = pu
                .iter()
                .zip(&pu_old)
                .map(|(a, b)| a.iter().zip(b).map(|(x, z)| x + beta * (x - z)).collect())
                .collect();
            (y, py)
        } else {
            (u.clone(), pu.clone())
        };
        let j_y = prob.parts(&y, &py).objective(ratio);
        let grad = prob.gradient(&py);
        let (z, pz, parts_z) = loop {
            let step = 1.0 / lipschitz;
            let mut z = vec![0.0; p * n];
            for x in 0..n {
                for i in 0..p {
                    column[i] = y[i * n + x] - step * grad[i * n + x];
                }
                project_simplex(&mut column, &mut scratch);
                for i in 0..p {
                    z[i * n + x] = column[i];
                }
            }
            let pz = prob.diffuse(&z)?;
            let parts_z = prob.parts(&z, &pz);
            let (mut lin, mut sq) = (0.0, 0.0);
            for i in 0..p {
                for x in 0..n {
                    let d = z[i * n + x] - y[i * n + x];
                    lin += prob.measure[x] * grad[i * n + x] * d;
                    sq += prob.measure[x] * d * d;
                }
            }
            let bound = j_y + lin + 0.5 * lipschitz * sq;
            if parts_z.objective(ratio) <= bound + 1e-14 * j_y.abs().max(1.0) {
                break (z, pz, parts_z);
            }
            lipschitz *= 2.0;
        };
        let j_z = parts_z.objective(ratio);
        if j_z > j_u {
            // momentum overshot: restart from u without acceleration
            t = 1.0;
            u_old.clone_from(&u);
            pu_old.clone_from(&pu);
            if beta == 0.0 {
                // a plain projected step no longer decreases J: roundoff floor
                return Ok(prob.iterate(s, u, parts_u, iteration));
            }
            continue;
        }
        u_old = std::mem::replace(&mut u, z);
        pu_old = std::mem::replace(&mut pu, pz);
        parts_u = parts_z;
        j_u = j_z;
        t = t_next;
    }
    Err(Error::VariationalNotConverged {
        iterations: MAX_ITERATIONS,
        gap,
        best: Box::new(prob.iterate(s, u, parts_u, MAX_ITERATIONS)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simplex_projection_examples() {
        let mut s = Vec::new();
        let mut v = [0.3, 0.2];
        project_simplex(&mut v, &mut s);
        assert!((v[0] - 0.55).abs() < 1e-15 && (v[1] - 0.45).abs() < 1e-15);
        let mut v = [2.0, 0.0, -1.0];
        project_simplex(&mut v, &mut s);
        assert_eq!(v, [1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex_and_is_closest(
            v in proptest::collection::vec(-2.0f64..2.0, 1..6),
            w in proptest::collection::vec(0.0f64..1.0, 6),
        ) {
            let mut s = Vec::new();
            let mut proj = v.clone();
            project_simplex(&mut proj, &mut s);
            prop_assert!((proj.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(proj.iter().all(|x| *x >= 0.0));
            // any other simplex point is at least as far
            let total: f64 = w[..v.len()].iter().sum::<f64>().max(1e-9);
            let q: Vec<f64> = w[..v.len()].iter().map(|x| x / total).collect();
            let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            prop_assert!(dist(&proj) <= dist(&q) + 1e-12);
        }
    }
}
