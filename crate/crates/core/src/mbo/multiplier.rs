use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PhaseField;

use super::threshold::threshold_to_targets;

/// Gauss–Seidel sweeps before giving up.
pub const MAX_CYCLES: usize = 200;

/// Threshold offsets `m` and the associated multipliers `Λ = (2/√h)·m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierVector {
    pub m: Vec<f64>,
    pub h: f64,
    pub lambda: Vec<f64>,
}

impl MultiplierVector {
    pub fn new(m: Vec<f64>, h: f64) -> Self {
        let scale = 2.0 / h.sqrt();
        let lambda = m.iter().map(|v| scale * v).collect();
        MultiplierVector { m, h, lambda }
    }

    pub fn zeros(n_phases: usize, h: f64) -> Self {
        Self::new(vec![0.0; n_phases], h)
    }

    pub fn max_abs_lambda(&self) -> f64 {
        self.lambda.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `Σ_i Λ_i²`.
    pub fn lambda_sq(&self) -> f64 {
        self.lambda.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone)]
pub struct MultiplierSolution {
    pub multiplier: MultiplierVector,
    pub field: PhaseField,
    pub volumes: Vec<f64>,
    pub cycles: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MultiplierOptions {
    /// Phases whose volume is enforced; others keep their offset. Defaults to all.
    pub active: Option<Vec<bool>>,
    /// Warm start for `m`.
    pub initial: Option<Vec<f64>>,
}

/// Finds `m` such that thresholding `φ_i − m_i` gives the target volumes.
///
/// Each cycle visits the phases in index order and sets `m_i` to the
/// μ-weighted quantile of `φ_i − max_{j≠i}(φ_j − m_j)` at mass `targets[i]`.
/// Ties left at the end are split fractionally so the volumes are met.
pub fn solve_multiplier(
    phi: &[Vec<f64>],
    measure: &[f64],
    targets: &[f64],
    tol: f64,
    h: f64,
) -> Result<MultiplierSolution> {
    solve_multiplier_with(phi, measure, targets, tol, h, &MultiplierOptions::default())
}

pub fn solve_multiplier_with(
    phi: &[Vec<f64>],
    measure: &[f64],
    targets: &[f64],
    tol: f64,
    h: f64,
    opts: &MultiplierOptions,
) -> Result<MultiplierSolution> {
    let p = phi.len();
    let n = measure.len();
    if p == 0 || targets.len() != p || phi.iter().any(|f| f.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "{p} comparison fields, {} targets, {n} vertices",
            targets.len()
        )));
    }
    if !(tol > 0.0) || !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {tol} and h = {h} must be positive")));
    }
    let active = opts.active.clone().unwrap_or_else(|| vec![true; p]);
    let min_mass = measure.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = measure.iter().sum();
    for (i, &t) in targets.iter().enumerate() {
        if active[i] && !(t >= min_mass * (1.0 - 1e-12)) {
            return Err(Error::TargetTooSmall { phase: i, target: t, min_mass });
        }
        if t > total * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "target {t} of phase {i} exceeds the total mass {total}"
            )));
        }
    }
    let mut m = opts.initial.clone().unwrap_or_else(|| vec![0.0; p]);
    if m.len() != p {
        return Err(Error::InvalidArgument("warm start has the wrong length".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut g = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for cycle in 1..=MAX_CYCLES {
        for i in (0..p).filter(|&i| active[i]) {
            for x in 0..n {
                let mut rival = f64::NEG_INFINITY;
                for (j, f) in phi.iter().enumerate() {
                    if j != i {
                        rival = rival.max(f[x] - m[j]);
                    }
                }
                g[x] = phi[i][x] - rival;
            }
            if p == 1 {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            m[i] = weighted_quantile(&g, measure, targets[i], &mut order);
        }
        recentre(&mut m);
        let field = threshold_to_targets(phi, &m, measure, targets, &active);
        let volumes = field.volumes(measure);
        residual = (0..p)
            .filter(|&i| active[i])
            .map(|i| (volumes[i] - targets[i]).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok(MultiplierSolution {
                multiplier: MultiplierVector::new(m, h),
                field,
                volumes,
                cycles: cycle,
            });
        }
    }
    Err(Error::MultiplierNotConverged { cycles: MAX_CYCLES, residual })
}

/// Offset `q` such that `{g > q}` carries mass `target`, with the
/// convention shared by the solver and its tests:
/// if the sorted cumulative mass reaches `target` exactly after vertex `k`,
/// `q` is the midpoint between `g_k` and the next value; otherwise the target
/// falls inside the atom of vertex `k` and `q = g_k`.
pub(crate) fn weighted_quantile(g: &[f64], measure: &[f64], target: f64, order: &mut [usize]) -> f64 {
    let total: f64 = measure.iter().sum();
    let eps = 1e-13 * total;
    order
        .iter_mut()
        .enumerate()
        .for_each(|(k, o)| *o = k);
    order.sort_unstable_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    let mut cum = 0.0;
    for (rank, &x) in order.iter().enumerate() {
        let next = cum + measure[x];
        if next >= target - eps {
            if (next - target).abs() <= eps {
                return match order.get(rank + 1) {
                    Some(&y) => 0.5 * (g[x] + g[y]),
                    None => g[x] - 1.0,
                };
            }
            return g[x];
        }
        cum = next;
    }
    g[order[order.len() - 1]] - 1.0
}

fn recentre(m: &mut [f64]) {
    let mean = m.iter().sum::<f64>() / m.len() as f64;
    m.iter_mut().for_each(|v| *v -= mean);
}
