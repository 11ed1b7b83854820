//! Thresholding energy, kernel metric, dissipation bookkeeping and observables.
//!
//! With `p = p(h)∗` self-adjoint in `L²(μ)`:
//!
//! - `E_h(u) = (1/√h) Σ_i ⟨u_i, 1 − p u_i⟩_μ`
//! - `(1/2h) d_h²(u, v) = (1/√h) Σ_i ⟨u_i − v_i, p(u_i − v_i)⟩_μ`

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DiscreteGeometry, GeometryKind, PhaseField};
use crate::kernel::{inner, HeatKernelOperator};
use crate::mbo::MultiplierVector;

/// `(total, per_phase)` thresholding energy.
pub fn energy(u: &PhaseField, h: f64, op: &HeatKernelOperator) -> Result<(f64, Vec<f64>)> {
    let pu = op.apply_phases(h, u)?;
    let per = energy_from_diffused(u, &pu, h, op.geometry().measure());
    Ok((per.iter().sum(), per))
}

/// Per-phase energy given `pu_i = p(h)∗u_i`.
pub fn energy_from_diffused(u: &PhaseField, pu: &[Vec<f64>], h: f64, measure: &[f64]) -> Vec<f64> {
    let scale = 1.0 / h.sqrt();
    u.phases()
        .zip(pu)
        .map(|(ui, pui)| {
            scale
                * measure
                    .iter()
                    .zip(ui.iter().zip(pui))
                    .map(|(m, (a, b))| m * a * (1.0 - b))
                    .sum::<f64>()
        })
        .collect()
}

/// `E_h(u) + Σ_i Λ_i Vol(u_i)`.
pub fn constrained_energy(
    u: &PhaseField,
    h: f64,
    op: &HeatKernelOperator,
    multiplier: &MultiplierVector,
) -> Result<f64> {
    let (e, _) = energy(u, h, op)?;
    let vol = u.volumes(op.geometry().measure());
    Ok(e + multiplier.lambda.iter().zip(&vol).map(|(l, v)| l * v).sum::<f64>())
}

/// `(1/2h) d_h²(u, v)`.
pub fn metric_sq_over_2h(u: &PhaseField, v: &PhaseField, h: f64, op: &HeatKernelOperator) -> Result<f64> {
    if u.n_phases() != v.n_phases() || u.n_vertices() != v.n_vertices() {
        return Err(Error::InvalidArgument("fields have different shapes".into()));
    }
    let diffs: Vec<Vec<f64>> = u
        .phases()
        .zip(v.phases())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    let refs: Vec<&[f64]> = diffs.iter().map(Vec::as_slice).collect();
    let pd = op.apply_many(h, &refs)?;
    let measure = op.geometry().measure();
    Ok(diffs
        .iter()
        .zip(&pd)
        .map(|(d, pdi)| inner(measure, d, pdi))
        .sum::<f64>()
        / h.sqrt())
}

/// `(1/2h) d_h²(u, v)` given `pu_i` and `pv_i`.
pub fn metric_from_diffused(
    u: &PhaseField,
    v: &PhaseField,
    pu: &[Vec<f64>],
    pv: &[Vec<f64>],
    h: f64,
    measure: &[f64],
) -> f64 {
    let mut acc = 0.0;
    for i in 0..u.n_phases() {
        let (a, b, pa, pb) = (u.phase(i), v.phase(i), &pu[i], &pv[i]);
        for x in 0..measure.len() {
            acc += measure[x] * (a[x] - b[x]) * (pa[x] - pb[x]);
        }
    }
    acc / h.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSample {
    pub s: f64,
    pub slope: f64,
}

/// One line of `ledger.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerRow {
    pub ell: usize,
    pub t: f64,
    pub energy_total: f64,
    pub energy_per_phase: Vec<f64>,
    pub dist2_over_2h: f64,
    pub m: Vec<f64>,
    pub lambda: Vec<f64>,
    pub volumes: Vec<f64>,
    pub centroids: Vec<Option<Vec<f64>>>,
    pub radii: Vec<Option<f64>>,
    pub slope_samples: Vec<SlopeSample>,
    pub lambda_l2_cum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationLedger {
    pub h: f64,
    pub multiplier_tol: f64,
    /// `E_h(χ⁰)`.
    pub initial_energy: f64,
    pub initial_volumes: Vec<f64>,
    pub rows: Vec<LedgerRow>,
}

impl DissipationLedger {
    pub fn new(h: f64, multiplier_tol: f64, initial_energy: f64, initial_volumes: Vec<f64>) -> Self {
        DissipationLedger {
            h,
            multiplier_tol,
            initial_energy,
            initial_volumes,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: LedgerRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        std::iter::once(self.initial_energy)
            .chain(self.rows.iter().map(|r| r.energy_total))
            .collect()
    }

    pub fn write_ndjson(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for row in &self.rows {
            serde_json::to_writer(&mut f, row)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_rows(path: &Path) -> Result<Vec<LedgerRow>> {
        std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationViolation {
    pub ell: usize,
    pub slack: f64,
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    /// `min_ℓ (E^{ℓ−1} − E^ℓ − d²/2h)`; `+∞` for an empty ledger.
    pub worst_slack: f64,
    pub violations: Vec<DissipationViolation>,
}

impl DissipationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Roundoff allowance relative to the energy scale.
pub const DISSIPATION_ROUNDOFF: f64 = 1e-12;

/// Checks `E_h(χ^ℓ) + (1/2h) d_h²(χ^ℓ, χ^{ℓ−1}) ≤ E_h(χ^{ℓ−1})` row by row.
///
/// A violation needs the slack to fall below
/// `−(10·multiplier_tol·max_i |Λ_i^ℓ| + DISSIPATION_ROUNDOFF·E^{ℓ−1})`,
/// the first term covering volume errors left by the multiplier solve.
pub fn check_dissipation(ledger: &DissipationLedger) -> DissipationReport {
    let mut prev = ledger.initial_energy;
    let mut worst = f64::INFINITY;
    let mut violations = Vec::new();
    for row in &ledger.rows {
        let slack = prev - row.energy_total - row.dist2_over_2h;
        let max_lambda = row.lambda.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let allowed =
            10.0 * ledger.multiplier_tol * max_lambda + DISSIPATION_ROUNDOFF * prev.abs().max(1.0);
        worst = worst.min(slack);
        if slack < -allowed {
            violations.push(DissipationViolation { ell: row.ell, slack, allowed });
        }
        prev = row.energy_total;
    }
    DissipationReport { worst_slack: worst, violations }
}

/// `h Σ_ℓ |Λ^ℓ|²` over the ledger.
pub fn multiplier_statistic(ledger: &DissipationLedger) -> f64 {
    ledger
        .rows
        .iter()
        .map(|r| r.lambda.iter().map(|l| l * l).sum::<f64>())
        .sum::<f64>()
        * ledger.h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub volumes: Vec<f64>,
    pub centroids: Vec<Option<Vec<f64>>>,
    pub radii: Vec<Option<f64>>,
}

/// Volume, periodic centroid and equivalent-disk radius of every phase.
pub fn observables(u: &PhaseField, geom: &DiscreteGeometry) -> Observables {
    let volumes = u.volumes(geom.measure());
    let mut centroids = Vec::with_capacity(u.n_phases());
    let mut radii = Vec::with_capacity(u.n_phases());
    for i in 0..u.n_phases() {
        let weights: Vec<(usize, f64)> = u
            .phase(i)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(x, v)| (x, v * geom.cell_volume()[x]))
            .collect();
        centroids.push(periodic_centroid(geom, &weights));
        radii.push(equivalent_radius(geom, weights.iter().map(|w| w.1).sum()));
    }
    Observables { volumes, centroids, radii }
}

/// Circular mean per axis; positions live on the unit torus.
fn periodic_centroid(geom: &DiscreteGeometry, weights: &[(usize, f64)]) -> Option<Vec<f64>> {
    if !geom.has_distances() {
        return None;
    }
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if total <= 0.0 {
        return None;
    }
    let tau = std::f64::consts::TAU;
    Some(
        (0..geom.dim())
            .map(|axis| {
                let (mut s, mut c) = (0.0, 0.0);
                for &(x, w) in weights {
                    let a = tau * geom.position(x).unwrap()[axis];
                    s += w * a.sin();
                    c += w * a.cos();
                }
                (s.atan2(c) / tau).rem_euclid(1.0)
            })
            .collect(),
    )
}

/// `√(A/π)` for a 2-D area `A`; `None` when a disk of that area does not fit.
fn equivalent_radius(geom: &DiscreteGeometry, area: f64) -> Option<f64> {
    let planar = matches!(geom.kind(), GeometryKind::TorusGrid { .. }) && geom.dim() == 2;
    if !planar || area <= 0.0 || area > std::f64::consts::FRAC_PI_4 {
        return None;
    }
    Some((area / std::f64::consts::PI).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentObservables {
    pub phase: usize,
    pub volume: f64,
    pub centroid: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub n_vertices: usize,
}

/// Observables of each connected component of `{u_phase > 0}`, largest first.
///
/// Connectivity follows the geometry's edges (periodic nearest neighbours on grids).
pub fn component_observables(
    u: &PhaseField,
    geom: &DiscreteGeometry,
    phase: usize,
) -> Vec<ComponentObservables> {
    let n = geom.n_vertices();
    let values = u.phase(phase);
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if values[start] <= 0.0 || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = Vec::new();
        label[start] = id;
        stack.push(start);
        while let Some(x) = stack.pop() {
            members.push(x);
            for (y, _) in geom.edges().neighbors(x) {
                if values[y] > 0.0 && label[y] == usize::MAX {
                    label[y] = id;
                    stack.push(y);
                }
            }
        }
        let weights: Vec<(usize, f64)> = members
            .iter()
            .map(|&x| (x, values[x] * geom.cell_volume()[x]))
            .collect();
        let area: f64 = weights.iter().map(|w| w.1).sum();
        comps.push(ComponentObservables {
            phase,
            volume: members.iter().map(|&x| values[x] * geom.measure()[x]).sum(),
            centroid: periodic_centroid(geom, &weights),
            radius: equivalent_radius(geom, area),
            n_vertices: members.len(),
        });
    }
    comps.sort_by(|a, b| b.volume.total_cmp(&a.volume));
    comps
}
