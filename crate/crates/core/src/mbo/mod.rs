//! One MBO step is: diffuse every phase, pick offsets `m` that preserve the
//! phase volumes, threshold `argmax_j (p(h)∗χ_j − m_j)`.

mod multiplier;
mod threshold;
mod variational;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    self, energy_from_diffused, metric_from_diffused, DissipationLedger, LedgerRow, SlopeSample,
};
use crate::error::{Error, Result};
use crate::geometry::PhaseField;
use crate::kernel::HeatKernelOperator;

pub use multiplier::{
    solve_multiplier, solve_multiplier_with, MultiplierOptions, MultiplierSolution, MultiplierVector,
    MAX_CYCLES,
};
pub use threshold::{threshold, TieRule, TIE_EPS};
pub use variational::{
    metric_slope_estimate, variational_interpolate, VariationalIterate, MAX_ITERATIONS,
    GAP_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub h: f64,
    pub n_steps: usize,
    /// Volume tolerance; defaults to the smallest vertex measure.
    #[serde(default)]
    pub multiplier_tol: Option<f64>,
    #[serde(default)]
    pub tie_rule: TieRule,
    #[serde(default = "yes")]
    pub constrained: bool,
    /// Fractions `s/h ∈ (0, 1]` at which the variational interpolation is sampled.
    #[serde(default)]
    pub vi_sample_times: Vec<f64>,
    /// Keep every k-th field in the returned trajectory (initial and final always kept).
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

fn yes() -> bool {
    true
}

impl SchemeConfig {
    pub fn new(h: f64, n_steps: usize) -> Self {
        SchemeConfig {
            h,
            n_steps,
            multiplier_tol: None,
            tie_rule: TieRule::default(),
            constrained: true,
            vi_sample_times: Vec::new(),
            snapshot_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidArgument(format!("h = {} must be positive", self.h)));
        }
        if let Some(tol) = self.multiplier_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::InvalidArgument(format!("multiplier_tol = {tol} must be positive")));
            }
        }
        if let Some(s) = self.vi_sample_times.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
            return Err(Error::InvalidArgument(format!("vi sample fraction {s} outside (0, 1]")));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidArgument("snapshot_every must be positive".into()));
        }
        Ok(())
    }

    pub fn tolerance_for(&self, op: &HeatKernelOperator) -> f64 {
        self.multiplier_tol.unwrap_or_else(|| op.geometry().min_measure())
    }
}

/// State after step `ℓ`.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub ell: usize,
    pub field: PhaseField,
    /// `p(h)∗χ^ℓ`, the comparison fields of the next step.
    pub diffused: Vec<Vec<f64>>,
    /// Multiplier used to produce `χ^ℓ` (zero for `ℓ = 0`).
    pub multiplier: MultiplierVector,
    pub target_volumes: Vec<f64>,
    /// Phases whose volume is enforced. A phase seeded below one vertex
    /// mass is extinct and left unconstrained.
    pub active: Vec<bool>,
    pub energy_per_phase: Vec<f64>,
    /// `(1/2h) d_h²(χ^ℓ, χ^{ℓ−1})`, zero for `ℓ = 0`.
    pub dist2_over_2h: f64,
    pub cycles: usize,
}

impl SchemeState {
    pub fn initial(field: PhaseField, config: &SchemeConfig, op: &HeatKernelOperator) -> Result<Self> {
        config.validate()?;
        if field.n_vertices() != op.geometry().n_vertices() {
            return Err(Error::InvalidArgument(format!(
                "field has {} vertices, geometry {}",
                field.n_vertices(),
                op.geometry().n_vertices()
            )));
        }
        let measure = op.geometry().measure();
        let min_mass = op.geometry().min_measure();
        let target_volumes = field.volumes(measure);
        let active: Vec<bool> = target_volumes
            .iter()
            .map(|&v| v >= min_mass * (1.0 - 1e-12))
            .collect();
        for (i, a) in active.iter().enumerate() {
            if !a && config.constrained {
                log::warn!(
                    "phase {i} starts with volume {:e} below one vertex mass; it is not constrained",
                    target_volumes[i]
                );
            }
        }
        let diffused = op.apply_phases(config.h, &field)?;
        let energy_per_phase = energy_from_diffused(&field, &diffused, config.h, measure);
        Ok(SchemeState {
            ell: 0,
            multiplier: MultiplierVector::zeros(field.n_phases(), config.h),
            field,
            diffused,
            target_volumes,
            active,
            energy_per_phase,
            dist2_over_2h: 0.0,
            cycles: 0,
        })
    }

    pub fn energy(&self) -> f64 {
        self.energy_per_phase.iter().sum()
    }
}

/// Advances `state` by one step.
pub fn step(state: &SchemeState, config: &SchemeConfig, op: &HeatKernelOperator) -> Result<SchemeState> {
    let h = config.h;
    let p = state.field.n_phases();
    let measure = op.geometry().measure();
    let (field, multiplier, cycles) = if config.constrained {
        let opts = MultiplierOptions {
            active: Some(state.active.clone()),
            initial: Some(state.multiplier.m.clone()),
        };
        let sol = solve_multiplier_with(
            &state.diffused,
            measure,
            &state.target_volumes,
            config.tolerance_for(op),
            h,
            &opts,
        )?;
        let field = match config.tie_rule {
            TieRule::FractionalSplit => sol.field,
            TieRule::LowestIndex => threshold(&state.diffused, &sol.multiplier.m, TieRule::LowestIndex),
        };
        (field, sol.multiplier, sol.cycles)
    } else {
        let zero = MultiplierVector::zeros(p, h);
        (threshold(&state.diffused, &zero.m, config.tie_rule), zero, 0)
    };
    let diffused = op.apply_phases(h, &field)?;
    let energy_per_phase = energy_from_diffused(&field, &diffused, h, measure);
    let dist2_over_2h = metric_from_diffused(&field, &state.field, &diffused, &state.diffused, h, measure);
    Ok(SchemeState {
        ell: state.ell + 1,
        field,
        diffused,
        multiplier,
        target_volumes: state.target_volumes.clone(),
        active: state.active.clone(),
        energy_per_phase,
        dist2_over_2h,
        cycles,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// `(ℓ, χ^ℓ)` pairs: the initial field, every `snapshot_every`-th step and the final one.
    pub trajectory: Vec<(usize, PhaseField)>,
    pub ledger: DissipationLedger,
    pub final_state: SchemeState,
}

pub fn run(op: &HeatKernelOperator, initial: PhaseField, config: &SchemeConfig) -> Result<RunOutput> {
    run_with(op, initial, config, |_, _| Ok(()))
}

/// Like [`run`], calling `on_step` after every step so callers can stream the
/// ledger; an error from the scheme or the callback aborts the run.
pub fn run_with<F>(
    op: &HeatKernelOperator,
    initial: PhaseField,
    config: &SchemeConfig,
    mut on_step: F,
) -> Result<RunOutput>
where
    F: FnMut(&SchemeState, &LedgerRow) -> Result<()>,
{
    let mut state = SchemeState::initial(initial, config, op)?;
    let tol = config.tolerance_for(op);
    let mut ledger = DissipationLedger::new(config.h, tol, state.energy(), state.target_volumes.clone());
    let mut trajectory = vec![(0, state.field.clone())];
    let mut lambda_cum = 0.0;
    for _ in 0..config.n_steps {
        let next = step(&state, config, op)?;
        lambda_cum += config.h * next.multiplier.lambda_sq();
        let slope_samples = config
            .vi_sample_times
            .iter()
            .map(|frac| {
                let it = variational_interpolate(&state.field, &next.multiplier, frac * config.h, op, config.h)?;
                Ok(SlopeSample { s: it.s, slope: metric_slope_estimate(&it) })
            })
            .collect::<Result<Vec<_>>>()?;
        let row = ledger_row(&next, config.h, op, slope_samples, lambda_cum);
        on_step(&next, &row)?;
        ledger.push(row);
        if config.snapshot_every.is_some_and(|k| next.ell % k == 0) {
            trajectory.push((next.ell, next.field.clone()));
        }
        state = next;
    }
    if trajectory.last().map(|t| t.0) != Some(state.ell) {
        trajectory.push((state.ell, state.field.clone()));
    }
    Ok(RunOutput { trajectory, ledger, final_state: state })
}

fn ledger_row(
    state: &SchemeState,
    h: f64,
    op: &HeatKernelOperator,
    slope_samples: Vec<SlopeSample>,
    lambda_l2_cum: f64,
) -> LedgerRow {
    let obs = diagnostics::observables(&state.field, op.geometry());
    LedgerRow {
        ell: state.ell,
        t: state.ell as f64 * h,
        energy_total: state.energy(),
        energy_per_phase: state.energy_per_phase.clone(),
        dist2_over_2h: state.dist2_over_2h,
        m: state.multiplier.m.clone(),
        lambda: state.multiplier.lambda.clone(),
        volumes: obs.volumes,
        centroids: obs.centroids,
        radii: obs.radii,
        slope_samples,
        lambda_l2_cum,
    }
}
