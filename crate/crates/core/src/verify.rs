//! Numerical checks of heat-kernel properties, comparison inequalities and
//! analytic constants, independent of any MBO evolution.
//!
//! Every suite produces [`CheckReport`]s; `write_reports` emits them as NDJSON.

use std::f64::consts::PI;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diagnostics::{energy, metric_sq_over_2h};
use crate::error::{Error, Result};
use crate::geometry::{seed_partition, DensitySpec, DiscreteGeometry, GeometryKind, PhaseField, ShapeSpec};
use crate::kernel::{Backend, HeatKernelOperator};
use crate::par::{self, ExecMode};

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub params: serde_json::Value,
    pub worst_slack_or_ratio: f64,
    pub pass: bool,
}

impl CheckReport {
    fn new(name: &str, params: serde_json::Value, worst: f64, pass: bool) -> Self {
        CheckReport {
            name: name.to_string(),
            params,
            worst_slack_or_ratio: worst,
            pass,
        }
    }
}

pub fn write_reports(path: &Path, reports: &[CheckReport]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in reports {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// normalization, symmetry, semigroup, cross-backend

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub h: f64,
    /// `max_x |Σ_y p(h,x,y) μ(y) − 1|`.
    pub max_row_deviation: f64,
    /// `max |p(h,x,y) − p(h,y,x)|` relative to the largest entry.
    pub max_asymmetry: f64,
    pub rows_checked: usize,
}

/// Rows above this vertex count are sampled rather than checked exhaustively.
const FULL_ROW_LIMIT: usize = 512;
const SAMPLED_ROWS: usize = 64;

pub fn check_normalization_symmetry(op: &HeatKernelOperator, h_list: &[f64]) -> Result<Vec<NormalizationReport>> {
    if !op.has_entries() {
        return Err(Error::EntriesUnavailable(op.backend().name()));
    }
    let geom = op.geometry();
    let n = geom.n_vertices();
    let mu = geom.measure();
    let rows: Vec<usize> = if n <= FULL_ROW_LIMIT {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        (0..SAMPLED_ROWS).map(|_| rng.gen_range(0..n)).collect()
    };
    h_list
        .iter()
        .map(|&h| {
            let per_row = par::map_range(op.exec_mode(), rows.len(), |k| -> Result<(f64, f64, f64)> {
                let x = rows[k];
                let row = op.kernel_row(h, x)?;
                let sum: f64 = row.iter().zip(mu).map(|(p, m)| p * m).sum();
                let max_entry = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let partners: Vec<usize> = if n <= FULL_ROW_LIMIT {
                    (0..n).collect()
                } else {
                    rows.clone()
                };
                let mut asym = 0.0f64;
                for y in partners {
                    asym = asym.max((row[y] - op.kernel_entry(h, y, x)?).abs());
                }
                Ok(((sum - 1.0).abs(), asym, max_entry))
            });
            let mut dev = 0.0f64;
            let mut asym = 0.0f64;
            let mut scale = 0.0f64;
            for r in per_row {
                let (d, a, m) = r?;
                dev = dev.max(d);
                asym = asym.max(a);
                scale = scale.max(m);
            }
            Ok(NormalizationReport {
                h,
                max_row_deviation: dev,
                max_asymmetry: asym / scale.max(f64::MIN_POSITIVE),
                rows_checked: rows.len(),
            })
        })
        .collect()
}

/// `max ‖p(t)∗(p(s)∗f) − p(t+s)∗f‖_∞ / ‖p(t+s)∗f‖_∞` over a random field and
/// three normalized point masses (whose images are kernel columns).
pub fn check_semigroup(op: &HeatKernelOperator, t: f64, s: f64) -> Result<f64> {
    let geom = op.geometry();
    let n = geom.n_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e);
    let mut fields = vec![(0..n).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()];
    for x in [0, n / 3, n - 1] {
        let mut f = vec![0.0; n];
        f[x] = 1.0 / geom.measure()[x];
        fields.push(f);
    }
    let mut worst = 0.0f64;
    for f in &fields {
        let two = op.apply(t, &op.apply(s, f)?)?;
        let one = op.apply(t + s, f)?;
        let scale = one.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = two.iter().zip(&one).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        worst = worst.max(err / scale);
    }
    Ok(worst)
}

/// `max_x |p_a(h)∗f − p_b(h)∗f|` for a random field `f ∈ [0,1]`.
pub fn check_cross_backend(a: &HeatKernelOperator, b: &HeatKernelOperator, h: f64, seed: u64) -> Result<f64> {
    let n = a.geometry().n_vertices();
    if b.geometry().n_vertices() != n {
        return Err(Error::InvalidArgument("operators live on different geometries".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let fa = a.apply(h, &f)?;
    let fb = b.apply(h, &f)?;
    Ok(fa.iter().zip(&fb).fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs())))
}

// ---------------------------------------------------------------------------
// Gaussian bounds

/// Decay rate of the lower value bound `e^{−dist²/(C₂h)}`.
pub const LOWER_RATE: f64 = 3.0;
/// Decay rate of the upper value bound `e^{−dist²/(C₄h)}`.
pub const UPPER_RATE: f64 = 5.0;
/// Decay rate of the gradient and mixed-derivative bounds.
pub const DERIVATIVE_RATE: f64 = 5.0;
/// Largest admissible spread `max_h C / min_h C` of a fitted constant.
pub const UNIFORMITY_WINDOW: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSample {
    pub h: f64,
    pub dist: f64,
    /// `p(h,x,y)·μ(B_√h(x))`.
    pub scaled_value: f64,
    /// `|∂_x p|·√h·μ(B_√h(x))`, `None` below resolution.
    pub scaled_gradient: Option<f64>,
    /// `|∂_x ∂_y p|·h·μ(B_√h(x))`, `None` below resolution.
    pub scaled_mixed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedConstants {
    pub h: f64,
    /// Largest `C₁` with `C₁ e^{−d²/(C₂h)} ≤ p·μ(B)` on all samples.
    pub c1: f64,
    /// Smallest `C₃` with `p·μ(B) ≤ C₃ e^{−d²/(C₄h)}`.
    pub c3: f64,
    pub gradient: f64,
    pub mixed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundFitReport {
    pub name: String,
    pub samples: Vec<BoundSample>,
    pub fitted: Vec<FittedConstants>,
    pub lower_rate: f64,
    pub upper_rate: f64,
    pub derivative_rate: f64,
    /// Samples dropped from the derivative fits (distance below two cells).
    pub excluded: usize,
    /// Largest `max_h C / min_h C` over the four fitted constants.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Kernel value, centred first difference in `x` and mixed second difference
/// at `x = vertex 0`, `y` = `offset` cells along the first axis.
pub fn kernel_derivatives(op: &HeatKernelOperator, h: f64, offset: i64) -> Result<(f64, f64, f64)> {
    let geom = op.geometry();
    let dx = geom
        .spacing()
        .ok_or_else(|| Error::InvalidArgument("finite differences need a grid".into()))?;
    let dim = geom.dim();
    let at = |i: i64| -> usize {
        let mut c = vec![0i64; dim];
        c[0] = i;
        geom.grid_index(&c).unwrap()
    };
    let p = |a: i64, b: i64| op.kernel_entry(h, at(a), at(b));
    let value = p(0, offset)?;
    let grad = (p(1, offset)? - p(-1, offset)?) / (2.0 * dx);
    let mixed = (p(1, offset + 1)? - p(1, offset - 1)? - p(-1, offset + 1)? + p(-1, offset - 1)?)
        / (4.0 * dx * dx);
    Ok((value, grad, mixed))
}

/// Fits the Gaussian envelope constants on a circle or uniform torus.
///
/// `dist_grid` is given in units of `√h`; each distance is rounded to the
/// nearest lattice offset along the first axis and kept if it does not exceed
/// `6√h` or half the period.
pub fn check_gaussian_bounds(op: &HeatKernelOperator, h_grid: &[f64], dist_grid: &[f64]) -> Result<BoundFitReport> {
    let geom = op.geometry();
    let supported = match geom.kind() {
        GeometryKind::CircleGrid { .. } => true,
        GeometryKind::TorusGrid { .. } => geom.is_uniform(),
        GeometryKind::WeightedGraph => false,
    };
    if !supported || !op.has_entries() {
        return Err(Error::InvalidArgument(
            "Gaussian bounds need a circle or uniform torus grid and kernel entries".into(),
        ));
    }
    let (side, _) = geom.grid_shape().unwrap();
    let dx = geom.spacing().unwrap();
    let mut samples = Vec::new();
    let mut fitted = Vec::new();
    let mut excluded = 0;
    for &h in h_grid {
        let sh = h.sqrt();
        let ball = geom.ball_measure(0, sh).unwrap();
        let mut offsets: Vec<i64> = dist_grid
            .iter()
            .map(|d| (d * sh / dx).round() as i64)
            .filter(|&k| k >= 0 && (k as f64) * dx <= 6.0 * sh + 1e-12 && 2 * k as usize <= side)
            .collect();
        offsets.dedup();
        let mut fit = FittedConstants {
            h,
            c1: f64::INFINITY,
            c3: 0.0,
            gradient: 0.0,
            mixed: 0.0,
        };
        for k in offsets {
            let dist = k as f64 * dx;
            let (value, grad, mixed) = kernel_derivatives(op, h, k)?;
            let q = dist * dist / h;
            let scaled_value = value * ball;
            fit.c1 = fit.c1.min(scaled_value * (q / LOWER_RATE).exp());
            fit.c3 = fit.c3.max(scaled_value * (q / UPPER_RATE).exp());
            let resolved = dist >= 2.0 * dx - 1e-12;
            let (sg, sm) = if resolved {
                let sg = grad.abs() * sh * ball;
                let sm = mixed.abs() * h * ball;
                fit.gradient = fit.gradient.max(sg * (q / DERIVATIVE_RATE).exp());
                fit.mixed = fit.mixed.max(sm * (q / DERIVATIVE_RATE).exp());
                (Some(sg), Some(sm))
            } else {
                excluded += 1;
                (None, None)
            };
            samples.push(BoundSample {
                h,
                dist,
                scaled_value,
                scaled_gradient: sg,
                scaled_mixed: sm,
            });
        }
        fitted.push(fit);
    }
    let spread = |get: fn(&FittedConstants) -> f64| {
        let vals: Vec<f64> = fitted.iter().map(get).collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };
    let worst_ratio = [
        spread(|f| f.c1),
        spread(|f| f.c3),
        spread(|f| f.gradient),
        spread(|f| f.mixed),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(BoundFitReport {
        name: "gaussian_bounds".into(),
        samples,
        fitted,
        lower_rate: LOWER_RATE,
        upper_rate: UPPER_RATE,
        derivative_rate: DERIVATIVE_RATE,
        excluded,
        worst_ratio,
        pass: worst_ratio <= UNIFORMITY_WINDOW,
    })
}

// ---------------------------------------------------------------------------
// analytic constants

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianSample {
    pub r: f64,
    /// `|r cot r − 1|`, the tangential eigenvalue deviation of `∇²(dist²/2)`.
    pub deviation: f64,
    pub bound: f64,
}

/// On the unit sphere `∇²_y dist²(x,y)/2` has eigenvalues 1 (radial) and
/// `r cot r` (tangential); checks `|r cot r − 1| ≤ r²/2`.
pub fn check_hessian_distance_sphere(r_grid: &[f64]) -> Result<(Vec<HessianSample>, bool)> {
    if let Some(r) = r_grid.iter().find(|r| !(**r > 0.0 && **r <= PI / 2.0)) {
        return Err(Error::InvalidArgument(format!("radius {r} outside (0, π/2]")));
    }
    let samples: Vec<HessianSample> = r_grid
        .iter()
        .map(|&r| HessianSample {
            r,
            deviation: (r / r.tan() - 1.0).abs(),
            bound: 0.5 * r * r,
        })
        .collect();
    let pass = samples.iter().all(|s| s.deviation <= s.bound);
    Ok((samples, pass))
}

/// Upper integration limit standing in for `∞` (the integrand is `< e^{−140}` beyond).
const C0_CUTOFF: f64 = 24.0;

fn gauss_legendre(n: usize) -> Result<GaussLegendre> {
    let n = NonZeroUsize::new(n).ok_or_else(|| Error::InvalidArgument("empty quadrature".into()))?;
    Ok(GaussLegendre::new(n))
}

/// `∫₀^∞ (4π)^{−1/2} e^{−z²/4} z dz` by `n`-point Gauss–Legendre; equals `1/√π`.
pub fn check_c0(quadrature_n: usize) -> Result<f64> {
    if quadrature_n < 64 {
        return Err(Error::InvalidArgument(format!(
            "quadrature_n = {quadrature_n} below the minimum 64"
        )));
    }
    let rule = gauss_legendre(quadrature_n)?;
    let g = (4.0 * PI).powf(-0.5);
    Ok(rule.integrate(0.0, C0_CUTOFF, |z| g * (-z * z / 4.0).exp() * z))
}

/// `∫_{ℝ²} G₁(z) (⟨n, z⟩)₊ dz` with `n = (cos θ, sin θ)` in polar coordinates;
/// the angular rule is split at the two zeros of `⟨n, z⟩` so both pieces are smooth.
pub fn c0_rotated(quadrature_n: usize, theta: f64) -> Result<f64> {
    let rule = gauss_legendre(quadrature_n)?;
    let g = 1.0 / (4.0 * PI);
    let radial = rule.integrate(0.0, C0_CUTOFF, |r| g * (-r * r / 4.0).exp() * r * r);
    let positive = |phi: f64| (phi - theta).cos().max(0.0);
    let lo = theta - PI / 2.0;
    let angular = rule.integrate(lo, lo + PI, positive) + rule.integrate(lo + PI, lo + 2.0 * PI, positive);
    Ok(radial * angular)
}

/// `μ(B_r(x)) / r^d` over all vertices and radii: `(min, max)`.
pub fn check_doubling(geom: &DiscreteGeometry, r_grid: &[f64], mode: ExecMode) -> Result<(f64, f64)> {
    if !geom.has_distances() {
        return Err(Error::InvalidArgument("volume scaling needs distances".into()));
    }
    let d = geom.dim() as i32;
    let n = geom.n_vertices();
    let per = par::map_range(mode, n, |x| {
        r_grid.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| {
            let v = geom.ball_measure(x, r).unwrap() / r.powi(d);
            (lo.min(v), hi.max(v))
        })
    });
    Ok(per
        .into_iter()
        .fold((f64::INFINITY, 0.0), |(a, b), (lo, hi)| (a.min(lo), b.max(hi))))
}

// ---------------------------------------------------------------------------
// useful estimates

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub h: f64,
    pub trials: usize,
    /// Worst `rhs − lhs` per inequality.
    pub kernel_diff: f64,
    pub mon_const: f64,
    pub l2_u: f64,
    pub l1_crisp: f64,
}

impl EstimateReport {
    pub fn worst(&self) -> f64 {
        self.kernel_diff.min(self.mon_const).min(self.l2_u).min(self.l1_crisp)
    }
}

/// Slack threshold for the estimate inequalities.
pub const ESTIMATE_SLACK: f64 = -1e-10;

fn random_crisp(geom: &DiscreteGeometry, rng: &mut ChaCha8Rng) -> Result<PhaseField> {
    let p = rng.gen_range(2..=3);
    let shapes = if rng.gen_bool(0.5) {
        let lo: f64 = rng.gen();
        let width = rng.gen_range(0.1..0.6);
        vec![ShapeSpec::Stripe {
            axis: rng.gen_range(0..geom.dim()),
            lo,
            hi: (lo + width).rem_euclid(1.0),
            phase: 1,
        }]
    } else {
        let seeds = (0..rng.gen_range(p..=6))
            .map(|_| (0..geom.dim()).map(|_| rng.gen()).collect())
            .collect();
        vec![ShapeSpec::Voronoi { seed_points: seeds }]
    };
    seed_partition(geom, &shapes, p)
}

fn random_relaxed(op: &HeatKernelOperator, p: usize, rng: &mut ChaCha8Rng) -> Result<PhaseField> {
    let n = op.geometry().n_vertices();
    // smooth positive fields, normalized pointwise
    let raw: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            let noise: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(4)).collect();
            op.apply(rng.gen_range(1e-4..1e-2), &noise)
        })
        .collect::<Result<_>>()?;
    let mut phases = raw;
    for x in 0..n {
        let total: f64 = phases.iter().map(|f| f[x].max(0.0)).sum();
        for f in phases.iter_mut() {
            f[x] = if total > 0.0 { f[x].max(0.0) / total } else { 1.0 / p as f64 };
        }
    }
    // absorb rounding so the partition is exact
    for x in 0..n {
        let rest: f64 = phases[..p - 1].iter().map(|f| f[x]).sum();
        phases[p - 1][x] = (1.0 - rest).max(0.0);
    }
    PhaseField::from_phases(phases)
}

fn kernel_diff_slack(u: &PhaseField, h: f64, op: &HeatKernelOperator) -> Result<f64> {
    let pu = op.apply_phases(h, u)?;
    let mu = op.geometry().measure();
    let lhs: f64 = u
        .phases()
        .zip(&pu)
        .map(|(a, b)| a.iter().zip(b).zip(mu).map(|((x, y), m)| m * (x - y).abs()).sum::<f64>())
        .sum();
    let (e, _) = energy(u, h, op)?;
    Ok(2.0 * h.sqrt() * e - lhs)
}

fn pair_slack(u: &PhaseField, v: &PhaseField, h: f64, op: &HeatKernelOperator, power: i32) -> Result<f64> {
    let mu = op.geometry().measure();
    let lhs: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .enumerate()
        .map(|(k, (a, b))| mu[k % mu.len()] * (a - b).abs().powi(power))
        .sum();
    let sh = h.sqrt();
    let rhs = sh * metric_sq_over_2h(u, v, h, op)? + 2.0 * sh * (energy(u, h, op)?.0 + energy(v, h, op)?.0);
    Ok(rhs - lhs)
}

/// Evaluates both sides of the four comparison inequalities on random
/// crisp and relaxed fields. `op` should be an exact (non-surrogate) kernel.
pub fn check_useful_estimates(op: &HeatKernelOperator, h: f64, trials: usize, seed: u64) -> Result<EstimateReport> {
    let geom = op.geometry();
    let slacks = par::map_range(op.exec_mode(), trials, |t| -> Result<[f64; 4]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let chi = random_crisp(geom, &mut rng)?;
        let p = chi.n_phases();
        let chi2 = loop {
            let c = random_crisp(geom, &mut rng)?;
            if c.n_phases() == p {
                break c;
            }
        };
        let u = random_relaxed(op, p, &mut rng)?;
        let v = random_relaxed(op, p, &mut rng)?;
        let kd = kernel_diff_slack(&u, h, op)?.min(kernel_diff_slack(&chi, h, op)?);
        let e = energy(&chi, h, op)?.0;
        let mut mc = f64::INFINITY;
        for c in [0.25f64, 4.0] {
            let lhs = energy(&chi, c * h, op)?.0;
            mc = mc.min((1.0 / c.sqrt()).max(c.sqrt()) * e - lhs);
        }
        let l2 = pair_slack(&u, &v, h, op, 2)?;
        let l1 = pair_slack(&chi, &chi2, h, op, 1)?;
        Ok([kd, mc, l2, l1])
    });
    let mut worst = [f64::INFINITY; 4];
    for s in slacks {
        let s = s?;
        for k in 0..4 {
            worst[k] = worst[k].min(s[k]);
        }
    }
    Ok(EstimateReport {
        h,
        trials,
        kernel_diff: worst[0],
        mon_const: worst[1],
        l2_u: worst[2],
        l1_crisp: worst[3],
    })
}

// ---------------------------------------------------------------------------
// surrogate energy

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateEnergyReport {
    pub exact_backend: Backend,
    pub h: Vec<f64>,
    pub exact: Vec<f64>,
    pub surrogate: Vec<f64>,
    /// `|E_exact − E_surrogate| / E_exact`, in the order of `h`.
    pub rel_diff: Vec<f64>,
    /// Relative difference decreases along decreasing `h`.
    pub monotone: bool,
}

/// Vertex count up to which the dense eigendecomposition is the preferred
/// exact reference; larger dense solves take minutes on one core.
const SMALL_SPECTRAL: usize = 1024;

/// Exact backend used for comparisons: FFT on uniform grids, dense spectral
/// on small weighted grids, the polynomial action otherwise.
pub fn exact_backend_for(geom: &DiscreteGeometry) -> Backend {
    if geom.is_uniform() && geom.grid_shape().is_some() {
        Backend::Fourier
    } else if geom.n_vertices() <= SMALL_SPECTRAL {
        Backend::Spectral
    } else {
        Backend::ExpmAction
    }
}

/// Thresholding energy of the seeded shape under the exact kernel and under
/// the Gaussian surrogate, for each `h` (given in the order to be compared,
/// typically decreasing).
pub fn check_surrogate_energy(
    geom: Arc<DiscreteGeometry>,
    h_list: &[f64],
    shapes: &[ShapeSpec],
    n_phases: usize,
) -> Result<SurrogateEnergyReport> {
    let field = seed_partition(&geom, shapes, n_phases)?;
    let backend = exact_backend_for(&geom);
    let exact_op = HeatKernelOperator::build(geom.clone(), backend, crate::kernel::DEFAULT_TOLERANCE)?;
    let sur_op = HeatKernelOperator::build(geom, Backend::GaussianSurrogate, crate::kernel::DEFAULT_TOLERANCE)?;
    let mut exact = Vec::new();
    let mut surrogate = Vec::new();
    for &h in h_list {
        exact.push(energy(&field, h, &exact_op)?.0);
        surrogate.push(energy(&field, h, &sur_op)?.0);
    }
    let rel_diff: Vec<f64> = exact
        .iter()
        .zip(&surrogate)
        .map(|(e, s)| (e - s).abs() / e.abs())
        .collect();
    let monotone = rel_diff.windows(2).all(|w| w[1] < w[0]);
    Ok(SurrogateEnergyReport {
        exact_backend: backend,
        h: h_list.to_vec(),
        exact,
        surrogate,
        rel_diff,
        monotone,
    })
}

/// Relative surrogate energy difference at fixed `h` on successively finer
/// periodic grids, one value per entry of `sides`.
pub fn check_surrogate_refinement(
    density: &DensitySpec,
    h: f64,
    sides: &[usize],
    shapes: &[ShapeSpec],
    n_phases: usize,
) -> Result<Vec<f64>> {
    sides
        .iter()
        .map(|&side| {
            let geom = Arc::new(DiscreteGeometry::torus_grid(side, 2, density)?);
            let rep = check_surrogate_energy(geom, &[h], shapes, n_phases)?;
            Ok(rep.rel_diff[0])
        })
        .collect()
}

// ---------------------------------------------------------------------------
// suites

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernel,
    Estimates,
    Constants,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(Suite::Kernel),
            "estimates" => Ok(Suite::Estimates),
            "constants" => Ok(Suite::Constants),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite {other:?} (kernel, estimates, constants, all)"
            ))),
        }
    }
}

pub const NORMALIZATION_TOL: f64 = 1e-9;
pub const SYMMETRY_TOL: f64 = 1e-11;
pub const SEMIGROUP_TOL: f64 = 1e-8;
pub const CROSS_BACKEND_TOL: f64 = 1e-8;
pub const C0_TOL: f64 = 1e-10;
pub const C0_DOUBLING_TOL: f64 = 1e-12;
pub const C0_ROTATION_TOL: f64 = 1e-8;
pub const SURROGATE_TOL: f64 = 0.05;

fn torus(side: usize, density: &DensitySpec) -> Result<Arc<DiscreteGeometry>> {
    Ok(Arc::new(DiscreteGeometry::torus_grid(side, 2, density)?))
}

fn circle(n: usize) -> Result<Arc<DiscreteGeometry>> {
    Ok(Arc::new(DiscreteGeometry::circle_grid(n, &DensitySpec::Uniform)?))
}

fn bump() -> DensitySpec {
    DensitySpec::GaussianBump {
        center: vec![0.5, 0.5],
        amplitude: 2.0,
        width: 0.2,
    }
}

fn build(geom: Arc<DiscreteGeometry>, backend: Backend, mode: ExecMode) -> Result<HeatKernelOperator> {
    Ok(HeatKernelOperator::build(geom, backend, crate::kernel::DEFAULT_TOLERANCE)?.with_exec_mode(mode))
}

fn normalization_reports(op: &HeatKernelOperator, label: &str, h_list: &[f64]) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for r in check_normalization_symmetry(op, h_list)? {
        let params = json!({"geometry": label, "backend": op.backend().name(), "h": r.h, "rows": r.rows_checked});
        out.push(CheckReport::new(
            "normalization",
            params.clone(),
            r.max_row_deviation,
            r.max_row_deviation <= NORMALIZATION_TOL,
        ));
        out.push(CheckReport::new(
            "symmetry",
            params,
            r.max_asymmetry,
            r.max_asymmetry <= SYMMETRY_TOL,
        ));
    }
    Ok(out)
}

pub fn kernel_suite(mode: ExecMode) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let circle_spectral = build(circle(256)?, Backend::Spectral, mode)?;
    let torus_fourier = build(torus(64, &DensitySpec::Uniform)?, Backend::Fourier, mode)?;
    out.extend(normalization_reports(&circle_spectral, "circle_256", &[1e-3])?);
    out.extend(normalization_reports(&torus_fourier, "torus_64", &[1e-2])?);

    for (op, label, t) in [
        (&circle_spectral, "circle_256", 1e-3),
        (&torus_fourier, "torus_64", (4.0f64 / 64.0).powi(2)),
    ] {
        for (a, b) in [(t, t), (t, 2.0 * t)] {
            let err = check_semigroup(op, a, b)?;
            out.push(CheckReport::new(
                "semigroup",
                json!({"geometry": label, "backend": op.backend().name(), "t": a, "s": b}),
                err,
                err <= SEMIGROUP_TOL,
            ));
        }
    }
    let bump16 = torus(16, &bump())?;
    let expm = build(bump16.clone(), Backend::ExpmAction, mode)?;
    let spectral16 = build(bump16.clone(), Backend::Spectral, mode)?;
    let err = check_semigroup(&expm, 1e-3, 2e-3)?;
    out.push(CheckReport::new(
        "semigroup",
        json!({"geometry": "torus_16_bump", "backend": "expm_action", "t": 1e-3, "s": 2e-3}),
        err,
        err <= 10.0 * expm.tolerance().max(SEMIGROUP_TOL / 10.0),
    ));
    // surrogate: reported only, the zeroth-order kernel is not a semigroup
    let sur = build(bump16, Backend::GaussianSurrogate, mode)?;
    let err = check_semigroup(&sur, 1e-3, 1e-3)?;
    out.push(CheckReport::new(
        "semigroup_surrogate_reported",
        json!({"geometry": "torus_16_bump", "backend": "gaussian_surrogate", "t": 1e-3, "s": 1e-3}),
        err,
        true,
    ));

    let g32 = torus(32, &DensitySpec::Uniform)?;
    let f32op = build(g32.clone(), Backend::Fourier, mode)?;
    let s32op = build(g32, Backend::Spectral, mode)?;
    let diff = check_cross_backend(&f32op, &s32op, 0.01, 7)?;
    out.push(CheckReport::new(
        "cross_backend",
        json!({"geometry": "torus_32", "backends": ["fourier", "spectral"], "h": 0.01}),
        diff,
        diff <= CROSS_BACKEND_TOL,
    ));
    for h in [1e-4, 1e-2] {
        let diff = check_cross_backend(&expm, &spectral16, h, 11)?;
        out.push(CheckReport::new(
            "cross_backend",
            json!({"geometry": "torus_16_bump", "backends": ["expm_action", "spectral"], "h": h}),
            diff,
            diff <= CROSS_BACKEND_TOL,
        ));
    }

    let circle512 = build(circle(512)?, Backend::Fourier, mode)?;
    let dx: f64 = 1.0 / 512.0;
    let h_grid = [(4.0 * dx).powi(2), 2.5e-4, 1e-3, 4e-3, 1.6e-2, 0.05];
    let dist_grid: Vec<f64> = (0..=24).map(|k| 0.25 * k as f64).collect();
    let fit = check_gaussian_bounds(&circle512, &h_grid, &dist_grid)?;
    out.push(CheckReport::new(
        "gaussian_bounds",
        json!({
            "geometry": "circle_512",
            "h_grid": h_grid,
            "lower_rate": fit.lower_rate,
            "upper_rate": fit.upper_rate,
            "derivative_rate": fit.derivative_rate,
            "fitted": fit.fitted,
            "excluded": fit.excluded,
        }),
        fit.worst_ratio,
        fit.pass,
    ));

    let disk = [ShapeSpec::Disk {
        center: vec![0.5, 0.5],
        radius: 0.2,
        phase: 1,
    }];
    for (label, density) in [("torus_128", DensitySpec::Uniform), ("torus_128_bump", bump())] {
        let geom = torus(128, &density)?;
        let dx: f64 = 1.0 / 128.0;
        let h_list: Vec<f64> = [8.0, 6.0, 4.0].iter().map(|k| (k * dx).powi(2)).collect();
        let rep = check_surrogate_energy(geom, &h_list, &disk, 2)?;
        let last = *rep.rel_diff.last().unwrap();
        // The trend along h in grid units is reported; on a fixed lattice the
        // discrete kernel departs from the Gaussian like Δx²/h, so the
        // convergence claim is asserted under grid refinement below.
        let pass = density != DensitySpec::Uniform || last <= SURROGATE_TOL;
        out.push(CheckReport::new(
            "surrogate_energy",
            json!({
                "geometry": label,
                "exact_backend": rep.exact_backend.name(),
                "h": rep.h,
                "rel_diff": rep.rel_diff,
                "decreasing_along_h": rep.monotone,
            }),
            last,
            pass,
        ));
        let h = (8.0 * dx).powi(2);
        let sides = [32, 64, 128];
        let diffs = check_surrogate_refinement(&density, h, &sides, &disk, 2)?;
        let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
        out.push(CheckReport::new(
            "surrogate_energy_refinement",
            json!({"density": label, "h": h, "sides": sides, "rel_diff": diffs}),
            *diffs.last().unwrap(),
            decreasing,
        ));
    }
    Ok(out)
}

pub fn estimates_suite(mode: ExecMode, seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (label, density) in [("torus_32", DensitySpec::Uniform), ("torus_32_bump", bump())] {
        let op = build(torus(32, &density)?, Backend::Spectral, mode)?;
        let h = (4.0f64 / 32.0).powi(2);
        let rep = check_useful_estimates(&op, h, 24, seed)?;
        for (name, worst) in [
            ("kernel_diff", rep.kernel_diff),
            ("mon_const", rep.mon_const),
            ("l2_u", rep.l2_u),
            ("l1_estimate", rep.l1_crisp),
        ] {
            out.push(CheckReport::new(
                name,
                json!({"geometry": label, "h": h, "trials": rep.trials, "seed": seed}),
                worst,
                worst >= ESTIMATE_SLACK,
            ));
        }
    }
    Ok(out)
}

pub fn constants_suite(mode: ExecMode) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let c64 = check_c0(64)?;
    let err = (c64 - crate::C0).abs();
    out.push(CheckReport::new("c0_quadrature", json!({"n": 64}), err, err <= C0_TOL));
    let c128 = check_c0(128)?;
    let change = (c128 - c64).abs();
    out.push(CheckReport::new("c0_doubling", json!({"n": [64, 128]}), change, change <= C0_DOUBLING_TOL));
    let angles = [0.0, 0.3, 1.0, 2.5, 4.0];
    let worst = angles
        .iter()
        .map(|&th| c0_rotated(64, th).map(|v| (v - c64).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(CheckReport::new(
        "c0_rotated_normal",
        json!({"n": 64, "angles": angles}),
        worst,
        worst <= C0_ROTATION_TOL,
    ));
    let r_grid: Vec<f64> = (1..=120).map(|k| k as f64 * 0.01).collect();
    let (samples, pass) = check_hessian_distance_sphere(&r_grid)?;
    let worst = samples
        .iter()
        .map(|s| s.deviation / s.bound)
        .fold(0.0, f64::max);
    out.push(CheckReport::new(
        "sphere_hessian",
        json!({"r_min": 0.01, "r_max": 1.2, "samples": r_grid.len()}),
        worst,
        pass,
    ));
    let geom = DiscreteGeometry::torus_grid(64, 2, &DensitySpec::Uniform)?;
    let dx = 1.0 / 64.0;
    let r_grid: Vec<f64> = [4.0 * dx, 6.0 * dx, 8.0 * dx, 0.15, 0.2, 0.25].to_vec();
    let (lo, hi) = check_doubling(&geom, &r_grid, mode)?;
    out.push(CheckReport::new(
        "volume_doubling",
        json!({"geometry": "torus_64", "r": r_grid, "min_ratio": lo, "max_ratio": hi}),
        hi,
        lo >= 1.0 && hi <= 4.0 * PI,
    ));
    Ok(out)
}

pub fn run_suite(suite: Suite, seed: u64, mode: ExecMode) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Kernel | Suite::All) {
        out.extend(kernel_suite(mode)?);
    }
    if matches!(suite, Suite::Estimates | Suite::All) {
        out.extend(estimates_suite(mode, seed)?);
    }
    if matches!(suite, Suite::Constants | Suite::All) {
        out.extend(constants_suite(mode)?);
    }
    Ok(out)
}
