use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::DiscreteGeometry;
use crate::par::{self, ExecMode};

/// Truncation radius in units of `√h`.
pub const CUTOFF_WIDTHS: f64 = 8.0;

/// `G_h(x, y)·v₀(x, y)` with `G_h = (4πh)^{−d/2} exp(−dist²/4h)`,
/// `v₀ = 1/√(ρ(x)ρ(y))`, cut off at `dist > 8√h`.
///
/// Not a semigroup and only approximately stochastic; symmetric by construction.
pub struct GaussianSurrogate {
    side: usize,
    dim: usize,
    spacing: f64,
    inv_sqrt_rho: Vec<f64>,
}

impl GaussianSurrogate {
    pub fn new(geom: &DiscreteGeometry) -> Result<Self> {
        if !geom.has_distances() {
            return Err(Error::BackendUnavailable {
                backend: "gaussian_surrogate",
                reason: "geodesic distances unavailable for this geometry".into(),
            });
        }
        let (side, dim) = geom.grid_shape().ok_or(Error::BackendUnavailable {
            backend: "gaussian_surrogate",
            reason: "requires a grid geometry".into(),
        })?;
        Ok(GaussianSurrogate {
            side,
            dim,
            spacing: geom.spacing().unwrap(),
            inv_sqrt_rho: geom.density().iter().map(|r| 1.0 / r.sqrt()).collect(),
        })
    }

    fn gaussian(&self, h: f64, d2: f64) -> f64 {
        (4.0 * PI * h).powf(-(self.dim as f64) / 2.0) * (-d2 / (4.0 * h)).exp()
    }

    /// Signed minimal residues, each lattice offset exactly once.
    fn residues(&self) -> Vec<i64> {
        let n = self.side as i64;
        (0..n).map(|r| if r > n / 2 { r - n } else { r }).collect()
    }

    /// `(offset index per axis, weight)` for every offset inside the cutoff.
    fn stencil(&self, h: f64) -> Vec<([usize; 2], f64)> {
        let cut2 = CUTOFF_WIDTHS * CUTOFF_WIDTHS * h;
        let res = self.residues();
        let dx = self.spacing;
        let mut out = Vec::new();
        let js: &[i64] = if self.dim == 2 { &res } else { &[0] };
        for &dj in js {
            for &di in &res {
                let d2 = ((di * di + dj * dj) as f64) * dx * dx;
                if d2 <= cut2 {
                    let n = self.side as i64;
                    out.push((
                        [di.rem_euclid(n) as usize, dj.rem_euclid(n) as usize],
                        self.gaussian(h, d2),
                    ));
                }
            }
        }
        out
    }

    pub fn apply(&self, geom: &DiscreteGeometry, h: f64, f: &[f64], mode: ExecMode) -> Vec<f64> {
        let n = self.side;
        let stencil = self.stencil(h);
        let mu = geom.measure();
        // g(y) = f(y) μ(y) / √ρ(y)
        let g: Vec<f64> = (0..f.len())
            .map(|y| f[y] * mu[y] * self.inv_sqrt_rho[y])
            .collect();
        let mut out = vec![0.0; f.len()];
        par::fill_indexed(mode, &mut out, |x| {
            let (xi, xj) = (x % n, x / n);
            let s: f64 = stencil
                .iter()
                .map(|&([di, dj], w)| {
                    let y = (xi + di) % n + n * ((xj + dj) % n);
                    w * g[y]
                })
                .sum();
            s * self.inv_sqrt_rho[x]
        });
        out
    }

    pub fn entry(&self, geom: &DiscreteGeometry, h: f64, x: usize, y: usize) -> f64 {
        let d = geom.distance(x, y).unwrap();
        if d > CUTOFF_WIDTHS * h.sqrt() {
            return 0.0;
        }
        self.gaussian(h, d * d) * self.inv_sqrt_rho[x] * self.inv_sqrt_rho[y]
    }
}
