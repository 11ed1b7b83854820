use nalgebra::DMatrix;

use crate::geometry::DiscreteGeometry;
use crate::par::{self, ExecMode};

/// `(Lf)(x) = (1/μ(x)) Σ_y w_xy (f(x) − f(y))`, self-adjoint and nonnegative in ℓ²(μ).
#[derive(Debug, Clone, Copy)]
pub struct LaplacianMatrix<'a> {
    geom: &'a DiscreteGeometry,
}

impl<'a> LaplacianMatrix<'a> {
    pub fn new(geom: &'a DiscreteGeometry) -> Self {
        LaplacianMatrix { geom }
    }

    pub fn apply(&self, f: &[f64], mode: ExecMode) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.apply_into(f, &mut out, mode);
        out
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64], mode: ExecMode) {
        let edges = self.geom.edges();
        let mu = self.geom.measure();
        par::fill_indexed(mode, out, |x| {
            let fx = f[x];
            edges.neighbors(x).map(|(y, w)| w * (fx - f[y])).sum::<f64>() / mu[x]
        });
    }

    /// Gershgorin bound on the spectrum: `max_x 2 deg(x) / μ(x)`.
    pub fn gershgorin_bound(&self) -> f64 {
        let mu = self.geom.measure();
        (0..self.geom.n_vertices())
            .map(|x| 2.0 * self.geom.edges().degree(x) / mu[x])
            .fold(0.0, f64::max)
    }

    /// `M^{1/2} L M^{−1/2}`, the symmetric matrix similar to `L`.
    pub fn symmetrized_dense(&self) -> DMatrix<f64> {
        let n = self.geom.n_vertices();
        let mu = self.geom.measure();
        let mut s = DMatrix::zeros(n, n);
        for x in 0..n {
            for (y, w) in self.geom.edges().neighbors(x) {
                s[(x, y)] -= w / (mu[x] * mu[y]).sqrt();
                s[(x, x)] += w / mu[x];
            }
        }
        s
    }
}
