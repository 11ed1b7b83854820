use nalgebra::{DMatrix, DVector};

use super::LaplacianMatrix;
use crate::error::{Error, Result};
use crate::geometry::DiscreteGeometry;

/// Largest geometry the dense eigendecomposition accepts.
pub const SPECTRAL_VERTEX_CAP: usize = 4096;

/// Eigenpairs of `L`: `L ψ_k = λ_k ψ_k` with `ψ_k` orthonormal in ℓ²(μ),
/// stored as `ψ_k = M^{−1/2} φ_k` for orthonormal `φ_k`.
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Columns are the Euclidean-orthonormal `φ_k`.
    vectors: DMatrix<f64>,
    sqrt_mu: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn new(geom: &DiscreteGeometry) -> Result<Self> {
        let n = geom.n_vertices();
        if n > SPECTRAL_VERTEX_CAP {
            return Err(Error::BackendUnavailable {
                backend: "spectral",
                reason: format!("{n} vertices exceed the cap of {SPECTRAL_VERTEX_CAP}"),
            });
        }
        let s = LaplacianMatrix::new(geom).symmetrized_dense();
        let eig = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |x, k| eig.eigenvectors[(x, order[k])]);
        Ok(SpectralDecomposition {
            eigenvalues,
            vectors,
            sqrt_mu: geom.measure().iter().map(|m| m.sqrt()).collect(),
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `⟨f, ψ_k⟩_μ` for all k.
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let g = DVector::from_iterator(f.len(), f.iter().zip(&self.sqrt_mu).map(|(a, s)| a * s));
        self.vectors.tr_mul(&g).iter().copied().collect()
    }

    pub fn apply(&self, h: f64, f: &[f64]) -> Vec<f64> {
        let c = self.coefficients(f);
        let damped = DVector::from_iterator(
            c.len(),
            c.iter().zip(&self.eigenvalues).map(|(c, l)| c * (-h * l).exp()),
        );
        let g = &self.vectors * damped;
        g.iter().zip(&self.sqrt_mu).map(|(v, s)| v / s).collect()
    }

    pub fn entry(&self, h: f64, x: usize, y: usize) -> f64 {
        let sum: f64 = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| (-h * l).exp() * self.vectors[(x, k)] * self.vectors[(y, k)])
            .sum();
        sum / (self.sqrt_mu[x] * self.sqrt_mu[y])
    }
}
