//! Heat semigroup `p(h)∗ = e^{−hL}` on a [`DiscreteGeometry`].
//!
//! Kernel entries are densities with respect to μ:
//! `(p(h)∗f)(x) = Σ_y entry(x, y) f(y) μ(y)`, so rows integrate to one against μ.

mod chebyshev;
mod fourier;
mod laplacian;
mod spectral;
mod surrogate;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DiscreteGeometry, PhaseField};
use crate::par::{self, ExecMode};

pub use chebyshev::{scaled_bessel_i, ChebyshevAction};
pub use fourier::FourierPlan;
pub use laplacian::LaplacianMatrix;
pub use spectral::{SpectralDecomposition, SPECTRAL_VERTEX_CAP};
pub use surrogate::{GaussianSurrogate, CUTOFF_WIDTHS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// FFT diagonalization; uniform periodic grids only.
    Fourier,
    /// Dense eigendecomposition of the symmetrized Laplacian.
    Spectral,
    /// Matrix-free Chebyshev approximation of `e^{−hL}` applied to fields.
    ExpmAction,
    /// Zeroth-order short-time kernel `G_h(dist)·v₀` with `v₀ = 1/√(ρ(x)ρ(y))`.
    GaussianSurrogate,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Fourier => "fourier",
            Backend::Spectral => "spectral",
            Backend::ExpmAction => "expm_action",
            Backend::GaussianSurrogate => "gaussian_surrogate",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Default relative accuracy for the polynomial backend.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

enum Imp {
    Fourier(FourierPlan),
    Spectral(SpectralDecomposition),
    Expm(ChebyshevAction),
    Surrogate(GaussianSurrogate),
}

pub struct HeatKernelOperator {
    geom: Arc<DiscreteGeometry>,
    backend: Backend,
    tolerance: f64,
    mode: ExecMode,
    imp: Imp,
}

impl fmt::Debug for HeatKernelOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeatKernelOperator")
            .field("backend", &self.backend)
            .field("n_vertices", &self.geom.n_vertices())
            .field("tolerance", &self.tolerance)
            .field("mode", &self.mode)
            .finish()
    }
}

impl HeatKernelOperator {
    pub fn build(geom: Arc<DiscreteGeometry>, backend: Backend, tolerance: f64) -> Result<Self> {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {tolerance} must be positive")));
        }
        let imp = match backend {
            Backend::Fourier => Imp::Fourier(FourierPlan::new(&geom)?),
            Backend::Spectral => Imp::Spectral(SpectralDecomposition::new(&geom)?),
            Backend::ExpmAction => Imp::Expm(ChebyshevAction::new(&geom, tolerance)),
            Backend::GaussianSurrogate => Imp::Surrogate(GaussianSurrogate::new(&geom)?),
        };
        Ok(HeatKernelOperator {
            geom,
            backend,
            tolerance,
            mode: ExecMode::default(),
            imp,
        })
    }

    pub fn with_exec_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn exec_mode(&self) -> ExecMode {
        self.mode
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn geometry(&self) -> &DiscreteGeometry {
        &self.geom
    }

    pub fn geometry_arc(&self) -> &Arc<DiscreteGeometry> {
        &self.geom
    }

    /// `p(h)∗field`.
    pub fn apply(&self, h: f64, field: &[f64]) -> Result<Vec<f64>> {
        check_h(h)?;
        if field.len() != self.geom.n_vertices() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, geometry has {} vertices",
                field.len(),
                self.geom.n_vertices()
            )));
        }
        if field.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field contains non-finite values".into()));
        }
        Ok(match &self.imp {
            Imp::Fourier(p) => p.apply(h, field, self.mode),
            Imp::Spectral(s) => s.apply(h, field),
            Imp::Expm(c) => c.apply(&self.geom, h, field, self.mode),
            Imp::Surrogate(g) => g.apply(&self.geom, h, field, self.mode),
        })
    }

    /// Applies the kernel to every phase of `u`, in parallel over phases.
    pub fn apply_phases(&self, h: f64, u: &PhaseField) -> Result<Vec<Vec<f64>>> {
        self.apply_many(h, &u.phases().collect::<Vec<_>>())
    }

    pub fn apply_many(&self, h: f64, fields: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        par::map_range(self.mode, fields.len(), |i| self.apply(h, fields[i]))
            .into_iter()
            .collect()
    }

    /// `p(h, x, y)` with respect to μ.
    pub fn kernel_entry(&self, h: f64, x: usize, y: usize) -> Result<f64> {
        check_h(h)?;
        let n = self.geom.n_vertices();
        if x >= n || y >= n {
            return Err(Error::InvalidArgument(format!("vertex out of range ({x}, {y})")));
        }
        match &self.imp {
            Imp::Fourier(p) => Ok(p.entry(h, x, y)),
            Imp::Spectral(s) => Ok(s.entry(h, x, y)),
            Imp::Expm(_) => Err(Error::EntriesUnavailable(self.backend.name())),
            Imp::Surrogate(g) => Ok(g.entry(&self.geom, h, x, y)),
        }
    }

    /// All entries `p(h, x, ·)`.
    pub fn kernel_row(&self, h: f64, x: usize) -> Result<Vec<f64>> {
        check_h(h)?;
        let n = self.geom.n_vertices();
        match &self.imp {
            Imp::Fourier(p) => Ok(p.row(h, x)),
            Imp::Spectral(s) => Ok((0..n).map(|y| s.entry(h, x, y)).collect()),
            Imp::Expm(_) => Err(Error::EntriesUnavailable(self.backend.name())),
            Imp::Surrogate(g) => Ok((0..n).map(|y| g.entry(&self.geom, h, x, y)).collect()),
        }
    }

    pub fn has_entries(&self) -> bool {
        !matches!(self.imp, Imp::Expm(_))
    }

    /// Eigenvalues of `L` in ascending order (spectral backend only).
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        match &self.imp {
            Imp::Spectral(s) => Some(s.eigenvalues()),
            _ => None,
        }
    }

    pub fn spectral(&self) -> Option<&SpectralDecomposition> {
        match &self.imp {
            Imp::Spectral(s) => Some(s),
            _ => None,
        }
    }

    /// Symbol `e^{−hλ_k}` of the FFT backend, `None` otherwise.
    pub fn fourier(&self) -> Option<&FourierPlan> {
        match &self.imp {
            Imp::Fourier(p) => Some(p),
            _ => None,
        }
    }

    /// Chebyshev degree per substep and substep count for `apply(h, ·)`.
    pub fn polynomial_degree(&self, h: f64) -> Option<(usize, usize)> {
        match &self.imp {
            Imp::Expm(c) => Some(c.plan(h).degree_and_substeps()),
            _ => None,
        }
    }

    /// Writes `index,eigenvalue` lines (spectral backend only).
    pub fn write_spectrum_csv(&self, path: &Path) -> Result<()> {
        let ev = self.eigenvalues().ok_or(Error::BackendUnavailable {
            backend: self.backend.name(),
            reason: "no stored spectrum".into(),
        })?;
        let mut s = String::from("index,eigenvalue\n");
        for (k, l) in ev.iter().enumerate() {
            s.push_str(&format!("{k},{l:.17e}\n"));
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

fn check_h(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("diffusion time h = {h} must be positive")))
    }
}

/// `⟨f, g⟩_μ`.
pub fn inner(measure: &[f64], f: &[f64], g: &[f64]) -> f64 {
    measure
        .iter()
        .zip(f.iter().zip(g))
        .map(|(m, (a, b))| m * a * b)
        .sum()
}
