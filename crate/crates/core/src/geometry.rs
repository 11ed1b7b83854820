//! Discrete weighted geometries and phase fields.
//!
//! A [`DiscreteGeometry`] is the discrete stand-in for a closed weighted
//! manifold `(M, μ = ρ Vol)`: vertices carry a cell volume, a density and the
//! product measure `μ(x) = ρ(x)·vol(x)`, normalized so that `Σ μ = 1`. Edges carry
//! symmetric conductances `w_xy` defining the weighted Laplacian
//! `(Lf)(x) = (1/μ(x)) Σ_y w_xy (f(x) − f(y))`.

use std::collections::VecDeque;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible grid side.
pub const MIN_SIDE_COUNT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DensitySpec {
    Uniform,
    /// `ρ(x) = 1 + amplitude · exp(−dist²(x, center) / (2 width²))`, torus distance.
    GaussianBump {
        center: Vec<f64>,
        amplitude: f64,
        width: f64,
    },
    /// Raw per-vertex values, rescaled at construction.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryKind {
    TorusGrid { side_count: usize, spacing: f64 },
    CircleGrid { count: usize, spacing: f64 },
    WeightedGraph,
}

/// Compressed adjacency with symmetric weights.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl Adjacency {
    fn from_lists(lists: Vec<Vec<(usize, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for list in lists {
            for (y, w) in list {
                targets.push(y);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Adjacency {
            offsets,
            targets,
            weights,
        }
    }

    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[x]..self.offsets[x + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.neighbors(x)
            .filter(|&(t, _)| t == y)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn degree(&self, x: usize) -> f64 {
        self.neighbors(x).map(|(_, w)| w).sum()
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteGeometry {
    dim: usize,
    kind: GeometryKind,
    /// Flat `n × dim` coordinates in `[0, 1)`; empty for graphs.
    positions: Vec<f64>,
    cell_volume: Vec<f64>,
    density: Vec<f64>,
    measure: Vec<f64>,
    edges: Adjacency,
    uniform: bool,
}

impl DiscreteGeometry {
    /// Periodic grid on the unit torus `[0,1)^dim` with `side_count` points per axis.
    ///
    /// Vertex `i + side·j` sits at `(i Δx, j Δx)`.
    pub fn torus_grid(side_count: usize, dim: usize, density: &DensitySpec) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Geometry(format!("dimension {dim} not in {{1, 2}}")));
        }
        if side_count < MIN_SIDE_COUNT {
            return Err(Error::Geometry(format!(
                "side_count {side_count} below minimum {MIN_SIDE_COUNT}"
            )));
        }
        let spacing = 1.0 / side_count as f64;
        Self::build_grid(
            GeometryKind::TorusGrid {
                side_count,
                spacing,
            },
            side_count,
            dim,
            density,
        )
    }

    /// Uniform grid on the circle of unit circumference. Positions are arc
    /// length in `[0, 1)`, i.e. angle `θ = 2π·position`.
    pub fn circle_grid(count: usize, density: &DensitySpec) -> Result<Self> {
        if count < MIN_SIDE_COUNT {
            return Err(Error::Geometry(format!(
                "count {count} below minimum {MIN_SIDE_COUNT}"
            )));
        }
        let spacing = 1.0 / count as f64;
        Self::build_grid(GeometryKind::CircleGrid { count, spacing }, count, 1, density)
    }

    fn build_grid(kind: GeometryKind, side: usize, dim: usize, spec: &DensitySpec) -> Result<Self> {
        let n = side.pow(dim as u32);
        let dx = 1.0 / side as f64;
        let mut positions = Vec::with_capacity(n * dim);
        for v in 0..n {
            let (i, j) = (v % side, v / side);
            positions.push(i as f64 * dx);
            if dim == 2 {
                positions.push(j as f64 * dx);
            }
        }
        let raw = match spec {
            DensitySpec::Uniform => vec![1.0; n],
            DensitySpec::GaussianBump {
                center,
                amplitude,
                width,
            } => {
                if center.len() != dim {
                    return Err(Error::Geometry(format!(
                        "bump center has {} coordinates, geometry has dimension {dim}",
                        center.len()
                    )));
                }
                if *width <= 0.0 {
                    return Err(Error::Geometry("bump width must be positive".into()));
                }
                (0..n)
                    .map(|v| {
                        let d2 = torus_dist2(&positions[v * dim..(v + 1) * dim], center);
                        1.0 + amplitude * (-d2 / (2.0 * width * width)).exp()
                    })
                    .collect()
            }
            DensitySpec::Table { values } => {
                if values.len() != n {
                    return Err(Error::Geometry(format!(
                        "density table has {} values, grid has {n} vertices",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if let Some((v, r)) = raw
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::Geometry(format!(
                "density must be positive, got {r} at vertex {v}"
            )));
        }
        let raw_volume = dx.powi(dim as i32);
        let cell_volume = vec![raw_volume; n];
        let total: f64 = raw.iter().map(|r| r * raw_volume).sum();
        let density: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let uniform = density.iter().all(|&r| r == density[0]);
        let measure = normalize(density.iter().map(|r| r * raw_volume).collect());

        // w_xy = ρ_edge Δx^{d−2} with the arithmetic-mean edge density.
        let scale = dx.powi(dim as i32 - 2);
        let lists = (0..n)
            .map(|v| {
                grid_neighbors(v, side, dim)
                    .into_iter()
                    .map(|u| (u, 0.5 * (density[v] + density[u]) * scale))
                    .collect()
            })
            .collect();

        Ok(DiscreteGeometry {
            dim,
            kind,
            positions,
            cell_volume,
            density,
            measure,
            edges: Adjacency::from_lists(lists),
            uniform,
        })
    }

    /// Weighted graph from an edge list; measures are renormalized to sum 1.
    ///
    /// Duplicate edges accumulate; the result is symmetric regardless of the
    /// orientation in which edges are listed.
    pub fn weighted_graph(
        n: usize,
        edge_list: &[(usize, usize, f64)],
        vertex_measures: &[f64],
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Geometry("empty graph".into()));
        }
        if vertex_measures.len() != n {
            return Err(Error::Geometry(format!(
                "{} measures for {n} vertices",
                vertex_measures.len()
            )));
        }
        if vertex_measures.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Geometry("vertex measures must be positive".into()));
        }
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in edge_list {
            if a >= n || b >= n {
                return Err(Error::Geometry(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::Geometry(format!("self edge at {a}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Geometry(format!("edge ({a}, {b}) has weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            for (s, t) in [(a, b), (b, a)] {
                match lists[s].iter_mut().find(|(u, _)| *u == t) {
                    Some(e) => e.1 += w,
                    None => lists[s].push((t, w)),
                }
            }
        }
        for l in &mut lists {
            l.sort_by_key(|e| e.0);
        }
        let components = count_components(&lists);
        if components > 1 {
            return Err(Error::Disconnected { components });
        }
        let measure = normalize(vertex_measures.to_vec());
        Ok(DiscreteGeometry {
            dim: 0,
            kind: GeometryKind::WeightedGraph,
            positions: Vec::new(),
            cell_volume: measure.clone(),
            density: vec![1.0; n],
            measure,
            edges: Adjacency::from_lists(lists),
            uniform: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn n_vertices(&self) -> usize {
        self.measure.len()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cell_volume(&self) -> &[f64] {
        &self.cell_volume
    }

    pub fn edges(&self) -> &Adjacency {
        &self.edges
    }

    pub fn min_measure(&self) -> f64 {
        self.measure.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True for grids with constant density (the FFT backend's requirement).
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `(side, dim)` for grid geometries.
    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        match self.kind {
            GeometryKind::TorusGrid { side_count, .. } => Some((side_count, self.dim)),
            GeometryKind::CircleGrid { count, .. } => Some((count, 1)),
            GeometryKind::WeightedGraph => None,
        }
    }

    pub fn spacing(&self) -> Option<f64> {
        match self.kind {
            GeometryKind::TorusGrid { spacing, .. } | GeometryKind::CircleGrid { spacing, .. } => {
                Some(spacing)
            }
            GeometryKind::WeightedGraph => None,
        }
    }

    pub fn position(&self, x: usize) -> Option<&[f64]> {
        if self.positions.is_empty() {
            None
        } else {
            Some(&self.positions[x * self.dim..(x + 1) * self.dim])
        }
    }

    pub fn has_distances(&self) -> bool {
        !self.positions.is_empty()
    }

    /// Geodesic (wrap-around) distance; `None` for graphs without positions.
    pub fn distance(&self, x: usize, y: usize) -> Option<f64> {
        Some(torus_dist2(self.position(x)?, self.position(y)?).sqrt())
    }

    /// Vertex index of grid coordinates, wrapping periodically.
    pub fn grid_index(&self, coords: &[i64]) -> Option<usize> {
        let (side, dim) = self.grid_shape()?;
        let s = side as i64;
        let mut idx = 0usize;
        let mut stride = 1usize;
        for c in coords.iter().take(dim) {
            idx += c.rem_euclid(s) as usize * stride;
            stride *= side;
        }
        Some(idx)
    }

    /// `μ(B_r(x))` with the closed ball in the geodesic distance.
    pub fn ball_measure(&self, x: usize, r: f64) -> Option<f64> {
        if !self.has_distances() {
            return None;
        }
        Some(
            (0..self.n_vertices())
                .filter(|&y| self.distance(x, y).unwrap() <= r)
                .map(|y| self.measure[y])
                .sum(),
        )
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|m| *m /= total);
    v
}

/// Squared distance on the unit torus.
pub fn torus_dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let d = (p - q).rem_euclid(1.0);
            let d = d.min(1.0 - d);
            d * d
        })
        .sum()
}

fn grid_neighbors(v: usize, side: usize, dim: usize) -> Vec<usize> {
    let (i, j) = (v % side, v / side);
    let left = (i + side - 1) % side;
    let right = (i + 1) % side;
    let mut out = vec![left + side * j, right + side * j];
    if dim == 2 {
        out.push(i + side * ((j + side - 1) % side));
        out.push(i + side * ((j + 1) % side));
    }
    out
}

fn count_components(lists: &[Vec<(usize, f64)>]) -> usize {
    let n = lists.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &lists[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
    }
    count
}

/// `P` per-vertex memberships summing to one at every vertex.
///
/// Stored phase-major: phase `i` occupies `values[i·n .. (i+1)·n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    n_phases: usize,
    n_vertices: usize,
    values: Vec<f64>,
}

/// Tolerance of the partition-of-unity invariant.
pub const PARTITION_TOL: f64 = 1e-12;

impl PhaseField {
    pub fn from_labels(labels: &[usize], n_phases: usize) -> Result<Self> {
        if n_phases < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 phases, got {n_phases}"
            )));
        }
        let n = labels.len();
        let mut values = vec![0.0; n_phases * n];
        for (x, &l) in labels.iter().enumerate() {
            if l >= n_phases {
                return Err(Error::InvalidArgument(format!(
                    "label {l} at vertex {x} exceeds phase count {n_phases}"
                )));
            }
            values[l * n + x] = 1.0;
        }
        Ok(PhaseField {
            n_phases,
            n_vertices: n,
            values,
        })
    }

    /// Builds a field from per-phase rows, checking `[0,1]` bounds and the
    /// partition of unity.
    pub fn from_phases(phases: Vec<Vec<f64>>) -> Result<Self> {
        let n_phases = phases.len();
        if n_phases < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 phases, got {n_phases}"
            )));
        }
        let n = phases[0].len();
        if phases.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidArgument("ragged phase rows".into()));
        }
        let values: Vec<f64> = phases.into_iter().flatten().collect();
        let field = PhaseField {
            n_phases,
            n_vertices: n,
            values,
        };
        if field.values.iter().any(|v| !(-1e-15..=1.0 + 1e-15).contains(v)) {
            return Err(Error::InvalidArgument("membership outside [0, 1]".into()));
        }
        let err = field.partition_error();
        if err > PARTITION_TOL {
            return Err(Error::InvalidArgument(format!(
                "partition of unity violated by {err:e}"
            )));
        }
        Ok(field)
    }

    pub(crate) fn from_raw(n_phases: usize, n_vertices: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n_phases * n_vertices);
        PhaseField {
            n_phases,
            n_vertices,
            values,
        }
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn phase(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_vertices..(i + 1) * self.n_vertices]
    }

    pub fn phase_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.n_vertices;
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn phases(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_vertices)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, x: usize) -> f64 {
        self.values[i * self.n_vertices + x]
    }

    /// `max_x |Σ_i u_i(x) − 1|`.
    pub fn partition_error(&self) -> f64 {
        (0..self.n_vertices)
            .map(|x| ((0..self.n_phases).map(|i| self.get(i, x)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Per-phase μ-mass.
    pub fn volumes(&self, measure: &[f64]) -> Vec<f64> {
        self.phases()
            .map(|p| p.iter().zip(measure).map(|(u, m)| u * m).sum())
            .collect()
    }

    /// Vertices with a fractional membership.
    pub fn fractional_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices)
            .filter(|&x| (0..self.n_phases).any(|i| {
                let v = self.get(i, x);
                v != 0.0 && v != 1.0
            }))
            .collect()
    }

    pub fn is_crisp(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Phase of largest membership at each vertex, lowest index on ties.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.n_vertices)
            .map(|x| {
                let mut best = 0;
                for i in 1..self.n_phases {
                    if self.get(i, x) > self.get(best, x) {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// `Σ_i ∫ |u_i − v_i| dμ`.
    pub fn l1_distance(&self, other: &PhaseField, measure: &[f64]) -> f64 {
        let n = self.n_vertices;
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(k, (a, b))| (a - b).abs() * measure[k % n])
            .sum()
    }
}

/// Initial-partition primitives. Shapes are painted in order; later shapes
/// overwrite earlier ones and unpainted vertices belong to phase 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSpec {
    Disk {
        center: Vec<f64>,
        radius: f64,
        phase: usize,
    },
    /// `lo ≤ coord[axis] < hi`; wraps around when `lo > hi`.
    Stripe {
        axis: usize,
        lo: f64,
        hi: f64,
        phase: usize,
    },
    /// `⟨normal, x⟩ ≥ offset` in unwrapped coordinates.
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
        phase: usize,
    },
    /// PGM (P5) with one byte per vertex holding the phase index.
    LabelFile { path: PathBuf },
    /// Nearest-seed cells; seed `k` paints phase `k mod P`.
    Voronoi { seed_points: Vec<Vec<f64>> },
}

/// Paints `shapes` onto a crisp `P`-phase field. Empty phases are logged; the
/// multiplier solver rejects them later.
pub fn seed_partition(
    geom: &DiscreteGeometry,
    shapes: &[ShapeSpec],
    n_phases: usize,
) -> Result<PhaseField> {
    let n = geom.n_vertices();
    let mut labels = vec![0usize; n];
    let check_phase = |p: usize| {
        if p >= n_phases {
            Err(Error::InvalidArgument(format!(
                "shape phase {p} exceeds phase count {n_phases}"
            )))
        } else {
            Ok(())
        }
    };
    let need_positions = |what: &str| {
        Error::InvalidArgument(format!("{what} shape requires vertex positions"))
    };
    for shape in shapes {
        match shape {
            ShapeSpec::Disk {
                center,
                radius,
                phase,
            } => {
                check_phase(*phase)?;
                check_point(geom, center)?;
                for (x, l) in labels.iter_mut().enumerate() {
                    let p = geom.position(x).ok_or_else(|| need_positions("disk"))?;
                    if torus_dist2(p, center) <= radius * radius {
                        *l = *phase;
                    }
                }
            }
            ShapeSpec::Stripe {
                axis,
                lo,
                hi,
                phase,
            } => {
                check_phase(*phase)?;
                if *axis >= geom.dim() {
                    return Err(Error::InvalidArgument(format!("stripe axis {axis} out of range")));
                }
                for (x, l) in labels.iter_mut().enumerate() {
                    let c = geom.position(x).ok_or_else(|| need_positions("stripe"))?[*axis];
                    let inside = if lo <= hi {
                        *lo <= c && c < *hi
                    } else {
                        c >= *lo || c < *hi
                    };
                    if inside {
                        *l = *phase;
                    }
                }
            }
            ShapeSpec::HalfSpace {
                normal,
                offset,
                phase,
            } => {
                check_phase(*phase)?;
                check_point(geom, normal)?;
                for (x, l) in labels.iter_mut().enumerate() {
                    let p = geom.position(x).ok_or_else(|| need_positions("half-space"))?;
                    let dot: f64 = p.iter().zip(normal).map(|(a, b)| a * b).sum();
                    if dot >= *offset {
                        *l = *phase;
                    }
                }
            }
            ShapeSpec::LabelFile { path } => {
                let (side, dim) = geom.grid_shape().ok_or_else(|| {
                    Error::InvalidArgument("label files require a grid geometry".into())
                })?;
                let (width, height) = if dim == 2 { (side, side) } else { (side, 1) };
                let bytes = crate::io::read_pgm(path, width, height)?;
                for (l, &b) in labels.iter_mut().zip(&bytes) {
                    check_phase(b as usize)?;
                    *l = b as usize;
                }
            }
            ShapeSpec::Voronoi { seed_points } => {
                if seed_points.is_empty() {
                    return Err(Error::InvalidArgument("voronoi needs seed points".into()));
                }
                for s in seed_points {
                    check_point(geom, s)?;
                }
                for (x, l) in labels.iter_mut().enumerate() {
                    let p = geom.position(x).ok_or_else(|| need_positions("voronoi"))?;
                    let (k, _) = seed_points
                        .iter()
                        .enumerate()
                        .map(|(k, s)| (k, torus_dist2(p, s)))
                        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                    *l = k % n_phases;
                }
            }
        }
    }
    let field = PhaseField::from_labels(&labels, n_phases)?;
    for (i, v) in field.volumes(geom.measure()).iter().enumerate() {
        if *v == 0.0 {
            log::warn!("phase {i} is empty after seeding");
        }
    }
    Ok(field)
}

fn check_point(geom: &DiscreteGeometry, p: &[f64]) -> Result<()> {
    if p.len() != geom.dim() {
        return Err(Error::InvalidArgument(format!(
            "point has {} coordinates, geometry has dimension {}",
            p.len(),
            geom.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn total(g: &DiscreteGeometry) -> f64 {
        g.measure().iter().sum()
    }

    #[test]
    fn small_uniform_torus() {
        let g = DiscreteGeometry::torus_grid(4, 2, &DensitySpec::Uniform).unwrap();
        assert_eq!(g.n_vertices(), 16);
        assert!(g.measure().iter().all(|&m| m == 1.0 / 16.0));
    }

    #[test]
    fn normalization() {
        let g = DiscreteGeometry::torus_grid(64, 2, &DensitySpec::Uniform).unwrap();
        assert!((total(&g) - 1.0).abs() <= 1e-14);
        let bump = DensitySpec::GaussianBump {
            center: vec![0.5, 0.5],
            amplitude: 2.0,
            width: 0.2,
        };
        let g = DiscreteGeometry::torus_grid(64, 2, &bump).unwrap();
        assert!((total(&g) - 1.0).abs() <= 1e-14);
        let center = g.grid_index(&[32, 32]).unwrap();
        let argmax = (0..g.n_vertices())
            .max_by(|&a, &b| g.measure()[a].total_cmp(&g.measure()[b]))
            .unwrap();
        assert_eq!(argmax, center);
        // ρ(center)/ρ(corner) from the bump formula at torus distance √0.5.
        let corner = g.grid_index(&[0, 0]).unwrap();
        let expect = 3.0 / (1.0 + 2.0 * (-0.5f64 / 0.08).exp());
        let ratio = g.measure()[center] / g.measure()[corner];
        assert!((ratio - expect).abs() < 1e-12);
        for (m, (r, v)) in g.measure().iter().zip(g.density().iter().zip(g.cell_volume())) {
            assert!((m - r * v).abs() <= 1e-14 * m);
        }
    }

    #[test]
    fn too_small_or_nonpositive() {
        assert!(DiscreteGeometry::torus_grid(3, 2, &DensitySpec::Uniform).is_err());
        assert!(DiscreteGeometry::torus_grid(8, 3, &DensitySpec::Uniform).is_err());
        let bad = DensitySpec::Table {
            values: vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        };
        assert!(DiscreteGeometry::circle_grid(8, &bad).is_err());
    }

    #[test]
    fn circle_grid_basics() {
        let g = DiscreteGeometry::circle_grid(128, &DensitySpec::Uniform).unwrap();
        assert!(g.measure().iter().all(|&m| (m - 1.0 / 128.0).abs() < 1e-17));
        let g8 = DiscreteGeometry::circle_grid(8, &DensitySpec::Uniform).unwrap();
        assert_eq!(g8.distance(0, 4), Some(0.5));

        let values = (0..128)
            .map(|k| 1.0 + 0.5 * (2.0 * PI * k as f64 / 128.0).cos())
            .collect();
        let g = DiscreteGeometry::circle_grid(128, &DensitySpec::Table { values }).unwrap();
        let max = g.measure().iter().copied().fold(0.0, f64::max);
        let ratio = max / g.min_measure();
        assert!((ratio - 3.0).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn graph_construction() {
        let g = DiscreteGeometry::weighted_graph(2, &[(0, 1, 1.0)], &[1.0, 1.0]).unwrap();
        assert_eq!(g.measure(), &[0.5, 0.5]);
        assert!(!g.has_distances());
        assert!(DiscreteGeometry::weighted_graph(3, &[(0, 1, 1.0), (1, 2, 2.0)], &[1.0; 3]).is_ok());
        let err = DiscreteGeometry::weighted_graph(4, &[(0, 1, 1.0), (2, 3, 1.0)], &[1.0; 4]);
        assert!(matches!(err, Err(Error::Disconnected { components: 2 })));
    }

    #[test]
    fn edge_weights_symmetric() {
        let bump = DensitySpec::GaussianBump {
            center: vec![0.3, 0.6],
            amplitude: 1.5,
            width: 0.1,
        };
        let g = DiscreteGeometry::torus_grid(16, 2, &bump).unwrap();
        for x in 0..g.n_vertices() {
            for (y, w) in g.edges().neighbors(x) {
                assert_ne!(x, y);
                assert_eq!(w, g.edges().weight(y, x));
            }
        }
    }

    #[test]
    fn torus_distance_exhaustive() {
        for side in [4usize, 8, 16] {
            let g = DiscreteGeometry::torus_grid(side, 2, &DensitySpec::Uniform).unwrap();
            let n = g.n_vertices();
            for a in 0..n {
                assert_eq!(g.distance(a, a), Some(0.0));
                for b in 0..n {
                    assert_eq!(g.distance(a, b), g.distance(b, a));
                    // shifting both points by a lattice vector leaves the distance unchanged
                    let (ai, aj) = ((a % side) as i64, (a / side) as i64);
                    let (bi, bj) = ((b % side) as i64, (b / side) as i64);
                    let a2 = g.grid_index(&[ai + 3, aj - 5]).unwrap();
                    let b2 = g.grid_index(&[bi + 3, bj - 5]).unwrap();
                    let d1 = g.distance(a, b).unwrap();
                    let d2 = g.distance(a2, b2).unwrap();
                    assert!((d1 - d2).abs() < 1e-15);
                }
            }
            // triangle inequality on a sample of triples
            for a in (0..n).step_by(5) {
                for b in (0..n).step_by(7) {
                    for c in (0..n).step_by(11) {
                        let ab = g.distance(a, b).unwrap();
                        let bc = g.distance(b, c).unwrap();
                        let ac = g.distance(a, c).unwrap();
                        assert!(ac <= ab + bc + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn ball_volume_scaling() {
        let g = DiscreteGeometry::torus_grid(64, 2, &DensitySpec::Uniform).unwrap();
        let dx = 1.0 / 64.0;
        for r in [4.0 * dx, 8.0 * dx, 0.125, 0.25] {
            for x in [0, 100, 2080] {
                let ratio = g.ball_measure(x, r).unwrap() / (r * r);
                assert!((1.0..=4.0 * PI).contains(&ratio), "{ratio}");
            }
        }
    }

    #[test]
    fn seeded_disk_volume() {
        let g = DiscreteGeometry::torus_grid(64, 2, &DensitySpec::Uniform).unwrap();
        let disk = ShapeSpec::Disk {
            center: vec![0.5, 0.5],
            radius: 0.2,
            phase: 1,
        };
        let f = seed_partition(&g, &[disk], 2).unwrap();
        assert!(f.is_crisp());
        let v = f.volumes(g.measure());
        // cell-counting oracle: lattice points inside the disk
        let mut count = 0;
        for i in -13i64..=13 {
            for j in -13i64..=13 {
                if ((i * i + j * j) as f64) <= (0.2f64 * 64.0).powi(2) {
                    count += 1;
                }
            }
        }
        assert!((v[1] - count as f64 / 4096.0).abs() < 1e-15);
        assert!((v[1] - PI * 0.04).abs() < 0.04);
        assert!((v[0] + v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stripe_and_voronoi() {
        let g = DiscreteGeometry::torus_grid(64, 2, &DensitySpec::Uniform).unwrap();
        let all = ShapeSpec::Stripe {
            axis: 0,
            lo: 0.0,
            hi: 1.0,
            phase: 1,
        };
        let f = seed_partition(&g, &[all], 2).unwrap();
        assert_eq!(f.volumes(g.measure()), vec![0.0, 1.0]);

        let vor = ShapeSpec::Voronoi {
            seed_points: vec![vec![0.1, 0.1], vec![0.5, 0.6], vec![0.8, 0.3]],
        };
        let f = seed_partition(&g, &[vor], 3).unwrap();
        let v = f.volumes(g.measure());
        assert!(v.iter().all(|&x| x > 0.0));
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn overwrite_order() {
        let g = DiscreteGeometry::torus_grid(16, 2, &DensitySpec::Uniform).unwrap();
        let big = ShapeSpec::Disk {
            center: vec![0.5, 0.5],
            radius: 0.3,
            phase: 1,
        };
        let small = ShapeSpec::Disk {
            center: vec![0.5, 0.5],
            radius: 0.1,
            phase: 2,
        };
        let f = seed_partition(&g, &[big, small], 3).unwrap();
        let c = g.grid_index(&[8, 8]).unwrap();
        assert_eq!(f.get(2, c), 1.0);
        let bad = ShapeSpec::Disk {
            center: vec![0.5, 0.5],
            radius: 0.3,
            phase: 3,
        };
        assert!(seed_partition(&g, &[bad], 3).is_err());
    }

    #[test]
    fn fractional_field_checks() {
        assert!(PhaseField::from_phases(vec![vec![0.3, 1.0], vec![0.7, 0.0]]).is_ok());
        assert!(PhaseField::from_phases(vec![vec![0.3, 1.0], vec![0.6, 0.0]]).is_err());
        assert!(PhaseField::from_phases(vec![vec![1.2, 1.0], vec![-0.2, 0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn labels_are_partitions(labels in proptest::collection::vec(0usize..4, 1..200)) {
            let f = PhaseField::from_labels(&labels, 4).unwrap();
            prop_assert!(f.partition_error() <= PARTITION_TOL);
            prop_assert_eq!(f.labels(), labels);
        }
    }
}
