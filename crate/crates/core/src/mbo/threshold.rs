use serde::{Deserialize, Serialize};

use crate::geometry::PhaseField;

/// Comparison values closer than this to the maximum count as tied.
pub const TIE_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Tied vertices carry fractional memberships; the multiplier solver
    /// chooses them to hit the target volumes, plain thresholding splits evenly.
    #[default]
    FractionalSplit,
    /// Tied vertices go to the lowest phase index.
    LowestIndex,
}

/// Phases attaining `max_j (φ_j(x) − m_j)` within [`TIE_EPS`], in index order.
pub(crate) fn winners(phi: &[Vec<f64>], m: &[f64], x: usize, out: &mut Vec<usize>) {
    out.clear();
    let mut best = f64::NEG_INFINITY;
    for (j, p) in phi.iter().enumerate() {
        best = best.max(p[x] - m[j]);
    }
    for (j, p) in phi.iter().enumerate() {
        if p[x] - m[j] >= best - TIE_EPS {
            out.push(j);
        }
    }
}

/// Assigns every vertex to `argmax_j (φ_j(x) − m_j)`.
pub fn threshold(phi: &[Vec<f64>], m: &[f64], tie_rule: TieRule) -> PhaseField {
    let p = phi.len();
    let n = phi.first().map_or(0, Vec::len);
    assert_eq!(m.len(), p, "multiplier length must match the phase count");
    let mut values = vec![0.0; p * n];
    let mut tied = Vec::with_capacity(p);
    for x in 0..n {
        winners(phi, m, x, &mut tied);
        match tie_rule {
            TieRule::LowestIndex => values[tied[0] * n + x] = 1.0,
            TieRule::FractionalSplit => {
                let share = 1.0 / tied.len() as f64;
                for &j in &tied {
                    values[j * n + x] = share;
                }
            }
        }
    }
    PhaseField::from_raw(p, n, values)
}

/// Thresholds with ties resolved to meet `targets` as closely as possible.
///
/// Tied vertices are grouped by their tie set; a max-flow from groups to
/// phases with capacities `targets − crisp volumes` decides how much of each
/// group every phase receives, and the share is spread uniformly over the
/// group. Mass left over (infeasible or inactive demands) is split evenly.
pub(crate) fn threshold_to_targets(
    phi: &[Vec<f64>],
    m: &[f64],
    measure: &[f64],
    targets: &[f64],
    active: &[bool],
) -> PhaseField {
    let p = phi.len();
    let n = measure.len();
    let mut values = vec![0.0; p * n];
    let mut crisp = vec![0.0; p];
    let mut groups: Vec<(Vec<usize>, Vec<usize>, f64)> = Vec::new();
    let mut tied = Vec::with_capacity(p);
    for x in 0..n {
        winners(phi, m, x, &mut tied);
        if tied.len() == 1 {
            values[tied[0] * n + x] = 1.0;
            crisp[tied[0]] += measure[x];
            continue;
        }
        match groups.iter_mut().find(|g| g.0 == tied) {
            Some(g) => {
                g.1.push(x);
                g.2 += measure[x];
            }
            None => groups.push((tied.clone(), vec![x], measure[x])),
        }
    }
    if groups.is_empty() {
        return PhaseField::from_raw(p, n, values);
    }
    let demand: Vec<f64> = (0..p)
        .map(|j| if active[j] { (targets[j] - crisp[j]).max(0.0) } else { 0.0 })
        .collect();
    let sets: Vec<&[usize]> = groups.iter().map(|g| g.0.as_slice()).collect();
    let masses: Vec<f64> = groups.iter().map(|g| g.2).collect();
    let flow = allocate(&sets, &masses, &demand);
    for (gi, (set, members, mass)) in groups.iter().enumerate() {
        let assigned: f64 = set.iter().map(|&j| flow[gi][j]).sum();
        let leftover = (mass - assigned).max(0.0) / set.len() as f64;
        for &j in set {
            let frac = ((flow[gi][j] + leftover) / mass).clamp(0.0, 1.0);
            for &x in members {
                values[j * n + x] = frac;
            }
        }
        // exact partition of unity at every member vertex
        let last = *set.last().unwrap();
        let others: f64 = set[..set.len() - 1]
            .iter()
            .map(|&j| values[j * n + members[0]])
            .sum();
        for &x in members {
            values[last * n + x] = (1.0 - others).max(0.0);
        }
    }
    PhaseField::from_raw(p, n, values)
}

/// Edmonds–Karp on source → group (capacity = mass) → phase (unbounded)
/// → sink (capacity = demand). Returns `flow[group][phase]`.
fn allocate(sets: &[&[usize]], masses: &[f64], demand: &[f64]) -> Vec<Vec<f64>> {
    let g = sets.len();
    let p = demand.len();
    let mut flow = vec![vec![0.0; p]; g];
    let mut group_left: Vec<f64> = masses.to_vec();
    let mut phase_left: Vec<f64> = demand.to_vec();
    let total: f64 = masses.iter().sum();
    let eps = 1e-15 * total.max(f64::MIN_POSITIVE);
    // node ids: groups 0..g, phases g..g+p
    for _ in 0..(4 * (g + p) * (g + p) + 16) {
        let mut prev: Vec<Option<usize>> = vec![None; g + p];
        let mut queue = std::collections::VecDeque::new();
        for (gi, left) in group_left.iter().enumerate() {
            if *left > eps {
                prev[gi] = Some(usize::MAX);
                queue.push_back(gi);
            }
        }
        let mut end = None;
        while let Some(node) = queue.pop_front() {
            if node < g {
                for &j in sets[node] {
                    if prev[g + j].is_none() {
                        prev[g + j] = Some(node);
                        if phase_left[j] > eps {
                            end = Some(j);
                            break;
                        }
                        queue.push_back(g + j);
                    }
                }
                if end.is_some() {
                    break;
                }
            } else {
                // backward residual edges: phase → group carrying flow
                let j = node - g;
                for gi in 0..g {
                    if prev[gi].is_none() && flow[gi][j] > eps {
                        prev[gi] = Some(node);
                        queue.push_back(gi);
                    }
                }
            }
        }
        let Some(j_end) = end else { break };
        // trace the path and its bottleneck
        let mut path = Vec::new();
        let mut node = g + j_end;
        while let Some(pr) = prev[node] {
            if pr == usize::MAX {
                break;
            }
            path.push((pr, node));
            node = pr;
        }
        let start_group = node;
        let mut bottleneck = group_left[start_group].min(phase_left[j_end]);
        for &(from, to) in &path {
            if from >= g {
                // backward edge phase → group reduces flow[to][from − g]
                bottleneck = bottleneck.min(flow[to][from - g]);
            }
        }
        if bottleneck <= eps {
            break;
        }
        group_left[start_group] -= bottleneck;
        phase_left[j_end] -= bottleneck;
        for &(from, to) in &path {
            if from < g {
                flow[from][to - g] += bottleneck;
            } else {
                flow[to][from - g] -= bottleneck;
            }
        }
    }
    flow
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_vertex(phi: [f64; 3]) -> Vec<Vec<f64>> {
        phi.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn plain_argmax() {
        let phi = one_vertex([0.5, 0.3, 0.2]);
        let f = threshold(&phi, &[0.0; 3], TieRule::FractionalSplit);
        assert_eq!(f.labels(), vec![0]);
        assert!(f.is_crisp());
    }

    #[test]
    fn multiplier_shifts_the_winner() {
        let phi = one_vertex([0.5, 0.3, 0.2]);
        let f = threshold(&phi, &[0.3, 0.0, -0.3], TieRule::LowestIndex);
        assert_eq!(f.labels(), vec![2]);
    }

    #[test]
    fn ties() {
        let phi = vec![vec![0.5, 0.7], vec![0.5, 0.3]];
        let frac = threshold(&phi, &[0.0, 0.0], TieRule::FractionalSplit);
        assert_eq!(frac.get(0, 0), 0.5);
        assert_eq!(frac.get(1, 0), 0.5);
        let low = threshold(&phi, &[0.0, 0.0], TieRule::LowestIndex);
        assert_eq!(low.get(0, 0), 1.0);
        assert!(low.is_crisp());
    }

    #[test]
    fn tie_split_hits_targets() {
        // vertex 0 tied between phases 0 and 1; phase 0 needs 0.3 of its 0.5 mass
        let phi = vec![vec![0.5, 0.9, 0.1], vec![0.5, 0.1, 0.9]];
        let mu = [0.5, 0.25, 0.25];
        let f = threshold_to_targets(&phi, &[0.0, 0.0], &mu, &[0.55, 0.45], &[true, true]);
        let v = f.volumes(&mu);
        assert!((v[0] - 0.55).abs() < 1e-15);
        assert!((f.get(0, 0) - 0.6).abs() < 1e-15);
        assert!(f.partition_error() < 1e-15);
    }

    #[test]
    fn flow_through_chained_ties() {
        // group A ties phases {0,1}, group B ties {1,2}; phase 2 needs all of B,
        // so phase 1 must be fed from A.
        let sets: Vec<&[usize]> = vec![&[0, 1], &[1, 2]];
        let flow = allocate(&sets, &[1.0, 1.0], &[0.5, 0.5, 1.0]);
        assert!((flow[0][0] - 0.5).abs() < 1e-15);
        assert!((flow[0][1] - 0.5).abs() < 1e-15);
        assert!((flow[1][2] - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn constant_shift_is_invisible(
            vals in proptest::collection::vec(0.0f64..1.0, 12),
            m in proptest::collection::vec(-0.3f64..0.3, 3),
            c in -1.0f64..1.0,
        ) {
            let phi: Vec<Vec<f64>> = vals.chunks(4).map(|c| c.to_vec()).collect();
            let shifted: Vec<f64> = m.iter().map(|v| v + c).collect();
            // compare on dyadic values so the shift is exact
            let round = |v: &[f64]| v.iter().map(|x| (x * 1024.0).round() / 1024.0).collect::<Vec<_>>();
            let phi: Vec<Vec<f64>> = phi.iter().map(|p| round(p)).collect();
            let m = round(&m);
            let shifted = round(&shifted.iter().map(|v| v - c + (c * 1024.0).round() / 1024.0).collect::<Vec<_>>());
            let a = threshold(&phi, &m, TieRule::LowestIndex);
            let b = threshold(&phi, &shifted, TieRule::LowestIndex);
            prop_assert_eq!(a, b);
        }
    }
}
