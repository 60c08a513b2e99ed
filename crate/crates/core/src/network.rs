//! Electrical and communication graphs.
//!
//! Node numbers in [`EdgeSpec`] and [`CommEdge`] are 1-based, matching the
//! scenario files. Everything stored inside a built topology is 0-based.
//!
//! The machine subtransient reactance sits in series with every line that
//! leaves the machine, so the effective reactance of an edge `{i, k}` is
//! `X_l = X''_di + X_T + X''_dk` and its susceptance is `B_ik = -1 / X_l`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A transmission line between two machines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    /// 1-based node at the `+` end.
    pub positive_end: usize,
    /// 1-based node at the `-` end.
    pub negative_end: usize,
    /// Line reactance `X_T` (p.u.). Zero is allowed: the machine reactances
    /// alone then form the coupling.
    pub x_t: f64,
}

impl EdgeSpec {
    pub fn new(positive_end: usize, negative_end: usize, x_t: f64) -> Self {
        Self { positive_end, negative_end, x_t }
    }
}

/// A weighted undirected communication link between two controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl CommEdge {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Self { from, to, weight }
    }
}

/// Edge after validation: 0-based ends and effective susceptance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub pos: usize,
    pub neg: usize,
    /// `B_l = -1 / (X''_d,pos + X_T + X''_d,neg)`, always negative.
    pub susceptance: f64,
}

fn check_endpoints(n: usize, idx: usize, a: usize, b: usize) -> Result<()> {
    for node in [a, b] {
        if node == 0 || node > n {
            return Err(Error::NodeOutOfRange { edge: idx + 1, node, n });
        }
    }
    if a == b {
        return Err(Error::SelfLoop { edge: idx + 1, node: a });
    }
    Ok(())
}

/// Node-edge incidence matrix; column order follows `edges`.
pub fn build_incidence(n: usize, edges: &[EdgeSpec]) -> Result<DMatrix<f64>> {
    let mut d = DMatrix::zeros(n, edges.len());
    for (l, e) in edges.iter().enumerate() {
        check_endpoints(n, l, e.positive_end, e.negative_end)?;
        d[(e.positive_end - 1, l)] = 1.0;
        d[(e.negative_end - 1, l)] = -1.0;
    }
    Ok(d)
}

fn effective_lines(n: usize, edges: &[EdgeSpec], x_d_dprime: &[f64]) -> Result<Vec<Line>> {
    if x_d_dprime.len() != n {
        return Err(Error::Dimension {
            what: "subtransient reactances",
            expected: n,
            got: x_d_dprime.len(),
        });
    }
    for (i, &x) in x_d_dprime.iter().enumerate() {
        if !(x > 0.0) {
            return Err(Error::NonPositiveReactance {
                what: format!("machine {} X''_d", i + 1),
                value: x,
            });
        }
    }
    edges
        .iter()
        .enumerate()
        .map(|(l, e)| {
            check_endpoints(n, l, e.positive_end, e.negative_end)?;
            if !(e.x_t >= 0.0) || !e.x_t.is_finite() {
                return Err(Error::NonPositiveReactance {
                    what: format!("edge {} X_T", l + 1),
                    value: e.x_t,
                });
            }
            let (i, k) = (e.positive_end - 1, e.negative_end - 1);
            let x_l = x_d_dprime[i] + e.x_t + x_d_dprime[k];
            Ok(Line { pos: i, neg: k, susceptance: -1.0 / x_l })
        })
        .collect()
}

fn susceptance_from_lines(n: usize, lines: &[Line]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    for line in lines {
        b[(line.pos, line.neg)] += line.susceptance;
        b[(line.neg, line.pos)] += line.susceptance;
        b[(line.pos, line.pos)] += line.susceptance;
        b[(line.neg, line.neg)] += line.susceptance;
    }
    b
}

/// Susceptance matrix with `B_ii = sum_{k in N_i} B_ik`. Parallel edges
/// accumulate.
pub fn build_susceptance(n: usize, edges: &[EdgeSpec], x_d_dprime: &[f64]) -> Result<DMatrix<f64>> {
    let lines = effective_lines(n, edges, x_d_dprime)?;
    Ok(susceptance_from_lines(n, &lines))
}

/// 0-based nodes not reachable from node 0.
pub fn unreachable_nodes(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for (a, b) in pairs {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    if n > 0 {
        seen[0] = true;
        queue.push_back(0);
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    (0..n).filter(|&v| !seen[v]).collect()
}

/// The physical network seen from the internal subtransient buses.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    n: usize,
    edges: Vec<EdgeSpec>,
    lines: Vec<Line>,
    incidence: DMatrix<f64>,
    susceptance: DMatrix<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl NetworkTopology {
    pub fn new(n: usize, edges: Vec<EdgeSpec>, x_d_dprime: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("network needs at least one machine".into()));
        }
        let incidence = build_incidence(n, &edges)?;
        let lines = effective_lines(n, &edges, x_d_dprime)?;
        let unreachable = unreachable_nodes(n, lines.iter().map(|l| (l.pos, l.neg)));
        if !unreachable.is_empty() {
            return Err(Error::Disconnected {
                what: "electrical",
                unreachable: unreachable.into_iter().map(|v| v + 1).collect(),
            });
        }
        let susceptance = susceptance_from_lines(n, &lines);
        let mut neighbors = vec![Vec::new(); n];
        for l in &lines {
            if !neighbors[l.pos].contains(&l.neg) {
                neighbors[l.pos].push(l.neg);
            }
            if !neighbors[l.neg].contains(&l.pos) {
                neighbors[l.neg].push(l.pos);
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Self { n, edges, lines, incidence, susceptance, neighbors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges `m`.
    pub fn m(&self) -> usize {
        self.lines.len()
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    pub fn susceptance(&self) -> &DMatrix<f64> {
        &self.susceptance
    }

    /// 0-based neighbour set `N_i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `eta = D^T delta`.
    pub fn edge_angles(&self, delta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.lines.iter().map(|l| delta[l.pos] - delta[l.neg]))
    }

    /// Rotor angles relative to machine 1, reconstructed from edge angles
    /// along a BFS spanning tree. Exact when `eta` lies in the range of `D^T`.
    pub fn relative_angles(&self, eta: &[f64]) -> Vec<f64> {
        let mut delta = vec![0.0; self.n];
        let mut seen = vec![false; self.n];
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.n];
        for (l, line) in self.lines.iter().enumerate() {
            adj[line.pos].push((line.neg, l));
            adj[line.neg].push((line.pos, l));
        }
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(w, l) in &adj[v] {
                if seen[w] {
                    continue;
                }
                seen[w] = true;
                // eta_l = delta_pos - delta_neg
                delta[w] = if self.lines[l].pos == v { delta[v] - eta[l] } else { delta[v] + eta[l] };
                queue.push_back(w);
            }
        }
        delta
    }
}

/// Laplacian of a connected, undirected, positively weighted graph.
#[derive(Debug, Clone)]
pub struct CommGraph {
    edges: Vec<CommEdge>,
    laplacian: DMatrix<f64>,
}

impl CommGraph {
    pub fn edges(&self) -> &[CommEdge] {
        &self.edges
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn n(&self) -> usize {
        self.laplacian.nrows()
    }
}

pub fn build_comm_laplacian(n: usize, edges: &[CommEdge]) -> Result<CommGraph> {
    let mut laplacian = DMatrix::zeros(n, n);
    for (idx, e) in edges.iter().enumerate() {
        check_endpoints(n, idx, e.from, e.to)?;
        if !(e.weight > 0.0) || !e.weight.is_finite() {
            return Err(Error::NonPositiveWeight {
                what: format!("comm edge {}", idx + 1),
                value: e.weight,
            });
        }
        let (a, b) = (e.from - 1, e.to - 1);
        laplacian[(a, a)] += e.weight;
        laplacian[(b, b)] += e.weight;
        laplacian[(a, b)] -= e.weight;
        laplacian[(b, a)] -= e.weight;
    }
    let unreachable = unreachable_nodes(n, edges.iter().map(|e| (e.from - 1, e.to - 1)));
    if !unreachable.is_empty() {
        return Err(Error::Disconnected {
            what: "communication",
            unreachable: unreachable.into_iter().map(|v| v + 1).collect(),
        });
    }
    Ok(CommGraph { edges: edges.to_vec(), laplacian })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn incidence_single_edge() {
        let d = build_incidence(2, &[EdgeSpec::new(1, 2, 0.1)]).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 1, &[1.0, -1.0]));
    }

    #[test]
    fn incidence_path() {
        let d = build_incidence(3, &[EdgeSpec::new(1, 2, 0.1), EdgeSpec::new(2, 3, 0.1)]).unwrap();
        let want = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 1.0, 0.0, -1.0]);
        assert_eq!(d, want);
    }

    #[test]
    fn incidence_rejects_bad_edges() {
        assert_eq!(
            build_incidence(3, &[EdgeSpec::new(1, 1, 0.1)]),
            Err(Error::SelfLoop { edge: 1, node: 1 })
        );
        assert!(matches!(
            build_incidence(3, &[EdgeSpec::new(1, 4, 0.1)]),
            Err(Error::NodeOutOfRange { node: 4, .. })
        ));
        assert!(matches!(
            build_incidence(3, &[EdgeSpec::new(0, 2, 0.1)]),
            Err(Error::NodeOutOfRange { node: 0, .. })
        ));
    }

    #[test]
    fn susceptance_single_edge() {
        let b = build_susceptance(2, &[EdgeSpec::new(1, 2, 1.5)], &[0.25, 0.25]).unwrap();
        assert_eq!(b[(0, 1)], -0.5);
        assert_eq!(b[(1, 0)], -0.5);
        assert_eq!(b[(0, 0)], -0.5);
        assert_eq!(b[(1, 1)], -0.5);
    }

    #[test]
    fn susceptance_zero_line_reactance() {
        let b = build_susceptance(2, &[EdgeSpec::new(1, 2, 0.0)], &[0.25, 0.5]).unwrap();
        assert_eq!(b[(0, 1)], -1.0 / 0.75);
    }

    #[test]
    fn susceptance_unconnected_pair_is_zero() {
        let edges = [EdgeSpec::new(1, 2, 0.3), EdgeSpec::new(2, 3, 0.3)];
        let b = build_susceptance(3, &edges, &[0.2; 3]).unwrap();
        assert_eq!(b[(0, 2)], 0.0);
        assert_eq!(b[(2, 0)], 0.0);
    }

    #[test]
    fn parallel_edges_accumulate() {
        let edges = [EdgeSpec::new(1, 2, 0.5), EdgeSpec::new(2, 1, 0.5)];
        let b = build_susceptance(2, &edges, &[0.25, 0.25]).unwrap();
        assert_eq!(b[(0, 1)], -2.0);
        assert_eq!(b[(0, 0)], -2.0);
    }

    #[test]
    fn susceptance_rejects_nonpositive() {
        assert!(build_susceptance(2, &[EdgeSpec::new(1, 2, 0.5)], &[0.0, 0.25]).is_err());
        assert!(build_susceptance(2, &[EdgeSpec::new(1, 2, -0.5)], &[0.25, 0.25]).is_err());
    }

    #[test]
    fn comm_laplacian_k2() {
        let g = build_comm_laplacian(2, &[CommEdge::new(1, 2, 1.0)]).unwrap();
        assert_eq!(*g.laplacian(), DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn comm_laplacian_path_row_sums() {
        let g = build_comm_laplacian(3, &[CommEdge::new(1, 2, 1.0), CommEdge::new(2, 3, 1.0)]).unwrap();
        for r in 0..3 {
            assert_eq!(g.laplacian().row(r).sum(), 0.0);
        }
    }

    #[test]
    fn comm_laplacian_disconnected() {
        let err = build_comm_laplacian(3, &[CommEdge::new(1, 2, 1.0)]).unwrap_err();
        assert_eq!(err, Error::Disconnected { what: "communication", unreachable: vec![3] });
    }

    #[test]
    fn comm_laplacian_rejects_zero_weight() {
        assert!(build_comm_laplacian(2, &[CommEdge::new(1, 2, 0.0)]).is_err());
    }

    #[test]
    fn topology_rejects_disconnected_grid() {
        let err = NetworkTopology::new(3, vec![EdgeSpec::new(1, 2, 0.1)], &[0.2; 3]).unwrap_err();
        assert!(matches!(err, Error::Disconnected { what: "electrical", .. }));
    }

    #[test]
    fn relative_angles_roundtrip_on_ring() {
        let edges = vec![EdgeSpec::new(1, 2, 0.3), EdgeSpec::new(2, 3, 0.3), EdgeSpec::new(3, 1, 0.3)];
        let topo = NetworkTopology::new(3, edges, &[0.2; 3]).unwrap();
        let delta = [0.7, 0.2, -0.4];
        let eta = topo.edge_angles(&delta);
        let rel = topo.relative_angles(eta.as_slice());
        for i in 0..3 {
            assert!((rel[i] - (delta[i] - delta[0])).abs() < 1e-15);
        }
    }

    fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..=12).prop_flat_map(|n| {
            let pair = (1..=n, 1..=n).prop_filter("no self loops", |(a, b)| a != b);
            (Just(n), prop::collection::vec(pair, 0..2 * n))
        })
    }

    fn brute_force_connected(n: usize, pairs: &[(usize, usize)]) -> bool {
        let mut reach = vec![vec![false; n]; n];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in pairs {
            reach[a - 1][b - 1] = true;
            reach[b - 1][a - 1] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        reach[0].iter().all(|&r| r)
    }

    proptest! {
        #[test]
        fn incidence_columns_sum_to_zero((n, pairs) in random_graph()) {
            let edges: Vec<_> = pairs.iter().map(|&(a, b)| EdgeSpec::new(a, b, 0.1)).collect();
            let d = build_incidence(n, &edges).unwrap();
            let col_sums = d.transpose() * DVector::from_element(n, 1.0);
            prop_assert!(col_sums.iter().all(|&s| s == 0.0));
            for c in d.column_iter() {
                prop_assert_eq!(c.iter().filter(|&&v| v == 1.0).count(), 1);
                prop_assert_eq!(c.iter().filter(|&&v| v == -1.0).count(), 1);
            }
        }

        #[test]
        fn connectivity_matches_brute_force((n, pairs) in random_graph()) {
            let edges: Vec<_> = pairs.iter().map(|&(a, b)| CommEdge::new(a, b, 1.0)).collect();
            let built = build_comm_laplacian(n, &edges);
            prop_assert_eq!(built.is_ok(), brute_force_connected(n, &pairs));
        }

        #[test]
        fn susceptance_structure((n, pairs) in random_graph(), x in 0.05f64..1.0) {
            let edges: Vec<_> = pairs.iter().map(|&(a, b)| EdgeSpec::new(a, b, x)).collect();
            let xpp: Vec<f64> = (0..n).map(|i| 0.1 + 0.01 * i as f64).collect();
            let b = build_susceptance(n, &edges, &xpp).unwrap();
            prop_assert_eq!(&b, &b.transpose());
            for i in 0..n {
                let off: f64 = (0..n).filter(|&k| k != i).map(|k| b[(i, k)]).sum();
                prop_assert!((b[(i, i)] - off).abs() <= 1e-15 * off.abs().max(1.0));
                for k in 0..n {
                    if k != i { prop_assert!(b[(i, k)] <= 0.0); }
                }
            }
        }

        #[test]
        fn laplacian_nullspace_and_psd((n, pairs) in random_graph(), w in 0.1f64..5.0) {
            let edges: Vec<_> = pairs.iter().map(|&(a, b)| CommEdge::new(a, b, w)).collect();
            if let Ok(g) = build_comm_laplacian(n, &edges) {
                let l = g.laplacian();
                prop_assert_eq!(l, &l.transpose());
                let ones = DVector::from_element(n, 1.0);
                let scale = l.diagonal().amax();
                prop_assert!((l * ones).iter().all(|&v| v.abs() <= 1e-14 * scale));
                let eig = l.clone().symmetric_eigen().eigenvalues;
                let mut ev: Vec<f64> = eig.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                prop_assert!(ev[0] >= -1e-12);
                prop_assert!(ev[1] > 1e-12);
            }
        }
    }
}
