//! Discrete-phase single-linkage clustering of the current point set.
//!
//! Phase `t` merges clusters closer than `2 alpha^(t+1)`. Starting from
//! singletons, the partition after phase `t` is exactly the set of connected
//! components of the graph whose edges are the pairs at distance below that
//! threshold, so the whole ladder is swept off a minimum spanning tree. A
//! vertex's rank is the last phase in which it is the smallest index of its
//! cluster; the root's rank is infinite.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{OnlineMetric, PointId};
use crate::scalar::{two_alpha_pow, Scalar};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("points {a} and {b} are at distance {distance}, below the 2*alpha floor")]
    MinDistanceViolation { a: PointId, b: PointId, distance: f64 },
    #[error("alpha must exceed 1, got {0}")]
    InvalidAlpha(f64),
    #[error("round {round} exceeds the {points} points of the metric")]
    RoundOutOfRange { round: PointId, points: usize },
    #[error("unknown point {0}")]
    UnknownPoint(PointId),
}

/// A natural number, or infinity (reserved for the root).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rank {
    Finite(u32),
    Infinite,
}

impl Rank {
    pub fn finite(self) -> Option<u32> {
        match self {
            Rank::Finite(r) => Some(r),
            Rank::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Rank::Infinite)
    }

    /// `self >= value` with infinity above everything.
    pub fn at_least(self, value: u64) -> bool {
        match self {
            Rank::Finite(r) => u64::from(r) >= value,
            Rank::Infinite => true,
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Finite(r) => write!(f, "{r}"),
            Rank::Infinite => f.write_str("inf"),
        }
    }
}

/// Partition of `[i]` after some phase, stored as a per-point leader label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseClustering {
    pub phase: u32,
    /// `labels[v]` is the least index in `v`'s cluster.
    pub labels: Vec<PointId>,
}

impl PhaseClustering {
    pub fn singletons(points: usize) -> Self {
        Self { phase: 0, labels: (0..points).collect() }
    }

    pub fn leader_of(&self, v: PointId) -> PointId {
        self.labels[v]
    }

    pub fn same_part(&self, a: PointId, b: PointId) -> bool {
        self.labels[a] == self.labels[b]
    }

    pub fn part_count(&self) -> usize {
        self.labels.iter().enumerate().filter(|(v, l)| v == *l).count()
    }

    /// Parts ordered by leader, members ascending.
    pub fn parts(&self) -> Vec<Vec<PointId>> {
        let mut parts: Vec<Vec<PointId>> = Vec::new();
        let mut slot = vec![usize::MAX; self.labels.len()];
        for (v, &l) in self.labels.iter().enumerate() {
            if slot[l] == usize::MAX {
                slot[l] = parts.len();
                parts.push(Vec::new());
            }
            parts[slot[l]].push(v);
        }
        parts
    }

    pub fn part_of(&self, v: PointId) -> Vec<PointId> {
        let l = self.labels[v];
        (0..self.labels.len()).filter(|&w| self.labels[w] == l).collect()
    }
}

/// One phase of merging: join parts closer than `threshold` until none remain.
///
/// Parts are closed under the "some merge sequence joins them" relation, so
/// the result does not depend on merge order.
pub fn merge_phase<S: Scalar>(prev: &PhaseClustering, m: &OnlineMetric<S>, threshold: &S) -> PhaseClustering {
    let n = prev.labels.len();
    let mut uf = UnionFind::new(n);
    for (v, &l) in prev.labels.iter().enumerate() {
        uf.union(v, l);
    }
    // set distance is a min over point pairs, so one pass over pairs reaches the fixed point
    for a in 0..n {
        for b in 0..a {
            if m.d(a, b) < threshold {
                uf.union(a, b);
            }
        }
    }
    PhaseClustering { phase: prev.phase + 1, labels: uf.labels() }
}

/// Clustering run on `[round]`: the full phase ladder plus ranks.
#[derive(Clone, Debug)]
pub struct ClusterHistory {
    pub round: PointId,
    /// `phases[t]` is the partition after phase `t`; the last one is a single cluster.
    pub phases: Vec<PhaseClustering>,
    pub ranks: Vec<Rank>,
}

impl ClusterHistory {
    pub fn points(&self) -> usize {
        self.round + 1
    }

    /// Partition after phase `t`; phases past the end are the single final cluster.
    pub fn at(&self, t: usize) -> &PhaseClustering {
        &self.phases[t.min(self.phases.len() - 1)]
    }

    pub fn rank_of(&self, v: PointId) -> Result<Rank, ClusterError> {
        self.ranks.get(v).copied().ok_or(ClusterError::UnknownPoint(v))
    }

    /// Rank of the newest vertex in its own round, i.e. its initial rank.
    pub fn init_of_newest(&self) -> Rank {
        self.ranks[self.round]
    }
}

/// Run the clustering procedure on points `0..=round` of `m`.
pub fn run_clustering<S: Scalar>(m: &OnlineMetric<S>, round: PointId, alpha: &S) -> Result<ClusterHistory, ClusterError> {
    if *alpha <= S::one() {
        return Err(ClusterError::InvalidAlpha(alpha.lossy_f64()));
    }
    let n = round + 1;
    if n > m.len() {
        return Err(ClusterError::RoundOutOfRange { round, points: m.len() });
    }
    let mst = prim_edges(m, n);
    if let Some((a, b, d)) = mst.first() {
        if *d < two_alpha_pow(alpha, 1) {
            return Err(ClusterError::MinDistanceViolation { a: *a, b: *b, distance: d.lossy_f64() });
        }
    }

    let mut phases = vec![PhaseClustering::singletons(n)];
    let mut uf = UnionFind::new(n);
    let mut next = 0;
    let mut t: u32 = 0;
    while uf.set_count() > 1 {
        t += 1;
        let threshold = two_alpha_pow(alpha, u64::from(t) + 1);
        while next < mst.len() && mst[next].2 < threshold {
            uf.union(mst[next].0, mst[next].1);
            next += 1;
        }
        phases.push(PhaseClustering { phase: t, labels: uf.labels() });
    }

    let mut ranks = vec![Rank::Infinite; n];
    for (v, rank) in ranks.iter_mut().enumerate().skip(1) {
        let last = phases.iter().take_while(|p| p.labels[v] == v).count();
        *rank = Rank::Finite(last as u32 - 1);
    }
    Ok(ClusterHistory { round, phases, ranks })
}

/// MST edges of the first `n` points, sorted by length then endpoints.
pub(crate) fn prim_edges<S: Scalar>(m: &OnlineMetric<S>, n: usize) -> Vec<(PointId, PointId, S)> {
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n <= 1 {
        return edges;
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<(S, PointId)>> = vec![None; n];
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = m.d(current, v);
            if best[v].as_ref().is_none_or(|(bd, _)| d < bd) {
                best[v] = Some((d.clone(), current));
            }
        }
        let mut pick: Option<PointId> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let better = match pick {
                None => true,
                Some(p) => best[v].as_ref().unwrap().0 < best[p].as_ref().unwrap().0,
            };
            if better {
                pick = Some(v);
            }
        }
        let v = pick.expect("a vertex remains outside the tree");
        let (d, parent) = best[v].clone().expect("reachable");
        in_tree[v] = true;
        edges.push((parent.min(v), parent.max(v), d));
        current = v;
    }
    edges.sort_by(|x, y| x.2.partial_cmp(&y.2).expect("comparable lengths").then((x.0, x.1).cmp(&(y.0, y.1))));
    edges
}

/// A structural law of the clustering that failed to hold between two rounds.
#[derive(Clone, Debug, PartialEq)]
pub enum LawViolation {
    RankNotMonotone { vertex: PointId, previous: Rank, current: Rank },
    InitWindow { vertex: PointId, rank: Rank, distance: f64 },
    Refinement { phase: usize, vertex: PointId },
    DelayedMerge { phase: usize, a: PointId, b: PointId },
}

impl fmt::Display for LawViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawViolation::RankNotMonotone { vertex, previous, current } => {
                write!(f, "rank of {vertex} went from {previous} to {current}")
            }
            LawViolation::InitWindow { vertex, rank, distance } => {
                write!(f, "vertex {vertex} has initial rank {rank} but nearest distance {distance}")
            }
            LawViolation::Refinement { phase, vertex } => {
                write!(f, "phase {phase}: part of {vertex} is not built from previous-round parts")
            }
            LawViolation::DelayedMerge { phase, a, b } => {
                write!(f, "phase {phase}: {a} and {b} merged more than one phase early")
            }
        }
    }
}

/// `rank_i(j) <= rank_{i-1}(j) <= rank_i(j) + 1` for every `j` in `[i-1]`.
pub fn check_rank_monotone(prev: &ClusterHistory, cur: &ClusterHistory) -> Vec<LawViolation> {
    let mut out = Vec::new();
    for j in 1..prev.points() {
        let (p, c) = (prev.ranks[j], cur.ranks[j]);
        let ok = match (p.finite(), c.finite()) {
            (Some(p), Some(c)) => c <= p && p <= c + 1,
            _ => false,
        };
        if !ok {
            out.push(LawViolation::RankNotMonotone { vertex: j, previous: p, current: c });
        }
    }
    out
}

/// Initial rank `r` of the newest vertex holds iff its distance to the
/// earlier points lies in `[2 alpha^(r+1), 2 alpha^(r+2))`.
pub fn check_init_window<S: Scalar>(cur: &ClusterHistory, m: &OnlineMetric<S>, alpha: &S) -> Vec<LawViolation> {
    let i = cur.round;
    if i == 0 {
        return Vec::new();
    }
    let rank = cur.ranks[i];
    let (_, d) = m.nearest_predecessor(i).expect("round >= 1 has predecessors");
    let ok = match rank.finite() {
        Some(r) => {
            let lo = two_alpha_pow(alpha, u64::from(r) + 1);
            let hi = two_alpha_pow(alpha, u64::from(r) + 2);
            lo <= d && d < hi
        }
        None => false,
    };
    if ok {
        Vec::new()
    } else {
        vec![LawViolation::InitWindow { vertex: i, rank, distance: d.lossy_f64() }]
    }
}

/// Every part of `C_i(t)` avoiding `i` is a part of `C_{i-1}(t)`; the part
/// holding `i` is `{i}` plus whole parts of `C_{i-1}(t)`.
pub fn check_refinement(prev: &ClusterHistory, cur: &ClusterHistory) -> Vec<LawViolation> {
    let mut out = Vec::new();
    let i = cur.round;
    let depth = prev.phases.len().max(cur.phases.len());
    for t in 0..depth {
        let (p, c) = (prev.at(t), cur.at(t));
        let with_new = |v: PointId| c.same_part(v, i);
        'vertex: for v in 0..i {
            for w in 0..i {
                if with_new(v) {
                    // whole previous parts are absorbed
                    if p.same_part(v, w) && !with_new(w) {
                        out.push(LawViolation::Refinement { phase: t, vertex: v });
                        continue 'vertex;
                    }
                } else if !with_new(w) && c.same_part(v, w) != p.same_part(v, w) {
                    out.push(LawViolation::Refinement { phase: t, vertex: v });
                    continue 'vertex;
                }
            }
        }
    }
    out
}

/// Points of `[i-1]` sharing a part of `C_i(t)` share one in `C_{i-1}(t)` or `C_{i-1}(t+1)`.
pub fn check_delayed_merge(prev: &ClusterHistory, cur: &ClusterHistory) -> Vec<LawViolation> {
    let mut out = Vec::new();
    let i = cur.round;
    for t in 0..cur.phases.len() {
        let c = cur.at(t);
        let (p0, p1) = (prev.at(t), prev.at(t + 1));
        for a in 0..i {
            for b in 0..a {
                if c.same_part(a, b) && !p0.same_part(a, b) && !p1.same_part(a, b) {
                    out.push(LawViolation::DelayedMerge { phase: t, a: b, b: a });
                }
            }
        }
    }
    out
}
