//! Spanning trees whose edges carry explicit levels.
//!
//! A tree is valid for a value function `b` (with step `s`, 1 for the unit
//! variant and `K` for the k-step variant) when
//!
//! 1. every component of the edges at level `<= l` has a head (largest `b`,
//!    ties to the lowest id) with `b(head) >= l * s`, and
//! 2. every level-`l` edge is no longer than `2 alpha^(l*s + 1)`.
//!
//! [`LeveledTree::attach_new_vertex`] and [`LeveledTree::decrement_head`]
//! keep a tree valid while `b` gains a coordinate or loses one step on one
//! coordinate, touching at most two edges each time.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::clustering::Rank;
use crate::metric::{MetricError, OnlineMetric, PointId};
use crate::rank_state::Variant;
use crate::scalar::{two_alpha_pow, Exact, Scalar};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("no vertex outside the component of {head} within {bound} (closest {closest:?})")]
    NoReplacementEdge { head: PointId, bound: f64, closest: Option<f64> },
    #[error("tree no longer valid: {0}")]
    ValidityBroken(String),
    #[error("vertex {got} cannot be attached; next vertex is {expected}")]
    OutOfOrder { expected: PointId, got: PointId },
    #[error("vertex {0} has infinite value and cannot be attached or decremented")]
    InfiniteValue(PointId),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeveledEdge<S> {
    pub u: PointId,
    pub v: PointId,
    pub length: S,
    pub level: u32,
    /// Greedy edge this one descends from (used by the swap-bound accounting).
    pub lineage: usize,
}

impl<S> LeveledEdge<S> {
    pub fn new(a: PointId, b: PointId, length: S, level: u32, lineage: usize) -> Self {
        Self { u: a.min(b), v: a.max(b), length, level, lineage }
    }

    pub fn endpoints(&self) -> (PointId, PointId) {
        (self.u, self.v)
    }
}

/// Edges added and removed by one operation (or one round).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwapTrace<S> {
    pub added: Vec<LeveledEdge<S>>,
    pub removed: Vec<LeveledEdge<S>>,
}

impl<S> Default for SwapTrace<S> {
    fn default() -> Self {
        Self { added: Vec::new(), removed: Vec::new() }
    }
}

impl<S: Clone> SwapTrace<S> {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }

    pub fn extend(&mut self, other: SwapTrace<S>) {
        self.added.extend(other.added);
        self.removed.extend(other.removed);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidityViolation {
    NotSpanning(String),
    LengthMismatch { u: PointId, v: PointId },
    ZeroLevel { u: PointId, v: PointId },
    /// Condition 2.
    EdgeTooLong { u: PointId, v: PointId, level: u32, length: f64 },
    /// Condition 1.
    WeakHead { level: u32, head: PointId, value: Rank },
}

impl fmt::Display for ValidityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidityViolation::NotSpanning(why) => write!(f, "not a spanning tree: {why}"),
            ValidityViolation::LengthMismatch { u, v } => write!(f, "edge ({u},{v}) length disagrees with the metric"),
            ValidityViolation::ZeroLevel { u, v } => write!(f, "edge ({u},{v}) has level 0"),
            ValidityViolation::EdgeTooLong { u, v, level, length } => {
                write!(f, "edge ({u},{v}) of length {length} is too long for level {level}")
            }
            ValidityViolation::WeakHead { level, head, value } => {
                write!(f, "level {level} component headed by {head} with value {value}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidityReport {
    pub violations: Vec<ValidityViolation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct LeveledTree<S> {
    vertex_count: usize,
    edges: Vec<LeveledEdge<S>>,
    variant: Variant,
}

impl<S: Scalar> LeveledTree<S> {
    /// Tree on the root alone.
    pub fn root(variant: Variant) -> Self {
        Self { vertex_count: 1, edges: Vec::new(), variant }
    }

    pub fn from_edges(vertex_count: usize, edges: Vec<LeveledEdge<S>>, variant: Variant) -> Self {
        Self { vertex_count, edges, variant }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[LeveledEdge<S>] {
        &self.edges
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn cost(&self) -> S {
        self.edges.iter().fold(S::zero(), |acc, e| acc + e.length.clone())
    }

    pub fn cost_exact(&self) -> Exact {
        self.edges.iter().map(|e| e.length.to_exact()).sum()
    }

    fn level_for(&self, value: u32) -> u32 {
        value / self.variant.step() + 1
    }

    fn level_bound(&self, level: u32, alpha: &S) -> S {
        two_alpha_pow(alpha, u64::from(level) * u64::from(self.variant.step()) + 1)
    }

    /// Connect the next vertex to its nearest predecessor at level
    /// `floor(init / step) + 1`.
    pub fn attach_new_vertex(
        &mut self,
        m: &OnlineMetric<S>,
        new: PointId,
        init_rank: Rank,
        alpha: &S,
    ) -> Result<SwapTrace<S>, TreeError> {
        if new != self.vertex_count {
            return Err(TreeError::OutOfOrder { expected: self.vertex_count, got: new });
        }
        let init = init_rank.finite().ok_or(TreeError::InfiniteValue(new))?;
        let (target, length) = m.nearest_predecessor(new)?;
        let level = self.level_for(init);
        let bound = self.level_bound(level, alpha);
        if length > bound {
            return Err(TreeError::ValidityBroken(format!(
                "attach edge ({target},{new}) of length {length} exceeds level-{level} bound {bound}"
            )));
        }
        let edge = LeveledEdge::new(target, new, length, level, new);
        self.edges.push(edge.clone());
        self.vertex_count += 1;
        Ok(SwapTrace { added: vec![edge], removed: Vec::new() })
    }

    /// Attach the next vertex to its nearest predecessor without level bookkeeping.
    pub fn attach_greedy(&mut self, m: &OnlineMetric<S>, new: PointId) -> Result<SwapTrace<S>, TreeError> {
        if new != self.vertex_count {
            return Err(TreeError::OutOfOrder { expected: self.vertex_count, got: new });
        }
        let (target, length) = m.nearest_predecessor(new)?;
        let edge = LeveledEdge::new(target, new, length, 0, new);
        self.edges.push(edge.clone());
        self.vertex_count += 1;
        Ok(SwapTrace { added: vec![edge], removed: Vec::new() })
    }

    /// Restore validity after `b(j_star)` dropped by one step; `b` is the new function.
    ///
    /// With `l*` the first level where `j_star` can no longer head a
    /// component, the component `C` of `j_star` at level `<= l*` is
    /// reconnected to its nearest outside vertex at level `l*`, and the
    /// highest-level edge on the cycle this closes is dropped.
    pub fn decrement_head(
        &mut self,
        m: &OnlineMetric<S>,
        j_star: PointId,
        b: &[Rank],
        alpha: &S,
    ) -> Result<SwapTrace<S>, TreeError> {
        let value = b[j_star].finite().ok_or(TreeError::InfiniteValue(j_star))?;
        let l_star = self.level_for(value);
        let needed = u64::from(l_star) * u64::from(self.variant.step());

        let in_comp = self.component_mask(j_star, l_star);
        let head_ok = (0..self.vertex_count).filter(|&v| in_comp[v]).any(|v| b[v].at_least(needed));
        if head_ok {
            return Ok(SwapTrace::default());
        }

        let bound = self.level_bound(l_star, alpha);
        let mut best: Option<(S, PointId, PointId)> = None;
        for outside in (0..self.vertex_count).filter(|&v| !in_comp[v]) {
            for inside in (0..self.vertex_count).filter(|&v| in_comp[v]) {
                let d = m.d(outside, inside);
                let better = match &best {
                    None => true,
                    Some((bd, bo, bi)) => d < bd || (d == bd && (outside, inside) < (*bo, *bi)),
                };
                if better {
                    best = Some((d.clone(), outside, inside));
                }
            }
        }
        let Some((length, outside, inside)) = best.clone().filter(|(d, _, _)| *d <= bound) else {
            return Err(TreeError::NoReplacementEdge {
                head: j_star,
                bound: bound.lossy_f64(),
                closest: best.map(|(d, _, _)| d.lossy_f64()),
            });
        };

        let path = self.path_edges(outside, inside);
        let drop_idx = path
            .into_iter()
            .max_by(|&x, &y| {
                let (ex, ey) = (&self.edges[x], &self.edges[y]);
                ex.level
                    .cmp(&ey.level)
                    .then(ex.length.partial_cmp(&ey.length).expect("comparable lengths"))
                    .then(ey.endpoints().cmp(&ex.endpoints()))
            })
            .expect("endpoints lie in different components");
        if self.edges[drop_idx].level <= l_star {
            return Err(TreeError::ValidityBroken(format!(
                "cycle through new level-{l_star} edge has no higher-level edge"
            )));
        }
        let removed = self.edges.remove(drop_idx);
        let added = LeveledEdge::new(outside, inside, length, l_star, removed.lineage);
        self.edges.push(added.clone());
        Ok(SwapTrace { added: vec![added], removed: vec![removed] })
    }

    /// Membership mask of `v`'s component among edges with level `<= level`.
    fn component_mask(&self, v: PointId, level: u32) -> Vec<bool> {
        let adj = self.adjacency(|e| e.level <= level);
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(x) = stack.pop() {
            for &(y, _) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }

    fn adjacency(&self, keep: impl Fn(&LeveledEdge<S>) -> bool) -> Vec<Vec<(PointId, usize)>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for (idx, e) in self.edges.iter().enumerate() {
            if keep(e) {
                adj[e.u].push((e.v, idx));
                adj[e.v].push((e.u, idx));
            }
        }
        adj
    }

    /// Edge indices on the tree path from `a` to `b`.
    pub fn path_edges(&self, a: PointId, b: PointId) -> Vec<usize> {
        let adj = self.adjacency(|_| true);
        let mut via: Vec<Option<(PointId, usize)>> = vec![None; self.vertex_count];
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![a];
        seen[a] = true;
        while let Some(x) = stack.pop() {
            if x == b {
                break;
            }
            for &(y, idx) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    via[y] = Some((x, idx));
                    stack.push(y);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = b;
        while cur != a {
            let (prev, idx) = via[cur].expect("tree is connected");
            path.push(idx);
            cur = prev;
        }
        path
    }

    /// Replace edge `remove` with `add`; used by the greedy swap rule.
    pub(crate) fn swap_edge(&mut self, remove: usize, add: LeveledEdge<S>) -> LeveledEdge<S> {
        let old = self.edges.remove(remove);
        self.edges.push(add);
        old
    }

    pub fn check_spanning(&self, m: Option<&OnlineMetric<S>>) -> Vec<ValidityViolation> {
        let mut out = Vec::new();
        let n = self.vertex_count;
        if self.edges.len() + 1 != n {
            out.push(ValidityViolation::NotSpanning(format!("{} edges on {n} vertices", self.edges.len())));
            return out;
        }
        let mut uf = UnionFind::new(n);
        for e in &self.edges {
            if e.u >= n || e.v >= n || e.u == e.v {
                out.push(ValidityViolation::NotSpanning(format!("bad edge ({},{})", e.u, e.v)));
                return out;
            }
            if !uf.union(e.u, e.v) {
                out.push(ValidityViolation::NotSpanning(format!("edge ({},{}) closes a cycle", e.u, e.v)));
            }
            if let Some(m) = m {
                if *m.d(e.u, e.v) != e.length {
                    out.push(ValidityViolation::LengthMismatch { u: e.u, v: e.v });
                }
            }
        }
        out
    }

    /// Check spanning-ness plus both validity conditions against `b`.
    pub fn check_valid(&self, m: Option<&OnlineMetric<S>>, b: &[Rank], alpha: &S) -> ValidityReport {
        let mut violations = self.check_spanning(m);
        let step = u64::from(self.variant.step());
        let mut max_level = 0;
        for e in &self.edges {
            if e.level == 0 {
                violations.push(ValidityViolation::ZeroLevel { u: e.u, v: e.v });
                continue;
            }
            max_level = max_level.max(e.level);
            if e.length > self.level_bound(e.level, alpha) {
                violations.push(ValidityViolation::EdgeTooLong {
                    u: e.u,
                    v: e.v,
                    level: e.level,
                    length: e.length.lossy_f64(),
                });
            }
        }
        let mut order: Vec<&LeveledEdge<S>> = self.edges.iter().collect();
        order.sort_by_key(|e| e.level);
        let mut uf = UnionFind::new(self.vertex_count);
        let mut next = 0;
        for level in 1..=max_level {
            while next < order.len() && order[next].level <= level {
                uf.union(order[next].u, order[next].v);
                next += 1;
            }
            // head = largest b, ties to lowest id
            let mut head: Vec<Option<PointId>> = vec![None; self.vertex_count];
            for v in 0..self.vertex_count {
                let r = uf.find(v);
                if head[r].is_none_or(|h| b[v] > b[h]) {
                    head[r] = Some(v);
                }
            }
            for h in head.into_iter().flatten() {
                if !b[h].at_least(u64::from(level) * step) {
                    violations.push(ValidityViolation::WeakHead { level, head: h, value: b[h] });
                }
            }
        }
        ValidityReport { violations }
    }
}

/// `2 alpha^(2s+1) / (alpha^s - 1)`: cost of a valid tree over its weight.
pub fn cost_bound_factor(alpha: &Exact, step: u32) -> Exact {
    let a_s = alpha.pow(step as i32);
    let two = Exact::from_integer(2.into());
    two * alpha.pow(2 * step as i32 + 1) / (a_s - Exact::from_integer(1.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::exact_int;
    use Rank::{Finite as F, Infinite as Inf};

    fn metric(rows: &[&[f64]]) -> OnlineMetric<f64> {
        let mut m = OnlineMetric::new();
        for r in rows {
            m.add_point(r).unwrap();
        }
        m
    }

    fn line() -> OnlineMetric<f64> {
        metric(&[&[], &[13.0], &[100.0, 87.0]])
    }

    #[test]
    fn attach_examples() {
        let m = line();
        let mut t = LeveledTree::root(Variant::Unit);
        let tr = t.attach_new_vertex(&m, 1, F(0), &6.0).unwrap();
        assert_eq!(tr.added, vec![LeveledEdge::new(0, 1, 13.0, 1, 1)]);
        assert!(tr.removed.is_empty());
        assert!(t.check_valid(Some(&m), &[Inf, F(0)], &6.0).is_valid());

        let tr = t.attach_new_vertex(&m, 2, F(1), &6.0).unwrap();
        assert_eq!(tr.added, vec![LeveledEdge::new(1, 2, 87.0, 2, 2)]);
        assert!(t.check_valid(Some(&m), &[Inf, F(0), F(1)], &6.0).is_valid());
        assert_eq!(t.cost(), 100.0);

        let mut k = LeveledTree::root(Variant::KStep(72));
        k.attach_new_vertex(&m, 1, F(0), &6.0).unwrap();
        let tr = k.attach_new_vertex(&m, 2, F(1), &6.0).unwrap();
        assert_eq!(tr.added[0].level, 1);

        assert!(matches!(t.attach_new_vertex(&m, 5, F(0), &6.0), Err(TreeError::OutOfOrder { .. })));
    }

    #[test]
    fn check_valid_examples() {
        let m = OnlineMetric::<f64>::with_root();
        let t = LeveledTree::root(Variant::Unit);
        assert!(t.check_valid(Some(&m), &[Inf], &6.0).is_valid());
        assert_eq!(t.cost(), 0.0);

        let long = metric(&[&[], &[73.0]]);
        let bad = LeveledTree::from_edges(2, vec![LeveledEdge::new(0, 1, 73.0, 1, 1)], Variant::Unit);
        let rep = bad.check_valid(Some(&long), &[Inf, F(1)], &6.0);
        assert!(matches!(rep.violations.as_slice(), [ValidityViolation::EdgeTooLong { level: 1, .. }]));

        // level-2 edge whose non-root component head has value 1 < 2
        let m3 = metric(&[&[], &[500.0], &[510.0, 13.0]]);
        let weak = LeveledTree::from_edges(
            3,
            vec![LeveledEdge::new(1, 2, 13.0, 1, 2), LeveledEdge::new(0, 1, 500.0, 3, 1)],
            Variant::Unit,
        );
        let rep = weak.check_valid(Some(&m3), &[Inf, F(1), F(0)], &6.0);
        assert!(rep.violations.iter().any(|v| matches!(v, ValidityViolation::WeakHead { level: 2, head: 1, .. })));
        assert!(weak.check_valid(Some(&m3), &[Inf, F(2), F(0)], &6.0).is_valid());
    }

    fn chain() -> (OnlineMetric<f64>, LeveledTree<f64>) {
        let m = metric(&[&[], &[13.0], &[26.0, 13.0]]);
        let t = LeveledTree::from_edges(
            3,
            vec![LeveledEdge::new(1, 2, 13.0, 1, 2), LeveledEdge::new(0, 1, 13.0, 2, 1)],
            Variant::Unit,
        );
        (m, t)
    }

    #[test]
    fn decrement_noop_when_head_survives() {
        let (m, mut t) = chain();
        let b = [Inf, F(1), F(0)];
        assert!(t.check_valid(Some(&m), &b, &6.0).is_valid());
        let tr = t.decrement_head(&m, 2, &b, &6.0).unwrap();
        assert!(tr.is_empty());
    }

    #[test]
    fn decrement_swaps_highest_path_edge() {
        let (m, mut t) = chain();
        let b = [Inf, F(0), F(0)];
        let tr = t.decrement_head(&m, 1, &b, &6.0).unwrap();
        assert_eq!(tr.removed, vec![LeveledEdge::new(0, 1, 13.0, 2, 1)]);
        assert_eq!(tr.added, vec![LeveledEdge::new(0, 1, 13.0, 1, 1)]);
        assert!(t.check_valid(Some(&m), &b, &6.0).is_valid());
    }

    #[test]
    fn decrement_rejects_far_component() {
        let m = line();
        let mut t = LeveledTree::root(Variant::Unit);
        t.attach_new_vertex(&m, 1, F(0), &6.0).unwrap();
        t.attach_new_vertex(&m, 2, F(1), &6.0).unwrap();
        let err = t.decrement_head(&m, 2, &[Inf, F(0), F(0)], &6.0);
        assert!(matches!(err, Err(TreeError::NoReplacementEdge { head: 2, .. })));
    }

    #[test]
    fn cost_factor_values() {
        // 2 * 6^3 / 5
        assert_eq!(cost_bound_factor(&exact_int(6), 1), Exact::new(432.into(), 5.into()));
        let k = cost_bound_factor(&exact_int(6), 72);
        assert_eq!(k, exact_int(2) * exact_int(6).pow(145) / (exact_int(6).pow(72) - exact_int(1)));
    }
}
