//! The four arrival-driven tree maintainers.
//!
//! * `constant`: unit virtual ranks, at most `K` swaps per arrival.
//! * `single`: `K`-step virtual ranks, at most one swap per arrival.
//! * `delta`: the `single` update run only on every `1/delta`-th arrival,
//!   with step `K / delta`.
//! * `greedy`: attach to the nearest point, then swap while some tree edge
//!   is more than `1 + eps` times a replacement closing a cycle through it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{
    check_delayed_merge, check_init_window, check_rank_monotone, check_refinement, run_clustering, ClusterError,
    ClusterHistory, Rank,
};
use crate::leveled_tree::{cost_bound_factor, LeveledEdge, LeveledTree, SwapTrace, TreeError};
use crate::metric::{MetricError, OnlineMetric, PointId};
use crate::oracle::{check_dual_feasible, dual_lower_bound, lineage_ratio, mst_cost, mst_cost_exact, OracleError};
use crate::rank_state::{
    check_admissible, update_virtual, update_virtual_kstep, weight, RankError, RankVector, Variant, VirtualRankVector,
};
use crate::scalar::{exact_from_f64, exact_int, Exact, Scalar};

/// Refinement and delayed-merge checks are cubic; above this many points they are skipped.
pub const LAW_CHECK_MAX_POINTS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Constant,
    Single,
    Delta,
    Greedy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Constant => "constant",
            Algorithm::Single => "single",
            Algorithm::Delta => "delta",
            Algorithm::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(Algorithm::Constant),
            "single" => Ok(Algorithm::Single),
            "delta" => Ok(Algorithm::Delta),
            "greedy" => Ok(Algorithm::Greedy),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyLevel {
    Off,
    Budget,
    #[default]
    Full,
}

impl FromStr for VerifyLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(VerifyLevel::Off),
            "budget" => Ok(VerifyLevel::Budget),
            "full" => Ok(VerifyLevel::Full),
            other => Err(format!("unknown verify level {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaintainerConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    /// Replaces the default `K = ceil(2 alpha^2)`.
    pub k_override: Option<u32>,
    pub epsilon: f64,
    /// `1/delta`; only the delta algorithm reads it.
    pub delta_inverse: u32,
    pub seed: u64,
    pub verify: VerifyLevel,
}

impl Default for MaintainerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Constant,
            alpha: 6.0,
            k_override: None,
            epsilon: 1.0,
            delta_inverse: 1,
            seed: 0,
            verify: VerifyLevel::Full,
        }
    }
}

impl MaintainerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self { algorithm, ..Self::default() }
    }

    pub fn default_k(alpha: f64) -> u32 {
        (2.0 * alpha * alpha).ceil() as u32
    }

    pub fn k(&self) -> u32 {
        self.k_override.unwrap_or_else(|| Self::default_k(self.alpha))
    }

    /// Lattice step of the virtual ranks.
    pub fn step(&self) -> u32 {
        match self.algorithm {
            Algorithm::Constant | Algorithm::Greedy => 1,
            Algorithm::Single => self.k(),
            Algorithm::Delta => self.k() * self.delta_inverse,
        }
    }

    fn variant(&self) -> Variant {
        match self.algorithm {
            Algorithm::Constant | Algorithm::Greedy => Variant::Unit,
            Algorithm::Single | Algorithm::Delta => Variant::KStep(self.step()),
        }
    }

    pub fn validate(&self) -> Result<(), MaintainerError> {
        let bad = |why: String| Err(MaintainerError::Config(why));
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return bad(format!("alpha must be a finite number above 1, got {}", self.alpha));
        }
        if self.algorithm == Algorithm::Greedy && !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if self.delta_inverse == 0 {
            return bad("1/delta must be a positive integer".into());
        }
        if self.algorithm != Algorithm::Greedy && self.k() == 0 {
            return bad("K must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaintainerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("round {round}: {what}")]
    Invariant { round: usize, what: String },
}

impl MaintainerError {
    /// True for bad input (as opposed to a broken invariant).
    pub fn is_input_error(&self) -> bool {
        matches!(self, MaintainerError::Config(_) | MaintainerError::Metric(_) | MaintainerError::Cluster(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundReport<S> {
    pub round: usize,
    pub algorithm: Algorithm,
    pub trace: SwapTrace<S>,
    pub swap_count: usize,
    pub cum_swaps: usize,
    pub tree_cost: S,
    pub mst_cost: S,
    /// Absent when the points violate the clustering spacing floor (greedy only).
    pub weight_rank: Option<Exact>,
    pub weight_vrank: Option<Exact>,
    pub dual_lb: Option<Exact>,
}

/// A swap proposal: tree edge index, non-tree pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ImprovingSwap<S> {
    pub remove: usize,
    pub add: (PointId, PointId),
    pub removed_length: S,
    pub added_length: S,
}

pub struct Maintainer<S> {
    config: MaintainerConfig,
    alpha: S,
    alpha_exact: Exact,
    metric: OnlineMetric<S>,
    tree: LeveledTree<S>,
    vrank: VirtualRankVector,
    history: Option<ClusterHistory>,
    cum_swaps: usize,
    max_swaps: usize,
    /// Greedy attach edge length per lineage id (the arriving vertex).
    origins: BTreeMap<usize, S>,
    lineage_swaps: BTreeMap<usize, u32>,
    /// `(1 + eps)^cum_swaps` and `4^n`, kept exactly for the greedy budget.
    swap_power: Exact,
    four_pow: Exact,
    one_plus_eps: Exact,
}

impl<S: Scalar> Maintainer<S> {
    /// A maintainer whose metric holds only the root.
    pub fn new(config: MaintainerConfig) -> Result<Self, MaintainerError> {
        config.validate()?;
        let alpha = S::from_f64(config.alpha).ok_or_else(|| MaintainerError::Config("alpha not representable".into()))?;
        let alpha_exact = alpha.to_exact();
        let one_plus_eps = exact_int(1) + exact_from_f64(config.epsilon).unwrap_or_else(Exact::zero);
        let variant = config.variant();
        let mut metric = OnlineMetric::new();
        metric.add_point(&[])?;
        Ok(Self {
            alpha,
            alpha_exact,
            metric,
            tree: LeveledTree::root(variant),
            vrank: VirtualRankVector::root(variant),
            history: None,
            cum_swaps: 0,
            max_swaps: 0,
            origins: BTreeMap::new(),
            lineage_swaps: BTreeMap::new(),
            swap_power: exact_int(1),
            four_pow: exact_int(1),
            one_plus_eps,
            config,
        })
    }

    pub fn config(&self) -> &MaintainerConfig {
        &self.config
    }

    pub fn metric(&self) -> &OnlineMetric<S> {
        &self.metric
    }

    pub fn tree(&self) -> &LeveledTree<S> {
        &self.tree
    }

    pub fn virtual_ranks(&self) -> &VirtualRankVector {
        &self.vrank
    }

    pub fn history(&self) -> Option<&ClusterHistory> {
        self.history.as_ref()
    }

    pub fn cum_swaps(&self) -> usize {
        self.cum_swaps
    }

    pub fn max_swaps(&self) -> usize {
        self.max_swaps
    }

    /// Greedy attach lengths keyed by lineage id.
    pub fn origins(&self) -> &BTreeMap<usize, S> {
        &self.origins
    }

    /// `prod origin / prod final` over the greedy lineages.
    pub fn lineage_ratio(&self) -> Result<Exact, OracleError> {
        lineage_ratio(&self.origins, self.tree.edges())
    }

    /// Reveal the next point with its distances to all earlier ones.
    pub fn on_arrival(&mut self, dists: &[S]) -> Result<RoundReport<S>, MaintainerError> {
        let snapshot = self.metric.clone();
        let round = self.metric.add_point(dists)?;
        let result = match self.config.algorithm {
            Algorithm::Constant => self.round_constant(round),
            Algorithm::Single => self.round_kstep(round, true),
            Algorithm::Delta => {
                let active = round % self.config.delta_inverse as usize == 0;
                self.round_kstep(round, active)
            }
            Algorithm::Greedy => self.round_greedy(round),
        };
        if result.as_ref().is_err_and(|e| e.is_input_error()) {
            self.metric = snapshot;
        }
        result
    }

    fn invariant(round: usize, what: impl Into<String>) -> MaintainerError {
        MaintainerError::Invariant { round, what: what.into() }
    }

    fn round_constant(&mut self, round: PointId) -> Result<RoundReport<S>, MaintainerError> {
        let h = run_clustering(&self.metric, round, &self.alpha)?;
        let rank_now = RankVector::from(&h);
        let init_new = h.init_of_newest();
        let k = self.config.k();
        let (next, selected) = update_virtual(&self.vrank, &rank_now, k as usize, init_new)?;

        let extended = self.vrank.with_new_vertex(init_new);
        let mut b = extended.values().to_vec();
        let mut trace = self.tree.attach_new_vertex(&self.metric, round, init_new, &self.alpha)?;
        for pair in &selected {
            b[pair.j] = Rank::Finite(pair.k);
            let step = self.tree.decrement_head(&self.metric, pair.j, &b, &self.alpha)?;
            if self.config.verify != VerifyLevel::Off && step.added.len() + step.removed.len() > 2 {
                return Err(Self::invariant(round, "decrement touched more than two edges"));
            }
            trace.extend(step);
        }
        if b != next.values() {
            return Err(Self::invariant(round, "decrement sequence does not end at the new virtual ranks"));
        }
        if self.config.verify == VerifyLevel::Full {
            let l1 = next.l1_distance(&extended);
            if l1 > u64::from(k) {
                return Err(Self::invariant(round, format!("virtual ranks moved {l1} > K = {k}")));
            }
        }
        self.finish_clustered(round, h, rank_now, next, trace, k as usize)
    }

    fn round_kstep(&mut self, round: PointId, active: bool) -> Result<RoundReport<S>, MaintainerError> {
        let h = run_clustering(&self.metric, round, &self.alpha)?;
        let rank_now = RankVector::from(&h);
        let init_new = h.init_of_newest();
        let step = self.config.step();
        let (next, pick) = if active {
            update_virtual_kstep(&self.vrank, &rank_now, step, init_new)?
        } else {
            (self.vrank.with_new_vertex(init_new), None)
        };
        let mut b = self.vrank.with_new_vertex(init_new).values().to_vec();
        let mut trace = self.tree.attach_new_vertex(&self.metric, round, init_new, &self.alpha)?;
        if let Some(pair) = pick {
            b[pair.j] = Rank::Finite(pair.k);
            let step = self.tree.decrement_head(&self.metric, pair.j, &b, &self.alpha)?;
            if self.config.verify != VerifyLevel::Off && step.added.len() + step.removed.len() > 2 {
                return Err(Self::invariant(round, "decrement touched more than two edges"));
            }
            trace.extend(step);
        }
        if b != next.values() {
            return Err(Self::invariant(round, "decrement does not end at the new virtual ranks"));
        }
        self.finish_clustered(round, h, rank_now, next, trace, 1)
    }

    fn finish_clustered(
        &mut self,
        round: PointId,
        h: ClusterHistory,
        rank_now: RankVector,
        next: VirtualRankVector,
        trace: SwapTrace<S>,
        per_round_budget: usize,
    ) -> Result<RoundReport<S>, MaintainerError> {
        let swap_count = trace.removed.len();
        self.cum_swaps += swap_count;
        self.max_swaps = self.max_swaps.max(swap_count);
        let weight_rank = weight(&rank_now.0, &self.alpha_exact)?;
        let weight_vrank = weight(next.values(), &self.alpha_exact)?;
        let (dual_lb, dual) = dual_lower_bound(&h, &self.alpha_exact)?;
        let points: Vec<PointId> = (0..=round).collect();
        let mst = mst_cost(&self.metric, &points)?;

        if self.config.verify != VerifyLevel::Off {
            if swap_count > per_round_budget {
                return Err(Self::invariant(round, format!("{swap_count} swaps exceed the budget {per_round_budget}")));
            }
            if self.config.algorithm == Algorithm::Delta {
                let cap = round / self.config.delta_inverse as usize;
                if self.cum_swaps > cap {
                    return Err(Self::invariant(round, format!("{} total swaps exceed floor(delta n) = {cap}", self.cum_swaps)));
                }
            }
        }
        if self.config.verify == VerifyLevel::Full {
            self.verify_clustered(round, &h, &rank_now, &next, &weight_rank, &weight_vrank, &dual_lb, &dual)?;
        }

        let report = RoundReport {
            round,
            algorithm: self.config.algorithm,
            trace,
            swap_count,
            cum_swaps: self.cum_swaps,
            tree_cost: self.tree.cost(),
            mst_cost: mst,
            weight_rank: Some(weight_rank),
            weight_vrank: Some(weight_vrank),
            dual_lb: Some(dual_lb),
        };
        self.vrank = next;
        self.history = Some(h);
        Ok(report)
    }

    #[allow(clippy::too_many_arguments)]
    fn verify_clustered(
        &self,
        round: PointId,
        h: &ClusterHistory,
        rank_now: &RankVector,
        next: &VirtualRankVector,
        weight_rank: &Exact,
        weight_vrank: &Exact,
        dual_lb: &Exact,
        dual: &crate::oracle::DualSolution,
    ) -> Result<(), MaintainerError> {
        let fail = |what: String| Err(Self::invariant(round, what));
        let report = self.tree.check_valid(Some(&self.metric), next.values(), &self.alpha);
        if let Some(v) = report.violations.first() {
            return fail(format!("tree invalid: {v}"));
        }
        if let Some(issue) = check_admissible(next.values(), &rank_now.0, next.init(), next.variant()).first() {
            return fail(format!("virtual ranks not admissible: {issue}"));
        }
        let step = self.config.step();
        let factor = cost_bound_factor(&self.alpha_exact, step);
        if self.tree.cost_exact() > factor * weight_vrank {
            return fail("tree cost exceeds its weight bound".into());
        }
        // the weight theorem needs the full default budget
        if self.config.k() >= MaintainerConfig::default_k(self.config.alpha) {
            let exp = match self.config.algorithm {
                Algorithm::Constant => 2,
                _ => 2 * step as i32 + 1,
            };
            if *weight_vrank > self.alpha_exact.pow(exp) * weight_rank {
                return fail(format!("weight(vrank) exceeds alpha^{exp} weight(rank)"));
            }
        }
        if let Some(prev) = &self.history {
            let mut laws = check_rank_monotone(prev, h);
            if round <= LAW_CHECK_MAX_POINTS {
                laws.extend(check_refinement(prev, h));
                laws.extend(check_delayed_merge(prev, h));
            }
            if let Some(v) = laws.first() {
                return fail(format!("clustering law broken: {v}"));
            }
        }
        if let Some(v) = check_init_window(h, &self.metric, &self.alpha).first() {
            return fail(format!("clustering law broken: {v}"));
        }
        if let Some(v) = check_dual_feasible(dual, &self.metric).first() {
            return fail(format!("dual infeasible at ({},{}): load {} > {}", v.a, v.b, v.load, v.distance));
        }
        let points: Vec<PointId> = (0..=round).collect();
        if *dual_lb > mst_cost_exact(&self.metric, &points)? {
            return fail("dual lower bound exceeds the MST".into());
        }
        Ok(())
    }

    fn round_greedy(&mut self, round: PointId) -> Result<RoundReport<S>, MaintainerError> {
        let mut trace = self.tree.attach_greedy(&self.metric, round)?;
        self.origins.insert(round, trace.added[0].length.clone());
        self.lineage_swaps.insert(round, 0);
        let eps = S::from_f64(self.config.epsilon).ok_or_else(|| MaintainerError::Config("epsilon not representable".into()))?;
        while let Some(swap) = find_improving_swap(&self.tree, &self.metric, &eps) {
            let edge = &self.tree.edges()[swap.remove];
            let lineage = edge.lineage;
            let added = LeveledEdge::new(swap.add.0, swap.add.1, swap.added_length.clone(), edge.level, lineage);
            let removed = self.tree.swap_edge(swap.remove, added.clone());
            *self.lineage_swaps.get_mut(&lineage).expect("lineage recorded") += 1;
            self.swap_power *= &self.one_plus_eps;
            trace.added.push(added);
            trace.removed.push(removed);
        }
        let swap_count = trace.removed.len();
        self.cum_swaps += swap_count;
        self.max_swaps = self.max_swaps.max(swap_count);
        self.four_pow *= exact_int(4);

        let (weight_rank, dual_lb) = match run_clustering(&self.metric, round, &self.alpha) {
            Ok(h) => {
                let (lb, _) = dual_lower_bound(&h, &self.alpha_exact)?;
                (Some(weight(&h.ranks, &self.alpha_exact)?), Some(lb))
            }
            Err(ClusterError::MinDistanceViolation { .. }) => (None, None),
            Err(e) => return Err(e.into()),
        };
        let points: Vec<PointId> = (0..=round).collect();
        let mst = mst_cost(&self.metric, &points)?;

        if self.config.verify != VerifyLevel::Off && self.swap_power > self.four_pow {
            return Err(Self::invariant(round, format!("{} swaps exceed n log_(1+eps) 4", self.cum_swaps)));
        }
        if self.config.verify == VerifyLevel::Full {
            self.verify_greedy(round)?;
        }
        Ok(RoundReport {
            round,
            algorithm: Algorithm::Greedy,
            trace,
            swap_count,
            cum_swaps: self.cum_swaps,
            tree_cost: self.tree.cost(),
            mst_cost: mst,
            weight_rank,
            weight_vrank: None,
            dual_lb,
        })
    }

    fn verify_greedy(&self, round: PointId) -> Result<(), MaintainerError> {
        let fail = |what: String| Err(Self::invariant(round, what));
        if let Some(v) = self.tree.check_spanning(Some(&self.metric)).first() {
            return fail(format!("tree broken: {v}"));
        }
        let points: Vec<PointId> = (0..=round).collect();
        let mst = mst_cost_exact(&self.metric, &points)?;
        let slack = exact_int(1) + S::tolerance().to_exact();
        if self.tree.cost_exact() > &self.one_plus_eps * mst * slack {
            return fail("quiescent tree costs more than (1 + eps) MST".into());
        }
        let ratio = self.lineage_ratio()?;
        if ratio > self.four_pow {
            return fail("lineage ratio exceeds 4^n".into());
        }
        for e in self.tree.edges() {
            let swaps = self.lineage_swaps[&e.lineage];
            let shrunk = e.length.to_exact() * self.one_plus_eps.pow(swaps as i32);
            if shrunk > self.origins[&e.lineage].to_exact() {
                return fail(format!("lineage {} shrank less than (1 + eps) per swap", e.lineage));
            }
        }
        Ok(())
    }
}

/// The swap maximizing `c(e)/c(f)` among tree edges `e` and non-tree pairs
/// `f` closing a cycle through `e` with `c(e) > (1 + eps) c(f)`.
///
/// Floats must clear the bound by the scalar's relative tolerance, so exact
/// ties are never swapped.
///
/// Ratios equal within tolerance go to the lexicographically smallest
/// `(e, f)` by endpoints.
pub fn find_improving_swap<S: Scalar>(tree: &LeveledTree<S>, m: &OnlineMetric<S>, eps: &S) -> Option<ImprovingSwap<S>> {
    let n = tree.vertex_count();
    let edges = tree.edges();
    let mut adj: Vec<Vec<(PointId, usize)>> = vec![Vec::new(); n];
    for (idx, e) in edges.iter().enumerate() {
        adj[e.u].push((e.v, idx));
        adj[e.v].push((e.u, idx));
    }
    let factor = S::one() + eps.clone();
    let heavier = |a: usize, b: usize| -> bool {
        let (ea, eb) = (&edges[a], &edges[b]);
        ea.length > eb.length || (ea.length == eb.length && ea.endpoints() < eb.endpoints())
    };
    let mut best: Option<(usize, (PointId, PointId))> = None;
    let mut heaviest: Vec<Option<usize>> = vec![None; n];
    let mut stack = Vec::with_capacity(n);
    for src in 0..n {
        heaviest.iter_mut().for_each(|h| *h = None);
        let mut seen = vec![false; n];
        seen[src] = true;
        stack.push(src);
        while let Some(x) = stack.pop() {
            for &(y, idx) in &adj[x] {
                if seen[y] {
                    continue;
                }
                seen[y] = true;
                heaviest[y] = Some(match heaviest[x] {
                    Some(h) if heavier(h, idx) => h,
                    _ => idx,
                });
                stack.push(y);
            }
        }
        for dst in (src + 1)..n {
            let e_idx = heaviest[dst].expect("tree is spanning");
            let e = &edges[e_idx];
            if e.endpoints() == (src, dst) {
                continue;
            }
            let f_len = m.d(src, dst);
            if S::le_with_tolerance(&e.length, &(factor.clone() * f_len.clone())) {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bi, bf)) => {
                    let be = &edges[*bi];
                    let lhs = e.length.clone() * m.d(bf.0, bf.1).clone();
                    let rhs = be.length.clone() * f_len.clone();
                    if !S::le_with_tolerance(&lhs, &rhs) {
                        true
                    } else if !S::le_with_tolerance(&rhs, &lhs) {
                        false
                    } else {
                        (e.endpoints(), (src, dst)) < (be.endpoints(), *bf)
                    }
                }
            };
            if better {
                best = Some((e_idx, (src, dst)));
            }
        }
    }
    best.map(|(remove, add)| ImprovingSwap {
        remove,
        add,
        removed_length: edges[remove].length.clone(),
        added_length: m.d(add.0, add.1).clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(points: &[f64]) -> Vec<Vec<f64>> {
        (0..points.len()).map(|i| (0..i).map(|j| (points[i] - points[j]).abs()).collect()).collect()
    }

    /// Distinct multiples of 12 in scrambled order.
    fn scattered(n: u32) -> Vec<f64> {
        (0..n).map(|i| 12.0 * f64::from(i * 7919 % 997)).collect()
    }

    fn run(cfg: MaintainerConfig, points: &[f64]) -> (Maintainer<f64>, Vec<RoundReport<f64>>) {
        let mut mt = Maintainer::new(cfg).unwrap();
        let reports = rows(points).into_iter().skip(1).map(|r| mt.on_arrival(&r).unwrap()).collect();
        (mt, reports)
    }

    #[test]
    fn greedy_half_swaps_once() {
        let cfg = MaintainerConfig { epsilon: 0.5, ..MaintainerConfig::new(Algorithm::Greedy) };
        let (mt, reports) = run(cfg, &[0.0, 10.0, 5.5]);
        let last = reports.last().unwrap();
        assert_eq!(last.swap_count, 1);
        assert_eq!(last.trace.removed[0].endpoints(), (0, 1));
        assert_eq!(last.trace.added[1].endpoints(), (0, 2));
        assert_eq!(mt.tree().cost(), 10.0);
        // both clustering fields are absent: points sit closer than 2 alpha
        assert!(last.weight_rank.is_none());
    }

    #[test]
    fn greedy_one_keeps_tree() {
        let cfg = MaintainerConfig { epsilon: 1.0, ..MaintainerConfig::new(Algorithm::Greedy) };
        let (mt, reports) = run(cfg, &[0.0, 10.0, 5.5]);
        assert_eq!(reports.last().unwrap().swap_count, 0);
        assert_eq!(mt.tree().cost(), 14.5);
        assert_eq!(mt.lineage_ratio().unwrap(), exact_int(1));
    }

    #[test]
    fn improving_swap_examples() {
        let mut m = OnlineMetric::new();
        for r in rows(&[0.0, 10.0, 5.5]) {
            m.add_point(&r).unwrap();
        }
        let mut t = LeveledTree::root(Variant::Unit);
        t.attach_greedy(&m, 1).unwrap();
        t.attach_greedy(&m, 2).unwrap();
        let s = find_improving_swap(&t, &m, &0.5).unwrap();
        assert_eq!(t.edges()[s.remove].endpoints(), (0, 1));
        assert_eq!(s.add, (0, 2));

        // star at the MST: nothing to improve
        let mut star = OnlineMetric::new();
        star.add_point(&[]).unwrap();
        star.add_point(&[1.0]).unwrap();
        star.add_point(&[1.0, 2.0]).unwrap();
        star.add_point(&[1.0, 2.0, 2.0]).unwrap();
        let mut st = LeveledTree::root(Variant::Unit);
        for v in 1..4 {
            st.attach_greedy(&star, v).unwrap();
        }
        assert!(find_improving_swap(&st, &star, &0.1).is_none());
    }

    #[test]
    fn improving_swap_takes_largest_ratio() {
        // path 0-1 (9), 1-2 (12); chords 0-2 of length 3 give ratio 4 on 1-2
        // while 1-3 style pairs give less
        let mut m = OnlineMetric::new();
        m.add_point(&[]).unwrap();
        m.add_point(&[9.0]).unwrap();
        m.add_point(&[3.0, 12.0]).unwrap();
        let t = LeveledTree::from_edges(
            3,
            vec![LeveledEdge::new(0, 1, 9.0, 0, 1), LeveledEdge::new(1, 2, 12.0, 0, 2)],
            Variant::Unit,
        );
        let s = find_improving_swap(&t, &m, &1.0).unwrap();
        assert_eq!(t.edges()[s.remove].endpoints(), (1, 2));
        assert_eq!(s.add, (0, 2));
    }

    #[test]
    fn constant_line_instance() {
        let (mt, reports) = run(MaintainerConfig::new(Algorithm::Constant), &[0.0, 13.0, 100.0]);
        assert!(reports.iter().all(|r| r.swap_count == 0 && r.trace.added.len() == 1));
        assert_eq!(mt.tree().cost(), 100.0);
        assert_eq!(reports[0].dual_lb, Some(exact_int(5)));
        assert_eq!(reports[1].weight_rank, Some(exact_int(7)));
    }

    #[test]
    fn delta_one_matches_single() {
        let pts = scattered(40);
        let mut swaps = 0;
        for k in [1, 2, 3] {
            let single = MaintainerConfig { k_override: Some(k), ..MaintainerConfig::new(Algorithm::Single) };
            let delta = MaintainerConfig { k_override: Some(k), ..MaintainerConfig::new(Algorithm::Delta) };
            let (_, a) = run(single, &pts);
            let (_, b) = run(delta, &pts);
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.trace, y.trace);
                assert!(x.swap_count <= 1);
            }
            swaps += a.last().unwrap().cum_swaps;
        }
        assert!(swaps > 0, "small K should force some swaps");
    }

    #[test]
    fn delta_half_idles_on_odd_rounds() {
        let pts = scattered(40);
        let cfg = MaintainerConfig { k_override: Some(1), delta_inverse: 2, ..MaintainerConfig::new(Algorithm::Delta) };
        let (_, reports) = run(cfg, &pts);
        for r in &reports {
            if r.round % 2 == 1 {
                assert_eq!(r.swap_count, 0);
            }
            assert!(r.cum_swaps <= r.round / 2);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = MaintainerConfig { epsilon: 0.0, ..MaintainerConfig::new(Algorithm::Greedy) };
        assert!(Maintainer::<f64>::new(cfg).is_err());
        let cfg = MaintainerConfig { alpha: 1.0, ..MaintainerConfig::default() };
        assert!(Maintainer::<f64>::new(cfg).is_err());
    }

    #[test]
    fn input_error_leaves_state_untouched() {
        let mut mt = Maintainer::<f64>::new(MaintainerConfig::default()).unwrap();
        assert!(mt.on_arrival(&[5.0]).is_err());
        assert_eq!(mt.metric().len(), 1);
        assert!(mt.on_arrival(&[13.0]).is_ok());
    }
}
