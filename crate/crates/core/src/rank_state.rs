//! Rank vectors, the exponential weight functional, and the lagged
//! "virtual" rank vectors that throttle how fast the tree may change.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{ClusterHistory, Rank};
use crate::metric::PointId;
use crate::scalar::{exact_int, Exact};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankError {
    #[error("vertex {0} has infinite rank but is not the root")]
    InfinityAtNonRoot(PointId),
    #[error("virtual rank of {vertex} would be {value}, outside [{rank}, {init}]")]
    AdmissibilityViolation { vertex: PointId, value: Rank, rank: Rank, init: Rank },
    #[error("virtual rank {value} of {vertex} is not Init({init}) minus a multiple of {step}")]
    LatticeViolation { vertex: PointId, value: Rank, init: Rank, step: u32 },
    #[error("vector lengths disagree: {virtual_len} virtual ranks vs {rank_len} ranks")]
    LengthMismatch { virtual_len: usize, rank_len: usize },
    #[error("operation needs the {expected} variant")]
    WrongVariant { expected: &'static str },
}

/// How coarsely virtual ranks (and tree levels) move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Unit decrements; tree level `l` pairs with value `l`.
    Unit,
    /// Decrements by `K`; tree level `l` pairs with value `l * K`.
    KStep(u32),
}

impl Variant {
    pub fn step(self) -> u32 {
        match self {
            Variant::Unit => 1,
            Variant::KStep(k) => k,
        }
    }
}

/// `rank_i` for the current round, indexed by point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankVector(pub Vec<Rank>);

impl RankVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: PointId) -> Rank {
        self.0[v]
    }
}

impl From<&ClusterHistory> for RankVector {
    fn from(h: &ClusterHistory) -> Self {
        RankVector(h.ranks.clone())
    }
}

/// Rank change `(j, k)`: vertex `j` may drop to value `k`.
///
/// Ordered by `k` first, then by `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankPair {
    pub j: PointId,
    pub k: u32,
}

impl Ord for RankPair {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.k, self.j).cmp(&(other.k, other.j))
    }
}

impl PartialOrd for RankPair {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `sum_{l >= 1} alpha^{values[l]}`; index 0 is skipped.
pub fn weight(values: &[Rank], alpha: &Exact) -> Result<Exact, RankError> {
    let mut counts: Vec<u64> = Vec::new();
    for (v, r) in values.iter().enumerate().skip(1) {
        let r = r.finite().ok_or(RankError::InfinityAtNonRoot(v))? as usize;
        if counts.len() <= r {
            counts.resize(r + 1, 0);
        }
        counts[r] += 1;
    }
    let mut total = Exact::zero();
    let mut power = exact_int(1);
    for (r, &c) in counts.iter().enumerate() {
        if r > 0 {
            power *= alpha;
        }
        if c > 0 {
            total += &power * exact_int(c);
        }
    }
    Ok(total)
}

/// A virtual rank vector together with the initial ranks bounding it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualRankVector {
    values: Vec<Rank>,
    init: Vec<Rank>,
    variant: Variant,
}

impl VirtualRankVector {
    /// Root-only vector, `vrank_0(0) = inf`.
    pub fn root(variant: Variant) -> Self {
        Self { values: vec![Rank::Infinite], init: vec![Rank::Infinite], variant }
    }

    pub fn from_parts(values: Vec<Rank>, init: Vec<Rank>, variant: Variant) -> Self {
        assert_eq!(values.len(), init.len());
        Self { values, init, variant }
    }

    pub fn values(&self) -> &[Rank] {
        &self.values
    }

    pub fn init(&self) -> &[Rank] {
        &self.init
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, v: PointId) -> Rank {
        self.values[v]
    }

    /// Append the newest vertex at its initial rank and change nothing else.
    pub fn with_new_vertex(&self, init_new: Rank) -> Self {
        let mut next = self.clone();
        next.values.push(init_new);
        next.init.push(init_new);
        next
    }

    /// `sum_j |self(j) - other(j)|` over the common finite coordinates.
    pub fn l1_distance(&self, other: &VirtualRankVector) -> u64 {
        self.values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| match (a.finite(), b.finite()) {
                (Some(a), Some(b)) => Some(u64::from(a.abs_diff(b))),
                _ => None,
            })
            .sum()
    }

    fn check_len(&self, rank_now: &RankVector) -> Result<(), RankError> {
        if rank_now.len() != self.len() + 1 {
            return Err(RankError::LengthMismatch { virtual_len: self.len(), rank_len: rank_now.len() });
        }
        Ok(())
    }
}

fn finite_at(values: &[Rank], v: PointId) -> Result<u32, RankError> {
    values[v].finite().ok_or(RankError::InfinityAtNonRoot(v))
}

/// Lagging rank changes: `{(j, k) : j in [i-1], rank_i(j) <= k < vrank_{i-1}(j)}`.
pub fn build_pending(vrank_prev: &VirtualRankVector, rank_now: &RankVector) -> Result<BTreeSet<RankPair>, RankError> {
    vrank_prev.check_len(rank_now)?;
    let mut pending = BTreeSet::new();
    for j in 1..vrank_prev.len() {
        let v = finite_at(&vrank_prev.values, j)?;
        let r = finite_at(&rank_now.0, j)?;
        for k in r..v {
            pending.insert(RankPair { j, k });
        }
    }
    Ok(pending)
}

/// Unit-step update: apply the `budget` highest pending pairs.
///
/// Returns the new vector and the applied pairs in descending order, which
/// is also an order of unit decrements that stays admissible throughout.
pub fn update_virtual(
    vrank_prev: &VirtualRankVector,
    rank_now: &RankVector,
    budget: usize,
    init_new: Rank,
) -> Result<(VirtualRankVector, Vec<RankPair>), RankError> {
    if vrank_prev.variant != Variant::Unit {
        return Err(RankError::WrongVariant { expected: "unit" });
    }
    let pending = build_pending(vrank_prev, rank_now)?;
    let selected: Vec<RankPair> = pending.iter().rev().take(budget).copied().collect();
    let mut next = vrank_prev.with_new_vertex(init_new);
    for pair in &selected {
        let slot = &mut next.values[pair.j];
        if slot.finite().is_none_or(|cur| pair.k < cur) {
            *slot = Rank::Finite(pair.k);
        }
    }
    for pair in &selected {
        let j = pair.j;
        if next.values[j] < rank_now.get(j) {
            return Err(RankError::AdmissibilityViolation {
                vertex: j,
                value: next.values[j],
                rank: rank_now.get(j),
                init: next.init[j],
            });
        }
    }
    Ok((next, selected))
}

/// K-step update: lower at most one coordinate, by exactly `step`, picking
/// the highest candidate `(j, vrank(j) - step)` with `rank_i(j) <= vrank(j) - step`.
pub fn update_virtual_kstep(
    vrank_prev: &VirtualRankVector,
    rank_now: &RankVector,
    step: u32,
    init_new: Rank,
) -> Result<(VirtualRankVector, Option<RankPair>), RankError> {
    if vrank_prev.variant != Variant::KStep(step) {
        return Err(RankError::WrongVariant { expected: "k-step" });
    }
    vrank_prev.check_len(rank_now)?;
    for j in 1..vrank_prev.len() {
        check_lattice(vrank_prev, j, step)?;
    }
    let mut best: Option<RankPair> = None;
    for j in 1..vrank_prev.len() {
        let v = finite_at(&vrank_prev.values, j)?;
        let r = finite_at(&rank_now.0, j)?;
        if v >= step && r <= v - step {
            let cand = RankPair { j, k: v - step };
            if best.is_none_or(|b| b < cand) {
                best = Some(cand);
            }
        }
    }
    let mut next = vrank_prev.with_new_vertex(init_new);
    if let Some(p) = best {
        next.values[p.j] = Rank::Finite(p.k);
    }
    Ok((next, best))
}

fn check_lattice(vr: &VirtualRankVector, j: PointId, step: u32) -> Result<(), RankError> {
    let v = finite_at(&vr.values, j)?;
    let init = finite_at(&vr.init, j)?;
    if v > init || (init - v) % step != 0 {
        return Err(RankError::LatticeViolation { vertex: j, value: vr.values[j], init: vr.init[j], step });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdmissibilityKind {
    BelowRank,
    AboveInit,
    OffLattice,
    InfiniteAtNonRoot,
    RootNotInfinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdmissibilityIssue {
    pub vertex: PointId,
    pub kind: AdmissibilityKind,
}

impl fmt::Display for AdmissibilityIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vertex {}: {:?}", self.vertex, self.kind)
    }
}

/// Every coordinate that leaves `[rank(j), Init(j)]`, or (k-step) leaves the lattice.
pub fn check_admissible(values: &[Rank], rank_now: &[Rank], init: &[Rank], variant: Variant) -> Vec<AdmissibilityIssue> {
    let mut issues = Vec::new();
    for (j, &v) in values.iter().enumerate() {
        let issue = |kind| AdmissibilityIssue { vertex: j, kind };
        if j == 0 {
            if !v.is_infinite() {
                issues.push(issue(AdmissibilityKind::RootNotInfinite));
            }
            continue;
        }
        let (Some(val), Some(r), Some(top)) = (v.finite(), rank_now[j].finite(), init[j].finite()) else {
            issues.push(issue(AdmissibilityKind::InfiniteAtNonRoot));
            continue;
        };
        if val < r {
            issues.push(issue(AdmissibilityKind::BelowRank));
        }
        if val > top {
            issues.push(issue(AdmissibilityKind::AboveInit));
        } else if let Variant::KStep(k) = variant {
            if (top - val) % k != 0 {
                issues.push(issue(AdmissibilityKind::OffLattice));
            }
        }
    }
    issues
}
