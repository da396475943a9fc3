//! Reference baselines: minimum spanning trees, exact Steiner trees on small
//! graphs, the moat dual lower bound, and the swap potential.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterHistory;
use crate::leveled_tree::LeveledEdge;
use crate::metric::{MetricError, OnlineMetric, PointId};
use crate::rank_state::{weight, RankError};
use crate::scalar::{exact_int, Exact, Scalar};

/// Largest terminal set [`steiner_opt`] accepts.
pub const MAX_STEINER_TERMINALS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{count} terminals exceed the exact solver cap of {max}")]
    TooManyTerminals { count: usize, max: usize },
    #[error("graph is disconnected: vertex {0} unreachable from 0")]
    Disconnected(usize),
    #[error("edge ({u},{v}) is invalid: {why}")]
    BadEdge { u: usize, v: usize, why: &'static str },
    #[error("empty point set")]
    EmptySet,
    #[error("lineage broken: {0}")]
    LineageBroken(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// MST edges over `set` (Prim, ties to the lowest id).
pub fn mst_edges<S: Scalar>(m: &OnlineMetric<S>, set: &[PointId]) -> Result<Vec<(PointId, PointId, S)>, OracleError> {
    if set.is_empty() {
        return Err(OracleError::EmptySet);
    }
    for &p in set {
        if p >= m.len() {
            return Err(MetricError::UnknownPoint(p).into());
        }
    }
    let k = set.len();
    let mut in_tree = vec![false; k];
    let mut best: Vec<Option<(S, usize)>> = vec![None; k];
    in_tree[0] = true;
    for i in 1..k {
        best[i] = Some((m.d(set[0], set[i]).clone(), 0));
    }
    let mut out = Vec::with_capacity(k - 1);
    for _ in 1..k {
        let mut pick: Option<usize> = None;
        for i in 0..k {
            if in_tree[i] {
                continue;
            }
            if pick.is_none_or(|p| best[i].as_ref().unwrap().0 < best[p].as_ref().unwrap().0) {
                pick = Some(i);
            }
        }
        let p = pick.expect("vertices remain");
        in_tree[p] = true;
        let (len, from) = best[p].take().unwrap();
        out.push((set[from], set[p], len));
        for i in 0..k {
            if !in_tree[i] {
                let d = m.d(set[p], set[i]);
                if *d < best[i].as_ref().unwrap().0 {
                    best[i] = Some((d.clone(), p));
                }
            }
        }
    }
    Ok(out)
}

pub fn mst_cost<S: Scalar>(m: &OnlineMetric<S>, set: &[PointId]) -> Result<S, OracleError> {
    Ok(mst_edges(m, set)?.into_iter().fold(S::zero(), |acc, (_, _, d)| acc + d))
}

/// MST cost summed without rounding.
pub fn mst_cost_exact<S: Scalar>(m: &OnlineMetric<S>, set: &[PointId]) -> Result<Exact, OracleError> {
    Ok(mst_edges(m, set)?.into_iter().map(|(_, _, d)| d.to_exact()).sum())
}

/// Weighted undirected graph whose metric is the shortest-path closure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphInstance<S> {
    pub n: usize,
    pub edges: Vec<(usize, usize, S)>,
}

impl<S: Scalar> GraphInstance<S> {
    /// All-pairs shortest paths (Floyd-Warshall).
    pub fn closure(&self) -> Result<Vec<Vec<S>>, OracleError> {
        let n = self.n;
        let mut d: Vec<Vec<Option<S>>> = vec![vec![None; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = Some(S::zero());
        }
        for (u, v, w) in &self.edges {
            let (u, v) = (*u, *v);
            if u >= n || v >= n {
                return Err(OracleError::BadEdge { u, v, why: "endpoint out of range" });
            }
            if u == v {
                return Err(OracleError::BadEdge { u, v, why: "self loop" });
            }
            if *w <= S::zero() || !w.is_finite_value() {
                return Err(OracleError::BadEdge { u, v, why: "weight must be positive and finite" });
            }
            if d[u][v].as_ref().is_none_or(|cur| w < cur) {
                d[u][v] = Some(w.clone());
                d[v][u] = Some(w.clone());
            }
        }
        for k in 0..n {
            for i in 0..n {
                let Some(ik) = d[i][k].clone() else { continue };
                for j in 0..n {
                    let Some(kj) = d[k][j].as_ref() else { continue };
                    let via = ik.clone() + kj.clone();
                    if d[i][j].as_ref().is_none_or(|cur| via < *cur) {
                        d[i][j] = Some(via);
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(n);
        for row in d {
            let mut r = Vec::with_capacity(n);
            for (j, x) in row.into_iter().enumerate() {
                r.push(x.ok_or(OracleError::Disconnected(j))?);
            }
            out.push(r);
        }
        Ok(out)
    }

    pub fn total_weight(&self) -> S {
        self.edges.iter().fold(S::zero(), |acc, e| acc + e.2.clone())
    }
}

fn min_opt<S: Scalar>(slot: &mut Option<S>, cand: S) {
    if slot.as_ref().is_none_or(|cur| cand < *cur) {
        *slot = Some(cand);
    }
}

/// Exact minimum Steiner tree weight (Dreyfus-Wagner over the closure).
pub fn steiner_opt<S: Scalar>(g: &GraphInstance<S>, terminals: &[usize]) -> Result<S, OracleError> {
    if terminals.is_empty() {
        return Err(OracleError::EmptySet);
    }
    if terminals.len() > MAX_STEINER_TERMINALS {
        return Err(OracleError::TooManyTerminals { count: terminals.len(), max: MAX_STEINER_TERMINALS });
    }
    let d = g.closure()?;
    steiner_opt_on_closure(&d, terminals)
}

pub(crate) fn steiner_opt_on_closure<S: Scalar>(d: &[Vec<S>], terminals: &[usize]) -> Result<S, OracleError> {
    let n = d.len();
    let t = terminals.len();
    if t > MAX_STEINER_TERMINALS {
        return Err(OracleError::TooManyTerminals { count: t, max: MAX_STEINER_TERMINALS });
    }
    if let Some(&bad) = terminals.iter().find(|&&x| x >= n) {
        return Err(MetricError::UnknownPoint(bad).into());
    }
    if t <= 1 {
        return Ok(S::zero());
    }
    let full = (1usize << t) - 1;
    // dp[mask][v]: cheapest tree spanning terminals in mask plus v
    let mut dp: Vec<Vec<Option<S>>> = vec![vec![None; n]; full + 1];
    for (i, &term) in terminals.iter().enumerate() {
        for v in 0..n {
            dp[1 << i][v] = Some(d[term][v].clone());
        }
    }
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        let mut row: Vec<Option<S>> = vec![None; n];
        let low = mask & mask.wrapping_neg();
        let mut sub = (mask - 1) & mask;
        while sub > 0 {
            // each split once: the half holding the lowest bit
            if sub & low != 0 {
                let other = mask ^ sub;
                for v in 0..n {
                    if let (Some(a), Some(b)) = (&dp[sub][v], &dp[other][v]) {
                        min_opt(&mut row[v], a.clone() + b.clone());
                    }
                }
            }
            sub = (sub - 1) & mask;
        }
        let mut relaxed = row.clone();
        for u in 0..n {
            let Some(base) = &row[u] else { continue };
            for v in 0..n {
                min_opt(&mut relaxed[v], base.clone() + d[u][v].clone());
            }
        }
        dp[mask] = relaxed;
    }
    let last = terminals[t - 1];
    let rest = full ^ (1 << (t - 1));
    let mut best: Option<S> = None;
    for v in 0..n {
        if let Some(x) = &dp[rest][v] {
            min_opt(&mut best, x.clone() + d[v][last].clone());
        }
    }
    Ok(best.expect("terminal set is connected"))
}

/// One dual variable: a cluster not holding the root, grown during `phase`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moat {
    pub phase: u32,
    pub members: Vec<PointId>,
    pub value: Exact,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DualSolution {
    pub moats: Vec<Moat>,
}

impl DualSolution {
    pub fn objective(&self) -> Exact {
        self.moats.iter().map(|m| m.value.clone()).sum()
    }
}

/// `(alpha - 1) * weight(rank)` together with the moat dual behind it.
///
/// Every cluster of phase `t` that misses the root gets `alpha^t (alpha - 1)`.
pub fn dual_lower_bound(h: &ClusterHistory, alpha: &Exact) -> Result<(Exact, DualSolution), OracleError> {
    let one = exact_int(1);
    let lb = (alpha - &one) * weight(&h.ranks, alpha)?;
    let mut moats = Vec::new();
    let mut scale = alpha - &one;
    for p in &h.phases {
        for part in p.parts() {
            if part[0] != 0 {
                moats.push(Moat { phase: p.phase, members: part, value: scale.clone() });
            }
        }
        scale *= alpha;
    }
    Ok((lb, DualSolution { moats }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualViolation {
    pub a: PointId,
    pub b: PointId,
    pub load: f64,
    pub distance: f64,
}

/// Check `sum of y_S over moats separating a and b <= d(a, b)` for every pair.
pub fn check_dual_feasible<S: Scalar>(dual: &DualSolution, m: &OnlineMetric<S>) -> Vec<DualViolation> {
    let n = m.len();
    let values: Vec<f64> = dual.moats.iter().map(|x| x.value.lossy_f64()).collect();
    let mut member_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut total = vec![0.0f64; n];
    for (idx, moat) in dual.moats.iter().enumerate() {
        for &v in &moat.members {
            if v < n {
                member_of[v].push(idx);
                total[v] += values[idx];
            }
        }
    }
    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let (la, lb) = (&member_of[a], &member_of[b]);
            let (mut i, mut j, mut shared) = (0, 0, 0.0);
            while i < la.len() && j < lb.len() {
                match la[i].cmp(&lb[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        shared += values[la[i]];
                        i += 1;
                        j += 1;
                    }
                }
            }
            let load = total[a] + total[b] - 2.0 * shared;
            let distance = m.d(a, b).lossy_f64();
            if load > distance * (1.0 + 1e-9) {
                out.push(DualViolation { a, b, load, distance });
            }
        }
    }
    out
}

fn binomial(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `f(l) = 2^(2l-1) (2l-1) / binom(2l, l)`.
pub fn f_potential(ell: u64) -> Exact {
    assert!(ell >= 1, "f is defined from 1");
    let num = (BigInt::one() << (2 * ell - 1) as usize) * BigInt::from(2 * ell - 1);
    Exact::new(num, binomial(2 * ell, ell))
}

/// `sum_{i=1}^{l-1} f(l) / (f(i) f(l-i))`.
pub fn f_identity_sum(ell: u64) -> Exact {
    let f: Vec<Exact> = (0..=ell).map(|i| if i == 0 { Exact::zero() } else { f_potential(i) }).collect();
    (1..ell).map(|i| &f[ell as usize] / (&f[i as usize] * &f[(ell - i) as usize])).sum()
}

/// `prod origin lengths / prod final lengths`, after checking that the
/// lineages of `finals` are exactly the keys of `origins`.
pub fn lineage_ratio<S: Scalar>(origins: &BTreeMap<usize, S>, finals: &[LeveledEdge<S>]) -> Result<Exact, OracleError> {
    if finals.len() != origins.len() {
        return Err(OracleError::LineageBroken(format!(
            "{} tree edges against {} greedy edges",
            finals.len(),
            origins.len()
        )));
    }
    // integer products, reduced once; per-step rational reduction dominates otherwise
    let product = |xs: &mut dyn Iterator<Item = Exact>| {
        xs.fold((BigInt::one(), BigInt::one()), |(n, d), x| (n * x.numer(), d * x.denom()))
    };
    let mut seen = BTreeMap::new();
    for e in finals {
        if !origins.contains_key(&e.lineage) {
            return Err(OracleError::LineageBroken(format!("edge ({},{}) has unknown lineage {}", e.u, e.v, e.lineage)));
        }
        if seen.insert(e.lineage, ()).is_some() {
            return Err(OracleError::LineageBroken(format!("lineage {} appears twice", e.lineage)));
        }
    }
    let (on, od) = product(&mut origins.values().map(|l| l.to_exact()));
    let (fnum, fden) = product(&mut finals.iter().map(|e| e.length.to_exact()));
    Ok(Exact::new(on * fden, od * fnum))
}
