//! Growing metric over the points revealed so far.
//!
//! Point `0` is the root; every later point gets the next index. The full
//! symmetric distance table is kept and every insertion is checked against
//! the triangle inequality for all existing pairs.

use thiserror::Error;

use crate::scalar::Scalar;

/// Arrival index of a point; `0` is the root.
pub type PointId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("expected {expected} distances for point {point}, got {got}")]
    WrongArity { point: PointId, expected: usize, got: usize },
    #[error("distance between {a} and {b} is {value}, must be positive and finite")]
    NonPositiveDistance { a: PointId, b: PointId, value: f64 },
    #[error("triangle inequality fails: d({a},{c}) exceeds d({a},{b}) + d({b},{c}) by {slack}")]
    TriangleViolation { a: PointId, b: PointId, c: PointId, slack: f64 },
    #[error("unknown point {0}")]
    UnknownPoint(PointId),
    #[error("empty point set")]
    EmptySet,
    #[error("point sets overlap at {0}")]
    Overlap(PointId),
}

#[derive(Debug, Clone)]
pub struct OnlineMetric<S> {
    // rows[i][j] = d(i, j) for j < i
    rows: Vec<Vec<S>>,
    min_pairwise: Option<S>,
    zero: S,
}

impl<S: Scalar> Default for OnlineMetric<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> OnlineMetric<S> {
    pub fn new() -> Self {
        Self { rows: Vec::new(), min_pairwise: None, zero: S::zero() }
    }

    /// Metric holding only the root.
    pub fn with_root() -> Self {
        let mut m = Self::new();
        m.add_point(&[]).expect("root has no predecessors");
        m
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn min_pairwise(&self) -> Option<&S> {
        self.min_pairwise.as_ref()
    }

    /// Reveal a new point with its distances to points `0..n`.
    pub fn add_point(&mut self, dists: &[S]) -> Result<PointId, MetricError> {
        let p = self.rows.len();
        if dists.len() != p {
            return Err(MetricError::WrongArity { point: p, expected: p, got: dists.len() });
        }
        for (a, d) in dists.iter().enumerate() {
            if !d.is_finite_value() || *d <= S::zero() {
                return Err(MetricError::NonPositiveDistance { a, b: p, value: d.lossy_f64() });
            }
        }
        self.check_triangles(p, dists)?;
        for d in dists {
            match &self.min_pairwise {
                Some(m) if m <= d => {}
                _ => self.min_pairwise = Some(d.clone()),
            }
        }
        self.rows.push(dists.to_vec());
        Ok(p)
    }

    fn check_triangles(&self, p: PointId, dists: &[S]) -> Result<(), MetricError> {
        let violation = |lhs: &S, r1: &S, r2: &S| {
            let rhs = r1.clone() + r2.clone();
            (!S::le_with_tolerance(lhs, &rhs)).then(|| (lhs.clone() - rhs).lossy_f64())
        };
        for a in 0..p {
            for b in 0..a {
                let dab = &self.rows[a][b];
                let (dpa, dpb) = (&dists[a], &dists[b]);
                if let Some(slack) = violation(dab, dpa, dpb) {
                    return Err(MetricError::TriangleViolation { a, b: p, c: b, slack });
                }
                if let Some(slack) = violation(dpa, dpb, dab) {
                    return Err(MetricError::TriangleViolation { a: p, b, c: a, slack });
                }
                if let Some(slack) = violation(dpb, dpa, dab) {
                    return Err(MetricError::TriangleViolation { a: p, b: a, c: b, slack });
                }
            }
        }
        Ok(())
    }

    pub fn distance(&self, a: PointId, b: PointId) -> Result<S, MetricError> {
        let n = self.len();
        if a >= n {
            return Err(MetricError::UnknownPoint(a));
        }
        if b >= n {
            return Err(MetricError::UnknownPoint(b));
        }
        Ok(self.d(a, b).clone())
    }

    /// Unchecked lookup; panics on out-of-range ids.
    pub fn d(&self, a: PointId, b: PointId) -> &S {
        use std::cmp::Ordering::*;
        match a.cmp(&b) {
            Greater => &self.rows[a][b],
            Less => &self.rows[b][a],
            Equal => &self.zero,
        }
    }

    /// Closest point of `among` to `p`; ties go to the smaller id.
    pub fn nearest(&self, p: PointId, among: impl IntoIterator<Item = PointId>) -> Result<(PointId, S), MetricError> {
        let mut best: Option<(PointId, S)> = None;
        for q in among {
            if q >= self.len() {
                return Err(MetricError::UnknownPoint(q));
            }
            if q == p {
                continue;
            }
            let d = self.d(p, q);
            let better = match &best {
                None => true,
                Some((bq, bd)) => d < bd || (d == bd && q < *bq),
            };
            if better {
                best = Some((q, d.clone()));
            }
        }
        best.ok_or(MetricError::EmptySet)
    }

    /// Nearest predecessor of `p` among `0..p`.
    pub fn nearest_predecessor(&self, p: PointId) -> Result<(PointId, S), MetricError> {
        self.nearest(p, 0..p)
    }

    /// `min_{s in a, t in b} d(s, t)` for disjoint non-empty sets.
    pub fn set_distance(&self, a: &[PointId], b: &[PointId]) -> Result<S, MetricError> {
        if a.is_empty() || b.is_empty() {
            return Err(MetricError::EmptySet);
        }
        for &x in a.iter().chain(b) {
            if x >= self.len() {
                return Err(MetricError::UnknownPoint(x));
            }
        }
        if let Some(&x) = a.iter().find(|x| b.contains(x)) {
            return Err(MetricError::Overlap(x));
        }
        let mut best: Option<&S> = None;
        for &s in a {
            for &t in b {
                let d = self.d(s, t);
                if best.is_none_or(|m| d < m) {
                    best = Some(d);
                }
            }
        }
        Ok(best.expect("non-empty").clone())
    }

    /// Exhaustive triangle scan over every stored triple.
    pub fn check_all_triangles(&self) -> Result<(), MetricError> {
        let n = self.len();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let rhs = self.d(a, b).clone() + self.d(b, c).clone();
                    if !S::le_with_tolerance(self.d(a, c), &rhs) {
                        let slack = (self.d(a, c).clone() - rhs).lossy_f64();
                        return Err(MetricError::TriangleViolation { a, b, c, slack });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> OnlineMetric<f64> {
        let mut m = OnlineMetric::new();
        m.add_point(&[]).unwrap();
        m.add_point(&[13.0]).unwrap();
        m.add_point(&[100.0, 87.0]).unwrap();
        m
    }

    #[test]
    fn add_point_assigns_dense_ids() {
        let mut m = OnlineMetric::<f64>::new();
        assert_eq!(m.add_point(&[]).unwrap(), 0);
        assert_eq!(m.min_pairwise(), None);
        assert_eq!(m.add_point(&[13.0]).unwrap(), 1);
        assert_eq!(m.min_pairwise(), Some(&13.0));
        // 100 = 13 + 87 holds with equality
        assert_eq!(m.add_point(&[100.0, 87.0]).unwrap(), 2);
        assert_eq!(m.min_pairwise(), Some(&13.0));
    }

    #[test]
    fn rejects_bad_distances() {
        let mut m = line();
        assert!(matches!(m.add_point(&[1.0, 2.0]), Err(MetricError::WrongArity { .. })));
        assert!(matches!(
            m.add_point(&[1.0, 0.0, 5.0]),
            Err(MetricError::NonPositiveDistance { a: 1, b: 3, .. })
        ));
        assert!(matches!(m.add_point(&[1.0, f64::INFINITY, 5.0]), Err(MetricError::NonPositiveDistance { .. })));
        // d(3,0)=1, d(3,1)=1 but d(0,1)=13
        assert!(matches!(m.add_point(&[1.0, 1.0, 99.0]), Err(MetricError::TriangleViolation { .. })));
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn triangle_violation_names_the_triple() {
        let mut m = OnlineMetric::<f64>::new();
        m.add_point(&[]).unwrap();
        m.add_point(&[1.0]).unwrap();
        let err = m.add_point(&[1.0, 5.0]).unwrap_err();
        // d(2,1)=5 > d(2,0)+d(0,1)=2
        assert_eq!(err, MetricError::TriangleViolation { a: 2, b: 0, c: 1, slack: 3.0 });
    }

    #[test]
    fn tolerance_admits_rounding_noise() {
        let mut m = OnlineMetric::<f64>::new();
        m.add_point(&[]).unwrap();
        m.add_point(&[13.0]).unwrap();
        m.add_point(&[100.0 * (1.0 + 1e-12), 87.0]).unwrap();
    }

    #[test]
    fn distance_queries() {
        let m = line();
        assert_eq!(m.distance(0, 0).unwrap(), 0.0);
        assert_eq!(m.distance(0, 1).unwrap(), 13.0);
        assert_eq!(m.distance(2, 1).unwrap(), 87.0);
        assert_eq!(m.distance(1, 2).unwrap(), 87.0);
        assert_eq!(m.distance(3, 0), Err(MetricError::UnknownPoint(3)));
    }

    #[test]
    fn nearest_queries() {
        let m = line();
        assert_eq!(m.nearest(2, [0, 1]).unwrap(), (1, 87.0));
        assert_eq!(m.nearest(1, [0]).unwrap(), (0, 13.0));
        assert_eq!(m.nearest(1, std::iter::empty()), Err(MetricError::EmptySet));

        let mut eq = OnlineMetric::<f64>::new();
        eq.add_point(&[]).unwrap();
        eq.add_point(&[6.0]).unwrap();
        eq.add_point(&[5.0, 5.0]).unwrap();
        assert_eq!(eq.nearest(2, [1, 0]).unwrap(), (0, 5.0));
        assert_eq!(eq.nearest(2, [0, 1]).unwrap(), (0, 5.0));
    }

    #[test]
    fn set_distance_queries() {
        let m = line();
        assert_eq!(m.set_distance(&[0, 1], &[2]).unwrap(), 87.0);
        assert_eq!(m.set_distance(&[0], &[2]).unwrap(), m.distance(0, 2).unwrap());
        assert_eq!(m.set_distance(&[], &[2]), Err(MetricError::EmptySet));
        assert_eq!(m.set_distance(&[0, 1], &[1]), Err(MetricError::Overlap(1)));

        let mut abc = OnlineMetric::<f64>::new();
        abc.add_point(&[]).unwrap();
        abc.add_point(&[3.0]).unwrap();
        abc.add_point(&[7.0, 5.0]).unwrap();
        assert_eq!(abc.set_distance(&[0], &[1, 2]).unwrap(), 3.0);
    }

    #[test]
    fn exact_scalar_metric() {
        use crate::scalar::exact_int;
        let mut m = OnlineMetric::<crate::Exact>::new();
        m.add_point(&[]).unwrap();
        m.add_point(&[exact_int(13)]).unwrap();
        m.add_point(&[exact_int(100), exact_int(87)]).unwrap();
        let over = exact_int(100) + crate::Exact::new(1.into(), 1_000_000_000_000i64.into());
        let mut m2 = OnlineMetric::<crate::Exact>::new();
        m2.add_point(&[]).unwrap();
        m2.add_point(&[exact_int(13)]).unwrap();
        // exact scalars have zero tolerance
        assert!(m2.add_point(&[over, exact_int(87)]).is_err());
        assert!(m.check_all_triangles().is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nearest_is_order_independent(pts in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 2..20), seed in any::<u64>()) {
                let mut m = OnlineMetric::<f64>::new();
                for (i, p) in pts.iter().enumerate() {
                    let row: Vec<f64> = pts[..i].iter().map(|q| ((p.0-q.0).powi(2)+(p.1-q.1).powi(2)).sqrt().max(1e-6)).collect();
                    if m.add_point(&row).is_err() { return Ok(()); }
                }
                let p = pts.len() - 1;
                let mut among: Vec<usize> = (0..p).collect();
                let forward = m.nearest(p, among.clone()).unwrap();
                let k = (seed as usize) % among.len();
                among.rotate_left(k);
                among.reverse();
                prop_assert_eq!(forward, m.nearest(p, among).unwrap());
            }
        }
    }
}
