//! Arrival instances: generation, rescaling, validation and JSON persistence.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{MetricError, OnlineMetric};
use crate::oracle::{steiner_opt_on_closure, GraphInstance, OracleError, MAX_STEINER_TERMINALS};
use crate::scalar::{two_alpha_pow, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("cannot read or write {path}: {why}")]
    Io { path: String, why: String },
    #[error("malformed instance JSON: {0}")]
    Json(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("arrivals {a} and {b} coincide")]
    DegenerateInstance { a: usize, b: usize },
    #[error("arrivals {a} and {b} are {distance} apart, below 2 alpha = {needed}; rescale first")]
    ScalingPrecondition { a: usize, b: usize, distance: f64, needed: f64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    /// Points in Euclidean space.
    Coords(Vec<Vec<f64>>),
    /// Vertices of a weighted graph under shortest-path distances.
    Graph(GraphInstance<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSpec {
    pub name: String,
    pub alpha_for_scaling: f64,
    pub declared_integral: bool,
    pub source: Source,
    /// Points (or graph terminals) in arrival order; the first is the root.
    pub arrival_order: Vec<usize>,
}

/// A JSON number, or a decimal string for exactly stored integers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Number {
    Text(String),
    Float(f64),
}

impl Number {
    fn from_value(v: f64, integral: bool) -> Self {
        if integral && v.fract() == 0.0 && v.abs() < 9.007_199_254_740_992e15 {
            Number::Text(format!("{}", v as i64))
        } else {
            Number::Float(v)
        }
    }

    fn value(&self) -> Result<f64, InstanceError> {
        match self {
            Number::Float(v) => Ok(*v),
            Number::Text(s) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| InstanceError::Schema(format!("{s:?} is not a number"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize, Number)>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum SourceFile {
    Coords(Vec<Vec<Number>>),
    Graph(GraphFile),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    name: String,
    alpha_for_scaling: f64,
    declared_integral: bool,
    source: SourceFile,
    arrival_order: Vec<usize>,
}

impl InstanceSpec {
    pub fn to_json(&self) -> String {
        let int = self.declared_integral;
        let source = match &self.source {
            Source::Coords(pts) => {
                SourceFile::Coords(pts.iter().map(|p| p.iter().map(|&x| Number::from_value(x, int)).collect()).collect())
            }
            Source::Graph(g) => SourceFile::Graph(GraphFile {
                n: g.n,
                edges: g.edges.iter().map(|&(u, v, w)| (u, v, Number::from_value(w, int))).collect(),
            }),
        };
        let file = InstanceFile {
            name: self.name.clone(),
            alpha_for_scaling: self.alpha_for_scaling,
            declared_integral: int,
            source,
            arrival_order: self.arrival_order.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
        let source = match file.source {
            SourceFile::Coords(pts) => Source::Coords(
                pts.iter().map(|p| p.iter().map(Number::value).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?,
            ),
            SourceFile::Graph(g) => Source::Graph(GraphInstance {
                n: g.n,
                edges: g.edges.iter().map(|(u, v, w)| Ok((*u, *v, w.value()?))).collect::<Result<_, InstanceError>>()?,
            }),
        };
        Ok(Self {
            name: file.name,
            alpha_for_scaling: file.alpha_for_scaling,
            declared_integral: file.declared_integral,
            source,
            arrival_order: file.arrival_order,
        })
    }

    pub fn load(path: &Path) -> Result<Self, InstanceError> {
        let text = fs::read_to_string(path).map_err(|e| InstanceError::Io { path: path.display().to_string(), why: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), InstanceError> {
        fs::write(path, self.to_json() + "\n")
            .map_err(|e| InstanceError::Io { path: path.display().to_string(), why: e.to_string() })
    }

    /// Number of points in the underlying space (graph vertices or coordinates).
    pub fn space_size(&self) -> usize {
        match &self.source {
            Source::Coords(p) => p.len(),
            Source::Graph(g) => g.n,
        }
    }

    /// Structural checks that need no distances.
    pub fn check_schema(&self) -> Result<(), InstanceError> {
        let schema = |why: String| Err(InstanceError::Schema(why));
        if !(self.alpha_for_scaling.is_finite() && self.alpha_for_scaling > 1.0) {
            return schema(format!("alpha_for_scaling must exceed 1, got {}", self.alpha_for_scaling));
        }
        let n = self.space_size();
        if self.arrival_order.is_empty() {
            return schema("arrival_order is empty; the root must arrive".into());
        }
        let mut seen = vec![false; n];
        for &p in &self.arrival_order {
            if p >= n {
                return schema(format!("arrival {p} is not a point of the instance"));
            }
            if seen[p] {
                return schema(format!("point {p} arrives twice"));
            }
            seen[p] = true;
        }
        let values: Vec<f64> = match &self.source {
            Source::Coords(pts) => {
                if self.arrival_order.len() != n {
                    return schema(format!("{} of {n} points arrive; coordinates must all arrive", self.arrival_order.len()));
                }
                let dim = pts.first().map_or(0, Vec::len);
                if let Some(i) = pts.iter().position(|p| p.len() != dim) {
                    return schema(format!("point {i} has dimension {} instead of {dim}", pts[i].len()));
                }
                pts.iter().flatten().copied().collect()
            }
            Source::Graph(g) => {
                for &(u, v, w) in &g.edges {
                    if u >= n || v >= n || u == v {
                        return schema(format!("bad graph edge ({u},{v})"));
                    }
                    if !(w > 0.0) {
                        return schema(format!("edge ({u},{v}) has non-positive weight {w}"));
                    }
                }
                g.edges.iter().map(|e| e.2).collect()
            }
        };
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return schema(format!("non-finite value {v}"));
        }
        if self.declared_integral {
            if let Some(v) = values.iter().find(|v| v.fract() != 0.0) {
                return schema(format!("declared integral but holds {v}"));
            }
        }
        Ok(())
    }

    /// Distance rows in arrival order: row `i` lists distances to arrivals `0..i`.
    pub fn arrival_rows<S: Scalar>(&self) -> Result<Vec<Vec<S>>, InstanceError> {
        self.check_schema()?;
        let order = &self.arrival_order;
        let conv = |v: f64| S::from_f64(v).ok_or_else(|| InstanceError::Schema(format!("{v} not representable")));
        match &self.source {
            Source::Coords(pts) => order
                .iter()
                .enumerate()
                .map(|(i, &p)| order[..i].iter().map(|&q| conv(euclid(&pts[p], &pts[q]))).collect())
                .collect(),
            Source::Graph(g) => {
                let gs = GraphInstance { n: g.n, edges: g.edges.iter().map(|&(u, v, w)| Ok((u, v, conv(w)?))).collect::<Result<_, InstanceError>>()? };
                let d = gs.closure()?;
                Ok(order.iter().enumerate().map(|(i, &p)| order[..i].iter().map(|&q| d[p][q].clone()).collect()).collect())
            }
        }
    }

    /// Validated online metric over the arrivals.
    pub fn metric<S: Scalar>(&self) -> Result<OnlineMetric<S>, InstanceError> {
        let mut m = OnlineMetric::new();
        for row in self.arrival_rows::<S>()? {
            match m.add_point(&row) {
                Ok(_) => {}
                Err(MetricError::NonPositiveDistance { a, b, value }) if value == 0.0 => {
                    return Err(InstanceError::DegenerateInstance { a, b })
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(m)
    }

    /// Exact Steiner optimum over the first `count` arrivals, when the
    /// instance is graph-backed and small enough.
    pub fn steiner_opt_prefix(&self, count: usize) -> Option<Result<f64, InstanceError>> {
        let Source::Graph(g) = &self.source else { return None };
        if self.arrival_order.len() > MAX_STEINER_TERMINALS {
            return None;
        }
        let run = || -> Result<f64, InstanceError> {
            let d = g.closure()?;
            Ok(steiner_opt_on_closure(&d, &self.arrival_order[..count])?)
        };
        Some(run())
    }

    /// All arrival prefixes at once; `None` unless graph-backed and small.
    pub fn steiner_opt_all(&self) -> Option<Result<Vec<f64>, InstanceError>> {
        let Source::Graph(g) = &self.source else { return None };
        if self.arrival_order.len() > MAX_STEINER_TERMINALS {
            return None;
        }
        let run = || -> Result<Vec<f64>, InstanceError> {
            let d = g.closure()?;
            (1..=self.arrival_order.len())
                .map(|c| Ok(steiner_opt_on_closure(&d, &self.arrival_order[..c])?))
                .collect()
        };
        Some(run())
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// All-pairs shortest paths of a graph instance.
pub fn graph_closure(g: &GraphInstance<f64>) -> Result<Vec<Vec<f64>>, InstanceError> {
    Ok(g.closure()?)
}

fn min_pair(rows: &[Vec<f64>]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            if best.is_none_or(|b| d < b.2) {
                best = Some((j, i, d));
            }
        }
    }
    best
}

fn scaled(spec: &InstanceSpec, s: f64, alpha: f64) -> InstanceSpec {
    let source = match &spec.source {
        Source::Coords(pts) => Source::Coords(pts.iter().map(|p| p.iter().map(|x| x * s).collect()).collect()),
        Source::Graph(g) => Source::Graph(GraphInstance { n: g.n, edges: g.edges.iter().map(|&(u, v, w)| (u, v, w * s)).collect() }),
    };
    InstanceSpec { source, alpha_for_scaling: alpha, ..spec.clone() }
}

/// Multiply every distance by `2 alpha / min_pairwise`, rounded up to an
/// integer when the instance is declared integral.
///
/// Returns the new spec and the factor used.
pub fn rescale(spec: &InstanceSpec, alpha: f64) -> Result<(InstanceSpec, f64), InstanceError> {
    let rows = spec.arrival_rows::<f64>()?;
    let Some((a, b, min)) = min_pair(&rows) else {
        return Ok((InstanceSpec { alpha_for_scaling: alpha, ..spec.clone() }, 1.0));
    };
    if !(min > 0.0) {
        return Err(InstanceError::DegenerateInstance { a, b });
    }
    let target = 2.0 * alpha;
    if spec.declared_integral {
        let s = (target / min).ceil().max(1.0);
        return Ok((scaled(spec, s, alpha), s));
    }
    let mut s = target / min;
    loop {
        let out = scaled(spec, s, alpha);
        let new_min = min_pair(&out.arrival_rows::<f64>()?).map_or(target, |p| p.2);
        if new_min >= target {
            return Ok((out, s));
        }
        s *= 1.0 + 4.0 * f64::EPSILON;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSummary {
    pub points: usize,
    pub min_pairwise: Option<f64>,
}

/// Schema, metric axioms, arrival order and the `min >= 2 alpha` precondition.
pub fn verify_instance(spec: &InstanceSpec) -> Result<InstanceSummary, InstanceError> {
    let m = spec.metric::<f64>()?;
    let alpha = spec.alpha_for_scaling;
    let needed = two_alpha_pow(&alpha, 1);
    let mut min: Option<(usize, usize, f64)> = None;
    for i in 0..m.len() {
        for j in 0..i {
            let d = *m.d(i, j);
            if min.is_none_or(|b| d < b.2) {
                min = Some((j, i, d));
            }
        }
    }
    if let Some((a, b, d)) = min {
        if d < needed {
            return Err(InstanceError::ScalingPrecondition { a, b, distance: d, needed });
        }
    }
    Ok(InstanceSummary { points: m.len(), min_pairwise: min.map(|x| x.2) })
}

/// The swap lower-bound gadget: `k` copies of a five-vertex spider sharing `a`.
///
/// Vertex `a` is 0; copy `q` holds `b = 1+4q`, `c = 2+4q`, `d = 3+4q`,
/// `e = 4+4q` with edges `ab`, `bc`, `be` of length 1 and `cd` of length 2.
/// Arrivals: every `d`, every `e`, every `c`, then `a`, then every `b`.
pub fn gen_spider(k: usize) -> InstanceSpec {
    assert!(k >= 1, "spider needs at least one copy");
    let mut edges = Vec::with_capacity(4 * k);
    for q in 0..k {
        let (b, c, d, e) = (1 + 4 * q, 2 + 4 * q, 3 + 4 * q, 4 + 4 * q);
        edges.push((0, b, 1.0));
        edges.push((b, c, 1.0));
        edges.push((c, d, 2.0));
        edges.push((b, e, 1.0));
    }
    let copies = |off: usize| (0..k).map(move |q| off + 4 * q);
    let mut arrival_order: Vec<usize> = copies(3).chain(copies(4)).chain(copies(2)).collect();
    arrival_order.push(0);
    arrival_order.extend(copies(1));
    InstanceSpec {
        name: format!("spider-{k}"),
        alpha_for_scaling: 6.0,
        declared_integral: true,
        source: Source::Graph(GraphInstance { n: 4 * k + 1, edges }),
        arrival_order,
    }
}

/// `n` uniform points in the unit cube (the first is the root).
pub fn gen_euclidean(n: usize, dim: usize, seed: u64) -> InstanceSpec {
    assert!(n >= 1, "an instance holds at least the root");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
    InstanceSpec {
        name: format!("euclidean-n{n}-d{dim}-s{seed}"),
        alpha_for_scaling: 6.0,
        declared_integral: false,
        source: Source::Coords(pts),
        arrival_order: (0..n).collect(),
    }
}

/// Random connected graph with integer weights in `1..=20`; `terminals`
/// random vertices arrive in random order.
pub fn gen_graph(vertices: usize, terminals: usize, seed: u64) -> InstanceSpec {
    assert!(vertices >= 1 && terminals >= 1 && terminals <= vertices, "need 1 <= terminals <= vertices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 1..vertices {
        let u = rng.gen_range(0..v);
        edges.push((u, v, f64::from(rng.gen_range(1..=20u32))));
    }
    for _ in 0..vertices {
        let (u, v) = (rng.gen_range(0..vertices), rng.gen_range(0..vertices));
        if u != v {
            edges.push((u.min(v), u.max(v), f64::from(rng.gen_range(1..=20u32))));
        }
    }
    let mut ids: Vec<usize> = (0..vertices).collect();
    ids.shuffle(&mut rng);
    ids.truncate(terminals);
    InstanceSpec {
        name: format!("graph-v{vertices}-t{terminals}-s{seed}"),
        alpha_for_scaling: 6.0,
        declared_integral: true,
        source: Source::Graph(GraphInstance { n: vertices, edges }),
        arrival_order: ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spider_d(spec: &InstanceSpec) -> Vec<Vec<f64>> {
        let Source::Graph(g) = &spec.source else { panic!("graph") };
        graph_closure(g).unwrap()
    }

    #[test]
    fn spider_distances() {
        let s1 = gen_spider(1);
        let d = spider_d(&s1);
        let (a, b, c, dd, e) = (0, 1, 2, 3, 4);
        assert_eq!(d[e][dd], 4.0);
        assert_eq!(d[c][e], 2.0);
        assert_eq!(d[c][dd], 2.0);
        assert_eq!(d[a][b], 1.0);
        assert_eq!(s1.arrival_order, vec![3, 4, 2, 0, 1]);

        let s2 = gen_spider(2);
        assert_eq!(spider_d(&s2)[3][7], 8.0);

        let s6 = gen_spider(6);
        assert_eq!(s6.space_size(), 25);
        let Source::Graph(g) = &s6.source else { unreachable!() };
        assert_eq!(g.edges.len(), 24);
        assert_eq!(s6.arrival_order.len(), 25);
    }

    #[test]
    fn closure_of_path_and_single() {
        let path = GraphInstance { n: 3, edges: vec![(0, 1, 1.0), (1, 2, 1.0)] };
        assert_eq!(graph_closure(&path).unwrap()[0][2], 2.0);
        let one = GraphInstance::<f64> { n: 1, edges: vec![] };
        assert_eq!(graph_closure(&one).unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn rescale_examples() {
        let mut tri = gen_euclidean(3, 2, 0);
        tri.source = Source::Coords(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]);
        tri.declared_integral = false;
        let (out, s) = rescale(&tri, 6.0).unwrap();
        assert!((s - 12.0).abs() < 1e-9);
        assert!(verify_instance(&out).is_ok());

        let (spider, s) = rescale(&gen_spider(1), 6.0).unwrap();
        assert_eq!(s, 12.0);
        assert_eq!(spider_d(&spider)[4][3], 48.0);

        let (again, s) = rescale(&spider, 6.0).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(again, spider);

        let mut dup = gen_euclidean(2, 1, 0);
        dup.source = Source::Coords(vec![vec![0.5], vec![0.5]]);
        assert!(matches!(rescale(&dup, 6.0), Err(InstanceError::DegenerateInstance { .. })));
        assert!(matches!(verify_instance(&dup), Err(InstanceError::DegenerateInstance { .. })));
    }

    #[test]
    fn verify_examples() {
        let (spider, _) = rescale(&gen_spider(3), 6.0).unwrap();
        assert!(verify_instance(&spider).is_ok());
        assert!(matches!(verify_instance(&gen_spider(3)), Err(InstanceError::ScalingPrecondition { .. })));

        let broken = InstanceSpec {
            name: "broken".into(),
            alpha_for_scaling: 6.0,
            declared_integral: true,
            source: Source::Coords(vec![vec![0.0], vec![100.0], vec![13.0]]),
            arrival_order: vec![0, 1, 2],
        };
        assert!(verify_instance(&broken).is_ok());
        let mut bad = broken.clone();
        bad.arrival_order = vec![0, 1, 1];
        assert!(matches!(bad.check_schema(), Err(InstanceError::Schema(_))));
    }

    #[test]
    fn euclidean_is_deterministic() {
        assert_eq!(gen_euclidean(20, 3, 7), gen_euclidean(20, 3, 7));
        assert_ne!(gen_euclidean(20, 3, 7), gen_euclidean(20, 3, 8));
        assert_eq!(gen_euclidean(1, 2, 1).arrival_order, vec![0]);
        assert!(gen_euclidean(3, 2, 5).metric::<f64>().is_ok());
    }

    #[test]
    fn graph_generator_is_connected() {
        for seed in 0..20 {
            let g = gen_graph(15, 8, seed);
            let (g, _) = rescale(&g, 6.0).unwrap();
            assert!(verify_instance(&g).is_ok());
            assert!(g.steiner_opt_prefix(8).unwrap().unwrap() > 0.0);
        }
    }

    #[test]
    fn integral_values_are_strings() {
        let json = gen_spider(1).to_json();
        assert!(json.contains("\"2\""));
        assert_eq!(InstanceSpec::from_json(&json).unwrap(), gen_spider(1));
    }

    proptest! {
        #[test]
        fn json_round_trip(n in 1usize..12, dim in 1usize..4, seed in any::<u64>()) {
            let spec = gen_euclidean(n, dim, seed);
            let back = InstanceSpec::from_json(&spec.to_json()).unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(back.to_json(), spec.to_json());
        }

        #[test]
        fn graph_round_trip(v in 2usize..15, seed in any::<u64>()) {
            let spec = gen_graph(v, v / 2 + 1, seed);
            prop_assert_eq!(InstanceSpec::from_json(&spec.to_json()).unwrap(), spec);
        }
    }
}
