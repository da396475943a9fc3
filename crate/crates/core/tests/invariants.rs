use online_steiner::maintainer::find_improving_swap;
use online_steiner::{
    rescale, Algorithm, InstanceSpec, Maintainer, MaintainerConfig, OnlineMetric, PhaseClustering, Source,
};
use online_steiner::clustering::{merge_phase, run_clustering};
use proptest::prelude::*;

/// Distinct lattice points in random arrival order; `rows` spaces them 12 apart.
fn lattice(max: usize) -> impl Strategy<Value = Vec<(i32, i32)>> {
    prop::collection::btree_set((0..25i32, 0..25i32), 2..max).prop_shuffle_vec()
}

trait ShuffleVec {
    fn prop_shuffle_vec(self) -> BoxedStrategy<Vec<(i32, i32)>>;
}

impl<S: Strategy<Value = std::collections::BTreeSet<(i32, i32)>> + 'static> ShuffleVec for S {
    fn prop_shuffle_vec(self) -> BoxedStrategy<Vec<(i32, i32)>> {
        self.prop_map(|s| s.into_iter().collect::<Vec<_>>()).prop_shuffle().boxed()
    }
}

fn rows(pts: &[(i32, i32)]) -> Vec<Vec<f64>> {
    (0..pts.len())
        .map(|i| {
            (0..i)
                .map(|j| {
                    let (dx, dy) = (f64::from(pts[i].0 - pts[j].0), f64::from(pts[i].1 - pts[j].1));
                    12.0 * (dx * dx + dy * dy).sqrt()
                })
                .collect()
        })
        .collect()
}

fn metric(rows: &[Vec<f64>]) -> OnlineMetric<f64> {
    let mut m = OnlineMetric::new();
    for r in rows {
        m.add_point(r).unwrap();
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn small_k_keeps_tree_valid(pts in lattice(40), k in 1u32..4, constant in any::<bool>()) {
        let algorithm = if constant { Algorithm::Constant } else { Algorithm::Single };
        let budget = if constant { k as usize } else { 1 };
        let cfg = MaintainerConfig { algorithm, k_override: Some(k), ..MaintainerConfig::default() };
        let mut mt = Maintainer::<f64>::new(cfg).unwrap();
        for row in rows(&pts).iter().skip(1) {
            let r = mt.on_arrival(row).unwrap();
            prop_assert!(r.swap_count <= budget);
            prop_assert_eq!(r.trace.added.len(), r.trace.removed.len() + 1);
            let report = mt.tree().check_valid(Some(mt.metric()), mt.virtual_ranks().values(), &6.0);
            prop_assert!(report.is_valid(), "{:?}", report.violations);
            let sum: f64 = mt.tree().edges().iter().map(|e| e.length).sum();
            prop_assert!((sum - r.tree_cost).abs() <= 1e-9 * sum);
            prop_assert!(r.mst_cost <= r.tree_cost * (1.0 + 1e-12));
        }
    }

    #[test]
    fn greedy_rests_quiescent(pts in lattice(30), eps_quarters in 1u32..5) {
        let eps = f64::from(eps_quarters) / 4.0;
        let cfg = MaintainerConfig { algorithm: Algorithm::Greedy, epsilon: eps, ..MaintainerConfig::default() };
        let mut mt = Maintainer::<f64>::new(cfg).unwrap();
        for row in rows(&pts).iter().skip(1) {
            mt.on_arrival(row).unwrap();
            prop_assert!(find_improving_swap(mt.tree(), mt.metric(), &eps).is_none());
            // brute force over every non-tree pair and its tree cycle
            let tree = mt.tree();
            let n = tree.vertex_count();
            for a in 0..n {
                for b in 0..a {
                    let f = mt.metric().distance(a, b).unwrap();
                    for idx in tree.path_edges(a, b) {
                        prop_assert!(tree.edges()[idx].length <= (1.0 + eps) * f);
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_phases_match_stepwise_merges(pts in lattice(30)) {
        let m = metric(&rows(&pts));
        let h = run_clustering(&m, m.len() - 1, &6.0).unwrap();
        let mut cur = PhaseClustering::singletons(m.len());
        for (t, phase) in h.phases.iter().enumerate().skip(1) {
            cur = merge_phase(&cur, &m, &(2.0 * 6f64.powi(t as i32 + 1)));
            prop_assert_eq!(&cur.labels, &phase.labels);
        }
        prop_assert!(h.phases.last().unwrap().labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn greedy_swaps_are_scale_invariant(pts in lattice(25)) {
        let coords: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![f64::from(x), f64::from(y)]).collect();
        let raw = InstanceSpec {
            name: "lattice".into(),
            alpha_for_scaling: 6.0,
            declared_integral: true,
            arrival_order: (0..coords.len()).collect(),
            source: Source::Coords(coords),
        };
        let (scaled, s) = rescale(&raw, 6.0).unwrap();
        prop_assert_eq!(s.fract(), 0.0);
        let run = |spec: &InstanceSpec| {
            let cfg = MaintainerConfig { algorithm: Algorithm::Greedy, epsilon: 0.5, ..MaintainerConfig::default() };
            let mut mt = Maintainer::<f64>::new(cfg).unwrap();
            spec.arrival_rows::<f64>()
                .unwrap()
                .iter()
                .skip(1)
                .map(|r| {
                    let t = mt.on_arrival(r).unwrap().trace;
                    t.removed.iter().map(|e| e.endpoints()).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(&raw), run(&scaled));
    }
}
