mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_graph, GraphSpec};
use shgnn::graph::TaskKind;
use shgnn::heterophily::{
    disc, dissim_classification, dissim_regression, label_diff_deciles, spatial_diversity_scores,
    GroundKind, MetricOptions, TransportSetup,
};
use shgnn::transport::{exact_wd_1d, sinkhorn_wd, GroundCost, SinkhornParams};

fn random_group(rng: &mut ChaCha8Rng, n: usize, v: usize) -> Vec<usize> {
    let size = rng.random_range(1..n);
    (0..size)
        .map(|_| rng.random_range(0..n))
        .filter(|&j| j != v)
        .collect()
}

fn distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn regression_masses_sum_to_one(seed in any::<u64>(), n in 3usize..30) {
        let g = random_graph(&GraphSpec::regression(n), seed);
        prop_assume!(g.num_edges() > 0);
        let deciles = label_diff_deciles(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = rng.random_range(0..n);
        let group = random_group(&mut rng, n, v);
        prop_assume!(!group.is_empty());
        let d = dissim_regression(&g, v, &group, &deciles).unwrap();
        prop_assert!((d.total() - 1.0).abs() <= 1e-12);
        prop_assert!(d.masses.iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn classification_masses_sum_to_heterophilic_share(seed in any::<u64>(), n in 3usize..30, classes in 2usize..6) {
        let spec = GraphSpec { task: TaskKind::Classification { classes }, ..GraphSpec::regression(n) };
        let g = random_graph(&spec, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = rng.random_range(0..n);
        let group = random_group(&mut rng, n, v);
        prop_assume!(!group.is_empty());
        let d = dissim_classification(&g, v, &group).unwrap();
        let own = g.class_of(v).unwrap();
        let share = group.iter().filter(|&&j| g.class_of(j).unwrap() != own).count() as f64 / group.len() as f64;
        prop_assert!((d.total() - share).abs() <= 1e-12);
        prop_assert_eq!(d.masses[own], 0.0);

        // padding restores balance between any two groups
        let setup = TransportSetup::for_task(g.task(), GroundKind::Ordinal);
        let other = random_group(&mut rng, n, v);
        prop_assume!(!other.is_empty());
        let e = dissim_classification(&g, v, &other).unwrap();
        let (p, q) = (setup.balance(&d.masses), setup.balance(&e.masses));
        prop_assert_eq!(p.len(), setup.cost.len());
        prop_assert!((p.iter().sum::<f64>() - q.iter().sum::<f64>()).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn disc_is_nonnegative_and_zero_on_the_diagonal(seed in any::<u64>(), n in 3usize..15, classes in 0usize..4) {
        let task = if classes < 2 { TaskKind::Regression } else { TaskKind::Classification { classes } };
        let g = random_graph(&GraphSpec { task, ..GraphSpec::regression(n) }, seed);
        prop_assume!(g.num_edges() > 0);
        let deciles = (task == TaskKind::Regression).then(|| label_diff_deciles(&g).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = rng.random_range(0..n);
        let a = random_group(&mut rng, n, v);
        let b = random_group(&mut rng, n, v);
        prop_assume!(!a.is_empty() && !b.is_empty());
        let opts = MetricOptions::default();
        prop_assert_eq!(disc(&g, v, &a, &a, deciles.as_ref(), &opts).unwrap(), 0.0);
        prop_assert!(disc(&g, v, &a, &b, deciles.as_ref(), &opts).unwrap() >= 0.0);
    }

    #[test]
    fn scores_are_shares_and_ignore_unlabeled_nodes(seed in any::<u64>(), n in 4usize..15) {
        let g = random_graph(&GraphSpec { explicit: 0.5, ..GraphSpec::regression(n) }, seed);
        prop_assume!(g.num_edges() > 0);
        let opts = MetricOptions::default();
        let s = spatial_diversity_scores(&g, &opts).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.sector) && (0.0..=1.0).contains(&s.ring));

        // an extra unlabeled node with no edges changes neither score
        let mut coords = g.coords().to_vec();
        coords.push([0.0, 0.0]);
        let mut x = Array2::zeros((n + 1, g.feature_dim()));
        x.slice_mut(ndarray::s![..n, ..]).assign(g.features());
        let mut labels = g.labels().to_vec();
        labels.push(None);
        let bigger = shgnn::graph::SpatialGraph::new(coords, g.edges().to_vec(), x, labels, g.task()).unwrap();
        let t = spatial_diversity_scores(&bigger, &opts).unwrap();
        prop_assert_eq!((s.sector, s.ring), (t.sector, t.ring));
    }

    #[test]
    fn sinkhorn_error_shrinks_with_epsilon(seed in any::<u64>(), k in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = (distribution(&mut rng, k), distribution(&mut rng, k));
        let exact = exact_wd_1d(&p, &q).unwrap();
        let cost = GroundCost::ordinal(k);
        let err = |epsilon: f64| {
            let params = SinkhornParams { epsilon, ..SinkhornParams::default() };
            (sinkhorn_wd(&p, &q, &cost, &params).unwrap().cost - exact).abs()
        };
        let (coarse, fine) = (err(0.1), err(0.01));
        prop_assert!(fine <= coarse + 1e-9, "error {} at 0.01 vs {} at 0.1", fine, coarse);
    }
}
