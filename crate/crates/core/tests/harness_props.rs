use proptest::prelude::*;

use shgnn::harness::{
    auc, classification_metrics, format_fig1d_csv, regression_metrics, Fig1dCell, Fig1dOptions,
};
use shgnn::model::ModelKind;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn regression_metric_ranges(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..60)) {
        let (pred, target): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = regression_metrics(&pred, &target).unwrap();
        prop_assert!(m.mae >= 0.0);
        prop_assert!(m.rmse >= m.mae * (1.0 - 1e-12));
        if let Some(r2) = m.r2 {
            prop_assert!(r2 <= 1.0);
        }
    }

    #[test]
    fn auc_is_a_probability_and_flips_with_the_scores(items in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..60)) {
        let (scores, labels): (Vec<f64>, Vec<bool>) = items.into_iter().unzip();
        match auc(&scores, &labels) {
            Some(a) => {
                prop_assert!((0.0..=1.0).contains(&a));
                let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
                prop_assert!((auc(&flipped, &labels).unwrap() - (1.0 - a)).abs() <= 1e-12);
            }
            None => prop_assert!(labels.iter().all(|&l| l) || labels.iter().all(|&l| !l)),
        }
    }

    #[test]
    fn classification_metric_ranges(rows in prop::collection::vec((prop::collection::vec(0.01f64..1.0, 3), 0usize..3), 1..40)) {
        let probs: Vec<Vec<f64>> = rows
            .iter()
            .map(|(r, _)| {
                let total: f64 = r.iter().sum();
                r.iter().map(|v| v / total).collect()
            })
            .collect();
        let labels: Vec<usize> = rows.iter().map(|(_, c)| *c).collect();
        let m = classification_metrics(&probs, &labels, 0.5).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.f1));
        if let Some(a) = m.auc {
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}

#[test]
fn fig1d_table_has_one_row_per_cell() {
    let opts = Fig1dOptions::new(1);
    let cells: Vec<Fig1dCell> = opts
        .graphs
        .iter()
        .flat_map(|&i| {
            [ModelKind::Gcn, ModelKind::Shgnn].map(|model| Fig1dCell {
                graph_index: i,
                model,
                lambda_ring: 0.1 * i as f64,
                test_rmse: vec![1.0, 2.0],
                diverged_runs: 0,
            })
        })
        .collect();
    let csv = format_fig1d_csv(&opts, &cells);
    let data: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(data.len(), 20);
    assert!(csv
        .lines()
        .any(|l| l.starts_with("graph_index,model,mean,std,lambda_ring")));
    assert!(data.iter().all(|l| l.split(',').count() == 6));
}
