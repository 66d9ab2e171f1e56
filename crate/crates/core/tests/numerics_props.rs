//! Randomized checks of the tape: every op's gradient against central
//! differences, softmax normalization and gradient accumulation.

use std::rc::Rc;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shgnn::error::Result;
use shgnn::numerics::{gradcheck, Csr, ParamStore, Tape, Var};

const TOL: f64 = 1e-5;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 - 1.0)
}

/// Checks `op` on parameters with the given shapes, reducing its output to
/// a scalar through a fixed random weighting.
fn check_op<F>(seed: u64, shapes: &[(usize, usize)], op: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ids: Vec<_> = shapes
        .iter()
        .enumerate()
        .map(|(k, &(r, c))| store.add(format!("p{k}"), random(&mut rng, r, c)))
        .collect();
    let mut probe = Tape::new();
    let vars: Vec<Var> = ids
        .iter()
        .map(|&id| probe.param(&store, id).unwrap())
        .collect();
    let out = op(&mut probe, &vars).unwrap();
    let dims = probe.value(out).dim();
    let weights = random(&mut rng, dims.0, dims.1);
    let report = gradcheck(
        |t: &mut Tape, s: &ParamStore| {
            let vars: Vec<Var> = ids
                .iter()
                .map(|&id| t.param(s, id))
                .collect::<Result<_>>()?;
            let out = op(t, &vars)?;
            let w = t.constant(weights.clone())?;
            let weighted = t.mul(out, w)?;
            t.sum(weighted)
        },
        &mut store,
    )
    .unwrap();
    report.max_rel_err()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn elementwise_ops(seed in any::<u64>(), r in 1usize..5, c in 1usize..5) {
        let s = [(r, c), (r, c)];
        prop_assert!(check_op(seed, &s, |t, v| t.add(v[0], v[1])) <= TOL);
        prop_assert!(check_op(seed, &s, |t, v| t.sub(v[0], v[1])) <= TOL);
        prop_assert!(check_op(seed, &s, |t, v| t.mul(v[0], v[1])) <= TOL);
        prop_assert!(check_op(seed, &s, |t, v| t.scale(v[0], -1.7)) <= TOL);
        prop_assert!(check_op(seed, &s, |t, v| t.add_scalar(v[0], 0.3)) <= TOL);
        prop_assert!(check_op(seed, &s, |t, v| t.relu(v[0])) <= TOL);
        prop_assert!(check_op(seed, &s, |t, v| t.sigmoid(v[0])) <= TOL);
        prop_assert!(check_op(seed, &s, |t, v| t.row_dot(v[0], v[1])) <= TOL);
    }

    #[test]
    fn broadcast_and_layout_ops(seed in any::<u64>(), r in 1usize..5, c in 1usize..5, k in 1usize..4) {
        prop_assert!(check_op(seed, &[(r, c), (c, k)], |t, v| t.matmul(v[0], v[1])) <= TOL);
        prop_assert!(check_op(seed, &[(r, c), (1, c)], |t, v| t.add_row(v[0], v[1])) <= TOL);
        prop_assert!(check_op(seed, &[(r, c), (r, 1)], |t, v| t.mul_col(v[0], v[1])) <= TOL);
        prop_assert!(check_op(seed, &[(r, c), (1, 1)], |t, v| t.mul_col(v[0], v[1])) <= TOL);
        prop_assert!(check_op(seed, &[(r, c), (r, k)], |t, v| t.concat_cols(&[v[0], v[1], v[0]])) <= TOL);
        prop_assert!(check_op(seed, &[(r, c), (r, k), (c + k, 2)], |t, v| t.concat_matmul(&[v[0], v[1]], v[2])) <= TOL);
        prop_assert!(check_op(seed, &[(r, c), (r, c), (r, 1)], |t, v| t.row_lerp(v[0], v[1], v[2])) <= TOL);
        // wide enough for the blocked product
        prop_assert!(check_op(seed, &[(r, 9), (9, 9)], |t, v| t.matmul(v[0], v[1])) <= TOL);
        let rows = Rc::new(vec![r - 1, 0, r - 1]);
        prop_assert!(check_op(seed, &[(r, c)], |t, v| t.row_select(v[0], rows.clone())) <= TOL);
        prop_assert!(check_op(seed, &[(r, c)], |t, v| t.sum(v[0])) <= TOL);
    }

    #[test]
    fn softmax_and_losses(seed in any::<u64>(), r in 1usize..5, b in 1usize..4, w in 1usize..4) {
        prop_assert!(check_op(seed, &[(r, b * w)], |t, v| t.softmax_blocks(v[0], w)) <= TOL);
        prop_assert!(check_op(seed, &[(r, w)], |t, v| t.softmax_rows(v[0])) <= TOL);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let target = Rc::new(random(&mut rng, r, w));
        prop_assert!(check_op(seed, &[(r, w)], |t, v| t.mse_loss(v[0], target.clone())) <= TOL);
        let classes = Rc::new((0..r).map(|i| i % w).collect::<Vec<_>>());
        prop_assert!(check_op(seed, &[(r, w)], |t, v| t.cross_entropy_loss(v[0], classes.clone())) <= TOL);
    }

    #[test]
    fn block_ops(seed in any::<u64>(), n in 1usize..4, g in 1usize..4, d in 1usize..4, e in 1usize..4) {
        prop_assert!(check_op(seed, &[(n, g * d), (g * d, e)], |t, v| t.grouped_matmul(v[0], v[1], g)) <= TOL);
        prop_assert!(check_op(seed, &[(n, g * d), (d, e)], |t, v| t.block_matmul(v[0], v[1], g)) <= TOL);
        prop_assert!(check_op(seed, &[(n, g * d), (n, g * d)], |t, v| t.block_gram(v[0], v[1], g)) <= TOL);
        prop_assert!(check_op(seed, &[(n, g * g), (n, g * d)], |t, v| t.block_attend(v[0], v[1], g)) <= TOL);
    }

    #[test]
    fn sparse_product(seed in any::<u64>(), n in 1usize..5, g in 1usize..4, d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 11);
        let mut triplets = Vec::new();
        for r in 0..n * g {
            for c in 0..n {
                if rng.random::<f64>() < 0.5 {
                    triplets.push((r, c, rng.random::<f64>() - 0.5));
                }
            }
        }
        let s = Rc::new(Csr::from_triplets(n * g, n, &triplets).unwrap());
        prop_assert!(check_op(seed, &[(n, d)], |t, v| t.spmm(s.clone(), v[0], g)) <= TOL);
    }

    #[test]
    fn softmax_is_a_distribution(seed in any::<u64>(), r in 1usize..6, b in 1usize..5, w in 1usize..6, scale in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Tape::new();
        let x = t.constant(random(&mut rng, r, b * w) * scale).unwrap();
        let p = t.softmax_blocks(x, w).unwrap();
        let p = t.value(p);
        prop_assert!(p.iter().all(|&v| v > 0.0));
        for row in p.rows() {
            for blk in 0..b {
                let total: f64 = (0..w).map(|k| row[blk * w + k]).sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn backward_accumulates(seed in any::<u64>(), r in 1usize..5, c in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let id = store.add("w", random(&mut rng, r, c));
        let run = |store: &mut ParamStore| {
            let mut t = Tape::new();
            let w = t.param(store, id).unwrap();
            let s = t.sigmoid(w).unwrap();
            let sq = t.mul(s, w).unwrap();
            let l = t.sum(sq).unwrap();
            t.backward(l, store).unwrap();
        };
        run(&mut store);
        let once = store.grad(id).clone();
        run(&mut store);
        let twice = store.grad(id);
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!((2.0 * a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }
}
