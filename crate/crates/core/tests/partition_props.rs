mod common;

use std::f64::consts::TAU;

use proptest::prelude::*;

use common::{random_graph, GraphSpec};
use shgnn::partition::{
    assign_groups, model_heads, ring_index, sector_index, RingPartition, SectorPartition,
};

fn boundaries() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.0f64..500.0, 0..8).prop_map(|steps| {
        steps
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    })
}

fn near_sector_boundary(bearing: f64, offset: f64, sectors: usize) -> bool {
    let width = TAU / sectors as f64;
    let rel = (bearing - offset).rem_euclid(TAU) / width;
    (rel - rel.round()).abs() < 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn groups_partition_each_neighborhood(
        seed in any::<u64>(),
        n in 2usize..20,
        sectors in 1usize..9,
        rings in 1usize..6,
        heads in 1usize..3,
        explicit in 0.0f64..1.0,
    ) {
        let g = random_graph(&GraphSpec { explicit, ..GraphSpec::regression(n) }, seed);
        let sets: Vec<Vec<f64>> = (0..heads)
            .map(|m| (1..rings).map(|k| k as f64 * 700.0 * (m + 1) as f64).collect())
            .collect();
        let rotation = TAU / sectors as f64 / 2.0;
        let all = model_heads(sectors, rings, heads, heads, rotation, &sets).unwrap().all();
        for v in 0..n {
            let mut expected = g.neighborhood(v).to_vec();
            expected.sort_unstable();
            for (h, part) in all.iter().enumerate() {
                let a = assign_groups(&g, v, part, h);
                prop_assert_eq!(a.groups.len(), part.cells() + 1);
                prop_assert_eq!(&a.groups[part.cells()], &vec![v]);
                let mut got: Vec<usize> = a.spatial_groups().iter().flatten().copied().collect();
                got.sort_unstable();
                prop_assert_eq!(&got, &expected);
            }
        }
    }

    #[test]
    fn sector_index_is_periodic(bearing in -20.0f64..20.0, offset in 0.0f64..TAU, sectors in 1usize..13, turns in -3i32..4) {
        prop_assume!(!near_sector_boundary(bearing, offset, sectors));
        let part = SectorPartition::new(sectors, offset).unwrap();
        let k = sector_index(bearing, &part);
        prop_assert!(k < sectors);
        prop_assert_eq!(sector_index(bearing + f64::from(turns) * TAU, &part), k);
    }

    #[test]
    fn rotating_by_one_sector_shifts_indices(bearing in 0.0f64..TAU, offset in 0.0f64..TAU, sectors in 1usize..13) {
        prop_assume!(!near_sector_boundary(bearing, offset, sectors));
        let base = SectorPartition::new(sectors, offset).unwrap();
        let turned = SectorPartition::new(sectors, offset + TAU / sectors as f64).unwrap();
        let k = sector_index(bearing, &base);
        prop_assert_eq!(sector_index(bearing, &turned), (k + sectors - 1) % sectors);
    }

    #[test]
    fn ring_index_is_monotone(bounds in boundaries(), a in 0.0f64..5000.0, b in 0.0f64..5000.0) {
        let part = RingPartition::new(bounds).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (r_lo, r_hi) = (ring_index(lo, &part), ring_index(hi, &part));
        prop_assert!(r_lo <= r_hi);
        prop_assert!(r_hi < part.rings());
    }

    #[test]
    fn boundaries_belong_to_the_outer_cell(bounds in boundaries(), offset in 0.0f64..TAU, sectors in 1usize..13) {
        let part = RingPartition::new(bounds.clone()).unwrap();
        for (k, &b) in bounds.iter().enumerate() {
            prop_assert_eq!(ring_index(b, &part), k + 1);
            prop_assert_eq!(ring_index(b, &part), ring_index(b, &part));
            prop_assert_eq!(ring_index(b.next_down(), &part), k);
        }
        let sp = SectorPartition::new(sectors, offset).unwrap();
        for k in 0..sectors {
            let edge = sp.offset() + k as f64 * TAU / sectors as f64;
            let first = sector_index(edge, &sp);
            prop_assert_eq!(sector_index(edge, &sp), first);
            // a boundary bearing lands in the cell it opens, up to rounding
            // of the boundary angle itself
            prop_assert!(first == k || first == (k + sectors - 1) % sectors);
            prop_assert_eq!(sector_index(edge + 1e-9, &sp), k);
        }
    }
}
