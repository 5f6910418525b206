mod common;

use common::{dense, fro, laplace, mi_bits, obs_matrix};
use densemimo::baselines::{design_random_plan, design_waterfilling};
use densemimo::estimator::plan_information;
use densemimo::icefill::*;
use densemimo::kernels::CovKernel;
use densemimo::numkit::{c, sample_complex_gaussian_seeded, CMatrix, RMatrix};
use proptest::prelude::*;

const WALK: [[f64; 5]; 3] = [
    [1.1, 1.2, 1.8, 1.9, 2.1],
    [2.1, 2.5, 3.0, 3.0, 4.5],
    [2.5, 3.2, 3.3, 4.6, 5.0],
];

fn walk_table() -> IceTable {
    IceTable::from_levels(&RMatrix::from_fn(3, 5, |i, j| WALK[i][j]), 2.0, 1.0).unwrap()
}

fn chosen_levels(table: &IceTable, sel: &Selection) -> Vec<f64> {
    let levels = table.levels();
    sel.n_r
        .iter()
        .map(|&j| (levels[(sel.n_t, j)] * 1e9).round() / 1e9)
        .collect()
}

#[test]
fn four_pilot_walk_picks_the_expected_cells() {
    let mut t = walk_table();
    let expected = [
        [1.1, 1.2, 1.8],
        [1.9, 2.1, 3.1],
        [2.1, 2.5, 3.0],
        [2.5, 3.2, 3.3],
    ];
    for want in expected {
        let sel = t.select(3).unwrap();
        let mut got = chosen_levels(&t, &sel);
        got.sort_by(f64::total_cmp);
        assert_eq!(got, want.to_vec());
        t.fill(&sel);
    }
    let levels = t.levels();
    let mut initial: Vec<f64> = WALK.iter().flatten().copied().collect();
    initial.sort_by(f64::total_cmp);
    let beta = common::water_level_sorted(&initial[..12], 2.0 * 12.0);
    for i in 0..3 {
        for j in 0..5 {
            if t.fill_count(i, j) > 0 {
                assert!(
                    levels[(i, j)] <= beta + 2.0,
                    "cell ({i},{j}) at {}",
                    levels[(i, j)]
                );
            }
        }
    }
}

#[test]
fn one_fill_raises_level_by_power() {
    let mut t = walk_table();
    let sel = Selection {
        n_t: 0,
        n_r: vec![0],
    };
    t.fill(&sel);
    assert!((t.levels()[(0, 0)] - 3.1).abs() < 1e-12);
    assert_eq!(t.levels()[(1, 0)], 2.1);
}

#[test]
fn too_many_chains_is_an_error() {
    let k = CovKernel::identity(2, 3);
    assert!(design_2dif(&k, 2, 4, 1.0, 1.0).is_err());
    assert!(walk_table().select(6).is_err());
}

#[test]
fn telescoped_information_matches_dense_evaluation() {
    let k = laplace(3, 8, 0.125, 2.0);
    let noise = 0.3;
    let (plan, table) = design_2dif_with_table(&k, 6, 2, 1.5, noise).unwrap();
    let x = obs_matrix(&plan.precoders, &plan.combiners);
    let oracle = mi_bits(
        &dense(&k),
        &x,
        &CMatrix::identity(x.ncols(), x.ncols()).scale(noise),
    );
    assert!((table.info_bits() - oracle).abs() < 1e-8);
    assert!((plan_information(&k, &plan, noise).unwrap() - oracle).abs() < 1e-8);
}

#[test]
fn plans_are_feasible() {
    let k = laplace(3, 10, 0.25, 1.0);
    let plan = design_2dif(&k, 7, 3, 2.0, 0.1).unwrap();
    for q in 0..plan.n_pilots() {
        let b = plan.block(q);
        let gram = b.adjoint() * &b;
        assert!(fro(&(gram - CMatrix::identity(3, 3) * c(2.0, 0.0))) < 1e-10);
    }
    let (power_defect, ortho_defect) = plan.feasibility_defects();
    assert!(power_defect < 1e-10 && ortho_defect < 1e-10);
}

#[test]
fn greedy_beats_random_and_stays_below_water_filling() {
    for (i, k) in [laplace(2, 8, 0.125, 3.0), laplace(3, 6, 0.25, 1.0)]
        .iter()
        .enumerate()
    {
        let (q, n_rf, p, noise) = (5, 2, 1.0, 0.1);
        let greedy =
            plan_information(k, &design_2dif(k, q, n_rf, p, noise).unwrap(), noise).unwrap();
        for s in 0..100 {
            let plan =
                design_random_plan(k.n_t(), k.n_r(), n_rf, q, p, 1000 * i as u64 + s).unwrap();
            assert!(plan_information(k, &plan, noise).unwrap() <= greedy);
        }
        let bound = design_waterfilling(k, q, n_rf, p, noise)
            .unwrap()
            .information_bits();
        assert!(greedy <= bound + 1e-9);
    }
}

fn random_table(seed: u64, n_t: usize, n_r: usize) -> IceTable {
    let g = sample_complex_gaussian_seeded(n_t, n_r, seed);
    IceTable::from_lambdas(g.map(|z| z.norm_sqr()), 1.3, 0.4).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn levels_grow_by_power_per_fill(seed in 0u64..100_000, fills in 1usize..8) {
        let mut t = random_table(seed, 3, 4);
        let start = t.levels();
        for _ in 0..fills {
            let sel = t.select(2).unwrap();
            t.fill(&sel);
        }
        let end = t.levels();
        for i in 0..3 {
            for j in 0..4 {
                let want = start[(i, j)] + t.fill_count(i, j) as f64 * t.power();
                prop_assert!((end[(i, j)] - want).abs() < 1e-9 * want.max(1.0));
            }
        }
    }

    #[test]
    fn information_is_monotone(seed in 0u64..100_000) {
        let mut t = random_table(seed, 4, 5);
        let mut prev = t.info_bits();
        for _ in 0..6 {
            let sel = t.select(3).unwrap();
            prop_assert_eq!(sel.n_r.len(), 3);
            let mut distinct = sel.n_r.clone();
            distinct.sort();
            distinct.dedup();
            prop_assert_eq!(distinct.len(), 3);
            t.fill(&sel);
            prop_assert!(t.info_bits() >= prev);
            prev = t.info_bits();
        }
    }

    #[test]
    fn zero_cells_are_never_selected_before_positive_ones(seed in 0u64..100_000) {
        let mut l = sample_complex_gaussian_seeded(2, 4, seed).map(|z| z.norm_sqr());
        l[(0, 0)] = 0.0;
        l[(1, 2)] = 0.0;
        let t = IceTable::from_lambdas(l, 1.0, 1.0).unwrap();
        let sel = t.select(3).unwrap();
        let empty = if sel.n_t == 0 { 0 } else { 2 };
        prop_assert!(!sel.n_r.contains(&empty));
    }
}
