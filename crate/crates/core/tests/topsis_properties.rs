mod oracle;

use oracle::brute_force_topsis;
use proptest::prelude::*;
use sensedeploy_core::topsis::{
    ideal_points, normalize, rank, CriterionSpec, DecisionMatrix, Direction,
};

fn matrix(rows: &[Vec<f64>], maximize: &[bool]) -> DecisionMatrix<f64> {
    let criteria = maximize
        .iter()
        .enumerate()
        .map(|(j, &max)| {
            CriterionSpec::new(
                format!("c{j}"),
                if max {
                    Direction::Maximize
                } else {
                    Direction::Minimize
                },
            )
        })
        .collect();
    DecisionMatrix::from_rows(criteria, rows).unwrap()
}

fn arb_problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(0.001f64..=10.0, m), n),
            prop::collection::vec(any::<bool>(), m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_brute_force((rows, maximize) in arb_problem()) {
        let result = rank(&matrix(&rows, &maximize));
        let expected = brute_force_topsis(&rows, &maximize);
        prop_assert_eq!(&result.order, &expected.order);
        for (a, b) in result.closeness.iter().zip(&expected.closeness) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn column_scale_invariance((rows, maximize) in arb_problem(), col in 0usize..6, c in 0.01f64..100.0) {
        let col = col % maximize.len();
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, &v)| if j == col { v * c } else { v }).collect())
            .collect();
        let base = rank(&matrix(&rows, &maximize));
        let other = rank(&matrix(&scaled, &maximize));
        prop_assert_eq!(&base.order, &other.order);
        for (a, b) in base.closeness.iter().zip(&other.closeness) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn closeness_in_unit_interval_and_order_is_permutation((rows, maximize) in arb_problem()) {
        let result = rank(&matrix(&rows, &maximize));
        prop_assert!(result.closeness.iter().all(|c| (0.0..=1.0).contains(c)));
        let mut sorted = result.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..rows.len()).collect::<Vec<_>>());
        for w in result.order.windows(2) {
            let (a, b) = (result.closeness[w[0]], result.closeness[w[1]]);
            prop_assert!(a > b || (a == b && w[0] < w[1]));
        }
    }

    #[test]
    fn dominating_option_precedes((rows, maximize) in arb_problem(), pick in 0usize..6, bump in 0.01f64..5.0) {
        prop_assume!(rows.len() >= 2);
        let a = pick % rows.len();
        let b = (a + 1) % rows.len();
        let mut rows = rows;
        // make row a weakly better than row b everywhere, strictly on column 0
        let better: Vec<f64> = rows[b]
            .iter()
            .zip(&maximize)
            .enumerate()
            .map(|(j, (&v, &max))| {
                let step = if j == 0 { bump } else { 0.0 };
                if max { v + step } else { (v - step).max(v * 0.01) }
            })
            .collect();
        rows[a] = better;
        let result = rank(&matrix(&rows, &maximize));
        prop_assert!(result.position_of(a).unwrap() < result.position_of(b).unwrap());
    }

    #[test]
    fn ideal_points_match_column_scan((rows, maximize) in arb_problem()) {
        let normalized = normalize(&matrix(&rows, &maximize));
        let ideals = ideal_points(&normalized);
        for (j, &max) in maximize.iter().enumerate() {
            let col: Vec<f64> = (0..rows.len()).map(|i| normalized.get(i, j)).collect();
            let hi = col.iter().cloned().fold(f64::MIN, f64::max);
            let lo = col.iter().cloned().fold(f64::MAX, f64::min);
            let (p, n) = if max { (hi, lo) } else { (lo, hi) };
            prop_assert_eq!(ideals.positive[j], p);
            prop_assert_eq!(ideals.negative[j], n);
        }
    }

    #[test]
    fn normalized_columns_have_unit_norm((rows, maximize) in arb_problem()) {
        let normalized = normalize(&matrix(&rows, &maximize));
        for j in 0..maximize.len() {
            let norm: f64 = (0..rows.len()).map(|i| normalized.get(i, j).powi(2)).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn positive_ideal_option_scores_one() {
    let rows = vec![vec![9.0, 1.0], vec![3.0, 4.0], vec![5.0, 2.0]];
    let result = rank(&matrix(&rows, &[true, false]));
    assert_eq!(result.closeness[0], 1.0);
    assert_eq!(result.order[0], 0);
}

#[test]
fn oracle_agrees_on_hand_examples() {
    let r = brute_force_topsis(&[vec![3.0, 4.0], vec![6.0, 8.0]], &[true, true]);
    assert_eq!(r.order, vec![1, 0]);
    assert!((r.closeness[0] - 0.0).abs() < 1e-12 && (r.closeness[1] - 1.0).abs() < 1e-12);
    let lib = rank(&matrix(&[vec![3.0, 4.0], vec![6.0, 8.0]], &[true, true]));
    assert_eq!(lib.order, r.order);
}

#[test]
fn f32_and_f64_agree_on_order() {
    let rows = vec![
        vec![1.0, 9.0, 3.0],
        vec![4.0, 2.0, 8.0],
        vec![7.0, 5.0, 6.0],
    ];
    let wide = rank(&matrix(&rows, &[true, false, true]));
    let criteria = matrix(&rows, &[true, false, true]).criteria().to_vec();
    let narrow_rows: Vec<Vec<f32>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| v as f32).collect())
        .collect();
    let narrow = rank(&DecisionMatrix::<f32>::from_rows(criteria, &narrow_rows).unwrap());
    assert_eq!(wide.order, narrow.order);
    for (a, b) in wide.closeness.iter().zip(&narrow.closeness) {
        assert!((a - *b as f64).abs() < 1e-5);
    }
}
