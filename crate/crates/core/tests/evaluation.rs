use proptest::prelude::*;
use sarcon::eval::{
    arithmetic_rank, geometric_rank, mpce, pce, ranks, wins, MetricsReport, ResultTable, TiePolicy, TieRank,
};

fn table(rows: Vec<Vec<f64>>, classes: Vec<usize>) -> ResultTable {
    let k = rows[0].len();
    ResultTable::new(
        (0..k).map(|c| format!("c{c}")).collect(),
        (0..rows.len()).map(|d| format!("d{d}")).collect(),
        rows,
        classes,
    )
    .unwrap()
}

/// Accuracies on a coarse grid so ties are common.
fn grid_table() -> impl Strategy<Value = ResultTable> {
    (1usize..7, 1usize..9).prop_flat_map(|(k, m)| {
        (
            proptest::collection::vec(proptest::collection::vec(0u8..=20, k), m),
            proptest::collection::vec(2usize..10, m),
        )
            .prop_map(|(rows, classes)| {
                let rows = rows
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| f64::from(v) / 20.0).collect())
                    .collect();
                table(rows, classes)
            })
    })
}

proptest! {
    #[test]
    fn mid_ranks_sum_to_triangular_number(t in grid_table()) {
        let k = t.classifiers.len() as f64;
        for row in ranks(&t, TieRank::Mid) {
            prop_assert_eq!(row.iter().sum::<f64>(), k * (k + 1.0) / 2.0);
        }
    }

    #[test]
    fn min_ranks_never_exceed_mid_ranks(t in grid_table()) {
        let mid = ranks(&t, TieRank::Mid);
        let min = ranks(&t, TieRank::Min);
        for (a, b) in min.iter().flatten().zip(mid.iter().flatten()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn increasing_transform_keeps_ranks_and_wins(t in grid_table()) {
        let mut squashed = t.clone();
        for row in &mut squashed.accuracy {
            for v in row.iter_mut() {
                *v = v.powi(3);
            }
        }
        prop_assert_eq!(ranks(&t, TieRank::Mid), ranks(&squashed, TieRank::Mid));
        for policy in [TiePolicy::AwardAll, TiePolicy::AwardNone] {
            prop_assert_eq!(wins(&t, policy), wins(&squashed, policy));
        }
    }

    #[test]
    fn mpce_ignores_dataset_order(t in grid_table(), rot in 0usize..8) {
        let mut moved = t.clone();
        let r = rot % t.datasets.len();
        moved.accuracy.rotate_left(r);
        moved.classes.rotate_left(r);
        moved.datasets.rotate_left(r);
        for (a, b) in mpce(&t).unwrap().iter().zip(mpce(&moved).unwrap()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn award_none_never_exceeds_award_all(t in grid_table()) {
        let all = wins(&t, TiePolicy::AwardAll);
        let none = wins(&t, TiePolicy::AwardNone);
        prop_assert!(all.iter().zip(&none).all(|(a, b)| b <= a));
        prop_assert!(none.iter().sum::<usize>() <= t.datasets.len());
    }
}

#[test]
fn single_classifier_ranks_first_everywhere() {
    let t = table(vec![vec![0.3], vec![0.9], vec![0.5]], vec![2, 3, 4]);
    let r = ranks(&t, TieRank::Mid);
    assert_eq!(arithmetic_rank(&r), vec![1.0]);
    assert_eq!(geometric_rank(&r), vec![1.0]);
    assert_eq!(wins(&t, TiePolicy::AwardNone), vec![3]);
}

#[test]
fn geometric_rank_never_exceeds_arithmetic() {
    let t = table(
        vec![vec![0.9, 0.8, 0.7], vec![0.1, 0.8, 0.9], vec![0.5, 0.5, 0.2]],
        vec![2, 2, 2],
    );
    let r = ranks(&t, TieRank::Mid);
    for (g, a) in geometric_rank(&r).iter().zip(arithmetic_rank(&r)) {
        assert!(*g <= a + 1e-12);
    }
}

#[test]
fn mpce_by_hand() {
    let t = table(vec![vec![0.8, 1.0], vec![0.5, 0.7]], vec![2, 5]);
    let expected = [(0.2 / 2.0 + 0.5 / 5.0) / 2.0, (0.0 / 2.0 + 0.3 / 5.0) / 2.0];
    for (got, want) in mpce(&t).unwrap().iter().zip(expected) {
        assert!((got - want).abs() < 1e-15);
    }
    assert!((pce(1.0 - 0.733, 4).unwrap() - 0.06675).abs() < 1e-12);
}

#[test]
fn report_lists_both_tie_policies() {
    let t = table(vec![vec![0.9, 0.9], vec![0.1, 0.2]], vec![2, 2]);
    let report = MetricsReport::compute(&t).unwrap();
    assert_eq!(report.wins_award_all, vec![1, 2]);
    assert_eq!(report.wins_award_none, vec![0, 1]);
    let text = report.to_delimited();
    assert!(text.starts_with("metric,c0,c1\n"));
    assert!(text.contains("wins_award_all,1,2") && text.contains("wins_award_none,0,1"));
}
