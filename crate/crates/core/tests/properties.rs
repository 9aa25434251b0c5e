mod common;

use common::brute_force_deim;
use faer::Mat;
use mfrom::deim::{deim_select, DeimState, DeimVariant};
use mfrom::linalg::{ReducedBasis, SnapshotMatrix, Space, GS_TOL};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, v: &[f64]) -> Mat<f64> {
    Mat::from_fn(rows, cols, |i, j| v[i * cols + j])
}

fn arb_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Mat<f64>> {
    (1..=max_cols)
        .prop_flat_map(move |c| (Just(c), c..=max_rows))
        .prop_flat_map(|(c, r)| (Just(r), Just(c), prop::collection::vec(-1.0f64..1.0, r * c)))
        .prop_map(|(r, c, v)| matrix(r, c, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn deim_rows_are_distinct_and_in_range(psi in arb_matrix(40, 8)) {
        let rows = deim_select(psi.as_ref(), psi.ncols(), DeimVariant::SelectedRows).unwrap();
        prop_assert_eq!(rows.len(), psi.ncols());
        let mut sorted = rows.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), rows.len());
        prop_assert!(rows.iter().all(|&r| r < psi.nrows()));
        prop_assert_eq!(rows, brute_force_deim(&psi));
    }

    #[test]
    fn resumed_deim_never_repeats_rows(psi in arb_matrix(40, 8), split in 0usize..8) {
        let k = split.min(psi.ncols());
        let mut state = DeimState::new(psi.nrows(), DeimVariant::SelectedRows);
        let mut rows = state.select(psi.get(.., ..k), k).unwrap();
        rows.extend(state.select(psi.as_ref(), psi.ncols() - k).unwrap());
        let mut sorted = rows.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), rows.len());
    }

    #[test]
    fn enrichment_keeps_basis_orthonormal(batches in prop::collection::vec(arb_matrix(12, 4).prop_filter("12 rows", |m| m.nrows() == 12), 1..5)) {
        let mut basis = ReducedBasis::empty(12);
        for (it, b) in batches.iter().enumerate() {
            let cands = SnapshotMatrix::new(b.clone(), (0..b.ncols()).collect(), Space::Fine).unwrap();
            let rep = basis.enrich(&cands, it + 1, GS_TOL).unwrap();
            prop_assert_eq!(rep.accepted.len() + rep.rejected.len(), b.ncols());
            prop_assert!(basis.defect() < 1e-10);
            prop_assert!(basis.rank() <= 12);
        }
    }
}
