//! Correlation and causality tests with multiple-testing correction.

mod battery;
mod granger;
mod ols;
mod spearman;
pub mod special;

pub use battery::{
    run_test_battery, BatteryConfig, CompanyReport, Direction, Entry, Pair, SummaryRow, TestKind, TestReport,
    CORRELATION_PAIRS, GRANGER_DIRECTIONS,
};
pub use granger::{bic_table, granger, min_length, select_lag, GrangerResult};
pub use ols::{ols, Design, OlsFit};
pub use spearman::{
    average_ranks, correlate, spearman, spearman_pvalue, spearman_pvalue_asymptotic, CorrelationResult,
    Significance,
};

/// `flag_i = p_i < level / n_tests`.
pub fn bonferroni(p_values: &[f64], level: f64, n_tests: usize) -> Vec<bool> {
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    assert!(n_tests >= 1, "n_tests must be positive");
    let threshold = level / n_tests as f64;
    p_values.iter().map(|p| *p < threshold).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(&[0.0004], 0.05, 100), [true]);
        assert_eq!(bonferroni(&[0.0005], 0.05, 100), [false]);
        let p = [0.01, 0.049, 0.05, 0.2];
        assert_eq!(bonferroni(&p, 0.05, 1), p.map(|x| x < 0.05));
    }

    proptest! {
        #[test]
        fn raising_n_tests_never_adds(
            p in proptest::collection::vec(0.0f64..1.0, 1..50),
            n in 1usize..200,
            extra in 0usize..200,
        ) {
            let a = bonferroni(&p, 0.05, n);
            let b = bonferroni(&p, 0.05, n + extra);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(!y | x);
            }
        }
    }
}
