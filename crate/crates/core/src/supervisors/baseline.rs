use super::{max_softmax_anomaly, AnomalyScore, Result, SupervisorError};

/// One minus the largest softmax probability of the logits.
pub fn baseline_anomaly(logits: &[f64]) -> Result<AnomalyScore> {
    if logits.len() < 2 {
        return Err(SupervisorError::TooFewClasses(logits.len()));
    }
    max_softmax_anomaly(logits, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        assert_eq!(baseline_anomaly(&[0.0, 0.0]).unwrap().value(), 0.5);
        let a = baseline_anomaly(&[2f64.ln(), 0.0]).unwrap().value();
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
        // 1 - e^5 / (e^5 + 3e)
        let (e5, e1) = (5f64.exp(), 1f64.exp());
        let expected = 1.0 - e5 / (e5 + 3.0 * e1);
        let a = baseline_anomaly(&[5.0, 1.0, 1.0, 1.0]).unwrap().value();
        assert!((a - expected).abs() < 1e-15);
        assert!((a - 0.052085).abs() < 1e-6);
    }

    #[test]
    fn needs_two_classes() {
        assert!(matches!(
            baseline_anomaly(&[1.0]),
            Err(SupervisorError::TooFewClasses(1))
        ));
    }

    proptest! {
        #[test]
        fn bounded_and_shift_invariant(
            v in prop::collection::vec(-30.0f64..30.0, 2..10),
            shift in -50.0f64..50.0,
        ) {
            let n = v.len() as f64;
            let a = baseline_anomaly(&v).unwrap().value();
            prop_assert!(a >= 0.0 && a <= 1.0 - 1.0 / n + 1e-15);
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            prop_assert!((baseline_anomaly(&shifted).unwrap().value() - a).abs() < 1e-12);
        }

        #[test]
        fn maximal_only_for_constant_logits(c in -10.0f64..10.0, n in 2usize..10, bump in 1e-3f64..5.0) {
            let mut v = vec![c; n];
            let top = 1.0 - 1.0 / n as f64;
            prop_assert!((baseline_anomaly(&v).unwrap().value() - top).abs() < 1e-15);
            v[0] += bump;
            prop_assert!(baseline_anomaly(&v).unwrap().value() < top);
        }
    }
}
