mod common;

use common::*;
use proptest::prelude::*;
use salstream_core::model::{mean_ap, plcc, srcc};

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() < 1e-12,
        (None, None) => true,
        _ => false,
    }
}

#[test]
fn exhaustive_small_permutations() {
    // values with ties so tie handling is exercised too
    let pool = [0.1, 0.4, 0.4, 0.7, 0.9, 0.2];
    for n in 2..=6 {
        let base: Vec<f64> = pool[..n].to_vec();
        let gt: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        for p in permutations(n) {
            let x: Vec<f64> = p.iter().map(|&i| base[i]).collect();
            assert!(close(plcc(&x, &gt).ok(), plcc_sums(&x, &gt)), "{x:?}");
            assert!(close(srcc(&x, &gt).ok(), srcc_counting(&x, &gt)), "{x:?}");
            for f in [0.15, 0.5, 1.0] {
                let a = mean_ap(&x, &gt, f).unwrap();
                assert!(
                    (a - mean_ap_definition(&x, &gt, f)).abs() < 1e-12,
                    "{x:?} {f}"
                );
                let b = mean_ap(&gt, &x, f).unwrap();
                assert!(
                    (b - mean_ap_definition(&gt, &x, f)).abs() < 1e-12,
                    "{x:?} {f}"
                );
            }
        }
    }
}

#[test]
fn constant_series_is_undefined() {
    assert!(plcc(&[0.5; 4], &[0.1, 0.2, 0.3, 0.4]).is_err());
    assert!(srcc(&[0.1, 0.2, 0.3, 0.4], &[1.0; 4]).is_err());
    assert!(plcc(&[0.5], &[0.5]).is_err());
}

#[test]
fn perfect_prediction_scores_one() {
    let gt = [0.3, 0.9, 0.1, 0.5, 0.7];
    assert!((plcc(&gt, &gt).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(mean_ap(&gt, &gt, 0.5).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn agree_with_brute_force(
        pairs in prop::collection::vec((0u8..=20, 0.0f64..1.0), 7..40),
        f in prop::sample::select(vec![0.15, 0.5, 1.0]),
    ) {
        // coarse grid on x makes ties common
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 20.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        prop_assert!(close(plcc(&x, &y).ok(), plcc_sums(&x, &y)));
        prop_assert!(close(srcc(&x, &y).ok(), srcc_counting(&x, &y)));
        let a = mean_ap(&x, &y, f).unwrap();
        prop_assert!((a - mean_ap_definition(&x, &y, f)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn correlation_is_affine_invariant(
        y in prop::collection::vec(0.0f64..1.0, 3..30),
        scale in 0.1f64..5.0,
        shift in -2.0f64..2.0,
    ) {
        let x: Vec<f64> = y.iter().map(|v| v * scale + shift).collect();
        if let Ok(r) = plcc(&x, &y) {
            prop_assert!((r - 1.0).abs() < 1e-9);
            prop_assert!((srcc(&x, &y).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
