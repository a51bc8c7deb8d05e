use moldline::dataset::ThermoImage;
use moldline::linalg::Matrix;
use moldline::preprocess::{downscale_image, inverse_apply, resample_linear, standardize_apply, ColumnScaler, Standardizer};
use moldline::Error;
use proptest::prelude::*;

#[test]
fn resample_identity_and_closed_form() {
    let x: Vec<f64> = (0..3000).map(|i| (i as f64 * 0.01).sin()).collect();
    assert_eq!(resample_linear(&x, 3000).unwrap(), x);
    assert_eq!(resample_linear(&[0.0, 1.0], 5).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn resample_short_trace_keeps_endpoints() {
    let x: Vec<f64> = (0..2950).map(|i| 3.0 + (i as f64 * 0.003).cos()).collect();
    let y = resample_linear(&x, 3000).unwrap();
    assert_eq!(y.len(), 3000);
    assert_eq!(y[0], x[0]);
    assert_eq!(y[2999], x[2949]);
}

#[test]
fn standardizer_examples() {
    let s = Standardizer::fit(&[1.0, 2.0, 3.0]).unwrap();
    assert!((s.mean - 2.0).abs() < 1e-15);
    assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    let z = standardize_apply(&[1.0, 2.0, 3.0], 2.0, 0.8165).unwrap();
    for (a, b) in z.iter().zip([-1.2247, 0.0, 1.2247]) {
        assert!((a - b).abs() < 1e-4);
    }
    assert!(matches!(Standardizer::fit(&[5.0, 5.0, 5.0]), Err(Error::DegenerateConstant)));
    assert!(matches!(standardize_apply(&[1.0], 0.0, 0.0), Err(Error::ZeroStd)));
    assert!(matches!(inverse_apply(&[1.0], 0.0, 0.0), Err(Error::ZeroStd)));
}

#[test]
fn downscale_examples() {
    let img = ThermoImage::new(156, 156, (0..156 * 156).map(|i| (i % 97) as f64).collect()).unwrap();
    let small = downscale_image(&img, 28, 28).unwrap();
    assert_eq!((small.width, small.height, small.pixels.len()), (28, 28, 784));

    let flat = ThermoImage::new(156, 156, vec![21.5; 156 * 156]).unwrap();
    for side in [1, 7, 28, 100] {
        let out = downscale_image(&flat, side, side).unwrap();
        assert!(out.pixels.iter().all(|v| (v - 21.5).abs() < 1e-12));
    }

    let checker = ThermoImage::new(4, 4, (0..16).map(|i| ((i / 4 + i % 4) % 2) as f64).collect()).unwrap();
    assert_eq!(downscale_image(&checker, 2, 2).unwrap().pixels, vec![0.5; 4]);
    assert!(matches!(downscale_image(&checker, 5, 2), Err(Error::BadDims(_))));
}

#[test]
fn column_scaler_ignores_and_fills_missing() {
    let x = Matrix::from_rows(&[vec![1.0, f64::NAN, 4.0], vec![3.0, 2.0, 4.0], vec![f64::NAN, 6.0, 4.0]]).unwrap();
    let s = ColumnScaler::fit(&x).unwrap();
    assert_eq!(s.means, vec![2.0, 4.0, 4.0]);
    assert_eq!(s.stds, vec![1.0, 2.0, 1.0]);
    assert_eq!(s.constant, vec![2]);
    let z = s.apply(&x).unwrap();
    assert_eq!(z.row(0), &[-1.0, 0.0, 0.0]);
    assert_eq!(z.row(2), &[0.0, 1.0, 0.0]);
}

proptest! {
    #[test]
    fn resample_preserves_monotonicity(steps in prop::collection::vec(0.0f64..5.0, 2..200), n_out in 2usize..500) {
        let mut acc = 0.0;
        let x: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
        let y = resample_linear(&x, n_out).unwrap();
        prop_assert!(y.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn z_scores_have_zero_mean_unit_std(v in prop::collection::vec(-1e3f64..1e3, 2..100)) {
        prop_assume!(v.iter().any(|x| (x - v[0]).abs() > 1e-6));
        let s = Standardizer::fit(&v).unwrap();
        let z = s.apply(&v).unwrap();
        let n = z.len() as f64;
        let m = z.iter().sum::<f64>() / n;
        let sd = (z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
        prop_assert!(m.abs() < 1e-9);
        prop_assert!((sd - 1.0).abs() < 1e-9);
        let back = s.inverse(&z).unwrap();
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-12 * b.abs().max(1.0) * 1e3);
        }
    }

    #[test]
    fn integer_ratio_downscale_keeps_the_mean(k in 1usize..5, side in 1usize..8, seed in any::<u64>()) {
        let n = side * k;
        let px: Vec<f64> = (0..n * n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64).collect();
        let img = ThermoImage::new(n, n, px.clone()).unwrap();
        let out = downscale_image(&img, side, side).unwrap();
        let m_in = px.iter().sum::<f64>() / px.len() as f64;
        let m_out = out.pixels.iter().sum::<f64>() / out.pixels.len() as f64;
        prop_assert!((m_in - m_out).abs() < 1e-9 * m_in.max(1.0));
    }
}
