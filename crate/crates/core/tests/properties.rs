use nalgebra::DMatrix;
use proptest::prelude::*;

use dirmusic::estimator::{angular_error, DoaEstimator};
use dirmusic::io::{waveform_from_csv, waveform_to_csv};
use dirmusic::manifold::{angle_grid, steering_vector, ArrayConfig};
use dirmusic::pattern::GaussianMixturePattern;
use dirmusic::pipeline::{normalize_bipolar, Recording};
use dirmusic::signal::{synthesize_clean, SnapshotMatrix};

fn clean(array: &ArrayConfig, theta: f64) -> SnapshotMatrix {
    let g = steering_vector(&GaussianMixturePattern::reference(), array, theta).unwrap();
    let s: Vec<f64> = (0..48).map(|t| (0.8 * t as f64).sin() * (-(t as f64) / 15.0).exp()).collect();
    synthesize_clean(&g, &s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_equivariance_any_uniform_array(n in 3usize..=10, d in 0u32..360, r in 1usize..10) {
        let array = ArrayConfig::uniform(n).unwrap();
        let est = DoaEstimator::new(GaussianMixturePattern::reference(), array.clone(), angle_grid(1.0).unwrap()).unwrap();
        let theta = d as f64;
        let x = clean(&array, theta);
        let base = est.estimate(&x).unwrap().theta_deg;
        prop_assert_eq!(base, theta);
        let r = r % n;
        let step = 360.0 / n as f64;
        // only shifts that land on the 1 degree grid are exact
        prop_assume!((step * r as f64).fract() == 0.0);
        let got = est.estimate(&x.rotate_channels(r)).unwrap().theta_deg;
        prop_assert_eq!(angular_error(got, theta - step * r as f64), 0.0);
    }

    #[test]
    fn normalize_bounds_signs_and_ratios(vals in prop::collection::vec(-1e3f64..1e3, 6..60)) {
        let cols = vals.len() / 3;
        prop_assume!(cols >= 2);
        let m = DMatrix::from_row_slice(3, cols, &vals[..3 * cols]);
        prop_assume!(m.amax() > 0.0);
        let x = SnapshotMatrix::new(m.clone()).unwrap();
        let y = normalize_bipolar(&x).unwrap();
        prop_assert!(y.data().iter().all(|v| v.abs() <= 1.0));
        prop_assert_eq!(y.data().amax(), 1.0);
        for (a, b) in m.iter().zip(y.data().iter()) {
            prop_assert_eq!(a.partial_cmp(&0.0), b.partial_cmp(&0.0));
            prop_assert!((b * m.amax() - a).abs() <= 1e-12 * m.amax());
        }
        prop_assert_eq!(normalize_bipolar(&y).unwrap(), y);
    }

    #[test]
    fn waveform_csv_round_trip(vals in prop::collection::vec(-5.0f64..5.0, 4..80), fs_exp in 6i32..11) {
        let cols = vals.len() / 2;
        let fs = 10f64.powi(fs_exp);
        let rec = Recording::new(fs, DMatrix::from_row_slice(2, cols, &vals[..2 * cols])).unwrap();
        let text = String::from_utf8(waveform_to_csv(&rec)).unwrap();
        let back = waveform_from_csv(&text, "prop").unwrap();
        prop_assert_eq!(back.channels(), rec.channels());
        prop_assert!((back.sample_rate_hz() - fs).abs() <= 1e-9 * fs);
    }
}
