use edo_clothsim::savgol_smooth;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Least-squares polynomial value at `at` via the normal equations.
fn normal_equation_fit(t: &[f64], y: &[f64], order: usize, at: f64) -> f64 {
    let m = order + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (ti, yi) in t.iter().zip(y) {
        let x = ti - at;
        for r in 0..m {
            for c in 0..m {
                a[r][c] += x.powi((r + c) as i32);
            }
            a[r][m] += yi * x.powi(r as i32);
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    a[0][m] / a[0][0]
}

#[test]
fn cubic_passes_through() {
    let sig: Vec<f64> = (0..60)
        .map(|i| {
            let t = i as f64 * 0.1 - 3.0;
            t * t * t - 2.0 * t
        })
        .collect();
    let out = savgol_smooth(&sig, 21, 3).unwrap();
    for (a, b) in out.iter().zip(&sig) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn constant_is_unchanged() {
    let sig = vec![2.5; 30];
    for v in savgol_smooth(&sig, 21, 3).unwrap() {
        assert!((v - 2.5).abs() < 1e-12);
    }
}

#[test]
fn matches_normal_equation_fit_everywhere() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let sig: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
    let out = savgol_smooth(&sig, 21, 3).unwrap();
    for i in 0..sig.len() {
        let lo = i.saturating_sub(10);
        let hi = (i + 11).min(sig.len());
        let t: Vec<f64> = (lo..hi).map(|j| j as f64).collect();
        let expect = normal_equation_fit(&t, &sig[lo..hi], 3, i as f64);
        assert!(
            (out[i] - expect).abs() < 1e-9,
            "sample {i}: {} vs {expect}",
            out[i]
        );
    }
}

#[test]
fn rejects_bad_arguments() {
    assert!(savgol_smooth(&[0.0; 20], 21, 3).is_err());
    assert!(savgol_smooth(&[0.0; 30], 20, 3).is_err());
    assert!(savgol_smooth(&[0.0; 30], 5, 5).is_err());
}

proptest! {
    #[test]
    fn smoothing_is_linear(
        x in prop::collection::vec(-10.0f64..10.0, 25..40),
        alpha in -3.0f64..3.0,
    ) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * 0.5 + i as f64).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + b).collect();
        let sx = savgol_smooth(&x, 21, 3).unwrap();
        let sy = savgol_smooth(&y, 21, 3).unwrap();
        let sc = savgol_smooth(&combo, 21, 3).unwrap();
        for i in 0..x.len() {
            prop_assert!((sc[i] - (alpha * sx[i] + sy[i])).abs() < 1e-9);
        }
    }
}
