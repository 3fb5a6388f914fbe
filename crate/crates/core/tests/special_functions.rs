use proptest::prelude::*;
use steinhaus_lab::special::{bessel_ratio, log_bessel_i0, SERIES_CUTOFF};

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[test]
fn log_i0_within_elementary_bounds() {
    for x in log_grid(1e-8, 1e6, 2000) {
        let v = log_bessel_i0(x).unwrap();
        assert!(v >= 0.0, "x={x}: {v}");
        assert!(v <= x.min(x * x / 4.0) * (1.0 + 1e-15), "x={x}: {v}");
    }
}

#[test]
fn ratio_is_a_nondecreasing_fraction() {
    let mut prev = 0.0;
    for x in log_grid(1e-8, 1e6, 2000) {
        let r = bessel_ratio(x).unwrap();
        assert!((0.0..1.0).contains(&r), "x={x}: {r}");
        assert!(r >= prev, "x={x}: {r} < {prev}");
        prev = r;
    }
}

#[test]
fn ratio_is_derivative_of_log_i0() {
    let h = 1e-5;
    for x in log_grid(0.1, 100.0, 400) {
        let fd = (log_bessel_i0(x + h).unwrap() - log_bessel_i0(x - h).unwrap()) / (2.0 * h);
        let r = bessel_ratio(x).unwrap();
        assert!((fd - r).abs() <= 1e-6, "x={x}: fd {fd} vs {r}");
    }
}

#[test]
fn crossover_is_continuous() {
    let below = SERIES_CUTOFF * (1.0 - 1e-15);
    let above = SERIES_CUTOFF * (1.0 + 1e-15);
    let (a, b) = (log_bessel_i0(below).unwrap(), log_bessel_i0(above).unwrap());
    assert!((a - b).abs() <= 1e-11 * a);
    let (a, b) = (bessel_ratio(below).unwrap(), bessel_ratio(above).unwrap());
    assert!((a - b).abs() <= 1e-11 * a);
}

/// `ln I_0` by summing the power series in log space with many terms.
fn series_reference(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 1.0;
    // Scale by e^{-x} through the running term to stay finite up to x ~ 600.
    let shift = (-x).exp();
    term *= shift;
    sum *= shift;
    while k < 4000.0 {
        term *= q / (k * k);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        k += 1.0;
    }
    sum.ln() + x
}

proptest! {
    #[test]
    fn matches_direct_series(x in 0.01f64..200.0) {
        let v = log_bessel_i0(x).unwrap();
        let reference = series_reference(x);
        prop_assert!((v - reference).abs() <= 1e-12 * reference.max(1e-2), "{v} vs {reference}");
    }

    #[test]
    fn log_i0_is_increasing(x in 1e-6f64..1e5, step in 1e-3f64..10.0) {
        prop_assert!(log_bessel_i0(x + step).unwrap() > log_bessel_i0(x).unwrap());
    }

    #[test]
    fn rejects_bad_arguments(x in -1e6f64..-1e-300) {
        prop_assert!(log_bessel_i0(x).is_err());
        prop_assert!(bessel_ratio(x).is_err());
    }
}
