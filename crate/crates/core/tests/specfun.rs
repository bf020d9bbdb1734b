use std::f64::consts::PI;

use microcavity::specfun::{bessel_j, bessel_j_prime, bessel_j_real, bessel_y, bessel_zero, hankel1, hankel1_prime, C64};
use proptest::prelude::*;

/// Ascending series `Σ (−z²/4)^k / (k! (m+k)!) (z/2)^m`, summed in long
/// double-free fashion; fine for |z| ≲ 8.
fn j_series(m: u32, z: C64) -> C64 {
    let half = z * 0.5;
    let mut term = C64::new(1.0, 0.0);
    for i in 1..=m {
        term = term * half / i as f64;
    }
    let q = -half * half;
    let mut sum = term;
    for k in 1..200 {
        term = term * q / (k as f64 * (m + k) as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

#[test]
fn reference_values() {
    // Y_0(1) and the first zero of J_3.
    let y0 = bessel_y(0, C64::new(1.0, 0.0)).unwrap();
    assert!((y0.re - 0.088_256_964_215_676_97).abs() < 1e-13 && y0.im.abs() < 1e-13);
    assert!(bessel_j_real(3, 6.380161896).unwrap().abs() < 1e-9);
    assert!((bessel_zero(3, 1).unwrap() - 6.380_161_895_923_984).abs() < 1e-10);
    assert!((bessel_zero(0, 1).unwrap() - 2.404_825_557_695_773).abs() < 1e-10);
}

#[test]
fn hankel_large_argument_modulus() {
    // |H_0(x)|² = 2/(πx) (1 − 1/(8x²) + …)
    let x = 50.0;
    let h = hankel1(0, C64::new(x, 0.0)).unwrap();
    let expect = (2.0 / (PI * x) * (1.0 - 1.0 / (8.0 * x * x))).sqrt();
    assert!((h.norm() - expect).abs() < 1e-8, "{} vs {expect}", h.norm());
}

#[test]
fn derivative_matches_finite_difference() {
    let step = 1e-5;
    for &(m, z) in &[(0u32, C64::new(3.1, -0.4)), (4, C64::new(7.5, -0.05)), (9, C64::new(20.0, -0.3))] {
        let dz = C64::new(step, 0.0);
        let fd_j = (bessel_j(m, z + dz).unwrap() - bessel_j(m, z - dz).unwrap()) / (2.0 * step);
        let fd_h = (hankel1(m, z + dz).unwrap() - hankel1(m, z - dz).unwrap()) / (2.0 * step);
        assert!(close(bessel_j_prime(m, z).unwrap(), fd_j, 1e-8), "J' m={m}");
        assert!(close(hankel1_prime(m, z).unwrap(), fd_h, 1e-8), "H' m={m}");
    }
}

proptest! {
    #[test]
    fn j_agrees_with_series(m in 0u32..12, re in 0.05f64..8.0, im in -1.5f64..0.5) {
        let z = C64::new(re, im);
        let a = bessel_j(m, z).unwrap();
        let b = j_series(m, z);
        prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-3), "m={} z={} {} vs {}", m, z, a, b);
    }

    #[test]
    fn wronskian(m in 0u32..20, re in 0.5f64..60.0, im in -2.0f64..0.0) {
        // J_m Y_m' − J_m' Y_m = 2/(πz), written with H = J + iY.
        let z = C64::new(re, im);
        let (j, jp) = (bessel_j(m, z).unwrap(), bessel_j_prime(m, z).unwrap());
        let (h, hp) = (hankel1(m, z).unwrap(), hankel1_prime(m, z).unwrap());
        let w = j * hp - jp * h;
        let expect = C64::new(0.0, 2.0 / PI) / z;
        let scale = (j.norm() * hp.norm()).max(jp.norm() * h.norm()).max(expect.norm());
        prop_assert!((w - expect).norm() <= 1e-10 * scale, "m={} z={}", m, z);
    }

    #[test]
    fn three_term_recurrence(m in 1u32..25, re in 0.5f64..40.0, im in -1.0f64..0.0) {
        let z = C64::new(re, im);
        let factor = 2.0 * m as f64 / z;
        let j = |k| bessel_j(k, z).unwrap();
        let h = |k| hankel1(k, z).unwrap();
        let lhs_j = j(m - 1) + j(m + 1);
        prop_assert!((lhs_j - factor * j(m)).norm() <= 1e-10 * (j(m - 1).norm() + j(m + 1).norm()).max(1e-300));
        let lhs_h = h(m - 1) + h(m + 1);
        prop_assert!((lhs_h - factor * h(m)).norm() <= 1e-10 * (h(m - 1).norm() + h(m + 1).norm()));
    }

    #[test]
    fn conjugate_symmetry_of_j(m in 0u32..10, re in 0.1f64..30.0, im in -2.0f64..2.0) {
        let z = C64::new(re, im);
        let a = bessel_j(m, z.conj()).unwrap();
        let b = bessel_j(m, z).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-3));
    }
}
