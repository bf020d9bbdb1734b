use microcavity::geometry::EllipseGeometry;
use microcavity::raydyn::{
    bounce_map, critical_line, focal_invariant, focal_invariant_param, separatrix_curve, separatrix_pair, trace,
    BirkhoffCoord,
};
use proptest::prelude::*;

fn ellipse(e: f64) -> EllipseGeometry<f64> {
    EllipseGeometry::new(e, 1.0).unwrap()
}

/// Largest relative drift of the focal invariant along a trajectory.
fn drift(g: &EllipseGeometry<f64>, x0: BirkhoffCoord<f64>, n: usize) -> f64 {
    let tr = trace(g, x0, n).unwrap();
    let l0 = focal_invariant(g, x0);
    tr.points.iter().map(|&x| (focal_invariant(g, x) - l0).abs()).fold(0.0, f64::max) / l0.abs()
}

#[test]
fn focal_invariant_conserved_over_ten_thousand_bounces() {
    for e in [0.2, 0.4, 0.6] {
        let g = ellipse(e);
        // Rotating (above the separatrix) and librating (below) orbits.
        for (s, p) in [(0.1, 0.8), (0.0, 0.05), (0.25, 0.1), (0.3, -0.55)] {
            let d = drift(&g, BirkhoffCoord::new(s, p), 10_000);
            assert!(d < 1e-9, "e = {e}, seed ({s}, {p}): drift {d:e}");
        }
    }
}

#[test]
fn separatrix_apex_equals_eccentricity() {
    for e in [0.05, 0.2, 1.0 / 3.3, 0.45, 0.6, 0.9] {
        let sep = separatrix_curve(&ellipse(e), 1024).unwrap();
        assert!((sep.max_abs_p() - e).abs() < 1e-12, "e = {e}: {}", sep.max_abs_p());
        // The apex sits at the minor-axis ends.
        let [p1, p2] = separatrix_pair(&ellipse(e), 0.25).unwrap();
        assert!((p1.abs() - e).abs() < 1e-12 && (p2.abs() - e).abs() < 1e-12);
    }
}

#[test]
fn apex_touches_critical_line_at_inverse_index() {
    let n = 3.3;
    let pc = critical_line(n).unwrap();
    let touch = |e: f64| separatrix_curve(&ellipse(e), 1024).unwrap().max_abs_p() - pc;
    assert!(touch(1.0 / n).abs() < 1e-12);
    assert!(touch(0.29) < 0.0 && touch(0.32) > 0.0);
    // The crossing of the apex with the critical line, found by bisection.
    let (mut lo, mut hi) = (0.2, 0.4);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if touch(mid) < 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    assert!((lo - 0.30303).abs() < 1e-5, "{lo}");
}

#[test]
fn separatrix_points_carry_the_separatrix_invariant() {
    let g = ellipse(0.5);
    let sep = separatrix_curve(&g, 64).unwrap();
    for (s, p) in sep.points() {
        let t = g.t_of_s(s);
        assert!(focal_invariant_param(&g, t, p).abs() < 1e-12, "s = {s}");
    }
}

proptest! {
    #[test]
    fn invariant_conserved_for_random_seeds(e in 0.05f64..0.8, s in 0.0f64..1.0, p in -0.95f64..0.95) {
        let g = ellipse(e);
        let x0 = BirkhoffCoord::new(s, p);
        let l0 = focal_invariant(&g, x0);
        // Skip seeds too close to the separatrix for a relative measure.
        prop_assume!(l0.abs() > 1e-3 * g.c * g.c);
        prop_assert!(drift(&g, x0, 500) < 1e-9);
    }

    #[test]
    fn time_reversal(e in 0.0f64..0.8, s in 0.0f64..1.0, p in -0.9f64..0.9) {
        // Reversing the momentum after one bounce retraces the chord.
        let g = ellipse(e);
        let x1 = bounce_map(&g, BirkhoffCoord::new(s, p)).unwrap();
        let back = bounce_map(&g, BirkhoffCoord::new(x1.s, -x1.p)).unwrap();
        let ds = (back.s - s).rem_euclid(1.0);
        prop_assert!(ds.min(1.0 - ds) < 1e-9 && (back.p + p).abs() < 1e-9, "{:?}", back);
    }

    #[test]
    fn momentum_stays_in_range(e in 0.0f64..0.9, s in 0.0f64..1.0, p in -0.99f64..0.99) {
        let tr = trace(&ellipse(e), BirkhoffCoord::new(s, p), 50).unwrap();
        for x in tr.points {
            prop_assert!(x.p.abs() <= 1.0 && (0.0..1.0).contains(&x.s));
        }
    }
}
