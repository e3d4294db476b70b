use proptest::prelude::*;
use windtree::corridors::{enumerate_corridors, oblique_type2, type2_width_rational, type2_width_trig};
use windtree::dynamics::Billiard;
use windtree::presets::Preset;
use windtree::stats::{flight_tail, msd, unit_rng};
use windtree::ModelParams;

fn coprime() -> impl Strategy<Value = (u64, u64)> {
    (1u64..12, 1u64..12)
        .prop_filter("m <= n", |(m, n)| m <= n)
        .prop_map(|(m, n)| {
            let g = gcd(m, n);
            (m / g, n / g)
        })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn type2_closed_forms_agree((m, n) in coprime(), a in 0.01f64..0.7) {
        let theta = (m as f64).atan2(n as f64);
        let w1 = type2_width_rational(a, m, n);
        let w2 = type2_width_trig(theta, a, m, n);
        prop_assert!((w1 - w2).abs() < 1e-12, "{w1} vs {w2}");
    }

    #[test]
    fn type2_exists_iff_width_positive((m, n) in coprime(), a in 0.01f64..0.7, r in 0.0f64..0.1) {
        let p = ModelParams::wind_tree_rational(m, n, a, r);
        let w = type2_width_rational(a, m, n);
        match oblique_type2(&p, m, n) {
            Some(pair) => {
                prop_assert!(w > 0.0);
                for c in pair {
                    prop_assert_eq!(c.width_math, w);
                }
            }
            None => prop_assert!(w <= 0.0),
        }
    }

    #[test]
    fn width_eff_has_slope_minus_two(
        (m, n) in coprime(),
        a in 0.05f64..0.3,
        r1 in 0.0f64..0.05,
        dr in 0.001f64..0.05,
    ) {
        let p1 = ModelParams::wind_tree_rational(m, n, a, r1);
        let p2 = ModelParams::wind_tree_rational(m, n, a, r1 + dr);
        let c1 = enumerate_corridors(&p1, 12);
        for c2 in enumerate_corridors(&p2, 12) {
            let c = c1.iter().find(|c| c.direction == c2.direction);
            prop_assert!(c.is_some(), "corridor {:?} opened as r grew", c2.direction);
            let c = c.unwrap();
            prop_assert_eq!(c.width_math, c2.width_math);
            let slope = (c2.width_eff - c.width_eff) / dr;
            prop_assert!((slope + 2.0).abs() < 1e-6, "{slope}");
        }
    }

    #[test]
    fn orbit_invariants(preset in prop::sample::select(Preset::ALL.to_vec()), seed in any::<u64>()) {
        let b = preset.billiard().unwrap();
        let x0 = b.sample_liouville(&mut unit_rng(seed, 0)).unwrap();
        let mut x = x0;
        for _ in 0..100 {
            let (y, f) = match b.billiard_map(&x, 1e6) {
                Ok(v) => v,
                Err(_) => break,
            };
            // Unit speed: the flight vector has exactly the flown length.
            prop_assert!((f.displacement.norm() - f.length).abs() <= 1e-12 * f.length.max(1.0));
            // The new state sits on the boundary and its velocity points outward.
            prop_assert!(y.phi.abs() < std::f64::consts::FRAC_PI_2);
            let bp = b.boundary().boundary_point(y.s).unwrap();
            prop_assert!((b.boundary().arclength_of(bp.pos) - y.s).abs() < 1e-9
                || (b.boundary().arclength_of(bp.pos) - y.s).abs() > b.boundary().total_len - 1e-9);
            // Time reversal brings the state back.
            let back = b.inverse_map(&y, 1e6).unwrap();
            prop_assert_eq!(back.cell, x.cell);
            prop_assert!((back.s - x.s).abs() < 1e-9 || (back.s - x.s).abs() > b.boundary().total_len - 1e-9);
            prop_assert!((back.phi - x.phi).abs() < 1e-9);
            x = y;
        }
    }
}

#[test]
fn mean_displacement_is_zero_within_four_stderr() {
    for preset in [Preset::Canonical, Preset::Lorentz, Preset::Tail] {
        let b = preset.billiard().unwrap();
        let c = msd(&b, 2000, 1000, 1e7, 77).unwrap();
        let z = c.max_mean_zscore();
        assert!(z < 4.0, "{preset}: max |mean|/stderr = {z}");
    }
}

#[test]
fn estimators_ignore_pool_size() {
    let b = Billiard::new(Preset::Tail.params()).unwrap();
    let run = || (flight_tail(&b, 50_000, 1e4, 3).unwrap(), msd(&b, 40, 300, 1e7, 3).unwrap());
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(run);
    assert_eq!(one, three);
    assert_eq!(one, run());
}
