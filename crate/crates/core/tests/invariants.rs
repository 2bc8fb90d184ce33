//! Property tests for structural invariants.

use approx::assert_relative_eq;
use disslab::bounds::{gamma_condition, zeta_star, zeta_star_slope};
use disslab::duchon_robert::relative_residual;
use disslab::fields::io::{decode, encode};
use disslab::fields::{fit_power_law, synth_field, FieldMeta, PeriodicGrid, SpaceTimeField, Spectral, SynthKind};
use disslab::fractal::{box_count_dimension, Mask};
use disslab::lp_besov::build_dyadic_family;
use disslab::mollify::{mollify, Mollifier};
use disslab::structure_fn::absolute_sf;
use disslab::testfn::TimeBump;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn grid(d: usize, log_n: u32) -> PeriodicGrid {
    PeriodicGrid::snapshot(d, 1 << log_n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fft_round_trip(d in 1usize..=3, log_n in 3u32..=5, seed in any::<u64>()) {
        let g = grid(d, log_n);
        let sp = Spectral::for_grid(&g);
        let x = noise(g.points(), seed);
        let y = sp.inverse(sp.forward(&x));
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval(d in 1usize..=2, log_n in 3u32..=6, seed in any::<u64>()) {
        let g = grid(d, log_n);
        let sp = Spectral::for_grid(&g);
        let x = noise(g.points(), seed);
        let direct: f64 = x.iter().map(|v| v * v).sum();
        assert_relative_eq!(sp.parseval_sum(&sp.forward(&x)), direct, max_relative = 1e-11);
    }

    #[test]
    fn mollification_preserves_mean(log_n in 4u32..=6, cells in 1.0f64..6.0, seed in any::<u64>()) {
        let g = grid(2, log_n);
        let f = SpaceTimeField::new(g, 1, noise(g.points(), seed), FieldMeta::named("noise")).unwrap();
        let m = mollify(&f, &Mollifier::space(cells * g.spacing())).unwrap();
        prop_assert!((m.mean() - f.mean()).abs() < 1e-12);
        prop_assert!(m.max_abs() <= f.max_abs() + 1e-12);
    }

    #[test]
    fn partition_of_unity(log_n in 4u32..=12, r in 0.0f64..4096.0) {
        let g = grid(1, log_n);
        let fam = build_dyadic_family(&g).unwrap();
        let s: f64 = (0..=fam.bands).map(|k| fam.multiplier(k, r)).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        for k in 0..=fam.bands {
            let m = fam.multiplier(k, r);
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&m));
        }
    }

    #[test]
    fn resample_is_exact_on_band_limited_data(log_n in 4u32..=6, seed in any::<u64>()) {
        let g = grid(2, log_n);
        let kmax = (g.n / 4) as f64;
        let sp = Spectral::for_grid(&g);
        let x = sp.filter(&noise(g.points(), seed), |k| if ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt() < kmax { 1.0 } else { 0.0 });
        let fine = Spectral::for_shape(2, 2 * g.n, g.length);
        let back = fine.resample(&sp.resample(&x, &fine), &sp);
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn field_container_round_trip(nt in 1usize..4, comps in 1usize..3, seed in any::<u64>()) {
        let g = PeriodicGrid::new(2, 8, 1.5, nt, 0.25).unwrap();
        let f = SpaceTimeField::new(g, comps, noise(nt * comps * 64, seed), FieldMeta::named("noise")).unwrap();
        let bytes = encode(&f);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(back.data(), f.data());
        let mut bad = bytes.clone();
        let i = bytes.len() - 12;
        bad[i] ^= 0x40;
        prop_assert!(decode(&bad).is_err());
    }

    #[test]
    fn zeta_star_is_bounded_by_linear_scaling(p in 3.0f64..20.0, kappa in 0.0f64..1.0) {
        let z = zeta_star(p, kappa).unwrap();
        prop_assert!(z <= p / 3.0 + 1e-12);
        prop_assert!(zeta_star_slope(p, kappa).unwrap() > 0.0);
        prop_assert!((zeta_star(3.0, kappa).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_star_decreases_with_codimension(p in 3.5f64..12.0, k1 in 0.0f64..1.0, k2 in 0.0f64..1.0) {
        let (lo, hi) = if k1 < k2 { (k1, k2) } else { (k2, k1) };
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(zeta_star(p, hi).unwrap() < zeta_star(p, lo).unwrap());
    }

    #[test]
    fn gamma_condition_margin_grows_with_sigma(s1 in 0.01f64..0.99, s2 in 0.01f64..0.99, p in 3.0f64..10.0, gamma in 0.0f64..4.0) {
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        prop_assume!(hi - lo > 1e-6);
        let a = gamma_condition(lo, p, gamma, 3).unwrap();
        let b = gamma_condition(hi, p, gamma, 3).unwrap();
        prop_assert!(b.margin >= a.margin);
    }

    #[test]
    fn power_law_fit_is_exact(alpha in -3.0f64..3.0, amp in 0.01f64..100.0) {
        let x: Vec<f64> = (0..6).map(|i| 0.1 * 2f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|x| amp * x.powf(alpha)).collect();
        let f = fit_power_law(&x, &y, None).unwrap();
        prop_assert!((f.exponent - alpha).abs() < 1e-10);
        prop_assert!((f.r2 - 1.0).abs() < 1e-10 || alpha.abs() < 1e-9);
    }

    #[test]
    fn relative_residual_is_normalized(a in -1e3f64..1e3, b in -1e3f64..1e3, guard in 0.0f64..1.0) {
        let r = relative_residual(a, b, guard);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r, relative_residual(b, a, guard));
    }

    #[test]
    fn time_bump_is_supported_and_bounded(t0 in -5.0f64..5.0, len in 0.01f64..5.0, t in -20.0f64..20.0) {
        let b = TimeBump::new(t0, t0 + len).unwrap();
        let v = b.value(t);
        prop_assert!((0.0..=1.0).contains(&v));
        if t <= t0 || t >= t0 + len {
            prop_assert_eq!(v, 0.0);
            prop_assert_eq!(b.derivative(t), 0.0);
        }
    }

    #[test]
    fn full_masks_have_integer_dimension(rank in 1usize..=3) {
        let side = if rank == 3 { 32 } else { 64 };
        let f = box_count_dimension(&Mask::full(vec![side; rank]), &[1, 2, 4, 8]).unwrap();
        prop_assert!((f.exponent - rank as f64).abs() < 1e-9);
    }

    #[test]
    fn structure_functions_ignore_constant_shifts(seed in any::<u64>(), shift in -3.0f64..3.0) {
        let g = grid(2, 5);
        let u = synth_field(&g, &SynthKind::RandomSolenoidal { sigma: 0.5 }, seed).unwrap();
        let v = u.map(|x| x + shift);
        let ells = [g.spacing(), 2.0 * g.spacing(), 4.0 * g.spacing()];
        let a = absolute_sf(&u, &[2.0, 3.0], &ells, 8).unwrap();
        let b = absolute_sf(&v, &[2.0, 3.0], &ells, 8).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            for (x, y) in ca.values.iter().zip(&cb.values) {
                prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn random_fields_depend_only_on_the_seed(seed in any::<u64>()) {
        let g = grid(2, 4);
        let kind = SynthKind::RandomPhaseBesov { sigma: 0.4, p_target: 3.0 };
        let a = synth_field(&g, &kind, seed).unwrap();
        let b = synth_field(&g, &kind, seed).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }
}
