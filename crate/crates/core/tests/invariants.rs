use std::f64::consts::PI;

use modmirror::analysis::directivity;
use modmirror::floquet::{sideband_spectrum, Truncation};
use modmirror::lindblad::{evolve, DensityMatrix, EvolveOptions};
use modmirror::scene::TWO_PI;
use modmirror::{mhz_to_angular, DriveConfig, EmitterParams, ModulationConfig, Port, Scene, WaveguideArray};
use proptest::prelude::*;

fn two_emitters(gamma2_mhz: f64, am_mhz: f64, alpha: f64, phi: f64, detuning_mhz: f64) -> Scene {
    let e = EmitterParams::new(mhz_to_angular(6000.0), mhz_to_angular(4.4), mhz_to_angular(gamma2_mhz))
        .with_modulation(mhz_to_angular(am_mhz), 0.0);
    Scene::new(
        WaveguideArray::new(vec![e, e.with_modulation(e.mod_amp, alpha)], phi),
        DriveConfig::new(mhz_to_angular(6000.0 + detuning_mhz), 0.0),
        ModulationConfig::new(mhz_to_angular(20.0)),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn global_phase_shift_leaves_powers_unchanged(
        alpha in 0.0..TWO_PI, shift in -10.0..10.0f64, am in 0.0..40.0f64, det in -50.0..50.0f64,
    ) {
        let s = two_emitters(3.9, am, alpha, PI / 2.0, det);
        let a = sideband_spectrum(&s, Truncation::Fixed(16)).unwrap();
        let b = sideband_spectrum(&s.with_global_phase_shift(shift), Truncation::Fixed(16)).unwrap();
        for n in -4..=4 {
            prop_assert!((a.t(n).norm_sqr() - b.t(n).norm_sqr()).abs() < 1e-10);
            prop_assert!((a.r(n).norm_sqr() - b.r(n).norm_sqr()).abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_is_two_pi_periodic(alpha in 0.0..TWO_PI, k in -3i32..=3, det in -50.0..50.0f64) {
        let s = two_emitters(4.1, 30.0, alpha, PI / 2.0, det);
        let a = sideband_spectrum(&s, Truncation::Fixed(16)).unwrap();
        let b = sideband_spectrum(&s.with_mod_phase(1, alpha + k as f64 * TWO_PI), Truncation::Fixed(16)).unwrap();
        for n in -4..=4 {
            prop_assert!((a.t(n).norm_sqr() - b.t(n).norm_sqr()).abs() < 1e-10);
            prop_assert!((a.r(n).norm_sqr() - b.r(n).norm_sqr()).abs() < 1e-10);
        }
    }

    #[test]
    fn lossless_emitters_conserve_flux(
        alpha in 0.0..TWO_PI, phi in 0.0..TWO_PI, am in 0.0..40.0f64, det in -60.0..60.0f64,
    ) {
        let s = two_emitters(2.2, am, alpha, phi, det);
        let total = sideband_spectrum(&s, Truncation::Auto).unwrap().total_power();
        prop_assert!((total - 1.0).abs() < 1e-6, "total {total}");
    }

    #[test]
    fn mirror_symmetric_device_is_port_symmetric(am in 0.0..40.0f64, det in -50.0..50.0f64, phi in 0.0..TWO_PI) {
        let s = two_emitters(3.9, am, 0.0, phi, det);
        let l = sideband_spectrum(&s, Truncation::Fixed(16)).unwrap();
        let r = sideband_spectrum(&s.with_port(Port::Right), Truncation::Fixed(16)).unwrap();
        for n in -4..=4 {
            prop_assert!((l.t(n).norm_sqr() - r.t(n).norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn directivity_is_bounded(pf in 0.0..1e3f64, pb in 0.0..1e3f64) {
        prop_assume!(pf + pb > 0.0);
        let d = directivity(pf, pb).unwrap();
        prop_assert!((-1.0..=1.0).contains(&d));
        prop_assert_eq!(d == 0.0, pf == pb);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn master_equation_preserves_density_matrix_invariants(
        alpha in 0.0..TWO_PI, phi in 0.0..TWO_PI, rabi in 0.0..40.0f64, am in 0.0..30.0f64, det in -20.0..20.0f64,
    ) {
        let s = two_emitters(3.0, am, alpha, phi, det).with_rabi(mhz_to_angular(rabi));
        let opts = EvolveOptions { error_check: false, ..Default::default() };
        let traj = evolve(&DensityMatrix::ground(2), &s, (0.0, 2e-7), 1e-10, opts).unwrap();
        for rho in &traj.states {
            prop_assert!(rho.check().is_ok());
        }
    }
}
