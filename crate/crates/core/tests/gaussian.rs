use cubicphase::gaussian::{self, GaussianParams, SearchConfig};
use cubicphase::{states, DensityMatrix, C64};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inverse_undoes_gaussian(re in -1.0f64..1.0, im in -1.0f64..1.0, r in 0.0f64..0.5,
                               phi in 0.0f64..6.0, rot in 0.0f64..6.0) {
        let psi = states::coherent(C64::new(0.2, -0.1), 60).unwrap();
        let g = GaussianParams::new(C64::new(re, im), r, phi, rot).unwrap();
        let there = gaussian::apply_gaussian(&g, &psi).unwrap();
        let back = gaussian::apply_gaussian_inverse(&g, &there).unwrap();
        for (a, b) in back.amps().iter().zip(psi.amps()).take(30) {
            prop_assert!((a - b).norm() < 1e-7);
        }
    }
}

#[test]
fn displaced_vacuum_is_coherent() {
    let alpha = C64::new(-0.5, 1.2);
    let got = gaussian::apply_gaussian(
        &GaussianParams::displacement(alpha),
        &states::vacuum(40).unwrap(),
    )
    .unwrap();
    let want = states::coherent(alpha, 40).unwrap();
    for (a, b) in got.amps().iter().zip(want.amps()) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn orbit_fidelity_sees_through_a_gaussian() {
    let cfg = SearchConfig {
        disp_step: 0.5,
        r_step: 0.25,
        refinements: 4,
        ..Default::default()
    };
    let cubic = states::cubic_phase_state(0.1, 0.0, 40).unwrap().state;
    let moved = gaussian::apply_gaussian(
        &GaussianParams::new(C64::new(0.0, -0.5), 0.0, 0.0, 0.0).unwrap(),
        &cubic,
    )
    .unwrap();
    let rho = DensityMatrix::from_pure(&moved).unwrap();
    let fit = gaussian::orbit_fidelity(&rho, 0.1, 0.0, &cfg).unwrap();
    assert!(fit.fidelity > 0.999, "{}", fit.fidelity);
    assert!((fit.params.disp - C64::new(0.0, -0.5)).norm() < 0.05, "{:?}", fit.params);
    assert!(fit.history.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn search_config_rejects_nonsense() {
    let bad = SearchConfig {
        disp_step: 0.0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let bad = SearchConfig {
        r_min: 1.0,
        r_max: 0.5,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
}
