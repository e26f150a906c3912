use num_complex::Complex64;
use proptest::prelude::*;

use xamp_core::recovery::{
    annihilating_filter, hankel_singular_values, least_squares_amplitudes, matrix_pencil, model_order, FourierCoeffs,
    NOISELESS_SV_THRESHOLD,
};
use xamp_core::sim::{grid_step_for, synthesize_channels};
use xamp_core::xampling::{build_s, xample_channels_folded};
use xamp_core::{
    ArrayGeometry64, FocusMode, LineRecovery, PulseModel64, RecoveryOptions, Scatterer, Scene64, XampleConfig64,
};

const TAU: f64 = 102.4e-6;
const ACQUISITION_TOL_S: f64 = 2e-10;

/// Delays in `[0.05, 0.85] tau`, at least `4 tau / k` apart, with real
/// amplitudes bounded away from zero.
fn instance() -> impl Strategy<Value = (usize, i64, Vec<f64>, Vec<f64>)> {
    (1usize..=4, 1i64..700).prop_flat_map(|(l, first)| {
        let k_lo = 4 * l;
        (
            k_lo..=48,
            Just(first),
            prop::collection::vec(0.0f64..1.0, l),
            prop::collection::vec((0.4f64..2.0, any::<bool>()), l),
        )
            .prop_map(|(k, first, u, a)| {
                let sep = 4.0 * TAU / k as f64;
                let span = 0.8 * TAU - sep * (u.len() as f64 - 1.0);
                let mut base: Vec<f64> = u.iter().map(|x| x * span.max(0.0)).collect();
                base.sort_by(f64::total_cmp);
                let delays = base.iter().enumerate().map(|(i, b)| 0.05 * TAU + b + i as f64 * sep).collect();
                let amps = a.iter().map(|&(m, s)| if s { m } else { -m }).collect();
                (k, first, delays, amps)
            })
    })
}

fn coeffs(k: usize, first: i64, delays: &[f64], amps: &[f64]) -> FourierCoeffs<f64> {
    let a: Vec<Complex64> = amps.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FourierCoeffs::from_cisoids((first..first + k as i64).collect(), TAU, delays, &a)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn pencil_and_annihilating_agree((k, first, delays, amps) in instance()) {
        let y = coeffs(k, first, &delays, &amps);
        let l = delays.len();
        let p = matrix_pencil(&y, k / 2, NOISELESS_SV_THRESHOLD, l).unwrap().delays;
        let a = annihilating_filter(&y, l).unwrap();
        prop_assert!(close(&p, &delays, 1e-9 * TAU), "{p:?} vs {delays:?}");
        prop_assert!(close(&a, &delays, 1e-9 * TAU), "{a:?} vs {delays:?}");
    }

    #[test]
    fn model_order_is_exact((k, first, delays, amps) in instance()) {
        let y = coeffs(k, first, &delays, &amps);
        let sv = hankel_singular_values(&y, k / 2);
        prop_assert_eq!(model_order(&sv, NOISELESS_SV_THRESHOLD), delays.len());
    }

    #[test]
    fn shift_covariance((k, first, delays, amps) in instance(), frac in 0.0f64..1.0) {
        let dt = frac * 0.1 * TAU;
        let l = delays.len();
        let shifted: Vec<f64> = delays.iter().map(|t| t + dt).collect();
        let p0 = matrix_pencil(&coeffs(k, first, &delays, &amps), k / 2, NOISELESS_SV_THRESHOLD, l).unwrap().delays;
        let p1 = matrix_pencil(&coeffs(k, first, &shifted, &amps), k / 2, NOISELESS_SV_THRESHOLD, l).unwrap().delays;
        let moved: Vec<f64> = p0.iter().map(|t| t + dt).collect();
        prop_assert!(close(&p1, &moved, 1e-9 * TAU));
    }

    #[test]
    fn scale_equivariance((k, first, delays, amps) in instance(), gamma in 0.01f64..100.0) {
        let l = delays.len();
        let scaled: Vec<f64> = amps.iter().map(|a| a * gamma).collect();
        let y0 = coeffs(k, first, &delays, &amps);
        let y1 = coeffs(k, first, &delays, &scaled);
        let p0 = matrix_pencil(&y0, k / 2, NOISELESS_SV_THRESHOLD, l).unwrap().delays;
        let p1 = matrix_pencil(&y1, k / 2, NOISELESS_SV_THRESHOLD, l).unwrap().delays;
        prop_assert!(close(&p0, &p1, 1e-9 * TAU));
        let b0 = least_squares_amplitudes(&y0, &p0).unwrap().amplitudes;
        let b1 = least_squares_amplitudes(&y1, &p1).unwrap().amplitudes;
        for (x, z) in b0.iter().zip(&b1) {
            prop_assert!((z - gamma * x).abs() <= 1e-8 * (gamma * x).abs());
        }
        prop_assert!(close(&b0, &amps, 1e-8));
    }
}

fn pipeline_recover(scatterers: Vec<Scatterer<f64>>) -> (Vec<f64>, Vec<f64>) {
    let g = ArrayGeometry64::new(16, 0.298e-3, 1540.0).unwrap();
    let pulse = PulseModel64::standard();
    let scene = Scene64::noiseless(scatterers, TAU);
    let ch = synthesize_channels(&scene, &g, &pulse, grid_step_for(16)).unwrap();
    let cfg = XampleConfig64::new(5, 2, TAU, &pulse, FocusMode::Dynamic, g).unwrap();
    let s = build_s::<f64>(cfg.p()).unwrap();
    let c = xample_channels_folded(&ch, &cfg, &s).unwrap().c;
    let est = LineRecovery::new(&cfg, &pulse, RecoveryOptions::default()).unwrap().recover(&c).unwrap();
    (est.delays, est.amplitudes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn acquisition_scale_equivariance(t1 in 4e-6f64..20e-6, gap in 3e-6f64..20e-6, r in 0.3f64..1.0, gamma in 0.1f64..10.0) {
        let sc = |g: f64| vec![
            Scatterer { axial_time: t1, reflectivity: g * r },
            Scatterer { axial_time: t1 + gap, reflectivity: -g * 0.7 },
        ];
        let (d0, b0) = pipeline_recover(sc(1.0));
        let (d1, b1) = pipeline_recover(sc(gamma));
        prop_assert_eq!(d0.len(), 2);
        prop_assert!(close(&d0, &d1, 1e-9 * TAU));
        for (x, z) in b0.iter().zip(&b1) {
            prop_assert!((z - gamma * x).abs() <= 1e-8 * (gamma * x).abs());
        }
    }

    #[test]
    fn acquisition_shift_covariance(t1 in 4e-6f64..20e-6, gap in 3e-6f64..15e-6, shift in 0.0f64..5e-6) {
        let sc = |s: f64| vec![
            Scatterer { axial_time: t1 + s, reflectivity: 1.0 },
            Scatterer { axial_time: t1 + gap + s, reflectivity: 0.5 },
        ];
        let (d0, _) = pipeline_recover(sc(0.0));
        let (d1, _) = pipeline_recover(sc(shift));
        let moved: Vec<f64> = d0.iter().map(|t| t + 2.0 * shift).collect();
        // echoes move by twice the axial shift; simulated channels carry ~1e-11 s delay error
        prop_assert!(close(&d1, &moved, ACQUISITION_TOL_S), "{d1:?} vs {moved:?}");
    }
}

#[test]
fn noiseless_residual_is_small() {
    let g = ArrayGeometry64::new(16, 0.298e-3, 1540.0).unwrap();
    let pulse = PulseModel64::standard();
    for depth_m in [0.01, 0.02, 0.04] {
        let scene = Scene64::noiseless(vec![Scatterer { axial_time: depth_m / 1540.0, reflectivity: 1.0 }], TAU);
        let ch = synthesize_channels(&scene, &g, &pulse, grid_step_for(16)).unwrap();
        let cfg = XampleConfig64::new(5, 2, TAU, &pulse, FocusMode::Dynamic, g).unwrap();
        let s = build_s::<f64>(cfg.p()).unwrap();
        let c = xample_channels_folded(&ch, &cfg, &s).unwrap().c;
        let est = LineRecovery::new(&cfg, &pulse, RecoveryOptions::default()).unwrap().recover(&c).unwrap();
        assert_eq!(est.model_order, 1);
        assert!(est.residual <= 1e-3, "depth {depth_m}: residual {}", est.residual);
    }
}
