//! Ensemble statistics of synthesised screens against the model spectrum.

use proptest::prelude::*;
use qlink::atmosphere::{greenwood_and_coherence, AtmosphereProfile, LinkGeometry, Turbulence};
use qlink::rng::StreamId;
use qlink::screens::{
    plan_slabs, screen_structure_function, PhaseScreen, ScreenGenerator, ScreenSpec, SLAB_SCINTILLATION_LIMIT,
    SLAB_SCINTILLATION_SHARE,
};

const R0: f64 = 0.1;
const OUTER: f64 = 5.0;
const INNER: f64 = 0.01;

/// Separations (m) and the model structure function for r0 = 0.1 m,
/// L0 = 5 m, l0 = 1 cm, from a Hankel-transform quadrature.
const MVK_ORACLE: [(f64, f64); 7] = [
    (0.02, 0.3479437550384011),
    (0.05, 1.466126529110557),
    (0.1, 4.120492287615498),
    (0.25, 14.649878819562838),
    (0.5, 33.94020999851206),
    (1.0, 66.1918002609923),
    (1.25, 78.03770944506658),
];

fn spec(r0: f64) -> ScreenSpec {
    ScreenSpec {
        slab_index: 0,
        fried_parameter: Turbulence::Active(r0),
        outer_scale: OUTER,
        inner_scale: INNER,
    }
}

fn ensemble(r0: f64, n: usize, spacing: f64, count: usize, seed: u64) -> Vec<PhaseScreen> {
    let generator = ScreenGenerator::new(&spec(r0), n, spacing).unwrap();
    (0..count as u64).map(|k| generator.generate(seed, StreamId::screen(k, 0))).collect()
}

#[test]
fn structure_function_follows_model_spectrum() {
    let screens = ensemble(R0, 512, 0.01, 200, 11);
    let separations: Vec<f64> = MVK_ORACLE.iter().map(|p| p.0).collect();
    let measured = screen_structure_function(&screens, &separations).unwrap();
    for ((r, expected), got) in MVK_ORACLE.iter().zip(&measured) {
        let rel = got / expected - 1.0;
        assert!(rel.abs() < 0.1, "r = {r}: {got} vs {expected} ({rel:+.3})");
    }
    assert!(measured.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn pixel_means_are_zero() {
    let screens = ensemble(R0, 64, 0.02, 200, 5);
    let n = 64 * 64;
    let count = screens.len() as f64;
    for p in 0..n {
        let vals: Vec<f64> = screens.iter().map(|s| s.data()[p]).collect();
        let mean = vals.iter().sum::<f64>() / count;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        assert!(mean.abs() < 5.0 * (var / count).sqrt(), "pixel {p}");
    }
}

#[test]
fn doubling_turbulence_doubles_variance() {
    // r0 ∝ (∫Cn2)^(-3/5), so doubling the integral scales r0 by 2^(-3/5)
    let variance = |screens: &[PhaseScreen]| {
        let mut acc = 0.0;
        for s in screens {
            let m = s.data().iter().sum::<f64>() / s.data().len() as f64;
            acc += s.data().iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.data().len() as f64;
        }
        acc / screens.len() as f64
    };
    let base = variance(&ensemble(R0, 128, 0.02, 400, 21));
    let doubled = variance(&ensemble(R0 * 2f64.powf(-0.6), 128, 0.02, 400, 22));
    let ratio = doubled / base;
    assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
}

#[test]
fn screens_are_reproducible() {
    let a = ensemble(R0, 64, 0.02, 3, 99);
    let b = ensemble(R0, 64, 0.02, 3, 99);
    assert_eq!(a, b);
    let c = ensemble(R0, 64, 0.02, 3, 100);
    assert_ne!(a[0].data(), c[0].data());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slab_conditions_hold(theta in 0.0f64..70.0, scale in 0.05f64..3.0) {
        let geom = LinkGeometry::reference(theta, 0.15).unwrap();
        let profile = AtmosphereProfile::reference().unwrap().scaled(scale).unwrap();
        let diag = greenwood_and_coherence(&geom, &profile).unwrap();
        let plan = plan_slabs(&geom, &profile, &diag).unwrap();
        let whole = plan.whole_channel_scintillation();
        let limit = SLAB_SCINTILLATION_LIMIT.min(SLAB_SCINTILLATION_SHARE * whole);
        for (_, slab) in plan.turbulent() {
            prop_assert!(slab.scintillation_index() < limit);
        }
        let b = plan.boundaries();
        prop_assert!(b.windows(2).all(|w| w[1] > w[0]));
        prop_assert!((b[0] - geom.ground_altitude()).abs() < 1e-9);
        prop_assert!((b[b.len() - 1] - geom.satellite_altitude()).abs() < 1e-6);
    }
}
