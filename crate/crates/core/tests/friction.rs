use std::f64::consts::SQRT_2;

use fluctua::material::{MaterialResponse, PermittivityChannel};
use fluctua::observables::{
    friction_threshold, hall_lateral_force, quantum_friction_force, HalfSpacePair, ObservableOptions,
};
use fluctua::Error;

const GAP: f64 = 1e-8;

fn drude() -> MaterialResponse {
    MaterialResponse::new(1.0, vec![PermittivityChannel::drude(1.0, 1e12, SQRT_2 * 1e15)])
}

fn sliding(v: f64) -> HalfSpacePair {
    HalfSpacePair::new(drude(), drude().with_velocity([v, 0.0]))
}

#[test]
fn bodies_at_rest_feel_no_friction() {
    let f = quantum_friction_force(&sliding(0.0), GAP, &ObservableOptions::default()).unwrap();
    assert_eq!(f.value, vec![0.0, 0.0]);
    assert!(!f.gain);
}

#[test]
fn friction_opposes_motion_and_is_odd() {
    let opts = ObservableOptions::default();
    for &v in &[3e5, 8e5] {
        let a = quantum_friction_force(&sliding(v), GAP, &opts).unwrap();
        let b = quantum_friction_force(&sliding(-v), GAP, &opts).unwrap();
        assert!(a.value[0] < 0.0, "v={v:e}: {:?}", a.value);
        assert!(a.gain, "motion must open a gain band");
        assert_eq!(a.value[0], -b.value[0]);
        assert!(a.value[1].abs() <= 1e-12 * a.value[0].abs());
    }
}

#[test]
fn motion_along_y_rotates_the_force() {
    let opts = ObservableOptions::default();
    let x = quantum_friction_force(&sliding(5e5), GAP, &opts).unwrap();
    let pair = HalfSpacePair::new(drude(), drude().with_velocity([0.0, 5e5]));
    let y = quantum_friction_force(&pair, GAP, &opts).unwrap();
    assert!((y.value[1] / x.value[0] - 1.0).abs() < 1e-12);
}

#[test]
fn threshold_is_bracketed_and_enforced() {
    let (lo, hi) = friction_threshold(&sliding(1.0), GAP, 1e7, 0.01)
        .unwrap()
        .expect("pair destabilises");
    assert!(hi > lo && (hi - lo) <= 0.01 * hi);
    // Doppler-shifted surface plasmons (ω_sp = 1e15) meet near k·v = 2ω_sp
    // at wavevectors of order 1/d.
    assert!(lo > 1e6 && hi < 1e7, "[{lo:e}, {hi:e}]");
    match quantum_friction_force(&sliding(1.2 * hi), GAP, &ObservableOptions::default()) {
        Err(Error::Unstable {
            threshold_bracket: Some((a, b)),
            ..
        }) => assert!(a < 1.2 * hi && b > lo),
        other => panic!("expected refusal, got {other:?}"),
    }
}

fn hall_pair() -> HalfSpacePair {
    let first = MaterialResponse::new(1.0, vec![PermittivityChannel::lorentz(1.0, 5e14, 5e13, 5e14)]);
    let second = MaterialResponse::new(
        1.0,
        vec![
            PermittivityChannel::conductivity(1.0, 1e13, 1.77e6, 0.0),
            PermittivityChannel::lorentz(-0.005, 5e14, 5e13, 5e14),
        ],
    );
    HalfSpacePair::new(first, second)
}

#[test]
fn hall_force_needs_hall_conductance_and_is_odd() {
    let opts = ObservableOptions::default();
    let zero = hall_lateral_force(&hall_pair(), GAP, 1e4, 0.0, &opts).unwrap();
    assert!(zero.value[0].abs() <= opts.spec_2d.abs_tol.max(1e-12 * zero.extras["longitudinal"].abs()));
    let p = hall_lateral_force(&hall_pair(), GAP, 1e4, 5e5, &opts).unwrap();
    let m = hall_lateral_force(&hall_pair(), GAP, 1e4, -5e5, &opts).unwrap();
    assert!(p.value[0] != 0.0);
    assert!((p.value[0] + m.value[0]).abs() <= 1e-6 * p.value[0].abs());
}

#[test]
fn hall_force_requires_conductivity_channel() {
    let pair = sliding(0.0);
    assert!(hall_lateral_force(&pair, GAP, 1e4, 1e5, &ObservableOptions::default()).is_err());
}
