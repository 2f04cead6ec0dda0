use proptest::prelude::*;
use spraysim::valve::{
    integrate_volume, nozzle_flow, plunger_step, pwm_waveform, PlungerState, PwmMode, PwmSettings,
    PwmSignal, ValveBank, ValveParams,
};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn open(x_n: f64) -> PlungerState {
    PlungerState { x_n, t: 0.0 }
}

#[test]
fn flow_scales_with_area_opening_and_pressure() {
    let p = ValveParams::default();
    let q = nozzle_flow(&open(0.5), &p);
    let area = ValveParams { a_n: 2.0 * p.a_n, ..p };
    assert!(rel(nozzle_flow(&open(0.5), &area), 2.0 * q) < 1e-12);
    assert!(rel(nozzle_flow(&open(1.0), &p), 2.0 * q) < 1e-12);
    let pressure = ValveParams { p_n: 2.0 * p.p_n, ..p };
    assert!(rel(nozzle_flow(&open(0.5), &pressure), 2f64.sqrt() * q) < 1e-12);
}

#[test]
fn full_flow_closed_form() {
    let p = ValveParams::default();
    // 0.6 * 1e-5 * sqrt(2 * 3e5 / 1000)
    let expect = 0.6 * 1e-5 * 600f64.sqrt();
    assert!(rel(p.full_flow(), expect) < 1e-15);
}

#[test]
fn steady_minute_matches_closed_form() {
    let p = ValveParams::default();
    let pwm = PwmSettings::default();
    let mut bank = ValveBank::new(8, p, pwm).unwrap();
    bank.preset_opening(1.0);
    let steps = (60.0 / bank.dt()).round() as usize;
    for _ in 0..steps {
        bank.step(&[100.0; 8]).unwrap();
    }
    let expect_l = 8.0 * p.full_flow() * 60.0 * 1000.0;
    assert!(rel(bank.volume_litres(), expect_l) < 1e-6);
}

#[test]
fn waveform_boundaries() {
    let s = PwmSignal {
        frequency: 10.0,
        duty: 80.0,
        phase: 0.0,
    };
    assert!(pwm_waveform(&s, 0.0));
    assert!(pwm_waveform(&s, 0.079));
    assert!(!pwm_waveform(&s, 0.08));
    assert!(!pwm_waveform(&s, 0.099));
    // The boundary instant belongs to the new period.
    assert!(pwm_waveform(&s, 0.1));
    assert!(pwm_waveform(&s, 0.3));
}

#[test]
fn zero_duty_dispenses_nothing() {
    for mode in [PwmMode::Averaged, PwmMode::Waveform] {
        let pwm = PwmSettings { mode, ..Default::default() };
        let out = integrate_volume(&vec![vec![0.0; 8]; 500], pwm.dt(), &ValveParams::default(), &pwm).unwrap();
        assert_eq!(out.last().unwrap().volume_accum, 0.0);
    }
}

fn schedule() -> impl Strategy<Value = Vec<Vec<f64>>> {
    let duty = prop_oneof![Just(0.0), 75.0f64..=100.0];
    (1usize..9).prop_flat_map(move |n| {
        prop::collection::vec(prop::collection::vec(duty.clone(), n), 1..300)
    })
}

proptest! {
    #[test]
    fn boom_flow_is_the_sum_of_nozzle_flows(s in schedule(), waveform in any::<bool>()) {
        let pwm = PwmSettings {
            mode: if waveform { PwmMode::Waveform } else { PwmMode::Averaged },
            ..Default::default()
        };
        for sample in integrate_volume(&s, pwm.dt(), &ValveParams::default(), &pwm).unwrap() {
            let sum: f64 = sample.q_n.iter().sum();
            prop_assert!(sample.q_total == sum || rel(sample.q_total, sum) < 1e-12);
        }
    }

    #[test]
    fn volume_is_the_trapezoid_of_boom_flow(s in schedule()) {
        let pwm = PwmSettings::default();
        let dt = pwm.dt();
        let out = integrate_volume(&s, dt, &ValveParams::default(), &pwm).unwrap();
        let mut prev = 0.0;
        let mut oracle = 0.0;
        for sample in &out {
            let q: f64 = sample.q_n.iter().sum();
            oracle += (prev + q) / 2.0 * dt * 1000.0;
            prev = q;
            let v = sample.volume_accum;
            prop_assert!(v >= 0.0);
            prop_assert!(v == oracle || rel(v, oracle) < 1e-9);
        }
    }

    #[test]
    fn plunger_stays_in_range(x0 in 0.0f64..=1.0, target in -0.5f64..1.5, dt in 1e-5f64..1.0) {
        let s = plunger_step(open(x0), target, dt, &ValveParams::default());
        prop_assert!((0.0..=1.0).contains(&s.x_n));
        let t = target.clamp(0.0, 1.0);
        prop_assert!((s.x_n - t).abs() <= (x0 - t).abs() + 1e-15);
    }

    #[test]
    fn plunger_settles_within_ten_time_constants(x0 in 0.0f64..=1.0, target in 0.0f64..=1.0) {
        let p = ValveParams::default();
        let mut s = open(x0);
        let dt = p.plunger_tau / 20.0;
        for _ in 0..200 {
            s = plunger_step(s, target, dt, &p);
        }
        prop_assert!((s.x_n - target).abs() <= (-10.0f64).exp() + 1e-12);
    }
}
