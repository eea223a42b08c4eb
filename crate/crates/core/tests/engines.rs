use std::sync::Arc;

use cpdnes_core::compress::round_stochastic;
use cpdnes_core::engines::{
    conventional_step, cpdnes_step, dscdnes_messages, dscdnes_step, npdnes_messages, npdnes_step, ConventionalStep,
    DscParams, OverflowPolicy, PlayerState,
};
use cpdnes_core::game::GameBounds;
use cpdnes_core::{
    ne_linear, run, AggregativeGame, BoxConstraint, Compressor, EnergyGame, EnergyGameParams, EngineConfig, Error,
    InitialRule, QuantizerParams, StepSchedule, Topology, Trajectory, Variant,
};

fn energy_config(variant: Variant, iterations: usize) -> EngineConfig {
    EngineConfig {
        game: Arc::new(EnergyGame::new(EnergyGameParams::default()).unwrap()),
        topology: Arc::new(Topology::ring(5, 1.0).unwrap()),
        schedule: StepSchedule::energy_game(),
        variant,
        iterations,
        initial: InitialRule::Midpoint,
    }
}

fn quantizer(theta: f64) -> Compressor {
    Compressor::Quantizer(QuantizerParams::new(theta, 90.0).unwrap())
}

fn dsc(overflow: OverflowPolicy) -> DscParams {
    DscParams {
        scale_decay: 0.87,
        quantizer: QuantizerParams::with_bits(90.0 / 256.0, 8, 90.0).unwrap(),
        overflow,
    }
}

fn x_star() -> Vec<f64> {
    ne_linear(&EnergyGameParams::default()).unwrap().x_star.into_vec()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn spread_states() -> Vec<PlayerState> {
    [31.0, 44.5, 38.2, 49.9, 35.0]
        .iter()
        .zip([33.0, 47.0, 41.5, 44.0, 36.0])
        .map(|(&x, y)| PlayerState { x: vec![x], y: vec![y] })
        .collect()
}

#[test]
fn runs_are_deterministic_in_seed() {
    let cfg = energy_config(Variant::CpDnes { compressor: quantizer(40.0) }, 300);
    let a = run(&cfg, 17, Some(&x_star())).unwrap();
    let b = run(&cfg, 17, Some(&x_star())).unwrap();
    let c = run(&cfg, 18, Some(&x_star())).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.trajectory, c.trajectory);
}

#[test]
fn empty_run_has_initial_state_only() {
    let cfg = energy_config(Variant::Conventional { step: ConventionalStep::Schedule }, 0);
    let r = run(&cfg, 0, Some(&x_star())).unwrap();
    assert_eq!(r.bits_cum, vec![0]);
    assert_eq!(r.trajectory.len(), 1);
    assert_eq!(r.final_states, cfg.initial_states().unwrap());
}

#[test]
fn bits_charged_per_variant() {
    let cases = [
        (Variant::CpDnes { compressor: quantizer(10.0) }, 4),
        (Variant::CpDnes { compressor: quantizer(60.0) }, 1),
        (Variant::Conventional { step: ConventionalStep::Schedule }, 32),
        (Variant::NpDnes { noise_decay: 0.91 }, 32),
        (Variant::DscDnes(dsc(OverflowPolicy::Saturate)), 8),
    ];
    for (variant, per_scalar) in cases {
        let r = run(&energy_config(variant, 10), 1, None).unwrap();
        assert!(r.bits_cum.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(r.bits_cum[10], 10 * 5 * per_scalar);
    }
}

#[test]
fn average_is_preserved_for_exact_broadcast_engines() {
    let states = spread_states();
    let engines = [
        Variant::CpDnes { compressor: quantizer(10.0) },
        Variant::CpDnes { compressor: Compressor::Relative { phi: 0.05 } },
        Variant::Conventional { step: ConventionalStep::Schedule },
        Variant::DscDnes(dsc(OverflowPolicy::Saturate)),
    ];
    for variant in engines {
        let cfg = energy_config(variant, 1);
        let mut s = states.clone();
        for k in 0..40 {
            s = cpdnes_core::step(&s, k, &cfg, 5).unwrap().states;
            let mx = mean(s.iter().map(|p| p.x[0]));
            let my = mean(s.iter().map(|p| p.y[0]));
            let mx0 = mean(states.iter().map(|p| p.x[0]));
            let my0 = mean(states.iter().map(|p| p.y[0]));
            assert!(((my - mx) - (my0 - mx0)).abs() < 1e-9, "{:?} at {k}", cfg.variant);
        }
    }
}

#[test]
fn noisy_broadcast_breaks_average_preservation() {
    let cfg = energy_config(Variant::NpDnes { noise_decay: 0.91 }, 200);
    let r = run(&cfg, 4, None).unwrap();
    assert!(r.max_average_residual() > 1e-3);
}

#[test]
fn decisions_stay_feasible() {
    let cfg = energy_config(Variant::CpDnes { compressor: quantizer(60.0) }, 2000);
    let r = run(&cfg, 9, None).unwrap();
    let Trajectory::Profiles(profiles) = r.trajectory else { panic!("expected profiles") };
    for p in profiles {
        assert!(p.iter().all(|&x| (30.0..=50.0).contains(&x)));
    }
}

#[test]
fn identity_step_matches_conventional_from_arbitrary_states() {
    let cp = energy_config(Variant::CpDnes { compressor: Compressor::Identity }, 1);
    let conv = energy_config(Variant::Conventional { step: ConventionalStep::Schedule }, 1);
    let s = spread_states();
    for k in [0, 3, 250] {
        let a = cpdnes_step(&s, k, &cp, &Compressor::Identity, 1).unwrap();
        let b = conventional_step(&s, k, &conv, ConventionalStep::Schedule).unwrap();
        assert_eq!(a.states, b.states);
    }
}

#[test]
fn dsc_at_first_round_equals_eight_bit_cpdnes() {
    let params = dsc(OverflowPolicy::Fault);
    let cp = Compressor::Quantizer(params.quantizer);
    let cfg = energy_config(Variant::DscDnes(params), 1);
    let s = spread_states();
    let a = dscdnes_step(&s, 0, &cfg, &params, 21).unwrap();
    let b = cpdnes_step(&s, 0, &cfg, &cp, 21).unwrap();
    assert_eq!(a, b);
}

#[test]
fn dsc_fault_mode_reports_overflow_iteration() {
    let cfg = energy_config(Variant::DscDnes(dsc(OverflowPolicy::Fault)), 5000);
    match run(&cfg, 0, None) {
        Err(Error::NumericFault { iteration, reason }) => {
            assert!((1..=10).contains(&iteration), "iteration {iteration}");
            assert!(reason.contains("exceeds"), "{reason}");
        }
        other => panic!("expected an overflow fault, got {other:?}"),
    }
}

#[test]
fn dsc_saturate_mode_runs_and_counts() {
    let cfg = energy_config(Variant::DscDnes(dsc(OverflowPolicy::Saturate)), 300);
    let r = run(&cfg, 0, None).unwrap();
    assert!(r.saturated > 0);
}

#[test]
fn dsc_error_variance_shrinks_with_scale() {
    let params = dsc(OverflowPolicy::Fault);
    let theta = params.quantizer.theta();
    let states: Vec<PlayerState> = (0..5).map(|i| PlayerState::new(vec![0.013 + 0.0011 * i as f64])).collect();
    for k in [0usize, 10, 25] {
        let r = params.scale(k);
        let bound = r * r * theta * theta / 4.0;
        let mut sq = 0.0;
        let trials = 4000;
        for seed in 0..trials {
            let m = dscdnes_messages(&states, k, &params, seed).unwrap();
            sq += m.sent.iter().zip(&states).map(|(q, s)| (q - s.y[0]).powi(2)).sum::<f64>();
        }
        let var = sq / (trials as f64 * 5.0);
        assert!(var <= bound * 1.05, "k={k}: {var} > {bound}");
    }
}

#[test]
fn np_noise_has_unit_variance_at_first_round() {
    let states: Vec<PlayerState> = (0..5).map(|_| PlayerState::new(vec![40.0])).collect();
    let mut values = Vec::with_capacity(100_000);
    for seed in 0..20_000 {
        let m = npdnes_messages(&states, 0, 0.91, seed);
        values.extend(m.sent.iter().map(|v| v - 40.0));
        assert_eq!(m.own, vec![40.0; 5]);
    }
    let mu = mean(values.iter().copied());
    let var = mean(values.iter().map(|v| (v - mu).powi(2)));
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn np_with_vanishing_noise_tracks_conventional() {
    let cfg = energy_config(Variant::NpDnes { noise_decay: 1e-6 }, 1);
    let s = spread_states();
    let mut a = s.clone();
    let mut b = s;
    // the first round always carries unit-variance noise
    for k in 1..31 {
        a = npdnes_step(&a, k, &cfg, 1e-6, 2).unwrap().states;
        b = conventional_step(&b, k, &cfg, ConventionalStep::Schedule).unwrap().states;
    }
    for (p, q) in a.iter().zip(&b) {
        assert!((p.x[0] - q.x[0]).abs() < 1e-2);
        assert!((p.y[0] - q.y[0]).abs() < 1e-2);
    }
}

#[test]
fn constant_step_conventional_reaches_equilibrium() {
    let cfg = EngineConfig {
        topology: Arc::new(Topology::ring(5, 0.3).unwrap()),
        ..energy_config(
            Variant::Conventional {
                step: ConventionalStep::Constant { eta: 0.1 },
            },
            5000,
        )
    };
    let r = run(&cfg, 0, Some(&x_star())).unwrap();
    assert!(r.trajectory.squared_errors().unwrap()[5000] < 1e-4);
}

#[test]
fn scheduled_conventional_is_far_from_fine_accuracy() {
    let cfg = energy_config(Variant::Conventional { step: ConventionalStep::Schedule }, 5000);
    let r = run(&cfg, 0, Some(&x_star())).unwrap();
    let e = r.trajectory.squared_errors().unwrap();
    assert!(e[5000] < e[500]);
    assert!(e[5000] > 1e-4);
}

#[test]
fn unit_weight_constant_step_diverges_with_fault() {
    let cfg = energy_config(
        Variant::Conventional {
            step: ConventionalStep::Constant { eta: 0.1 },
        },
        5000,
    );
    let mut c = cfg.clone();
    c.initial = InitialRule::Explicit {
        values: vec![45.0, 32.0, 35.0, 48.0, 41.0],
    };
    assert!(matches!(run(&c, 0, None), Err(Error::NumericFault { .. })));
}

/// Every player has a constant cost.
struct FlatGame {
    bounds: BoxConstraint,
}

impl AggregativeGame for FlatGame {
    fn players(&self) -> usize {
        5
    }
    fn dim(&self) -> usize {
        1
    }
    fn constraint(&self, _i: usize) -> &BoxConstraint {
        &self.bounds
    }
    fn cost(&self, _i: usize, _x: &[f64], _v: &[f64]) -> f64 {
        1.0
    }
    fn grad_own(&self, _i: usize, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn grad_aggregate(&self, _i: usize, _x: &[f64], _v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn bounds(&self) -> GameBounds {
        GameBounds {
            m: 0.0,
            l_phi: 0.0,
            l_g: 0.0,
            c: 0.0,
        }
    }
}

#[test]
fn zero_gradient_game_only_mixes_estimates() {
    let cfg = EngineConfig {
        game: Arc::new(FlatGame {
            bounds: BoxConstraint::uniform(1, 30.0, 50.0).unwrap(),
        }),
        ..energy_config(Variant::Conventional { step: ConventionalStep::Schedule }, 1)
    };
    let s = spread_states();
    let out = conventional_step(&s, 0, &cfg, ConventionalStep::Schedule).unwrap().states;
    for (i, (before, after)) in s.iter().zip(&out).enumerate() {
        assert_eq!(before.x, after.x);
        let l = s[(i + 4) % 5].y[0];
        let r = s[(i + 1) % 5].y[0];
        let expected = before.y[0] + 0.4 * (l + r - 2.0 * before.y[0]);
        assert!((after.y[0] - expected).abs() < 1e-12);
    }
}

#[test]
fn compressed_step_uses_one_draw_per_player() {
    // Player 0's neighbours must both see the same realization of C(y_0).
    let cfg = energy_config(Variant::CpDnes { compressor: quantizer(40.0) }, 1);
    let s = spread_states();
    let m = cpdnes_core::engines::cpdnes_messages(&s, 7, &quantizer(40.0), 3).unwrap();
    let mut rng = cpdnes_core::stream::substream(3, 0, 7);
    let expected = round_stochastic(s[0].y[0], 40.0, rand::Rng::random(&mut rng));
    assert_eq!(m.sent[0], expected);
    assert_eq!(m.own, m.sent);
    let out = cpdnes_step(&s, 7, &cfg, &quantizer(40.0), 3).unwrap();
    let beta = cfg.schedule.beta(7);
    let y1 = s[1].y[0] + beta * ((m.sent[0] - m.sent[1]) + (m.sent[2] - m.sent[1])) + out.states[1].x[0] - s[1].x[0];
    assert!((out.states[1].y[0] - y1).abs() < 1e-12);
}
