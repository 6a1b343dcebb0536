use ppd_core::circuit::{load_voltage, step, CircuitParams, Mode, ModeSet};
use ppd_core::correction::{run_tracking, InternalModel, TargetRule, TrackingRun, TrackingState};
use ppd_core::linalg::Vec2;
use ppd_core::logic::UnaryOp;
use ppd_core::rng::XorShift64Star;
use ppd_core::sim::{make_demand, make_inputs, DemandSpec, InputSpec};
use ppd_core::LogicValue;
use proptest::prelude::*;

const T: f64 = 400e-6;

fn model() -> InternalModel {
    InternalModel::new(&CircuitParams::error_correction_bench(), T, TargetRule::DemandKeyed).unwrap()
}

fn start() -> TrackingState {
    TrackingState::new(Vec2([18.0, 15.0]))
}

fn bernoulli_run(seed: u64, slots: usize, use_algorithm: bool) -> (Vec<LogicValue>, TrackingRun) {
    let inputs = make_inputs(&InputSpec::Bernoulli { p: 0.5 }, seed, slots);
    let demand = make_demand(&DemandSpec::default(), slots);
    let run = run_tracking(&demand, &inputs, &model(), start(), use_algorithm).unwrap();
    (inputs, run)
}

#[test]
fn selection_is_one_step_optimal() {
    let p = CircuitParams::error_correction_bench();
    let modes = ModeSet::new(&p, T).unwrap();
    let e = p.effective_source();
    for seed in 0..10 {
        let (_, run) = bernoulli_run(seed, 1000, true);
        let mut prev = run.initial;
        for r in &run.records {
            // re-derive both candidate errors from the previous states
            let target = step(modes.get(Mode::from_logic(r.demand, r.demand)), prev.target, e);
            let err = |out: LogicValue| {
                let actual = step(modes.get(Mode::from_logic(r.input, out)), prev.actual, e);
                (load_voltage(actual) - load_voltage(target)).abs()
            };
            let (keep, flip) = (err(r.input), err(r.input.complement()));
            let (chosen, rejected) = match r.chosen {
                UnaryOp::Through => (keep, flip),
                UnaryOp::Not => (flip, keep),
            };
            assert!(chosen <= rejected, "seed {seed} slot {}: {chosen} > {rejected}", r.k);
            let pe = r.predicted.unwrap();
            assert_eq!((pe.keep, pe.flip), (keep, flip));
            if keep == flip {
                assert_eq!(r.chosen, UnaryOp::Through);
            }
            prev = TrackingState { target: r.target, actual: r.actual, k: r.k + 1 };
        }
    }
}

#[test]
fn inputs_equal_to_demand_match_baseline_exactly() {
    let demand = make_demand(&DemandSpec::default(), 1000);
    let with = run_tracking(&demand, &demand, &model(), start(), true).unwrap();
    let without = run_tracking(&demand, &demand, &model(), start(), false).unwrap();
    assert!(with.records.iter().all(|r| r.chosen == UnaryOp::Through));
    for (a, b) in with.records.iter().zip(&without.records) {
        assert_eq!((a.actual, a.target, a.abs_err.to_bits()), (b.actual, b.target, b.abs_err.to_bits()));
    }
}

#[test]
fn bernoulli_draws_have_the_requested_mean() {
    let n = 100_000;
    for (seed, p) in [(1, 0.5), (2, 0.2), (3, 0.9)] {
        let mut g = XorShift64Star::seed_from(seed);
        let hits = (0..n).filter(|_| g.bernoulli(p)).count() as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() < 3.0 * sigma, "p={p}: {}", hits / n as f64);
    }
}

#[test]
fn single_input_flip_is_absorbed() {
    let slots = 1000;
    let flip_at = 300;
    let demand = make_demand(&DemandSpec::default(), slots);
    for seed in 0..10 {
        let inputs = make_inputs(&InputSpec::Bernoulli { p: 0.5 }, seed, slots);
        let mut disturbed = inputs.clone();
        disturbed[flip_at] = disturbed[flip_at].complement();
        let clean = run_tracking(&demand, &inputs, &model(), start(), true).unwrap();
        let hit = run_tracking(&demand, &disturbed, &model(), start(), true).unwrap();

        let total = |r: &TrackingRun| r.records.iter().map(|x| x.abs_err).sum::<f64>();
        // one slot of the wrong supply moves V2 by at most a few volts
        assert!((total(&hit) - total(&clean)).abs() < 100.0, "seed {seed}");

        let envelope = clean.records.iter().map(|r| r.abs_err).fold(0.0, f64::max);
        let late = hit.records[flip_at + 200..].iter().map(|r| r.abs_err).fold(0.0, f64::max);
        assert!(late <= envelope + 1e-6, "seed {seed}: {late} above {envelope}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_ignores_future_inputs(seed in any::<u64>(), cut in 1usize..200, tail_seed in any::<u64>()) {
        let inputs = make_inputs(&InputSpec::Bernoulli { p: 0.5 }, seed, 200);
        let mut altered = inputs[..cut].to_vec();
        altered.extend(make_inputs(&InputSpec::Bernoulli { p: 0.5 }, tail_seed, 200 - cut));
        let demand = make_demand(&DemandSpec::default(), 200);
        let a = run_tracking(&demand, &inputs, &model(), start(), true).unwrap();
        let b = run_tracking(&demand, &altered, &model(), start(), true).unwrap();
        prop_assert_eq!(&a.records[..cut], &b.records[..cut]);
    }

    #[test]
    fn tracking_stays_finite(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let inputs = make_inputs(&InputSpec::Bernoulli { p }, seed, 300);
        let demand = make_demand(&DemandSpec::default(), 300);
        let run = run_tracking(&demand, &inputs, &model(), start(), true).unwrap();
        prop_assert!(run.records.iter().all(|r| r.actual.is_finite() && r.target.is_finite()));
    }
}
