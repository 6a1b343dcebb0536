//! Acceptance suite. Runs every criterion, prints one line each and fails
//! the process if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ppd::commands::{self, CorrectArgs, LogicOpArgs};
use ppd::io::write_trace;
use ppd_core::circuit::{
    capacitor_energy, load_voltage, mode_matrices, step, CircuitParams, ContinuousModel, EnergyLedger, Mode, ModeSet,
};
use ppd_core::correction::{select, PredictedErrors};
use ppd_core::linalg::Vec2;
use ppd_core::logic::{buffer_policy, eval_binary, eval_unary, BinaryOp, BufferAction, SlotPair, UnaryOp};
use ppd_core::sim::{run_error_correction, run_logic_experiment, DemandSpec, InputSpec, Pattern, Scenario};
use ppd_core::{LogicValue, OpCode};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pattern(s: &str) -> Pattern {
    s.parse().expect("literal pattern")
}

fn bit(v: LogicValue) -> u8 {
    v.is_one() as u8
}

fn nand_reproduction() -> Outcome {
    use BufferAction::{Discharge as D, NoAction as N, Store as S};
    // NAND table with buffer columns: (f, b) -> (output at b, action at f, action at b)
    let table = [((0, 0), (1, N, D)), ((0, 1), (1, N, N)), ((1, 1), (0, S, S)), ((1, 0), (1, S, D))];
    let started = Instant::now();
    let run = run_logic_experiment(&Scenario::logic(OpCode::Nand, pattern("00011110"))).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    for (pair, &((f, b), (out, act_f, act_b))) in run.events.chunks(2).zip(&table) {
        let got = (bit(pair[0].in_logic), bit(pair[1].in_logic));
        ensure(got == (f, b), || format!("pair inputs {got:?}, expected {:?}", (f, b)))?;
        let row = (pair[1].out_logic.map(bit), pair[0].buffer_action, pair[1].buffer_action);
        ensure(row == (Some(out), act_f, act_b), || format!("pair {f}{b}: {row:?}"))?;
        ensure(pair[0].out_logic.is_none(), || format!("pair {f}{b} emitted at the forward slot"))?;
    }
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    let outs: Vec<_> = run.outputs().iter().map(|v| v.as_char()).collect();
    Ok(format!("outputs {outs:?}, buffer actions match all 4 rows, {elapsed:.1?}"))
}

fn truth_tables() -> Outcome {
    let mut cases = 0;
    for (op, f_of) in [
        (BinaryOp::And, (|f, b| f & b) as fn(u8, u8) -> u8),
        (BinaryOp::Or, |f, b| f | b),
        (BinaryOp::Nand, |f, b| 1 - (f & b)),
        (BinaryOp::Nor, |f, b| 1 - (f | b)),
        (BinaryOp::Xor, |f, b| f ^ b),
        (BinaryOp::Xnor, |f, b| 1 - (f ^ b)),
    ] {
        for (f, b) in [(0, 0), (0, 1), (1, 1), (1, 0)] {
            let pair = SlotPair::new(LogicValue::from_bool(f == 1), LogicValue::from_bool(b == 1));
            let out = bit(eval_binary(op, pair));
            ensure(out == f_of(f, b), || format!("{op:?}({f}{b}) = {out}"))?;
            let o = buffer_policy(op, pair);
            let acts = [o.action_f, o.action_b];
            let n = |a| acts.iter().filter(|&&x| x == a).count() as i32;
            let lhs = (f + b) as i32 + n(BufferAction::Discharge) - n(BufferAction::Store);
            ensure(lhs == bit(o.output_b) as i32, || format!("{op:?}({f}{b}) breaks conservation"))?;
            cases += 1;
        }
    }
    for x in [0u8, 1] {
        let v = LogicValue::from_bool(x == 1);
        ensure(bit(eval_unary(UnaryOp::Through, v)) == x, || format!("through({x})"))?;
        ensure(bit(eval_unary(UnaryOp::Not, v)) == 1 - x, || format!("not({x})"))?;
        cases += 2;
    }
    Ok(format!("{cases} cases exact, conservation in all 24 binary cases"))
}

fn rk4(cm: &ContinuousModel, xi: Vec2, e: f64, period: f64, n: usize) -> Vec2 {
    let f = |x: Vec2| cm.state.mul_vec(x) + cm.input.scale(e);
    let h = period / n as f64;
    let mut x = xi;
    for _ in 0..n {
        let k1 = f(x);
        let k2 = f(x + k1.scale(h / 2.0));
        let k3 = f(x + k2.scale(h / 2.0));
        let k4 = f(x + k3.scale(h));
        x = x + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
    }
    x
}

fn discretization() -> Outcome {
    let p = CircuitParams::error_correction_bench();
    let t = 400e-6;
    let one = ModeSet::new(&p, t).map_err(|e| e.to_string())?;
    let two = ModeSet::new(&p, 2.0 * t).map_err(|e| e.to_string())?;
    let (mut worst, mut semi) = (0.0f64, 0.0f64);
    for mode in Mode::ALL {
        let cm = mode_matrices(&p, mode);
        let dm = one.get(mode);
        for (x0, e) in [(Vec2([1.0, 0.0]), 0.0), (Vec2([0.0, 1.0]), 0.0), (Vec2::ZERO, 1.0), (Vec2([18.0, 15.0]), 20.0)]
        {
            let want = rk4(&cm, x0, e, t, 10_000);
            let got = step(dm, x0, e);
            let rel = if want.norm() == 0.0 { got.norm() } else { (got - want).norm() / want.norm() };
            worst = worst.max(rel);
        }
        semi = semi.max(two.get(mode).state.max_abs_diff(&(dm.state * dm.state)));
    }
    let a22 = one.get(Mode::P00).state.0[1][1];
    ensure(worst < 1e-8, || format!("ZOH vs RK4 relative error {worst:e}"))?;
    ensure(semi < 1e-12, || format!("semigroup deviation {semi:e}"))?;
    ensure((a22 - 0.991525).abs() <= 1e-6, || format!("P00 A[1][1] = {a22}"))?;
    Ok(format!("max rel err {worst:.2e}, semigroup {semi:.2e}, P00 A[1][1] {a22:.7}"))
}

fn ledger_closure() -> Outcome {
    let sc = Scenario::error_correction(0);
    let run = run_error_correction(&sc).map_err(|e| e.to_string())?;
    let p = sc.params;
    let stored =
        |xi: Vec2| capacitor_energy(xi.0[0], p.router_capacitance) + capacitor_energy(xi.0[1], p.load_capacitance);
    let mut worst_slot = 0.0f64;
    let mut worst_total = 0.0f64;
    for (trace, ledgers) in [(&run.with, &run.ledgers_with), (&run.without, &run.ledgers_without)] {
        ensure(ledgers.len() == 1000, || format!("{} ledger rows", ledgers.len()))?;
        let mut total = EnergyLedger::default();
        for ((before, rec), l) in trace.slots().zip(ledgers) {
            // stored energy from the state itself, not from the ledger
            let delta = stored(rec.actual) - stored(before);
            ensure((l.stored_delta - delta).abs() <= 1e-9 * l.scale().max(1e-12), || {
                format!("slot {} stored delta", rec.k)
            })?;
            worst_slot = worst_slot.max((l.source_in - delta - l.dissipated).abs() / l.scale().max(1e-15));
            total.accumulate(l);
        }
        let whole = stored(trace.records.last().unwrap().actual) - stored(trace.initial.actual);
        worst_total = worst_total.max((total.source_in - whole - total.dissipated).abs() / total.scale());
    }
    ensure(worst_slot <= 1e-3, || format!("slot residual {worst_slot:e}"))?;
    ensure(worst_total <= 1e-4, || format!("run residual {worst_total:e}"))?;
    Ok(format!("worst slot {worst_slot:.2e}, run total {worst_total:.2e}"))
}

fn efficacy() -> Outcome {
    let mut better = 0;
    let mut improvement = 0.0;
    for seed in 0..100 {
        let sc = Scenario::error_correction(seed);
        let m = run_error_correction(&sc).map_err(|e| e.to_string())?.metrics;
        if m.avg_abs_err_with < m.avg_abs_err_without {
            better += 1;
        }
        improvement += m.improvement();
    }
    let mean = improvement / 100.0;
    ensure(better >= 95, || format!("only {better}/100 seeds improve"))?;
    Ok(format!("{better}/100 seeds improve, mean improvement {mean:.4} V"))
}

fn one_step_optimality() -> Outcome {
    let mut slots = 0;
    let mut ties = 0;
    for seed in 0..10 {
        let sc = Scenario::error_correction(seed);
        let run = run_error_correction(&sc).map_err(|e| e.to_string())?;
        let modes = ModeSet::new(&sc.params, sc.period).map_err(|e| e.to_string())?;
        let e = sc.params.effective_source();
        let (mut target, mut actual) = (run.with.initial.target, run.with.initial.actual);
        for r in &run.with.records {
            let tgt = step(modes.get(Mode::from_logic(r.demand, r.demand)), target, e);
            let err = |out: LogicValue| {
                (load_voltage(step(modes.get(Mode::from_logic(r.input, out)), actual, e)) - load_voltage(tgt)).abs()
            };
            let (keep, flip) = (err(r.input), err(r.input.complement()));
            let (chosen, rejected) = if r.chosen == UnaryOp::Through { (keep, flip) } else { (flip, keep) };
            ensure(chosen <= rejected, || format!("seed {seed} slot {}: {chosen} > {rejected}", r.k))?;
            if keep == flip {
                ties += 1;
                ensure(r.chosen == UnaryOp::Through, || format!("seed {seed} slot {}: tie went to NOT", r.k))?;
            }
            target = r.target;
            actual = r.actual;
            slots += 1;
        }
    }
    for v in [0.0, 0.25, 3.5, f64::MAX] {
        ensure(select(&PredictedErrors { keep: v, flip: v }) == UnaryOp::Through, || format!("tie at {v}"))?;
    }
    Ok(format!("{slots} slots optimal, {ties} natural ties plus 4 synthetic ties all Through"))
}

fn degenerate_equivalence() -> Outcome {
    let mut sc = Scenario::error_correction(0);
    sc.demand = DemandSpec::Explicit { pattern: pattern("1100") };
    sc.inputs = InputSpec::Explicit { pattern: pattern("1100") };
    let run = run_error_correction(&sc).map_err(|e| e.to_string())?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_trace(&mut a, &run.with).map_err(|e| e.to_string())?;
    write_trace(&mut b, &run.without).map_err(|e| e.to_string())?;
    let strip = |csv: &[u8]| String::from_utf8_lossy(csv).lines().map(|l| l.to_string()).collect::<Vec<_>>();
    ensure(strip(&a) == strip(&b), || "traces differ".into())?;
    let bits = run.with.records.iter().zip(&run.without.records).all(|(x, y)| {
        x.actual.0.map(f64::to_bits) == y.actual.0.map(f64::to_bits) && x.abs_err.to_bits() == y.abs_err.to_bits()
    });
    ensure(bits, || "states differ at the bit level".into())?;
    Ok(format!("{} slots bit-identical", run.with.records.len()))
}

fn scratch(kind: &str, run: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(format!("{kind}_{run}"))
}

fn fresh(kind: &str, run: &str) -> PathBuf {
    let dir = scratch(kind, run);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn dir_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.map_err(|e| e.to_string())?;
            let bytes = std::fs::read(e.path()).map_err(|e| e.to_string())?;
            Ok((e.file_name().to_string_lossy().into_owned(), bytes))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let mut compared = 0;
    let mut sink = Vec::new();
    for run in ["a", "b"] {
        let correct = CorrectArgs {
            scenario: None,
            seed: Some(7),
            slots: Some(500),
            p: Some(0.4),
            no_algorithm: false,
            out: fresh("correct", run),
        };
        commands::correct(&correct, &mut sink).map_err(|e| e.to_string())?;
        let logic = LogicOpArgs {
            op: Some(OpCode::Xor),
            pattern: Some(pattern("0110100111")),
            scenario: None,
            out: fresh("logic", run),
        };
        commands::logic_op(&logic, &mut sink).map_err(|e| e.to_string())?;
    }
    for kind in ["correct", "logic"] {
        let a = dir_bytes(&scratch(kind, "a"))?;
        let b = dir_bytes(&scratch(kind, "b"))?;
        ensure(!a.is_empty() && a == b, || format!("{kind} artifacts differ"))?;
        compared += a.len();
    }
    Ok(format!("{compared} artifacts byte-identical across repeated runs"))
}

fn performance() -> Outcome {
    let mut sc = Scenario::error_correction(1);
    sc.slots = 100_000;
    let started = Instant::now();
    let run = run_error_correction(&sc).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(run.with.records.len() == 100_000, || "short run".into())?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("100000 slots in {elapsed:.0?} (both runs and ledgers)"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("NAND reproduction", nand_reproduction),
        ("full truth-table oracle", truth_tables),
        ("discretization exactness", discretization),
        ("energy ledger closure", ledger_closure),
        ("error-correction efficacy", efficacy),
        ("one-step optimality", one_step_optimality),
        ("degenerate-input equivalence", degenerate_equivalence),
        ("determinism", determinism),
        ("desk-scale performance", performance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
