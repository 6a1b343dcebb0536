//! Self-checks run by `ppd validate`.
//!
//! Each check compares the library against an independent route: the
//! discretization against fine-step Runge–Kutta integration of the
//! continuous modes, the logic tables against integer arithmetic, and the
//! energy ledger against the stored-energy difference.

use ppd_core::circuit::{mode_matrices, CircuitParams, ContinuousModel, Mode, ModeSet};
use ppd_core::linalg::Vec2;
use ppd_core::logic::{
    buffer_policy, eval_binary, eval_unary, nand_outcome, BinaryOp, BufferAction, SlotPair, UnaryOp,
};
use ppd_core::packet::{LogicValue, OpCode};
use ppd_core::sim::{run_error_correction, run_logic_experiment, Pattern, Scenario};

pub const RK4_SUBSTEPS: usize = 10_000;
pub const DISCRETIZATION_TOLERANCE: f64 = 1e-8;
pub const SEMIGROUP_TOLERANCE: f64 = 1e-12;
pub const TOTAL_LEDGER_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name, passed, detail: detail.into() }
    }
}

/// Integrates `ξ' = Mξ + NE` over `period` with classic RK4.
pub fn rk4(model: &ContinuousModel, xi: Vec2, source: f64, period: f64, substeps: usize) -> Vec2 {
    let f = |x: Vec2| model.state.mul_vec(x) + model.input.scale(source);
    let h = period / substeps as f64;
    let mut x = xi;
    for _ in 0..substeps {
        let k1 = f(x);
        let k2 = f(x + k1.scale(h / 2.0));
        let k3 = f(x + k2.scale(h / 2.0));
        let k4 = f(x + k3.scale(h));
        x = x + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
    }
    x
}

/// Worst relative deviation of the discrete `(A, B)` from RK4 over the
/// columns of `A` and the vector `B`.
pub fn discretization_error(params: &CircuitParams, period: f64) -> Result<f64, ppd_core::circuit::CircuitError> {
    let set = ModeSet::new(params, period)?;
    let mut worst = 0.0f64;
    for mode in Mode::ALL {
        let cm = mode_matrices(params, mode);
        let dm = set.get(mode);
        let cols = [
            (Vec2([1.0, 0.0]), 0.0, Vec2([dm.state.0[0][0], dm.state.0[1][0]])),
            (Vec2([0.0, 1.0]), 0.0, Vec2([dm.state.0[0][1], dm.state.0[1][1]])),
            (Vec2::ZERO, 1.0, dm.input),
        ];
        for (x0, e, got) in cols {
            let want = rk4(&cm, x0, e, period, RK4_SUBSTEPS);
            let scale = want.norm().max(f64::MIN_POSITIVE);
            if want.norm() == 0.0 {
                worst = worst.max(got.norm());
            } else {
                worst = worst.max((got - want).norm() / scale);
            }
        }
    }
    Ok(worst)
}

fn check_discretization() -> Check {
    let params = CircuitParams::error_correction_bench();
    let period = 400e-6;
    let err = match discretization_error(&params, period) {
        Ok(e) => e,
        Err(e) => return Check::new("discretization", false, e.to_string()),
    };
    let one = ModeSet::new(&params, period).expect("valid bench");
    let two = ModeSet::new(&params, 2.0 * period).expect("valid bench");
    let semigroup = Mode::ALL
        .iter()
        .map(|&m| two.get(m).state.max_abs_diff(&(one.get(m).state * one.get(m).state)))
        .fold(0.0, f64::max);
    let p00 = one.get(Mode::P00).state.0[1][1];
    let passed = err < DISCRETIZATION_TOLERANCE && semigroup < SEMIGROUP_TOLERANCE && (p00 - 0.991_525).abs() <= 1e-6;
    Check::new("discretization", passed, format!("rk4 rel err {err:.3e}, semigroup {semigroup:.3e}, P00 a22 {p00:.9}"))
}

fn bit(v: LogicValue) -> u8 {
    v.is_one() as u8
}

fn check_truth_tables() -> Check {
    let mut cases = 0;
    let mut failures = Vec::new();
    for op in BinaryOp::ALL {
        for pair in SlotPair::ALL {
            let (f, b) = (bit(pair.forward), bit(pair.backward));
            let want = match op {
                BinaryOp::And => f & b,
                BinaryOp::Or => f | b,
                BinaryOp::Nand => 1 - (f & b),
                BinaryOp::Nor => 1 - (f | b),
                BinaryOp::Xor => f ^ b,
                BinaryOp::Xnor => 1 - (f ^ b),
            };
            cases += 1;
            if bit(eval_binary(op, pair)) != want {
                failures.push(format!("{op:?}({f}{b})"));
            }
            let o = buffer_policy(op, pair);
            let stores = [o.action_f, o.action_b].iter().filter(|&&a| a == BufferAction::Store).count() as i32;
            let discharges = [o.action_f, o.action_b].iter().filter(|&&a| a == BufferAction::Discharge).count() as i32;
            if f as i32 + b as i32 + discharges - stores != bit(o.output_b) as i32 {
                failures.push(format!("conservation {op:?}({f}{b})"));
            }
        }
    }
    for op in [UnaryOp::Through, UnaryOp::Not] {
        for x in [LogicValue::Zero, LogicValue::One] {
            cases += 1;
            let want = if op == UnaryOp::Not { 1 - bit(x) } else { bit(x) };
            if bit(eval_unary(op, x)) != want {
                failures.push(format!("{op:?}({x})"));
            }
        }
    }
    for pair in SlotPair::ALL {
        if buffer_policy(BinaryOp::Nand, pair) != nand_outcome(pair) {
            failures.push(format!("nand table row {}{}", pair.forward, pair.backward));
        }
    }
    Check::new("truth-tables", failures.is_empty(), format!("{cases} cases, failures: {failures:?}"))
}

fn check_nand_bench() -> Check {
    let pattern: Pattern = "00011110".parse().expect("static pattern");
    match run_logic_experiment(&Scenario::logic(OpCode::Nand, pattern)) {
        Ok(run) => {
            let outs: String = run.outputs().iter().map(|v| v.as_char()).collect();
            let passed = outs == "1101" && run.oracle_matches();
            Check::new("nand-bench", passed, format!("outputs {outs}"))
        }
        Err(e) => Check::new("nand-bench", false, e.to_string()),
    }
}

fn check_energy_ledger() -> Check {
    match run_error_correction(&Scenario::error_correction(0)) {
        Ok(run) => {
            let mut worst = 0.0f64;
            for total in [run.metrics.ledger_with, run.metrics.ledger_without] {
                worst = worst.max(total.residual().abs() / total.scale());
            }
            Check::new(
                "energy-ledger",
                worst <= TOTAL_LEDGER_TOLERANCE,
                format!("every slot closed; run total relative residual {worst:.3e}"),
            )
        }
        Err(e) => Check::new("energy-ledger", false, e.to_string()),
    }
}

pub fn run_checks() -> Vec<Check> {
    vec![check_discretization(), check_truth_tables(), check_nand_bench(), check_energy_ledger()]
}
