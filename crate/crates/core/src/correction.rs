//! Feed-forward error correction for a unary router.
//!
//! The router holds an internal model of the source, itself and the load. At
//! every slot it sees the input logic `i` and, without measuring anything,
//! predicts the next load voltage for both unary operations it could apply:
//! Through (mode `P_ii`) and NOT (mode `P_i,1-i`). It compares each prediction
//! against the target trajectory, the one the load would follow if the
//! source produced exactly what the load asks for, and applies NOT only when
//! that yields a strictly smaller predicted error. Ties go to Through.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{load_voltage, step, CircuitError, CircuitParams, Mode, ModeSet, StateVector};
use crate::logic::{eval_unary, UnaryOp};
use crate::packet::{LogicValue, SlotIndex};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrectionError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("demand has {demand} slots but inputs have {inputs}")]
    LengthMismatch { demand: usize, inputs: usize },
}

/// Which mode drives the target trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRule {
    /// `P_dd` for demand `d`: the source delivers exactly the demand.
    #[default]
    DemandKeyed,
    /// `P_ii` for input `i`. With matching initial states the tracker then
    /// always picks Through and the error stays at zero.
    InputKeyed,
}

impl TargetRule {
    pub fn target_mode(self, input: LogicValue, demand: LogicValue) -> Mode {
        match self {
            TargetRule::DemandKeyed => Mode::from_logic(demand, demand),
            TargetRule::InputKeyed => Mode::from_logic(input, input),
        }
    }
}

/// The router's model of the circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalModel {
    pub modes: ModeSet,
    /// Source voltage used in every prediction.
    pub source: f64,
    pub target_rule: TargetRule,
}

impl InternalModel {
    pub fn new(params: &CircuitParams, period: f64, target_rule: TargetRule) -> Result<Self, CircuitError> {
        Ok(InternalModel { modes: ModeSet::new(params, period)?, source: params.effective_source(), target_rule })
    }

    fn advance(&self, mode: Mode, xi: StateVector) -> StateVector {
        step(self.modes.get(mode), xi, self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingState {
    pub target: StateVector,
    pub actual: StateVector,
    pub k: SlotIndex,
}

impl TrackingState {
    pub fn new(initial: StateVector) -> Self {
        TrackingState { target: initial, actual: initial, k: 0 }
    }

    /// `|C (ξ_r - ξ_l)|`.
    pub fn abs_error(&self) -> f64 {
        (load_voltage(self.actual) - load_voltage(self.target)).abs()
    }
}

/// Predicted next-slot load voltage error for each candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedErrors {
    /// Output equals input (Through).
    pub keep: f64,
    /// Output is the complement of the input (NOT).
    pub flip: f64,
}

impl PredictedErrors {
    pub fn for_op(&self, op: UnaryOp) -> f64 {
        match op {
            UnaryOp::Through => self.keep,
            UnaryOp::Not => self.flip,
        }
    }
}

/// Predicted `|C ξ_e(k+1)|` for both candidates, given input `i` in the slot
/// being dispatched and the load's demand for it.
pub fn predict(input: LogicValue, ts: &TrackingState, im: &InternalModel, demand: LogicValue) -> PredictedErrors {
    let target = im.advance(im.target_rule.target_mode(input, demand), ts.target);
    let err = |output: LogicValue| {
        let actual = im.advance(Mode::from_logic(input, output), ts.actual);
        (load_voltage(actual) - load_voltage(target)).abs()
    };
    PredictedErrors { keep: err(input), flip: err(input.complement()) }
}

/// NOT on a strictly smaller flip error, Through otherwise.
pub fn select(pe: &PredictedErrors) -> UnaryOp {
    if pe.flip < pe.keep {
        UnaryOp::Not
    } else {
        UnaryOp::Through
    }
}

/// Steps both trajectories by one slot.
pub fn advance(
    ts: &TrackingState,
    input: LogicValue,
    chosen: UnaryOp,
    im: &InternalModel,
    demand: LogicValue,
) -> TrackingState {
    let actual_mode = Mode::from_logic(input, eval_unary(chosen, input));
    TrackingState {
        target: im.advance(im.target_rule.target_mode(input, demand), ts.target),
        actual: im.advance(actual_mode, ts.actual),
        k: ts.k + 1,
    }
}

/// One simulated slot. States are at the end of the slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub k: SlotIndex,
    pub input: LogicValue,
    pub demand: LogicValue,
    pub chosen: UnaryOp,
    pub mode: Mode,
    /// Only present when the selector ran.
    pub predicted: Option<PredictedErrors>,
    pub actual: StateVector,
    pub target: StateVector,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRun {
    pub initial: TrackingState,
    pub records: Vec<TrackRecord>,
}

impl TrackingRun {
    /// Mean `|C ξ_e|` over the end-of-slot states, `None` for an empty run.
    pub fn avg_abs_err(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        Some(self.records.iter().map(|r| r.abs_err).sum::<f64>() / self.records.len() as f64)
    }

    /// Actual state at the start of every slot paired with its record.
    pub fn slots(&self) -> impl Iterator<Item = (StateVector, &TrackRecord)> {
        let starts = core::iter::once(self.initial.actual).chain(self.records.iter().map(|r| r.actual));
        starts.zip(&self.records)
    }
}

/// Runs the tracker over a whole input stream.
///
/// With the selector off the router simply outputs the demand in every slot.
pub fn run_tracking(
    demand: &[LogicValue],
    inputs: &[LogicValue],
    im: &InternalModel,
    ts0: TrackingState,
    use_algorithm: bool,
) -> Result<TrackingRun, CorrectionError> {
    if demand.len() != inputs.len() {
        return Err(CorrectionError::LengthMismatch { demand: demand.len(), inputs: inputs.len() });
    }
    let mut ts = ts0;
    let mut records = Vec::with_capacity(inputs.len());
    for (&input, &want) in inputs.iter().zip(demand) {
        let (chosen, predicted) = if use_algorithm {
            let pe = predict(input, &ts, im, want);
            (select(&pe), Some(pe))
        } else if input == want {
            (UnaryOp::Through, None)
        } else {
            (UnaryOp::Not, None)
        };
        let k = ts.k;
        ts = advance(&ts, input, chosen, im, want);
        records.push(TrackRecord {
            k,
            input,
            demand: want,
            chosen,
            mode: Mode::from_logic(input, eval_unary(chosen, input)),
            predicted,
            actual: ts.actual,
            target: ts.target,
            abs_err: ts.abs_error(),
        });
    }
    Ok(TrackingRun { initial: ts0, records })
}
