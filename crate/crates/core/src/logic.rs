//! Logic operations on power packets.
//!
//! A unary operation maps each slot to an output in the same slot. A binary
//! operation consumes a forward slot `f` and the following backward slot `b`
//! and emits its result in `b`. Power is conserved across the pair by an
//! energy buffer:
//!
//! * a `1` arriving in `f` is always stored;
//! * in `b`, a `1` input with a `0` result is stored, a `0` input with a `1`
//!   result is discharged from the buffer, and equal input and result pass
//!   straight through.
//!
//! For NAND this reproduces the reference truth table with buffer columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::{LogicValue, OpCode};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LogicError {
    #[error("buffer underflow: discharge needs {quantum:e} J but only {charge:e} J is stored")]
    BufferUnderflow { charge: f64, quantum: f64 },
    #[error("buffer overflow: capacity of {capacity} quanta reached")]
    BufferOverflow { capacity: u64 },
    #[error("payload quantum must be finite and > 0, got {0}")]
    InvalidQuantum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Through,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 6] =
        [BinaryOp::And, BinaryOp::Or, BinaryOp::Nand, BinaryOp::Nor, BinaryOp::Xor, BinaryOp::Xnor];
}

/// An operation split by arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Unary(UnaryOp),
    Binary(BinaryOp),
}

impl From<OpCode> for Operation {
    fn from(op: OpCode) -> Self {
        match op {
            OpCode::Through => Operation::Unary(UnaryOp::Through),
            OpCode::Not => Operation::Unary(UnaryOp::Not),
            OpCode::And => Operation::Binary(BinaryOp::And),
            OpCode::Or => Operation::Binary(BinaryOp::Or),
            OpCode::Nand => Operation::Binary(BinaryOp::Nand),
            OpCode::Nor => Operation::Binary(BinaryOp::Nor),
            OpCode::Xor => Operation::Binary(BinaryOp::Xor),
            OpCode::Xnor => Operation::Binary(BinaryOp::Xnor),
        }
    }
}

impl From<Operation> for OpCode {
    fn from(op: Operation) -> Self {
        match op {
            Operation::Unary(UnaryOp::Through) => OpCode::Through,
            Operation::Unary(UnaryOp::Not) => OpCode::Not,
            Operation::Binary(BinaryOp::And) => OpCode::And,
            Operation::Binary(BinaryOp::Or) => OpCode::Or,
            Operation::Binary(BinaryOp::Nand) => OpCode::Nand,
            Operation::Binary(BinaryOp::Nor) => OpCode::Nor,
            Operation::Binary(BinaryOp::Xor) => OpCode::Xor,
            Operation::Binary(BinaryOp::Xnor) => OpCode::Xnor,
        }
    }
}

impl From<UnaryOp> for OpCode {
    fn from(op: UnaryOp) -> Self {
        Operation::Unary(op).into()
    }
}

impl From<BinaryOp> for OpCode {
    fn from(op: BinaryOp) -> Self {
        Operation::Binary(op).into()
    }
}

/// Forward and backward slot of a binary operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotPair {
    pub forward: LogicValue,
    pub backward: LogicValue,
}

impl SlotPair {
    pub fn new(forward: LogicValue, backward: LogicValue) -> Self {
        SlotPair { forward, backward }
    }

    /// All four pairs in the order 00, 01, 11, 10.
    pub const ALL: [SlotPair; 4] = [
        SlotPair { forward: LogicValue::Zero, backward: LogicValue::Zero },
        SlotPair { forward: LogicValue::Zero, backward: LogicValue::One },
        SlotPair { forward: LogicValue::One, backward: LogicValue::One },
        SlotPair { forward: LogicValue::One, backward: LogicValue::Zero },
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferAction {
    Store,
    Discharge,
    #[serde(rename = "-")]
    NoAction,
}

impl BufferAction {
    pub fn as_str(self) -> &'static str {
        match self {
            BufferAction::Store => "store",
            BufferAction::Discharge => "discharge",
            BufferAction::NoAction => "-",
        }
    }
}

/// Result of a slot (unary) or slot pair (binary).
///
/// Binary outcomes never carry `output_f`; unary outcomes use `output_f` and
/// `action_f` only, with `output_b` mirroring the single output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicOutcome {
    pub output_f: Option<LogicValue>,
    pub output_b: LogicValue,
    pub action_f: BufferAction,
    pub action_b: BufferAction,
}

pub fn eval_unary(op: UnaryOp, x: LogicValue) -> LogicValue {
    match op {
        UnaryOp::Through => x,
        UnaryOp::Not => x.complement(),
    }
}

pub fn eval_binary(op: BinaryOp, pair: SlotPair) -> LogicValue {
    let (f, b) = (pair.forward.is_one(), pair.backward.is_one());
    LogicValue::from_bool(match op {
        BinaryOp::And => f && b,
        BinaryOp::Or => f || b,
        BinaryOp::Nand => !(f && b),
        BinaryOp::Nor => !(f || b),
        BinaryOp::Xor => f != b,
        BinaryOp::Xnor => f == b,
    })
}

/// Buffer action at the forward slot: a `1` is always stored.
pub fn forward_action(input: LogicValue) -> BufferAction {
    if input.is_one() {
        BufferAction::Store
    } else {
        BufferAction::NoAction
    }
}

/// Buffer action at the backward slot given its input and the result.
pub fn backward_action(input: LogicValue, output: LogicValue) -> BufferAction {
    match (input, output) {
        (LogicValue::One, LogicValue::Zero) => BufferAction::Store,
        (LogicValue::Zero, LogicValue::One) => BufferAction::Discharge,
        _ => BufferAction::NoAction,
    }
}

/// Output and buffer actions of any binary operation.
pub fn buffer_policy(op: BinaryOp, pair: SlotPair) -> LogicOutcome {
    let out = eval_binary(op, pair);
    LogicOutcome {
        output_f: None,
        output_b: out,
        action_f: forward_action(pair.forward),
        action_b: backward_action(pair.backward, out),
    }
}

/// The NAND truth table with buffer columns, row by row.
pub fn nand_outcome(pair: SlotPair) -> LogicOutcome {
    use BufferAction::*;
    use LogicValue::*;
    let (output_b, action_f, action_b) = match (pair.forward, pair.backward) {
        (Zero, Zero) => (One, NoAction, Discharge),
        (Zero, One) => (One, NoAction, NoAction),
        (One, One) => (Zero, Store, Store),
        (One, Zero) => (One, Store, Discharge),
    };
    LogicOutcome { output_f: None, output_b, action_f, action_b }
}

/// Outcome of a unary operation on one slot. Unary operations never use the
/// logic buffer.
pub fn unary_outcome(op: UnaryOp, x: LogicValue) -> LogicOutcome {
    let out = eval_unary(op, x);
    LogicOutcome {
        output_f: Some(out),
        output_b: out,
        action_f: BufferAction::NoAction,
        action_b: BufferAction::NoAction,
    }
}

/// Energy of one nominal payload slot: `V² T / R`.
pub fn payload_quantum(nominal_voltage: f64, load_resistance: f64, period: f64) -> f64 {
    nominal_voltage * nominal_voltage * period / load_resistance
}

/// Energy buffer holding a whole number of payload quanta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBuffer {
    quanta: u64,
    quantum: f64,
    capacity: Option<u64>,
}

impl EnergyBuffer {
    pub fn new(quantum: f64) -> Result<Self, LogicError> {
        if !(quantum > 0.0) || !quantum.is_finite() {
            return Err(LogicError::InvalidQuantum(quantum));
        }
        Ok(EnergyBuffer { quanta: 0, quantum, capacity: None })
    }

    pub fn with_quanta(mut self, quanta: u64) -> Self {
        self.quanta = quanta;
        self
    }

    /// Caps the buffer; a store beyond `capacity` quanta is an overflow.
    pub fn with_capacity(mut self, capacity: u64) -> Self {
        self.capacity = Some(capacity);
        self
    }

    pub fn quanta(&self) -> u64 {
        self.quanta
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    /// Stored energy in joules.
    pub fn charge(&self) -> f64 {
        self.quanta as f64 * self.quantum
    }
}

pub fn apply_action(buf: EnergyBuffer, action: BufferAction) -> Result<EnergyBuffer, LogicError> {
    let mut next = buf;
    match action {
        BufferAction::NoAction => {}
        BufferAction::Store => {
            if let Some(cap) = buf.capacity {
                if buf.quanta >= cap {
                    return Err(LogicError::BufferOverflow { capacity: cap });
                }
            }
            next.quanta += 1;
        }
        BufferAction::Discharge => {
            if buf.quanta == 0 {
                return Err(LogicError::BufferUnderflow { charge: buf.charge(), quantum: buf.quantum });
            }
            next.quanta -= 1;
        }
    }
    Ok(next)
}
