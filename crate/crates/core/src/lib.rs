//! Deterministic simulation of power packet dispatching.
//!
//! Power travels as packets: a header tag, a payload slot that either carries
//! power (`1`) or not (`0`), and a footer tag. Routers on a shared slot clock
//! apply logic operations to the payloads, using an energy buffer so that
//! power is neither created nor lost by the logic. A router can also pick,
//! slot by slot, between Through and NOT so that a load tracks its demand
//! under a random supply.
//!
//! The crate is `no_std` with `alloc`. File formats and the command line
//! live in the `ppd` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod circuit;
pub mod correction;
pub mod linalg;
pub mod logic;
pub mod packet;
pub mod quadrature;
pub mod rng;
pub mod router;
pub mod sim;

pub use circuit::{CircuitParams, EnergyLedger, Mode, StateVector};
pub use logic::{BinaryOp, BufferAction, UnaryOp};
pub use packet::{LogicValue, OpCode, PowerPacket};
pub use sim::{Scenario, SimError};
