//! Router state machine.
//!
//! Every router advances on the shared slot clock. In each slot it receives
//! at most one packet addressed to it (no packet means logic `0`), executes
//! the operation named by the header, and emits the result. Unary results
//! leave in the same slot; binary results leave in the backward slot of the
//! pair.

use alloc::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{
    apply_action, backward_action, eval_binary, eval_unary, forward_action, BufferAction, EnergyBuffer, LogicError,
    Operation, SlotPair,
};
use crate::packet::{LogicValue, NodeId, OpCode, PacketHeader, Payload, PowerPacket, SlotIndex};

pub type PortId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouterError {
    #[error(transparent)]
    Buffer(#[from] LogicError),
    #[error("packet for node {destination} delivered to node {node}")]
    AddressMismatch { node: NodeId, destination: NodeId },
    #[error("node {node} is mid-way through {active} and cannot start {requested}")]
    OperationBusy { node: NodeId, active: OpCode, requested: OpCode },
    #[error("no route to node {0}")]
    NoRoute(NodeId),
    #[error("unknown operation code {0:#04x}")]
    UnknownOperation(u8),
}

/// Forward-slot input latched while a binary operation waits for its pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingForward {
    pub logic: LogicValue,
    /// Whether the forward payload went into the buffer.
    pub stored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterState {
    pub node_id: NodeId,
    /// Router capacitor voltage `V1`, maintained by whoever runs the circuit.
    pub cap_voltage: f64,
    pub buffer: EnergyBuffer,
    pub pending: Option<PendingForward>,
    pub active_op: OpCode,
    /// Header written on emitted packets.
    pub egress: PacketHeader,
    /// Amplitude written on emitted `1` payloads.
    pub payload_voltage: f64,
}

/// What one router did in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouterEvent {
    pub k: SlotIndex,
    pub node_id: NodeId,
    pub in_logic: LogicValue,
    pub op: OpCode,
    /// `None` on a forward slot, where nothing is emitted.
    pub out_logic: Option<LogicValue>,
    pub buffer_action: BufferAction,
    pub buffer_charge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotResult {
    pub state: RouterState,
    pub emitted: Option<PowerPacket>,
    pub event: RouterEvent,
}

impl RouterState {
    pub fn new(node_id: NodeId, op: OpCode, buffer: EnergyBuffer, egress: PacketHeader, payload_voltage: f64) -> Self {
        RouterState { node_id, cap_voltage: 0.0, buffer, pending: None, active_op: op, egress, payload_voltage }
    }

    /// Advances one slot.
    pub fn on_slot(&self, incoming: Option<&PowerPacket>, k: SlotIndex) -> Result<SlotResult, RouterError> {
        let mut next = self.clone();
        if let Some(p) = incoming {
            if p.header.destination != self.node_id {
                return Err(RouterError::AddressMismatch { node: self.node_id, destination: p.header.destination });
            }
            let requested = p.header.operation;
            if requested != self.active_op {
                if self.pending.is_some() {
                    return Err(RouterError::OperationBusy { node: self.node_id, active: self.active_op, requested });
                }
                next.active_op = requested;
            }
        }
        let input = incoming.map_or(LogicValue::Zero, PowerPacket::logic);

        let (out, action) = match Operation::from(next.active_op) {
            Operation::Unary(op) => (Some(eval_unary(op, input)), BufferAction::NoAction),
            Operation::Binary(op) => match next.pending.take() {
                None => {
                    let action = forward_action(input);
                    next.pending = Some(PendingForward { logic: input, stored: action == BufferAction::Store });
                    (None, action)
                }
                Some(fwd) => {
                    let out = eval_binary(op, SlotPair::new(fwd.logic, input));
                    (Some(out), backward_action(input, out))
                }
            },
        };
        next.buffer = apply_action(next.buffer, action)?;

        let emitted = out.map(|logic| {
            let voltage = if logic.is_one() { self.payload_voltage } else { 0.0 };
            PowerPacket::new(next.egress.clone(), Payload { logic, voltage, slot: k })
        });
        let event = RouterEvent {
            k,
            node_id: self.node_id,
            in_logic: input,
            op: next.active_op,
            out_logic: out,
            buffer_action: action,
            buffer_charge: next.buffer.charge(),
        };
        Ok(SlotResult { state: next, emitted, event })
    }

    /// Replaces the active operation by raw code and drops any latched slot.
    pub fn set_operation(&self, code: u8) -> Result<RouterState, RouterError> {
        let op = OpCode::from_code(code).ok_or(RouterError::UnknownOperation(code))?;
        let mut next = self.clone();
        next.active_op = op;
        next.pending = None;
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSelection {
    pub output_port: PortId,
}

/// Output port for a header's destination.
pub fn select_port(header: &PacketHeader, routing: &BTreeMap<NodeId, PortId>) -> Result<PortSelection, RouterError> {
    routing
        .get(&header.destination)
        .map(|&output_port| PortSelection { output_port })
        .ok_or(RouterError::NoRoute(header.destination))
}
