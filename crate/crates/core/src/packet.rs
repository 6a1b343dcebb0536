//! Power packets: header tag, payload, footer tag, and their slot framing.
//!
//! Frame layout (all multi-byte fields little endian):
//!
//! ```text
//! +------+----+-----+-----------+-------+---------+------+------+
//! | addr | op | len | controls  | logic | voltage | slot | 0x7E |
//! |  u8  | u8 | u8  | len bytes |  u8   |   f64   | u64  |  u8  |
//! +------+----+-----+-----------+-------+---------+------+------+
//! ```
//!
//! `len` is at most [`MAX_CONTROL_CODES`]. Operation codes are numbered in
//! the order of [`OpCode::ALL`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type SlotIndex = u64;
pub type LineId = u32;
pub type NodeId = u8;

pub const FOOTER_SENTINEL: u8 = 0x7E;
pub const MAX_CONTROL_CODES: usize = 8;
/// Default logic threshold in volts.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

const FIXED_FRAME_LEN: usize = 3 + 1 + 8 + 8 + 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PacketError {
    #[error("malformed frame: {0}")]
    MalformedFrame(FrameFault),
    #[error("voltage sample is not finite")]
    NonFiniteSample,
    #[error("threshold must be finite and >= 0, got {0}")]
    InvalidThreshold(f64),
    #[error("{0} control codes exceed the limit of {MAX_CONTROL_CODES}")]
    TooManyControlCodes(usize),
    #[error("payload voltage must be finite and >= 0, got {0}")]
    InvalidVoltage(f64),
    #[error("slot {slot} on line {line} is already occupied")]
    SlotCollision { line: LineId, slot: SlotIndex },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameFault {
    Truncated,
    UnknownOperation(u8),
    ControlLength(u8),
    InvalidLogic(u8),
    InvalidVoltage,
    MissingFooter,
    TrailingBytes(usize),
}

impl fmt::Display for FrameFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameFault::Truncated => f.write_str("frame truncated"),
            FrameFault::UnknownOperation(c) => write!(f, "unknown operation code {c:#04x}"),
            FrameFault::ControlLength(n) => write!(f, "control code length {n} exceeds {MAX_CONTROL_CODES}"),
            FrameFault::InvalidLogic(b) => write!(f, "invalid logic byte {b:#04x}"),
            FrameFault::InvalidVoltage => f.write_str("payload voltage is negative or not finite"),
            FrameFault::MissingFooter => f.write_str("missing footer sentinel"),
            FrameFault::TrailingBytes(n) => write!(f, "{n} bytes after footer"),
        }
    }
}

/// Presence (`One`) or absence (`Zero`) of payload power in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum LogicValue {
    Zero,
    One,
}

impl LogicValue {
    pub fn from_bool(b: bool) -> Self {
        if b {
            LogicValue::One
        } else {
            LogicValue::Zero
        }
    }

    pub fn is_one(self) -> bool {
        self == LogicValue::One
    }

    pub fn complement(self) -> Self {
        LogicValue::from_bool(!self.is_one())
    }

    pub fn as_char(self) -> char {
        if self.is_one() {
            '1'
        } else {
            '0'
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(LogicValue::Zero),
            '1' => Some(LogicValue::One),
            _ => None,
        }
    }
}

impl From<LogicValue> for u8 {
    fn from(v: LogicValue) -> u8 {
        v.is_one() as u8
    }
}

impl TryFrom<u8> for LogicValue {
    type Error = FrameFault;
    fn try_from(b: u8) -> Result<Self, FrameFault> {
        match b {
            0 => Ok(LogicValue::Zero),
            1 => Ok(LogicValue::One),
            other => Err(FrameFault::InvalidLogic(other)),
        }
    }
}

impl fmt::Display for LogicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Logic level of a voltage sample: `One` strictly above the threshold.
pub fn classify(sample: f64, threshold: f64) -> Result<LogicValue, PacketError> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(PacketError::InvalidThreshold(threshold));
    }
    if !sample.is_finite() {
        return Err(PacketError::NonFiniteSample);
    }
    Ok(LogicValue::from_bool(sample > threshold))
}

/// Operation requested in the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpCode {
    Through,
    Not,
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
}

impl OpCode {
    pub const ALL: [OpCode; 8] =
        [OpCode::Through, OpCode::Not, OpCode::And, OpCode::Or, OpCode::Nand, OpCode::Nor, OpCode::Xor, OpCode::Xnor];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        OpCode::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            OpCode::Through => "through",
            OpCode::Not => "not",
            OpCode::And => "and",
            OpCode::Or => "or",
            OpCode::Nand => "nand",
            OpCode::Nor => "nor",
            OpCode::Xor => "xor",
            OpCode::Xnor => "xnor",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        OpCode::ALL.into_iter().find(|op| op.name().eq_ignore_ascii_case(name))
    }

    pub fn is_binary(self) -> bool {
        !matches!(self, OpCode::Through | OpCode::Not)
    }
}

impl fmt::Display for OpCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Opaque control bytes, at most [`MAX_CONTROL_CODES`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct ControlCodes(Vec<u8>);

impl ControlCodes {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl TryFrom<Vec<u8>> for ControlCodes {
    type Error = PacketError;
    fn try_from(v: Vec<u8>) -> Result<Self, PacketError> {
        if v.len() > MAX_CONTROL_CODES {
            return Err(PacketError::TooManyControlCodes(v.len()));
        }
        Ok(ControlCodes(v))
    }
}

impl From<ControlCodes> for Vec<u8> {
    fn from(c: ControlCodes) -> Vec<u8> {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketHeader {
    pub destination: NodeId,
    pub operation: OpCode,
    #[serde(default)]
    pub controls: ControlCodes,
}

impl PacketHeader {
    pub fn new(destination: NodeId, operation: OpCode) -> Self {
        PacketHeader { destination, operation, controls: ControlCodes::default() }
    }
}

/// End-of-packet tag. Carries nothing but its sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PacketFooter;

impl PacketFooter {
    pub const fn end_marker(&self) -> u8 {
        FOOTER_SENTINEL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub logic: LogicValue,
    /// Payload amplitude in volts.
    pub voltage: f64,
    pub slot: SlotIndex,
}

impl Payload {
    /// Payload whose logic is the classification of `voltage` against `threshold`.
    pub fn sampled(voltage: f64, threshold: f64, slot: SlotIndex) -> Result<Self, PacketError> {
        if !(voltage >= 0.0) || !voltage.is_finite() {
            return Err(PacketError::InvalidVoltage(voltage));
        }
        Ok(Payload { logic: classify(voltage, threshold)?, voltage, slot })
    }

    /// Whether `logic` agrees with classifying `voltage` at `threshold`.
    pub fn is_consistent(&self, threshold: f64) -> bool {
        classify(self.voltage, threshold).map(|l| l == self.logic).unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPacket {
    pub header: PacketHeader,
    pub payload: Payload,
    #[serde(default)]
    pub footer: PacketFooter,
}

impl PowerPacket {
    pub fn new(header: PacketHeader, payload: Payload) -> Self {
        PowerPacket { header, payload, footer: PacketFooter }
    }

    pub fn logic(&self) -> LogicValue {
        self.payload.logic
    }
}

/// Frames a packet as header, payload, footer.
pub fn encode(packet: &PowerPacket) -> Vec<u8> {
    let controls = packet.header.controls.as_bytes();
    let mut out = Vec::with_capacity(FIXED_FRAME_LEN + controls.len());
    out.push(packet.header.destination);
    out.push(packet.header.operation.code());
    out.push(controls.len() as u8);
    out.extend_from_slice(controls);
    out.push(packet.payload.logic.into());
    out.extend_from_slice(&packet.payload.voltage.to_le_bytes());
    out.extend_from_slice(&packet.payload.slot.to_le_bytes());
    out.push(packet.footer.end_marker());
    out
}

/// Inverse of [`encode`].
pub fn decode(frame: &[u8]) -> Result<PowerPacket, PacketError> {
    let bad = PacketError::MalformedFrame;
    let mut cur = Cursor { buf: frame, pos: 0 };

    let destination = cur.byte()?;
    let op = cur.byte()?;
    let operation = OpCode::from_code(op).ok_or(bad(FrameFault::UnknownOperation(op)))?;
    let len = cur.byte()?;
    if len as usize > MAX_CONTROL_CODES {
        return Err(bad(FrameFault::ControlLength(len)));
    }
    let controls = ControlCodes(cur.take(len as usize)?.to_vec());
    let logic = LogicValue::try_from(cur.byte()?).map_err(bad)?;
    let voltage = f64::from_le_bytes(cur.array()?);
    if !(voltage >= 0.0) || !voltage.is_finite() {
        return Err(bad(FrameFault::InvalidVoltage));
    }
    let slot = u64::from_le_bytes(cur.array()?);
    match cur.byte() {
        Ok(FOOTER_SENTINEL) => {}
        _ => return Err(bad(FrameFault::MissingFooter)),
    }
    if cur.pos != frame.len() {
        return Err(bad(FrameFault::TrailingBytes(frame.len() - cur.pos)));
    }
    Ok(PowerPacket {
        header: PacketHeader { destination, operation, controls },
        payload: Payload { logic, voltage, slot },
        footer: PacketFooter,
    })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PacketError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(PacketError::MalformedFrame(FrameFault::Truncated))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8, PacketError> {
        Ok(self.take(1)?[0])
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], PacketError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }
}

/// One reserved `(line, slot)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub line: LineId,
    pub slot: SlotIndex,
    pub packet: PowerPacket,
}

/// Time-division schedule: at most one packet per `(line, slot)`.
///
/// Serializes as a JSON array of `{line, slot, packet}` in line-then-slot order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<Reservation>", try_from = "Vec<Reservation>")]
pub struct TdmSchedule {
    cells: BTreeMap<(LineId, SlotIndex), PowerPacket>,
}

impl TdmSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Claims `(line, slot)` for `packet`; an occupied cell is a collision.
    pub fn reserve(&mut self, line: LineId, slot: SlotIndex, packet: PowerPacket) -> Result<(), PacketError> {
        use alloc::collections::btree_map::Entry;
        match self.cells.entry((line, slot)) {
            Entry::Occupied(_) => Err(PacketError::SlotCollision { line, slot }),
            Entry::Vacant(v) => {
                v.insert(packet);
                Ok(())
            }
        }
    }

    pub fn get(&self, line: LineId, slot: SlotIndex) -> Option<&PowerPacket> {
        self.cells.get(&(line, slot))
    }

    pub fn is_free(&self, line: LineId, slot: SlotIndex) -> bool {
        !self.cells.contains_key(&(line, slot))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LineId, SlotIndex, &PowerPacket)> {
        self.cells.iter().map(|(&(l, s), p)| (l, s, p))
    }

    /// Packets on `line` in slot order.
    pub fn line(&self, line: LineId) -> impl Iterator<Item = (SlotIndex, &PowerPacket)> {
        self.cells.range((line, 0)..=(line, SlotIndex::MAX)).map(|(&(_, s), p)| (s, p))
    }
}

/// Value-style reservation: returns the updated schedule.
pub fn reserve_slot(
    mut schedule: TdmSchedule,
    line: LineId,
    slot: SlotIndex,
    packet: PowerPacket,
) -> Result<TdmSchedule, PacketError> {
    schedule.reserve(line, slot, packet)?;
    Ok(schedule)
}

impl From<TdmSchedule> for Vec<Reservation> {
    fn from(s: TdmSchedule) -> Self {
        s.cells.into_iter().map(|((line, slot), packet)| Reservation { line, slot, packet }).collect()
    }
}

impl TryFrom<Vec<Reservation>> for TdmSchedule {
    type Error = PacketError;
    fn try_from(v: Vec<Reservation>) -> Result<Self, PacketError> {
        let mut s = TdmSchedule::new();
        for r in v {
            s.reserve(r.line, r.slot, r.packet)?;
        }
        Ok(s)
    }
}
