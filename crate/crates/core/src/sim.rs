//! Scenario engine.
//!
//! Two experiments run on the shared slot grid:
//!
//! * a logic experiment drives an input pattern through one router executing
//!   a fixed operation, checks the emitted logic against the Boolean tables,
//!   steps the router circuit through the induced modes and builds the
//!   normalized energy heat map;
//! * an error-correction experiment tracks a load demand from a random
//!   source, once with the feed-forward selector and once with the router
//!   simply following the demand.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::circuit::{step, CircuitError, CircuitParams, EnergyLedger, LedgerIntegrator, Mode, ModeSet, StateVector};
use crate::correction::{run_tracking, CorrectionError, InternalModel, TargetRule, TrackingRun, TrackingState};
use crate::linalg::Vec2;
use crate::logic::{eval_binary, eval_unary, payload_quantum, EnergyBuffer, LogicError, Operation, SlotPair};
use crate::packet::{LogicValue, NodeId, OpCode, PacketHeader, Payload, PowerPacket, SlotIndex, DEFAULT_THRESHOLD};
use crate::rng::XorShift64Star;
use crate::router::{RouterError, RouterEvent, RouterState};

/// Slot length of the error-correction study, 400 µs.
pub const DEFAULT_PERIOD: f64 = 400e-6;
pub const DEFAULT_CORRECTION_SLOTS: usize = 1000;
/// Default logic pattern: the four input pairs 00, 01, 11, 10.
pub const DEFAULT_LOGIC_PATTERN: &str = "00011110";
/// Guard above 1 for heat map entries.
pub const HEATMAP_ROUNDING_GUARD: f64 = 1e-9;

const ROUTER_NODE: NodeId = 1;
const DOWNSTREAM_NODE: NodeId = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Correction(#[from] CorrectionError),
    #[error("scenario has no slots")]
    EmptyRun,
    #[error("binary operation needs slot pairs but the pattern has {0} slots (unpaired slot)")]
    UnpairedSlot(usize),
    #[error("heat map normalization is degenerate: maximum input energy is zero")]
    DegenerateNormalization,
    #[error("energy rows differ in length: {input} vs {output}")]
    LengthMismatch { input: usize, output: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
}

/// A logic sequence, written as a string of `0`/`1` in scenario files.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pattern(pub Vec<LogicValue>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternParseError {
    pub position: usize,
    pub found: char,
}

impl fmt::Display for PatternParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pattern character {:?} at position {} is not 0 or 1", self.found, self.position)
    }
}

impl core::str::FromStr for Pattern {
    type Err = PatternParseError;
    fn from_str(s: &str) -> Result<Self, PatternParseError> {
        s.chars()
            .enumerate()
            .map(|(position, found)| LogicValue::from_char(found).ok_or(PatternParseError { position, found }))
            .collect::<Result<Vec<_>, _>>()
            .map(Pattern)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|v| write!(f, "{v}"))
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut out = String::with_capacity(self.0.len());
        out.extend(self.0.iter().map(|v| v.as_char()));
        s.serialize_str(&out)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Load demand per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandSpec {
    /// `start` for `hold` slots, then its complement for `hold` slots, and so on.
    Alternating { hold: usize, start: LogicValue },
    /// Repeated cyclically to cover every slot.
    Explicit { pattern: Pattern },
}

impl Default for DemandSpec {
    fn default() -> Self {
        DemandSpec::Alternating { hold: 2, start: LogicValue::One }
    }
}

/// Source input per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    Bernoulli {
        p: f64,
    },
    /// Repeated cyclically to cover every slot.
    Explicit {
        pattern: Pattern,
    },
}

impl InputSpec {
    pub fn probability(&self) -> Option<f64> {
        match self {
            InputSpec::Bernoulli { p } => Some(*p),
            InputSpec::Explicit { .. } => None,
        }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

/// Full configuration of one run. Reproducible from its fields alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: CircuitParams,
    /// Slot duration `T` in seconds.
    pub period: f64,
    pub slots: usize,
    /// `[V1, V2]` at slot 0.
    pub initial_state: StateVector,
    #[serde(default)]
    pub demand: DemandSpec,
    pub inputs: InputSpec,
    pub operation: OpCode,
    #[serde(default = "default_true")]
    pub algorithm_on: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub target_rule: TargetRule,
    /// Target trajectory start; defaults to `initial_state`.
    #[serde(default)]
    pub initial_target: Option<StateVector>,
    /// Quanta in the energy buffer at slot 0; defaults to one per slot pair.
    #[serde(default)]
    pub initial_buffer_quanta: Option<u64>,
    #[serde(default)]
    pub buffer_capacity: Option<u64>,
}

fn default_true() -> bool {
    true
}

impl Scenario {
    /// Error-correction study: bench elements, 400 µs slots, ξ(0) = [18, 15],
    /// demand 1,1,0,0,…, Bernoulli(0.5) inputs, 1000 slots.
    pub fn error_correction(seed: u64) -> Self {
        Scenario {
            params: CircuitParams::error_correction_bench(),
            period: DEFAULT_PERIOD,
            slots: DEFAULT_CORRECTION_SLOTS,
            initial_state: Vec2([18.0, 15.0]),
            demand: DemandSpec::default(),
            inputs: InputSpec::Bernoulli { p: 0.5 },
            operation: OpCode::Through,
            algorithm_on: true,
            seed,
            threshold: DEFAULT_THRESHOLD,
            target_rule: TargetRule::DemandKeyed,
            initial_target: None,
            initial_buffer_quanta: None,
            buffer_capacity: None,
        }
    }

    /// Logic bench with the router capacitor precharged to the payload level.
    pub fn logic(operation: OpCode, pattern: Pattern) -> Self {
        let params = CircuitParams::logic_bench();
        Scenario {
            period: DEFAULT_PERIOD,
            slots: pattern.0.len(),
            initial_state: Vec2([params.effective_source(), 0.0]),
            demand: DemandSpec::default(),
            inputs: InputSpec::Explicit { pattern },
            operation,
            algorithm_on: false,
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            target_rule: TargetRule::DemandKeyed,
            initial_target: None,
            initial_buffer_quanta: None,
            buffer_capacity: None,
            params,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(SimError::Circuit(CircuitError::InvalidPeriod(self.period)));
        }
        if !self.initial_state.is_finite() || !self.initial_target.is_none_or(|t| t.is_finite()) {
            return Err(SimError::InvalidScenario("initial state must be finite"));
        }
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(SimError::InvalidScenario("threshold must be finite and >= 0"));
        }
        match &self.inputs {
            InputSpec::Bernoulli { p } if !(0.0..=1.0).contains(p) => {
                return Err(SimError::InvalidScenario("input probability must lie in [0, 1]"))
            }
            InputSpec::Explicit { pattern } if pattern.0.is_empty() => {
                return Err(SimError::InvalidScenario("input pattern is empty"))
            }
            _ => {}
        }
        match &self.demand {
            DemandSpec::Alternating { hold: 0, .. } => {
                return Err(SimError::InvalidScenario("demand hold must be >= 1"))
            }
            DemandSpec::Explicit { pattern } if pattern.0.is_empty() => {
                return Err(SimError::InvalidScenario("demand pattern is empty"))
            }
            _ => {}
        }
        Ok(())
    }

    /// Nominal payload amplitude: the source minus any diode drop.
    pub fn payload_voltage(&self) -> f64 {
        self.params.effective_source()
    }

    /// Energy of one payload slot into the resistive load.
    pub fn payload_quantum(&self) -> f64 {
        payload_quantum(self.payload_voltage(), self.params.load_resistance, self.period)
    }
}

/// Input logic per slot. Bernoulli draws come from [`XorShift64Star`].
pub fn make_inputs(spec: &InputSpec, seed: u64, slots: usize) -> Vec<LogicValue> {
    match spec {
        InputSpec::Bernoulli { p } => {
            let mut rng = XorShift64Star::seed_from(seed);
            (0..slots).map(|_| LogicValue::from_bool(rng.bernoulli(*p))).collect()
        }
        InputSpec::Explicit { pattern } => cycle(&pattern.0, slots),
    }
}

pub fn make_demand(spec: &DemandSpec, slots: usize) -> Vec<LogicValue> {
    match spec {
        DemandSpec::Alternating { hold, start } => {
            (0..slots).map(|k| if (k / (*hold).max(1)) % 2 == 0 { *start } else { start.complement() }).collect()
        }
        DemandSpec::Explicit { pattern } => cycle(&pattern.0, slots),
    }
}

fn cycle(pattern: &[LogicValue], slots: usize) -> Vec<LogicValue> {
    if pattern.is_empty() {
        return Vec::new();
    }
    pattern.iter().copied().cycle().take(slots).collect()
}

/// Energy per (row, column), normalized by the largest input entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    /// The input maximum used for normalization, in joules.
    pub scale: f64,
}

pub fn heatmap(input_energy: &[f64], output_energy: &[f64]) -> Result<HeatMap, SimError> {
    if input_energy.len() != output_energy.len() {
        return Err(SimError::LengthMismatch { input: input_energy.len(), output: output_energy.len() });
    }
    let scale = input_energy.iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(SimError::DegenerateNormalization);
    }
    let norm = |e: &f64| (e / scale).clamp(0.0, 1.0 + HEATMAP_ROUNDING_GUARD);
    Ok(HeatMap {
        input: input_energy.iter().map(norm).collect(),
        output: output_energy.iter().map(norm).collect(),
        scale,
    })
}

/// Part of a packet's time on the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Header,
    Payload,
    Footer,
}

impl Segment {
    pub fn as_str(self) -> &'static str {
        match self {
            Segment::Header => "header",
            Segment::Payload => "payload",
            Segment::Footer => "footer",
        }
    }
}

/// Circuit evolution over one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSlot {
    pub k: SlotIndex,
    pub mode: Mode,
    pub before: StateVector,
    pub after: StateVector,
    pub ledger: EnergyLedger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicRun {
    pub operation: OpCode,
    pub inputs: Vec<LogicValue>,
    pub events: Vec<RouterEvent>,
    /// Boolean-table result per slot (`None` on forward slots).
    pub expected: Vec<Option<LogicValue>>,
    pub circuit: Vec<CircuitSlot>,
    /// Per timeline column: slot and segment.
    pub columns: Vec<(SlotIndex, Segment)>,
    pub input_energy: Vec<f64>,
    pub output_energy: Vec<f64>,
    /// `None` when no input slot carried power.
    pub heatmap: Option<HeatMap>,
}

impl LogicRun {
    pub fn oracle_matches(&self) -> bool {
        self.events.iter().zip(&self.expected).all(|(e, want)| e.out_logic == *want)
    }

    /// Emitted logic values in order, skipping forward slots.
    pub fn outputs(&self) -> Vec<LogicValue> {
        self.events.iter().filter_map(|e| e.out_logic).collect()
    }

    pub fn ledger_total(&self) -> EnergyLedger {
        let mut total = EnergyLedger::default();
        self.circuit.iter().for_each(|s| total.accumulate(&s.ledger));
        total
    }
}

/// Boolean-table outputs for a pattern, straight from the truth tables.
pub fn expected_outputs(op: OpCode, inputs: &[LogicValue]) -> Vec<Option<LogicValue>> {
    match Operation::from(op) {
        Operation::Unary(u) => inputs.iter().map(|&x| Some(eval_unary(u, x))).collect(),
        Operation::Binary(b) => inputs
            .chunks(2)
            .flat_map(|pair| match pair {
                [f, b_in] => [None, Some(eval_binary(b, SlotPair::new(*f, *b_in)))],
                _ => [None, None],
            })
            .take(inputs.len())
            .collect(),
    }
}

pub fn run_logic_experiment(sc: &Scenario) -> Result<LogicRun, SimError> {
    sc.validate()?;
    if sc.slots == 0 {
        return Err(SimError::EmptyRun);
    }
    let op = sc.operation;
    if op.is_binary() && !sc.slots.is_multiple_of(2) {
        return Err(SimError::UnpairedSlot(sc.slots));
    }
    let inputs = make_inputs(&sc.inputs, sc.seed, sc.slots);
    let quantum = sc.payload_quantum();
    let payload_v = sc.payload_voltage();

    let initial_quanta = sc.initial_buffer_quanta.unwrap_or(if op.is_binary() { sc.slots as u64 / 2 } else { 0 });
    let mut buffer = EnergyBuffer::new(quantum)?.with_quanta(initial_quanta);
    if let Some(cap) = sc.buffer_capacity {
        buffer = buffer.with_capacity(cap);
    }
    let mut router =
        RouterState::new(ROUTER_NODE, op, buffer, PacketHeader::new(DOWNSTREAM_NODE, OpCode::Through), payload_v);

    let modes = ModeSet::new(&sc.params, sc.period)?;
    let integrator = LedgerIntegrator::new(&sc.params, sc.period)?;
    let drive = sc.params.effective_source();
    let mut xi = sc.initial_state;
    router.cap_voltage = xi.0[0];

    let mut events = Vec::with_capacity(sc.slots);
    let mut circuit = Vec::with_capacity(sc.slots);
    let mut columns = Vec::with_capacity(3 * sc.slots);
    let mut input_energy = Vec::with_capacity(3 * sc.slots);
    let mut output_energy = Vec::with_capacity(3 * sc.slots);

    for (k, &input) in inputs.iter().enumerate() {
        let k = k as SlotIndex;
        let voltage = if input.is_one() { payload_v } else { 0.0 };
        let payload = Payload::sampled(voltage, sc.threshold, k)
            .map_err(|_| SimError::InvalidScenario("payload below threshold"))?;
        let packet = PowerPacket::new(PacketHeader::new(ROUTER_NODE, op), payload);
        let res = router.on_slot(Some(&packet), k)?;

        let output = res.event.out_logic.unwrap_or(LogicValue::Zero);
        let mode = Mode::from_logic(input, output);
        let after = step(modes.get(mode), xi, drive);
        let ledger = integrator.checked(mode, xi, after)?;
        circuit.push(CircuitSlot { k, mode, before: xi, after, ledger });
        xi = after;

        // tags carry no energy
        for seg in [Segment::Header, Segment::Payload, Segment::Footer] {
            columns.push((k, seg));
            let payload_only = |v: LogicValue| if seg == Segment::Payload && v.is_one() { quantum } else { 0.0 };
            input_energy.push(payload_only(input));
            output_energy.push(payload_only(output));
        }

        router = res.state;
        router.cap_voltage = xi.0[0];
        events.push(res.event);
    }

    let heatmap = match heatmap(&input_energy, &output_energy) {
        Ok(h) => Some(h),
        Err(SimError::DegenerateNormalization) => None,
        Err(e) => return Err(e),
    };
    Ok(LogicRun {
        operation: op,
        expected: expected_outputs(op, &inputs),
        inputs,
        events,
        circuit,
        columns,
        input_energy,
        output_energy,
        heatmap,
    })
}

/// Averages and ledger totals of an error-correction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub slots: usize,
    pub avg_abs_err_with: f64,
    pub avg_abs_err_without: f64,
    pub ledger_with: EnergyLedger,
    pub ledger_without: EnergyLedger,
    /// Slots that discharge the router capacitor into the load while its
    /// voltage does not exceed the load's, with and without the selector.
    pub underflow_count_with: usize,
    pub underflow_count_without: usize,
}

impl Metrics {
    /// `avg_without - avg_with`; positive when the selector helps.
    pub fn improvement(&self) -> f64 {
        self.avg_abs_err_without - self.avg_abs_err_with
    }
}

/// Machine-readable run summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub p: Option<f64>,
    pub slots: usize,
    pub avg_err_with: f64,
    pub avg_err_without: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionRun {
    pub inputs: Vec<LogicValue>,
    pub demand: Vec<LogicValue>,
    pub with: TrackingRun,
    pub without: TrackingRun,
    pub ledgers_with: Vec<EnergyLedger>,
    pub ledgers_without: Vec<EnergyLedger>,
    pub metrics: Metrics,
}

impl CorrectionRun {
    pub fn summary(&self, sc: &Scenario) -> Summary {
        Summary {
            seed: sc.seed,
            p: sc.inputs.probability(),
            slots: self.metrics.slots,
            avg_err_with: self.metrics.avg_abs_err_with,
            avg_err_without: self.metrics.avg_abs_err_without,
        }
    }
}

fn ledgers(
    run: &TrackingRun,
    integrator: &LedgerIntegrator,
) -> Result<(Vec<EnergyLedger>, EnergyLedger, usize), SimError> {
    let mut per_slot = Vec::with_capacity(run.records.len());
    let mut total = EnergyLedger::default();
    let mut underflows = 0;
    for (before, rec) in run.slots() {
        if rec.mode == Mode::P01 && before.0[0] <= before.0[1] {
            underflows += 1;
        }
        let l = integrator.checked(rec.mode, before, rec.actual)?;
        total.accumulate(&l);
        per_slot.push(l);
    }
    Ok((per_slot, total, underflows))
}

pub fn run_error_correction(sc: &Scenario) -> Result<CorrectionRun, SimError> {
    sc.validate()?;
    if sc.slots == 0 {
        return Err(SimError::EmptyRun);
    }
    let inputs = make_inputs(&sc.inputs, sc.seed, sc.slots);
    let demand = make_demand(&sc.demand, sc.slots);
    let im = InternalModel::new(&sc.params, sc.period, sc.target_rule)?;
    let ts0 = TrackingState { target: sc.initial_target.unwrap_or(sc.initial_state), actual: sc.initial_state, k: 0 };

    let with = run_tracking(&demand, &inputs, &im, ts0, true)?;
    let without = run_tracking(&demand, &inputs, &im, ts0, false)?;

    let integrator = LedgerIntegrator::new(&sc.params, sc.period)?;
    let (ledgers_with, ledger_with, underflow_count_with) = ledgers(&with, &integrator)?;
    let (ledgers_without, ledger_without, underflow_count_without) = ledgers(&without, &integrator)?;

    let metrics = Metrics {
        slots: sc.slots,
        avg_abs_err_with: with.avg_abs_err().ok_or(SimError::EmptyRun)?,
        avg_abs_err_without: without.avg_abs_err().ok_or(SimError::EmptyRun)?,
        ledger_with,
        ledger_without,
        underflow_count_with,
        underflow_count_without,
    };
    Ok(CorrectionRun { inputs, demand, with, without, ledgers_with, ledgers_without, metrics })
}

/// Starting pattern string for each op when none is given.
pub fn default_pattern(op: OpCode) -> Pattern {
    let text = if op.is_binary() { DEFAULT_LOGIC_PATTERN } else { "01" };
    Pattern(text.chars().filter_map(LogicValue::from_char).collect())
}
