//! The switched two-capacitor circuit behind every router.
//!
//! The router capacitor `C1` sits behind a source branch (source, switch,
//! measurement load `R1`, switch) and in front of an output switch that feeds
//! the load capacitor `C2` with its resistive load `R2` in parallel. Which
//! switches conduct depends on the router's input logic `i` and output logic
//! `j`, giving four linear modes `P_ij`. Each mode is discretized exactly
//! under a zero-order hold over one slot.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{expm3, Mat2, Mat3, Vec2};
use crate::packet::LogicValue;
use crate::quadrature::GaussLegendre;

/// Capacitor voltages `[V1, V2]`: router capacitor, then load capacitor.
pub type StateVector = Vec2;

/// Relative tolerance for the per-slot energy balance.
pub const LEDGER_TOLERANCE: f64 = 1e-3;
/// Points in the per-slot quadrature rule.
pub const LEDGER_QUADRATURE_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CircuitError {
    #[error("invalid circuit parameter: {0}")]
    InvalidParams(&'static str),
    #[error("slot duration must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("matrix exponential produced non-finite entries")]
    NonFinite,
    #[error("energy balance violated: residual {residual:e} J exceeds tolerance on scale {scale:e} J")]
    BalanceViolation { residual: f64, scale: f64 },
}

/// Lumped element values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Switch on-resistance `r` (Ω).
    pub switch_resistance: f64,
    /// Measurement load `R1` (Ω).
    pub measurement_resistance: f64,
    /// Resistive load `R2` (Ω).
    pub load_resistance: f64,
    /// Router capacitor `C1` (F).
    pub router_capacitance: f64,
    /// Load capacitor `C2` (F).
    pub load_capacitance: f64,
    /// Source voltage `E` (V).
    pub source_voltage: f64,
    /// Constant forward drop of the series diode while the source conducts (V).
    #[serde(default)]
    pub diode_drop: f64,
}

impl CircuitParams {
    /// Element values of the error-correction study: r = 22 mΩ, R1 = 1.5 kΩ,
    /// C1 = C2 = 4700 µF, R2 = 10 Ω, E = 20 V.
    pub fn error_correction_bench() -> Self {
        CircuitParams {
            switch_resistance: 22e-3,
            measurement_resistance: 1.5e3,
            load_resistance: 10.0,
            router_capacitance: 4700e-6,
            load_capacitance: 4700e-6,
            source_voltage: 20.0,
            diode_drop: 0.0,
        }
    }

    /// Logic-verification bench: 18.4 V source, 16 mΩ MOSFETs, 0.8 V SiC
    /// diodes, 10 Ω load. Capacitances are unknown for this bench so
    /// the 4700 µF values are reused; `R1` is absent and stands in as 1 MΩ.
    pub fn logic_bench() -> Self {
        CircuitParams {
            switch_resistance: 16e-3,
            measurement_resistance: 1e6,
            load_resistance: 10.0,
            router_capacitance: 4700e-6,
            load_capacitance: 4700e-6,
            source_voltage: 18.4,
            diode_drop: 0.8,
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let positive = [
            (self.switch_resistance, "switch_resistance must be > 0"),
            (self.measurement_resistance, "measurement_resistance must be > 0"),
            (self.load_resistance, "load_resistance must be > 0"),
            (self.router_capacitance, "router_capacitance must be > 0"),
            (self.load_capacitance, "load_capacitance must be > 0"),
        ];
        for (v, msg) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(CircuitError::InvalidParams(msg));
            }
        }
        // R1 and R2 may be +inf (open circuit); everything else finite.
        if !self.switch_resistance.is_finite()
            || !self.router_capacitance.is_finite()
            || !self.load_capacitance.is_finite()
        {
            return Err(CircuitError::InvalidParams("r, C1, C2 must be finite"));
        }
        if !(self.source_voltage >= 0.0) || !self.source_voltage.is_finite() {
            return Err(CircuitError::InvalidParams("source_voltage must be >= 0"));
        }
        if !(self.diode_drop >= 0.0) || !self.diode_drop.is_finite() {
            return Err(CircuitError::InvalidParams("diode_drop must be >= 0"));
        }
        Ok(())
    }

    /// Source voltage seen by the capacitors while the source conducts.
    pub fn effective_source(&self) -> f64 {
        (self.source_voltage - self.diode_drop).max(0.0)
    }

    /// `r/R1 + 2`, the divider that shows up in every source-connected mode.
    fn source_divider(&self) -> f64 {
        self.switch_resistance / self.measurement_resistance + 2.0
    }
}

/// Switch configuration `P_ij`: router input logic `i`, output logic `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    P11,
    P00,
    P10,
    P01,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::P11, Mode::P00, Mode::P10, Mode::P01];

    pub fn from_logic(input: LogicValue, output: LogicValue) -> Mode {
        match (input, output) {
            (LogicValue::One, LogicValue::One) => Mode::P11,
            (LogicValue::Zero, LogicValue::Zero) => Mode::P00,
            (LogicValue::One, LogicValue::Zero) => Mode::P10,
            (LogicValue::Zero, LogicValue::One) => Mode::P01,
        }
    }

    pub fn input(self) -> LogicValue {
        match self {
            Mode::P11 | Mode::P10 => LogicValue::One,
            Mode::P00 | Mode::P01 => LogicValue::Zero,
        }
    }

    pub fn output(self) -> LogicValue {
        match self {
            Mode::P11 | Mode::P01 => LogicValue::One,
            Mode::P00 | Mode::P10 => LogicValue::Zero,
        }
    }

    /// Whether the source branch conducts.
    pub fn source_connected(self) -> bool {
        self.input() == LogicValue::One
    }

    /// Whether the router-to-load switch conducts.
    pub fn output_connected(self) -> bool {
        self.output() == LogicValue::One
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::P11 => "P11",
            Mode::P00 => "P00",
            Mode::P10 => "P10",
            Mode::P01 => "P01",
        }
    }
}

impl core::fmt::Display for Mode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `ξ' = M ξ + N E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousModel {
    pub state: Mat2,
    pub input: Vec2,
}

/// `ξ(k+1) = A ξ(k) + B E` over one slot of length `period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    pub state: Mat2,
    pub input: Vec2,
    pub period: f64,
}

/// Continuous dynamics of one mode.
pub fn mode_matrices(params: &CircuitParams, mode: Mode) -> ContinuousModel {
    let r = params.switch_resistance;
    let g = params.source_divider();
    let rc1 = r * params.router_capacitance;
    let rc2 = r * params.load_capacitance;
    let load_decay = 1.0 / (params.load_resistance * params.load_capacitance);
    let source_gain = 1.0 / (rc1 * g);

    let (state, input) = match mode {
        Mode::P11 => (
            [[(1.0 / g - 2.0) / rc1, 1.0 / rc1], [1.0 / rc2, -(1.0 + r / params.load_resistance) / rc2]],
            [source_gain, 0.0],
        ),
        Mode::P00 => ([[0.0, 0.0], [0.0, -load_decay]], [0.0, 0.0]),
        Mode::P10 => {
            ([[-(1.0 + r / params.measurement_resistance) / (rc1 * g), 0.0], [0.0, -load_decay]], [source_gain, 0.0])
        }
        Mode::P01 => ([[-1.0 / rc1, 1.0 / rc1], [1.0 / rc2, -(1.0 + r / params.load_resistance) / rc2]], [0.0, 0.0]),
    };
    ContinuousModel { state: Mat2(state), input: Vec2(input) }
}

/// Exact zero-order-hold discretization via `exp([[M, N], [0, 0]] · T)`.
pub fn discretize(model: &ContinuousModel, period: f64) -> Result<DiscreteModel, CircuitError> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(CircuitError::InvalidPeriod(period));
    }
    let m = &model.state.0;
    let n = &model.input.0;
    let aug = Mat3([[m[0][0], m[0][1], n[0]], [m[1][0], m[1][1], n[1]], [0.0, 0.0, 0.0]]).scale(period);
    let e = expm3(&aug);
    if !e.is_finite() {
        return Err(CircuitError::NonFinite);
    }
    Ok(DiscreteModel {
        state: Mat2([[e.0[0][0], e.0[0][1]], [e.0[1][0], e.0[1][1]]]),
        input: Vec2([e.0[0][2], e.0[1][2]]),
        period,
    })
}

/// One slot: `A ξ + B E`.
pub fn step(dm: &DiscreteModel, xi: StateVector, source: f64) -> StateVector {
    dm.state.mul_vec(xi) + dm.input.scale(source)
}

/// Output map `C = [0 1]`.
pub fn load_voltage(xi: StateVector) -> f64 {
    xi.0[1]
}

pub fn router_voltage(xi: StateVector) -> f64 {
    xi.0[0]
}

/// `½ C V²`.
pub fn capacitor_energy(voltage: f64, capacitance: f64) -> f64 {
    0.5 * capacitance * voltage * voltage
}

/// Discretized models for all four modes at one slot length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    models: [DiscreteModel; 4],
}

impl ModeSet {
    pub fn new(params: &CircuitParams, period: f64) -> Result<Self, CircuitError> {
        params.validate()?;
        let mut models = [DiscreteModel { state: Mat2::ZERO, input: Vec2::ZERO, period }; 4];
        for mode in Mode::ALL {
            models[mode.index()] = discretize(&mode_matrices(params, mode), period)?;
        }
        Ok(ModeSet { models })
    }

    pub fn get(&self, mode: Mode) -> &DiscreteModel {
        &self.models[mode.index()]
    }

    pub fn period(&self) -> f64 {
        self.models[0].period
    }
}

/// Energy flows over one slot, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub source_in: f64,
    pub stored_delta: f64,
    /// Every resistive and diode loss, including what the load consumes.
    pub dissipated: f64,
    /// The `V2²/R2` share of `dissipated`.
    pub load_delivered: f64,
}

impl EnergyLedger {
    /// `source_in - stored_delta - dissipated`.
    pub fn residual(&self) -> f64 {
        self.source_in - self.stored_delta - self.dissipated
    }

    pub fn scale(&self) -> f64 {
        self.source_in.abs().max(self.stored_delta.abs())
    }

    /// Checks the balance at relative tolerance `rel`.
    pub fn check(&self, rel: f64) -> Result<(), CircuitError> {
        let residual = self.residual().abs();
        let scale = self.scale();
        // absolute floor covers slots where nothing moves
        if residual <= rel * scale + 1e-15 {
            Ok(())
        } else {
            Err(CircuitError::BalanceViolation { residual, scale })
        }
    }

    pub fn accumulate(&mut self, other: &EnergyLedger) {
        self.source_in += other.source_in;
        self.stored_delta += other.stored_delta;
        self.dissipated += other.dissipated;
        self.load_delivered += other.load_delivered;
    }
}

/// Precomputed propagators `(A(t), B(t))` at the quadrature nodes of one
/// slot, for every mode. Integrating a slot then costs one 2×2 product per
/// node.
#[derive(Debug, Clone)]
pub struct LedgerIntegrator {
    params: CircuitParams,
    period: f64,
    // per mode: (weight, propagator to node time)
    nodes: [Vec<(f64, DiscreteModel)>; 4],
}

impl LedgerIntegrator {
    pub fn new(params: &CircuitParams, period: f64) -> Result<Self, CircuitError> {
        params.validate()?;
        if !(period > 0.0) || !period.is_finite() {
            return Err(CircuitError::InvalidPeriod(period));
        }
        let rule = GaussLegendre::new(LEDGER_QUADRATURE_POINTS);
        let mut nodes: [Vec<(f64, DiscreteModel)>; 4] = Default::default();
        for mode in Mode::ALL {
            let cm = mode_matrices(params, mode);
            let mut per_node = Vec::with_capacity(LEDGER_QUADRATURE_POINTS);
            for (t, w) in rule.on_interval(period) {
                per_node.push((w, discretize(&cm, t)?));
            }
            nodes[mode.index()] = per_node;
        }
        Ok(LedgerIntegrator { params: *params, period, nodes })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Integrates the energy flows of one slot in `mode` starting at `before`,
    /// with `after` the state reached at the end of the slot. The balance is
    /// not checked here; see [`EnergyLedger::check`].
    pub fn integrate(&self, mode: Mode, before: StateVector, after: StateVector) -> EnergyLedger {
        let p = &self.params;
        let r = p.switch_resistance;
        let drive = p.effective_source();
        let g = p.source_divider();

        let mut ledger = EnergyLedger::default();
        for (w, prop) in &self.nodes[mode.index()] {
            let xi = step(prop, before, drive);
            let (v1, v2) = (xi.0[0], xi.0[1]);
            let load = v2 * v2 / p.load_resistance;
            let mut power_loss = load;
            let mut power_in = 0.0;
            if mode.source_connected() {
                // node between the two source-side switches
                let mid = (drive + v1) / g;
                let i_src = (drive - mid) / r;
                power_in = p.source_voltage * i_src;
                power_loss += i_src * i_src * r
                    + mid * mid / p.measurement_resistance
                    + (mid - v1) * (mid - v1) / r
                    + p.diode_drop * i_src;
            }
            if mode.output_connected() {
                power_loss += (v1 - v2) * (v1 - v2) / r;
            }
            ledger.source_in += w * power_in;
            ledger.dissipated += w * power_loss;
            ledger.load_delivered += w * load;
        }
        ledger.stored_delta = capacitor_energy(after.0[0], p.router_capacitance)
            - capacitor_energy(before.0[0], p.router_capacitance)
            + capacitor_energy(after.0[1], p.load_capacitance)
            - capacitor_energy(before.0[1], p.load_capacitance);
        ledger
    }

    /// Integrates and checks the slot balance at [`LEDGER_TOLERANCE`].
    pub fn checked(&self, mode: Mode, before: StateVector, after: StateVector) -> Result<EnergyLedger, CircuitError> {
        let ledger = self.integrate(mode, before, after);
        ledger.check(LEDGER_TOLERANCE)?;
        Ok(ledger)
    }
}

/// Energy ledger for a single slot, checked at [`LEDGER_TOLERANCE`].
///
/// Builds a fresh quadrature for the call; simulations that integrate many
/// slots should hold a [`LedgerIntegrator`] instead.
pub fn energy_ledger(
    mode: Mode,
    params: &CircuitParams,
    before: StateVector,
    after: StateVector,
    period: f64,
) -> Result<EnergyLedger, CircuitError> {
    LedgerIntegrator::new(params, period)?.checked(mode, before, after)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: f64 = 400e-6;

    fn bench() -> CircuitParams {
        CircuitParams::error_correction_bench()
    }

    fn models(mode: Mode) -> DiscreteModel {
        discretize(&mode_matrices(&bench(), mode), T).unwrap()
    }

    #[test]
    fn p00_matrices_by_hand() {
        let cm = mode_matrices(&bench(), Mode::P00);
        // -1/(10 Ω · 4700 µF)
        assert_eq!(cm.state.0[0], [0.0, 0.0]);
        assert_eq!(cm.state.0[1][0], 0.0);
        assert!((cm.state.0[1][1] + 21.276_595_744_680_85).abs() < 1e-9);
        assert_eq!(cm.input, Vec2::ZERO);
    }

    #[test]
    fn p11_coupling_terms() {
        let p = CircuitParams { switch_resistance: 0.5, router_capacitance: 2.0, load_capacitance: 3.0, ..bench() };
        let cm = mode_matrices(&p, Mode::P11);
        assert_eq!(cm.state.0[0][1], 1.0 / (0.5 * 2.0));
        assert_eq!(cm.state.0[1][0], 1.0 / (0.5 * 3.0));
    }

    #[test]
    fn p10_open_load_freezes_v2() {
        let p = CircuitParams { load_resistance: f64::INFINITY, ..bench() };
        let cm = mode_matrices(&p, Mode::P10);
        assert_eq!(cm.state.0[1][0], 0.0);
        assert_eq!(cm.state.0[1][1], 0.0);
        assert_eq!(cm.input.0[1], 0.0);
    }

    #[test]
    fn only_source_modes_have_input() {
        for mode in Mode::ALL {
            let cm = mode_matrices(&bench(), mode);
            assert_eq!(cm.input.0[0] != 0.0, mode.source_connected(), "{mode}");
            assert_eq!(cm.input.0[1], 0.0);
        }
    }

    #[test]
    fn p00_discretization_closed_form() {
        let dm = models(Mode::P00);
        assert_eq!(dm.state.0[0], [1.0, 0.0]);
        assert_eq!(dm.state.0[1][0], 0.0);
        assert!((dm.state.0[1][1] - 0.991_525).abs() < 1e-6);
        assert_eq!(dm.input, Vec2::ZERO);
        let next = step(&dm, Vec2([18.0, 15.0]), 20.0);
        assert_eq!(next.0[0], 18.0);
        assert!((next.0[1] - 14.8729).abs() < 1e-4);
    }

    #[test]
    fn tiny_period_is_near_identity() {
        for mode in Mode::ALL {
            let dm = discretize(&mode_matrices(&bench(), mode), 1e-12).unwrap();
            assert!(dm.state.max_abs_diff(&Mat2::IDENTITY) < 1e-7);
            assert!(dm.input.norm() < 1e-7);
        }
    }

    #[test]
    fn rejects_bad_period() {
        let cm = mode_matrices(&bench(), Mode::P11);
        assert!(matches!(discretize(&cm, 0.0), Err(CircuitError::InvalidPeriod(_))));
        assert!(matches!(discretize(&cm, f64::NAN), Err(CircuitError::InvalidPeriod(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let cm = ContinuousModel { state: Mat2([[1e300, 0.0], [0.0, 0.0]]), input: Vec2::ZERO };
        assert_eq!(discretize(&cm, 1.0), Err(CircuitError::NonFinite));
    }

    #[test]
    fn zero_state_stays_zero() {
        for mode in Mode::ALL {
            assert_eq!(step(&models(mode), Vec2::ZERO, 0.0), Vec2::ZERO);
        }
    }

    #[test]
    fn semigroup() {
        for mode in Mode::ALL {
            let cm = mode_matrices(&bench(), mode);
            let one = discretize(&cm, T).unwrap();
            let two = discretize(&cm, 2.0 * T).unwrap();
            assert!(two.state.max_abs_diff(&(one.state * one.state)) < 1e-12, "{mode}");
            let b = one.state.mul_vec(one.input) + one.input;
            assert!((two.input - b).norm() < 1e-12, "{mode}");
        }
    }

    #[test]
    fn spectral_radius_bounded() {
        for mode in Mode::ALL {
            let rho = models(mode).state.spectral_radius();
            if mode == Mode::P00 {
                assert!((rho - 1.0).abs() < 1e-12, "{rho}");
            } else {
                assert!(rho < 1.0, "{mode}: {rho}");
            }
        }
    }

    #[test]
    fn p11_fixed_point_is_dc_solution() {
        let p = bench();
        let dm = models(Mode::P11);
        let fixed = (Mat2::IDENTITY - dm.state).solve(dm.input.scale(p.source_voltage)).unwrap();
        // DC: M ξ* + N E = 0
        let cm = mode_matrices(&p, Mode::P11);
        let dc = cm.state.solve(cm.input.scale(-p.source_voltage)).unwrap();
        assert!((fixed - dc).norm() < 1e-9);
        let mut xi = Vec2([18.0, 15.0]);
        for _ in 0..2000 {
            xi = step(&dm, xi, p.source_voltage);
        }
        assert!((xi - fixed).norm() < 1e-9, "{xi:?} vs {fixed:?}");
    }

    #[test]
    fn load_voltage_reads_second_component() {
        assert_eq!(load_voltage(Vec2([18.0, 15.0])), 15.0);
        assert_eq!(load_voltage(Vec2::ZERO), 0.0);
        let xi = step(&models(Mode::P11), Vec2([18.0, 15.0]), 20.0);
        assert_eq!(load_voltage(xi), xi.0[1]);
    }

    #[test]
    fn capacitor_energy_values() {
        assert!((capacitor_energy(18.0, 4700e-6) - 0.761_40).abs() < 1e-9);
        assert_eq!(capacitor_energy(0.0, 1.0), 0.0);
        assert_eq!(capacitor_energy(-3.0, 2.0), capacitor_energy(3.0, 2.0));
    }

    #[test]
    fn ledger_p00_has_no_source() {
        let p = bench();
        let before = Vec2([0.0, 12.0]);
        let after = step(&models(Mode::P00), before, p.source_voltage);
        let l = energy_ledger(Mode::P00, &p, before, after, T).unwrap();
        assert_eq!(l.source_in, 0.0);
        assert!((l.stored_delta + l.dissipated).abs() < 1e-3 * l.dissipated);
        assert_eq!(l.dissipated, l.load_delivered);
    }

    #[test]
    fn ledger_zero_everything() {
        let p = CircuitParams { source_voltage: 0.0, ..bench() };
        for mode in Mode::ALL {
            let l = energy_ledger(mode, &p, Vec2::ZERO, Vec2::ZERO, T).unwrap();
            assert_eq!(l, EnergyLedger::default());
        }
    }

    #[test]
    fn ledger_p11_steady_state() {
        let p = bench();
        let dm = models(Mode::P11);
        let fixed = (Mat2::IDENTITY - dm.state).solve(dm.input.scale(p.source_voltage)).unwrap();
        let l = energy_ledger(Mode::P11, &p, fixed, step(&dm, fixed, p.source_voltage), T).unwrap();
        assert!(l.stored_delta.abs() < 1e-9 * l.source_in);
        assert!((l.source_in - l.dissipated).abs() < 1e-9 * l.source_in);
    }

    #[test]
    fn ledger_detects_wrong_end_state() {
        let p = bench();
        let before = Vec2([18.0, 15.0]);
        let after = step(&models(Mode::P11), before, p.source_voltage) + Vec2([0.5, 0.0]);
        assert!(matches!(energy_ledger(Mode::P11, &p, before, after, T), Err(CircuitError::BalanceViolation { .. })));
    }

    #[test]
    fn ledger_closes_with_diode() {
        let p = CircuitParams::logic_bench();
        let sets = ModeSet::new(&p, T).unwrap();
        for mode in Mode::ALL {
            let before = Vec2([17.0, 3.0]);
            let after = step(sets.get(mode), before, p.effective_source());
            energy_ledger(mode, &p, before, after, T).unwrap();
        }
    }

    #[test]
    fn params_validation() {
        assert!(bench().validate().is_ok());
        assert!(CircuitParams::logic_bench().validate().is_ok());
        let bad = CircuitParams { switch_resistance: 0.0, ..bench() };
        assert!(matches!(bad.validate(), Err(CircuitError::InvalidParams(_))));
        let bad = CircuitParams { source_voltage: -1.0, ..bench() };
        assert!(bad.validate().is_err());
        let bad = CircuitParams { load_capacitance: f64::NAN, ..bench() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mode_logic_round_trip() {
        for mode in Mode::ALL {
            assert_eq!(Mode::from_logic(mode.input(), mode.output()), mode);
        }
    }
}
