//! Charge-sharing trigger model.
//!
//! Each toggle of the victim net shares charge from a unit capacitor onto
//! the main capacitor, raising its voltage by
//! `c_unit * (vdd - v) / (c_unit + c_main + c_new)`. The trigger fires once
//! the voltage reaches `v_threshold`. Charge leaks away exponentially. A
//! fortified trigger (`c_new > 0`) also redistributes charge from `c_main`
//! onto `c_new` every time VDD falls.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logicsim::LogicValue;
use crate::netlist::{Driver, NetId, Netlist, ParseError, Zone};

/// Leak time constant of the default calibration, in ns.
///
/// Solved so that the retention time at the steady firing voltage under
/// 10 ns toggling is 30 µs.
pub const DEFAULT_LEAK_TAU_NS: f64 = 136_590.0;

/// `c_new` of the default fortified calibration.
pub const DEFAULT_FORTIFIED_C_NEW: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AhtError {
    #[error("invalid trigger parameters: {0}")]
    InvalidParams(String),
    #[error("time went backwards: {now_ns} ns after {last_ns} ns")]
    TimeReversed { now_ns: u64, last_ns: u64 },
    #[error("firing voltage {v_fire} V is below the threshold {v_threshold} V")]
    BelowThreshold { v_fire: f64, v_threshold: f64 },
    #[error("unknown net `{0}`")]
    UnknownNet(String),
    #[error("payload `{0}` is a primary input")]
    PayloadOnInput(String),
    #[error("victim `{0}` is not driven by a disruptive-zone gate")]
    VictimZone(String),
    #[error("victim and payload are the same net `{0}`")]
    SameNet(String),
    #[error("bad trigger directive on line {line}: {message}")]
    Directive { line: usize, message: String },
    #[error(transparent)]
    Netlist(#[from] ParseError),
}

/// Capacitances are relative; only their ratios matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerParams {
    pub c_unit: f64,
    pub c_main: f64,
    /// 0 for the baseline trigger.
    pub c_new: f64,
    pub vdd_volts: f64,
    pub v_threshold: f64,
    pub retention_ns: f64,
    pub leak_tau_ns: f64,
    pub detector_gated_by_vdd: bool,
}

impl Default for TriggerParams {
    fn default() -> Self {
        TriggerParams::baseline()
    }
}

impl TriggerParams {
    /// Default calibration: fires on the 77th toggle and holds for 30 µs.
    pub fn baseline() -> Self {
        TriggerParams {
            c_unit: 1.0,
            c_main: 47.0,
            c_new: 0.0,
            vdd_volts: 1.0,
            v_threshold: 0.8,
            retention_ns: 30_000.0,
            leak_tau_ns: DEFAULT_LEAK_TAU_NS,
            detector_gated_by_vdd: true,
        }
    }

    /// The baseline with [`DEFAULT_FORTIFIED_C_NEW`] added.
    pub fn fortified() -> Self {
        TriggerParams {
            c_new: DEFAULT_FORTIFIED_C_NEW,
            ..TriggerParams::baseline()
        }
    }

    pub fn is_fortified(&self) -> bool {
        self.c_new > 0.0
    }

    pub fn alpha(&self) -> f64 {
        self.c_unit / (self.c_unit + self.c_main + self.c_new)
    }

    pub fn validate(&self) -> Result<(), AhtError> {
        let bad = |m: &str| Err(AhtError::InvalidParams(m.to_string()));
        let finite = [
            self.c_unit,
            self.c_main,
            self.c_new,
            self.vdd_volts,
            self.v_threshold,
            self.retention_ns,
            self.leak_tau_ns,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("all values must be finite");
        }
        if self.c_unit <= 0.0 || self.c_main <= 0.0 {
            return bad("c_unit and c_main must be positive");
        }
        if self.c_new < 0.0 {
            return bad("c_new must be non-negative");
        }
        if self.vdd_volts <= 0.0 {
            return bad("vdd_volts must be positive");
        }
        if !(self.v_threshold > 0.0 && self.v_threshold < self.vdd_volts) {
            return bad("v_threshold must lie strictly between 0 and vdd_volts");
        }
        if self.retention_ns <= 0.0 || self.leak_tau_ns <= 0.0 {
            return bad("retention_ns and leak_tau_ns must be positive");
        }
        Ok(())
    }
}

/// Voltage rise on `c_main` from one charge-sharing event starting at `v0`.
pub fn charge_share_delta(p: &TriggerParams, v0: f64) -> f64 {
    p.c_unit * (p.vdd_volts - v0) / (p.c_unit + p.c_main + p.c_new)
}

/// Voltage after `k` toggles from `v_init`, ignoring leakage.
pub fn accumulate(p: &TriggerParams, k: u64, v_init: f64) -> f64 {
    if k == 0 {
        return v_init;
    }
    let keep = (k as f64 * (-p.alpha()).ln_1p()).exp();
    p.vdd_volts - (p.vdd_volts - v_init) * keep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Toggles {
    Count(u64),
    Never,
}

/// Smallest number of toggles that takes the voltage from `v_init` to the
/// threshold, ignoring leakage.
pub fn toggles_to_trigger(p: &TriggerParams, v_init: f64) -> Toggles {
    if v_init >= p.v_threshold {
        return Toggles::Count(0);
    }
    let alpha = p.alpha();
    if p.v_threshold >= p.vdd_volts || !(alpha > 0.0 && alpha < 1.0) {
        return Toggles::Never;
    }
    let estimate = ((p.vdd_volts - p.v_threshold) / (p.vdd_volts - v_init)).ln() / (-alpha).ln_1p();
    if !estimate.is_finite() || estimate > u64::MAX as f64 / 2.0 {
        return Toggles::Never;
    }
    let mut k = estimate.ceil().max(0.0) as u64;
    while k > 0 && accumulate(p, k - 1, v_init) >= p.v_threshold {
        k -= 1;
    }
    while accumulate(p, k, v_init) < p.v_threshold {
        k += 1;
    }
    Toggles::Count(k)
}

/// Exponential leakage over `dt_ns`.
pub fn leakage_decay(p: &TriggerParams, v: f64, dt_ns: u64) -> f64 {
    if dt_ns == 0 {
        return v;
    }
    v * (-(dt_ns as f64) / p.leak_tau_ns).exp()
}

/// Charge redistribution from `c_main` onto `c_new` when VDD falls.
pub fn off_redistribute(p: &TriggerParams, v: f64) -> f64 {
    v * p.c_main / (p.c_main + p.c_new)
}

/// Time for leakage to take `v_fire` down to the threshold.
pub fn retention_check(p: &TriggerParams, v_fire: f64) -> Result<f64, AhtError> {
    if v_fire < p.v_threshold {
        return Err(AhtError::BelowThreshold {
            v_fire,
            v_threshold: p.v_threshold,
        });
    }
    Ok(p.leak_tau_ns * (v_fire / p.v_threshold).ln())
}

/// Periodic steady state under a toggle every `toggle_period_ns` with
/// leakage in between, sampled just before a toggle.
pub fn steady_firing_voltage(p: &TriggerParams, toggle_period_ns: u64) -> f64 {
    let keep = (-(toggle_period_ns as f64) / p.leak_tau_ns).exp();
    let alpha = p.alpha();
    keep * alpha * p.vdd_volts / (1.0 - keep * (1.0 - alpha))
}

/// Leak time constant that gives `retention_ns` at the steady firing voltage
/// for `toggle_period_ns` toggling. Returns `None` when no time constant can
/// keep the steady voltage above the threshold for that long.
pub fn solve_leak_tau(p: &TriggerParams, retention_ns: f64, toggle_period_ns: u64) -> Option<f64> {
    let f = |tau: f64| {
        let q = TriggerParams {
            leak_tau_ns: tau,
            ..p.clone()
        };
        let v = steady_firing_voltage(&q, toggle_period_ns);
        if v <= p.v_threshold {
            return f64::NEG_INFINITY;
        }
        tau * (v / p.v_threshold).ln() - retention_ns
    };
    let mut lo = retention_ns.max(1.0);
    let mut hi = lo;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return None;
        }
    }
    while f(lo) > 0.0 {
        lo /= 2.0;
        if lo < 1e-6 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Live state of one trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerState {
    pub v_cap: f64,
    /// Last concrete victim value seen. X until the first concrete sample.
    pub last_victim_value: LogicValue,
    pub fired: bool,
    pub last_update_ns: u64,
    /// VDD at the previous step, `None` before the first step.
    pub last_vdd_on: Option<bool>,
}

impl TriggerState {
    pub fn new(v_init: f64) -> Self {
        TriggerState {
            v_cap: v_init,
            last_victim_value: LogicValue::X,
            fired: false,
            last_update_ns: 0,
            last_vdd_on: None,
        }
    }
}

impl Default for TriggerState {
    fn default() -> Self {
        TriggerState::new(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    XorFlip,
    ForceOne,
    ForceZero,
}

impl PayloadKind {
    pub fn apply(self, v: LogicValue) -> LogicValue {
        match self {
            PayloadKind::XorFlip => !v,
            PayloadKind::ForceOne => LogicValue::One,
            PayloadKind::ForceZero => LogicValue::Zero,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::XorFlip => "xor_flip",
            PayloadKind::ForceOne => "force_one",
            PayloadKind::ForceZero => "force_zero",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xor_flip" => Some(PayloadKind::XorFlip),
            "force_one" => Some(PayloadKind::ForceOne),
            "force_zero" => Some(PayloadKind::ForceZero),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub time_ns: u64,
    /// Index of the trigger within its run.
    pub aht: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhtInstance {
    pub params: TriggerParams,
    pub state: TriggerState,
    pub victim_net: NetId,
    pub payload_net: NetId,
    pub payload_kind: PayloadKind,
}

impl AhtInstance {
    /// Resolve net names against `n`. The capacitor starts empty.
    pub fn attach(
        n: &Netlist,
        victim: &str,
        payload: &str,
        payload_kind: PayloadKind,
        params: TriggerParams,
    ) -> Result<Self, AhtError> {
        let victim_net = n.net_id(victim).ok_or_else(|| AhtError::UnknownNet(victim.to_string()))?;
        let payload_net = n.net_id(payload).ok_or_else(|| AhtError::UnknownNet(payload.to_string()))?;
        Ok(AhtInstance {
            params,
            state: TriggerState::new(0.0),
            victim_net,
            payload_net,
            payload_kind,
        })
    }

    pub fn with_v_init(mut self, v_init: f64) -> Self {
        self.state.v_cap = v_init;
        self
    }
}

/// Advance a trigger to `now_ns`.
///
/// In order: leakage over the elapsed time; redistribution onto `c_new` if
/// VDD fell since the previous step; one charge-sharing event if the victim
/// changed between concrete values while VDD is on; threshold detection.
/// Returns an event when the trigger output rises.
pub fn trigger_step(
    inst: &mut AhtInstance,
    victim_now: LogicValue,
    vdd_on: bool,
    now_ns: u64,
) -> Result<Option<TriggerEvent>, AhtError> {
    let p = &inst.params;
    let s = &mut inst.state;
    if now_ns < s.last_update_ns {
        return Err(AhtError::TimeReversed {
            now_ns,
            last_ns: s.last_update_ns,
        });
    }
    let mut v = leakage_decay(p, s.v_cap, now_ns - s.last_update_ns);
    if s.last_vdd_on == Some(true) && !vdd_on && p.c_new > 0.0 {
        v = off_redistribute(p, v);
    }
    if victim_now.is_known() {
        if vdd_on && s.last_victim_value.is_known() && s.last_victim_value != victim_now {
            v += charge_share_delta(p, v);
        }
        s.last_victim_value = victim_now;
    }
    v = v.clamp(0.0, p.vdd_volts);
    s.v_cap = v;
    s.last_update_ns = now_ns;
    s.last_vdd_on = Some(vdd_on);

    let fired = v >= p.v_threshold && (vdd_on || !p.detector_gated_by_vdd);
    let rising = fired && !s.fired;
    s.fired = fired;
    Ok(rising.then_some(TriggerEvent { time_ns: now_ns, aht: 0 }))
}

/// A netlist with triggers attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrumented {
    pub netlist: Netlist,
    pub ahts: Vec<AhtInstance>,
}

/// Attach `inst` to `n`.
pub fn inject_aht(n: &Netlist, inst: AhtInstance) -> Result<Instrumented, AhtError> {
    Instrumented::golden(n.clone()).with(inst)
}

impl Instrumented {
    /// No triggers.
    pub fn golden(netlist: Netlist) -> Self {
        Instrumented {
            netlist,
            ahts: Vec::new(),
        }
    }

    /// Attach one more trigger.
    pub fn with(mut self, inst: AhtInstance) -> Result<Self, AhtError> {
        let n = &self.netlist;
        inst.params.validate()?;
        for net in [inst.victim_net, inst.payload_net] {
            if net >= n.net_count() {
                return Err(AhtError::UnknownNet(format!("#{net}")));
            }
        }
        if inst.victim_net == inst.payload_net {
            return Err(AhtError::SameNet(n.net_name(inst.victim_net).to_string()));
        }
        match n.driver(inst.victim_net) {
            Driver::Gate(g) if n.gate(g).zone == Zone::Disruptive => {}
            _ => return Err(AhtError::VictimZone(n.net_name(inst.victim_net).to_string())),
        }
        if n.driver(inst.payload_net) == Driver::Input {
            return Err(AhtError::PayloadOnInput(n.net_name(inst.payload_net).to_string()));
        }
        self.ahts.push(inst);
        Ok(self)
    }

    /// Canonical bench text followed by one `#@aht` directive per trigger.
    pub fn to_bench(&self) -> String {
        let mut out = self.netlist.to_bench();
        for a in &self.ahts {
            let p = &a.params;
            out.push_str(&format!(
                "#@aht victim={} payload={} payload_kind={} c_unit={} c_main={} c_new={} vdd_volts={} \
                 v_threshold={} retention_ns={} leak_tau_ns={} detector_gated_by_vdd={} v_init={}\n",
                self.netlist.net_name(a.victim_net),
                self.netlist.net_name(a.payload_net),
                a.payload_kind.name(),
                p.c_unit,
                p.c_main,
                p.c_new,
                p.vdd_volts,
                p.v_threshold,
                p.retention_ns,
                p.leak_tau_ns,
                p.detector_gated_by_vdd,
                a.state.v_cap,
            ));
        }
        out
    }

    /// Read text written by [`Instrumented::to_bench`].
    pub fn parse(name: &str, text: &str) -> Result<Self, AhtError> {
        let netlist = crate::netlist::parse_bench_named(name, text)?;
        let mut inst = Instrumented::golden(netlist);
        for (idx, line) in text.lines().enumerate() {
            let Some(body) = line.trim().strip_prefix("#@aht") else {
                continue;
            };
            let a = parse_aht_directive(&inst.netlist, body).map_err(|message| AhtError::Directive {
                line: idx + 1,
                message,
            })?;
            inst = inst.with(a)?;
        }
        Ok(inst)
    }
}

fn parse_aht_directive(n: &Netlist, body: &str) -> Result<AhtInstance, String> {
    let mut p = TriggerParams::baseline();
    let mut victim = None;
    let mut payload = None;
    let mut kind = PayloadKind::XorFlip;
    let mut v_init = 0.0;
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found `{field}`"))?;
        let num = || value.parse::<f64>().map_err(|_| format!("`{key}` needs a number, found `{value}`"));
        match key {
            "victim" => victim = Some(value.to_string()),
            "payload" => payload = Some(value.to_string()),
            "payload_kind" => kind = PayloadKind::from_name(value).ok_or_else(|| format!("unknown payload kind `{value}`"))?,
            "c_unit" => p.c_unit = num()?,
            "c_main" => p.c_main = num()?,
            "c_new" => p.c_new = num()?,
            "vdd_volts" => p.vdd_volts = num()?,
            "v_threshold" => p.v_threshold = num()?,
            "retention_ns" => p.retention_ns = num()?,
            "leak_tau_ns" => p.leak_tau_ns = num()?,
            "v_init" => v_init = num()?,
            "detector_gated_by_vdd" => {
                p.detector_gated_by_vdd = value.parse().map_err(|_| format!("`{key}` needs true or false"))?
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
    }
    let victim = victim.ok_or("missing victim")?;
    let payload = payload.ok_or("missing payload")?;
    AhtInstance::attach(n, &victim, &payload, kind, p)
        .map(|a| a.with_v_init(v_init))
        .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    fn caps(c_unit: f64, c_main: f64, c_new: f64) -> TriggerParams {
        TriggerParams {
            c_unit,
            c_main,
            c_new,
            ..TriggerParams::baseline()
        }
    }

    #[test]
    fn delta_examples() {
        assert_eq!(charge_share_delta(&caps(1.0, 1.0, 0.0), 0.0), 0.5);
        assert_eq!(charge_share_delta(&caps(1.0, 1.0, 0.0), 1.0), 0.0);
        assert!((charge_share_delta(&caps(1.0, 2.0, 1.0), 0.2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn accumulate_examples() {
        let half = caps(1.0, 1.0, 0.0);
        assert_eq!(accumulate(&half, 0, 0.3), 0.3);
        assert!((accumulate(&half, 3, 0.0) - 0.875).abs() < 1e-15);
        assert!((accumulate(&caps(1.0, 3.0, 0.0), 2, 0.0) - 0.4375).abs() < 1e-15);
    }

    #[test]
    fn toggle_count_examples() {
        let mut p = caps(1.0, 1.0, 0.0);
        assert_eq!(toggles_to_trigger(&p, 0.85), Toggles::Count(0));
        p.v_threshold = 0.9;
        assert_eq!(toggles_to_trigger(&p, 0.0), Toggles::Count(4));
        assert_eq!(toggles_to_trigger(&TriggerParams::baseline(), 0.0), Toggles::Count(77));
        p.v_threshold = 1.0;
        assert_eq!(toggles_to_trigger(&p, 0.0), Toggles::Never);
    }

    #[test]
    fn leakage_and_redistribution() {
        let p = TriggerParams::baseline();
        assert_eq!(leakage_decay(&p, 0.7, 0), 0.7);
        assert_eq!(leakage_decay(&p, 0.0, 500), 0.0);
        let tau = p.leak_tau_ns as u64;
        let q = TriggerParams {
            leak_tau_ns: tau as f64,
            ..p.clone()
        };
        assert!((leakage_decay(&q, 1.0, tau) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(off_redistribute(&p, 0.8), 0.8);
        assert!((off_redistribute(&caps(1.0, 1.0, 1.0), 0.8) - 0.4).abs() < 1e-15);
        assert!((off_redistribute(&caps(1.0, 3.0, 1.0), 0.8) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn retention_examples() {
        let p = TriggerParams {
            leak_tau_ns: 1000.0,
            ..TriggerParams::baseline()
        };
        assert_eq!(retention_check(&p, p.v_threshold).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((retention_check(&p, e * p.v_threshold).unwrap() - 1000.0).abs() < 1e-9);
        assert!(retention_check(&p, 0.1).is_err());
    }

    #[test]
    fn default_tau_is_self_consistent() {
        let p = TriggerParams::baseline();
        let tau = solve_leak_tau(&p, 30_000.0, 10).unwrap();
        assert!((tau - DEFAULT_LEAK_TAU_NS).abs() < 1.0, "{tau}");
    }

    #[test]
    fn step_rejects_time_reversal() {
        let n = parse_bench("INPUT(a)\nOUTPUT(v)\nOUTPUT(w)\nv = BUFF(a)\nw = NOT(a)\n").unwrap();
        let mut a = AhtInstance::attach(&n, "v", "w", PayloadKind::XorFlip, TriggerParams::baseline()).unwrap();
        trigger_step(&mut a, LogicValue::Zero, true, 20).unwrap();
        assert!(matches!(
            trigger_step(&mut a, LogicValue::One, true, 10),
            Err(AhtError::TimeReversed { .. })
        ));
    }

    #[test]
    fn x_is_not_a_toggle_and_off_blocks_charge() {
        let n = parse_bench("INPUT(a)\nOUTPUT(v)\nOUTPUT(w)\nv = BUFF(a)\nw = NOT(a)\n").unwrap();
        let mut a = AhtInstance::attach(&n, "v", "w", PayloadKind::XorFlip, TriggerParams::baseline()).unwrap();
        trigger_step(&mut a, LogicValue::Zero, true, 0).unwrap();
        trigger_step(&mut a, LogicValue::X, false, 10).unwrap();
        assert_eq!(a.state.v_cap, 0.0);
        trigger_step(&mut a, LogicValue::One, false, 20).unwrap();
        assert_eq!(a.state.v_cap, 0.0);
        trigger_step(&mut a, LogicValue::Zero, true, 30).unwrap();
        assert!(a.state.v_cap > 0.0);
    }

    #[test]
    fn inject_checks() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(s)\nOUTPUT(c)\ns = XOR(a, b)\nc = AND(a, b)\n").unwrap();
        let p = TriggerParams::baseline();
        let bad = AhtInstance::attach(&n, "s", "a", PayloadKind::XorFlip, p.clone()).unwrap();
        assert!(matches!(inject_aht(&n, bad), Err(AhtError::PayloadOnInput(_))));
        assert!(matches!(
            AhtInstance::attach(&n, "zz", "c", PayloadKind::XorFlip, p.clone()),
            Err(AhtError::UnknownNet(_))
        ));
        let ok = AhtInstance::attach(&n, "s", "c", PayloadKind::ForceOne, p).unwrap().with_v_init(0.25);
        let inst = inject_aht(&n, ok).unwrap();
        let text = inst.to_bench();
        let back = Instrumented::parse("top", &text).unwrap();
        assert_eq!(back, inst);
    }
}
