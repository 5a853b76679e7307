//! Cycle-accurate three-valued simulation with a duty-cycled power zone.
//!
//! Time is integer nanoseconds. Each clock cycle is cut into constant-power
//! segments at VDD edges. Within a segment the combinational logic settles
//! in topological order, gates of an unpowered disruptive zone drive X, and
//! attached triggers are stepped. DFFs latch at the end of a full cycle.
//!
//! `SEL` is 1 for a cycle exactly when the disruptive zone was powered for
//! all of it. Such cycles are *valid*; the others are stalls. The stimulus
//! is stall-aligned: the vector applied in a cycle is indexed by the number
//! of valid cycles before it, so a duty-cycled run replays the full-duty run
//! with stalls inserted.

use std::ops::Not;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aht::{trigger_step, AhtError, AhtInstance, PayloadKind, TriggerEvent, TriggerState};
use crate::netlist::{Driver, GateId, GateKind, NetId, Netlist, NetlistBuilder, ParseError, Zone, SEL_NET};
use crate::vddctl::VddSchedule;
use crate::DEFAULT_CLOCK_NS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LogicValue {
    Zero,
    One,
    /// Unknown, e.g. the output of an unpowered gate.
    X,
}

impl LogicValue {
    pub fn from_bool(b: bool) -> Self {
        if b {
            LogicValue::One
        } else {
            LogicValue::Zero
        }
    }

    pub fn to_bool(self) -> Option<bool> {
        match self {
            LogicValue::Zero => Some(false),
            LogicValue::One => Some(true),
            LogicValue::X => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != LogicValue::X
    }

    pub fn symbol(self) -> char {
        match self {
            LogicValue::Zero => '0',
            LogicValue::One => '1',
            LogicValue::X => 'x',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '0' => Some(LogicValue::Zero),
            '1' => Some(LogicValue::One),
            'x' | 'X' => Some(LogicValue::X),
            _ => None,
        }
    }

    pub fn and(self, other: Self) -> Self {
        use LogicValue::*;
        match (self, other) {
            (Zero, _) | (_, Zero) => Zero,
            (One, One) => One,
            _ => X,
        }
    }

    pub fn or(self, other: Self) -> Self {
        use LogicValue::*;
        match (self, other) {
            (One, _) | (_, One) => One,
            (Zero, Zero) => Zero,
            _ => X,
        }
    }

    pub fn xor(self, other: Self) -> Self {
        match (self.to_bool(), other.to_bool()) {
            (Some(a), Some(b)) => LogicValue::from_bool(a != b),
            _ => LogicValue::X,
        }
    }

    /// True when `self` is at least as defined as `other` and agrees with it
    /// wherever `other` is known.
    pub fn refines(self, other: Self) -> bool {
        other == LogicValue::X || self == other
    }
}

impl Not for LogicValue {
    type Output = LogicValue;

    fn not(self) -> LogicValue {
        match self {
            LogicValue::Zero => LogicValue::One,
            LogicValue::One => LogicValue::Zero,
            LogicValue::X => LogicValue::X,
        }
    }
}

/// Kleene evaluation of a combinational cell. DFFs pass their input.
pub fn eval_gate(kind: GateKind, inputs: &[LogicValue]) -> LogicValue {
    fn fold(ins: &[LogicValue], f: fn(LogicValue, LogicValue) -> LogicValue) -> LogicValue {
        ins[1..].iter().fold(ins[0], |acc, &v| f(acc, v))
    }
    match kind {
        GateKind::And => fold(inputs, LogicValue::and),
        GateKind::Nand => !fold(inputs, LogicValue::and),
        GateKind::Or => fold(inputs, LogicValue::or),
        GateKind::Nor => !fold(inputs, LogicValue::or),
        GateKind::Xor => fold(inputs, LogicValue::xor),
        GateKind::Xnor => !fold(inputs, LogicValue::xor),
        GateKind::Not => !inputs[0],
        GateKind::Buf | GateKind::Dff => inputs[0],
        GateKind::Mux2 => mux(inputs[0], inputs[1], inputs[2]),
    }
}

fn mux(sel: LogicValue, a: LogicValue, b: LogicValue) -> LogicValue {
    match sel {
        LogicValue::One => a,
        LogicValue::Zero => b,
        LogicValue::X if a == b => a,
        LogicValue::X => LogicValue::X,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("expected {expected} values, found {found}")]
    VectorLength { expected: usize, found: usize },
    #[error("stimulus vector {index} has {found} values for {expected} inputs")]
    StimulusWidth {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("stimulus vector {index} contains X")]
    StimulusX { index: usize },
    #[error("stimulus has no vectors")]
    EmptyStimulus,
    #[error("clock period must be positive")]
    ZeroClock,
    #[error("horizon {horizon_ns} ns is shorter than one clock period ({clock_ns} ns)")]
    HorizonTooShort { horizon_ns: u64, clock_ns: u64 },
    #[error("schedule horizon {schedule_ns} ns is shorter than the requested run of {requested_ns} ns")]
    ScheduleTooShort { schedule_ns: u64, requested_ns: u64 },
    #[error("sample step {sample_ns} ns must be positive and divide the clock period {clock_ns} ns")]
    SampleStep { sample_ns: u64, clock_ns: u64 },
    #[error("unknown net `{0}`")]
    UnknownNet(String),
    #[error("trigger {aht} refers to net {net}, outside the netlist")]
    AhtNet { aht: usize, net: NetId },
    #[error(transparent)]
    Aht(#[from] AhtError),
}

/// Initial flip-flop contents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum InitPolicy {
    /// Flip-flops and primary inputs at 0.
    #[default]
    AllZero,
    /// Flip-flops and primary inputs at X.
    AllX,
    /// One value per DFF, in gate order. Primary inputs at 0.
    Given(Vec<LogicValue>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    pub net_values: Vec<LogicValue>,
    /// One value per DFF, in gate order.
    pub dff_values: Vec<LogicValue>,
    pub time_ns: u64,
    pub cycle: u64,
    pub clock_period_ns: u64,
}

/// Power state of both zones for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZonePower {
    pub disruptive: bool,
    pub non_disruptive: bool,
}

impl ZonePower {
    pub const ALL_ON: ZonePower = ZonePower {
        disruptive: true,
        non_disruptive: true,
    };

    pub fn disruptive(on: bool) -> Self {
        ZonePower {
            disruptive: on,
            non_disruptive: true,
        }
    }

    fn is_on(self, zone: Zone) -> bool {
        match zone {
            Zone::Disruptive => self.disruptive,
            Zone::NonDisruptive => self.non_disruptive,
        }
    }
}

/// Build the initial state and settle the combinational logic once with
/// both zones powered.
pub fn init_state(n: &Netlist, policy: &InitPolicy) -> Result<SimState, SimError> {
    let dffs: Vec<GateId> = n.dffs().collect();
    let (input_value, dff_values) = match policy {
        InitPolicy::AllZero => (LogicValue::Zero, vec![LogicValue::Zero; dffs.len()]),
        InitPolicy::AllX => (LogicValue::X, vec![LogicValue::X; dffs.len()]),
        InitPolicy::Given(v) => {
            if v.len() != dffs.len() {
                return Err(SimError::VectorLength {
                    expected: dffs.len(),
                    found: v.len(),
                });
            }
            (LogicValue::Zero, v.clone())
        }
    };
    let mut ev = Evaluator::new(n);
    for &i in n.inputs() {
        ev.vals[i] = input_value;
    }
    ev.load_dffs(dff_values.clone());
    if let Some(sel) = n.sel_net() {
        ev.vals[sel] = LogicValue::One;
    }
    ev.settle(ZonePower::ALL_ON);
    Ok(SimState {
        net_values: ev.vals,
        dff_values,
        time_ns: 0,
        cycle: 0,
        clock_period_ns: DEFAULT_CLOCK_NS,
    })
}

/// One clock cycle under constant zone power.
///
/// The returned state holds the settled combinational values of the cycle
/// and, on DFF output nets, the values latched at its closing edge. `SEL`
/// reads 1 when the disruptive zone is powered.
pub fn eval_cycle(n: &Netlist, state: &SimState, inputs: &[LogicValue], vdd_on: ZonePower) -> Result<SimState, SimError> {
    if inputs.len() != n.inputs().len() {
        return Err(SimError::VectorLength {
            expected: n.inputs().len(),
            found: inputs.len(),
        });
    }
    let mut ev = Evaluator::new(n);
    ev.vals.clone_from(&state.net_values);
    ev.dff_state.clone_from(&state.dff_values);
    for (&net, &v) in n.inputs().iter().zip(inputs) {
        ev.vals[net] = v;
    }
    if let Some(sel) = n.sel_net() {
        ev.vals[sel] = LogicValue::from_bool(vdd_on.disruptive);
    }
    ev.settle(vdd_on);
    let dff_values = ev.latch();
    ev.load_dffs(dff_values.clone());
    Ok(SimState {
        net_values: ev.vals,
        dff_values,
        time_ns: state.time_ns + state.clock_period_ns,
        cycle: state.cycle + 1,
        clock_period_ns: state.clock_period_ns,
    })
}

/// Per-cycle input vectors. Never contains X.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    vectors: Vec<Vec<LogicValue>>,
    clock_period_ns: u64,
}

impl Stimulus {
    pub fn new(vectors: Vec<Vec<LogicValue>>, clock_period_ns: u64) -> Result<Self, SimError> {
        if clock_period_ns == 0 {
            return Err(SimError::ZeroClock);
        }
        let Some(width) = vectors.first().map(Vec::len) else {
            return Err(SimError::EmptyStimulus);
        };
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != width {
                return Err(SimError::StimulusWidth {
                    index,
                    expected: width,
                    found: v.len(),
                });
            }
            if v.contains(&LogicValue::X) {
                return Err(SimError::StimulusX { index });
            }
        }
        Ok(Stimulus {
            vectors,
            clock_period_ns,
        })
    }

    /// `count` uniform random vectors from a ChaCha8 stream seeded by `seed`.
    pub fn random(width: usize, count: usize, seed: u64, clock_period_ns: u64) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors = (0..count)
            .map(|_| (0..width).map(|_| LogicValue::from_bool(rng.random())).collect())
            .collect();
        Stimulus::new(vectors, clock_period_ns)
    }

    /// Parse vectors written as strings of `0`/`1`, one per cycle.
    pub fn from_bits<S: AsRef<str>>(rows: &[S], clock_period_ns: u64) -> Result<Self, SimError> {
        let mut vectors = Vec::with_capacity(rows.len());
        for (index, row) in rows.iter().enumerate() {
            let v: Option<Vec<LogicValue>> = row
                .as_ref()
                .chars()
                .map(|c| match c {
                    '0' | '1' => LogicValue::from_symbol(c),
                    _ => None,
                })
                .collect();
            vectors.push(v.ok_or(SimError::StimulusX { index })?);
        }
        Stimulus::new(vectors, clock_period_ns)
    }

    pub fn vectors(&self) -> &[Vec<LogicValue>] {
        &self.vectors
    }

    pub fn width(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn clock_period_ns(&self) -> u64 {
        self.clock_period_ns
    }

    /// Vector for logical cycle `i`. The stimulus repeats.
    pub fn vector(&self, i: usize) -> &[LogicValue] {
        &self.vectors[i % self.vectors.len()]
    }

    /// Concatenate another stimulus of the same width and clock.
    pub fn then(mut self, other: &Stimulus) -> Result<Self, SimError> {
        if other.width() != self.width() {
            return Err(SimError::StimulusWidth {
                index: self.vectors.len(),
                expected: self.width(),
                found: other.width(),
            });
        }
        self.vectors.extend(other.vectors.iter().cloned());
        Ok(self)
    }
}

/// Which nets a [`Trace`] keeps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Record {
    /// Inputs, outputs, `SEL`, and every trigger's victim and payload.
    #[default]
    Interface,
    All,
    Nets(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub init: InitPolicy,
    pub record: Record,
    /// Sample step in ns. Defaults to the coarsest step that hits every
    /// clock and VDD edge. Must divide the clock period.
    pub sample_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signal {
    pub name: String,
    pub values: Vec<LogicValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VddSamples {
    pub disruptive: Vec<bool>,
    pub non_disruptive: Vec<bool>,
}

/// Summary of one clock cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub start_ns: u64,
    /// `SEL` for this cycle.
    pub valid: bool,
    /// Index of the stimulus vector applied.
    pub logical: usize,
    /// Concrete value changes over all nets and trigger outputs.
    pub toggles: u64,
}

/// Primary-output values seen at the end of a valid cycle. Outputs driven by
/// a DFF report the value latched at the closing edge; the others report
/// their settled value in the cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub cycle: usize,
    pub logical: usize,
    pub values: Vec<LogicValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub clock_period_ns: u64,
    pub sample_ns: u64,
    pub horizon_ns: u64,
    /// Recorded nets followed by one `aht<i>.fired` signal per trigger. All
    /// share the length of `vdd.disruptive`; sample `k` is at `k * sample_ns`.
    pub signals: Vec<Signal>,
    pub vdd: VddSamples,
    pub trigger_events: Vec<TriggerEvent>,
    pub cycles: Vec<CycleRecord>,
    pub output_names: Vec<String>,
    pub observations: Vec<Observation>,
    pub aht_final: Vec<TriggerState>,
    pub aht_peak_v: Vec<f64>,
}

impl Trace {
    pub fn signal(&self, name: &str) -> Option<&[LogicValue]> {
        self.signals.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    pub fn sample_count(&self) -> usize {
        self.vdd.disruptive.len()
    }

    pub fn time_of(&self, sample: usize) -> u64 {
        sample as u64 * self.sample_ns
    }
}

/// [`run_with`] using default options.
pub fn run(
    n: &Netlist,
    s: &Stimulus,
    sched: &VddSchedule,
    ahts: &[AhtInstance],
    horizon_ns: u64,
) -> Result<Trace, SimError> {
    run_with(n, s, sched, ahts, horizon_ns, &RunOptions::default())
}

/// Simulate `[0, horizon_ns)` under `sched` for the disruptive zone. The
/// non-disruptive zone is always powered. Trigger instances are cloned; the
/// caller's copies are not advanced.
pub fn run_with(
    n: &Netlist,
    s: &Stimulus,
    sched: &VddSchedule,
    ahts: &[AhtInstance],
    horizon_ns: u64,
    opts: &RunOptions,
) -> Result<Trace, SimError> {
    let clock = s.clock_period_ns();
    if horizon_ns < clock {
        return Err(SimError::HorizonTooShort {
            horizon_ns,
            clock_ns: clock,
        });
    }
    if sched.horizon_ns() < horizon_ns {
        return Err(SimError::ScheduleTooShort {
            schedule_ns: sched.horizon_ns(),
            requested_ns: horizon_ns,
        });
    }
    if s.width() != n.inputs().len() {
        return Err(SimError::StimulusWidth {
            index: 0,
            expected: n.inputs().len(),
            found: s.width(),
        });
    }
    for (i, a) in ahts.iter().enumerate() {
        for net in [a.victim_net, a.payload_net] {
            if net >= n.net_count() {
                return Err(SimError::AhtNet { aht: i, net });
            }
        }
    }
    let sample_ns = opts.sample_ns.unwrap_or_else(|| sched.sample_step(clock));
    if sample_ns == 0 || !clock.is_multiple_of(sample_ns) {
        return Err(SimError::SampleStep {
            sample_ns,
            clock_ns: clock,
        });
    }

    let recorded = recorded_nets(n, ahts, &opts.record)?;
    let state = init_state(n, &opts.init)?;
    let mut ev = Evaluator::new(n);
    ev.vals = state.net_values;
    ev.dff_state = state.dff_values;
    ev.set_payloads(
        ahts.iter()
            .enumerate()
            .map(|(i, a)| (a.payload_net, i, a.payload_kind))
            .collect(),
    );
    ev.fired = ahts.iter().map(|a| a.state.fired).collect();
    let mut ahts: Vec<AhtInstance> = ahts.to_vec();
    let mut peak: Vec<f64> = ahts.iter().map(|a| a.state.v_cap).collect();

    let samples_total = horizon_ns.div_ceil(sample_ns) as usize;
    let mut signals: Vec<Signal> = recorded
        .iter()
        .map(|&id| Signal {
            name: n.net_name(id).to_string(),
            values: Vec::with_capacity(samples_total),
        })
        .chain((0..ahts.len()).map(|i| Signal {
            name: format!("aht{i}.fired"),
            values: Vec::with_capacity(samples_total),
        }))
        .collect();
    let mut vdd = VddSamples {
        disruptive: Vec::with_capacity(samples_total),
        non_disruptive: Vec::with_capacity(samples_total),
    };

    let dff_outputs: Vec<NetId> = ev.dff_nets.clone();
    let output_from_dff: Vec<Option<usize>> = n
        .outputs()
        .iter()
        .map(|&o| dff_outputs.iter().position(|&d| d == o))
        .collect();

    let mut events = Vec::new();
    let mut cycles = Vec::new();
    let mut observations = Vec::new();
    let mut valid_count = 0usize;
    let mut latched: Option<Vec<LogicValue>> = None;
    let mut t0 = 0u64;

    while t0 < horizon_ns {
        let full_end = t0 + clock;
        let t1 = full_end.min(horizon_ns);
        let segments = sched.segments(t0, t1);
        let valid = t1 == full_end && segments.iter().all(|&(_, _, on)| on);
        let logical = valid_count;
        let mut toggles = 0u64;

        if let Some(q) = latched.take() {
            toggles += ev.load_dffs(q);
        }
        for (&net, &v) in n.inputs().iter().zip(s.vector(logical)) {
            toggles += ev.assign(net, v);
        }
        if let Some(sel) = n.sel_net() {
            toggles += ev.assign(sel, LogicValue::from_bool(valid));
        }

        for &(seg_start, seg_end, on) in &segments {
            let power = ZonePower::disruptive(on);
            toggles += ev.settle(power);
            let mut changed = false;
            for (i, a) in ahts.iter_mut().enumerate() {
                let victim = ev.vals[a.victim_net];
                if let Some(e) = trigger_step(a, victim, on, seg_start)? {
                    events.push(TriggerEvent { aht: i, ..e });
                }
                peak[i] = peak[i].max(a.state.v_cap);
                if a.state.fired != ev.fired[i] {
                    ev.fired[i] = a.state.fired;
                    toggles += 1;
                    changed = true;
                }
            }
            if changed {
                toggles += ev.settle(power);
            }

            let first = seg_start.div_ceil(sample_ns);
            let last = seg_end.div_ceil(sample_ns);
            for _ in first..last {
                for (sig, &net) in signals.iter_mut().zip(&recorded) {
                    sig.values.push(ev.vals[net]);
                }
                for (k, sig) in signals[recorded.len()..].iter_mut().enumerate() {
                    sig.values.push(LogicValue::from_bool(ev.fired[k]));
                }
                vdd.disruptive.push(on);
                vdd.non_disruptive.push(true);
            }
        }

        if t1 == full_end {
            let q = ev.latch();
            if valid {
                let values = n
                    .outputs()
                    .iter()
                    .zip(&output_from_dff)
                    .map(|(&o, from_dff)| match from_dff {
                        Some(k) => ev.with_payload(o, q[*k]),
                        None => ev.vals[o],
                    })
                    .collect();
                observations.push(Observation {
                    cycle: cycles.len(),
                    logical,
                    values,
                });
            }
            latched = Some(q);
        }
        cycles.push(CycleRecord {
            start_ns: t0,
            valid,
            logical,
            toggles,
        });
        if valid {
            valid_count += 1;
        }
        t0 = full_end;
    }

    Ok(Trace {
        clock_period_ns: clock,
        sample_ns,
        horizon_ns,
        signals,
        vdd,
        trigger_events: events,
        cycles,
        output_names: n.outputs().iter().map(|&o| n.net_name(o).to_string()).collect(),
        observations,
        aht_final: ahts.iter().map(|a| a.state.clone()).collect(),
        aht_peak_v: peak,
    })
}

fn recorded_nets(n: &Netlist, ahts: &[AhtInstance], record: &Record) -> Result<Vec<NetId>, SimError> {
    let mut out: Vec<NetId> = Vec::new();
    let push = |id: NetId, out: &mut Vec<NetId>| {
        if !out.contains(&id) {
            out.push(id);
        }
    };
    match record {
        Record::All => (0..n.net_count()).for_each(|id| push(id, &mut out)),
        Record::Interface => {
            for &i in n.inputs() {
                push(i, &mut out);
            }
            for &o in n.outputs() {
                push(o, &mut out);
            }
            if let Some(sel) = n.sel_net() {
                push(sel, &mut out);
            }
            for a in ahts {
                push(a.victim_net, &mut out);
                push(a.payload_net, &mut out);
            }
        }
        Record::Nets(names) => {
            for name in names {
                let id = n.net_id(name).ok_or_else(|| SimError::UnknownNet(name.clone()))?;
                push(id, &mut out);
            }
        }
    }
    Ok(out)
}

/// Mutable net values plus trigger payload overrides.
struct Evaluator<'a> {
    n: &'a Netlist,
    vals: Vec<LogicValue>,
    /// DFF output nets and raw latched contents, in gate order.
    dff_nets: Vec<NetId>,
    dff_state: Vec<LogicValue>,
    has_payload: Vec<bool>,
    payloads: Vec<(NetId, usize, PayloadKind)>,
    /// DFFs whose output carries a payload.
    payload_dffs: Vec<usize>,
    fired: Vec<bool>,
    scratch: Vec<LogicValue>,
}

impl<'a> Evaluator<'a> {
    fn new(n: &'a Netlist) -> Self {
        let dff_nets: Vec<NetId> = n.dffs().map(|g| n.gate(g).output).collect();
        Evaluator {
            n,
            vals: vec![LogicValue::X; n.net_count()],
            dff_state: vec![LogicValue::X; dff_nets.len()],
            dff_nets,
            has_payload: vec![false; n.net_count()],
            payloads: Vec::new(),
            payload_dffs: Vec::new(),
            fired: Vec::new(),
            scratch: Vec::with_capacity(8),
        }
    }

    fn set_payloads(&mut self, payloads: Vec<(NetId, usize, PayloadKind)>) {
        for &(net, _, _) in &payloads {
            self.has_payload[net] = true;
        }
        self.payload_dffs = (0..self.dff_nets.len())
            .filter(|&k| self.has_payload[self.dff_nets[k]])
            .collect();
        self.fired = vec![false; payloads.len()];
        self.payloads = payloads;
    }

    fn with_payload(&self, net: NetId, mut v: LogicValue) -> LogicValue {
        if !self.has_payload[net] {
            return v;
        }
        for &(p, aht, kind) in &self.payloads {
            if p == net && self.fired[aht] {
                v = kind.apply(v);
            }
        }
        v
    }

    /// Store a value and report whether it was a concrete toggle.
    fn assign(&mut self, net: NetId, v: LogicValue) -> u64 {
        let v = self.with_payload(net, v);
        let old = std::mem::replace(&mut self.vals[net], v);
        (old.is_known() && v.is_known() && old != v) as u64
    }

    fn load_dffs(&mut self, q: Vec<LogicValue>) -> u64 {
        let mut toggles = 0;
        for (k, &v) in q.iter().enumerate() {
            toggles += self.assign(self.dff_nets[k], v);
        }
        self.dff_state = q;
        toggles
    }

    /// Settle the combinational logic in topological order.
    fn settle(&mut self, power: ZonePower) -> u64 {
        let mut toggles = 0;
        for i in 0..self.payload_dffs.len() {
            let k = self.payload_dffs[i];
            toggles += self.assign(self.dff_nets[k], self.dff_state[k]);
        }
        for &g in self.n.topo_order() {
            let gate = self.n.gate(g);
            let v = if power.is_on(gate.zone) {
                self.scratch.clear();
                self.scratch.extend(gate.inputs.iter().map(|&i| self.vals[i]));
                eval_gate(gate.kind, &self.scratch)
            } else {
                LogicValue::X
            };
            toggles += self.assign(gate.output, v);
        }
        toggles
    }

    /// Values the DFFs capture at the closing clock edge, in gate order.
    fn latch(&self) -> Vec<LogicValue> {
        self.n
            .dffs()
            .map(|g| self.vals[self.n.gate(g).inputs[0]])
            .collect()
    }
}

/// Insert the save path for each net in `saved_nets`: a MUX2 selecting
/// between the live value and the held copy, feeding a DFF. Primary outputs
/// and non-disruptive readers are moved to the held copy; disruptive-zone
/// readers keep the live net.
pub fn wrap_state_saving(n: &Netlist, saved_nets: &[&str]) -> Result<Netlist, WrapError> {
    if saved_nets.is_empty() {
        return Ok(n.clone());
    }
    let existing = n.saved_copies();
    let mut seen: Vec<&str> = Vec::new();
    for &name in saved_nets {
        let id = n.net_id(name).ok_or_else(|| WrapError::NotFound(name.to_string()))?;
        let already = seen.contains(&name) || existing.iter().any(|&(orig, copy)| orig == id || copy == id);
        if already {
            return Err(WrapError::AlreadyWrapped(name.to_string()));
        }
        match n.driver(id) {
            Driver::Gate(g) if n.gate(g).zone == Zone::Disruptive => {}
            _ => return Err(WrapError::NotDisruptive(name.to_string())),
        }
        seen.push(name);
    }

    let mut taken: std::collections::HashSet<String> = (0..n.net_count()).map(|i| n.net_name(i).to_string()).collect();
    taken.insert(SEL_NET.to_string());
    let mut fresh = |base: String| -> String {
        let mut name = base.clone();
        let mut k = 1;
        while taken.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        taken.insert(name.clone());
        name
    };
    let renames: Vec<(String, String, String)> = saved_nets
        .iter()
        .map(|&x| (x.to_string(), fresh(format!("{x}_saved")), fresh(format!("{x}_next"))))
        .collect();
    let held = |net: &str| -> String {
        renames
            .iter()
            .find(|(x, _, _)| x == net)
            .map(|(_, q, _)| q.clone())
            .unwrap_or_else(|| net.to_string())
    };

    let mut b = NetlistBuilder::new(n.name());
    for &i in n.inputs() {
        b.input(n.net_name(i));
    }
    for &o in n.outputs() {
        b.output(&held(n.net_name(o)));
    }
    for g in n.gates() {
        let ins: Vec<String> = g
            .inputs
            .iter()
            .map(|&i| match g.zone {
                Zone::NonDisruptive => held(n.net_name(i)),
                Zone::Disruptive => n.net_name(i).to_string(),
            })
            .collect();
        let ins: Vec<&str> = ins.iter().map(String::as_str).collect();
        b.gate(n.net_name(g.output), g.kind, &ins);
        if g.kind.forced_zone().is_none() && g.zone == Zone::NonDisruptive {
            b.zone(n.net_name(g.output), Zone::NonDisruptive);
        }
    }
    for (x, q, m) in &renames {
        b.gate(m, GateKind::Mux2, &[SEL_NET, x, q]);
        b.gate(q, GateKind::Dff, &[m]);
    }
    b.build().map_err(WrapError::Build)
}

/// Wrap every primary output that is driven by a disruptive-zone gate.
pub fn wrap_outputs(n: &Netlist) -> Result<Netlist, WrapError> {
    let names: Vec<&str> = n
        .outputs()
        .iter()
        .filter(|&&o| matches!(n.driver(o), Driver::Gate(g) if n.gate(g).zone == Zone::Disruptive))
        .map(|&o| n.net_name(o))
        .collect();
    wrap_state_saving(n, &names)
}

/// Give every DFF not already on a save path a hold multiplexer,
/// `q = DFF(MUX2(SEL, d, q))`, so sequential state survives stalls.
pub fn hold_flip_flops(n: &Netlist) -> Result<Netlist, WrapError> {
    let saved: Vec<NetId> = n.saved_copies().into_iter().map(|(_, q)| q).collect();
    let mut taken: std::collections::HashSet<String> = (0..n.net_count()).map(|i| n.net_name(i).to_string()).collect();
    let mut b = NetlistBuilder::new(n.name());
    for &i in n.inputs() {
        b.input(n.net_name(i));
    }
    for &o in n.outputs() {
        b.output(n.net_name(o));
    }
    for g in n.gates() {
        let out = n.net_name(g.output);
        let ins: Vec<&str> = g.inputs.iter().map(|&i| n.net_name(i)).collect();
        if g.kind == GateKind::Dff && !saved.contains(&g.output) {
            let mut m = format!("{out}_hold");
            let mut k = 1;
            while taken.contains(&m) {
                m = format!("{out}_hold_{k}");
                k += 1;
            }
            taken.insert(m.clone());
            b.gate(&m, GateKind::Mux2, &[SEL_NET, ins[0], out]);
            b.gate(out, GateKind::Dff, &[&m]);
        } else {
            b.gate(out, g.kind, &ins);
            if g.kind.forced_zone().is_none() && g.zone == Zone::NonDisruptive {
                b.zone(out, Zone::NonDisruptive);
            }
        }
    }
    b.build().map_err(WrapError::Build)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WrapError {
    #[error("net `{0}` not found")]
    NotFound(String),
    #[error("net `{0}` is already wrapped")]
    AlreadyWrapped(String),
    #[error("net `{0}` is not driven by a disruptive-zone gate")]
    NotDisruptive(String),
    #[error("rewritten netlist is invalid: {0}")]
    Build(ParseError),
}
