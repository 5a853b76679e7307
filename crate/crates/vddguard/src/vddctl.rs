//! VDD scheduling for the disruptive zone.
//!
//! A [`VddSchedule`] is a periodic on/off waveform. [`ControlCircuit`] is
//! the counter plus negative-edge state bit that would generate such a
//! waveform in hardware, and [`critical_duty`] searches for the largest duty
//! that keeps a trigger from firing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aht::{inject_aht, toggles_to_trigger, AhtError, AhtInstance, PayloadKind, Toggles, TriggerParams};
use crate::logicsim::{run_with, LogicValue, Record, RunOptions, SimError, Stimulus};
use crate::netlist::{GateKind, NetlistBuilder};
use crate::DEFAULT_CLOCK_NS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VddError {
    #[error("duty {0} is outside (0, 1]")]
    DutyOutOfRange(f64),
    #[error("on-window of {on_ns} ns is shorter than one clock period ({clock_ns} ns)")]
    OnWindowTooShort { on_ns: u64, clock_ns: u64 },
    #[error("schedule period must be positive")]
    ZeroPeriod,
    #[error("time {t_ns} ns is beyond the schedule horizon of {horizon_ns} ns")]
    BeyondHorizon { t_ns: u64, horizon_ns: u64 },
    #[error("certification horizon {horizon_ns} ns covers fewer than two schedule periods of {period_ns} ns")]
    HorizonTooShort { horizon_ns: u64, period_ns: u64 },
    #[error("toggle period {toggle_ns} ns is not a positive multiple of the clock period {clock_ns} ns")]
    TogglePeriod { toggle_ns: u64, clock_ns: u64 },
    #[error("tolerance must be positive")]
    Tolerance,
    #[error("counter maxima ({on}, {off}) never power the zone after reset")]
    NeverOn { on: u32, off: u32 },
    #[error("clock period must be even to place negative edges on whole nanoseconds")]
    OddClock,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Aht(#[from] AhtError),
}

/// Periodic supply waveform: on for `round(duty * period)` ns, then off for
/// the rest of the period, shifted right by `phase_ns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VddSchedule {
    period_ns: u64,
    duty: f64,
    phase_ns: u64,
    horizon_ns: u64,
    on_ns: u64,
}

/// Build a schedule checked against the default 10 ns clock.
pub fn schedule_from_duty(period_ns: u64, duty: f64, phase_ns: u64, horizon_ns: u64) -> Result<VddSchedule, VddError> {
    VddSchedule::new(period_ns, duty, phase_ns, horizon_ns, DEFAULT_CLOCK_NS)
}

/// Whether VDD is on at `t_ns`.
pub fn vdd_at(s: &VddSchedule, t_ns: u64) -> Result<bool, VddError> {
    if t_ns >= s.horizon_ns {
        return Err(VddError::BeyondHorizon {
            t_ns,
            horizon_ns: s.horizon_ns,
        });
    }
    Ok(s.is_on(t_ns))
}

impl VddSchedule {
    pub fn new(period_ns: u64, duty: f64, phase_ns: u64, horizon_ns: u64, clock_ns: u64) -> Result<Self, VddError> {
        if period_ns == 0 {
            return Err(VddError::ZeroPeriod);
        }
        if !(duty > 0.0 && duty <= 1.0) {
            return Err(VddError::DutyOutOfRange(duty));
        }
        let on_ns = if duty == 1.0 {
            period_ns
        } else {
            (duty * period_ns as f64).round() as u64
        };
        if on_ns < period_ns && on_ns < clock_ns {
            return Err(VddError::OnWindowTooShort { on_ns, clock_ns });
        }
        Ok(VddSchedule {
            period_ns,
            duty,
            phase_ns: phase_ns % period_ns,
            horizon_ns,
            on_ns: on_ns.min(period_ns),
        })
    }

    /// Full duty over `horizon_ns`.
    pub fn always_on(horizon_ns: u64) -> Self {
        VddSchedule {
            period_ns: 1,
            duty: 1.0,
            phase_ns: 0,
            horizon_ns,
            on_ns: 1,
        }
    }

    pub fn period_ns(&self) -> u64 {
        self.period_ns
    }

    pub fn duty(&self) -> f64 {
        self.duty
    }

    pub fn phase_ns(&self) -> u64 {
        self.phase_ns
    }

    pub fn horizon_ns(&self) -> u64 {
        self.horizon_ns
    }

    pub fn on_ns(&self) -> u64 {
        self.on_ns
    }

    pub fn is_always_on(&self) -> bool {
        self.on_ns >= self.period_ns
    }

    /// Same waveform over a different horizon.
    pub fn with_horizon(mut self, horizon_ns: u64) -> Self {
        self.horizon_ns = horizon_ns;
        self
    }

    fn position(&self, t: u64) -> u64 {
        (t + self.period_ns - self.phase_ns) % self.period_ns
    }

    /// Waveform value without a horizon check.
    pub fn is_on(&self, t: u64) -> bool {
        self.is_always_on() || self.position(t) < self.on_ns
    }

    /// First time after `t` at which the waveform changes.
    pub fn next_edge(&self, t: u64) -> Option<u64> {
        if self.is_always_on() {
            return None;
        }
        let p = self.position(t);
        Some(if p < self.on_ns {
            t + (self.on_ns - p)
        } else {
            t + (self.period_ns - p)
        })
    }

    /// Constant-power pieces of `[t0, t1)`.
    pub fn segments(&self, t0: u64, t1: u64) -> Vec<(u64, u64, bool)> {
        let mut out = Vec::with_capacity(1);
        let mut s = t0;
        while s < t1 {
            let e = self.next_edge(s).map_or(t1, |e| e.min(t1));
            out.push((s, e, self.is_on(s)));
            s = e;
        }
        out
    }

    /// Coarsest sample step that still lands on every edge and clock boundary.
    pub fn sample_step(&self, clock_ns: u64) -> u64 {
        if self.is_always_on() {
            return clock_ns;
        }
        [self.period_ns, self.on_ns, self.phase_ns]
            .into_iter()
            .fold(clock_ns, gcd)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateBit {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmosGate {
    Conducting,
    Blocked,
}

/// Counter, negative-edge state flip-flop and PMOS header switch.
///
/// On each negative clock edge the counter either increments or, when it
/// already equals the maximum for the current state, resets and flips the
/// state bit. A maximum of 0 makes that state zero-length: entering it flips
/// straight back at the same edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlCircuit {
    pub counter_max_on: u32,
    pub counter_max_off: u32,
    pub count: u32,
    pub state_bit: StateBit,
}

impl ControlCircuit {
    /// Reset state: powered, counter at zero.
    pub fn new(counter_max_on: u32, counter_max_off: u32) -> Self {
        ControlCircuit {
            counter_max_on,
            counter_max_off,
            count: 0,
            state_bit: StateBit::On,
        }
    }

    fn active_max(&self) -> u32 {
        match self.state_bit {
            StateBit::On => self.counter_max_on,
            StateBit::Off => self.counter_max_off,
        }
    }

    fn flip(&mut self) {
        self.state_bit = match self.state_bit {
            StateBit::On => StateBit::Off,
            StateBit::Off => StateBit::On,
        };
        self.count = 0;
    }

    pub fn pmos(&self) -> PmosGate {
        match self.state_bit {
            StateBit::On => PmosGate::Conducting,
            StateBit::Off => PmosGate::Blocked,
        }
    }

    /// Duty of the generated waveform.
    pub fn duty(&self) -> f64 {
        if self.counter_max_off == 0 {
            return 1.0;
        }
        if self.counter_max_on == 0 {
            return 0.0;
        }
        (self.counter_max_on + 1) as f64 / (self.counter_max_on + self.counter_max_off + 2) as f64
    }

    /// The [`VddSchedule`] this circuit produces from reset under a clock of
    /// period `clock_ns`, whose negative edges fall at `k*clock + clock/2`.
    pub fn equivalent_schedule(&self, clock_ns: u64, horizon_ns: u64) -> Result<VddSchedule, VddError> {
        if !clock_ns.is_multiple_of(2) {
            return Err(VddError::OddClock);
        }
        if self.counter_max_off == 0 {
            return Ok(VddSchedule::always_on(horizon_ns));
        }
        if self.counter_max_on == 0 {
            return Err(VddError::NeverOn {
                on: self.counter_max_on,
                off: self.counter_max_off,
            });
        }
        let cycles = (self.counter_max_on + self.counter_max_off + 2) as u64;
        let period = cycles * clock_ns;
        let on_ns = (self.counter_max_on as u64 + 1) * clock_ns;
        Ok(VddSchedule {
            period_ns: period,
            duty: on_ns as f64 / period as f64,
            phase_ns: period - clock_ns / 2,
            horizon_ns,
            on_ns,
        })
    }
}

/// Advance the controller by one clock edge.
pub fn control_circuit_step(c: &ControlCircuit, negedge: bool) -> (ControlCircuit, PmosGate) {
    let mut next = *c;
    if negedge {
        if next.count >= next.active_max() {
            next.flip();
            if next.active_max() == 0 {
                next.flip();
            }
        } else {
            next.count += 1;
        }
    }
    let gate = next.pmos();
    (next, gate)
}

/// Inputs for [`critical_duty_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalDutyQuery {
    pub params: TriggerParams,
    pub victim_toggle_period_ns: u64,
    pub sched_period_ns: u64,
    pub tolerance: f64,
    pub clock_ns: u64,
    pub phase_ns: u64,
    pub v_init: f64,
}

impl CriticalDutyQuery {
    pub fn new(params: TriggerParams, victim_toggle_period_ns: u64, sched_period_ns: u64, tolerance: f64) -> Self {
        CriticalDutyQuery {
            params,
            victim_toggle_period_ns,
            sched_period_ns,
            tolerance,
            clock_ns: DEFAULT_CLOCK_NS,
            phase_ns: 0,
            v_init: 0.0,
        }
    }
}

/// One simulated probe of the bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyProbe {
    pub duty: f64,
    pub peak_v: f64,
    pub fired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalDuty {
    /// Largest probed duty that never fired. 1.0 when full duty is safe and
    /// 0.0 when even the shortest legal on-window fires.
    pub duty: f64,
    pub horizon_ns: u64,
    /// Probes in the order they were run.
    pub probes: Vec<DutyProbe>,
}

impl CriticalDuty {
    /// `duty,peak_v,fired` rows sorted by duty, for plotting.
    pub fn curve_csv(&self) -> String {
        let mut probes = self.probes.clone();
        probes.sort_by(|a, b| a.duty.total_cmp(&b.duty));
        let mut out = String::from("duty,peak_v,fired\n");
        for p in probes {
            out.push_str(&format!("{},{},{}\n", p.duty, p.peak_v, p.fired as u8));
        }
        out
    }
}

/// Largest duty, to within `tolerance`, at which a victim toggling every
/// `victim_toggle_period_ns` never fires the trigger.
pub fn critical_duty(
    p: &TriggerParams,
    victim_toggle_period_ns: u64,
    sched_period_ns: u64,
    tolerance: f64,
) -> Result<f64, VddError> {
    critical_duty_detailed(&CriticalDutyQuery::new(
        p.clone(),
        victim_toggle_period_ns,
        sched_period_ns,
        tolerance,
    ))
    .map(|c| c.duty)
}

/// Bisection over full simulations of a one-buffer victim. The certification
/// horizon is ten times the full-duty trigger time.
pub fn critical_duty_detailed(q: &CriticalDutyQuery) -> Result<CriticalDuty, VddError> {
    if !(q.tolerance > 0.0) {
        return Err(VddError::Tolerance);
    }
    if q.sched_period_ns == 0 {
        return Err(VddError::ZeroPeriod);
    }
    if q.clock_ns == 0 || q.victim_toggle_period_ns == 0 || !q.victim_toggle_period_ns.is_multiple_of(q.clock_ns) {
        return Err(VddError::TogglePeriod {
            toggle_ns: q.victim_toggle_period_ns,
            clock_ns: q.clock_ns,
        });
    }
    q.params.validate()?;

    let toggles = match toggles_to_trigger(&q.params, q.v_init) {
        Toggles::Count(k) => k,
        Toggles::Never => {
            return Ok(CriticalDuty {
                duty: 1.0,
                horizon_ns: 0,
                probes: Vec::new(),
            })
        }
    };
    let trigger_ns = toggles.max(1) * q.victim_toggle_period_ns;
    let horizon_ns = 10 * trigger_ns;
    if horizon_ns < 2 * q.sched_period_ns {
        return Err(VddError::HorizonTooShort {
            horizon_ns,
            period_ns: q.sched_period_ns,
        });
    }

    let mut b = NetlistBuilder::new("toggle");
    b.input("a")
        .output("v")
        .output("w")
        .gate("v", GateKind::Buf, &["a"])
        .gate("w", GateKind::Not, &["a"]);
    let n = b.build().expect("fixed netlist");
    let mut inst = AhtInstance::attach(&n, "v", "w", PayloadKind::XorFlip, q.params.clone())?;
    inst.state.v_cap = q.v_init;
    let instrumented = inject_aht(&n, inst)?;

    let m = (q.victim_toggle_period_ns / q.clock_ns) as usize;
    let mut vectors = vec![vec![LogicValue::Zero]; m];
    vectors.extend(vec![vec![LogicValue::One]; m]);
    let stim = Stimulus::new(vectors, q.clock_ns)?;
    let opts = RunOptions {
        record: Record::Nets(Vec::new()),
        ..RunOptions::default()
    };

    let mut probes = Vec::new();
    let mut probe = |duty: f64| -> Result<bool, VddError> {
        let sched = VddSchedule::new(q.sched_period_ns, duty, q.phase_ns, horizon_ns, q.clock_ns)?;
        let trace = run_with(
            &instrumented.netlist,
            &stim,
            &sched,
            &instrumented.ahts,
            horizon_ns,
            &opts,
        )?;
        let fired = !trace.trigger_events.is_empty();
        probes.push(DutyProbe {
            duty,
            peak_v: trace.aht_peak_v[0],
            fired,
        });
        Ok(fired)
    };

    if !probe(1.0)? {
        return Ok(CriticalDuty {
            duty: 1.0,
            horizon_ns,
            probes,
        });
    }
    let mut lo = q.clock_ns as f64 / q.sched_period_ns as f64;
    let mut hi = 1.0;
    if lo >= 1.0 || probe(lo)? {
        return Ok(CriticalDuty {
            duty: 0.0,
            horizon_ns,
            probes,
        });
    }
    while hi - lo > q.tolerance {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalDuty {
        duty: lo,
        horizon_ns,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_duty_is_always_on() {
        let s = schedule_from_duty(1000, 1.0, 0, 5000).unwrap();
        assert!((0..5000).step_by(7).all(|t| vdd_at(&s, t).unwrap()));
        assert_eq!(s.segments(0, 10), vec![(0, 10, true)]);
    }

    #[test]
    fn seventy_percent_window() {
        let s = schedule_from_duty(1000, 0.7, 0, 3000).unwrap();
        assert!(vdd_at(&s, 0).unwrap());
        assert!(vdd_at(&s, 699).unwrap());
        assert!(!vdd_at(&s, 700).unwrap());
        assert!(!vdd_at(&s, 999).unwrap());
        assert!(vdd_at(&s, 1000).unwrap());
    }

    #[test]
    fn half_duty_reads() {
        let s = schedule_from_duty(200, 0.5, 0, 1000).unwrap();
        assert!(!vdd_at(&s, 150).unwrap());
        let s = schedule_from_duty(100, 0.5, 0, 1000).unwrap();
        assert!(vdd_at(&s, 25).unwrap());
        assert!(!vdd_at(&s, 75).unwrap());
        let s = schedule_from_duty(100, 0.5, 50, 1000).unwrap();
        assert!(!vdd_at(&s, 25).unwrap());
    }

    #[test]
    fn schedule_errors() {
        assert_eq!(schedule_from_duty(100, 0.0, 0, 10), Err(VddError::DutyOutOfRange(0.0)));
        assert_eq!(schedule_from_duty(100, 1.5, 0, 10), Err(VddError::DutyOutOfRange(1.5)));
        assert!(matches!(
            schedule_from_duty(100, 0.04, 0, 10),
            Err(VddError::OnWindowTooShort { on_ns: 4, .. })
        ));
        let s = schedule_from_duty(100, 0.5, 0, 10).unwrap();
        assert!(matches!(vdd_at(&s, 10), Err(VddError::BeyondHorizon { .. })));
    }

    #[test]
    fn segments_split_at_edges() {
        let s = schedule_from_duty(100, 0.25, 0, 1000).unwrap();
        assert_eq!(s.segments(20, 30), vec![(20, 25, true), (25, 30, false)]);
        assert_eq!(s.segments(90, 110), vec![(90, 100, false), (100, 110, true)]);
        assert_eq!(s.sample_step(10), 5);
    }

    fn waveform(c: ControlCircuit, negedges: usize) -> Vec<StateBit> {
        let mut c = c;
        let mut out = Vec::new();
        for _ in 0..negedges {
            c = control_circuit_step(&c, true).0;
            out.push(c.state_bit);
        }
        out
    }

    #[test]
    fn symmetric_counter() {
        use StateBit::{Off, On};
        let w = waveform(ControlCircuit::new(3, 3), 8);
        assert_eq!(w, [On, On, On, Off, Off, Off, Off, On]);
        assert_eq!(ControlCircuit::new(3, 3).duty(), 0.5);
    }

    #[test]
    fn eighty_percent_counter() {
        let w = waveform(ControlCircuit::new(7, 1), 100);
        let on = w.iter().filter(|&&s| s == StateBit::On).count();
        assert_eq!(on, 80);
        assert_eq!(ControlCircuit::new(7, 1).duty(), 0.8);
    }

    #[test]
    fn zero_off_max_stays_on() {
        let w = waveform(ControlCircuit::new(2, 0), 50);
        assert!(w.iter().all(|&s| s == StateBit::On));
    }

    #[test]
    fn posedge_never_changes_state() {
        let c = ControlCircuit {
            count: 3,
            ..ControlCircuit::new(3, 3)
        };
        let (next, gate) = control_circuit_step(&c, false);
        assert_eq!(next, c);
        assert_eq!(gate, PmosGate::Conducting);
    }
}
