//! Ready-made half-adder experiments.
//!
//! The victim is the sum output `S`, the payload the carry `C`. Toggling
//! `A` every cycle with `B = 0` makes `S` toggle every cycle; holding
//! `A = 1` keeps `S` high.

use crate::aht::{accumulate, toggles_to_trigger, AhtInstance, PayloadKind, Toggles, TriggerParams};
use crate::benchmarks;
use crate::logicsim::{run_with, LogicValue, RunOptions, SimError, Stimulus, Trace};
use crate::netlist::{parse_bench_named, Netlist};
use crate::vddctl::VddSchedule;
use crate::DEFAULT_CLOCK_NS;

/// VDD is cut at this time in the power-cut experiments.
pub const CUT_NS: u64 = 700;
/// VDD returns at this time.
pub const RESTORE_NS: u64 = 800;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub netlist: Netlist,
    pub stimulus: Stimulus,
    pub schedule: VddSchedule,
    pub ahts: Vec<AhtInstance>,
    pub horizon_ns: u64,
}

impl Scenario {
    pub fn run(&self) -> Result<Trace, SimError> {
        self.run_with(&RunOptions::default())
    }

    pub fn run_with(&self, opts: &RunOptions) -> Result<Trace, SimError> {
        run_with(
            &self.netlist,
            &self.stimulus,
            &self.schedule,
            &self.ahts,
            self.horizon_ns,
            opts,
        )
    }
}

fn half_adder() -> Netlist {
    parse_bench_named("half_adder", benchmarks::HALF_ADDER).expect("bundled netlist")
}

fn alternating() -> Stimulus {
    let z = LogicValue::Zero;
    let o = LogicValue::One;
    Stimulus::new(vec![vec![z, z], vec![o, z]], DEFAULT_CLOCK_NS).expect("fixed stimulus")
}

fn trigger(n: &Netlist, p: &TriggerParams, v_init: f64) -> AhtInstance {
    AhtInstance::attach(n, "S", "C", PayloadKind::XorFlip, p.clone())
        .expect("half adder nets")
        .with_v_init(v_init)
}

/// Victim toggling every cycle from 10 ns, full duty, empty capacitor.
pub fn toggling_victim(p: &TriggerParams, horizon_ns: u64) -> Scenario {
    let n = half_adder();
    let a = trigger(&n, p, 0.0);
    Scenario {
        stimulus: alternating(),
        schedule: VddSchedule::always_on(horizon_ns),
        ahts: vec![a],
        horizon_ns,
        netlist: n,
    }
}

/// Initial voltage that leaves the capacitor one toggle short of the
/// threshold at `cut_ns` when the victim toggles every cycle from the
/// second cycle on. Leakage is ignored.
pub fn precharge_for_cut(p: &TriggerParams, cut_ns: u64, clock_ns: u64) -> f64 {
    let before_cut = (cut_ns / clock_ns).saturating_sub(1);
    match toggles_to_trigger(p, 0.0) {
        Toggles::Count(k) => accumulate(p, k.saturating_sub(1 + before_cut), 0.0),
        Toggles::Never => 0.0,
    }
}

/// The 800 ns-period, 0.875-duty schedule: off over `[700, 800)`.
fn cut_schedule(horizon_ns: u64) -> VddSchedule {
    VddSchedule::new(RESTORE_NS, 0.875, 0, horizon_ns, DEFAULT_CLOCK_NS).expect("fixed schedule")
}

/// Pre-charged trigger, toggling victim, VDD off over `[700, 800)`, run to
/// 1 µs.
pub fn test_case_1(p: &TriggerParams) -> Scenario {
    let n = half_adder();
    let a = trigger(&n, p, precharge_for_cut(p, CUT_NS, DEFAULT_CLOCK_NS));
    Scenario {
        stimulus: alternating(),
        schedule: cut_schedule(1_000),
        ahts: vec![a],
        horizon_ns: 1_000,
        netlist: n,
    }
}

/// Same pre-charge and schedule, but the victim is held high, run to 5 µs.
pub fn test_case_2(p: &TriggerParams) -> Scenario {
    let n = half_adder();
    let a = trigger(&n, p, precharge_for_cut(p, CUT_NS, DEFAULT_CLOCK_NS));
    let high = Stimulus::new(vec![vec![LogicValue::One, LogicValue::Zero]], DEFAULT_CLOCK_NS).expect("fixed stimulus");
    Scenario {
        stimulus: high,
        schedule: cut_schedule(5_000),
        ahts: vec![a],
        horizon_ns: 5_000,
        netlist: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_fires_after_77_toggles() {
        let t = toggling_victim(&TriggerParams::baseline(), 1_000).run().unwrap();
        assert_eq!(t.trigger_events[0].time_ns, 770);
    }

    #[test]
    fn cut_then_restore() {
        let t = test_case_1(&TriggerParams::baseline()).run().unwrap();
        let times: Vec<u64> = t.trigger_events.iter().map(|e| e.time_ns).collect();
        assert_eq!(times, [800]);
        let t = test_case_1(&TriggerParams::fortified()).run().unwrap();
        assert!(t.trigger_events.is_empty());
    }

    #[test]
    fn held_victim_never_fires() {
        let t = test_case_2(&TriggerParams::baseline()).run().unwrap();
        assert!(t.trigger_events.is_empty());
    }
}
