use vddguard::aht::{inject_aht, AhtInstance, Instrumented, PayloadKind, TriggerParams};
use vddguard::benchmarks;
use vddguard::logicsim::{init_state, run_with, wrap_outputs, InitPolicy, LogicValue, Record, RunOptions, Stimulus};
use vddguard::netlist::Netlist;
use vddguard::premarket::{default_test_stimulus, functional_test, power_profile, SpikeConfig};
use vddguard::vddctl::{critical_duty, VddSchedule};

fn wrapped(name: &str) -> Netlist {
    wrap_outputs(&benchmarks::load(name).unwrap().unwrap()).unwrap()
}

fn changed(a: LogicValue, b: LogicValue) -> bool {
    a.is_known() && b.is_known() && a != b
}

#[test]
fn profile_matches_recount_from_trace() {
    let n = wrapped("c432");
    let s = Stimulus::random(n.inputs().len(), 300, 11, 10).unwrap();
    let opts = RunOptions {
        record: Record::All,
        sample_ns: Some(10),
        ..RunOptions::default()
    };
    let t = run_with(&n, &s, &VddSchedule::always_on(3_000), &[], 3_000, &opts).unwrap();
    let profile = power_profile(&t);

    let mut prev = init_state(&n, &InitPolicy::AllZero).unwrap().net_values;
    let mut recount = Vec::new();
    for i in 0..t.sample_count() {
        let now: Vec<LogicValue> = t.signals.iter().map(|sig| sig.values[i]).collect();
        let net_of = |k: usize| n.net_id(&t.signals[k].name).unwrap();
        recount.push((0..now.len()).filter(|&k| changed(prev[net_of(k)], now[k])).count() as u64);
        for (k, v) in now.iter().enumerate() {
            prev[net_of(k)] = *v;
        }
    }
    assert_eq!(profile.per_cycle_toggles, recount);
    assert!(profile.per_cycle_toggles.iter().skip(1).all(|&x| x > 0));
}

#[test]
fn constant_inputs_are_quiet_after_the_first_cycle() {
    let n = wrapped("c17");
    let s = Stimulus::from_bits(&["10110"], 10).unwrap();
    let t = run_with(&n, &s, &VddSchedule::always_on(500), &[], 500, &RunOptions::default()).unwrap();
    let p = power_profile(&t);
    assert!(p.per_cycle_toggles[2..].iter().all(|&x| x == 0), "{:?}", p.per_cycle_toggles);
}

fn half_adder_trojan(p: TriggerParams) -> (Instrumented, Netlist) {
    let n = wrapped("half_adder");
    let a = AhtInstance::attach(&n, "S", "C", PayloadKind::XorFlip, p).unwrap();
    (inject_aht(&n, a).unwrap(), n)
}

#[test]
fn golden_passes_against_itself_at_any_duty() {
    let n = wrapped("c432");
    let s = Stimulus::random(n.inputs().len(), 500, 5, 10).unwrap();
    for duty in [1.0, 0.8, 0.5] {
        let sched = VddSchedule::new(1_000, duty, 0, 12_000, 10).unwrap();
        let out = functional_test(&Instrumented::golden(n.clone()), &n, &s, &sched, &SpikeConfig::default()).unwrap();
        assert!(out.passed, "duty {duty}: {out:?}");
    }
}

#[test]
fn baseline_fails_at_or_after_trigger_time() {
    let (instr, golden) = half_adder_trojan(TriggerParams::baseline());
    let s = default_test_stimulus(&instr, 1, 0, 2, 10).unwrap();
    let run = run_with(&instr.netlist, &s, &VddSchedule::always_on(3_000), &instr.ahts, 3_000, &RunOptions::default()).unwrap();
    let fired_at = run.trigger_events[0].time_ns;
    let out = functional_test(&instr, &golden, &s, &VddSchedule::always_on(3_000), &SpikeConfig::default()).unwrap();
    assert!(!out.passed);
    assert!(out.first_failure_ns.unwrap() >= fired_at);
    assert_eq!(fired_at, 770);
}

#[test]
fn fortified_below_critical_duty_passes() {
    let p = TriggerParams::fortified();
    let crit = critical_duty(&p, 10, 1_000, 1e-3).unwrap();
    let (instr, golden) = half_adder_trojan(p);
    let s = default_test_stimulus(&instr, 1, 64, 2_000, 10).unwrap();
    let below = ((crit - 0.02) * 100.0).floor() / 100.0;
    let horizon = 40_000;
    let sched = VddSchedule::new(1_000, below, 0, horizon, 10).unwrap();
    let out = functional_test(&instr, &golden, &s, &sched, &SpikeConfig::default()).unwrap();
    assert!(out.passed, "duty {below}: {out:?}");
    assert_eq!(out.trigger_events, 0);
    let above = ((crit + 0.02) * 100.0).ceil() / 100.0;
    let sched = VddSchedule::new(1_000, above, 0, horizon, 10).unwrap();
    let out = functional_test(&instr, &golden, &s, &sched, &SpikeConfig::default()).unwrap();
    assert!(!out.passed, "duty {above}");
}
