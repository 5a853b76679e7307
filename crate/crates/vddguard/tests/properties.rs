use proptest::prelude::*;

use vddguard::aht::{accumulate, leakage_decay, off_redistribute, toggles_to_trigger, Toggles, TriggerParams};
use vddguard::logicsim::{eval_gate, run_with, wrap_outputs, LogicValue, Record, RunOptions, Stimulus};
use vddguard::netlist::{check_topo_order, parse_bench, GateKind, Netlist, NetlistBuilder};
use vddguard::vddctl::{control_circuit_step, ControlCircuit, PmosGate, VddSchedule};

const COMB: [GateKind; 8] = [
    GateKind::And,
    GateKind::Nand,
    GateKind::Or,
    GateKind::Nor,
    GateKind::Xor,
    GateKind::Xnor,
    GateKind::Not,
    GateKind::Buf,
];

fn value() -> impl Strategy<Value = LogicValue> {
    prop_oneof![Just(LogicValue::Zero), Just(LogicValue::One), Just(LogicValue::X)]
}

fn params() -> impl Strategy<Value = TriggerParams> {
    (0.1f64..5.0, 1.0f64..200.0, 0.0f64..100.0, 0.5f64..3.0, 0.01f64..0.99).prop_map(|(cu, cm, cn, vdd, th)| {
        TriggerParams {
            c_unit: cu,
            c_main: cm,
            c_new: cn,
            vdd_volts: vdd,
            v_threshold: th * vdd,
            ..TriggerParams::baseline()
        }
    })
}

/// (inputs, gates as (kind, fan-in picks), output picks). Picks index into
/// the nets defined so far, so the result is acyclic.
type Shape = (usize, Vec<(usize, Vec<usize>)>, Vec<usize>);

fn shape() -> impl Strategy<Value = Shape> {
    (
        1usize..6,
        prop::collection::vec((0usize..COMB.len(), prop::collection::vec(any::<usize>(), 2..4)), 1..30),
        prop::collection::vec(any::<usize>(), 1..4),
    )
}

fn build((inputs, gates, outs): &Shape) -> Netlist {
    let mut b = NetlistBuilder::new("random");
    let mut nets: Vec<String> = (0..*inputs).map(|i| format!("i{i}")).collect();
    for n in &nets {
        b.input(n);
    }
    for (k, (kind, picks)) in gates.iter().enumerate() {
        let kind = COMB[*kind];
        let arity = if matches!(kind, GateKind::Not | GateKind::Buf) { 1 } else { picks.len() };
        let ins: Vec<String> = picks[..arity].iter().map(|p| nets[p % nets.len()].clone()).collect();
        let ins: Vec<&str> = ins.iter().map(String::as_str).collect();
        let name = format!("g{k}");
        b.gate(&name, kind, &ins);
        nets.push(name);
    }
    let mut chosen: Vec<String> = outs.iter().map(|o| format!("g{}", o % gates.len())).collect();
    chosen.sort();
    chosen.dedup();
    for o in &chosen {
        b.output(o);
    }
    b.build().expect("generated netlist is valid")
}

fn quiet() -> RunOptions {
    RunOptions {
        record: Record::Nets(Vec::new()),
        ..RunOptions::default()
    }
}

proptest! {
    #[test]
    fn kleene_monotone(kind in 0usize..COMB.len(), ins in prop::collection::vec(value(), 2..5), mask in prop::collection::vec(any::<bool>(), 5)) {
        let kind = COMB[kind];
        let ins = if matches!(kind, GateKind::Not | GateKind::Buf) { ins[..1].to_vec() } else { ins };
        let coarser: Vec<LogicValue> = ins.iter().zip(&mask).map(|(&v, &m)| if m { LogicValue::X } else { v }).collect();
        prop_assert!(eval_gate(kind, &ins).refines(eval_gate(kind, &coarser)));
    }

    #[test]
    fn mux_holds_on_unknown_select_only_when_inputs_agree(a in value(), b in value()) {
        let out = eval_gate(GateKind::Mux2, &[LogicValue::X, a, b]);
        if a == b { prop_assert_eq!(out, a) } else { prop_assert_eq!(out, LogicValue::X) }
    }

    #[test]
    fn accumulate_bounded_and_monotone(p in params(), v0 in 0.0f64..1.0, k in 0u64..5000) {
        let v0 = v0 * p.vdd_volts;
        let a = accumulate(&p, k, v0);
        let b = accumulate(&p, k + 1, v0);
        prop_assert!(a >= v0 - 1e-12 && a <= p.vdd_volts + 1e-12);
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn toggle_count_is_minimal(p in params(), v0 in 0.0f64..0.5) {
        let v0 = v0 * p.v_threshold;
        if let Toggles::Count(k) = toggles_to_trigger(&p, v0) {
            prop_assert!(accumulate(&p, k, v0) >= p.v_threshold);
            prop_assert!(k == 0 || accumulate(&p, k - 1, v0) < p.v_threshold);
        }
    }

    #[test]
    fn leakage_and_redistribution_only_lower(p in params(), v in 0.0f64..3.0, dt in 0u64..1_000_000) {
        prop_assert!(leakage_decay(&p, v, dt) <= v);
        prop_assert!(off_redistribute(&p, v) <= v);
    }

    #[test]
    fn round_trip_is_a_fixpoint(s in shape()) {
        let n = build(&s);
        let text = n.to_bench();
        let again = parse_bench(&text).unwrap();
        prop_assert_eq!(again.to_bench(), text);
        prop_assert_eq!(again.stats(), n.stats());
    }

    #[test]
    fn topo_order_is_valid(s in shape()) {
        let n = build(&s);
        prop_assert!(check_topo_order(&n, n.topo_order()));
        let mut reversed = n.topo_order().to_vec();
        reversed.reverse();
        let chained = n.gates().iter().any(|g| g.inputs.iter().any(|&i| !n.inputs().contains(&i)));
        if chained {
            prop_assert!(!check_topo_order(&n, &reversed));
        }
    }

    #[test]
    fn simulation_is_deterministic(s in shape(), seed in any::<u64>(), duty in 0.5f64..1.0) {
        let n = wrap_outputs(&build(&s)).unwrap();
        let stim = Stimulus::random(n.inputs().len(), 50, seed, 10).unwrap();
        let sched = VddSchedule::new(100, duty, 0, 1_000, 10).unwrap();
        let a = run_with(&n, &stim, &sched, &[], 1_000, &RunOptions::default()).unwrap();
        let b = run_with(&n, &stim, &sched, &[], 1_000, &RunOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn wrapped_outputs_match_golden(s in shape(), seed in any::<u64>(), duty in 0.3f64..1.0, period in 2u64..20) {
        let golden = build(&s);
        let wrapped = wrap_outputs(&golden).unwrap();
        let stim = Stimulus::random(golden.inputs().len(), 40, seed, 10).unwrap();
        let sched = VddSchedule::new(period * 10, duty, 0, 4_000, 10);
        prop_assume!(sched.is_ok());
        let sched = sched.unwrap();
        let t = run_with(&wrapped, &stim, &sched, &[], 4_000, &quiet()).unwrap();
        let g = run_with(&golden, &stim, &VddSchedule::always_on(4_000), &[], 4_000, &quiet()).unwrap();
        prop_assert!(!t.observations.is_empty());
        for (a, b) in t.observations.iter().zip(&g.observations) {
            prop_assert_eq!(a.logical, b.logical);
            prop_assert_eq!(&a.values, &b.values);
        }
    }

    #[test]
    fn controller_matches_its_schedule(on in 1u32..8, off in 1u32..8) {
        let clock = 10u64;
        let c = ControlCircuit::new(on, off);
        let horizon = 40 * clock;
        let sched = c.equivalent_schedule(clock, horizon).unwrap();
        let mut state = c;
        for cycle in 0..40u64 {
            // Sample each half of the clock cycle around the negative edge.
            prop_assert_eq!(state.pmos() == PmosGate::Conducting, sched.is_on(cycle * clock));
            state = control_circuit_step(&state, true).0;
            prop_assert_eq!(state.pmos() == PmosGate::Conducting, sched.is_on(cycle * clock + clock / 2));
        }
        prop_assert!((sched.duty() - c.duty()).abs() < 1e-12);
    }
}
