//! Pre-market screening: functional test against a golden model, power
//! profile spike detection and coarse-to-fine duty calibration.
//!
//! A duty passes when every saved output matches the full-duty golden run at
//! every SEL-valid cycle and the instrumented power profile shows no spike.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aht::{toggles_to_trigger, AhtError, Instrumented, Toggles};
use crate::logicsim::{eval_cycle, init_state, run_with, InitPolicy, LogicValue, Record, RunOptions, SimError, Stimulus, Trace, ZonePower};
use crate::netlist::Netlist;
use crate::vddctl::{VddError, VddSchedule};

pub const DEFAULT_SPIKE_FACTOR: f64 = 6.0;
pub const DEFAULT_BASELINE_CYCLES: usize = 64;
/// Shortest baseline window [`detect_spike`] accepts.
pub const MIN_BASELINE_CYCLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PremarketError {
    #[error("baseline window has {found} cycles, need at least {MIN_BASELINE_CYCLES}")]
    BaselineTooShort { found: usize },
    #[error("interface mismatch: {0}")]
    Interface(String),
    #[error("invalid calibration config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Vdd(#[from] VddError),
    #[error(transparent)]
    Aht(#[from] AhtError),
}

/// Toggle count of every simulated clock cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub per_cycle_toggles: Vec<u64>,
    pub cycles: usize,
    /// Statistics over cycles `1..=DEFAULT_BASELINE_CYCLES`, clipped to the
    /// profile. Cycle 0 carries the power-up transient and is skipped.
    pub mean: f64,
    pub stddev: f64,
}

impl PowerProfile {
    pub fn new(per_cycle_toggles: Vec<u64>) -> Self {
        let (mean, stddev) = window_stats(&per_cycle_toggles, DEFAULT_BASELINE_CYCLES);
        PowerProfile {
            cycles: per_cycle_toggles.len(),
            per_cycle_toggles,
            mean,
            stddev,
        }
    }

    /// Number of cycles in the baseline window of length `len`.
    pub fn window_len(&self, len: usize) -> usize {
        self.cycles.saturating_sub(1).min(len)
    }
}

fn window_stats(p: &[u64], len: usize) -> (f64, f64) {
    let w: Vec<f64> = p.iter().skip(1).take(len).map(|&x| x as f64).collect();
    if w.is_empty() {
        return (0.0, 0.0);
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / w.len() as f64;
    (mean, var.sqrt())
}

pub fn power_profile(t: &Trace) -> PowerProfile {
    PowerProfile::new(t.cycles.iter().map(|c| c.toggles).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeConfig {
    pub spike_factor: f64,
    pub baseline_cycles: usize,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig {
            spike_factor: DEFAULT_SPIKE_FACTOR,
            baseline_cycles: DEFAULT_BASELINE_CYCLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeReport {
    /// Cycles (or residuals, in golden mode) above this value are flagged.
    pub threshold: f64,
    pub flagged: Vec<usize>,
}

impl SpikeReport {
    pub fn is_clear(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Golden-free when `golden` is `None`: flag cycles whose toggle count
/// exceeds mean + k·σ of the profile's own baseline window. With a golden
/// profile: flag cycles where `p − golden` exceeds k·σ of the golden window.
pub fn detect_spike(
    p: &PowerProfile,
    cfg: &SpikeConfig,
    golden: Option<&PowerProfile>,
) -> Result<SpikeReport, PremarketError> {
    let reference = golden.unwrap_or(p);
    let found = reference.window_len(cfg.baseline_cycles);
    if found < MIN_BASELINE_CYCLES || cfg.baseline_cycles < MIN_BASELINE_CYCLES {
        return Err(PremarketError::BaselineTooShort {
            found: found.min(cfg.baseline_cycles),
        });
    }
    let (mean, sd) = window_stats(&reference.per_cycle_toggles, cfg.baseline_cycles);
    let report = match golden {
        None => {
            let threshold = mean + cfg.spike_factor * sd;
            let flagged = p
                .per_cycle_toggles
                .iter()
                .enumerate()
                .skip(1)
                .filter(|&(_, &x)| x as f64 > threshold)
                .map(|(i, _)| i)
                .collect();
            SpikeReport { threshold, flagged }
        }
        Some(g) => {
            let threshold = cfg.spike_factor * sd;
            let flagged = p
                .per_cycle_toggles
                .iter()
                .zip(&g.per_cycle_toggles)
                .enumerate()
                .skip(1)
                .filter(|&(_, (&x, &y))| x as f64 - y as f64 > threshold)
                .map(|(i, _)| i)
                .collect();
            SpikeReport { threshold, flagged }
        }
    };
    Ok(report)
}

/// First saved output that disagrees with the golden run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    /// Simulated clock cycle.
    pub cycle: usize,
    /// Index of the SEL-valid cycle, i.e. of the stimulus vector.
    pub logical: usize,
    pub time_ns: u64,
    pub net: String,
    pub expected: LogicValue,
    pub found: LogicValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub passed: bool,
    pub mismatch: Option<Mismatch>,
    pub spike_cycles: Vec<usize>,
    /// Start of the earliest failing cycle, mismatch or spike.
    pub first_failure_ns: Option<u64>,
    pub trigger_events: usize,
    pub valid_cycles: usize,
}

/// Output names with each saved copy replaced by the net it holds.
fn logical_outputs(n: &Netlist) -> Vec<String> {
    let copies = n.saved_copies();
    n.outputs()
        .iter()
        .map(|&o| {
            let id = copies.iter().find(|&&(_, q)| q == o).map_or(o, |&(orig, _)| orig);
            n.net_name(id).to_string()
        })
        .collect()
}

fn check_interface(a: &Netlist, b: &Netlist) -> Result<(), PremarketError> {
    let ins = |n: &Netlist| n.inputs().iter().map(|&i| n.net_name(i).to_string()).collect::<Vec<_>>();
    if ins(a) != ins(b) {
        return Err(PremarketError::Interface(format!(
            "inputs [{}] vs [{}]",
            ins(a).join(", "),
            ins(b).join(", ")
        )));
    }
    let (oa, ob) = (logical_outputs(a), logical_outputs(b));
    if oa != ob {
        return Err(PremarketError::Interface(format!(
            "outputs [{}] vs [{}]",
            oa.join(", "),
            ob.join(", ")
        )));
    }
    Ok(())
}

fn quiet() -> RunOptions {
    RunOptions {
        record: Record::Nets(Vec::new()),
        ..RunOptions::default()
    }
}

/// Run the instrumented design under `sched` and the golden design at full
/// duty over the same vectors, then compare the saved outputs at every
/// SEL-valid cycle. The horizon is that of `sched`.
pub fn functional_test(
    instr: &Instrumented,
    golden: &Netlist,
    s: &Stimulus,
    sched: &VddSchedule,
    spike: &SpikeConfig,
) -> Result<TestOutcome, PremarketError> {
    check_interface(&instr.netlist, golden)?;
    let horizon = sched.horizon_ns();
    let trace = run_with(&instr.netlist, s, sched, &instr.ahts, horizon, &quiet())?;
    let valid = trace.observations.len();
    let clock = s.clock_period_ns();

    let mut mismatch = None;
    if valid > 0 {
        let g_horizon = valid as u64 * clock;
        let g = run_with(golden, s, &VddSchedule::always_on(g_horizon), &[], g_horizon, &quiet())?;
        let names = logical_outputs(&instr.netlist);
        'outer: for (obs, gobs) in trace.observations.iter().zip(&g.observations) {
            for (k, (&found, &expected)) in obs.values.iter().zip(&gobs.values).enumerate() {
                if found != expected {
                    mismatch = Some(Mismatch {
                        cycle: obs.cycle,
                        logical: obs.logical,
                        time_ns: trace.cycles[obs.cycle].start_ns,
                        net: names[k].clone(),
                        expected,
                        found,
                    });
                    break 'outer;
                }
            }
        }
    }

    let report = detect_spike(&power_profile(&trace), spike, None)?;
    let spike_ns = report.flagged.first().map(|&c| trace.cycles[c].start_ns);
    let first_failure_ns = match (mismatch.as_ref().map(|m| m.time_ns), spike_ns) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    Ok(TestOutcome {
        passed: mismatch.is_none() && report.is_clear(),
        mismatch,
        spike_cycles: report.flagged,
        first_failure_ns,
        trigger_events: trace.trigger_events.len(),
        valid_cycles: valid,
    })
}

/// Two input vectors that give the first trigger's victim different settled
/// values, searched over all-zero plus single-bit flips, then seeded random
/// pairs. `None` without triggers or when no pair is found.
pub fn directed_pattern(instr: &Instrumented, seed: u64) -> Result<Option<[Vec<LogicValue>; 2]>, PremarketError> {
    let Some(a) = instr.ahts.first() else {
        return Ok(None);
    };
    let n = &instr.netlist;
    let width = n.inputs().len();
    let state = init_state(n, &InitPolicy::AllZero)?;
    let victim_of = |v: &[LogicValue]| -> Result<LogicValue, PremarketError> {
        Ok(eval_cycle(n, &state, v, ZonePower::ALL_ON)?.net_values[a.victim_net])
    };
    let zero = vec![LogicValue::Zero; width];
    let base = victim_of(&zero)?;
    for i in 0..width {
        let mut w = zero.clone();
        w[i] = LogicValue::One;
        let v = victim_of(&w)?;
        if v.is_known() && base.is_known() && v != base {
            return Ok(Some([zero, w]));
        }
    }
    let pool = Stimulus::random(width, 512, seed, 1)?;
    for pair in pool.vectors().chunks_exact(2) {
        let (x, y) = (victim_of(&pair[0])?, victim_of(&pair[1])?);
        if x.is_known() && y.is_known() && x != y {
            return Ok(Some([pair[0].clone(), pair[1].clone()]));
        }
    }
    Ok(None)
}

/// Test stimulus: `random_vectors` seeded random vectors followed by
/// `directed_vectors` alternations of the directed pattern. Without a
/// directed pattern the random part is used alone.
pub fn default_test_stimulus(
    instr: &Instrumented,
    seed: u64,
    random_vectors: usize,
    directed_vectors: usize,
    clock_ns: u64,
) -> Result<Stimulus, PremarketError> {
    let width = instr.netlist.inputs().len();
    let directed = match directed_pattern(instr, seed)? {
        Some([u, w]) if directed_vectors > 0 => Some(Stimulus::new(
            (0..directed_vectors)
                .map(|i| if i % 2 == 0 { w.clone() } else { u.clone() })
                .collect(),
            clock_ns,
        )?),
        _ => None,
    };
    match directed {
        Some(d) if random_vectors == 0 => Ok(d),
        Some(d) => Ok(Stimulus::random(width, random_vectors, seed, clock_ns)?.then(&d)?),
        None => Ok(Stimulus::random(width, random_vectors.max(1), seed, clock_ns)?),
    }
}

/// Stall-cycle fraction of a duty.
pub fn performance_penalty(duty: f64) -> f64 {
    1.0 - duty
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub coarse_step: f64,
    pub fine_step: f64,
    pub min_duty: f64,
    pub spike: SpikeConfig,
    /// Horizon as a multiple of the full-duty trigger-time bound.
    pub horizon_multiplier: u64,
    pub period_ns: u64,
    pub phase_ns: u64,
    pub clock_ns: u64,
    pub seed: u64,
    pub random_vectors: usize,
    /// Overrides the default random plus directed stimulus.
    pub vectors: Option<Stimulus>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            coarse_step: 0.10,
            fine_step: 0.05,
            min_duty: 0.50,
            spike: SpikeConfig::default(),
            horizon_multiplier: 10,
            period_ns: 1000,
            phase_ns: 0,
            clock_ns: crate::DEFAULT_CLOCK_NS,
            seed: 1,
            random_vectors: 256,
            vectors: None,
        }
    }
}

/// Duties are handled as integer multiples of the fine step.
struct Grid {
    full: u64,
    coarse: u64,
    min: u64,
}

impl Grid {
    fn duty(&self, k: u64) -> f64 {
        k as f64 / self.full as f64
    }
}

fn near_int(x: f64) -> Option<u64> {
    let r = x.round();
    ((x - r).abs() < 1e-9 && r >= 1.0).then_some(r as u64)
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), PremarketError> {
        self.grid().map(|_| ())
    }

    fn grid(&self) -> Result<Grid, PremarketError> {
        let bad = |m: &str| Err(PremarketError::Config(m.to_string()));
        if !(self.fine_step > 0.0 && self.fine_step <= self.coarse_step && self.coarse_step < 1.0) {
            return bad("need 0 < fine_step <= coarse_step < 1");
        }
        if !(self.min_duty > 0.0 && self.min_duty < 1.0) {
            return bad("min_duty must lie in (0, 1)");
        }
        if self.spike.baseline_cycles < MIN_BASELINE_CYCLES || !(self.spike.spike_factor >= 0.0) {
            return bad("spike baseline must be at least 10 cycles with a nonnegative factor");
        }
        if self.horizon_multiplier == 0 || self.period_ns == 0 || self.clock_ns == 0 {
            return bad("horizon_multiplier, period_ns and clock_ns must be positive");
        }
        let Some(full) = near_int(1.0 / self.fine_step) else {
            return bad("1 must be a multiple of fine_step");
        };
        let Some(coarse) = near_int(self.coarse_step / self.fine_step) else {
            return bad("coarse_step must be a multiple of fine_step");
        };
        let m = self.min_duty / self.fine_step;
        let min = if (m - m.round()).abs() < 1e-9 { m.round() } else { m.ceil() } as u64;
        Ok(Grid {
            full,
            coarse,
            min: min.max(1),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Clean,
    TrojanMitigated,
    Unusable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub duty: f64,
    pub passed: bool,
    pub first_failure_ns: Option<u64>,
    pub spike: bool,
    pub mismatch: Option<Mismatch>,
    pub trigger_events: usize,
    pub horizon_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub verdict: Verdict,
    pub chosen_duty: Option<f64>,
    pub performance_penalty: Option<f64>,
    /// In the order the duties were tested.
    pub evidence: Vec<Evidence>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per tested duty, sorted by duty.
    pub fn table(&self) -> String {
        let mut rows = self.evidence.clone();
        rows.sort_by(|a, b| b.duty.total_cmp(&a.duty));
        let mut out = format!("{:>6}  {:<6}  {:>16}  {:<5}\n", "duty", "result", "first_failure_ns", "spike");
        for e in rows {
            out.push_str(&format!(
                "{:>6.2}  {:<6}  {:>16}  {:<5}\n",
                e.duty,
                if e.passed { "pass" } else { "fail" },
                e.first_failure_ns.map_or("-".to_string(), |t| t.to_string()),
                e.spike
            ));
        }
        let verdict = serde_json::to_value(self.verdict).expect("verdict serializes");
        out.push_str(&format!("verdict: {}\n", verdict.as_str().unwrap_or_default()));
        if let (Some(d), Some(p)) = (self.chosen_duty, self.performance_penalty) {
            out.push_str(&format!("chosen duty: {d:.2}  performance penalty: {p:.2}\n"));
        }
        out
    }
}

/// Full-duty trigger time bound over all triggers, in clock cycles.
fn trigger_bound_cycles(instr: &Instrumented) -> Option<u64> {
    instr
        .ahts
        .iter()
        .filter_map(|a| match toggles_to_trigger(&a.params, a.state.v_cap) {
            Toggles::Count(k) => Some(k.max(1)),
            Toggles::Never => None,
        })
        .max()
}

/// Screen at full duty, then search downward for a passing duty and refine
/// it upward on the fine grid.
pub fn calibrate(
    instr: &Instrumented,
    golden: &Netlist,
    cfg: &CalibrationConfig,
) -> Result<CalibrationReport, PremarketError> {
    let grid = cfg.grid()?;
    check_interface(&instr.netlist, golden)?;
    let bound = trigger_bound_cycles(instr);
    let stim = match &cfg.vectors {
        Some(s) => s.clone(),
        None => {
            let directed = bound.map_or(0, |b| (cfg.horizon_multiplier * b) as usize);
            default_test_stimulus(instr, cfg.seed, cfg.random_vectors, directed, cfg.clock_ns)?
        }
    };
    let clock = stim.clock_period_ns();
    let len = stim.len() as u64;

    let mut evidence = Vec::new();
    let mut test = |k: u64| -> Result<bool, PremarketError> {
        let duty = grid.duty(k);
        let by_bound = bound.map_or(0, |b| cfg.horizon_multiplier * b * clock);
        let by_len = ((len * clock) as f64 / duty).ceil() as u64 + cfg.period_ns;
        let horizon = by_bound.max(by_len).div_ceil(clock) * clock;
        let sched = VddSchedule::new(cfg.period_ns, duty, cfg.phase_ns, horizon, clock)?;
        let out = functional_test(instr, golden, &stim, &sched, &cfg.spike)?;
        evidence.push(Evidence {
            duty,
            passed: out.passed,
            first_failure_ns: out.first_failure_ns,
            spike: !out.spike_cycles.is_empty(),
            mismatch: out.mismatch,
            trigger_events: out.trigger_events,
            horizon_ns: horizon,
        });
        Ok(out.passed)
    };

    if test(grid.full)? {
        return Ok(CalibrationReport {
            verdict: Verdict::Clean,
            chosen_duty: Some(1.0),
            performance_penalty: Some(0.0),
            evidence,
        });
    }
    let mut passing = None;
    let mut k = grid.full.saturating_sub(grid.coarse);
    while k >= grid.min && k > 0 {
        if test(k)? {
            passing = Some(k);
            break;
        }
        k = match k.checked_sub(grid.coarse) {
            Some(next) => next,
            None => break,
        };
    }
    let Some(mut best) = passing else {
        return Ok(CalibrationReport {
            verdict: Verdict::Unusable,
            chosen_duty: None,
            performance_penalty: None,
            evidence,
        });
    };
    for up in best + 1..(best + grid.coarse).min(grid.full) {
        if !test(up)? {
            break;
        }
        best = up;
    }
    let duty = grid.duty(best);
    Ok(CalibrationReport {
        verdict: Verdict::TrojanMitigated,
        chosen_duty: Some(duty),
        performance_penalty: Some(grid.duty(grid.full - best)),
        evidence,
    })
}
