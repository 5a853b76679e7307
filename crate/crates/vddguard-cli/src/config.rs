//! TOML run configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use vddguard::aht::{accumulate, AhtInstance, Instrumented, PayloadKind, TriggerParams};
use vddguard::logicsim::{hold_flip_flops, wrap_outputs, Stimulus};
use vddguard::netlist::{parse_bench_named, Netlist};
use vddguard::overhead::CellAreaModel;
use vddguard::premarket::{CalibrationConfig, SpikeConfig};
use vddguard::scenario::precharge_for_cut;
use vddguard::vddctl::VddSchedule;
use vddguard::{benchmarks, DEFAULT_CLOCK_NS};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Path to a `.bench` file, relative to the config file, or
    /// `builtin:<name>`.
    pub netlist: String,
    #[serde(default)]
    pub wrap_outputs: bool,
    #[serde(default)]
    pub hold_flip_flops: bool,
    #[serde(default)]
    pub stimulus: StimulusConfig,
    #[serde(default, rename = "aht")]
    pub ahts: Vec<AhtConfig>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub calibration: CalibrationToml,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusConfig {
    pub clock_ns: Option<u64>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    /// Bit strings, one per cycle, in input declaration order.
    pub vectors: Option<Vec<String>>,
    /// File of bit strings, one per line. `#` starts a comment.
    pub file: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AhtConfig {
    pub victim: String,
    pub payload: String,
    pub payload_kind: Option<String>,
    /// `baseline` (default) or `fortified`.
    pub preset: Option<String>,
    pub c_unit: Option<f64>,
    pub c_main: Option<f64>,
    pub c_new: Option<f64>,
    pub vdd_volts: Option<f64>,
    pub v_threshold: Option<f64>,
    pub retention_ns: Option<f64>,
    pub leak_tau_ns: Option<f64>,
    pub detector_gated_by_vdd: Option<bool>,
    pub v_init: Option<f64>,
    /// Start the capacitor at the voltage this many toggles would reach.
    pub precharge_toggles: Option<u64>,
    /// Start one toggle short of firing at this time, assuming the victim
    /// toggles every cycle from the second cycle on.
    pub precharge_cut_ns: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub period_ns: Option<u64>,
    pub duty: Option<f64>,
    pub phase_ns: Option<u64>,
    pub horizon_ns: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationToml {
    pub coarse_step: Option<f64>,
    pub fine_step: Option<f64>,
    pub min_duty: Option<f64>,
    pub spike_factor: Option<f64>,
    pub baseline_cycles: Option<usize>,
    pub horizon_multiplier: Option<u64>,
    pub period_ns: Option<u64>,
    pub phase_ns: Option<u64>,
    pub seed: Option<u64>,
    pub random_vectors: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub duty: Option<f64>,
    pub period_ns: Option<u64>,
    pub horizon_ns: Option<u64>,
    pub victim: Option<String>,
    pub payload: Option<String>,
    pub fortified: bool,
    pub min_duty: Option<f64>,
    pub coarse_step: Option<f64>,
    pub fine_step: Option<f64>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| config_err(format!("{}: {}", path.display(), e.message())))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(config_err(format!(
            "schema_version {} is not supported, expected {SCHEMA_VERSION}",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

/// Load `source`, either `builtin:<name>` or a path relative to `base`.
pub fn load_netlist(source: &str, base: &Path) -> Result<Netlist, CliError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        let n = benchmarks::load(name)
            .ok_or_else(|| config_err(format!("no bundled netlist `{name}` (have {})", benchmarks::NAMES.join(", "))))?;
        return n.map_err(|e| CliError::Parse(format!("{name}: {e}")));
    }
    let path = base.join(source);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("top");
    parse_bench_named(name, &text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// A configuration resolved against its directory and the overrides.
pub struct Resolved {
    pub golden: Netlist,
    pub instrumented: Instrumented,
    pub stimulus: Option<Stimulus>,
    pub clock_ns: u64,
    pub cfg: RunConfig,
    pub overrides: Overrides,
    pub base: PathBuf,
}

fn parse_vectors(rows: &[String], clock_ns: u64) -> Result<Stimulus, CliError> {
    Stimulus::from_bits(rows, clock_ns).map_err(|e| config_err(format!("stimulus: {e}")))
}

fn trigger_params(a: &AhtConfig, fortified: bool) -> Result<TriggerParams, CliError> {
    let mut p = match (a.preset.as_deref(), fortified) {
        (Some("fortified"), _) | (None, true) => TriggerParams::fortified(),
        (Some("baseline"), false) | (None, false) => TriggerParams::baseline(),
        (Some("baseline"), true) => TriggerParams::fortified(),
        (Some(other), _) => return Err(config_err(format!("unknown trigger preset `{other}`"))),
    };
    let set = |field: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *field = v;
        }
    };
    set(&mut p.c_unit, a.c_unit);
    set(&mut p.c_main, a.c_main);
    set(&mut p.c_new, a.c_new);
    set(&mut p.vdd_volts, a.vdd_volts);
    set(&mut p.v_threshold, a.v_threshold);
    set(&mut p.retention_ns, a.retention_ns);
    set(&mut p.leak_tau_ns, a.leak_tau_ns);
    if let Some(g) = a.detector_gated_by_vdd {
        p.detector_gated_by_vdd = g;
    }
    p.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(p)
}

pub fn resolve(cfg: RunConfig, base: &Path, ov: Overrides) -> Result<Resolved, CliError> {
    let mut n = load_netlist(&cfg.netlist, base)?;
    if cfg.hold_flip_flops {
        n = hold_flip_flops(&n).map_err(|e| config_err(e.to_string()))?;
    }
    if cfg.wrap_outputs {
        n = wrap_outputs(&n).map_err(|e| config_err(e.to_string()))?;
    }

    let mut ahts = cfg.ahts.clone();
    match (&ov.victim, &ov.payload, ahts.first_mut()) {
        (None, None, _) => {}
        (v, p, Some(first)) => {
            if let Some(v) = v {
                first.victim = v.clone();
            }
            if let Some(p) = p {
                first.payload = p.clone();
            }
        }
        (Some(v), Some(p), None) => ahts.push(AhtConfig {
            victim: v.clone(),
            payload: p.clone(),
            payload_kind: None,
            preset: None,
            c_unit: None,
            c_main: None,
            c_new: None,
            vdd_volts: None,
            v_threshold: None,
            retention_ns: None,
            leak_tau_ns: None,
            detector_gated_by_vdd: None,
            v_init: None,
            precharge_toggles: None,
            precharge_cut_ns: None,
        }),
        _ => return Err(config_err("--victim and --payload must be given together when the config has no trigger")),
    }

    let clock_ns = cfg.stimulus.clock_ns.unwrap_or(DEFAULT_CLOCK_NS);
    let mut instrumented = Instrumented::golden(n.clone());
    for (i, a) in ahts.iter().enumerate() {
        let p = trigger_params(a, ov.fortified)?;
        let kind_name = a.payload_kind.as_deref().unwrap_or("xor_flip");
        let kind = PayloadKind::from_name(kind_name)
            .ok_or_else(|| config_err(format!("aht {i}: unknown payload_kind `{kind_name}`")))?;
        let v_init = match (a.v_init, a.precharge_toggles, a.precharge_cut_ns) {
            (Some(v), None, None) => v,
            (None, Some(k), None) => accumulate(&p, k, 0.0),
            (None, None, Some(t)) => precharge_for_cut(&p, t, clock_ns),
            (None, None, None) => 0.0,
            _ => {
                return Err(config_err(format!(
                    "aht {i}: give at most one of v_init, precharge_toggles and precharge_cut_ns"
                )))
            }
        };
        let inst = AhtInstance::attach(&n, &a.victim, &a.payload, kind, p)
            .map_err(|e| config_err(format!("aht {i}: {e}")))?
            .with_v_init(v_init);
        instrumented = instrumented.with(inst).map_err(|e| config_err(format!("aht {i}: {e}")))?;
    }

    let s = &cfg.stimulus;
    let seed = ov.seed.or(s.seed);
    let sources = s.vectors.is_some() as u8 + s.file.is_some() as u8 + s.count.is_some() as u8;
    if sources > 1 {
        return Err(config_err("stimulus: give exactly one of vectors, file or count"));
    }
    let stimulus = if let Some(rows) = &s.vectors {
        Some(parse_vectors(rows, clock_ns)?)
    } else if let Some(file) = &s.file {
        let path = base.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let rows: Vec<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        Some(parse_vectors(&rows, clock_ns)?)
    } else if let Some(count) = s.count {
        let seed = seed.ok_or_else(|| config_err("stimulus: random vectors need a seed"))?;
        Some(
            Stimulus::random(n.inputs().len(), count, seed, clock_ns)
                .map_err(|e| config_err(format!("stimulus: {e}")))?,
        )
    } else {
        None
    };
    if let Some(st) = &stimulus {
        if st.width() != n.inputs().len() {
            return Err(config_err(format!(
                "stimulus: vectors have {} bits, netlist has {} inputs",
                st.width(),
                n.inputs().len()
            )));
        }
    }

    Ok(Resolved {
        golden: n,
        instrumented,
        stimulus,
        clock_ns,
        cfg,
        overrides: ov,
        base: base.to_path_buf(),
    })
}

impl Resolved {
    pub fn horizon_ns(&self) -> Result<u64, CliError> {
        if let Some(h) = self.overrides.horizon_ns.or(self.cfg.schedule.horizon_ns) {
            return Ok(h);
        }
        match &self.stimulus {
            Some(s) => Ok(s.len() as u64 * self.clock_ns),
            None => Err(config_err("schedule: horizon_ns is required without a stimulus")),
        }
    }

    pub fn schedule(&self) -> Result<VddSchedule, CliError> {
        let sc = &self.cfg.schedule;
        let horizon = self.horizon_ns()?;
        let duty = self.overrides.duty.or(sc.duty).unwrap_or(1.0);
        let period = self.overrides.period_ns.or(sc.period_ns);
        match period {
            None if duty == 1.0 => Ok(VddSchedule::always_on(horizon)),
            None => Err(config_err("schedule: period_ns is required when duty < 1")),
            Some(p) => VddSchedule::new(p, duty, sc.phase_ns.unwrap_or(0), horizon, self.clock_ns)
                .map_err(|e| config_err(format!("schedule: {e}"))),
        }
    }

    pub fn calibration(&self) -> Result<CalibrationConfig, CliError> {
        let c = &self.cfg.calibration;
        let d = CalibrationConfig::default();
        let cfg = CalibrationConfig {
            coarse_step: self.overrides.coarse_step.or(c.coarse_step).unwrap_or(d.coarse_step),
            fine_step: self.overrides.fine_step.or(c.fine_step).unwrap_or(d.fine_step),
            min_duty: self.overrides.min_duty.or(c.min_duty).unwrap_or(d.min_duty),
            spike: SpikeConfig {
                spike_factor: c.spike_factor.unwrap_or(d.spike.spike_factor),
                baseline_cycles: c.baseline_cycles.unwrap_or(d.spike.baseline_cycles),
            },
            horizon_multiplier: c.horizon_multiplier.unwrap_or(d.horizon_multiplier),
            period_ns: self.overrides.period_ns.or(c.period_ns).unwrap_or(d.period_ns),
            phase_ns: c.phase_ns.unwrap_or(d.phase_ns),
            clock_ns: self.clock_ns,
            seed: self.overrides.seed.or(c.seed).unwrap_or(d.seed),
            random_vectors: c.random_vectors.unwrap_or(d.random_vectors),
            vectors: self.stimulus.clone(),
        };
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.cfg.output.dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(d)) => self.base.join(d),
            (None, None) => PathBuf::from("."),
        }
    }
}

/// Cell area model from a TOML file with keys `nand_lambda2`, `dff_lambda2`
/// and an optional `[nand_equivalents]` table keyed by cell kind.
pub fn read_area_model(path: &Path) -> Result<CellAreaModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let m: CellAreaModel = toml::from_str(&text).map_err(|e| config_err(format!("{}: {}", path.display(), e.message())))?;
    m.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(m)
}
