//! `vddguard` command-line front end.
//!
//! Exit codes: 0 success, 1 file I/O, 2 configuration or usage, 3 netlist
//! parse, 4 simulation. Failures print one line to stderr:
//! `error code=<n> kind=<kind>: <message>`.

pub mod config;
pub mod vcd;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use vddguard::logicsim::{run_with, Trace};
use vddguard::overhead::{
    default_mitigation_cells, format_table, report_for_areas, report_for_netlist, CellAreaModel, OverheadReport,
};
use vddguard::premarket::calibrate;

use config::{load_netlist, read_area_model, read_config, resolve, Overrides, Resolved};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Sim(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Sim(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::Parse(_) => "parse",
            CliError::Sim(_) => "simulation",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vddguard", version, about = "Analog trigger simulation and VDD duty-cycle calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a netlist and print its statistics.
    Parse {
        /// `.bench` path or `builtin:<name>`.
        netlist: String,
        #[arg(long)]
        json: bool,
    },
    /// Simulate a configuration and write trace.json, trace.csv and trace.vcd.
    Simulate(RunArgs),
    /// Write the instrumented netlist with its trigger annotations.
    Inject {
        #[command(flatten)]
        run: RunArgs,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the pre-market calibration and write calibration.json and calibration.txt.
    Calibrate(RunArgs),
    /// Area overhead of the save path on netlists or on supplied areas.
    Overhead {
        /// `.bench` paths or `builtin:<name>`.
        netlists: Vec<String>,
        /// `NAME:MITIGATION:BENCHMARK` areas in any consistent unit.
        #[arg(long = "areas")]
        areas: Vec<String>,
        /// TOML cell area model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Convert a trace.json to a VCD file.
    ExportVcd {
        trace: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duty: Option<f64>,
    #[arg(long)]
    period_ns: Option<u64>,
    #[arg(long)]
    horizon_ns: Option<u64>,
    #[arg(long)]
    victim: Option<String>,
    #[arg(long)]
    payload: Option<String>,
    /// Use the fortified trigger preset.
    #[arg(long)]
    fortified: bool,
    #[arg(long)]
    min_duty: Option<f64>,
    #[arg(long)]
    coarse_step: Option<f64>,
    #[arg(long)]
    fine_step: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<Resolved, CliError> {
        let cfg = read_config(&self.config)?;
        let base = self.config.parent().unwrap_or(Path::new(".")).to_path_buf();
        resolve(
            cfg,
            &base,
            Overrides {
                seed: self.seed,
                duty: self.duty,
                period_ns: self.period_ns,
                horizon_ns: self.horizon_ns,
                victim: self.victim.clone(),
                payload: self.payload.clone(),
                fortified: self.fortified,
                min_duty: self.min_duty,
                coarse_step: self.coarse_step,
                fine_step: self.fine_step,
            },
        )
    }
}

/// Parse `args` (including the program name), run the command and return
/// the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    let _ = writeln!(err, "error code=2 kind=usage: invalid arguments");
                    2
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error code={} kind={}: {}", e.code(), e.kind(), e);
            e.code()
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Parse { netlist, json } => cmd_parse(&netlist, json, out),
        Command::Simulate(args) => cmd_simulate(&args, out),
        Command::Inject { run, output } => cmd_inject(&run, output.as_deref(), out),
        Command::Calibrate(args) => cmd_calibrate(&args, out),
        Command::Overhead {
            netlists,
            areas,
            model,
            json,
        } => cmd_overhead(&netlists, &areas, model.as_deref(), json, out),
        Command::ExportVcd { trace, output } => cmd_export_vcd(&trace, output.as_deref(), out),
    }
}

fn cmd_parse(source: &str, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let n = load_netlist(source, Path::new("."))?;
    let s = n.stats();
    let warnings: Vec<String> = n.warnings().iter().map(|w| w.to_string()).collect();
    if json {
        let v = serde_json::json!({
            "name": n.name(),
            "gates": s.gate_count,
            "dffs": s.dff_count,
            "inputs": s.input_count,
            "outputs": s.output_count,
            "nets": s.net_count,
            "warnings": warnings,
        });
        emit(out, &format!("{}\n", serde_json::to_string_pretty(&v).expect("json value")))
    } else {
        let mut text = format!(
            "name={} gates={} dffs={} inputs={} outputs={} nets={}\n",
            n.name(),
            s.gate_count,
            s.dff_count,
            s.input_count,
            s.output_count,
            s.net_count
        );
        for w in warnings {
            text.push_str(&format!("warning: {w}\n"));
        }
        emit(out, &text)
    }
}

fn trace_csv(t: &Trace) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time_ns".to_string(), "vdd_disruptive".to_string()];
    header.extend(t.signals.iter().map(|s| s.name.clone()));
    let csv_err = |e: csv::Error| CliError::Sim(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..t.sample_count() {
        let mut row = vec![t.time_of(i).to_string(), (t.vdd.disruptive[i] as u8).to_string()];
        row.extend(t.signals.iter().map(|s| s.values[i].symbol().to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Sim(format!("csv: {e}")))
}

fn cmd_simulate(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let r = args.resolve()?;
    let stim = r
        .stimulus
        .clone()
        .ok_or_else(|| CliError::Config("simulate needs a [stimulus]".into()))?;
    let sched = r.schedule()?;
    let horizon = r.horizon_ns()?;
    let t = run_with(
        &r.instrumented.netlist,
        &stim,
        &sched,
        &r.instrumented.ahts,
        horizon,
        &Default::default(),
    )
    .map_err(|e| CliError::Sim(e.to_string()))?;

    let dir = r.output_dir(args.out_dir.as_deref());
    let json = serde_json::to_string_pretty(&t).expect("trace serializes");
    write_file(&dir.join("trace.json"), json.as_bytes())?;
    write_file(&dir.join("trace.csv"), &trace_csv(&t)?)?;
    write_file(&dir.join("trace.vcd"), vcd::write_vcd(&t, r.golden.name()).as_bytes())?;

    let valid = t.cycles.iter().filter(|c| c.valid).count();
    let mut text = format!("cycles={} valid={} events={}\n", t.cycles.len(), valid, t.trigger_events.len());
    for e in &t.trigger_events {
        text.push_str(&format!("trigger aht={} time_ns={}\n", e.aht, e.time_ns));
    }
    emit(out, &text)
}

fn cmd_inject(args: &RunArgs, output: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let r = args.resolve()?;
    if r.instrumented.ahts.is_empty() {
        return Err(CliError::Config("inject needs an [[aht]] or --victim and --payload".into()));
    }
    let text = r.instrumented.to_bench();
    match output {
        Some(p) => write_file(p, text.as_bytes()),
        None => emit(out, &text),
    }
}

fn cmd_calibrate(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let r = args.resolve()?;
    let cfg = r.calibration()?;
    let report = calibrate(&r.instrumented, &r.golden, &cfg).map_err(|e| match e {
        vddguard::premarket::PremarketError::Config(m) | vddguard::premarket::PremarketError::Interface(m) => {
            CliError::Config(m)
        }
        other => CliError::Sim(other.to_string()),
    })?;
    let dir = r.output_dir(args.out_dir.as_deref());
    write_file(&dir.join("calibration.json"), format!("{}\n", report.to_json()).as_bytes())?;
    let table = report.table();
    write_file(&dir.join("calibration.txt"), table.as_bytes())?;
    emit(out, &table)
}

fn parse_areas(source: &str) -> Result<(String, f64, f64), CliError> {
    let bad = || CliError::Config(format!("--areas `{source}`: expected NAME:MITIGATION:BENCHMARK"));
    let parts: Vec<&str> = source.split(':').collect();
    let [name, m, b] = parts[..] else {
        return Err(bad());
    };
    Ok((
        name.to_string(),
        m.parse().map_err(|_| bad())?,
        b.parse().map_err(|_| bad())?,
    ))
}

fn cmd_overhead(
    netlists: &[String],
    areas: &[String],
    model: Option<&Path>,
    json: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if netlists.is_empty() && areas.is_empty() {
        return Err(CliError::Config("give at least one netlist or --areas".into()));
    }
    let model = match model {
        Some(p) => read_area_model(p)?,
        None => CellAreaModel::default(),
    };
    let cells = default_mitigation_cells();
    let mut reports: Vec<OverheadReport> = Vec::new();
    for source in netlists {
        let n = load_netlist(source, Path::new("."))?;
        reports.push(report_for_netlist(&n, &model, &cells).map_err(|e| CliError::Config(e.to_string()))?);
    }
    for source in areas {
        let (name, m, b) = parse_areas(source)?;
        reports.push(report_for_areas(&name, m, b, None).map_err(|e| CliError::Config(e.to_string()))?);
    }
    if json {
        emit(out, &format!("{}\n", serde_json::to_string_pretty(&reports).expect("reports serialize")))
    } else {
        emit(out, &format_table(&reports))
    }
}

fn cmd_export_vcd(trace: &Path, output: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let text = std::fs::read_to_string(trace).map_err(|e| CliError::io(trace, e))?;
    let t: Trace = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", trace.display())))?;
    let module = trace.file_stem().and_then(|s| s.to_str()).unwrap_or("top");
    let vcd = vcd::write_vcd(&t, module);
    match output {
        Some(p) => write_file(p, vcd.as_bytes()),
        None => emit(out, &vcd),
    }
}
