use std::path::{Path, PathBuf};

use vddguard::aht::Instrumented;
use vddguard::logicsim::{Trace, VddSamples};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn vddguard(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("vddguard").chain(args.iter().copied());
    let code = vddguard_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn parse_prints_stats() {
    let (code, out, _) = vddguard(&["parse", "builtin:c432"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("name=c432 gates=160 dffs=0 inputs=36 outputs=7"), "{out}");
    let (code, out, _) = vddguard(&["parse", "builtin:s27", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["dffs"], 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let (code, _, err) = vddguard(&["parse", d.join("missing.bench").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error code=1 kind=io:"), "{err}");

    let bad_key = write(d, "bad.toml", "schema_version = 1\nnetlist = \"builtin:c17\"\nc_mian = 3\n");
    let (code, _, err) = vddguard(&["simulate", "-c", &bad_key]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error code=2 kind=config:") && err.contains("c_mian"), "{err}");

    let version = write(d, "v.toml", "schema_version = 2\nnetlist = \"builtin:c17\"\n");
    assert_eq!(vddguard(&["simulate", "-c", &version]).0, 2);

    let no_seed = write(d, "s.toml", "schema_version = 1\nnetlist = \"builtin:c17\"\n[stimulus]\ncount = 10\n");
    let (code, _, err) = vddguard(&["simulate", "-c", &no_seed]);
    assert_eq!(code, 2);
    assert!(err.contains("seed"), "{err}");

    let bench = write(d, "broken.bench", "INPUT(a)\nOUTPUT(b)\nb = NOT(a\n");
    let (code, _, err) = vddguard(&["parse", &bench]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error code=3 kind=parse:") && err.contains("line 3"), "{err}");

    let short = write(
        d,
        "short.toml",
        "schema_version = 1\nnetlist = \"builtin:half_adder\"\n[stimulus]\nvectors = [\"00\"]\n[schedule]\nhorizon_ns = 5\n",
    );
    let (code, _, err) = vddguard(&["simulate", "-c", &short, "--out-dir", d.to_str().unwrap()]);
    assert_eq!(code, 4);
    assert!(err.starts_with("error code=4 kind=simulation:"), "{err}");

    assert_eq!(vddguard(&["frobnicate"]).0, 2);
    assert_eq!(vddguard(&["--help"]).0, 0);
}

fn vcd_changes(vcd: &str, id: &str) -> Vec<(u64, char)> {
    let mut t = 0;
    let mut out = Vec::new();
    for line in vcd.lines() {
        if let Some(ts) = line.strip_prefix('#') {
            t = ts.parse().unwrap();
        } else if line.len() > 1 && line[1..] == *id && "01x".contains(&line[..1]) {
            out.push((t, line.chars().next().unwrap()));
        }
    }
    out
}

fn vcd_id(vcd: &str, name: &str) -> String {
    vcd.lines()
        .find_map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f.len() == 6 && f[0] == "$var" && f[4] == name).then(|| f[3].to_string())
        })
        .unwrap_or_else(|| panic!("{name} not declared"))
}

#[test]
fn test_case_1_trace_shows_cut_and_trigger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("test_case_1.toml");
    let (code, out, err) = vddguard(&["simulate", "-c", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("trigger aht=0 time_ns=800"), "{out}");

    let vcd = std::fs::read_to_string(dir.path().join("trace.vcd")).unwrap();
    assert!(vcd.contains("$timescale 1ns $end"));
    let vdd = vcd_changes(&vcd, &vcd_id(&vcd, "vdd_disruptive"));
    assert_eq!(vdd, vec![(0, '1'), (700, '0'), (800, '1')]);
    let fired = vcd_changes(&vcd, &vcd_id(&vcd, "aht0_fired"));
    assert_eq!(fired, vec![(0, '0'), (800, '1')]);

    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("time_ns,vdd_disruptive,A,B,S,C,aht0.fired\n"), "{}", &csv[..80]);

    let (code, out, _) = vddguard(&["simulate", "-c", cfg.to_str().unwrap(), "--fortified", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("events=0"), "{out}");
}

#[test]
fn artifacts_are_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("calibrate_fortified.toml");
    for d in [&a, &b] {
        let (code, _, err) = vddguard(&["calibrate", "-c", cfg.to_str().unwrap(), "--out-dir", d.path().to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        let sim = write(
            d.path(),
            "sim.toml",
            "schema_version = 1\nnetlist = \"builtin:c432\"\nwrap_outputs = true\n[stimulus]\nseed = 9\ncount = 200\n[schedule]\nperiod_ns = 500\nduty = 0.8\nhorizon_ns = 3000\n",
        );
        assert_eq!(vddguard(&["simulate", "-c", &sim, "--out-dir", d.path().to_str().unwrap()]).0, 0);
    }
    for f in ["calibration.json", "calibration.txt", "trace.json", "trace.csv", "trace.vcd"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("calibration.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "TROJAN_MITIGATED");
    assert_eq!(report["chosen_duty"], 0.7);
    assert_eq!(report["performance_penalty"], 0.3);
}

#[test]
fn golden_c432_calibrates_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("calibrate_c432.toml");
    let (code, out, err) = vddguard(&["calibrate", "-c", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("verdict: CLEAN"), "{out}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("calibration.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "CLEAN");
    assert_eq!(report["performance_penalty"], 0.0);
}

#[test]
fn calibration_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("calibrate_fortified.toml");
    let (code, out, err) = vddguard(&[
        "calibrate",
        "-c",
        cfg.to_str().unwrap(),
        "--min-duty",
        "0.8",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("verdict: UNUSABLE"), "{out}");
    let (code, _, err) = vddguard(&["calibrate", "-c", cfg.to_str().unwrap(), "--fine-step", "0.03"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn inject_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("calibrate_fortified.toml");
    let out_file = dir.path().join("ha_aht.bench");
    let (code, _, err) = vddguard(&["inject", "-c", cfg.to_str().unwrap(), "-o", out_file.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&out_file).unwrap();
    let back = Instrumented::parse("ha", &text).unwrap();
    assert_eq!(back.ahts.len(), 1);
    assert_eq!(back.netlist.net_name(back.ahts[0].victim_net), "S");
    assert!(back.ahts[0].params.is_fortified());

    let (code, out, _) = vddguard(&[
        "inject",
        "-c",
        configs().join("calibrate_c432.toml").to_str().unwrap(),
        "--victim",
        "N223",
        "--payload",
        "N329",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("#@aht victim=N223 payload=N329"), "{}", out.lines().last().unwrap());

    let (code, _, err) = vddguard(&[
        "inject",
        "-c",
        configs().join("calibrate_c432.toml").to_str().unwrap(),
        "--victim",
        "nope",
        "--payload",
        "N329",
    ]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn empty_trace_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let t = Trace {
        clock_period_ns: 10,
        sample_ns: 10,
        horizon_ns: 0,
        signals: Vec::new(),
        vdd: VddSamples {
            disruptive: Vec::new(),
            non_disruptive: Vec::new(),
        },
        trigger_events: Vec::new(),
        cycles: Vec::new(),
        output_names: Vec::new(),
        observations: Vec::new(),
        aht_final: Vec::new(),
        aht_peak_v: Vec::new(),
    };
    let path = write(dir.path(), "empty.json", &serde_json::to_string(&t).unwrap());
    let (code, out, _) = vddguard(&["export-vcd", &path]);
    assert_eq!(code, 0);
    assert!(out.contains("$timescale 1ns $end") && out.ends_with("$enddefinitions $end\n"), "{out}");
    assert!(!out.lines().any(|l| l.starts_with('#')));
}

#[test]
fn export_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("test_case_2.toml");
    assert_eq!(vddguard(&["simulate", "-c", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]).0, 0);
    let out_vcd = dir.path().join("again.vcd");
    let json = dir.path().join("trace.json");
    let (code, _, _) = vddguard(&["export-vcd", json.to_str().unwrap(), "-o", out_vcd.to_str().unwrap()]);
    assert_eq!(code, 0);
    let a = std::fs::read_to_string(dir.path().join("trace.vcd")).unwrap();
    let b = std::fs::read_to_string(out_vcd).unwrap();
    // Only the module name, taken from the file name, may differ.
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("$scope")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn overhead_table_and_json() {
    let (code, out, _) = vddguard(&["overhead", "--areas", "c880:0.0082:0.497", "--areas", "c432:0.00507:0.158"]);
    assert_eq!(code, 0);
    assert!(out.contains("1.65") && out.contains("3.21"), "{out}");
    let (code, out, _) = vddguard(&["overhead", "builtin:c432", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["mitigation_area"], 37120.0);
    assert_eq!(v[0]["benchmark_area"], 204800.0);
    assert!(v[0]["notes"][0].as_str().unwrap().contains("MUX2"));
    assert_eq!(vddguard(&["overhead"]).0, 2);
    assert_eq!(vddguard(&["overhead", "--areas", "c17:1:0"]).0, 2);

    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.toml", "nand_lambda2 = 1.0\ndff_lambda2 = 3.0\n[nand_equivalents]\nMUX2 = 4.0\nXOR = 2.0\n");
    let (code, out, err) = vddguard(&["overhead", "builtin:half_adder", "--model", &model, "--json"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["benchmark_area"], 3.0);
    assert_eq!(v[0]["mitigation_area"], 29.0);
}

#[test]
fn guide_config_example_is_valid() {
    let guide = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src/cli.md")).unwrap();
    let start = guide.find("```toml\n").unwrap() + "```toml\n".len();
    let body = &guide[start..start + guide[start..].find("```").unwrap()];
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "guide.toml", body);
    let (code, out, err) = vddguard(&["simulate", "-c", &cfg]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("events=0"), "{out}");
    assert!(dir.path().join("out/trace.vcd").exists());
}
