//! Value change dump writer for [`Trace`]s. Timescale is fixed at 1 ns.

use std::fmt::Write as _;

use vddguard::logicsim::Trace;
use vddguard::LogicValue;

/// Short identifier for the `k`-th variable, using printable ASCII 33..=126.
fn ident(mut k: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((33 + (k % 94)) as u8 as char);
        k /= 94;
        if k == 0 {
            return s;
        }
        k -= 1;
    }
}

fn reference(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn bit(b: bool) -> LogicValue {
    LogicValue::from_bool(b)
}

pub fn write_vcd(t: &Trace, module: &str) -> String {
    let mut columns: Vec<(String, Vec<LogicValue>)> = vec![
        ("vdd_disruptive".into(), t.vdd.disruptive.iter().map(|&b| bit(b)).collect()),
        ("vdd_non_disruptive".into(), t.vdd.non_disruptive.iter().map(|&b| bit(b)).collect()),
    ];
    columns.extend(t.signals.iter().map(|s| (reference(&s.name), s.values.clone())));

    let mut out = String::new();
    out.push_str("$version vddguard $end\n$timescale 1ns $end\n");
    let _ = writeln!(out, "$scope module {} $end", reference(module));
    for (k, (name, _)) in columns.iter().enumerate() {
        let _ = writeln!(out, "$var wire 1 {} {} $end", ident(k), name);
    }
    out.push_str("$upscope $end\n$enddefinitions $end\n");

    let samples = columns.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
    if samples == 0 {
        return out;
    }
    out.push_str("#0\n$dumpvars\n");
    for (k, (_, v)) in columns.iter().enumerate() {
        let _ = writeln!(out, "{}{}", v[0].symbol(), ident(k));
    }
    out.push_str("$end\n");
    for i in 1..samples {
        let mut stamped = false;
        for (k, (_, v)) in columns.iter().enumerate() {
            if v[i] != v[i - 1] {
                if !stamped {
                    let _ = writeln!(out, "#{}", t.time_of(i));
                    stamped = true;
                }
                let _ = writeln!(out, "{}{}", v[i].symbol(), ident(k));
            }
        }
    }
    let _ = writeln!(out, "#{}", t.horizon_ns);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers_are_unique() {
        let ids: std::collections::HashSet<String> = (0..20_000).map(ident).collect();
        assert_eq!(ids.len(), 20_000);
        assert_eq!(ident(0), "!");
        assert_eq!(ident(93), "~");
        assert_eq!(ident(94), "!!");
    }
}
