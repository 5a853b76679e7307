//! Bundled benchmark netlists.
//!
//! | name | inputs | outputs | gates | DFFs |
//! |------|--------|---------|-------|------|
//! | `half_adder` | 2 | 2 | 2 | 0 |
//! | `c17` | 5 | 2 | 6 | 0 |
//! | `s27` | 4 | 1 | 10 | 3 |
//! | `c432` | 36 | 7 | 160 | 0 |
//! | `c880` | 60 | 26 | 323 | 0 |
//!
//! The bundled `c880` is a resynthesized, functionally equivalent variant
//! without fanout buffers; see the file header.

use crate::netlist::{parse_bench_named, Netlist, ParseError};

pub const HALF_ADDER: &str = include_str!("../data/half_adder.bench");
pub const C17: &str = include_str!("../data/c17.bench");
pub const S27: &str = include_str!("../data/s27.bench");
pub const C432: &str = include_str!("../data/c432.bench");
pub const C880: &str = include_str!("../data/c880.bench");

/// Names accepted by [`source`] and [`load`].
pub const NAMES: [&str; 5] = ["half_adder", "c17", "s27", "c432", "c880"];

pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "half_adder" => Some(HALF_ADDER),
        "c17" => Some(C17),
        "s27" => Some(S27),
        "c432" => Some(C432),
        "c880" => Some(C880),
        _ => None,
    }
}

/// Parse a bundled netlist. Returns `None` for an unknown name.
pub fn load(name: &str) -> Option<Result<Netlist, ParseError>> {
    source(name).map(|text| parse_bench_named(name, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_parse() {
        for name in NAMES {
            let n = load(name).unwrap().unwrap();
            assert_eq!(n.name(), name);
        }
        assert!(load("c6288").is_none());
    }
}
