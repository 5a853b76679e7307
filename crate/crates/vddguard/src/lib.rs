//! Behavioral simulation of capacitor-based analog hardware Trojans (AHTs)
//! and of a VDD duty-cycling countermeasure, over ISCAS-style netlists.
//!
//! * [`netlist`] parses and validates `.bench` netlists.
//! * [`logicsim`] runs cycle-accurate 0/1/X simulation with a duty-cycled
//!   power zone and the SEL-controlled save path.
//! * [`aht`] models the charge-sharing trigger, baseline and fortified.
//! * [`vddctl`] builds VDD schedules, models the counter-based controller and
//!   finds the critical duty of a trigger by bisection.
//! * [`premarket`] runs functional tests, power-profile spike detection and
//!   coarse-to-fine duty calibration.
//! * [`overhead`] does λ-based area accounting.
//!
//! ```
//! use vddguard::aht::{toggles_to_trigger, Toggles, TriggerParams};
//!
//! let p = TriggerParams::baseline();
//! assert_eq!(toggles_to_trigger(&p, 0.0), Toggles::Count(77));
//! ```

// Range checks are written as `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aht;
pub mod benchmarks;
pub mod logicsim;
pub mod netlist;
pub mod overhead;
pub mod premarket;
pub mod scenario;
pub mod vddctl;

pub use logicsim::LogicValue;
pub use netlist::{parse_bench, Netlist};

/// Default clock period in nanoseconds.
pub const DEFAULT_CLOCK_NS: u64 = 10;
