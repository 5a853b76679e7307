//! The guide in `book/`, one module per chapter, so `cargo test` runs its
//! snippets.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/netlists.md")]
pub mod netlists {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/trigger.md")]
pub mod trigger {}
#[doc = include_str!("../../../book/src/duty_cycling.md")]
pub mod duty_cycling {}
#[doc = include_str!("../../../book/src/premarket.md")]
pub mod premarket {}
#[doc = include_str!("../../../book/src/overhead.md")]
pub mod overhead {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
