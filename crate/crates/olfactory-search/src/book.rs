//! Doc-test anchors for the guide in `book/`: every fenced code block in
//! the chapters compiles and runs under `cargo test --doc`.

#[doc = include_str!("../../../book/src/overview.md")]
mod overview {}
#[doc = include_str!("../../../book/src/search-problem.md")]
mod search_problem {}
#[doc = include_str!("../../../book/src/observation-model.md")]
mod observation_model {}
#[doc = include_str!("../../../book/src/beliefs.md")]
mod beliefs {}
#[doc = include_str!("../../../book/src/heuristics.md")]
mod heuristics {}
#[doc = include_str!("../../../book/src/pbvi.md")]
mod pbvi {}
#[doc = include_str!("../../../book/src/value-learning.md")]
mod value_learning {}
#[doc = include_str!("../../../book/src/benchmarks.md")]
mod benchmarks {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
