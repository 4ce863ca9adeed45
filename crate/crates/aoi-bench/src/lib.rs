//! Benchmark-only crate; see benches/engines.rs for the criterion targets.
