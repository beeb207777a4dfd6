//! Criterion benches for the policy compiler and the negotiation simulator.
//! Run with `cargo bench -p p2pmac-bench`.
