//! Hosts the `acceptance` test target, which checks every acceptance
//! criterion against `isabc-core` and prints one PASS/FAIL line each.
//!
//! Run it with `cargo test -p isabc-validation --test acceptance`.
