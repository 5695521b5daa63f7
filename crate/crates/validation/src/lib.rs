//! Holds the `acceptance` test target; run it with
//! `cargo test -p kzwork-validation --test acceptance -- --nocapture`.
