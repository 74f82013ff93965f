//! Shared fixtures for the benchmark targets.

use qpolar::code::{construct_by_threshold, FrozenFill};
use qpolar::polarize::{synthesize_all, SynthesisParams};
use qpolar::{build_ordered_erasure, CodeConstruction, Dmc};

/// The three-level erasure channel used throughout the benches.
pub fn fig1_channel() -> Dmc {
    build_ordered_erasure(2, &[0.5, 0.4, 0.1]).unwrap()
}

/// A wider erasure channel exercising larger alphabets.
pub fn wide_channel() -> Dmc {
    build_ordered_erasure(6, &[0.4, 0.2, 0.1, 0.1, 0.1, 0.05, 0.05]).unwrap()
}

/// A depth-8 threshold construction on [`fig1_channel`].
pub fn fig1_construction(n: u32) -> (Dmc, CodeConstruction) {
    let w = fig1_channel();
    let table = synthesize_all(&w, n, &SynthesisParams::default()).unwrap();
    let c = construct_by_threshold(&table, 0.01, FrozenFill::Zeros);
    (w, c)
}
