//! Workloads shared by the criterion benches.

use datlen_core::{generate, DatLattice, GenSpec};

/// `count` generated lattices with consecutive seeds starting at `seed`.
pub fn lattice_set(count: usize, steps: usize, vocab: usize, seed: u64) -> Vec<DatLattice> {
    (0..count as u64)
        .map(|i| generate(&GenSpec::new(steps, vocab, seed + i)).expect("bench sizes are valid"))
        .collect()
}
