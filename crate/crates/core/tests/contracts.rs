//! Cross-module contracts on generated lattices.

use std::path::Path;

use datlen_core::rerank::rerank_marginal;
use datlen_core::{
    fixtures, generate, pathmap_decode, read_lattice, seqmap_decode, write_lattice, CandidateList,
    DecodeConfig, GenSpec,
};

#[test]
fn shipped_fixtures_match_their_builders() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    for (name, lattice) in [
        ("l-det.json", fixtures::l_det()),
        ("l-fork.json", fixtures::l_fork()),
    ] {
        let bytes = std::fs::read(dir.join(name)).unwrap();
        assert_eq!(bytes, write_lattice(&lattice).unwrap(), "{name}");
        assert_eq!(read_lattice(&bytes).unwrap(), lattice);
    }
}

#[test]
fn marginal_reranker_keeps_seqmap_order() {
    for seed in 0..40 {
        let lattice = generate(&GenSpec::new(12, 8, seed)).unwrap();
        let out = seqmap_decode(&lattice, &DecodeConfig::new(4).with_beam(10, 3)).unwrap();
        let list = CandidateList::from_decoded(&out, lattice.vocab()).unwrap();
        assert_eq!(rerank_marginal(&list), 0, "seed {seed}");
    }
}

#[test]
fn outputs_have_exact_length_and_beam_totals_are_lower_bounds() {
    for seed in 0..60u64 {
        let steps = 4 + (seed as usize % 12);
        let lattice = generate(&GenSpec::new(steps, 3 + (seed as usize % 9), seed)).unwrap();
        for t in 1..=steps - 2 {
            let (_, best) = pathmap_decode(&lattice, t, Default::default()).unwrap();
            assert_eq!(best.tokens.len(), t);
            let expand = lattice.vocab().len().min(4);
            for seq in seqmap_decode(&lattice, &DecodeConfig::new(t).with_beam(6, expand)).unwrap()
            {
                assert_eq!(seq.tokens.len(), t);
                assert!(seq.beam_total.unwrap() <= seq.log_marginal + 1e-9);
            }
        }
    }
}
