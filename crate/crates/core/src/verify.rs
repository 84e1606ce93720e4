//! Seeded oracle cross-checks for the decoders and kernels.
//!
//! Each seed deterministically picks a lattice size, a target length and a
//! lattice, then runs four properties against the brute-force oracles:
//! PathMAP exactness, SeqMAP exactness under exhaustive beam settings,
//! complete-path mass normalization, and marginal-vs-enumeration agreement.

use std::fmt;

use crate::error::DecodeError;
use crate::lattice::{generate, DatLattice, GenSpec};
use crate::oracle::{
    enumerate_paths, oracle_pathmap, oracle_seqmap, CompensatedSum, OracleLimits, WordChoice,
};
use crate::pathmap::pathmap_decode;
use crate::prob::{path_logprob, sequence_log_marginal, Conventions, ScoredSequence};
use crate::rng::SplitMix64;
use crate::seqmap::DecodeConfig;

/// Log-space agreement required between decoders and oracles.
pub const LOG_TOLERANCE: f64 = 1e-9;
/// Linear agreement required for total path mass.
pub const MASS_TOLERANCE: f64 = 1e-9;
/// Relative gap below which two oracle scores count as a genuine tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub type SeqmapFn = fn(&DatLattice, &DecodeConfig) -> Result<Vec<ScoredSequence>, DecodeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    PathmapExactness,
    SeqmapExhaustive,
    PathMass,
    MarginalEnumeration,
}

impl Property {
    pub const ALL: [Property; 4] = [
        Property::PathmapExactness,
        Property::SeqmapExhaustive,
        Property::PathMass,
        Property::MarginalEnumeration,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Property::PathmapExactness => "pathmap-vs-oracle",
            Property::SeqmapExhaustive => "seqmap-exhaustive-vs-oracle",
            Property::PathMass => "path-mass-normalization",
            Property::MarginalEnumeration => "marginal-vs-enumeration",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceCaps {
    pub min_steps: usize,
    pub max_steps: usize,
    pub max_vocab: usize,
    pub max_length: usize,
}

impl Default for InstanceCaps {
    fn default() -> Self {
        Self {
            min_steps: 3,
            max_steps: 7,
            max_vocab: 4,
            max_length: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub lattice: DatLattice,
    pub length: usize,
}

/// Deterministic instance for `seed`: steps, vocabulary size and length are
/// drawn from a SplitMix64 stream, then the lattice itself from a fresh seed
/// of that stream.
pub fn instance(seed: u64, caps: &InstanceCaps) -> Instance {
    let mut rng = SplitMix64::new(seed);
    let steps = rng.next_in(caps.min_steps.max(3), caps.max_steps.max(3));
    let vocab = rng.next_in(3, caps.max_vocab.max(3));
    let length = rng.next_in(1, caps.max_length.min(steps - 2).max(1));
    let lattice = generate(&GenSpec::new(steps, vocab, rng.next_u64()))
        .expect("instance caps produce valid generator settings");
    Instance {
        seed,
        lattice,
        length,
    }
}

fn log_close(a: f64, b: f64, tol: f64) -> bool {
    (a == f64::NEG_INFINITY && b == f64::NEG_INFINITY) || (a - b).abs() <= tol
}

/// PathMAP agrees with brute force in score and tokens.
pub fn check_pathmap(
    inst: &Instance,
    conventions: Conventions,
    limits: &OracleLimits,
) -> Result<(), String> {
    let (_, got) =
        pathmap_decode(&inst.lattice, inst.length, conventions).map_err(|e| e.to_string())?;
    let (_, want) = oracle_pathmap(&inst.lattice, inst.length, conventions, limits)
        .map_err(|e| e.to_string())?;
    let (g, w) = (got.log_best_path.unwrap(), want.log_best_path.unwrap());
    if !log_close(g, w, LOG_TOLERANCE) {
        return Err(format!("score {g} vs oracle {w}"));
    }
    if got.tokens != want.tokens {
        return Err(format!(
            "tokens {:?} vs oracle {:?}",
            got.tokens, want.tokens
        ));
    }
    Ok(())
}

/// Exhaustive beam settings for an instance: `K = |content|^T`, `V = |content|`.
pub fn exhaustive_config(inst: &Instance, conventions: Conventions) -> DecodeConfig {
    let content = inst.lattice.vocab().content_len();
    DecodeConfig::new(inst.length)
        .with_beam(content.pow(inst.length as u32), content)
        .with_conventions(conventions)
}

/// The exhaustive-settings top candidate is the oracle argmax, with the same
/// total, and its marginal is at least PathMAP's.
pub fn check_seqmap(
    inst: &Instance,
    conventions: Conventions,
    limits: &OracleLimits,
    decode: SeqmapFn,
) -> Result<(), String> {
    let config = exhaustive_config(inst, conventions);
    let got = decode(&inst.lattice, &config).map_err(|e| e.to_string())?;
    let table = oracle_seqmap(&inst.lattice, inst.length, conventions, limits)
        .map_err(|e| e.to_string())?;
    let top = &got[0];
    let best = &table[0];
    let total = top.beam_total.unwrap_or(top.log_marginal);
    if !log_close(total, best.log_marginal(), LOG_TOLERANCE) {
        return Err(format!(
            "total {total} vs oracle max {}",
            best.log_marginal()
        ));
    }
    if top.tokens != best.tokens {
        let tied = table
            .iter()
            .take_while(|s| (best.probability - s.probability) <= TIE_TOLERANCE * best.probability)
            .any(|s| s.tokens == top.tokens);
        if !tied {
            return Err(format!(
                "top {:?} vs oracle argmax {:?}",
                top.tokens, best.tokens
            ));
        }
    }
    let (_, path_seq) =
        pathmap_decode(&inst.lattice, inst.length, conventions).map_err(|e| e.to_string())?;
    if top.log_marginal < path_seq.log_marginal - 1e-12 {
        return Err(format!(
            "seqmap marginal {} below pathmap marginal {}",
            top.log_marginal, path_seq.log_marginal
        ));
    }
    Ok(())
}

/// All complete bos→eos paths with any words carry total mass 1.
pub fn check_path_mass(inst: &Instance, limits: &OracleLimits) -> Result<(), String> {
    let lattice = &inst.lattice;
    let conventions = Conventions::default();
    let mut total = CompensatedSum::default();
    for t in 0..=lattice.steps() - 2 {
        let paths = enumerate_paths(lattice, t, conventions, WordChoice::AnyToken, limits)
            .map_err(|e| e.to_string())?;
        for (path, _) in paths {
            let lp = path_logprob(lattice, &path).map_err(|e| e.to_string())?;
            total.add(lp.exp());
        }
    }
    let mass = total.value();
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(format!("complete path mass {mass}"));
    }
    Ok(())
}

/// The forward-recursion marginal matches linear enumeration for every
/// length-T content sequence.
pub fn check_marginals(
    inst: &Instance,
    conventions: Conventions,
    limits: &OracleLimits,
) -> Result<(), String> {
    let table = oracle_seqmap(&inst.lattice, inst.length, conventions, limits)
        .map_err(|e| e.to_string())?;
    for entry in &table {
        let got = sequence_log_marginal(&inst.lattice, &entry.tokens, conventions)
            .map_err(|e| e.to_string())?;
        if !log_close(got, entry.log_marginal(), LOG_TOLERANCE) {
            return Err(format!(
                "{:?}: {got} vs enumeration {}",
                entry.tokens,
                entry.log_marginal()
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CheckSettings {
    pub seeds: u64,
    pub base_seed: u64,
    pub caps: InstanceCaps,
    pub conventions: Conventions,
    pub limits: OracleLimits,
}

impl CheckSettings {
    pub fn new(seeds: u64) -> Self {
        Self {
            seeds,
            base_seed: 0,
            caps: InstanceCaps::default(),
            conventions: Conventions::default(),
            limits: OracleLimits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub seed: u64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PropertyOutcome {
    pub property: Property,
    pub checked: usize,
    pub failures: Vec<Failure>,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn run_checks(settings: &CheckSettings, seqmap: SeqmapFn) -> Vec<PropertyOutcome> {
    let mut outcomes: Vec<PropertyOutcome> = Property::ALL
        .iter()
        .map(|&property| PropertyOutcome {
            property,
            checked: 0,
            failures: Vec::new(),
        })
        .collect();
    for i in 0..settings.seeds {
        let seed = settings.base_seed.wrapping_add(i);
        let inst = instance(seed, &settings.caps);
        for outcome in outcomes.iter_mut() {
            let result = match outcome.property {
                Property::PathmapExactness => {
                    check_pathmap(&inst, settings.conventions, &settings.limits)
                }
                Property::SeqmapExhaustive => {
                    check_seqmap(&inst, settings.conventions, &settings.limits, seqmap)
                }
                Property::PathMass => check_path_mass(&inst, &settings.limits),
                Property::MarginalEnumeration => {
                    check_marginals(&inst, settings.conventions, &settings.limits)
                }
            };
            outcome.checked += 1;
            if let Err(detail) = result {
                outcome.failures.push(Failure { seed, detail });
            }
        }
    }
    outcomes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{BosPolicy, TerminationMode};
    use crate::seqmap::{seqmap_decode, seqmap_decode_without_dedup};

    #[test]
    fn instances_are_deterministic_and_within_caps() {
        let caps = InstanceCaps::default();
        for seed in 0..50 {
            let a = instance(seed, &caps);
            let b = instance(seed, &caps);
            assert_eq!(a.lattice, b.lattice);
            assert_eq!(a.length, b.length);
            assert!((3..=7).contains(&a.lattice.steps()));
            assert!(a.lattice.vocab().len() <= 4);
            assert!(a.length >= 1 && a.length + 2 <= a.lattice.steps());
        }
    }

    #[test]
    fn suite_passes_on_the_real_decoder() {
        let outcomes = run_checks(&CheckSettings::new(40), seqmap_decode);
        for o in &outcomes {
            assert!(o.passed(), "{}: {:?}", o.property, o.failures.first());
            assert_eq!(o.checked, 40);
        }
    }

    #[test]
    fn suite_passes_in_every_convention() {
        for termination in [TerminationMode::Eos, TerminationMode::Free] {
            for bos in [BosPolicy::Strict, BosPolicy::Verbatim] {
                let mut settings = CheckSettings::new(25);
                settings.base_seed = 1000;
                settings.conventions = Conventions::new(termination, bos);
                for o in run_checks(&settings, seqmap_decode) {
                    assert!(
                        o.passed(),
                        "{termination}/{bos} {}: {:?}",
                        o.property,
                        o.failures.first()
                    );
                }
            }
        }
    }

    #[test]
    fn suite_catches_merge_without_dedup() {
        let mut settings = CheckSettings::new(40);
        settings.caps.min_steps = 6;
        settings.caps.max_vocab = 5;
        let outcomes = run_checks(&settings, seqmap_decode_without_dedup);
        let seqmap = outcomes
            .iter()
            .find(|o| o.property == Property::SeqmapExhaustive)
            .unwrap();
        assert!(!seqmap.passed(), "mutant merge went unnoticed");
    }
}
