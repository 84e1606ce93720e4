//! Canonical JSON lattice format.
//!
//! ```json
//! {"version":1,"steps":4,"vocab":["<bos>","<eos>","a","b"],"bos_id":0,"eos_id":1,
//!  "word_logprobs":[[0.0,"-inf","-inf","-inf"], ...],
//!  "link_logprobs":[[0.0,"-inf","-inf"],[0.0,"-inf"],[0.0]]}
//! ```
//!
//! Optional `source_len` and `source_tokens` sit between `eos_id` and
//! `word_logprobs`. Negative infinity is the string `"-inf"`. Numbers are
//! written in shortest round-trip form, so write → read is exact.

use serde::{Deserialize, Serialize};

use super::{DatLattice, LatticeParts, Vocab};
use crate::error::LatticeError;
use crate::prob::logsumexp;

pub const FORMAT_VERSION: u32 = 1;

/// Serde adapters encoding `-inf` as the string `"-inf"`.
pub mod serde_logprob {
    use serde::de::{self, Deserializer, Visitor};
    use serde::ser::{SerializeSeq, Serializer};
    use serde::{Deserialize, Serialize};
    use std::fmt;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct LogProb(pub f64);

    impl Serialize for LogProb {
        fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
            if self.0 == f64::NEG_INFINITY {
                serializer.serialize_str("-inf")
            } else if self.0.is_finite() {
                serializer.serialize_f64(self.0)
            } else {
                Err(serde::ser::Error::custom(format!(
                    "log-probability {} is not representable",
                    self.0
                )))
            }
        }
    }

    impl<'de> Deserialize<'de> for LogProb {
        fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
            struct LogProbVisitor;

            impl Visitor<'_> for LogProbVisitor {
                type Value = LogProb;

                fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                    f.write_str("a number or the string \"-inf\"")
                }

                fn visit_f64<E: de::Error>(self, v: f64) -> Result<LogProb, E> {
                    Ok(LogProb(v))
                }

                fn visit_i64<E: de::Error>(self, v: i64) -> Result<LogProb, E> {
                    Ok(LogProb(v as f64))
                }

                fn visit_u64<E: de::Error>(self, v: u64) -> Result<LogProb, E> {
                    Ok(LogProb(v as f64))
                }

                fn visit_str<E: de::Error>(self, v: &str) -> Result<LogProb, E> {
                    if v == "-inf" {
                        Ok(LogProb(f64::NEG_INFINITY))
                    } else {
                        Err(E::invalid_value(de::Unexpected::Str(v), &self))
                    }
                }
            }

            deserializer.deserialize_any(LogProbVisitor)
        }
    }

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        LogProb(*value).serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        LogProb::deserialize(deserializer).map(|p| p.0)
    }

    /// For `Option<f64>` fields; pair with `skip_serializing_if = "Option::is_none"`.
    pub mod option {
        use super::LogProb;
        use serde::{Serialize, Serializer};

        pub fn serialize<S: Serializer>(
            value: &Option<f64>,
            serializer: S,
        ) -> Result<S::Ok, S::Error> {
            value.map(LogProb).serialize(serializer)
        }
    }

    /// For `Vec<f64>` fields.
    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
            let mut seq = serializer.serialize_seq(Some(values.len()))?;
            for &v in values {
                seq.serialize_element(&LogProb(v))?;
            }
            seq.end()
        }
    }
}

use serde_logprob::LogProb;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeDoc {
    version: u32,
    steps: usize,
    vocab: Vec<String>,
    bos_id: usize,
    eos_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_tokens: Option<Vec<String>>,
    word_logprobs: Vec<Vec<LogProb>>,
    link_logprobs: Vec<Vec<LogProb>>,
}

fn unwrap_rows(rows: Vec<Vec<LogProb>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(|p| p.0).collect())
        .collect()
}

fn wrap_rows<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<Vec<LogProb>> {
    rows.map(|r| r.iter().copied().map(LogProb).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Shift every row by its logsumexp before validating. Off by default:
    /// unnormalized input is rejected rather than silently repaired.
    pub renormalize: bool,
}

pub fn read_lattice(bytes: &[u8]) -> Result<DatLattice, LatticeError> {
    read_lattice_with(bytes, ReadOptions::default())
}

pub fn read_lattice_with(bytes: &[u8], options: ReadOptions) -> Result<DatLattice, LatticeError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: LatticeDoc = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let message = inner.to_string();
        // Missing fields are reported against the parent path; name the field itself.
        let field = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
            .map(|name| {
                if path == "." {
                    name.to_string()
                } else {
                    format!("{path}.{name}")
                }
            })
            .unwrap_or(path);
        LatticeError::schema(field, message)
    })?;

    if doc.version != FORMAT_VERSION {
        return Err(LatticeError::schema(
            "version",
            format!(
                "unsupported version {}, expected {FORMAT_VERSION}",
                doc.version
            ),
        ));
    }
    if doc.word_logprobs.len() != doc.steps {
        return Err(LatticeError::schema(
            "word_logprobs",
            format!(
                "expected {} rows, found {}",
                doc.steps,
                doc.word_logprobs.len()
            ),
        ));
    }

    let vocab = Vocab::new(doc.vocab, doc.bos_id, doc.eos_id)?;
    let mut parts = LatticeParts {
        vocab,
        word_logprobs: unwrap_rows(doc.word_logprobs),
        link_logprobs: unwrap_rows(doc.link_logprobs),
        source_len: doc.source_len,
        source_tokens: doc.source_tokens,
    };
    if options.renormalize {
        for row in parts
            .word_logprobs
            .iter_mut()
            .chain(parts.link_logprobs.iter_mut())
        {
            let total = logsumexp(row);
            if total.is_finite() {
                row.iter_mut().for_each(|v| *v -= total);
            }
        }
    }
    let lattice = DatLattice::new(parts)?;
    let report = lattice.validate();
    if report.is_valid() {
        Ok(lattice)
    } else {
        Err(LatticeError::Invalid(report))
    }
}

/// Serializes a valid lattice. Output is a single compact line plus a
/// trailing newline and is byte-identical for equal lattices.
pub fn write_lattice(lattice: &DatLattice) -> Result<Vec<u8>, LatticeError> {
    let report = lattice.validate();
    if !report.is_valid() {
        return Err(LatticeError::Invalid(report));
    }
    let steps = lattice.steps();
    let doc = LatticeDoc {
        version: FORMAT_VERSION,
        steps,
        vocab: lattice.vocab().tokens().to_vec(),
        bos_id: lattice.vocab().bos_id(),
        eos_id: lattice.vocab().eos_id(),
        source_len: lattice.source_len(),
        source_tokens: lattice.source_tokens().map(<[String]>::to_vec),
        word_logprobs: wrap_rows((1..=steps).map(|s| lattice.word_row(s))),
        link_logprobs: wrap_rows((1..steps).map(|s| lattice.link_row(s))),
    };
    let mut out = serde_json::to_vec(&doc).map_err(|e| LatticeError::schema("", e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}
