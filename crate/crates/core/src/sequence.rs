//! The per-object stream `<bos> pose <sep> mesh <eos>`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{encode, CanonicalMesh, CodecError, MeshDecoder, MeshVocabulary, TokenClass};
use crate::pose::{encode_pose, GravityBox, PoseStyle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("pose has {found} tokens, expected {expected}")]
    PoseArity { expected: usize, found: usize },
    #[error("token {token} at offset {offset}: expected {expected}, found {found}")]
    Grammar {
        offset: usize,
        token: u32,
        expected: &'static str,
        found: &'static str,
    },
    #[error("mesh stream error at offset {offset}: {source}")]
    Mesh {
        offset: usize,
        #[source]
        source: CodecError,
    },
    #[error("sequence ends at offset {offset}, expected {expected}")]
    Truncated {
        offset: usize,
        expected: &'static str,
    },
    #[error("trailing token at offset {offset} after <eos>")]
    Trailing { offset: usize },
    #[error("object has no mesh tokens")]
    EmptyMesh,
    #[error("base vocabulary has {0} ids, too many to append special tokens")]
    VocabularyOverflow(u32),
}

impl SequenceError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            SequenceError::Grammar { offset, .. }
            | SequenceError::Mesh { offset, .. }
            | SequenceError::Truncated { offset, .. }
            | SequenceError::Trailing { offset } => Some(*offset),
            _ => None,
        }
    }
}

/// Mesh vocabulary plus `<bos>`, `<sep>`, `<eos>` at the top of the id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MeshVocabulary", into = "MeshVocabulary")]
pub struct UnifiedVocabulary {
    base: MeshVocabulary,
}

impl TryFrom<MeshVocabulary> for UnifiedVocabulary {
    type Error = SequenceError;

    fn try_from(base: MeshVocabulary) -> Result<Self, SequenceError> {
        UnifiedVocabulary::new(base)
    }
}

impl From<UnifiedVocabulary> for MeshVocabulary {
    fn from(u: UnifiedVocabulary) -> Self {
        u.base
    }
}

impl UnifiedVocabulary {
    pub fn new(base: MeshVocabulary) -> Result<Self, SequenceError> {
        let size = base.size();
        if size.checked_add(3).is_none() {
            return Err(SequenceError::VocabularyOverflow(size));
        }
        let v = UnifiedVocabulary { base };
        debug_assert!([v.bos(), v.sep(), v.eos()]
            .iter()
            .all(|&t| base.classify(t).is_none()));
        Ok(v)
    }

    pub fn base(&self) -> MeshVocabulary {
        self.base
    }

    pub fn bos(&self) -> u32 {
        self.base.size()
    }

    pub fn sep(&self) -> u32 {
        self.base.size() + 1
    }

    pub fn eos(&self) -> u32 {
        self.base.size() + 2
    }

    pub fn size(&self) -> u32 {
        self.base.size() + 3
    }

    pub fn pose_style(&self) -> PoseStyle {
        PoseStyle::for_scheme(self.base.scheme)
    }

    /// Printable class of any id.
    pub fn label(&self, token: u32) -> &'static str {
        match token {
            t if t == self.bos() => "<bos>",
            t if t == self.sep() => "<sep>",
            t if t == self.eos() => "<eos>",
            t => self
                .base
                .classify(t)
                .map_or("out-of-vocabulary", |c| c.label()),
        }
    }
}

/// One object: pose tokens and mesh tokens, without specials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub pose_tokens: Vec<u32>,
    pub mesh_tokens: Vec<u32>,
}

impl ObjectRecord {
    /// Tokenize a pose and a canonical mesh.
    pub fn encode(
        pose: &GravityBox,
        mesh: &CanonicalMesh,
        vocab: UnifiedVocabulary,
    ) -> ObjectRecord {
        ObjectRecord {
            pose_tokens: encode_pose(pose, vocab.base).tokens,
            mesh_tokens: encode(mesh, vocab.base).tokens,
        }
    }
}

/// `<bos> pose <sep> mesh <eos>`.
pub fn assemble(
    record: &ObjectRecord,
    vocab: UnifiedVocabulary,
) -> Result<Vec<u32>, SequenceError> {
    let expected = vocab.pose_style().token_count();
    if record.pose_tokens.len() != expected {
        return Err(SequenceError::PoseArity {
            expected,
            found: record.pose_tokens.len(),
        });
    }
    if record.mesh_tokens.is_empty() {
        return Err(SequenceError::EmptyMesh);
    }
    let mut out = Vec::with_capacity(record.pose_tokens.len() + record.mesh_tokens.len() + 3);
    out.push(vocab.bos());
    out.extend_from_slice(&record.pose_tokens);
    out.push(vocab.sep());
    out.extend_from_slice(&record.mesh_tokens);
    out.push(vocab.eos());
    Ok(out)
}

#[derive(Debug, Clone)]
enum State {
    Start,
    Pose,
    Sep,
    Mesh(Box<MeshDecoder>),
    Done(Box<CanonicalMesh>),
}

/// Incremental grammar check. Every accepted token keeps the stream a
/// valid prefix; the first rejected token is reported with its offset.
/// A parser that rejected a token is spent; clone before probing.
#[derive(Debug, Clone)]
pub struct SequenceParser {
    vocab: UnifiedVocabulary,
    state: State,
    offset: usize,
    pose: Vec<u32>,
    mesh: Vec<u32>,
}

impl SequenceParser {
    pub fn new(vocab: UnifiedVocabulary) -> Self {
        SequenceParser {
            vocab,
            state: State::Start,
            offset: 0,
            pose: Vec::new(),
            mesh: Vec::new(),
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.state, State::Done(_))
    }

    fn grammar(&self, token: u32, expected: &'static str) -> SequenceError {
        SequenceError::Grammar {
            offset: self.offset,
            token,
            expected,
            found: self.vocab.label(token),
        }
    }

    fn pose_token_ok(&self, token: u32) -> bool {
        let class = self.vocab.base.classify(token);
        match self.vocab.pose_style() {
            PoseStyle::PerAxis => matches!(class, Some(TokenClass::Coord(_))),
            PoseStyle::BlockOffset if self.pose.len().is_multiple_of(2) => {
                matches!(class, Some(TokenClass::Block(_)))
            }
            PoseStyle::BlockOffset => matches!(class, Some(TokenClass::Offset(_))),
        }
    }

    pub fn push(&mut self, token: u32) -> Result<(), SequenceError> {
        let v = self.vocab;
        let arity = v.pose_style().token_count();
        match &mut self.state {
            State::Start => {
                if token != v.bos() {
                    return Err(self.grammar(token, "<bos>"));
                }
                self.state = State::Pose;
            }
            State::Pose => {
                if !self.pose_token_ok(token) {
                    let expected = match v.pose_style() {
                        PoseStyle::PerAxis => "pose coordinate",
                        PoseStyle::BlockOffset if self.pose.len().is_multiple_of(2) => "pose block",
                        PoseStyle::BlockOffset => "pose offset",
                    };
                    return Err(self.grammar(token, expected));
                }
                self.pose.push(token);
                if self.pose.len() == arity {
                    self.state = State::Sep;
                }
            }
            State::Sep => {
                if token != v.sep() {
                    return Err(self.grammar(token, "<sep>"));
                }
                self.state = State::Mesh(Box::new(MeshDecoder::new(v.base)));
            }
            State::Mesh(dec) => {
                if token == v.eos() {
                    if dec.consumed() == 0 || !dec.at_boundary() {
                        let pending = if dec.consumed() == 0 {
                            "mesh token"
                        } else {
                            dec.pending()
                        };
                        return Err(SequenceError::Grammar {
                            offset: self.offset,
                            token,
                            expected: pending,
                            found: "<eos>",
                        });
                    }
                    let mesh = (**dec).clone().finish().map_err(|e| SequenceError::Mesh {
                        offset: self.offset,
                        source: e,
                    })?;
                    self.state = State::Done(Box::new(mesh));
                } else if token == v.bos() || token == v.sep() {
                    return Err(SequenceError::Grammar {
                        offset: self.offset,
                        token,
                        expected: "mesh token or <eos>",
                        found: v.label(token),
                    });
                } else {
                    let offset = self.offset;
                    dec.push(token)
                        .map_err(|e| SequenceError::Mesh { offset, source: e })?;
                    self.mesh.push(token);
                }
            }
            State::Done(_) => {
                return Err(SequenceError::Trailing {
                    offset: self.offset,
                })
            }
        }
        self.offset += 1;
        Ok(())
    }

    /// What the stream still needs, or `None` once complete.
    pub fn expected(&self) -> Option<&'static str> {
        match &self.state {
            State::Start => Some("<bos>"),
            State::Pose => Some("pose token"),
            State::Sep => Some("<sep>"),
            State::Mesh(_) => Some("mesh token or <eos>"),
            State::Done(_) => None,
        }
    }

    /// The record and decoded mesh of a complete stream.
    pub fn finish(self) -> Result<(ObjectRecord, CanonicalMesh), SequenceError> {
        let expected = self.expected();
        match self.state {
            State::Done(mesh) => Ok((
                ObjectRecord {
                    pose_tokens: self.pose,
                    mesh_tokens: self.mesh,
                },
                *mesh,
            )),
            _ => Err(SequenceError::Truncated {
                offset: self.offset,
                expected: expected.unwrap(),
            }),
        }
    }
}

/// Strict parse of a complete stream.
pub fn parse(tokens: &[u32], vocab: UnifiedVocabulary) -> Result<ObjectRecord, SequenceError> {
    parse_with_mesh(tokens, vocab).map(|(r, _)| r)
}

/// [`parse`], also returning the decoded canonical mesh.
pub fn parse_with_mesh(
    tokens: &[u32],
    vocab: UnifiedVocabulary,
) -> Result<(ObjectRecord, CanonicalMesh), SequenceError> {
    let mut p = SequenceParser::new(vocab);
    for &t in tokens {
        p.push(t)?;
    }
    p.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PrefixStatus {
    ValidPrefix,
    Complete,
    Invalid { offset: usize, reason: String },
}

/// Classify `tokens` as a proper prefix, a complete stream, or invalid.
pub fn validate_prefix(tokens: &[u32], vocab: UnifiedVocabulary) -> PrefixStatus {
    let mut p = SequenceParser::new(vocab);
    for &t in tokens {
        if let Err(e) = p.push(t) {
            return PrefixStatus::Invalid {
                offset: e.offset().unwrap_or(p.offset()),
                reason: e.to_string(),
            };
        }
    }
    if p.is_complete() {
        PrefixStatus::Complete
    } else {
        PrefixStatus::ValidPrefix
    }
}
