//! Blocked and patchified tokenization.
//!
//! A vertex is written as a block id (coarse `8^3`-bin cell) and an offset
//! id (position inside the cell). The block id is skipped whenever it equals
//! the block of the previous vertex in the stream. Faces are grouped into
//! fans around a shared center vertex; a fan opens with one fused token
//! carrying the fan shape and the center's offset, followed by its ring:
//!
//! ```text
//! [block] PATCH(shape, center offset)  ([block] OFFSET)*ring_len
//! ```
//!
//! An open fan of `f` faces has `f + 1` ring vertices and faces
//! `(c, r_i, r_{i+1})`; a closed fan has `f` ring vertices and also the
//! wrap-around face `(c, r_{f-1}, r_0)`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use super::vocab::{MAX_CLOSED_FAN, MAX_OPEN_FAN, MIN_CLOSED_FAN};
use super::{
    classify_at, CanonicalMesh, CodecError, FaceSink, MeshVocabulary, PatchKind, Scheme,
    TokenClass, TokenSequence,
};

struct Fan {
    center: u32,
    ring: Vec<u32>,
    faces: Vec<usize>,
    closed: bool,
}

/// Longest fan of unvisited faces around `center`.
fn best_fan(mesh: &CanonicalMesh, center: u32, incident: &[usize]) -> Fan {
    // faces as (center, x, y)
    let spoke = |f: usize| -> (u32, u32) {
        let t = mesh.faces[f];
        let k = t.iter().position(|&v| v == center).unwrap();
        (t[(k + 1) % 3], t[(k + 2) % 3])
    };
    let mut by_first: HashMap<u32, Vec<usize>> = HashMap::new();
    for &f in incident {
        by_first.entry(spoke(f).0).or_default().push(f);
    }
    for v in by_first.values_mut() {
        v.sort_unstable();
    }

    let walk = |start: usize| -> (Vec<usize>, bool) {
        let mut chain = vec![start];
        let (x0, mut y) = spoke(start);
        loop {
            if y == x0 && chain.len() >= MIN_CLOSED_FAN as usize {
                return (chain, true);
            }
            let next = by_first
                .get(&y)
                .and_then(|fs| fs.iter().copied().find(|f| !chain.contains(f)));
            let Some(f) = next else {
                return (chain, false);
            };
            if chain.len() == MAX_OPEN_FAN as usize {
                // only a closing face may extend a full open fan
                if spoke(f).1 == x0 {
                    chain.push(f);
                    return (chain, true);
                }
                return (chain, false);
            }
            chain.push(f);
            y = spoke(f).1;
        }
    };

    let mut starts: Vec<usize> = incident.to_vec();
    starts.sort_unstable();
    let mut best: Option<(Vec<usize>, bool)> = None;
    for &f in &starts {
        let cand = walk(f);
        let better = match &best {
            None => true,
            Some((b, closed)) => (cand.0.len(), cand.1) > (b.len(), *closed),
        };
        if better {
            best = Some(cand);
        }
    }
    let (faces, closed) = best.expect("center has an unvisited face");
    debug_assert!(!closed || faces.len() <= MAX_CLOSED_FAN as usize);
    let mut ring = Vec::with_capacity(faces.len() + 1);
    ring.push(spoke(faces[0]).0);
    for &f in &faces {
        ring.push(spoke(f).1);
    }
    if closed {
        ring.pop();
    }
    Fan {
        center,
        ring,
        faces,
        closed,
    }
}

/// Encode a canonical mesh as fan patches.
pub fn encode_block_patch(mesh: &CanonicalMesh) -> TokenSequence {
    let vocab = MeshVocabulary::new(Scheme::BlockPatch, mesh.grid);
    let nv = mesh.vertices.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (f, face) in mesh.faces.iter().enumerate() {
        for &v in face {
            incident[v as usize].push(f);
        }
    }
    let mut visited = vec![false; mesh.faces.len()];
    let mut queue: BTreeSet<(Reverse<usize>, u32)> = (0..nv as u32)
        .filter(|&v| !incident[v as usize].is_empty())
        .map(|v| (Reverse(incident[v as usize].len()), v))
        .collect();

    let mut tokens = Vec::new();
    let mut block: Option<u32> = None;
    let mut put_vertex = |tokens: &mut Vec<u32>, v: u32, opener: Option<PatchKind>| {
        let (b, o) = vocab.split_vertex(&mesh.vertices[v as usize]);
        if block != Some(b) {
            tokens.push(vocab.block_token(b));
            block = Some(b);
        }
        tokens.push(match opener {
            Some(kind) => vocab.patch_token(kind, o),
            None => vocab.offset_token(o),
        });
    };

    while let Some(&(_, center)) = queue.iter().next() {
        let fan = best_fan(mesh, center, &incident[center as usize]);
        let kind = PatchKind {
            faces: fan.faces.len() as u32,
            closed: fan.closed,
        };
        put_vertex(&mut tokens, fan.center, Some(kind));
        for &r in &fan.ring {
            put_vertex(&mut tokens, r, None);
        }
        for &f in &fan.faces {
            visited[f] = true;
            for &v in &mesh.faces[f] {
                let list = &mut incident[v as usize];
                queue.remove(&(Reverse(list.len()), v));
                list.retain(|&g| g != f);
                if !list.is_empty() {
                    queue.insert((Reverse(list.len()), v));
                }
            }
        }
    }
    debug_assert!(visited.iter().all(|&v| v));
    TokenSequence::new(vocab, tokens)
}

#[derive(Debug, Clone)]
struct OpenPatch {
    kind: PatchKind,
    center: u32,
    ring: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct BlockPatchDecoder {
    vocab: MeshVocabulary,
    sink: FaceSink,
    offset: usize,
    block: Option<u32>,
    block_fresh: bool,
    patch: Option<OpenPatch>,
}

impl BlockPatchDecoder {
    pub fn new(vocab: MeshVocabulary) -> Self {
        Self {
            vocab,
            sink: FaceSink::new(vocab.grid),
            offset: 0,
            block: None,
            block_fresh: false,
            patch: None,
        }
    }

    fn vertex(&mut self, offset: usize, off: u32) -> Result<u32, CodecError> {
        let block = self.block.ok_or_else(|| CodecError::Invalid {
            offset,
            reason: "vertex before any block".into(),
        })?;
        let q = self
            .vocab
            .join_vertex(block, off)
            .ok_or_else(|| CodecError::Invalid {
                offset,
                reason: "vertex outside the grid".into(),
            })?;
        self.block_fresh = false;
        Ok(self.sink.intern(q))
    }

    pub fn push(&mut self, token: u32) -> Result<(), CodecError> {
        let offset = self.offset;
        match classify_at(&self.vocab, offset, token)? {
            TokenClass::Block(b) => {
                if self.block_fresh {
                    return Err(CodecError::Unexpected {
                        offset,
                        expected: "offset or patch",
                        found: "block",
                    });
                }
                if self.block == Some(b) {
                    return Err(CodecError::Invalid {
                        offset,
                        reason: "block token repeats the current block".into(),
                    });
                }
                self.block = Some(b);
                self.block_fresh = true;
            }
            TokenClass::Patch { kind, offset: off } => {
                if self.patch.is_some() {
                    return Err(CodecError::Unexpected {
                        offset,
                        expected: "offset",
                        found: "patch",
                    });
                }
                let center = self.vertex(offset, off)?;
                self.patch = Some(OpenPatch {
                    kind,
                    center,
                    ring: Vec::with_capacity(kind.ring_len() as usize),
                });
            }
            TokenClass::Offset(off) => {
                if self.patch.is_none() {
                    return Err(CodecError::Unexpected {
                        offset,
                        expected: "patch",
                        found: "offset",
                    });
                }
                let v = self.vertex(offset, off)?;
                let patch = self.patch.as_mut().unwrap();
                patch.ring.push(v);
                if patch.ring.len() == patch.kind.ring_len() as usize {
                    let p = self.patch.take().unwrap();
                    let n = p.ring.len();
                    for i in 0..p.kind.faces as usize {
                        self.sink
                            .add_face(offset, [p.center, p.ring[i], p.ring[(i + 1) % n]])?;
                    }
                }
            }
            other => {
                return Err(CodecError::Unexpected {
                    offset,
                    expected: "block, offset or patch",
                    found: other.label(),
                })
            }
        }
        self.offset += 1;
        Ok(())
    }

    pub fn at_boundary(&self) -> bool {
        self.patch.is_none() && !self.block_fresh
    }

    pub fn pending(&self) -> &'static str {
        if self.patch.is_some() {
            "a patch ring"
        } else {
            "a vertex"
        }
    }

    pub fn consumed(&self) -> usize {
        self.offset
    }

    pub(crate) fn into_sink(self) -> FaceSink {
        self.sink
    }
}

#[cfg(test)]
mod tests {
    use super::super::{canonicalize, decode, encode_coordinate};
    use super::*;
    use crate::corpus;
    use crate::quantize::QuantizationGrid;

    fn grid() -> QuantizationGrid {
        QuantizationGrid::new(128).unwrap()
    }

    #[test]
    fn roundtrips_bundled_corpus() {
        for e in corpus::bundled() {
            let c = canonicalize(&e.mesh, grid()).unwrap();
            let s = encode_block_patch(&c);
            assert!(s.in_vocabulary());
            let back = decode(&s.tokens, s.vocab).unwrap_or_else(|err| panic!("{}: {err}", e.name));
            assert_eq!(back, c, "{}", e.name);
            assert!(s.len() <= encode_coordinate(&c).len(), "{}", e.name);
        }
    }

    #[test]
    fn closed_fan_of_an_icosahedron_vertex() {
        let c = canonicalize(&corpus::icosphere(0), grid()).unwrap();
        let s = encode_block_patch(&c);
        let first_patch = s
            .tokens
            .iter()
            .find_map(|&t| match s.vocab.classify(t) {
                Some(TokenClass::Patch { kind, .. }) => Some(kind),
                _ => None,
            })
            .unwrap();
        assert_eq!(
            first_patch,
            PatchKind {
                faces: 5,
                closed: true
            }
        );
    }

    #[test]
    fn rejects_redundant_block_and_missing_block() {
        let v = MeshVocabulary::new(Scheme::BlockPatch, grid());
        let kind = PatchKind {
            faces: 1,
            closed: false,
        };
        let err = decode(&[v.patch_token(kind, 0)], v).unwrap_err();
        assert_eq!(err.offset(), Some(0));
        let err = decode(&[v.block_token(3), v.block_token(3)], v).unwrap_err();
        assert_eq!(err.offset(), Some(1));
        let err = decode(&[v.block_token(3), v.offset_token(1)], v).unwrap_err();
        assert_eq!(err.offset(), Some(1));
        let err = decode(&[v.block_token(3)], v).unwrap_err();
        assert!(matches!(err, CodecError::Truncated { offset: 1, .. }));
    }
}
