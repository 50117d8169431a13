//! Compact strip tokenization over a half-edge structure.
//!
//! Faces are covered by strips. The first face of a strip spells out its
//! three vertices; every later face crosses one edge of its predecessor and
//! only spells out the vertex opposite that edge:
//!
//! ```text
//! face (a, b, c), entered through a -> b
//!   R d  => next face (c, b, d), entered through c -> b
//!   L d  => next face (a, c, d), entered through a -> c
//! ```
//!
//! `L`/`R` come in two flavours telling the decoder whether the apex is a
//! new vertex or one it has already seen. The first strip of a stream needs
//! no `S` marker. Components with non-manifold or inconsistently oriented
//! edges are written face by face after an `X` marker.

use std::collections::{BTreeSet, HashMap};

use super::halfedge::HalfEdgeMesh;
use super::{
    classify_at, CanonicalMesh, CodecError, CompactOp, FaceSink, MeshVocabulary, Scheme,
    TokenClass, TokenSequence,
};
use crate::mesh::edge_key;

struct Emitter<'a> {
    mesh: &'a CanonicalMesh,
    vocab: MeshVocabulary,
    tokens: Vec<u32>,
    seen: Vec<bool>,
}

impl Emitter<'_> {
    fn vertex(&mut self, v: u32) {
        self.seen[v as usize] = true;
        let q = self.mesh.vertices[v as usize];
        self.tokens
            .extend(q.iter().map(|&b| self.vocab.coord_token(b)));
    }

    fn op(&mut self, op: CompactOp) {
        self.tokens.push(self.vocab.control_token(op));
    }
}

/// Faces belonging to components that touch a defective edge.
fn fallback_faces(mesh: &CanonicalMesh, he: &HalfEdgeMesh) -> Vec<bool> {
    let nf = mesh.faces.len();
    let mut parent: Vec<usize> = (0..nf).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut first_on_edge: HashMap<(u32, u32), usize> = HashMap::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let e = edge_key(face[k], face[(k + 1) % 3]);
            let g = *first_on_edge.entry(e).or_insert(f);
            let (ra, rb) = (find(&mut parent, f), find(&mut parent, g));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut bad_root = vec![false; nf];
    for h in 0..he.half_edge_count() as u32 {
        if he.is_defective(h) {
            let r = find(&mut parent, he.face(h) as usize);
            bad_root[r] = true;
        }
    }
    (0..nf).map(|f| bad_root[find(&mut parent, f)]).collect()
}

/// Encode a canonical mesh. The stream length is `9` for the first face,
/// `4` for each face continuing a strip, and `10` for each later strip
/// start or fallback face.
pub fn encode_compact(mesh: &CanonicalMesh) -> TokenSequence {
    let vocab = MeshVocabulary::new(Scheme::Compact, mesh.grid);
    let he = HalfEdgeMesh::build(mesh);
    let nf = mesh.faces.len();
    let fallback = fallback_faces(mesh, &he);
    let mut em = Emitter {
        mesh,
        vocab,
        tokens: Vec::with_capacity(5 * nf),
        seen: vec![false; mesh.vertices.len()],
    };

    let mut visited = fallback.clone();
    let he = &he;
    let neighbors = |f: u32| (0..3).filter_map(move |k| he.twin(3 * f + k).map(|t| he.face(t)));
    let mut free: Vec<u8> = (0..nf as u32)
        .map(|f| neighbors(f).filter(|&g| !fallback[g as usize]).count() as u8)
        .collect();
    let mut queue: BTreeSet<(u8, u32)> = (0..nf as u32)
        .filter(|&f| !fallback[f as usize])
        .map(|f| (free[f as usize], f))
        .collect();

    let visit =
        |f: u32, visited: &mut Vec<bool>, free: &mut Vec<u8>, queue: &mut BTreeSet<(u8, u32)>| {
            visited[f as usize] = true;
            queue.remove(&(free[f as usize], f));
            for g in neighbors(f) {
                if !visited[g as usize] {
                    queue.remove(&(free[g as usize], g));
                    free[g as usize] -= 1;
                    queue.insert((free[g as usize], g));
                }
            }
        };

    let mut first = true;
    while let Some(&(_, start)) = queue.iter().next() {
        visit(start, &mut visited, &mut free, &mut queue);
        // enter through an edge with nothing unvisited behind it
        let mut h = 3 * start;
        for k in 0..3 {
            let cand = 3 * start + k;
            if he.twin(cand).is_none_or(|t| visited[he.face(t) as usize]) {
                h = cand;
                break;
            }
        }
        if !first {
            em.op(CompactOp::Strip);
        }
        first = false;
        em.vertex(he.origin(h));
        em.vertex(he.target(h));
        em.vertex(he.target(he.next(h)));

        loop {
            let open = |e: u32| he.twin(e).filter(|&t| !visited[he.face(t) as usize]);
            let right = open(he.next(h));
            let left = open(he.prev(h));
            let (t, is_left) = match (right, left) {
                (Some(r), Some(l)) => {
                    if free[he.face(l) as usize] < free[he.face(r) as usize] {
                        (l, true)
                    } else {
                        (r, false)
                    }
                }
                (Some(r), None) => (r, false),
                (None, Some(l)) => (l, true),
                (None, None) => break,
            };
            visit(he.face(t), &mut visited, &mut free, &mut queue);
            let apex = he.target(he.next(t));
            let seen = em.seen[apex as usize];
            em.op(match (is_left, seen) {
                (true, false) => CompactOp::LeftNew,
                (true, true) => CompactOp::LeftSeen,
                (false, false) => CompactOp::RightNew,
                (false, true) => CompactOp::RightSeen,
            });
            em.vertex(apex);
            h = t;
        }
    }

    for (f, face) in mesh.faces.iter().enumerate() {
        if fallback[f] {
            em.op(CompactOp::Raw);
            for &v in face {
                em.vertex(v);
            }
        }
    }
    TokenSequence::new(vocab, em.tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    /// Vertices of a strip's first face.
    StripStart,
    /// Vertices of a fallback face.
    Raw,
    /// Apex after a gate-crossing control.
    Apex { left: bool, new: bool },
}

#[derive(Debug, Clone)]
pub struct CompactDecoder {
    vocab: MeshVocabulary,
    sink: FaceSink,
    offset: usize,
    pending: Option<(Pending, Vec<u32>)>,
    /// Current strip face as (entry origin, entry target, apex).
    gate: Option<[u32; 3]>,
}

impl CompactDecoder {
    pub fn new(vocab: MeshVocabulary) -> Self {
        Self {
            vocab,
            sink: FaceSink::new(vocab.grid),
            offset: 0,
            pending: None,
            gate: None,
        }
    }

    pub fn push(&mut self, token: u32) -> Result<(), CodecError> {
        let offset = self.offset;
        let class = classify_at(&self.vocab, offset, token)?;
        match (self.pending.take(), class) {
            (Some((kind, mut coords)), TokenClass::Coord(bin)) => {
                coords.push(bin);
                let need = if matches!(kind, Pending::Apex { .. }) {
                    3
                } else {
                    9
                };
                if coords.len() < need {
                    self.pending = Some((kind, coords));
                } else {
                    self.complete(offset, kind, &coords)?;
                }
            }
            (Some(_), other) => {
                return Err(CodecError::Unexpected {
                    offset,
                    expected: "coord",
                    found: other.label(),
                })
            }
            (None, TokenClass::Coord(bin)) if offset == 0 => {
                self.pending = Some((Pending::StripStart, vec![bin]));
            }
            (None, TokenClass::Control(op)) => {
                let kind = match op {
                    CompactOp::Strip if offset == 0 => {
                        return Err(CodecError::Unexpected {
                            offset,
                            expected: "coord or X",
                            found: "control",
                        })
                    }
                    CompactOp::Strip => Pending::StripStart,
                    CompactOp::Raw => Pending::Raw,
                    _ if self.gate.is_none() => {
                        return Err(CodecError::Invalid {
                            offset,
                            reason: format!("{} without a strip to continue", op.symbol()),
                        })
                    }
                    CompactOp::LeftNew => Pending::Apex {
                        left: true,
                        new: true,
                    },
                    CompactOp::LeftSeen => Pending::Apex {
                        left: true,
                        new: false,
                    },
                    CompactOp::RightNew => Pending::Apex {
                        left: false,
                        new: true,
                    },
                    CompactOp::RightSeen => Pending::Apex {
                        left: false,
                        new: false,
                    },
                };
                self.pending = Some((kind, Vec::with_capacity(9)));
            }
            (None, other) => {
                return Err(CodecError::Unexpected {
                    offset,
                    expected: "control",
                    found: other.label(),
                })
            }
        }
        self.offset += 1;
        Ok(())
    }

    fn complete(&mut self, offset: usize, kind: Pending, c: &[u32]) -> Result<(), CodecError> {
        match kind {
            Pending::StripStart | Pending::Raw => {
                let ids = [0, 3, 6].map(|k| self.sink.intern([c[k], c[k + 1], c[k + 2]]));
                self.sink.add_face(offset, ids)?;
                self.gate = (kind == Pending::StripStart).then_some(ids);
            }
            Pending::Apex { left, new } => {
                let q = [c[0], c[1], c[2]];
                if self.sink.contains(&q) == new {
                    let reason = if new {
                        "apex marked new was already decoded"
                    } else {
                        "apex marked seen was never decoded"
                    };
                    return Err(CodecError::Invalid {
                        offset,
                        reason: reason.into(),
                    });
                }
                let d = self.sink.intern(q);
                let [a, b, cc] = self.gate.expect("gate checked on control");
                let face = if left { [a, cc, d] } else { [cc, b, d] };
                self.sink.add_face(offset, face)?;
                self.gate = Some(face);
            }
        }
        Ok(())
    }

    pub fn at_boundary(&self) -> bool {
        self.pending.is_none()
    }

    pub fn pending(&self) -> &'static str {
        match self.pending {
            Some((Pending::Apex { .. }, _)) => "an apex vertex",
            Some((Pending::Raw, _)) => "a fallback face",
            _ => "a strip start",
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
        QuantizationGrid::new(512).unwrap()
    }

    #[test]
    fn single_triangle_costs_nine() {
        let c = canonicalize(&corpus::triangle(), grid()).unwrap();
        let s = encode_compact(&c);
        assert_eq!(s.len(), 9);
        assert_eq!(decode(&s.tokens, s.vocab).unwrap(), c);
    }

    #[test]
    fn roundtrips_bundled_corpus() {
        for e in corpus::bundled() {
            let c = canonicalize(&e.mesh, grid()).unwrap();
            let s = encode_compact(&c);
            assert!(s.in_vocabulary());
            let back = decode(&s.tokens, s.vocab).unwrap_or_else(|err| panic!("{}: {err}", e.name));
            assert_eq!(back, c, "{}", e.name);
        }
    }

    #[test]
    fn never_longer_than_one_control_per_face_over_coordinates() {
        for e in corpus::bundled() {
            let c = canonicalize(&e.mesh, grid()).unwrap();
            assert!(encode_compact(&c).len() <= encode_coordinate(&c).len() + c.faces.len());
        }
    }

    #[test]
    fn non_manifold_component_uses_fallback() {
        let c = canonicalize(&corpus::fin_triple(), grid()).unwrap();
        let s = encode_compact(&c);
        let raw = s.vocab.control_token(CompactOp::Raw);
        assert_eq!(s.tokens.iter().filter(|&&t| t == raw).count(), 3);
        assert_eq!(decode(&s.tokens, s.vocab).unwrap(), c);
    }

    #[test]
    fn truncation_reports_offset() {
        let c = canonicalize(&corpus::icosphere(1), grid()).unwrap();
        let s = encode_compact(&c);
        for cut in [1, 5, 10, 11, s.len() - 1] {
            let err = decode(&s.tokens[..cut], s.vocab).unwrap_err();
            assert!(matches!(err, CodecError::Truncated { .. }), "{err}");
            assert_eq!(err.offset(), Some(cut));
        }
    }

    #[test]
    fn rejects_gate_without_strip_and_seen_mismatch() {
        let v = MeshVocabulary::new(Scheme::Compact, grid());
        let l = v.control_token(CompactOp::LeftNew);
        let raw = v.control_token(CompactOp::Raw);
        let err = decode(&[raw, 0, 0, 0, 1, 0, 0, 0, 1, 0, l], v).unwrap_err();
        assert_eq!(err.offset(), Some(10));
        // first face then "L*" to an unseen vertex
        let ls = v.control_token(CompactOp::LeftSeen);
        let err = decode(&[0, 0, 0, 1, 0, 0, 0, 1, 0, ls, 5, 5, 5], v).unwrap_err();
        assert_eq!(err.offset(), Some(12));
        let s = v.control_token(CompactOp::Strip);
        assert_eq!(decode(&[s], v).unwrap_err().offset(), Some(0));
    }
}
