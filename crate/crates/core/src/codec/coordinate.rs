//! Raw coordinate tokenization: nine axis tokens per face.

use super::{
    classify_at, CanonicalMesh, CodecError, FaceSink, MeshVocabulary, Scheme, TokenClass,
    TokenSequence,
};

pub fn encode_coordinate(mesh: &CanonicalMesh) -> TokenSequence {
    let vocab = MeshVocabulary::new(Scheme::Coordinate, mesh.grid);
    let mut tokens = Vec::with_capacity(9 * mesh.faces.len());
    for f in &mesh.faces {
        for &v in f {
            tokens.extend(
                mesh.vertices[v as usize]
                    .iter()
                    .map(|&b| vocab.coord_token(b)),
            );
        }
    }
    TokenSequence::new(vocab, tokens)
}

#[derive(Debug, Clone)]
pub struct CoordinateDecoder {
    vocab: MeshVocabulary,
    sink: FaceSink,
    pending: Vec<u32>,
    offset: usize,
}

impl CoordinateDecoder {
    pub fn new(vocab: MeshVocabulary) -> Self {
        Self {
            vocab,
            sink: FaceSink::new(vocab.grid),
            pending: Vec::with_capacity(9),
            offset: 0,
        }
    }

    pub fn push(&mut self, token: u32) -> Result<(), CodecError> {
        let offset = self.offset;
        let class = classify_at(&self.vocab, offset, token)?;
        let TokenClass::Coord(bin) = class else {
            return Err(CodecError::Unexpected {
                offset,
                expected: "coord",
                found: class.label(),
            });
        };
        self.pending.push(bin);
        if self.pending.len() == 9 {
            let p = &self.pending;
            let ids = [0, 3, 6].map(|k| self.sink.intern([p[k], p[k + 1], p[k + 2]]));
            self.sink.add_face(offset, ids)?;
            self.pending.clear();
        }
        self.offset += 1;
        Ok(())
    }

    pub fn at_boundary(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn pending(&self) -> &'static str {
        "a face"
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
    use super::super::{canonicalize, decode};
    use super::*;
    use crate::corpus;
    use crate::quantize::QuantizationGrid;

    #[test]
    fn nine_tokens_per_face() {
        let g = QuantizationGrid::new(128).unwrap();
        let tri = canonicalize(&corpus::triangle(), g).unwrap();
        assert_eq!(encode_coordinate(&tri).len(), 9);
        let tet = canonicalize(&corpus::tetrahedron(), g).unwrap();
        assert_eq!(encode_coordinate(&tet).len(), 36);
    }

    #[test]
    fn cube_roundtrip() {
        let g = QuantizationGrid::new(128).unwrap();
        let cube = canonicalize(&corpus::cube(), g).unwrap();
        let seq = encode_coordinate(&cube);
        assert_eq!(seq.len(), 108);
        let back = decode(&seq.tokens, seq.vocab).unwrap();
        assert_eq!(back.vertices.len(), 8);
        assert_eq!(back.faces.len(), 12);
        assert_eq!(back, cube);
    }

    #[test]
    fn truncation_and_repeat_are_errors() {
        let g = QuantizationGrid::new(128).unwrap();
        let tet = canonicalize(&corpus::tetrahedron(), g).unwrap();
        let seq = encode_coordinate(&tet);
        let err = decode(&seq.tokens[..20], seq.vocab).unwrap_err();
        assert_eq!(err.offset(), Some(20));
        let mut doubled = seq.tokens[..9].to_vec();
        doubled.extend_from_slice(&seq.tokens[..9]);
        assert_eq!(decode(&doubled, seq.vocab).unwrap_err().offset(), Some(17));
        let err = decode(&[500], seq.vocab).unwrap_err();
        assert!(matches!(err, CodecError::OutOfVocabulary { offset: 0, .. }));
    }
}
