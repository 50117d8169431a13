//! Token files.
//!
//! Binary layout, little-endian: `ARMT`, one scheme byte (scheme id, with
//! `0x10` set for unified object streams), `u16` resolution, `u32` count,
//! then `count` `u32` ids. The JSON-lines dump is for inspection only: a
//! header object, then one `{"i", "id", "class"}` object per token.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use super::IoError;
use crate::codec::{MeshVocabulary, Scheme};
use crate::quantize::QuantizationGrid;
use crate::sequence::UnifiedVocabulary;

const MAGIC: &[u8; 4] = b"ARMT";
const UNIFIED_FLAG: u8 = 0x10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFile {
    pub vocab: MeshVocabulary,
    /// Whether ids follow the unified `<bos> pose <sep> mesh <eos>` layout.
    pub unified: bool,
    pub tokens: Vec<u32>,
}

impl TokenFile {
    pub fn mesh(vocab: MeshVocabulary, tokens: Vec<u32>) -> Self {
        TokenFile {
            vocab,
            unified: false,
            tokens,
        }
    }

    pub fn unified(vocab: UnifiedVocabulary, tokens: Vec<u32>) -> Self {
        TokenFile {
            vocab: vocab.base(),
            unified: true,
            tokens,
        }
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab.size() + if self.unified { 3 } else { 0 }
    }

    pub fn label(&self, token: u32) -> &'static str {
        if self.unified {
            // the base vocabulary always leaves room for the three specials
            UnifiedVocabulary::new(self.vocab).map_or("out-of-vocabulary", |u| u.label(token))
        } else {
            self.vocab
                .classify(token)
                .map_or("out-of-vocabulary", |c| c.label())
        }
    }
}

pub fn write_tokens<W: Write>(w: &mut W, f: &TokenFile) -> Result<(), IoError> {
    let n = u16::try_from(f.vocab.resolution())
        .map_err(|_| IoError::format("armt", "resolution does not fit u16"))?;
    let count =
        u32::try_from(f.tokens.len()).map_err(|_| IoError::format("armt", "too many tokens"))?;
    w.write_all(MAGIC)?;
    w.write_all(&[f.vocab.scheme.id() | if f.unified { UNIFIED_FLAG } else { 0 }])?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    for t in &f.tokens {
        w.write_all(&t.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tokens<R: Read>(mut r: R) -> Result<TokenFile, IoError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let err = |m: String| IoError::format("armt", m);
    if data.len() < 11 || &data[..4] != MAGIC {
        return Err(err("missing ARMT header".into()));
    }
    let flags = data[4];
    let scheme = Scheme::from_id(flags & !UNIFIED_FLAG)
        .ok_or_else(|| err(format!("unknown scheme byte {flags:#04x}")))?;
    let n = u16::from_le_bytes([data[5], data[6]]) as u32;
    let grid = QuantizationGrid::new(n).map_err(|e| err(e.to_string()))?;
    let count = u32::from_le_bytes([data[7], data[8], data[9], data[10]]) as usize;
    let body = &data[11..];
    if body.len() != count * 4 {
        return Err(err(format!("{} body bytes for {count} tokens", body.len())));
    }
    let file = TokenFile {
        vocab: MeshVocabulary::new(scheme, grid),
        unified: flags & UNIFIED_FLAG != 0,
        tokens: body
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    };
    let size = file.vocab_size();
    if let Some(i) = file.tokens.iter().position(|&t| t >= size) {
        return Err(err(format!(
            "token {} at offset {i} exceeds vocabulary size {size}",
            file.tokens[i]
        )));
    }
    Ok(file)
}

pub fn load_tokens(path: &Path) -> Result<TokenFile, IoError> {
    read_tokens(BufReader::new(File::open(path)?))
}

pub fn save_tokens(path: &Path, f: &TokenFile) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tokens(&mut w, f)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Header {
    scheme: Scheme,
    resolution: u32,
    unified: bool,
    vocab_size: u32,
    count: usize,
}

#[derive(Serialize)]
struct Line {
    i: usize,
    id: u32,
    class: &'static str,
}

pub fn write_tokens_jsonl<W: Write>(w: &mut W, f: &TokenFile) -> Result<(), IoError> {
    let header = Header {
        scheme: f.vocab.scheme,
        resolution: f.vocab.resolution(),
        unified: f.unified,
        vocab_size: f.vocab_size(),
        count: f.tokens.len(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    writeln!(w)?;
    for (i, &id) in f.tokens.iter().enumerate() {
        serde_json::to_writer(
            &mut *w,
            &Line {
                i,
                id,
                class: f.label(id),
            },
        )?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{canonicalize, encode};
    use crate::corpus;

    #[test]
    fn binary_roundtrip() {
        for scheme in Scheme::ALL {
            let vocab = MeshVocabulary::new(scheme, QuantizationGrid::new(128).unwrap());
            let canon = canonicalize(&corpus::cube(), vocab.grid).unwrap();
            let f = TokenFile::mesh(vocab, encode(&canon, vocab).tokens);
            let mut buf = Vec::new();
            write_tokens(&mut buf, &f).unwrap();
            assert_eq!(buf.len(), 11 + 4 * f.tokens.len());
            assert_eq!(read_tokens(buf.as_slice()).unwrap(), f);
        }
    }

    #[test]
    fn rejects_bad_files() {
        let vocab = MeshVocabulary::new(Scheme::Coordinate, QuantizationGrid::new(128).unwrap());
        let unified = UnifiedVocabulary::new(vocab).unwrap();
        let ok = TokenFile::unified(unified, vec![unified.bos(), unified.eos()]);
        let mut buf = Vec::new();
        write_tokens(&mut buf, &ok).unwrap();
        assert_eq!(read_tokens(buf.as_slice()).unwrap(), ok);

        let as_mesh = TokenFile {
            unified: false,
            ..ok.clone()
        };
        let mut buf = Vec::new();
        write_tokens(&mut buf, &as_mesh).unwrap();
        assert!(read_tokens(buf.as_slice()).is_err());
        assert!(read_tokens(&buf[..buf.len() - 2]).is_err());
        assert!(read_tokens(&b"ARMX\0\x80\0\0\0\0\0"[..]).is_err());
        assert!(read_tokens(&b"ARMT\x07\x80\0\0\0\0\0"[..]).is_err());
    }

    #[test]
    fn jsonl_dump() {
        let vocab = MeshVocabulary::new(Scheme::Compact, QuantizationGrid::new(512).unwrap());
        let unified = UnifiedVocabulary::new(vocab).unwrap();
        let f = TokenFile::unified(unified, vec![unified.bos(), 3, unified.sep()]);
        let mut buf = Vec::new();
        write_tokens_jsonl(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].contains("\"vocab_size\":521"));
        assert!(lines[1].contains("<bos>"));
        assert!(lines[3].contains("<sep>"));
    }
}
