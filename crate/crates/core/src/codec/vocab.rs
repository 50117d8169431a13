//! Token id layouts for the three mesh schemes.
//!
//! | scheme     | ids                                                     |
//! |------------|---------------------------------------------------------|
//! | coordinate | `[0, N)` axis bins                                      |
//! | compact    | `[0, N)` axis bins, `[N, N+6)` traversal controls       |
//! | block      | blocks, then 512 offsets, then 71 x 512 patch openers   |
//!
//! At `N = 512` the compact scheme has 518 ids; at `N = 128` the block
//! scheme has `16^3 + 512 + 71 * 512 = 40960` ids.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::quantize::{QuantizationGrid, QuantizedVertex};

/// Side length, in bins, of one block cell.
pub const BLOCK_SIDE: u32 = 8;
/// Offsets within a block: `BLOCK_SIDE^3`.
pub const OFFSET_COUNT: u32 = BLOCK_SIDE * BLOCK_SIDE * BLOCK_SIDE;
/// Largest face count of an open fan patch.
pub const MAX_OPEN_FAN: u32 = 36;
/// Smallest and largest face counts of a closed fan patch.
pub const MIN_CLOSED_FAN: u32 = 3;
pub const MAX_CLOSED_FAN: u32 = 37;
/// Number of distinct patch shapes: 36 open + 35 closed.
pub const PATCH_KINDS: u32 = MAX_OPEN_FAN + (MAX_CLOSED_FAN - MIN_CLOSED_FAN + 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Coordinate,
    Compact,
    BlockPatch,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Coordinate, Scheme::Compact, Scheme::BlockPatch];

    pub fn id(self) -> u8 {
        match self {
            Scheme::Coordinate => 0,
            Scheme::Compact => 1,
            Scheme::BlockPatch => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Coordinate => "coord",
            Scheme::Compact => "compact",
            Scheme::BlockPatch => "block",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Traversal controls of the compact scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompactOp {
    /// Start a new strip: three vertices follow.
    Strip,
    /// Cross the left gate edge to a vertex not seen before.
    LeftNew,
    /// Cross the right gate edge to a vertex not seen before.
    RightNew,
    /// Cross the left gate edge to an already decoded vertex.
    LeftSeen,
    /// Cross the right gate edge to an already decoded vertex.
    RightSeen,
    /// A free-standing face from a fallback component: three vertices follow.
    Raw,
}

impl CompactOp {
    pub const ALL: [CompactOp; 6] = [
        CompactOp::Strip,
        CompactOp::LeftNew,
        CompactOp::RightNew,
        CompactOp::LeftSeen,
        CompactOp::RightSeen,
        CompactOp::Raw,
    ];

    pub fn index(self) -> u32 {
        CompactOp::ALL.iter().position(|&o| o == self).unwrap() as u32
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompactOp::Strip => "S",
            CompactOp::LeftNew => "L",
            CompactOp::RightNew => "R",
            CompactOp::LeftSeen => "L*",
            CompactOp::RightSeen => "R*",
            CompactOp::Raw => "X",
        }
    }
}

/// Shape of a fan patch in the block scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchKind {
    pub faces: u32,
    pub closed: bool,
}

impl PatchKind {
    pub fn code(self) -> u32 {
        if self.closed {
            MAX_OPEN_FAN + (self.faces - MIN_CLOSED_FAN)
        } else {
            self.faces - 1
        }
    }

    pub fn from_code(code: u32) -> PatchKind {
        debug_assert!(code < PATCH_KINDS);
        if code < MAX_OPEN_FAN {
            PatchKind {
                faces: code + 1,
                closed: false,
            }
        } else {
            PatchKind {
                faces: code - MAX_OPEN_FAN + MIN_CLOSED_FAN,
                closed: true,
            }
        }
    }

    /// Vertices on the ring around the center.
    pub fn ring_len(self) -> u32 {
        if self.closed {
            self.faces
        } else {
            self.faces + 1
        }
    }
}

/// A token id decoded into its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Coord(u32),
    Control(CompactOp),
    Block(u32),
    Offset(u32),
    Patch { kind: PatchKind, offset: u32 },
}

impl TokenClass {
    pub fn label(&self) -> &'static str {
        match self {
            TokenClass::Coord(_) => "coord",
            TokenClass::Control(_) => "control",
            TokenClass::Block(_) => "block",
            TokenClass::Offset(_) => "offset",
            TokenClass::Patch { .. } => "patch",
        }
    }
}

/// Vocabulary of one mesh scheme at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshVocabulary {
    pub scheme: Scheme,
    pub grid: QuantizationGrid,
}

impl MeshVocabulary {
    pub fn new(scheme: Scheme, grid: QuantizationGrid) -> Self {
        Self { scheme, grid }
    }

    pub fn resolution(&self) -> u32 {
        self.grid.resolution()
    }

    /// Blocks per axis in the block scheme (at least one).
    pub fn blocks_per_axis(&self) -> u32 {
        (self.resolution() / BLOCK_SIDE).max(1)
    }

    pub fn block_count(&self) -> u32 {
        self.blocks_per_axis().pow(3)
    }

    fn offset_base(&self) -> u32 {
        self.block_count()
    }

    fn patch_base(&self) -> u32 {
        self.block_count() + OFFSET_COUNT
    }

    pub fn size(&self) -> u32 {
        let n = self.resolution();
        match self.scheme {
            Scheme::Coordinate => n,
            Scheme::Compact => n + CompactOp::ALL.len() as u32,
            Scheme::BlockPatch => self.patch_base() + PATCH_KINDS * OFFSET_COUNT,
        }
    }

    /// Token ranges as `(label, start, end)`, contiguous and disjoint.
    pub fn ranges(&self) -> Vec<(&'static str, u32, u32)> {
        let n = self.resolution();
        match self.scheme {
            Scheme::Coordinate => vec![("coord", 0, n)],
            Scheme::Compact => vec![("coord", 0, n), ("control", n, self.size())],
            Scheme::BlockPatch => vec![
                ("block", 0, self.offset_base()),
                ("offset", self.offset_base(), self.patch_base()),
                ("patch", self.patch_base(), self.size()),
            ],
        }
    }

    pub fn classify(&self, token: u32) -> Option<TokenClass> {
        let n = self.resolution();
        match self.scheme {
            Scheme::Coordinate => (token < n).then_some(TokenClass::Coord(token)),
            Scheme::Compact => {
                if token < n {
                    Some(TokenClass::Coord(token))
                } else {
                    CompactOp::ALL
                        .get((token - n) as usize)
                        .map(|&op| TokenClass::Control(op))
                }
            }
            Scheme::BlockPatch => {
                if token < self.offset_base() {
                    Some(TokenClass::Block(token))
                } else if token < self.patch_base() {
                    Some(TokenClass::Offset(token - self.offset_base()))
                } else if token < self.size() {
                    let rel = token - self.patch_base();
                    Some(TokenClass::Patch {
                        kind: PatchKind::from_code(rel / OFFSET_COUNT),
                        offset: rel % OFFSET_COUNT,
                    })
                } else {
                    None
                }
            }
        }
    }

    pub fn coord_token(&self, bin: u32) -> u32 {
        debug_assert!(self.scheme != Scheme::BlockPatch && bin < self.resolution());
        bin
    }

    pub fn control_token(&self, op: CompactOp) -> u32 {
        debug_assert_eq!(self.scheme, Scheme::Compact);
        self.resolution() + op.index()
    }

    pub fn block_token(&self, block: u32) -> u32 {
        block
    }

    pub fn offset_token(&self, offset: u32) -> u32 {
        self.offset_base() + offset
    }

    pub fn patch_token(&self, kind: PatchKind, offset: u32) -> u32 {
        self.patch_base() + kind.code() * OFFSET_COUNT + offset
    }

    /// Split a quantized vertex into `(block, offset)` ids.
    pub fn split_vertex(&self, q: &QuantizedVertex) -> (u32, u32) {
        let m = self.blocks_per_axis();
        let s = BLOCK_SIDE;
        let b = |i: usize| q[i] / s;
        let o = |i: usize| q[i] % s;
        let block = (b(2) * m + b(1)) * m + b(0);
        let offset = (o(2) * s + o(1)) * s + o(0);
        (block, offset)
    }

    /// Inverse of [`split_vertex`](Self::split_vertex). Returns `None` when
    /// the pair lands outside the grid (possible for `N < 8`).
    pub fn join_vertex(&self, block: u32, offset: u32) -> Option<QuantizedVertex> {
        let m = self.blocks_per_axis();
        let s = BLOCK_SIDE;
        let (bx, by, bz) = (block % m, (block / m) % m, block / (m * m));
        let (ox, oy, oz) = (offset % s, (offset / s) % s, offset / (s * s));
        let q = [bx * s + ox, by * s + oy, bz * s + oz];
        let n = self.resolution();
        q.iter().all(|&c| c < n).then_some(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(scheme: Scheme, n: u32) -> MeshVocabulary {
        MeshVocabulary::new(scheme, QuantizationGrid::new(n).unwrap())
    }

    #[test]
    fn published_sizes() {
        assert_eq!(vocab(Scheme::Compact, 512).size(), 518);
        let b = vocab(Scheme::BlockPatch, 128);
        assert_eq!(b.block_count(), 4096);
        assert_eq!(OFFSET_COUNT, 512);
        assert_eq!(PATCH_KINDS * OFFSET_COUNT, 36_352);
        assert_eq!(b.size(), 40_960);
    }

    #[test]
    fn ranges_are_contiguous() {
        for scheme in Scheme::ALL {
            for n in [16, 128, 512] {
                let v = vocab(scheme, n);
                let r = v.ranges();
                assert_eq!(r[0].1, 0);
                for w in r.windows(2) {
                    assert_eq!(w[0].2, w[1].1);
                }
                assert_eq!(r.last().unwrap().2, v.size());
            }
        }
    }

    #[test]
    fn classify_inverts_constructors() {
        let v = vocab(Scheme::BlockPatch, 128);
        for code in 0..PATCH_KINDS {
            let kind = PatchKind::from_code(code);
            assert_eq!(kind.code(), code);
            let t = v.patch_token(kind, 77);
            assert_eq!(v.classify(t), Some(TokenClass::Patch { kind, offset: 77 }));
        }
        assert_eq!(v.classify(v.offset_token(5)), Some(TokenClass::Offset(5)));
        assert_eq!(
            v.classify(v.block_token(4095)),
            Some(TokenClass::Block(4095))
        );
        assert_eq!(v.classify(v.size()), None);

        let c = vocab(Scheme::Compact, 512);
        for op in CompactOp::ALL {
            assert_eq!(
                c.classify(c.control_token(op)),
                Some(TokenClass::Control(op))
            );
        }
        assert_eq!(c.classify(518), None);
    }

    #[test]
    fn vertex_split_roundtrip() {
        let v = vocab(Scheme::BlockPatch, 128);
        for q in [[0, 0, 0], [127, 127, 127], [9, 64, 100], [7, 8, 15]] {
            let (b, o) = v.split_vertex(&q);
            assert!(b < 4096 && o < 512);
            assert_eq!(v.join_vertex(b, o), Some(q));
        }
        // a 4-bin grid has one block and offsets beyond the grid are invalid
        let small = vocab(Scheme::BlockPatch, 4);
        assert_eq!(small.join_vertex(0, 7), None);
    }
}
