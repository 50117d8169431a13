//! Tokenization of posed object meshes, with the geometry, preprocessing
//! and evaluation code around it.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod codec;
pub mod corpus;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod metrics;
pub mod pose;
pub mod preprocess;
pub mod quantize;
pub mod sequence;
pub mod spatial;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/quantization.md")]
    struct Quantization;
    #[doc = include_str!("../../../book/src/tokenizers.md")]
    struct Tokenizers;
    #[doc = include_str!("../../../book/src/poses.md")]
    struct Poses;
    #[doc = include_str!("../../../book/src/sequences.md")]
    struct Sequences;
    #[doc = include_str!("../../../book/src/geometry.md")]
    struct Geometry;
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    struct Preprocessing;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/formats.md")]
    struct Formats;
}
