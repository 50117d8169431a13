mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scenetok::codec::{canonicalize, decode, encode, MeshVocabulary, Scheme};
use scenetok::pose::encode_pose;
use scenetok::quantize::QuantizationGrid;
use scenetok::sequence::{
    assemble, parse_with_mesh, validate_prefix, ObjectRecord, PrefixStatus, UnifiedVocabulary,
};

fn scheme() -> impl Strategy<Value = Scheme> {
    prop::sample::select(Scheme::ALL.to_vec())
}

fn resolution() -> impl Strategy<Value = u32> {
    prop::sample::select(QuantizationGrid::STANDARD.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decode_inverts_encode(seed in any::<u64>(), scheme in scheme(), n in resolution()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = QuantizationGrid::new(n).unwrap();
        let canon = canonicalize(&common::small_manifold(&mut rng), grid).unwrap();
        let vocab = MeshVocabulary::new(scheme, grid);
        let seq = encode(&canon, vocab);
        prop_assert!(seq.tokens.iter().all(|&t| t < vocab.size()));
        prop_assert_eq!(decode(&seq.tokens, vocab).unwrap(), canon);
    }

    #[test]
    fn encoding_is_deterministic_under_reordering(seed in any::<u64>(), scheme in scheme()) {
        // the same mesh drawn twice differs only in vertex and face order
        let grid = QuantizationGrid::new(256).unwrap();
        let vocab = MeshVocabulary::new(scheme, grid);
        let a = common::small_manifold(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut perm = a.clone();
        perm.faces.reverse();
        for f in &mut perm.faces {
            f.rotate_left(1);
        }
        let ta = encode(&canonicalize(&a, grid).unwrap(), vocab).tokens;
        let tb = encode(&canonicalize(&perm, grid).unwrap(), vocab).tokens;
        prop_assert_eq!(ta, tb);
    }

    #[test]
    fn truncated_streams_are_prefixes(seed in any::<u64>(), scheme in scheme(), cut in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = QuantizationGrid::new(128).unwrap();
        let vocab = UnifiedVocabulary::new(MeshVocabulary::new(scheme, grid)).unwrap();
        let canon = canonicalize(&common::small_manifold(&mut rng), grid).unwrap();
        let pose = common::box_inside(&mut rng, 0.05);
        let record = ObjectRecord::encode(&pose, &canon, vocab);
        prop_assert_eq!(record.pose_tokens.len(), encode_pose(&pose, vocab.base()).len());
        let seq = assemble(&record, vocab).unwrap();
        let k = (cut * seq.len() as f64) as usize;
        prop_assert_eq!(validate_prefix(&seq[..k], vocab), PrefixStatus::ValidPrefix);
        let (back, mesh) = parse_with_mesh(&seq, vocab).unwrap();
        prop_assert_eq!(back, record);
        prop_assert_eq!(mesh, canon);
    }
}
