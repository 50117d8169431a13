//! Half-edge connectivity over a canonical mesh.
//!
//! Half-edge `3f + k` runs from corner `k` to corner `k + 1` of face `f`,
//! so `next` and `face` are implicit. Twins are linked only across edges
//! shared by exactly two faces with opposite directions; every other shared
//! edge is reported as a defect.

use std::collections::HashMap;

use serde::Serialize;

use super::CanonicalMesh;
use crate::mesh::edge_key;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifoldReport {
    /// Edges shared by more than two faces.
    pub non_manifold_edges: Vec<(u32, u32)>,
    /// Edges shared by two faces traversing them in the same direction.
    pub inconsistent_edges: Vec<(u32, u32)>,
}

impl ManifoldReport {
    pub fn is_clean(&self) -> bool {
        self.non_manifold_edges.is_empty() && self.inconsistent_edges.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct HalfEdgeMesh {
    origin: Vec<u32>,
    twin: Vec<Option<u32>>,
    outgoing: Vec<Option<u32>>,
    defective: Vec<bool>,
    report: ManifoldReport,
}

impl HalfEdgeMesh {
    /// Build the structure. Never fails; defects are recorded in
    /// [`report`](Self::report) and the affected half-edges stay unlinked.
    pub fn build(mesh: &CanonicalMesh) -> Self {
        let nh = 3 * mesh.faces.len();
        let mut origin = Vec::with_capacity(nh);
        let mut outgoing = vec![None; mesh.vertices.len()];
        let mut by_edge: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (f, face) in mesh.faces.iter().enumerate() {
            for k in 0..3 {
                let h = (3 * f + k) as u32;
                let (a, b) = (face[k], face[(k + 1) % 3]);
                origin.push(a);
                outgoing[a as usize].get_or_insert(h);
                by_edge.entry(edge_key(a, b)).or_default().push(h);
            }
        }

        let mut twin = vec![None; nh];
        let mut defective = vec![false; nh];
        let mut report = ManifoldReport {
            non_manifold_edges: Vec::new(),
            inconsistent_edges: Vec::new(),
        };
        for (&edge, hs) in &by_edge {
            match hs.as_slice() {
                [_] => {}
                [h0, h1] => {
                    if origin[*h0 as usize] != origin[*h1 as usize] {
                        twin[*h0 as usize] = Some(*h1);
                        twin[*h1 as usize] = Some(*h0);
                    } else {
                        report.inconsistent_edges.push(edge);
                        defective[*h0 as usize] = true;
                        defective[*h1 as usize] = true;
                    }
                }
                _ => {
                    report.non_manifold_edges.push(edge);
                    for &h in hs {
                        defective[h as usize] = true;
                    }
                }
            }
        }
        report.non_manifold_edges.sort_unstable();
        report.inconsistent_edges.sort_unstable();
        Self {
            origin,
            twin,
            outgoing,
            defective,
            report,
        }
    }

    pub fn half_edge_count(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self, h: u32) -> u32 {
        self.origin[h as usize]
    }

    pub fn target(&self, h: u32) -> u32 {
        self.origin(self.next(h))
    }

    pub fn next(&self, h: u32) -> u32 {
        if h % 3 == 2 {
            h - 2
        } else {
            h + 1
        }
    }

    pub fn prev(&self, h: u32) -> u32 {
        self.next(self.next(h))
    }

    pub fn face(&self, h: u32) -> u32 {
        h / 3
    }

    pub fn twin(&self, h: u32) -> Option<u32> {
        self.twin[h as usize]
    }

    pub fn outgoing(&self, v: u32) -> Option<u32> {
        self.outgoing[v as usize]
    }

    /// Unlinked and not part of a defect.
    pub fn is_boundary(&self, h: u32) -> bool {
        self.twin[h as usize].is_none() && !self.defective[h as usize]
    }

    pub fn is_defective(&self, h: u32) -> bool {
        self.defective[h as usize]
    }

    pub fn report(&self) -> &ManifoldReport {
        &self.report
    }
}

/// Build the half-edge structure, failing with the defect report when the
/// mesh is not an oriented 2-manifold (with boundary).
pub fn build_half_edge(mesh: &CanonicalMesh) -> Result<HalfEdgeMesh, ManifoldReport> {
    let he = HalfEdgeMesh::build(mesh);
    if he.report.is_clean() {
        Ok(he)
    } else {
        Err(he.report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::canonicalize;
    use crate::corpus;
    use crate::quantize::QuantizationGrid;

    fn canon(m: &crate::mesh::TriangleMesh) -> CanonicalMesh {
        canonicalize(m, QuantizationGrid::new(256).unwrap()).unwrap()
    }

    fn check_links(he: &HalfEdgeMesh) {
        for h in 0..he.half_edge_count() as u32 {
            assert_eq!(he.next(he.next(he.next(h))), h);
            if let Some(t) = he.twin(h) {
                assert_eq!(he.twin(t), Some(h));
                assert_eq!(he.origin(t), he.target(h));
                assert_eq!(he.target(t), he.origin(h));
            }
        }
    }

    #[test]
    fn closed_tetrahedron() {
        let he = build_half_edge(&canon(&corpus::tetrahedron())).unwrap();
        assert_eq!(he.half_edge_count(), 12);
        assert!((0..12).all(|h| he.twin(h).is_some()));
        check_links(&he);
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let he = build_half_edge(&canon(&corpus::triangle())).unwrap();
        assert_eq!(he.half_edge_count(), 3);
        assert!((0..3).all(|h| he.is_boundary(h)));
    }

    #[test]
    fn orientation_rule() {
        let v = corpus::unit_square().vertices;
        let opposite = crate::mesh::TriangleMesh::new(v.clone(), vec![[0, 1, 2], [0, 2, 3]]);
        let he = build_half_edge(&canon(&opposite)).unwrap();
        assert_eq!((0..6).filter(|&h| he.twin(h).is_some()).count(), 2);

        let same = crate::mesh::TriangleMesh::new(v, vec![[0, 1, 2], [0, 3, 2]]);
        let report = build_half_edge(&canon(&same)).unwrap_err();
        assert_eq!(report.inconsistent_edges.len(), 1);
    }

    #[test]
    fn three_faces_on_one_edge() {
        let report = build_half_edge(&canon(&corpus::fin_triple())).unwrap_err();
        assert_eq!(report.non_manifold_edges.len(), 1);
    }

    #[test]
    fn bundled_corpus_links_are_consistent() {
        for e in corpus::bundled() {
            let he = HalfEdgeMesh::build(&canon(&e.mesh));
            assert_eq!(he.half_edge_count(), 3 * canon(&e.mesh).faces.len());
            check_links(&he);
        }
    }
}
