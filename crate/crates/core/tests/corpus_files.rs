//! The OBJ files under `tests/data/corpus` mirror `corpus::bundled()`.
//! Regenerate with `SCENETOK_WRITE_CORPUS=1 cargo test --test corpus_files`.

use std::path::PathBuf;

use scenetok::corpus;
use scenetok::io::{read_mesh, write_mesh, LabeledMesh};

#[test]
fn corpus_files_match_builders() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus");
    let write = std::env::var_os("SCENETOK_WRITE_CORPUS").is_some();
    for e in corpus::bundled() {
        let path = dir.join(format!("{}.obj", e.name));
        if write {
            write_mesh(&path, &LabeledMesh::plain(e.mesh.clone())).unwrap();
        }
        let on_disk = read_mesh(&path).unwrap_or_else(|err| panic!("{}: {err}", path.display()));
        assert_eq!(on_disk.mesh, e.mesh, "{} is stale", path.display());
    }
}
