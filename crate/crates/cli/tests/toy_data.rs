//! The shipped toy dataset must be exactly what the generator produces.
//! Set `EVENTRANK_BLESS=1` to rewrite the files.

use std::path::Path;

use eventrank::synthetic::toy_dataset;

#[test]
fn shipped_toy_files_match_generator() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let toy = toy_dataset();
    if std::env::var_os("EVENTRANK_BLESS").is_some() {
        toy.write(&dir).unwrap();
    }
    for (name, body) in &toy.files {
        let on_disk = std::fs::read_to_string(dir.join(name))
            .unwrap_or_else(|e| panic!("{name}: {e} (run with EVENTRANK_BLESS=1)"));
        assert!(on_disk == *body, "{name} differs from the generator output");
    }
}
