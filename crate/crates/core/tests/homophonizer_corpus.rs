use std::fs;
use std::path::PathBuf;

use scorealign::homophonize::{homophonize, signature};
use scorealign::score::parse_text;

fn fixtures() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/homophonizer");
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn corpus_has_thirty_fixtures() {
    assert_eq!(fixtures().len(), 30);
}

#[test]
fn invariants_and_idempotence() {
    for (name, text) in fixtures() {
        let score = parse_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let h1 = homophonize(&score).unwrap_or_else(|e| panic!("{name}: {e}"));
        h1.check_invariants().unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(h1.factors.windows(2).all(|w| w[0].score_time < w[1].score_time), "{name}");
        assert!(h1.factors.iter().all(|f| !f.is_empty()), "{name}");
        let h2 = homophonize(&h1.to_single_voice()).unwrap_or_else(|e| panic!("{name}: {e}"));
        h2.check_invariants().unwrap();
        assert_eq!(signature(&h1), signature(&h2), "{name}\n{}\n{}", h1.dump(), h2.dump());
        let h3 = homophonize(&h2.to_single_voice()).unwrap();
        assert_eq!(h2, h3, "{name}");
    }
}
