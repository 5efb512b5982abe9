//! Synthetic workloads shared by the benchmarks.

use editprop::{Edit, ProjectSnapshot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 10] = ["request", "response", "handler", "cache", "config", "matcher", "buffer", "client", "server", "token"];

/// `n` Go-like files of eight functions each, spread over seven packages.
pub fn synthetic_project(n: usize, seed: u64) -> ProjectSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| WORDS[rng.random_range(0..WORDS.len())];
    let mut snap = ProjectSnapshot::new("bench");
    for f in 0..n {
        let mut lines = vec![format!("package pkg{}", f % 7), String::new()];
        for fun in 0..8 {
            let (a, b) = (pick(&mut rng), pick(&mut rng));
            lines.push(format!("func {a}{fun}_{f}({b} *{a}Type) error {{"));
            for s in 0..rng.random_range(4..10) {
                let c = pick(&mut rng);
                lines.push(format!("\t{c}{s} := {b}.{a}Lookup({c}, {s})"));
            }
            lines.push("\treturn nil".into());
            lines.push("}".into());
            lines.push(String::new());
        }
        snap.insert_file(&format!("pkg{}/file_{f:03}.go", f % 7), lines)
            .expect("generated paths are valid");
    }
    snap
}

/// A one-line rename inside the first function of the first file.
pub fn rename_edit(snap: &ProjectSnapshot) -> Edit {
    let path = "pkg0/file_000.go";
    let old = snap.file(path).expect("first file")[3].clone();
    Edit::replace(path, 4, vec![old.clone()], vec![old.replace("Lookup", "Find")]).expect("valid edit")
}
