#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Parallel text with a planted one-to-one gold alignment per line.
pub struct Synthetic {
    pub source: Vec<Vec<String>>,
    pub target: Vec<Vec<String>>,
    /// (source index, target index) links per line.
    pub gold: Vec<Vec<(usize, usize)>>,
}

/// `pairs` sentences over a `words`-entry bilingual dictionary. Target
/// order is the source order with random non-overlapping adjacent swaps.
pub fn synthetic(seed: u64, pairs: usize, words: usize, swap_rate: f64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut translation: Vec<usize> = (0..words).collect();
    translation.shuffle(&mut rng);
    let mut out = Synthetic {
        source: Vec::new(),
        target: Vec::new(),
        gold: Vec::new(),
    };
    for _ in 0..pairs {
        let n = rng.gen_range(3..=12);
        let src: Vec<usize> = (0..n).map(|_| rng.gen_range(0..words)).collect();
        // order[k] = source position placed at target position k
        let mut order: Vec<usize> = (0..n).collect();
        let mut k = 0;
        while k + 1 < n {
            if rng.gen_bool(swap_rate) {
                order.swap(k, k + 1);
                k += 2;
            } else {
                k += 1;
            }
        }
        out.source
            .push(src.iter().map(|w| format!("s{w}")).collect());
        out.target.push(
            order
                .iter()
                .map(|&j| format!("t{}", translation[src[j]]))
                .collect(),
        );
        let mut links: Vec<(usize, usize)> =
            order.iter().enumerate().map(|(i, &j)| (j, i)).collect();
        links.sort();
        out.gold.push(links);
    }
    out
}

impl Synthetic {
    /// Writes `src`, `tgt` and `gold` files into `dir`.
    pub fn write(&self, dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let join =
            |lines: &[Vec<String>]| lines.iter().map(|l| l.join(" ") + "\n").collect::<String>();
        let (s, t, g) = (dir.join("src"), dir.join("tgt"), dir.join("gold"));
        fs::write(&s, join(&self.source)).unwrap();
        fs::write(&t, join(&self.target)).unwrap();
        let gold: String = self
            .gold
            .iter()
            .map(|l| {
                l.iter()
                    .map(|(j, i)| format!("{j}-{i}"))
                    .collect::<Vec<_>>()
                    .join(" ")
                    + "\n"
            })
            .collect();
        fs::write(&g, gold).unwrap();
        (s, t, g)
    }
}

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hieralign"));
    c.env_remove("HIERALIGN_THREADS").env_remove("RUST_LOG");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hieralign")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}
