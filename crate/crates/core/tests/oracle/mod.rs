//! Reference implementations used only by tests. None of them touch the
//! integral image, the beam search or the sparse table layout.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

/// Dense row-major matrix `[j][i]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub n: usize,
    pub m: usize,
    pub w: Vec<f64>,
}

impl Dense {
    pub fn random<R: Rng>(rng: &mut R, n: usize, m: usize, lo: f64, hi: f64) -> Dense {
        Dense {
            n,
            m,
            w: (0..n * m).map(|_| rng.gen_range(lo..hi)).collect(),
        }
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.w[j * self.m + i]
    }

    /// Direct double-loop block sum.
    pub fn sum(&self, j0: usize, j1: usize, i0: usize, i1: usize) -> f64 {
        let mut s = 0.0;
        for j in j0..j1 {
            for i in i0..i1 {
                s += self.get(j, i);
            }
        }
        s
    }
}

/// Half-open block (j0, j1, i0, i1).
pub type Span = (usize, usize, usize, usize);

pub fn is_terminal(b: Span) -> bool {
    b.1 - b.0 == 1 || b.3 - b.2 == 1
}

/// Mean F1 of the two kept sub-blocks, each F1 = 2A / (2A + cut).
/// Returns (F_avg, sub-block one, sub-block two).
pub fn f1_mean(d: &Dense, b: Span, j: usize, i: usize, inverted: bool) -> (f64, Span, Span) {
    let (j0, j1, i0, i1) = b;
    let xy = d.sum(j0, j, i0, i);
    let x_yb = d.sum(j0, j, i, i1);
    let xb_y = d.sum(j, j1, i0, i);
    let xb_yb = d.sum(j, j1, i, i1);
    let (cut, a, c, first, second) = if inverted {
        (xy + xb_yb, x_yb, xb_y, (j0, j, i, i1), (j, j1, i0, i))
    } else {
        (x_yb + xb_y, xy, xb_yb, (j0, j, i0, i), (j, j1, i, i1))
    };
    let f1 = |assoc: f64| 2.0 * assoc / (2.0 * assoc + cut);
    ((f1(a) + f1(c)) / 2.0, first, second)
}

/// Scores (Σ log F_avg) of every BTG derivation of block `b`.
pub fn all_derivation_scores(d: &Dense, b: Span) -> Vec<f64> {
    if is_terminal(b) {
        return vec![0.0];
    }
    let mut out = Vec::new();
    for j in b.0 + 1..b.1 {
        for i in b.2 + 1..b.3 {
            for inverted in [false, true] {
                let (f, first, second) = f1_mean(d, b, j, i, inverted);
                let s = f.ln();
                let left = all_derivation_scores(d, first);
                let right = all_derivation_scores(d, second);
                for l in &left {
                    for r in &right {
                        out.push(s + l + r);
                    }
                }
            }
        }
    }
    out
}

pub fn exhaustive_best(d: &Dense) -> f64 {
    all_derivation_scores(d, (0, d.n, 0, d.m))
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Best-1 recursive bipartitioning: each block independently takes its
/// highest-F_avg split. Returns the score and the projected links.
pub fn greedy(d: &Dense) -> (f64, Vec<(usize, usize)>) {
    let mut links = Vec::new();
    let score = greedy_block(d, (0, d.n, 0, d.m), &mut links);
    links.sort();
    (score, links)
}

fn greedy_block(d: &Dense, b: Span, links: &mut Vec<(usize, usize)>) -> f64 {
    if is_terminal(b) {
        for j in b.0..b.1 {
            for i in b.2..b.3 {
                links.push((j, i));
            }
        }
        return 0.0;
    }
    let mut best: Option<(f64, Span, Span)> = None;
    for j in b.0 + 1..b.1 {
        for i in b.2 + 1..b.3 {
            for inverted in [false, true] {
                let cand = f1_mean(d, b, j, i, inverted);
                if best.is_none_or(|x| cand.0 > x.0) {
                    best = Some(cand);
                }
            }
        }
    }
    let (f, first, second) = best.unwrap();
    f.ln() + greedy_block(d, first, links) + greedy_block(d, second, links)
}

/// Textbook dense IBM Model 1 EM for p(f|e), corpus given as
/// (conditioned, conditioning) id sequences; NULL is id 0 when enabled.
/// Returns p keyed by (f, e) restricted to co-occurring pairs.
pub fn naive_ibm1(
    corpus: &[(Vec<u32>, Vec<u32>)],
    iterations: usize,
    use_null: bool,
    vb_alpha: Option<f64>,
) -> HashMap<(u32, u32), f64> {
    let with_null = |e: &Vec<u32>| {
        let mut v = e.clone();
        if use_null {
            v.push(0);
        }
        v
    };
    let mut cooc: HashMap<u32, Vec<u32>> = HashMap::new();
    for (f, e) in corpus {
        for &ew in &with_null(e) {
            cooc.entry(ew).or_default().extend(f.iter().copied());
        }
    }
    let mut t: HashMap<(u32, u32), f64> = HashMap::new();
    for (e, fs) in cooc.iter_mut() {
        fs.sort();
        fs.dedup();
        for &f in fs.iter() {
            t.insert((f, *e), 1.0 / fs.len() as f64);
        }
    }
    let vocab: std::collections::HashSet<u32> =
        corpus.iter().flat_map(|(f, _)| f.iter().copied()).collect();
    for _ in 0..iterations {
        let mut count: HashMap<(u32, u32), f64> = HashMap::new();
        for (f, e) in corpus {
            let es = with_null(e);
            for &fw in f {
                let z: f64 = es.iter().map(|&ew| t[&(fw, ew)]).sum();
                for &ew in &es {
                    *count.entry((fw, ew)).or_default() += t[&(fw, ew)] / z;
                }
            }
        }
        let mut total: HashMap<u32, f64> = HashMap::new();
        for (&(_, e), &c) in &count {
            *total.entry(e).or_default() += c;
        }
        for (key, value) in t.iter_mut() {
            let c = count[key];
            *value = match vb_alpha {
                None => c / total[&key.1],
                Some(alpha) => (series_digamma(c + alpha)
                    - series_digamma(total[&key.1] + alpha * vocab.len() as f64))
                .exp(),
            };
        }
    }
    t
}

/// ψ via a 60-term recurrence shift and a 4-term asymptotic tail, written
/// independently of the library's version.
pub fn series_digamma(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut y = x;
    while y < 60.0 {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let y2 = y * y;
    acc + y.ln() - 1.0 / (2.0 * y) - 1.0 / (12.0 * y2) + 1.0 / (120.0 * y2 * y2)
        - 1.0 / (252.0 * y2 * y2 * y2)
}
