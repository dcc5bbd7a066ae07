//! Symmetrization of two directional alignments.
//!
//! Both inputs are in (source, target) orientation; a reverse-direction
//! aligner's output must be transposed before it is passed here.

use std::fmt;
use std::str::FromStr;

use crate::alignment::{Alignment, Link};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    Intersection,
    Union,
    GrowDiagFinalAnd,
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intersection" | "intersect" => Ok(Heuristic::Intersection),
            "union" => Ok(Heuristic::Union),
            "gdfa" | "grow-diag-final-and" => Ok(Heuristic::GrowDiagFinalAnd),
            other => Err(format!(
                "unknown heuristic {other:?} (expected intersection, union or gdfa)"
            )),
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::Intersection => "intersection",
            Heuristic::Union => "union",
            Heuristic::GrowDiagFinalAnd => "gdfa",
        })
    }
}

pub fn intersect(fwd: &Alignment, rev: &Alignment) -> Alignment {
    fwd.intersection(rev)
}

pub fn union(fwd: &Alignment, rev: &Alignment) -> Alignment {
    fwd.union(rev)
}

pub fn symmetrize(
    fwd: &Alignment,
    rev: &Alignment,
    n: usize,
    m: usize,
    heuristic: Heuristic,
) -> Alignment {
    match heuristic {
        Heuristic::Intersection => intersect(fwd, rev),
        Heuristic::Union => union(fwd, rev),
        Heuristic::GrowDiagFinalAnd => grow_diag_final_and(fwd, rev, n, m),
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, 0),
    (0, -1),
    (1, 0),
    (0, 1),
    (-1, -1),
    (-1, 1),
    (1, -1),
    (1, 1),
];

struct Grid {
    m: usize,
    cells: Vec<bool>,
    source_aligned: Vec<bool>,
    target_aligned: Vec<bool>,
}

impl Grid {
    fn new(n: usize, m: usize) -> Self {
        Grid {
            m,
            cells: vec![false; n * m],
            source_aligned: vec![false; n],
            target_aligned: vec![false; m],
        }
    }

    fn has(&self, j: usize, i: usize) -> bool {
        self.cells[j * self.m + i]
    }

    fn add(&mut self, j: usize, i: usize) {
        self.cells[j * self.m + i] = true;
        self.source_aligned[j] = true;
        self.target_aligned[i] = true;
    }

    fn links(&self) -> Alignment {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(k, _)| Link::new(k / self.m, k % self.m))
            .collect()
    }
}

/// grow-diag-final-and with row-major scan orders.
///
/// Starts from the intersection, repeatedly adds union links in the
/// 8-neighbourhood of current links whose source or target word is still
/// unaligned, then adds directional links whose source and target words
/// are both unaligned (forward first, then reverse).
pub fn grow_diag_final_and(fwd: &Alignment, rev: &Alignment, n: usize, m: usize) -> Alignment {
    let mut grid = Grid::new(n, m);
    let union = fwd.union(rev);
    let in_bounds = |l: &Link| l.source < n && l.target < m;
    for link in fwd.intersection(rev).iter().filter(in_bounds) {
        grid.add(link.source, link.target);
    }

    // grow-diag
    loop {
        let mut added = false;
        for j in 0..n {
            for i in 0..m {
                if !grid.has(j, i) {
                    continue;
                }
                for (dj, di) in NEIGHBORS {
                    let (Some(nj), Some(ni)) = (j.checked_add_signed(dj), i.checked_add_signed(di))
                    else {
                        continue;
                    };
                    if nj >= n || ni >= m || grid.has(nj, ni) || !union.contains(nj, ni) {
                        continue;
                    }
                    if !grid.source_aligned[nj] || !grid.target_aligned[ni] {
                        grid.add(nj, ni);
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    // final-and
    for directional in [fwd, rev] {
        for link in directional.iter().filter(in_bounds) {
            if !grid.source_aligned[link.source] && !grid.target_aligned[link.target] {
                grid.add(link.source, link.target);
            }
        }
    }
    grid.links()
}
