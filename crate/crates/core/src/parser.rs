//! Beam-search top-down BTG parsing of a soft matrix.
//!
//! A parse recursively bipartitions the matrix: each step splits a block at
//! a source index `j` and a target index `i` and pairs the four quadrants
//! either diagonally (straight) or anti-diagonally (inverted). A step is
//! scored by the mean F1 of its two aligned sub-blocks, and a derivation by
//! the product of its step scores, kept in log space. Blocks with a single
//! source or target word are leaves and are projected to the cross product
//! of their words.

use std::cmp::Ordering;
use std::ops::Range;

use crate::alignment::Alignment;
use crate::error::{Error, Result};
use crate::softmatrix::SoftMatrix;

const F_AVG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    Straight,
    Inverted,
}

impl Orientation {
    pub const BOTH: [Orientation; 2] = [Orientation::Straight, Orientation::Inverted];

    pub fn opposite(self) -> Orientation {
        match self {
            Orientation::Straight => Orientation::Inverted,
            Orientation::Inverted => Orientation::Straight,
        }
    }
}

/// Source span `[j0, j1)` by target span `[i0, i1)`, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Block {
    pub j0: usize,
    pub j1: usize,
    pub i0: usize,
    pub i1: usize,
}

impl Block {
    pub fn new(j0: usize, j1: usize, i0: usize, i1: usize) -> Block {
        debug_assert!(j0 < j1 && i0 < i1);
        Block { j0, j1, i0, i1 }
    }

    pub fn root(n: usize, m: usize) -> Block {
        Block::new(0, n, 0, m)
    }

    pub fn source_len(&self) -> usize {
        self.j1 - self.j0
    }

    pub fn target_len(&self) -> usize {
        self.i1 - self.i0
    }

    pub fn sources(&self) -> Range<usize> {
        self.j0..self.j1
    }

    pub fn targets(&self) -> Range<usize> {
        self.i0..self.i1
    }

    /// A block with one source or one target word cannot be split.
    pub fn is_terminal(&self) -> bool {
        self.source_len() == 1 || self.target_len() == 1
    }

    /// Number of interior split points times the two orientations.
    pub fn split_count(&self) -> usize {
        2 * (self.source_len() - 1) * (self.target_len() - 1)
    }

    /// The two aligned sub-blocks of `step`, source-left one first.
    pub fn split(&self, step: SplitStep) -> (Block, Block) {
        debug_assert!(self.j0 < step.j && step.j < self.j1);
        debug_assert!(self.i0 < step.i && step.i < self.i1);
        match step.gamma {
            Orientation::Straight => (
                Block::new(self.j0, step.j, self.i0, step.i),
                Block::new(step.j, self.j1, step.i, self.i1),
            ),
            Orientation::Inverted => (
                Block::new(self.j0, step.j, step.i, self.i1),
                Block::new(step.j, self.j1, self.i0, step.i),
            ),
        }
    }
}

/// Split of a block at source index `j` and target index `i`, both
/// block-absolute and strictly interior. Ordered by (j, i, gamma).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SplitStep {
    pub j: usize,
    pub i: usize,
    pub gamma: Orientation,
}

impl SplitStep {
    pub fn new(j: usize, i: usize, gamma: Orientation) -> SplitStep {
        SplitStep { j, i, gamma }
    }
}

/// Σ of weights over source rows `rows` and target columns `cols`.
pub fn asso(matrix: &SoftMatrix, rows: Range<usize>, cols: Range<usize>) -> f64 {
    matrix.block_sum(rows.start, rows.end, cols.start, cols.end)
}

/// Block sums of the four quadrants around a split point. X/X̄ are the
/// source halves, Y/Ȳ the target halves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrants {
    pub xy: f64,
    pub x_ybar: f64,
    pub xbar_y: f64,
    pub xbar_ybar: f64,
}

impl Quadrants {
    pub fn of(matrix: &SoftMatrix, block: &Block, j: usize, i: usize) -> Quadrants {
        Quadrants {
            xy: matrix.block_sum(block.j0, j, block.i0, i),
            x_ybar: matrix.block_sum(block.j0, j, i, block.i1),
            xbar_y: matrix.block_sum(j, block.j1, block.i0, i),
            xbar_ybar: matrix.block_sum(j, block.j1, i, block.i1),
        }
    }

    /// (cut, first aligned sub-block, second aligned sub-block)
    fn parts(&self, gamma: Orientation) -> (f64, f64, f64) {
        match gamma {
            Orientation::Straight => (self.x_ybar + self.xbar_y, self.xy, self.xbar_ybar),
            Orientation::Inverted => (self.xy + self.xbar_ybar, self.x_ybar, self.xbar_y),
        }
    }

    pub fn cut(&self, gamma: Orientation) -> f64 {
        self.parts(gamma).0
    }

    pub fn ncut(&self, gamma: Orientation) -> f64 {
        let (c, a, b) = self.parts(gamma);
        ratio(c, c + 2.0 * a) + ratio(c, c + 2.0 * b)
    }

    pub fn f_avg(&self, gamma: Orientation) -> f64 {
        1.0 - self.ncut(gamma) / 2.0
    }
}

// 0/0 only arises for all-zero blocks; treat them as fully cut.
#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        1.0
    }
}

/// Weight removed by `step`: off-diagonal quadrants for straight, diagonal
/// ones for inverted.
pub fn cut(matrix: &SoftMatrix, block: &Block, step: SplitStep) -> f64 {
    Quadrants::of(matrix, block, step.j, step.i).cut(step.gamma)
}

/// Normalized cut c/(c + 2A) + c/(c + 2B), where A and B are the sums of
/// the two sub-blocks kept by `step`.
pub fn ncut(matrix: &SoftMatrix, block: &Block, step: SplitStep) -> f64 {
    Quadrants::of(matrix, block, step.j, step.i).ncut(step.gamma)
}

/// 1 − ncut/2, the mean F1 of the two kept sub-blocks.
pub fn f_avg(matrix: &SoftMatrix, block: &Block, step: SplitStep) -> f64 {
    Quadrants::of(matrix, block, step.j, step.i).f_avg(step.gamma)
}

fn log_score(f_avg: f64) -> f64 {
    f_avg.max(F_AVG_FLOOR).ln()
}

/// Calls `visit(step, log F_avg)` for every split of `block` in
/// (j, i, gamma) order.
fn for_each_split(matrix: &SoftMatrix, block: &Block, mut visit: impl FnMut(SplitStep, f64)) {
    let Block { j0, j1, i0, i1 } = *block;
    let corner = matrix.prefix(j0, i0);
    let total = matrix.block_sum(j0, j1, i0, i1);
    for j in j0 + 1..j1 {
        let left_col = matrix.prefix(j, i0);
        // Σ over [j0, j) × [i0, i1)
        let x_all = matrix.prefix(j, i1) - matrix.prefix(j0, i1) - left_col + corner;
        for i in i0 + 1..i1 {
            let top = matrix.prefix(j0, i);
            let xy = (matrix.prefix(j, i) - top - left_col + corner).max(0.0);
            // Σ over [j0, j1) × [i0, i)
            let y_all = matrix.prefix(j1, i) - top - matrix.prefix(j1, i0) + corner;
            let q = Quadrants {
                xy,
                x_ybar: (x_all - xy).max(0.0),
                xbar_y: (y_all - xy).max(0.0),
                xbar_ybar: (total - x_all - y_all + xy).max(0.0),
            };
            for gamma in Orientation::BOTH {
                visit(SplitStep::new(j, i, gamma), log_score(q.f_avg(gamma)));
            }
        }
    }
}

/// Incremental parser state: the stack of unparsed blocks, the steps taken
/// so far with the block each one split, the finished leaves and the
/// accumulated Σ log F_avg.
#[derive(Debug, Clone, PartialEq)]
pub struct ParserState {
    stack: Vec<Block>,
    steps: Vec<(Block, SplitStep)>,
    leaves: Vec<Block>,
    score: f64,
}

impl ParserState {
    pub fn initial(n: usize, m: usize) -> ParserState {
        let root = Block::root(n, m);
        let (stack, leaves) = if root.is_terminal() {
            (vec![], vec![root])
        } else {
            (vec![root], vec![])
        };
        ParserState {
            stack,
            steps: Vec::new(),
            leaves,
            score: 0.0,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn stack(&self) -> &[Block] {
        &self.stack
    }

    pub fn steps(&self) -> &[(Block, SplitStep)] {
        &self.steps
    }

    pub fn leaves(&self) -> &[Block] {
        &self.leaves
    }

    /// Applies `step` to the top block; the source-right sub-block is
    /// pushed before the source-left one so the left is expanded first.
    fn successor(&self, step: SplitStep, score: f64) -> ParserState {
        let mut next = self.clone();
        let block = next.stack.pop().expect("successor of a terminal state");
        let (first, second) = block.split(step);
        next.steps.push((block, step));
        for sub in [first, second] {
            if sub.is_terminal() {
                next.leaves.push(sub);
            }
        }
        for sub in [second, first] {
            if !sub.is_terminal() {
                next.stack.push(sub);
            }
        }
        next.score = score;
        next
    }

    pub fn into_derivation(self, n: usize, m: usize) -> Derivation {
        Derivation {
            n,
            m,
            steps: self.steps,
            leaves: self.leaves,
            score: self.score,
        }
    }
}

/// All successors of `state`, expanding the top block of its stack at every
/// interior split point and both orientations.
pub fn next_states(state: &ParserState, matrix: &SoftMatrix) -> Vec<ParserState> {
    let Some(top) = state.stack.last() else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(top.split_count());
    for_each_split(matrix, top, |step, log_f| {
        out.push(state.successor(step, state.score + log_f));
    });
    out
}

/// A complete parse: the steps in application order, the leaf blocks, and
/// the score Σ log F_avg.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub n: usize,
    pub m: usize,
    pub steps: Vec<(Block, SplitStep)>,
    pub leaves: Vec<Block>,
    pub score: f64,
}

impl Derivation {
    pub fn split_steps(&self) -> impl Iterator<Item = SplitStep> + '_ {
        self.steps.iter().map(|(_, s)| *s)
    }

    /// Replays the steps from the root block and checks that they produce
    /// exactly the recorded leaves.
    pub fn is_consistent(&self) -> bool {
        let mut state = ParserState::initial(self.n, self.m);
        for &(block, step) in &self.steps {
            if state.stack.last() != Some(&block) {
                return false;
            }
            let interior =
                block.j0 < step.j && step.j < block.j1 && block.i0 < step.i && step.i < block.i1;
            if !interior {
                return false;
            }
            state = state.successor(step, 0.0);
        }
        let mut expected = state.leaves;
        let mut actual = self.leaves.clone();
        expected.sort();
        actual.sort();
        state.stack.is_empty() && expected == actual
    }

    pub fn project(&self) -> Alignment {
        project(self)
    }
}

/// Cross product of words inside every leaf block.
pub fn project(derivation: &Derivation) -> Alignment {
    let mut alignment = Alignment::new();
    for leaf in &derivation.leaves {
        for j in leaf.sources() {
            for i in leaf.targets() {
                alignment.insert(j, i);
            }
        }
    }
    alignment
}

fn steps_cmp(a: &[(Block, SplitStep)], b: &[(Block, SplitStep)]) -> Ordering {
    a.iter().map(|(_, s)| s).cmp(b.iter().map(|(_, s)| s))
}

/// Higher score first, then the lexicographically smaller step sequence.
fn rank(score_a: f64, score_b: f64, seq: impl FnOnce() -> Ordering) -> Ordering {
    score_b.total_cmp(&score_a).then_with(seq)
}

struct Candidate {
    parent: usize,
    step: SplitStep,
    score: f64,
}

/// Level-synchronous beam search over BTG derivations.
///
/// Each level expands the top block of every beam state in all possible
/// ways and keeps the `beam_k` best non-terminal successors. Terminal
/// successors are collected as finished parses and the best one is
/// returned. Step scores are strictly negative, so a successor that does
/// not beat the best finished parse can never lead to a better one and is
/// dropped before the beam is cut.
pub fn top_down_parse(matrix: &SoftMatrix, beam_k: usize) -> Result<Derivation> {
    if beam_k == 0 {
        return Err(Error::InvalidParameter("beam size must be >= 1".into()));
    }
    let (n, m) = (matrix.rows(), matrix.cols());
    let root = ParserState::initial(n, m);
    if root.is_terminal() {
        return Ok(root.into_derivation(n, m));
    }

    let mut beam = vec![root];
    let mut best: Option<ParserState> = None;
    for _level in 0..n.min(m) {
        if beam.is_empty() {
            break;
        }
        let mut candidates = Vec::new();
        for (parent, state) in beam.iter().enumerate() {
            let top = *state.stack.last().expect("beam holds non-terminal states");
            let last_block = state.stack.len() == 1;
            for_each_split(matrix, &top, |step, log_f| {
                let score = state.score + log_f;
                let (first, second) = top.split(step);
                if last_block && first.is_terminal() && second.is_terminal() {
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            rank(score, b.score, || {
                                state
                                    .steps
                                    .iter()
                                    .map(|(_, s)| *s)
                                    .chain(std::iter::once(step))
                                    .cmp(b.steps.iter().map(|(_, s)| *s))
                            }) == Ordering::Less
                        }
                    };
                    if better {
                        best = Some(state.successor(step, score));
                    }
                } else {
                    candidates.push(Candidate {
                        parent,
                        step,
                        score,
                    });
                }
            });
        }

        if let Some(b) = &best {
            candidates.retain(|c| c.score > b.score);
        }
        let order = |a: &Candidate, b: &Candidate| {
            rank(a.score, b.score, || {
                let parents = if a.parent == b.parent {
                    Ordering::Equal
                } else {
                    steps_cmp(&beam[a.parent].steps, &beam[b.parent].steps)
                };
                parents.then(a.step.cmp(&b.step))
            })
        };
        if candidates.len() > beam_k {
            candidates.select_nth_unstable_by(beam_k - 1, order);
            candidates.truncate(beam_k);
        }
        candidates.sort_by(order);
        beam = candidates
            .iter()
            .map(|c| beam[c.parent].successor(c.step, c.score))
            .collect();
    }

    let best = best.expect("a non-terminal root always reaches a terminal parse");
    Ok(best.into_derivation(n, m))
}
