//! Consistent phrase-pair extraction from word alignments.

use std::collections::BTreeSet;
use std::collections::HashSet;
use std::ops::Range;

use crate::alignment::Alignment;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseOptions {
    pub max_len: usize,
    /// Also emit target spans widened over unaligned boundary words, and
    /// source spans with unaligned boundary words.
    pub unaligned_extension: bool,
}

impl Default for PhraseOptions {
    fn default() -> Self {
        PhraseOptions {
            max_len: 7,
            unaligned_extension: true,
        }
    }
}

/// Half-open source and target spans of one phrase pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanPair {
    pub source: Range<usize>,
    pub target: Range<usize>,
}

impl SpanPair {
    pub fn new(source: Range<usize>, target: Range<usize>) -> SpanPair {
        SpanPair { source, target }
    }
}

/// All consistent span pairs of an `n`×`m` sentence pair.
///
/// A pair is consistent when every link touching the source span lands in
/// the target span and vice versa; it must contain at least one link and
/// both sides are at most `max_len` long.
pub fn extract_phrases(
    alignment: &Alignment,
    n: usize,
    m: usize,
    opts: &PhraseOptions,
) -> Vec<SpanPair> {
    let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut by_target: Vec<Vec<usize>> = vec![Vec::new(); m];
    for link in alignment.iter() {
        debug_assert!(link.source < n && link.target < m);
        by_source[link.source].push(link.target);
        by_target[link.target].push(link.source);
    }
    let target_aligned = |i: usize| !by_target[i].is_empty();

    // (s0, s1, t0, t1) half-open, kept sorted
    let mut found = BTreeSet::new();
    for s0 in 0..n {
        for s1 in s0..n.min(s0 + opts.max_len) {
            let (mut t0, mut t1) = (usize::MAX, 0usize);
            for targets in &by_source[s0..=s1] {
                for &i in targets {
                    t0 = t0.min(i);
                    t1 = t1.max(i);
                }
            }
            if t0 == usize::MAX || t1 - t0 + 1 > opts.max_len {
                continue;
            }
            let consistent = (t0..=t1).all(|i| by_target[i].iter().all(|&j| s0 <= j && j <= s1));
            if !consistent {
                continue;
            }
            if !opts.unaligned_extension {
                if by_source[s0].is_empty() || by_source[s1].is_empty() {
                    continue;
                }
                found.insert((s0, s1 + 1, t0, t1 + 1));
                continue;
            }
            // widen the target span over unaligned neighbours
            let mut start = t0;
            loop {
                let mut end = t1;
                loop {
                    found.insert((s0, s1 + 1, start, end + 1));
                    end += 1;
                    if end >= m || target_aligned(end) || end - start + 1 > opts.max_len {
                        break;
                    }
                }
                if start == 0 || target_aligned(start - 1) || t1 - (start - 1) + 1 > opts.max_len {
                    break;
                }
                start -= 1;
            }
        }
    }
    found
        .into_iter()
        .map(|(a, b, c, d)| SpanPair::new(a..b, c..d))
        .collect()
}

/// Distinct (source words, target words) phrase entries over a corpus.
#[derive(Debug, Clone, Default)]
pub struct PhraseTable<T: Eq + std::hash::Hash + Clone> {
    entries: HashSet<(Vec<T>, Vec<T>)>,
}

impl<T: Eq + std::hash::Hash + Clone> PhraseTable<T> {
    pub fn new() -> Self {
        PhraseTable {
            entries: HashSet::new(),
        }
    }

    pub fn add_sentence(
        &mut self,
        source: &[T],
        target: &[T],
        alignment: &Alignment,
        opts: &PhraseOptions,
    ) {
        for span in extract_phrases(alignment, source.len(), target.len(), opts) {
            self.entries
                .insert((source[span.source].to_vec(), target[span.target].to_vec()));
        }
    }

    pub fn merge(&mut self, other: PhraseTable<T>) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &(Vec<T>, Vec<T>)> {
        self.entries.iter()
    }
}

/// Count of distinct phrase pairs across aligned sentences.
pub fn phrase_table_size<'a, T, I>(sentences: I, opts: &PhraseOptions) -> usize
where
    T: Eq + std::hash::Hash + Clone + 'a,
    I: IntoIterator<Item = (&'a [T], &'a [T], &'a Alignment)>,
{
    let mut table = PhraseTable::new();
    for (source, target, alignment) in sentences {
        table.add_sentence(source, target, alignment, opts);
    }
    table.len()
}
