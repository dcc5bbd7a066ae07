//! IBM Model 1 lexical translation tables, with optional variational-Bayes
//! M-steps, Viterbi alignment and re-estimation from symmetrized links.

mod digamma;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::alignment::Alignment;
use crate::corpus::{SentencePair, Vocabulary, NULL};
use crate::error::{Error, Result};
use crate::symmetrize::grow_diag_final_and;

pub use digamma::digamma;
use digamma::digamma_positive;

/// Which side is conditioned on. `SourceGivenTarget` holds θ(f|e).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    SourceGivenTarget,
    TargetGivenSource,
}

impl Direction {
    pub fn tag(self) -> &'static str {
        match self {
            Direction::SourceGivenTarget => "source-given-target",
            Direction::TargetGivenSource => "target-given-source",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Direction> {
        match tag {
            "source-given-target" => Some(Direction::SourceGivenTarget),
            "target-given-source" => Some(Direction::TargetGivenSource),
            _ => None,
        }
    }

    pub fn reversed(self) -> Direction {
        match self {
            Direction::SourceGivenTarget => Direction::TargetGivenSource,
            Direction::TargetGivenSource => Direction::SourceGivenTarget,
        }
    }

    /// (conditioned words, conditioning words) of `pair`.
    pub fn sides(self, pair: &SentencePair) -> (&[u32], &[u32]) {
        match self {
            Direction::SourceGivenTarget => (&pair.source, &pair.target),
            Direction::TargetGivenSource => (&pair.target, &pair.source),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub iterations: usize,
    pub vb: bool,
    /// Symmetric Dirichlet concentration for the VB M-step.
    pub alpha: f64,
    pub use_null: bool,
    /// Probability returned for pairs absent from a table.
    pub fallback: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            iterations: 5,
            vb: true,
            alpha: 0.01,
            use_null: true,
            fallback: 1e-10,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("EM iterations must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter("alpha must be > 0".into()));
        }
        if !(self.fallback > 0.0 && self.fallback <= 1.0) {
            return Err(Error::InvalidParameter("fallback must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Sparse conditional table p(conditioned | conditioning).
///
/// Rows are indexed by conditioning word id (0 = NULL) and hold the
/// conditioned ids sorted ascending, so lookups are a binary search and
/// iteration order is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct TTable {
    direction: Direction,
    vocab_size: usize,
    fallback: f64,
    offsets: Vec<usize>,
    conditioned: Vec<u32>,
    probs: Vec<f64>,
}

impl TTable {
    /// Builds a table from (conditioning, conditioned, probability) triples.
    /// Duplicate keys keep the last value.
    pub fn from_entries<I>(
        direction: Direction,
        vocab_size: usize,
        fallback: f64,
        entries: I,
    ) -> TTable
    where
        I: IntoIterator<Item = (u32, u32, f64)>,
    {
        let map: BTreeMap<(u32, u32), f64> =
            entries.into_iter().map(|(e, f, p)| ((e, f), p)).collect();
        let rows = map.keys().last().map_or(0, |&(e, _)| e as usize + 1);
        let mut offsets = vec![0usize; rows + 1];
        for &(e, _) in map.keys() {
            offsets[e as usize + 1] += 1;
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        TTable {
            direction,
            vocab_size,
            fallback,
            offsets,
            conditioned: map.keys().map(|&(_, f)| f).collect(),
            probs: map.values().copied().collect(),
        }
    }

    /// Uniform initialization over co-occurring words: each conditioning word
    /// spreads its mass evenly over the conditioned words it appears with.
    pub fn uniform(corpus: &[SentencePair], direction: Direction, config: &EmConfig) -> TTable {
        let mut rows: Vec<Vec<u32>> = Vec::new();
        let mut seen_conditioned: Vec<bool> = Vec::new();
        for pair in corpus {
            let (conditioned, conditioning) = direction.sides(pair);
            let null = config.use_null.then_some(NULL);
            for &e in conditioning.iter().chain(null.iter()) {
                let e = e as usize;
                if rows.len() <= e {
                    rows.resize_with(e + 1, Vec::new);
                }
                rows[e].extend_from_slice(conditioned);
            }
            for &f in conditioned {
                if seen_conditioned.len() <= f as usize {
                    seen_conditioned.resize(f as usize + 1, false);
                }
                seen_conditioned[f as usize] = true;
            }
        }
        let vocab_size = seen_conditioned.iter().filter(|&&s| s).count();

        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut flat = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            let p = 1.0 / row.len() as f64;
            probs.extend(std::iter::repeat_n(p, row.len()));
            flat.extend(row);
            offsets.push(flat.len());
        }
        TTable {
            direction,
            vocab_size,
            fallback: config.fallback,
            offsets,
            conditioned: flat,
            probs,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Size of the conditioned-side vocabulary used by the Dirichlet normalizer.
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn fallback(&self) -> f64 {
        self.fallback
    }

    pub fn with_fallback(mut self, fallback: f64) -> TTable {
        self.fallback = fallback;
        self
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// True when the NULL word has a non-empty row.
    pub fn has_null(&self) -> bool {
        self.row_range(NULL).is_some_and(|r| !r.is_empty())
    }

    fn row_range(&self, conditioning: u32) -> Option<std::ops::Range<usize>> {
        let e = conditioning as usize;
        (e + 1 < self.offsets.len()).then(|| self.offsets[e]..self.offsets[e + 1])
    }

    fn slot(&self, conditioned: u32, conditioning: u32) -> Option<usize> {
        let range = self.row_range(conditioning)?;
        self.conditioned[range.clone()]
            .binary_search(&conditioned)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn get(&self, conditioned: u32, conditioning: u32) -> Option<f64> {
        self.slot(conditioned, conditioning).map(|s| self.probs[s])
    }

    /// p(conditioned | conditioning), or the fallback for unseen pairs.
    pub fn prob(&self, conditioned: u32, conditioning: u32) -> f64 {
        self.get(conditioned, conditioning).unwrap_or(self.fallback)
    }

    /// Entries of one conditioning word in ascending conditioned id.
    pub fn row(&self, conditioning: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let range = self.row_range(conditioning).unwrap_or(0..0);
        self.conditioned[range.clone()]
            .iter()
            .copied()
            .zip(self.probs[range].iter().copied())
    }

    /// All entries as (conditioning, conditioned, probability) in row order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.offsets.len().saturating_sub(1)).flat_map(move |e| {
            let e = e as u32;
            self.row(e).map(move |(f, p)| (e, f, p))
        })
    }

    /// Σ of stored probabilities per conditioning word that has entries.
    pub fn row_sums(&self) -> Vec<(u32, f64)> {
        (0..self.offsets.len().saturating_sub(1) as u32)
            .filter(|&e| self.row_range(e).is_some_and(|r| !r.is_empty()))
            .map(|e| (e, self.row(e).map(|(_, p)| p).sum()))
            .collect()
    }

    /// Writes the table with tokens resolved through the vocabularies. NULL
    /// is written as an empty field.
    pub fn write<W: Write>(
        &self,
        mut w: W,
        conditioned: &Vocabulary,
        conditioning: &Vocabulary,
    ) -> Result<()> {
        writeln!(w, "#ttable {} {}", self.direction.tag(), self.vocab_size)?;
        for (e, f, p) in self.entries() {
            let f_token = token_or_null(conditioned, f)?;
            let e_token = token_or_null(conditioning, e)?;
            writeln!(w, "{f_token}\t{e_token}\t{p:.16e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(
        reader: R,
        conditioned: &Vocabulary,
        conditioning: &Vocabulary,
        fallback: f64,
    ) -> Result<TTable> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::format("ttable", "missing header"))?;
        let mut fields = header.split_whitespace();
        let (Some("#ttable"), Some(tag), Some(v), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::format(
                "ttable header",
                format!("unexpected {header:?}"),
            ));
        };
        let direction = Direction::from_tag(tag)
            .ok_or_else(|| Error::format("ttable header", format!("unknown direction {tag:?}")))?;
        let vocab_size: usize = v
            .parse()
            .map_err(|_| Error::format("ttable header", format!("bad vocabulary size {v:?}")))?;

        let mut entries = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let context = || format!("ttable line {}", k + 2);
            let mut cols = line.split('\t');
            let (Some(f), Some(e), Some(p), None) =
                (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(Error::format(
                    context(),
                    "expected three tab-separated fields",
                ));
            };
            let f = id_or_null(conditioned, f)
                .ok_or_else(|| Error::format(context(), format!("unknown token {f:?}")))?;
            let e = id_or_null(conditioning, e)
                .ok_or_else(|| Error::format(context(), format!("unknown token {e:?}")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| Error::format(context(), format!("bad probability {p:?}")))?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::format(
                    context(),
                    format!("probability {p} outside (0, 1]"),
                ));
            }
            entries.push((e, f, p));
        }
        Ok(TTable::from_entries(
            direction, vocab_size, fallback, entries,
        ))
    }

    pub fn save(
        &self,
        path: &Path,
        conditioned: &Vocabulary,
        conditioning: &Vocabulary,
    ) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file), conditioned, conditioning)
    }

    pub fn load(
        path: &Path,
        conditioned: &Vocabulary,
        conditioning: &Vocabulary,
        fallback: f64,
    ) -> Result<TTable> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        TTable::read(BufReader::new(file), conditioned, conditioning, fallback)
    }
}

fn token_or_null(vocab: &Vocabulary, id: u32) -> Result<&str> {
    if id == NULL {
        return Ok("");
    }
    vocab
        .token(id)
        .ok_or_else(|| Error::format("ttable", format!("id {id} missing from vocabulary")))
}

fn id_or_null(vocab: &Vocabulary, token: &str) -> Option<u32> {
    if token.is_empty() {
        Some(NULL)
    } else {
        vocab.id(token)
    }
}

/// Pairs per E-step work unit. Counts are reduced chunk by chunk in corpus
/// order, so the result does not depend on the number of workers.
const CHUNK: usize = 256;
/// Chunks processed in parallel before their contributions are reduced.
const WAVE: usize = 64;

struct ChunkCounts {
    contributions: Vec<(usize, f64)>,
    log_likelihood: f64,
}

fn chunk_counts(chunk: &[SentencePair], table: &TTable, use_null: bool) -> ChunkCounts {
    let mut contributions = Vec::new();
    let mut log_likelihood = 0.0;
    let mut slots: Vec<(usize, f64)> = Vec::new();
    for pair in chunk {
        let (conditioned, conditioning) = table.direction.sides(pair);
        let null = use_null.then_some(NULL);
        let width = (conditioning.len() + usize::from(use_null)) as f64;
        for &f in conditioned {
            slots.clear();
            let mut denom = 0.0;
            for &e in null.iter().chain(conditioning) {
                if let Some(s) = table.slot(f, e) {
                    let p = table.probs[s];
                    denom += p;
                    slots.push((s, p));
                }
            }
            if denom > 0.0 {
                log_likelihood += (denom / width).ln();
                contributions.extend(slots.iter().map(|&(s, p)| (s, p / denom)));
            }
        }
    }
    ChunkCounts {
        contributions,
        log_likelihood,
    }
}

/// Expected counts per table slot and the corpus log-likelihood under
/// `table`.
fn expected_counts(corpus: &[SentencePair], table: &TTable, use_null: bool) -> (Vec<f64>, f64) {
    let mut counts = vec![0.0; table.len()];
    let mut log_likelihood = 0.0;
    for wave in corpus.chunks(CHUNK * WAVE) {
        let parts: Vec<ChunkCounts> = wave
            .par_chunks(CHUNK)
            .map(|chunk| chunk_counts(chunk, table, use_null))
            .collect();
        for part in parts {
            for (s, c) in part.contributions {
                counts[s] += c;
            }
            log_likelihood += part.log_likelihood;
        }
    }
    (counts, log_likelihood)
}

/// Σ_pairs Σ_f log( Σ_{e ∈ E ∪ NULL} θ(f|e) / |E ∪ NULL| ).
pub fn log_likelihood(corpus: &[SentencePair], table: &TTable, use_null: bool) -> f64 {
    let mut total = 0.0;
    for wave in corpus.chunks(CHUNK * WAVE) {
        let parts: Vec<f64> = wave
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut ll = 0.0;
                for pair in chunk {
                    let (conditioned, conditioning) = table.direction.sides(pair);
                    let width = (conditioning.len() + usize::from(use_null)) as f64;
                    for &f in conditioned {
                        let mut sum: f64 = conditioning.iter().map(|&e| table.prob(f, e)).sum();
                        if use_null {
                            sum += table.prob(f, NULL);
                        }
                        ll += (sum / width).ln();
                    }
                }
                ll
            })
            .collect();
        total += parts.into_iter().sum::<f64>();
    }
    total
}

/// Plain EM normalization c / Σc, per conditioning word.
pub fn normalize_counts(count: f64, row_total: f64) -> f64 {
    count / row_total
}

/// VB M-step value exp(ψ(c + α)) / exp(ψ(Σc + α·V)).
pub fn vb_weight(count: f64, row_total: f64, alpha: f64, vocab_size: usize) -> f64 {
    (digamma_positive(count + alpha) - digamma_positive(row_total + alpha * vocab_size as f64))
        .exp()
}

fn maximize(table: &TTable, counts: &[f64], config: &EmConfig) -> TTable {
    let mut probs = vec![0.0; counts.len()];
    for r in 0..table.offsets.len() - 1 {
        let range = table.offsets[r]..table.offsets[r + 1];
        let total: f64 = counts[range.clone()].iter().sum();
        for s in range {
            let p = if config.vb {
                vb_weight(counts[s], total, config.alpha, table.vocab_size)
            } else if total > 0.0 {
                normalize_counts(counts[s], total)
            } else {
                table.probs[s]
            };
            probs[s] = p.clamp(f64::MIN_POSITIVE, 1.0);
        }
    }
    TTable {
        probs,
        ..table.clone()
    }
}

/// One E-step against `table` followed by one M-step.
pub fn em_step(corpus: &[SentencePair], table: &TTable, config: &EmConfig) -> TTable {
    let (counts, _) = expected_counts(corpus, table, config.use_null);
    maximize(table, &counts, config)
}

/// Trains a Model 1 table for `direction` from a uniform start.
pub fn train_ibm1(
    corpus: &[SentencePair],
    direction: Direction,
    config: &EmConfig,
) -> Result<TTable> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot train on an empty corpus".into(),
        ));
    }
    let mut table = TTable::uniform(corpus, direction, config);
    for iteration in 0..config.iterations {
        let (counts, ll) = expected_counts(corpus, &table, config.use_null);
        log::info!(
            "{} iteration {}: log-likelihood {:.4}",
            direction.tag(),
            iteration + 1,
            ll
        );
        table = maximize(&table, &counts, config);
    }
    Ok(table)
}

/// Symmetric lexical log-score ½(log θ(f|e) + log θ(e|f)).
pub fn symmetric_lexical_score(t_fe: &TTable, t_ef: &TTable, f: u32, e: u32) -> f64 {
    0.5 * (t_fe.prob(f, e).ln() + t_ef.prob(e, f).ln())
}

/// Links every conditioned word to its most probable conditioning word.
/// NULL wins only when strictly better than every real word; ties go to
/// the lowest index. Links are always (source, target).
pub fn viterbi_alignment(pair: &SentencePair, table: &TTable) -> Alignment {
    let (conditioned, conditioning) = table.direction.sides(pair);
    let use_null = table.has_null();
    let mut alignment = Alignment::new();
    for (a, &f) in conditioned.iter().enumerate() {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (b, &e) in conditioning.iter().enumerate() {
            let p = table.prob(f, e);
            if p > best.1 {
                best = (b, p);
            }
        }
        if use_null && table.prob(f, NULL) > best.1 {
            continue;
        }
        match table.direction {
            Direction::SourceGivenTarget => alignment.insert(a, best.0),
            Direction::TargetGivenSource => alignment.insert(best.0, a),
        };
    }
    alignment
}

/// Rebuilds both tables by count-and-normalize over grow-diag-final-and
/// symmetrized Viterbi links.
pub fn vbh_reestimate(corpus: &[SentencePair], t_fe: &TTable, t_ef: &TTable) -> (TTable, TTable) {
    let links: Vec<Alignment> = corpus
        .par_iter()
        .map(|pair| {
            let fwd = viterbi_alignment(pair, t_fe);
            let rev = viterbi_alignment(pair, t_ef);
            grow_diag_final_and(&fwd, &rev, pair.source.len(), pair.target.len())
        })
        .collect();

    // (conditioning, conditioned) -> count, for each table
    let mut fe: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut ef: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (pair, alignment) in corpus.iter().zip(&links) {
        for link in alignment.iter() {
            let f = pair.source[link.source];
            let e = pair.target[link.target];
            *fe.entry((e, f)).or_default() += 1.0;
            *ef.entry((f, e)).or_default() += 1.0;
        }
    }
    (normalized_table(t_fe, fe), normalized_table(t_ef, ef))
}

fn normalized_table(template: &TTable, counts: BTreeMap<(u32, u32), f64>) -> TTable {
    let mut totals: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(e, _), &c) in &counts {
        *totals.entry(e).or_default() += c;
    }
    TTable::from_entries(
        template.direction,
        template.vocab_size,
        template.fallback,
        counts
            .into_iter()
            .map(|((e, f), c)| (e, f, normalize_counts(c, totals[&e]))),
    )
}
