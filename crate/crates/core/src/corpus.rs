//! Parallel text loading, vocabularies and id-encoded sentence pairs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};

/// Reserved id of the empty (NULL) word.
pub const NULL: u32 = 0;
/// Id given to tokens that are missing from a vocabulary at encoding time.
pub const UNKNOWN: u32 = u32::MAX;

pub const DEFAULT_SEPARATOR: &str = "|||";

/// Dense token ids in first-occurrence order. Id 0 is NULL and has no
/// surface form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            ids: HashMap::new(),
            tokens: vec![String::new()],
        }
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `token`, assigning the next free id if unseen.
    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.ids.insert(token.to_string(), id);
        self.tokens.push(token.to_string());
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// Surface form of `id`; `None` for NULL and out-of-range ids.
    pub fn token(&self, id: u32) -> Option<&str> {
        match id {
            NULL => None,
            _ => self.tokens.get(id as usize).map(String::as_str),
        }
    }

    /// Number of ids including NULL.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Number of real words, i.e. `len() - 1`.
    pub fn word_count(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.word_count() == 0
    }

    /// Writes one token per line; line k holds id k + 1.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for token in &self.tokens[1..] {
            writeln!(w, "{token}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Vocabulary> {
        let mut vocab = Vocabulary::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let token = line.trim_end_matches('\r');
            if token.is_empty() || token.contains(char::is_whitespace) {
                return Err(Error::format(
                    format!("vocabulary line {}", k + 1),
                    "tokens must be non-empty and contain no whitespace",
                ));
            }
            if vocab.id(token).is_some() {
                return Err(Error::format(
                    format!("vocabulary line {}", k + 1),
                    format!("duplicate token {token:?}"),
                ));
            }
            vocab.intern(token);
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::read(BufReader::new(file))
    }

    fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.id(t).unwrap_or(UNKNOWN))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub lowercase: bool,
    /// Pairs with more tokens than this on either side are skipped.
    pub max_len: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            lowercase: false,
            max_len: 200,
        }
    }
}

/// One tokenized input line pair. Either side may be empty when it comes
/// straight from a line reader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPair {
    pub index: usize,
    pub source: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub lines: usize,
    pub empty_skipped: usize,
    pub too_long_skipped: usize,
}

impl LoadStats {
    pub fn kept(&self) -> usize {
        self.lines - self.empty_skipped - self.too_long_skipped
    }
}

/// The usable pairs of a parallel text plus the original line count, so
/// that output can stay line-aligned with the input.
#[derive(Debug, Clone, Default)]
pub struct ParallelText {
    pub pairs: Vec<TextPair>,
    pub stats: LoadStats,
}

impl ParallelText {
    /// Drains a line stream, keeping pairs with both sides non-empty and
    /// within `opts.max_len`.
    pub fn collect<I>(lines: I, opts: &LoadOptions) -> Result<ParallelText>
    where
        I: IntoIterator<Item = Result<TextPair>>,
    {
        let mut text = ParallelText::default();
        for pair in lines {
            let mut pair = pair?;
            text.stats.lines += 1;
            if pair.source.is_empty() || pair.target.is_empty() {
                warn!("line {}: empty side, skipped", pair.index + 1);
                text.stats.empty_skipped += 1;
                continue;
            }
            if pair.source.len() > opts.max_len || pair.target.len() > opts.max_len {
                warn!(
                    "line {}: longer than {} tokens, skipped",
                    pair.index + 1,
                    opts.max_len
                );
                text.stats.too_long_skipped += 1;
                continue;
            }
            if opts.lowercase {
                for token in pair.source.iter_mut().chain(pair.target.iter_mut()) {
                    *token = token.to_lowercase();
                }
            }
            text.pairs.push(pair);
        }
        if text.stats.empty_skipped + text.stats.too_long_skipped > 0 {
            warn!(
                "skipped {} empty and {} over-long pairs out of {} lines",
                text.stats.empty_skipped, text.stats.too_long_skipped, text.stats.lines
            );
        }
        Ok(text)
    }
}

struct LineReader<R> {
    reader: R,
    label: PathBuf,
    line: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> LineReader<R> {
    fn new(reader: R, label: impl Into<PathBuf>) -> Self {
        LineReader {
            reader,
            label: label.into(),
            line: 0,
            buf: Vec::new(),
        }
    }

    fn next_line(&mut self) -> Result<Option<&str>> {
        self.buf.clear();
        if self.reader.read_until(b'\n', &mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line += 1;
        while matches!(self.buf.last(), Some(b'\n' | b'\r')) {
            self.buf.pop();
        }
        std::str::from_utf8(&self.buf)
            .map(Some)
            .map_err(|_| Error::Utf8 {
                path: self.label.clone(),
                line: self.line,
            })
    }

    fn count_rest(&mut self) -> Result<usize> {
        while self.next_line()?.is_some() {}
        Ok(self.line)
    }
}

fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_string).collect()
}

/// Streams line pairs from two line-aligned readers.
pub struct ParallelLines<A, B> {
    source: LineReader<A>,
    target: LineReader<B>,
    done: bool,
}

impl<A: BufRead, B: BufRead> ParallelLines<A, B> {
    pub fn new(
        source: A,
        source_label: impl Into<PathBuf>,
        target: B,
        target_label: impl Into<PathBuf>,
    ) -> Self {
        ParallelLines {
            source: LineReader::new(source, source_label),
            target: LineReader::new(target, target_label),
            done: false,
        }
    }

    fn step(&mut self) -> Result<Option<TextPair>> {
        let index = self.source.line;
        let source = self.source.next_line()?.map(tokenize);
        let target = self.target.next_line()?.map(tokenize);
        match (source, target) {
            (Some(source), Some(target)) => Ok(Some(TextPair {
                index,
                source,
                target,
            })),
            (None, None) => Ok(None),
            _ => Err(Error::LineCountMismatch {
                source_lines: self.source.count_rest()?,
                target_lines: self.target.count_rest()?,
            }),
        }
    }
}

impl<A: BufRead, B: BufRead> Iterator for ParallelLines<A, B> {
    type Item = Result<TextPair>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.step().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Streams line pairs from a single file of `source ||| target` lines.
pub struct JoinedLines<R> {
    reader: LineReader<R>,
    separator: String,
    done: bool,
}

impl<R: BufRead> JoinedLines<R> {
    pub fn new(reader: R, label: impl Into<PathBuf>, separator: &str) -> Self {
        JoinedLines {
            reader: LineReader::new(reader, label),
            separator: separator.to_string(),
            done: false,
        }
    }

    fn step(&mut self) -> Result<Option<TextPair>> {
        let index = self.reader.line;
        let separator = self.separator.clone();
        let Some(line) = self.reader.next_line()? else {
            return Ok(None);
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let mut positions = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == separator)
            .map(|(k, _)| k);
        let split = match (positions.next(), positions.next()) {
            (Some(k), None) => k,
            (None, _) => {
                return Err(Error::Separator {
                    line: index + 1,
                    message: format!("missing separator {separator:?}"),
                })
            }
            (Some(_), Some(_)) => {
                return Err(Error::Separator {
                    line: index + 1,
                    message: format!("duplicated separator {separator:?}"),
                })
            }
        };
        Ok(Some(TextPair {
            index,
            source: tokens[..split].iter().map(|t| t.to_string()).collect(),
            target: tokens[split + 1..].iter().map(|t| t.to_string()).collect(),
        }))
    }
}

impl<R: BufRead> Iterator for JoinedLines<R> {
    type Item = Result<TextPair>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.step().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn load_parallel_corpus(
    source_path: &Path,
    target_path: &Path,
    opts: &LoadOptions,
) -> Result<ParallelText> {
    let lines = ParallelLines::new(
        open(source_path)?,
        source_path,
        open(target_path)?,
        target_path,
    );
    ParallelText::collect(lines, opts)
}

pub fn load_joined_corpus(
    path: &Path,
    separator: &str,
    opts: &LoadOptions,
) -> Result<ParallelText> {
    ParallelText::collect(JoinedLines::new(open(path)?, path, separator), opts)
}

/// Source and target vocabularies in first-occurrence order.
pub fn build_vocabulary<'a, I>(pairs: I) -> (Vocabulary, Vocabulary)
where
    I: IntoIterator<Item = &'a TextPair>,
{
    let mut source = Vocabulary::new();
    let mut target = Vocabulary::new();
    for pair in pairs {
        for token in &pair.source {
            source.intern(token);
        }
        for token in &pair.target {
            target.intern(token);
        }
    }
    (source, target)
}

/// Sentence pair as word ids. Both sides are non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    /// Zero-based input line.
    pub index: usize,
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

impl SentencePair {
    pub fn new(index: usize, source: Vec<u32>, target: Vec<u32>) -> Self {
        debug_assert!(!source.is_empty() && !target.is_empty());
        SentencePair {
            index,
            source,
            target,
        }
    }

    pub fn swapped(&self) -> SentencePair {
        SentencePair::new(self.index, self.target.clone(), self.source.clone())
    }
}

/// Id-encoded usable pairs and the number of input lines they came from.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub pairs: Vec<SentencePair>,
    pub lines: usize,
}

impl Corpus {
    pub fn encode(text: &ParallelText, source: &Vocabulary, target: &Vocabulary) -> Corpus {
        Corpus {
            pairs: text
                .pairs
                .iter()
                .map(|p| {
                    SentencePair::new(p.index, source.encode(&p.source), target.encode(&p.target))
                })
                .collect(),
            lines: text.stats.lines,
        }
    }

    pub fn swapped(&self) -> Corpus {
        Corpus {
            pairs: self.pairs.iter().map(SentencePair::swapped).collect(),
            lines: self.lines,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
