//! End-to-end configuration, training, persistence and alignment.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::alignment::Alignment;
use crate::corpus::{
    build_vocabulary, Corpus, LoadOptions, ParallelText, SentencePair, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{self, GoldAlignment, Metrics};
use crate::lexicon::{train_ibm1, vbh_reestimate, Direction, EmConfig, TTable};
use crate::parser::top_down_parse;
use crate::softmatrix::{MatrixParams, SoftMatrix};

pub const FWD_TABLE: &str = "ttable.fwd";
pub const REV_TABLE: &str = "ttable.rev";
pub const SOURCE_VOCAB: &str = "vocab.src";
pub const TARGET_VOCAB: &str = "vocab.tgt";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct AlignerConfig {
    pub em: EmConfig,
    pub vbh: bool,
    pub matrix: MatrixParams,
    pub beam: usize,
    pub max_phrase_len: usize,
    pub max_sentence_len: usize,
    pub lowercase: bool,
    /// Worker count; `None` uses every core. Not part of the snapshot since
    /// it has no effect on output.
    pub threads: Option<usize>,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            em: EmConfig::default(),
            vbh: false,
            matrix: MatrixParams::default(),
            beam: 10,
            max_phrase_len: 7,
            max_sentence_len: 200,
            lowercase: false,
            threads: None,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<()> {
        self.em.validate()?;
        self.matrix.validate()?;
        if self.beam == 0 {
            return Err(Error::InvalidParameter("beam must be >= 1".into()));
        }
        if self.max_phrase_len == 0 || self.max_sentence_len == 0 {
            return Err(Error::InvalidParameter("length limits must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        Ok(())
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            lowercase: self.lowercase,
            max_len: self.max_sentence_len,
        }
    }

    /// `key=value` lines in a fixed order.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.snapshot_entries() {
            out.push_str(key);
            out.push('=');
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    fn snapshot_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("em_iters", self.em.iterations.to_string()),
            ("vb", self.em.vb.to_string()),
            ("alpha", self.em.alpha.to_string()),
            ("use_null", self.em.use_null.to_string()),
            ("fallback", self.em.fallback.to_string()),
            ("vbh", self.vbh.to_string()),
            ("sigma_theta", self.matrix.sigma_theta.to_string()),
            ("sigma_delta", self.matrix.sigma_delta.to_string()),
            ("distortion", self.matrix.distortion_enabled.to_string()),
            ("distortion_threshold", self.matrix.threshold.to_string()),
            ("p0", self.matrix.p0.to_string()),
            ("beam", self.beam.to_string()),
            ("max_phrase_len", self.max_phrase_len.to_string()),
            ("max_sentence_len", self.max_sentence_len.to_string()),
            ("lowercase", self.lowercase.to_string()),
        ]
    }

    /// Parses a snapshot; missing keys keep their defaults.
    pub fn from_snapshot(text: &str) -> Result<AlignerConfig> {
        let mut config = AlignerConfig::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ctx = || format!("config line {}", k + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(ctx(), "expected key=value"))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|msg| Error::format(ctx(), msg))?;
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value {value:?} for {key}"))
        }
        match key {
            "em_iters" => self.em.iterations = parse(key, value)?,
            "vb" => self.em.vb = parse(key, value)?,
            "alpha" => self.em.alpha = parse(key, value)?,
            "use_null" => self.em.use_null = parse(key, value)?,
            "fallback" => self.em.fallback = parse(key, value)?,
            "vbh" => self.vbh = parse(key, value)?,
            "sigma_theta" => self.matrix.sigma_theta = parse(key, value)?,
            "sigma_delta" => self.matrix.sigma_delta = parse(key, value)?,
            "distortion" => self.matrix.distortion_enabled = parse(key, value)?,
            "distortion_threshold" => self.matrix.threshold = parse(key, value)?,
            "p0" => self.matrix.p0 = parse(key, value)?,
            "beam" => self.beam = parse(key, value)?,
            "max_phrase_len" => self.max_phrase_len = parse(key, value)?,
            "max_sentence_len" => self.max_sentence_len = parse(key, value)?,
            "lowercase" => self.lowercase = parse(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

/// Trained lexicons in both directions with their vocabularies.
#[derive(Debug, Clone)]
pub struct Model {
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    /// θ(f|e)
    pub fwd: TTable,
    /// θ(e|f)
    pub rev: TTable,
    pub config: AlignerConfig,
}

impl Model {
    pub fn train(text: &ParallelText, config: &AlignerConfig) -> Result<Model> {
        config.validate()?;
        let (source_vocab, target_vocab) = build_vocabulary(&text.pairs);
        let corpus = Corpus::encode(text, &source_vocab, &target_vocab);
        let (fwd, rev) = train_tables(&corpus.pairs, config)?;
        Ok(Model {
            source_vocab,
            target_vocab,
            fwd,
            rev,
            config: config.clone(),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.source_vocab.save(&dir.join(SOURCE_VOCAB))?;
        self.target_vocab.save(&dir.join(TARGET_VOCAB))?;
        self.fwd
            .save(&dir.join(FWD_TABLE), &self.source_vocab, &self.target_vocab)?;
        self.rev
            .save(&dir.join(REV_TABLE), &self.target_vocab, &self.source_vocab)?;
        let path = dir.join(CONFIG_FILE);
        let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        file.write_all(self.config.to_snapshot().as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Model> {
        let path = dir.join(CONFIG_FILE);
        let snapshot = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let config = AlignerConfig::from_snapshot(&snapshot)?;
        let source_vocab = Vocabulary::load(&dir.join(SOURCE_VOCAB))?;
        let target_vocab = Vocabulary::load(&dir.join(TARGET_VOCAB))?;
        let fallback = config.em.fallback;
        let fwd = TTable::load(&dir.join(FWD_TABLE), &source_vocab, &target_vocab, fallback)?;
        let rev = TTable::load(&dir.join(REV_TABLE), &target_vocab, &source_vocab, fallback)?;
        if fwd.direction() != Direction::SourceGivenTarget
            || rev.direction() != Direction::TargetGivenSource
        {
            return Err(Error::format(
                dir.display().to_string(),
                "table directions do not match their file names",
            ));
        }
        Ok(Model {
            source_vocab,
            target_vocab,
            fwd,
            rev,
            config,
        })
    }

    pub fn encode(&self, text: &ParallelText) -> Corpus {
        Corpus::encode(text, &self.source_vocab, &self.target_vocab)
    }

    pub fn soft_matrix(&self, pair: &SentencePair, params: &MatrixParams) -> SoftMatrix {
        SoftMatrix::build(pair, &self.fwd, &self.rev, params)
    }

    pub fn align_pair(&self, pair: &SentencePair) -> Result<Alignment> {
        align_with(
            pair,
            &self.fwd,
            &self.rev,
            &self.config.matrix,
            self.config.beam,
        )
    }

    /// Alignments indexed by input line; skipped lines are `None`.
    pub fn align(&self, corpus: &Corpus) -> Result<Vec<Option<Alignment>>> {
        align_corpus(
            corpus,
            &self.fwd,
            &self.rev,
            &self.config.matrix,
            self.config.beam,
        )
    }
}

/// Trains both directions and applies the Viterbi re-estimation when
/// `config.vbh` is set.
pub fn train_tables(pairs: &[SentencePair], config: &AlignerConfig) -> Result<(TTable, TTable)> {
    let fwd = train_ibm1(pairs, Direction::SourceGivenTarget, &config.em)?;
    let rev = train_ibm1(pairs, Direction::TargetGivenSource, &config.em)?;
    if config.vbh {
        Ok(vbh_reestimate(pairs, &fwd, &rev))
    } else {
        Ok((fwd, rev))
    }
}

pub fn align_with(
    pair: &SentencePair,
    fwd: &TTable,
    rev: &TTable,
    params: &MatrixParams,
    beam: usize,
) -> Result<Alignment> {
    let matrix = SoftMatrix::build(pair, fwd, rev, params);
    Ok(top_down_parse(&matrix, beam)?.project())
}

pub fn align_corpus(
    corpus: &Corpus,
    fwd: &TTable,
    rev: &TTable,
    params: &MatrixParams,
    beam: usize,
) -> Result<Vec<Option<Alignment>>> {
    let aligned: Vec<(usize, Alignment)> = corpus
        .pairs
        .par_iter()
        .map(|pair| align_with(pair, fwd, rev, params, beam).map(|a| (pair.index, a)))
        .collect::<Result<_>>()?;
    let mut by_line = vec![None; corpus.lines];
    for (index, alignment) in aligned {
        by_line[index] = Some(alignment);
    }
    Ok(by_line)
}

/// One cell of a σ grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub sigma_theta: f64,
    pub sigma_delta: f64,
    pub metrics: Metrics,
}

/// Aligns `corpus` for every (σ_θ, σ_δ) combination and scores it against
/// `gold`, one gold entry per input line.
pub fn sweep(
    model: &Model,
    corpus: &Corpus,
    gold: &[GoldAlignment],
    sigma_thetas: &[f64],
    sigma_deltas: &[f64],
) -> Result<Vec<SweepCell>> {
    if gold.len() != corpus.lines {
        return Err(Error::LengthMismatch {
            what: "gold lines and corpus lines",
            left: gold.len(),
            right: corpus.lines,
        });
    }
    let mut cells = Vec::new();
    let mut cache: BTreeMap<(u64, u64), Metrics> = BTreeMap::new();
    for &sigma_theta in sigma_thetas {
        for &sigma_delta in sigma_deltas {
            let key = (sigma_theta.to_bits(), sigma_delta.to_bits());
            let metrics = match cache.get(&key) {
                Some(m) => *m,
                None => {
                    let params = MatrixParams {
                        sigma_theta,
                        sigma_delta,
                        ..model.config.matrix.clone()
                    };
                    params.validate()?;
                    let hyp: Vec<Alignment> =
                        align_corpus(corpus, &model.fwd, &model.rev, &params, model.config.beam)?
                            .into_iter()
                            .map(Option::unwrap_or_default)
                            .collect();
                    let m = eval::aer(&hyp, gold)?;
                    cache.insert(key, m);
                    m
                }
            };
            cells.push(SweepCell {
                sigma_theta,
                sigma_delta,
                metrics,
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TextPair;

    fn text(lines: &[(&str, &str)]) -> ParallelText {
        let pairs = lines
            .iter()
            .enumerate()
            .map(|(k, (s, t))| TextPair {
                index: k,
                source: s.split_whitespace().map(String::from).collect(),
                target: t.split_whitespace().map(String::from).collect(),
            })
            .collect::<Vec<_>>();
        let stats = crate::corpus::LoadStats {
            lines: pairs.len(),
            ..Default::default()
        };
        ParallelText { pairs, stats }
    }

    #[test]
    fn snapshot_round_trip() {
        let config = AlignerConfig {
            vbh: true,
            beam: 4,
            matrix: MatrixParams {
                sigma_theta: 1.0,
                distortion_enabled: false,
                ..MatrixParams::default()
            },
            ..AlignerConfig::default()
        };
        let snapshot = config.to_snapshot();
        assert!(snapshot.contains("beam=4\n"));
        assert!(snapshot.contains("alpha=0.01\n"));
        let back = AlignerConfig::from_snapshot(&snapshot).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn snapshot_rejects_unknown_keys() {
        assert!(AlignerConfig::from_snapshot("beam=10\nwat=1\n").is_err());
        assert!(AlignerConfig::from_snapshot("beam=0\n").is_err());
        assert!(AlignerConfig::from_snapshot("beam\n").is_err());
    }

    #[test]
    fn defaults_follow_reported_settings() {
        let c = AlignerConfig::default();
        assert_eq!(c.beam, 10);
        assert_eq!(c.em.iterations, 5);
        assert_eq!(c.em.alpha, 0.01);
        assert_eq!(c.matrix.p0, 1e-4);
        assert_eq!((c.matrix.sigma_theta, c.matrix.sigma_delta), (3.0, 5.0));
    }

    #[test]
    fn single_word_pair_links() {
        let t = text(&[("a", "x")]);
        let model = Model::train(&t, &AlignerConfig::default()).unwrap();
        let out = model.align(&model.encode(&t)).unwrap();
        assert_eq!(out[0].as_ref().unwrap().to_string(), "0-0");
    }

    #[test]
    fn save_and_load() {
        let t = text(&[
            ("das haus", "the house"),
            ("das buch", "the book"),
            ("ein buch", "a book"),
        ]);
        let model = Model::train(&t, &AlignerConfig::default()).unwrap();
        let dir = std::env::temp_dir().join(format!("hieralign-model-{}", std::process::id()));
        model.save(&dir).unwrap();
        let back = Model::load(&dir).unwrap();
        assert_eq!(back.fwd, model.fwd);
        assert_eq!(back.rev, model.rev);
        assert_eq!(back.config, model.config);
        let corpus = model.encode(&t);
        assert_eq!(back.align(&corpus).unwrap(), model.align(&corpus).unwrap());
        fs::remove_dir_all(&dir).unwrap();
    }
}
