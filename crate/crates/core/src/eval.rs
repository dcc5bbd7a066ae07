//! Precision, recall and alignment error rate against sure/possible gold
//! links.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::alignment::{parse_link, Alignment, Link};
use crate::error::{Error, Result};

/// Sure links `S` and possible links `P`, with `S ⊆ P`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldAlignment {
    sure: BTreeSet<Link>,
    possible: BTreeSet<Link>,
}

impl GoldAlignment {
    pub fn new<S, P>(sure: S, possible: P) -> GoldAlignment
    where
        S: IntoIterator<Item = Link>,
        P: IntoIterator<Item = Link>,
    {
        let sure: BTreeSet<Link> = sure.into_iter().collect();
        let mut possible: BTreeSet<Link> = possible.into_iter().collect();
        possible.extend(sure.iter().copied());
        GoldAlignment { sure, possible }
    }

    /// Gold where every link is sure.
    pub fn all_sure(alignment: &Alignment) -> GoldAlignment {
        GoldAlignment::new(alignment.iter(), std::iter::empty())
    }

    pub fn sure(&self) -> &BTreeSet<Link> {
        &self.sure
    }

    pub fn possible(&self) -> &BTreeSet<Link> {
        &self.possible
    }

    /// Parses `j-i` (sure) and `j?i` (possible) tokens.
    pub fn parse(line: &str, line_no: usize) -> Result<GoldAlignment> {
        let mut sure = Vec::new();
        let mut possible = Vec::new();
        for (column, token) in line.split_whitespace().enumerate() {
            let parsed = if token.contains('?') {
                parse_link(token, '?').map(|l| possible.push(l))
            } else {
                parse_link(token, '-').map(|l| sure.push(l))
            };
            if parsed.is_none() {
                return Err(Error::MalformedLink {
                    line: line_no,
                    column: column + 1,
                    token: token.to_string(),
                });
            }
        }
        Ok(GoldAlignment::new(sure, possible))
    }
}

pub fn read_gold<R: BufRead>(reader: R) -> Result<Vec<GoldAlignment>> {
    reader
        .lines()
        .enumerate()
        .map(|(k, line)| GoldAlignment::parse(&line?, k + 1))
        .collect()
}

pub fn load_gold(path: &Path) -> Result<Vec<GoldAlignment>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_gold(BufReader::new(file))
}

/// Raw link counts, summable across sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub hyp: usize,
    pub sure: usize,
    pub hyp_and_sure: usize,
    pub hyp_and_possible: usize,
}

impl Counts {
    pub fn of(hyp: &Alignment, gold: &GoldAlignment) -> Counts {
        Counts {
            hyp: hyp.len(),
            sure: gold.sure.len(),
            hyp_and_sure: hyp.iter().filter(|l| gold.sure.contains(l)).count(),
            hyp_and_possible: hyp.iter().filter(|l| gold.possible.contains(l)).count(),
        }
    }

    pub fn metrics(&self) -> Metrics {
        let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let denom = self.hyp + self.sure;
        Metrics {
            precision: div(self.hyp_and_possible, self.hyp),
            recall: div(self.hyp_and_sure, self.sure),
            aer: (denom > 0)
                .then(|| 1.0 - (self.hyp_and_sure + self.hyp_and_possible) as f64 / denom as f64),
        }
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            hyp: self.hyp + o.hyp,
            sure: self.sure + o.sure,
            hyp_and_sure: self.hyp_and_sure + o.hyp_and_sure,
            hyp_and_possible: self.hyp_and_possible + o.hyp_and_possible,
        }
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), |a, b| a + b)
    }
}

/// `aer` is `None` when both the hypothesis and the sure set are empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub aer: Option<f64>,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "precision={:.4} recall={:.4} ",
            self.precision, self.recall
        )?;
        match self.aer {
            Some(aer) => write!(f, "aer={aer:.4}"),
            None => write!(f, "aer=undefined"),
        }
    }
}

/// Corpus-level (micro-averaged) metrics.
pub fn aer(hyp: &[Alignment], gold: &[GoldAlignment]) -> Result<Metrics> {
    Ok(per_sentence(hyp, gold)?
        .into_iter()
        .sum::<Counts>()
        .metrics())
}

pub fn per_sentence(hyp: &[Alignment], gold: &[GoldAlignment]) -> Result<Vec<Counts>> {
    if hyp.len() != gold.len() {
        return Err(Error::LengthMismatch {
            what: "hypothesis and gold sentence counts",
            left: hyp.len(),
            right: gold.len(),
        });
    }
    Ok(hyp
        .iter()
        .zip(gold)
        .map(|(h, g)| Counts::of(h, g))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(links: &[(usize, usize)]) -> Alignment {
        links.iter().map(|&(j, i)| Link::new(j, i)).collect()
    }

    #[test]
    fn parses_sure_and_possible() {
        let g = GoldAlignment::parse("0-0 1?2", 1).unwrap();
        assert_eq!(g.sure().len(), 1);
        assert_eq!(g.possible().len(), 2);
        assert!(g.possible().contains(&Link::new(1, 2)));
        assert!(g.possible().contains(&Link::new(0, 0)));
    }

    #[test]
    fn empty_line_and_duplicates() {
        let g = GoldAlignment::parse("", 1).unwrap();
        assert!(g.sure().is_empty() && g.possible().is_empty());
        assert_eq!(GoldAlignment::parse("0-0 0-0", 1).unwrap().sure().len(), 1);
    }

    #[test]
    fn malformed_token_position() {
        match read_gold(std::io::Cursor::new("0-0\n1-1 2:3\n")) {
            Err(Error::MalformedLink { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(GoldAlignment::parse("1?", 1).is_err());
    }

    #[test]
    fn perfect_match() {
        let x = a(&[(0, 0), (1, 1)]);
        let m = aer(std::slice::from_ref(&x), &[GoldAlignment::all_sure(&x)]).unwrap();
        assert_eq!((m.precision, m.recall, m.aer), (1.0, 1.0, Some(0.0)));
    }

    #[test]
    fn disjoint_is_total_error() {
        let m = aer(&[a(&[(0, 1)])], &[GoldAlignment::all_sure(&a(&[(0, 0)]))]).unwrap();
        assert_eq!(m.aer, Some(1.0));
        assert_eq!(m.precision, 0.0);
    }

    #[test]
    fn possible_links_do_not_hurt() {
        let gold = GoldAlignment::new([Link::new(0, 0)], [Link::new(1, 1)]);
        let m = aer(&[a(&[(0, 0)])], &[gold]).unwrap();
        assert_eq!((m.precision, m.recall, m.aer), (1.0, 1.0, Some(0.0)));
    }

    #[test]
    fn empty_denominators() {
        let m = aer(&[Alignment::new()], &[GoldAlignment::default()]).unwrap();
        assert_eq!(m.aer, None);
        assert_eq!(
            m.to_string(),
            "precision=0.0000 recall=0.0000 aer=undefined"
        );
    }

    #[test]
    fn length_mismatch_is_fatal() {
        assert!(aer(&[Alignment::new()], &[]).is_err());
    }

    #[test]
    fn display_has_four_decimals() {
        let m = Metrics {
            precision: 0.5,
            recall: 1.0 / 3.0,
            aer: Some(0.25),
        };
        assert_eq!(m.to_string(), "precision=0.5000 recall=0.3333 aer=0.2500");
    }
}
