//! Word alignments and the Pharaoh `j-i` text format.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A link between source word `source` (j) and target word `target` (i).
///
/// Ordering is by source index, then target index, which is also the
/// Pharaoh output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub source: usize,
    pub target: usize,
}

impl Link {
    pub fn new(source: usize, target: usize) -> Self {
        Link { source, target }
    }

    pub fn transposed(self) -> Self {
        Link::new(self.target, self.source)
    }
}

/// A many-to-many set of links.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Alignment {
    links: BTreeSet<Link>,
}

impl Alignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: usize, target: usize) -> bool {
        self.links.insert(Link::new(source, target))
    }

    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.links.contains(&Link::new(source, target))
    }

    pub fn contains_link(&self, link: &Link) -> bool {
        self.links.contains(link)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Links in (source, target) order.
    pub fn iter(&self) -> impl Iterator<Item = Link> + '_ {
        self.links.iter().copied()
    }

    pub fn links(&self) -> &BTreeSet<Link> {
        &self.links
    }

    pub fn intersection(&self, other: &Alignment) -> Alignment {
        self.links.intersection(&other.links).copied().collect()
    }

    pub fn union(&self, other: &Alignment) -> Alignment {
        self.links.union(&other.links).copied().collect()
    }

    pub fn is_subset(&self, other: &Alignment) -> bool {
        self.links.is_subset(&other.links)
    }

    /// Swaps the roles of source and target in every link.
    pub fn transposed(&self) -> Alignment {
        self.iter().map(Link::transposed).collect()
    }

    /// True when every link satisfies `source < n` and `target < m`.
    pub fn within(&self, n: usize, m: usize) -> bool {
        self.iter().all(|l| l.source < n && l.target < m)
    }

    /// Parses one Pharaoh line such as `0-0 1-2`.
    pub fn parse_pharaoh(line: &str, line_no: usize) -> Result<Alignment> {
        let mut alignment = Alignment::new();
        for (column, token) in line.split_whitespace().enumerate() {
            let link = parse_link(token, '-').ok_or_else(|| Error::MalformedLink {
                line: line_no,
                column: column + 1,
                token: token.to_string(),
            })?;
            alignment.links.insert(link);
        }
        Ok(alignment)
    }
}

pub(crate) fn parse_link(token: &str, separator: char) -> Option<Link> {
    let (j, i) = token.split_once(separator)?;
    Some(Link::new(j.parse().ok()?, i.parse().ok()?))
}

impl FromIterator<Link> for Alignment {
    fn from_iter<T: IntoIterator<Item = Link>>(iter: T) -> Self {
        Alignment {
            links: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, link) in self.links.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}-{}", link.source, link.target)?;
        }
        Ok(())
    }
}

/// Reads a whole Pharaoh file, one alignment per line.
pub fn read_pharaoh<R: BufRead>(reader: R) -> Result<Vec<Alignment>> {
    reader
        .lines()
        .enumerate()
        .map(|(k, line)| Alignment::parse_pharaoh(&line?, k + 1))
        .collect()
}

/// Writes one line per entry; `None` entries become empty lines.
pub fn write_pharaoh<'a, W, I>(mut writer: W, alignments: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Option<&'a Alignment>>,
{
    for alignment in alignments {
        match alignment {
            Some(a) => writeln!(writer, "{a}")?,
            None => writeln!(writer)?,
        }
    }
    writer.flush()?;
    Ok(())
}
