//! Per-pair soft association matrix with an integral image for O(1)
//! block sums.

use std::io::Write;

use crate::corpus::SentencePair;
use crate::error::{Error, Result};
use crate::lexicon::{symmetric_lexical_score, TTable};

const UPPER_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixParams {
    pub sigma_theta: f64,
    pub sigma_delta: f64,
    pub distortion_enabled: bool,
    /// Relative-position band inside which the distortion bonus applies.
    pub threshold: f64,
    /// Off-band penalty; p0² is the weight floor.
    pub p0: f64,
}

impl Default for MatrixParams {
    fn default() -> Self {
        MatrixParams {
            sigma_theta: 3.0,
            sigma_delta: 5.0,
            distortion_enabled: true,
            threshold: 0.5,
            p0: 1e-4,
        }
    }
}

impl MatrixParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.sigma_theta) || !positive(self.sigma_delta) {
            return Err(Error::InvalidParameter("sigma values must be > 0".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidParameter(
                "distortion threshold must be in (0, 1]".into(),
            ));
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::InvalidParameter("p0 must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn floor(&self) -> f64 {
        self.p0 * self.p0
    }

    /// Weight of a cell from its lexical log-score and relative-position
    /// distance `h`, clamped to [p0², 1).
    pub fn weight(&self, lexical: f64, h: f64) -> f64 {
        let mut raw = (lexical / self.sigma_theta).exp();
        if self.distortion_enabled {
            raw *= if h < self.threshold {
                ((1.0 - h).ln() / self.sigma_delta).exp()
            } else {
                self.p0
            };
        }
        raw.clamp(self.floor(), 1.0 - UPPER_MARGIN)
    }
}

/// Relative-position distance h = |j/n − i/m| and log(1 − h).
pub fn distortion(j: usize, i: usize, n: usize, m: usize) -> (f64, f64) {
    let h = (j as f64 / n as f64 - i as f64 / m as f64).abs();
    (h, (1.0 - h).ln())
}

/// n×m weights indexed `[j][i]` (source rows) and their (n+1)×(m+1)
/// integral image.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMatrix {
    n: usize,
    m: usize,
    weights: Vec<f64>,
    prefix: Vec<f64>,
}

impl SoftMatrix {
    /// Wraps row-major weights. Panics if the length is not `n * m` or a
    /// dimension is zero.
    pub fn from_weights(n: usize, m: usize, weights: Vec<f64>) -> SoftMatrix {
        assert!(n > 0 && m > 0, "matrix dimensions must be positive");
        assert_eq!(weights.len(), n * m, "weights must be n * m");
        let stride = m + 1;
        let mut prefix = vec![0.0; (n + 1) * stride];
        for j in 0..n {
            let mut row = 0.0;
            for i in 0..m {
                row += weights[j * m + i];
                prefix[(j + 1) * stride + i + 1] = prefix[j * stride + i + 1] + row;
            }
        }
        SoftMatrix {
            n,
            m,
            weights,
            prefix,
        }
    }

    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> f64) -> SoftMatrix {
        let weights = (0..n)
            .flat_map(|j| (0..m).map(move |i| (j, i)))
            .map(|(j, i)| f(j, i))
            .collect();
        SoftMatrix::from_weights(n, m, weights)
    }

    pub fn build(
        pair: &SentencePair,
        t_fe: &TTable,
        t_ef: &TTable,
        params: &MatrixParams,
    ) -> SoftMatrix {
        let (n, m) = (pair.source.len(), pair.target.len());
        SoftMatrix::from_fn(n, m, |j, i| {
            let lexical = symmetric_lexical_score(t_fe, t_ef, pair.source[j], pair.target[i]);
            let (h, _) = distortion(j, i, n, m);
            params.weight(lexical, h)
        })
    }

    /// Source length.
    pub fn rows(&self) -> usize {
        self.n
    }

    /// Target length.
    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.weights[j * self.m + i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cumulative sum of `weights[j][i]` over `j < a`, `i < b`.
    #[inline]
    pub fn prefix(&self, a: usize, b: usize) -> f64 {
        self.prefix[a * (self.m + 1) + b]
    }

    /// Σ weights over source rows `[j0, j1)` and target columns `[i0, i1)`.
    #[inline]
    pub fn block_sum(&self, j0: usize, j1: usize, i0: usize, i1: usize) -> f64 {
        let s =
            self.prefix(j1, i1) - self.prefix(j0, i1) - self.prefix(j1, i0) + self.prefix(j0, i0);
        s.max(0.0)
    }

    /// TSV `j<TAB>i<TAB>weight`, one line per cell, row-major.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for j in 0..self.n {
            for i in 0..self.m {
                writeln!(w, "{j}\t{i}\t{:e}", self.get(j, i))?;
            }
        }
        Ok(())
    }
}
