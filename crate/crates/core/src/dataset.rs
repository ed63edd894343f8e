//! Covariate/response datasets and their CSV representation.
//!
//! File layout:
//!
//! ```text
//! #dims=d1[,d2[,...]]
//! y,x_1,...,x_p        (one row per sample; no y column for response-free data)
//! ```
//!
//! Covariate entries are the row-major vectorization of the covariate: for a
//! `d1 x d2` matrix entry `(i, j)` sits at `i * d2 + j`, and for a fourth-order
//! tensor entry `(j1, j2, j3, j4)` sits at `((j1 * d + j2) * d + j3) * d + j4`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::spectral::square_unfold_flat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovariateShape {
    Vector(usize),
    Matrix(usize, usize),
    /// Cubical fourth-order tensor with side `d`.
    Tensor4(usize),
}

impl CovariateShape {
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Dataset(format!("zero dimension in {dims:?}")));
        }
        match *dims {
            [d] => Ok(CovariateShape::Vector(d)),
            [d1, d2] => Ok(CovariateShape::Matrix(d1, d2)),
            [a, b, c, e] if a == b && b == c && c == e => Ok(CovariateShape::Tensor4(a)),
            [_, _, _, _] => Err(Error::Dataset(format!(
                "fourth-order covariates must be cubical, got dims {dims:?}"
            ))),
            _ => Err(Error::Dataset(format!(
                "unsupported covariate order {} (dims {dims:?})",
                dims.len()
            ))),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            CovariateShape::Vector(d) => vec![d],
            CovariateShape::Matrix(d1, d2) => vec![d1, d2],
            CovariateShape::Tensor4(d) => vec![d; 4],
        }
    }

    /// Number of scalar entries per covariate.
    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimDataset {
    shape: CovariateShape,
    covariates: Vec<f64>,
    responses: Option<Vec<f64>>,
}

impl SimDataset {
    pub fn new(
        shape: CovariateShape,
        covariates: Vec<f64>,
        responses: Option<Vec<f64>>,
    ) -> Result<Self> {
        let p = shape.len();
        if !covariates.len().is_multiple_of(p) {
            return Err(Error::shape(format!(
                "{} covariate values is not a multiple of {p}",
                covariates.len()
            )));
        }
        let n = covariates.len() / p;
        if let Some(y) = &responses {
            if y.len() != n {
                return Err(Error::shape(format!("{} responses for {n} covariate rows", y.len())));
            }
        }
        Ok(SimDataset {
            shape,
            covariates,
            responses,
        })
    }

    pub fn shape(&self) -> CovariateShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.covariates.len() / self.shape.len()
    }

    /// Entries per covariate.
    pub fn p(&self) -> usize {
        self.shape.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.covariates[i * p..(i + 1) * p]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn responses(&self) -> Option<&[f64]> {
        self.responses.as_deref()
    }

    pub fn require_responses(&self) -> Result<&[f64]> {
        self.responses
            .as_deref()
            .ok_or_else(|| Error::Dataset("dataset has no response column".into()))
    }

    pub fn with_responses(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::shape(format!("{} responses for {} rows", y.len(), self.n())));
        }
        self.responses = Some(y);
        Ok(self)
    }

    /// Square-unfolds every tensor covariate into a `d^2 x d^2` matrix.
    pub fn square_unfolded(&self) -> Result<SimDataset> {
        let CovariateShape::Tensor4(d) = self.shape else {
            return Err(Error::shape("square unfolding needs fourth-order covariates"));
        };
        let mut cov = Vec::with_capacity(self.covariates.len());
        for i in 0..self.n() {
            cov.extend(square_unfold_flat(d, self.row(i))?);
        }
        SimDataset::new(
            CovariateShape::Matrix(d * d, d * d),
            cov,
            self.responses.clone(),
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dims: Vec<String> = self.shape.dims().iter().map(|d| d.to_string()).collect();
        writeln!(w, "#dims={}", dims.join(","))?;
        let mut line = String::new();
        for i in 0..self.n() {
            line.clear();
            if let Some(y) = &self.responses {
                write!(line, "{}", y[i]).unwrap();
            }
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 || self.responses.is_some() {
                    line.push(',');
                }
                write!(line, "{x}").unwrap();
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the CSV layout above. `with_response` says whether the first
    /// column is `y`.
    pub fn read_csv<R: BufRead>(r: R, with_response: bool) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let shape = loop {
            match lines.next() {
                None => return Err(Error::Dataset("empty file: missing `#dims=` header".into())),
                Some((_, line)) => {
                    let line = line?;
                    let t = line.trim();
                    if t.is_empty() {
                        continue;
                    }
                    let spec = t.strip_prefix("#dims=").ok_or_else(|| {
                        Error::Dataset(format!("malformed header `{t}`: expected `#dims=d1[,d2,...]`"))
                    })?;
                    let dims = spec
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::Dataset(format!("malformed header `{t}`: bad dimension list")))?;
                    break CovariateShape::from_dims(&dims)?;
                }
            }
        };
        let p = shape.len();
        let width = p + usize::from(with_response);
        let mut cov = Vec::new();
        let mut y = Vec::new();
        for (lineno, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let vals = t
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Dataset(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() != width {
                return Err(Error::DimensionMismatch(format!(
                    "line {}: expected {width} columns for dims {:?}{}, found {}",
                    lineno + 1,
                    shape.dims(),
                    if with_response { " plus response" } else { "" },
                    vals.len()
                )));
            }
            if with_response {
                y.push(vals[0]);
                cov.extend_from_slice(&vals[1..]);
            } else {
                cov.extend_from_slice(&vals);
            }
        }
        if cov.is_empty() {
            return Err(Error::Dataset("no data rows".into()));
        }
        SimDataset::new(shape, cov, with_response.then_some(y))
    }
}
