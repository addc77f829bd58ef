use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{MetricError, Result};

/// Document embeddings keyed by document id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub dim: usize,
    pub label: String,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Reads `dim=<d> label=<tag>` followed by `<id>\t<d floats>` lines.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| MetricError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |line: usize, message: &str| MetricError::BadEmbeddingFile {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let mut dim = None;
        let mut label = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("dim", v)) => dim = v.parse::<usize>().ok(),
                Some(("label", v)) => label = Some(v.to_string()),
                _ => return Err(bad(1, "unexpected header field")),
            }
        }
        let (dim, label) = match (dim, label) {
            (Some(d), Some(l)) if d > 0 => (d, l),
            _ => return Err(bad(1, "header needs dim=<d> label=<tag>")),
        };
        let mut vectors = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, rest) = line.split_once('\t').ok_or_else(|| bad(i + 2, "missing tab"))?;
            let v = rest
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad(i + 2, "bad float"))?;
            if v.len() != dim {
                return Err(bad(i + 2, "vector length differs from dim"));
            }
            if vectors.insert(id.to_string(), v).is_some() {
                return Err(bad(i + 2, "duplicate document id"));
            }
        }
        Ok(Self { dim, label, vectors })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = format!("dim={} label={}\n", self.dim, self.label);
        for (id, v) in &self.vectors {
            let nums: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{id}\t{}", nums.join(" "));
        }
        fs::write(path, s).map_err(|source| MetricError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub count: usize,
}

/// Sample mean and unbiased covariance (plus `epsilon * I`), vectors taken
/// in id order.
pub fn gaussian_stats(set: &EmbeddingSet, epsilon: f64) -> Result<GaussianStats> {
    let n = set.vectors.len();
    if n < 2 {
        return Err(MetricError::TooFewVectors(n));
    }
    let d = set.dim;
    if set.vectors.values().any(|v| v.len() != d) {
        return Err(MetricError::DimMismatch(d, set.vectors.values().map(Vec::len).find(|&l| l != d).unwrap_or(d)));
    }
    if set.vectors.values().flatten().any(|x| !x.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let data = DMatrix::from_row_iterator(n, d, set.vectors.values().flatten().copied());
    let mut mean = DVector::zeros(d);
    for row in data.row_iter() {
        mean += row.transpose();
    }
    mean /= n as f64;
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    cov = (&cov + cov.transpose()) * 0.5;
    for i in 0..d {
        cov[(i, i)] += epsilon;
    }
    Ok(GaussianStats {
        mean,
        covariance: cov,
        count: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetResult {
    pub distance: f64,
    /// Largest magnitude of a negative eigenvalue clamped to zero.
    pub clamped: f64,
}

/// Square root of a symmetric PSD matrix; returns the root and the largest
/// clamped negative eigenvalue magnitude.
fn sqrtm_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let mut clamped: f64 = 0.0;
    let roots = eig.eigenvalues.map(|l| {
        if l < 0.0 {
            clamped = clamped.max(-l);
            0.0
        } else {
            l.sqrt()
        }
    });
    let v = &eig.eigenvectors;
    (v * DMatrix::from_diagonal(&roots) * v.transpose(), clamped)
}

/// `|mu_a - mu_b|^2 + tr(A) + tr(B) - 2 tr((S B S)^{1/2})` with `S = A^{1/2}`.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<FrechetResult> {
    let d = a.mean.len();
    if b.mean.len() != d || a.covariance.nrows() != d || b.covariance.nrows() != d {
        return Err(MetricError::DimMismatch(d, b.mean.len()));
    }
    let finite = |m: &DMatrix<f64>| m.iter().all(|x| x.is_finite());
    if !finite(&a.covariance) || !finite(&b.covariance) || a.mean.iter().chain(b.mean.iter()).any(|x| !x.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    let (s, c1) = sqrtm_psd(&a.covariance);
    let inner = &s * &b.covariance * &s;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner);
    let mut c2: f64 = 0.0;
    let tr_covmean: f64 = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l < 0.0 {
                c2 = c2.max(-l);
                0.0
            } else {
                l.sqrt()
            }
        })
        .sum();
    let distance = diff + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_covmean;
    Ok(FrechetResult {
        distance: distance.max(0.0),
        clamped: c1.max(c2),
    })
}

/// Fréchet distance between Gaussians fitted to two embedding sets of the
/// same label and dimension.
pub fn fbd(generated: &EmbeddingSet, reference: &EmbeddingSet, epsilon: f64) -> Result<FrechetResult> {
    if generated.label != reference.label {
        return Err(MetricError::LabelMismatch(generated.label.clone(), reference.label.clone()));
    }
    if generated.dim != reference.dim {
        return Err(MetricError::DimMismatch(generated.dim, reference.dim));
    }
    frechet_distance(&gaussian_stats(generated, epsilon)?, &gaussian_stats(reference, epsilon)?)
}
