//! Atypicity scores: larger means more atypical.

use crate::error::{config, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreFunction {
    Identity,
    ZScore { mu: f64, sigma: f64 },
    /// Mean absolute distance to the `k` nearest training points.
    Knn { k: usize, train: Vec<f64> },
    /// Negative mean Gaussian kernel against the training points.
    Kde { bandwidth: f64, train: Vec<f64> },
}

impl ScoreFunction {
    pub fn zscore(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return config(format!("z-score needs finite mu and sigma > 0, got ({mu}, {sigma})"));
        }
        Ok(ScoreFunction::ZScore { mu, sigma })
    }

    pub fn knn(k: usize, train: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return config("knn needs k >= 1");
        }
        if k > train.len() {
            return config(format!("knn needs k <= training size, got k={k} with {} points", train.len()));
        }
        Ok(ScoreFunction::Knn { k, train })
    }

    pub fn kde(bandwidth: f64, train: Vec<f64>) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return config(format!("kde bandwidth must be > 0, got {bandwidth}"));
        }
        if train.is_empty() {
            return config("kde needs a non-empty training set");
        }
        Ok(ScoreFunction::Kde { bandwidth, train })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScoreFunction::Identity => Ok(()),
            ScoreFunction::ZScore { mu, sigma } => Self::zscore(*mu, *sigma).map(|_| ()),
            ScoreFunction::Knn { k, train } => {
                if *k == 0 || *k > train.len() {
                    config("knn needs 1 <= k <= training size")
                } else {
                    Ok(())
                }
            }
            ScoreFunction::Kde { bandwidth, train } => {
                if !(*bandwidth > 0.0) || train.is_empty() {
                    config("kde needs bandwidth > 0 and training data")
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn score(&self, x: f64) -> f64 {
        match self {
            ScoreFunction::Identity => x,
            ScoreFunction::ZScore { mu, sigma } => (x - mu).abs() / sigma,
            ScoreFunction::Knn { k, train } => {
                let mut d: Vec<(f64, usize)> = train.iter().map(|z| (x - z).abs()).zip(0..).collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d[..*k].iter().map(|p| p.0).sum::<f64>() / *k as f64
            }
            ScoreFunction::Kde { bandwidth, train } => {
                let h2 = 2.0 * bandwidth * bandwidth;
                let s: f64 = train.iter().map(|z| (-(x - z) * (x - z) / h2).exp()).sum();
                -s / train.len() as f64
            }
        }
    }
}

/// Z-score with sample mean and sample standard deviation (divisor `l - 1`).
pub fn fit_zscore(train: &[f64]) -> Result<ScoreFunction> {
    if train.len() < 2 {
        return config("z-score fit needs at least two points");
    }
    let n = train.len() as f64;
    let mu = train.iter().sum::<f64>() / n;
    let var = train.iter().map(|z| (z - mu).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return Err(Error::DegenerateData("constant training set".into()));
    }
    ScoreFunction::zscore(mu, sigma)
}
