//! Model configuration and solver settings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an arriving sample is routed to the basis column it may update.
///
/// `Unrestricted` draws the column uniformly at random (optionally from
/// `index_probs`), so a representative set may end up mixing samples from
/// several clusters. `Restricted` routes by the largest sparse-coding
/// coefficient, which in practice keeps each representative set inside its
/// own cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "ru")]
    Unrestricted,
    #[serde(rename = "rr")]
    Restricted,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Unrestricted => write!(f, "ru"),
            Variant::Restricted => write!(f, "rr"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ru" => Ok(Variant::Unrestricted),
            "rr" => Ok(Variant::Restricted),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant {other:?}, expected \"ru\" or \"rr\""
            ))),
        }
    }
}

/// Stopping controls for the coordinate-descent sparse coder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoSettings {
    /// Stop when the largest coordinate change in a sweep falls below this.
    pub tol: f64,
    /// Cap on full coordinate sweeps.
    pub max_iter: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        // The sweep cap is generous because stopping requires a verified
        // stationarity residual, and near-degenerate designs (collinear
        // columns, k > m, tiny penalties) approach it slowly. Typical
        // instances stop within tens of sweeps.
        Self {
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

impl LassoSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lasso tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("lasso max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Stopping controls for the simplex-constrained dictionary update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpSettings {
    /// Stop a block sweep loop once a full sweep decreases the objective by
    /// less than this.
    pub tol: f64,
    /// Cap on block-coordinate-descent sweeps over the columns.
    pub max_sweeps: usize,
    /// Cap on projected-gradient iterations for a single column.
    pub inner_max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 10,
            inner_max_iter: 500,
        }
    }
}

impl QpSettings {
    /// Sweep cap used by the batch baseline, where no warm start is available.
    pub const BATCH_MAX_SWEEPS: usize = 200;

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "qp tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_sweeps == 0 || self.inner_max_iter == 0 {
            return Err(Error::InvalidConfig(
                "qp max_sweeps and inner_max_iter must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Same tolerances with a different sweep cap.
    pub fn with_max_sweeps(&self, max_sweeps: usize) -> Self {
        Self {
            max_sweeps,
            ..self.clone()
        }
    }
}

/// Everything needed to reproduce a fit: problem shape, penalties, variant,
/// initialization size, seed and solver controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of basis columns (clusters).
    pub k: usize,
    /// Ambient sample dimension.
    pub m: usize,
    /// l1 penalty applied during sparse coding.
    pub lambda: f64,
    /// The constant `c` behind `lambda = c / sqrt(m)`, kept for provenance.
    pub lambda_c: f64,
    /// l2 regularizer added to the sparse-coding objective so its solution
    /// is unique.
    pub elastic_kappa: f64,
    /// Ridge added to the dictionary-update quadratic so column updates are
    /// strictly convex.
    pub ridge_kappa1: f64,
    pub variant: Variant,
    /// Number of samples buffered for initialization.
    pub init_sample_count: usize,
    pub seed: u64,
    /// Optional non-uniform routing probabilities for the unrestricted
    /// variant; uniform when absent.
    pub index_probs: Option<Vec<f64>>,
    pub lasso: LassoSettings,
    pub qp: QpSettings,
}

/// Default `c` in `lambda = c / sqrt(m)`.
pub const DEFAULT_LAMBDA_C: f64 = 0.2;
/// Default ridge on the dictionary update.
pub const DEFAULT_RIDGE_KAPPA1: f64 = 1e-6;
/// Default l2 term in the sparse coder.
pub const DEFAULT_ELASTIC_KAPPA: f64 = 1e-6;
/// Default initialization buffer size.
pub const DEFAULT_INIT_SAMPLES: usize = 150;

impl ModelConfig {
    /// Defaults for a `k`-basis model on `m`-dimensional samples:
    /// `lambda = 0.2 / sqrt(m)`, tiny elastic and ridge terms, restricted
    /// variant, 150 initialization samples.
    pub fn new(k: usize, m: usize) -> Self {
        Self {
            k,
            m,
            lambda: DEFAULT_LAMBDA_C / (m as f64).sqrt(),
            lambda_c: DEFAULT_LAMBDA_C,
            elastic_kappa: DEFAULT_ELASTIC_KAPPA,
            ridge_kappa1: DEFAULT_RIDGE_KAPPA1,
            variant: Variant::Restricted,
            init_sample_count: DEFAULT_INIT_SAMPLES,
            seed: 0,
            index_probs: None,
            lasso: LassoSettings::default(),
            qp: QpSettings::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_lambda_c(mut self, c: f64) -> Self {
        self.lambda_c = c;
        self.lambda = c / (self.m as f64).sqrt();
        self
    }

    pub fn with_init_samples(mut self, n: usize) -> Self {
        self.init_sample_count = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.m < 1 {
            return Err(Error::InvalidConfig("m must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.elastic_kappa >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "elastic_kappa must be >= 0, got {}",
                self.elastic_kappa
            )));
        }
        // A positive ridge keeps every column update strictly convex even
        // when a diagonal entry of the statistics matrix is still zero.
        if !(self.ridge_kappa1 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ridge_kappa1 must be > 0, got {}",
                self.ridge_kappa1
            )));
        }
        if self.init_sample_count < self.k {
            return Err(Error::InvalidConfig(format!(
                "init_sample_count ({}) must be >= k ({})",
                self.init_sample_count, self.k
            )));
        }
        if let Some(p) = &self.index_probs {
            if p.len() != self.k {
                return Err(Error::InvalidConfig(format!(
                    "index_probs has length {}, expected k = {}",
                    p.len(),
                    self.k
                )));
            }
            if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "index_probs entries must be finite and >= 0".into(),
                ));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "index_probs must sum to 1 (got {sum})"
                )));
            }
        }
        self.lasso.validate()?;
        self.qp.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ModelConfig::new(5, 10);
        cfg.validate().unwrap();
        assert!((cfg.lambda - 0.2 / 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ModelConfig::new(0, 10).validate().is_err());
        assert!(ModelConfig::new(5, 0).validate().is_err());
        let mut cfg = ModelConfig::new(5, 10);
        cfg.init_sample_count = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_zero_ridge() {
        let mut cfg = ModelConfig::new(2, 3);
        cfg.ridge_kappa1 = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn index_probs_checked() {
        let mut cfg = ModelConfig::new(3, 2);
        cfg.index_probs = Some(vec![0.5, 0.5]);
        assert!(cfg.validate().is_err());
        cfg.index_probs = Some(vec![0.2, 0.3, 0.5]);
        cfg.validate().unwrap();
        cfg.index_probs = Some(vec![0.2, 0.3, 0.6]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn variant_round_trips_through_str() {
        for v in [Variant::Unrestricted, Variant::Restricted] {
            let s = v.to_string();
            assert_eq!(s.parse::<Variant>().unwrap(), v);
        }
        assert!("xx".parse::<Variant>().is_err());
    }
}
