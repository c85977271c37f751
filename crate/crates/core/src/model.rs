//! The trained model: configuration, dictionary, representative sets,
//! sufficient statistics and the stream RNG, plus JSON persistence.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::dictionary::{Dictionary, RepresentativeSet};
use crate::error::{Error, Result};
use crate::init::InitResult;
use crate::stats::SufficientStats;

/// A single-writer model instance. The RNG drives the unrestricted variant's
/// index draws; it is owned here so two fits with the same seed replay the
/// same stream of choices.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub dict: Dictionary,
    pub rep_sets: Vec<RepresentativeSet>,
    pub stats: SufficientStats,
    pub(crate) rng: ChaCha8Rng,
}

impl Model {
    /// Assembles a model from an initialization result, continuing with the
    /// provided RNG state (already advanced past the K-means draws).
    pub(crate) fn from_init(config: ModelConfig, init: InitResult, rng: ChaCha8Rng) -> Self {
        Self {
            stats: SufficientStats::zeros(config.m, config.k),
            config,
            dict: init.dictionary,
            rep_sets: init.rep_sets,
            rng,
        }
    }

    /// Checks every model invariant: config validity, weight/capacity
    /// agreement, hull residuals, simplex feasibility and statistics shape.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.dict.m() != self.config.m || self.dict.k() != self.config.k {
            return Err(Error::DimensionMismatch(format!(
                "dictionary is {}x{}, config says {}x{}",
                self.dict.m(),
                self.dict.k(),
                self.config.m,
                self.config.k
            )));
        }
        self.dict.validate(&self.rep_sets)?;
        if self.stats.k() != self.config.k || self.stats.m() != self.config.m {
            return Err(Error::DimensionMismatch(
                "statistics shape disagrees with config".into(),
            ));
        }
        self.stats.validate()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument::from_model(self);
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses and validates a model document. The RNG restarts from the
    /// configured seed; persistence does not resume the draw stream.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        let model = doc.into_model()?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Row-major dense matrix payload for the JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixData {
    pub fn from_array(a: &Array2<f64>) -> Self {
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    pub fn into_array(self) -> Result<Array2<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::InvalidState(format!(
                "matrix payload claims {}x{} but carries {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| Error::InvalidState(e.to_string()))
    }
}

/// The on-disk model schema. Serializing a freshly parsed document
/// reproduces the input byte for byte.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    config: ModelConfig,
    #[serde(rename = "D")]
    d: MatrixData,
    weights: Vec<Vec<f64>>,
    rep_sets: Vec<MatrixData>,
    #[serde(rename = "A")]
    a: MatrixData,
    #[serde(rename = "B")]
    b: MatrixData,
    t: u64,
    loss_const: f64,
}

impl ModelDocument {
    fn from_model(model: &Model) -> Self {
        Self {
            config: model.config.clone(),
            d: MatrixData::from_array(model.dict.columns()),
            weights: model.dict.weights().iter().map(|w| w.to_vec()).collect(),
            rep_sets: model
                .rep_sets
                .iter()
                .map(|r| MatrixData::from_array(r.samples()))
                .collect(),
            a: MatrixData::from_array(&model.stats.a),
            b: MatrixData::from_array(&model.stats.b),
            t: model.stats.t,
            loss_const: model.stats.loss_const,
        }
    }

    fn into_model(self) -> Result<Model> {
        let rep_sets: Vec<RepresentativeSet> = self
            .rep_sets
            .into_iter()
            .map(|m| RepresentativeSet::new(m.into_array()?))
            .collect::<Result<_>>()?;
        let weights: Vec<Array1<f64>> = self.weights.into_iter().map(Array1::from_vec).collect();
        let dict = Dictionary::from_weights(&rep_sets, weights)?;
        let stored = self.d.into_array()?;
        // The stored columns must agree with what the weights rebuild.
        if crate::linalg::max_abs_diff(&stored.view(), &dict.columns().view()) > 1e-9 {
            return Err(Error::InvalidState(
                "stored dictionary disagrees with its weights".into(),
            ));
        }
        let stats = SufficientStats {
            a: self.a.into_array()?,
            b: self.b.into_array()?,
            t: self.t,
            loss_const: self.loss_const,
        };
        let rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        Ok(Model {
            config: self.config,
            dict,
            rep_sets,
            stats,
            rng,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::initialize;
    use ndarray::array;

    fn tiny_model() -> Model {
        let mut cfg = ModelConfig::new(2, 2);
        cfg.init_sample_count = 4;
        cfg.seed = 3;
        let x = array![[0.0, 0.5, 9.5, 10.0], [0.0, 0.5, 9.5, 10.0]];
        let init = initialize(&x.view(), &cfg).unwrap();
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Model::from_init(cfg, init, rng)
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let mut model = tiny_model();
        model.stats.t = 1;
        model.stats.a[[0, 0]] = 0.12345678901234567;
        model.stats.b[[1, 1]] = -3.0e-7;
        model.stats.loss_const = 1.25;
        let first = model.to_json().unwrap();
        let parsed = Model::from_json(&first).unwrap();
        let second = parsed.to_json().unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn tampered_dictionary_is_rejected() {
        let model = tiny_model();
        let mut doc: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
        doc["D"]["data"][0] = serde_json::json!(99.0);
        let text = serde_json::to_string(&doc).unwrap();
        assert!(Model::from_json(&text).is_err());
    }

    #[test]
    fn validate_passes_after_init() {
        tiny_model().validate().unwrap();
    }
}
