//! Composition of structured and deep parts behind a link function, plus
//! checkpointing.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::basis::BasisSystem;
use crate::dataio::FunctionalDataset;
use crate::deep::{Architecture, DeepNet};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::structured::{encode_matrix, structured_forward, StructuredPart, StructuredTerm};

const CHECKPOINT_MAGIC: &str = "funssn-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Exp,
    Sigmoid,
}

impl Link {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Link::Identity => x,
            Link::Exp => x.exp(),
            Link::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

/// `mu = link(lambda_plus + lambda_minus)`; the two parts stay separately
/// addressable for post-hoc orthogonalization.
#[derive(Debug, Clone)]
pub struct SemiStructuredModel {
    pub structured: StructuredPart,
    pub deep: Option<DeepNet>,
    pub link: Link,
    pub predictor_grids: Vec<Grid>,
    pub outcome_grid: Grid,
}

impl SemiStructuredModel {
    pub fn structured_only(
        predictor_grids: Vec<Grid>,
        outcome_grid: Grid,
        k_basis: usize,
        u_basis: usize,
        degree: usize,
    ) -> Result<Self> {
        let structured =
            StructuredPart::zeros(&predictor_grids, &outcome_grid, k_basis, u_basis, degree)?;
        Ok(SemiStructuredModel {
            structured,
            deep: None,
            link: Link::Identity,
            predictor_grids,
            outcome_grid,
        })
    }

    /// Input width the deep trunk expects for this model.
    pub fn deep_input_dim(&self) -> usize {
        match self.deep.as_ref().map(|d| d.config.architecture) {
            Some(Architecture::SharedCodec) => self
                .structured
                .terms
                .iter()
                .map(|t| t.s_basis.num_basis())
                .sum(),
            Some(Architecture::Generic) => self.predictor_grids.iter().map(|g| g.len()).sum(),
            None => 0,
        }
    }

    fn check_grids(&self, ds: &FunctionalDataset) -> Result<()> {
        if ds.predictor_grids.len() != self.predictor_grids.len() {
            return Err(Error::invalid(format!(
                "model has {} predictors, dataset has {}",
                self.predictor_grids.len(),
                ds.predictor_grids.len()
            )));
        }
        for (j, (a, b)) in self
            .predictor_grids
            .iter()
            .zip(&ds.predictor_grids)
            .enumerate()
        {
            if a != b {
                return Err(Error::invalid(format!("predictor grid {j} differs")));
            }
        }
        if ds.outcome_grid != self.outcome_grid {
            return Err(Error::invalid("outcome grid differs from the model's"));
        }
        Ok(())
    }

    /// Precomputes the per-predictor encodings; these depend only on the
    /// data and can be cached across training epochs.
    pub fn encode_dataset(&self, ds: &FunctionalDataset) -> Result<Vec<Array2<f64>>> {
        self.check_grids(ds)?;
        self.structured
            .terms
            .iter()
            .map(|term| {
                encode_matrix(
                    &ds.predictors[term.predictor_index],
                    &self.predictor_grids[term.predictor_index],
                    &term.s_basis,
                )
            })
            .collect()
    }

    /// Assembles the deep trunk's input matrix for this architecture.
    pub fn deep_inputs(
        &self,
        ds: &FunctionalDataset,
        encoded: &[Array2<f64>],
    ) -> Result<Array2<f64>> {
        let arch = self
            .deep
            .as_ref()
            .map(|d| d.config.architecture)
            .ok_or_else(|| Error::invalid("model has no deep part"))?;
        let blocks: Vec<&Array2<f64>> = match arch {
            Architecture::SharedCodec => encoded.iter().collect(),
            Architecture::Generic => ds.predictors.iter().collect(),
        };
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::invalid(format!("cannot stack deep inputs: {e}")))
    }

    /// Pre-link additive components `(lambda_plus, lambda_minus)`, both
    /// n x Q; dropout only with `training` set.
    pub fn predict_parts_with(
        &self,
        ds: &FunctionalDataset,
        encoded: &[Array2<f64>],
        training: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        let t_eval = self.structured.t_basis.eval_matrix();
        let lambda_plus = structured_forward(&self.structured, encoded, t_eval)?;
        let lambda_minus = match &self.deep {
            None => Array2::zeros(lambda_plus.dim()),
            Some(net) => {
                let inputs = self.deep_inputs(ds, encoded)?;
                let (out, _) = net.forward(&inputs, training, rng)?;
                match net.config.architecture {
                    // latent U values decode through the shared outcome basis
                    Architecture::SharedCodec => out.dot(t_eval),
                    Architecture::Generic => out,
                }
            }
        };
        Ok((lambda_plus, lambda_minus))
    }

    pub fn predict_parts(&self, ds: &FunctionalDataset) -> Result<(Array2<f64>, Array2<f64>)> {
        let encoded = self.encode_dataset(ds)?;
        self.predict_parts_with(ds, &encoded, false, None)
    }

    /// `mu = link(lambda_plus + lambda_minus)` elementwise.
    pub fn predict(&self, ds: &FunctionalDataset) -> Result<Array2<f64>> {
        let (plus, minus) = self.predict_parts(ds)?;
        let sum = plus + minus;
        Ok(sum.mapv(|v| self.link.apply(v)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let checkpoint = Checkpoint::from_model(self);
        let json = serde_json::to_string(&checkpoint)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        // atomic write: temp file in the target directory, then rename
        let path = path.as_ref();
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.tmp",
            path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default()
        ));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(json.as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = String::new();
        std::fs::File::open(path)?.read_to_string(&mut buf)?;
        Checkpoint::parse(&buf)?.into_model()
    }
}

/// On-disk model format (versioned JSON). Basis knots are recorded so
/// weight surfaces can be reconstructed from the file alone.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub magic: String,
    pub version: u32,
    pub predictor_grids: Vec<Grid>,
    pub outcome_grid: Grid,
    pub degree: usize,
    pub u_basis: usize,
    pub t_knots: Vec<f64>,
    pub intercept_theta: Vec<f64>,
    pub terms: Vec<CheckpointTerm>,
    pub deep: Option<DeepNet>,
    pub link: Link,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointTerm {
    pub predictor_index: usize,
    pub k_basis: usize,
    pub s_knots: Vec<f64>,
    /// Row-major U x K coefficients.
    pub theta: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model(model: &SemiStructuredModel) -> Self {
        Checkpoint {
            magic: CHECKPOINT_MAGIC.to_string(),
            version: CHECKPOINT_VERSION,
            predictor_grids: model.predictor_grids.clone(),
            outcome_grid: model.outcome_grid.clone(),
            degree: model.structured.t_basis.degree(),
            u_basis: model.structured.t_basis.num_basis(),
            t_knots: model.structured.t_basis.knots().to_vec(),
            intercept_theta: model.structured.intercept_theta.to_vec(),
            terms: model
                .structured
                .terms
                .iter()
                .map(|t| CheckpointTerm {
                    predictor_index: t.predictor_index,
                    k_basis: t.s_basis.num_basis(),
                    s_knots: t.s_basis.knots().to_vec(),
                    theta: t.theta.iter().copied().collect(),
                })
                .collect(),
            deep: model.deep.clone(),
            link: model.link,
        }
    }

    /// Parses and validates a checkpoint document.
    pub fn parse(json: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(json)
            .map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
        if ckpt.magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic '{}', not a model checkpoint",
                ckpt.magic
            )));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (this build reads {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn into_model(self) -> Result<SemiStructuredModel> {
        let t_basis = Arc::new(BasisSystem::bspline(
            &self.outcome_grid,
            self.u_basis,
            self.degree,
        )?);
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let grid = self
                .predictor_grids
                .get(term.predictor_index)
                .ok_or_else(|| Error::Checkpoint("term references a missing grid".into()))?;
            let s_basis = Arc::new(BasisSystem::bspline(grid, term.k_basis, self.degree)?);
            if s_basis.knots() != term.s_knots.as_slice() {
                return Err(Error::Checkpoint(
                    "stored knots disagree with the rebuilt basis".into(),
                ));
            }
            let theta = Array2::from_shape_vec((self.u_basis, term.k_basis), term.theta.clone())
                .map_err(|e| Error::Checkpoint(format!("theta shape: {e}")))?;
            terms.push(StructuredTerm {
                theta,
                s_basis,
                predictor_index: term.predictor_index,
            });
        }
        let intercept_len = self.intercept_theta.len();
        if intercept_len != self.u_basis {
            return Err(Error::Checkpoint(format!(
                "intercept has {intercept_len} coefficients, expected {}",
                self.u_basis
            )));
        }
        Ok(SemiStructuredModel {
            structured: StructuredPart {
                intercept_theta: self.intercept_theta.into(),
                terms,
                t_basis,
            },
            deep: self.deep,
            link: self.link,
            predictor_grids: self.predictor_grids,
            outcome_grid: self.outcome_grid,
        })
    }
}
