//! Non-intrusive reduced-order model: POD of solution snapshots plus
//! interpolation of modal coefficients and objective over the parameters.

mod rbf;

pub use rbf::{fit_interpolator, Interpolator, Kernel, KernelConfig, MAX_CONDITION};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::SnapshotVector;
use crate::pod::{assemble, compute_pod, Centering, PodBasis, TruncationRule};

/// High-fidelity samples: parameters, solution fields and objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDatabase {
    params: DMatrix<f64>,
    fields: Vec<SnapshotVector>,
    objectives: Vec<f64>,
}

impl SolutionDatabase {
    pub fn new(
        params: DMatrix<f64>,
        fields: Vec<SnapshotVector>,
        objectives: Vec<f64>,
    ) -> Result<Self> {
        let m = params.nrows();
        if m == 0 {
            return Err(Error::EmptyDatabase);
        }
        for len in [fields.len(), objectives.len()] {
            if len != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: len,
                });
            }
        }
        let n = fields[0].len();
        if let Some(bad) = fields.iter().find(|f| f.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let rows: Vec<Vec<f64>> = params
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        if let Some((first, second)) = rbf::find_duplicate(&rows) {
            return Err(Error::DuplicateParams { first, second });
        }
        Ok(Self {
            params,
            fields,
            objectives,
        })
    }

    pub fn params(&self) -> &DMatrix<f64> {
        &self.params
    }

    pub fn fields(&self) -> &[SnapshotVector] {
        &self.fields
    }

    pub fn objectives(&self) -> &[f64] {
        &self.objectives
    }

    pub fn len(&self) -> usize {
        self.params.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn param_dim(&self) -> usize {
        self.params.ncols()
    }

    /// Copy of the database with sample `index` removed.
    pub fn without(&self, index: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != index).collect();
        Self::new(
            self.params.select_rows(&keep),
            keep.iter().map(|&i| self.fields[i].clone()).collect(),
            keep.iter().map(|&i| self.objectives[i]).collect(),
        )
    }
}

/// Training metadata kept alongside a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomMeta {
    pub sample_count: usize,
    pub param_dim: usize,
    pub mode_count: usize,
    pub rule: TruncationRule,
    pub kernel: KernelConfig,
    /// Training bounding box, `[min, max]` per parameter.
    pub bounds: Vec<[f64; 2]>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomModel {
    basis: PodBasis,
    coefficients: Interpolator,
    objective: Interpolator,
    objective_offset: f64,
    meta: RomMeta,
}

/// Serializable part of a model; the basis is stored separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomDoc {
    pub meta: RomMeta,
    pub coefficients: Interpolator,
    pub objective: Interpolator,
    /// Training mean of the objective, added back to the interpolant.
    pub objective_offset: f64,
}

/// Mean-centers the fields, truncates their POD and fits both interpolants.
pub fn build_rom(
    db: &SolutionDatabase,
    rule: TruncationRule,
    kernel: &KernelConfig,
) -> Result<RomModel> {
    rule.validate()?;
    if db.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "a reduced model needs at least 2 samples, got {}",
            db.len()
        )));
    }
    let (snapshots, center) = assemble(&db.fields, &Centering::Mean)?;
    let basis = compute_pod(&snapshots).with_center(center)?.truncate(rule);
    let coefficients = snapshots.matrix().transpose() * basis.modes();
    let objective_offset = db.objectives.iter().sum::<f64>() / db.len() as f64;
    let objectives = DMatrix::from_iterator(
        db.len(),
        1,
        db.objectives.iter().map(|v| v - objective_offset),
    );

    let coefficients = fit_interpolator(&db.params, &coefficients, kernel)?;
    let objective = fit_interpolator(&db.params, &objectives, kernel)?;
    let bounds = db
        .params
        .column_iter()
        .map(|c| [c.min(), c.max()])
        .collect();
    let meta = RomMeta {
        sample_count: db.len(),
        param_dim: db.param_dim(),
        mode_count: basis.rank(),
        rule,
        kernel: *kernel,
        bounds,
        seed: None,
    };
    Ok(RomModel {
        basis,
        coefficients,
        objective,
        objective_offset,
        meta,
    })
}

impl RomModel {
    pub fn from_parts(basis: PodBasis, doc: RomDoc) -> Result<Self> {
        let RomDoc {
            meta,
            coefficients,
            objective,
            objective_offset,
        } = doc;
        if coefficients.output_dim() != basis.rank() {
            return Err(Error::DimensionMismatch {
                expected: basis.rank(),
                found: coefficients.output_dim(),
            });
        }
        if coefficients.input_dim() != meta.param_dim || objective.input_dim() != meta.param_dim {
            return Err(Error::Artifact(
                "interpolator input dimension disagrees with metadata".into(),
            ));
        }
        Ok(Self {
            basis,
            coefficients,
            objective,
            objective_offset,
            meta,
        })
    }

    pub fn basis(&self) -> &PodBasis {
        &self.basis
    }

    pub fn meta(&self) -> &RomMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut RomMeta {
        &mut self.meta
    }

    pub fn coefficient_interpolator(&self) -> &Interpolator {
        &self.coefficients
    }

    pub fn objective_interpolator(&self) -> &Interpolator {
        &self.objective
    }

    pub fn doc(&self) -> RomDoc {
        RomDoc {
            meta: self.meta.clone(),
            coefficients: self.coefficients.clone(),
            objective: self.objective.clone(),
            objective_offset: self.objective_offset,
        }
    }

    /// True when `mu` lies outside the training bounding box.
    pub fn extrapolates(&self, mu: &[f64]) -> bool {
        mu.iter()
            .zip(&self.meta.bounds)
            .any(|(v, [lo, hi])| *v < *lo || *v > *hi)
    }

    fn check(&self, mu: &[f64]) -> Result<()> {
        if !mu.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        Ok(())
    }

    /// Modal coefficients and objective at `mu` without reconstructing the field.
    pub fn predict_reduced(&self, mu: &[f64]) -> Result<(DVector<f64>, f64)> {
        self.check(mu)?;
        if self.extrapolates(mu) {
            log::warn!("extrapolating outside the training bounding box at {mu:?}");
        }
        let alpha = self.coefficients.evaluate(mu)?;
        let objective = self.objective_offset + self.objective.evaluate(mu)?[0];
        Ok((alpha, objective))
    }

    /// Predicted objective only; never logs, for use inside optimization loops.
    pub fn predict_objective(&self, mu: &[f64]) -> Result<f64> {
        self.check(mu)?;
        Ok(self.objective_offset + self.objective.evaluate(mu)?[0])
    }

    /// Predicted field `center + U · interp(mu)` and objective.
    pub fn predict(&self, mu: &[f64]) -> Result<(SnapshotVector, f64)> {
        let (alpha, objective) = self.predict_reduced(mu)?;
        Ok((self.basis.reconstruct(&alpha)?, objective))
    }
}

/// Free-function form of [`RomModel::predict`].
pub fn predict(model: &RomModel, mu: &[f64]) -> Result<(SnapshotVector, f64)> {
    model.predict(mu)
}

/// Leave-one-out relative errors of the predicted field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub errors: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

/// Rebuilds the model without each sample in turn and measures `‖pred − truth‖ / ‖truth‖`.
pub fn loo_error(
    db: &SolutionDatabase,
    rule: TruncationRule,
    kernel: &KernelConfig,
) -> Result<LooReport> {
    if db.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out needs at least 3 samples, got {}",
            db.len()
        )));
    }
    let errors = (0..db.len())
        .into_par_iter()
        .map(|i| {
            let model = build_rom(&db.without(i)?, rule, kernel)?;
            let mu: Vec<f64> = db.params.row(i).iter().copied().collect();
            let (pred, _) = model.predict(&mu)?;
            let truth = &db.fields[i];
            let diff = (&pred - truth).norm();
            let norm = truth.norm();
            Ok(if norm > 0.0 { diff / norm } else { diff })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let max = errors.iter().copied().fold(0.0, f64::max);
    Ok(LooReport { errors, mean, max })
}
