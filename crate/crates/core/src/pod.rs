//! Snapshot matrices and proper orthogonal decomposition.
//!
//! The decomposition goes through the smaller of the two Gram matrices
//! (`MᵀM` when snapshots are long, `MMᵀ` otherwise), so the cost is
//! `O(N · M²)` for `N`-long snapshots and `M ≤ N` of them. Singular values are
//! measured as `‖M φᵢ‖` rather than `√λᵢ`, which keeps exactly rank-deficient
//! directions at round-off level instead of `√ε`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::SnapshotVector;

/// Relative cutoff below which singular values are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// How snapshots are shifted before decomposition.
#[derive(Debug, Clone, PartialEq)]
pub enum Centering {
    None,
    Reference(DVector<f64>),
    Mean,
}

/// Centered snapshots stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<f64>,
}

impl SnapshotMatrix {
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyDatabase);
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(
                "snapshot matrix has non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column_length(&self) -> usize {
        self.data.nrows()
    }

    pub fn count(&self) -> usize {
        self.data.ncols()
    }
}

/// Stacks snapshots as columns after subtracting the chosen center.
pub fn assemble(
    snapshots: &[SnapshotVector],
    centering: &Centering,
) -> Result<(SnapshotMatrix, DVector<f64>)> {
    let first = snapshots.first().ok_or(Error::EmptyDatabase)?;
    let n = first.len();
    if let Some(bad) = snapshots.iter().find(|s| s.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let center = match centering {
        Centering::None => DVector::zeros(n),
        Centering::Reference(r) => {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            r.clone()
        }
        Centering::Mean => {
            let mut mean = DVector::zeros(n);
            for s in snapshots {
                mean += s;
            }
            mean / snapshots.len() as f64
        }
    };
    let data = DMatrix::from_fn(n, snapshots.len(), |i, j| snapshots[j][i] - center[i]);
    Ok((SnapshotMatrix::from_matrix(data)?, center))
}

/// How many leading modes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationRule {
    FixedCount(usize),
    /// Smallest `N` whose cumulative `σ²` fraction reaches the threshold; `1.0` keeps every mode.
    Energy(f64),
}

impl TruncationRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::FixedCount(n) if n >= 1 => Ok(()),
            Self::Energy(e) if e > 0.0 && e <= 1.0 => Ok(()),
            other => Err(Error::InvalidConfig(format!(
                "invalid truncation rule {other:?}"
            ))),
        }
    }
}

impl Default for TruncationRule {
    fn default() -> Self {
        Self::Energy(0.9999)
    }
}

/// Orthonormal modes, their singular values and the centering vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    modes: DMatrix<f64>,
    singular_values: DVector<f64>,
    center: DVector<f64>,
}

/// One line of a singular-value decay table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub index: usize,
    pub sigma: f64,
    pub ratio: f64,
    pub cumulative_energy: f64,
}

impl PodBasis {
    /// Assembles a basis from parts, checking shapes and ordering.
    pub fn from_parts(
        modes: DMatrix<f64>,
        singular_values: DVector<f64>,
        center: DVector<f64>,
    ) -> Result<Self> {
        if modes.ncols() != singular_values.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.ncols(),
                found: singular_values.len(),
            });
        }
        if modes.nrows() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.nrows(),
                found: center.len(),
            });
        }
        if singular_values.iter().any(|s| !(*s >= 0.0))
            || singular_values.as_slice().windows(2).any(|w| w[1] > w[0])
        {
            return Err(Error::InvalidConfig(
                "singular values must be non-negative and non-increasing".into(),
            ));
        }
        Ok(Self {
            modes,
            singular_values,
            center,
        })
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// Number of retained modes `r`.
    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn snapshot_len(&self) -> usize {
        self.modes.nrows()
    }

    pub fn with_center(mut self, center: DVector<f64>) -> Result<Self> {
        if center.len() != self.snapshot_len() {
            return Err(Error::DimensionMismatch {
                expected: self.snapshot_len(),
                found: center.len(),
            });
        }
        self.center = center;
        Ok(self)
    }

    /// Number of modes the rule selects, clamped to `rank()`.
    pub fn truncation_count(&self, rule: TruncationRule) -> usize {
        let r = self.rank();
        match rule {
            TruncationRule::FixedCount(n) => {
                if n > r {
                    log::warn!("requested {n} modes but the basis only has {r}");
                }
                n.min(r)
            }
            TruncationRule::Energy(eps) if eps >= 1.0 => r,
            TruncationRule::Energy(eps) => {
                let energy = cumulative_energy(self.singular_values.as_slice());
                energy.iter().position(|&e| e >= eps).map_or(r, |i| i + 1)
            }
        }
    }

    /// Keeps the leading modes selected by `rule`.
    pub fn truncate(&self, rule: TruncationRule) -> PodBasis {
        let n = self.truncation_count(rule);
        PodBasis {
            modes: self.modes.columns(0, n).into_owned(),
            singular_values: self.singular_values.rows(0, n).into_owned(),
            center: self.center.clone(),
        }
    }

    /// Modal coefficients `Ψᵀ (v - center)`.
    pub fn project(&self, v: &SnapshotVector) -> Result<DVector<f64>> {
        self.check_len(v.len())?;
        Ok(self.modes.transpose() * (v - &self.center))
    }

    /// Coefficients of many snapshots at once; row `i` belongs to column `i` of `snapshots`.
    pub fn project_columns(&self, snapshots: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_len(snapshots.nrows())?;
        let mut centered = snapshots.clone();
        for mut c in centered.column_iter_mut() {
            c -= &self.center;
        }
        Ok(centered.transpose() * &self.modes)
    }

    /// `center + Ψ alpha`.
    pub fn reconstruct(&self, alpha: &DVector<f64>) -> Result<SnapshotVector> {
        if alpha.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                found: alpha.len(),
            });
        }
        Ok(&self.center + &self.modes * alpha)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.snapshot_len() {
            return Err(Error::DimensionMismatch {
                expected: self.snapshot_len(),
                found: len,
            });
        }
        Ok(())
    }

    /// Singular values with their normalized ratio and cumulative energy.
    pub fn decay_report(&self) -> Result<Vec<DecayRow>> {
        decay_rows(self.singular_values.as_slice())
    }
}

/// Decay table of a descending singular-value sequence.
pub fn decay_rows(s: &[f64]) -> Result<Vec<DecayRow>> {
    if s.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let energy = cumulative_energy(s);
    Ok(s.iter()
        .zip(energy)
        .enumerate()
        .map(|(i, (&sigma, cumulative_energy))| DecayRow {
            index: i + 1,
            sigma,
            ratio: sigma / s[0],
            cumulative_energy,
        })
        .collect())
}

fn cumulative_energy(s: &[f64]) -> Vec<f64> {
    let total: f64 = s.iter().map(|x| x * x).sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = s
        .iter()
        .map(|x| {
            acc += x * x;
            acc / total
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// CSV with header `index,sigma,ratio,cumulative_energy`.
pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut s = String::from("index,sigma,ratio,cumulative_energy\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.index, r.sigma, r.ratio, r.cumulative_energy
        );
    }
    s
}

/// POD of a snapshot matrix (the center of the returned basis is zero).
///
/// Singular values below `RANK_TOL * σ₁` are dropped; a zero matrix yields an
/// empty basis. Each mode is sign-normalized so that its largest-magnitude
/// entry is non-negative.
pub fn compute_pod(m: &SnapshotMatrix) -> PodBasis {
    let a = m.matrix();
    let (n, count) = a.shape();
    let (mut modes, sigma) = if count <= n {
        pod_via_right_gram(a)
    } else {
        pod_via_left_gram(a)
    };
    for mut c in modes.column_iter_mut() {
        let imax = c.iamax();
        if c[imax] < 0.0 {
            c.neg_mut();
        }
    }
    PodBasis {
        modes,
        singular_values: DVector::from_vec(sigma),
        center: DVector::zeros(n),
    }
}

/// Column blocks used when forming `AᵀA` and `A Φ`, bounding the temporary size.
const BLOCK: usize = 128;

/// Eigenvalues of `AᵀA` above this fraction of the largest are far from the round-off floor.
const CLEAR_EIGEN: f64 = 1e-12;

/// Projections `‖A φ‖` below this fraction of `σ₁` may carry round-off mixing.
const FAINT: f64 = 1e-6;

/// Sorted `(σ, column)` pairs, descending, with the rank cutoff applied.
fn retained(sigma: impl Iterator<Item = f64>) -> Vec<(f64, usize)> {
    let mut order: Vec<(f64, usize)> = sigma.enumerate().map(|(i, s)| (s, i)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let top = order.first().map_or(0.0, |x| x.0);
    if !(top > 0.0) {
        return Vec::new();
    }
    order.retain(|x| x.0 >= RANK_TOL * top);
    order
}

/// `AᵀA` from upper block-triangle products, mirrored.
fn gram_of_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let count = a.ncols();
    let mut gram = DMatrix::zeros(count, count);
    for start in (0..count).step_by(BLOCK) {
        let w = BLOCK.min(count - start);
        let strip = a.columns(start, w).transpose() * a.columns(start, count - start);
        gram.view_mut((start, start), (w, count - start))
            .copy_from(&strip);
    }
    gram.fill_lower_triangle_with_upper_triangle();
    gram
}

/// Method of snapshots: eigenvectors of `AᵀA` give right singular vectors.
///
/// Directions whose eigenvalue sits clearly above the round-off floor are
/// projected first. When the energy left along the other directions is
/// already below the rank cutoff, none of them can survive and their
/// projections are skipped.
fn pod_via_right_gram(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let eig = gram_of_columns(a).symmetric_eigen();
    let (lambda, phi) = (eig.eigenvalues, eig.eigenvectors);
    let count = a.ncols();
    let top = lambda.max();
    if !(top > 0.0) {
        return (DMatrix::zeros(a.nrows(), 0), Vec::new());
    }
    let (clear, rest): (Vec<usize>, Vec<usize>) =
        (0..count).partition(|&i| lambda[i] >= CLEAR_EIGEN * top);
    let mut y = project_blocks(a, &phi, &clear);
    let mut norms: Vec<f64> = y.column_iter().map(|c| c.norm()).collect();
    if !rest.is_empty() {
        // ‖A - A Φc Φcᵀ‖_F² is exactly the energy along the skipped directions
        let sigma_max = norms.iter().copied().fold(0.0, f64::max);
        let residual = (a - &y * phi.select_columns(&clear).transpose()).norm();
        if residual >= RANK_TOL * sigma_max {
            let extra = project_blocks(a, &phi, &rest);
            norms.extend(extra.column_iter().map(|c| c.norm()));
            let done = y.ncols();
            y = y.resize_horizontally(done + extra.ncols(), 0.0);
            y.columns_mut(done, extra.ncols()).copy_from(&extra);
        }
    }
    let keep = retained(norms.into_iter());
    let Some(&(sigma1, _)) = keep.first() else {
        return (DMatrix::zeros(a.nrows(), 0), Vec::new());
    };
    // Eigenvectors on the round-off floor mix with faint genuine ones, so a
    // faint column only counts through what it adds beyond accepted modes.
    let mut accepted: Vec<(f64, DVector<f64>)> = Vec::with_capacity(keep.len());
    for (s, j) in keep {
        let mut r = y.column(j).into_owned();
        if s >= FAINT * sigma1 {
            accepted.push((s, r / s));
            continue;
        }
        for _ in 0..2 {
            for (_, q) in &accepted {
                let proj = q.dot(&r);
                r.axpy(-proj, q, 1.0);
            }
        }
        let fresh = r.norm();
        if fresh >= RANK_TOL * sigma1 {
            accepted.push((fresh, r / fresh));
        }
    }
    accepted.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut modes = DMatrix::zeros(a.nrows(), accepted.len());
    for (k, (_, q)) in accepted.iter().enumerate() {
        modes.set_column(k, q);
    }
    // Tiny modes inherit O(ε σ₁ / σᵢ) non-orthogonality; two Gram-Schmidt passes repair it.
    reorthonormalize(&mut modes);
    reorthonormalize(&mut modes);
    (modes, accepted.into_iter().map(|x| x.0).collect())
}

/// `A Φ[:, cols]`, formed in column blocks.
fn project_blocks(a: &DMatrix<f64>, phi: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(a.nrows(), cols.len());
    for (b, chunk) in cols.chunks(BLOCK).enumerate() {
        let block = a * phi.select_columns(chunk);
        y.columns_mut(b * BLOCK, chunk.len()).copy_from(&block);
    }
    y
}

/// Few long snapshots transposed: eigenvectors of `AAᵀ` are the modes directly.
fn pod_via_left_gram(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let gram = a * a.transpose();
    let psi = gram.symmetric_eigen().eigenvectors;
    let at = a.transpose();
    let norms = psi.column_iter().map(|c| (&at * c).norm());
    let keep = retained(norms);
    let mut modes = DMatrix::zeros(a.nrows(), keep.len());
    for (k, &(_, i)) in keep.iter().enumerate() {
        modes.set_column(k, &psi.column(i));
    }
    (modes, keep.into_iter().map(|x| x.0).collect())
}

fn reorthonormalize(q: &mut DMatrix<f64>) {
    for j in 0..q.ncols() {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let qi = q.column(i).into_owned();
            q.column_mut(j).axpy(-proj, &qi, 1.0);
        }
        let norm = q.column(j).norm();
        if norm > 0.0 {
            q.column_mut(j).unscale_mut(norm);
        }
    }
}
