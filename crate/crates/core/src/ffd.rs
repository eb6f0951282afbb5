//! Free-form deformation with a Bernstein tensor-product lattice.
//!
//! A lattice box is described by an origin and three pairwise orthogonal
//! edge vectors. Points are mapped into the unit cube, displaced by the
//! Bernstein-weighted sum of control-point displacements, and mapped back.
//! Points outside the box are left where they are.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point3, TriMesh};

const ORTHOGONALITY_TOL: f64 = 1e-10;

/// `C(degree, index) t^index (1 - t)^(degree - index)`.
pub fn bernstein(degree: usize, index: usize, t: f64) -> Result<f64> {
    if index > degree {
        return Err(Error::IndexOutOfRange { index, degree });
    }
    let mut basis = vec![0.0; degree + 1];
    bernstein_all(degree, t, &mut basis);
    Ok(basis[index])
}

/// Fills `out[0..=degree]` with all Bernstein polynomials of `degree` at `t`
/// using the de Casteljau triangle, which stays in `[0, 1]` for `t` in `[0, 1]`.
pub fn bernstein_all(degree: usize, t: f64, out: &mut [f64]) {
    let s = 1.0 - t;
    out[0] = 1.0;
    for k in 1..=degree {
        let mut carry = 0.0;
        for b in out.iter_mut().take(k) {
            let prev = *b;
            *b = s * prev + carry;
            carry = t * prev;
        }
        out[k] = carry;
    }
}

/// Box geometry and polynomial degrees of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFrame {
    pub origin: [f64; 3],
    pub axes: [[f64; 3]; 3],
    /// Degrees `(l, m, n)`; the grid has `(l+1)(m+1)(n+1)` control points.
    pub dims: [usize; 3],
}

impl LatticeFrame {
    /// Axis-aligned box from `min` to `max`.
    pub fn aligned(min: Point3, max: Point3, dims: [usize; 3]) -> Self {
        let d = max - min;
        Self {
            origin: [min.x, min.y, min.z],
            axes: [[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]],
            dims,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 1) {
            return Err(Error::InvalidConfig(format!(
                "lattice degrees must be >= 1, got {:?}",
                self.dims
            )));
        }
        if !self
            .origin
            .iter()
            .chain(self.axes.iter().flatten())
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidConfig(
                "lattice frame has non-finite entries".into(),
            ));
        }
        let axes = self.axis_vectors();
        if axes.iter().any(|a| !(a.norm_squared() > 0.0)) {
            return Err(Error::SingularLattice);
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if axes[i].dot(&axes[j]).abs() > ORTHOGONALITY_TOL * axes[i].norm() * axes[j].norm()
                {
                    return Err(Error::InvalidConfig(format!(
                        "lattice axes {i} and {j} are not orthogonal"
                    )));
                }
            }
        }
        Ok(())
    }

    fn axis_vectors(&self) -> [Vector3<f64>; 3] {
        self.axes.map(Vector3::from)
    }

    pub fn control_point_count(&self) -> usize {
        self.dims.iter().map(|d| d + 1).product()
    }

    fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        (i * (self.dims[1] + 1) + j) * (self.dims[2] + 1) + k
    }
}

/// A lattice with per-control-point displacements in unit-cube coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FfdLattice {
    frame: LatticeFrame,
    origin: Point3,
    axes: [Vector3<f64>; 3],
    displacements: Vec<Vector3<f64>>,
}

impl FfdLattice {
    /// Undisplaced lattice.
    pub fn new(frame: LatticeFrame) -> Result<Self> {
        frame.validate()?;
        Ok(Self {
            origin: Point3::from(frame.origin),
            axes: frame.axis_vectors(),
            displacements: vec![Vector3::zeros(); frame.control_point_count()],
            frame,
        })
    }

    pub fn frame(&self) -> &LatticeFrame {
        &self.frame
    }

    pub fn displacement(&self, ijk: [usize; 3]) -> Vector3<f64> {
        self.displacements[self.frame.index(ijk)]
    }

    pub fn set_displacement(&mut self, ijk: [usize; 3], d: Vector3<f64>) -> Result<()> {
        self.check_point(ijk)?;
        let idx = self.frame.index(ijk);
        self.displacements[idx] = d;
        Ok(())
    }

    fn check_point(&self, ijk: [usize; 3]) -> Result<()> {
        match ijk.into_iter().zip(self.frame.dims).find(|(i, d)| i > d) {
            Some((index, degree)) => Err(Error::IndexOutOfRange { index, degree }),
            None => Ok(()),
        }
    }

    /// Affine coordinates `(s, t, u)` of `x` in the lattice frame.
    pub fn to_reference(&self, x: &Point3) -> [f64; 3] {
        let r = x - self.origin;
        std::array::from_fn(|a| r.dot(&self.axes[a]) / self.axes[a].norm_squared())
    }

    /// Applies the deformation map to one point.
    pub fn deform_point(&self, x: &Point3) -> Point3 {
        let stu = self.to_reference(x);
        if stu.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return *x;
        }
        let [l, m, n] = self.frame.dims;
        let mut bs = vec![0.0; l + 1];
        let mut bt = vec![0.0; m + 1];
        let mut bu = vec![0.0; n + 1];
        bernstein_all(l, stu[0], &mut bs);
        bernstein_all(m, stu[1], &mut bt);
        bernstein_all(n, stu[2], &mut bu);

        // Bernstein polynomials reproduce linear functions, so the undisplaced
        // lattice term sums to (s, t, u) exactly; only displacements are summed.
        let mut shift = Vector3::zeros();
        let mut idx = 0;
        for wi in &bs {
            for wj in &bt {
                let wij = wi * wj;
                for wk in &bu {
                    let d = &self.displacements[idx];
                    if d.x != 0.0 || d.y != 0.0 || d.z != 0.0 {
                        shift += d * (wij * wk);
                    }
                    idx += 1;
                }
            }
        }
        if shift == Vector3::zeros() {
            return *x;
        }
        x + self.axes[0] * shift.x + self.axes[1] * shift.y + self.axes[2] * shift.z
    }
}

/// One linear contribution of a design parameter to a control-point displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub param: usize,
    pub point: [usize; 3],
    pub axis: usize,
    pub weight: f64,
}

/// Lattice geometry, parameter-to-displacement map and parameter box.
///
/// JSON layout:
///
/// ```json
/// {
///   "lattice": { "origin": [0, 0, 0], "axes": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "dims": [2, 2, 2] },
///   "param_dim": 1,
///   "entries": [{ "param": 0, "point": [1, 1, 1], "axis": 2, "weight": 1.0 }],
///   "bounds": [[-0.3, 0.3]]
/// }
/// ```
///
/// `bounds` may be omitted, in which case every parameter ranges over `[-0.3, 0.3]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfdConfig {
    pub lattice: LatticeFrame,
    pub param_dim: usize,
    pub entries: Vec<ParamEntry>,
    #[serde(default)]
    pub bounds: Vec<[f64; 2]>,
}

pub const DEFAULT_BOUND: f64 = 0.3;

impl FfdConfig {
    /// Builds and validates a configuration; empty `bounds` means the default box.
    pub fn new(
        lattice: LatticeFrame,
        param_dim: usize,
        entries: Vec<ParamEntry>,
        bounds: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let mut cfg = Self {
            lattice,
            param_dim,
            entries,
            bounds,
        };
        cfg.normalize()?;
        Ok(cfg)
    }

    /// Stand-in bow configuration: a degree-(2,2,2) lattice whose single
    /// interior control point is driven by five parameters,
    /// `x += mu0 + mu3`, `y += mu1 + mu3 + mu4`, `z += mu2 + mu4`.
    ///
    /// All boundary control planes stay fixed, so the deformation vanishes on
    /// the lattice faces. The five parameters span only three displacement
    /// directions.
    pub fn default_bulb(lattice_min: Point3, lattice_max: Point3) -> Self {
        let c = [1, 1, 1];
        let e = |param, axis| ParamEntry {
            param,
            point: c,
            axis,
            weight: 1.0,
        };
        Self {
            lattice: LatticeFrame::aligned(lattice_min, lattice_max, [2, 2, 2]),
            param_dim: 5,
            entries: vec![
                e(0, 0),
                e(1, 1),
                e(2, 2),
                e(3, 0),
                e(3, 1),
                e(4, 1),
                e(4, 2),
            ],
            bounds: vec![[-DEFAULT_BOUND, DEFAULT_BOUND]; 5],
        }
    }

    /// Fills default bounds and checks every invariant.
    pub fn normalize(&mut self) -> Result<()> {
        self.lattice.validate()?;
        if self.param_dim < 1 {
            return Err(Error::InvalidConfig("param_dim must be >= 1".into()));
        }
        if self.bounds.is_empty() {
            self.bounds = vec![[-DEFAULT_BOUND, DEFAULT_BOUND]; self.param_dim];
        }
        if self.bounds.len() != self.param_dim {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim,
                found: self.bounds.len(),
            });
        }
        if let Some(b) = self.bounds.iter().find(|b| !(b[0] < b[1])) {
            return Err(Error::InvalidConfig(format!(
                "parameter bounds {b:?} must satisfy lower < upper"
            )));
        }
        for e in &self.entries {
            if e.param >= self.param_dim {
                return Err(Error::InvalidConfig(format!(
                    "entry parameter {} >= param_dim {}",
                    e.param, self.param_dim
                )));
            }
            if e.axis > 2 {
                return Err(Error::InvalidConfig(format!(
                    "entry axis {} must be 0, 1 or 2",
                    e.axis
                )));
            }
            if (0..3).any(|a| e.point[a] > self.lattice.dims[a]) {
                return Err(Error::InvalidConfig(format!(
                    "control point {:?} outside lattice degrees {:?}",
                    e.point, self.lattice.dims
                )));
            }
            if !e.weight.is_finite() {
                return Err(Error::InvalidConfig("entry weight must be finite".into()));
            }
        }
        Ok(())
    }

    /// Lattice displaced according to `mu`.
    pub fn apply_params(&self, mu: &[f64]) -> Result<FfdLattice> {
        if mu.len() != self.param_dim {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim,
                found: mu.len(),
            });
        }
        if let Some((i, v)) = mu.iter().enumerate().find(|(i, v)| {
            self.bounds
                .get(*i)
                .is_some_and(|b| **v < b[0] || **v > b[1])
        }) {
            log::warn!(
                "parameter {i} = {v} lies outside its bounds {:?}",
                self.bounds[i]
            );
        }
        let mut lattice = FfdLattice::new(self.lattice.clone())?;
        for e in &self.entries {
            let idx = lattice.frame.index(e.point);
            lattice.displacements[idx][e.axis] += e.weight * mu[e.param];
        }
        Ok(lattice)
    }
}

/// Moves every vertex through the lattice; connectivity and vertex order are untouched.
pub fn morph_mesh(mesh: &TriMesh, lattice: &FfdLattice) -> TriMesh {
    let vertices = mesh
        .vertices()
        .par_iter()
        .map(|v| lattice.deform_point(v))
        .collect();
    mesh.with_vertices(vertices)
}

/// `morph_mesh(mesh, config.apply_params(mu))`.
pub fn morph(mesh: &TriMesh, config: &FfdConfig, mu: &[f64]) -> Result<TriMesh> {
    Ok(morph_mesh(mesh, &config.apply_params(mu)?))
}
