//! Indexed triangle meshes, STL I/O and the snapshot-vector view of a mesh.
//!
//! Every geometry in the pipeline is produced by moving the vertices of one
//! welded reference mesh, so all snapshots share the same vertex order and
//! connectivity. Meshes are never re-welded after morphing.

mod primitives;
mod stl;
mod weld;

pub use primitives::uv_sphere;
pub use stl::{read_stl, write_stl, StlFormat};
pub use weld::{default_weld_tolerance, weld};

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// Flat coordinate vector `(x1, y1, z1, x2, ...)` of a mesh.
pub type SnapshotVector = DVector<f64>;

/// One raw STL facet.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: Vector3<f64>,
    pub vertices: [Point3; 3],
    /// Attribute byte count field of binary STL records; zero for ASCII input.
    pub attribute: u16,
}

/// Unwelded STL content in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetSoup {
    pub facets: Vec<Facet>,
}

/// Welded triangle mesh with canonical vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    facets: Vec<[usize; 3]>,
    weld_tolerance: f64,
}

impl TriMesh {
    pub fn new(
        vertices: Vec<Point3>,
        facets: Vec<[usize; 3]>,
        weld_tolerance: f64,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if !(weld_tolerance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weld tolerance must be non-negative, got {weld_tolerance}"
            )));
        }
        if let Some(p) = vertices
            .iter()
            .find(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidConfig(format!("non-finite vertex {p:?}")));
        }
        let n = vertices.len();
        if let Some(f) = facets.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidConfig(format!(
                "facet {f:?} references a vertex beyond {n}"
            )));
        }
        Ok(Self {
            vertices,
            facets,
            weld_tolerance,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn facets(&self) -> &[[usize; 3]] {
        &self.facets
    }

    pub fn weld_tolerance(&self) -> f64 {
        self.weld_tolerance
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Same connectivity, new vertex positions. Caller guarantees length and finiteness.
    pub(crate) fn with_vertices(&self, vertices: Vec<Point3>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        Self {
            vertices,
            facets: self.facets.clone(),
            weld_tolerance: self.weld_tolerance,
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        bounding_box(self.vertices.iter())
    }

    /// Area of each facet.
    pub fn facet_areas(&self) -> Vec<f64> {
        self.facets
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .collect()
    }
}

pub(crate) fn bounding_box<'a>(points: impl Iterator<Item = &'a Point3>) -> (Point3, Point3) {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Parses STL bytes and welds them at the default tolerance.
pub fn load_stl(bytes: &[u8]) -> Result<TriMesh> {
    let soup = read_stl(bytes)?;
    weld(&soup, default_weld_tolerance(&soup))
}

/// Interleaved coordinates of every vertex, length `3 * vertex_count`.
pub fn flatten(mesh: &TriMesh) -> SnapshotVector {
    DVector::from_iterator(
        3 * mesh.vertex_count(),
        mesh.vertices.iter().flat_map(|p| [p.x, p.y, p.z]),
    )
}

/// Inverse of [`flatten`]: rebuilds a mesh with `reference`'s connectivity.
pub fn unflatten(v: &SnapshotVector, reference: &TriMesh) -> Result<TriMesh> {
    let expected = 3 * reference.vertex_count();
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidConfig(
            "snapshot has non-finite entries".into(),
        ));
    }
    let vertices = v
        .as_slice()
        .chunks_exact(3)
        .map(|c| Point3::new(c[0], c[1], c[2]))
        .collect();
    Ok(reference.with_vertices(vertices))
}
