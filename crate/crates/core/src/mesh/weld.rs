use std::collections::HashMap;

use super::{bounding_box, FacetSoup, Point3, TriMesh};
use crate::error::{Error, Result};

/// `1e-8` times the bounding-box diagonal of the soup.
pub fn default_weld_tolerance(soup: &FacetSoup) -> f64 {
    let (lo, hi) = bounding_box(soup.facets.iter().flat_map(|f| f.vertices.iter()));
    1e-8 * (hi - lo).norm()
}

type Cell = [i64; 3];

/// Merges facet corners closer than `tol` (Chebyshev distance) into shared vertices.
///
/// Vertices are numbered in order of first occurrence. A corner joins the
/// lowest-numbered existing vertex within tolerance.
pub fn weld(soup: &FacetSoup, tol: f64) -> Result<TriMesh> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "weld tolerance must be finite and >= 0, got {tol}"
        )));
    }
    if soup.facets.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut vertices: Vec<Point3> = Vec::new();
    let mut facets = Vec::with_capacity(soup.facets.len());
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    let cell_of = |p: &Point3| -> Cell {
        if tol > 0.0 {
            std::array::from_fn(|a| (p[a] / tol).floor() as i64)
        } else {
            // +0.0 and -0.0 are the same coordinate.
            std::array::from_fn(|a| (p[a] + 0.0).to_bits() as i64)
        }
    };

    for facet in &soup.facets {
        let mut tri = [0usize; 3];
        for (slot, p) in tri.iter_mut().zip(&facet.vertices) {
            let cell = cell_of(p);
            let mut found: Option<usize> = None;
            if tol > 0.0 {
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dz in -1..=1 {
                            let key = [cell[0] + dx, cell[1] + dy, cell[2] + dz];
                            let Some(bucket) = grid.get(&key) else {
                                continue;
                            };
                            for &i in bucket {
                                if (vertices[i] - p).amax() <= tol && found.is_none_or(|f| i < f) {
                                    found = Some(i);
                                }
                            }
                        }
                    }
                }
            } else if let Some(bucket) = grid.get(&cell) {
                found = bucket.first().copied();
            }
            *slot = match found {
                Some(i) => i,
                None => {
                    vertices.push(*p);
                    grid.entry(cell).or_default().push(vertices.len() - 1);
                    vertices.len() - 1
                }
            };
        }
        facets.push(tri);
    }
    TriMesh::new(vertices, facets, tol)
}
