use std::f64::consts::PI;

use super::{Point3, TriMesh};
use crate::error::{Error, Result};

/// Closed ellipsoid surface with `n_lat` latitude bands and `n_lon` meridians.
///
/// Vertex count is `2 + (n_lat - 1) * n_lon`. Useful as a watertight stand-in
/// hull for tests and benchmarks.
pub fn uv_sphere(center: Point3, radii: [f64; 3], n_lat: usize, n_lon: usize) -> Result<TriMesh> {
    if n_lat < 2 || n_lon < 3 {
        return Err(Error::InvalidConfig(format!(
            "uv_sphere needs n_lat >= 2 and n_lon >= 3, got {n_lat} and {n_lon}"
        )));
    }
    let at = |theta: f64, phi: f64| {
        Point3::new(
            center.x + radii[0] * theta.sin() * phi.cos(),
            center.y + radii[1] * theta.sin() * phi.sin(),
            center.z + radii[2] * theta.cos(),
        )
    };
    let mut vertices = vec![Point3::new(center.x, center.y, center.z + radii[2])];
    for i in 1..n_lat {
        let theta = PI * i as f64 / n_lat as f64;
        for j in 0..n_lon {
            vertices.push(at(theta, 2.0 * PI * j as f64 / n_lon as f64));
        }
    }
    vertices.push(Point3::new(center.x, center.y, center.z - radii[2]));
    let south = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * n_lon + j % n_lon;

    let mut facets = Vec::with_capacity(2 * n_lat * n_lon);
    for j in 0..n_lon {
        facets.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..n_lat - 1 {
        for j in 0..n_lon {
            let (a, b, c, d) = (
                ring(i, j),
                ring(i, j + 1),
                ring(i + 1, j),
                ring(i + 1, j + 1),
            );
            facets.push([a, c, d]);
            facets.push([a, d, b]);
        }
    }
    for j in 0..n_lon {
        facets.push([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)]);
    }
    TriMesh::new(vertices, facets, 0.0)
}
