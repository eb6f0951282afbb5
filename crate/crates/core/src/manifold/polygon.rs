use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Relative (to the polygon diameter) distance below which a point counts as on the boundary.
const BOUNDARY_TOL: f64 = 1e-9;

fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

/// Strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasiblePolygon {
    vertices: Vec<Point2>,
}

impl FeasiblePolygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::CollinearPoints);
        }
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if !(cross(sub(b, a), sub(c, b)) > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "polygon is not strictly convex counter-clockwise at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(norm(sub(*a, *b)));
            }
        }
        d
    }

    fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Boundary-inclusive point-in-polygon test.
    pub fn contains(&self, p: Point2) -> bool {
        let tol = BOUNDARY_TOL * self.diameter();
        self.edges().all(|(a, b)| {
            let e = sub(b, a);
            cross(e, sub(p, a)) >= -tol * norm(e)
        })
    }

    /// Zero inside, otherwise the Euclidean distance to the boundary.
    pub fn distance(&self, p: Point2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Axis-aligned bounds `[[xmin, xmax], [ymin, ymax]]`.
    pub fn bounds(&self) -> [[f64; 2]; 2] {
        let mut b = [[f64::INFINITY, f64::NEG_INFINITY]; 2];
        for v in &self.vertices {
            for a in 0..2 {
                b[a][0] = b[a][0].min(v[a]);
                b[a][1] = b[a][1].max(v[a]);
            }
        }
        b
    }
}

pub fn distance_to_polygon(p: Point2, poly: &FeasiblePolygon) -> f64 {
    poly.distance(p)
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2
    } else {
        0.0
    };
    let t = t.clamp(0.0, 1.0);
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

/// Andrew's monotone chain; returns CCW hull without collinear vertices.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                if cross(sub(b, a), sub(p, b)) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Convex hull of `points`, optionally grown outward to at most `max_vertices` corners.
///
/// Reduction repeatedly collapses the edge whose two neighbouring edges,
/// extended until they meet, add the least area. The result always contains
/// every input point.
pub fn fit_feasible_polygon(
    points: &[Point2],
    max_vertices: Option<usize>,
) -> Result<FeasiblePolygon> {
    if points
        .iter()
        .any(|p| !p[0].is_finite() || !p[1].is_finite())
    {
        return Err(Error::InvalidConfig("non-finite polygon input".into()));
    }
    let mut hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::CollinearPoints);
    }
    let extent = {
        let poly = FeasiblePolygon {
            vertices: hull.clone(),
        };
        poly.diameter()
    };
    let area = FeasiblePolygon {
        vertices: hull.clone(),
    }
    .area();
    if !(area > 1e-14 * extent * extent) {
        return Err(Error::CollinearPoints);
    }
    if let Some(max) = max_vertices {
        if max < 3 {
            return Err(Error::InvalidConfig(format!(
                "max_vertices must be >= 3, got {max}"
            )));
        }
        while hull.len() > max {
            match cheapest_collapse(&hull) {
                Some((i, p)) => {
                    let n = hull.len();
                    hull[i] = p;
                    hull.remove((i + 1) % n);
                }
                None => {
                    log::warn!(
                        "polygon cannot be reduced below {} vertices without becoming unbounded",
                        hull.len()
                    );
                    break;
                }
            }
        }
    }
    FeasiblePolygon::new(hull)
}

/// Edge `(v[i], v[i+1])` whose removal adds the least area, with the new corner.
fn cheapest_collapse(v: &[Point2]) -> Option<(usize, Point2)> {
    let n = v.len();
    let mut best: Option<(f64, usize, Point2)> = None;
    for i in 0..n {
        let prev = v[(i + n - 1) % n];
        let a = v[i];
        let b = v[(i + 1) % n];
        let next = v[(i + 2) % n];
        let d1 = sub(a, prev);
        let d2 = sub(next, b);
        let denom = cross(d1, d2);
        if !(denom > 0.0) {
            continue;
        }
        // a + t d1 = b - s d2, intersect the extensions beyond the edge
        let t = cross(sub(b, a), d2) / denom;
        if !(t >= 0.0) || !t.is_finite() {
            continue;
        }
        let p = [a[0] + t * d1[0], a[1] + t * d1[1]];
        let added = 0.5 * cross(sub(p, a), sub(b, a)).abs();
        if best.is_none_or(|(area, _, _)| added < area) {
            best = Some((added, i, p));
        }
    }
    best.map(|(_, i, p)| (i, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_square() -> FeasiblePolygon {
        FeasiblePolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    /// Ray casting, independent of the edge-sign test.
    fn ray_cast_inside(poly: &[Point2], p: Point2) -> bool {
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    #[test]
    fn square_hull() {
        let sq =
            fit_feasible_polygon(&[[1.0, 1.0], [0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], None).unwrap();
        assert_eq!(sq.vertices(), unit_square().vertices());
        let with_inner = fit_feasible_polygon(
            &[
                [1.0, 1.0],
                [0.5, 0.5],
                [0.0, 0.0],
                [0.2, 0.9],
                [0.0, 1.0],
                [1.0, 0.0],
                [0.5, 0.0],
            ],
            None,
        )
        .unwrap();
        assert_eq!(with_inner.vertices(), unit_square().vertices());
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(
            fit_feasible_polygon(&pts, None),
            Err(Error::CollinearPoints)
        ));
        assert!(matches!(
            fit_feasible_polygon(&pts[..2], None),
            Err(Error::CollinearPoints)
        ));
    }

    #[test]
    fn hexagon_reduced_to_quadrilateral() {
        let hex: Vec<Point2> = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        let hex_area = FeasiblePolygon::new(hex.clone()).unwrap().area();
        let quad = fit_feasible_polygon(&hex, Some(4)).unwrap();
        assert_eq!(quad.vertices().len(), 4);
        assert!(quad.area() >= hex_area);
        for p in &hex {
            assert!(quad.contains(*p));
        }
    }

    #[test]
    fn distance_examples() {
        let sq = unit_square();
        assert_eq!(distance_to_polygon([0.3, 0.7], &sq), 0.0);
        assert_eq!(distance_to_polygon([1.0, 0.5], &sq), 0.0);
        assert_abs_diff_eq!(distance_to_polygon([3.0, 0.5], &sq), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(distance_to_polygon([0.5, -2.0], &sq), 2.0, epsilon = 1e-15);
        // beyond a corner: distance to (1, 1)
        assert_abs_diff_eq!(distance_to_polygon([4.0, 5.0], &sq), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        assert!(
            FeasiblePolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err()
        );
    }

    proptest! {
        #[test]
        fn hull_contains_all_points(
            pts in proptest::collection::vec(proptest::array::uniform2(-5.0f64..5.0), 3..60),
            max in proptest::option::of(3usize..7),
        ) {
            if let Ok(poly) = fit_feasible_polygon(&pts, max) {
                if let Some(m) = max {
                    prop_assert!(poly.vertices().len() <= m || cheapest_collapse(poly.vertices()).is_none());
                }
                for p in &pts {
                    prop_assert!(poly.contains(*p));
                }
            }
        }

        #[test]
        fn contains_agrees_with_ray_casting(p in proptest::array::uniform2(-2.0f64..2.0)) {
            let hex: Vec<Point2> = (0..6).map(|k| {
                let a = 1.0 + std::f64::consts::PI / 3.0 * k as f64;
                [1.3 * a.cos(), 0.7 * a.sin()]
            }).collect();
            let poly = FeasiblePolygon::new(hex.clone()).unwrap();
            // skip a thin band around the boundary where the tolerance applies
            let d = poly.edges().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
            prop_assume!(d > 1e-6);
            prop_assert_eq!(poly.contains(p), ray_cast_inside(&hex, p));
            prop_assert_eq!(poly.distance(p) == 0.0, ray_cast_inside(&hex, p));
        }
    }
}
