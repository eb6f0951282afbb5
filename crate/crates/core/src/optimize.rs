//! Multistart Nelder–Mead over a feasible region with a quadratic penalty.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{FeasiblePolygon, ReducedSpace};

pub use crate::manifold::distance_to_polygon;

const DIAMETER_TOL: f64 = 1e-6;
const SPREAD_TOL: f64 = 1e-10;
const PENALTY_BASE: f64 = 1e3;
const PENALTY_GROWTH: f64 = 1e2;
const MAX_ROUNDS: usize = 4;

/// Feasible set searched by [`minimize`].
pub trait Region: Sync {
    fn dim(&self) -> usize;
    /// Finite box enclosing the region, `[min, max]` per coordinate.
    fn bounds(&self) -> Vec<[f64; 2]>;
    fn contains(&self, mu: &[f64]) -> bool;
    /// Zero inside, otherwise a distance to the region.
    fn violation(&self, mu: &[f64]) -> f64;
    fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>>;
}

impl Region for ReducedSpace {
    fn dim(&self) -> usize {
        ReducedSpace::dim(self)
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        ReducedSpace::bounds(self).to_vec()
    }

    fn contains(&self, mu: &[f64]) -> bool {
        ReducedSpace::contains(self, mu)
    }

    fn violation(&self, mu: &[f64]) -> f64 {
        ReducedSpace::violation(self, mu)
    }

    fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        ReducedSpace::sample(self, n, seed)
    }
}

/// A bare two-dimensional polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonRegion(pub FeasiblePolygon);

impl Region for PolygonRegion {
    fn dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        self.0.bounds().to_vec()
    }

    fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == 2 && self.0.contains([mu[0], mu[1]])
    }

    fn violation(&self, mu: &[f64]) -> f64 {
        distance_to_polygon([mu[0], mu[1]], &self.0)
    }

    fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        rejection_sample(self, n, seed)
    }
}

/// Axis-aligned box, the region of the unreduced parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion(pub Vec<[f64; 2]>);

impl Region for BoxRegion {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        self.0.clone()
    }

    fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.0.len()
            && mu
                .iter()
                .zip(&self.0)
                .all(|(v, b)| *v >= b[0] && *v <= b[1])
    }

    fn violation(&self, mu: &[f64]) -> f64 {
        mu.iter()
            .zip(&self.0)
            .map(|(v, b)| (b[0] - v).max(v - b[1]).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        Ok(crate::manifold::sample_ffd_params(n, &self.0, seed))
    }
}

/// Uniform draws from the bounding box kept when they fall inside the region.
pub fn rejection_sample(region: &dyn Region, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let bounds = region.bounds();
    let mut rng = crate::manifold::rng(seed);
    let mut out = DMatrix::zeros(n, bounds.len());
    let mut mu = vec![0.0; bounds.len()];
    let (mut accepted, mut draws) = (0usize, 0usize);
    while accepted < n {
        for (v, b) in mu.iter_mut().zip(&bounds) {
            let u: f64 = rng.random();
            *v = b[0] + (b[1] - b[0]) * u;
        }
        draws += 1;
        if region.contains(&mu) {
            out.row_mut(accepted).copy_from_slice(&mu);
            accepted += 1;
        }
        if draws == 10 * n && (accepted as f64) < 0.01 * draws as f64 {
            return Err(Error::InfeasibleRegion { accepted, draws });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    pub starts: usize,
    /// Objective evaluations allowed per start.
    pub budget: usize,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            budget: 200,
            seed: 0,
        }
    }
}

pub type Objective<'a> = dyn Fn(&[f64]) -> Result<f64> + Sync + 'a;

pub struct OptProblem<'a> {
    pub objective: &'a Objective<'a>,
    pub region: &'a dyn Region,
    pub config: OptConfig,
}

/// Best feasible point known after a given number of evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluation: usize,
    pub mu: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_mu: Vec<f64>,
    pub best_value: f64,
    pub best_start: usize,
    pub evaluations: usize,
    pub traces: Vec<Vec<TracePoint>>,
}

struct Merit<'p, 'a> {
    problem: &'p OptProblem<'a>,
    weight: f64,
    evaluations: usize,
    limit: usize,
    best: (Vec<f64>, f64),
    trace: Vec<TracePoint>,
}

impl Merit<'_, '_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.limit
    }

    /// Raw objective, recording the point if it improves the feasible best.
    fn raw(&mut self, x: &[f64]) -> Result<f64> {
        let v = (self.problem.objective)(x)?;
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.evaluations += 1;
        if v < self.best.1 && self.problem.region.contains(x) {
            self.best = (x.to_vec(), v);
        }
        self.trace.push(TracePoint {
            evaluation: self.evaluations,
            mu: self.best.0.clone(),
            value: self.best.1,
        });
        Ok(v)
    }

    fn penalized(&mut self, x: &[f64]) -> Result<f64> {
        if self.exhausted() {
            return Ok(f64::INFINITY);
        }
        let v = self.raw(x)?;
        let g = self.problem.region.violation(x);
        Ok(v + self.weight * g * g)
    }
}

fn nelder_mead(m: &mut Merit, x0: &[f64], step: &[f64]) -> Result<Vec<f64>> {
    let d = x0.len();
    let mut simplex = Vec::with_capacity(d + 1);
    let f0 = m.penalized(x0)?;
    simplex.push((x0.to_vec(), f0));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let f = m.penalized(&x)?;
        simplex.push((x, f));
    }
    let along = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (&simplex[0], &simplex[d]);
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&best.0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if m.exhausted() || diameter < DIAMETER_TOL || worst.1 - best.1 < SPREAD_TOL {
            return Ok(simplex.swap_remove(0).0);
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let xr = along(&centroid, &worst.0, -1.0);
        let fr = m.penalized(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(&centroid, &worst.0, -2.0);
            let fe = m.penalized(&xe)?;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let xc = if fr < worst.1 {
            along(&centroid, &xr, 0.5)
        } else {
            along(&centroid, &worst.0, 0.5)
        };
        let fc = m.penalized(&xc)?;
        if fc < fr.min(worst.1) {
            simplex[d] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = along(&anchor, &vertex.0, 0.5);
            let f = m.penalized(&x)?;
            *vertex = (x, f);
        }
    }
}

fn run_start(
    problem: &OptProblem,
    x0: &[f64],
    f0: f64,
    weight: f64,
    widths: &[f64],
) -> Result<(Vec<f64>, f64, usize, Vec<TracePoint>)> {
    let budget = problem.config.budget;
    let mut m = Merit {
        problem,
        weight,
        evaluations: 1,
        // one evaluation is held back for the boundary repair
        limit: budget - 1,
        best: (x0.to_vec(), f0),
        trace: vec![TracePoint {
            evaluation: 1,
            mu: x0.to_vec(),
            value: f0,
        }],
    };
    let mut point = x0.to_vec();
    let mut step: Vec<f64> = widths.iter().map(|w| 0.1 * w).collect();
    for (j, s) in step.iter_mut().enumerate() {
        if !problem.region.contains(&{
            let mut x = point.clone();
            x[j] += *s;
            x
        }) {
            *s = -*s;
        }
    }
    for _ in 0..MAX_ROUNDS {
        point = nelder_mead(&mut m, &point, &step)?;
        if problem.region.contains(&point) || m.exhausted() {
            break;
        }
        m.weight *= PENALTY_GROWTH;
        step = widths.iter().map(|w| 1e-3 * w).collect();
    }
    if !problem.region.contains(&point) {
        // bisect between the best feasible point and the infeasible end point
        let anchor = m.best.0.clone();
        let (mut lo, mut hi) = (0.0, 1.0);
        let at = |t: f64| -> Vec<f64> {
            anchor
                .iter()
                .zip(&point)
                .map(|(a, b)| a + t * (b - a))
                .collect()
        };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if problem.region.contains(&at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo > 0.0 {
            m.limit += 1;
            m.raw(&at(lo))?;
        }
    }
    let (mu, value) = m.best;
    Ok((mu, value, m.evaluations, m.trace))
}

/// Minimizes the objective over the region from `starts` seeded feasible points.
pub fn minimize(problem: &OptProblem) -> Result<OptResult> {
    let OptConfig {
        starts,
        budget,
        seed,
    } = problem.config;
    let d = problem.region.dim();
    if starts == 0 {
        return Err(Error::InvalidConfig(
            "at least one start is required".into(),
        ));
    }
    if budget < d + 2 {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} is below d + 2 = {}",
            d + 2
        )));
    }
    let bounds = problem.region.bounds();
    let widths: Vec<f64> = bounds.iter().map(|b| (b[1] - b[0]).abs()).collect();
    let span = widths.iter().map(|w| w * w).sum::<f64>().sqrt();
    let span = if span > 0.0 { span } else { 1.0 };
    let widths: Vec<f64> = widths
        .iter()
        .map(|&w| if w > 0.0 { w } else { span })
        .collect();

    let points = problem.region.sample(starts, seed)?;
    let points: Vec<Vec<f64>> = points
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let values = points
        .par_iter()
        .map(|p| (problem.objective)(p).map(|v| if v.is_nan() { f64::INFINITY } else { v }))
        .collect::<Result<Vec<f64>>>()?;
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi, mag) = finite.fold(
        (f64::INFINITY, f64::NEG_INFINITY, 0.0f64),
        |(lo, hi, mag), v| (lo.min(v), hi.max(v), mag.max(v.abs())),
    );
    let scale = if hi >= lo { mag.max(hi - lo) } else { 0.0 };
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let weight = PENALTY_BASE * scale / (span * span);
    log::debug!("optimizer penalty weight {weight:e} from objective scale {scale:e}");

    let runs = points
        .par_iter()
        .zip(&values)
        .map(|(p, &f0)| run_start(problem, p, f0, weight, &widths))
        .collect::<Result<Vec<_>>>()?;

    let mut best_start = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 < runs[best_start].1 {
            best_start = i;
        }
    }
    let evaluations = runs.iter().map(|r| r.2).sum();
    let best_mu = runs[best_start].0.clone();
    let best_value = runs[best_start].1;
    Ok(OptResult {
        best_mu,
        best_value,
        best_start,
        evaluations,
        traces: runs.into_iter().map(|r| r.3).collect(),
    })
}

/// `start,iter,mu_0..mu_{d-1},value` rows of every trace.
pub fn trace_csv(result: &OptResult) -> String {
    let d = result.best_mu.len();
    let mut out = String::from("start,iter");
    for j in 0..d {
        let _ = write!(out, ",mu_{j}");
    }
    out.push_str(",value\n");
    for (s, trace) in result.traces.iter().enumerate() {
        for t in trace {
            let _ = write!(out, "{s},{}", t.evaluation);
            for v in &t.mu {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", t.value);
        }
    }
    out
}
