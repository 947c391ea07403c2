//! Synthetic low-doubling datasets with planted near-neighbor queries.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{l1_distance, PointSet};
use crate::rng::{below, half_open_unit, open_unit, RandomSeed, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// Uniform samples from a box in a random `intrinsic_dim`-flat.
    Subspace,
    /// Three random `intrinsic_dim`-dimensional patches (segments when 1).
    SegmentUnion,
    /// Eight tight clusters spread over a random `intrinsic_dim`-flat.
    Clustered,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Geometry::Subspace => "subspace",
            Geometry::SegmentUnion => "segment-union",
            Geometry::Clustered => "clustered",
        })
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subspace" => Ok(Geometry::Subspace),
            "segment-union" => Ok(Geometry::SegmentUnion),
            "clustered" => Ok(Geometry::Clustered),
            other => Err(Error::domain(format!("unknown geometry `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub n: usize,
    pub d: usize,
    pub intrinsic_dim: usize,
    pub geometry: Geometry,
    /// Per-coordinate noise amplitude (uniform in [−noise, noise]).
    pub noise: f64,
    /// ℓ1 extent of the generating structure.
    pub extent: f64,
    pub planted_queries: usize,
    pub near_distance: f64,
    pub far_distance: f64,
    pub seed: RandomSeed,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 64,
            intrinsic_dim: 3,
            geometry: Geometry::Subspace,
            noise: 0.01,
            extent: 400.0,
            planted_queries: 100,
            near_distance: 1.0,
            far_distance: 6.0,
            seed: RandomSeed::with_stream(1, "dataset"),
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if self.intrinsic_dim == 0 || self.intrinsic_dim > self.d {
            return Err(Error::domain(format!(
                "intrinsic dimension {} must lie in [1, d = {}]",
                self.intrinsic_dim, self.d
            )));
        }
        if !(self.noise >= 0.0 && self.extent >= 0.0) {
            return Err(Error::domain("noise and extent must be non-negative"));
        }
        if !(self.near_distance >= 0.0 && self.near_distance < self.far_distance) {
            return Err(Error::domain(format!(
                "need 0 <= near_distance < far_distance, got {} and {}",
                self.near_distance, self.far_distance
            )));
        }
        if self.planted_queries > 0 && self.n == 0 {
            return Err(Error::Infeasible("planted queries need at least one point".into()));
        }
        Ok(())
    }
}

/// A generated dataset; `planted[j]` is the unique near neighbor of query j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub points: PointSet,
    pub queries: PointSet,
    pub planted: Vec<usize>,
}

/// Random direction with ‖u‖₁ = 1 spread over all coordinates.
fn l1_direction(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..d)
        .map(|_| {
            let mag = -open_unit(rng).ln();
            if half_open_unit(rng) < 0.5 {
                -mag
            } else {
                mag
            }
        })
        .collect();
    let norm: f64 = u.iter().map(|x| x.abs()).sum();
    for x in &mut u {
        *x /= norm;
    }
    u
}

fn random_flat(rng: &mut StreamRng, dim: usize, d: usize) -> Vec<Vec<f64>> {
    (0..dim).map(|_| l1_direction(rng, d)).collect()
}

fn combine(origin: &[f64], basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut p = origin.to_vec();
    for (b, &a) in basis.iter().zip(coeffs) {
        for (x, &bj) in p.iter_mut().zip(b) {
            *x += a * bj;
        }
    }
    p
}

/// Samples the structure; points are returned in generation order.
pub fn structure_points(spec: &DatasetSpec) -> Result<PointSet> {
    spec.validate()?;
    let (d, m) = (spec.d, spec.intrinsic_dim);
    let mut rng = spec.seed.derive("structure").rng();
    let mut noise_rng = spec.seed.derive("noise").rng();
    let origin = vec![0.0; d];
    let e = spec.extent;
    let mut coords = Vec::with_capacity(spec.n * d);
    match spec.geometry {
        Geometry::Subspace => {
            let basis = random_flat(&mut rng, m, d);
            for _ in 0..spec.n {
                let a: Vec<f64> = (0..m).map(|_| e * half_open_unit(&mut rng)).collect();
                coords.extend(combine(&origin, &basis, &a));
            }
        }
        Geometry::SegmentUnion => {
            let pieces: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..3)
                .map(|_| {
                    let start: Vec<f64> = l1_direction(&mut rng, d).iter().map(|x| x * e * 0.5).collect();
                    (start, random_flat(&mut rng, m, d))
                })
                .collect();
            for _ in 0..spec.n {
                let (start, basis) = &pieces[below(&mut rng, 3) as usize];
                let a: Vec<f64> = (0..m).map(|_| e * half_open_unit(&mut rng)).collect();
                coords.extend(combine(start, basis, &a));
            }
        }
        Geometry::Clustered => {
            let basis = random_flat(&mut rng, m, d);
            let centers: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..m).map(|_| e * half_open_unit(&mut rng)).collect())
                .collect();
            let spread = e / 40.0;
            for _ in 0..spec.n {
                let c = &centers[below(&mut rng, 8) as usize];
                let a: Vec<f64> = c
                    .iter()
                    .map(|&x| x + spread * (half_open_unit(&mut rng) - 0.5))
                    .collect();
                coords.extend(combine(&origin, &basis, &a));
            }
        }
    }
    if spec.noise > 0.0 {
        for x in &mut coords {
            *x += spec.noise * (2.0 * half_open_unit(&mut noise_rng) - 1.0);
        }
    }
    if spec.n == 0 {
        return Ok(PointSet::empty(d));
    }
    PointSet::new(d, coords)
}

/// Generates the structure and plants the queries, verifying every
/// separation by exact scan.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let points = structure_points(spec)?;
    let mut rng = spec.seed.derive("queries").rng();
    let mut queries = PointSet::empty(spec.d);
    let mut planted = Vec::with_capacity(spec.planted_queries);
    const ATTEMPTS: usize = 256;
    for j in 0..spec.planted_queries {
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let anchor = below(&mut rng, points.len() as u64) as usize;
            let u = l1_direction(&mut rng, spec.d);
            let mut q: Vec<f64> = points
                .point(anchor)
                .iter()
                .zip(&u)
                .map(|(p, ui)| p + spec.near_distance * ui)
                .collect();
            // rounding can push the planted distance just past the limit
            let mut shrink = 1.0;
            while l1_distance(&q, points.point(anchor)) > spec.near_distance {
                shrink *= 1.0 - 1e-9;
                for ((qi, p), ui) in q.iter_mut().zip(points.point(anchor)).zip(&u) {
                    *qi = p + shrink * spec.near_distance * ui;
                }
            }
            if planted_ok(&points, &q, anchor, spec.far_distance) {
                queries.push(&q)?;
                planted.push(anchor);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Infeasible(format!(
                "could not plant query {j}: no isolated anchor found in {ATTEMPTS} attempts; \
                 increase extent ({}) or reduce n ({}) or far_distance ({})",
                spec.extent, spec.n, spec.far_distance
            )));
        }
    }
    Ok(Dataset {
        spec: spec.clone(),
        points,
        queries,
        planted,
    })
}

fn planted_ok(points: &PointSet, q: &[f64], anchor: usize, far: f64) -> bool {
    points
        .iter()
        .enumerate()
        .all(|(i, p)| i == anchor || l1_distance(p, q) >= far)
}

/// Checks the planted separations of every query against the points.
pub fn verify_planted(dataset: &Dataset) -> bool {
    dataset.planted.len() == dataset.queries.len()
        && dataset.queries.iter().zip(&dataset.planted).all(|(q, &a)| {
            l1_distance(dataset.points.point(a), q) <= dataset.spec.near_distance
                && planted_ok(&dataset.points, q, a, dataset.spec.far_distance)
        })
}

/// Queries at distance ≥ `min_distance` from every point, placed by pushing a
/// random point outward along a random direction.
pub fn control_queries(points: &PointSet, count: usize, min_distance: f64, seed: &RandomSeed) -> Result<PointSet> {
    if points.is_empty() {
        return Err(Error::domain("control queries need at least one point"));
    }
    let mut rng = seed.rng();
    let mut out = PointSet::empty(points.dim());
    while out.len() < count {
        let base = points.point(below(&mut rng, points.len() as u64) as usize);
        let u = l1_direction(&mut rng, points.dim());
        let mut step = 2.0 * min_distance;
        loop {
            let q: Vec<f64> = base.iter().zip(&u).map(|(b, ui)| b + step * ui).collect();
            if points.iter().all(|p| l1_distance(p, &q) >= min_distance) {
                out.push(&q)?;
                break;
            }
            step *= 2.0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_separation_holds() {
        let spec = DatasetSpec {
            n: 300,
            d: 16,
            planted_queries: 20,
            extent: 200.0,
            ..DatasetSpec::default()
        };
        let ds = gen_dataset(&spec).unwrap();
        assert_eq!(ds.points.len(), 300);
        assert_eq!(ds.queries.len(), 20);
        assert!(verify_planted(&ds));
        assert_eq!(gen_dataset(&spec).unwrap(), ds);
    }

    #[test]
    fn single_point_dataset() {
        let spec = DatasetSpec {
            n: 1,
            d: 4,
            intrinsic_dim: 1,
            planted_queries: 3,
            ..DatasetSpec::default()
        };
        let ds = gen_dataset(&spec).unwrap();
        assert!(verify_planted(&ds));
        assert_eq!(ds.planted, vec![0, 0, 0]);
    }

    #[test]
    fn infeasible_separation_is_reported() {
        let spec = DatasetSpec {
            n: 500,
            d: 4,
            intrinsic_dim: 2,
            extent: 1.0,
            planted_queries: 1,
            ..DatasetSpec::default()
        };
        assert!(matches!(gen_dataset(&spec), Err(Error::Infeasible(_))));
        let bad = DatasetSpec {
            intrinsic_dim: 9,
            d: 4,
            ..DatasetSpec::default()
        };
        assert!(gen_dataset(&bad).is_err());
    }

    #[test]
    fn geometries_generate() {
        for g in [Geometry::Subspace, Geometry::SegmentUnion, Geometry::Clustered] {
            let spec = DatasetSpec {
                n: 50,
                d: 8,
                geometry: g,
                planted_queries: 0,
                ..DatasetSpec::default()
            };
            assert_eq!(structure_points(&spec).unwrap().len(), 50);
            assert_eq!(g.to_string().parse::<Geometry>().unwrap(), g);
        }
    }

    #[test]
    fn control_queries_are_far() {
        let spec = DatasetSpec {
            n: 100,
            d: 8,
            planted_queries: 0,
            ..DatasetSpec::default()
        };
        let p = structure_points(&spec).unwrap();
        let c = control_queries(&p, 10, 5.0, &RandomSeed::new(3)).unwrap();
        assert!(c.iter().all(|q| p.iter().all(|x| l1_distance(x, q) >= 5.0)));
    }
}
