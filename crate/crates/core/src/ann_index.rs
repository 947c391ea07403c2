//! Decision-version (c, 1)-near-neighbor index over amplified embeddings.
//!
//! Each repetition embeds the dataset independently and buckets the images
//! on a uniform grid in ℝ^k. A query is projected with every repetition's
//! matrix in turn; candidates whose image lies within 1 + 3ε of f(q) are
//! verified against their true distance, and the first one within 1 + 9ε is
//! returned.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{
    doubling_scales, embed_dataset_grid, embed_dataset_net, estimate_doubling_constant, plan_dimension, DimensionPlan,
    EmbeddedDataset, Embedding, GridEmbedding, NetEmbedding, PlanConstants, Variant,
};
use crate::error::{check_dim, Error, Result};
use crate::grid_partition::{make_grid, GridCover};
use crate::io::{block_from_bytes, block_to_bytes, points_from_bytes, points_to_bytes, read_bytes, write_bytes};
use crate::net_builder::NetResult;
use crate::points::{l1_distance, PointSet};
use crate::projection::CauchyMatrix;
use crate::rng::RandomSeed;

/// Cell ids beyond this magnitude force a linear scan.
const CELL_LIMIT: f64 = (1u64 << 62) as f64;

/// Uniform grid over ℝ^k mapping cell ids to point indices.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketTable {
    side: f64,
    buckets: HashMap<Vec<i64>, Vec<u32>>,
    /// Points whose image could not be bucketed; always scanned.
    overflow: Vec<u32>,
}

fn cell_id(x: &[f64], side: f64) -> Option<Vec<i64>> {
    x.iter()
        .map(|&v| {
            let s = (v / side).floor();
            (s.abs() < CELL_LIMIT).then_some(s as i64)
        })
        .collect()
}

impl BucketTable {
    pub fn build(data: &EmbeddedDataset, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::domain(format!("bucket side must be positive, got {side}")));
        }
        let mut buckets: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        let mut overflow = Vec::new();
        for i in 0..data.len() {
            match cell_id(data.vector(i), side) {
                Some(id) => buckets.entry(id).or_default().push(i as u32),
                None => overflow.push(i as u32),
            }
        }
        Ok(Self {
            side,
            buckets,
            overflow,
        })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Number of cells meeting the ℓ1 ball B(x, radius), counting stops
    /// once it exceeds `cap`.
    pub fn cells_in_ball(&self, x: &[f64], radius: f64, cap: usize) -> usize {
        let mut count = 0;
        let _ = self.walk_ball(x, radius, cap, &mut |_| count += 1);
        count
    }

    /// Visits every cell meeting B(x, radius); returns false if more than
    /// `cap` cells would be visited or the ball leaves the id range.
    fn walk_ball(&self, x: &[f64], radius: f64, cap: usize, visit: &mut dyn FnMut(&[i64])) -> bool {
        let Some(home) = cell_id(x, self.side) else {
            return false;
        };
        // per-axis gaps to the lower and upper faces of the home cell
        let gaps: Vec<(f64, f64)> = x
            .iter()
            .zip(&home)
            .map(|(&v, &c)| {
                let lo = v - c as f64 * self.side;
                (lo.max(0.0), (self.side - lo).max(0.0))
            })
            .collect();
        let mut cell = home.clone();
        let mut visited = 0usize;
        #[allow(clippy::too_many_arguments)]
        fn rec(
            axis: usize,
            budget: f64,
            side: f64,
            home: &[i64],
            gaps: &[(f64, f64)],
            cell: &mut Vec<i64>,
            visited: &mut usize,
            cap: usize,
            visit: &mut dyn FnMut(&[i64]),
        ) -> bool {
            if axis == home.len() {
                *visited += 1;
                if *visited > cap {
                    return false;
                }
                visit(cell);
                return true;
            }
            cell[axis] = home[axis];
            if !rec(axis + 1, budget, side, home, gaps, cell, visited, cap, visit) {
                return false;
            }
            let (lo, hi) = gaps[axis];
            for (dir, gap) in [(1i64, hi), (-1i64, lo)] {
                let mut step = 1i64;
                let mut dist = gap;
                while dist <= budget {
                    cell[axis] = home[axis] + dir * step;
                    if !rec(axis + 1, budget - dist, side, home, gaps, cell, visited, cap, visit) {
                        return false;
                    }
                    step += 1;
                    dist = gap + (step - 1) as f64 * side;
                }
            }
            cell[axis] = home[axis];
            true
        }
        rec(0, radius, self.side, &home, &gaps, &mut cell, &mut visited, cap, visit)
    }

    /// Indices (ascending) of every point whose image lies within `radius`
    /// of `x`; scans all points when more than 2n cells meet the ball.
    pub fn query(&self, data: &EmbeddedDataset, x: &[f64], radius: f64) -> (Vec<usize>, bool) {
        let cap = 2 * data.len();
        let mut found = Vec::new();
        let mut cells = Vec::new();
        let bucketed = self.walk_ball(x, radius, cap, &mut |c| cells.push(c.to_vec()));
        if bucketed {
            for c in &cells {
                if let Some(ids) = self.buckets.get(c) {
                    found.extend(ids.iter().map(|&i| i as usize));
                }
            }
            found.extend(self.overflow.iter().map(|&i| i as usize));
            found.retain(|&i| l1_distance(data.vector(i), x) <= radius);
            found.sort_unstable();
        } else {
            found.extend((0..data.len()).filter(|&i| l1_distance(data.vector(i), x) <= radius));
        }
        (found, bucketed)
    }
}

/// Build parameters of an [`AnnIndex`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub epsilon: f64,
    /// Net approximation factor (ignored by the grid variant).
    pub c: f64,
    pub variant: Variant,
    pub fail_prob: f64,
    /// Amplification constant a in m = ⌈(a/ε)·ln(1/fail_prob)⌉.
    pub amplification: f64,
    pub plan_constants: PlanConstants,
    /// Overrides the planned target dimension.
    pub k: Option<usize>,
    /// Overrides the doubling-constant estimate.
    pub lambda: Option<f64>,
}

impl IndexConfig {
    pub fn new(epsilon: f64, c: f64, variant: Variant, fail_prob: f64) -> Self {
        Self {
            epsilon,
            c,
            variant,
            fail_prob,
            amplification: 0.25,
            plan_constants: PlanConstants::default(),
            k: None,
            lambda: None,
        }
    }

    pub fn repetitions(&self) -> Result<usize> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.5) {
            return Err(Error::domain(format!(
                "epsilon must lie in (0, 1/2], got {}",
                self.epsilon
            )));
        }
        if !(self.fail_prob > 0.0 && self.fail_prob < 1.0) {
            return Err(Error::domain(format!(
                "fail_prob must lie in (0, 1), got {}",
                self.fail_prob
            )));
        }
        if !(self.amplification > 0.0) {
            return Err(Error::domain("amplification constant must be positive"));
        }
        let m = (self.amplification / self.epsilon * (1.0 / self.fail_prob).ln()).ceil();
        Ok((m as usize).max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Repetition {
    pub seed: RandomSeed,
    pub embedding: Embedding,
    pub data: EmbeddedDataset,
    pub table: BucketTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnIndex {
    points: PointSet,
    config: IndexConfig,
    plan: DimensionPlan,
    seed: RandomSeed,
    repetitions: Vec<Repetition>,
}

/// The scale parameter of the dimension plan: c for nets, d for grids.
fn scale_param(config: &IndexConfig, d: usize) -> f64 {
    match config.variant {
        Variant::Net => config.c,
        Variant::Grid => d as f64,
    }
}

pub fn plan_for(points: &PointSet, config: &IndexConfig) -> Result<DimensionPlan> {
    let scale = scale_param(config, points.dim());
    if let Some(k) = config.k {
        return DimensionPlan::fixed(k, config.epsilon, scale);
    }
    let lambda = match config.lambda {
        Some(l) => l,
        None if points.len() >= 2 => estimate_doubling_constant(points, &doubling_scales(points, 12))?,
        None => 1.0,
    };
    plan_dimension(lambda, config.epsilon, scale, config.plan_constants)
}

pub fn build_index(points: &PointSet, config: &IndexConfig, seed: &RandomSeed) -> Result<AnnIndex> {
    if points.is_empty() {
        return Err(Error::domain("cannot index an empty point set"));
    }
    let m = config.repetitions()?;
    if config.variant == Variant::Net && !(config.c >= 1.0) {
        return Err(Error::domain(format!(
            "net approximation factor must be >= 1, got {}",
            config.c
        )));
    }
    let plan = plan_for(points, config)?;
    let side = (1.0 + 3.0 * config.epsilon) / plan.k as f64;
    let mut repetitions = Vec::with_capacity(m);
    for rep in 0..m {
        let rseed = seed.derive_indexed("repetition", rep as u64);
        let (embedding, data): (Embedding, _) = match config.variant {
            Variant::Net => {
                let (e, data) = embed_dataset_net(points, config.epsilon, config.c, &plan, &rseed)?;
                (e.into(), data)
            }
            Variant::Grid => {
                let (e, data) = embed_dataset_grid(points, config.epsilon, &plan, &rseed)?;
                (e.into(), data)
            }
        };
        let table = BucketTable::build(&data, side)?;
        repetitions.push(Repetition {
            seed: rseed,
            embedding,
            data,
            table,
        });
    }
    Ok(AnnIndex {
        points: points.clone(),
        config: config.clone(),
        plan,
        seed: seed.clone(),
        repetitions,
    })
}

/// Answer to one query, with the work done to find it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub answer: Option<usize>,
    pub repetition: Option<usize>,
    pub candidates: usize,
    pub linear_scans: usize,
}

impl AnnIndex {
    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn plan(&self) -> &DimensionPlan {
        &self.plan
    }

    pub fn seed(&self) -> &RandomSeed {
        &self.seed
    }

    pub fn m(&self) -> usize {
        self.repetitions.len()
    }

    pub fn k(&self) -> usize {
        self.plan.k
    }

    pub fn repetitions(&self) -> &[Repetition] {
        &self.repetitions
    }

    pub fn query(&self, q: &[f64]) -> Result<Option<usize>> {
        Ok(self.query_traced(q)?.answer)
    }

    pub fn query_traced(&self, q: &[f64]) -> Result<QueryTrace> {
        self.points.check_query(q)?;
        let eps = self.config.epsilon;
        let radius = 1.0 + 3.0 * eps;
        let accept = 1.0 + 9.0 * eps;
        let mut trace = QueryTrace {
            answer: None,
            repetition: None,
            candidates: 0,
            linear_scans: 0,
        };
        for (r, rep) in self.repetitions.iter().enumerate() {
            let fq = rep.embedding.embed_query(q)?;
            let (cands, bucketed) = rep.table.query(&rep.data, &fq, radius);
            trace.candidates += cands.len();
            trace.linear_scans += (!bucketed) as usize;
            if let Some(&hit) = cands.iter().find(|&&i| self.points.distance_to(i, q) <= accept) {
                trace.answer = Some(hit);
                trace.repetition = Some(r);
                return Ok(trace);
            }
        }
        Ok(trace)
    }
}

/// Exact scan: the nearest point if it lies within `threshold`.
pub fn linear_scan_oracle(points: &PointSet, q: &[f64], threshold: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in points.iter().enumerate() {
        let dist = l1_distance(p, q);
        if best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, i));
        }
    }
    best.filter(|&(dist, _)| dist <= threshold).map(|(_, i)| i)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    epsilon: f64,
    c: f64,
    variant: Variant,
    m: usize,
    fail_prob: f64,
    a: f64,
    seed: RandomSeed,
    seeds: Vec<RandomSeed>,
    k: usize,
    d: usize,
    n: usize,
    plan: DimensionPlan,
    config: IndexConfig,
}

const MANIFEST_FORMAT: u32 = 1;

impl AnnIndex {
    /// Writes `manifest.json`, `points.bin` and per-repetition
    /// `matrix-<i>.bin`, `vectors-<i>.bin` and `net-<i>.json` / `cover-<i>.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            format: MANIFEST_FORMAT,
            epsilon: self.config.epsilon,
            c: self.config.c,
            variant: self.config.variant,
            m: self.m(),
            fail_prob: self.config.fail_prob,
            a: self.config.amplification,
            seed: self.seed.clone(),
            seeds: self.repetitions.iter().map(|r| r.seed.clone()).collect(),
            k: self.k(),
            d: self.points.dim(),
            n: self.points.len(),
            plan: self.plan.clone(),
            config: self.config.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        write_bytes(&dir.join("manifest.json"), json.as_bytes())?;
        write_bytes(&dir.join("points.bin"), &points_to_bytes(&self.points))?;
        for (i, rep) in self.repetitions.iter().enumerate() {
            write_bytes(&dir.join(format!("matrix-{i}.bin")), &rep.embedding.matrix().to_bytes())?;
            write_bytes(
                &dir.join(format!("vectors-{i}.bin")),
                &block_to_bytes(rep.data.len(), rep.data.k(), rep.data.vectors()),
            )?;
            let (name, body) = match &rep.embedding {
                Embedding::Net(e) => (format!("net-{i}.json"), e.net.to_json()?),
                Embedding::Grid(e) => (format!("cover-{i}.json"), e.cover.to_json()?),
            };
            write_bytes(&dir.join(name), body.as_bytes())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = read_bytes(&dir.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_slice(&text)?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::Format {
                what: "index manifest",
                detail: format!("unsupported format {}", manifest.format),
            });
        }
        let points = points_from_bytes(&read_bytes(&dir.join("points.bin"))?)?;
        check_dim(manifest.n, points.len())?;
        check_dim(manifest.d, points.dim())?;
        let side = (1.0 + 3.0 * manifest.epsilon) / manifest.k as f64;
        let mut repetitions = Vec::with_capacity(manifest.m);
        for (i, seed) in manifest.seeds.iter().enumerate() {
            let mut matrix = CauchyMatrix::from_bytes(&read_bytes(&dir.join(format!("matrix-{i}.bin")))?)?;
            matrix.set_seed(seed.derive("matrix"))?;
            let (rows, k, values) = block_from_bytes(&read_bytes(&dir.join(format!("vectors-{i}.bin")))?)?;
            check_dim(manifest.n, rows)?;
            check_dim(manifest.k, k)?;
            let data = EmbeddedDataset::new(manifest.variant, k, values)?;
            let embedding = match manifest.variant {
                Variant::Net => {
                    let body = read_bytes(&dir.join(format!("net-{i}.json")))?;
                    let net = NetResult::from_json(&String::from_utf8_lossy(&body))?;
                    Embedding::Net(NetEmbedding {
                        net,
                        matrix,
                        plan: manifest.plan.clone(),
                        epsilon: manifest.epsilon,
                    })
                }
                Variant::Grid => {
                    let body = read_bytes(&dir.join(format!("cover-{i}.json")))?;
                    let cover = GridCover::from_json(&String::from_utf8_lossy(&body))?;
                    let grid = make_grid(manifest.d, cover.w, &cover.seed)?;
                    Embedding::Grid(GridEmbedding {
                        grid,
                        cover,
                        matrix,
                        plan: manifest.plan.clone(),
                        epsilon: manifest.epsilon,
                    })
                }
            };
            let table = BucketTable::build(&data, side)?;
            repetitions.push(Repetition {
                seed: seed.clone(),
                embedding,
                data,
                table,
            });
        }
        check_dim(manifest.m, repetitions.len())?;
        Ok(Self {
            points,
            config: manifest.config,
            plan: manifest.plan,
            seed: manifest.seed,
            repetitions,
        })
    }
}
