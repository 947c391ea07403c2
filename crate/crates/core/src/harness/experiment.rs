//! Index experiments on generated datasets.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ann_index::{build_index, linear_scan_oracle, IndexConfig};
use crate::embedding::{Embedding, PlanConstants, Variant};
use crate::error::{Error, Result};
use crate::harness::checks::{Timing, REFERENCE_AMPLIFICATION, REFERENCE_PLAN};
use crate::harness::dataset::{control_queries, gen_dataset, DatasetSpec};
use crate::harness::report::ReportRecord;
use crate::points::l1_distance;
use crate::rng::RandomSeed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSpec,
    pub variant: Variant,
    pub epsilon: f64,
    pub c: f64,
    pub fail_prob: f64,
    pub amplification: f64,
    pub plan_constants: PlanConstants,
    pub k: Option<usize>,
    /// Number of all-far control queries.
    pub controls: usize,
    pub seed: u64,
    /// Record build, embedding and query times.
    pub timing: bool,
    pub timing_runs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: DatasetSpec::default(),
            variant: Variant::Grid,
            epsilon: 0.25,
            c: 2.0,
            fail_prob: 0.1,
            amplification: REFERENCE_AMPLIFICATION,
            plan_constants: REFERENCE_PLAN,
            k: None,
            controls: 100,
            seed: 1,
            timing: false,
            timing_runs: 5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Replaces the experiment seed and the dataset seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.dataset.seed = RandomSeed::with_stream(seed, "dataset");
    }

    pub fn index_config(&self) -> IndexConfig {
        IndexConfig {
            amplification: self.amplification,
            plan_constants: self.plan_constants,
            k: self.k,
            ..IndexConfig::new(self.epsilon, self.c, self.variant, self.fail_prob)
        }
    }
}

fn timed<T>(runs: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, Timing)> {
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs.max(1) {
        let t = Instant::now();
        last = Some(f()?);
        times.push(t.elapsed().as_secs_f64());
    }
    Ok((last.unwrap(), Timing::of(&times)))
}

fn timing_record(name: &str, bound: &str, t: Timing, runs: usize) -> ReportRecord {
    ReportRecord::new(name, bound)
        .param("runs", runs)
        .param("min_seconds", t.min)
        .param("max_seconds", t.max)
        .empirical(t.median, 0.0)
}

/// Generates the dataset, builds the index and answers planted and control
/// queries. Returns one record per measured quantity.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReportRecord>> {
    if config.dataset.planted_queries == 0 {
        return Err(Error::domain("experiment needs at least one planted query"));
    }
    let name = config.name.as_str();
    let seed = RandomSeed::with_stream(config.seed, "experiment");
    let data = gen_dataset(&config.dataset)?;
    let accept = 1.0 + 9.0 * config.epsilon;
    let controls = control_queries(&data.points, config.controls, 2.0 * accept, &seed.derive("controls"))?;
    let index_config = config.index_config();
    let runs = if config.timing { config.timing_runs.max(1) } else { 1 };
    let (index, build_time) = timed(runs, || build_index(&data.points, &index_config, &seed.derive("index")))?;

    let oracle_ok = data
        .queries
        .iter()
        .zip(&data.planted)
        .all(|(q, &p)| linear_scan_oracle(&data.points, q, config.dataset.near_distance) == Some(p));
    let mut answered = 0u64;
    let mut violations = 0u64;
    for q in data.queries.iter() {
        match index.query(q)? {
            Some(p) if l1_distance(data.points.point(p), q) <= accept => answered += 1,
            Some(_) => violations += 1,
            None => {}
        }
    }
    let mut nulls = 0u64;
    for q in controls.iter() {
        match index.query(q)? {
            None => nulls += 1,
            Some(p) if l1_distance(data.points.point(p), q) > accept => violations += 1,
            Some(_) => {}
        }
    }
    let queries = data.queries.len() as u64;
    let success = answered as f64 / queries as f64;
    let base = |bound: &str| {
        ReportRecord::new(name, bound)
            .param("variant", config.variant.to_string())
            .param("epsilon", config.epsilon)
            .param("n", data.points.len())
            .param("d", data.points.dim())
    };
    let mut out = vec![
        base("success rate")
            .param("queries", queries)
            .param("oracle_confirmed", oracle_ok)
            .analytic(0.9)
            .empirical(success, crate::stats::proportion_se(success, queries))
            .pass(oracle_ok && success >= 0.9),
        base("control null rate")
            .param("controls", controls.len())
            .analytic(1.0)
            .empirical(
                if controls.is_empty() {
                    1.0
                } else {
                    nulls as f64 / controls.len() as f64
                },
                0.0,
            )
            .pass(nulls == controls.len() as u64),
        base("soundness violations")
            .analytic(0.0)
            .empirical(violations as f64, 0.0)
            .pass(violations == 0),
        base("target dimension k")
            .param("formula_k", index.plan().formula_k)
            .param("far_point_k", index.plan().far_point_k)
            .param("lambda_estimate", index.plan().lambda_estimate)
            .empirical(index.k() as f64, 0.0),
        base("repetitions m")
            .param("fail_prob", config.fail_prob)
            .param("amplification", config.amplification)
            .empirical(index.m() as f64, 0.0),
    ];

    if config.timing {
        out.push(timing_record(name, "build seconds", build_time, runs));
        let embedding = &index.repetitions()[0].embedding;
        let points = &data.points;
        let (_, embed) = timed(runs, || {
            for (i, p) in points.iter().enumerate() {
                let image = match embedding {
                    Embedding::Grid(g) => g.embed_point(p)?,
                    Embedding::Net(_) => embedding.matrix().project(embedding.representative(points, i))?,
                };
                std::hint::black_box(image);
            }
            Ok(())
        })?;
        let per_point = Timing {
            median: embed.median / points.len() as f64,
            min: embed.min / points.len() as f64,
            max: embed.max / points.len() as f64,
        };
        out.push(timing_record(name, "per-point embedding seconds", per_point, runs).param("k", index.k()));
        let (_, query) = timed(runs, || {
            for q in data.queries.iter() {
                std::hint::black_box(index.query(q)?);
            }
            Ok(())
        })?;
        let per_query = Timing {
            median: query.median / queries as f64,
            min: query.min / queries as f64,
            max: query.max / queries as f64,
        };
        out.push(timing_record(name, "per-query seconds", per_query, runs));
    }
    Ok(out)
}
