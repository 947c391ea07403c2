//! Registered bound checks. Each check returns one or more report records;
//! a check passes when every record it emits passes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ann_index::{build_index, linear_scan_oracle, IndexConfig};
use crate::cauchy_stats::{
    check_norm_sandwich, estimate_abs_sqrt_moment, estimate_mgf, estimate_tail_probability, fill_cauchy,
    mgf_analytic_bound, sample_cauchy, tail_analytic_bound, tail_proof_bound, ABS_SQRT_MOMENT,
};
use crate::embedding::{
    doubling_scales, embed_dataset_grid, estimate_doubling_constant, far_point_audit, far_point_dimension, far_radius,
    plan_dimension, success_conditions, DimensionPlan, Embedding, NetEmbedding, PlanConstants, Variant,
};
use crate::error::{Error, Result};
use crate::grid_partition::{
    ball_cover_bound, estimate_ball_cover_size, estimate_cover_growth, make_grid, GrowthParams,
};
use crate::harness::dataset::{control_queries, gen_dataset, structure_points, Dataset, DatasetSpec, Geometry};
use crate::harness::report::ReportRecord;
use crate::net_builder::{brute_force_net, build_approx_net, verify_net, NetBuilderConfig};
use crate::points::{l1_distance, l1_norm, PointSet};
use crate::projection::{distortion_dimension, distortion_probe, make_projection};
use crate::rng::{below, half_open_unit, open_unit, RandomSeed};
use crate::stats::{fit_line, fit_through_origin, ks_two_sample, median, proportion, proportion_se};

pub const CHECK_NAMES: [&str; 13] = [
    "abs-sqrt-moment",
    "mgf-bound",
    "tail-bound",
    "norm-sandwich",
    "one-stability",
    "projection-distortion",
    "net-correctness",
    "net-scaling",
    "grid-growth",
    "far-point-audit",
    "success-conditions",
    "ann-end-to-end",
    "grid-embed-cost",
];

/// Target-dimension constants used by the reference experiments.
pub const REFERENCE_PLAN: PlanConstants = PlanConstants {
    zeta_cal: 1.0,
    exponent_cal: 0.2,
};

/// ρ₀: the single-embedding success fraction must be at least ρ₀·ε.
pub const SUCCESS_PER_EPSILON: f64 = 0.5;

/// Amplification constant a of the reference index.
pub const REFERENCE_AMPLIFICATION: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Sample sizes of the acceptance criteria.
    #[default]
    Full,
    /// Reduced sizes for smoke runs.
    Quick,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "quick" => Ok(Profile::Quick),
            other => Err(Error::domain(format!("unknown profile `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckContext {
    pub seed: RandomSeed,
    pub profile: Profile,
    /// Attach wall-clock seconds to each record.
    pub timing: bool,
}

impl CheckContext {
    pub fn new(seed: u64, profile: Profile) -> Self {
        Self {
            seed: RandomSeed::with_stream(seed, "verify"),
            profile,
            timing: false,
        }
    }

    fn pick<T>(&self, full: T, quick: T) -> T {
        match self.profile {
            Profile::Full => full,
            Profile::Quick => quick,
        }
    }

    fn seed_for(&self, check: &str) -> RandomSeed {
        self.seed.derive(check)
    }
}

pub fn is_registered(name: &str) -> bool {
    CHECK_NAMES.contains(&name)
}

/// Runs one named check.
pub fn run_check(name: &str, ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let start = Instant::now();
    let mut records = match name {
        "abs-sqrt-moment" => abs_sqrt_moment(ctx)?,
        "mgf-bound" => mgf_bound(ctx)?,
        "tail-bound" => tail_bound(ctx)?,
        "norm-sandwich" => norm_sandwich(ctx)?,
        "one-stability" => one_stability(ctx)?,
        "projection-distortion" => projection_distortion(ctx)?,
        "net-correctness" => net_correctness(ctx)?,
        "net-scaling" => net_scaling(ctx)?,
        "grid-growth" => grid_growth(ctx)?,
        "far-point-audit" => far_point_check(ctx)?,
        "success-conditions" => success_check(ctx)?,
        "ann-end-to-end" => ann_end_to_end(ctx)?,
        "grid-embed-cost" => grid_embed_cost(ctx)?,
        other => return Err(Error::UnknownCheck(other.to_string())),
    };
    if ctx.timing {
        let secs = start.elapsed().as_secs_f64();
        for r in &mut records {
            r.wall_clock_seconds = Some(secs);
        }
    }
    Ok(records)
}

/// Input of [`run_verify`], usually read from a JSON file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Registered check names; `"all"` expands to every check.
    pub checks: Vec<String>,
    pub seed: u64,
    pub profile: Profile,
    pub timing: bool,
}

impl VerifyConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// The check list with `"all"` expanded and names validated.
    pub fn resolved_checks(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for name in &self.checks {
            if name == "all" {
                out.extend(CHECK_NAMES.iter().map(|s| s.to_string()));
            } else if is_registered(name) {
                out.push(name.clone());
            } else {
                return Err(Error::UnknownCheck(name.clone()));
            }
        }
        Ok(out)
    }
}

/// Records of all requested checks, in order.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub records: Vec<ReportRecord>,
    pub pass: bool,
}

/// Runs the configured checks. Unknown names are rejected before any check runs.
pub fn run_verify(config: &VerifyConfig) -> Result<VerifyOutcome> {
    let names = config.resolved_checks()?;
    let ctx = CheckContext {
        timing: config.timing,
        ..CheckContext::new(config.seed, config.profile)
    };
    let mut records = Vec::new();
    for name in &names {
        records.extend(run_check(name, &ctx)?);
    }
    let pass = records.iter().all(|r| r.pass);
    Ok(VerifyOutcome { records, pass })
}

fn record(check: &str, bound: &str) -> ReportRecord {
    ReportRecord::new(check, bound)
}

fn abs_sqrt_moment(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let seeds: u64 = ctx.pick(20, 4);
    let n: u64 = ctx.pick(1_000_000, 100_000);
    let tol = ctx.pick(0.05, 0.1);
    let required = seeds - 1;
    let base = ctx.seed_for("abs-sqrt-moment");
    let mut passing = 0;
    let mut means = Vec::new();
    let mut worst = 0.0f64;
    for s in 0..seeds {
        let est = estimate_abs_sqrt_moment(n, &base.derive_indexed("seed", s))?;
        let err = (est.mean - ABS_SQRT_MOMENT).abs();
        worst = worst.max(err);
        passing += (err <= tol) as u64;
        means.push(est.mean);
    }
    let mean = means.iter().sum::<f64>() / seeds as f64;
    let spread = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64).sqrt();
    Ok(vec![record("abs-sqrt-moment", "E|X|^(1/2)")
        .param("samples", n)
        .param("seeds", seeds)
        .param("tolerance", tol)
        .param("passing_seeds", passing)
        .param("required_seeds", required)
        .param("worst_error", worst)
        .analytic(ABS_SQRT_MOMENT)
        .empirical(mean, spread / (seeds as f64).sqrt())
        .pass(passing >= required)])
}

fn mgf_bound(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let n: u64 = ctx.pick(1_000_000, 100_000);
    let base = ctx.seed_for("mgf-bound");
    let mut out = Vec::new();
    for (i, beta) in [1.5, 2.0, 4.0, 10.0].into_iter().enumerate() {
        let est = estimate_mgf(beta, n, &base.derive_indexed("beta", i as u64))?;
        let bound = mgf_analytic_bound(beta)?;
        out.push(
            record("mgf-bound", "E[exp(-beta|X|^(1/2))] <= 2/beta")
                .param("beta", beta)
                .param("samples", n)
                .analytic(bound)
                .empirical(est.mean, est.standard_error)
                .pass(est.mean + 3.0 * est.standard_error <= bound),
        );
    }
    Ok(out)
}

fn tail_bound(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let trials: u64 = ctx.pick(1_000_000, 20_000);
    let base = ctx.seed_for("tail-bound");
    let mut out = Vec::new();
    for (a, d) in [15.0, 20.0, 50.0, 100.0].into_iter().enumerate() {
        for (b, k) in [1usize, 4, 10, 32].into_iter().enumerate() {
            let est = estimate_tail_probability(d, k, trials, &base.derive_indexed("case", (4 * a + b) as u64))?;
            let bound = tail_analytic_bound(d, k)?;
            out.push(
                record("tail-bound", "Pr[S~ <= sqrt(2)k/D] <= (10/D)^k")
                    .param("D", d)
                    .param("k", k)
                    .param("trials", trials)
                    .param("proof_bound", tail_proof_bound(d, k)?)
                    .analytic(bound)
                    .empirical(est.mean, est.standard_error)
                    .pass(est.mean <= bound),
            );
        }
    }
    Ok(out)
}

fn norm_sandwich(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let vectors: u64 = ctx.pick(10_000, 1_000);
    let mut rng = ctx.seed_for("norm-sandwich").rng();
    let mut violations = 0u64;
    let mut buf = vec![0.0; 64];
    for v in 0..vectors {
        let k = 1 + below(&mut rng, 64) as usize;
        let values = &mut buf[..k];
        match v % 3 {
            0 => fill_cauchy(&mut rng, values),
            1 => values
                .iter_mut()
                .for_each(|x| *x = 2.0 * half_open_unit(&mut rng) - 1.0),
            _ => values
                .iter_mut()
                .for_each(|x| *x = (40.0 * (half_open_unit(&mut rng) - 0.5)).exp2() * sample_cauchy(&mut rng).signum()),
        }
        if !check_norm_sandwich(values)? {
            violations += 1;
        }
    }
    Ok(vec![record("norm-sandwich", "S <= S~^2 <= kS")
        .param("vectors", vectors)
        .param("max_k", 64)
        .analytic(0.0)
        .empirical(violations as f64, 0.0)
        .pass(violations == 0)])
}

/// Samples of ‖f(x)‖₁·T/‖x‖₁ over fresh matrices, and of Σ_{j≤k}|X_j|.
pub fn one_stability_samples(k: usize, d: usize, samples: u64, seed: &RandomSeed) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = seed.derive("vector").rng();
    let x: Vec<f64> = (0..d).map(|_| 4.0 * half_open_unit(&mut rng) - 2.0).collect();
    let norm = l1_norm(&x);
    let mut projected = Vec::with_capacity(samples as usize);
    for s in 0..samples {
        let m = make_projection(d, k, 0.5, &seed.derive_indexed("matrix", s))?;
        projected.push(m.raw_image_norm(&x)? / norm);
    }
    let mut direct_rng = seed.derive("direct").rng();
    let direct = (0..samples)
        .map(|_| (0..k).map(|_| sample_cauchy(&mut direct_rng).abs()).sum())
        .collect();
    Ok((projected, direct))
}

fn one_stability(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let samples: u64 = ctx.pick(10_000, 2_000);
    let threshold = 0.02 * (10_000.0 / samples as f64).sqrt();
    let (projected, direct) = one_stability_samples(8, 16, samples, &ctx.seed_for("one-stability"))?;
    let ks = ks_two_sample(&projected, &direct);
    Ok(vec![record("one-stability", "KS(|f(x)|T/|x|, sum of |Cauchy|)")
        .param("k", 8)
        .param("d", 16)
        .param("samples", samples)
        .analytic(threshold)
        .empirical(ks, 0.0)
        .pass(ks < threshold)])
}

/// Multiplier standing in for 1/ζ(γ) in the distortion dimension.
pub const DISTORTION_ZETA: f64 = 4.0;

fn projection_distortion(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let pairs: u64 = ctx.pick(10_000, 300);
    let delta = 0.1;
    let base = ctx.seed_for("projection-distortion");
    let mut out = Vec::new();
    for (i, eps) in [0.1, 0.25, 0.5].into_iter().enumerate() {
        let gamma = eps / 10.0;
        let k = distortion_dimension(eps, gamma, delta, DISTORTION_ZETA)?;
        let rep = distortion_probe(2, k, eps, gamma, pairs, &base.derive_indexed("epsilon", i as u64))?;
        let cs = rep.contraction_sigma(delta);
        let es = rep.expansion_sigma();
        out.push(
            record("projection-distortion", "Pr[|f(p)-f(q)| <= (1-eps)|p-q|] <= delta")
                .param("epsilon", eps)
                .param("gamma", gamma)
                .param("k", k)
                .param("pairs", pairs)
                .analytic(delta)
                .empirical(rep.contraction_rate, cs)
                .pass(rep.contraction_rate <= delta + 3.0 * cs),
        );
        out.push(
            record(
                "projection-distortion",
                "Pr[|f(p)-f(q)| >= (1+eps)|p-q|] <= (1+gamma)/(1+eps)",
            )
            .param("epsilon", eps)
            .param("gamma", gamma)
            .param("k", k)
            .param("pairs", pairs)
            .analytic(rep.expansion_bound())
            .empirical(rep.expansion_rate, es)
            .pass(rep.expansion_rate <= rep.expansion_bound() + 3.0 * es),
        );
    }
    Ok(out)
}

/// One randomly drawn net instance.
#[derive(Clone, Debug, PartialEq)]
pub struct NetInstance {
    pub points: PointSet,
    pub r: f64,
    pub c: f64,
}

/// n log-uniform in [16, max_n], d log-uniform in [1, 50], c ∈ {1.5, 2, 4},
/// points on a random flat of dimension ≤ 3 with r set for a nontrivial net.
pub fn fuzz_net_instance(max_n: usize, seed: &RandomSeed) -> Result<NetInstance> {
    let mut rng = seed.rng();
    let log_uniform = |rng: &mut _, lo: f64, hi: f64| (lo.ln() + (hi.ln() - lo.ln()) * open_unit(rng)).exp();
    let n = log_uniform(&mut rng, 16.0, max_n as f64).round() as usize;
    let d = log_uniform(&mut rng, 1.0, 50.0).round().max(1.0) as usize;
    let c = [1.5, 2.0, 4.0][below(&mut rng, 3) as usize];
    let intrinsic = d.min(1 + below(&mut rng, 3) as usize);
    let spec = DatasetSpec {
        n,
        d,
        intrinsic_dim: intrinsic,
        geometry: Geometry::Subspace,
        noise: 0.01,
        extent: 100.0,
        planted_queries: 0,
        seed: seed.derive("points"),
        ..DatasetSpec::default()
    };
    let points = structure_points(&spec)?;
    let r = 100.0 / (n as f64).powf(1.0 / intrinsic as f64) * (0.5 + open_unit(&mut rng));
    Ok(NetInstance { points, r, c })
}

fn net_correctness(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let instances: u64 = ctx.pick(50, 8);
    let max_n = ctx.pick(2000, 300);
    let base = ctx.seed_for("net-correctness");
    let (mut packing, mut covering, mut rebuilds) = (0u64, 0u64, 0u64);
    for i in 0..instances {
        let inst = fuzz_net_instance(max_n, &base.derive_indexed("instance", i))?;
        let mut net = None;
        for attempt in 0..3u64 {
            let cfg = NetBuilderConfig::new(
                inst.points.len(),
                inst.points.dim(),
                inst.r,
                inst.c,
                &base.derive_indexed("instance", i).derive_indexed("build", attempt),
            )?;
            let built = build_approx_net(&inst.points, &cfg)?;
            let certified = built.certified;
            net = Some(built);
            if certified {
                break;
            }
            rebuilds += 1;
        }
        let v = verify_net(&inst.points, net.as_ref().unwrap());
        packing += v.packing_ok as u64;
        covering += v.covering_ok as u64;
    }
    let example = PointSet::from_rows(1, &[[0.0], [0.5], [2.0]])?;
    let oracle = brute_force_net(&example, 1.0)?;
    let cfg = NetBuilderConfig::new(3, 1, 1.0, 1.0, &base.derive("example"))?;
    let approx = build_approx_net(&example, &cfg)?;
    let agrees = approx.centers == oracle.centers && approx.assignment == oracle.assignment;
    let pack = proportion(packing, instances);
    let cover = proportion(covering, instances);
    Ok(vec![
        record("net-correctness", "packing_ok fraction")
            .param("instances", instances)
            .param("max_n", max_n)
            .param("rebuilds", rebuilds)
            .analytic(1.0)
            .empirical(pack.mean, pack.standard_error)
            .pass(packing == instances),
        record("net-correctness", "covering_ok fraction")
            .param("instances", instances)
            .param("max_n", max_n)
            .analytic(0.98)
            .empirical(cover.mean, cover.standard_error)
            .pass(cover.mean >= 0.98),
        record("net-correctness", "agreement with exact net on {0, 0.5, 2}")
            .param("r", 1.0)
            .param("c", 1.0)
            .analytic(1.0)
            .empirical(agrees as u8 as f64, 0.0)
            .pass(agrees),
    ])
}

/// Median, min and max of repeated wall-clock measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Timing {
    pub fn of(times: &[f64]) -> Self {
        Self {
            median: median(times),
            min: times.iter().copied().fold(f64::INFINITY, f64::min),
            max: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Build times over `runs` of the net at c = 4 for each n, on a 2-flat in
/// ℝ⁸ with constant density.
pub fn net_build_times(sizes: &[usize], runs: usize, seed: &RandomSeed) -> Result<Vec<Timing>> {
    let mut out = Vec::new();
    for &n in sizes {
        let spec = DatasetSpec {
            n,
            d: 8,
            intrinsic_dim: 2,
            noise: 0.01,
            extent: 4.0 * (n as f64).sqrt(),
            planted_queries: 0,
            seed: seed.derive_indexed("points", n as u64),
            ..DatasetSpec::default()
        };
        let points = structure_points(&spec)?;
        let cfg = NetBuilderConfig::new(n, 8, 1.0, 4.0, &seed.derive_indexed("net", n as u64))?;
        let mut times = Vec::with_capacity(runs);
        for _ in 0..runs {
            let t = Instant::now();
            let net = build_approx_net(&points, &cfg)?;
            times.push(t.elapsed().as_secs_f64());
            std::hint::black_box(net);
        }
        out.push(Timing::of(&times));
    }
    Ok(out)
}

fn net_scaling(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let sizes: Vec<usize> = ctx.pick((8..=13).map(|e| 1 << e).collect(), (6..=9).map(|e| 1 << e).collect());
    let runs = ctx.pick(5, 3);
    let times = net_build_times(&sizes, runs, &ctx.seed_for("net-scaling"))?;
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.median.ln()).collect();
    let fit = fit_line(&xs, &ys);
    Ok(vec![record("net-scaling", "log-log slope of build time vs n")
        .param("sizes", sizes.clone())
        .param("runs", runs)
        .param("c", 4.0)
        .param("d", 8)
        .param("median_seconds", times.iter().map(|t| t.median).collect::<Vec<_>>())
        .param("min_seconds", times.iter().map(|t| t.min).collect::<Vec<_>>())
        .param("max_seconds", times.iter().map(|t| t.max).collect::<Vec<_>>())
        .analytic(2.0)
        .empirical(fit.slope, 0.0)
        .pass(fit.slope < 2.0)])
}

/// The low-doubling reference set: three segments in ℝ²⁰ spread over 2·10⁴.
pub fn low_doubling_reference(n: usize, seed: &RandomSeed) -> Result<PointSet> {
    structure_points(&DatasetSpec {
        n,
        d: 20,
        intrinsic_dim: 1,
        geometry: Geometry::SegmentUnion,
        noise: 0.01,
        extent: 20_000.0,
        planted_queries: 0,
        seed: seed.clone(),
        ..DatasetSpec::default()
    })
}

fn lambda_of(points: &PointSet) -> Result<f64> {
    estimate_doubling_constant(points, &doubling_scales(points, 16))
}

fn grid_growth(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let n = ctx.pick(1000, 200);
    let trials: u64 = ctx.pick(200, 30);
    let eps = 0.25;
    let base = ctx.seed_for("grid-growth");
    let points = low_doubling_reference(n, &base.derive("points"))?;
    let lambda = lambda_of(&points)?;
    let d = points.dim();
    let k = far_point_dimension(lambda, eps, d as f64, eps / 5.0)?;
    let d0 = far_radius(k);
    let q: Vec<f64> = points.point(0).iter().map(|x| x + 0.05).collect();
    let ball = estimate_ball_cover_size(&points, &q, d0, eps, trials, &base.derive("ball"))?;
    let ball_bound = ball_cover_bound(lambda, d, d0, eps);
    let growth = estimate_cover_growth(
        &points,
        &q,
        &GrowthParams {
            epsilon: eps,
            d0,
            lambda,
            trials,
        },
        &base.derive("annuli"),
    )?;
    let third_sigma = proportion_se(1.0 / 3.0, trials);
    let quarter_sigma = proportion_se(0.75, trials);
    let annuli: Vec<f64> = growth.annuli.iter().map(|a| a.mean_count).collect();
    Ok(vec![
        record("grid-growth", "E|g_w(P ∩ B(q,R))| <= 8 lambda^(2 log(dR/eps))")
            .param("R", d0)
            .param("epsilon", eps)
            .param("lambda", lambda)
            .param("trials", trials)
            .analytic(ball_bound)
            .empirical(ball.mean, ball.standard_error)
            .pass(ball.mean <= ball_bound),
        record(
            "grid-growth",
            "Pr[all i >= 0: |A_i| <= 4^(i+3) lambda^(2 log(dD_(i+1)/eps))] >= 1/3",
        )
        .param("D0", d0)
        .param("k", k)
        .param("lambda", lambda)
        .param("annuli", growth.annuli.len())
        .param("mean_counts", annuli)
        .param("trials", trials)
        .analytic(1.0 / 3.0)
        .empirical(growth.simultaneous.mean, growth.simultaneous.standard_error)
        .pass(growth.simultaneous.mean >= 1.0 / 3.0 - 3.0 * third_sigma),
        record("grid-growth", "Pr[|A_-1| <= 32 lambda^(2 log(dD0/eps))] >= 3/4")
            .param("D0", d0)
            .param("lambda", lambda)
            .param("trials", trials)
            .analytic(0.75)
            .empirical(growth.innermost.mean, growth.innermost.standard_error)
            .pass(growth.innermost.mean >= 0.75 - 3.0 * quarter_sigma),
    ])
}

fn far_point_check(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let n = ctx.pick(500, 120);
    let trials: u64 = ctx.pick(1000, 100);
    let (eps, c, delta) = (0.25, 2.0, 0.1);
    let base = ctx.seed_for("far-point-audit");
    let points = low_doubling_reference(n, &base.derive("points"))?;
    let lambda = lambda_of(&points)?;
    let k = far_point_dimension(lambda, eps, c, delta)?;
    let cfg = NetBuilderConfig::new(points.len(), points.dim(), eps / c, c, &base.derive("net"))?;
    let net = build_approx_net(&points, &cfg)?;
    let centers = points.select(&net.centers);
    let q: Vec<f64> = points.point(0).iter().map(|x| x + 0.05).collect();
    let (rate, far) = crate::embedding::far_point_failure_rate(&centers, &q, k, eps, trials, &base.derive("matrices"))?;
    let sigma = proportion_se(delta, trials);
    let plan = DimensionPlan::fixed(k, eps, c)?;
    let (single, data) = NetEmbedding::with_net(&points, net, eps, &plan, &base.derive("single"))?;
    let audit = far_point_audit(&Embedding::Net(single), &points, &data, &q, None)?;
    Ok(vec![
        record("far-point-audit", "Pr[exists far s: |f(s)-f(q)| < 4] <= delta")
            .param("k", k)
            .param("D0", far_radius(k))
            .param("lambda", lambda)
            .param("far_representatives", far)
            .param("trials", trials)
            .analytic(delta)
            .empirical(rate, sigma)
            .pass(rate <= delta + 3.0 * sigma),
        record("far-point-audit", "single embedding audit")
            .param("k", k)
            .param("far_points", audit.far_points)
            .analytic(0.0)
            .empirical(audit.violations as f64, 0.0)
            .pass(audit.pass || far == 0),
    ])
}

/// The planted reference instance: `n` points on a 3-flat in ℝ^d with
/// queries whose unique near neighbor sits at distance 1 and all other
/// points at distance ≥ 6.
pub fn planted_reference(n: usize, d: usize, queries: usize, seed: &RandomSeed) -> Result<Dataset> {
    gen_dataset(&DatasetSpec {
        n,
        d,
        intrinsic_dim: 3,
        geometry: Geometry::Subspace,
        noise: 0.01,
        extent: 400.0,
        planted_queries: queries,
        near_distance: 1.0,
        far_distance: 6.0,
        seed: seed.clone(),
    })
}

/// Success fraction of the two distance conditions over independent
/// single embeddings of `data` for query `qi`.
#[allow(clippy::too_many_arguments)]
pub fn success_fraction(
    data: &Dataset,
    qi: usize,
    variant: Variant,
    epsilon: f64,
    c: f64,
    plan: &DimensionPlan,
    runs: u64,
    seed: &RandomSeed,
) -> Result<(f64, f64)> {
    let q = data.queries.point(qi);
    let mut hits = 0u64;
    let mut near_hits = 0u64;
    // the net depends only on the data; it is built once and reused
    let net = match variant {
        Variant::Net => {
            let cfg = NetBuilderConfig::new(
                data.points.len(),
                data.points.dim(),
                epsilon / c,
                c,
                &seed.derive("net"),
            )?;
            Some(build_approx_net(&data.points, &cfg)?)
        }
        Variant::Grid => None,
    };
    for run in 0..runs {
        let rseed = seed.derive_indexed("run", run);
        let (fq, embedded) = match &net {
            Some(net) => {
                let (e, emb) = NetEmbedding::with_net(&data.points, net.clone(), epsilon, plan, &rseed)?;
                (e.matrix.project(q)?, emb)
            }
            None => {
                let (e, emb) = embed_dataset_grid(&data.points, epsilon, plan, &rseed)?;
                (e.matrix.project(q)?, emb)
            }
        };
        let outcome = success_conditions(&data.points, &embedded, &fq, q, epsilon)?;
        hits += outcome.holds() as u64;
        near_hits += outcome.near_ok as u64;
    }
    Ok((hits as f64 / runs as f64, near_hits as f64 / runs as f64))
}

/// Dimension plan of the reference experiments.
pub fn reference_plan(points: &PointSet, variant: Variant, epsilon: f64, c: f64) -> Result<DimensionPlan> {
    let lambda = lambda_of(points)?;
    let scale = match variant {
        Variant::Net => c,
        Variant::Grid => points.dim() as f64,
    };
    plan_dimension(lambda, epsilon, scale, REFERENCE_PLAN)
}

fn success_check(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let runs: u64 = ctx.pick(1000, 40);
    let (n, d) = ctx.pick((300, 64), (100, 16));
    let c = 2.0;
    let base = ctx.seed_for("success-conditions");
    let data = planted_reference(n, d, 1, &base.derive("data"))?;
    let mut out = Vec::new();
    for variant in [Variant::Net, Variant::Grid] {
        let mut fractions = Vec::new();
        for (i, eps) in [0.1, 0.25, 0.4].into_iter().enumerate() {
            let plan = reference_plan(&data.points, variant, eps, c)?;
            let seed = base.derive(&variant.to_string()).derive_indexed("epsilon", i as u64);
            let (frac, near) = success_fraction(&data, 0, variant, eps, c, &plan, runs, &seed)?;
            let se = proportion_se(frac, runs);
            fractions.push((frac, se));
            out.push(
                record(
                    "success-conditions",
                    "fraction of embeddings meeting both conditions >= rho0*eps",
                )
                .param("variant", variant.to_string())
                .param("epsilon", eps)
                .param("k", plan.k)
                .param("runs", runs)
                .param("near_condition_fraction", near)
                .param("rho0", SUCCESS_PER_EPSILON)
                .analytic(SUCCESS_PER_EPSILON * eps)
                .empirical(frac, se)
                .pass(frac > 0.0 && frac >= SUCCESS_PER_EPSILON * eps),
            );
        }
        let monotone = fractions.windows(2).all(|w| w[1].0 >= w[0].0);
        out.push(
            record("success-conditions", "fraction nondecreasing in eps")
                .param("variant", variant.to_string())
                .param("fractions", fractions.iter().map(|f| f.0).collect::<Vec<_>>())
                .analytic(1.0)
                .empirical(monotone as u8 as f64, 0.0)
                .pass(monotone),
        );
    }
    Ok(out)
}

/// Outcome of the end-to-end index experiment on planted and control queries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndToEnd {
    pub k: usize,
    pub m: usize,
    pub answered: u64,
    pub queries: u64,
    pub control_null: u64,
    pub controls: u64,
    pub soundness_violations: u64,
    pub build_seconds: f64,
}

pub fn end_to_end(data: &Dataset, controls: &PointSet, config: &IndexConfig, seed: &RandomSeed) -> Result<EndToEnd> {
    let start = Instant::now();
    let index = build_index(&data.points, config, seed)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let accept = 1.0 + 9.0 * config.epsilon;
    let mut answered = 0;
    let mut violations = 0;
    for q in data.queries.iter() {
        if let Some(p) = index.query(q)? {
            if l1_distance(data.points.point(p), q) <= accept {
                answered += 1;
            } else {
                violations += 1;
            }
        }
    }
    let mut control_null = 0;
    for q in controls.iter() {
        match index.query(q)? {
            None => control_null += 1,
            Some(p) if l1_distance(data.points.point(p), q) > accept => violations += 1,
            Some(_) => {}
        }
    }
    Ok(EndToEnd {
        k: index.k(),
        m: index.m(),
        answered,
        queries: data.queries.len() as u64,
        control_null,
        controls: controls.len() as u64,
        soundness_violations: violations,
        build_seconds,
    })
}

fn ann_end_to_end(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let (n, d, queries) = ctx.pick((1000, 256, 100), (200, 32, 20));
    let eps = 0.25;
    let base = ctx.seed_for("ann-end-to-end");
    let data = planted_reference(n, d, queries, &base.derive("data"))?;
    let controls = control_queries(&data.points, queries, 2.0 * (1.0 + 9.0 * eps), &base.derive("controls"))?;
    let oracle_ok = data
        .queries
        .iter()
        .zip(&data.planted)
        .all(|(q, &p)| linear_scan_oracle(&data.points, q, 1.0) == Some(p));
    let mut out = Vec::new();
    for variant in [Variant::Net, Variant::Grid] {
        let mut config = IndexConfig::new(eps, 2.0, variant, 0.1);
        config.amplification = REFERENCE_AMPLIFICATION;
        config.plan_constants = REFERENCE_PLAN;
        let r = end_to_end(&data, &controls, &config, &base.derive(&variant.to_string()))?;
        let success = proportion(r.answered, r.queries);
        let nulls = proportion(r.control_null, r.controls);
        out.push(
            record("ann-end-to-end", "planted queries answered with a valid point")
                .param("variant", variant.to_string())
                .param("epsilon", eps)
                .param("k", r.k)
                .param("m", r.m)
                .param("n", n)
                .param("d", d)
                .param("oracle_confirmed", oracle_ok)
                .analytic(0.9)
                .empirical(success.mean, success.standard_error)
                .pass(oracle_ok && success.mean >= 0.9),
        );
        out.push(
            record("ann-end-to-end", "control queries answered with null")
                .param("variant", variant.to_string())
                .param("controls", r.controls)
                .analytic(1.0)
                .empirical(nulls.mean, nulls.standard_error)
                .pass(r.control_null == r.controls),
        );
        out.push(
            record("ann-end-to-end", "soundness violations")
                .param("variant", variant.to_string())
                .analytic(0.0)
                .empirical(r.soundness_violations as f64, 0.0)
                .pass(r.soundness_violations == 0),
        );
    }
    Ok(out)
}

/// Per-point grid-embedding time (seconds) for each d at fixed k.
pub fn grid_embed_times(
    dims: &[usize],
    k: usize,
    points: usize,
    runs: usize,
    seed: &RandomSeed,
) -> Result<Vec<Timing>> {
    let eps = 0.25;
    let mut out = Vec::new();
    for &d in dims {
        let mut rng = seed.derive_indexed("points", d as u64).rng();
        let xs: Vec<f64> = (0..points * d).map(|_| 10.0 * half_open_unit(&mut rng)).collect();
        let grid = make_grid(d, eps / d as f64, &seed.derive_indexed("grid", d as u64))?;
        let matrix = make_projection(d, k, eps, &seed.derive_indexed("matrix", d as u64))?;
        let mut snapped = vec![0.0; d];
        let mut image = vec![0.0; k];
        let mut times = Vec::with_capacity(runs);
        for _ in 0..runs {
            let t = Instant::now();
            for x in xs.chunks_exact(d) {
                grid.snap_into(x, &mut snapped)?;
                matrix.project_into(&snapped, &mut image);
                std::hint::black_box(&image);
            }
            times.push(t.elapsed().as_secs_f64() / points as f64);
        }
        out.push(Timing::of(&times));
    }
    Ok(out)
}

fn grid_embed_cost(ctx: &CheckContext) -> Result<Vec<ReportRecord>> {
    let dims = [64usize, 256, 1024];
    let k = 128;
    let points = ctx.pick(2000, 200);
    let runs = ctx.pick(5, 3);
    let times = grid_embed_times(&dims, k, points, runs, &ctx.seed_for("grid-embed-cost"))?;
    let xs: Vec<f64> = dims.iter().map(|&d| (d * k) as f64).collect();
    let medians: Vec<f64> = times.iter().map(|t| t.median).collect();
    let c1 = fit_through_origin(&xs, &medians);
    let mut out = Vec::new();
    for ((&d, t), &x) in dims.iter().zip(&times).zip(&xs) {
        let rel = (t.median - c1 * x).abs() / (c1 * x);
        out.push(
            record("grid-embed-cost", "per-point time within 20% of c1*d*k")
                .param("d", d)
                .param("k", k)
                .param("points", points)
                .param("c1", c1)
                .param("relative_error", rel)
                .param("min_seconds", t.min)
                .param("max_seconds", t.max)
                .analytic(c1 * x)
                .empirical(t.median, 0.0)
                .pass(rel <= 0.2),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_check_is_rejected() {
        let ctx = CheckContext::new(1, Profile::Quick);
        assert!(matches!(run_check("nope", &ctx), Err(Error::UnknownCheck(_))));
        assert!(CHECK_NAMES.iter().all(|n| is_registered(n)));
    }

    #[test]
    fn empty_config_gives_empty_passing_report() {
        let out = run_verify(&VerifyConfig::default()).unwrap();
        assert!(out.records.is_empty() && out.pass);
    }

    #[test]
    fn unknown_name_fails_before_running() {
        let cfg = VerifyConfig {
            checks: vec!["norm-sandwich".into(), "bogus".into()],
            ..VerifyConfig::default()
        };
        assert!(matches!(run_verify(&cfg), Err(Error::UnknownCheck(n)) if n == "bogus"));
        let all = VerifyConfig::from_json(r#"{"checks": ["all"], "profile": "quick"}"#).unwrap();
        assert_eq!(all.resolved_checks().unwrap().len(), CHECK_NAMES.len());
        assert!(VerifyConfig::from_json(r#"{"chekcs": []}"#).is_err());
    }

    #[test]
    fn quick_sandwich_is_deterministic() {
        let ctx = CheckContext::new(3, Profile::Quick);
        let a = run_check("norm-sandwich", &ctx).unwrap();
        assert_eq!(a, run_check("norm-sandwich", &ctx).unwrap());
        assert!(a.iter().all(|r| r.pass));
    }
}
