//! The two near neighbor-preserving embeddings.
//!
//! Dataset points are first replaced by a representative (their net center,
//! or the anchor corner of their grid cell) and the representative is then
//! projected with a Cauchy matrix. Queries skip the representative step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::grid_partition::{build_cover, make_grid, GridCover, ShiftedGrid};
use crate::net_builder::{build_approx_net, NetBuilderConfig, NetResult};
use crate::points::{l1_distance, PointSet};
use crate::projection::{make_projection, scaling_factor, CauchyMatrix};
use crate::rng::RandomSeed;

/// Which representative map an embedding uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Net,
    Grid,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Net => "net",
            Variant::Grid => "grid",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "net" => Ok(Variant::Net),
            "grid" => Ok(Variant::Grid),
            other => Err(Error::domain(format!(
                "unknown variant `{other}` (expected net or grid)"
            ))),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 0.5 {
        Ok(())
    } else {
        Err(Error::domain(format!("epsilon must lie in (0, 1/2], got {epsilon}")))
    }
}

/// Greedy estimate of the doubling constant: for up to 64 evenly strided
/// centers p and every radius r, covers B(p, r) ∩ P greedily with balls of
/// radius r/2 centered at points and returns the largest cover size seen.
pub fn estimate_doubling_constant(points: &PointSet, scales: &[f64]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::domain("doubling estimate needs at least two points"));
    }
    if scales.is_empty() || scales.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::domain("doubling scales must be positive and non-empty"));
    }
    let n = points.len();
    let stride = n.div_ceil(64);
    let mut best = 1usize;
    let mut ball = Vec::new();
    let mut covered = Vec::new();
    for center in (0..n).step_by(stride) {
        let p = points.point(center);
        for &r in scales {
            ball.clear();
            ball.extend((0..n).filter(|&i| l1_distance(points.point(i), p) <= r));
            covered.clear();
            covered.resize(ball.len(), false);
            let mut count = 0;
            for a in 0..ball.len() {
                if covered[a] {
                    continue;
                }
                count += 1;
                let pa = points.point(ball[a]);
                for b in a..ball.len() {
                    if !covered[b] && l1_distance(pa, points.point(ball[b])) <= r / 2.0 {
                        covered[b] = true;
                    }
                }
            }
            best = best.max(count);
        }
    }
    Ok(best as f64)
}

/// Geometric radii from the spread of the set down by factors of two.
pub fn doubling_scales(points: &PointSet, count: usize) -> Vec<f64> {
    if points.is_empty() {
        return Vec::new();
    }
    let p0 = points.point(0);
    let reach = points.iter().map(|p| l1_distance(p, p0)).fold(0.0, f64::max);
    if reach == 0.0 {
        return vec![1.0];
    }
    (0..count.max(1)).map(|i| reach / 2f64.powi(i as i32)).collect()
}

/// Calibration constants of the target dimension formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConstants {
    /// Stands in for 1/ζ(ε).
    pub zeta_cal: f64,
    /// Stands in for the constant of the Θ(1/ε) exponent.
    pub exponent_cal: f64,
}

impl Default for PlanConstants {
    fn default() -> Self {
        Self {
            zeta_cal: 1.0,
            exponent_cal: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionPlan {
    pub k: usize,
    pub epsilon: f64,
    /// c for the net variant, d for the grid variant.
    pub scale_param: f64,
    pub lambda_estimate: f64,
    pub zeta_cal: f64,
    pub exponent_cal: f64,
    /// k from the calibrated formula alone.
    pub formula_k: usize,
    /// Smallest k meeting the far-point inequality at δ = ε/5.
    pub far_point_k: usize,
}

impl DimensionPlan {
    /// A plan with an explicit k, bypassing the formula.
    pub fn fixed(k: usize, epsilon: f64, scale_param: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if k == 0 {
            return Err(Error::domain("target dimension must be positive"));
        }
        Ok(Self {
            k,
            epsilon,
            scale_param,
            lambda_estimate: 1.0,
            zeta_cal: 1.0,
            exponent_cal: 1.0,
            formula_k: k,
            far_point_k: 0,
        })
    }

    pub fn escalated(&self) -> bool {
        self.far_point_k > self.formula_k
    }
}

/// D₀ = ⌈800·T/k⌉.
pub fn far_radius(k: usize) -> f64 {
    (800.0 * scaling_factor(k) / k as f64).ceil()
}

/// Smallest k with k > 4·log₂λ·log₂(c·D₀/ε) + 2·log₂(2λ/δ), D₀ = ⌈800T/k⌉,
/// found by fixed-point iteration from k = 32.
pub fn far_point_dimension(lambda: f64, epsilon: f64, scale_param: f64, delta: f64) -> Result<usize> {
    if !(lambda >= 1.0 && scale_param >= 1.0 && epsilon > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "invalid far-point parameters (lambda {lambda}, epsilon {epsilon}, scale {scale_param}, delta {delta})"
        )));
    }
    let rhs = |k: usize| {
        4.0 * lambda.log2() * (scale_param * far_radius(k) / epsilon).log2() + 2.0 * (2.0 * lambda / delta).log2()
    };
    let mut k = 32usize;
    for _ in 0..64 {
        let next = (rhs(k).floor() as usize + 1).max(1);
        if next == k {
            return Ok(k);
        }
        k = next;
    }
    Err(Error::Infeasible(format!(
        "far-point dimension did not converge in 64 steps (lambda {lambda}, epsilon {epsilon}, scale {scale_param}, delta {delta}, last k {k})"
    )))
}

/// k = ⌈ζ·max(2, log₂λ·log₂(scale/ε))^{a/ε}⌉, raised to the far-point
/// requirement at δ = ε/5 when that is larger.
pub fn plan_dimension(
    lambda_estimate: f64,
    epsilon: f64,
    scale_param: f64,
    constants: PlanConstants,
) -> Result<DimensionPlan> {
    check_epsilon(epsilon)?;
    if !(lambda_estimate >= 1.0 && lambda_estimate.is_finite()) {
        return Err(Error::domain(format!(
            "lambda estimate must be >= 1, got {lambda_estimate}"
        )));
    }
    if !(scale_param >= 1.0 && scale_param.is_finite()) {
        return Err(Error::domain(format!(
            "scale parameter must be >= 1, got {scale_param}"
        )));
    }
    if !(constants.zeta_cal > 0.0 && constants.exponent_cal > 0.0) {
        return Err(Error::domain("calibration constants must be positive"));
    }
    let base = (lambda_estimate.log2() * (scale_param / epsilon).log2()).max(2.0);
    let raw = constants.zeta_cal * base.powf(constants.exponent_cal / epsilon);
    if !raw.is_finite() || raw > u32::MAX as f64 {
        return Err(Error::Infeasible(format!(
            "planned dimension {raw:.3e} (lambda {lambda_estimate}, epsilon {epsilon}, scale {scale_param})"
        )));
    }
    let formula_k = (raw.ceil() as usize).max(1);
    let far_point_k = far_point_dimension(lambda_estimate, epsilon, scale_param, epsilon / 5.0)?;
    Ok(DimensionPlan {
        k: formula_k.max(far_point_k),
        epsilon,
        scale_param,
        lambda_estimate,
        zeta_cal: constants.zeta_cal,
        exponent_cal: constants.exponent_cal,
        formula_k,
        far_point_k,
    })
}

/// Embedded vectors, row-major n × k.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedDataset {
    pub variant: Variant,
    k: usize,
    vectors: Vec<f64>,
}

impl EmbeddedDataset {
    pub fn new(variant: Variant, k: usize, vectors: Vec<f64>) -> Result<Self> {
        if k == 0 || !vectors.len().is_multiple_of(k) {
            return Err(Error::Format {
                what: "embedded dataset",
                detail: format!("{} values do not split into rows of {k}", vectors.len()),
            });
        }
        Ok(Self { variant, k, vectors })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.k..(i + 1) * self.k]
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }
}

/// Projects the distinct representatives once and fans them out to points.
fn embed_by_slot(matrix: &CauchyMatrix, slots: &[usize], reps: &[&[f64]], variant: Variant) -> EmbeddedDataset {
    let k = matrix.target_dim();
    let mut images = vec![0.0; reps.len() * k];
    for (rep, out) in reps.iter().zip(images.chunks_exact_mut(k)) {
        matrix.project_into(rep, out);
    }
    let mut vectors = Vec::with_capacity(slots.len() * k);
    for &s in slots {
        vectors.extend_from_slice(&images[s * k..(s + 1) * k]);
    }
    EmbeddedDataset { variant, k, vectors }
}

/// h = f∘g with g the assignment of an approximate (ε/c)-net.
#[derive(Clone, Debug, PartialEq)]
pub struct NetEmbedding {
    pub net: NetResult,
    pub matrix: CauchyMatrix,
    pub plan: DimensionPlan,
    pub epsilon: f64,
}

impl NetEmbedding {
    /// Pairs an existing net of `points` with a fresh matrix drawn from `seed`.
    pub fn with_net(
        points: &PointSet,
        net: NetResult,
        epsilon: f64,
        plan: &DimensionPlan,
        seed: &RandomSeed,
    ) -> Result<(Self, EmbeddedDataset)> {
        check_epsilon(epsilon)?;
        check_dim(points.len(), net.assignment.len())?;
        let matrix = make_projection(points.dim(), plan.k, epsilon, seed)?;
        let mut slot_of_center = vec![usize::MAX; points.len()];
        for (s, &c) in net.centers.iter().enumerate() {
            slot_of_center[c] = s;
        }
        let slots: Vec<usize> = net.assignment.iter().map(|&c| slot_of_center[c]).collect();
        if slots.contains(&usize::MAX) {
            return Err(Error::domain("net assigns a point to a non-center"));
        }
        let reps: Vec<&[f64]> = net.centers.iter().map(|&c| points.point(c)).collect();
        let data = embed_by_slot(&matrix, &slots, &reps, Variant::Net);
        Ok((
            Self {
                net,
                matrix,
                plan: plan.clone(),
                epsilon,
            },
            data,
        ))
    }
}

pub fn embed_dataset_net(
    points: &PointSet,
    epsilon: f64,
    c: f64,
    plan: &DimensionPlan,
    seed: &RandomSeed,
) -> Result<(NetEmbedding, EmbeddedDataset)> {
    check_epsilon(epsilon)?;
    let config = NetBuilderConfig::new(points.len(), points.dim(), epsilon / c, c, &seed.derive("net"))?;
    let net = build_approx_net(points, &config)?;
    NetEmbedding::with_net(points, net, epsilon, plan, &seed.derive("matrix"))
}

/// h′ = f∘g_{ε/d}: snap to the anchor corner of a shifted grid of width ε/d,
/// then project.
#[derive(Clone, Debug, PartialEq)]
pub struct GridEmbedding {
    pub grid: ShiftedGrid,
    pub cover: GridCover,
    pub matrix: CauchyMatrix,
    pub plan: DimensionPlan,
    pub epsilon: f64,
}

impl GridEmbedding {
    /// Embeds an arbitrary point without reference to the dataset.
    pub fn embed_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut snapped = vec![0.0; x.len()];
        self.grid.snap_into(x, &mut snapped)?;
        self.matrix.project(&snapped)
    }
}

pub fn embed_dataset_grid(
    points: &PointSet,
    epsilon: f64,
    plan: &DimensionPlan,
    seed: &RandomSeed,
) -> Result<(GridEmbedding, EmbeddedDataset)> {
    check_epsilon(epsilon)?;
    let d = points.dim();
    let grid = make_grid(d, epsilon / d as f64, &seed.derive("grid"))?;
    let cover = build_cover(&grid, points)?;
    let matrix = make_projection(d, plan.k, epsilon, &seed.derive("matrix"))?;
    let slots: Vec<usize> = (0..points.len()).map(|i| cover.cell_index_of(i)).collect();
    let reps: Vec<&[f64]> = cover.cells.iter().map(|c| c.representative.as_slice()).collect();
    let data = embed_by_slot(&matrix, &slots, &reps, Variant::Grid);
    Ok((
        GridEmbedding {
            grid,
            cover,
            matrix,
            plan: plan.clone(),
            epsilon,
        },
        data,
    ))
}

/// Either embedding, for code that handles both.
#[derive(Clone, Debug, PartialEq)]
pub enum Embedding {
    Net(NetEmbedding),
    Grid(GridEmbedding),
}

impl Embedding {
    pub fn variant(&self) -> Variant {
        match self {
            Embedding::Net(_) => Variant::Net,
            Embedding::Grid(_) => Variant::Grid,
        }
    }

    pub fn matrix(&self) -> &CauchyMatrix {
        match self {
            Embedding::Net(e) => &e.matrix,
            Embedding::Grid(e) => &e.matrix,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Embedding::Net(e) => e.epsilon,
            Embedding::Grid(e) => e.epsilon,
        }
    }

    pub fn plan(&self) -> &DimensionPlan {
        match self {
            Embedding::Net(e) => &e.plan,
            Embedding::Grid(e) => &e.plan,
        }
    }

    /// The representative of dataset point `i`.
    pub fn representative<'a>(&'a self, points: &'a PointSet, i: usize) -> &'a [f64] {
        match self {
            Embedding::Net(e) => points.point(e.net.assignment[i]),
            Embedding::Grid(e) => e.cover.representative_of(i),
        }
    }

    pub fn embed_query(&self, q: &[f64]) -> Result<Vec<f64>> {
        embed_query(self.matrix(), q)
    }
}

impl From<NetEmbedding> for Embedding {
    fn from(e: NetEmbedding) -> Self {
        Embedding::Net(e)
    }
}

impl From<GridEmbedding> for Embedding {
    fn from(e: GridEmbedding) -> Self {
        Embedding::Grid(e)
    }
}

/// f(q): queries are projected directly.
pub fn embed_query(matrix: &CauchyMatrix, q: &[f64]) -> Result<Vec<f64>> {
    matrix.project(q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarPointAudit {
    pub d0: f64,
    /// Points whose representative lies at distance ≥ D₀ from q.
    pub far_points: usize,
    /// Far points embedded closer than 4 to f(q).
    pub violations: usize,
    pub pass: bool,
}

/// Checks that every representative at distance ≥ D₀ from q lands at
/// distance ≥ 4 from f(q).
pub fn far_point_audit(
    embedding: &Embedding,
    points: &PointSet,
    data: &EmbeddedDataset,
    q: &[f64],
    d0_override: Option<f64>,
) -> Result<FarPointAudit> {
    points.check_query(q)?;
    check_dim(points.len(), data.len())?;
    let d0 = d0_override.unwrap_or_else(|| far_radius(data.k()));
    let fq = embedding.embed_query(q)?;
    let mut far_points = 0;
    let mut violations = 0;
    for i in 0..points.len() {
        if l1_distance(embedding.representative(points, i), q) >= d0 {
            far_points += 1;
            if l1_distance(data.vector(i), &fq) < 4.0 {
                violations += 1;
            }
        }
    }
    Ok(FarPointAudit {
        d0,
        far_points,
        violations,
        pass: violations == 0,
    })
}

/// Fraction of fresh k×d matrices for which some representative at distance
/// ≥ D₀ from q lands closer than 4 to f(q).
pub fn far_point_failure_rate(
    representatives: &PointSet,
    q: &[f64],
    k: usize,
    epsilon: f64,
    trials: u64,
    seed: &RandomSeed,
) -> Result<(f64, usize)> {
    representatives.check_query(q)?;
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let d0 = far_radius(k);
    let diffs: Vec<Vec<f64>> = representatives
        .iter()
        .filter(|s| l1_distance(s, q) >= d0)
        .map(|s| s.iter().zip(q).map(|(a, b)| a - b).collect())
        .collect();
    let mut failures = 0u64;
    let mut image = vec![0.0; k];
    for t in 0..trials {
        let m = make_projection(representatives.dim(), k, epsilon, &seed.derive_indexed("matrix", t))?;
        let failed = diffs.iter().any(|u| {
            m.project_into(u, &mut image);
            image.iter().map(|x| x.abs()).sum::<f64>() < 4.0
        });
        failures += failed as u64;
    }
    Ok((failures as f64 / trials as f64, diffs.len()))
}

/// Outcome of the two distance conditions for one embedding and query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessOutcome {
    /// ‖h(p*) − f(q)‖₁ ≤ 1 + 3ε for the nearest p* (vacuous if none within 1).
    pub near_ok: bool,
    /// Every p with ‖p − q‖₁ > 1 + 9ε has ‖h(p) − f(q)‖₁ > 1 + 3ε.
    pub far_ok: bool,
}

impl SuccessOutcome {
    pub fn holds(&self) -> bool {
        self.near_ok && self.far_ok
    }
}

/// Evaluates both conditions against exact original-space distances.
pub fn success_conditions(
    points: &PointSet,
    data: &EmbeddedDataset,
    fq: &[f64],
    q: &[f64],
    epsilon: f64,
) -> Result<SuccessOutcome> {
    points.check_query(q)?;
    check_dim(data.k(), fq.len())?;
    check_dim(points.len(), data.len())?;
    let threshold = 1.0 + 3.0 * epsilon;
    let far = 1.0 + 9.0 * epsilon;
    let mut nearest: Option<(f64, usize)> = None;
    let mut far_ok = true;
    for i in 0..points.len() {
        let dist = points.distance_to(i, q);
        if dist <= 1.0 && nearest.is_none_or(|(best, _)| dist < best) {
            nearest = Some((dist, i));
        }
        if dist > far && l1_distance(data.vector(i), fq) <= threshold {
            far_ok = false;
        }
    }
    let near_ok = nearest.is_none_or(|(_, i)| l1_distance(data.vector(i), fq) <= threshold);
    Ok(SuccessOutcome { near_ok, far_ok })
}
