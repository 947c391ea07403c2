//! Approximate r-nets in ℓ1 through grid-restricted Hamming LSH.
//!
//! The builder rescales the input so that r = 1, then hashes every point
//! with a two-level key: the id of its cell in a randomly shifted grid of side
//! 2, followed by a concatenation of bit samples from the unary code of the
//! point's snapped in-cell coordinates. Points are then visited in input
//! order; an unmarked point becomes a center and marks every unmarked point
//! that shares a bucket with it in some table and lies within c·r. Covering
//! therefore holds by construction. Packing holds unless the hash tables miss
//! a pair closer than r, so every attempt ends with an exact packing sweep and
//! is retried from a fresh substream if the sweep fails.
//!
//! Unary codes are never materialised. Bit `i` of the code of a snapped
//! coordinate `z` is set iff `i < z`, so the sampled bits of one coordinate
//! are determined by how many of its sampled positions fall below `z`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::{l1_distance, PointSet};
use crate::rng::{below, half_open_unit, RandomSeed};

const UNASSIGNED: usize = usize::MAX;
/// Upper bound on the bucket storage a single attempt may allocate.
const MAX_TABLE_ENTRIES: u64 = 1 << 25;

/// A c-approximate r-net together with the covering assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetResult {
    pub r: f64,
    pub c: f64,
    /// Point indices of the centers, in the order they were selected.
    pub centers: Vec<usize>,
    /// For every point, the point index of the center covering it.
    pub assignment: Vec<usize>,
    pub certified: bool,
}

impl NetResult {
    pub fn center_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Free constants of the construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConstants {
    /// a₁ in num_tables = ⌈a₁ · ln n / p_near⌉.
    pub table_factor: f64,
    /// a₂ in the false-positive budget ⌈a₂ · num_tables · n² · β⌉.
    pub fp_factor: f64,
    /// Cap on outer repetitions (the default is ⌈log₂ n⌉ + 1).
    pub max_repeats: usize,
}

impl Default for NetConstants {
    fn default() -> Self {
        Self {
            table_factor: 1.0,
            fp_factor: 4.0,
            max_repeats: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetBuilderConfig {
    pub r: f64,
    pub c: f64,
    /// Snapping step after rescaling, 2/levels.
    pub delta_snap: f64,
    /// Unary code length per coordinate, ⌈2/δ⌉ with δ = 1/(10·d·c).
    pub levels: u32,
    pub grid_side: f64,
    /// Effective LSH exponent: the near-pair collision probability per table
    /// is n^{−1/c′}.
    pub c_prime: f64,
    /// Lower bound on the per-table collision probability of a pair at
    /// distance ≤ r.
    pub near_collision: f64,
    /// Upper bound on the per-table collision probability of a pair at
    /// distance ≥ c·r.
    pub far_collision: f64,
    pub num_tables: usize,
    pub concat_len: usize,
    /// False positives (scanned candidates farther than c·r) tolerated over
    /// one greedy pass before the attempt is abandoned.
    pub fp_budget: u64,
    pub repeats: usize,
    pub seed: RandomSeed,
}

impl NetBuilderConfig {
    pub fn new(n: usize, d: usize, r: f64, c: f64, seed: &RandomSeed) -> Result<Self> {
        Self::with_constants(n, d, r, c, seed, NetConstants::default())
    }

    pub fn with_constants(
        n: usize,
        d: usize,
        r: f64,
        c: f64,
        seed: &RandomSeed,
        constants: NetConstants,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("cannot build a net of an empty point set"));
        }
        if d == 0 {
            return Err(Error::domain("point dimension must be positive"));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("net radius must be positive, got {r}")));
        }
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::domain(format!("approximation factor must be >= 1, got {c}")));
        }
        if !(constants.table_factor > 0.0 && constants.fp_factor > 0.0) {
            return Err(Error::domain("net constants must be positive"));
        }
        let df = d as f64;
        let levels_f = (20.0 * df * c).ceil();
        if levels_f > u32::MAX as f64 {
            return Err(Error::Infeasible(format!("{levels_f} snapping levels")));
        }
        let levels = levels_f as u32;
        let delta = 2.0 / levels_f;
        let code_len = df * levels_f;
        // Hamming distances of same-cell pairs after snapping (±1 per axis)
        let near_hamming = 1.0 / delta + df;
        let far_hamming = c / delta - df;
        let ln_n = (n.max(2) as f64).ln();

        let far_bit = 1.0 - far_hamming / code_len;
        let concat_len = if far_bit <= 0.0 {
            // a same-cell pair can never be c apart
            0
        } else {
            (ln_n / -far_bit.ln()).ceil() as usize
        };
        let near_bit = (1.0 - near_hamming / code_len).max(0.0);
        let near_collision = 0.5 * near_bit.powi(concat_len as i32);
        let far_collision = far_bit.max(0.0).powi(concat_len as i32);
        if !(near_collision > 0.0) {
            return Err(Error::Infeasible(format!(
                "near-pair collision probability underflows (d = {d}, c = {c}, n = {n})"
            )));
        }
        let c_prime = ln_n / (1.0 / near_collision).ln();
        let num_tables = ((constants.table_factor * ln_n / near_collision).ceil() as usize).max(1);
        if (num_tables as u64).saturating_mul(n as u64) > MAX_TABLE_ENTRIES {
            return Err(Error::Infeasible(format!(
                "{num_tables} hash tables over {n} points exceed the storage cap"
            )));
        }
        // β = 1/n per far pair: a₂ · L · n² · β
        let fp_budget = (constants.fp_factor * num_tables as f64 * n as f64).ceil() as u64;
        let repeats = ((n as f64).log2().ceil() as usize + 1).clamp(1, constants.max_repeats.max(1));
        Ok(Self {
            r,
            c,
            delta_snap: delta,
            levels,
            grid_side: 2.0,
            c_prime,
            near_collision,
            far_collision,
            num_tables,
            concat_len,
            fp_budget,
            repeats,
            seed: seed.clone(),
        })
    }
}

/// Divides every coordinate by `r`, so that distances shrink by 1/r.
pub fn rescale_to_unit(points: &PointSet, r: f64) -> Result<PointSet> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("rescale radius must be positive, got {r}")));
    }
    let inv = 1.0 / r;
    Ok(points.map_coords(|x| x * inv))
}

/// `z` ones followed by `levels − z` zeros.
pub fn unary_encode(z: u32, levels: u32) -> Result<Vec<bool>> {
    if z > levels {
        return Err(Error::domain(format!("unary value {z} exceeds {levels} levels")));
    }
    Ok((0..levels).map(|i| i < z).collect())
}

pub fn hamming_distance(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Randomly shifted grid of side 2 plus δ-snapping inside each cell
/// (coordinates already rescaled to r = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct SnapGrid {
    offsets: Vec<f64>,
    side: f64,
    delta: f64,
    levels: u32,
}

impl SnapGrid {
    pub fn sample(d: usize, config: &NetBuilderConfig, seed: &RandomSeed) -> Self {
        let mut rng = seed.rng();
        let side = config.grid_side;
        Self {
            offsets: (0..d).map(|_| side * half_open_unit(&mut rng)).collect(),
            side,
            delta: config.delta_snap,
            levels: config.levels,
        }
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Cell id and snapped level of coordinate `j`.
    #[inline]
    pub fn snap_coord(&self, j: usize, x: f64) -> (i64, u32) {
        let shifted = x - self.offsets[j];
        let cell = (shifted * (1.0 / self.side)).floor();
        let rel = shifted - cell * self.side;
        let z = (rel * (1.0 / self.delta)).round().clamp(0.0, self.levels as f64) as u32;
        (cell as i64, z)
    }

    pub fn snap(&self, x: &[f64]) -> (Vec<i64>, Vec<u32>) {
        x.iter().enumerate().map(|(j, &v)| self.snap_coord(j, v)).unzip()
    }

    /// Full unary code of a snapped point, `d · levels` bits.
    pub fn unary_code(&self, x: &[f64]) -> Vec<bool> {
        let (_, z) = self.snap(x);
        z.iter().flat_map(|&zj| (0..self.levels).map(move |i| i < zj)).collect()
    }
}

/// One hash function of the two-level family: grid cell id followed by
/// `concat_len` bit samples of the unary code.
#[derive(Clone, Debug)]
pub struct BucketHasher {
    grid: SnapGrid,
    /// Sampled bit positions grouped by coordinate: `thresholds[starts[j]..starts[j+1]]`, sorted.
    starts: Vec<u32>,
    thresholds: Vec<u32>,
}

impl BucketHasher {
    pub fn sample(d: usize, config: &NetBuilderConfig, seed: &RandomSeed) -> Self {
        let grid = SnapGrid::sample(d, config, &seed.derive("grid"));
        let mut rng = seed.derive("bits").rng();
        let mut samples: Vec<(u32, u32)> = (0..config.concat_len)
            .map(|_| {
                let j = below(&mut rng, d as u64) as u32;
                let pos = below(&mut rng, config.levels as u64) as u32;
                (j, pos)
            })
            .collect();
        samples.sort_unstable();
        let mut starts = vec![0u32; d + 1];
        for &(j, _) in &samples {
            starts[j as usize + 1] += 1;
        }
        for j in 0..d {
            starts[j + 1] += starts[j];
        }
        Self {
            grid,
            starts,
            thresholds: samples.into_iter().map(|(_, pos)| pos).collect(),
        }
    }

    pub fn grid(&self) -> &SnapGrid {
        &self.grid
    }

    /// Bucket key of a point in rescaled coordinates.
    pub fn key(&self, x: &[f64]) -> u64 {
        let g = &self.grid;
        let inv_side = 1.0 / g.side;
        let inv_delta = 1.0 / g.delta;
        let mut h = 0x243F_6A88_85A3_08D3u64;
        for (j, &v) in x.iter().enumerate() {
            let shifted = v - g.offsets[j];
            let cell = (shifted * inv_side).floor();
            let thr = &self.thresholds[self.starts[j] as usize..self.starts[j + 1] as usize];
            let ones = if thr.is_empty() {
                0
            } else {
                let rel = shifted - cell * g.side;
                let z = (rel * inv_delta).round().clamp(0.0, g.levels as f64) as u32;
                // sampled positions below z are exactly the set bits
                thr.partition_point(|&t| t < z) as u64
            };
            h = mix(h, (cell as i64 as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ ones);
        }
        h
    }
}

#[inline]
fn mix(h: u64, v: u64) -> u64 {
    let mut x = (h ^ v.wrapping_mul(0x9E37_79B9_7F4A_7C15)).rotate_left(29);
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^ (x >> 32)
}

/// Points grouped by bucket for one hash function.
struct LshTable {
    bucket_of: Vec<u32>,
    starts: Vec<u32>,
    order: Vec<u32>,
}

impl LshTable {
    fn build(points: &PointSet, hasher: &BucketHasher) -> Self {
        let n = points.len();
        let mut keyed: Vec<(u64, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (hasher.key(p), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut bucket_of = vec![0u32; n];
        let mut starts = Vec::new();
        let mut order = Vec::with_capacity(n);
        let mut prev = None;
        for (pos, &(key, i)) in keyed.iter().enumerate() {
            if prev != Some(key) {
                starts.push(pos as u32);
                prev = Some(key);
            }
            bucket_of[i as usize] = (starts.len() - 1) as u32;
            order.push(i);
        }
        starts.push(n as u32);
        Self {
            bucket_of,
            starts,
            order,
        }
    }

    #[inline]
    fn bucket(&self, i: usize) -> &[u32] {
        let b = self.bucket_of[i] as usize;
        &self.order[self.starts[b] as usize..self.starts[b + 1] as usize]
    }
}

/// Counters from one call of [`build_approx_net_with_stats`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetBuildStats {
    pub attempts: usize,
    pub queries: u64,
    /// Candidates whose distance was evaluated, summed over all attempts.
    pub distance_evaluations: u64,
    /// False positives seen in the attempt that produced the result.
    pub false_positives: u64,
    pub max_false_positives_per_query: u64,
    pub budget_exhausted_attempts: usize,
    pub packing_failed_attempts: usize,
}

enum Attempt {
    Done(NetResult),
    BudgetExhausted,
}

/// Builds a c-approximate r-net; see the module docs for the procedure.
pub fn build_approx_net(points: &PointSet, config: &NetBuilderConfig) -> Result<NetResult> {
    Ok(build_approx_net_with_stats(points, config)?.0)
}

pub fn build_approx_net_with_stats(points: &PointSet, config: &NetBuilderConfig) -> Result<(NetResult, NetBuildStats)> {
    if points.is_empty() {
        return Err(Error::domain("cannot build a net of an empty point set"));
    }
    let unit = rescale_to_unit(points, config.r)?;
    let mut stats = NetBuildStats::default();
    let mut last = None;
    for attempt in 0..config.repeats {
        stats.attempts += 1;
        let seed = config.seed.derive_indexed("attempt", attempt as u64);
        let tables = build_tables(&unit, config, &seed);
        let final_attempt = attempt + 1 == config.repeats;
        match greedy(&unit, config, &tables, !final_attempt, &mut stats) {
            Attempt::BudgetExhausted => {
                stats.budget_exhausted_attempts += 1;
            }
            Attempt::Done(mut net) => {
                net.r = config.r;
                let packed = packing_holds(&unit, &net.centers, 1.0);
                if !packed {
                    stats.packing_failed_attempts += 1;
                }
                net.certified = packed && stats.false_positives <= config.fp_budget;
                if net.certified {
                    return Ok((net, stats));
                }
                last = Some(net);
            }
        }
    }
    // every attempt failed; the last one ran without a budget
    let mut net = last.expect("final attempt always completes");
    if !packing_holds(&unit, &net.centers, 1.0) {
        return Err(Error::Infeasible(format!(
            "packing violated in all {} attempts; raise the table count",
            config.repeats
        )));
    }
    net.certified = false;
    Ok((net, stats))
}

fn build_tables(unit: &PointSet, config: &NetBuilderConfig, seed: &RandomSeed) -> Vec<LshTable> {
    (0..config.num_tables)
        .map(|t| {
            let hasher = BucketHasher::sample(unit.dim(), config, &seed.derive_indexed("table", t as u64));
            LshTable::build(unit, &hasher)
        })
        .collect()
}

fn greedy(
    unit: &PointSet,
    config: &NetBuilderConfig,
    tables: &[LshTable],
    enforce_budget: bool,
    stats: &mut NetBuildStats,
) -> Attempt {
    let n = unit.len();
    let cover = config.c;
    let mut assignment = vec![UNASSIGNED; n];
    let mut is_center = vec![false; n];
    let mut centers = Vec::new();
    let mut stamp = vec![0u32; n];
    let mut to_mark = Vec::new();
    let mut false_positives = 0u64;
    let mut query = 0u32;

    for i in 0..n {
        if assignment[i] != UNASSIGNED {
            continue;
        }
        query += 1;
        stats.queries += 1;
        stamp[i] = query;
        to_mark.clear();
        let mut near_center: Option<(f64, usize)> = None;
        let mut fp_here = 0u64;
        let p = unit.point(i);
        for table in tables {
            for &j in table.bucket(i) {
                let j = j as usize;
                if stamp[j] == query {
                    continue;
                }
                stamp[j] = query;
                let center_here = is_center[j];
                if !center_here && assignment[j] != UNASSIGNED {
                    continue;
                }
                stats.distance_evaluations += 1;
                let dist = l1_distance(p, unit.point(j));
                if center_here {
                    if dist <= 1.0 && near_center.is_none_or(|(best, _)| dist < best) {
                        near_center = Some((dist, j));
                    }
                } else if dist <= cover {
                    to_mark.push(j);
                } else {
                    fp_here += 1;
                }
            }
        }
        false_positives += fp_here;
        stats.max_false_positives_per_query = stats.max_false_positives_per_query.max(fp_here);
        if enforce_budget && false_positives > config.fp_budget {
            return Attempt::BudgetExhausted;
        }
        if let Some((_, center)) = near_center {
            // a retained center within r that the earlier pass missed
            assignment[i] = center;
            continue;
        }
        is_center[i] = true;
        centers.push(i);
        assignment[i] = i;
        for &j in &to_mark {
            assignment[j] = i;
        }
    }
    stats.false_positives = false_positives;
    Attempt::Done(NetResult {
        r: 1.0,
        c: config.c,
        centers,
        assignment,
        certified: false,
    })
}

/// Exact check that no two centers lie within `r`: sweep over centers sorted
/// by coordinate sum, since |Σx − Σy| ≤ ‖x − y‖₁.
fn packing_holds(points: &PointSet, centers: &[usize], r: f64) -> bool {
    let mut keyed: Vec<(f64, usize)> = centers
        .iter()
        .map(|&c| (points.point(c).iter().sum::<f64>(), c))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (a, &(sa, ca)) in keyed.iter().enumerate() {
        for &(sb, cb) in &keyed[a + 1..] {
            if sb - sa > r {
                break;
            }
            if l1_distance(points.point(ca), points.point(cb)) <= r {
                return false;
            }
        }
    }
    true
}

/// Exact greedy 1-approximate r-net by linear scan over the retained centers.
pub fn brute_force_net(points: &PointSet, r: f64) -> Result<NetResult> {
    if points.is_empty() {
        return Err(Error::domain("cannot build a net of an empty point set"));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("net radius must be positive, got {r}")));
    }
    let mut centers: Vec<usize> = Vec::new();
    let mut assignment = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        match centers.iter().find(|&&c| l1_distance(points.point(c), p) <= r) {
            Some(&c) => assignment.push(c),
            None => {
                centers.push(i);
                assignment.push(i);
            }
        }
    }
    Ok(NetResult {
        r,
        c: 1.0,
        centers,
        assignment,
        certified: true,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetVerification {
    pub packing_ok: bool,
    pub covering_ok: bool,
    /// max over points of ‖p − center(p)‖₁ / r.
    pub worst_cover_ratio: f64,
}

/// Checks packing, covering and the assignment against the definition.
pub fn verify_net(points: &PointSet, net: &NetResult) -> NetVerification {
    let n = points.len();
    let mut is_center = vec![false; n];
    for &c in &net.centers {
        if c < n {
            is_center[c] = true;
        }
    }
    let mut packing_ok = net.centers.iter().all(|&c| c < n);
    if packing_ok {
        'outer: for (a, &ca) in net.centers.iter().enumerate() {
            for &cb in &net.centers[a + 1..] {
                if points.distance(ca, cb) <= net.r {
                    packing_ok = false;
                    break 'outer;
                }
            }
        }
    }
    let mut covering_ok = net.assignment.len() == n;
    let mut worst = 0.0f64;
    if covering_ok {
        for (i, &c) in net.assignment.iter().enumerate() {
            if c >= n || !is_center[c] || (is_center[i] && c != i) {
                covering_ok = false;
                worst = f64::INFINITY;
                break;
            }
            let ratio = points.distance(i, c) / net.r;
            worst = worst.max(ratio);
            if ratio > net.c * (1.0 + 1e-12) {
                covering_ok = false;
            }
        }
    } else {
        worst = f64::INFINITY;
    }
    NetVerification {
        packing_ok,
        covering_ok,
        worst_cover_ratio: worst,
    }
}

/// Orders NetResults by center count; handy for reporting.
pub fn compare_sizes(a: &NetResult, b: &NetResult) -> Ordering {
    a.centers.len().cmp(&b.centers.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::open_unit;

    fn line(xs: &[f64]) -> PointSet {
        PointSet::new(1, xs.to_vec()).unwrap()
    }

    fn build(points: &PointSet, r: f64, c: f64, seed: u64) -> (NetResult, NetBuildStats) {
        let config = NetBuilderConfig::new(points.len(), points.dim(), r, c, &RandomSeed::new(seed)).unwrap();
        build_approx_net_with_stats(points, &config).unwrap()
    }

    #[test]
    fn rescale_examples() {
        let p = PointSet::from_rows(2, &[[2.0, 4.0]]).unwrap();
        assert_eq!(rescale_to_unit(&p, 1.0).unwrap(), p);
        assert_eq!(rescale_to_unit(&p, 2.0).unwrap().point(0), &[1.0, 2.0]);
        assert!(rescale_to_unit(&p, 0.0).is_err());
        assert!(rescale_to_unit(&p, -1.0).is_err());
    }

    #[test]
    fn unary_examples() {
        let b = |s: &str| s.chars().map(|c| c == '1').collect::<Vec<_>>();
        assert_eq!(unary_encode(0, 4).unwrap(), b("0000"));
        assert_eq!(unary_encode(3, 5).unwrap(), b("11100"));
        let (x, y) = (unary_encode(2, 6).unwrap(), unary_encode(5, 6).unwrap());
        assert_eq!(hamming_distance(&x, &y), 3);
        assert!(unary_encode(7, 6).is_err());
    }

    #[test]
    fn config_parameters() {
        let cfg = NetBuilderConfig::new(1000, 10, 1.0, 2.0, &RandomSeed::new(1)).unwrap();
        assert_eq!(cfg.levels, 400);
        assert!((cfg.delta_snap - 0.005).abs() < 1e-15);
        assert!(cfg.num_tables >= 1);
        assert!(cfg.far_collision <= 1.0 / 1000.0 + 1e-12);
        assert!(cfg.c_prime >= 1.0, "{}", cfg.c_prime);
        assert!(NetBuilderConfig::new(0, 10, 1.0, 2.0, &RandomSeed::new(1)).is_err());
        assert!(NetBuilderConfig::new(5, 10, 1.0, 0.5, &RandomSeed::new(1)).is_err());
        assert!(NetBuilderConfig::new(5, 10, 0.0, 2.0, &RandomSeed::new(1)).is_err());
    }

    #[test]
    fn single_point_and_duplicates() {
        let (net, _) = build(&line(&[3.0]), 0.5, 2.0, 1);
        assert_eq!(net.centers, vec![0]);
        assert_eq!(net.assignment, vec![0]);
        assert!(net.certified);

        let p = PointSet::from_rows(3, &vec![[1.0, -2.0, 0.5]; 20]).unwrap();
        let (net, _) = build(&p, 1.0, 1.5, 2);
        assert_eq!(net.centers, vec![0]);
        assert!(net.assignment.iter().all(|&a| a == 0));
    }

    #[test]
    fn one_dimensional_example_matches_oracle() {
        let p = line(&[0.0, 0.5, 2.0]);
        let oracle = brute_force_net(&p, 1.0).unwrap();
        assert_eq!(oracle.centers, vec![0, 2]);
        assert_eq!(oracle.assignment, vec![0, 0, 2]);
        for seed in 0..20 {
            let (net, _) = build(&p, 1.0, 1.0, seed);
            assert_eq!(net.centers, oracle.centers);
            assert_eq!(net.assignment, oracle.assignment);
        }
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_net(&line(&[1.0]), 2.0).unwrap().centers, vec![0]);
        assert_eq!(brute_force_net(&line(&[0.0, 0.5]), 1.0).unwrap().centers, vec![0]);
        assert_eq!(brute_force_net(&line(&[0.0, 2.0]), 1.0).unwrap().centers, vec![0, 1]);
        let p = line(&[0.0, 0.3, 0.9, 1.7, 2.2, 5.0]);
        let v = verify_net(&p, &brute_force_net(&p, 1.0).unwrap());
        assert!(v.packing_ok && v.covering_ok && v.worst_cover_ratio <= 1.0);
    }

    #[test]
    fn verify_detects_coincident_centers() {
        let p = line(&[0.0, 0.0, 4.0]);
        let net = NetResult {
            r: 1.0,
            c: 1.0,
            centers: vec![0, 1, 2],
            assignment: vec![0, 1, 2],
            certified: false,
        };
        let v = verify_net(&p, &net);
        assert!(!v.packing_ok);
        assert!(v.covering_ok);
        let uncovered = NetResult {
            centers: vec![0],
            assignment: vec![0, 0, 0],
            ..net
        };
        assert!(!verify_net(&p, &uncovered).covering_ok);
    }

    #[test]
    fn low_dimensional_cloud_in_twenty_dimensions() {
        // 500 points on a random 3-dimensional subspace of ℝ²⁰
        let mut rng = RandomSeed::new(9).rng();
        let basis: Vec<f64> = (0..60).map(|_| open_unit(&mut rng) - 0.5).collect();
        let mut coords = Vec::new();
        for _ in 0..500 {
            let a: Vec<f64> = (0..3).map(|_| 6.0 * open_unit(&mut rng)).collect();
            for j in 0..20 {
                coords.push((0..3).map(|t| a[t] * basis[t * 20 + j]).sum());
            }
        }
        let p = PointSet::new(20, coords).unwrap();
        let (net, stats) = build(&p, 1.0, 2.0, 4);
        let v = verify_net(&p, &net);
        assert!(v.packing_ok && v.covering_ok, "{v:?} {stats:?}");
        assert!(net.certified);
        assert!(v.worst_cover_ratio <= 2.0);
        let cfg = NetBuilderConfig::new(500, 20, 1.0, 2.0, &RandomSeed::new(4)).unwrap();
        assert!(stats.false_positives <= cfg.fp_budget);
    }

    #[test]
    fn snapping_error_is_at_most_one_per_axis() {
        let d = 6;
        let cfg = NetBuilderConfig::new(100, d, 1.0, 2.0, &RandomSeed::new(3)).unwrap();
        let mut rng = RandomSeed::new(5).rng();
        let mut tested = 0;
        let mut per_axis_ok = 0;
        while tested < 500 {
            let grid = SnapGrid::sample(d, &cfg, &RandomSeed::new(tested as u64 + 100));
            let p: Vec<f64> = (0..d).map(|_| 4.0 * open_unit(&mut rng)).collect();
            let q: Vec<f64> = p.iter().map(|x| x + 0.4 * (open_unit(&mut rng) - 0.5)).collect();
            let (cp, zp) = grid.snap(&p);
            let (cq, zq) = grid.snap(&q);
            if cp != cq {
                continue;
            }
            tested += 1;
            let code_dist = hamming_distance(&grid.unary_code(&p), &grid.unary_code(&q)) as f64;
            let scaled = l1_distance(&p, &q) / grid.delta();
            assert!((code_dist - scaled).abs() <= d as f64 + 1e-9, "{code_dist} vs {scaled}");
            if zp.iter().zip(&zq).zip(p.iter().zip(&q)).all(|((a, b), (x, y))| {
                ((*a as f64 - *b as f64).abs() - (x - y).abs() / grid.delta()).abs() <= 1.0 + 1e-9
            }) {
                per_axis_ok += 1;
            }
        }
        assert_eq!(per_axis_ok, 500);
    }

    #[test]
    fn near_pairs_collide_more_often_than_far_pairs() {
        let d = 5;
        let (r, c) = (1.0, 2.0);
        let cfg = NetBuilderConfig::new(200, d, r, c, &RandomSeed::new(8)).unwrap();
        let mut rng = RandomSeed::new(6).rng();
        let random_direction = |rng: &mut crate::rng::StreamRng, len: f64| {
            let v: Vec<f64> = (0..d).map(|_| open_unit(rng) - 0.5).collect();
            let norm: f64 = v.iter().map(|x| x.abs()).sum();
            v.into_iter().map(|x| x * len / norm).collect::<Vec<_>>()
        };
        let (mut near_hits, mut far_hits) = (0, 0);
        for t in 0..1000u64 {
            let hasher = BucketHasher::sample(d, &cfg, &RandomSeed::new(1000 + t));
            let base: Vec<f64> = (0..d).map(|_| 10.0 * open_unit(&mut rng)).collect();
            let near_len = r * open_unit(&mut rng);
            let far_len = c * r * (1.0 + open_unit(&mut rng));
            let near: Vec<f64> = base
                .iter()
                .zip(random_direction(&mut rng, near_len))
                .map(|(a, b)| a + b)
                .collect();
            let far: Vec<f64> = base
                .iter()
                .zip(random_direction(&mut rng, far_len))
                .map(|(a, b)| a + b)
                .collect();
            near_hits += (hasher.key(&base) == hasher.key(&near)) as u32;
            far_hits += (hasher.key(&base) == hasher.key(&far)) as u32;
        }
        assert!(near_hits > far_hits, "near {near_hits} far {far_hits}");
    }

    #[test]
    fn net_json_round_trip() {
        let net = brute_force_net(&line(&[0.0, 3.0, 3.5]), 1.0).unwrap();
        let json = net.to_json().unwrap();
        assert!(json.contains("\"certified\":true"));
        assert_eq!(NetResult::from_json(&json).unwrap(), net);
    }
}
