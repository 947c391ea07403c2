//! Randomly shifted grids and the covers they induce.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::points::{l1_distance, PointSet};
use crate::rng::{half_open_unit, RandomSeed};
use crate::stats::{proportion, Estimate, MeanAccumulator};

/// Largest admissible |(x − t)/w| before cell ids stop being exact.
const CELL_LIMIT: f64 = (1u64 << 62) as f64;

/// The partition g_w(x) = (⌊(x₁ − t₁)/w⌋, …, ⌊(x_d − t_d)/w⌋).
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedGrid {
    w: f64,
    offsets: Vec<f64>,
    seed: RandomSeed,
}

pub fn make_grid(d: usize, w: f64, seed: &RandomSeed) -> Result<ShiftedGrid> {
    if d == 0 {
        return Err(Error::domain("grid dimension must be positive"));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::domain(format!("grid width must be positive, got {w}")));
    }
    let mut rng = seed.rng();
    let offsets = (0..d)
        .map(|_| (w * half_open_unit(&mut rng)).min(w * (1.0 - f64::EPSILON)))
        .collect();
    Ok(ShiftedGrid {
        w,
        offsets,
        seed: seed.clone(),
    })
}

impl ShiftedGrid {
    /// A grid with explicit offsets, mostly for tests and fixtures.
    pub fn with_offsets(w: f64, offsets: Vec<f64>) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::domain(format!("grid width must be positive, got {w}")));
        }
        if offsets.is_empty() || offsets.iter().any(|t| !(0.0..w).contains(t)) {
            return Err(Error::domain("grid offsets must lie in [0, w)"));
        }
        Ok(Self {
            w,
            offsets,
            seed: RandomSeed::new(0),
        })
    }

    pub fn width(&self) -> f64 {
        self.w
    }

    pub fn dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn seed(&self) -> &RandomSeed {
        &self.seed
    }

    pub fn cell_of(&self, x: &[f64]) -> Result<Vec<i64>> {
        check_dim(self.dim(), x.len())?;
        x.iter()
            .zip(&self.offsets)
            .map(|(&xi, &ti)| self.axis_cell(xi, ti))
            .collect()
    }

    /// ⌊(x − t)/w⌋, nudged so that t + w·c ≤ x < t + w·(c + 1) holds in
    /// floating point and anchor corners map back to their own cell.
    #[inline]
    fn axis_cell(&self, x: f64, t: f64) -> Result<i64> {
        let scaled = (x - t) / self.w;
        if !(scaled.abs() < CELL_LIMIT) {
            return Err(Error::domain(format!(
                "coordinate {x} is out of range for grid width {}",
                self.w
            )));
        }
        let mut c = scaled.floor();
        if t + self.w * c > x {
            c -= 1.0;
        } else if t + self.w * (c + 1.0) <= x {
            c += 1.0;
        }
        Ok(c as i64)
    }

    /// The anchor corner t + w·cell.
    pub fn representative(&self, cell: &[i64]) -> Vec<f64> {
        cell.iter()
            .zip(&self.offsets)
            .map(|(&c, &t)| t + self.w * c as f64)
            .collect()
    }

    /// `representative(cell_of(x))` written into `out`.
    pub fn snap_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), out.len())?;
        for ((o, &xi), &ti) in out.iter_mut().zip(x).zip(&self.offsets) {
            *o = ti + self.w * self.axis_cell(xi, ti)? as f64;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub id: Vec<i64>,
    pub representative: Vec<f64>,
    pub member_indices: Vec<usize>,
}

/// The image g_w(P): occupied cells in order of first occurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCover {
    pub w: f64,
    pub seed: RandomSeed,
    pub cells: Vec<GridCell>,
    #[serde(skip)]
    member_of: Vec<usize>,
}

pub fn build_cover(grid: &ShiftedGrid, points: &PointSet) -> Result<GridCover> {
    check_dim(grid.dim(), points.dim())?;
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut cells: Vec<GridCell> = Vec::new();
    let mut member_of = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let id = grid.cell_of(p)?;
        let slot = *index.entry(id).or_insert_with_key(|id| {
            cells.push(GridCell {
                id: id.clone(),
                representative: grid.representative(id),
                member_indices: Vec::new(),
            });
            cells.len() - 1
        });
        cells[slot].member_indices.push(i);
        member_of.push(slot);
    }
    Ok(GridCover {
        w: grid.width(),
        seed: grid.seed().clone(),
        cells,
        member_of,
    })
}

impl GridCover {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.member_of.len()
    }

    /// Index into `cells` of the cell holding point `i`.
    pub fn cell_index_of(&self, i: usize) -> usize {
        self.member_of[i]
    }

    pub fn representative_of(&self, i: usize) -> &[f64] {
        &self.cells[self.member_of[i]].representative
    }

    /// max ‖p − rep(p)‖₁ over the covered points.
    pub fn covering_radius(&self, points: &PointSet) -> f64 {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| l1_distance(p, self.representative_of(i)))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut cover: GridCover = serde_json::from_str(s)?;
        let n = cover
            .cells
            .iter()
            .flat_map(|c| c.member_indices.iter().map(|&i| i + 1))
            .max()
            .unwrap_or(0);
        let mut member_of = vec![usize::MAX; n];
        for (slot, cell) in cover.cells.iter().enumerate() {
            for &i in &cell.member_indices {
                if member_of[i] != usize::MAX {
                    return Err(Error::Format {
                        what: "grid cover",
                        detail: format!("point {i} belongs to two cells"),
                    });
                }
                member_of[i] = slot;
            }
        }
        if member_of.contains(&usize::MAX) {
            return Err(Error::Format {
                what: "grid cover",
                detail: "member indices are not contiguous".into(),
            });
        }
        cover.member_of = member_of;
        Ok(cover)
    }
}

/// (1 + 2r/w)^d, the expected number of cells met by an ℓ1 ball of radius r.
pub fn expected_cell_bound(r: f64, w: f64, d: usize) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::domain(format!("grid width must be positive, got {w}")));
    }
    if !(r >= 0.0) {
        return Err(Error::domain(format!("radius must be non-negative, got {r}")));
    }
    Ok((1.0 + 2.0 * r / w).powi(d as i32))
}

/// 8·λ^{2·log₂(d·R/ε)}: bound on the expected number of representatives of
/// P ∩ B(q, R) under a grid of width ε/d.
pub fn ball_cover_bound(lambda: f64, d: usize, radius: f64, epsilon: f64) -> f64 {
    8.0 * lambda.powf(2.0 * (d as f64 * radius / epsilon).log2())
}

/// 4^{i+3}·λ^{2·log₂(d·D_{i+1}/ε)}, the per-annulus bound on |A_i|.
pub fn annulus_bound(i: i32, lambda: f64, d: usize, outer_radius: f64, epsilon: f64) -> f64 {
    4f64.powi(i + 3) * lambda.powf(2.0 * (d as f64 * outer_radius / epsilon).log2())
}

/// Parameters of [`estimate_cover_growth`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub epsilon: f64,
    pub d0: f64,
    pub lambda: f64,
    pub trials: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRecord {
    /// Annulus index i; A_i holds the representatives within D_{i+1} = 4^{i+1}·D₀.
    pub index: i32,
    pub outer_radius: f64,
    pub mean_count: f64,
    pub max_count: usize,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub width: f64,
    pub annuli: Vec<AnnulusRecord>,
    /// Fraction of grid draws where |A_i| ≤ 4^{i+3}·λ^{2log(dD_{i+1}/ε)} for every i ≥ 0.
    pub simultaneous: Estimate,
    /// Fraction of grid draws where |A_{−1}| ≤ 32·λ^{2log(dD₀/ε)}.
    pub innermost: Estimate,
}

/// Counts representatives of g_{ε/d}(P) in the balls B(q, 4^{i+1}·D₀) over
/// independent grid draws.
pub fn estimate_cover_growth(
    points: &PointSet,
    q: &[f64],
    params: &GrowthParams,
    seed: &RandomSeed,
) -> Result<GrowthReport> {
    points.check_query(q)?;
    if params.trials == 0 {
        return Err(Error::domain("growth estimation needs at least one trial"));
    }
    if !(params.epsilon > 0.0 && params.d0 > 0.0 && params.lambda >= 1.0) {
        return Err(Error::domain("growth parameters must be positive with lambda >= 1"));
    }
    let d = points.dim();
    let w = params.epsilon / d as f64;
    let far = points.iter().map(|p| l1_distance(p, q)).fold(0.0, f64::max) + params.epsilon;
    // annuli up to the first radius that contains every representative
    let mut radii = vec![params.d0];
    while *radii.last().unwrap() < far {
        radii.push(radii.last().unwrap() * 4.0);
    }
    let mut sums = vec![MeanAccumulator::default(); radii.len()];
    let mut maxima = vec![0usize; radii.len()];
    let bounds: Vec<f64> = radii
        .iter()
        .enumerate()
        .map(|(slot, &r)| annulus_bound(slot as i32 - 1, params.lambda, d, r, params.epsilon))
        .collect();
    let inner_bound = 32.0 * params.lambda.powf(2.0 * (d as f64 * params.d0 / params.epsilon).log2());
    let mut all_ok = 0u64;
    let mut inner_ok = 0u64;
    for trial in 0..params.trials {
        let grid = make_grid(d, w, &seed.derive_indexed("grid", trial))?;
        let cover = build_cover(&grid, points)?;
        let mut counts = vec![0usize; radii.len()];
        for cell in &cover.cells {
            let dist = l1_distance(&cell.representative, q);
            let first = radii.partition_point(|&r| r < dist);
            for c in &mut counts[first..] {
                *c += 1;
            }
        }
        for (slot, &count) in counts.iter().enumerate() {
            sums[slot].push(count as f64);
            maxima[slot] = maxima[slot].max(count);
        }
        if counts.iter().zip(&bounds).skip(1).all(|(&c, &b)| c as f64 <= b) {
            all_ok += 1;
        }
        if counts[0] as f64 <= inner_bound {
            inner_ok += 1;
        }
    }
    let annuli = radii
        .iter()
        .enumerate()
        .map(|(slot, &r)| AnnulusRecord {
            index: slot as i32 - 1,
            outer_radius: r,
            mean_count: sums[slot].mean(),
            max_count: maxima[slot],
            bound: bounds[slot],
        })
        .collect();
    Ok(GrowthReport {
        width: w,
        annuli,
        simultaneous: proportion(all_ok, params.trials),
        innermost: proportion(inner_ok, params.trials),
    })
}

/// Mean of |g_{ε/d}(P ∩ B(q, R))| over independent grid draws.
pub fn estimate_ball_cover_size(
    points: &PointSet,
    q: &[f64],
    radius: f64,
    epsilon: f64,
    trials: u64,
    seed: &RandomSeed,
) -> Result<Estimate> {
    points.check_query(q)?;
    if trials == 0 || !(epsilon > 0.0) {
        return Err(Error::domain("need trials >= 1 and epsilon > 0"));
    }
    let inside: Vec<usize> = (0..points.len())
        .filter(|&i| points.distance_to(i, q) <= radius)
        .collect();
    let ball = points.select(&inside);
    let w = epsilon / points.dim() as f64;
    let mut acc = MeanAccumulator::default();
    for trial in 0..trials {
        let grid = make_grid(points.dim(), w, &seed.derive_indexed("grid", trial))?;
        let count = if ball.is_empty() {
            0
        } else {
            build_cover(&grid, &ball)?.len()
        };
        acc.push(count as f64);
    }
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_in_range_and_reproducible() {
        let seed = RandomSeed::new(5);
        let g = make_grid(1000, 0.3, &seed).unwrap();
        assert!(g.offsets().iter().all(|&t| (0.0..0.3).contains(&t)));
        assert_eq!(g, make_grid(1000, 0.3, &seed).unwrap());
        assert!(make_grid(3, 0.0, &seed).is_err());
        assert!(make_grid(3, -1.0, &seed).is_err());
        assert!(make_grid(0, 1.0, &seed).is_err());
    }

    #[test]
    fn cell_examples() {
        let g = ShiftedGrid::with_offsets(1.0, vec![0.0]).unwrap();
        assert_eq!(g.cell_of(&[2.3]).unwrap(), vec![2]);
        let h = ShiftedGrid::with_offsets(1.0, vec![0.5]).unwrap();
        assert_eq!(h.cell_of(&[0.3]).unwrap(), vec![-1]);
        let t = make_grid(4, 0.7, &RandomSeed::new(1)).unwrap();
        let x = t.offsets().to_vec();
        assert_eq!(t.cell_of(&x).unwrap(), vec![0; 4]);
        assert!(t.cell_of(&[1.0]).is_err());
        assert!(t.cell_of(&[1e300, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn translation_by_one_cell() {
        let g = make_grid(3, 0.25, &RandomSeed::new(2)).unwrap();
        let x = [0.11, -3.7, 8.02];
        let base = g.cell_of(&x).unwrap();
        for axis in 0..3 {
            let mut y = x;
            y[axis] += 0.25;
            let mut expect = base.clone();
            expect[axis] += 1;
            assert_eq!(g.cell_of(&y).unwrap(), expect);
        }
    }

    #[test]
    fn cover_examples() {
        let g = make_grid(2, 0.5, &RandomSeed::new(3)).unwrap();
        let one = PointSet::from_rows(2, &[[1.0, 1.0]]).unwrap();
        let c = build_cover(&g, &one).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.covering_radius(&one) <= 2.0 * 0.5);

        let cell = g.cell_of(&[1.0, 1.0]).unwrap();
        let corner = g.representative(&cell);
        assert_eq!(g.cell_of(&corner).unwrap(), cell);
        let pair = PointSet::from_rows(2, &[corner.clone(), vec![corner[0] + 0.1, corner[1] + 0.2]]).unwrap();
        let c = build_cover(&g, &pair).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.cells[0].member_indices, vec![0, 1]);
        assert_eq!(c.representative_of(0), c.representative_of(1));
    }

    #[test]
    fn cover_json_round_trip() {
        let g = make_grid(2, 0.5, &RandomSeed::new(3)).unwrap();
        let pts = PointSet::from_rows(2, &[[0.0, 0.0], [3.0, 1.0], [0.1, 0.1]]).unwrap();
        let c = build_cover(&g, &pts).unwrap();
        let json = c.to_json().unwrap();
        assert!(json.contains("\"member_indices\""));
        let back = GridCover::from_json(&json).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.cell_index_of(2), c.cell_index_of(2));
    }

    #[test]
    fn cell_bound_examples() {
        assert_eq!(expected_cell_bound(0.0, 1.0, 7).unwrap(), 1.0);
        assert_eq!(expected_cell_bound(0.5, 1.0, 1).unwrap(), 2.0);
        assert_eq!(expected_cell_bound(1.0, 1.0, 2).unwrap(), 9.0);
        assert!(expected_cell_bound(1.0, 0.0, 2).is_err());
    }

    #[test]
    fn single_point_growth() {
        let p = PointSet::from_rows(3, &[[1.0, 2.0, 3.0]]).unwrap();
        let params = GrowthParams {
            epsilon: 0.3,
            d0: 2.0,
            lambda: 1.0,
            trials: 20,
        };
        let report = estimate_cover_growth(&p, &[0.0; 3], &params, &RandomSeed::new(4)).unwrap();
        assert!(report.annuli.iter().all(|a| a.max_count <= 1));
        assert_eq!(report.simultaneous.mean, 1.0);
        assert_eq!(report.innermost.mean, 1.0);
    }
}
