//! Discretized 2-D fitness landscapes.
//!
//! A landscape is a dense `width x height` grid of fitness values min-max
//! normalized to `[0, 1]`, plus a value-sorted index of all cells used for
//! quantile-band placement and quantile thresholds.

use std::f64::consts::{E, PI};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use arrayvec::ArrayVec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::SimRng;

const ACKLEY_BOUND: f64 = 32.768;
const DROP_WAVE_BOUND: f64 = 5.12;

const PEAK_COUNT: usize = 15;
const PEAK_HEIGHT_MIN: f64 = 0.4;
const PEAK_WIDTH_MIN: f64 = 0.03;
const PEAK_WIDTH_MAX: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandscapeKind {
    Ackley,
    #[serde(alias = "dropwave")]
    DropWave,
    /// Seeded mixture of Gaussian peaks, standing in for the Mason-Watts environment.
    #[serde(alias = "peakmixture", alias = "mason_watts")]
    PeakMixture,
}

impl LandscapeKind {
    pub const ALL: [LandscapeKind; 3] = [
        LandscapeKind::Ackley,
        LandscapeKind::DropWave,
        LandscapeKind::PeakMixture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LandscapeKind::Ackley => "ackley",
            LandscapeKind::DropWave => "drop_wave",
            LandscapeKind::PeakMixture => "peak_mixture",
        }
    }

    /// Whether the grid depends on the generation seed.
    pub fn is_seeded(self) -> bool {
        matches!(self, LandscapeKind::PeakMixture)
    }
}

impl fmt::Display for LandscapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LandscapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ackley" => Ok(LandscapeKind::Ackley),
            "drop_wave" | "dropwave" | "drop-wave" => Ok(LandscapeKind::DropWave),
            "peak_mixture" | "peakmixture" | "peak-mixture" | "mason_watts" => {
                Ok(LandscapeKind::PeakMixture)
            }
            other => Err(Error::Config(format!("unknown landscape kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// Up to 8 surrounding cells.
    #[default]
    Moore,
    /// Up to 4 axis-aligned cells.
    VonNeumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Position {
    pub col: usize,
    pub row: usize,
}

impl Position {
    pub fn new(col: usize, row: usize) -> Self {
        Position { col, row }
    }
}

#[derive(Clone)]
pub struct Landscape {
    kind: LandscapeKind,
    width: usize,
    height: usize,
    seed: u64,
    values: Vec<f64>,
    // cell indices ordered by (value, index)
    order: Vec<u32>,
    sorted_values: Vec<f64>,
}

impl fmt::Debug for Landscape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Landscape")
            .field("kind", &self.kind)
            .field("width", &self.width)
            .field("height", &self.height)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// Maps a cell index to a continuous coordinate in `[-bound, bound)`.
///
/// The lattice is uniform with spacing `2 * bound / cells` and cell `cells / 2`
/// lands exactly on the origin, so the analytic optima are representable.
fn lattice_coord(index: usize, cells: usize, bound: f64) -> f64 {
    let step = 2.0 * bound / cells as f64;
    (index as f64 - (cells / 2) as f64) * step
}

pub fn ackley(x: f64, y: f64) -> f64 {
    let a = 20.0;
    let b = 0.2;
    let c = 2.0 * PI;
    let r = (0.5 * (x * x + y * y)).sqrt();
    let cos_mean = 0.5 * ((c * x).cos() + (c * y).cos());
    -a * (-b * r).exp() - cos_mean.exp() + a + E
}

pub fn drop_wave(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    -(1.0 + (12.0 * r2.sqrt()).cos()) / (0.5 * r2 + 2.0)
}

impl Landscape {
    /// Generates a normalized landscape. `seed` only matters for
    /// [`LandscapeKind::PeakMixture`].
    pub fn build(kind: LandscapeKind, width: usize, height: usize, seed: u64) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::Config(format!(
                "landscape must be at least 3x3, got {width}x{height}"
            )));
        }
        if width
            .checked_mul(height)
            .is_none_or(|n| n > u32::MAX as usize)
        {
            return Err(Error::Config(format!(
                "landscape {width}x{height} is too large"
            )));
        }
        let raw = match kind {
            LandscapeKind::Ackley => analytic_grid(width, height, ACKLEY_BOUND, ackley),
            LandscapeKind::DropWave => analytic_grid(width, height, DROP_WAVE_BOUND, drop_wave),
            LandscapeKind::PeakMixture => peak_mixture_grid(width, height, seed),
        };
        let values = min_max_normalize(raw)
            .ok_or_else(|| Error::Config(format!("{kind} landscape is constant")))?;
        let seed = if kind.is_seeded() { seed } else { 0 };
        Ok(Self::with_index(kind, width, height, seed, values))
    }

    /// Wraps an explicit grid (row-major) without renormalizing it.
    ///
    /// Values must be finite and within `[0, 1]`. Useful for flat or
    /// hand-crafted test landscapes.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::Config(format!(
                "landscape must be at least 3x3, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::Usage(format!(
                "expected {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Usage(format!("fitness value {bad} outside [0, 1]")));
        }
        Ok(Self::with_index(
            LandscapeKind::PeakMixture,
            width,
            height,
            0,
            values,
        ))
    }

    fn with_index(
        kind: LandscapeKind,
        width: usize,
        height: usize,
        seed: u64,
        values: Vec<f64>,
    ) -> Self {
        // Values are nonnegative, so the IEEE bit pattern orders like the
        // value once -0.0 is folded into +0.0.
        let mut keyed: Vec<(u64, u32)> = values
            .iter()
            .enumerate()
            .map(|(i, v)| ((v + 0.0).to_bits(), i as u32))
            .collect();
        keyed.sort_unstable();
        let order: Vec<u32> = keyed.iter().map(|&(_, i)| i).collect();
        let sorted_values = keyed.iter().map(|&(b, _)| f64::from_bits(b)).collect();
        Landscape {
            kind,
            width,
            height,
            seed,
            values,
            order,
            sorted_values,
        }
    }

    pub fn kind(&self) -> LandscapeKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn generation_seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major cell values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// All cell values in nondecreasing order.
    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    /// Cell positions ordered by nondecreasing value (ties by cell index).
    pub fn quantile_index(&self) -> impl ExactSizeIterator<Item = Position> + '_ {
        self.order.iter().map(|&i| self.position_of(i as usize))
    }

    pub fn contains(&self, p: Position) -> bool {
        p.col < self.width && p.row < self.height
    }

    fn position_of(&self, index: usize) -> Position {
        Position::new(index % self.width, index / self.width)
    }

    fn index_of(&self, p: Position) -> usize {
        debug_assert!(self.contains(p));
        p.row * self.width + p.col
    }

    #[inline]
    pub fn fitness(&self, p: Position) -> f64 {
        self.values[self.index_of(p)]
    }

    /// The cell that maps to the continuous origin for the analytic kinds.
    pub fn origin(&self) -> Position {
        Position::new(self.width / 2, self.height / 2)
    }

    pub fn argmax(&self) -> Position {
        self.position_of(*self.order.last().expect("landscape is non-empty") as usize)
    }

    pub fn argmin(&self) -> Position {
        self.position_of(self.order[0] as usize)
    }

    /// In-bounds neighbors of `p`, excluding `p` itself. No wrap-around.
    pub fn neighbors(&self, p: Position, shape: Neighborhood) -> ArrayVec<Position, 8> {
        let mut out = ArrayVec::new();
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                if shape == Neighborhood::VonNeumann && dr != 0 && dc != 0 {
                    continue;
                }
                let row = p.row as i64 + dr;
                let col = p.col as i64 + dc;
                if row < 0 || col < 0 || row >= self.height as i64 || col >= self.width as i64 {
                    continue;
                }
                out.push(Position::new(col as usize, row as usize));
            }
        }
        out
    }

    pub fn random_position(&self, rng: &mut SimRng) -> Position {
        Position::new(
            rng.random_range(0..self.width),
            rng.random_range(0..self.height),
        )
    }

    /// Average rank (0-based) of the tie group holding sorted slot `k`.
    fn rank_at_slot(&self, k: usize) -> f64 {
        let v = self.sorted_values[k];
        let first = self.sorted_values.partition_point(|&x| x < v);
        let last = self.sorted_values.partition_point(|&x| x <= v) - 1;
        (first + last) as f64 / 2.0
    }

    /// Average rank of the cell's value among all cells, 0-based.
    pub fn average_rank(&self, p: Position) -> f64 {
        let v = self.fitness(p);
        let first = self.sorted_values.partition_point(|&x| x < v);
        let last = self.sorted_values.partition_point(|&x| x <= v) - 1;
        (first + last) as f64 / 2.0
    }

    /// Empirical quantile of the cell's value: average rank / (N - 1).
    pub fn empirical_quantile(&self, p: Position) -> f64 {
        self.average_rank(p) / (self.len() - 1) as f64
    }

    /// Sorted slots whose empirical quantile lies in `[lo, hi]`.
    fn slots_in_band(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let scale = (self.len() - 1) as f64;
        let lo_rank = lo * scale;
        let hi_rank = hi * scale;
        let n = self.len();
        // rank_at_slot is nondecreasing in k
        let start = partition_point_range(n, |k| self.rank_at_slot(k) < lo_rank);
        let end = partition_point_range(n, |k| self.rank_at_slot(k) <= hi_rank);
        start..end.max(start)
    }

    /// Draws a uniformly random cell whose empirical quantile lies within
    /// `q_center +- half_width` (clipped to `[0, 1]`). An empty band is widened
    /// symmetrically by `half_width` until it contains a cell.
    pub fn sample_in_quantile_band(
        &self,
        q_center: f64,
        half_width: f64,
        rng: &mut SimRng,
    ) -> Result<Position> {
        if !(0.0..=1.0).contains(&q_center) {
            return Err(Error::Usage(format!(
                "quantile center {q_center} outside [0, 1]"
            )));
        }
        if !(half_width > 0.0) {
            return Err(Error::Usage(format!(
                "quantile half-width must be positive, got {half_width}"
            )));
        }
        let mut reach = half_width;
        loop {
            let lo = (q_center - reach).max(0.0);
            let hi = (q_center + reach).min(1.0);
            let slots = self.slots_in_band(lo, hi);
            if !slots.is_empty() {
                let k = rng.random_range(slots);
                return Ok(self.position_of(self.order[k] as usize));
            }
            // the full range [0, 1] always holds every cell, so this ends
            reach += half_width;
        }
    }

    /// Value at the `q`-quantile of the sorted grid (lower interpolation:
    /// sorted slot `floor(q * (N - 1))`).
    pub fn quantile_value(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let k = (q * (self.len() - 1) as f64).floor() as usize;
        self.sorted_values[k]
    }

    /// Fitness of a uniformly random cell strictly above the `q`-quantile
    /// value. When no cell is strictly above (a top plateau), returns the
    /// maximum.
    pub fn sample_above_quantile(&self, q: f64, rng: &mut SimRng) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::Usage(format!("quantile {q} outside [0, 1)")));
        }
        let threshold = self.quantile_value(q);
        let start = self.sorted_values.partition_point(|&x| x <= threshold);
        if start == self.len() {
            return Ok(self.sorted_values[self.len() - 1]);
        }
        let k = rng.random_range(start..self.len());
        Ok(self.sorted_values[k])
    }

    /// Writes `col,row,value` lines with a header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "col,row,value")?;
            for (i, v) in self.values.iter().enumerate() {
                let p = self.position_of(i);
                writeln!(out, "{},{},{}", p.col, p.row, v)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    /// Writes a single JSON object: header fields plus the row-major values.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Dump<'a> {
            kind: LandscapeKind,
            width: usize,
            height: usize,
            seed: u64,
            values: &'a [f64],
        }
        let dump = Dump {
            kind: self.kind,
            width: self.width,
            height: self.height,
            seed: self.seed,
            values: &self.values,
        };
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut out, &dump)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        out.flush().map_err(|e| Error::io(path, e))
    }
}

fn partition_point_range(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Samples `-f` on the lattice so that minima of `f` become maxima.
fn analytic_grid(width: usize, height: usize, bound: f64, f: fn(f64, f64) -> f64) -> Vec<f64> {
    let xs: Vec<f64> = (0..width).map(|c| lattice_coord(c, width, bound)).collect();
    let mut out = Vec::with_capacity(width * height);
    for row in 0..height {
        let y = lattice_coord(row, height, bound);
        out.extend(xs.iter().map(|&x| -f(x, y)));
    }
    out
}

fn peak_mixture_grid(width: usize, height: usize, seed: u64) -> Vec<f64> {
    let mut rng = crate::streams::substream(seed, &[crate::streams::tag::LANDSCAPE]);
    let mut grid = vec![0.0; width * height];
    let mut gx = vec![0.0; width];
    let mut gy = vec![0.0; height];
    for peak in 0..PEAK_COUNT {
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        let amplitude = if peak == 0 {
            1.0
        } else {
            rng.random_range(PEAK_HEIGHT_MIN..=1.0)
        };
        let sigma = rng.random_range(PEAK_WIDTH_MIN..=PEAK_WIDTH_MAX) * width as f64;
        let denom = 2.0 * sigma * sigma;
        for (c, g) in gx.iter_mut().enumerate() {
            let d = c as f64 - cx;
            *g = (-d * d / denom).exp();
        }
        for (r, g) in gy.iter_mut().enumerate() {
            let d = r as f64 - cy;
            *g = amplitude * (-d * d / denom).exp();
        }
        for (row, &wy) in grid.chunks_exact_mut(width).zip(&gy) {
            for (cell, &wx) in row.iter_mut().zip(&gx) {
                *cell += wy * wx;
            }
        }
    }
    grid
}

fn min_max_normalize(mut values: Vec<f64>) -> Option<Vec<f64>> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(max > min) || !min.is_finite() || !max.is_finite() {
        return None;
    }
    let span = max - min;
    for v in &mut values {
        *v = (*v - min) / span;
    }
    Some(values)
}
