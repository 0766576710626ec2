//! Bounded open sets in `R¹` and `R²`, their rasterization onto uniform
//! cell-centred grids, and the geometric quantities the bounds need.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) < self.radius
    }
}

/// A bitmap of unit cells of side `h`; cell `(i, j)` covers
/// `[origin + i h, origin + (i+1) h) × [origin + j h, origin + (j+1) h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterMask {
    pub d: usize,
    pub h: f64,
    pub dims: [usize; 2],
    pub origin: [f64; 2],
    /// Row-major, `i + dims[0] * j`.
    pub cells: Vec<bool>,
}

impl RasterMask {
    /// Builds a mask whose bounding box is centred on the origin.
    pub fn centered(d: usize, h: f64, dims: [usize; 2], cells: Vec<bool>) -> Result<Self> {
        let dims = if d == 1 { [dims[0], 1] } else { dims };
        let origin = [
            -0.5 * h * dims[0] as f64,
            if d == 1 { 0.0 } else { -0.5 * h * dims[1] as f64 },
        ];
        let m = Self { d, h, dims, origin, cells };
        m.validate()?;
        Ok(m)
    }

    /// Samples `pred` at the cell centres of an `nx × ny` lattice centred on
    /// the origin.
    pub fn from_predicate<F: Fn(&[f64]) -> bool>(
        d: usize,
        h: f64,
        dims: [usize; 2],
        pred: F,
    ) -> Result<Self> {
        let dims = if d == 1 { [dims[0], 1] } else { dims };
        let ox = -0.5 * h * dims[0] as f64;
        let oy = -0.5 * h * dims[1] as f64;
        let mut cells = Vec::with_capacity(dims[0] * dims[1]);
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let x = ox + (i as f64 + 0.5) * h;
                let y = oy + (j as f64 + 0.5) * h;
                cells.push(if d == 1 { pred(&[x]) } else { pred(&[x, y]) });
            }
        }
        Self::centered(d, h, dims, cells)
    }

    fn validate(&self) -> Result<()> {
        if !(self.d == 1 || self.d == 2) {
            return Err(Error::InvalidDomain(format!("mask dimension {} not in {{1, 2}}", self.d)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidDomain(format!("mask spacing {} must be positive", self.h)));
        }
        if self.cells.len() != self.dims[0] * self.dims[1] {
            return Err(Error::InvalidDomain(format!(
                "mask has {} cells, expected {}",
                self.cells.len(),
                self.dims[0] * self.dims[1]
            )));
        }
        if !self.cells.iter().any(|&c| c) {
            return Err(Error::InvalidDomain("mask has no set cells".into()));
        }
        Ok(())
    }

    /// Parses the plain-text format: a header `d h nx [ny]` followed by
    /// rows of `0`/`1` characters, the first row being the lowest `y`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mask file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad = || Error::Parse(format!("bad mask header `{header}`"));
        if fields.len() < 3 {
            return Err(bad());
        }
        let d: usize = fields[0].parse().map_err(|_| bad())?;
        let h: f64 = fields[1].parse().map_err(|_| bad())?;
        let nx: usize = fields[2].parse().map_err(|_| bad())?;
        let ny: usize = match (d, fields.get(3)) {
            (1, None) => 1,
            (2, Some(s)) => s.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        };
        let mut cells = Vec::with_capacity(nx * ny);
        for line in lines {
            for ch in line.chars().filter(|c| !c.is_whitespace()) {
                match ch {
                    '0' => cells.push(false),
                    '1' => cells.push(true),
                    other => {
                        return Err(Error::Parse(format!("unexpected mask character `{other}`")))
                    }
                }
            }
        }
        Self::centered(d, h, [nx, ny], cells)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = if self.d == 1 {
            format!("1 {} {}\n", self.h, self.dims[0])
        } else {
            format!("2 {} {} {}\n", self.h, self.dims[0], self.dims[1])
        };
        for j in 0..self.dims[1] {
            for i in 0..self.dims[0] {
                out.push(if self.cell(i, j) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn cell(&self, i: usize, j: usize) -> bool {
        self.cells[i + self.dims[0] * j]
    }

    fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    fn contains(&self, x: &[f64]) -> bool {
        let locate = |v: f64, o: f64, n: usize| {
            let k = ((v - o) / self.h).floor();
            (k >= 0.0 && k < n as f64).then_some(k as usize)
        };
        let Some(i) = locate(x[0], self.origin[0], self.dims[0]) else {
            return false;
        };
        let j = if self.d == 1 {
            0
        } else {
            match locate(x[1], self.origin[1], self.dims[1]) {
                Some(j) => j,
                None => return false,
            }
        };
        self.cell(i, j)
    }

    fn set_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dims[1])
            .flat_map(move |j| (0..self.dims[0]).map(move |i| (i, j)))
            .filter(move |&(i, j)| self.cell(i, j))
    }

    fn neighbors(&self, i: usize, j: usize) -> impl Iterator<Item = Option<(usize, usize)>> + '_ {
        let (nx, ny) = (self.dims[0] as i64, self.dims[1] as i64);
        let dj: &[i64] = if self.d == 1 { &[0] } else { &[-1, 0, 1] };
        dj.iter()
            .flat_map(|&b| [-1i64, 0, 1].into_iter().map(move |a| (a, b)))
            .filter(|&(a, b)| (a, b) != (0, 0))
            .map(move |(a, b)| {
                let (p, q) = (i as i64 + a, j as i64 + b);
                (p >= 0 && q >= 0 && p < nx && q < ny).then_some((p as usize, q as usize))
            })
    }

    fn is_boundary_cell(&self, i: usize, j: usize) -> bool {
        self.neighbors(i, j)
            .any(|n| n.is_none_or(|(p, q)| !self.cell(p, q)))
    }

    fn diameter(&self) -> f64 {
        let pts: Vec<[f64; 2]> = self
            .set_cells()
            .filter(|&(i, j)| self.is_boundary_cell(i, j))
            .map(|(i, j)| self.cell_center(i, j))
            .collect();
        let mut best: f64 = 0.0;
        for (k, a) in pts.iter().enumerate() {
            for b in &pts[k + 1..] {
                best = best.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        best + self.h * (self.d as f64).sqrt()
    }

    fn inscribed_ball(&self) -> (f64, Vec<f64>) {
        let h = self.h;
        // unset cells touching the set, as closed squares
        let mut blockers: Vec<(usize, usize)> = Vec::new();
        for j in 0..self.dims[1] {
            for i in 0..self.dims[0] {
                if !self.cell(i, j)
                    && self.neighbors(i, j).flatten().any(|(p, q)| self.cell(p, q))
                {
                    blockers.push((i, j));
                }
            }
        }
        let lo = self.origin;
        let hi = [
            self.origin[0] + h * self.dims[0] as f64,
            self.origin[1] + h * self.dims[1] as f64,
        ];
        let mut best = (0.0, vec![0.0; self.d]);
        for (i, j) in self.set_cells() {
            let c = self.cell_center(i, j);
            let mut r = (c[0] - lo[0]).min(hi[0] - c[0]);
            if self.d == 2 {
                r = r.min(c[1] - lo[1]).min(hi[1] - c[1]);
            }
            for &(p, q) in &blockers {
                let cell_lo = [lo[0] + p as f64 * h, lo[1] + q as f64 * h];
                let dx = (cell_lo[0] - c[0]).max(0.0).max(c[0] - cell_lo[0] - h);
                let dy = if self.d == 1 {
                    0.0
                } else {
                    (cell_lo[1] - c[1]).max(0.0).max(c[1] - cell_lo[1] - h)
                };
                r = r.min((dx * dx + dy * dy).sqrt());
                if r <= best.0 {
                    break;
                }
            }
            if r > best.0 {
                best = (r, c[..self.d].to_vec());
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Disjoint open intervals in `R¹`.
    Intervals { intervals: Vec<(f64, f64)> },
    Ball(Ball),
    /// Open axis-aligned box with corners `lo` and `hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Disjoint open balls.
    Balls { balls: Vec<Ball> },
    Mask(RasterMask),
}

/// A validated open bounded set in `R^d`, `d ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Shape", into = "Shape")]
pub struct Domain {
    shape: Shape,
    d: usize,
}

impl TryFrom<Shape> for Domain {
    type Error = Error;

    fn try_from(shape: Shape) -> Result<Self> {
        Domain::new(shape)
    }
}

impl From<Domain> for Shape {
    fn from(d: Domain) -> Shape {
        d.shape
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn check_dim(d: usize) -> Result<usize> {
    if d == 1 || d == 2 {
        Ok(d)
    } else {
        Err(Error::InvalidDomain(format!("dimension {d} not supported, only 1 and 2")))
    }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl Domain {
    pub fn new(shape: Shape) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidDomain(m));
        let d = match &shape {
            Shape::Intervals { intervals } => {
                if intervals.is_empty() {
                    return invalid("no intervals".into());
                }
                for &(a, b) in intervals {
                    if !(a.is_finite() && b.is_finite() && a < b) {
                        return invalid(format!("interval ({a}, {b}) is empty or unbounded"));
                    }
                }
                for (k, &(a, b)) in intervals.iter().enumerate() {
                    for &(c, e) in &intervals[k + 1..] {
                        if a < e && c < b {
                            return invalid(format!("intervals ({a}, {b}) and ({c}, {e}) overlap"));
                        }
                    }
                }
                1
            }
            Shape::Ball(b) => {
                let d = check_dim(b.center.len())?;
                if !(b.radius > 0.0 && b.radius.is_finite() && finite(&b.center)) {
                    return invalid(format!("ball radius {} must be positive", b.radius));
                }
                d
            }
            Shape::Box { lo, hi } => {
                let d = check_dim(lo.len())?;
                if hi.len() != d || !finite(lo) || !finite(hi) {
                    return invalid("box corners must be finite points of equal dimension".into());
                }
                if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return invalid("box is empty".into());
                }
                d
            }
            Shape::Balls { balls } => {
                let first = balls
                    .first()
                    .ok_or_else(|| Error::InvalidDomain("no balls".into()))?;
                let d = check_dim(first.center.len())?;
                for b in balls {
                    if b.center.len() != d || !(b.radius > 0.0) || !finite(&b.center) {
                        return invalid("balls must share a dimension and have positive radius".into());
                    }
                }
                for (k, a) in balls.iter().enumerate() {
                    for b in &balls[k + 1..] {
                        if dist(&a.center, &b.center) < a.radius + b.radius {
                            return invalid("balls overlap".into());
                        }
                    }
                }
                d
            }
            Shape::Mask(m) => {
                m.validate()?;
                m.d
            }
        };
        Ok(Self { shape, d })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(Shape::Intervals { intervals: vec![(a, b)] })
    }

    pub fn intervals(intervals: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(Shape::Intervals { intervals })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(Shape::Ball(Ball::new(center, radius)))
    }

    pub fn cube(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::new(Shape::Box { lo, hi })
    }

    pub fn balls(balls: Vec<Ball>) -> Result<Self> {
        Self::new(Shape::Balls { balls })
    }

    pub fn mask(mask: RasterMask) -> Result<Self> {
        Self::new(Shape::Mask(mask))
    }

    /// Two unit balls centred at `(±r, 0, …)`; intervals `(±r − 1, ±r + 1)` in 1D.
    pub fn two_balls(d: usize, r: f64) -> Result<Self> {
        check_dim(d)?;
        if d == 1 {
            Self::intervals(vec![(-r - 1.0, -r + 1.0), (r - 1.0, r + 1.0)])
        } else {
            let mut c = vec![0.0; d];
            c[0] = r;
            let mut m = c.clone();
            m[0] = -r;
            Self::balls(vec![Ball::new(m, 1.0), Ball::new(c, 1.0)])
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Intervals { intervals } => intervals.iter().any(|&(a, b)| a < x[0] && x[0] < b),
            Shape::Ball(b) => b.contains(x),
            Shape::Box { lo, hi } => (0..self.d).all(|k| lo[k] < x[k] && x[k] < hi[k]),
            Shape::Balls { balls } => balls.iter().any(|b| b.contains(x)),
            Shape::Mask(m) => m.contains(x),
        }
    }

    /// Index of the analytic component containing `x`; masks are a single component.
    pub fn component_of(&self, x: &[f64]) -> Option<usize> {
        match &self.shape {
            Shape::Intervals { intervals } => {
                intervals.iter().position(|&(a, b)| a < x[0] && x[0] < b)
            }
            Shape::Balls { balls } => balls.iter().position(|b| b.contains(x)),
            _ => self.contains(x).then_some(0),
        }
    }

    pub fn component_count(&self) -> usize {
        match &self.shape {
            Shape::Intervals { intervals } => intervals.len(),
            Shape::Balls { balls } => balls.len(),
            _ => 1,
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Intervals { intervals } => {
                let lo = intervals.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                let hi = intervals.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                (vec![lo], vec![hi])
            }
            Shape::Ball(b) => (
                b.center.iter().map(|c| c - b.radius).collect(),
                b.center.iter().map(|c| c + b.radius).collect(),
            ),
            Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
            Shape::Balls { balls } => {
                let mut lo = vec![f64::INFINITY; self.d];
                let mut hi = vec![f64::NEG_INFINITY; self.d];
                for b in balls {
                    for k in 0..self.d {
                        lo[k] = lo[k].min(b.center[k] - b.radius);
                        hi[k] = hi[k].max(b.center[k] + b.radius);
                    }
                }
                (lo, hi)
            }
            Shape::Mask(m) => (
                (0..m.d).map(|k| m.origin[k]).collect(),
                (0..m.d).map(|k| m.origin[k] + m.h * m.dims[k] as f64).collect(),
            ),
        }
    }

    /// Supremum of pairwise distances. Exact for analytic shapes; for masks
    /// an upper bound (farthest cell centres plus one cell diagonal).
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Intervals { .. } | Shape::Box { .. } => {
                let (lo, hi) = self.bounding_box();
                dist(&lo, &hi)
            }
            Shape::Ball(b) => 2.0 * b.radius,
            Shape::Balls { balls } => {
                let mut best: f64 = 0.0;
                for (k, a) in balls.iter().enumerate() {
                    best = best.max(2.0 * a.radius);
                    for b in &balls[k + 1..] {
                        best = best.max(dist(&a.center, &b.center) + a.radius + b.radius);
                    }
                }
                best
            }
            Shape::Mask(m) => m.diameter(),
        }
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Intervals { intervals } => intervals.iter().map(|(a, b)| b - a).sum(),
            Shape::Ball(b) => crate::constants::unit_ball_volume(self.d) * b.radius.powi(self.d as i32),
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Shape::Balls { balls } => balls
                .iter()
                .map(|b| crate::constants::unit_ball_volume(self.d) * b.radius.powi(self.d as i32))
                .sum(),
            Shape::Mask(m) => m.cells.iter().filter(|&&c| c).count() as f64 * m.h.powi(m.d as i32),
        }
    }

    /// Radius and centre of a ball contained in the domain. Exact (maximal)
    /// for analytic shapes; for masks the best cell-centred ball.
    pub fn inscribed_radius(&self) -> (f64, Vec<f64>) {
        match &self.shape {
            Shape::Intervals { intervals } => {
                let &(a, b) = intervals
                    .iter()
                    .max_by(|p, q| (p.1 - p.0).total_cmp(&(q.1 - q.0)))
                    .expect("validated nonempty");
                (0.5 * (b - a), vec![0.5 * (a + b)])
            }
            Shape::Ball(b) => (b.radius, b.center.clone()),
            Shape::Box { lo, hi } => {
                let r = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).fold(f64::INFINITY, f64::min);
                (r, lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect())
            }
            Shape::Balls { balls } => {
                let b = balls
                    .iter()
                    .max_by(|p, q| p.radius.total_cmp(&q.radius))
                    .expect("validated nonempty");
                (b.radius, b.center.clone())
            }
            Shape::Mask(m) => m.inscribed_ball(),
        }
    }

    /// The dilation `rD`.
    pub fn dilate(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParams(format!("dilation factor {r} must be positive")));
        }
        let scale = |v: &[f64]| v.iter().map(|x| r * x).collect::<Vec<_>>();
        let shape = match &self.shape {
            Shape::Intervals { intervals } => Shape::Intervals {
                intervals: intervals.iter().map(|&(a, b)| (r * a, r * b)).collect(),
            },
            Shape::Ball(b) => Shape::Ball(Ball::new(scale(&b.center), r * b.radius)),
            Shape::Box { lo, hi } => Shape::Box { lo: scale(lo), hi: scale(hi) },
            Shape::Balls { balls } => Shape::Balls {
                balls: balls.iter().map(|b| Ball::new(scale(&b.center), r * b.radius)).collect(),
            },
            Shape::Mask(m) => Shape::Mask(RasterMask {
                h: r * m.h,
                origin: [r * m.origin[0], r * m.origin[1]],
                ..m.clone()
            }),
        };
        Self::new(shape)
    }

    /// Parses `interval:a,b[;c,d…]`, `box:x0,x1` / `box:x0,y0,x1,y1`,
    /// `ball:c,r` / `ball:cx,cy,r`, `balls:cx,cy,r;…` or `mask:path`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("domain `{spec}` lacks a `kind:` prefix")))?;
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number `{t}` in `{spec}`")))
                })
                .collect()
        };
        let groups = || rest.split(';').filter(|g| !g.trim().is_empty());
        match kind {
            "interval" | "intervals" => {
                let mut iv = Vec::new();
                for g in groups() {
                    match nums(g)?.as_slice() {
                        [a, b] => iv.push((*a, *b)),
                        _ => return Err(Error::Parse(format!("interval needs `a,b`: `{g}`"))),
                    }
                }
                Self::intervals(iv)
            }
            "box" => {
                let v = nums(rest)?;
                match v.len() {
                    2 => Self::cube(vec![v[0]], vec![v[1]]),
                    4 => Self::cube(vec![v[0], v[1]], vec![v[2], v[3]]),
                    _ => Err(Error::Parse(format!("box needs 2 or 4 numbers: `{rest}`"))),
                }
            }
            "ball" => {
                let v = nums(rest)?;
                if v.len() < 2 || v.len() > 3 {
                    return Err(Error::Parse(format!("ball needs centre and radius: `{rest}`")));
                }
                Self::ball(v[..v.len() - 1].to_vec(), v[v.len() - 1])
            }
            "balls" => {
                let mut bs = Vec::new();
                for g in groups() {
                    let v = nums(g)?;
                    if v.len() < 2 || v.len() > 3 {
                        return Err(Error::Parse(format!("ball needs centre and radius: `{g}`")));
                    }
                    bs.push(Ball::new(v[..v.len() - 1].to_vec(), v[v.len() - 1]));
                }
                Self::balls(bs)
            }
            "mask" => Self::mask(RasterMask::load(rest)?),
            other => Err(Error::Parse(format!("unknown domain kind `{other}`"))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pt = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match &self.shape {
            Shape::Intervals { intervals } => {
                let s: Vec<String> = intervals.iter().map(|(a, b)| format!("{a},{b}")).collect();
                write!(f, "interval:{}", s.join(";"))
            }
            Shape::Ball(b) => write!(f, "ball:{},{}", pt(&b.center), b.radius),
            Shape::Box { lo, hi } => write!(f, "box:{},{}", pt(lo), pt(hi)),
            Shape::Balls { balls } => {
                let s: Vec<String> = balls.iter().map(|b| format!("{},{}", pt(&b.center), b.radius)).collect();
                write!(f, "balls:{}", s.join(";"))
            }
            Shape::Mask(m) => write!(f, "mask[{}d {}x{} h={}]", m.d, m.dims[0], m.dims[1], m.h),
        }
    }
}

/// Uniform cell-centred lattice with an inside/outside mask.
///
/// Cell `(i, j)` has centre `origin + (i + ½, j + ½) h`. The lattice covers
/// the domain's bounding box plus one layer of outside cells on every side.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub h: f64,
    pub origin: [f64; 2],
    pub dims: [usize; 2],
    pub inside: Vec<bool>,
    nodes: Vec<[usize; 2]>,
}

impl Grid {
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            if self.d == 1 { 0.0 } else { self.origin[1] + (j as f64 + 0.5) * self.h },
        ]
    }

    /// Lattice indices of the inside cells, `x` fastest.
    pub fn nodes(&self) -> &[[usize; 2]] {
        &self.nodes
    }

    pub fn node_center(&self, k: usize) -> [f64; 2] {
        let [i, j] = self.nodes[k];
        self.cell_center(i, j)
    }

    pub fn n_inside(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_inside(&self, i: usize, j: usize) -> bool {
        self.inside[i + self.dims[0] * j]
    }

    /// Discrete volume `#inside · h^d`.
    pub fn volume(&self) -> f64 {
        self.nodes.len() as f64 * self.h.powi(self.d as i32)
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Outer corners of the lattice box.
    pub fn box_bounds(&self) -> ([f64; 2], [f64; 2]) {
        let hi = [
            self.origin[0] + self.h * self.dims[0] as f64,
            self.origin[1] + self.h * self.dims[1] as f64,
        ];
        (self.origin, hi)
    }
}

/// Cells whose centres lie in `domain` become inside nodes.
pub fn rasterize(domain: &Domain, h: f64) -> Result<Grid> {
    let diam = domain.diameter();
    if !(h > 0.0 && h <= diam / 4.0) {
        return Err(Error::InvalidParams(format!(
            "grid spacing {h} must lie in (0, diam/4 = {}]",
            diam / 4.0
        )));
    }
    let d = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let mut origin = [0.0; 2];
    let mut dims = [1usize; 2];
    for k in 0..d {
        let cells = ((hi[k] - lo[k]) / h - 1e-9).ceil().max(1.0) as usize;
        origin[k] = lo[k] - h;
        dims[k] = cells + 2;
    }
    let mut inside = vec![false; dims[0] * dims[1]];
    let mut nodes = Vec::new();
    let mut grid = Grid { d, h, origin, dims, inside: Vec::new(), nodes: Vec::new() };
    for j in 0..dims[1] {
        for i in 0..dims[0] {
            let c = grid.cell_center(i, j);
            if domain.contains(&c[..d]) {
                inside[i + dims[0] * j] = true;
                nodes.push([i, j]);
            }
        }
    }
    if nodes.len() < 2 {
        return Err(Error::EmptyGrid(nodes.len()));
    }
    grid.inside = inside;
    grid.nodes = nodes;
    Ok(grid)
}

/// `(−1, 1)² ∖ [0, 1)²` sampled as a mask of spacing `h`.
pub fn l_shape_mask(h: f64) -> Result<RasterMask> {
    let n = (2.0 / h).round() as usize;
    RasterMask::from_predicate(2, h, [n, n], |x| !(x[0] >= 0.0 && x[1] >= 0.0))
}

/// Perimeter of a ball, used by the convergence envelope in tests.
pub fn ball_perimeter(d: usize, r: f64) -> f64 {
    match d {
        1 => 2.0,
        _ => 2.0 * PI * r,
    }
}
