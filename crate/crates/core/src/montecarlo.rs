//! Monte Carlo simulation of the isotropic α-stable process: exit times and
//! survival probabilities, independent of the grid discretization.
//!
//! Each path owns a ChaCha8 stream keyed by its index, so results do not
//! depend on how paths are scheduled across threads.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::fit_line;
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Steps after which a path still inside the domain is an error.
pub const STEP_BUDGET: usize = 1_000_000;

/// Normal quantile for two-sided 95% intervals.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSamplerConfig {
    pub alpha: f64,
    pub d: usize,
    /// Walk time step `δ`.
    pub dt: f64,
    pub seed: u64,
    pub paths: usize,
}

impl StableSamplerConfig {
    pub fn new(alpha: f64, d: usize, dt: f64, seed: u64, paths: usize) -> Result<Self> {
        let cfg = Self { alpha, d, dt, seed, paths };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidParams(format!("stable index must lie in (0, 2), got {}", self.alpha)));
        }
        if !(1..=2).contains(&self.d) {
            return Err(Error::InvalidParams(format!("dimension must be 1 or 2, got {}", self.d)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("time step must be positive, got {}", self.dt)));
        }
        if self.paths < 1000 {
            return Err(Error::InvalidParams(format!("at least 1000 paths required, got {}", self.paths)));
        }
        Ok(())
    }

    /// Generator for path `index`.
    pub fn path_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// Symmetric stable variable with `E e^{izX} = e^{−|z|^α}` (Chambers–Mallows–Stuck).
fn cms<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.gen::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable variable with `E e^{−uS} = e^{−u^β}`, `0 < β < 1` (Kanter).
fn positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    // U in (0, π) excluding the endpoints
    let u = PI * (1.0 - rng.gen::<f64>());
    let e: f64 = rng.sample(Exp1);
    (beta * u).sin() / u.sin().powf(1.0 / beta) * (((1.0 - beta) * u).sin() / e).powf((1.0 - beta) / beta)
}

/// One increment `X(dt)`; `E e^{i⟨z, X(dt)⟩} = e^{−dt |z|^α}`.
///
/// In 2D the increment is a Gaussian with covariance `2S I` at an
/// `(α/2)`-stable subordinator time `S`.
pub fn sample_stable_increment<R: Rng + ?Sized>(cfg: &StableSamplerConfig, dt: f64, rng: &mut R) -> [f64; 2] {
    let a = cfg.alpha;
    if cfg.d == 1 {
        return [dt.powf(1.0 / a) * cms(a, rng), 0.0];
    }
    let beta = 0.5 * a;
    let s = dt.powf(1.0 / beta) * positive_stable(beta, rng);
    let scale = (2.0 * s).sqrt();
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    [scale * x, scale * y]
}

/// Exit-time sample and derived statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEstimate {
    pub mean_exit_time: f64,
    /// 95% normal-approximation half-width.
    pub ci_halfwidth: f64,
    pub paths: usize,
    pub dt: f64,
    /// Rows `(t, P̂(τ ≥ t), 95% half-width)`.
    pub survival: Vec<(f64, f64, f64)>,
    #[serde(skip)]
    exit_times: Vec<f64>,
}

impl ExitEstimate {
    fn from_times(mut exit_times: Vec<f64>, dt: f64) -> Self {
        let n = exit_times.len() as f64;
        let mean = exit_times.iter().sum::<f64>() / n;
        let var = exit_times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        exit_times.sort_by(f64::total_cmp);
        let mut est = Self {
            mean_exit_time: mean,
            ci_halfwidth: Z95 * (var / n).sqrt(),
            paths: exit_times.len(),
            dt,
            survival: Vec::new(),
            exit_times,
        };
        let last = *est.exit_times.last().unwrap_or(&0.0);
        let step = mean / 8.0;
        let rows = ((last / step).ceil() as usize).min(4096);
        est.survival = (0..=rows).map(|k| {
            let t = k as f64 * step;
            let p = est.survival_at(t);
            (t, p, est.survival_ci(p))
        }).collect();
        est
    }

    /// `P̂(τ ≥ t)`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let below = self.exit_times.partition_point(|&s| s < t);
        (self.exit_times.len() - below) as f64 / self.exit_times.len() as f64
    }

    /// 95% half-width of a survival proportion `p`.
    pub fn survival_ci(&self, p: f64) -> f64 {
        Z95 * (p * (1.0 - p) / self.paths as f64).sqrt()
    }

    pub fn exit_times(&self) -> &[f64] {
        &self.exit_times
    }

    /// Least-squares slope of `log P̂(τ ≥ t)` over `points` equispaced times
    /// in `[t0, t1]`; approximately `−λ₁` for large times.
    pub fn survival_log_slope(&self, t0: f64, t1: f64, points: usize) -> Result<f64> {
        let ts: Vec<f64> = (0..points).map(|k| t0 + (t1 - t0) * k as f64 / (points - 1) as f64).collect();
        let logs: Vec<f64> = ts.iter().map(|&t| self.survival_at(t).ln()).collect();
        if logs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("no surviving paths by t = {t1}")));
        }
        Ok(fit_line(&ts, &logs).0)
    }

    /// CSV `t,survival,ci`.
    pub fn write_survival_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,survival,ci")?;
        for (t, p, ci) in &self.survival {
            writeln!(out, "{t:.6e},{p:.8},{ci:.8}")?;
        }
        Ok(())
    }
}

/// Exit time of one path started at `x0`, checked at multiples of `dt`.
fn walk(cfg: &StableSamplerConfig, domain: &Domain, x0: &[f64], index: usize) -> Result<f64> {
    let mut rng = cfg.path_rng(index);
    let mut pos = [0.0; 2];
    pos[..cfg.d].copy_from_slice(x0);
    for step in 1..=STEP_BUDGET {
        let inc = sample_stable_increment(cfg, cfg.dt, &mut rng);
        pos[0] += inc[0];
        pos[1] += inc[1];
        if !domain.contains(&pos[..cfg.d]) {
            return Ok(step as f64 * cfg.dt);
        }
    }
    Err(Error::PathBudget { path: index, steps: STEP_BUDGET })
}

pub fn estimate_exit(cfg: &StableSamplerConfig, domain: &Domain, x0: &[f64]) -> Result<ExitEstimate> {
    cfg.validate()?;
    if domain.dim() != cfg.d || x0.len() != cfg.d {
        return Err(Error::InvalidParams("dimension mismatch between sampler, domain and start".into()));
    }
    if !domain.contains(x0) {
        return Err(Error::OutsideDomain(format!("start {x0:?} is not in {domain}")));
    }
    let times = (0..cfg.paths)
        .into_par_iter()
        .map(|i| walk(cfg, domain, x0, i))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ExitEstimate::from_times(times, cfg.dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalVerdict {
    pub t: f64,
    pub survival_a: f64,
    pub survival_b: f64,
    /// `√(ci_a² + ci_b²)`
    pub joint_ci: f64,
    pub holds: bool,
}

/// Checks `P̂(τ_A ≥ t) ≤ P̂(τ_B ≥ t) + 2·joint CI` for paths from `xa` in `A`
/// and from `xb` in `B`. Both runs use the same seed.
pub fn survival_comparison(
    cfg: &StableSamplerConfig,
    a: (&Domain, &[f64]),
    b: (&Domain, &[f64]),
    times: &[f64],
) -> Result<Vec<SurvivalVerdict>> {
    let ea = estimate_exit(cfg, a.0, a.1)?;
    let eb = estimate_exit(cfg, b.0, b.1)?;
    Ok(times
        .iter()
        .map(|&t| {
            let (pa, pb) = (ea.survival_at(t), eb.survival_at(t));
            let joint = ea.survival_ci(pa).hypot(eb.survival_ci(pb));
            SurvivalVerdict { t, survival_a: pa, survival_b: pb, joint_ci: joint, holds: pa <= pb + 2.0 * joint }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rasterize;
    use crate::operator::assemble;

    fn samples(cfg: &StableSamplerConfig, dt: f64, n: usize, stream: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        (0..n).map(|_| sample_stable_increment(cfg, dt, &mut rng)).collect()
    }

    #[test]
    fn characteristic_function() {
        for (alpha, d) in [(1.0, 1), (0.5, 1), (1.5, 1), (1.0, 2), (1.5, 2)] {
            let cfg = StableSamplerConfig::new(alpha, d, 1.0, 11, 1000).unwrap();
            let xs = samples(&cfg, 1.0, 100_000, 0);
            // E cos⟨z, X⟩ at z = e₁ and, in 2D, at z = (0.6, 0.8)
            let m = xs.iter().map(|x| x[0].cos()).sum::<f64>() / xs.len() as f64;
            assert!((m - (-1f64).exp()).abs() <= 0.01, "α={alpha} d={d}: {m}");
            if d == 2 {
                let m = xs.iter().map(|x| (0.6 * x[0] + 0.8 * x[1]).cos()).sum::<f64>() / xs.len() as f64;
                assert!((m - (-1f64).exp()).abs() <= 0.01, "isotropy: {m}");
            }
        }
    }

    #[test]
    fn self_similar_in_time() {
        // KS distance between dt^{-1/α} X(dt) and X(1)
        let cfg = StableSamplerConfig::new(1.3, 1, 1.0, 5, 1000).unwrap();
        let dt: f64 = 0.01;
        let n = 10_000;
        let mut a: Vec<f64> = samples(&cfg, dt, n, 1).iter().map(|x| x[0] * dt.powf(-1.0 / 1.3)).collect();
        let mut b: Vec<f64> = samples(&cfg, 1.0, n, 2).iter().map(|x| x[0]).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut ks) = (0, 0, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            ks = ks.max((i as f64 - j as f64).abs() / n as f64);
        }
        // 1% critical value of the two-sample statistic
        let crit = 1.628 * (2.0 / n as f64).sqrt();
        assert!(ks < crit, "{ks} vs {crit}");
    }

    #[test]
    fn symmetric() {
        let cfg = StableSamplerConfig::new(0.8, 2, 1.0, 3, 1000).unwrap();
        let n = 40_000;
        let xs = samples(&cfg, 1.0, n, 0);
        let mean_sign = xs.iter().map(|x| x[0].signum()).sum::<f64>() / n as f64;
        assert!(mean_sign.abs() <= 3.0 / (n as f64).sqrt(), "{mean_sign}");
    }

    #[test]
    fn interval_exit_time_and_bias_direction() {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let fine = StableSamplerConfig::new(1.0, 1, 1e-3, 42, 20_000).unwrap();
        let est = estimate_exit(&fine, &domain, &[0.0]).unwrap();
        assert!((est.mean_exit_time - 1.0).abs() <= 0.05, "{}", est.mean_exit_time);
        for w in est.survival.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        let coarse = StableSamplerConfig { dt: 1e-2, ..fine };
        let rough = estimate_exit(&coarse, &domain, &[0.0]).unwrap();
        assert!(est.mean_exit_time <= rough.mean_exit_time + 2.0 * est.ci_halfwidth);
    }

    #[test]
    fn scaling_of_exit_time() {
        let cfg = StableSamplerConfig::new(1.0, 1, 2e-3, 8, 10_000).unwrap();
        let small = estimate_exit(&cfg, &Domain::interval(-1.0, 1.0).unwrap(), &[0.0]).unwrap();
        let big = estimate_exit(&cfg, &Domain::interval(-2.0, 2.0).unwrap(), &[0.0]).unwrap();
        let ratio = big.mean_exit_time / small.mean_exit_time;
        assert!((ratio - 2.0).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn disk_exit_time() {
        // s_{B(0,1)}(0) = 2^{1−α}Γ(1)/(αΓ(1+α/2)Γ(α/2)); equals 2/π for α = 1
        let cfg = StableSamplerConfig::new(1.0, 2, 1e-3, 9, 5_000).unwrap();
        let est = estimate_exit(&cfg, &Domain::ball(vec![0.0, 0.0], 1.0).unwrap(), &[0.0, 0.0]).unwrap();
        let exact = 2.0 / PI;
        assert!((est.mean_exit_time - exact).abs() <= 0.05 * exact + est.ci_halfwidth, "{}", est.mean_exit_time);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let cfg = StableSamplerConfig::new(1.5, 1, 1e-2, 77, 2000).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_exit(&cfg, &domain, &[0.3]).unwrap())
        };
        let one = run(1);
        let three = run(3);
        assert_eq!(one, three);
        assert_eq!(one.exit_times(), three.exit_times());
    }

    #[test]
    fn survival_against_grid() {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let cfg = StableSamplerConfig::new(1.0, 1, 1e-3, 4, 20_000).unwrap();
        let est = estimate_exit(&cfg, &domain, &[0.0]).unwrap();
        let op = assemble(&rasterize(&domain, 0.01).unwrap(), 1.0).unwrap();
        let grid = op.survival(&[1.0], 0.01).unwrap();
        let centre = grid[0][op.nearest_node(&[0.0])];
        assert!((est.survival_at(1.0) - centre).abs() <= 0.03, "{} vs {centre}", est.survival_at(1.0));
    }

    #[test]
    fn survival_comparison_cases() {
        let cfg = StableSamplerConfig::new(1.0, 1, 2e-3, 21, 5_000).unwrap();
        let a = Domain::intervals(vec![(-4.5, -3.5), (3.5, 4.5)]).unwrap();
        let b = Domain::interval(-1.0, 1.0).unwrap();
        let verdicts = survival_comparison(&cfg, (&a, &[4.0]), (&b, &[0.0]), &[0.5, 1.0, 2.0]).unwrap();
        assert!(verdicts.iter().all(|v| v.holds), "{verdicts:?}");
        let same = survival_comparison(&cfg, (&b, &[0.0]), (&b, &[0.0]), &[0.5, 1.0]).unwrap();
        assert!(same.iter().all(|v| v.holds && v.survival_a == v.survival_b));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(StableSamplerConfig::new(1.0, 1, 1e-3, 0, 999).is_err());
        assert!(StableSamplerConfig::new(1.0, 1, 0.0, 0, 1000).is_err());
        let cfg = StableSamplerConfig::new(1.0, 1, 1e-3, 0, 1000).unwrap();
        let err = estimate_exit(&cfg, &Domain::interval(-1.0, 1.0).unwrap(), &[2.0]).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain(_)));
    }

    #[test]
    fn survival_csv() {
        let cfg = StableSamplerConfig::new(1.0, 1, 1e-2, 1, 1000).unwrap();
        let est = estimate_exit(&cfg, &Domain::interval(-1.0, 1.0).unwrap(), &[0.0]).unwrap();
        let mut buf = Vec::new();
        est.write_survival_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,survival,ci\n"));
        assert_eq!(text.lines().count(), est.survival.len() + 1);
        assert_eq!(est.survival[0].1, 1.0);
    }
}
