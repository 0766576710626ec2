//! Closed-form bounds evaluated against computed spectra, with pass/fail
//! verdicts and the two-ball decay experiment.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{
    ball_exit_time_exact, gap_lower_bound, lambda1_upper_ball, theorem1_constant, unit_ball_volume,
    variational_constant, StableParams, Variant,
};
use crate::error::{Error, Result};
use crate::geometry::{l_shape_mask, rasterize, Domain, Shape};
use crate::operator::{assemble, KilledOperator};
use crate::spectra::{
    eigenpairs, level_set_report, orthogonality_identity_check, spectral_gap, variational_energy,
    EigenSolution, LevelSetReport,
};

/// Relative tolerance under which a printed value counts as reproduced.
const PRINTED_MATCH: f64 = 1e-12;

/// Smallest number of inside cells per component in the two-ball experiment.
pub const MIN_COMPONENT_CELLS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub thm1: bool,
    pub thm2_stated: bool,
    pub thm2_derived: bool,
    pub prop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub label: String,
    pub alpha: f64,
    pub d: usize,
    pub h: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gap: f64,
    pub sup_phi1: f64,
    pub diameter: f64,
    pub inscribed_radius: f64,
    pub thm1_rhs: f64,
    pub thm2_rhs_stated: f64,
    pub thm2_rhs_derived: f64,
    pub prop_rhs: f64,
    /// Multiplicative slack `1 + 10h` applied to `prop_rhs`.
    pub prop_slack: f64,
    /// Printed value of the stated gap bound with `λ₁` replaced by the
    /// ball bound, for the interval, disk and square cases.
    pub printed_value: Option<f64>,
    /// The same quantity as evaluated here.
    pub pipeline_value: Option<f64>,
    /// Set when the printed value is not reproduced.
    pub printed_discrepancy: bool,
    pub verdicts: Verdicts,
}

impl BoundReport {
    /// `thm1_rhs / sup φ₁`; at least 1 when the bound holds.
    pub fn thm1_margin(&self) -> f64 {
        self.thm1_rhs / self.sup_phi1
    }

    /// `gap / thm2_rhs_derived`; at least 1 when the bound holds.
    pub fn thm2_margin(&self) -> f64 {
        self.gap / self.thm2_rhs_derived
    }
}

/// `(max φ₁, c λ₁^{d/(2α)}, verdict)`.
pub fn verify_theorem1(sol: &EigenSolution, p: StableParams) -> (f64, f64, bool) {
    let lhs = sol.sup_phi1();
    let rhs = theorem1_constant(p) * sol.lambda1().powf(p.d as f64 / (2.0 * p.alpha));
    (lhs, rhs, lhs <= rhs)
}

/// `(λ₁, ball bound at the inscribed radius, verdict with slack 1 + 10h)`.
pub fn verify_proposition(sol: &EigenSolution, domain: &Domain, p: StableParams) -> (f64, f64, bool) {
    let (r, _) = domain.inscribed_radius();
    let rhs = lambda1_upper_ball(p, r);
    let lhs = sol.lambda1();
    (lhs, rhs, lhs <= rhs * (1.0 + 10.0 * sol.h))
}

/// A printed gap bound together with the value the formulas give.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalCase {
    pub label: String,
    pub alpha: f64,
    pub d: usize,
    /// Ball bound used in place of `λ₁`.
    pub lambda1: f64,
    pub diameter: f64,
    pub pipeline_stated: f64,
    pub pipeline_derived: f64,
    pub printed: f64,
    pub discrepancy: bool,
}

fn canonical(label: &str, d: usize, diameter: f64, printed: f64) -> CanonicalCase {
    let p = StableParams { alpha: 1.0, d };
    let lambda1 = lambda1_upper_ball(p, 1.0);
    let pipeline_stated = gap_lower_bound(p, lambda1, diameter, Variant::Stated);
    CanonicalCase {
        label: label.to_string(),
        alpha: 1.0,
        d,
        lambda1,
        diameter,
        pipeline_stated,
        pipeline_derived: gap_lower_bound(p, lambda1, diameter, Variant::Derived),
        printed,
        discrepancy: (pipeline_stated - printed).abs() > PRINTED_MATCH * printed,
    }
}

/// Interval `(−1, 1)`, unit disk and square `(−1, 1)²` at `α = 1`, each
/// with the radius-1 ball bound in place of `λ₁`.
pub fn canonical_cases() -> Vec<CanonicalCase> {
    vec![
        canonical("interval", 1, 2.0, 1.0 / (3.0 * PI * PI)),
        canonical("disk", 2, 2.0, 3.0 / (256.0 * PI.sqrt())),
        canonical("square", 2, 2.0 * 2f64.sqrt(), 3.0 / (512.0 * (2.0 * PI).sqrt())),
    ]
}

fn canonical_for(domain: &Domain, alpha: f64) -> Option<CanonicalCase> {
    if alpha != 1.0 {
        return None;
    }
    let name = match domain.shape() {
        Shape::Intervals { intervals } if intervals.as_slice() == [(-1.0, 1.0)] => "interval",
        Shape::Ball(b) if b.radius == 1.0 && b.center == [0.0, 0.0] => "disk",
        Shape::Box { lo, hi } if lo == &[-1.0, -1.0] && hi == &[1.0, 1.0] => "square",
        _ => return None,
    };
    canonical_cases().into_iter().find(|c| c.label == name)
}

/// Full report for one computed spectrum on `domain`.
pub fn verify_theorem2(sol: &EigenSolution, domain: &Domain, p: StableParams) -> BoundReport {
    verify_labeled(&domain.to_string(), sol, domain, p)
}

fn verify_labeled(label: &str, sol: &EigenSolution, domain: &Domain, p: StableParams) -> BoundReport {
    let diameter = domain.diameter();
    let gap = spectral_gap(sol);
    let (sup_phi1, thm1_rhs, thm1) = verify_theorem1(sol, p);
    let (_, prop_rhs, prop) = verify_proposition(sol, domain, p);
    let thm2_rhs_stated = gap_lower_bound(p, sol.lambda1(), diameter, Variant::Stated);
    let thm2_rhs_derived = gap_lower_bound(p, sol.lambda1(), diameter, Variant::Derived);
    let case = canonical_for(domain, p.alpha);
    BoundReport {
        label: label.to_string(),
        alpha: p.alpha,
        d: p.d,
        h: sol.h,
        lambda1: sol.lambda1(),
        lambda2: sol.lambda2(),
        gap,
        sup_phi1,
        diameter,
        inscribed_radius: domain.inscribed_radius().0,
        thm1_rhs,
        thm2_rhs_stated,
        thm2_rhs_derived,
        prop_rhs,
        prop_slack: 1.0 + 10.0 * sol.h,
        printed_value: case.as_ref().map(|c| c.printed),
        pipeline_value: case.as_ref().map(|c| c.pipeline_stated),
        printed_discrepancy: case.is_some_and(|c| c.discrepancy),
        verdicts: Verdicts {
            thm1,
            thm2_stated: gap >= thm2_rhs_stated,
            thm2_derived: gap >= thm2_rhs_derived,
            prop,
        },
    }
}

/// Rayleigh quotient `⟨Hf, f⟩ / ⟨f, f⟩` of the exact exit time of the
/// inscribed ball, extended by zero; returned with the ball bound.
pub fn proposition_rayleigh_check(op: &KilledOperator, domain: &Domain, p: StableParams) -> Result<(f64, f64)> {
    let (r, center) = domain.inscribed_radius();
    let f: Vec<f64> = op
        .coords()
        .iter()
        .map(|c| {
            let x: Vec<f64> = (0..p.d).map(|k| c[k] - center[k]).collect();
            ball_exit_time_exact(p, r, &x).unwrap_or(0.0)
        })
        .collect();
    let ff = op.inner(&f, &f);
    if !(ff > 0.0) {
        return Err(Error::GridTooCoarse { cells: 0, min: 1 });
    }
    Ok((op.inner(&op.apply(&f), &f) / ff, lambda1_upper_ball(p, r)))
}

/// One separation of the two-ball experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBallPoint {
    pub separation: f64,
    pub lambda1: f64,
    pub gap: f64,
    /// Derived gap lower bound for the two-ball domain.
    pub lower: f64,
    /// Discrete energy of `1_{B(a)} − 1_{B(−a)}`.
    pub upper_energy: f64,
    /// `8C r^{−d−α} (Σ_{B(a)} φ₁ h^d)²`
    pub upper_chain: f64,
    /// `C′ λ₁(B₁)^{d/α} r^{−d−α}` with `C′ = 8C c² |B₁|²`.
    pub upper_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBallFit {
    pub alpha: f64,
    pub d: usize,
    pub h: f64,
    /// `λ₁` of a single unit ball at the same `h`.
    pub lambda1_single: f64,
    pub points: Vec<TwoBallPoint>,
    /// Least-squares slope of `log gap` against `log r`.
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn solve_domain(domain: &Domain, h: f64, alpha: f64, k: usize) -> Result<(KilledOperator, EigenSolution)> {
    let grid = rasterize(domain, h)?;
    let op = assemble(&grid, alpha)?;
    let sol = eigenpairs(&op, k)?;
    Ok((op, sol))
}

/// Gap of two unit balls at `(±r, 0, …)` for each separation `r > 2`.
pub fn two_ball_experiment(separations: &[f64], p: StableParams, h: f64) -> Result<TwoBallFit> {
    if separations.len() < 2 || separations.iter().any(|&r| !(r > 2.0)) {
        return Err(Error::InvalidParams("need at least two separations, each above 2".into()));
    }
    let (a, d) = (p.alpha, p.d as f64);
    let single = Domain::ball(vec![0.0; p.d], 1.0)?;
    let (_, single_sol) = solve_domain(&single, h, a, 2)?;
    let lambda1_single = single_sol.lambda1();
    let c_var = variational_constant(p);
    let c_prime = 8.0 * c_var * theorem1_constant(p).powi(2) * unit_ball_volume(p.d).powi(2);

    let points = separations
        .par_iter()
        .map(|&r| -> Result<TwoBallPoint> {
            let domain = Domain::two_balls(p.d, r)?;
            let grid = rasterize(&domain, h)?;
            let op = assemble(&grid, a)?;
            let side: Vec<bool> = op.coords().iter().map(|c| c[0] > 0.0).collect();
            let right = side.iter().filter(|&&s| s).count();
            let fewest = right.min(op.n - right);
            if fewest < MIN_COMPONENT_CELLS {
                return Err(Error::GridTooCoarse { cells: fewest, min: MIN_COMPONENT_CELLS });
            }
            let sol = eigenpairs(&op, 2)?;
            let sign: Vec<f64> = side.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect();
            let upper_energy = variational_energy(&op, &sign, sol.phi1())?;
            let mass: f64 = sol.phi1().iter().zip(&side).filter(|(_, &s)| s).map(|(v, _)| v).sum::<f64>()
                * op.cell_volume();
            let decay = r.powf(-d - a);
            Ok(TwoBallPoint {
                separation: r,
                lambda1: sol.lambda1(),
                gap: spectral_gap(&sol),
                lower: gap_lower_bound(p, sol.lambda1(), domain.diameter(), Variant::Derived),
                upper_energy,
                upper_chain: 8.0 * c_var * decay * mass * mass,
                upper_constant: c_prime * lambda1_single.powf(d / a) * decay,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = points.iter().map(|q| q.separation.ln()).collect();
    let y: Vec<f64> = points.iter().map(|q| q.gap.ln()).collect();
    let (slope, intercept) = fit_line(&x, &y);
    Ok(TwoBallFit { alpha: a, d: p.d, h, lambda1_single, points, slope, intercept })
}

/// Tolerances applied by the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative tolerance of the ground-state energy identity.
    pub identity_rel: f64,
    /// Absolute tolerance of the antisymmetric normalization check.
    pub orthogonality_abs: f64,
    pub sandwich_lo: f64,
    pub sandwich_hi: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { identity_rel: 1e-8, orthogonality_abs: 1e-8, sandwich_lo: 0.45, sandwich_hi: 2.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub label: String,
    pub domain: Domain,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub alphas: Vec<f64>,
    pub entries: Vec<SuiteEntry>,
    pub tolerances: Tolerances,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self::standard(1.0)
    }
}

impl SuiteConfig {
    /// The six standard domains at `α ∈ {0.5, 1, 1.5}`; `refine` divides
    /// every grid spacing.
    pub fn standard(refine: f64) -> Self {
        let h1 = 0.004 / refine;
        let h2 = 0.04 / refine;
        let entry = |label: &str, domain: Domain, h: f64| SuiteEntry { label: label.into(), domain, h };
        let l_shape = l_shape_mask(h2).and_then(Domain::mask).expect("valid mask");
        Self {
            alphas: vec![0.5, 1.0, 1.5],
            entries: vec![
                entry("interval", Domain::interval(-1.0, 1.0).expect("valid"), 0.5 * h1),
                entry("interval_r2", Domain::interval(-2.0, 2.0).expect("valid"), h1),
                entry("two_intervals", Domain::two_balls(1, 4.0).expect("valid"), h1),
                entry("square", Domain::cube(vec![-1.0, -1.0], vec![1.0, 1.0]).expect("valid"), h2),
                entry("disk", Domain::ball(vec![0.0, 0.0], 1.0).expect("valid"), h2),
                entry("l_shape", l_shape, h2),
            ],
            tolerances: Tolerances::default(),
        }
    }
}

/// Everything computed for one (domain, α) pair.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub report: BoundReport,
    /// Energy of `φ₂/φ₁`.
    pub energy_gap: f64,
    pub identity_ok: bool,
    pub orthogonality: f64,
    pub orthogonality_ok: bool,
    pub level_set: LevelSetReport,
    pub sandwich_ok: bool,
}

impl SuiteResult {
    pub fn all_pass(&self) -> bool {
        let v = self.report.verdicts;
        v.thm1 && v.thm2_derived && v.prop && self.identity_ok && self.orthogonality_ok
    }
}

pub fn run_entry(entry: &SuiteEntry, alpha: f64, tol: &Tolerances) -> Result<SuiteResult> {
    let p = StableParams::new(alpha, entry.domain.dim())?;
    let (op, sol) = solve_domain(&entry.domain, entry.h, alpha, 2)?;
    let report = verify_labeled(&entry.label, &sol, &entry.domain, p);
    let f: Vec<f64> = sol.phi2().iter().zip(sol.phi1()).map(|(a, b)| a / b).collect();
    let energy_gap = variational_energy(&op, &f, sol.phi1())?;
    let orthogonality = orthogonality_identity_check(&sol);
    let level_set = level_set_report(&sol, &op)?;
    Ok(SuiteResult {
        identity_ok: (energy_gap - report.gap).abs() <= tol.identity_rel * report.gap,
        orthogonality_ok: (orthogonality - 2.0).abs() <= tol.orthogonality_abs,
        sandwich_ok: (tol.sandwich_lo..=tol.sandwich_hi).contains(&level_set.sandwich),
        report,
        energy_gap,
        orthogonality,
        level_set,
    })
}

/// Runs every (entry, α) pair; results follow entry order, then α order.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<SuiteResult>> {
    let jobs: Vec<(&SuiteEntry, f64)> =
        config.entries.iter().flat_map(|e| config.alphas.iter().map(move |&a| (e, a))).collect();
    jobs.par_iter().map(|(e, a)| run_entry(e, *a, &config.tolerances)).collect()
}

/// Summary CSV: `domain,alpha,lambda1,lambda2,gap,thm1_margin,thm2_margin`.
pub fn write_summary_csv<W: Write>(reports: &[BoundReport], mut out: W) -> Result<()> {
    writeln!(out, "domain,alpha,lambda1,lambda2,gap,thm1_margin,thm2_margin")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{:.10e},{:.10e},{:.10e},{:.6e},{:.6e}",
            r.label,
            r.alpha,
            r.lambda1,
            r.lambda2,
            r.gap,
            r.thm1_margin(),
            r.thm2_margin()
        )?;
    }
    Ok(())
}
