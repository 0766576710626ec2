//! Low eigenpairs of the killed operator, the spectral gap, the ground-state
//! energy form and the level-set quantities built from `φ₁`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{unit_ball_exit_center, unit_ball_volume, StableParams};
use crate::eigen::lowest_eigenpairs;
use crate::error::{Error, Result};
use crate::operator::KilledOperator;

/// Largest number of eigenpairs computed at once.
pub const MAX_PAIRS: usize = 6;

/// Ascending eigenvalues with eigenvectors normalized by `Σ φ² h^d = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub lambdas: Vec<f64>,
    pub phis: Vec<Vec<f64>>,
    pub h: f64,
    pub alpha: f64,
    pub d: usize,
}

impl EigenSolution {
    pub fn lambda1(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn lambda2(&self) -> f64 {
        self.lambdas[1]
    }

    pub fn phi1(&self) -> &[f64] {
        &self.phis[0]
    }

    pub fn phi2(&self) -> &[f64] {
        &self.phis[1]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// `max_{i≤j} |⟨φ_i, φ_j⟩ h^d − δ_ij|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let hd = self.cell_volume();
        let mut worst = 0.0f64;
        for i in 0..self.phis.len() {
            for j in i..self.phis.len() {
                let dot: f64 = self.phis[i].iter().zip(&self.phis[j]).map(|(a, b)| a * b).sum::<f64>() * hd;
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    /// Maximum of `φ₁`.
    pub fn sup_phi1(&self) -> f64 {
        self.phi1().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The `k` smallest eigenpairs of `H`; `2 ≤ k ≤ min(n, 6)`.
///
/// Each eigenvector has its first coordinate of magnitude above `1e-8 ‖φ‖∞`
/// made positive, which makes `φ₁` positive.
pub fn eigenpairs(op: &KilledOperator, k: usize) -> Result<EigenSolution> {
    let n = op.n;
    if k < 2 || k > n || k > MAX_PAIRS {
        return Err(Error::InvalidParams(format!(
            "eigenpair count {k} must lie in [2, min(n, {MAX_PAIRS})] with n = {n}"
        )));
    }
    let mut a = vec![0.0; n * n];
    let w = op.weights();
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = if i == j { op.diagonal(i) } else { -w[i * n + j] };
        }
    }
    let (lambdas, mut phis) = lowest_eigenpairs(a, n, k)?;
    let scale = op.cell_volume().sqrt().recip();
    for phi in phis.iter_mut() {
        let top = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lead = phi.iter().copied().find(|v| v.abs() > 1e-8 * top).unwrap_or(1.0);
        let s = if lead < 0.0 { -scale } else { scale };
        for v in phi.iter_mut() {
            *v *= s;
        }
    }
    if !(lambdas[0] > 0.0) {
        return Err(Error::Degenerate(format!("λ₁ = {} is not positive", lambdas[0])));
    }
    if !(lambdas[1] > lambdas[0]) {
        return Err(Error::Degenerate(format!("λ₁ = {} is not simple", lambdas[0])));
    }
    if let Some(i) = phis[0].iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate(format!("ground state vanishes or changes sign at node {i}")));
    }
    Ok(EigenSolution { lambdas, phis, h: op.h, alpha: op.alpha, d: op.d })
}

pub fn spectral_gap(sol: &EigenSolution) -> f64 {
    sol.lambda2() - sol.lambda1()
}

/// `½ Σ_{i≠j} w_ij (f_i − f_j)² φ₁(i) φ₁(j) h^d` after projecting `f` to
/// `Σ f φ₁² h^d = 0` and scaling to `Σ f² φ₁² h^d = 1`.
///
/// Returns 0 when the projected `f` vanishes (constant input). Row sums are
/// formed in parallel and added in row order.
pub fn variational_energy(op: &KilledOperator, f: &[f64], phi1: &[f64]) -> Result<f64> {
    let n = op.n;
    if f.len() != n || phi1.len() != n {
        return Err(Error::InvalidParams(format!("vectors must have length {n}")));
    }
    if let Some(i) = phi1.iter().position(|&v| v == 0.0 || !v.is_finite()) {
        return Err(Error::Degenerate(format!("φ₁ vanishes at node {i}")));
    }
    let hd = op.cell_volume();
    let weight = |g: &[f64], e: usize| g.iter().zip(phi1).map(|(a, p)| a.powi(e as i32) * p * p).sum::<f64>() * hd;
    let mass = phi1.iter().map(|p| p * p).sum::<f64>() * hd;
    let mean = weight(f, 1) / mass;
    let mut g: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let norm = weight(&g, 2).sqrt();
    let fscale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm <= 1e-14 * fscale.max(f64::MIN_POSITIVE) * mass.sqrt() {
        return Ok(0.0);
    }
    for v in g.iter_mut() {
        *v /= norm;
    }
    let w = op.weights();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &w[i * n..(i + 1) * n];
            let s: f64 = row.iter().zip(&g).zip(phi1).map(|((wij, gj), pj)| wij * (g[i] - gj).powi(2) * pj).sum();
            s * phi1[i]
        })
        .collect();
    Ok(0.5 * rows.iter().sum::<f64>() * hd)
}

/// `Σ_{i,j} (u_i v_j − u_j v_i)² h^{2d}` for vectors on the same grid.
pub fn antisymmetric_norm(u: &[f64], v: &[f64], cell_volume: f64) -> f64 {
    // expands to 2(‖u‖²‖v‖² − ⟨u,v⟩²)
    let uu: f64 = u.iter().map(|a| a * a).sum::<f64>() * cell_volume;
    let vv: f64 = v.iter().map(|a| a * a).sum::<f64>() * cell_volume;
    let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * cell_volume;
    2.0 * (uu * vv - uv * uv)
}

/// Antisymmetric double sum of `φ₂ ⊗ φ₁`; equals 2 for orthonormal vectors.
pub fn orthogonality_identity_check(sol: &EigenSolution) -> f64 {
    antisymmetric_norm(sol.phi2(), sol.phi1(), sol.cell_volume())
}

/// Level set `U = {φ₁ ≥ M/2}` and the quantities attached to it.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSetReport {
    /// `M = max φ₁`
    pub m: f64,
    /// Node indices of `U`, ascending.
    pub u: Vec<usize>,
    pub measure_u: f64,
    pub sup_s_u: f64,
    /// `λ₁ · sup s_U`
    pub sandwich: f64,
    /// `2 |U|^{−1/2}`
    pub m_bound: f64,
    pub m_bound_holds: bool,
    /// `C₀ (sup s_U)^{d/α}` with `C₀ = s_{B₁}(0)^{−d/α} |B₁|`
    pub measure_lower: f64,
    pub measure_lower_holds: bool,
    /// Whether `sandwich ∈ [1/2, 2]`.
    pub sandwich_exact: bool,
}

pub fn level_set_report(sol: &EigenSolution, op: &KilledOperator) -> Result<LevelSetReport> {
    let m = sol.sup_phi1();
    let u: Vec<usize> = (0..op.n).filter(|&i| sol.phi1()[i] >= 0.5 * m).collect();
    let measure_u = u.len() as f64 * op.cell_volume();
    let sup_s_u = op.sup_exit_time(&u)?;
    let sandwich = sol.lambda1() * sup_s_u;
    let p = StableParams::new(sol.alpha, sol.d)?;
    let ratio = sol.d as f64 / sol.alpha;
    let c0 = unit_ball_exit_center(p).powf(-ratio) * unit_ball_volume(sol.d);
    let measure_lower = c0 * sup_s_u.powf(ratio);
    let m_bound = 2.0 / measure_u.sqrt();
    Ok(LevelSetReport {
        m,
        measure_u,
        sup_s_u,
        sandwich,
        m_bound,
        m_bound_holds: m <= m_bound,
        measure_lower,
        measure_lower_holds: measure_u >= measure_lower,
        sandwich_exact: (0.5..=2.0).contains(&sandwich),
        u,
    })
}

/// CSV with a `#` header carrying `λ₁, λ₂, h, α`, then one row per node:
/// `node, x[, y], phi1, phi2`.
pub fn write_eigen_csv<W: Write>(sol: &EigenSolution, op: &KilledOperator, mut out: W) -> Result<()> {
    writeln!(
        out,
        "# lambda1={:.12e} lambda2={:.12e} h={} alpha={}",
        sol.lambda1(),
        sol.lambda2(),
        sol.h,
        sol.alpha
    )?;
    if sol.d == 1 {
        writeln!(out, "node,x,phi1,phi2")?;
    } else {
        writeln!(out, "node,x,y,phi1,phi2")?;
    }
    for (i, c) in op.coords().iter().enumerate() {
        let (a, b) = (sol.phi1()[i], sol.phi2()[i]);
        if sol.d == 1 {
            writeln!(out, "{i},{},{a:.12e},{b:.12e}", c[0])?;
        } else {
            writeln!(out, "{i},{},{},{a:.12e},{b:.12e}", c[0], c[1])?;
        }
    }
    Ok(())
}
