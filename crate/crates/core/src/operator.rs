//! The discrete killed generator: a symmetric jump-rate matrix between
//! inside cells plus a per-cell killing rate, assembled from cell integrals
//! of the kernel `A_{d,α} |x − y|^{−d−α}`.
//!
//! The matrix `H` with `H_ii = Σ_j w_ij + κ_i` and `H_ij = −w_ij` is the
//! discrete counterpart of `−Δ^{α/2}` with zero exterior data.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::constants::{norm_constant, StableParams};
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::quad::GaussLegendre;

/// Set of inside nodes, given by sorted indices.
pub type NodeSet = [usize];

#[derive(Debug, Clone)]
pub struct KilledOperator {
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub d: usize,
    weights: Vec<f64>,
    kill: Vec<f64>,
    coords: Vec<[f64; 2]>,
}

/// Expected exit times at the inside nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitTimeField {
    pub values: Vec<f64>,
}

impl ExitTimeField {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }
}

/// Split of `f|_U` into the discrete harmonic-measure part and the Green part.
#[derive(Debug, Clone)]
pub struct DynkinParts {
    /// `H_UU⁻¹ W_{U,Uᶜ} f|_{Uᶜ}`
    pub harmonic: Vec<f64>,
    /// `H_UU⁻¹ (H f)|_U`
    pub green: Vec<f64>,
}

/// Cell integrals `∫_{cell} |t|^{−2−α} dt` for unit cells at integer offsets.
struct KernelTable2d {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl KernelTable2d {
    fn new(alpha: f64, nx: usize, ny: usize) -> Self {
        let rules = [
            GaussLegendre::new(8),
            GaussLegendre::new(6),
            GaussLegendre::new(4),
            GaussLegendre::new(3),
        ];
        let m = nx.max(ny);
        let mut canon = vec![f64::NAN; m * m];
        let mut values = vec![0.0; nx * ny];
        for b in 0..ny {
            for a in 0..nx {
                if a == 0 && b == 0 {
                    continue;
                }
                let (p, q) = (a.min(b), a.max(b));
                let slot = p + m * q;
                if canon[slot].is_nan() {
                    canon[slot] = unit_cell_integral(alpha, p as f64, q as f64, &rules);
                }
                values[a + nx * b] = canon[slot];
            }
        }
        Self { nx, ny, values }
    }

    fn get(&self, da: usize, db: usize) -> f64 {
        debug_assert!(da < self.nx && db < self.ny);
        self.values[da + self.nx * db]
    }
}

fn unit_cell_integral(alpha: f64, a: f64, b: f64, rules: &[GaussLegendre; 4]) -> f64 {
    let reach = a.max(b);
    let (rule, sub) = if reach <= 2.0 {
        (&rules[0], 4)
    } else if reach <= 6.0 {
        (&rules[1], 2)
    } else if reach <= 16.0 {
        (&rules[2], 1)
    } else {
        (&rules[3], 1)
    };
    let e = -0.5 * (2.0 + alpha);
    let w = 1.0 / sub as f64;
    let mut total = 0.0;
    for si in 0..sub {
        let x0 = a - 0.5 + si as f64 * w;
        for sj in 0..sub {
            let y0 = b - 0.5 + sj as f64 * w;
            for (x, wx) in rule.mapped(x0, x0 + w) {
                for (y, wy) in rule.mapped(y0, y0 + w) {
                    total += wx * wy * (x * x + y * y).powf(e);
                }
            }
        }
    }
    total
}

/// `∫_{[k−½, k+½]} |t|^{−1−α} dt` for `k ≥ 1`, free of cancellation.
fn unit_cell_integral_1d(alpha: f64, k: f64) -> f64 {
    let lo = k - 0.5;
    let hi = k + 0.5;
    // lo^{−α} − hi^{−α} = hi^{−α} (exp(α ln(hi/lo)) − 1)
    hi.powf(-alpha) * (alpha * (1.0 / lo).ln_1p()).exp_m1() / alpha
}

/// `∫_{R² ∖ box} |x − y|^{−2−α} dy` for `x` strictly inside the box.
fn tail_2d(alpha: f64, x: [f64; 2], lo: [f64; 2], hi: [f64; 2], rule: &GaussLegendre) -> f64 {
    let (px, py) = (x[0], x[1]);
    let ang = |cx: f64, cy: f64| (cy - py).atan2(cx - px);
    let tr = ang(hi[0], hi[1]);
    let tl = ang(lo[0], hi[1]);
    let bl = ang(lo[0], lo[1]) + 2.0 * PI;
    let br = ang(hi[0], lo[1]) + 2.0 * PI;
    let pieces = [
        (tr, tl, 1usize),
        (tl, bl, 2),
        (bl, br, 3),
        (br, tr + 2.0 * PI, 0),
    ];
    let mut total = 0.0;
    for (t0, t1, side) in pieces {
        total += rule.integrate(t0, t1, |t| {
            let rho = match side {
                0 => (hi[0] - px) / t.cos(),
                1 => (hi[1] - py) / t.sin(),
                2 => (px - lo[0]) / -t.cos(),
                _ => (py - lo[1]) / -t.sin(),
            };
            rho.powf(-alpha)
        });
    }
    total / alpha
}

/// `∫_{[−½,½]²} |t|^{−α} dt`.
fn self_cell_moment_2d(alpha: f64) -> f64 {
    let rule = GaussLegendre::new(16);
    let ang = rule.integrate(0.0, 0.25 * PI, |t| t.cos().powf(alpha - 2.0));
    8.0 * 0.5f64.powf(2.0 - alpha) / (2.0 - alpha) * ang
}

/// Weight added to each inside nearest-neighbour link so that the second
/// difference reproduces the principal value over the node's own cell.
pub fn self_cell_correction(p: StableParams, h: f64) -> f64 {
    let (a, an) = (p.alpha, norm_constant(p));
    match p.d {
        1 => an * (0.5 * h).powf(2.0 - a) / ((2.0 - a) * h * h),
        _ => an * self_cell_moment_2d(a) * h.powf(-a) / 4.0,
    }
}

/// Assembles the killed operator on the inside cells of `grid`.
pub fn assemble(grid: &Grid, alpha: f64) -> Result<KilledOperator> {
    let p = StableParams::new(alpha, grid.d)?;
    let an = norm_constant(p);
    let h = grid.h;
    let n = grid.n_inside();
    let nodes = grid.nodes();
    let scale = an * h.powf(-alpha);
    let corr = self_cell_correction(p, h);
    let coords: Vec<[f64; 2]> = (0..n).map(|k| grid.node_center(k)).collect();
    let outside: Vec<[usize; 2]> = (0..grid.dims[1])
        .flat_map(|j| (0..grid.dims[0]).map(move |i| [i, j]))
        .filter(|&[i, j]| !grid.is_inside(i, j))
        .collect();
    let (box_lo, box_hi) = grid.box_bounds();

    let cell_weight: Box<dyn Fn([usize; 2], [usize; 2]) -> f64 + Sync> = match grid.d {
        1 => Box::new(move |u: [usize; 2], v: [usize; 2]| {
            let k = u[0].abs_diff(v[0]);
            scale * unit_cell_integral_1d(alpha, k as f64)
        }),
        _ => {
            let table = KernelTable2d::new(alpha, grid.dims[0], grid.dims[1]);
            Box::new(move |u: [usize; 2], v: [usize; 2]| {
                scale * table.get(u[0].abs_diff(v[0]), u[1].abs_diff(v[1]))
            })
        }
    };
    let tail_rule = GaussLegendre::new(16);
    let tail = |x: [f64; 2]| -> f64 {
        match grid.d {
            1 => an * ((x[0] - box_lo[0]).powf(-alpha) + (box_hi[0] - x[0]).powf(-alpha)) / alpha,
            _ => an * tail_2d(alpha, x, box_lo, box_hi, &tail_rule),
        }
    };

    let mut weights = vec![0.0; n * n];
    weights.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let u = nodes[i];
        for (j, w) in row.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let v = nodes[j];
            let mut value = cell_weight(u, v);
            if u[0].abs_diff(v[0]) + u[1].abs_diff(v[1]) == 1 {
                value += corr;
            }
            *w = value;
        }
    });
    let kill: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = nodes[i];
            let near: f64 = outside.iter().map(|&v| cell_weight(u, v)).sum();
            near + tail(coords[i])
        })
        .collect();

    for i in 0..n {
        for j in 0..n {
            let w = weights[i * n + j];
            if !w.is_finite() || w < 0.0 || (i != j && w == 0.0) {
                return Err(Error::Assembly { row: i, col: j, value: w });
            }
        }
        if !kill[i].is_finite() || kill[i] <= 0.0 {
            return Err(Error::Assembly { row: i, col: i, value: kill[i] });
        }
    }
    Ok(KilledOperator { n, h, alpha, d: grid.d, weights, kill, coords })
}

impl KilledOperator {
    /// Builds an operator from explicit weights (row-major `n × n`) and
    /// killing rates, checking symmetry and signs.
    pub fn from_parts(
        h: f64,
        alpha: f64,
        d: usize,
        weights: Vec<f64>,
        kill: Vec<f64>,
        coords: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let n = kill.len();
        if weights.len() != n * n || coords.len() != n {
            return Err(Error::InvalidParams("inconsistent operator dimensions".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                let bad = !w.is_finite() || w < 0.0 || (i == j && w != 0.0) || w != weights[j * n + i];
                if bad {
                    return Err(Error::Assembly { row: i, col: j, value: w });
                }
            }
            if !kill[i].is_finite() || kill[i] < 0.0 {
                return Err(Error::Assembly { row: i, col: i, value: kill[i] });
            }
        }
        Ok(Self { n, h, alpha, d, weights, kill, coords })
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kill(&self) -> &[f64] {
        &self.kill
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.weights[i * self.n..(i + 1) * self.n].iter().sum::<f64>() + self.kill[i]
    }

    /// Dense `H`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diagonal(i)
            } else {
                -self.weights[i * n + j]
            }
        })
    }

    /// Principal submatrix `H_UU`.
    pub fn restricted_matrix(&self, subset: &NodeSet) -> DMatrix<f64> {
        let m = subset.len();
        DMatrix::from_fn(m, m, |a, b| {
            let (i, j) = (subset[a], subset[b]);
            if i == j {
                self.diagonal(i)
            } else {
                -self.weights[i * self.n + j]
            }
        })
    }

    /// `H v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.weights[i * self.n..(i + 1) * self.n];
                let off: f64 = row.iter().zip(v).map(|(w, x)| w * x).sum();
                self.diagonal(i) * v[i] - off
            })
            .collect()
    }

    /// Discrete inner product `Σ u_i v_i h^d`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let d2 = |c: &[f64; 2]| (0..self.d).map(|k| (c[k] - x[k]).powi(2)).sum::<f64>();
        (0..self.n)
            .min_by(|&a, &b| d2(&self.coords[a]).total_cmp(&d2(&self.coords[b])))
            .unwrap_or(0)
    }

    fn factor(&self, m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
        let n = m.nrows();
        Cholesky::new(m).ok_or(Error::NotPositiveDefinite(n))
    }

    /// Solves `H s = 1`.
    pub fn exit_time(&self) -> Result<ExitTimeField> {
        let chol = self.factor(self.matrix())?;
        let s = chol.solve(&DVector::from_element(self.n, 1.0));
        let values: Vec<f64> = s.iter().copied().collect();
        if values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NotPositiveDefinite(self.n));
        }
        Ok(ExitTimeField { values })
    }

    /// Largest expected exit time of the process killed on leaving `subset`.
    pub fn sup_exit_time(&self, subset: &NodeSet) -> Result<f64> {
        check_subset(subset, self.n)?;
        let chol = self.factor(self.restricted_matrix(subset))?;
        let s = chol.solve(&DVector::from_element(subset.len(), 1.0));
        Ok(s.max())
    }

    /// Splits `f|_U` as harmonic part plus Green part; the identity
    /// `f|_U = harmonic + green` holds exactly for any `f`.
    pub fn dynkin_decomposition(&self, subset: &NodeSet, f: &[f64]) -> Result<DynkinParts> {
        check_subset(subset, self.n)?;
        assert_eq!(f.len(), self.n);
        let mut in_u = vec![false; self.n];
        for &i in subset {
            in_u[i] = true;
        }
        let chol = self.factor(self.restricted_matrix(subset))?;
        let exterior = DVector::from_iterator(
            subset.len(),
            subset.iter().map(|&i| {
                (0..self.n)
                    .filter(|&j| !in_u[j])
                    .map(|j| self.weights[i * self.n + j] * f[j])
                    .sum::<f64>()
            }),
        );
        let hf = self.apply(f);
        let source = DVector::from_iterator(subset.len(), subset.iter().map(|&i| hf[i]));
        Ok(DynkinParts {
            harmonic: chol.solve(&exterior).iter().copied().collect(),
            green: chol.solve(&source).iter().copied().collect(),
        })
    }

    /// Discrete Green operator `H_UU⁻¹ g` on `subset`.
    pub fn green_apply(&self, subset: &NodeSet, g: &[f64]) -> Result<Vec<f64>> {
        check_subset(subset, self.n)?;
        let chol = self.factor(self.restricted_matrix(subset))?;
        Ok(chol.solve(&DVector::from_column_slice(g)).iter().copied().collect())
    }

    /// Survival probabilities `u(t) = e^{−tH} 1` at the requested times,
    /// by backward Euler with step `dt` and `dt/2` combined by Richardson
    /// extrapolation.
    pub fn survival(&self, times: &[f64], dt: f64) -> Result<Vec<Vec<f64>>> {
        let run = |step: f64| -> Result<Vec<Vec<f64>>> {
            let mut m = self.matrix() * step;
            for i in 0..self.n {
                m[(i, i)] += 1.0;
            }
            let chol = self.factor(m)?;
            let mut u = DVector::from_element(self.n, 1.0);
            let mut t = 0.0;
            let mut out = Vec::with_capacity(times.len());
            for &target in times {
                let steps = ((target - t) / step).round().max(0.0) as usize;
                for _ in 0..steps {
                    chol.solve_mut(&mut u);
                }
                t += steps as f64 * step;
                out.push(u.iter().copied().collect());
            }
            Ok(out)
        };
        let coarse = run(dt)?;
        let fine = run(0.5 * dt)?;
        Ok(coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| c.iter().zip(f).map(|(a, b)| 2.0 * b - a).collect())
            .collect())
    }

    /// Dumps the operator as text: header `n alpha h`, then `i j value` for
    /// each positive weight with `i < j`, then `kill i value`.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.n, self.alpha, self.h)?;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let w = self.weights[i * self.n + j];
                if w > 0.0 {
                    writeln!(out, "{i} {j} {w:e}")?;
                }
            }
        }
        for (i, k) in self.kill.iter().enumerate() {
            writeln!(out, "kill {i} {k:e}")?;
        }
        Ok(())
    }
}

fn check_subset(subset: &NodeSet, n: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::Degenerate("empty node subset".into()));
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) || subset[subset.len() - 1] >= n {
        return Err(Error::InvalidParams("node subset must be sorted, unique and in range".into()));
    }
    Ok(())
}
