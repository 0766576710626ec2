//! Lowest eigenpairs of a dense symmetric matrix.
//!
//! Householder reduction to tridiagonal form, Sturm-sequence bisection for
//! the requested eigenvalues, inverse iteration on the tridiagonal matrix,
//! back-transformation through the stored reflectors. Every step is
//! sequential with a fixed operation order, so the output is bit-for-bit
//! reproducible.

use crate::error::{Error, Result};

struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// Reflector `k` acts on coordinates `k+1..n`: `I − β v vᵀ`.
    reflectors: Vec<(f64, Vec<f64>)>,
}

fn tridiagonalize(mut a: Vec<f64>, n: usize) -> Tridiagonal {
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        diag[k] = a[k * n + k];
        let x: Vec<f64> = a[k * n + k + 1..(k + 1) * n].to_vec();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tail = x[1..].iter().map(|v| v * v).sum::<f64>();
        if norm == 0.0 || tail == 0.0 {
            off[k] = x[0];
            reflectors.push((0.0, Vec::new()));
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let beta = 2.0 / v.iter().map(|t| t * t).sum::<f64>();
        off[k] = alpha;

        let m = n - k - 1;
        let base = k + 1;
        // p = β A_sub v
        for i in 0..m {
            let row = &a[(base + i) * n + base..(base + i + 1) * n];
            p[i] = beta * row.iter().zip(&v).map(|(r, s)| r * s).sum::<f64>();
        }
        let kcoef = 0.5 * beta * p[..m].iter().zip(&v).map(|(s, t)| s * t).sum::<f64>();
        for i in 0..m {
            p[i] -= kcoef * v[i];
        }
        // A_sub ← A_sub − v wᵀ − w vᵀ
        for i in 0..m {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(base + i) * n + base..(base + i + 1) * n];
            for (j, r) in row.iter_mut().enumerate() {
                *r -= vi * p[j] + wi * v[j];
            }
        }
        reflectors.push((beta, v));
    }
    if n > 0 {
        diag[n - 1] = a[n * n - 1];
    }
    Tridiagonal { diag, off, reflectors }
}

impl Tridiagonal {
    fn n(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            let qq = if q.abs() < tiny { tiny.copysign(q) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `index`-th smallest eigenvalue (0-based).
    fn eigenvalue(&self, index: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE) {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T − shift I) x = b` in place by Gaussian elimination with
    /// partial pivoting; zero pivots are replaced by `eps · ‖T‖`.
    fn shifted_solve(&self, shift: f64, b: &mut [f64], norm: f64) {
        let n = self.n();
        let floor = f64::EPSILON * norm;
        // rows hold (sub, diag, sup, sup2) after elimination
        let mut dg: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut up: Vec<f64> = self.off.clone();
        let mut up2 = vec![0.0; n];
        let mut lower = self.off.clone();
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        for i in 0..n.saturating_sub(1) {
            if lower[i].abs() > dg[i].abs() {
                // swap rows i and i+1
                swapped[i] = true;
                let (a0, a1, a2) = (dg[i], up[i], up2[i]);
                dg[i] = lower[i];
                up[i] = dg[i + 1];
                up2[i] = if i + 1 < n - 1 { up[i + 1] } else { 0.0 };
                let m = a0 / dg[i];
                mult[i] = m;
                dg[i + 1] = a1 - m * up[i];
                if i + 1 < n - 1 {
                    up[i + 1] = a2 - m * up2[i];
                }
                b.swap(i, i + 1);
            } else {
                if dg[i] == 0.0 {
                    dg[i] = floor;
                }
                let m = lower[i] / dg[i];
                mult[i] = m;
                dg[i + 1] -= m * up[i];
                up2[i] = 0.0;
            }
            b[i + 1] -= mult[i] * b[i];
            lower[i] = 0.0;
        }
        if n > 0 && dg[n - 1] == 0.0 {
            dg[n - 1] = floor;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= up[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= up2[i] * b[i + 2];
            }
            let piv = if dg[i] == 0.0 { floor } else { dg[i] };
            b[i] = s / piv;
        }
    }

    /// Applies `Q = H_0 H_1 ⋯` to a tridiagonal eigenvector.
    fn back_transform(&self, y: &mut [f64]) {
        for (k, (beta, v)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let seg = &mut y[k + 1..];
            let dot: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum();
            let s = beta * dot;
            for (a, b) in seg.iter_mut().zip(v) {
                *a -= s * b;
            }
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for u in against {
        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        for (a, b) in v.iter_mut().zip(u) {
            *a -= dot * b;
        }
    }
}

/// The `k` smallest eigenvalues (ascending) of the symmetric row-major
/// `n × n` matrix `a`, with Euclidean-orthonormal eigenvectors.
pub fn lowest_eigenpairs(a: Vec<f64>, n: usize, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if a.len() != n * n || k == 0 || k > n {
        return Err(Error::InvalidParams(format!("cannot extract {k} eigenpairs of an {n}×{n} matrix")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Convergence("matrix has non-finite entries".into()));
    }
    let tri = tridiagonalize(a, n);
    let (glo, ghi) = tri.gershgorin();
    let norm = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
    let values: Vec<f64> = (0..k).map(|i| tri.eigenvalue(i)).collect();

    let cluster_gap = 1e-3 * norm;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut cluster_start = 0;
    for (i, &lambda) in values.iter().enumerate() {
        if i > 0 && (lambda - values[i - 1]).abs() > cluster_gap {
            cluster_start = i;
        }
        // deterministic, non-degenerate start vector
        let mut x: Vec<f64> = (0..n)
            .map(|j| {
                let t = ((j as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9)) >> 11;
                0.5 + (t as f64) / (1u64 << 53) as f64
            })
            .collect();
        normalize(&mut x);
        let mut converged = false;
        for _ in 0..8 {
            tri.shifted_solve(lambda, &mut x, norm);
            orthogonalize(&mut x, &vectors[cluster_start..i]);
            orthogonalize(&mut x, &vectors[cluster_start..i]);
            let growth = normalize(&mut x);
            if !growth.is_finite() {
                return Err(Error::Convergence(format!("inverse iteration diverged for eigenvalue {i}")));
            }
            if growth * f64::EPSILON * norm > 1e-3 {
                converged = true;
            }
        }
        if !converged {
            return Err(Error::Convergence(format!("inverse iteration stalled for eigenvalue {i}")));
        }
        vectors.push(x);
    }
    for v in vectors.iter_mut() {
        tri.back_transform(v);
        normalize(v);
    }
    Ok((values, vectors))
}
