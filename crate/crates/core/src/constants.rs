//! Gamma function and the closed-form constants and bounds for the
//! Dirichlet fractional Laplacian `Δ^{α/2}` on bounded sets of `R^d`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Stable index `α ∈ (0, 2)` and spatial dimension `d ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub d: usize,
}

impl StableParams {
    pub fn new(alpha: f64, d: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidParams(format!(
                "stable index must lie in (0, 2), got {alpha}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        Ok(Self { alpha, d })
    }

    fn df(&self) -> f64 {
        self.d as f64
    }
}

/// Which form of the spectral-gap constant to use.
///
/// `Stated` is the printed formula `A_{d,α} / c`; `Derived` is what the
/// chain `gap ≥ 2C / (R^{d+α} M²)` with `M ≤ c λ^{d/(2α)}` actually yields,
/// namely `A_{d,α} / c²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Stated,
    Derived,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stated" => Ok(Variant::Stated),
            "derived" => Ok(Variant::Derived),
            other => Err(Error::Parse(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Stated => f.write_str("stated"),
            Variant::Derived => f.write_str("derived"),
        }
    }
}

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Euler Gamma function for real arguments.
///
/// Lanczos approximation for `x ≥ 1/2`, reflection below. Non-positive
/// integers are poles.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidParams(format!("gamma of non-finite {x}")));
    }
    if x <= 0.0 && x == x.round() {
        return Err(Error::Pole(x));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) Γ(1-x) = π / sin(πx); sin evaluated on the reduced argument
        PI / (sin_pi(x) * gamma_unchecked(1.0 - x))
    } else if x == x.round() && x <= 23.0 {
        // exact factorials where they are representable
        (1..x as u64).fold(1.0, |acc, k| acc * k as f64)
    } else {
        let z = x - 1.0;
        let mut sum = LANCZOS_COEFFS[0];
        for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            sum += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        // split the power to avoid overflow at the top of the range
        let p = t.powf(0.5 * (z + 0.5));
        (2.0 * PI).sqrt() * p * (-t).exp() * p * sum
    }
}

fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

fn g(x: f64) -> f64 {
    // internal: arguments are positive or negative non-integers by construction
    gamma_unchecked(x)
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let df = d as f64;
    PI.powf(0.5 * df) / g(0.5 * df + 1.0)
}

/// Normalization `A_{d,α} = 2^α Γ((d+α)/2) / (π^{d/2} |Γ(−α/2)|)` of the
/// singular integral defining `Δ^{α/2}`.
pub fn norm_constant(p: StableParams) -> f64 {
    let (a, d) = (p.alpha, p.df());
    2f64.powf(a) * g(0.5 * (d + a)) / (PI.powf(0.5 * d) * g(-0.5 * a).abs())
}

/// Constant `c` in `sup φ₁ ≤ c λ₁^{d/(2α)}`.
pub fn theorem1_constant(p: StableParams) -> f64 {
    let (a, d) = (p.alpha, p.df());
    let inner = 4.0 * g(0.5 * d) / (a * 2f64.powf(a) * g(0.5 * (d + a)) * g(0.5 * a));
    PI.powf(-0.25 * d) * (2.0 * d * g(0.5 * d)).sqrt() * inner.powf(d / (2.0 * a))
}

/// Constant `c̃` in `λ₂ − λ₁ ≥ c̃ λ₁^{−d/α} (diam D)^{−d−α}`.
pub fn theorem2_constant(p: StableParams, variant: Variant) -> f64 {
    let c = theorem1_constant(p);
    let a = norm_constant(p);
    match variant {
        Variant::Stated => a / c,
        Variant::Derived => a / (c * c),
    }
}

/// Constant `C = A_{d,α} / 2` in front of the variational (Dirichlet form)
/// expression for the spectral gap.
pub fn variational_constant(p: StableParams) -> f64 {
    0.5 * norm_constant(p)
}

/// Upper bound for `λ₁` on any open set containing a ball of radius `r`.
pub fn lambda1_upper_ball(p: StableParams, r: f64) -> f64 {
    debug_assert!(r > 0.0);
    let (a, d) = (p.alpha, p.df());
    let num = a * (a + 0.5 * d) * PI.sqrt() * g(0.5 * a) * g(a + 0.5 * d);
    let den = (a + d) * g(0.5 * (1.0 + a)) * g(0.5 * d);
    num / den * r.powf(-a)
}

/// The same bound obtained the long way: the Rayleigh quotient of the
/// ball's exit time, `∫ s / ∫ s²`, with both radial integrals evaluated by
/// quadrature instead of beta functions.
pub fn lambda1_upper_ball_radial(p: StableParams, r: f64) -> f64 {
    let (a, d) = (p.alpha, p.df());
    let moment = |q: f64| {
        quad::tanh_sinh(0.0, r, |t, _, to_r| {
            // r² − t² = (r − t)(r + t)
            t.powf(d - 1.0) * (to_r * (r + t)).powf(q)
        })
    };
    let k = 2f64.powf(a - 1.0) * a * g(0.5 * (d + a)) * g(0.5 * a) / g(0.5 * d);
    k * moment(0.5 * a) / moment(a)
}

/// Lower bound `c̃ λ₁^{−d/α} diam^{−(d+α)}` for the spectral gap.
pub fn gap_lower_bound(p: StableParams, lambda1: f64, diam: f64, variant: Variant) -> f64 {
    debug_assert!(lambda1 > 0.0 && diam > 0.0);
    let (a, d) = (p.alpha, p.df());
    theorem2_constant(p, variant) * lambda1.powf(-d / a) * diam.powf(-(d + a))
}

/// Expected exit time from `B(0, 1)` started at the centre.
pub fn unit_ball_exit_center(p: StableParams) -> f64 {
    let (a, d) = (p.alpha, p.df());
    2f64.powf(1.0 - a) * g(0.5 * d) / (a * g(0.5 * (d + a)) * g(0.5 * a))
}

/// Expected exit time `E_x τ` from the centred ball `B(0, r)`.
pub fn ball_exit_time_exact(p: StableParams, r: f64, x: &[f64]) -> Result<f64> {
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    if norm2.sqrt() >= r {
        return Err(Error::OutsideDomain(format!(
            "|x| = {} is not below the radius {r}",
            norm2.sqrt()
        )));
    }
    let a = p.alpha;
    Ok(r.powf(a) * unit_ball_exit_center(p) * (1.0 - norm2 / (r * r)).powf(0.5 * a))
}

/// Every closed-form constant for a given `(α, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub alpha: f64,
    pub d: usize,
    pub a_norm: f64,
    pub c_thm1: f64,
    pub c_tilde_stated: f64,
    pub c_tilde_derived: f64,
    pub c_var: f64,
    pub s_ball_center: f64,
    /// Upper bound for `λ₁` of a domain containing a unit ball.
    pub lambda1_upper_unit_ball: f64,
}

impl BoundConstants {
    pub fn new(p: StableParams) -> Self {
        Self {
            alpha: p.alpha,
            d: p.d,
            a_norm: norm_constant(p),
            c_thm1: theorem1_constant(p),
            c_tilde_stated: theorem2_constant(p, Variant::Stated),
            c_tilde_derived: theorem2_constant(p, Variant::Derived),
            c_var: variational_constant(p),
            s_ball_center: unit_ball_exit_center(p),
            lambda1_upper_unit_ball: lambda1_upper_ball(p, 1.0),
        }
    }
}
