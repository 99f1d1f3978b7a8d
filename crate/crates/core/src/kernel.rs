//! Lévy kernel densities, their tail classification, and the structural checks
//! (integrability, symmetry, exponential moments, essential ordering).

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Relative margin kept away from the boundary of a critical Hamiltonian domain.
pub const DOMAIN_MARGIN: f64 = 1e-6;

/// Tail classification of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tail {
    /// Support contained in the closed ball of radius `rho`.
    Compact { rho: f64 },
    /// Faster than any exponential: `J(y) = exp(-|y| ω(y))` with `ω → ∞`.
    /// `eta` is the angle parameter of the superlinearity condition.
    Intermediate { eta: f64 },
    /// Exponential tail; exponential moments blow up past `beta0`.
    Critical { beta0: f64 },
}

impl Tail {
    pub fn label(&self) -> &'static str {
        match self {
            Tail::Compact { .. } => "compact",
            Tail::Intermediate { .. } => "intermediate",
            Tail::Critical { .. } => "critical",
        }
    }
}

/// Piecewise-constant radial profile: value `values[i]` on `(radii[i-1], radii[i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shells {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl Shells {
    fn at(&self, r: f64) -> f64 {
        // r == 0 falls in the first shell.
        match self.radii.iter().position(|&ri| r <= ri) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    fn outer(&self) -> f64 {
        self.radii
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v > 0.0)
            .map(|(&r, _)| r)
            .fold(0.0, f64::max)
    }

    /// Radius up to which the profile is positive without interruption.
    fn core(&self) -> f64 {
        let mut core = 0.0;
        for (&r, &v) in self.radii.iter().zip(&self.values) {
            if v > 0.0 {
                core = r;
            } else {
                break;
            }
        }
        core
    }

    fn validate(&self, side: &str) -> Result<()> {
        if self.radii.is_empty() || self.radii.len() != self.values.len() {
            return Err(invalid(format!(
                "{side}: radii and values must be non-empty and of equal length"
            )));
        }
        if self.radii[0] <= 0.0 || self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "{side}: radii must be positive and strictly increasing"
            )));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!(
                "{side}: values must be finite and nonnegative"
            )));
        }
        Ok(())
    }
}

/// The shipped kernel families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Constant density on the closed ball of radius `rho`, total mass `mass`.
    CompactUniform { rho: f64, mass: f64 },
    /// Piecewise-constant radial shells; in one dimension `left` may differ from `right`.
    CompactCustom { right: Shells, left: Option<Shells> },
    /// `scale * exp(-|y|^alpha)`, `alpha > 1`.
    ExpPower { alpha: f64, scale: f64 },
    /// `scale * exp(-alpha |y|)`.
    ExpLinear { alpha: f64, scale: f64 },
    /// `scale * exp(-exp(|y|))`.
    SuperExp { scale: f64 },
    /// `scale * exp(-lambda |y|) / |y|^(N + alpha)`.
    TemperedStable { alpha: f64, lambda: f64, scale: f64 },
    /// One-dimensional demo: `exp(y)/2` for `y < 0`, `1/2` on `[0, 1]`.
    AsymmetricDemo,
}

/// An immutable Lévy kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub dimension: usize,
    pub family: Family,
    pub symmetric: bool,
    pub singularity_exponent: f64,
    pub rho0: f64,
    pub tail: Tail,
}

/// On-disk kernel description (JSON).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: String,
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default = "empty_params")]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
}

fn one() -> usize {
    1
}

fn empty_params() -> Value {
    Value::Object(Default::default())
}

impl KernelSpec {
    pub fn new(family: &str, dimension: usize, params: Value) -> Self {
        Self {
            family: family.to_string(),
            dimension,
            params,
            rho0: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UniformParams {
    rho: f64,
    #[serde(default = "unit")]
    mass: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomParams {
    radii: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    left_radii: Option<Vec<f64>>,
    #[serde(default)]
    left_values: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpPowerParams {
    alpha: f64,
    #[serde(default = "unit")]
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpLinearParams {
    alpha: f64,
    #[serde(default = "half")]
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleParams {
    #[serde(default = "unit")]
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemperedParams {
    alpha: f64,
    lambda: f64,
    #[serde(default = "unit")]
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn unit() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn params<T: serde::de::DeserializeOwned>(family: &str, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| invalid(format!("{family} params: {e}")))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Volume of the unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// Builds a kernel from its specification.
pub fn build_kernel(spec: &KernelSpec) -> Result<Kernel> {
    let n = spec.dimension;
    if n == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let fam = spec.family.as_str();
    let (family, tail, singularity, default_rho0) = match fam {
        "compact_uniform" => {
            let p: UniformParams = params(fam, &spec.params)?;
            let rho = positive("rho", p.rho)?;
            if !(p.mass.is_finite() && p.mass >= 0.0) {
                return Err(invalid("mass must be finite and nonnegative"));
            }
            (
                Family::CompactUniform { rho, mass: p.mass },
                Tail::Compact { rho },
                0.0,
                rho / 2.0,
            )
        }
        "compact_custom" => {
            let p: CustomParams = params(fam, &spec.params)?;
            let right = Shells {
                radii: p.radii,
                values: p.values,
            };
            right.validate("radii/values")?;
            let left = match (p.left_radii, p.left_values) {
                (Some(radii), Some(values)) => {
                    if n != 1 {
                        return Err(invalid("left shells are only meaningful in dimension 1"));
                    }
                    let s = Shells { radii, values };
                    s.validate("left_radii/left_values")?;
                    Some(s)
                }
                (None, None) => None,
                _ => return Err(invalid("left_radii and left_values must be given together")),
            };
            let outer = left
                .as_ref()
                .map_or(right.outer(), |l| l.outer().max(right.outer()));
            if outer <= 0.0 {
                return Err(invalid("compact_custom has no mass"));
            }
            let core = left
                .as_ref()
                .map_or(right.core(), |l| l.core().min(right.core()));
            if core <= 0.0 {
                return Err(invalid("compact_custom must be positive near the origin"));
            }
            (
                Family::CompactCustom { right, left },
                Tail::Compact { rho: outer },
                0.0,
                core / 2.0,
            )
        }
        "exp_power" => {
            let p: ExpPowerParams = params(fam, &spec.params)?;
            if !(p.alpha.is_finite() && p.alpha > 1.0) {
                return Err(invalid(format!(
                    "exp_power needs alpha > 1, got {}",
                    p.alpha
                )));
            }
            let scale = positive("scale", p.scale)?;
            (
                Family::ExpPower {
                    alpha: p.alpha,
                    scale,
                },
                Tail::Intermediate { eta: 1.0 },
                0.0,
                1.0,
            )
        }
        "exp_linear" => {
            let p: ExpLinearParams = params(fam, &spec.params)?;
            let alpha = positive("alpha", p.alpha)?;
            let scale = positive("scale", p.scale)?;
            (
                Family::ExpLinear { alpha, scale },
                Tail::Critical { beta0: alpha },
                0.0,
                1.0,
            )
        }
        "super_exp" => {
            let p: ScaleParams = params(fam, &spec.params)?;
            let scale = positive("scale", p.scale)?;
            (
                Family::SuperExp { scale },
                Tail::Intermediate { eta: 1.0 },
                0.0,
                1.0,
            )
        }
        "tempered_stable" => {
            let p: TemperedParams = params(fam, &spec.params)?;
            if !(p.alpha.is_finite() && p.alpha > 0.0) {
                return Err(invalid("tempered_stable needs alpha > 0"));
            }
            if p.alpha >= 2.0 {
                return Err(invalid(format!(
                    "singularity exponent {} >= 2 violates Lévy integrability",
                    p.alpha
                )));
            }
            let lambda = positive("lambda", p.lambda)?;
            let scale = positive("scale", p.scale)?;
            (
                Family::TemperedStable {
                    alpha: p.alpha,
                    lambda,
                    scale,
                },
                Tail::Critical { beta0: lambda },
                p.alpha,
                1.0,
            )
        }
        "asymmetric_1d_demo" => {
            let _: NoParams = params(fam, &spec.params)?;
            if n != 1 {
                return Err(invalid("asymmetric_1d_demo is one-dimensional"));
            }
            (
                Family::AsymmetricDemo,
                Tail::Critical { beta0: 1.0 },
                0.0,
                1.0,
            )
        }
        other => return Err(Error::UnknownFamily(other.to_string())),
    };
    let rho0 = positive("rho0", spec.rho0.unwrap_or(default_rho0))?;
    let symmetric = match &family {
        Family::AsymmetricDemo => false,
        Family::CompactCustom {
            left: Some(l),
            right,
        } => l == right,
        _ => true,
    };
    let kernel = Kernel {
        dimension: n,
        family,
        symmetric,
        singularity_exponent: singularity,
        rho0,
        tail,
    };
    // supp(J) must contain the ball of radius rho0.
    let core = match &kernel.family {
        Family::CompactUniform { rho, mass } if *mass > 0.0 => *rho,
        Family::CompactUniform { .. } => f64::INFINITY,
        Family::CompactCustom { right, left } => left
            .as_ref()
            .map_or(right.core(), |l| l.core().min(right.core())),
        Family::AsymmetricDemo => 1.0,
        _ => f64::INFINITY,
    };
    if rho0 > core {
        return Err(invalid(format!(
            "rho0 = {rho0} exceeds the support core radius {core}"
        )));
    }
    if let Tail::Compact { rho } = kernel.tail {
        if rho < rho0 {
            return Err(invalid(format!(
                "rho = {rho} is smaller than rho0 = {rho0}"
            )));
        }
    }
    Ok(kernel)
}

pub(crate) fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Kernel {
    /// Convenience constructor from a JSON literal.
    pub fn from_json(text: &str) -> Result<Self> {
        build_kernel(&KernelSpec::from_json(text)?)
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::CompactUniform { .. } => "compact_uniform",
            Family::CompactCustom { .. } => "compact_custom",
            Family::ExpPower { .. } => "exp_power",
            Family::ExpLinear { .. } => "exp_linear",
            Family::SuperExp { .. } => "super_exp",
            Family::TemperedStable { .. } => "tempered_stable",
            Family::AsymmetricDemo => "asymmetric_1d_demo",
        }
    }

    /// Density `J(y)` for `y != 0`.
    pub fn density(&self, y: &[f64]) -> f64 {
        let r = norm(y);
        let n = self.dimension as f64;
        match &self.family {
            Family::CompactUniform { rho, mass } => {
                if r <= *rho {
                    mass / (unit_ball_volume(self.dimension) * rho.powi(self.dimension as i32))
                } else {
                    0.0
                }
            }
            Family::CompactCustom { right, left } => match left {
                Some(l) if y[0] < 0.0 => l.at(r),
                _ => right.at(r),
            },
            Family::ExpPower { alpha, scale } => scale * (-r.powf(*alpha)).exp(),
            Family::ExpLinear { alpha, scale } => scale * (-alpha * r).exp(),
            Family::SuperExp { scale } => scale * (-r.exp()).exp(),
            Family::TemperedStable {
                alpha,
                lambda,
                scale,
            } => scale * (-lambda * r).exp() / r.powf(n + alpha),
            Family::AsymmetricDemo => {
                if y[0] < 0.0 {
                    0.5 * y[0].exp()
                } else if y[0] <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// `ln J(y)`, `-inf` outside the support. Computed without forming `J`
    /// so that far tails do not underflow.
    pub fn log_density(&self, y: &[f64]) -> f64 {
        let r = norm(y);
        let n = self.dimension as f64;
        match &self.family {
            Family::ExpPower { alpha, scale } => scale.ln() - r.powf(*alpha),
            Family::ExpLinear { alpha, scale } => scale.ln() - alpha * r,
            Family::SuperExp { scale } => scale.ln() - r.exp(),
            Family::TemperedStable {
                alpha,
                lambda,
                scale,
            } => scale.ln() - lambda * r - (n + alpha) * r.ln(),
            Family::AsymmetricDemo if y[0] < 0.0 => 0.5f64.ln() + y[0],
            _ => self.density(y).ln(),
        }
    }

    /// `p·y + ln J(y)` for `y = r ν` with `pnu = p·ν`, merging linear
    /// exponents before they cancel.
    pub fn log_tilted(&self, y: &[f64], pnu: f64, r: f64) -> f64 {
        let n = self.dimension as f64;
        match &self.family {
            Family::ExpLinear { alpha, scale } => scale.ln() + (pnu - alpha) * r,
            Family::TemperedStable {
                alpha,
                lambda,
                scale,
            } => scale.ln() + (pnu - lambda) * r - (n + alpha) * r.ln(),
            Family::AsymmetricDemo if y[0] < 0.0 => 0.5f64.ln() + (pnu - 1.0) * r,
            _ => pnu * r + self.log_density(y),
        }
    }

    /// Closed-form `ω(y) = -ln J(y) / |y|` for intermediate kernels.
    pub fn omega(&self, y: &[f64]) -> Option<f64> {
        let r = norm(y);
        match &self.family {
            Family::ExpPower { alpha, scale } => Some(r.powf(alpha - 1.0) - scale.ln() / r),
            Family::SuperExp { scale } => Some(r.exp() / r - scale.ln() / r),
            _ => None,
        }
    }

    /// Normalization-free log-weight `|y| ω(y)` used by the K-transform:
    /// the kernel's shape exponent with constant prefactors dropped
    /// (`+inf` off the support of compact kernels).
    pub fn shape_exponent(&self, y: &[f64]) -> f64 {
        let r = norm(y);
        match &self.family {
            Family::CompactUniform { rho, .. } => {
                if r <= *rho {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Family::CompactCustom { .. } => {
                if self.density(y) > 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Family::ExpPower { alpha, .. } => r.powf(*alpha),
            Family::ExpLinear { alpha, .. } => alpha * r,
            Family::SuperExp { .. } => r.exp() - 1.0,
            Family::TemperedStable { lambda, .. } => lambda * r,
            Family::AsymmetricDemo => {
                if y[0] < 0.0 {
                    r
                } else if y[0] <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Where the support ends along the unit direction `nu` (`None` if unbounded).
    pub fn ray_extent(&self, nu: &[f64]) -> Option<f64> {
        match &self.family {
            Family::CompactUniform { rho, .. } => Some(*rho),
            Family::CompactCustom { right, left } => Some(match left {
                Some(l) if nu[0] < 0.0 => l.outer(),
                _ => right.outer(),
            }),
            Family::AsymmetricDemo if nu[0] >= 0.0 => Some(1.0),
            _ => None,
        }
    }

    /// Radii along `nu` where the density is discontinuous.
    pub fn ray_breaks(&self, nu: &[f64]) -> Vec<f64> {
        match &self.family {
            Family::CompactCustom { right, left } => match left {
                Some(l) if nu[0] < 0.0 => l.radii.clone(),
                _ => right.radii.clone(),
            },
            _ => Vec::new(),
        }
    }

    /// Supremum of `beta` such that `∫ e^{beta nu·y} J(y) dy` is finite.
    pub fn exp_moment_bound(&self, nu: &[f64]) -> f64 {
        match (&self.family, self.tail) {
            (Family::AsymmetricDemo, _) => {
                if nu[0] >= 0.0 {
                    f64::INFINITY
                } else {
                    1.0
                }
            }
            (_, Tail::Critical { beta0 }) => beta0,
            _ => f64::INFINITY,
        }
    }

    /// Rejects `p` outside the open domain of the Hamiltonian, with the
    /// relative margin [`DOMAIN_MARGIN`].
    pub fn check_domain(&self, p: &[f64]) -> Result<()> {
        let r = norm(p);
        if r == 0.0 {
            return Ok(());
        }
        let nu: Vec<f64> = p.iter().map(|v| v / r).collect();
        let bound = self.exp_moment_bound(&nu);
        if bound.is_finite() && r > bound * (1.0 - DOMAIN_MARGIN) {
            return Err(Error::DomainViolation {
                p: p.to_vec(),
                bound,
            });
        }
        Ok(())
    }

    /// Radius beyond which the kernel carries mass below `tol` (one direction, 1-D).
    pub fn reach(&self, tol: f64) -> f64 {
        match self.tail {
            Tail::Compact { rho } => rho,
            _ => {
                let mut r: f64 = 1.0;
                while r < 1e6 {
                    let tail = self.tail_mass_beyond(r);
                    if tail < tol {
                        break;
                    }
                    r *= 1.1;
                }
                r
            }
        }
    }

    /// Mass of `{|y| > r}` along both half-lines (1-D kernels).
    pub fn tail_mass_beyond(&self, r: f64) -> f64 {
        self.ray_tail_mass(-1.0, r) + self.ray_tail_mass(1.0, r)
    }

    /// Mass of `{sign·y > r}` for a 1-D kernel, `sign = ±1`.
    pub fn ray_tail_mass(&self, sign: f64, r: f64) -> f64 {
        let opts = QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
        };
        let end = self.ray_extent(&[sign]).unwrap_or(f64::INFINITY);
        if end <= r {
            return 0.0;
        }
        // y = r + s/(1 - s) maps [0, 1) onto [r, ∞)
        let f = |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let y = r + s / (1.0 - s);
            if y > end {
                return 0.0;
            }
            self.density(&[sign * y]) / ((1.0 - s) * (1.0 - s))
        };
        let upper = if end.is_finite() {
            (end - r) / (1.0 + end - r)
        } else {
            1.0
        };
        integrate(f, 0.0, upper, &[], &opts)
            .map(|q| q.value)
            .unwrap_or(f64::INFINITY)
    }
}

/// `ω(y) = -ln J(y) / |y|` evaluated from the density.
pub fn log_weight_omega(k: &Kernel, y: &[f64]) -> Result<f64> {
    let r = norm(y);
    if r == 0.0 {
        return Err(invalid("ω is undefined at y = 0"));
    }
    let j = k.density(y);
    if j <= 0.0 {
        return Err(invalid(format!("y = {y:?} lies outside the support of J")));
    }
    Ok(-k.log_density(y) / r)
}

/// Witness annulus `{a < |y| < b}` of an essential ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    pub inner: f64,
    pub outer: f64,
}

/// Radius of the sampling window used by [`is_essentially_ordered`].
pub const ORDERING_WINDOW: f64 = 50.0;

/// Low-discrepancy points in the ball of radius `radius` (N = 1 or 2).
pub fn sample_points(dim: usize, count: usize, radius: f64) -> Vec<Vec<f64>> {
    // Halton-type sequences in bases 2 and 3.
    fn radical_inverse(mut i: usize, base: usize) -> f64 {
        let inv = 1.0 / base as f64;
        let mut f = inv;
        let mut x = 0.0;
        while i > 0 {
            x += f * (i % base) as f64;
            i /= base;
            f *= inv;
        }
        x
    }
    (1..=count)
        .map(|i| {
            let u = radical_inverse(i, 2);
            match dim {
                1 => vec![radius * (2.0 * u - 1.0)],
                _ => {
                    let v = radical_inverse(i, 3);
                    let r = radius * u.sqrt();
                    let th = 2.0 * PI * v;
                    let mut y = vec![r * th.cos(), r * th.sin()];
                    y.resize(dim, 0.0);
                    y
                }
            }
        })
        .filter(|y| norm(y) > 0.0)
        .collect()
}

fn directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => (0..count)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / count as f64;
                let mut y = vec![th.cos(), th.sin()];
                y.resize(dim, 0.0);
                y
            })
            .collect(),
    }
}

/// Tests `J1 ⪯ J2`: `J1 <= J2` at every sampled point of the window and
/// `J1 < J2` strictly on some annulus `ρ0/2 < a < b < ρ0`.
/// Returns the widest witness annulus found.
pub fn is_essentially_ordered(k1: &Kernel, k2: &Kernel, samples: usize) -> (bool, Option<Annulus>) {
    is_essentially_ordered_within(k1, k2, samples, ORDERING_WINDOW)
}

pub fn is_essentially_ordered_within(
    k1: &Kernel,
    k2: &Kernel,
    samples: usize,
    window: f64,
) -> (bool, Option<Annulus>) {
    if k1.dimension != k2.dimension || k1.rho0 != k2.rho0 {
        return (false, None);
    }
    let dim = k1.dimension;
    let rho0 = k1.rho0;
    const SLICES: usize = 16;
    let edges: Vec<f64> = (0..=SLICES)
        .map(|i| rho0 / 2.0 + rho0 / 2.0 * i as f64 / SLICES as f64)
        .collect();
    let dirs = directions(dim, 16);

    let mut points = sample_points(dim, samples, window);
    // Annulus midpoints along each sampled direction.
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        for d in &dirs {
            points.push(d.iter().map(|v| v * mid).collect());
        }
    }
    if points.iter().any(|y| k1.density(y) > k2.density(y)) {
        return (false, None);
    }

    // Strictness per slice, probed on a radial grid inside the slice.
    let strict: Vec<bool> = edges
        .windows(2)
        .map(|w| {
            (1..8).all(|j| {
                let r = w[0] + (w[1] - w[0]) * j as f64 / 8.0;
                dirs.iter().all(|d| {
                    let y: Vec<f64> = d.iter().map(|v| v * r).collect();
                    k1.density(&y) < k2.density(&y)
                })
            })
        })
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < SLICES {
        if strict[i] {
            let start = i;
            while i < SLICES && strict[i] {
                i += 1;
            }
            if best.is_none_or(|(s, e)| e - s < i - start) {
                best = Some((start, i));
            }
        } else {
            i += 1;
        }
    }
    match best {
        Some((s, e)) => {
            // Keep the witness strictly inside (ρ0/2, ρ0).
            let pad = 1e-9 * rho0;
            let a = edges[s].max(rho0 / 2.0 + pad);
            let b = edges[e].min(rho0 - pad);
            (true, Some(Annulus { inner: a, outer: b }))
        }
        None => (false, None),
    }
}

/// Numerical probes backing the structural hypotheses on `J`.
pub mod probe {
    use super::*;

    fn radial_integral<F: Fn(f64, &[f64]) -> f64>(
        k: &Kernel,
        lo: f64,
        hi: f64,
        f: F,
    ) -> Result<f64> {
        let opts = QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 1e-11,
            max_subdivisions: 20_000,
        };
        let dim = k.dimension;
        let ray = |nu: &[f64]| -> Result<f64> {
            let end = k.ray_extent(nu).map_or(hi, |e| e.min(hi));
            if end <= lo {
                return Ok(0.0);
            }
            let mut breaks = k.ray_breaks(nu);
            breaks.push(1.0);
            // Geometric breaks resolve singular and long tails alike.
            let mut b = lo.max(1e-300);
            while b < end {
                breaks.push(b);
                b *= 4.0;
            }
            let g = |r: f64| {
                let y: Vec<f64> = nu.iter().map(|v| v * r).collect();
                f(r, &y) * r.powi(dim as i32 - 1)
            };
            Ok(integrate(g, lo, end, &breaks, &opts)?.value)
        };
        match dim {
            1 => Ok(ray(&[1.0])? + ray(&[-1.0])?),
            2 if k.symmetric => Ok(2.0 * PI * ray(&[1.0, 0.0])?),
            _ => Err(invalid(
                "probes support N = 1, or N = 2 for symmetric kernels",
            )),
        }
    }

    /// `∫_{eps < |y| < m} (1 ∧ |y|²) J(y) dy`.
    pub fn levy_integral(k: &Kernel, eps: f64, m: f64) -> Result<f64> {
        radial_integral(k, eps, m, |r, y| r.powi(2).min(1.0) * k.density(y))
    }

    /// `∫_{ρ0/2 < |y| < m} e^{beta |y|} J(y) dy`, evaluated in log space.
    pub fn exp_moment(k: &Kernel, beta: f64, m: f64) -> Result<f64> {
        radial_integral(k, k.rho0 / 2.0, m, |r, y| {
            let l = k.log_density(y);
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                (beta * r + l).exp()
            }
        })
    }

    /// Estimates the critical exponent by bisection on whether the truncated
    /// exponential moment keeps growing when the truncation doubles.
    pub fn critical_exponent(k: &Kernel, lo: f64, hi: f64) -> Result<f64> {
        let grows = |beta: f64| -> Result<bool> {
            let m = 200.0;
            let a = exp_moment(k, beta, m)?;
            let b = exp_moment(k, beta, 2.0 * m)?;
            Ok(b > a * (1.0 + 1e-3))
        };
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if grows(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Largest `|J(y) - J(-y)|` over the sample.
    pub fn symmetry_defect(k: &Kernel, samples: usize, radius: f64) -> f64 {
        sample_points(k.dimension, samples, radius)
            .iter()
            .map(|y| {
                let m: Vec<f64> = y.iter().map(|v| -v).collect();
                (k.density(y) - k.density(&m)).abs()
            })
            .fold(0.0, f64::max)
    }
}
