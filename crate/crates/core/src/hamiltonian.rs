//! The Lévy Hamiltonian
//!
//! ```text
//! H(p) = Tr(A p⊗p) + B·p + ∫ (e^{p·y} - 1 - (p·y) 1_{|y|<1}) J(y) dy
//! ```
//!
//! its essential part `H^ess(p) = ∫_{|y|>ρ0/2} e^{p·y} J(y) dy`, and their
//! first and second derivatives.
//!
//! Integrals are taken ray by ray in polar form. Each ray is split into a
//! near-origin piece `[0, δ]` (power substitution that flattens the
//! `|y|^{-N-s}` singularity), a bulk piece `[δ, M]`, and a tail beyond `M`
//! that is dropped once an analytic bound on it falls below the cutoff
//! tolerance. In two dimensions the rays are integrated over the angle.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::kernel::{dot, norm, Kernel, Tail};
use crate::quadrature::{integrate, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Near-origin split; `None` picks 1e-3 for singular kernels and ρ0/2 otherwise.
    pub delta_split: Option<f64>,
    /// Relative size below which the dropped tail is considered negligible;
    /// also the relative tolerance of the adaptive rule.
    pub tail_cutoff_tol: f64,
    /// Panel budget of each adaptive integration.
    pub max_refinements: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            delta_split: None,
            tail_cutoff_tol: 1e-13,
            max_refinements: 4000,
        }
    }
}

/// A convex Hamiltonian known through value, gradient and Hessian quadratic
/// forms, plus the radius of its (star-shaped) effective domain.
pub trait ConvexHamiltonian: Sync {
    fn dim(&self) -> usize;
    fn value(&self, p: &[f64]) -> Result<f64>;
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>>;
    /// `νᵀ D²H(p) ν`.
    fn hess_quadform(&self, p: &[f64], nu: &[f64]) -> Result<f64>;
    /// Sup of `t` such that `t ν` lies in the domain; infinite when unbounded.
    fn domain_radius(&self, nu: &[f64]) -> f64;

    /// Full Hessian, assembled from quadratic forms.
    fn hessian(&self, p: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut h = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for i in 0..n {
            e.fill(0.0);
            e[i] = 1.0;
            h[i * n + i] = self.hess_quadform(p, &e)?;
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..n {
            for j in i + 1..n {
                e.fill(0.0);
                e[i] = s;
                e[j] = s;
                // q(e_i+e_j)/√2 = (h_ii + h_jj)/2 + h_ij
                let q = self.hess_quadform(p, &e)?;
                let hij = q - 0.5 * (h[i * n + i] + h[j * n + j]);
                h[i * n + j] = hij;
                h[j * n + i] = hij;
            }
        }
        Ok(h)
    }
}

/// `Tr(A p⊗p) + B·p` in closed form; a Hamiltonian with a null kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticHamiltonian {
    /// Row-major `N × N` symmetric matrix.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl QuadraticHamiltonian {
    /// `H(p) = c |p|²` in dimension `n`.
    pub fn isotropic(n: usize, c: f64) -> Self {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = c;
        }
        Self { a, b: vec![0.0; n] }
    }
}

fn quad_form(a: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|i| (0..n).map(|j| p[i] * a[i * n + j] * q[j]).sum::<f64>())
        .sum()
}

fn mat_vec(a: &[f64], p: &[f64]) -> Vec<f64> {
    let n = p.len();
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * p[j]).sum())
        .collect()
}

impl ConvexHamiltonian for QuadraticHamiltonian {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(quad_form(&self.a, p, p) + dot(&self.b, p))
    }
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(mat_vec(&self.a, p)
            .iter()
            .zip(&self.b)
            .map(|(ap, b)| 2.0 * ap + b)
            .collect())
    }
    fn hess_quadform(&self, _p: &[f64], nu: &[f64]) -> Result<f64> {
        Ok(2.0 * quad_form(&self.a, nu, nu))
    }
    fn domain_radius(&self, _nu: &[f64]) -> f64 {
        f64::INFINITY
    }
}

/// Everything needed to evaluate `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianParams {
    /// Row-major diffusion matrix.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub kernel: Kernel,
    pub compensated: bool,
    pub quadrature: QuadratureConfig,
}

/// `e^x - 1 - x`, accurate near zero.
pub(crate) fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // x² Σ_k x^k/(k+2)!, Horner from the top coefficient
        let mut coeffs = [0.0; 12];
        let mut fact = 1.0;
        for (k, c) in coeffs.iter_mut().enumerate() {
            fact *= (k + 2) as f64;
            *c = 1.0 / fact;
        }
        let sum = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        sum * x * x
    } else {
        x.exp_m1() - x
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Region {
    Full,
    Essential,
}

#[derive(Clone, Copy)]
enum Moment<'a> {
    Value,
    /// Component of the gradient along `axis`.
    Gradient(&'a [f64]),
    Hessian(&'a [f64]),
}

impl Moment<'_> {
    /// Extra power of `r` multiplying the kernel, as `r → ∞`.
    fn radial_power(&self) -> f64 {
        match self {
            Moment::Value => 0.0,
            Moment::Gradient(_) => 1.0,
            Moment::Hessian(_) => 2.0,
        }
    }
}

impl HamiltonianParams {
    /// Pure jump Hamiltonian (`A = 0`, `B = 0`).
    pub fn new(kernel: Kernel, compensated: bool) -> Result<Self> {
        let n = kernel.dimension;
        let hp = Self {
            a: vec![0.0; n * n],
            b: vec![0.0; n],
            kernel,
            compensated,
            quadrature: QuadratureConfig::default(),
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn with_diffusion(mut self, a: Vec<f64>) -> Result<Self> {
        self.a = a;
        self.validate()?;
        Ok(self)
    }

    pub fn with_drift(mut self, b: Vec<f64>) -> Result<Self> {
        self.b = b;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.kernel.dimension;
        if self.a.len() != n * n || self.b.len() != n {
            return Err(invalid(format!("A must be {n}x{n} and B of length {n}")));
        }
        for i in 0..n {
            for j in 0..n {
                if (self.a[i * n + j] - self.a[j * n + i]).abs() > 1e-12 {
                    return Err(invalid("A must be symmetric"));
                }
            }
        }
        // Basis vectors and a fixed set of pseudo-random unit vectors.
        let mut dirs: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        for k in 0..10 {
            let v: Vec<f64> = (0..n)
                .map(|i| ((k * 7 + i * 13 + 1) as f64 * 0.618_034).sin())
                .collect();
            let r = norm(&v);
            if r > 0.0 {
                dirs.push(v.iter().map(|x| x / r).collect());
            }
        }
        if dirs.iter().any(|v| quad_form(&self.a, v, v) < -1e-12) {
            return Err(invalid("A must be positive semidefinite"));
        }
        if !self.compensated && self.kernel.singularity_exponent >= 1.0 {
            return Err(invalid(
                "uncompensated form requires singularity exponent < 1 (the integral diverges)",
            ));
        }
        if !(self.quadrature.tail_cutoff_tol > 0.0) {
            return Err(invalid("tail_cutoff_tol must be positive"));
        }
        if let Some(d) = self.quadrature.delta_split {
            if !(d > 0.0 && d < 1.0) {
                return Err(invalid("delta_split must lie in (0, 1)"));
            }
        }
        if n > 2 {
            return Err(invalid("Hamiltonian quadrature supports N = 1 and N = 2"));
        }
        Ok(())
    }

    fn delta(&self) -> f64 {
        self.quadrature
            .delta_split
            .unwrap_or(if self.kernel.singularity_exponent > 0.0 {
                1e-3
            } else {
                self.kernel.rho0 / 2.0
            })
    }

    fn quad_opts(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: 1e-15,
            rel_tol: (self.quadrature.tail_cutoff_tol * 10.0).max(1e-14),
            max_subdivisions: self.quadrature.max_refinements,
        }
    }

    /// Integrand factor at `y = r ν` (without the `r^{N-1}` Jacobian).
    fn integrand(&self, region: Region, moment: Moment, nu: &[f64], pnu: f64, r: f64) -> f64 {
        let y: Vec<f64> = nu.iter().map(|v| v * r).collect();
        let x = pnu * r;
        let comp = self.compensated && region == Region::Full && r < 1.0;
        // Far from the origin e^{x}J is formed in log space.
        let near = r < 1.0 && x.abs() < 30.0;
        match moment {
            Moment::Value => {
                if region == Region::Essential {
                    return self.kernel.log_tilted(&y, pnu, r).exp();
                }
                if near {
                    let j = self.kernel.density(&y);
                    if comp {
                        expm1_minus_x(x) * j
                    } else {
                        x.exp_m1() * j
                    }
                } else {
                    let l = self.kernel.log_density(&y);
                    let ej = self.kernel.log_tilted(&y, pnu, r).exp();
                    let j = l.exp();
                    if comp {
                        ej - j - x * j
                    } else {
                        ej - j
                    }
                }
            }
            Moment::Gradient(axis) => {
                let proj = dot(nu, axis) * r;
                if comp && near {
                    proj * x.exp_m1() * self.kernel.density(&y)
                } else if comp {
                    let l = self.kernel.log_density(&y);
                    proj * (self.kernel.log_tilted(&y, pnu, r).exp() - l.exp())
                } else {
                    proj * self.kernel.log_tilted(&y, pnu, r).exp()
                }
            }
            Moment::Hessian(dir) => {
                let proj = dot(nu, dir) * r;
                proj * proj * self.kernel.log_tilted(&y, pnu, r).exp()
            }
        }
    }

    /// Integral along the ray `ν`, Jacobian included.
    fn ray_integral(&self, region: Region, moment: Moment, nu: &[f64], p: &[f64]) -> Result<f64> {
        let n = self.kernel.dimension as i32;
        let pnu = dot(p, nu);
        let opts = self.quad_opts();
        let s = self.kernel.singularity_exponent;
        let rho0 = self.kernel.rho0;
        let start = match region {
            Region::Full => 0.0,
            Region::Essential => rho0 / 2.0,
        };
        let extent = self.kernel.ray_extent(nu);
        if extent.is_some_and(|e| e <= start) {
            return Ok(0.0);
        }
        let jac = |r: f64| if n == 1 { 1.0 } else { r.powi(n - 1) };
        let g = |r: f64| {
            if r <= 0.0 {
                return 0.0;
            }
            self.integrand(region, moment, nu, pnu, r) * jac(r)
        };

        let mut total = 0.0;
        let mut lo = start;
        if region == Region::Full {
            let delta = self.delta().min(extent.unwrap_or(f64::INFINITY));
            // Order of vanishing of the bracketed factor at r = 0.
            let order = match moment {
                Moment::Value | Moment::Gradient(_) => {
                    if self.compensated {
                        2.0
                    } else {
                        1.0
                    }
                }
                Moment::Hessian(_) => 2.0,
            };
            let m = if s > 0.0 { 1.0 / (order - s) } else { 1.0 };
            let near = |v: f64| {
                if v <= 0.0 {
                    return 0.0;
                }
                let r = delta * v.powf(m);
                g(r) * delta * m * v.powf(m - 1.0)
            };
            let mut breaks: Vec<f64> = Vec::new();
            if s > 0.0 {
                breaks.extend([1e-6, 1e-4, 1e-2].iter());
            }
            total += integrate(near, 0.0, 1.0, &breaks, &opts)?.value;
            lo = delta;
        }

        let end = match extent {
            Some(e) => e,
            None => self.tail_cutoff(region, moment, nu, pnu, lo)?,
        };
        if end > lo {
            let mut breaks = self.kernel.ray_breaks(nu);
            breaks.extend([1.0, rho0 / 2.0]);
            let mut b = lo.max(1e-3) * 4.0;
            while b < end {
                breaks.push(b);
                b *= 4.0;
            }
            total += integrate(g, lo, end, &breaks, &opts)?.value;
        }
        Ok(total)
    }

    /// Truncation radius `M` for an unbounded ray: the tail beyond `M`,
    /// bounded through the local log-slope of the integrand envelope, is below
    /// `tail_cutoff_tol` times a running estimate of the integral.
    fn tail_cutoff(
        &self,
        region: Region,
        moment: Moment,
        nu: &[f64],
        pnu: f64,
        lo: f64,
    ) -> Result<f64> {
        let bound = self.kernel.exp_moment_bound(nu);
        let critical_gap = bound - pnu.max(0.0);
        if bound.is_finite() && critical_gap <= 0.0 {
            return Err(Error::DomainViolation {
                p: nu.iter().map(|v| v * pnu).collect(),
                bound,
            });
        }
        let k = self.kernel.dimension as f64 - 1.0 + moment.radial_power();
        let envelope = |r: f64| -> f64 {
            let y: Vec<f64> = nu.iter().map(|v| v * r).collect();
            let grow = match region {
                Region::Essential => pnu * r,
                Region::Full => (pnu * r).max(0.0),
            };
            self.kernel.log_density(&y) + grow + k * r.max(1e-300).ln()
        };
        let tol = self.quadrature.tail_cutoff_tol;
        let mut r = lo.max(1.0);
        let mut prev = r;
        // Running mass estimate, log-sum-exp of the envelope times the step.
        let mut log_mass = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let phi = envelope(r);
            let step = (r - prev).max(1e-3);
            let contrib = phi + step.ln();
            log_mass = if log_mass == f64::NEG_INFINITY {
                contrib
            } else {
                let m = log_mass.max(contrib);
                m + ((log_mass - m).exp() + (contrib - m).exp()).ln()
            };
            let h = 1e-4 * r;
            let slope = (envelope(r + h) - phi) / h;
            if slope < 0.0 {
                let mut kappa = -slope;
                if matches!(self.kernel.tail, Tail::Critical { .. }) {
                    kappa = kappa.min(critical_gap);
                }
                let log_tail = phi - kappa.ln();
                if log_tail < tol.ln() + log_mass.max(-700.0) - 2.0 || phi < -745.0 {
                    return Ok(r);
                }
            }
            prev = r;
            r = r * 1.05 + 0.5;
        }
        Err(Error::NonConvergence(
            "tail truncation radius not found".into(),
        ))
    }

    fn integral(&self, region: Region, moment: Moment, p: &[f64]) -> Result<f64> {
        match self.kernel.dimension {
            1 => Ok(self.ray_integral(region, moment, &[1.0], p)?
                + self.ray_integral(region, moment, &[-1.0], p)?),
            2 => {
                let opts = QuadOptions {
                    abs_tol: 1e-14,
                    rel_tol: self.quad_opts().rel_tol.max(1e-12),
                    max_subdivisions: self.quadrature.max_refinements,
                };
                let err = std::cell::RefCell::new(None);
                let f = |th: f64| {
                    let nu = [th.cos(), th.sin()];
                    match self.ray_integral(region, moment, &nu, p) {
                        Ok(v) => v,
                        Err(e) => {
                            err.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                };
                let v = integrate(f, 0.0, 2.0 * PI, &[0.5 * PI, PI, 1.5 * PI], &opts)?.value;
                match err.into_inner() {
                    Some(e) => Err(e),
                    None => Ok(v),
                }
            }
            n => Err(invalid(format!("dimension {n} not supported"))),
        }
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.kernel.dimension {
            return Err(invalid(format!(
                "p has length {}, expected {}",
                p.len(),
                self.kernel.dimension
            )));
        }
        self.kernel.check_domain(p)
    }
}

/// `H(p)`.
pub fn eval_h(hp: &HamiltonianParams, p: &[f64]) -> Result<f64> {
    hp.check(p)?;
    let jump = hp.integral(Region::Full, Moment::Value, p)?;
    Ok(quad_form(&hp.a, p, p) + dot(&hp.b, p) + jump)
}

/// `H^ess(p)`.
pub fn eval_h_ess(hp: &HamiltonianParams, p: &[f64]) -> Result<f64> {
    hp.check(p)?;
    hp.integral(Region::Essential, Moment::Value, p)
}

fn basis(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// `DH(p)`.
pub fn grad_h(hp: &HamiltonianParams, p: &[f64]) -> Result<Vec<f64>> {
    hp.check(p)?;
    let n = p.len();
    let ap = mat_vec(&hp.a, p);
    (0..n)
        .map(|i| {
            let e = basis(n, i);
            Ok(2.0 * ap[i] + hp.b[i] + hp.integral(Region::Full, Moment::Gradient(&e), p)?)
        })
        .collect()
}

/// `DH^ess(p)`.
pub fn grad_h_ess(hp: &HamiltonianParams, p: &[f64]) -> Result<Vec<f64>> {
    hp.check(p)?;
    let n = p.len();
    (0..n)
        .map(|i| hp.integral(Region::Essential, Moment::Gradient(&basis(n, i)), p))
        .collect()
}

fn unit(nu: &[f64]) -> Result<()> {
    if (norm(nu) - 1.0).abs() > 1e-9 {
        return Err(invalid("ν must be a unit vector"));
    }
    Ok(())
}

/// `νᵀ D²H(p) ν`.
pub fn hess_quadform(hp: &HamiltonianParams, p: &[f64], nu: &[f64]) -> Result<f64> {
    hp.check(p)?;
    unit(nu)?;
    Ok(2.0 * quad_form(&hp.a, nu, nu) + hp.integral(Region::Full, Moment::Hessian(nu), p)?)
}

/// `νᵀ D²H^ess(p) ν`.
pub fn hess_quadform_ess(hp: &HamiltonianParams, p: &[f64], nu: &[f64]) -> Result<f64> {
    hp.check(p)?;
    unit(nu)?;
    hp.integral(Region::Essential, Moment::Hessian(nu), p)
}

impl ConvexHamiltonian for HamiltonianParams {
    fn dim(&self) -> usize {
        self.kernel.dimension
    }
    fn value(&self, p: &[f64]) -> Result<f64> {
        eval_h(self, p)
    }
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        grad_h(self, p)
    }
    fn hess_quadform(&self, p: &[f64], nu: &[f64]) -> Result<f64> {
        hess_quadform(self, p, nu)
    }
    fn domain_radius(&self, nu: &[f64]) -> f64 {
        self.kernel.exp_moment_bound(nu)
    }
}

/// `H^ess` viewed as a Hamiltonian of its own (for `L^ess`).
#[derive(Debug, Clone, Copy)]
pub struct Essential<'a>(pub &'a HamiltonianParams);

impl ConvexHamiltonian for Essential<'_> {
    fn dim(&self) -> usize {
        self.0.kernel.dimension
    }
    fn value(&self, p: &[f64]) -> Result<f64> {
        eval_h_ess(self.0, p)
    }
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        grad_h_ess(self.0, p)
    }
    fn hess_quadform(&self, p: &[f64], nu: &[f64]) -> Result<f64> {
        hess_quadform_ess(self.0, p, nu)
    }
    fn domain_radius(&self, nu: &[f64]) -> f64 {
        self.0.kernel.exp_moment_bound(nu)
    }
}
