//! Convex conjugates: the Lagrangian `L(q) = sup_p {p·q - H(p)}`, the
//! K-transform `K(p) = sup_y {p·y - |y| ω(y)}`, and `K⁻¹`.

use std::sync::Mutex;

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{ConvexHamiltonian, HamiltonianParams, QuadraticHamiltonian};
use crate::kernel::{dot, norm, Family, Kernel, Tail, DOMAIN_MARGIN};

/// Distance to the domain boundary (relative) under which a maximizer is
/// reported as a boundary hit.
const BOUNDARY_FLAG: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateResult {
    pub value: f64,
    /// Maximizer: `p0(q)` for Lagrangians, `y0(p)` for the K-transform.
    pub argmax: Vec<f64>,
    /// Stationarity defect, `|q - DH(p0)|`.
    pub residual: f64,
    pub iterations: usize,
    pub hit_domain_boundary: bool,
}

/// Newton start points derived from the asymptotic gradient law of `H`.
pub trait InitialGuess {
    fn initial_guess(&self, _q: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl InitialGuess for QuadraticHamiltonian {}

impl InitialGuess for crate::hamiltonian::Essential<'_> {
    fn initial_guess(&self, q: &[f64]) -> Option<Vec<f64>> {
        self.0.initial_guess(q)
    }
}

impl InitialGuess for HamiltonianParams {
    fn initial_guess(&self, q: &[f64]) -> Option<Vec<f64>> {
        let r = norm(q);
        if r <= std::f64::consts::E {
            return None;
        }
        let dir = q.iter().map(|v| v / r);
        let scale = match self.kernel.tail {
            Tail::Compact { rho } => r.ln() / rho,
            Tail::Critical { beta0 } => {
                let nu: Vec<f64> = q.iter().map(|v| v / r).collect();
                let b = self.kernel.exp_moment_bound(&nu);
                if b < beta0 * 1e6 {
                    (1.0 - 1.0 / r).min(1.0 - 10.0 * DOMAIN_MARGIN) * b
                } else {
                    r.ln()
                }
            }
            Tail::Intermediate { .. } => return None,
        };
        Some(dir.map(|v| v * scale).collect())
    }
}

fn in_domain<H: ConvexHamiltonian + ?Sized>(h: &H, p: &[f64]) -> bool {
    let r = norm(p);
    if r == 0.0 {
        return true;
    }
    let nu: Vec<f64> = p.iter().map(|v| v / r).collect();
    r <= h.domain_radius(&nu) * (1.0 - DOMAIN_MARGIN)
}

fn near_boundary<H: ConvexHamiltonian + ?Sized>(h: &H, p: &[f64]) -> bool {
    let r = norm(p);
    if r == 0.0 {
        return false;
    }
    let nu: Vec<f64> = p.iter().map(|v| v / r).collect();
    let b = h.domain_radius(&nu);
    b.is_finite() && b - r <= BOUNDARY_FLAG * b
}

fn finish<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    q: &[f64],
    p: Vec<f64>,
    iterations: usize,
) -> Result<ConjugateResult> {
    let g = h.gradient(&p)?;
    let residual = norm(&g.iter().zip(q).map(|(a, b)| b - a).collect::<Vec<_>>());
    let value = dot(&p, q) - h.value(&p)?;
    let hit = near_boundary(h, &p);
    Ok(ConjugateResult {
        value,
        argmax: p,
        residual,
        iterations,
        hit_domain_boundary: hit,
    })
}

fn tolerance(q: &[f64]) -> f64 {
    1e-12 * norm(q).max(1.0)
}

/// `L(q) = sup_p {p·q - H(p)}` by safeguarded Newton iteration.
pub fn conjugate<H: ConvexHamiltonian + InitialGuess + ?Sized>(
    h: &H,
    q: &[f64],
) -> Result<ConjugateResult> {
    conjugate_from(h, q, h.initial_guess(q).as_deref())
}

/// As [`conjugate`], starting from `start` when given.
pub fn conjugate_from<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    q: &[f64],
    start: Option<&[f64]>,
) -> Result<ConjugateResult> {
    if q.len() != h.dim() {
        return Err(invalid(format!(
            "q has length {}, expected {}",
            q.len(),
            h.dim()
        )));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(invalid("q must be finite"));
    }
    let start = start.filter(|p| p.len() == q.len() && in_domain(h, p));
    if h.dim() == 1 {
        conjugate_1d(h, q[0], start.map(|p| p[0]))
    } else {
        conjugate_nd(h, q, start)
    }
}

/// One dimension: bracketed Newton on the increasing map `p ↦ H'(p) - q`.
fn conjugate_1d<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    q: f64,
    start: Option<f64>,
) -> Result<ConjugateResult> {
    let upper = h.domain_radius(&[1.0]) * (1.0 - 2.0 * DOMAIN_MARGIN);
    let lower = -h.domain_radius(&[-1.0]) * (1.0 - 2.0 * DOMAIN_MARGIN);
    let tol = tolerance(&[q]);
    let g = |p: f64| -> Result<f64> {
        let v = h.gradient(&[p])?[0] - q;
        Ok(if v.is_nan() {
            f64::INFINITY * p.signum()
        } else {
            v
        })
    };
    let mut p = start.unwrap_or(0.0).clamp(lower, upper);
    let mut gp = g(p)?;
    let mut iterations = 0;
    if gp.abs() <= tol {
        return finish(h, &[q], vec![p], iterations);
    }

    // Bracket [lo, hi] with g(lo) < 0 < g(hi).
    let (mut lo, mut hi);
    let mut step = p.abs().max(1.0);
    if gp < 0.0 {
        lo = p;
        loop {
            let cand = (lo + step).min(upper);
            iterations += 1;
            let gc = g(cand)?;
            if gc >= 0.0 {
                hi = cand;
                if gc.abs() <= tol {
                    return finish(h, &[q], vec![cand], iterations);
                }
                break;
            }
            lo = cand;
            if cand >= upper {
                return finish(h, &[q], vec![upper], iterations);
            }
            step *= 2.0;
            if iterations > 2000 {
                return Err(Error::NonConvergence(format!(
                    "could not bracket the maximizer for q = {q}"
                )));
            }
        }
    } else {
        hi = p;
        loop {
            let cand = (hi - step).max(lower);
            iterations += 1;
            let gc = g(cand)?;
            if gc <= 0.0 {
                lo = cand;
                if gc.abs() <= tol {
                    return finish(h, &[q], vec![cand], iterations);
                }
                break;
            }
            hi = cand;
            if cand <= lower {
                return finish(h, &[q], vec![lower], iterations);
            }
            step *= 2.0;
            if iterations > 2000 {
                return Err(Error::NonConvergence(format!(
                    "could not bracket the maximizer for q = {q}"
                )));
            }
        }
    }

    p = if gp < 0.0 { lo } else { hi };
    gp = g(p)?;
    for _ in 0..500 {
        iterations += 1;
        let curv = h.hess_quadform(&[p], &[1.0])?;
        let newton = p - gp / curv;
        let mut next = if curv > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let width = hi - lo;
        let mut gn = g(next)?;
        let shrunk = if gn < 0.0 { hi - next } else { next - lo };
        // Newton that halves neither the defect nor the bracket gives way to bisection.
        if next == newton && gn.abs() > 0.5 * gp.abs() || shrunk > 0.5 * width {
            if gn < 0.0 {
                lo = next;
            } else {
                hi = next;
            }
            next = 0.5 * (lo + hi);
            gn = g(next)?;
        }
        if gn < 0.0 {
            lo = next;
        } else {
            hi = next;
        }
        p = next;
        gp = gn;
        if gp.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * p.abs().max(1e-300) {
            return finish(h, &[q], vec![p], iterations);
        }
    }
    Err(Error::NonConvergence(format!(
        "Newton on the conjugate did not converge for q = {q}"
    )))
}

fn solve_sym(hm: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    match rhs.len() {
        1 => (hm[0] > 0.0).then(|| vec![rhs[0] / hm[0]]),
        2 => {
            let det = hm[0] * hm[3] - hm[1] * hm[2];
            (det > 0.0).then(|| {
                vec![
                    (hm[3] * rhs[0] - hm[1] * rhs[1]) / det,
                    (hm[0] * rhs[1] - hm[2] * rhs[0]) / det,
                ]
            })
        }
        _ => None,
    }
}

/// Several dimensions: damped Newton ascent with backtracking, the iterate
/// kept inside the domain.
fn conjugate_nd<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    q: &[f64],
    start: Option<&[f64]>,
) -> Result<ConjugateResult> {
    let tol = tolerance(q);
    let mut p: Vec<f64> = start
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; q.len()]);
    let objective = |p: &[f64]| -> Result<f64> { Ok(dot(p, q) - h.value(p)?) };
    let mut phi = objective(&p)?;
    for it in 1..=500 {
        let g = h.gradient(&p)?;
        let ascent: Vec<f64> = q.iter().zip(&g).map(|(a, b)| a - b).collect();
        if norm(&ascent) <= tol {
            return finish(h, q, p, it);
        }
        let step = solve_sym(&h.hessian(&p)?, &ascent).unwrap_or_else(|| ascent.clone());
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-16 {
            let cand: Vec<f64> = p.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
            if in_domain(h, &cand) {
                if let Ok(v) = objective(&cand) {
                    if v >= phi - 1e-15 * phi.abs() {
                        moved = v > phi || alpha == 1.0;
                        p = cand;
                        phi = v;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            // Stalled: either on the boundary or at the attainable precision.
            let res = finish(h, q, p, it)?;
            if res.hit_domain_boundary || res.residual <= 1e3 * tol {
                return Ok(res);
            }
            return Err(Error::NonConvergence(format!(
                "damped Newton stalled with residual {:.3e}",
                res.residual
            )));
        }
    }
    Err(Error::NonConvergence(
        "damped Newton iteration budget exhausted".into(),
    ))
}

/// A Lagrangian evaluator.
pub trait Lagrangian: Sync {
    fn dim(&self) -> usize;
    fn lagrangian(&self, q: &[f64]) -> Result<f64>;
    /// `L(q) = L(-q)`.
    fn is_symmetric(&self) -> bool;
}

/// `L(q) = |q|²/(4c)`, conjugate of `c|p|²`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticLagrangian {
    pub dim: usize,
    pub c: f64,
}

impl Lagrangian for QuadraticLagrangian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn lagrangian(&self, q: &[f64]) -> Result<f64> {
        Ok(dot(q, q) / (4.0 * self.c))
    }
    fn is_symmetric(&self) -> bool {
        true
    }
}

/// Numerical conjugate of a Hamiltonian, warm-started along rays.
pub struct Conjugate<H> {
    pub hamiltonian: H,
    symmetric: bool,
    warm: Mutex<Option<(Vec<f64>, Vec<f64>)>>,
}

impl<H: ConvexHamiltonian + InitialGuess> Conjugate<H> {
    pub fn new(hamiltonian: H, symmetric: bool) -> Self {
        Self {
            hamiltonian,
            symmetric,
            warm: Mutex::new(None),
        }
    }

    /// Full solve; warm start when the previous query lies on the same ray.
    pub fn solve(&self, q: &[f64]) -> Result<ConjugateResult> {
        let start = {
            let cache = self.warm.lock().expect("warm-start cache poisoned");
            cache.as_ref().and_then(|(dir, p)| {
                let r = norm(q);
                (r > 0.0 && (dot(dir, q) / r - 1.0).abs() < 1e-12).then(|| p.clone())
            })
        };
        let res = match start {
            Some(p) => conjugate_from(&self.hamiltonian, q, Some(&p)),
            None => conjugate(&self.hamiltonian, q),
        }?;
        let r = norm(q);
        if r > 0.0 {
            let dir = q.iter().map(|v| v / r).collect();
            *self.warm.lock().expect("warm-start cache poisoned") = Some((dir, res.argmax.clone()));
        }
        Ok(res)
    }
}

impl Conjugate<HamiltonianParams> {
    /// `L` of a jump-diffusion Hamiltonian; symmetric iff the kernel is and `B = 0`.
    pub fn of(hp: HamiltonianParams) -> Self {
        let symmetric = hp.kernel.symmetric && hp.b.iter().all(|&b| b == 0.0);
        Self::new(hp, symmetric)
    }
}

impl<H: ConvexHamiltonian + InitialGuess> Lagrangian for Conjugate<H> {
    fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
    fn lagrangian(&self, q: &[f64]) -> Result<f64> {
        Ok(self.solve(q)?.value)
    }
    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

/// Maximizes the concave `r ↦ f(r)` on `[0, hi]` by golden-section search.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> (f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    let mut it = 0;
    while hi - lo > 1e-14 * hi.abs().max(1e-12) && it < 400 {
        it += 1;
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        }
    }
    (0.5 * (lo + hi), it)
}

/// `K(p) = sup_y {p·y - |y| ω(y)}`, with `|y| ω(y)` taken without the
/// normalization constant of the density (so `K(0) = 0`).
pub fn k_transform(k: &Kernel, p: &[f64]) -> Result<ConjugateResult> {
    if p.len() != k.dimension {
        return Err(invalid("p has the wrong dimension"));
    }
    if let Tail::Critical { .. } = k.tail {
        return Err(Error::UnsupportedTail("critical"));
    }
    let r = norm(p);
    if r == 0.0 {
        return Ok(ConjugateResult {
            value: 0.0,
            argmax: vec![0.0; p.len()],
            residual: 0.0,
            iterations: 0,
            hit_domain_boundary: false,
        });
    }
    let nu: Vec<f64> = p.iter().map(|v| v / r).collect();
    let shape = |t: f64| -> f64 {
        let y: Vec<f64> = nu.iter().map(|v| v * t).collect();
        k.shape_exponent(&y)
    };
    if let Tail::Compact { .. } = k.tail {
        // |y|ω(y) vanishes on the support: the sup sits on its far edge.
        let edge = k.ray_extent(&nu).unwrap_or(0.0);
        return Ok(ConjugateResult {
            value: r * edge,
            argmax: nu.iter().map(|v| v * edge).collect(),
            residual: 0.0,
            iterations: 0,
            hit_domain_boundary: true,
        });
    }
    let f = |t: f64| r * t - shape(t);
    let mut hi = 1.0;
    while f(2.0 * hi) > f(hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NonConvergence(
                "K-transform maximizer escaped".into(),
            ));
        }
    }
    let (t, iterations) = golden_max(f, 0.0, 2.0 * hi);
    let h = 1e-6 * t.max(1e-6);
    let slope = (shape(t + h) - shape((t - h).max(0.0))) / (t + h - (t - h).max(0.0));
    Ok(ConjugateResult {
        value: f(t).max(0.0),
        argmax: nu.iter().map(|v| v * t).collect(),
        residual: (r - slope).abs(),
        iterations,
        hit_domain_boundary: false,
    })
}

/// Radius `r` with `K(r ν) = z` for symmetric kernels.
pub fn k_inverse(k: &Kernel, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::BelowRange(z));
    }
    if !k.symmetric {
        return Err(Error::AsymmetricKernel(
            "K⁻¹ is only defined for symmetric kernels",
        ));
    }
    match (k.tail, &k.family) {
        (Tail::Critical { beta0 }, _) => return Ok(beta0),
        (Tail::Compact { .. }, Family::CompactUniform { rho, .. }) => return Ok(z / rho),
        (Tail::Compact { rho }, _) => return Ok(z / rho),
        _ => {}
    }
    let mut e = vec![0.0; k.dimension];
    e[0] = 1.0;
    let kval = |r: f64| -> Result<f64> {
        let p: Vec<f64> = e.iter().map(|v| v * r).collect();
        Ok(k_transform(k, &p)?.value)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while kval(hi)? < z {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NonConvergence("K⁻¹ bracket escaped".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kval(mid)? < z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelSpec};
    use serde_json::json;

    fn kernel(f: &str, p: serde_json::Value) -> Kernel {
        build_kernel(&KernelSpec::new(f, 1, p)).unwrap()
    }

    #[test]
    fn quadratic_is_self_conjugate() {
        let h = QuadraticHamiltonian::isotropic(1, 0.5);
        let r = conjugate(&h, &[3.0]).unwrap();
        assert!((r.value - 4.5).abs() < 1e-12);
        assert!((r.argmax[0] - 3.0).abs() < 1e-12);
        let h2 = QuadraticHamiltonian::isotropic(2, 0.5);
        let r = conjugate(&h2, &[3.0, -1.0]).unwrap();
        assert!((r.value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_at_gradient_of_minimum_vanishes() {
        let hp =
            HamiltonianParams::new(kernel("compact_uniform", json!({"rho": 1.0})), true).unwrap();
        let r = conjugate(&hp, &[0.0]).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax, vec![0.0]);
    }

    #[test]
    fn exp_linear_conjugate_closed_form() {
        // H(p) = p²/(1 - p²).
        let hp =
            HamiltonianParams::new(kernel("exp_linear", json!({"alpha": 1.0})), false).unwrap();
        let r = conjugate(&hp, &[16.0 / 9.0]).unwrap();
        assert!((r.value - 5.0 / 9.0).abs() < 1e-10);
        assert!((r.argmax[0] - 0.5).abs() < 1e-10);
        let grid = (1..2000).map(|i| -1.0 + i as f64 / 1000.0);
        let brute = grid
            .map(|p| p * 16.0 / 9.0 - p * p / (1.0 - p * p))
            .fold(f64::MIN, f64::max);
        assert!(r.value >= brute - 1e-12);
    }

    #[test]
    fn two_dimensional_conjugate() {
        // H(p) = π(e^{|p|²/4} - 1); at q = DH(p) with p = (1, 0.5).
        let k = build_kernel(&KernelSpec::new("exp_power", 2, json!({"alpha": 2.0}))).unwrap();
        let hp = HamiltonianParams::new(k, false).unwrap();
        let p = [1.0, 0.5];
        let q = hp.gradient(&p).unwrap();
        let r = conjugate(&hp, &q).unwrap();
        assert!((r.argmax[0] - 1.0).abs() < 1e-8 && (r.argmax[1] - 0.5).abs() < 1e-8);
        let expect = dot(&p, &q) - hp.value(&p).unwrap();
        assert!((r.value - expect).abs() < 1e-10);
    }

    #[test]
    fn warm_start_matches_cold() {
        let hp =
            HamiltonianParams::new(kernel("compact_uniform", json!({"rho": 1.0})), true).unwrap();
        let c = Conjugate::of(hp.clone());
        for q in [10.0, 20.0, 40.0] {
            let warm = c.solve(&[q]).unwrap();
            let cold = conjugate(&hp, &[q]).unwrap();
            assert!((warm.value - cold.value).abs() < 1e-9 * cold.value);
        }
        assert!(c.is_symmetric());
    }

    #[test]
    fn critical_boundary_flag() {
        let hp =
            HamiltonianParams::new(kernel("exp_linear", json!({"alpha": 1.0})), false).unwrap();
        let r = conjugate(&hp, &[1e14]).unwrap();
        assert!(r.hit_domain_boundary);
        assert!(r.argmax[0] < 1.0);
        let r = conjugate(&hp, &[2.0]).unwrap();
        assert!(!r.hit_domain_boundary);
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn k_transform_examples() {
        let k = kernel("exp_power", json!({"alpha": 2.0}));
        let r = k_transform(&k, &[2.0]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.argmax[0] - 1.0).abs() < 1e-6);
        assert_eq!(k_transform(&k, &[0.0]).unwrap().value, 0.0);
        let k = kernel("compact_uniform", json!({"rho": 1.5}));
        assert_eq!(k_transform(&k, &[-2.0]).unwrap().value, 3.0);
        let k = kernel("exp_linear", json!({"alpha": 1.0}));
        assert!(matches!(
            k_transform(&k, &[1.0]),
            Err(Error::UnsupportedTail(_))
        ));
    }

    #[test]
    fn k_inverse_examples() {
        let k = kernel("compact_uniform", json!({"rho": 1.0}));
        assert_eq!(k_inverse(&k, 10.0).unwrap(), 10.0);
        let k = kernel("exp_power", json!({"alpha": 2.0}));
        assert!((k_inverse(&k, 9.0).unwrap() - 6.0).abs() < 1e-9);
        let k = kernel("exp_linear", json!({"alpha": 1.7}));
        assert_eq!(k_inverse(&k, 123.0).unwrap(), 1.7);
        assert!(matches!(k_inverse(&k, -1.0), Err(Error::BelowRange(_))));
        let k = kernel("asymmetric_1d_demo", json!({}));
        assert!(k_inverse(&k, 1.0).is_err());
    }

    #[test]
    fn super_exp_k_inverse_order() {
        // K(p) ~ p ln p, so K⁻¹(z) ~ z / ln z.
        let k = kernel("super_exp", json!({}));
        let z = 1e6;
        let r = k_inverse(&k, z).unwrap();
        // Exact: K(p) = p ln p - p + 1 for p > 1.
        assert!(((r * r.ln() - r + 1.0) - z).abs() < 1e-6 * z);
    }
}
