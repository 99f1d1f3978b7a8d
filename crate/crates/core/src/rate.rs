//! Rate functions: `I∞(x,t)`, the clamped Lax-Oleinik solution `I^A`, and
//! leading-order exponents for `|u - u_R|`.
//!
//! Displacements are measured from the starting point to the boundary,
//! `I∞(x,t) = min_{y ∈ ∂B₁} min_{0 < s ≤ t} s L((y - x)/s)`. When `L(0) = 0`
//! the inner minimum sits at `s = t`.

use crate::error::{invalid, Error, Result};
use crate::kernel::{norm, Family, Kernel, Tail};
use crate::legendre::{k_inverse, Lagrangian};

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub value: f64,
    pub minimizing_boundary_point: Vec<f64>,
    /// Filled in by [`RateResult::with_prediction`].
    pub regime: Option<Tail>,
    pub predicted_log_bound: Option<f64>,
}

impl RateResult {
    /// Attaches the kernel's regime and its predicted exponent at `(r, theta, t)`.
    pub fn with_prediction(mut self, k: &Kernel, r: f64, theta: f64, t: f64) -> Result<Self> {
        self.regime = Some(k.tail);
        self.predicted_log_bound = Some(predicted_log_bound(k, r, theta, t)?);
        Ok(self)
    }
}

/// `L̲(r) = L(r e₁)` for symmetric Lagrangians.
pub fn radial_lagrangian<L: Lagrangian + ?Sized>(l: &L, r: f64) -> Result<f64> {
    let mut q = vec![0.0; l.dim()];
    q[0] = r;
    l.lagrangian(&q)
}

fn golden_min<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b)?;
        }
    }
    Ok(if fa <= fb { (a, fa) } else { (b, fb) })
}

/// `min_{0 < s ≤ t} s L(d/s)`; the perspective is convex in `s`.
fn travel_cost<L: Lagrangian + ?Sized>(l: &L, d: &[f64], t: f64, l0: f64) -> Result<f64> {
    let cost = |s: f64| -> Result<f64> {
        let q: Vec<f64> = d.iter().map(|v| v / s).collect();
        Ok(s * l.lagrangian(&q)?)
    };
    if norm(d) == 0.0 {
        return Ok(0.0);
    }
    let at_t = cost(t)?;
    if l0 <= 0.0 {
        return Ok(at_t);
    }
    let (_, best) = golden_min(cost, 1e-9 * t, t, 1e-10 * t)?;
    Ok(best.min(at_t))
}

fn check_point(dim: usize, x: &[f64], t: f64) -> Result<()> {
    if x.len() != dim {
        return Err(invalid(format!("x has length {}, expected {dim}", x.len())));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be positive and finite, got {t}")));
    }
    if !(norm(x) <= 1.0 + 1e-12) {
        return Err(invalid("x must lie in the closed unit ball"));
    }
    Ok(())
}

/// `I∞(x,t)` by minimization over the boundary sphere.
pub fn rate_iinf<L: Lagrangian + ?Sized>(l: &L, x: &[f64], t: f64) -> Result<RateResult> {
    check_point(l.dim(), x, t)?;
    let zero = vec![0.0; x.len()];
    let l0 = l.lagrangian(&zero)?;
    let finish = |value: f64, y: Vec<f64>| RateResult {
        value,
        minimizing_boundary_point: y,
        regime: None,
        predicted_log_bound: None,
    };
    match x.len() {
        1 => {
            let right = travel_cost(l, &[1.0 - x[0]], t, l0)?;
            let left = travel_cost(l, &[-1.0 - x[0]], t, l0)?;
            Ok(if right <= left {
                finish(right, vec![1.0])
            } else {
                finish(left, vec![-1.0])
            })
        }
        2 => {
            let r = norm(x);
            if l.is_symmetric() {
                let y = if r > 0.0 {
                    vec![x[0] / r, x[1] / r]
                } else {
                    vec![1.0, 0.0]
                };
                let d = (1.0 - r).max(0.0);
                return Ok(finish(travel_cost(l, &[d, 0.0], t, l0)?, y));
            }
            let at = |th: f64| -> Result<f64> {
                let d = [th.cos() - x[0], th.sin() - x[1]];
                travel_cost(l, &d, t, l0)
            };
            const ANGLES: usize = 256;
            let step = 2.0 * std::f64::consts::PI / ANGLES as f64;
            let mut best = (0.0, f64::INFINITY);
            for i in 0..ANGLES {
                let th = i as f64 * step;
                let v = at(th)?;
                if v < best.1 {
                    best = (th, v);
                }
            }
            let (th, v) = golden_min(at, best.0 - step, best.0 + step, 1e-10)?;
            let (th, v) = if v <= best.1 { (th, v) } else { best };
            Ok(finish(v, vec![th.cos(), th.sin()]))
        }
        n => Err(invalid(format!("dimension {n} not supported"))),
    }
}

/// `I^A(x,t) = min(A, I∞(x,t))`; `A = +inf` disables the clamp.
pub fn lax_oleinik<L: Lagrangian + ?Sized>(l: &L, a: f64, x: &[f64], t: f64) -> Result<f64> {
    if a.is_nan() || a < 0.0 {
        return Err(invalid(format!("A must be nonnegative, got {a}")));
    }
    check_point(l.dim(), x, t)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(rate_iinf(l, x, t)?.value.min(a))
}

/// Leading exponent `E(R)` in `|u - u_R| ≤ e^{-E(R)}` over `|x| ≤ θR`, `t ≤ T`.
pub fn predicted_log_bound(k: &Kernel, r: f64, theta: f64, t: f64) -> Result<f64> {
    if !(r > std::f64::consts::E) {
        return Err(invalid(format!("R must exceed e, got {r}")));
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(invalid(format!("theta must lie in [0, 1), got {theta}")));
    }
    if !(t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    let scale = (1.0 - theta) * r;
    match k.tail {
        // An asymmetric compact kernel sits below the uniform kernel on its
        // largest support radius, which is what `rho` records.
        Tail::Compact { rho } => Ok(scale / rho * r.ln()),
        Tail::Critical { beta0 } => Ok(scale * beta0),
        Tail::Intermediate { .. } => {
            if !k.symmetric {
                return Err(Error::MajorizationUnavailable);
            }
            Ok(scale * k_inverse(k, (scale / t).ln())?)
        }
    }
}

/// Largest support radius of a compact kernel (the symmetric majorant's `ρ`).
pub fn support_radius(k: &Kernel) -> Option<f64> {
    match &k.family {
        Family::CompactUniform { rho, .. } => Some(*rho),
        _ => match k.tail {
            Tail::Compact { rho } => Some(rho),
            _ => None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianParams;
    use crate::kernel::{build_kernel, KernelSpec};
    use crate::legendre::{Conjugate, QuadraticLagrangian};
    use serde_json::json;

    fn kernel(f: &str, p: serde_json::Value) -> Kernel {
        build_kernel(&KernelSpec::new(f, 1, p)).unwrap()
    }

    #[test]
    fn boundary_points_cost_nothing() {
        let l = QuadraticLagrangian { dim: 1, c: 0.5 };
        assert_eq!(rate_iinf(&l, &[1.0], 0.3).unwrap().value, 0.0);
        assert_eq!(rate_iinf(&l, &[-1.0], 7.0).unwrap().value, 0.0);
        let l2 = QuadraticLagrangian { dim: 2, c: 0.5 };
        let r = rate_iinf(&l2, &[0.6, -0.8], 1.0).unwrap();
        assert!(r.value.abs() < 1e-15);
        let demo = Conjugate::of(
            HamiltonianParams::new(kernel("asymmetric_1d_demo", json!({})), false).unwrap(),
        );
        assert_eq!(rate_iinf(&demo, &[1.0], 1.0).unwrap().value, 0.0);
        assert_eq!(rate_iinf(&demo, &[-1.0], 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn quadratic_lax_oleinik() {
        let l = QuadraticLagrangian { dim: 1, c: 0.5 };
        assert!((lax_oleinik(&l, 10.0, &[0.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(lax_oleinik(&l, 0.0, &[0.3], 1.0).unwrap(), 0.0);
        assert_eq!(lax_oleinik(&l, 0.1, &[0.0], 1.0).unwrap(), 0.1);
        assert_eq!(
            lax_oleinik(&l, f64::INFINITY, &[0.2], 0.5).unwrap(),
            rate_iinf(&l, &[0.2], 0.5).unwrap().value
        );
        assert!(lax_oleinik(&l, -1.0, &[0.0], 1.0).is_err());
        assert!(rate_iinf(&l, &[0.0], 0.0).is_err());
        assert!(rate_iinf(&l, &[1.5], 1.0).is_err());
    }

    #[test]
    fn symmetric_origin_is_radial_value() {
        let hp =
            HamiltonianParams::new(kernel("compact_uniform", json!({"rho": 1.0})), true).unwrap();
        let l = Conjugate::of(hp);
        let r = rate_iinf(&l, &[0.0], 1.0).unwrap();
        assert!((r.value - radial_lagrangian(&l, 1.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn demo_compares_both_boundary_points() {
        let l = Conjugate::of(
            HamiltonianParams::new(kernel("asymmetric_1d_demo", json!({})), false).unwrap(),
        );
        let r = rate_iinf(&l, &[0.5], 0.1).unwrap();
        let left = 0.1 * l.lagrangian(&[-15.0]).unwrap();
        let right = 0.1 * l.lagrangian(&[5.0]).unwrap();
        let (best, y) = if left < right {
            (left, -1.0)
        } else {
            (right, 1.0)
        };
        assert_eq!(r.minimizing_boundary_point, vec![y]);
        assert!((r.value - best).abs() < 1e-12 * best);
    }

    #[test]
    fn predictions() {
        let e2 = std::f64::consts::E.powi(2);
        let k = kernel("compact_uniform", json!({"rho": 1.0}));
        assert!((predicted_log_bound(&k, e2, 0.0, 3.0).unwrap() - 2.0 * e2).abs() < 1e-12);
        let k = kernel("exp_linear", json!({"alpha": 1.0}));
        assert_eq!(predicted_log_bound(&k, 40.0, 0.5, 1.0).unwrap(), 20.0);
        let k = kernel("exp_power", json!({"alpha": 2.0}));
        let r: f64 = 1e4;
        let expect = r * 2.0 * r.ln().sqrt();
        assert!((predicted_log_bound(&k, r, 0.0, 1.0).unwrap() - expect).abs() < 1e-8 * expect);
        assert!(predicted_log_bound(&k, 2.0, 0.0, 1.0).is_err());
        let k = kernel("asymmetric_1d_demo", json!({}));
        assert_eq!(predicted_log_bound(&k, 20.0, 0.0, 1.0).unwrap(), 20.0);
    }

    #[test]
    fn two_dimensional_asymmetric_search_matches_symmetric_closed_form() {
        struct Shifted(QuadraticLagrangian);
        impl Lagrangian for Shifted {
            fn dim(&self) -> usize {
                2
            }
            fn lagrangian(&self, q: &[f64]) -> Result<f64> {
                self.0.lagrangian(q)
            }
            fn is_symmetric(&self) -> bool {
                false
            }
        }
        let l = Shifted(QuadraticLagrangian { dim: 2, c: 0.5 });
        let x = [0.3, 0.2];
        let r = rate_iinf(&l, &x, 0.7).unwrap();
        let d = 1.0 - norm(&x);
        let expect = 0.7 * (d / 0.7).powi(2) / 2.0;
        assert!((r.value - expect).abs() < 1e-9);
    }
}
