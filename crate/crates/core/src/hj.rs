//! Monotone finite differences for `I_t + H(DI) = 0` on `(-1, 1)`, with
//! `I = 0` at `x = ±1` and `I(·, 0) ≡ A`.
//!
//! The numerical flux is Godunov's: for `p⁻ ≤ p⁺` the minimum of `H` over
//! `[p⁻, p⁺]`, otherwise the maximum over `[p⁺, p⁻]`. It is monotone under
//! `dt max|H'| / h ≤ 1/2`. `H` is tabulated once on `[-P₋, P₊]` and continued linearly outside. The
//! cut-off is chosen so that, from the first requested time `t₁` on, the
//! Lax-Oleinik minimizers never need velocities beyond `H'(P)`: either
//! `|H'(P)| ≥ 1/t₁` (no boundary point is farther than 1), or
//! `t₁ (P H'(P) - H(P)) ≥ A`, so that `t L(q) ≥ A` past `H'(P)` and the clamp
//! at `A` takes over.
//!
//! The critical variant additionally caps `|H'|` (the table stops where it
//! reaches `derivative_cap`), clamps slopes to `[-β₀, β₀]` and projects the field onto `β₀`-Lipschitz functions
//! after every step.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::ConvexHamiltonian;
use crate::kernel::DOMAIN_MARGIN;
pub use crate::table::{FieldHistory, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HJGrid {
    /// Interior points.
    pub n: usize,
    /// Time step; derived from the CFL bound when `None`.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Initial level `A`.
    pub a_level: f64,
}

impl HJGrid {
    pub fn new(n: usize, t_end: f64, a_level: f64) -> Self {
        Self {
            n,
            dt: None,
            t_end,
            a_level,
        }
    }

    pub fn h(&self) -> f64 {
        2.0 / (self.n as f64 + 1.0)
    }

    /// All nodes, boundary included.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        let mut x: Vec<f64> = (0..self.n + 2).map(|i| -1.0 + i as f64 * h).collect();
        x[self.n + 1] = 1.0;
        x
    }

    fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(invalid("the grid needs at least 3 interior points"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end must be positive"));
        }
        if !(self.a_level >= 0.0 && self.a_level.is_finite()) {
            return Err(invalid("A must be finite and nonnegative"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(invalid("dt must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HJOptions {
    /// Largest `|H'|` kept by the constrained solver.
    pub derivative_cap: f64,
    pub table_points: usize,
}

impl Default for HJOptions {
    fn default() -> Self {
        Self {
            derivative_cap: 500.0,
            table_points: 4097,
        }
    }
}

/// `p ↦ H(-p)`, for equations written with the opposite displacement.
#[derive(Debug, Clone)]
pub struct Reflected<H>(pub H);

impl<H: ConvexHamiltonian> ConvexHamiltonian for Reflected<H> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, p: &[f64]) -> Result<f64> {
        self.0.value(&p.iter().map(|v| -v).collect::<Vec<_>>())
    }
    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        let g = self.0.gradient(&p.iter().map(|v| -v).collect::<Vec<_>>())?;
        Ok(g.into_iter().map(|v| -v).collect())
    }
    fn hess_quadform(&self, p: &[f64], nu: &[f64]) -> Result<f64> {
        self.0
            .hess_quadform(&p.iter().map(|v| -v).collect::<Vec<_>>(), nu)
    }
    fn domain_radius(&self, nu: &[f64]) -> f64 {
        self.0
            .domain_radius(&nu.iter().map(|v| -v).collect::<Vec<_>>())
    }
}

/// Cubic Hermite table of `H` with linear continuation.
#[derive(Debug, Clone)]
struct Tabulated {
    lo: f64,
    hi: f64,
    step: f64,
    v: Vec<f64>,
    d: Vec<f64>,
}

impl Tabulated {
    fn build<H: ConvexHamiltonian + ?Sized>(
        h: &H,
        lo: f64,
        hi: f64,
        points: usize,
    ) -> Result<Self> {
        let points = points.max(3);
        let step = (hi - lo) / (points - 1) as f64;
        let samples: Vec<(f64, f64)> = (0..points)
            .into_par_iter()
            .map(|i| {
                let p = if i == points - 1 {
                    hi
                } else {
                    lo + i as f64 * step
                };
                Ok((h.value(&[p])?, h.gradient(&[p])?[0]))
            })
            .collect::<Result<_>>()?;
        let (v, d) = samples.into_iter().unzip();
        Ok(Self { lo, hi, step, v, d })
    }

    fn eval(&self, p: f64) -> f64 {
        let last = self.v.len() - 1;
        if p <= self.lo {
            return self.v[0] + self.d[0] * (p - self.lo);
        }
        if p >= self.hi {
            return self.v[last] + self.d[last] * (p - self.hi);
        }
        let u = (p - self.lo) / self.step;
        let k = (u.floor() as usize).min(last - 1);
        let s = u - k as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.v[k]
            + h10 * self.step * self.d[k]
            + h01 * self.v[k + 1]
            + h11 * self.step * self.d[k + 1]
    }

    fn max_slope(&self) -> f64 {
        self.d.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Minimizer of the continued table (`±inf` if it is monotone).
    fn argmin(&self) -> f64 {
        if self.d[0] >= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self.d.windows(2).position(|w| w[0] < 0.0 && w[1] >= 0.0) {
            Some(k) => {
                let p0 = self.lo + k as f64 * self.step;
                p0 + self.step * self.d[k] / (self.d[k] - self.d[k + 1])
            }
            None => f64::INFINITY,
        }
    }
}

/// One explicit step of the monotone scheme.
#[derive(Debug, Clone)]
pub struct Scheme {
    table: Tabulated,
    argmin: f64,
    max_slope: f64,
    h: f64,
    a_level: f64,
    beta0: Option<f64>,
}

impl Scheme {
    /// Table range `[-P₋, P₊]`.
    pub fn slope_range(&self) -> (f64, f64) {
        (self.table.lo, self.table.hi)
    }

    /// `max|H'|` over the table.
    pub fn max_derivative(&self) -> f64 {
        self.max_slope
    }

    /// Largest step with `dt max|H'| / h ≤ 1/2`.
    pub fn dt_limit(&self) -> f64 {
        self.h / (2.0 * self.max_slope.max(1e-300))
    }

    pub fn numerical_hamiltonian(&self, pm: f64, pp: f64) -> f64 {
        let (mut a, mut b) = (pm, pp);
        if let Some(beta) = self.beta0 {
            let cap = beta * (1.0 - DOMAIN_MARGIN);
            a = a.clamp(-cap, cap);
            b = b.clamp(-cap, cap);
        }
        if a <= b {
            self.table.eval(self.argmin.clamp(a, b))
        } else {
            self.table.eval(a).max(self.table.eval(b))
        }
    }

    /// Advances the full nodal field (boundary included) by `dt`.
    pub fn step(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let m = u.len();
        let mut out = vec![0.0; m];
        for i in 1..m - 1 {
            let pm = (u[i] - u[i - 1]) / self.h;
            let pp = (u[i + 1] - u[i]) / self.h;
            out[i] = (u[i] - dt * self.numerical_hamiltonian(pm, pp)).clamp(0.0, self.a_level);
        }
        if let Some(b) = self.beta0 {
            lipschitz_envelope(&mut out, b * self.h);
        }
        out
    }
}

/// Largest minorant with `|u[i+1] - u[i]| ≤ jump`, by two min-plus sweeps.
pub fn lipschitz_envelope(u: &mut [f64], jump: f64) {
    for i in 1..u.len() {
        u[i] = u[i].min(u[i - 1] + jump);
    }
    for i in (0..u.len() - 1).rev() {
        u[i] = u[i].min(u[i + 1] + jump);
    }
}

/// Largest `|Δu|/h` over neighbouring nodes.
pub fn max_slope(u: &[f64], h: f64) -> f64 {
    u.windows(2)
        .fold(0.0, |m, w| m.max((w[1] - w[0]).abs() / h))
}

/// `L(H'(p)) = p H'(p) - H(p)` along the half-line of sign `s`.
fn legendre_at<H: ConvexHamiltonian + ?Sized>(h: &H, p: f64) -> Result<(f64, f64)> {
    let g = h.gradient(&[p])?[0];
    Ok((p * g - h.value(&[p])?, g))
}

fn side_cutoff<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    sign: f64,
    first: f64,
    a_level: f64,
    constrained: bool,
    opts: &HJOptions,
) -> Result<f64> {
    let bound = h.domain_radius(&[sign]) * (1.0 - 2.0 * DOMAIN_MARGIN);
    let mut p = bound.min(0.25);
    loop {
        let (l, g) = legendre_at(h, sign * p)?;
        if first * l >= a_level || sign * g * first >= 2.0 {
            break;
        }
        if p >= bound {
            if constrained {
                break;
            }
            return Err(Error::DomainViolation {
                p: vec![sign * p * 1.5],
                bound: h.domain_radius(&[sign]),
            });
        }
        p = (p * 1.25).min(bound);
        if p > 1e6 {
            return Err(Error::NonConvergence(
                "slope cut-off for the HJ table not found".into(),
            ));
        }
    }
    if constrained && legendre_at(h, sign * p)?.1.abs() > opts.derivative_cap {
        let (mut lo, mut hi) = (0.0, p);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if legendre_at(h, sign * mid)?.1.abs() > opts.derivative_cap {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        p = lo;
    }
    Ok(p)
}

/// Builds the scheme for `grid`, reading the first positive entry of `times`
/// as the earliest time at which the field must be exact.
pub fn build_scheme<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    grid: &HJGrid,
    times: &[f64],
    beta0: Option<f64>,
    opts: &HJOptions,
) -> Result<Scheme> {
    if h.dim() != 1 {
        return Err(invalid("the HJ solver is one-dimensional"));
    }
    grid.validate()?;
    if let Some(b) = beta0 {
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid("beta0 must be positive"));
        }
    }
    let first = times
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .fold(grid.t_end, f64::min);
    let constrained = beta0.is_some();
    if !constrained && grid.a_level > 0.0 {
        // The first step samples slopes ±A/h.
        let steep = grid.a_level / grid.h();
        for sign in [1.0, -1.0] {
            let bound = h.domain_radius(&[sign]);
            if steep >= bound * (1.0 - DOMAIN_MARGIN) {
                return Err(Error::DomainViolation {
                    p: vec![sign * steep],
                    bound,
                });
            }
        }
    }
    let plus = side_cutoff(h, 1.0, first, grid.a_level, constrained, opts)?;
    let minus = side_cutoff(h, -1.0, first, grid.a_level, constrained, opts)?;
    let table = Tabulated::build(h, -minus, plus, opts.table_points)?;
    Ok(Scheme {
        argmin: table.argmin(),
        max_slope: table.max_slope(),
        table,
        h: grid.h(),
        a_level: grid.a_level,
        beta0,
    })
}

fn march(scheme: &Scheme, grid: &HJGrid, times: &[f64]) -> Result<FieldHistory> {
    let mut targets: Vec<f64> = times.to_vec();
    if targets
        .iter()
        .any(|&t| !(t >= 0.0 && t <= grid.t_end * (1.0 + 1e-12)))
    {
        return Err(invalid("snapshot times must lie in [0, t_end]"));
    }
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let limit = scheme.dt_limit();
    let dt = match grid.dt {
        Some(d) if d > limit => return Err(Error::CflViolation { dt: d, limit }),
        Some(d) => d,
        None => 0.9 * limit,
    };
    let x = grid.nodes();
    let mut u = vec![grid.a_level; x.len()];
    u[0] = 0.0;
    u[x.len() - 1] = 0.0;
    if let Some(b) = scheme.beta0 {
        lipschitz_envelope(&mut u, b * grid.h());
    }
    let mut t = 0.0;
    let mut snapshots = Vec::with_capacity(targets.len());
    for target in targets {
        while target - t > 1e-14 * target.max(1.0) {
            let step = dt.min(target - t);
            u = scheme.step(&u, step);
            t += step;
        }
        t = target;
        snapshots.push(Snapshot {
            t,
            values: u.clone(),
        });
    }
    Ok(FieldHistory { x, snapshots })
}

/// Solves the unconstrained problem; snapshots at `times`.
pub fn solve_hj<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    grid: &HJGrid,
    times: &[f64],
) -> Result<FieldHistory> {
    solve_hj_with(h, grid, times, &HJOptions::default())
}

pub fn solve_hj_with<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    grid: &HJGrid,
    times: &[f64],
    opts: &HJOptions,
) -> Result<FieldHistory> {
    let scheme = build_scheme(h, grid, times, None, opts)?;
    march(&scheme, grid, times)
}

/// Solves `max(I_t + H(DI), |DI| - β₀) = 0` for critical Hamiltonians.
pub fn solve_hj_constrained<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    beta0: f64,
    grid: &HJGrid,
    times: &[f64],
) -> Result<FieldHistory> {
    solve_hj_constrained_with(h, beta0, grid, times, &HJOptions::default())
}

pub fn solve_hj_constrained_with<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    beta0: f64,
    grid: &HJGrid,
    times: &[f64],
    opts: &HJOptions,
) -> Result<FieldHistory> {
    let scheme = build_scheme(h, grid, times, Some(beta0), opts)?;
    march(&scheme, grid, times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{HamiltonianParams, QuadraticHamiltonian};
    use crate::kernel::{build_kernel, KernelSpec};
    use serde_json::json;

    fn quadratic() -> QuadraticHamiltonian {
        QuadraticHamiltonian::isotropic(1, 0.5)
    }

    fn sup_error(hist: &FieldHistory, t: f64, exact: impl Fn(f64) -> f64) -> f64 {
        let s = hist.at(t).unwrap();
        hist.x
            .iter()
            .zip(&s.values)
            .fold(0.0, |m, (x, v)| m.max((v - exact(*x)).abs()))
    }

    #[test]
    fn quadratic_matches_lax_oleinik() {
        let grid = HJGrid::new(399, 1.0, 10.0);
        let hist = solve_hj(&quadratic(), &grid, &[1.0]).unwrap();
        let e = sup_error(&hist, 1.0, |x| (10f64).min((1.0 - x.abs()).powi(2) / 2.0));
        assert!(e < 0.05, "err={e}");
    }

    #[test]
    fn first_order_refinement() {
        let exact = |x: f64| (10f64).min((1.0 - x.abs()).powi(2) / 0.5);
        let errs: Vec<f64> = [199, 399, 799]
            .iter()
            .map(|&n| {
                let hist = solve_hj(&quadratic(), &HJGrid::new(n, 0.25, 10.0), &[0.25]).unwrap();
                sup_error(&hist, 0.25, exact)
            })
            .collect();
        assert!(
            errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1],
            "{errs:?}"
        );
    }

    #[test]
    fn zero_level_stays_zero() {
        let grid = HJGrid::new(99, 1.0, 0.0);
        let hist = solve_hj(&quadratic(), &grid, &[0.0, 0.5, 1.0]).unwrap();
        assert!(hist
            .snapshots
            .iter()
            .all(|s| s.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn explicit_dt_is_checked() {
        let grid = HJGrid {
            dt: Some(0.5),
            ..HJGrid::new(99, 1.0, 1.0)
        };
        assert!(matches!(
            solve_hj(&quadratic(), &grid, &[1.0]),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn scheme_is_monotone() {
        let grid = HJGrid::new(49, 1.0, 3.0);
        let scheme =
            build_scheme(&quadratic(), &grid, &[0.1], None, &HJOptions::default()).unwrap();
        let dt = 0.9 * scheme.dt_limit();
        let mut state: Vec<f64> = (0..51)
            .map(|i| 3.0 * ((i as f64 * 0.37).sin().abs()))
            .collect();
        state[0] = 0.0;
        state[50] = 0.0;
        let base = scheme.step(&state, dt);
        for j in 1..50 {
            let mut bumped = state.clone();
            bumped[j] = (bumped[j] + 0.05).min(3.0);
            let out = scheme.step(&bumped, dt);
            assert!(
                out.iter().zip(&base).all(|(a, b)| *a >= *b - 1e-14),
                "node {j}"
            );
        }
    }

    #[test]
    fn critical_constrained_trace_and_slope() {
        let k = build_kernel(&KernelSpec::new("exp_linear", 1, json!({"alpha": 1.0}))).unwrap();
        let hp = HamiltonianParams::new(k, false).unwrap();
        let grid = HJGrid::new(199, 1.0, 10.0);
        let hist = solve_hj_constrained(&hp, 1.0, &grid, &[1e-3, 0.1]).unwrap();
        for s in &hist.snapshots {
            assert!(max_slope(&s.values, grid.h()) <= 1.0 + 2.0 * grid.h());
        }
        let e = sup_error(&hist, 1e-3, |x| 10f64.min(1.0 - x.abs()));
        assert!(e < 0.05, "trace err={e}");
        assert!(matches!(
            solve_hj(&hp, &grid, &[1e-3]),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn envelope_is_lipschitz_minorant() {
        let mut u = vec![0.0, 5.0, 5.0, 0.2, 5.0, 0.0];
        lipschitz_envelope(&mut u, 1.0);
        assert_eq!(u, vec![0.0, 1.0, 1.2, 0.2, 1.0, 0.0]);
    }
}
