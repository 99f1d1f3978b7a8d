//! Explicit simulation of the 1-D nonlocal parabolic equation
//!
//! ```text
//! u_t = A u_xx + B u_x + ∫ (u(x+y) - u(x) - u_x y 1{|y|<1}) J(y) dy
//! ```
//!
//! on a truncated line and on `B_R = (-R, R)` with exterior data, plus the
//! measurements built on top of it: `sup |u - u_R|`, the empirical rate
//! `I_R = -(1/R) ln v_R(R x, R t)` and least-squares fits over R-sweeps.
//!
//! The compensator term is used only when [`SimConfig::compensated`] is set
//! (the default for singular kernels). For integrable kernels the operator is
//! `∫ (u(x+y) - u(x)) J(y) dy`, i.e. jumps are distributed like `J`.
//!
//! Every update is a nonnegative combination of old values, which keeps the
//! fields in `[0, M]` and, importantly, preserves relative precision of tiny
//! values. The difference `u - u_R` is therefore marched directly
//! ([`simulate_difference`]) instead of being formed by subtraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::kernel::{Kernel, KernelSpec};
use crate::quadrature::{integrate, QuadOptions};
use crate::rate::predicted_log_bound;
use crate::table::{FieldHistory, Snapshot, Table};

/// Values of `v_R` at or below this are treated as underflowed.
pub const SATURATION_FLOOR: f64 = 1e-300;

/// Upper bound on the time step. The positivity CFL alone allows dt close
/// to `1/mass`, far too coarse for exponents of size `R ln R`.
pub const DT_CAP: f64 = 1e-3;

/// Tail mass below which jumps are ignored when sizing the truncation buffer.
pub const REACH_TOL: f64 = 1e-16;

#[derive(Clone)]
pub enum InitialData {
    Constant(f64),
    /// Hat function of the given height supported on `center ± half_width`.
    Tent {
        center: f64,
        half_width: f64,
        height: f64,
    },
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        sup: f64,
    },
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Constant(c) => write!(f, "Constant({c})"),
            InitialData::Tent {
                center,
                half_width,
                height,
            } => write!(f, "Tent({center}, {half_width}, {height})"),
            InitialData::Custom { sup, .. } => write!(f, "Custom(sup = {sup})"),
        }
    }
}

impl InitialData {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialData::Constant(c) => *c,
            InitialData::Tent {
                center,
                half_width,
                height,
            } => height * (1.0 - (x - center).abs() / half_width).max(0.0),
            InitialData::Custom { f, .. } => f(x),
        }
    }

    /// `‖u0‖∞`.
    pub fn sup(&self) -> f64 {
        match self {
            InitialData::Constant(c) => c.abs(),
            InitialData::Tent { height, .. } => height.abs(),
            InitialData::Custom { sup, .. } => *sup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcMode {
    WholeLine,
    DirichletZeroOutside,
    Barrier,
}

/// How `J` enters the operator: `∫ u(x+y) J(y)` (jump law of the process,
/// matching `H(p) = ∫ (e^{p·y} - 1) J`) or the convolution `J * u`.
/// The two coincide for symmetric kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Jump,
    Convolution,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub kernel: Kernel,
    pub compensated: bool,
    pub a_diff: f64,
    pub b_drift: f64,
    pub r: f64,
    /// Half-width of the whole-line surrogate; `None` picks `R + max(reach, 10)`.
    pub domain_truncation: Option<f64>,
    pub n_per_unit: usize,
    /// `None` derives dt from the CFL bound (factor 0.9), capped at `dt_cap`.
    pub dt: Option<f64>,
    pub dt_cap: f64,
    pub t_end: f64,
    pub u0: InitialData,
    pub bc_mode: BcMode,
    pub convention: Convention,
    /// Extra output times in `[0, t_end]`; `t_end` is always recorded.
    pub snapshot_times: Vec<f64>,
}

impl SimConfig {
    /// `u0 ≡ 1`, Dirichlet mode, 20 nodes per unit length.
    pub fn new(kernel: Kernel, r: f64, t_end: f64) -> Self {
        let compensated = kernel.singularity_exponent > 0.0;
        Self {
            kernel,
            compensated,
            a_diff: 0.0,
            b_drift: 0.0,
            r,
            domain_truncation: None,
            n_per_unit: 20,
            dt: None,
            dt_cap: DT_CAP,
            t_end,
            u0: InitialData::Constant(1.0),
            bc_mode: BcMode::DirichletZeroOutside,
            convention: Convention::Jump,
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_mode(mut self, mode: BcMode) -> Self {
        self.bc_mode = mode;
        self
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_per_unit as f64
    }

    fn validate(&self) -> Result<()> {
        if self.kernel.dimension != 1 {
            return Err(invalid("simulation is one-dimensional only"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid(format!("R must be positive, got {}", self.r)));
        }
        if self.n_per_unit == 0 {
            return Err(invalid("n_per_unit must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid(format!("T must be positive, got {}", self.t_end)));
        }
        if !(self.a_diff >= 0.0) || !self.b_drift.is_finite() {
            return Err(invalid("need A_diff >= 0 and finite B_drift"));
        }
        if !self.compensated && self.kernel.singularity_exponent >= 1.0 {
            return Err(invalid(
                "uncompensated form requires singularity exponent < 1",
            ));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(invalid(format!("dt must be positive, got {dt}")));
            }
        }
        if self
            .snapshot_times
            .iter()
            .any(|&t| !(0.0..=self.t_end).contains(&t))
        {
            return Err(invalid("snapshot times must lie in [0, T]"));
        }
        if self.u0.sup() < 0.0 || !self.u0.sup().is_finite() {
            return Err(invalid("u0 must be bounded"));
        }
        Ok(())
    }

    /// Whole-line half-width actually used, checked against the kernel reach.
    pub fn truncation(&self) -> Result<f64> {
        let reach = self.kernel.reach(REACH_TOL);
        let required = self.r + reach;
        match self.domain_truncation {
            None => Ok(self.r + reach.max(10.0)),
            Some(l) if l < required => Err(Error::TruncationTooSmall {
                truncation: l,
                required,
            }),
            Some(l) => Ok(l),
        }
    }
}

/// JSON form of [`SimConfig`], in the same style as kernel specs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub kernel: KernelSpec,
    #[serde(default)]
    pub compensated: Option<bool>,
    #[serde(default)]
    pub a_diff: f64,
    #[serde(default)]
    pub b_drift: f64,
    pub r: f64,
    #[serde(default)]
    pub domain_truncation: Option<f64>,
    #[serde(default = "default_n")]
    pub n_per_unit: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub u0: InitialSpec,
    #[serde(default = "default_mode")]
    pub bc_mode: BcMode,
    #[serde(default)]
    pub convention: Convention,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_n() -> usize {
    20
}

fn default_mode() -> BcMode {
    BcMode::DirichletZeroOutside
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    Tent {
        center: f64,
        half_width: f64,
        height: f64,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Constant { value: 1.0 }
    }
}

impl SimSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<SimConfig> {
        let kernel = crate::kernel::build_kernel(&self.kernel)?;
        let mut cfg = SimConfig::new(kernel, self.r, self.t_end);
        if let Some(c) = self.compensated {
            cfg.compensated = c;
        }
        cfg.a_diff = self.a_diff;
        cfg.b_drift = self.b_drift;
        cfg.domain_truncation = self.domain_truncation;
        cfg.n_per_unit = self.n_per_unit;
        cfg.dt = self.dt;
        cfg.u0 = match self.u0 {
            InitialSpec::Constant { value } => InitialData::Constant(value),
            InitialSpec::Tent {
                center,
                half_width,
                height,
            } => {
                if !(half_width > 0.0) {
                    return Err(invalid("tent half_width must be positive"));
                }
                InitialData::Tent {
                    center,
                    half_width,
                    height,
                }
            }
        };
        cfg.bc_mode = self.bc_mode;
        cfg.convention = self.convention;
        cfg.snapshot_times = self.snapshot_times.clone();
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One ray: cell masses, suffix tail masses, near-origin `m₂`, `m₁`, `c₁`.
type SideStencil = (Vec<f64>, Vec<f64>, f64, f64, f64);

/// Discretized operator: cell masses for jumps of `±j h` plus the local
/// second-order and drift terms.
#[derive(Debug, Clone)]
struct Stencil {
    h: f64,
    /// First cell carried by the weighted sum (1 unless the kernel is singular).
    first: usize,
    right: Vec<f64>,
    left: Vec<f64>,
    /// `right_tail[m] = Σ_{j ≥ m} right[j]` plus the mass beyond the last cell.
    right_tail: Vec<f64>,
    left_tail: Vec<f64>,
    mass: f64,
    diffusion: f64,
    drift: f64,
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        max_subdivisions: 2000,
    }
}

impl Stencil {
    /// `cells` is the largest jump (in grid units) that must be resolved.
    fn build(cfg: &SimConfig, cells: usize) -> Result<Self> {
        let k = &cfg.kernel;
        let h = cfg.h();
        let flip = match cfg.convention {
            Convention::Jump => 1.0,
            Convention::Convolution => -1.0,
        };
        let alpha = k.singularity_exponent;
        let first = if alpha > 0.0 {
            (h.sqrt() / h + 0.5).ceil() as usize
        } else {
            1
        };
        let delta = (first as f64 - 0.5) * h;
        let opts = quad_opts();

        let side = |sign: f64| -> Result<SideStencil> {
            let dir = sign * flip;
            let dens = |y: f64| k.density(&[dir * y]);
            let extent = k.ray_extent(&[dir]);
            let mut breaks = k.ray_breaks(&[dir]);
            breaks.extend(extent);
            breaks.push(1.0);
            let last = match extent {
                Some(e) => cells.min(((e / h) + 0.5).ceil() as usize),
                None => cells,
            };
            let mut w = vec![0.0; last + 1];
            for (j, wj) in w.iter_mut().enumerate().skip(first) {
                let a = (j as f64 - 0.5) * h;
                let b = match extent {
                    Some(e) => ((j as f64 + 0.5) * h).min(e),
                    None => (j as f64 + 0.5) * h,
                };
                if b <= a {
                    continue;
                }
                let inner: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
                *wj = integrate(dens, a, b, &inner, &opts)?.value;
            }
            let beyond = k.ray_tail_mass(dir, (last as f64 + 0.5) * h);
            let mut tail = vec![0.0; last + 2];
            tail[last + 1] = beyond;
            for j in (0..=last).rev() {
                tail[j] = tail[j + 1] + w[j];
            }
            // near-origin moments, y = δ s^κ removes the power singularity
            let moment = |power: i32, kappa: f64| -> Result<f64> {
                let f = |s: f64| {
                    if s <= 0.0 {
                        return 0.0;
                    }
                    let y = delta * s.powf(kappa);
                    y.powi(power) * dens(y) * delta * kappa * s.powf(kappa - 1.0)
                };
                Ok(integrate(f, 0.0, 1.0, &[], &opts)?.value)
            };
            let m2 = moment(2, 1.0 / (2.0 - alpha))?;
            let m1 = if cfg.compensated {
                0.0
            } else {
                moment(1, 1.0 / (1.0 - alpha))?
            };
            let c1 = if cfg.compensated && delta < 1.0 {
                let inner: Vec<f64> = breaks
                    .iter()
                    .copied()
                    .filter(|&c| c > delta && c < 1.0)
                    .collect();
                integrate(|y| y * dens(y), delta, 1.0, &inner, &opts)?.value
            } else {
                0.0
            };
            Ok((w, tail, m2, m1, c1))
        };

        let (right, right_tail, m2r, m1r, c1r) = side(1.0)?;
        let (left, left_tail, m2l, m1l, c1l) = side(-1.0)?;
        let mass =
            right_tail[first.min(right_tail.len() - 1)] + left_tail[first.min(left_tail.len() - 1)];
        if !mass.is_finite() {
            return Err(invalid("kernel mass away from the origin is not finite"));
        }
        let drift = cfg.b_drift
            + if cfg.compensated {
                -(c1r - c1l)
            } else {
                m1r - m1l
            };
        Ok(Self {
            h,
            first,
            right,
            left,
            right_tail,
            left_tail,
            mass,
            diffusion: cfg.a_diff + 0.5 * (m2r + m2l),
            drift,
        })
    }

    /// `1/dt` at which the diagonal coefficient of the update vanishes.
    fn rate(&self) -> f64 {
        self.mass + 2.0 * self.diffusion / (self.h * self.h) + self.drift.abs() / self.h
    }

    fn right_tail_at(&self, m: usize) -> f64 {
        self.right_tail.get(m).copied().unwrap_or(0.0)
    }

    fn left_tail_at(&self, m: usize) -> f64 {
        self.left_tail.get(m).copied().unwrap_or(0.0)
    }
}

/// Values seen by the active nodes `[-K, K]` outside themselves: the listed
/// nodes `K+1, K+2, ...` on each side, then a constant.
struct Exterior<'a> {
    right: &'a [f64],
    left: &'a [f64],
    right_far: f64,
    left_far: f64,
}

impl Exterior<'_> {
    fn constant(c: f64) -> Exterior<'static> {
        Exterior {
            right: &[],
            left: &[],
            right_far: c,
            left_far: c,
        }
    }
}

/// One explicit Euler step over the active nodes, written as a nonnegative
/// combination of old values.
fn step(st: &Stencil, v: &[f64], ext: &Exterior, dt: f64, out: &mut [f64]) {
    let n = v.len();
    let h2 = st.h * st.h;
    let diag = 1.0 - dt * st.rate();
    let (up, down) = if st.drift > 0.0 {
        (st.drift / st.h, 0.0)
    } else {
        (0.0, -st.drift / st.h)
    };
    let local_r = st.diffusion / h2 + up;
    let local_l = st.diffusion / h2 + down;
    for (idx, o) in out.iter_mut().enumerate() {
        // distances (in cells) to the last active node on each side
        let to_right = n - 1 - idx;
        let to_left = idx;
        let mut s = 0.0;

        let jmax = to_right.min(st.right.len().saturating_sub(1));
        if jmax >= st.first {
            s += st.right[st.first..=jmax]
                .iter()
                .zip(&v[idx + st.first..=idx + jmax])
                .map(|(w, u)| w * u)
                .sum::<f64>();
        }
        let jmax = to_left.min(st.left.len().saturating_sub(1));
        if jmax >= st.first {
            s += st.left[st.first..=jmax]
                .iter()
                .zip(v[idx - jmax..=idx - st.first].iter().rev())
                .map(|(w, u)| w * u)
                .sum::<f64>();
        }

        for (m, &val) in ext.right.iter().enumerate() {
            let j = to_right + m + 1;
            if j >= st.right.len() {
                break;
            }
            if j >= st.first {
                s += st.right[j] * val;
            }
        }
        s += ext.right_far * st.right_tail_at((to_right + ext.right.len() + 1).max(st.first));
        for (m, &val) in ext.left.iter().enumerate() {
            let j = to_left + m + 1;
            if j >= st.left.len() {
                break;
            }
            if j >= st.first {
                s += st.left[j] * val;
            }
        }
        s += ext.left_far * st.left_tail_at((to_left + ext.left.len() + 1).max(st.first));

        let vp = if idx + 1 < n {
            v[idx + 1]
        } else {
            ext.right.first().copied().unwrap_or(ext.right_far)
        };
        let vm = if idx > 0 {
            v[idx - 1]
        } else {
            ext.left.first().copied().unwrap_or(ext.left_far)
        };
        *o = diag * v[idx] + dt * (s + local_r * vp + local_l * vm);
    }
}

/// Output times in increasing order, always ending at `t_end`.
fn output_times(cfg: &SimConfig) -> Vec<f64> {
    let mut times = cfg.snapshot_times.clone();
    times.push(cfg.t_end);
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    times
}

struct Layout {
    /// Full output grid half-width (nodes).
    n: usize,
    /// Active half-width for `u_R`, `v_R` and the difference.
    k_r: usize,
}

impl Layout {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let l = cfg.truncation()?;
        let h = cfg.h();
        let n = (l / h).round() as usize;
        let k_r = (cfg.r / h + 1e-9).floor() as usize;
        Ok(Self { n, k_r })
    }

    fn x(&self, h: f64) -> Vec<f64> {
        (0..=2 * self.n)
            .map(|i| (i as f64 - self.n as f64) * h)
            .collect()
    }
}

fn time_step(cfg: &SimConfig, st: &Stencil) -> Result<f64> {
    let rate = st.rate();
    let limit = if rate > 0.0 {
        1.0 / rate
    } else {
        f64::INFINITY
    };
    match cfg.dt {
        Some(dt) if dt > limit => Err(Error::CflViolation { dt, limit }),
        Some(dt) => Ok(dt),
        None => Ok((0.9 * limit).min(cfg.dt_cap)),
    }
}

/// Advances `state` to every output time and records a snapshot there.
fn march<S>(
    cfg: &SimConfig,
    dt: f64,
    state: &mut S,
    mut advance: impl FnMut(&mut S, f64),
    mut record: impl FnMut(&S, f64),
) {
    let mut t = 0.0;
    for target in output_times(cfg) {
        while t < target - 1e-12 * target.max(1.0) {
            let step = dt.min(target - t);
            advance(state, step);
            t = if step < dt { target } else { t + step };
        }
        record(state, target);
    }
}

/// Simulates `u` (whole line), `u_R` (Dirichlet) or `v_R` (barrier) per
/// `cfg.bc_mode`. Fields are reported on the full truncated grid
/// `[-L, L]`, so runs with the same `L` and `n_per_unit` share nodes.
pub fn simulate(cfg: &SimConfig) -> Result<FieldHistory> {
    cfg.validate()?;
    let layout = Layout::new(cfg)?;
    let h = cfg.h();
    let x = layout.x(h);
    let n = layout.n;
    let m_sup = cfg.u0.sup();

    let (k, outside, ext_l, ext_r) = match cfg.bc_mode {
        BcMode::WholeLine => (
            n,
            None,
            cfg.u0.eval(-(n as f64 + 1.0) * h),
            cfg.u0.eval((n as f64 + 1.0) * h),
        ),
        BcMode::DirichletZeroOutside => (layout.k_r, Some(0.0), 0.0, 0.0),
        BcMode::Barrier => (layout.k_r, Some(m_sup), m_sup, m_sup),
    };
    let st = Stencil::build(cfg, 2 * k + 1)?;
    let dt = time_step(cfg, &st)?;

    let mut v: Vec<f64> = match cfg.bc_mode {
        BcMode::Barrier => vec![0.0; 2 * k + 1],
        _ => x[n - k..=n + k].iter().map(|&xi| cfg.u0.eval(xi)).collect(),
    };
    let mut buf = v.clone();
    let ext = Exterior {
        right: &[],
        left: &[],
        right_far: ext_r,
        left_far: ext_l,
    };
    let mut snapshots = Vec::new();
    let full = |v: &[f64]| -> Vec<f64> {
        match outside {
            None => v.to_vec(),
            Some(c) => {
                let mut out = vec![c; 2 * n + 1];
                out[n - k..=n + k].copy_from_slice(v);
                out
            }
        }
    };
    march(
        cfg,
        dt,
        &mut v,
        |v, step_dt| {
            step(&st, v, &ext, step_dt, &mut buf);
            std::mem::swap(v, &mut buf);
        },
        |v, t| {
            snapshots.push(Snapshot { t, values: full(v) });
        },
    );
    Ok(FieldHistory { x, snapshots })
}

/// Marches `d = u - u_R` directly: zero initial data in `B_R`, exterior data
/// equal to the whole-line solution `u`. Every update is a nonnegative
/// combination, so values far below machine epsilon keep full relative
/// accuracy. When `u0` is constant, `u` is stationary and is not simulated.
/// Outside `B_R` the reported values are `u` (since `u_R = 0` there).
pub fn simulate_difference(cfg: &SimConfig) -> Result<FieldHistory> {
    cfg.validate()?;
    let layout = Layout::new(cfg)?;
    let h = cfg.h();
    let x = layout.x(h);
    let n = layout.n;
    let k = layout.k_r;
    let constant = match cfg.u0 {
        InitialData::Constant(c) => Some(c),
        _ => None,
    };
    let far_l = cfg.u0.eval(-(n as f64 + 1.0) * h);
    let far_r = cfg.u0.eval((n as f64 + 1.0) * h);

    let st_d = Stencil::build(
        cfg,
        if constant.is_some() {
            2 * k + 1
        } else {
            n + k + 1
        },
    )?;
    let st_u = if constant.is_some() {
        None
    } else {
        Some(Stencil::build(cfg, 2 * n + 1)?)
    };
    let dt = time_step(cfg, &st_d)?;

    let mut u: Vec<f64> = x.iter().map(|&xi| cfg.u0.eval(xi)).collect();
    let mut u_buf = u.clone();
    let mut d = vec![0.0; 2 * k + 1];
    let mut d_buf = d.clone();
    let mut snapshots = Vec::new();

    let mut left_rev = Vec::with_capacity(n - k);
    march(
        cfg,
        dt,
        &mut (&mut u, &mut d),
        |(u, d), step_dt| {
            match (constant, &st_u) {
                (Some(c), _) => step(&st_d, d, &Exterior::constant(c), step_dt, &mut d_buf),
                (None, Some(st_u)) => {
                    // exterior nodes are listed outward from ±(K+1)
                    left_rev.clear();
                    left_rev.extend(u[..n - k].iter().rev());
                    let ext = Exterior {
                        right: &u[n + k + 1..],
                        left: &left_rev,
                        right_far: far_r,
                        left_far: far_l,
                    };
                    step(&st_d, d, &ext, step_dt, &mut d_buf);
                    let ext_u = Exterior {
                        right: &[],
                        left: &[],
                        right_far: far_r,
                        left_far: far_l,
                    };
                    step(st_u, u, &ext_u, step_dt, &mut u_buf);
                    std::mem::swap(*u, &mut u_buf);
                }
                (None, None) => unreachable!("whole-line stencil is built for varying data"),
            }
            std::mem::swap(*d, &mut d_buf);
        },
        |(u, d), t| {
            let mut values = u.to_vec();
            values[n - k..=n + k].copy_from_slice(d);
            snapshots.push(Snapshot { t, values });
        },
    );
    Ok(FieldHistory { x, snapshots })
}

fn same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(p, q)| (p - q).abs() > 1e-9) {
        return Err(Error::GridMismatch(format!(
            "{} vs {} nodes, or shifted nodes",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn snapshot_at(f: &FieldHistory, t: f64) -> Result<&Snapshot> {
    f.at(t)
        .ok_or_else(|| Error::GridMismatch(format!("no snapshot at t = {t}")))
}

/// `max_{|x| ≤ θR} (u - u_R)` at time `t`. Fails if the difference is
/// below `-1e-12` anywhere on the grid.
pub fn sup_difference(
    u: &FieldHistory,
    ur: &FieldHistory,
    t: f64,
    theta: f64,
    r: f64,
) -> Result<f64> {
    same_grid(&u.x, &ur.x)?;
    let a = snapshot_at(u, t)?;
    let b = snapshot_at(ur, t)?;
    let mut best = f64::NEG_INFINITY;
    for ((&x, &p), &q) in u.x.iter().zip(&a.values).zip(&b.values) {
        let d = p - q;
        if d < -1e-12 {
            return Err(Error::ComparisonViolated { x, value: d });
        }
        if x.abs() <= theta * r + 1e-9 {
            best = best.max(d);
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::GridMismatch("window |x| <= θR holds no node".into()));
    }
    Ok(best.max(0.0))
}

/// `max` of a field over `|x| ≤ θR` and over all snapshots with `t ≤ t_max`.
pub fn window_sup(f: &FieldHistory, theta: f64, r: f64, t_max: f64) -> f64 {
    f.snapshots
        .iter()
        .filter(|s| s.t <= t_max + 1e-12)
        .flat_map(|s| {
            f.x.iter()
                .zip(&s.values)
                .filter(|(x, _)| x.abs() <= theta * r + 1e-9)
                .map(|(_, v)| *v)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Rescaled log-field `I_R(x, t) = -(1/R) ln v_R(R x, R t)` on `|x| ≤ 1`.
#[derive(Debug, Clone)]
pub struct EmpiricalRate {
    /// Nodes `x/R`; snapshot times `t/R`. Saturated entries hold `+∞`.
    pub field: FieldHistory,
    pub saturated: Vec<Vec<bool>>,
}

pub fn empirical_rate(v_r: &FieldHistory, r: f64) -> EmpiricalRate {
    let keep: Vec<usize> = (0..v_r.x.len())
        .filter(|&i| v_r.x[i].abs() <= r + 1e-9)
        .collect();
    let x = keep.iter().map(|&i| v_r.x[i] / r).collect();
    let mut saturated = Vec::new();
    let snapshots = v_r
        .snapshots
        .iter()
        .map(|s| {
            let mut flags = Vec::with_capacity(keep.len());
            let values = keep
                .iter()
                .map(|&i| {
                    let v = s.values[i];
                    let sat = v <= SATURATION_FLOOR;
                    flags.push(sat);
                    if sat {
                        f64::INFINITY
                    } else {
                        -v.ln() / r
                    }
                })
                .collect();
            saturated.push(flags);
            Snapshot { t: s.t / r, values }
        })
        .collect();
    EmpiricalRate {
        field: FieldHistory { x, snapshots },
        saturated,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub r: f64,
    pub theta: f64,
    pub t_obs: f64,
    pub sup_diff: f64,
    pub empirical_exponent: f64,
    pub predicted_exponent: f64,
    pub ratio: f64,
}

impl SweepRecord {
    pub fn new(r: f64, theta: f64, t_obs: f64, sup_diff: f64, predicted: f64) -> Self {
        let empirical = -sup_diff.ln();
        Self {
            r,
            theta,
            t_obs,
            sup_diff,
            empirical_exponent: empirical,
            predicted_exponent: predicted,
            ratio: empirical / predicted,
        }
    }

    pub const COLUMNS: [&'static str; 7] = [
        "R",
        "theta",
        "t",
        "sup_diff",
        "empirical_exponent",
        "predicted_exponent",
        "ratio",
    ];

    fn row(&self) -> Vec<f64> {
        vec![
            self.r,
            self.theta,
            self.t_obs,
            self.sup_diff,
            self.empirical_exponent,
            self.predicted_exponent,
            self.ratio,
        ]
    }
}

/// Sweep records as a table; the fit (when available) goes in the footer.
pub fn sweep_table(records: &[SweepRecord]) -> Table {
    let mut t = Table::new(&SweepRecord::COLUMNS);
    for r in records {
        t.push(r.row());
    }
    if let Ok(fit) = fit_rate(records) {
        t.footer.push(format!(
            "fit slope={} intercept={} r2={} trend_ok={}",
            crate::table::fmt_sig(fit.slope),
            crate::table::fmt_sig(fit.intercept),
            crate::table::fmt_sig(fit.r2),
            fit.trend_ok
        ));
    }
    t
}

/// Reads records back from a sweep table. `empirical_exponent` and `ratio`
/// are taken from the file, not recomputed.
pub fn records_from_table(t: &Table) -> Result<Vec<SweepRecord>> {
    t.require(&SweepRecord::COLUMNS)?;
    let cols: Vec<Vec<f64>> = SweepRecord::COLUMNS
        .iter()
        .map(|c| t.column(c))
        .collect::<Result<_>>()?;
    Ok((0..t.rows.len())
        .map(|i| SweepRecord {
            r: cols[0][i],
            theta: cols[1][i],
            t_obs: cols[2][i],
            sup_diff: cols[3][i],
            empirical_exponent: cols[4][i],
            predicted_exponent: cols[5][i],
            ratio: cols[6][i],
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub trend_ok: bool,
}

/// Least squares of empirical against predicted exponents; `trend_ok` when
/// the ratio is non-decreasing in R.
pub fn fit_rate(records: &[SweepRecord]) -> Result<RateFit> {
    let mut recs = records.to_vec();
    recs.sort_by(|a, b| a.r.partial_cmp(&b.r).expect("finite R"));
    let mut distinct = recs.iter().map(|r| r.r).collect::<Vec<_>>();
    distinct.dedup();
    if distinct.len() < 3 || distinct.len() != recs.len() {
        return Err(Error::InsufficientData {
            needed: 3,
            got: distinct.len(),
        });
    }
    if let Some(s) = recs.iter().find(|r| !(r.sup_diff > SATURATION_FLOOR)) {
        return Err(Error::Saturated(s.r));
    }
    let n = recs.len() as f64;
    let mx = recs.iter().map(|r| r.predicted_exponent).sum::<f64>() / n;
    let my = recs.iter().map(|r| r.empirical_exponent).sum::<f64>() / n;
    let sxx: f64 = recs
        .iter()
        .map(|r| (r.predicted_exponent - mx).powi(2))
        .sum();
    let sxy: f64 = recs
        .iter()
        .map(|r| (r.predicted_exponent - mx) * (r.empirical_exponent - my))
        .sum();
    let syy: f64 = recs
        .iter()
        .map(|r| (r.empirical_exponent - my).powi(2))
        .sum();
    if sxx == 0.0 {
        return Err(invalid("predicted exponents are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = recs
        .iter()
        .map(|r| (r.empirical_exponent - intercept - slope * r.predicted_exponent).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let trend_ok = recs
        .windows(2)
        .all(|w| w[1].ratio >= w[0].ratio * (1.0 - 1e-12));
    Ok(RateFit {
        slope,
        intercept,
        r2,
        trend_ok,
    })
}

/// One record per radius: `sup_{|x| ≤ θR, t ≤ t_obs} (u - u_R)` from
/// [`simulate_difference`], against [`predicted_log_bound`]. Radii run in
/// parallel on the current rayon pool; the result is sorted by R.
pub fn run_sweep(
    base: &SimConfig,
    radii: &[f64],
    theta: f64,
    t_obs: f64,
) -> Result<Vec<SweepRecord>> {
    if !(0.0..1.0).contains(&theta) {
        return Err(invalid(format!("theta must lie in [0, 1), got {theta}")));
    }
    let mut records = radii
        .par_iter()
        .map(|&r| {
            let mut cfg = base.clone();
            cfg.r = r;
            cfg.t_end = t_obs;
            cfg.snapshot_times = (1..8).map(|i| t_obs * i as f64 / 8.0).collect();
            let d = simulate_difference(&cfg)?;
            let sup = window_sup(&d, theta, r, t_obs);
            let predicted = predicted_log_bound(&cfg.kernel, r, theta, t_obs)?;
            Ok(SweepRecord::new(r, theta, t_obs, sup, predicted))
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.r.partial_cmp(&b.r).expect("finite R"));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(text: &str) -> Kernel {
        Kernel::from_json(text).unwrap()
    }

    fn uniform() -> Kernel {
        kernel(r#"{"family": "compact_uniform", "params": {"rho": 1}}"#)
    }

    #[test]
    fn constants_are_stationary() {
        let cfg = SimConfig::new(uniform(), 5.0, 0.5).with_mode(BcMode::WholeLine);
        let mut cfg = cfg;
        cfg.u0 = InitialData::Constant(0.7);
        let f = simulate(&cfg).unwrap();
        for v in &f.snapshots.last().unwrap().values {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_stays_in_range_and_dips_at_edge() {
        let cfg = SimConfig::new(uniform(), 10.0, 1.0);
        let f = simulate(&cfg).unwrap();
        let s = f.at(1.0).unwrap();
        for (x, v) in f.x.iter().zip(&s.values) {
            assert!((0.0..=1.0 + 1e-14).contains(v), "{x} {v}");
            if x.abs() > 10.0 + 1e-9 {
                assert_eq!(*v, 0.0);
            }
        }
        let edge = f.x.iter().position(|x| (x - 9.95).abs() < 1e-9).unwrap();
        assert!(s.values[edge] < 0.9);
        let mid = f.x.iter().position(|x| x.abs() < 1e-9).unwrap();
        assert!(s.values[mid] > 1.0 - 1e-6);
    }

    #[test]
    fn barrier_equals_one_minus_dirichlet_for_unit_data() {
        let cfg = SimConfig::new(uniform(), 4.0, 0.5);
        let ur = simulate(&cfg).unwrap();
        let vr = simulate(&cfg.clone().with_mode(BcMode::Barrier)).unwrap();
        let d = simulate_difference(&cfg).unwrap();
        let (a, b, c) = (ur.at(0.5).unwrap(), vr.at(0.5).unwrap(), d.at(0.5).unwrap());
        for i in 0..ur.x.len() {
            if ur.x[i].abs() <= 4.0 {
                assert!((1.0 - a.values[i] - b.values[i]).abs() < 1e-12);
                assert!((c.values[i] - b.values[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn difference_run_matches_subtraction_for_tent_data() {
        let mut cfg = SimConfig::new(uniform(), 3.0, 0.5);
        cfg.u0 = InitialData::Tent {
            center: 2.0,
            half_width: 2.5,
            height: 1.0,
        };
        cfg.n_per_unit = 10;
        let u = simulate(&cfg.clone().with_mode(BcMode::WholeLine)).unwrap();
        let ur = simulate(&cfg).unwrap();
        let d = simulate_difference(&cfg).unwrap();
        let (a, b, c) = (u.at(0.5).unwrap(), ur.at(0.5).unwrap(), d.at(0.5).unwrap());
        for i in 0..u.x.len() {
            assert!(
                (a.values[i] - b.values[i] - c.values[i]).abs() < 1e-12,
                "x = {}",
                u.x[i]
            );
        }
    }

    #[test]
    fn sup_difference_examples() {
        let x = vec![-1.0, 0.0, 1.0];
        let u = FieldHistory {
            x: x.clone(),
            snapshots: vec![Snapshot {
                t: 1.0,
                values: vec![1.0; 3],
            }],
        };
        let zero = FieldHistory {
            x,
            snapshots: vec![Snapshot {
                t: 1.0,
                values: vec![0.0; 3],
            }],
        };
        assert_eq!(sup_difference(&u, &u, 1.0, 0.5, 2.0).unwrap(), 0.0);
        assert_eq!(sup_difference(&u, &zero, 1.0, 0.5, 2.0).unwrap(), 1.0);
        assert!(matches!(
            sup_difference(&zero, &u, 1.0, 0.5, 2.0),
            Err(Error::ComparisonViolated { .. })
        ));
        let shifted = FieldHistory {
            x: vec![0.0, 1.0, 2.0],
            ..zero.clone()
        };
        assert!(matches!(
            sup_difference(&u, &shifted, 1.0, 0.5, 2.0),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn empirical_rate_examples() {
        let r: f64 = 5.0;
        let f = FieldHistory {
            x: vec![-6.0, -5.0, 0.0, 5.0, 6.0],
            snapshots: vec![
                Snapshot {
                    t: 1.0,
                    values: vec![(-r).exp(); 5],
                },
                Snapshot {
                    t: 2.0,
                    values: vec![1.0, 1.0, 0.0, 1.0, 1.0],
                },
            ],
        };
        let e = empirical_rate(&f, r);
        assert_eq!(e.field.x, vec![-1.0, 0.0, 1.0]);
        assert!(e.field.snapshots[0]
            .values
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-14));
        assert!((e.field.snapshots[1].t - 0.4).abs() < 1e-15);
        assert_eq!(e.field.snapshots[1].values[0], 0.0);
        assert_eq!(e.saturated[1], vec![false, true, false]);
    }

    fn rec(r: f64, predicted: f64, empirical: f64) -> SweepRecord {
        SweepRecord::new(r, 0.0, 1.0, (-empirical).exp(), predicted)
    }

    #[test]
    fn fit_examples() {
        let exact: Vec<_> = [10.0, 20.0, 30.0].iter().map(|&p| rec(p, p, p)).collect();
        let fit = fit_rate(&exact).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && (fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.trend_ok);

        let noise = [0.01, -0.008, 0.006, -0.01, 0.004];
        let noisy: Vec<_> = (0..5)
            .map(|i| {
                let p = 10.0 * (i + 1) as f64;
                rec(p, p, 0.7 * p * (1.0 + noise[i]))
            })
            .collect();
        let fit = fit_rate(&noisy).unwrap();
        assert!((fit.slope - 0.7).abs() < 0.02 && fit.r2 >= 0.99);
        assert!(!fit.trend_ok);

        assert!(matches!(
            fit_rate(&exact[..2]),
            Err(Error::InsufficientData { .. })
        ));
        let mut sat = exact.clone();
        sat[1].sup_diff = 0.0;
        assert!(matches!(fit_rate(&sat), Err(Error::Saturated(_))));
    }

    #[test]
    fn explicit_dt_above_cfl_is_rejected() {
        let mut cfg = SimConfig::new(uniform(), 3.0, 0.1);
        cfg.a_diff = 1.0;
        cfg.dt = Some(0.01);
        assert!(matches!(simulate(&cfg), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn short_truncation_is_rejected() {
        let k = kernel(r#"{"family": "exp_linear", "params": {"alpha": 1}}"#);
        let mut cfg = SimConfig::new(k, 5.0, 0.1);
        cfg.domain_truncation = Some(8.0);
        assert!(matches!(
            simulate(&cfg),
            Err(Error::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn singular_kernel_runs_and_preserves_range() {
        let k = kernel(r#"{"family": "tempered_stable", "params": {"alpha": 1.5, "lambda": 1}}"#);
        let mut cfg = SimConfig::new(k, 4.0, 0.05);
        cfg.n_per_unit = 10;
        let f = simulate(&cfg).unwrap();
        let s = f.at(0.05).unwrap();
        assert!(s.values.iter().all(|v| (-1e-14..=1.0 + 1e-14).contains(v)));
        let mid = f.x.iter().position(|x| x.abs() < 1e-9).unwrap();
        assert!(s.values[mid] > 0.99);
    }

    #[test]
    fn whole_line_conserves_mass() {
        let mut cfg = SimConfig::new(uniform(), 5.0, 1.0).with_mode(BcMode::WholeLine);
        cfg.u0 = InitialData::Tent {
            center: 0.3,
            half_width: 2.0,
            height: 1.0,
        };
        cfg.snapshot_times = vec![0.0];
        let f = simulate(&cfg).unwrap();
        let m0: f64 = f.snapshots[0].values.iter().sum();
        let m1: f64 = f.snapshots[1].values.iter().sum();
        assert!(((m1 - m0) / m0).abs() < 1e-6);
    }

    #[test]
    fn spec_round_trip() {
        let text = r#"{"kernel": {"family": "compact_uniform", "params": {"rho": 1}},
                       "r": 6, "t_end": 0.5, "bc_mode": "barrier",
                       "u0": {"kind": "constant", "value": 2}}"#;
        let cfg = SimSpec::from_json(text).unwrap().build().unwrap();
        assert_eq!(cfg.bc_mode, BcMode::Barrier);
        assert_eq!(cfg.u0.sup(), 2.0);
        let bad = r#"{"kernel": {"family": "compact_uniform"}, "r": 6, "t_end": 1, "oops": 1}"#;
        assert!(SimSpec::from_json(bad).is_err());
    }
}
