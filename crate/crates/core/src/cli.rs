//! Command-line front end: argument parsing, CSV artifacts, plot scripts.
//!
//! The binary `ldp` is a thin wrapper around [`main_with_args`]. Failures
//! print a one-line JSON error record on stderr and exit with 2 (validation)
//! or 3 (numerical failure).

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{
    eval_h, eval_h_ess, grad_h, ConvexHamiltonian, HamiltonianParams, QuadraticHamiltonian,
};
use crate::hj::{solve_hj, solve_hj_constrained, HJGrid, Reflected};
use crate::kernel::{Kernel, KernelSpec, Tail};
use crate::legendre::{k_inverse, Conjugate, Lagrangian};
use crate::pde::{
    run_sweep, simulate, simulate_difference, sweep_table, BcMode, SimConfig, SimSpec,
};
use crate::rate::{lax_oleinik, predicted_log_bound, rate_iinf};
use crate::table::{fmt_sig, Table};

#[derive(Debug, Parser)]
#[command(
    name = "ldp",
    version,
    about = "Lévy Hamiltonians, rate functions and truncation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct KernelArg {
    /// Kernel spec (JSON file).
    #[arg(long)]
    pub kernel: PathBuf,
    /// Use the compensated Lévy-Khintchine form (default: only for singular kernels).
    #[arg(long)]
    pub compensated: Option<bool>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct OutArg {
    /// CSV output path; without it results go to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate H (and DH, H^ess) at momenta.
    Hamiltonian {
        #[command(flatten)]
        kernel: KernelArg,
        /// Momenta: list `a,b,...` or inclusive range `a:b:step`; 2-D kernels take pairs.
        #[arg(long, allow_hyphen_values = true)]
        p: Option<String>,
        /// Draw this many random momenta instead of `--p`.
        #[arg(long)]
        samples: Option<usize>,
        /// Sampling box half-width for `--samples`.
        #[arg(long, default_value_t = 2.0)]
        pmax: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Isotropic diffusion coefficient added as `diffusion·|p|²`.
        #[arg(long, default_value_t = 0.0)]
        diffusion: f64,
        /// Drift, one component per dimension.
        #[arg(long, allow_hyphen_values = true)]
        drift: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate the Lagrangian L = H* at velocities.
    Conjugate {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate K⁻¹ (symmetric kernels).
    Kinv {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long)]
        z: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Rate function I∞(x, t) on the unit ball, or min(A, I∞) with `--A`.
    Rate {
        #[command(flatten)]
        kernel: KernelArg,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        t: String,
        /// Initial level for the Lax-Oleinik formula.
        #[arg(long = "A")]
        a_level: Option<f64>,
        /// Also report the predicted exponent for this ball radius.
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Solve I_t + H(DI) = 0 on (-1, 1) with I = 0 on the boundary, I = A inside at t = 0.
    Hj {
        /// Kernel spec; omit it and pass `--quadratic c` for H = c p².
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long)]
        quadratic: Option<f64>,
        #[arg(long)]
        compensated: Option<bool>,
        /// Use H(-p), the orientation matching the rate module for asymmetric kernels.
        #[arg(long)]
        reflect: bool,
        /// Interior grid points.
        #[arg(long, default_value_t = 399)]
        grid: usize,
        #[arg(long = "A", default_value_t = 10.0)]
        a_level: f64,
        #[arg(long, default_value_t = 1.0)]
        tmax: f64,
        /// Snapshot times (list or range); `tmax` is always included.
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Simulate u, u_R, v_R or u - u_R for the 1-D nonlocal equation.
    Simulate {
        /// Kernel spec; alternatively `--config` with a full simulation spec.
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        compensated: Option<bool>,
        #[arg(long = "R", default_value_t = 10.0)]
        r: f64,
        #[arg(long, value_enum, default_value_t = Mode::DirichletZeroOutside)]
        mode: Mode,
        /// Nodes per unit length.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        tmax: f64,
        #[arg(long)]
        t: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        diffusion: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        drift: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// R-sweep of sup_{|x| ≤ θR} |u - u_R| against the predicted exponent.
    Sweep {
        #[command(flatten)]
        kernel: KernelArg,
        /// Radii: list or inclusive range `a:b:step`.
        #[arg(long = "R")]
        r: String,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long)]
        dt: Option<f64>,
        /// Also write u_R profiles at time t (default for the asymmetric demo).
        #[arg(long)]
        profiles: Option<bool>,
        /// Sweep table path; the plot script goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    WholeLine,
    DirichletZeroOutside,
    Barrier,
    /// `u - u_R` marched directly (keeps tiny values accurate).
    Difference,
}

/// Kind of gnuplot script produced by [`emit_plot_script`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Empirical against predicted exponents from a sweep table.
    Rate,
    /// Overlay of `u_R` profiles, one curve per R.
    Profiles,
}

/// Parses `a:b:step` (inclusive) or a comma list.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("`{s}` is not a number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.len() {
        1 => text.split(',').map(num).collect(),
        3 => {
            let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || b < a {
                return Err(invalid(format!(
                    "range `{text}` needs a <= b and a positive step"
                )));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|i| a + i as f64 * step).collect())
        }
        _ => Err(invalid(format!(
            "cannot parse `{text}` as a list or a:b:step range"
        ))),
    }
}

fn points(text: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    let v = parse_values(text)?;
    if v.len() % dim != 0 {
        return Err(invalid(format!(
            "{} values do not split into {dim}-vectors",
            v.len()
        )));
    }
    Ok(v.chunks(dim).map(|c| c.to_vec()).collect())
}

fn load_kernel(path: &Path) -> Result<Kernel> {
    crate::kernel::build_kernel(&KernelSpec::from_path(path)?)
}

fn params(kernel: Kernel, compensated: Option<bool>) -> Result<HamiltonianParams> {
    let comp = compensated.unwrap_or(kernel.singularity_exponent > 0.0);
    HamiltonianParams::new(kernel, comp)
}

fn axis_names(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.trim_end_matches('_').to_string()]
    } else {
        (1..=dim).map(|i| format!("{prefix}{i}")).collect()
    }
}

fn table(columns: &[String]) -> Table {
    Table {
        columns: columns.to_vec(),
        ..Default::default()
    }
}

/// Writes `contents` next to `path` and renames, so readers never see a
/// partial file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".part");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(t: &Table, out: &OutArg, stdout: &mut dyn Write) -> Result<()> {
    let mut buf = Vec::new();
    t.write(&mut buf)?;
    match &out.out {
        Some(p) => write_atomic(p, &buf),
        None => Ok(stdout.write_all(&buf)?),
    }
}

/// One scalar without `--out` prints the bare number; otherwise a table.
fn emit_scalar_or_table(
    t: &Table,
    value_col: usize,
    out: &OutArg,
    stdout: &mut dyn Write,
) -> Result<()> {
    if out.out.is_none() && t.rows.len() == 1 {
        writeln!(stdout, "{}", fmt_sig(t.rows[0][value_col]))?;
        Ok(())
    } else {
        emit(t, out, stdout)
    }
}

fn sample_momenta(hp: &HamiltonianParams, count: usize, pmax: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = hp.kernel.dimension;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-pmax..=pmax)).collect();
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let inside = r == 0.0 || {
            let nu: Vec<f64> = p.iter().map(|v| v / r).collect();
            r < 0.95 * hp.kernel.exp_moment_bound(&nu)
        };
        if inside {
            out.push(p);
        }
    }
    out
}

fn rate_iinf_value<L: Lagrangian + ?Sized>(
    l: &L,
    x: &[f64],
    t: f64,
    level: Option<f64>,
) -> Result<f64> {
    match level {
        Some(a) => lax_oleinik(l, a, x, t),
        None => Ok(rate_iinf(l, x, t)?.value),
    }
}

/// gnuplot script for a sweep or profile table, referencing the CSV by
/// file name (the script is meant to sit next to it).
pub fn emit_plot_script(table_path: &Path, kind: PlotKind) -> Result<String> {
    let file = fs::File::open(table_path)?;
    let t = Table::read(BufReader::new(file))?;
    let name = table_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| invalid("table path has no file name"))?;
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key left top\n");
    match kind {
        PlotKind::Rate => {
            t.require(&["R", "empirical_exponent", "predicted_exponent"])?;
            s.push_str("set xlabel 'R'\nset ylabel '-ln sup|u - u_R|'\n");
            s.push_str(&format!(
                "plot '{name}' using (column('R')):(column('empirical_exponent')) with linespoints title 'empirical', \\\n     '{name}' using (column('R')):(column('predicted_exponent')) with lines title 'predicted'\n"
            ));
        }
        PlotKind::Profiles => {
            t.require(&["R", "x", "value"])?;
            let mut radii = t.column("R")?;
            radii.sort_by(|a, b| a.partial_cmp(b).expect("finite R"));
            radii.dedup();
            s.push_str("set xlabel 'x'\nset ylabel 'u_R(x, t)'\n");
            let curves: Vec<String> = radii
                .iter()
                .map(|r| {
                    let r = fmt_sig(*r);
                    format!(
                        "'{name}' using (column('R') == {r} ? column('x') : 1/0):(column('value')) with lines title 'R = {r}'"
                    )
                })
                .collect();
            s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
        }
    }
    Ok(s)
}

fn with_extension(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("out")
        .to_string();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn threads() -> Option<usize> {
    std::env::var("LDP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn run_hj<H: ConvexHamiltonian + ?Sized>(
    h: &H,
    beta0: Option<f64>,
    grid: &HJGrid,
    times: &[f64],
) -> Result<crate::table::FieldHistory> {
    match beta0 {
        Some(b) => solve_hj_constrained(h, b, grid, times),
        None => solve_hj(h, grid, times),
    }
}

/// Executes one command, writing results to `stdout` or the requested files.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Hamiltonian {
            kernel,
            p,
            samples,
            pmax,
            seed,
            diffusion,
            drift,
            out,
        } => {
            let k = load_kernel(&kernel.kernel)?;
            let dim = k.dimension;
            let mut hp = params(k, kernel.compensated)?;
            if diffusion != 0.0 {
                let mut a = vec![0.0; dim * dim];
                for i in 0..dim {
                    a[i * dim + i] = diffusion;
                }
                hp = hp.with_diffusion(a)?;
            }
            if let Some(b) = drift {
                hp = hp.with_drift(parse_values(&b)?)?;
            }
            let ps = match (p, samples) {
                (Some(p), None) => points(&p, dim)?,
                (None, Some(n)) => sample_momenta(&hp, n, pmax, seed),
                _ => return Err(invalid("give exactly one of --p and --samples")),
            };
            let mut cols = axis_names("p", dim);
            cols.push("H".into());
            cols.extend(axis_names("dH", dim));
            cols.push("H_ess".into());
            let mut t = table(&cols);
            for p in &ps {
                let mut row = p.clone();
                row.push(eval_h(&hp, p)?);
                row.extend(grad_h(&hp, p)?);
                row.push(eval_h_ess(&hp, p)?);
                t.push(row);
            }
            emit_scalar_or_table(&t, dim, &out, stdout)
        }
        Command::Conjugate { kernel, q, out } => {
            let k = load_kernel(&kernel.kernel)?;
            let dim = k.dimension;
            let l = Conjugate::of(params(k, kernel.compensated)?);
            let mut cols = axis_names("q", dim);
            cols.push("L".into());
            cols.extend(axis_names("p0_", dim));
            cols.push("residual".into());
            cols.push("boundary".into());
            let mut t = table(&cols);
            for q in points(&q, dim)? {
                let r = l.solve(&q)?;
                let mut row = q.clone();
                row.push(r.value);
                row.extend(r.argmax.iter().copied());
                row.push(r.residual);
                row.push(if r.hit_domain_boundary { 1.0 } else { 0.0 });
                t.push(row);
            }
            emit_scalar_or_table(&t, dim, &out, stdout)
        }
        Command::Kinv { kernel, z, out } => {
            let k = load_kernel(&kernel.kernel)?;
            let mut t = Table::new(&["z", "kinv"]);
            for z in parse_values(&z)? {
                t.push(vec![z, k_inverse(&k, z)?]);
            }
            emit_scalar_or_table(&t, 1, &out, stdout)
        }
        Command::Rate {
            kernel,
            x,
            t: times,
            a_level,
            r,
            theta,
            out,
        } => {
            let k = load_kernel(&kernel.kernel)?;
            let dim = k.dimension;
            let mut cols = axis_names("x", dim);
            cols.push("t".into());
            cols.push("value".into());
            if r.is_some() {
                cols.push("predicted_exponent".into());
            }
            let l = Conjugate::of(params(k.clone(), kernel.compensated)?);
            let mut t = table(&cols);
            let ts = parse_values(&times)?;
            for x in points(&x, dim)? {
                for &tt in &ts {
                    let mut row = x.clone();
                    row.push(tt);
                    row.push(rate_iinf_value(&l, &x, tt, a_level)?);
                    if let Some(r) = r {
                        row.push(predicted_log_bound(&k, r, theta, tt)?);
                    }
                    t.push(row);
                }
            }
            emit_scalar_or_table(&t, dim + 1, &out, stdout)
        }
        Command::Hj {
            kernel,
            quadratic,
            compensated,
            reflect,
            grid,
            a_level,
            tmax,
            t,
            dt,
            out,
        } => {
            let mut g = HJGrid::new(grid, tmax, a_level);
            g.dt = dt;
            let mut times = match t {
                Some(t) => parse_values(&t)?,
                None => Vec::new(),
            };
            times.push(tmax);
            times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
            times.dedup();
            let hist = match (kernel, quadratic) {
                (Some(path), None) => {
                    let k = load_kernel(&path)?;
                    if k.dimension != 1 {
                        return Err(invalid("the HJ solver is one-dimensional"));
                    }
                    let beta0 = match k.tail {
                        Tail::Critical { beta0 } => Some(beta0),
                        _ => None,
                    };
                    let hp = params(k, compensated)?;
                    if reflect {
                        run_hj(&Reflected(hp), beta0, &g, &times)?
                    } else {
                        run_hj(&hp, beta0, &g, &times)?
                    }
                }
                (None, Some(c)) => {
                    run_hj(&QuadraticHamiltonian::isotropic(1, c), None, &g, &times)?
                }
                _ => return Err(invalid("give exactly one of --kernel and --quadratic")),
            };
            emit(&hist.to_table(), &out, stdout)
        }
        Command::Simulate {
            kernel,
            config,
            compensated,
            r,
            mode,
            grid,
            dt,
            tmax,
            t,
            diffusion,
            drift,
            out,
        } => {
            let mut cfg = match (kernel, config) {
                (Some(path), None) => {
                    let mut c = SimConfig::new(load_kernel(&path)?, r, tmax);
                    c.n_per_unit = grid;
                    c.dt = dt;
                    c.a_diff = diffusion;
                    c.b_drift = drift;
                    if let Some(t) = t {
                        c.snapshot_times = parse_values(&t)?;
                    }
                    c
                }
                (None, Some(path)) => SimSpec::from_json(&fs::read_to_string(path)?)?.build()?,
                _ => return Err(invalid("give exactly one of --kernel and --config")),
            };
            if let Some(c) = compensated {
                cfg.compensated = c;
            }
            let hist = match mode {
                Mode::Difference => simulate_difference(&cfg)?,
                m => {
                    cfg.bc_mode = match m {
                        Mode::WholeLine => BcMode::WholeLine,
                        Mode::Barrier => BcMode::Barrier,
                        _ => BcMode::DirichletZeroOutside,
                    };
                    simulate(&cfg)?
                }
            };
            emit(&hist.to_table(), &out, stdout)
        }
        Command::Sweep {
            kernel,
            r,
            theta,
            t,
            grid,
            dt,
            profiles,
            out,
        } => {
            let k = load_kernel(&kernel.kernel)?;
            let radii = parse_values(&r)?;
            let want_profiles = profiles.unwrap_or(k.family_name() == "asymmetric_1d_demo");
            let mut base = SimConfig::new(k, radii[0], t);
            if let Some(c) = kernel.compensated {
                base.compensated = c;
            }
            base.n_per_unit = grid;
            base.dt = dt;
            let pool = {
                let mut b = rayon::ThreadPoolBuilder::new();
                if let Some(n) = threads() {
                    b = b.num_threads(n);
                }
                b.build()
                    .map_err(|e| invalid(format!("thread pool: {e}")))?
            };
            let records = pool.install(|| run_sweep(&base, &radii, theta, t))?;
            let tab = sweep_table(&records);
            let mut buf = Vec::new();
            tab.write(&mut buf)?;
            write_atomic(&out, &buf)?;
            let script = emit_plot_script(&out, PlotKind::Rate)?;
            write_atomic(&with_extension(&out, "", "gp"), script.as_bytes())?;

            if want_profiles {
                let mut prof = Table::new(&["R", "x", "value"]);
                let runs = pool.install(|| {
                    use rayon::prelude::*;
                    radii
                        .par_iter()
                        .map(|&r| {
                            let mut c = base.clone();
                            c.r = r;
                            c.domain_truncation = None;
                            simulate(&c).map(|h| (r, h))
                        })
                        .collect::<Result<Vec<_>>>()
                })?;
                for (r, h) in runs {
                    let s = h.at(t).expect("final snapshot");
                    for (x, v) in h.x.iter().zip(&s.values) {
                        if x.abs() <= r + 1e-9 {
                            prof.push(vec![r, *x, *v]);
                        }
                    }
                }
                let path = with_extension(&out, "_profiles", "csv");
                let mut buf = Vec::new();
                prof.write(&mut buf)?;
                write_atomic(&path, &buf)?;
                let script = emit_plot_script(&path, PlotKind::Profiles)?;
                write_atomic(&with_extension(&out, "_profiles", "gp"), script.as_bytes())?;
            }
            if let Some(f) = tab.footer.first() {
                writeln!(stdout, "{f}")?;
            }
            Ok(())
        }
    }
}

/// Machine-readable error record printed on failure.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({
        "error": e.code(),
        "kind": if e.is_validation() { "validation" } else { "numerical" },
        "message": e.to_string(),
    })
    .to_string()
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{e}")
            } else {
                write!(stderr, "{e}")
            };
            return code;
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_record(&e));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(
            parse_values("8:24:4").unwrap(),
            vec![8.0, 12.0, 16.0, 20.0, 24.0]
        );
        assert_eq!(parse_values("1,-2.5").unwrap(), vec![1.0, -2.5]);
        assert_eq!(parse_values("0:1:0.25").unwrap().len(), 5);
        assert!(parse_values("1:0:1").is_err());
        assert!(parse_values("a").is_err());
        assert!(parse_values("1:2").is_err());
    }

    #[test]
    fn plot_script_requires_columns() {
        let dir = std::env::temp_dir().join(format!("ldp-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let empty = dir.join("empty.csv");
        fs::write(&empty, "R,empirical_exponent,predicted_exponent\n").unwrap();
        assert!(matches!(
            emit_plot_script(&empty, PlotKind::Rate),
            Err(Error::EmptyTable)
        ));
        let prof = dir.join("prof.csv");
        fs::write(&prof, "R,x,value\n10,0,1\n15,0,1\n").unwrap();
        let s = emit_plot_script(&prof, PlotKind::Profiles).unwrap();
        assert!(s.contains("'prof.csv'") && s.contains("R = 15"));
        assert!(matches!(
            emit_plot_script(&prof, PlotKind::Rate),
            Err(Error::MissingColumn(_))
        ));
        fs::remove_dir_all(&dir).unwrap();
    }
}
