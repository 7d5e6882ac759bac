//! Batch command-line front end. Every run writes one output file (plus an optional gnuplot
//! script) carrying the replay metadata, and prints a one-line JSON summary on stdout.
//!
//! Exit codes: 0 success, 2 input/domain/regime error, 3 numerical failure.

pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimation::{mle_theta, monte_carlo_mle, write_reports_csv};
use crate::filtering::{
    density_route, filter_path, reconstruct_x, reconstruction_error, DensityRoute, TildeTransform,
};
use crate::fractional_kernels::constants;
use crate::gaussian_paths::{fmt, simulate_with, variation_diagnostic, FbmSampler, Method};
use crate::ie_solver::{solve_g_dot, solve_g_family, solve_g_tilde, Grid};
use output::{destination, write_csv, write_gnuplot, write_json, RunMeta};

#[derive(Debug, Parser)]
#[command(name = "mfbm", version, about = "Mixed fractional Brownian motion: kernels, filtering, densities, drift MLE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimMethod {
    Cholesky,
    Circulant,
}

impl From<SimMethod> for Method {
    fn from(m: SimMethod) -> Self {
        match m {
            SimMethod::Cholesky => Method::Cholesky,
            SimMethod::Circulant => Method::Circulant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum DensityChoice {
    /// Pick the reference measure from H.
    Auto,
    /// Density with respect to Wiener measure (H = ½ or H > ¾).
    Wiener,
    /// Density with respect to the fBm law (H < ¼).
    Fractional,
}

/// Where the observed path comes from.
#[derive(Debug, clap::Args)]
pub struct PathSource {
    /// CSV written by `simulate`; otherwise a path is simulated from --seed.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Trajectory index in the input file or in the seeded stream.
    #[arg(long, default_value_t = 0)]
    pub path_index: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// c_H, λ_H, β_H as JSON.
    Constants {
        #[arg(long = "H")]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kernel g(·, t) on a uniform grid of n panels.
    Solve {
        #[arg(long = "H")]
        h: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Solve the transformed equation (H < ½) instead.
        #[arg(long)]
        tilde: bool,
        /// Add ∂_t g and the resolvent R(·, t).
        #[arg(long)]
        derivatives: bool,
        /// Write every column t_j of the family as rows (t, s, g[, g_dot, R, G_mid]).
        #[arg(long)]
        family: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Trajectories of B, B^H, X = B + B^H and optionally Y = θt + X.
    Simulate {
        #[arg(long = "H")]
        h: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, value_enum, default_value = "cholesky")]
        method: SimMethod,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Fundamental martingale, innovation, φ, reconstruction and the likelihood ratio of one path.
    Filter {
        #[arg(long = "H")]
        h: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[command(flatten)]
        source: PathSource,
        #[arg(long, value_enum, default_value = "auto")]
        density: DensityChoice,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Drift MLE θ̂ with its exact Gaussian confidence interval.
    Estimate {
        #[arg(long = "H")]
        h: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Drift of the simulated path (ignored with --input).
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[command(flatten)]
        source: PathSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo of the MLE over a list of horizons.
    Montecarlo {
        #[arg(long = "H")]
        h: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Horizons, comma separated.
        #[arg(long = "T", value_delimiter = ',', default_value = "1")]
        t_list: Vec<f64>,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Dyadic p-variation sums of simulated X, averaged over paths.
    Diagnose {
        #[arg(long = "H")]
        h: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        /// Number of panels; must be a power of two.
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        emit_gnuplot: bool,
    },
}

/// Parses the process arguments, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("mfbm: {e}");
            e.exit_code()
        }
    }
}

/// Executes one subcommand and returns its stdout summary.
pub fn run(cmd: Command) -> Result<Value> {
    match cmd {
        Command::Constants { h, out } => {
            let p = constants(h)?;
            let path = destination(out.as_deref(), "constants.json");
            write_json(&path, &RunMeta::new("constants", h), &p)?;
            Ok(json!({ "output": path, "constants": p }))
        }
        Command::Solve { h, t, n, tilde, derivatives, family, out, emit_gnuplot } => {
            if family {
                cmd_solve_family(h, t, n, tilde, derivatives, out.as_deref())
            } else {
                cmd_solve(h, t, n, tilde, derivatives, out.as_deref(), emit_gnuplot)
            }
        }
        Command::Simulate { h, t_end, n, paths, seed, theta, method, out, emit_gnuplot } => {
            let grid = Grid::new(n, t_end)?;
            let sample = simulate_with(h, &grid, paths, seed, theta, method.into())?;
            let path = destination(out.as_deref(), "paths.csv");
            let meta = RunMeta::new("simulate", h)
                .grid(n, t_end)
                .seed(seed)
                .args(json!({ "paths": paths, "theta": theta, "method": sample.method }));
            write_csv(&path, &meta, |w| sample.write_csv(w))?;
            let gp = gnuplot_if(emit_gnuplot, &path, "t", &sample.labels(), "simulated paths")?;
            Ok(json!({ "output": path, "gnuplot": gp, "paths": paths }))
        }
        Command::Filter { h, t_end, n, source, density, out, emit_gnuplot } => {
            cmd_filter(h, t_end, n, &source, density, out.as_deref(), emit_gnuplot)
        }
        Command::Estimate { h, t_end, n, theta, source, out } => {
            let grid = Grid::new(n, t_end)?;
            let y = observed_path(h, &grid, &source, Some(theta), "Y")?;
            let family = solve_g_family(h, t_end, n)?;
            let report = mle_theta(&family, &y)?;
            let path = destination(out.as_deref(), "estimate.json");
            let meta = source_meta(RunMeta::new("estimate", h).grid(n, t_end).solver(n), &source, Some(theta));
            write_json(&path, &meta, &report)?;
            Ok(json!({ "output": path, "theta_hat": report.theta_hat, "exact_variance": report.exact_variance }))
        }
        Command::Montecarlo { h, theta, t_list, n, reps, seed, format, out, emit_gnuplot } => {
            if t_list.is_empty() {
                return Err(Error::Input("at least one horizon is needed".into()));
            }
            let reports = monte_carlo_mle(h, theta, &t_list, n, reps, seed)?;
            let meta = RunMeta::new("montecarlo", h)
                .grid(n, *t_list.last().unwrap())
                .seed(seed)
                .solver(n)
                .args(json!({ "theta": theta, "T_list": t_list, "reps": reps }));
            let path = match format {
                Format::Json => {
                    let p = destination(out.as_deref(), "montecarlo.json");
                    write_json(&p, &meta, &reports)?;
                    p
                }
                Format::Csv => {
                    let p = destination(out.as_deref(), "montecarlo.csv");
                    write_csv(&p, &meta, |w| write_reports_csv(&reports, w))?;
                    p
                }
            };
            let gp = match format {
                Format::Csv => gnuplot_if(emit_gnuplot, &path, "T", &["scaled_variance", "scaled_empirical_variance", "asymptotic_constant"], "scaled variance of the MLE")?,
                Format::Json if emit_gnuplot => {
                    return Err(Error::Input("--emit-gnuplot needs --format csv".into()));
                }
                Format::Json => None,
            };
            let scaled: Vec<f64> = reports.iter().map(|r| r.scaled_variance).collect();
            Ok(json!({ "output": path, "gnuplot": gp, "scaled_variance": scaled }))
        }
        Command::Diagnose { h, t_end, n, paths, seed, p, out, emit_gnuplot } => {
            cmd_diagnose(h, t_end, n, paths, seed, p, out.as_deref(), emit_gnuplot)
        }
    }
}

fn gnuplot_if(emit: bool, path: &Path, x: &str, ys: &[&str], title: &str) -> Result<Option<PathBuf>> {
    if emit {
        write_gnuplot(path, x, ys, title).map(Some)
    } else {
        Ok(None)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn cmd_solve(
    h: f64,
    t: f64,
    n: usize,
    tilde: bool,
    derivatives: bool,
    out: Option<&Path>,
    emit_gnuplot: bool,
) -> Result<Value> {
    let mut family = if tilde { solve_g_tilde(h, t, n)? } else { solve_g_family(h, t, n)? };
    if derivatives {
        family.populate_derivatives()?;
    }
    let g_dot = if derivatives { Some(solve_g_dot(&family, n)?) } else { None };
    let r = family.derived.as_ref().filter(|_| derivatives).map(|d| d.r[n].clone());
    let path = destination(out, if tilde { "g_tilde.csv" } else { "g.csv" });
    let meta = RunMeta::new("solve", h)
        .grid(n, t)
        .solver(n)
        .args(json!({ "tilde": tilde, "derivatives": derivatives, "bracket": family.bracket[n] }));
    let col = &family.g[n];
    write_csv(&path, &meta, |w| {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["s", "g"];
        if derivatives {
            header.extend(["g_dot", "R"]);
        }
        wr.write_record(&header)?;
        for (i, s) in family.grid.nodes.iter().enumerate() {
            let mut row = vec![fmt(*s), fmt(col[i])];
            if let (Some(gd), Some(r)) = (&g_dot, &r) {
                row.push(opt(gd.get(i).copied()));
                row.push(opt(r.get(i).copied()));
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    })?;
    let ys: &[&str] = if derivatives { &["g", "g_dot", "R"] } else { &["g"] };
    let gp = gnuplot_if(emit_gnuplot, &path, "s", ys, "kernel column")?;
    Ok(json!({ "output": path, "gnuplot": gp, "bracket": family.bracket[n] }))
}

/// All columns: one row per (t_j, s_i), i ≤ j. Derivative fields are defined for i < j and
/// G at the panel midpoint (s_i + s_{i+1})/2.
fn cmd_solve_family(h: f64, t: f64, n: usize, tilde: bool, derivatives: bool, out: Option<&Path>) -> Result<Value> {
    let mut family = if tilde { solve_g_tilde(h, t, n)? } else { solve_g_family(h, t, n)? };
    if derivatives {
        family.populate_derivatives()?;
    }
    let path = destination(out, if tilde { "g_tilde_family.csv" } else { "g_family.csv" });
    let meta = RunMeta::new("solve", h)
        .grid(n, t)
        .solver(n)
        .args(json!({ "tilde": tilde, "derivatives": derivatives, "family": true }));
    let d = family.derived.as_ref();
    write_csv(&path, &meta, |w| {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t", "s", "g"];
        if d.is_some() {
            header.extend(["g_dot", "R", "G_mid"]);
        }
        wr.write_record(&header)?;
        for j in 1..=n {
            for i in 0..=j {
                let mut row = vec![fmt(family.grid.nodes[j]), fmt(family.grid.nodes[i]), fmt(family.g[j][i])];
                if let Some(d) = d {
                    let at = |v: &Vec<Vec<f64>>| opt(v[j].get(i).copied());
                    row.extend([at(&d.g_dot), at(&d.r), at(&d.big_g)]);
                }
                wr.write_record(&row)?;
            }
        }
        wr.flush()?;
        Ok(())
    })?;
    Ok(json!({ "output": path, "bracket": family.bracket[n] }))
}

/// Column `label` of trajectory `path_index`, either from the input CSV or simulated.
fn observed_path(h: f64, grid: &Grid, src: &PathSource, theta: Option<f64>, label: &str) -> Result<Vec<f64>> {
    match &src.input {
        None => {
            let sampler = FbmSampler::new(h, grid, Method::Cholesky)?;
            let tr = sampler.trajectory(src.seed, src.path_index, theta);
            Ok(if label == "Y" { tr.y.unwrap_or(tr.x) } else { tr.x })
        }
        Some(file) => read_path_column(file, grid, src.path_index, label),
    }
}

fn read_path_column(file: &Path, grid: &Grid, index: u64, label: &str) -> Result<Vec<f64>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(file)?;
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("{} has no column '{name}'", file.display())))
    };
    let (ip, it, iv) = (col("path")?, col("t")?, col(label)?);
    let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Input(format!("bad number '{s}': {e}")));
    let mut values = Vec::with_capacity(grid.n + 1);
    for rec in rd.records() {
        let rec = rec?;
        if rec[ip].parse::<u64>().map_err(|e| Error::Input(format!("bad path index: {e}")))? != index {
            continue;
        }
        let k = values.len();
        let t = parse(&rec[it])?;
        if k > grid.n || (t - grid.nodes[k]).abs() > 1e-9 * grid.t_end {
            return Err(Error::Input(format!(
                "input path does not lie on the grid with n={} and T={}",
                grid.n, grid.t_end
            )));
        }
        values.push(parse(&rec[iv])?);
    }
    if values.len() != grid.n + 1 {
        return Err(Error::Input(format!(
            "path {index} has {} samples in {}, expected {}",
            values.len(),
            file.display(),
            grid.n + 1
        )));
    }
    Ok(values)
}

fn source_meta(meta: RunMeta, src: &PathSource, theta: Option<f64>) -> RunMeta {
    match &src.input {
        Some(f) => meta.args(json!({ "input": f, "path_index": src.path_index })),
        None => meta.seed(src.seed).args(json!({ "path_index": src.path_index, "theta": theta })),
    }
}

fn cmd_filter(
    h: f64,
    t_end: f64,
    n: usize,
    src: &PathSource,
    density: DensityChoice,
    out: Option<&Path>,
    emit_gnuplot: bool,
) -> Result<Value> {
    let route = density_route(h)?;
    match (density, route) {
        (DensityChoice::Wiener, DensityRoute::Fractional) | (DensityChoice::Fractional, DensityRoute::Trivial | DensityRoute::Wiener) => {
            return Err(Error::UnsupportedRegime(format!(
                "H = {h} routes to the {route:?} reference measure; Wiener needs H in {{1/2}} U (3/4, 1], \
                 the fBm law needs H < 1/4"
            )));
        }
        _ => {}
    }
    let grid = Grid::new(n, t_end)?;
    let x = observed_path(h, &grid, src, None, "X")?;
    let mut family = solve_g_family(h, t_end, n)?;
    let (fo, x_hat) = if route == DensityRoute::Fractional {
        let tilde = solve_g_tilde(h, t_end, n)?;
        let tr = TildeTransform::new(h, &grid)?;
        (filter_path(&family, Some((&tilde, &tr)), &x)?, None)
    } else {
        family.populate_derivatives()?;
        let fo = filter_path(&family, None, &x)?;
        let xh = reconstruct_x(&family, &fo.m)?;
        (fo, Some(xh))
    };
    let rec_err = x_hat.as_ref().map(|xh| reconstruction_error(xh, &x));
    let summary = json!({
        "route": fo.route,
        "log_density": fo.log_density,
        "density": fo.density,
        "reconstruction_error": rec_err,
    });
    let path = destination(out, "filter.csv");
    let meta = source_meta(RunMeta::new("filter", h).grid(n, t_end).solver(n), src, None);
    let mut meta_with_summary = meta.clone();
    meta_with_summary.args = json!({ "source": meta.args, "summary": summary });
    write_csv(&path, &meta_with_summary, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "X", "M", "W", "phi", "X_hat"])?;
        for (j, t) in grid.nodes.iter().enumerate() {
            wr.write_record([
                fmt(*t),
                fmt(x[j]),
                fmt(fo.m[j]),
                opt(fo.w.get(j).copied()),
                fmt(fo.phi[j]),
                opt(x_hat.as_ref().map(|v| v[j])),
            ])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    let ys: &[&str] = if fo.w.is_empty() { &["X", "M", "phi"] } else { &["X", "M", "W", "phi"] };
    let gp = gnuplot_if(emit_gnuplot, &path, "t", ys, "filter")?;
    Ok(json!({ "output": path, "gnuplot": gp, "summary": summary }))
}

#[allow(clippy::too_many_arguments)]
fn cmd_diagnose(
    h: f64,
    t_end: f64,
    n: usize,
    paths: usize,
    seed: u64,
    p: f64,
    out: Option<&Path>,
    emit_gnuplot: bool,
) -> Result<Value> {
    if !n.is_power_of_two() {
        return Err(Error::Input(format!("the dyadic diagnostic needs n a power of two, got {n}")));
    }
    let grid = Grid::new(n, t_end)?;
    let sample = simulate_with(h, &grid, paths, seed, None, Method::Cholesky)?;
    let max_level = n.trailing_zeros();
    let reports = sample
        .paths
        .iter()
        .map(|tr| variation_diagnostic(&tr.x, p, max_level))
        .collect::<Result<Vec<_>>>()?;
    let m = paths as f64;
    let rows: Vec<(u32, f64, f64)> = (0..=max_level as usize)
        .map(|l| {
            let vals: Vec<f64> = reports.iter().map(|r| r.sums[l]).collect();
            let mean = vals.iter().sum::<f64>() / m;
            let var = if paths > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
            (l as u32, mean, (var / m).sqrt())
        })
        .collect();
    let path = destination(out, "variation.csv");
    let meta = RunMeta::new("diagnose", h).grid(n, t_end).seed(seed).args(json!({ "paths": paths, "p": p }));
    write_csv(&path, &meta, |w: &mut dyn Write| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["level", "intervals", "mean_sum", "se"])?;
        for (l, mean, se) in &rows {
            wr.write_record([l.to_string(), (1u64 << l).to_string(), fmt(*mean), fmt(*se)])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    let gp = gnuplot_if(emit_gnuplot, &path, "level", &["mean_sum"], "dyadic p-variation sums")?;
    let last = rows.last().map(|r| r.1);
    Ok(json!({ "output": path, "gnuplot": gp, "finest_mean_sum": last }))
}
