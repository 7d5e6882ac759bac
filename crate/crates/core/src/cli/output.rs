//! Output plumbing: replay metadata, file destinations, CSV/JSON writers, gnuplot companions.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::ie_solver::SolverSettings;

/// Overrides the default output directory (current directory otherwise).
pub const OUT_DIR_ENV: &str = "MFBM_OUTPUT_DIR";

/// Replay metadata embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub seed: Option<u64>,
    #[serde(rename = "H")]
    pub h: f64,
    pub n: Option<usize>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub solver: Value,
    pub args: Value,
}

impl RunMeta {
    pub fn new(subcommand: &'static str, h: f64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed: None,
            h,
            n: None,
            t_end: None,
            solver: Value::Null,
            args: Value::Null,
        }
    }

    pub fn grid(mut self, n: usize, t_end: f64) -> Self {
        self.n = Some(n);
        self.t_end = Some(t_end);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Records the discretisation actually used for a grid of n panels.
    pub fn solver(mut self, n: usize) -> Self {
        let s = SolverSettings::default();
        self.solver = json!({
            "mesh_panels": s.panels_for(n),
            "grading": s.grading,
            "cholesky_jitter_relative": 1e-12,
            "float_format": "{:.17e}",
        });
        self
    }

    pub fn args(mut self, args: Value) -> Self {
        self.args = args;
        self
    }
}

/// `explicit` if given, else `$MFBM_OUTPUT_DIR/default_name`, else `./default_name`.
pub fn destination(explicit: Option<&Path>, default_name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(default_name),
        _ => PathBuf::from(default_name),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `{"meta": …, "result": …}`, pretty-printed with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, meta: &RunMeta, result: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &json!({ "meta": meta, "result": result }))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// CSV preceded by one `# {meta json}` line; readers skip it as a comment (csv, pandas
/// `comment='#'`, gnuplot). The body is written by `body` into the same stream.
pub fn write_csv<F>(path: &Path, meta: &RunMeta, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let mut w = create(path)?;
    writeln!(w, "# {}", serde_json::to_string(meta)?)?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `<path>.gp`, plotting columns `ys` against `x` of the CSV at `path`.
pub fn write_gnuplot(path: &Path, x: &str, ys: &[&str], title: &str) -> Result<PathBuf> {
    let gp = PathBuf::from(format!("{}.gp", path.display()));
    let data = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let mut w = create(&gp)?;
    writeln!(w, "set datafile separator ','")?;
    writeln!(w, "set datafile commentschars '#'")?;
    writeln!(w, "set key autotitle columnhead")?;
    writeln!(w, "set title '{title}'")?;
    writeln!(w, "set xlabel '{x}'")?;
    let plots: Vec<String> =
        ys.iter().map(|y| format!("'{data}' using (column('{x}')):(column('{y}')) with lines title '{y}'")).collect();
    writeln!(w, "plot {}", plots.join(", \\\n     "))?;
    w.flush()?;
    Ok(gp)
}
