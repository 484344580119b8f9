//! Experiment runner: flat JSON configs in, deterministic CSV plus a JSON
//! manifest out.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;

pub use config::{Experiment, ExperimentConfig};
use output::{sha256_hex, write_file, Manifest, Versions};

/// Paths and manifest of a finished run.
pub struct RunOutcome {
    pub csv: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn ok(&self) -> bool {
        self.manifest.violations.is_empty()
    }
}

/// Threads of the pool the run executes on.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(0) => anyhow::bail!("thread count must be positive"),
        #[cfg(feature = "parallel")]
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| anyhow::anyhow!("building thread pool: {e}"))?;
            Ok(pool.install(f))
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(f()),
        None => Ok(f()),
    }
}

/// Validates, runs and writes `<experiment>.csv`, `manifest.json` and any
/// experiment artifacts into `out`.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate(experiment)?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let result = experiments::dispatch(experiment, cfg)?;
    let wall = clock.elapsed().as_secs_f64();

    let body = result.table.render();
    let csv = write_file(out, &format!("{}.csv", experiment.name()), body.as_bytes())?;
    let mut artifacts = vec![csv.file_name().unwrap().to_string_lossy().into_owned()];
    for (name, bytes) in &result.artifacts {
        write_file(out, name, bytes)?;
        artifacts.push(name.clone());
    }
    let manifest = Manifest {
        experiment: experiment.name().into(),
        config: serde_json::to_value(cfg)?,
        config_hash: cfg.hash(),
        grid: result.grid,
        tolerances: result.tolerances,
        seeds: result.seeds,
        versions: Versions {
            aqedc_cli: env!("CARGO_PKG_VERSION"),
            aqedc_core: aqedc_core::VERSION,
            parallel: aqedc_core::par::ENABLED,
        },
        threads: current_threads(),
        wall_time_seconds: wall,
        started_unix_seconds: started,
        content_hash: sha256_hex(body.as_bytes()),
        artifacts,
        summary: result.summary,
        violations: result.violations,
    };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    let manifest_path = write_file(out, "manifest.json", &text)?;
    Ok(RunOutcome {
        csv,
        manifest_path,
        manifest,
    })
}
