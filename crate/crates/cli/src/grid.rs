//! The model × dataset grid. Models run one after another; the datasets of a
//! model are evaluated in parallel on a bounded pool and their results are
//! appended to the ledger by a single writer, in suite order. Pairs already
//! in the ledger are skipped, so an interrupted grid resumes where it
//! stopped. Failures are logged to a side file and never stop the grid.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dsm_core::evalsuite::{evaluate, load_suite, BenchmarkDataset, KmeansOptions};
use dsm_core::ledger::{append_ledger, read_ledger};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pipeline::ModelSpec;

/// Grid definition, normally read from a TOML file with one `[[model]]`
/// table per model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Directory of benchmark files.
    pub suite: PathBuf,
    /// JSON-lines results ledger.
    pub ledger: PathBuf,
    /// Failure log; defaults to `failures.jsonl` next to the ledger.
    #[serde(default)]
    pub failures: Option<PathBuf>,
    /// Seed for categorization clustering.
    #[serde(default)]
    pub seed: u64,
    /// Worker count; `DSM_THREADS` overrides it.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(rename = "model", default)]
    pub models: Vec<ModelSpec>,
}

/// One failed job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub model: String,
    pub dataset: String,
    pub error: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GridSummary {
    pub evaluated: usize,
    pub skipped: usize,
    pub failed: usize,
}

impl GridConfig {
    /// Reads a grid file; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading grid {}", path.display()))?;
        let mut cfg: GridConfig = toml::from_str(&text).with_context(|| format!("parsing grid {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.suite);
        fix(&mut self.ledger);
        if let Some(f) = self.failures.as_mut() {
            fix(f);
        }
        for m in &mut self.models {
            if let Some(s) = m.space.as_mut() {
                fix(s);
            }
            m.corpus.iter_mut().for_each(fix);
        }
    }

    pub fn failures_path(&self) -> PathBuf {
        self.failures
            .clone()
            .unwrap_or_else(|| self.ledger.with_file_name("failures.jsonl"))
    }
}

/// Worker count: `DSM_THREADS`, then the configured value, then the number
/// of available cores.
pub fn thread_count(configured: Option<usize>) -> usize {
    std::env::var("DSM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(configured)
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn append_failures(path: &Path, failures: &[Failure]) -> Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    for x in failures {
        log::warn!("{} on {} failed: {}", x.model, x.dataset, x.error);
        writeln!(f, "{}", serde_json::to_string(x)?)?;
    }
    Ok(())
}

/// Runs every pending (model, dataset) pair of `cfg`.
pub fn run_grid(cfg: &GridConfig) -> Result<GridSummary> {
    let suite = load_suite(&cfg.suite).with_context(|| format!("loading suite {}", cfg.suite.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg.threads))
        .build()?;
    let kmeans = KmeansOptions {
        seed: cfg.seed,
        ..KmeansOptions::default()
    };
    let failures_path = cfg.failures_path();
    let mut done: HashSet<(String, String)> = read_ledger(&cfg.ledger)?
        .into_iter()
        .map(|r| (r.model, r.dataset))
        .collect();
    let mut summary = GridSummary::default();

    for (i, spec) in cfg.models.iter().enumerate() {
        let id = match spec.model_id() {
            Ok(id) => id,
            Err(e) => {
                let id = format!("model#{i}");
                let failures = fail_all(&id, suite.iter().collect(), &e);
                summary.failed += failures.len();
                append_failures(&failures_path, &failures)?;
                continue;
            }
        };
        let pending: Vec<&BenchmarkDataset> = suite
            .iter()
            .filter(|d| !done.contains(&(id.clone(), d.name.clone())))
            .collect();
        summary.skipped += suite.len() - pending.len();
        if pending.is_empty() {
            log::info!("{id}: nothing to do");
            continue;
        }
        log::info!("{id}: {} datasets pending", pending.len());
        let space = match pool.install(|| spec.build()) {
            Ok(s) => s,
            Err(e) => {
                let failures = fail_all(&id, pending, &e);
                summary.failed += failures.len();
                append_failures(&failures_path, &failures)?;
                continue;
            }
        };
        let outcomes: Vec<_> = pool.install(|| {
            pending
                .par_iter()
                .map(|d| (d.name.clone(), evaluate(&space, d, kmeans)))
                .collect()
        });
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for (dataset, outcome) in outcomes {
            match outcome {
                Ok(mut r) => {
                    r.model = id.clone();
                    done.insert((id.clone(), dataset));
                    rows.push(r);
                }
                Err(e) => failures.push(Failure {
                    model: id.clone(),
                    dataset,
                    error: e.to_string(),
                }),
            }
        }
        append_ledger(&cfg.ledger, &rows)?;
        append_failures(&failures_path, &failures)?;
        summary.evaluated += rows.len();
        summary.failed += failures.len();
    }
    Ok(summary)
}

fn fail_all(model: &str, datasets: Vec<&BenchmarkDataset>, e: &anyhow::Error) -> Vec<Failure> {
    datasets
        .into_iter()
        .map(|d| Failure {
            model: model.to_string(),
            dataset: d.name.clone(),
            error: format!("{e:#}"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_file_paths_are_rebased() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.toml");
        std::fs::write(
            &p,
            "suite = \"suite\"\nledger = \"out/results.jsonl\"\n\n[[model]]\nid = \"A.w2.3\"\nspace = \"a.vec\"\n\n[[model]]\ncorpus = [\"/abs/c.txt\"]\ndim = 10\n",
        )
        .unwrap();
        let g = GridConfig::load(&p).unwrap();
        assert_eq!(g.suite, dir.path().join("suite"));
        assert_eq!(g.failures_path(), dir.path().join("out/failures.jsonl"));
        assert_eq!(g.models.len(), 2);
        assert_eq!(g.models[0].space.as_deref(), Some(dir.path().join("a.vec").as_path()));
        assert_eq!(g.models[1].corpus, vec![PathBuf::from("/abs/c.txt")]);
        assert_eq!(g.models[1].model_id().unwrap(), "SVD.w2.10");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<GridConfig>("suite = \"s\"\nledger = \"l\"\nbogus = 1\n").is_err());
    }
}
