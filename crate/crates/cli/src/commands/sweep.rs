//! The `sweep` command: Cartesian product of config overrides, one run
//! directory per combination, plus an index mapping combinations to
//! directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Child, Command};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, RawConfig};
use crate::commands::train;

/// One `--set path=v1,v2,...` argument. Integer ranges may be written
/// `a..b` (inclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParam {
    pub path: String,
    pub values: Vec<String>,
}

pub fn parse_set_arg(arg: &str) -> Result<SweepParam> {
    let (path, values) = arg
        .split_once('=')
        .ok_or_else(|| anyhow::anyhow!("--set expects 'path=v1,v2,...', found '{arg}'"))?;
    let path = path.trim().to_string();
    let values_str = values.trim();
    let values: Vec<String> = if let Some((a, b)) = values_str.split_once("..") {
        let (a, b): (i64, i64) = match (a.trim().parse(), b.trim().parse()) {
            (Ok(a), Ok(b)) => (a, b),
            _ => bail!("--set {path}: range bounds '{values_str}' are not integers"),
        };
        if b < a {
            bail!("--set {path}: empty range {a}..{b}");
        }
        (a..=b).map(|v| v.to_string()).collect()
    } else {
        values_str
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect()
    };
    if values.is_empty() {
        bail!("--set {path}: no values given");
    }
    Ok(SweepParam { path, values })
}

#[derive(Debug, Serialize)]
struct IndexEntry {
    id: usize,
    dir: String,
    params: BTreeMap<String, String>,
}

struct PlannedRun {
    dir: PathBuf,
    config: ExperimentConfig,
    params: BTreeMap<String, String>,
}

fn plan(base: &RawConfig, sets: &[SweepParam], out: &Path) -> Result<Vec<PlannedRun>> {
    // Fail fast: every sweep path must already exist in the config.
    for s in sets {
        if !base.contains_key(&s.path) {
            bail!("sweep path '{}' does not exist in the config", s.path);
        }
    }
    let mut combos: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for s in sets {
        let mut next = Vec::with_capacity(combos.len() * s.values.len());
        for combo in &combos {
            for v in &s.values {
                let mut c = combo.clone();
                c.insert(s.path.clone(), v.clone());
                next.push(c);
            }
        }
        combos = next;
    }
    // Validate every derived config before any run starts.
    let mut runs = Vec::with_capacity(combos.len());
    for (id, params) in combos.into_iter().enumerate() {
        let mut raw = base.clone();
        for (k, v) in &params {
            raw.set(k, v);
        }
        let config = ExperimentConfig::from_raw(raw)
            .with_context(|| format!("combination {id} ({params:?})"))?;
        runs.push(PlannedRun {
            dir: out.join(format!("run_{id:04}")),
            config,
            params,
        });
    }
    Ok(runs)
}

fn wait_all(children: &mut Vec<(usize, Child)>) -> Result<()> {
    let mut failed = Vec::new();
    for (id, child) in children.iter_mut() {
        let status = child.wait()?;
        if !status.success() {
            failed.push(*id);
        }
    }
    children.clear();
    if let Some(id) = failed.first() {
        bail!("sweep run {id} failed");
    }
    Ok(())
}

/// Runs the full sweep. `parallel = 1` executes in-process and
/// sequentially; larger values spawn isolated child `train` processes,
/// capped by the `MMBAL_THREADS` environment variable.
pub fn run(
    base: &RawConfig,
    sets: &[SweepParam],
    out: &Path,
    parallel: usize,
    quiet: bool,
) -> Result<()> {
    let runs = plan(base, sets, out)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let index: Vec<IndexEntry> = runs
        .iter()
        .enumerate()
        .map(|(id, r)| IndexEntry {
            id,
            dir: r
                .dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            params: r.params.clone(),
        })
        .collect();
    fs::write(
        out.join("index.json"),
        serde_json::to_string_pretty(&index)? + "\n",
    )?;

    // Each run directory carries its own resolved config.
    for r in &runs {
        fs::create_dir_all(&r.dir)?;
        fs::write(r.dir.join("config.cfg"), r.config.canonical_text())?;
    }

    let cap: usize = std::env::var("MMBAL_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(usize::MAX);
    let parallel = parallel.max(1).min(cap).min(runs.len().max(1));

    if parallel <= 1 {
        for (id, r) in runs.iter().enumerate() {
            if !quiet {
                println!("sweep run {id}: {:?}", r.params);
            }
            train::run(&r.config, None, &r.dir, true)?;
        }
    } else {
        let exe = std::env::current_exe().context("locating the mmbal executable")?;
        let mut active: Vec<(usize, Child)> = Vec::new();
        for (id, r) in runs.iter().enumerate() {
            if active.len() >= parallel {
                wait_all(&mut active)?;
            }
            if !quiet {
                println!("sweep run {id}: {:?}", r.params);
            }
            let child = Command::new(&exe)
                .arg("train")
                .arg(r.dir.join("config.cfg"))
                .arg("--out")
                .arg(&r.dir)
                .arg("--quiet")
                .spawn()
                .with_context(|| format!("spawning run {id}"))?;
            active.push((id, child));
        }
        wait_all(&mut active)?;
    }

    if !quiet {
        println!("sweep complete: {} runs -> {}", runs.len(), out.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comma_lists_and_ranges() {
        let p = parse_set_arg("balance.lambda=1,3,5,7").unwrap();
        assert_eq!(p.path, "balance.lambda");
        assert_eq!(p.values, vec!["1", "3", "5", "7"]);
        let p = parse_set_arg("seed=0..9").unwrap();
        assert_eq!(p.values.len(), 10);
        assert_eq!(p.values[9], "9");
    }

    #[test]
    fn rejects_malformed_sets() {
        assert!(parse_set_arg("no-equals").is_err());
        assert!(parse_set_arg("x=").is_err());
        assert!(parse_set_arg("x=5..2").is_err());
    }
}
