//! Every subcommand, run under several worker counts; all files written and
//! everything printed must match byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use locmap_core::fixtures::edge_dataset;
use locmap_core::io::png::write_gray_png;
use locmap_core::io::write_mask_png;

const JOBS: [usize; 3] = [1, 4, 16];

fn locmap(jobs: usize, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_locmap"))
        .arg("--jobs")
        .arg(jobs.to_string())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`locmap {}` failed ({}): {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Inputs shared by every run, so echoed input paths agree.
fn shared_inputs(base: &Path) -> Result<(), String> {
    locmap(1, &["fixtures", "--seed", "3", "--n", "6", "--size", "48", "--out-dir", s(&base.join("fx"))])?;
    let m = base.join("fx/manifest.json");
    for src in ["cam", "sem"] {
        let out = base.join(format!("{src}.json"));
        locmap(1, &["eval-maps", "--manifest", s(&m), "--source", src, "--k", "20", "--out", s(&out)])?;
    }
    let (pred, gt) = (base.join("edata/pred"), base.join("edata/gt"));
    std::fs::create_dir_all(&pred).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&gt).map_err(|e| e.to_string())?;
    for (i, pair) in edge_dataset(77, 5, 64).iter().enumerate() {
        let name = format!("e{i}.png");
        write_gray_png(pred.join(&name), &pair.pred.map(|&v| (v * 255.0).round() as u8)).map_err(|e| e.to_string())?;
        write_mask_png(gt.join(&name), &pair.gt).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run_all(base: &Path, jobs: usize) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let root = base.join(format!("j{jobs}"));
    std::fs::create_dir_all(&root).map_err(|e| e.to_string())?;
    let m = base.join("fx/manifest.json");
    let m = s(&m);
    let r = |name: &str| root.join(name);
    let mut stdout = Vec::new();
    stdout.extend(locmap(jobs, &["enhance", "--manifest", m, "--k", "20", "--out-dir", s(&r("enh"))])?);
    stdout.extend(locmap(
        jobs,
        &["eval-maps", "--manifest", m, "--source", "sem", "--k", "20", "--out", s(&r("maps.json"))],
    )?);
    stdout.extend(locmap(
        jobs,
        &["eval-maps", "--manifest", m, "--averaging", "micro", "--out", s(&r("maps_cam_micro.json"))],
    )?);
    stdout.extend(locmap(
        jobs,
        &["eval-boxes", "--manifest", m, "--source", "sem", "--k", "20", "--sweep", "--out", s(&r("boxes.json"))],
    )?);
    stdout.extend(locmap(jobs, &["eval-boxes", "--manifest", m])?);
    stdout.extend(locmap(jobs, &["gen-edges", "--manifest", m, "--k", "20", "--out-dir", s(&r("edges"))])?);
    stdout.extend(locmap(
        jobs,
        &[
            "fit-edges",
            "--manifest",
            s(&r("edges/manifest.json")),
            "--steps",
            "60",
            "--out",
            s(&r("predictor.npy")),
            "--metrics-out",
            s(&r("fit.json")),
            "--pred-out",
            s(&r("preds")),
        ],
    )?);
    stdout.extend(locmap(
        jobs,
        &[
            "eval-edges",
            "--pred-dir",
            s(&base.join("edata/pred")),
            "--gt-dir",
            s(&base.join("edata/gt")),
            "--out",
            s(&r("edge_eval.json")),
        ],
    )?);
    stdout.extend(locmap(jobs, &["sweep-k", "--manifest", m, "--ks", "1,10,30"])?);
    stdout.extend(locmap(jobs, &["sweep-k", "--manifest", m, "--ks", "5,20", "--out", s(&r("sweep.csv"))])?);
    stdout.extend(locmap(
        jobs,
        &[
            "report",
            "--input",
            s(&base.join("sem.json")),
            "--input",
            s(&base.join("cam.json")),
            "--out-dir",
            s(&r("report")),
        ],
    )?);
    locmap(jobs, &["fixtures", "--seed", "9", "--n", "4", "--size", "40", "--out-dir", s(&r("fx"))])?;

    let mut all = files(&root);
    all.insert(PathBuf::from("<stdout>"), stdout);
    Ok(all)
}

pub fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = dir.path();
    shared_inputs(base)?;
    let reference = run_all(base, JOBS[0])?;
    for &jobs in &JOBS[1..] {
        let other = run_all(base, jobs)?;
        let names: Vec<_> = reference.keys().collect();
        if names != other.keys().collect::<Vec<_>>() {
            return Err(format!("--jobs {jobs} wrote a different set of files"));
        }
        if let Some(name) = names.into_iter().find(|n| reference[*n] != other[*n]) {
            return Err(format!("--jobs {jobs}: {} differs from --jobs 1", name.display()));
        }
    }
    Ok(format!(
        "9 subcommands, {} outputs identical for --jobs {:?}",
        reference.len(),
        JOBS
    ))
}
