//! Plan and kernel bundles: a directory of CMT files plus a small text index.
//!
//! A plan bundle holds `index.txt`, one `v_QQQ.cmt` per pilot and either
//! `w_QQQ.cmt` (plain plans) or `a_QQQ.cmt`/`d_QQQ.cmt` (hybrid plans, which
//! also get `residuals.csv`). The index looks like
//!
//! ```text
//! kind hybrid
//! n_t 2
//! n_r 16
//! n_rf 2
//! pilots 12
//! power 1e0
//! select 0 1 0 3
//! ```
//!
//! where each `select q n_t n_r...` line records the eigen indices chosen for
//! pilot `q` (absent for designs without selections).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::cmt;
use crate::error::{Error, Result};
use crate::hybrid::HybridPlan;
use crate::icefill::{ObservationPlan, Selection};
use crate::kernels::{CovKernel, KernelFamily};
use crate::numkit::{CMatrix, CVector};

pub const INDEX_FILE: &str = "index.txt";
pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const KERNEL_FILE: &str = "kernel.txt";

#[derive(Debug, Clone)]
pub enum PlanBundle {
    Plan(ObservationPlan),
    Hybrid(HybridPlan),
}

impl PlanBundle {
    /// Plan with effective combiners, ready for estimation.
    pub fn observation_plan(&self) -> ObservationPlan {
        match self {
            PlanBundle::Plan(p) => p.clone(),
            PlanBundle::Hybrid(h) => h.to_observation_plan(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn pilot_file(prefix: &str, q: usize) -> String {
    format!("{prefix}_{q:03}.cmt")
}

fn header(kind: &str, n_t: usize, n_r: usize, n_rf: usize, pilots: usize, power: f64) -> String {
    format!("kind {kind}\nn_t {n_t}\nn_r {n_r}\nn_rf {n_rf}\npilots {pilots}\npower {power:e}\n")
}

fn write_precoder(dir: &Path, q: usize, v: &CVector) -> Result<()> {
    cmt::write(
        &dir.join(pilot_file("v", q)),
        &CMatrix::from_column_slice(v.len(), 1, v.as_slice()),
    )
}

/// Writes a plain plan into `dir`, creating it if needed.
pub fn write_plan(dir: &Path, plan: &ObservationPlan) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let n_rf = plan.combiners.first().map_or(0, |w| w.ncols());
    let mut index = header(
        "plan",
        plan.n_t(),
        plan.n_r(),
        n_rf,
        plan.n_pilots(),
        plan.power,
    );
    for (q, sel) in plan.selections.iter().enumerate() {
        let cols: Vec<String> = sel.n_r.iter().map(|j| j.to_string()).collect();
        let _ = writeln!(index, "select {q} {} {}", sel.n_t, cols.join(" "));
    }
    for (q, (v, w)) in plan.precoders.iter().zip(&plan.combiners).enumerate() {
        write_precoder(dir, q, v)?;
        cmt::write(&dir.join(pilot_file("w", q)), w)?;
    }
    write_text(&dir.join(INDEX_FILE), &index)
}

/// Writes a hybrid plan: analog and digital combiners separately, plus the
/// residual log `pilot,iter,residual` (iteration 0 is the starting point).
pub fn write_hybrid(dir: &Path, plan: &HybridPlan) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let n_t = plan.precoders.first().map_or(0, |v| v.len());
    let n_r = plan.analog.first().map_or(0, |a| a.nrows());
    let n_rf = plan.analog.first().map_or(0, |a| a.ncols());
    let index = header("hybrid", n_t, n_r, n_rf, plan.n_pilots(), plan.power);
    let mut csv = String::from("pilot,iter,residual\n");
    for q in 0..plan.n_pilots() {
        write_precoder(dir, q, &plan.precoders[q])?;
        cmt::write(&dir.join(pilot_file("a", q)), &plan.analog[q])?;
        cmt::write(&dir.join(pilot_file("d", q)), &plan.digital[q])?;
        let _ = writeln!(csv, "{q},0,{:e}", plan.initial_residuals[q]);
        for (i, r) in plan.traces[q].iter().enumerate() {
            let _ = writeln!(csv, "{q},{},{:e}", i + 1, r.after_precoder);
        }
    }
    write_text(&dir.join(RESIDUALS_FILE), &csv)?;
    write_text(&dir.join(INDEX_FILE), &index)
}

#[derive(Debug, Default)]
struct Index {
    kind: Option<String>,
    n_t: Option<usize>,
    n_r: Option<usize>,
    n_rf: Option<usize>,
    pilots: Option<usize>,
    power: Option<f64>,
    selections: Vec<(usize, Selection)>,
}

fn parse_field<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad value `{value}` for `{key}`"),
    })
}

fn parse_index(text: &str) -> Result<Index> {
    let mut idx = Index::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut parts = raw.split_whitespace();
        let Some(key) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        let single = || -> Result<&str> {
            match rest.as_slice() {
                [v] => Ok(v),
                _ => Err(Error::Parse {
                    line,
                    message: format!("`{key}` takes one value"),
                }),
            }
        };
        match key {
            "kind" => idx.kind = Some(single()?.to_string()),
            "n_t" => idx.n_t = Some(parse_field(line, key, single()?)?),
            "n_r" => idx.n_r = Some(parse_field(line, key, single()?)?),
            "n_rf" => idx.n_rf = Some(parse_field(line, key, single()?)?),
            "pilots" => idx.pilots = Some(parse_field(line, key, single()?)?),
            "power" => idx.power = Some(parse_field(line, key, single()?)?),
            "select" => {
                let nums = rest
                    .iter()
                    .map(|v| parse_field::<usize>(line, key, v))
                    .collect::<Result<Vec<_>>>()?;
                if nums.len() < 3 {
                    return Err(Error::Parse {
                        line,
                        message: "`select` needs a pilot, a transmit index and receive indices"
                            .into(),
                    });
                }
                idx.selections.push((
                    nums[0],
                    Selection {
                        n_t: nums[1],
                        n_r: nums[2..].to_vec(),
                    },
                ));
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }
    Ok(idx)
}

fn require<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("bundle index lacks `{key}`")))
}

fn check_shape(name: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {got:?}, index says {want:?}"
        )));
    }
    Ok(())
}

fn read_residuals(path: &Path, pilots: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut initial = vec![f64::NAN; pilots];
    let mut last = vec![f64::NAN; pilots];
    for (i, raw) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected `pilot,iter,residual`".into(),
            });
        }
        let q: usize = parse_field(i + 1, "pilot", fields[0])?;
        let iter: usize = parse_field(i + 1, "iter", fields[1])?;
        let r: f64 = parse_field(i + 1, "residual", fields[2])?;
        if q >= pilots {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("pilot {q} out of range"),
            });
        }
        if iter == 0 {
            initial[q] = r;
        }
        last[q] = r;
    }
    Ok((initial, last))
}

/// Reads a bundle written by [`write_plan`] or [`write_hybrid`]. Hybrid
/// plans come back with their residual log but without per-step traces.
pub fn read_bundle(dir: &Path) -> Result<PlanBundle> {
    let index_path = dir.join(INDEX_FILE);
    let idx = parse_index(&fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?)?;
    let kind = require(idx.kind, "kind")?;
    let (n_t, n_r, n_rf) = (
        require(idx.n_t, "n_t")?,
        require(idx.n_r, "n_r")?,
        require(idx.n_rf, "n_rf")?,
    );
    let pilots = require(idx.pilots, "pilots")?;
    let power = require(idx.power, "power")?;
    let mut precoders = Vec::with_capacity(pilots);
    for q in 0..pilots {
        let v = cmt::read(&dir.join(pilot_file("v", q)))?;
        check_shape(&pilot_file("v", q), v.shape(), (n_t, 1))?;
        precoders.push(v.column(0).into_owned());
    }
    match kind.as_str() {
        "plan" => {
            let mut combiners = Vec::with_capacity(pilots);
            for q in 0..pilots {
                let w = cmt::read(&dir.join(pilot_file("w", q)))?;
                check_shape(&pilot_file("w", q), w.shape(), (n_r, n_rf))?;
                combiners.push(w);
            }
            let mut selections = idx.selections;
            selections.sort_by_key(|(q, _)| *q);
            if !selections.is_empty() && selections.iter().enumerate().any(|(i, (q, _))| i != *q) {
                return Err(Error::InvalidArgument(
                    "selection lines must cover pilots 0.. exactly once".into(),
                ));
            }
            Ok(PlanBundle::Plan(ObservationPlan {
                power,
                precoders,
                combiners,
                selections: selections.into_iter().map(|(_, s)| s).collect(),
            }))
        }
        "hybrid" => {
            let mut analog = Vec::with_capacity(pilots);
            let mut digital = Vec::with_capacity(pilots);
            for q in 0..pilots {
                let a = cmt::read(&dir.join(pilot_file("a", q)))?;
                check_shape(&pilot_file("a", q), a.shape(), (n_r, n_rf))?;
                let d = cmt::read(&dir.join(pilot_file("d", q)))?;
                check_shape(&pilot_file("d", q), d.shape(), (n_rf, n_rf))?;
                analog.push(a);
                digital.push(d);
            }
            let residuals = dir.join(RESIDUALS_FILE);
            let (initial_residuals, fit_residuals) = if residuals.exists() {
                read_residuals(&residuals, pilots)?
            } else {
                (vec![f64::NAN; pilots], vec![f64::NAN; pilots])
            };
            Ok(PlanBundle::Hybrid(HybridPlan {
                power,
                analog,
                digital,
                precoders,
                fit_residuals,
                initial_residuals,
                traces: vec![Vec::new(); pilots],
            }))
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown bundle kind `{other}`"
        ))),
    }
}

/// Writes `sigma_t.cmt`, `sigma_r.cmt` and a `kernel.txt` sidecar naming the
/// family and its hyperparameter.
pub fn write_kernel(dir: &Path, kernel: &CovKernel, family: &KernelFamily) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    cmt::write(&dir.join("sigma_t.cmt"), kernel.sigma_t())?;
    cmt::write(&dir.join("sigma_r.cmt"), kernel.sigma_r())?;
    let mut side = format!("family {}\n", family.name());
    if let Some(eta) = family.eta() {
        let _ = writeln!(side, "eta {eta:e}");
    }
    write_text(&dir.join(KERNEL_FILE), &side)
}

pub fn read_kernel(dir: &Path) -> Result<(CovKernel, KernelFamily)> {
    let path = dir.join(KERNEL_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut family = None;
    let mut eta = None;
    for (i, raw) in text.lines().enumerate() {
        let mut parts = raw.split_whitespace();
        match (parts.next(), parts.next()) {
            (None, _) => {}
            (Some("family"), Some(v)) => family = Some(KernelFamily::from_str(v)?),
            (Some("eta"), Some(v)) => eta = Some(parse_field::<f64>(i + 1, "eta", v)?),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("unexpected `{raw}`"),
                })
            }
        }
    }
    let mut family = require(family, "family")?;
    if let Some(eta) = eta {
        family = family.with_eta(eta);
    }
    let kernel = CovKernel::new(
        cmt::read(&dir.join("sigma_t.cmt"))?,
        cmt::read(&dir.join("sigma_r.cmt"))?,
    )?;
    Ok((kernel, family))
}
