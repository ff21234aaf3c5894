//! Text, CSV and JSON formats.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterDecomposition;
use crate::env::{LatticeBox, LatticeEnv, MarkedPointCloud};
use crate::error::{Result, WrmError};
use crate::experiments::{DiscontinuityRow, Method};
use crate::wrm_continuum::{ChoiceVariables, JointContinuumConfig, Point, WRPointConfig};

pub const ENV_MAGIC: &str = "wrmlab-env";
pub const CSV_HEADER: &str = "model,p,n,cov_h,cov_ind,ratio_gap,method,se";

/// Environment read from the text format.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvFile {
    Lattice(LatticeEnv),
    Cloud(MarkedPointCloud),
}

fn parse_err(line: usize, msg: impl Into<String>) -> WrmError {
    WrmError::Parse { line, msg: msg.into() }
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

/// Header `wrmlab-env v1 d=<d> kind=lattice box=<lower>:<upper>`, then one
/// site per line.
pub fn write_lattice_env(env: &LatticeEnv) -> String {
    let b = env.bbox();
    let mut out = format!(
        "{ENV_MAGIC} v1 d={} kind=lattice box={}:{}\n",
        env.dim(),
        join(b.lower(), ","),
        join(b.upper(), ",")
    );
    for s in env.sites() {
        out.push_str(&join(&s, " "));
        out.push('\n');
    }
    out
}

/// Header `wrmlab-env v1 d=<d> kind=cloud`, then `x1 ... xd [m]` per line.
pub fn write_cloud(cloud: &MarkedPointCloud) -> String {
    let mut out = format!("{ENV_MAGIC} v1 d={} kind=cloud\n", cloud.dim());
    for i in 0..cloud.len() {
        out.push_str(&join(cloud.point(i), " "));
        if let Some(m) = cloud.mark(i) {
            out.push_str(&format!(" {m}"));
        }
        out.push('\n');
    }
    out
}

fn parse_ints(s: &str, line: usize) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| parse_err(line, format!("bad integer {t:?}"))))
        .collect()
}

/// Reads either environment kind. Blank lines and `#` comments are skipped.
pub fn read_env(text: &str) -> Result<EnvFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(ENV_MAGIC) || fields.next() != Some("v1") {
        return Err(parse_err(hline, format!("expected `{ENV_MAGIC} v1` header")));
    }
    let (mut d, mut kind, mut bbox) = (None, None, None);
    for f in fields {
        match f.split_once('=') {
            Some(("d", v)) => d = Some(v.parse::<usize>().map_err(|_| parse_err(hline, format!("bad dimension {v:?}")))?),
            Some(("kind", v)) => kind = Some(v.to_string()),
            Some(("box", v)) => {
                let (lo, hi) = v.split_once(':').ok_or_else(|| parse_err(hline, "box needs lower:upper"))?;
                bbox = Some((parse_ints(lo, hline)?, parse_ints(hi, hline)?));
            }
            _ => return Err(parse_err(hline, format!("unknown header field {f:?}"))),
        }
    }
    let d = d.ok_or_else(|| parse_err(hline, "missing d="))?;
    if d == 0 {
        return Err(parse_err(hline, "dimension must be positive"));
    }
    match kind.as_deref() {
        Some("lattice") => {
            let mut sites = Vec::new();
            for (ln, l) in lines {
                let s: Vec<i64> = l
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| parse_err(ln, format!("bad coordinate {t:?}"))))
                    .collect::<Result<_>>()?;
                if s.len() != d {
                    return Err(parse_err(ln, format!("expected {d} coordinates")));
                }
                sites.push(s);
            }
            let env = match bbox {
                Some((lo, hi)) => {
                    let b = LatticeBox::new(lo, hi).map_err(|e| parse_err(hline, e.to_string()))?;
                    if b.dim() != d {
                        return Err(parse_err(hline, "box dimension differs from d"));
                    }
                    LatticeEnv::new(b, sites)?
                }
                None if sites.is_empty() => return Err(parse_err(hline, "empty lattice needs box=")),
                None => LatticeEnv::from_sites(sites)?,
            };
            Ok(EnvFile::Lattice(env))
        }
        Some("cloud") => {
            let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
            for (ln, l) in lines {
                let v: Vec<f64> = l
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| parse_err(ln, format!("bad number {t:?}"))))
                    .collect::<Result<_>>()?;
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(parse_err(ln, "non-finite value"));
                }
                rows.push((ln, v));
            }
            let marked = rows.first().is_some_and(|r| r.1.len() == d + 1);
            let mut cloud = MarkedPointCloud::empty(d, marked);
            for (ln, v) in rows {
                if v.len() != d + usize::from(marked) {
                    return Err(parse_err(ln, format!("expected {} values", d + usize::from(marked))));
                }
                cloud
                    .push(&v[..d], marked.then(|| v[d]))
                    .map_err(|e| parse_err(ln, e.to_string()))?;
            }
            Ok(EnvFile::Cloud(cloud))
        }
        other => Err(parse_err(hline, format!("unknown kind {other:?}"))),
    }
}

#[derive(Serialize)]
struct DecompositionJson<'a> {
    clusters: &'a [Vec<usize>],
}

/// `{"clusters": [[idx, ...], ...]}`.
pub fn decomposition_json(dec: &ClusterDecomposition) -> String {
    serde_json::to_string(&DecompositionJson { clusters: &dec.clusters }).expect("serializable")
}

#[derive(Serialize, Deserialize)]
struct JointJson {
    env: Vec<[f64; 3]>,
    plus: Vec<Point>,
    minus: Vec<Point>,
    #[serde(default)]
    w: Vec<f64>,
}

/// `{"env": [[x, y, m], ...], "plus": [[x, y], ...], "minus": [...], "w": [...]}`.
pub fn joint_config_json(cfg: &JointContinuumConfig) -> String {
    let env = (0..cfg.env.len())
        .map(|i| {
            let p = cfg.env.point(i);
            [p[0], p[1], cfg.env.mark(i).unwrap_or(0.0)]
        })
        .collect();
    let json = JointJson {
        env,
        plus: cfg.coloring.plus.clone(),
        minus: cfg.coloring.minus.clone(),
        w: cfg.w.as_ref().map(|w| w.values().to_vec()).unwrap_or_default(),
    };
    serde_json::to_string(&json).expect("serializable")
}

pub fn read_joint_config(text: &str) -> Result<JointContinuumConfig> {
    let json: JointJson = serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))?;
    let pts: Vec<(Vec<f64>, f64)> = json.env.iter().map(|r| (vec![r[0], r[1]], r[2])).collect();
    let env = MarkedPointCloud::from_marked_points(2, &pts)?;
    let mut cfg = JointContinuumConfig::new(env, WRPointConfig::new(json.plus, json.minus)?)?;
    if !json.w.is_empty() {
        if json.w.len() != cfg.env.len() {
            return Err(WrmError::param("one choice variable per environment point required"));
        }
        cfg.w = Some(ChoiceVariables::new(json.w)?);
    }
    Ok(cfg)
}

fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

/// CSV with header [`CSV_HEADER`]; NaN cells are left empty.
pub fn rows_to_csv(rows: &[DiscontinuityRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.model,
            r.p,
            r.n,
            cell(r.cov_h),
            cell(r.cov_ind),
            cell(r.ratio_gap),
            r.method,
            cell(r.se)
        ));
    }
    out
}

pub fn rows_from_csv(text: &str) -> Result<Vec<DiscontinuityRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header {CSV_HEADER:?}"))),
    }
    lines
        .map(|(i, l)| {
            let ln = i + 1;
            let f: Vec<&str> = l.trim().split(',').collect();
            if f.len() != 8 {
                return Err(parse_err(ln, "expected 8 fields"));
            }
            let num = |s: &str| -> Result<f64> {
                if s.is_empty() {
                    Ok(f64::NAN)
                } else {
                    s.parse().map_err(|_| parse_err(ln, format!("bad number {s:?}")))
                }
            };
            Ok(DiscontinuityRow {
                model: f[0].to_string(),
                p: num(f[1])?,
                n: f[2].parse().map_err(|_| parse_err(ln, format!("bad n {:?}", f[2])))?,
                cov_h: num(f[3])?,
                cov_ind: num(f[4])?,
                ratio_gap: num(f[5])?,
                method: f[6].parse::<Method>().map_err(|e| parse_err(ln, e.to_string()))?,
                se: num(f[7])?,
            })
        })
        .collect()
}
