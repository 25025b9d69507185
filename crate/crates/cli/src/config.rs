//! Run configuration, Table I defaults and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ftgauge::montecarlo::TemperatureLadder;
use ftgauge::nishimori::nishimori_point;
use ftgauge::Family;

pub const CONFIG_FORMAT: &str = "ftgauge-run";
pub const CONFIG_VERSION: u32 = 1;

/// Default sweep cap, `2^22` sweeps.
pub const DEFAULT_MAX_LOG2: u32 = 22;

/// Checkpoints are written every `2^DEFAULT_CHECKPOINT_LOG2` sweeps.
pub const DEFAULT_CHECKPOINT_LOG2: u32 = 14;

/// A configuration rejected before any compute (exit status 2).
#[derive(Debug)]
pub struct InvalidConfig(pub String);

impl std::fmt::Display for InvalidConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidConfig {}

fn invalid<T>(msg: impl Into<String>) -> Result<T, InvalidConfig> {
    Err(InvalidConfig(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub tmin: f64,
    pub tmax: f64,
    pub nt: usize,
}

impl LadderSpec {
    pub fn ladder(&self) -> ftgauge::Result<TemperatureLadder<f64>> {
        TemperatureLadder::linear(self.tmin, self.tmax, self.nt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Disorder samples.
    pub nsa: usize,
    /// `t_eq = 2^b` sweeps before the first equilibration verdict.
    pub b: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    pub p: f64,
    pub q: f64,
    pub ladder: LadderSpec,
    pub sizes: Vec<SizeConfig>,
}

/// Fully resolved description of a run; what `config.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub format: String,
    pub version: u32,
    pub family: Family,
    /// `q = alpha p` for every point when set.
    pub alpha: Option<f64>,
    pub points: Vec<PointConfig>,
    pub master_seed: u64,
    /// Never run `2^max_log2` sweeps or more per sample.
    pub max_log2: u32,
    /// Wilson patch edge; `floor(L/2)` when unset.
    pub wilson_size: Option<usize>,
    pub resamples: usize,
    pub checkpoint_log2: u32,
    /// Worker threads; does not affect results, so it is neither stored nor hashed.
    #[serde(skip)]
    pub workers: usize,
    /// Output directory; neither stored nor hashed.
    #[serde(skip)]
    pub output: PathBuf,
}

impl RunConfig {
    /// SHA-256 of the canonical JSON of every result-affecting field.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, InvalidConfig> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| InvalidConfig(format!("unreadable run configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn total_samples(&self) -> usize {
        self.points.iter().flat_map(|p| &p.sizes).map(|s| s.nsa).sum()
    }

    /// Checks every module precondition before anything runs.
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        if self.format != CONFIG_FORMAT || self.version != CONFIG_VERSION {
            return invalid(format!(
                "unsupported configuration format {} v{}",
                self.format, self.version
            ));
        }
        if self.points.is_empty() {
            return invalid("no (p, q) points given");
        }
        for point in &self.points {
            let (p, q) = (point.p, point.q);
            if !(0.0..0.5).contains(&p) || !(0.0..0.5).contains(&q) {
                return invalid(format!("rates p={p}, q={q} must lie in [0, 0.5)"));
            }
            if !(p == 0.0 && q == 0.0) {
                nishimori_point(p, q).map_err(|e| InvalidConfig(format!("p={p}, q={q}: {e}")))?;
            }
            if let Some(alpha) = self.alpha {
                if (q - alpha * p).abs() > 1e-12 * q.max(1.0) {
                    return invalid(format!("point p={p}, q={q} is not on the path q = {alpha} p"));
                }
            }
            point
                .ladder
                .ladder()
                .map_err(|e| InvalidConfig(format!("p={p}: {e}")))?;
            if point.sizes.is_empty() {
                return invalid(format!("p={p}: no system sizes"));
            }
            for s in &point.sizes {
                if s.l < 2 || s.m < 2 {
                    return invalid(format!("size L={}, M={} is degenerate (need L, M >= 2)", s.l, s.m));
                }
                if s.nsa == 0 {
                    return invalid(format!("L={}: N_sa must be positive", s.l));
                }
                if s.b < 7 || s.b >= self.max_log2 || s.b > 40 {
                    return invalid(format!(
                        "L={}: b={} must satisfy 7 <= b < max_log2={} (at least 8 log bins)",
                        s.l, s.b, self.max_log2
                    ));
                }
                if let Some(w) = self.wilson_size {
                    if w == 0 || w > s.l {
                        return invalid(format!("Wilson patch size {w} outside 1..={}", s.l));
                    }
                }
            }
        }
        let mut ps: Vec<(f64, f64)> = self.points.iter().map(|p| (p.p, p.q)).collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if ps.windows(2).any(|w| w[0] == w[1]) {
            return invalid("duplicate (p, q) point");
        }
        if self.resamples < 2 {
            return invalid("need at least 2 bootstrap resamples");
        }
        if self.checkpoint_log2 < 10 {
            return invalid("checkpoint interval must be at least 2^10 sweeps");
        }
        Ok(())
    }
}

/// One row of the paper's simulation-parameter table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub ladder: LadderSpec,
    pub small: (usize, u32),
    pub large: (usize, u32),
}

/// Table I row for bit-flip rate `p`: `(N_sa, b)` for `L <= 9` and for `L = 12`.
pub fn table_row(p: f64) -> TableRow {
    let row = |tmin, tmax, nt, small, large| TableRow {
        ladder: LadderSpec { tmin, tmax, nt },
        small,
        large,
    };
    if p < 0.01 {
        row(1.20, 2.00, 64, (1600, 15), (800, 15))
    } else if p < 0.03 {
        row(0.90, 1.80, 52, (1600, 16), (800, 17))
    } else if p < 0.04 {
        row(0.70, 1.40, 52, (1600, 17), (800, 19))
    } else {
        row(0.50, 1.20, 52, (1600, 18), (800, 20))
    }
}

/// System sizes `(L, M)` of the paper's simulations.
pub const TABLE_SIZES: [(usize, usize); 3] = [(6, 6), (9, 8), (12, 12)];

impl TableRow {
    pub fn for_size(&self, l: usize) -> (usize, u32) {
        if l >= 12 {
            self.large
        } else {
            self.small
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Table I verbatim.
    Paper,
    /// `N_sa = 16`, `b` four below Table I (at least 10), capped sweeps, no L = 12.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" | "table1" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(format!("unknown preset '{other}' (expected paper or desk)")),
        }
    }
}

pub const DESK_WARNING: &str = "preset 'desk' uses 16 disorder samples and budgets 2^4 times shorter than \
     the paper's; error bars are correspondingly larger and Tc estimates may be flagged";

/// Command-line level request, before defaults are filled in.
#[derive(Debug, Clone, Default)]
pub struct Request {
    pub family: Option<Family>,
    pub alpha: Option<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub l: Vec<usize>,
    pub m: Vec<usize>,
    pub nsa: Option<usize>,
    pub b: Option<u32>,
    pub tmin: Option<f64>,
    pub tmax: Option<f64>,
    pub nt: Option<usize>,
    pub seed: u64,
    pub max_log2: Option<u32>,
    pub wilson_size: Option<usize>,
    pub resamples: Option<usize>,
    pub checkpoint_log2: Option<u32>,
    pub workers: usize,
    pub preset: Option<Preset>,
    pub output: Option<PathBuf>,
}

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "FTGAUGE_OUTPUT";

/// Resolves a request into a validated configuration. Unset parameters take
/// their Table I values for the point's `p` and each size.
pub fn resolve(req: &Request) -> Result<RunConfig, InvalidConfig> {
    let family = req.family.unwrap_or(Family::Toric);
    if req.p.is_empty() {
        return invalid("give at least one --p");
    }
    let qs: Vec<f64> = match (req.alpha, req.q.is_empty()) {
        (Some(_), false) => return invalid("give either --alpha or --q, not both"),
        (Some(alpha), true) => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return invalid(format!("alpha must be positive, got {alpha}"));
            }
            req.p.iter().map(|&p| alpha * p).collect()
        }
        (None, false) if req.q.len() == req.p.len() => req.q.clone(),
        (None, false) => return invalid("--q must list one value per --p"),
        (None, true) => req.p.clone(),
    };
    let alpha = req.alpha.or(if req.q.is_empty() { Some(1.0) } else { None });
    let preset = req.preset.unwrap_or(Preset::Paper);

    let sizes: Vec<(usize, usize)> = match (req.l.is_empty(), req.m.is_empty()) {
        (true, true) => match preset {
            Preset::Paper => TABLE_SIZES.to_vec(),
            Preset::Desk => TABLE_SIZES[..2].to_vec(),
        },
        (false, true) => req.l.iter().map(|&l| (l, l)).collect(),
        (false, false) if req.l.len() == req.m.len() => req.l.iter().copied().zip(req.m.iter().copied()).collect(),
        _ => return invalid("--M must list one value per --L"),
    };
    let explicit_ladder = match (req.tmin, req.tmax, req.nt) {
        (None, None, None) => None,
        (Some(tmin), Some(tmax), Some(nt)) => Some(LadderSpec { tmin, tmax, nt }),
        _ => return invalid("give all of --tmin, --tmax and --nt, or none"),
    };

    let mut max_needed_b = 0;
    let points = req
        .p
        .iter()
        .zip(&qs)
        .map(|(&p, &q)| {
            let row = table_row(p);
            let sizes = sizes
                .iter()
                .map(|&(l, m)| {
                    let (nsa, b) = row.for_size(l);
                    let (nsa, b) = match preset {
                        Preset::Paper => (nsa, b),
                        Preset::Desk => (16, b.saturating_sub(4).max(10)),
                    };
                    let b = req.b.unwrap_or(b);
                    max_needed_b = max_needed_b.max(b);
                    SizeConfig {
                        l,
                        m,
                        nsa: req.nsa.unwrap_or(nsa),
                        b,
                    }
                })
                .collect();
            PointConfig {
                p,
                q,
                ladder: explicit_ladder.unwrap_or(row.ladder),
                sizes,
            }
        })
        .collect();
    let max_log2 = req.max_log2.unwrap_or(match preset {
        Preset::Paper => DEFAULT_MAX_LOG2.max(max_needed_b + 1),
        Preset::Desk => max_needed_b + 1,
    });
    let mut config = RunConfig {
        format: CONFIG_FORMAT.into(),
        version: CONFIG_VERSION,
        family,
        alpha,
        points,
        master_seed: req.seed,
        max_log2,
        wilson_size: req.wilson_size,
        resamples: req.resamples.unwrap_or(ftgauge::analysis::DEFAULT_RESAMPLES),
        checkpoint_log2: req.checkpoint_log2.unwrap_or(DEFAULT_CHECKPOINT_LOG2),
        workers: req.workers,
        output: PathBuf::new(),
    };
    config.validate()?;
    config.output = match &req.output {
        Some(dir) => dir.clone(),
        None => {
            let root = std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
            root.join(format!("ftgauge-{}", &config.hash()[..12]))
        }
    };
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> Request {
        Request {
            family: Some(Family::Toric),
            alpha: Some(1.0),
            p: vec![0.02],
            l: vec![6],
            m: vec![6],
            nsa: Some(16),
            b: Some(15),
            tmin: Some(0.9),
            tmax: Some(1.8),
            nt: Some(52),
            seed: 1,
            workers: 1,
            output: Some("out".into()),
            ..Request::default()
        }
    }

    #[test]
    fn example_command_resolves() {
        let config = resolve(&request()).unwrap();
        assert_eq!(config.points.len(), 1);
        assert_eq!(config.points[0].q, 0.02);
        assert_eq!(config.points[0].sizes[0], SizeConfig { l: 6, m: 6, nsa: 16, b: 15 });
        assert_eq!(config.max_log2, DEFAULT_MAX_LOG2);
    }

    #[test]
    fn json_round_trip_and_hash() {
        let config = resolve(&request()).unwrap();
        let mut back = RunConfig::from_json(&config.to_json()).unwrap();
        assert!(!config.to_json().contains("\"output\""));
        (back.workers, back.output) = (config.workers, config.output.clone());
        assert_eq!(back, config);
        assert_eq!(back.hash(), config.hash());
        let mut other = config.clone();
        other.workers = 8;
        other.output = "elsewhere".into();
        assert_eq!(other.hash(), config.hash());
        other.master_seed = 2;
        assert_ne!(other.hash(), config.hash());
    }

    #[test]
    fn table_defaults() {
        let mut req = request();
        (req.nsa, req.b, req.tmin, req.tmax, req.nt) = (None, None, None, None, None);
        req.p = vec![0.0, 0.035, 0.05];
        req.l = vec![6, 12];
        req.m = vec![6, 12];
        let config = resolve(&req).unwrap();
        assert_eq!(config.points[0].ladder, LadderSpec { tmin: 1.2, tmax: 2.0, nt: 64 });
        assert_eq!(config.points[1].sizes[1], SizeConfig { l: 12, m: 12, nsa: 800, b: 19 });
        assert_eq!(config.points[2].ladder.tmin, 0.5);
        assert_eq!(config.points[2].sizes[0].b, 18);

        req.preset = Some(Preset::Desk);
        let desk = resolve(&req).unwrap();
        assert_eq!(desk.points[2].sizes[0], SizeConfig { l: 6, m: 6, nsa: 16, b: 14 });
        assert_eq!(desk.max_log2, 17);
    }

    #[test]
    fn rejects_bad_requests() {
        let bad = |f: fn(&mut Request)| {
            let mut r = request();
            f(&mut r);
            resolve(&r).unwrap_err()
        };
        bad(|r| r.p = vec![0.5]);
        bad(|r| r.l = vec![1]);
        bad(|r| r.nsa = Some(0));
        bad(|r| r.b = Some(3));
        bad(|r| r.tmin = Some(-1.0));
        bad(|r| r.tmax = None);
        bad(|r| r.q = vec![0.1]);
        bad(|r| r.p = vec![0.02, 0.02]);
        // q = 0 collapses the model; p = 0 with q > 0 is an infinite coupling.
        bad(|r| {
            r.alpha = None;
            r.q = vec![0.0];
        });
        bad(|r| {
            r.p = vec![0.0];
            r.alpha = None;
            r.q = vec![0.1];
        });
        let msg = bad(|r| r.wilson_size = Some(9)).to_string();
        assert!(msg.contains("Wilson"), "{msg}");
    }

    #[test]
    fn clean_point_is_allowed() {
        let mut r = request();
        r.p = vec![0.0];
        assert!(resolve(&r).is_ok());
    }
}
