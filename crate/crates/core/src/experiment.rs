//! Reproducible experiment driver: configuration, seeding, the survivor-count
//! and peak-localization experiments, and file export.
//!
//! Repetition `r` draws its directions from stream 0 and its rotations from
//! stream 1 of a ChaCha generator seeded with `seed + r`, so any single
//! repetition can be regenerated on its own.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cubature::{equal_area_points, fmt_f64, geodesic_distance};
use crate::error::{Error, Result};
use crate::estimator::{
    reconstruct, select_j, survival_counts, EstimatorConfig, NeedletEstimate, ThresholdedExpansion,
};
use crate::harmonics::{EulerRotation, SphereDirection, SphereFunction};
use crate::needlet::{NeedletExpansion, NeedletFrame, WindowFunction};
use crate::noise::{spectrum, NoiseInverse, NoiseModel, DEFAULT_CONDITION_LIMIT};
use crate::simulate::{
    apply_rotations, sample_density, sample_rotations, write_samples_csv, TargetDensity,
    BUMP_AMPLITUDE,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Equal-area level of the grid searched for the reconstruction's maximum.
const PEAK_GRID_LEVEL: usize = 5;

/// Localization tolerance reported in peak summaries, in radians.
pub const PEAK_TOLERANCE: f64 = 0.2;

pub const PRESETS: [&str; 5] = ["table1", "table2", "bump-pi8", "bump-pi4", "bump-pi2"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target: TargetDensity,
    /// Noise law of the rotations; never `Empirical`.
    pub noise: NoiseModel,
    pub n: usize,
    pub kappa0: Vec<f64>,
    pub max_level: Option<usize>,
    /// Sup-norm bound `M` entering the thresholds.
    pub sup_bound: f64,
    pub seed: u64,
    pub repetitions: usize,
    /// Invert the sample mean of the generating rotations instead of the
    /// analytic noise spectrum.
    pub use_empirical_noise: bool,
    /// Largest harmonic degree the frame may use.
    pub max_degree_cap: usize,
    pub grid_theta: usize,
    pub grid_phi: usize,
    pub cond_limit: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            target: TargetDensity::Uniform,
            noise: NoiseModel::ZAxisUniform { a: PI / 8.0 },
            n: 1500,
            kappa0: vec![0.38],
            max_level: None,
            sup_bound: BUMP_AMPLITUDE,
            seed: 0,
            repetitions: 1,
            use_empirical_noise: true,
            max_degree_cap: 64,
            grid_theta: 64,
            grid_phi: 128,
            cond_limit: DEFAULT_CONDITION_LIMIT,
        }
    }
}

/// Parses `a=<radians>`, `laplace:rho2=<v>`, `rosenthal:theta=<v>,p=<v>` or `none`.
pub fn parse_noise(spec: &str) -> Result<NoiseModel> {
    let spec = spec.trim();
    let bad = || Error::Config(format!("unrecognized noise spec '{spec}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let fields = |body: &str| -> Result<Vec<(String, f64)>> {
        body.split(',')
            .map(|kv| {
                let (k, v) = kv.split_once('=').ok_or_else(bad)?;
                Ok((k.trim().to_string(), num(v)?))
            })
            .collect()
    };
    let get = |fs: &[(String, f64)], key: &str| {
        fs.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(bad)
    };
    let model = if spec == "none" {
        NoiseModel::ZAxisUniform { a: 0.0 }
    } else if let Some(v) = spec.strip_prefix("a=") {
        NoiseModel::ZAxisUniform { a: num(v)? }
    } else if let Some(body) = spec.strip_prefix("laplace:") {
        NoiseModel::RotationalLaplace {
            rho2: get(&fields(body)?, "rho2")?,
        }
    } else if let Some(body) = spec.strip_prefix("rosenthal:") {
        let fs = fields(body)?;
        NoiseModel::Rosenthal {
            theta: get(&fs, "theta")?,
            p: get(&fs, "p")?,
        }
    } else {
        return Err(bad());
    };
    spectrum(&model, 0).map_err(|e| Error::Config(e.to_string()))?;
    Ok(model)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{value}' for {key}"))),
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            repetitions: 20,
            ..Self::default()
        };
        let bump = |a: f64, k: f64| Self {
            target: TargetDensity::reference_bump(),
            noise: NoiseModel::ZAxisUniform { a },
            kappa0: vec![k],
            ..base.clone()
        };
        Ok(match name {
            "table1" => Self {
                kappa0: vec![0.08, 0.29, 0.34, 0.38],
                ..base.clone()
            },
            "table2" => Self {
                noise: NoiseModel::ZAxisUniform { a: PI },
                kappa0: vec![0.05, 0.17, 0.30, 0.34, 0.38],
                ..base.clone()
            },
            "bump-pi8" => bump(PI / 8.0, 0.43),
            "bump-pi4" => bump(PI / 4.0, 0.46),
            "bump-pi2" => bump(PI / 2.0, 0.56),
            _ => {
                return Err(Error::Config(format!(
                    "unknown preset '{name}' (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "preset" => *self = Self::preset(value.trim())?,
            "target" => {
                self.target = match value.trim() {
                    "uniform" => TargetDensity::Uniform,
                    "bump" => TargetDensity::reference_bump(),
                    other => return Err(Error::Config(format!("unknown target '{other}'"))),
                }
            }
            "noise" => self.noise = parse_noise(value)?,
            "n" => self.n = parse_value(key, value)?,
            "kappa0" => {
                self.kappa0 = value
                    .split(',')
                    .map(|v| parse_value(key, v))
                    .collect::<Result<_>>()?;
            }
            "j" => self.max_level = Some(parse_value(key, value)?),
            "m" => self.sup_bound = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "reps" => self.repetitions = parse_value(key, value)?,
            "empirical_noise" => self.use_empirical_noise = parse_bool(key, value)?,
            "l_max" => self.max_degree_cap = parse_value(key, value)?,
            "grid_theta" => self.grid_theta = parse_value(key, value)?,
            "grid_phi" => self.grid_phi = parse_value(key, value)?,
            "cond_limit" => self.cond_limit = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment. A `preset`
    /// line is applied before the other keys regardless of position.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            pairs.push((k.trim().to_lowercase(), v.trim().to_string()));
        }
        pairs.sort_by_key(|(k, _)| k != "preset");
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Level used by the runs, enforcing `J ≤ select_j(N)`.
    pub fn level(&self) -> Result<usize> {
        let auto = select_j(self.n);
        match self.max_level {
            None => Ok(auto),
            Some(j) if j <= auto => Ok(j),
            Some(j) => Err(Error::Config(format!(
                "J = {j} exceeds the admissible level {auto} for N = {}",
                self.n
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("N = {} must be >= 2", self.n)));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.kappa0.is_empty() || self.kappa0.iter().any(|k| k.is_nan() || *k < 0.0) {
            return Err(Error::Config(
                "kappa0 must be a nonempty list of values >= 0".into(),
            ));
        }
        if self.use_empirical_noise && !self.noise.is_generative() {
            return Err(Error::Config(format!(
                "empirical noise needs a generative model, got {}",
                self.noise
            )));
        }
        let j = self.level()?;
        let top = (1usize << (j + 1)) - 1;
        if top > self.max_degree_cap {
            return Err(Error::Config(format!(
                "level {j} needs degree {top} above l_max = {}",
                self.max_degree_cap
            )));
        }
        if self.grid_theta == 0 || self.grid_phi == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        Ok(())
    }

    /// The metadata block embedded in every output.
    pub fn metadata(&self) -> Vec<(&'static str, String)> {
        let target = match self.target {
            TargetDensity::Uniform => "uniform".to_string(),
            TargetDensity::GaussianBump {
                center,
                scale,
                amplitude,
            } => format!(
                "bump(theta={}, phi={}, scale={scale}, amplitude={amplitude})",
                center.theta, center.phi
            ),
        };
        let kappas: Vec<String> = self.kappa0.iter().map(|k| k.to_string()).collect();
        vec![
            ("version", VERSION.to_string()),
            ("seed", self.seed.to_string()),
            ("n", self.n.to_string()),
            ("kappa0", kappas.join(";")),
            (
                "j",
                self.level()
                    .map(|j| j.to_string())
                    .unwrap_or_else(|_| "invalid".into()),
            ),
            ("noise", self.noise.to_string()),
            ("empirical_noise", self.use_empirical_noise.to_string()),
            ("target", target),
            ("m", self.sup_bound.to_string()),
            ("reps", self.repetitions.to_string()),
            ("cond_limit", self.cond_limit.to_string()),
        ]
    }

    fn metadata_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.metadata()
                .into_iter()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect(),
        )
    }

    fn metadata_header(&self) -> String {
        self.metadata()
            .into_iter()
            .map(|(k, v)| format!("# {k}: {v}\n"))
            .collect()
    }
}

fn stream(seed: u64, rep: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64));
    rng.set_stream(stream);
    rng
}

/// The rotations of repetition `rep`.
pub fn repetition_rotations(
    cfg: &ExperimentConfig,
    rep: usize,
    n: usize,
) -> Result<Vec<EulerRotation>> {
    sample_rotations(&cfg.noise, n, &mut stream(cfg.seed, rep, 1))
}

/// Observations `Z = εX` and the rotations of repetition `rep`.
pub fn repetition_data(
    cfg: &ExperimentConfig,
    rep: usize,
) -> Result<(Vec<SphereDirection>, Vec<EulerRotation>)> {
    let x = sample_density(&cfg.target, cfg.n, &mut stream(cfg.seed, rep, 0));
    let rotations = repetition_rotations(cfg, rep, cfg.n)?;
    Ok((apply_rotations(&x, &rotations)?, rotations))
}

fn noise_inverse(
    cfg: &ExperimentConfig,
    rotations: &[EulerRotation],
    max_degree: usize,
) -> Result<NoiseInverse> {
    let spec = if cfg.use_empirical_noise {
        spectrum(
            &NoiseModel::Empirical {
                rotations: rotations.to_vec(),
            },
            max_degree,
        )?
    } else {
        spectrum(&cfg.noise, max_degree)?
    };
    Ok(NoiseInverse::from_spectrum(&spec, cfg.cond_limit))
}

/// Shared state of one run.
struct Pipeline {
    frame: NeedletFrame,
}

impl Pipeline {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            frame: NeedletFrame::new(cfg.level()?, WindowFunction::smooth_bump()),
        })
    }

    fn estimate(
        &self,
        cfg: &ExperimentConfig,
        z: &[SphereDirection],
        rotations: &[EulerRotation],
    ) -> Result<(NeedletEstimate, NoiseInverse, EstimatorConfig)> {
        let inv = noise_inverse(cfg, rotations, self.frame.max_degree())?;
        let est = NeedletEstimate::compute(&self.frame, z, &inv, cfg.sup_bound)?;
        let ecfg = EstimatorConfig::new(
            z.len(),
            self.frame.max_level(),
            cfg.kappa0[0],
            cfg.sup_bound,
        )?;
        Ok((est, inv, ecfg))
    }
}

/// Survivor counts per repetition, `κ₀` and level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example1Report {
    pub kappa0: Vec<f64>,
    pub max_level: usize,
    /// `counts[rep][k][j]`
    pub counts: Vec<Vec<Vec<usize>>>,
    pub excluded: Vec<Vec<usize>>,
}

impl Example1Report {
    pub fn mean_counts(&self) -> Vec<Vec<f64>> {
        let reps = self.counts.len() as f64;
        (0..self.kappa0.len())
            .map(|k| {
                (0..=self.max_level)
                    .map(|j| self.counts.iter().map(|r| r[k][j] as f64).sum::<f64>() / reps)
                    .collect()
            })
            .collect()
    }

    pub fn totals(&self, k: usize) -> Vec<usize> {
        self.counts.iter().map(|r| r[k].iter().sum()).collect()
    }
}

/// Survivor counts for a uniform target over the configured `κ₀` values.
pub fn run_example1(cfg: &ExperimentConfig) -> Result<Example1Report> {
    if cfg.target != TargetDensity::Uniform {
        return Err(Error::Config(
            "the survivor-count experiment needs the uniform target".into(),
        ));
    }
    let pipe = Pipeline::new(cfg)?;
    let per_rep: Vec<(Vec<Vec<usize>>, Vec<usize>)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let (z, rotations) = repetition_data(cfg, rep)?;
            let (est, inv, ecfg) = pipe.estimate(cfg, &z, &rotations)?;
            let counts = cfg
                .kappa0
                .iter()
                .map(|k| {
                    Ok(survival_counts(&est.threshold(
                        &pipe.frame,
                        &inv,
                        &ecfg.with_kappa(*k)?,
                    )?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((
                counts,
                inv.excluded()
                    .iter()
                    .copied()
                    .filter(|&l| l <= pipe.frame.max_degree())
                    .collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let (counts, excluded) = per_rep.into_iter().unzip();
    Ok(Example1Report {
        kappa0: cfg.kappa0.clone(),
        max_level: pipe.frame.max_level(),
        counts,
        excluded,
    })
}

fn level_header(max_level: usize) -> String {
    (0..=max_level)
        .map(|j| format!("j{j}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// `kappa0,j0,..,jJ` rows of mean survivor counts.
pub fn example1_summary_csv(cfg: &ExperimentConfig, report: &Example1Report) -> String {
    let mut out = cfg.metadata_header();
    writeln!(out, "kappa0,{}", level_header(report.max_level)).unwrap();
    for (k, row) in report.kappa0.iter().zip(report.mean_counts()) {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{k},{}", cells.join(",")).unwrap();
    }
    out
}

/// `rep,seed,kappa0,j0,..,jJ,excluded` rows.
pub fn example1_by_rep_csv(cfg: &ExperimentConfig, report: &Example1Report) -> String {
    let mut out = cfg.metadata_header();
    writeln!(
        out,
        "rep,seed,kappa0,{},excluded",
        level_header(report.max_level)
    )
    .unwrap();
    for (rep, (rows, excl)) in report.counts.iter().zip(&report.excluded).enumerate() {
        let excl: Vec<String> = excl.iter().map(|l| l.to_string()).collect();
        for (k, row) in report.kappa0.iter().zip(rows) {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let seed = cfg.seed.wrapping_add(rep as u64);
            writeln!(
                out,
                "{rep},{seed},{k},{},{}",
                cells.join(","),
                excl.join(";")
            )
            .unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakReport {
    pub rep: usize,
    pub seed: u64,
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub geodesic_error: f64,
    pub colatitude_error: f64,
}

#[derive(Debug, Clone)]
pub struct Example2Report {
    pub truth: SphereDirection,
    pub peaks: Vec<PeakReport>,
    pub counts: Vec<Vec<usize>>,
    /// First repetition, kept for export.
    pub observations: Vec<SphereDirection>,
    pub expansion: ThresholdedExpansion,
    pub reconstruction: NeedletExpansion,
}

impl Example2Report {
    pub fn fraction_within(&self, tol: f64, colatitude_only: bool) -> f64 {
        let hits = self
            .peaks
            .iter()
            .filter(|p| if colatitude_only { p.colatitude_error } else { p.geodesic_error } <= tol)
            .count();
        hits as f64 / self.peaks.len() as f64
    }
}

/// Observations, expansion and reconstruction of the first repetition.
type KeptRun = (Vec<SphereDirection>, ThresholdedExpansion, NeedletExpansion);

/// Peak localization for the bump target.
pub fn run_example2(cfg: &ExperimentConfig) -> Result<Example2Report> {
    let TargetDensity::GaussianBump { center: truth, .. } = cfg.target else {
        return Err(Error::Config(
            "the localization experiment needs the bump target".into(),
        ));
    };
    let pipe = Pipeline::new(cfg)?;
    let peak_grid = equal_area_points(PEAK_GRID_LEVEL);
    let mut runs: Vec<(PeakReport, Vec<usize>, Option<KeptRun>)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let (z, rotations) = repetition_data(cfg, rep)?;
            let (est, inv, ecfg) = pipe.estimate(cfg, &z, &rotations)?;
            let expansion = est.threshold(&pipe.frame, &inv, &ecfg)?;
            let rec = reconstruct(&expansion, &pipe.frame)?;
            let peak = crate::simulate::peak_locate(&rec, &peak_grid)?;
            let report = PeakReport {
                rep,
                seed: cfg.seed.wrapping_add(rep as u64),
                theta_hat: peak.theta,
                phi_hat: peak.phi,
                geodesic_error: geodesic_distance(&peak, &truth),
                colatitude_error: (peak.theta - truth.theta).abs(),
            };
            let counts = survival_counts(&expansion);
            Ok((report, counts, (rep == 0).then_some((z, expansion, rec))))
        })
        .collect::<Result<_>>()?;
    let (observations, expansion, reconstruction) =
        runs[0].2.take().expect("first repetition kept");
    let (peaks, counts) = runs.into_iter().map(|(p, c, _)| (p, c)).unzip();
    Ok(Example2Report {
        truth,
        peaks,
        counts,
        observations,
        expansion,
        reconstruction,
    })
}

/// `theta,phi,value` on the cell-centred equiangular grid.
pub fn grid_csv<F: SphereFunction + Sync>(cfg: &ExperimentConfig, f: &F) -> String {
    let (nt, np) = (cfg.grid_theta, cfg.grid_phi);
    let rows: Vec<String> = (0..nt * np)
        .into_par_iter()
        .map(|k| {
            let theta = (k / np) as f64 * PI / nt as f64 + PI / (2 * nt) as f64;
            let phi = (k % np) as f64 * 2.0 * PI / np as f64;
            let v = f.eval(&SphereDirection { theta, phi });
            format!("{},{},{}\n", fmt_f64(theta), fmt_f64(phi), fmt_f64(v))
        })
        .collect();
    let mut out = cfg.metadata_header();
    out.push_str("theta,phi,value\n");
    rows.iter().for_each(|r| out.push_str(r));
    out
}

pub fn expansion_json(cfg: &ExperimentConfig, expansion: &ThresholdedExpansion) -> Result<String> {
    let mut value = serde_json::to_value(expansion)?;
    value["metadata"] = cfg.metadata_json();
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

pub fn peak_json(cfg: &ExperimentConfig, report: &Example2Report) -> Result<String> {
    let first = report.peaks[0];
    let value = json!({
        "metadata": cfg.metadata_json(),
        "theta_true": report.truth.theta,
        "phi_true": report.truth.phi,
        "theta_hat": first.theta_hat,
        "phi_hat": first.phi_hat,
        "geodesic_error": first.geodesic_error,
        "tolerance": PEAK_TOLERANCE,
        "fraction_geodesic_within": report.fraction_within(PEAK_TOLERANCE, false),
        "fraction_colatitude_within": report.fraction_within(PEAK_TOLERANCE, true),
        "repetitions": report.peaks,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

pub fn survivors_csv(cfg: &ExperimentConfig, counts: &[Vec<usize>]) -> String {
    let mut out = cfg.metadata_header();
    let max_level = counts.first().map_or(0, |c| c.len() - 1);
    writeln!(out, "rep,seed,{}", level_header(max_level)).unwrap();
    for (rep, row) in counts.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(
            out,
            "{rep},{},{}",
            cfg.seed.wrapping_add(rep as u64),
            cells.join(",")
        )
        .unwrap();
    }
    out
}

pub fn observations_csv(cfg: &ExperimentConfig, z: &[SphereDirection]) -> Result<String> {
    let mut buf = cfg.metadata_header().into_bytes();
    write_samples_csv(z, &mut buf)?;
    Ok(String::from_utf8(buf).expect("ascii output"))
}

/// Reads `theta,phi` rows; `#` lines are comments and a header row is
/// optional. Errors cite the 1-based line of the offending row.
pub fn read_observations<R: Read>(input: R) -> Result<Vec<SphereDirection>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let is_header = first
            && record
                .get(0)
                .is_some_and(|c| c.eq_ignore_ascii_case("theta"));
        first = false;
        if is_header {
            continue;
        }
        let fail = |message: String| Error::Parse { line, message };
        if record.len() != 2 {
            return Err(fail(format!("expected 2 fields, found {}", record.len())));
        }
        let num = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|_| fail(format!("'{}' is not a number", &record[i])))
        };
        let (theta, phi) = (num(0)?, num(1)?);
        if !(0.0..=PI).contains(&theta) {
            return Err(fail(format!("theta = {theta} outside [0, π]")));
        }
        if !(0.0..=2.0 * PI).contains(&phi) {
            return Err(fail(format!("phi = {phi} outside [0, 2π]")));
        }
        out.push(SphereDirection::new(theta, phi).map_err(|e| fail(e.to_string()))?);
    }
    if out.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(out)
}

/// Estimation on external observations. With empirical noise the rotations
/// of repetition 0 are regenerated from the seed.
pub fn run_estimate(
    cfg: &ExperimentConfig,
    z: &[SphereDirection],
) -> Result<(ThresholdedExpansion, NeedletExpansion)> {
    let cfg = ExperimentConfig {
        n: z.len(),
        ..cfg.clone()
    };
    let pipe = Pipeline::new(&cfg)?;
    let rotations = if cfg.use_empirical_noise {
        repetition_rotations(&cfg, 0, z.len())?
    } else {
        Vec::new()
    };
    let (est, inv, ecfg) = pipe.estimate(&cfg, z, &rotations)?;
    let expansion = est.threshold(&pipe.frame, &inv, &ecfg)?;
    let rec = reconstruct(&expansion, &pipe.frame)?;
    Ok((expansion, rec))
}

/// Files written by a command, in creation order.
pub type Written = Vec<PathBuf>;

fn write(dir: &Path, name: &str, contents: &str, written: &mut Written) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

pub fn write_example1(cfg: &ExperimentConfig, out: &Path) -> Result<(Example1Report, Written)> {
    fs::create_dir_all(out)?;
    let report = run_example1(cfg)?;
    let mut written = Vec::new();
    write(
        out,
        "survivors.csv",
        &example1_summary_csv(cfg, &report),
        &mut written,
    )?;
    write(
        out,
        "survivors_by_rep.csv",
        &example1_by_rep_csv(cfg, &report),
        &mut written,
    )?;
    Ok((report, written))
}

pub fn write_example2(cfg: &ExperimentConfig, out: &Path) -> Result<(Example2Report, Written)> {
    fs::create_dir_all(out)?;
    let report = run_example2(cfg)?;
    let mut written = Vec::new();
    write(
        out,
        "grid.csv",
        &grid_csv(cfg, &report.reconstruction),
        &mut written,
    )?;
    write(out, "peak.json", &peak_json(cfg, &report)?, &mut written)?;
    write(
        out,
        "survivors.csv",
        &survivors_csv(cfg, &report.counts),
        &mut written,
    )?;
    write(
        out,
        "observations.csv",
        &observations_csv(cfg, &report.observations)?,
        &mut written,
    )?;
    write(
        out,
        "expansion.json",
        &expansion_json(cfg, &report.expansion)?,
        &mut written,
    )?;
    Ok((report, written))
}

pub fn write_estimate(
    cfg: &ExperimentConfig,
    observations: &Path,
    out: &Path,
) -> Result<(ThresholdedExpansion, Written)> {
    let z = read_observations(fs::File::open(observations)?)?;
    let cfg = ExperimentConfig {
        n: z.len(),
        ..cfg.clone()
    };
    let (expansion, rec) = run_estimate(&cfg, &z)?;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    write(
        out,
        "expansion.json",
        &expansion_json(&cfg, &expansion)?,
        &mut written,
    )?;
    write(out, "grid.csv", &grid_csv(&cfg, &rec), &mut written)?;
    Ok((expansion, written))
}
