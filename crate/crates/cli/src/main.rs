use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sphdeconv_core::cubature::{equal_area_points, gauss_product_grid};
use sphdeconv_core::error::{Error, Result};
use sphdeconv_core::experiment::{
    parse_noise, write_estimate, write_example1, write_example2, ExperimentConfig, PEAK_TOLERANCE,
};
use sphdeconv_core::noise::{spectrum, NoiseModel};

#[derive(Parser)]
#[command(
    name = "sphdeconv",
    version,
    about = "Needlet deconvolution of densities on the sphere under rotation noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survivor counts for the uniform target over several kappa0 values.
    Example1(RunArgs),
    /// Reconstruction grid and peak report for the bump target.
    Example2(RunArgs),
    /// Estimate from an observations CSV of (theta, phi) rows.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
        /// Observations file.
        #[arg(long)]
        input: PathBuf,
    },
    /// Export a cubature point set as CSV.
    Points {
        #[arg(long, value_enum, default_value = "equal-area")]
        scheme: Scheme,
        /// Equal-area level, or Gauss product degree.
        #[arg(long)]
        level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a noise spectrum as JSON.
    Spectrum {
        /// Noise model: a=<rad>, laplace:rho2=<v>, rosenthal:theta=<v>,p=<v> or none.
        #[arg(long, default_value = "a=0.39269908169872414")]
        noise: String,
        #[arg(long, default_value_t = 8)]
        l_max: usize,
        /// Average the Wigner matrices of this many sampled rotations instead.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    EqualArea,
    Gauss,
}

#[derive(Args)]
struct RunArgs {
    /// table1, table2, bump-pi8, bump-pi4 or bump-pi2.
    #[arg(long)]
    preset: Option<String>,
    /// Flat key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated threshold multipliers.
    #[arg(long)]
    kappa0: Option<String>,
    /// Noise model, e.g. a=0.3927.
    #[arg(long)]
    noise: Option<String>,
    /// Invert the empirical noise spectrum of the generating rotations.
    #[arg(long, conflicts_with = "analytic_noise")]
    empirical_noise: bool,
    /// Invert the analytic noise spectrum.
    #[arg(long)]
    analytic_noise: bool,
    #[arg(long)]
    reps: Option<usize>,
    /// Needlet level J; at most the level selected for N.
    #[arg(long)]
    j: Option<usize>,
    /// Sup-norm bound M.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.preset {
            Some(p) => ExperimentConfig::preset(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.config {
            let mut text = fs::read_to_string(path)?;
            if self.preset.is_some() {
                // the flag's preset wins; the file's other keys still apply
                text = text
                    .lines()
                    .filter(|l| !l.trim_start().starts_with("preset"))
                    .map(|l| format!("{l}\n"))
                    .collect();
            }
            cfg.apply_text(&text)?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = &self.kappa0 {
            cfg.set("kappa0", v)?;
        }
        if let Some(v) = &self.noise {
            cfg.noise = parse_noise(v)?;
        }
        if self.empirical_noise {
            cfg.use_empirical_noise = true;
        }
        if self.analytic_noise {
            cfg.use_empirical_noise = false;
        }
        if let Some(v) = self.reps {
            cfg.repetitions = v;
        }
        if self.j.is_some() {
            cfg.max_level = self.j;
        }
        if let Some(v) = self.m {
            cfg.sup_bound = v;
        }
        Ok(cfg)
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn list(written: &[PathBuf]) {
    for p in written {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Example1(args) => {
            let cfg = args.config()?;
            let (report, written) = write_example1(&cfg, &args.out)?;
            for (k, row) in report.kappa0.iter().zip(report.mean_counts()) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
                println!(
                    "kappa0 = {k}: mean survivors per level {}",
                    cells.join(" / ")
                );
            }
            list(&written);
        }
        Command::Example2(args) => {
            let cfg = args.config()?;
            let (report, written) = write_example2(&cfg, &args.out)?;
            let p = report.peaks[0];
            println!(
                "peak (rep 0): theta = {:.4}, phi = {:.4}, geodesic error = {:.4}",
                p.theta_hat, p.phi_hat, p.geodesic_error
            );
            println!(
                "within {PEAK_TOLERANCE} rad over {} reps: geodesic {:.0}%, colatitude {:.0}%",
                report.peaks.len(),
                100.0 * report.fraction_within(PEAK_TOLERANCE, false),
                100.0 * report.fraction_within(PEAK_TOLERANCE, true)
            );
            list(&written);
        }
        Command::Estimate { run, input } => {
            let cfg = run.config()?;
            let (expansion, written) = write_estimate(&cfg, &input, &run.out)?;
            println!(
                "{} coefficients survive thresholding",
                expansion.survivors.len()
            );
            list(&written);
        }
        Command::Points { scheme, level, out } => {
            let set = match scheme {
                Scheme::EqualArea => {
                    if level > 10 {
                        return Err(Error::Config(format!("equal-area level {level} above 10")));
                    }
                    equal_area_points(level)
                }
                Scheme::Gauss => gauss_product_grid(level),
            };
            let mut buf = Vec::new();
            set.write_csv(&mut buf)?;
            emit(&out, &String::from_utf8(buf).expect("ascii output"))?;
        }
        Command::Spectrum {
            noise,
            l_max,
            samples,
            seed,
            out,
        } => {
            let model = parse_noise(&noise)?;
            let spec = match samples {
                None => spectrum(&model, l_max)?,
                Some(n) => {
                    let cfg = ExperimentConfig {
                        noise: model,
                        seed,
                        ..ExperimentConfig::default()
                    };
                    let rotations = sphdeconv_core::experiment::repetition_rotations(&cfg, 0, n)?;
                    spectrum(&NoiseModel::Empirical { rotations }, l_max)?
                }
            };
            let mut value = spec.to_json();
            value["noise"] = noise.into();
            value["seed"] = seed.into();
            value["samples"] = samples.into();
            value["version"] = env!("CARGO_PKG_VERSION").into();
            emit(&out, &(serde_json::to_string_pretty(&value)? + "\n"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
