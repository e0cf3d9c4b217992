use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mdsa::anneal::{anneal, AnnealSchedule};
use mdsa::energy::{DistortionMeasure, LagrangianWeights};
use mdsa::experiment::{
    read_sequence, run_experiment, sweep, write_sequence, ExperimentConfig, SweepConfig,
};
use mdsa::pipeline::{
    check_rate_lower_bounds, md_decode_central, md_decode_side, md_encode, MdMessage, MdParams,
};
use mdsa::source::{generate_markov, MarkovSourceSpec};

#[derive(Parser)]
#[command(name = "mdsa", version, about = "Multiple-description lossy coding by simulated annealing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a Markov source block and write it as a sequence file.
    Generate {
        /// Flip probability of a symmetric binary chain.
        #[arg(long, conflicts_with = "source")]
        p: Option<f64>,
        /// JSON source spec (alphabet, transition, n, seed).
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Anneal a sequence file into a reconstruction triple.
    Anneal {
        #[arg(long, short)]
        input: PathBuf,
        #[command(flatten)]
        code: CodeArgs,
        /// Directory for x1.mdsq, x2.mdsq, x0.mdsq and trace.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Anneal and write the two descriptions.
    Encode {
        #[arg(long, short)]
        input: PathBuf,
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long)]
        m1: PathBuf,
        #[arg(long)]
        m2: PathBuf,
        /// Write the rate report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Side decoder for message 1.
    Decode1 {
        #[arg(long)]
        m1: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Side decoder for message 2.
    Decode2 {
        #[arg(long)]
        m2: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Central decoder.
    Decode0 {
        #[arg(long)]
        m1: PathBuf,
        #[arg(long)]
        m2: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run an experiment config and write its CSVs.
    Experiment {
        #[arg(long, short)]
        config: PathBuf,
        /// Overrides the config's records path.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Overrides the config's trace path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a weight sweep and write the frontier table.
    Sweep {
        #[arg(long, short)]
        config: PathBuf,
        /// Overrides the config's frontier path.
        #[arg(long)]
        frontier: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CodeArgs {
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    k1: usize,
    /// gamma1,gamma2,gamma0,alpha1,alpha2,alpha0
    #[arg(long, default_value = "1,1,1,1,1,1")]
    weights: String,
    /// power-law[:EXPONENT[:C]], log:T0 or constant:BETA
    #[arg(long, default_value = "power-law")]
    schedule: String,
    /// Iterations as a multiple of the block length.
    #[arg(long, default_value_t = 50, conflicts_with = "iterations")]
    sweeps: u64,
    /// Total iterations.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CodeArgs {
    fn weights(&self) -> Result<LagrangianWeights> {
        let v: Vec<f64> = self
            .weights
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .context("weights must be six comma-separated numbers")?;
        let [g1, g2, g0, a1, a2, a0] = v[..] else {
            bail!("expected six weights, got {}", v.len());
        };
        Ok(LagrangianWeights::new(g1, g2, g0, a1, a2, a0)?)
    }

    fn schedule(&self) -> Result<AnnealSchedule> {
        let parts: Vec<&str> = self.schedule.split(':').collect();
        let num = |s: &str| s.parse::<f64>().with_context(|| format!("bad number {s:?}"));
        let schedule = match parts[..] {
            ["power-law"] => AnnealSchedule::default_power_law(),
            ["power-law", e] => AnnealSchedule::PowerLaw {
                c: None,
                exponent: num(e)?,
            },
            ["power-law", e, c] => AnnealSchedule::PowerLaw {
                c: Some(num(c)?),
                exponent: num(e)?,
            },
            ["log", t0] => AnnealSchedule::Logarithmic { t0: num(t0)? },
            ["constant", beta] => AnnealSchedule::Constant { beta: num(beta)? },
            _ => bail!("unknown schedule {:?}", self.schedule),
        };
        schedule.validate()?;
        Ok(schedule)
    }

    fn iterations(&self, n: usize) -> u64 {
        self.iterations.unwrap_or(self.sweeps * n as u64)
    }

    fn params(&self, n: usize, alphabet: usize, theta: f64) -> Result<MdParams> {
        Ok(MdParams {
            weights: self.weights()?,
            distortion: DistortionMeasure::hamming(alphabet),
            k: self.k,
            k1: self.k1,
            schedule: self.schedule()?,
            iterations: self.iterations(n),
            theta,
            seed: self.seed,
        })
    }
}

fn read_message(path: &Path) -> Result<MdMessage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    MdMessage::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            p,
            source,
            n,
            seed,
            out,
        } => {
            let spec = match (p, source) {
                (Some(p), None) => MarkovSourceSpec::symmetric_binary(p, n, seed),
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                _ => bail!("pass either --p or --source"),
            };
            write_sequence(&out, &generate_markov(&spec)?)?;
        }
        Command::Anneal {
            input,
            code,
            out_dir,
        } => {
            let x = read_sequence(&input)?;
            let params = code.params(x.len(), x.alphabet_size(), 0.5)?;
            let report = anneal(
                &x,
                &params.weights,
                &params.distortion,
                params.k,
                params.k1,
                &params.schedule,
                params.iterations,
                params.seed,
            )?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            write_sequence(&out_dir.join("x1.mdsq"), &report.y)?;
            write_sequence(&out_dir.join("x2.mdsq"), &report.z)?;
            write_sequence(&out_dir.join("x0.mdsq"), &report.w)?;
            let trace_path = out_dir.join("trace.csv");
            let mut w = csv::Writer::from_path(&trace_path)
                .with_context(|| format!("writing {}", trace_path.display()))?;
            w.write_record(["iteration", "hk_y", "hk_z", "hkk1_w", "d_y", "d_z", "d_w", "total"])?;
            for p in &report.trace {
                let e = p.energy;
                let mut row = vec![p.iteration.to_string()];
                row.extend([e.hk_y, e.hk_z, e.hkk1_w, e.d_y, e.d_z, e.d_w, e.total].map(|v| v.to_string()));
                w.write_record(row)?;
            }
            w.flush()?;
            println!("{}", serde_json::to_string_pretty(&report.energy)?);
        }
        Command::Encode {
            input,
            code,
            theta,
            m1,
            m2,
            report,
        } => {
            let x = read_sequence(&input)?;
            let params = code.params(x.len(), x.alphabet_size(), theta)?;
            let enc = md_encode(&x, &params)?;
            write_bytes(&m1, &enc.m1.to_bytes())?;
            write_bytes(&m2, &enc.m2.to_bytes())?;
            let summary = serde_json::json!({
                "energy": enc.anneal.energy,
                "rates": enc.rates,
                "rate_check": check_rate_lower_bounds(&enc.rates),
            });
            let text = serde_json::to_string_pretty(&summary)?;
            match report {
                Some(path) => write_bytes(&path, text.as_bytes())?,
                None => println!("{text}"),
            }
        }
        Command::Decode1 { m1, out } => {
            write_sequence(&out, &md_decode_side(&read_message(&m1)?, 1)?)?;
        }
        Command::Decode2 { m2, out } => {
            write_sequence(&out, &md_decode_side(&read_message(&m2)?, 2)?)?;
        }
        Command::Decode0 { m1, m2, out } => {
            let x0 = md_decode_central(&read_message(&m1)?, &read_message(&m2)?)?;
            write_sequence(&out, &x0)?;
        }
        Command::Experiment {
            config,
            records,
            trace,
        } => {
            let mut cfg = ExperimentConfig::from_json_file(&config)?;
            if records.is_some() {
                cfg.output.records = records;
            }
            if trace.is_some() {
                cfg.output.trace = trace;
            }
            let result = run_experiment(&cfg)?;
            for r in result.records() {
                println!(
                    "seed {:>4}  total {:.4}  H1 {:.4}  H2 {:.4}  H0 {:.4}  D1 {:.4}  D2 {:.4}  D0 {:.4}  R1 {:.4}  R2 {:.4}",
                    r.seed, r.total, r.hk_y, r.hk_z, r.hkk1_w, r.d_y, r.d_z, r.d_w, r.r1, r.r2
                );
            }
            println!("median total {:.4}", result.median_of(|r| r.total));
        }
        Command::Sweep { config, frontier } => {
            let mut cfg = SweepConfig::from_json_file(&config)?;
            if frontier.is_some() {
                cfg.frontier = frontier;
            }
            let result = sweep(&cfg)?;
            for row in &result.rows {
                println!(
                    "point {:>3}  alpha1 {:<5} total {:.4}  D1 {:.4}  D2 {:.4}  D0 {:.4}",
                    row.point, row.alpha1, row.total, row.d_y, row.d_z, row.d_w
                );
            }
            for m in &result.monotonicity {
                println!(
                    "alpha1 {} -> {}: median D1 {:.4} -> {:.4} {}",
                    m.alpha1_from,
                    m.alpha1_to,
                    m.d1_from,
                    m.d1_to,
                    if m.within_band { "ok" } else { "above noise band" }
                );
            }
        }
    }
    Ok(())
}
