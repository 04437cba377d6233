use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "iris-he", version, about = "Iris templates with cleartext and encrypted matching")]
pub struct Cli {
    /// key=value file presetting flags of the chosen command.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build templates from eye images and add them to a store.
    Enroll(EnrollArgs),
    /// Compare two templates.
    Match(MatchArgs),
    /// All-pairs evaluation of a store.
    Eval(EvalArgs),
    /// Time cleartext against encrypted matching for one pair.
    Bench(BenchArgs),
    /// Generate a synthetic template store.
    Synth(SynthArgs),
    /// Generate a key file.
    Keygen(KeygenArgs),
}

#[derive(Args, Debug, Clone)]
pub struct PolicyArgs {
    #[arg(long, default_value_t = 0.35)]
    pub threshold: f64,
    #[arg(long, default_value_t = 15)]
    pub shift_window: u32,
    #[arg(long, default_value_t = 512)]
    pub min_valid_bits: u32,
}

#[derive(Args, Debug)]
pub struct EnrollArgs {
    /// Image files or directories laid out as <subject>/<L|R>/<image>.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub store: PathBuf,
    /// Id for a single image, as subject/eye/sample.
    #[arg(long)]
    pub id: Option<String>,
    /// Lines of `<image path> <id>`; paths relative to the manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// IRISMASK sidecar for a single image, replacing segmentation.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Also write encrypted templates under the key given by --key.
    #[arg(long)]
    pub encrypt: bool,
    #[arg(long)]
    pub key: Option<PathBuf>,
    /// Directory name for the ciphertexts; defaults to the key file stem.
    #[arg(long)]
    pub key_name: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Clear,
    Fhe,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    /// Query: template file, or id when --store is given.
    pub query: String,
    /// Enrolled: template file, IRISCT file, or store id.
    pub enrolled: String,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Clear)]
    pub mode: Mode,
    #[arg(long)]
    pub key: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the phase breakdown (fhe mode) as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Output directory for pairs.csv, summary.csv and roc.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    pub query: String,
    pub enrolled: String,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Evaluate only this many bits and extrapolate to the full template.
    #[arg(long)]
    pub bit_limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// BenchReport CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub subjects: usize,
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
    /// Expected genuine disagreement rate, in [0, 0.5).
    #[arg(long, default_value_t = 0.15)]
    pub flip_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub mask_density: f64,
    #[arg(long, default_value_t = 0.05)]
    pub mask_dropout: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub rows: usize,
    #[arg(long, default_value_t = 512)]
    pub cols: usize,
}

#[derive(Args, Debug)]
pub struct KeygenArgs {
    /// Key file with the secret key.
    #[arg(long)]
    pub out: PathBuf,
    /// Evaluation-only copy without the secret key.
    #[arg(long)]
    pub public_out: Option<PathBuf>,
    /// `default`, `test`, `insecure-<n>`, or a parameter file.
    #[arg(long, default_value = "default")]
    pub params: String,
    /// Deterministic keys; OS entropy when absent.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Inserts `--key value` for each config entry the chosen subcommand
/// accepts and the command line does not already set.
pub fn apply_config(args: Vec<String>, config_text: &str) -> Result<Vec<String>, String> {
    let cmd = Cli::command();
    let Some(sub_pos) = args
        .iter()
        .skip(1)
        .position(|a| cmd.get_subcommands().any(|s| s.get_name() == a))
        .map(|p| p + 1)
    else {
        return Ok(args);
    };
    let sub = cmd
        .find_subcommand(&args[sub_pos])
        .expect("position found by name");
    let known_anywhere = |k: &str| {
        cmd.get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(k)))
    };
    let mut inject = Vec::new();
    for (n, raw) in config_text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", n + 1))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        if !known_anywhere(&k) || k == "config" {
            return Err(format!("config line {}: unknown key '{k}'", n + 1));
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(k.as_str())) else {
            continue;
        };
        let flag = format!("--{k}");
        let already = args
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if already {
            continue;
        }
        if matches!(arg.get_action(), clap::ArgAction::SetTrue) {
            match v {
                "true" | "1" | "yes" => inject.push(flag),
                "false" | "0" | "no" => {}
                other => return Err(format!("config line {}: '{other}' is not a boolean", n + 1)),
            }
        } else {
            inject.push(flag);
            inject.push(v.to_string());
        }
    }
    let mut out = args;
    out.splice(sub_pos + 1..sub_pos + 1, inject);
    Ok(out)
}
