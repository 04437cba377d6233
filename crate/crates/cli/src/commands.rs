use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use iris_he_core::bench::{run_bench, BenchOptions};
use iris_he_core::encrypted::{
    encrypt_template_to_file, protocol_match, CiphertextSource, EncryptingSource, FileSource, ProtocolOptions,
};
use iris_he_core::metrics::{evaluate_database, print_summary, write_pairs_csv, write_roc_csv, write_summary_csv};
use iris_he_core::pipeline::{template_from_path, PipelineConfig};
use iris_he_core::store::TemplateStore;
use iris_he_core::synth::{synth_templates, SynthConfig};
use iris_he_core::{IrisError, IrisTemplate, MatchPolicy, TemplateId};
use iris_he_fhe::{keygen, keygen_with_rng, load_keys, save_key_material, save_public_keys, Context, SchemeParams};
use rand::rngs::OsRng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::args::{BenchArgs, EnrollArgs, EvalArgs, KeygenArgs, MatchArgs, Mode, PolicyArgs, SynthArgs};

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Segmentation(String),
    Crypto(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Segmentation(_) => 3,
            Failure::Crypto(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Segmentation(m) | Failure::Crypto(m) => m,
        }
    }
}

impl From<IrisError> for Failure {
    fn from(e: IrisError) -> Self {
        match e {
            IrisError::Fhe(_) => Failure::Crypto(e.to_string()),
            IrisError::Segmentation { .. } => Failure::Segmentation(e.to_string()),
            e => Failure::Input(e.to_string()),
        }
    }
}

impl From<iris_he_fhe::FheError> for Failure {
    fn from(e: iris_he_fhe::FheError) -> Self {
        Failure::Crypto(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn policy(p: &PolicyArgs) -> Result<MatchPolicy, Failure> {
    let policy = MatchPolicy {
        threshold: p.threshold,
        shift_window: p.shift_window,
        min_valid_bits: p.min_valid_bits,
    };
    policy.validate()?;
    Ok(policy)
}

fn is_image(p: &Path) -> bool {
    let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    matches!(ext.as_deref(), Some("png" | "pgm" | "pnm" | "jpg" | "jpeg" | "bmp"))
}

fn collect_images(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_images(&p, out)?;
        } else if is_image(&p) {
            out.push(p);
        }
    }
    Ok(())
}

/// `<subject>/<L|R>/<file>`: the last two directories and the file stem.
fn id_from_layout(path: &Path) -> Result<TemplateId, Failure> {
    let name = |p: Option<&Path>| p.and_then(|p| p.file_name()).and_then(|n| n.to_str()).map(String::from);
    let sample = path.file_stem().and_then(|s| s.to_str()).map(String::from);
    let eye_dir = path.parent();
    let subject_dir = eye_dir.and_then(|p| p.parent());
    match (name(subject_dir), name(eye_dir), sample) {
        (Some(s), Some(e), Some(f)) => format!("{s}/{e}/{f}")
            .parse()
            .map_err(|e: IrisError| Failure::Input(format!("{}: {e}", path.display()))),
        _ => Err(Failure::Input(format!(
            "{}: cannot derive an id; use --id or --manifest",
            path.display()
        ))),
    }
}

fn read_manifest(path: &Path) -> Result<Vec<(PathBuf, TemplateId)>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(p), Some(id), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Failure::Input(format!("{}:{}: expected '<path> <id>'", path.display(), n + 1)));
        };
        out.push((base.join(p), id.parse()?));
    }
    Ok(out)
}

pub fn enroll(a: &EnrollArgs) -> CmdResult {
    let mut jobs: Vec<(PathBuf, TemplateId)> = Vec::new();
    if let Some(m) = &a.manifest {
        jobs = read_manifest(m)?;
    } else {
        let mut images = Vec::new();
        for input in &a.inputs {
            if input.is_dir() {
                collect_images(input, &mut images)?;
            } else if input.is_file() {
                images.push(input.clone());
            } else {
                return Err(Failure::Input(format!("{}: no such file or directory", input.display())));
            }
        }
        if let Some(id) = &a.id {
            if images.len() != 1 {
                return Err(Failure::Input("--id needs exactly one image".into()));
            }
            jobs.push((images[0].clone(), id.parse()?));
        } else {
            for p in images {
                let id = id_from_layout(&p)?;
                jobs.push((p, id));
            }
        }
    }
    if jobs.is_empty() {
        return Err(Failure::Input("no images found".into()));
    }
    if a.mask.is_some() && jobs.len() != 1 {
        return Err(Failure::Input("--mask needs exactly one image".into()));
    }
    let keys = match (a.encrypt, &a.key) {
        (true, Some(k)) => Some(load_keys(k)?),
        (true, None) => return Err(Failure::Input("--encrypt needs --key".into())),
        (false, _) => None,
    };
    let mut store = TemplateStore::open(&a.store)?;

    let cfg = PipelineConfig::default();
    let mut done = Vec::new();
    let mut failed = 0usize;
    for (path, id) in &jobs {
        match template_from_path(path, a.mask.as_deref(), &cfg) {
            Ok((t, _)) => done.push((id.clone(), t)),
            Err(e @ IrisError::Segmentation { .. }) => {
                eprintln!("skipped {}: {e}", path.display());
                failed += 1;
            }
            Err(e) => return Err(Failure::Input(format!("{}: {e}", path.display()))),
        }
    }
    store.insert_all(&done)?;
    println!("enrolled {} templates into {}", done.len(), a.store.display());

    if let Some(keys) = keys {
        let name = a
            .key_name
            .clone()
            .or_else(|| a.key.as_ref().and_then(|k| k.file_stem()).and_then(|s| s.to_str()).map(String::from))
            .unwrap_or_else(|| "key".into());
        let mut rng = match a.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_rng(OsRng).map_err(|e| Failure::Crypto(e.to_string()))?,
        };
        for (id, t) in &done {
            let rel = TemplateStore::ciphertext_path(id, &name);
            let abs = a.store.join(&rel);
            if let Some(dir) = abs.parent() {
                std::fs::create_dir_all(dir)?;
            }
            let bytes = encrypt_template_to_file(t, &keys.public, &mut rng, &abs)?;
            store.set_ciphertext(id, rel)?;
            println!("encrypted {id}: {bytes} bytes");
        }
    }
    if failed > 0 {
        return Err(Failure::Segmentation(format!("{failed} of {} images failed segmentation", jobs.len())));
    }
    Ok(())
}

enum Operand {
    Plain(IrisTemplate),
    Cipher(PathBuf),
}

fn resolve(arg: &str, store: Option<&TemplateStore>, want_cipher: bool) -> Result<Operand, Failure> {
    if let Some(s) = store {
        if let Ok(id) = arg.parse::<TemplateId>() {
            if let Some(e) = s.entry(&id) {
                if want_cipher {
                    if let Some(c) = &e.ciphertext {
                        return Ok(Operand::Cipher(s.root().join(c)));
                    }
                }
                return Ok(Operand::Plain(s.load(&id)?));
            }
        }
    }
    let p = PathBuf::from(arg);
    if want_cipher && p.extension().is_some_and(|e| e == "irisct") {
        return Ok(Operand::Cipher(p));
    }
    Ok(Operand::Plain(IrisTemplate::load(&p)?))
}

fn plain(op: Operand, arg: &str) -> Result<IrisTemplate, Failure> {
    match op {
        Operand::Plain(t) => Ok(t),
        Operand::Cipher(_) => Err(Failure::Input(format!("{arg}: expected a plaintext template"))),
    }
}

fn print_result(mode: &str, r: &iris_he_core::MatchResult, seconds: f64) {
    println!("mode: {mode}");
    println!("hd: {:.6}", r.hd);
    println!("numerator: {}", r.numerator);
    println!("denominator: {}", r.denominator);
    println!("best_shift: {}", r.best_shift);
    println!("decision: {}", r.decision());
    println!("seconds: {seconds:.6}");
}

pub fn match_cmd(a: &MatchArgs) -> CmdResult {
    let policy = policy(&a.policy)?;
    let store = a.store.as_deref().map(TemplateStore::open).transpose()?;
    let query = plain(resolve(&a.query, store.as_ref(), false)?, &a.query)?;
    match a.mode {
        Mode::Clear => {
            let enrolled = plain(resolve(&a.enrolled, store.as_ref(), false)?, &a.enrolled)?;
            let start = Instant::now();
            let r = iris_he_core::match_with_shifts(&query, &enrolled, &policy)?;
            print_result("clear", &r, start.elapsed().as_secs_f64());
        }
        Mode::Fhe => {
            let key = a.key.as_ref().ok_or_else(|| Failure::Input("fhe mode needs --key".into()))?;
            let keys = load_keys(key)?.into_material()?;
            let opts = ProtocolOptions {
                seed: a.seed.unwrap_or(0),
                ..ProtocolOptions::default()
            };
            let enrolled = resolve(&a.enrolled, store.as_ref(), true)?;
            let plain_enrolled;
            let mut source: Box<dyn CiphertextSource + '_> = match enrolled {
                Operand::Cipher(p) => Box::new(FileSource::open(&p, keys.public.context())?),
                Operand::Plain(t) => {
                    plain_enrolled = t;
                    Box::new(EncryptingSource::new(&plain_enrolled, &keys.public, opts.seed ^ 0x5eed))
                }
            };
            let start = Instant::now();
            let (r, t) = protocol_match(&query, source.as_mut(), &keys, &policy, &opts)?;
            print_result("fhe", &r, start.elapsed().as_secs_f64());
            for (phase, s, b) in t.rows() {
                println!("phase {phase}: {s:.6} s, {b} bytes");
            }
            if let Some(out) = &a.out {
                t.write_csv(out)?;
            }
        }
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> CmdResult {
    let policy = policy(&a.policy)?;
    let store = TemplateStore::open(&a.store)?;
    let templates = store.load_all()?;
    let (report, pairs) = evaluate_database(&templates, &policy)?;
    std::fs::create_dir_all(&a.out)?;
    write_pairs_csv(&a.out.join("pairs.csv"), &pairs)?;
    write_summary_csv(&a.out.join("summary.csv"), &report)?;
    write_roc_csv(&a.out.join("roc.csv"), &report)?;
    let mut out = std::io::stdout().lock();
    print_summary(&mut out, &report)?;
    out.flush()?;
    Ok(())
}

pub fn bench(a: &BenchArgs) -> CmdResult {
    let policy = policy(&a.policy)?;
    let store = a.store.as_deref().map(TemplateStore::open).transpose()?;
    let query = plain(resolve(&a.query, store.as_ref(), false)?, &a.query)?;
    let enrolled = plain(resolve(&a.enrolled, store.as_ref(), false)?, &a.enrolled)?;
    let keys = load_keys(&a.key)?.into_material()?;
    let opts = BenchOptions {
        repetitions: a.repetitions,
        bit_limit: a.bit_limit,
        seed: a.seed,
        chunk_bits: None,
    };
    let report = run_bench(&query, &enrolled, &keys, &policy, &opts)?;
    for (k, v) in report.rows() {
        println!("{k}: {v}");
    }
    if let Some(out) = &a.out {
        report.write_csv(out)?;
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> CmdResult {
    let cfg = SynthConfig {
        subjects: a.subjects,
        samples: a.samples,
        flip_rate: a.flip_rate,
        mask_density: a.mask_density,
        mask_dropout: a.mask_dropout,
        seed: a.seed,
        rows: a.rows,
        cols: a.cols,
    };
    let items = synth_templates(&cfg)?;
    let mut store = TemplateStore::open(&a.store)?;
    store.insert_all(&items)?;
    println!("wrote {} templates to {}", items.len(), a.store.display());
    Ok(())
}

fn parse_params(spec: &str) -> Result<SchemeParams, Failure> {
    match spec {
        "default" => Ok(SchemeParams::default_128()),
        "test" => Ok(SchemeParams::test_profile()),
        s if s.starts_with("insecure-") => {
            let n = s["insecure-".len()..]
                .parse()
                .map_err(|_| Failure::Input(format!("bad ring dimension in '{s}'")))?;
            Ok(SchemeParams::insecure(n))
        }
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{path}: {e}")))?;
            Ok(SchemeParams::from_config(&text)?)
        }
    }
}

pub fn keygen_cmd(a: &KeygenArgs) -> CmdResult {
    let params = parse_params(&a.params)?;
    let ctx = Arc::new(Context::new(params)?);
    let keys = match a.seed {
        Some(s) => keygen(&ctx, s)?,
        None => keygen_with_rng(&ctx, &mut OsRng)?,
    };
    save_key_material(&a.out, &keys)?;
    if let Some(p) = &a.public_out {
        save_public_keys(p, &keys.public, &keys.relin)?;
    }
    let p = ctx.params();
    println!(
        "n={} log2(q)={:.1} t={} security={} written to {}",
        ctx.n(),
        p.log2_q(),
        ctx.t(),
        p.security_level,
        a.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_from_directory_layout() {
        let id = id_from_layout(Path::new("/data/casia/042/L/S1042L03.jpg")).unwrap();
        assert_eq!(id.to_string(), "042/L/S1042L03");
        assert!(id_from_layout(Path::new("/data/042/X/a.png")).is_err());
    }

    #[test]
    fn exit_codes() {
        let seg = IrisError::Segmentation {
            reason: "x".into(),
            best: None,
        };
        assert_eq!(Failure::from(seg).exit_code(), 3);
        assert_eq!(Failure::from(IrisError::Fhe(iris_he_fhe::FheError::ParamsMismatch)).exit_code(), 4);
        assert_eq!(Failure::from(IrisError::Template("t".into())).exit_code(), 2);
    }
}
