//! Cleartext versus encrypted matching cost for one template pair.

use std::path::Path;
use std::time::Instant;

use iris_he_fhe::{Ciphertext, Evaluator, KeyMaterial};

use crate::encrypted::{run_protocol, EncryptingSource, PhaseTimings, ProtocolOptions};
use crate::error::{io_err, IrisError, Result};
use crate::matching::{match_with_shifts, select_best, MatchPolicy, MatchResult};
use crate::template::IrisTemplate;

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub repetitions: usize,
    /// Evaluate only this many bits per shift and extrapolate linearly.
    pub bit_limit: Option<usize>,
    pub seed: u64,
    pub chunk_bits: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repetitions: 3,
            bit_limit: None,
            seed: 0,
            chunk_bits: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub cleartext_match_seconds: f64,
    /// Full-template encrypted match time; extrapolated when
    /// `bits_evaluated < total_bits`.
    pub encrypted_match_seconds: f64,
    pub overhead_ratio: f64,
    /// Client-side query encryption within the encrypted match.
    pub encrypt_seconds: f64,
    pub decrypt_seconds: f64,
    /// Serialized code and mask ciphertexts of one template.
    pub ciphertext_bytes_per_template: u64,
    pub plaintext_bytes_per_template: u64,
    pub bits_evaluated: usize,
    pub total_bits: usize,
    pub shifts: usize,
    pub repetitions: usize,
    pub ring_dimension: usize,
    /// Median phase breakdown of the measured (not extrapolated) runs.
    pub phases: PhaseTimings,
    /// Encrypted result, present only for full-template runs.
    pub encrypted_result: Option<MatchResult>,
    pub cleartext_result: MatchResult,
    pub hardware: String,
}

impl BenchReport {
    pub fn extrapolated(&self) -> bool {
        self.bits_evaluated < self.total_bits
    }

    pub fn rows(&self) -> Vec<(String, String)> {
        let rows = vec![
            ("cleartext_match_seconds", format!("{:.9}", self.cleartext_match_seconds)),
            ("encrypted_match_seconds", format!("{:.6}", self.encrypted_match_seconds)),
            ("overhead_ratio", format!("{:.3}", self.overhead_ratio)),
            ("encrypt_seconds", format!("{:.6}", self.encrypt_seconds)),
            ("decrypt_seconds", format!("{:.6}", self.decrypt_seconds)),
            ("ciphertext_bytes_per_template", self.ciphertext_bytes_per_template.to_string()),
            ("plaintext_bytes_per_template", self.plaintext_bytes_per_template.to_string()),
            ("bits_evaluated", self.bits_evaluated.to_string()),
            ("total_bits", self.total_bits.to_string()),
            ("extrapolated", self.extrapolated().to_string()),
            ("shifts", self.shifts.to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("ring_dimension", self.ring_dimension.to_string()),
            ("cleartext_hd", format!("{:.6}", self.cleartext_result.hd)),
        ];
        let mut rows: Vec<(String, String)> = rows.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        if let Some(r) = &self.encrypted_result {
            rows.push(("encrypted_hd".into(), format!("{:.6}", r.hd)));
        }
        for (phase, s, b) in self.phases.rows() {
            rows.push((format!("phase_{phase}_seconds"), format!("{s:.6}")));
            rows.push((format!("phase_{phase}_bytes"), b.to_string()));
        }
        rows.push(("hardware".into(), self.hardware.clone()));
        rows
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["metric", "value"])?;
        for (k, v) in self.rows() {
            w.write_record([k.as_str(), v.as_str()])?;
        }
        w.flush().map_err(io_err(path))
    }
}

/// Short description of the machine for the report.
pub fn hardware_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{cpu}; {cores} hardware threads; {} worker threads; {}-{}",
        rayon::current_num_threads(),
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Seconds per cleartext match, averaged over enough calls to reach 50 ms.
fn time_cleartext(query: &IrisTemplate, enrolled: &IrisTemplate, policy: &MatchPolicy) -> Result<f64> {
    let mut calls = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..calls {
            std::hint::black_box(match_with_shifts(
                std::hint::black_box(query),
                std::hint::black_box(enrolled),
                policy,
            )?);
        }
        let s = start.elapsed().as_secs_f64();
        if s >= 0.05 || calls >= 1 << 20 {
            return Ok(s / calls as f64);
        }
        calls *= 4;
    }
}

/// Times both paths. The enrolled side is encrypted on the fly outside the
/// measured phases, as it would be at enrolment.
pub fn run_bench(
    query: &IrisTemplate,
    enrolled: &IrisTemplate,
    keys: &KeyMaterial,
    policy: &MatchPolicy,
    opts: &BenchOptions,
) -> Result<BenchReport> {
    if opts.repetitions == 0 {
        return Err(IrisError::InvalidArgument("repetitions must be positive".into()));
    }
    if !query.same_layout(enrolled) {
        return Err(IrisError::Template("bench pair layouts differ".into()));
    }
    let cleartext_result = match_with_shifts(query, enrolled, policy)?;
    let ctx = keys.public.context().clone();
    let eval = Evaluator::new(&keys.relin);
    let total = query.len();
    let bits = opts.bit_limit.map_or(total, |b| b.clamp(1, total));
    let scale = total as f64 / bits as f64;

    let mut clear = Vec::new();
    let mut runs = Vec::new();
    let mut encrypted_result = None;
    for rep in 0..opts.repetitions {
        clear.push(time_cleartext(query, enrolled, policy)?);
        let popts = ProtocolOptions {
            seed: opts.seed.wrapping_add(rep as u64),
            chunk_bits: opts.chunk_bits,
            bit_limit: (bits < total).then_some(bits),
        };
        let mut src = EncryptingSource::new(enrolled, &keys.public, opts.seed ^ 0x5eed);
        let run = run_protocol(query, &mut src, keys, &eval, policy, &popts)?;
        if bits == total {
            let r = select_best(run.counts.iter().copied(), policy)?;
            if encrypted_result.is_some_and(|e: MatchResult| e != r) {
                return Err(IrisError::Evaluation("encrypted result changed between repetitions".into()));
            }
            encrypted_result = Some(r);
        }
        runs.push(run.timings);
    }
    let pick = |f: fn(&PhaseTimings) -> f64| median(runs.iter().map(f).collect());
    let phases = PhaseTimings {
        encrypt_seconds: pick(|t| t.encrypt_seconds),
        prepare_seconds: pick(|t| t.prepare_seconds),
        evaluate_seconds: pick(|t| t.evaluate_seconds),
        finalize_seconds: pick(|t| t.finalize_seconds),
        decrypt_seconds: pick(|t| t.decrypt_seconds),
        ..runs[0].clone()
    };
    // Per-bit phases scale with the template length; closing and decrypting
    // the per-shift sums does not.
    let encrypted_match_seconds = median(
        runs.iter()
            .map(|t| {
                (t.encrypt_seconds + t.prepare_seconds + t.evaluate_seconds) * scale
                    + t.finalize_seconds
                    + t.decrypt_seconds
            })
            .collect(),
    );
    let cleartext_match_seconds = median(clear);
    let ct_len = Ciphertext::serialized_len(&ctx, 2) as u64;
    Ok(BenchReport {
        cleartext_match_seconds,
        encrypted_match_seconds,
        overhead_ratio: encrypted_match_seconds / cleartext_match_seconds,
        encrypt_seconds: phases.encrypt_seconds * scale,
        decrypt_seconds: phases.decrypt_seconds,
        ciphertext_bytes_per_template: 2 * total as u64 * ct_len,
        plaintext_bytes_per_template: query.to_bytes().len() as u64,
        bits_evaluated: bits,
        total_bits: total,
        shifts: policy.shifts().len(),
        repetitions: opts.repetitions,
        ring_dimension: ctx.n(),
        phases,
        encrypted_result,
        cleartext_result,
        hardware: hardware_note(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use iris_he_fhe::{keygen, Context, SchemeParams};
    use std::sync::Arc;

    fn pair() -> (IrisTemplate, IrisTemplate) {
        let t = crate::synth::synth_templates(&crate::synth::SynthConfig {
            subjects: 1,
            samples: 2,
            rows: 1,
            cols: 12,
            mask_density: 1.0,
            mask_dropout: 0.0,
            ..Default::default()
        })
        .unwrap();
        (t[0].1.clone(), t[1].1.clone())
    }

    #[test]
    fn report_arithmetic_and_determinism() {
        let ctx = Arc::new(Context::new(SchemeParams::insecure(256)).unwrap());
        let keys = keygen(&ctx, 3).unwrap();
        let (q, e) = pair();
        let policy = MatchPolicy {
            shift_window: 1,
            min_valid_bits: 4,
            ..Default::default()
        };
        let one = run_bench(&q, &e, &keys, &policy, &BenchOptions { repetitions: 1, ..Default::default() }).unwrap();
        let five = run_bench(&q, &e, &keys, &policy, &BenchOptions { repetitions: 5, ..Default::default() }).unwrap();
        for r in [&one, &five] {
            assert_eq!(r.overhead_ratio, r.encrypted_match_seconds / r.cleartext_match_seconds);
            assert_eq!(r.encrypted_result.unwrap(), r.cleartext_result);
            assert!(r.cleartext_match_seconds > 0.0 && r.encrypted_match_seconds > 0.0);
            assert!(r.ciphertext_bytes_per_template > r.plaintext_bytes_per_template);
            assert!(!r.extrapolated());
        }
        assert_eq!(one.encrypted_result, five.encrypted_result);

        let part = run_bench(
            &q,
            &e,
            &keys,
            &policy,
            &BenchOptions {
                repetitions: 1,
                bit_limit: Some(3),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(part.extrapolated() && part.encrypted_result.is_none());
        assert_eq!((part.bits_evaluated, part.total_bits), (3, 12));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        one.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("metric,value\n"));
        assert!(text.contains("overhead_ratio,"));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
