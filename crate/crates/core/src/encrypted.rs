//! Bitwise-encrypted templates and the masked Hamming-distance protocol.
//!
//! The client encrypts every bit of the code and mask. For each shift in the
//! window it encrypts the shifted query; the server evaluates, per bit,
//! `(x + y - 2xy) * (m * m')` and `m * m'`, sums both over the template, and
//! returns the two ciphertexts. The client decrypts `D` and `N` and divides.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use iris_he_fhe::{Ciphertext, Context, Evaluator, FheError, KeyMaterial, LiftedCiphertext, ProductAccumulator, PublicKey, SecretKey};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{io_err, IrisError, Result};
use crate::matching::{select_best, MatchPolicy, MatchResult};
use crate::template::IrisTemplate;

pub const CT_FILE_MAGIC: &[u8; 10] = b"IRISCT v1\n";

/// Code and mask ciphertexts of one template, in row-major bit order.
#[derive(Clone, Debug)]
pub struct EncryptedTemplate {
    rows: usize,
    cols: usize,
    params_hash: [u8; 32],
    code: Vec<Ciphertext>,
    mask: Vec<Ciphertext>,
}

impl EncryptedTemplate {
    pub fn new(rows: usize, cols: usize, code: Vec<Ciphertext>, mask: Vec<Ciphertext>) -> Result<Self> {
        if code.len() != rows * cols || mask.len() != rows * cols || code.is_empty() {
            return Err(IrisError::Template(format!(
                "{} code and {} mask ciphertexts for a {rows}x{cols} layout",
                code.len(),
                mask.len()
            )));
        }
        let params_hash = *code[0].params_hash();
        if code.iter().chain(&mask).any(|c| c.params_hash() != &params_hash) {
            return Err(FheError::ParamsMismatch.into());
        }
        Ok(Self {
            rows,
            cols,
            params_hash,
            code,
            mask,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn params_hash(&self) -> &[u8; 32] {
        &self.params_hash
    }

    pub fn code(&self) -> &[Ciphertext] {
        &self.code
    }

    pub fn mask(&self) -> &[Ciphertext] {
        &self.mask
    }

    pub fn decrypt(&self, sk: &SecretKey) -> Result<IrisTemplate> {
        let mut t = IrisTemplate::zeros(self.rows, self.cols)?;
        for i in 0..self.len() {
            let (r, c) = t.position(i);
            let code = decrypt_bit(sk, &self.code[i])?;
            let mask = decrypt_bit(sk, &self.mask[i])?;
            t.set(r, c, code, mask);
        }
        Ok(t)
    }

    /// Serialized size of all ciphertexts.
    pub fn ciphertext_bytes(&self) -> u64 {
        self.code.iter().chain(&self.mask).map(|c| c.to_bytes().len() as u64).sum()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_ct_header(w, &self.params_hash, self.rows, self.cols).map_err(FheError::from)?;
        for (c, m) in self.code.iter().zip(&self.mask) {
            write_ct(w, c).map_err(FheError::from)?;
            write_ct(w, m).map_err(FheError::from)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        self.write_to(&mut w)?;
        w.flush().map_err(io_err(path))
    }

    pub fn read_from(r: impl Read + Send, ctx: &Arc<Context>) -> Result<Self> {
        let mut src = StreamSource::new(r, ctx)?;
        let (rows, cols) = src.layout();
        let pairs = src.next_chunk(rows * cols)?;
        src.expect_end()?;
        let (code, mask) = pairs.into_iter().unzip();
        Self::new(rows, cols, code, mask)
    }

    pub fn load(path: &Path, ctx: &Arc<Context>) -> Result<Self> {
        let f = File::open(path).map_err(io_err(path))?;
        Self::read_from(BufReader::new(f), ctx)
    }
}

fn decrypt_bit(sk: &SecretKey, c: &Ciphertext) -> Result<bool> {
    match sk.decrypt(c)? {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(IrisError::Template(format!("ciphertext decrypts to {v}, not a bit"))),
    }
}

fn write_ct_header(w: &mut impl Write, hash: &[u8; 32], rows: usize, cols: usize) -> std::io::Result<()> {
    w.write_all(CT_FILE_MAGIC)?;
    w.write_all(hash)?;
    w.write_all(&(rows as u16).to_le_bytes())?;
    w.write_all(&(cols as u16).to_le_bytes())?;
    w.write_all(&((rows * cols) as u32).to_le_bytes())
}

fn write_ct(w: &mut impl Write, c: &Ciphertext) -> std::io::Result<()> {
    let bytes = c.to_bytes();
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(&bytes)
}

/// Encrypts each code and mask bit separately under `pk`.
pub fn encrypt_template<R: RngCore + CryptoRng>(
    t: &IrisTemplate,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<EncryptedTemplate> {
    let mut code = Vec::with_capacity(t.len());
    let mut mask = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let (r, c) = t.position(i);
        code.push(pk.encrypt(t.code_bit(r, c) as u64, rng)?);
        mask.push(pk.encrypt(t.mask_bit(r, c) as u64, rng)?);
    }
    EncryptedTemplate::new(t.rows(), t.cols(), code, mask)
}

/// Encrypts straight to an `IRISCT` file without holding the ciphertexts in
/// memory. Returns the file size.
pub fn encrypt_template_to_file<R: RngCore + CryptoRng>(
    t: &IrisTemplate,
    pk: &PublicKey,
    rng: &mut R,
    path: &Path,
) -> Result<u64> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let hash = *pk.context().params_hash();
    let mut total = (CT_FILE_MAGIC.len() + 32 + 8) as u64;
    write_ct_header(&mut w, &hash, t.rows(), t.cols()).map_err(io_err(path))?;
    for i in 0..t.len() {
        let (r, c) = t.position(i);
        for bit in [t.code_bit(r, c), t.mask_bit(r, c)] {
            let ct = pk.encrypt(bit as u64, rng)?;
            write_ct(&mut w, &ct).map_err(io_err(path))?;
            total += 4 + ct.to_bytes().len() as u64;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(total)
}

/// Sequential supplier of enrolled `(code, mask)` ciphertext pairs.
pub trait CiphertextSource: Send {
    fn layout(&self) -> (usize, usize);
    fn params_hash(&self) -> [u8; 32];
    /// The next `count` bits (fewer at the end).
    fn next_chunk(&mut self, count: usize) -> Result<Vec<(Ciphertext, Ciphertext)>>;
}

pub struct MemorySource<'a> {
    t: &'a EncryptedTemplate,
    pos: usize,
}

impl<'a> MemorySource<'a> {
    pub fn new(t: &'a EncryptedTemplate) -> Self {
        Self { t, pos: 0 }
    }
}

impl CiphertextSource for MemorySource<'_> {
    fn layout(&self) -> (usize, usize) {
        (self.t.rows, self.t.cols)
    }

    fn params_hash(&self) -> [u8; 32] {
        self.t.params_hash
    }

    fn next_chunk(&mut self, count: usize) -> Result<Vec<(Ciphertext, Ciphertext)>> {
        let end = (self.pos + count).min(self.t.len());
        let out = (self.pos..end)
            .map(|i| (self.t.code[i].clone(), self.t.mask[i].clone()))
            .collect();
        self.pos = end;
        Ok(out)
    }
}

/// Reads an `IRISCT` stream incrementally.
pub struct StreamSource<R: Read> {
    r: R,
    ctx: Arc<Context>,
    rows: usize,
    cols: usize,
    hash: [u8; 32],
    pos: usize,
}

pub type FileSource = StreamSource<BufReader<File>>;

impl FileSource {
    pub fn open(path: &Path, ctx: &Arc<Context>) -> Result<Self> {
        let f = File::open(path).map_err(io_err(path))?;
        StreamSource::new(BufReader::with_capacity(1 << 20, f), ctx)
    }
}

impl<R: Read> StreamSource<R> {
    pub fn new(mut r: R, ctx: &Arc<Context>) -> Result<Self> {
        let mut magic = [0u8; 10];
        r.read_exact(&mut magic).map_err(FheError::from)?;
        if &magic != CT_FILE_MAGIC {
            return Err(IrisError::Template("not an IRISCT v1 stream".into()));
        }
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash).map_err(FheError::from)?;
        if &hash != ctx.params_hash() {
            return Err(FheError::ParamsMismatch.into());
        }
        let mut head = [0u8; 8];
        r.read_exact(&mut head).map_err(FheError::from)?;
        let rows = u16::from_le_bytes([head[0], head[1]]) as usize;
        let cols = u16::from_le_bytes([head[2], head[3]]) as usize;
        let count = u32::from_le_bytes([head[4], head[5], head[6], head[7]]) as usize;
        if rows == 0 || cols == 0 || count != rows * cols {
            return Err(IrisError::Template(format!(
                "IRISCT layout {rows}x{cols} with {count} entries"
            )));
        }
        Ok(Self {
            r,
            ctx: ctx.clone(),
            rows,
            cols,
            hash,
            pos: 0,
        })
    }

    fn read_ct(&mut self) -> Result<Ciphertext> {
        let mut len = [0u8; 4];
        self.r.read_exact(&mut len).map_err(FheError::from)?;
        let len = u32::from_le_bytes(len) as usize;
        let max = Ciphertext::serialized_len(&self.ctx, 3);
        if len > max {
            return Err(FheError::Malformed(format!("ciphertext length {len}")).into());
        }
        let mut buf = vec![0u8; len];
        self.r.read_exact(&mut buf).map_err(FheError::from)?;
        Ok(Ciphertext::from_bytes(&self.ctx, &buf)?)
    }

    fn expect_end(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        if self.r.read(&mut b).map_err(FheError::from)? != 0 {
            return Err(IrisError::Template("trailing bytes after IRISCT data".into()));
        }
        Ok(())
    }
}

impl<R: Read + Send> CiphertextSource for StreamSource<R> {
    fn layout(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn params_hash(&self) -> [u8; 32] {
        self.hash
    }

    fn next_chunk(&mut self, count: usize) -> Result<Vec<(Ciphertext, Ciphertext)>> {
        let end = (self.pos + count).min(self.rows * self.cols);
        let mut out = Vec::with_capacity(end - self.pos);
        while self.pos < end {
            let c = self.read_ct()?;
            let m = self.read_ct()?;
            out.push((c, m));
            self.pos += 1;
        }
        Ok(out)
    }
}

/// Encrypts a plaintext template lazily as bits are requested. Stands in for
/// an enrolled template that would not fit in memory.
pub struct EncryptingSource<'a> {
    t: &'a IrisTemplate,
    pk: &'a PublicKey,
    rng: ChaCha20Rng,
    pos: usize,
    pub seconds: f64,
}

impl<'a> EncryptingSource<'a> {
    pub fn new(t: &'a IrisTemplate, pk: &'a PublicKey, seed: u64) -> Self {
        Self {
            t,
            pk,
            rng: ChaCha20Rng::seed_from_u64(seed),
            pos: 0,
            seconds: 0.0,
        }
    }
}

impl CiphertextSource for EncryptingSource<'_> {
    fn layout(&self) -> (usize, usize) {
        (self.t.rows(), self.t.cols())
    }

    fn params_hash(&self) -> [u8; 32] {
        *self.pk.context().params_hash()
    }

    fn next_chunk(&mut self, count: usize) -> Result<Vec<(Ciphertext, Ciphertext)>> {
        let start = Instant::now();
        let end = (self.pos + count).min(self.t.len());
        let mut out = Vec::with_capacity(end - self.pos);
        for i in self.pos..end {
            let (r, c) = self.t.position(i);
            let code = self.pk.encrypt(self.t.code_bit(r, c) as u64, &mut self.rng)?;
            let mask = self.pk.encrypt(self.t.mask_bit(r, c) as u64, &mut self.rng)?;
            out.push((code, mask));
        }
        self.pos = end;
        self.seconds += start.elapsed().as_secs_f64();
        Ok(out)
    }
}

/// `a + b - 2ab`: XOR of two encrypted bits, one multiplicative level.
pub fn homomorphic_xor(eval: &Evaluator, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    let ab = eval.mul(a, b)?;
    xor_from_product(eval, a, b, &ab)
}

fn xor_from_product(eval: &Evaluator, a: &Ciphertext, b: &Ciphertext, ab: &Ciphertext) -> Result<Ciphertext> {
    let sum = eval.add(a, b)?;
    Ok(eval.add(&sum, &eval.mul_plain(ab, -2)?)?)
}

/// Encrypted differing-bit count `d` and valid-bit count `n` at one shift.
#[derive(Clone, Debug)]
pub struct EncryptedScore {
    pub d: Ciphertext,
    pub n: Ciphertext,
    pub shift: i32,
}

struct ShiftState<'e> {
    shift: i32,
    d: ProductAccumulator<'e>,
    n: Option<Ciphertext>,
}

/// Server side of the protocol. Holds only the evaluation key and absorbs
/// the template in chunks so that neither side needs all ciphertexts in
/// memory at once.
pub struct MatchServer<'e> {
    eval: &'e Evaluator,
    states: Vec<ShiftState<'e>>,
    bits: usize,
    /// Seconds spent lifting enrolled ciphertexts.
    pub prepare_seconds: f64,
    /// Seconds spent in per-shift evaluation.
    pub evaluate_seconds: f64,
}

impl<'e> MatchServer<'e> {
    pub fn new(eval: &'e Evaluator, shifts: &[i32]) -> Self {
        Self {
            eval,
            states: shifts
                .iter()
                .map(|&shift| ShiftState {
                    shift,
                    d: eval.accumulator(),
                    n: None,
                })
                .collect(),
            bits: 0,
            prepare_seconds: 0.0,
            evaluate_seconds: 0.0,
        }
    }

    pub fn shifts(&self) -> Vec<i32> {
        self.states.iter().map(|s| s.shift).collect()
    }

    pub fn bits_absorbed(&self) -> usize {
        self.bits
    }

    /// Absorbs one chunk: `enrolled[i]` pairs with `queries[s][i]` for the
    /// `s`-th shift.
    pub fn absorb(
        &mut self,
        enrolled: &[(Ciphertext, Ciphertext)],
        queries: &[Vec<(Ciphertext, Ciphertext)>],
    ) -> Result<()> {
        if queries.len() != self.states.len() || queries.iter().any(|q| q.len() != enrolled.len()) {
            return Err(IrisError::InvalidArgument(
                "query chunk does not match shifts and enrolled chunk".into(),
            ));
        }
        let eval = self.eval;
        let start = Instant::now();
        let lifted: Vec<(LiftedCiphertext, LiftedCiphertext)> = enrolled
            .par_iter()
            .map(|(y, m)| Ok((eval.lift(y)?, eval.lift(m)?)))
            .collect::<Result<_>>()?;
        self.prepare_seconds += start.elapsed().as_secs_f64();

        let start = Instant::now();
        self.states
            .par_iter_mut()
            .zip(queries.par_iter())
            .try_for_each(|(state, query)| -> Result<()> {
                for (((y, _), (ly, lm)), (x, mq)) in enrolled.iter().zip(&lifted).zip(query) {
                    let xy = eval.mul_lifted(&eval.lift(x)?, ly)?;
                    let xor = xor_from_product(eval, x, y, &xy)?;
                    let mm = eval.mul_lifted(&eval.lift(mq)?, lm)?;
                    state.d.add_product(&eval.lift(&xor)?, &eval.lift(&mm)?)?;
                    match &mut state.n {
                        Some(n) => eval.add_assign(n, &mm)?,
                        None => state.n = Some(mm),
                    }
                }
                Ok(())
            })?;
        self.evaluate_seconds += start.elapsed().as_secs_f64();
        self.bits += enrolled.len();
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<EncryptedScore>> {
        self.states
            .into_par_iter()
            .map(|s| {
                let n = s
                    .n
                    .ok_or_else(|| IrisError::InvalidArgument("no bits absorbed".into()))?;
                Ok(EncryptedScore {
                    d: s.d.finish()?,
                    n,
                    shift: s.shift,
                })
            })
            .collect()
    }
}

/// Server evaluation for a query already encrypted at shift `k`.
pub fn encrypted_hd_at_shift(
    eval: &Evaluator,
    query: &EncryptedTemplate,
    enrolled: &EncryptedTemplate,
    k: i32,
) -> Result<EncryptedScore> {
    if query.rows != enrolled.rows || query.cols != enrolled.cols {
        return Err(IrisError::Template("encrypted layouts differ".into()));
    }
    if query.params_hash != enrolled.params_hash || &query.params_hash != eval.context().params_hash() {
        return Err(FheError::ParamsMismatch.into());
    }
    let pairs = |t: &EncryptedTemplate| -> Vec<(Ciphertext, Ciphertext)> {
        t.code.iter().cloned().zip(t.mask.iter().cloned()).collect()
    };
    let mut server = MatchServer::new(eval, &[k]);
    server.absorb(&pairs(enrolled), &[pairs(query)])?;
    Ok(server.finish()?.pop().expect("one shift"))
}

/// Decrypts `(D, N)` and checks `D <= N <= max_bits`.
pub fn decrypt_score(s: &EncryptedScore, sk: &SecretKey, max_bits: usize) -> Result<(u32, u32)> {
    let d = sk.decrypt(&s.d)?;
    let n = sk.decrypt(&s.n)?;
    if d > n || n > max_bits as u64 {
        return Err(IrisError::Evaluation(format!(
            "decrypted score D={d}, N={n} violates D <= N <= {max_bits}"
        )));
    }
    Ok((d as u32, n as u32))
}

/// Measured remaining noise budget of the weaker of the two ciphertexts.
pub fn score_budget(s: &EncryptedScore, sk: &SecretKey) -> Result<f64> {
    Ok(sk.noise_budget(&s.d)?.min(sk.noise_budget(&s.n)?))
}

#[derive(Clone, Debug)]
pub struct ProtocolOptions {
    /// Seeds the per-shift query encryption streams.
    pub seed: u64,
    /// Bits per round trip; derived from the ciphertext size when absent.
    pub chunk_bits: Option<usize>,
    /// Stop after this many bits (timing runs only; the scores are then
    /// partial).
    pub bit_limit: Option<usize>,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            chunk_bits: None,
            bit_limit: None,
        }
    }
}

/// Wall-clock seconds and bytes per protocol phase.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    /// Client: encrypting the shifted queries.
    pub encrypt_seconds: f64,
    /// Server: lifting enrolled ciphertexts into the product basis.
    pub prepare_seconds: f64,
    /// Server: per-bit circuit evaluation across all shifts.
    pub evaluate_seconds: f64,
    /// Server: closing each shift's accumulator (one relinearization).
    pub finalize_seconds: f64,
    /// Client: decrypting scores.
    pub decrypt_seconds: f64,
    /// Query ciphertext bytes sent to the server.
    pub query_bytes: u64,
    /// Enrolled ciphertext bytes read by the server.
    pub enrolled_bytes: u64,
    /// Score ciphertext bytes returned to the client.
    pub result_bytes: u64,
    pub bits: usize,
    pub shifts: usize,
}

impl PhaseTimings {
    pub fn total_seconds(&self) -> f64 {
        self.encrypt_seconds
            + self.prepare_seconds
            + self.evaluate_seconds
            + self.finalize_seconds
            + self.decrypt_seconds
    }

    /// `phase,seconds,bytes` rows.
    pub fn rows(&self) -> Vec<(&'static str, f64, u64)> {
        vec![
            ("encrypt", self.encrypt_seconds, self.query_bytes),
            ("prepare", self.prepare_seconds, self.enrolled_bytes),
            ("evaluate", self.evaluate_seconds, 0),
            ("finalize", self.finalize_seconds, self.result_bytes),
            ("decrypt", self.decrypt_seconds, 0),
            ("total", self.total_seconds(), self.query_bytes + self.result_bytes),
        ]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["phase", "seconds", "bytes"])?;
        for (p, s, b) in self.rows() {
            w.write_record([p.to_string(), format!("{s:.6}"), b.to_string()])?;
        }
        w.flush().map_err(io_err(path))
    }
}

/// Per-shift decrypted counts plus bookkeeping from one protocol run.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    /// `(shift, D, N)` in evaluation order.
    pub counts: Vec<(i32, u32, u32)>,
    pub timings: PhaseTimings,
    /// Smallest measured noise budget over all returned ciphertexts.
    pub min_budget_bits: f64,
}

fn default_chunk_bits(ctx: &Context, shifts: usize) -> usize {
    let ct = Ciphertext::serialized_len(ctx, 2);
    ((256usize << 20) / (shifts.max(1) * 2 * ct)).max(1)
}

/// Runs the full client/server exchange for the shifts of `policy`.
pub fn run_protocol(
    query: &IrisTemplate,
    enrolled: &mut dyn CiphertextSource,
    keys: &KeyMaterial,
    eval: &Evaluator,
    policy: &MatchPolicy,
    opts: &ProtocolOptions,
) -> Result<ProtocolRun> {
    policy.validate()?;
    let ctx = keys.public.context();
    if enrolled.params_hash() != *ctx.params_hash() || eval.context().params_hash() != ctx.params_hash() {
        return Err(FheError::ParamsMismatch.into());
    }
    if enrolled.layout() != (query.rows(), query.cols()) {
        return Err(IrisError::Template(format!(
            "query layout {}x{} does not match enrolled {:?}",
            query.rows(),
            query.cols(),
            enrolled.layout()
        )));
    }
    let shifts = policy.shifts();
    let total = opts.bit_limit.map_or(query.len(), |b| b.min(query.len()));
    let chunk = opts
        .chunk_bits
        .unwrap_or_else(|| default_chunk_bits(ctx, shifts.len()))
        .max(1);
    let ct_len = Ciphertext::serialized_len(ctx, 2) as u64;

    let rotated: Vec<IrisTemplate> = shifts.iter().map(|&k| query.rotate(k as i64)).collect();
    let mut rngs: Vec<ChaCha20Rng> = (0..shifts.len())
        .map(|s| {
            let mut r = ChaCha20Rng::seed_from_u64(opts.seed);
            r.set_stream(s as u64);
            r
        })
        .collect();

    let mut timings = PhaseTimings {
        bits: total,
        shifts: shifts.len(),
        ..PhaseTimings::default()
    };
    let mut server = MatchServer::new(eval, &shifts);
    let pk = &keys.public;
    let mut pos = 0;
    while pos < total {
        let take = chunk.min(total - pos);
        let enrolled_chunk = enrolled.next_chunk(take)?;
        if enrolled_chunk.len() != take {
            return Err(IrisError::Template("enrolled template ended early".into()));
        }
        let start = Instant::now();
        let queries: Vec<Vec<(Ciphertext, Ciphertext)>> = rotated
            .par_iter()
            .zip(rngs.par_iter_mut())
            .map(|(t, rng)| {
                (pos..pos + take)
                    .map(|i| {
                        let (r, c) = t.position(i);
                        Ok((
                            pk.encrypt(t.code_bit(r, c) as u64, rng)?,
                            pk.encrypt(t.mask_bit(r, c) as u64, rng)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        timings.encrypt_seconds += start.elapsed().as_secs_f64();
        server.absorb(&enrolled_chunk, &queries)?;
        pos += take;
    }
    let prepare = server.prepare_seconds;
    let evaluate = server.evaluate_seconds;
    let start = Instant::now();
    let scores = server.finish()?;
    timings.finalize_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut counts = Vec::with_capacity(scores.len());
    let mut min_budget = f64::INFINITY;
    for s in &scores {
        let (d, n) = decrypt_score(s, &keys.secret, total)?;
        counts.push((s.shift, d, n));
    }
    timings.decrypt_seconds = start.elapsed().as_secs_f64();
    for s in &scores {
        min_budget = min_budget.min(score_budget(s, &keys.secret)?);
    }
    timings.prepare_seconds = prepare;
    timings.evaluate_seconds = evaluate;
    timings.query_bytes = shifts.len() as u64 * total as u64 * 2 * ct_len;
    timings.enrolled_bytes = total as u64 * 2 * ct_len;
    timings.result_bytes = scores
        .iter()
        .map(|s| (s.d.to_bytes().len() + s.n.to_bytes().len()) as u64)
        .sum();
    Ok(ProtocolRun {
        counts,
        timings,
        min_budget_bits: min_budget,
    })
}

/// Encrypted 1:1 match over the whole template: the client learns only the
/// per-shift counts and applies the same selection as cleartext matching.
pub fn protocol_match(
    query: &IrisTemplate,
    enrolled: &mut dyn CiphertextSource,
    keys: &KeyMaterial,
    policy: &MatchPolicy,
    opts: &ProtocolOptions,
) -> Result<(MatchResult, PhaseTimings)> {
    if opts.bit_limit.is_some() {
        return Err(IrisError::InvalidArgument(
            "a bit limit yields partial scores; use run_protocol".into(),
        ));
    }
    let eval = Evaluator::new(&keys.relin);
    let run = run_protocol(query, enrolled, keys, &eval, policy, opts)?;
    let result = select_best(run.counts.iter().copied(), policy)?;
    Ok((result, run.timings))
}
