//! Key files. A file carries its own parameter config so it can be loaded
//! without side information.
//!
//! Layout (little-endian): magic `b"BFVKEY\0\x01"`, u32 config length,
//! config text, u8 flag (1 = secret present), then the secret coefficients
//! as `i8` (if present), the public pair, the relinearization digit count
//! and pairs. Polynomials are raw u64 residues in NTT form.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::context::Context;
use crate::error::{FheError, Result};
use crate::keys::{KeyMaterial, PublicKey, RelinKey, SecretKey};
use crate::params::SchemeParams;

pub const KEY_MAGIC: [u8; 8] = *b"BFVKEY\0\x01";

/// Keys read back from a file. `secret` is absent for public-only files.
pub struct LoadedKeys {
    pub ctx: Arc<Context>,
    pub secret: Option<SecretKey>,
    pub public: PublicKey,
    pub relin: RelinKey,
}

impl LoadedKeys {
    pub fn into_material(self) -> Result<KeyMaterial> {
        let secret = self
            .secret
            .ok_or_else(|| FheError::Malformed("key file holds no secret key".into()))?;
        Ok(KeyMaterial {
            secret,
            public: self.public,
            relin: self.relin,
        })
    }
}

fn write_poly(w: &mut impl Write, poly: &[u64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(poly.len() * 8);
    for v in poly {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_poly(r: &mut impl Read, ctx: &Context) -> Result<Vec<u64>> {
    let mut buf = vec![0u8; ctx.q_len() * 8];
    r.read_exact(&mut buf)?;
    let n = ctx.n();
    let mut out = Vec::with_capacity(ctx.q_len());
    for (i, chunk) in buf.chunks_exact(8).enumerate() {
        let v = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if v >= ctx.q_moduli()[i / n].value() {
            return Err(FheError::Malformed("key residue out of range".into()));
        }
        out.push(v);
    }
    Ok(out)
}

fn write_impl(
    w: &mut impl Write,
    secret: Option<&SecretKey>,
    public: &PublicKey,
    relin: &RelinKey,
) -> Result<()> {
    let ctx = public.context();
    if relin.context().params_hash() != ctx.params_hash()
        || secret.is_some_and(|s| s.context().params_hash() != ctx.params_hash())
    {
        return Err(FheError::ParamsMismatch);
    }
    let config = ctx.params().to_config();
    w.write_all(&KEY_MAGIC)?;
    w.write_all(&(config.len() as u32).to_le_bytes())?;
    w.write_all(config.as_bytes())?;
    match secret {
        Some(sk) => {
            w.write_all(&[1])?;
            let bytes: Vec<u8> = sk.coefficients().iter().map(|&c| c as u8).collect();
            w.write_all(&bytes)?;
        }
        None => w.write_all(&[0])?,
    }
    let (pk0, pk1) = public.parts();
    write_poly(w, pk0)?;
    write_poly(w, pk1)?;
    w.write_all(&(relin.keys.len() as u32).to_le_bytes())?;
    for (b, a) in &relin.keys {
        write_poly(w, b)?;
        write_poly(w, a)?;
    }
    Ok(())
}

/// Writes secret, public and relinearization keys.
pub fn write_key_material(w: &mut impl Write, keys: &KeyMaterial) -> Result<()> {
    write_impl(w, Some(&keys.secret), &keys.public, &keys.relin)
}

/// Writes only the material the evaluating side needs.
pub fn write_public_keys(w: &mut impl Write, public: &PublicKey, relin: &RelinKey) -> Result<()> {
    write_impl(w, None, public, relin)
}

pub fn read_keys(r: &mut impl Read) -> Result<LoadedKeys> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != KEY_MAGIC {
        return Err(FheError::Malformed("bad key file magic".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    if len > 1 << 16 {
        return Err(FheError::Malformed(format!("config length {len}")));
    }
    let mut config = vec![0u8; len];
    r.read_exact(&mut config)?;
    let config = String::from_utf8(config)
        .map_err(|_| FheError::Malformed("config is not UTF-8".into()))?;
    let ctx = Arc::new(Context::new(SchemeParams::from_config(&config)?)?);
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let secret = match flag[0] {
        0 => None,
        1 => {
            let mut bytes = vec![0u8; ctx.n()];
            r.read_exact(&mut bytes)?;
            let s: Vec<i8> = bytes.into_iter().map(|b| b as i8).collect();
            if s.iter().any(|c| !(-1..=1).contains(c)) {
                return Err(FheError::Malformed("secret key is not ternary".into()));
            }
            Some(SecretKey::from_coefficients(ctx.clone(), s))
        }
        f => return Err(FheError::Malformed(format!("secret flag {f}"))),
    };
    let pk0 = read_poly(r, &ctx)?;
    let pk1 = read_poly(r, &ctx)?;
    let mut count = [0u8; 4];
    r.read_exact(&mut count)?;
    let count = u32::from_le_bytes(count) as usize;
    if count != ctx.relin_digits() {
        return Err(FheError::Malformed(format!(
            "expected {} relinearization pairs, found {count}",
            ctx.relin_digits()
        )));
    }
    let mut keys = Vec::with_capacity(count);
    for _ in 0..count {
        let b = read_poly(r, &ctx)?;
        let a = read_poly(r, &ctx)?;
        keys.push((b, a));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(FheError::Malformed("trailing bytes after key material".into()));
    }
    Ok(LoadedKeys {
        public: PublicKey::from_parts(ctx.clone(), pk0, pk1),
        relin: RelinKey::from_parts(ctx.clone(), keys),
        secret,
        ctx,
    })
}

pub fn save_key_material(path: &Path, keys: &KeyMaterial) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_key_material(&mut f, keys)?;
    f.flush()?;
    Ok(())
}

pub fn save_public_keys(path: &Path, public: &PublicKey, relin: &RelinKey) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_public_keys(&mut f, public, relin)?;
    f.flush()?;
    Ok(())
}

pub fn load_keys(path: &Path) -> Result<LoadedKeys> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_keys(&mut f)
}
