//! Masked fractional Hamming distance and rotational search.

use crate::error::{IrisError, Result};
use crate::template::IrisTemplate;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchPolicy {
    pub threshold: f64,
    pub shift_window: u32,
    pub min_valid_bits: u32,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self {
            threshold: 0.35,
            shift_window: 15,
            min_valid_bits: 512,
        }
    }
}

impl MatchPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(IrisError::InvalidArgument(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        if self.shift_window > 511 {
            return Err(IrisError::InvalidArgument(format!(
                "shift window {} exceeds 511",
                self.shift_window
            )));
        }
        if self.min_valid_bits == 0 {
            return Err(IrisError::InvalidArgument("min_valid_bits must be positive".into()));
        }
        Ok(())
    }

    /// Shifts in evaluation order: 0, -1, +1, -2, +2, ...
    pub fn shifts(&self) -> Vec<i32> {
        let w = self.shift_window as i32;
        let mut out = vec![0];
        for s in 1..=w {
            out.push(-s);
            out.push(s);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchResult {
    pub hd: f64,
    pub numerator: u32,
    pub denominator: u32,
    pub best_shift: i32,
    pub accept: bool,
}

impl MatchResult {
    pub fn decision(&self) -> &'static str {
        if self.accept {
            "accept"
        } else {
            "reject"
        }
    }
}

fn check_layout(a: &IrisTemplate, b: &IrisTemplate) -> Result<()> {
    if !a.same_layout(b) {
        return Err(IrisError::Template(format!(
            "layouts differ: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// `(popcount((a ^ b) & ma & mb), popcount(ma & mb))`.
pub fn hd_counts(a: &IrisTemplate, b: &IrisTemplate) -> Result<(u32, u32)> {
    check_layout(a, b)?;
    let mut d = 0;
    let mut n = 0;
    let words = a
        .code_words()
        .iter()
        .zip(b.code_words())
        .zip(a.mask_words().iter().zip(b.mask_words()));
    for ((ca, cb), (ma, mb)) in words {
        let m = ma & mb;
        d += ((ca ^ cb) & m).count_ones();
        n += m.count_ones();
    }
    Ok((d, n))
}

/// Counts with the minimum-overlap guard.
pub fn fractional_hd(a: &IrisTemplate, b: &IrisTemplate, min_valid_bits: u32) -> Result<(u32, u32)> {
    let (d, n) = hd_counts(a, b)?;
    if n < min_valid_bits {
        return Err(IrisError::InsufficientOverlap {
            valid: n,
            required: min_valid_bits,
        });
    }
    Ok((d, n))
}

/// Picks the smallest `D/N` from `(shift, D, N)` candidates supplied in
/// evaluation order; earlier candidates win ties. Candidates with too few
/// valid bits are ignored.
pub fn select_best(
    candidates: impl IntoIterator<Item = (i32, u32, u32)>,
    policy: &MatchPolicy,
) -> Result<MatchResult> {
    let mut best: Option<(i32, u32, u32)> = None;
    let mut max_valid = 0;
    for (k, d, n) in candidates {
        max_valid = max_valid.max(n);
        if n < policy.min_valid_bits {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, bd, bn)) => (d as u64) * (bn as u64) < (bd as u64) * (n as u64),
        };
        if better {
            best = Some((k, d, n));
        }
    }
    let (k, d, n) = best.ok_or(IrisError::InsufficientOverlap {
        valid: max_valid,
        required: policy.min_valid_bits,
    })?;
    let hd = d as f64 / n as f64;
    Ok(MatchResult {
        hd,
        numerator: d,
        denominator: n,
        best_shift: k,
        accept: hd < policy.threshold,
    })
}

/// Minimum distance over `rotate(query, k)` against `enrolled` for every
/// shift in the window.
pub fn match_with_shifts(
    query: &IrisTemplate,
    enrolled: &IrisTemplate,
    policy: &MatchPolicy,
) -> Result<MatchResult> {
    policy.validate()?;
    check_layout(query, enrolled)?;
    let mut counts = Vec::with_capacity(2 * policy.shift_window as usize + 1);
    for k in policy.shifts() {
        let (d, n) = hd_counts(&query.rotate(k as i64), enrolled)?;
        counts.push((k, d, n));
    }
    select_best(counts, policy)
}
