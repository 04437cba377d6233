//! Stored template pairs with known masked counts. The files under
//! `tests/fixtures` are checked against the deterministic construction
//! below; set `IRIS_HE_WRITE_FIXTURES=1` to regenerate them.

use std::path::PathBuf;

use iris_he_core::matching::{fractional_hd, match_with_shifts, MatchPolicy};
use iris_he_core::template::{BITS, COLS, ROWS};
use iris_he_core::IrisTemplate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(name, D, N, seed)`
const PAIRS: [(&str, u32, u32, u64); 2] = [("genuine", 1914, 11761, 11), ("impostor", 4736, 10071, 12)];

/// Random codes; exactly `n` positions valid in both masks, `d` of them
/// differing. Every other position is valid in at most one mask.
fn construct(d: u32, n: u32, seed: u64) -> (IrisTemplate, IrisTemplate) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..BITS).collect();
    order.shuffle(&mut rng);
    let mut ca = vec![0u8; BITS];
    let mut cb = vec![0u8; BITS];
    let mut ma = vec![0u8; BITS];
    let mut mb = vec![0u8; BITS];
    for (rank, &i) in order.iter().enumerate() {
        ca[i] = rng.gen_range(0..2);
        let rank = rank as u32;
        if rank < n {
            ma[i] = 1;
            mb[i] = 1;
            cb[i] = if rank < d { 1 - ca[i] } else { ca[i] };
        } else {
            cb[i] = rng.gen_range(0..2);
            match rng.gen_range(0..3) {
                0 => ma[i] = 1,
                1 => mb[i] = 1,
                _ => {}
            }
        }
    }
    (
        IrisTemplate::from_bits(ROWS, COLS, &ca, &ma).unwrap(),
        IrisTemplate::from_bits(ROWS, COLS, &cb, &mb).unwrap(),
    )
}

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

#[test]
fn fixtures_match_construction() {
    let write = std::env::var_os("IRIS_HE_WRITE_FIXTURES").is_some();
    for (name, d, n, seed) in PAIRS {
        let (a, b) = construct(d, n, seed);
        let pa = dir().join(format!("{name}_a.iristpl"));
        let pb = dir().join(format!("{name}_b.iristpl"));
        if write {
            std::fs::create_dir_all(dir()).unwrap();
            a.save(&pa).unwrap();
            b.save(&pb).unwrap();
        }
        assert_eq!(std::fs::read(&pa).unwrap(), a.to_bytes(), "{name}");
        assert_eq!(std::fs::read(&pb).unwrap(), b.to_bytes(), "{name}");
        let (fa, fb) = (IrisTemplate::load(&pa).unwrap(), IrisTemplate::load(&pb).unwrap());
        assert_eq!(fractional_hd(&fa, &fb, 512).unwrap(), (d, n));
        // The counts are also the best over the shift window.
        let r = match_with_shifts(&fa, &fb, &MatchPolicy::default()).unwrap();
        assert_eq!((r.numerator, r.denominator, r.best_shift), (d, n, 0), "{name}");
    }
}
