use std::collections::HashSet;
use std::sync::{Arc, OnceLock};

use iris_he_fhe::arith::{ntt_primes, Modulus};
use iris_he_fhe::ntt::{schoolbook_negacyclic, NttTable};
use iris_he_fhe::{
    keygen, Ciphertext, Context, Evaluator, FheError, KeyMaterial, SchemeParams, MAX_COUNT,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

struct Setup {
    ctx: Arc<Context>,
    keys: KeyMaterial,
    eval: Evaluator,
}

fn setup(params: SchemeParams, seed: u64) -> Setup {
    let ctx = Arc::new(Context::new(params).unwrap());
    let keys = keygen(&ctx, seed).unwrap();
    let eval = Evaluator::new(&keys.relin);
    Setup { ctx, keys, eval }
}

fn test_profile() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| setup(SchemeParams::test_profile(), 100))
}

fn small() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| setup(SchemeParams::insecure(256), 101))
}

fn enc(s: &Setup, m: u64, rng: &mut ChaCha20Rng) -> Ciphertext {
    s.keys.public.encrypt(m, rng).unwrap()
}

#[test]
fn encrypt_decrypt_roundtrip_at_default_parameters() {
    let s = setup(SchemeParams::default_128(), 1);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let t = s.ctx.t();
    for m in [0, 1, 5, t - 1] {
        assert_eq!(s.keys.secret.decrypt(&enc(&s, m, &mut rng)).unwrap(), m);
    }
    for _ in 0..1000 {
        let m = rng.gen_range(0..t);
        assert_eq!(s.keys.secret.decrypt(&enc(&s, m, &mut rng)).unwrap(), m);
    }
    let fresh = enc(&s, 1, &mut rng);
    assert!(s.keys.secret.noise_budget(&fresh).unwrap() >= 60.0);
    assert!(fresh.noise_budget_bits() >= 60.0);
}

#[test]
fn plaintext_out_of_range_is_rejected() {
    let s = small();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let t = s.ctx.t();
    assert!(matches!(
        s.keys.public.encrypt(t, &mut rng),
        Err(FheError::PlaintextRange { .. })
    ));
    let c = enc(s, 1, &mut rng);
    assert!(s.eval.mul_plain(&c, t as i64).is_err());
}

#[test]
fn addition_examples() {
    let s = small();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let sk = &s.keys.secret;
    let a = enc(s, 3, &mut rng);
    let b = enc(s, 4, &mut rng);
    assert_eq!(sk.decrypt(&s.eval.add(&a, &b).unwrap()).unwrap(), 7);
    let z = enc(s, 0, &mut rng);
    assert_eq!(sk.decrypt(&s.eval.add(&z, &z).unwrap()).unwrap(), 0);
    assert_eq!(sk.decrypt(&s.eval.add(&a, &z).unwrap()).unwrap(), 3);
    assert_eq!(sk.decrypt(&s.eval.sub(&a, &b).unwrap()).unwrap(), s.ctx.t() - 1);
}

#[test]
fn addition_costs_at_most_one_bit() {
    let s = test_profile();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let sk = &s.keys.secret;
    for _ in 0..20 {
        let a = enc(s, rng.gen_range(0..100), &mut rng);
        let b = enc(s, rng.gen_range(0..100), &mut rng);
        let sum = s.eval.add(&a, &b).unwrap();
        let before = sk.noise_budget(&a).unwrap().min(sk.noise_budget(&b).unwrap());
        assert!(sk.noise_budget(&sum).unwrap() >= before - 1.0);
        assert!(sum.noise_budget_bits() >= a.noise_budget_bits().min(b.noise_budget_bits()) - 1.0);
    }
}

#[test]
fn sum_of_full_template_count_does_not_wrap() {
    let s = test_profile();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let one = enc(s, 1, &mut rng);
    let mut acc = enc(s, 1, &mut rng);
    for i in 1..MAX_COUNT {
        // fresh encryptions for the first few, then the same one to keep it quick
        let term = if i < 64 { enc(s, 1, &mut rng) } else { one.clone() };
        s.eval.add_assign(&mut acc, &term).unwrap();
    }
    assert_eq!(s.keys.secret.decrypt(&acc).unwrap(), MAX_COUNT);
}

#[test]
fn plaintext_scalar_examples() {
    let s = small();
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let sk = &s.keys.secret;
    let one = enc(s, 1, &mut rng);
    let two = s.eval.add(&one, &enc(s, 1, &mut rng)).unwrap();
    let xor_leg = s.eval.add(&two, &s.eval.mul_plain(&one, -2).unwrap()).unwrap();
    assert_eq!(sk.decrypt(&xor_leg).unwrap(), 0);
    let m = enc(s, 1234, &mut rng);
    assert_eq!(sk.decrypt(&s.eval.mul_plain(&m, 1).unwrap()).unwrap(), 1234);
    assert_eq!(sk.decrypt(&s.eval.mul_plain(&enc(s, 7, &mut rng), 3).unwrap()).unwrap(), 21);
    let t = s.ctx.t();
    // negative scalars act as t - |k|
    assert_eq!(sk.decrypt(&s.eval.mul_plain(&enc(s, 5, &mut rng), -1).unwrap()).unwrap(), t - 5);
    assert_eq!(sk.decrypt(&s.eval.add_plain(&enc(s, 5, &mut rng), -7).unwrap()).unwrap(), t - 2);
    assert_eq!(sk.decrypt(&s.eval.add_plain(&enc(s, 5, &mut rng), 9).unwrap()).unwrap(), 14);
    let neg = s.eval.negate(&enc(s, 5, &mut rng)).unwrap();
    assert_eq!(sk.decrypt(&neg).unwrap(), t - 5);
}

#[test]
fn multiplication_matches_plaintext_products() {
    let s = test_profile();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let sk = &s.keys.secret;
    assert_eq!(sk.decrypt(&s.eval.mul(&enc(s, 3, &mut rng), &enc(s, 4, &mut rng)).unwrap()).unwrap(), 12);
    for _ in 0..1000 {
        let a = rng.gen_range(0..=100u64);
        let b = rng.gen_range(0..=100u64);
        let c = s.eval.mul(&enc(s, a, &mut rng), &enc(s, b, &mut rng)).unwrap();
        assert_eq!(c.parts().len(), 2);
        assert_eq!(c.level(), 1);
        assert_eq!(sk.decrypt(&c).unwrap(), a * b);
    }
}

#[test]
fn depth_two_boolean_chain_is_exact() {
    let s = test_profile();
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let sk = &s.keys.secret;
    for bits in 0..8u64 {
        let (a, b, c) = (bits & 1, (bits >> 1) & 1, (bits >> 2) & 1);
        let ab = s.eval.mul(&enc(s, a, &mut rng), &enc(s, b, &mut rng)).unwrap();
        assert_eq!(sk.decrypt(&ab).unwrap(), a * b);
        let abc = s.eval.mul(&ab, &enc(s, c, &mut rng)).unwrap();
        assert_eq!(abc.level(), 2);
        assert_eq!(sk.decrypt(&abc).unwrap(), a * b * c);
        let err = s.eval.mul(&abc, &enc(s, 1, &mut rng)).unwrap_err();
        assert!(matches!(err, FheError::DepthExceeded { max: 2 }));
    }
}

#[test]
fn fresh_budget_matches_analytic_estimate() {
    // Phase error of a fresh encryption is e*u + e0 + e1*s with ternary u, s:
    // per-coefficient variance sigma^2 (2n/3 + 1 + 2n/3). The largest of n
    // such magnitudes sits near sigma_v * sqrt(2 ln 2n).
    for params in [SchemeParams::test_profile(), SchemeParams::insecure(4096)] {
        let n = params.n as f64;
        let sigma_v = params.sigma * (4.0 * n / 3.0 + 1.0).sqrt();
        let expected_max = sigma_v * (2.0 * (2.0 * n).ln()).sqrt();
        let log2_q: f64 = params.q_primes.iter().map(|&p| (p as f64).log2()).sum();
        let expected = log2_q - 1.0 - (params.t as f64).log2() - expected_max.log2();
        let s = setup(params, 10);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for m in [0, 1, 40_000] {
            let got = s.keys.secret.noise_budget(&enc(&s, m, &mut rng)).unwrap();
            assert!((got - expected).abs() <= 2.0, "budget {got} vs expected {expected}");
        }
    }
}

#[test]
fn budget_decreases_along_a_circuit() {
    let s = test_profile();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let sk = &s.keys.secret;
    let a = enc(s, 1, &mut rng);
    let b = enc(s, 1, &mut rng);
    let ab = s.eval.mul(&a, &b).unwrap();
    let before = sk.noise_budget(&a).unwrap();
    let after = sk.noise_budget(&ab).unwrap();
    assert!(after < before, "{after} !< {before}");
    assert!(ab.noise_budget_bits() < a.noise_budget_bits());
    // the tracked estimate is a lower bound on the measured budget
    assert!(ab.noise_budget_bits() <= after);
    let abc = s.eval.mul(&ab, &enc(s, 1, &mut rng)).unwrap();
    assert!(sk.noise_budget(&abc).unwrap() < after);
    assert!(abc.noise_budget_bits() <= sk.noise_budget(&abc).unwrap());
}

#[test]
fn decrypt_refuses_when_budget_is_gone() {
    let s = small();
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let k = (s.ctx.t() / 2) as i64;
    let mut c = enc(s, 1, &mut rng);
    let mut steps = 0;
    while c.noise_budget_bits() > 0.0 {
        c = s.eval.mul_plain(&c, k).unwrap();
        steps += 1;
        assert!(steps < 50);
    }
    assert!(matches!(
        s.keys.secret.decrypt(&c),
        Err(FheError::DecryptionUnreliable(_))
    ));
}

#[test]
fn multiplication_checks_noise_before_computing() {
    let s = small();
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let k = (s.ctx.t() / 2) as i64;
    let mut c = enc(s, 1, &mut rng);
    // spend most of the budget on scalar products, then ask for a product
    while c.noise_budget_bits() > 30.0 {
        c = s.eval.mul_plain(&c, k).unwrap();
    }
    let err = s.eval.mul(&c, &c).unwrap_err();
    assert!(matches!(err, FheError::NoiseBudgetExhausted { .. }), "{err:?}");
}

#[test]
fn ciphertexts_from_other_parameters_are_refused() {
    let a = small();
    let b = setup(SchemeParams::insecure(512), 15);
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    let ca = enc(a, 1, &mut rng);
    let cb = enc(&b, 1, &mut rng);
    assert!(matches!(a.eval.add(&ca, &cb), Err(FheError::ParamsMismatch)));
    assert!(matches!(a.keys.secret.decrypt(&cb), Err(FheError::ParamsMismatch)));
    let bytes = cb.to_bytes();
    assert!(matches!(Ciphertext::from_bytes(&a.ctx, &bytes), Err(FheError::ParamsMismatch)));
}

#[test]
fn serialization_roundtrip_and_tamper_detection() {
    let s = test_profile();
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let fresh = enc(s, 77, &mut rng);
    let product = s.eval.mul(&fresh, &enc(s, 2, &mut rng)).unwrap();
    for c in [&fresh, &product] {
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), Ciphertext::serialized_len(&s.ctx, 2));
        let back = Ciphertext::from_bytes(&s.ctx, &bytes).unwrap();
        assert_eq!(&back, c);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.level(), c.level());
        assert_eq!(back.noise_bound(), c.noise_bound());
    }
    let mut bytes = fresh.to_bytes();
    bytes[8] ^= 1;
    assert!(matches!(Ciphertext::from_bytes(&s.ctx, &bytes), Err(FheError::ParamsMismatch)));
    let bytes = fresh.to_bytes();
    assert!(matches!(
        Ciphertext::from_bytes(&s.ctx, &bytes[..bytes.len() - 1]),
        Err(FheError::Malformed(_))
    ));
    // one bit of plaintext costs tens of kilobytes on the wire
    assert!(bytes.len() > 2 * 2048 * 8);
}

#[test]
fn encryption_is_probabilistic() {
    let s = test_profile();
    let mut rng = ChaCha20Rng::seed_from_u64(18);
    let zero = enc(s, 0, &mut rng).to_bytes();
    let one = enc(s, 1, &mut rng).to_bytes();
    assert_ne!(zero, one);
    let mut seen = HashSet::new();
    for i in 0..10_000u64 {
        let c = enc(s, i & 1, &mut rng);
        let digest: [u8; 32] = Sha256::digest(c.to_bytes()).into();
        assert!(seen.insert(digest), "repeated ciphertext at trial {i}");
    }
}

#[test]
fn ntt_agrees_with_schoolbook_for_small_rings() {
    let mut rng = ChaCha20Rng::seed_from_u64(19);
    let mut trials = 0;
    for n in [2usize, 4, 8, 16, 32, 64] {
        for bits in [30u32, 50, 61] {
            let p = ntt_primes(bits, 1, 2 * n as u64, &[])[0];
            let m = Modulus::new(p);
            let table = NttTable::new(m, n).unwrap();
            for _ in 0..56 {
                let a: Vec<u64> = (0..n).map(|_| rng.gen_range(0..p)).collect();
                let b: Vec<u64> = (0..n).map(|_| rng.gen_range(0..p)).collect();
                assert_eq!(table.multiply(&a, &b), schoolbook_negacyclic(&a, &b, &m));
                trials += 1;
            }
        }
    }
    assert!(trials >= 1000);
}

#[test]
fn evaluation_needs_only_public_material() {
    use iris_he_fhe::keyio::{read_keys, write_public_keys};
    let s = small();
    let mut bytes = Vec::new();
    write_public_keys(&mut bytes, &s.keys.public, &s.keys.relin).unwrap();
    let public = read_keys(&mut bytes.as_slice()).unwrap();
    assert!(public.secret.is_none());
    let mut rng = ChaCha20Rng::seed_from_u64(20);
    let a = public.public.encrypt(6, &mut rng).unwrap();
    let b = public.public.encrypt(7, &mut rng).unwrap();
    // contexts rebuilt from the file carry the same parameter hash
    let a = Ciphertext::from_bytes(&s.ctx, &a.to_bytes()).unwrap();
    let b = Ciphertext::from_bytes(&s.ctx, &b.to_bytes()).unwrap();
    let eval = Evaluator::new(&public.relin);
    let a = Ciphertext::from_bytes(eval.context(), &a.to_bytes()).unwrap();
    let b = Ciphertext::from_bytes(eval.context(), &b.to_bytes()).unwrap();
    let prod = eval.mul(&a, &b).unwrap();
    let prod = Ciphertext::from_bytes(&s.ctx, &prod.to_bytes()).unwrap();
    assert_eq!(s.keys.secret.decrypt(&prod).unwrap(), 42);
}

#[test]
fn accumulated_products_match_separate_products() {
    let s = test_profile();
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let mut acc = s.eval.accumulator();
    let mut expected = 0;
    for _ in 0..40 {
        let a = rng.gen_range(0..2u64);
        let b = rng.gen_range(0..2u64);
        expected += a * b;
        let la = s.eval.lift(&enc(s, a, &mut rng)).unwrap();
        let lb = s.eval.lift(&enc(s, b, &mut rng)).unwrap();
        acc.add_product(&la, &lb).unwrap();
    }
    let out = acc.finish().unwrap();
    assert_eq!(out.level(), 1);
    assert_eq!(s.keys.secret.decrypt(&out).unwrap(), expected);
    assert_eq!(s.keys.secret.decrypt(&s.eval.accumulator().finish().unwrap()).unwrap(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homomorphism_holds(a in 0u64..65_537, b in 0u64..65_537, seed in any::<u64>()) {
        let s = small();
        let t = s.ctx.t();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = enc(s, a, &mut rng);
        let cb = enc(s, b, &mut rng);
        let sk = &s.keys.secret;
        prop_assert_eq!(sk.decrypt(&s.eval.add(&ca, &cb).unwrap()).unwrap(), (a + b) % t);
        prop_assert_eq!(sk.decrypt(&s.eval.mul(&ca, &cb).unwrap()).unwrap(), a * b % t);
    }

    #[test]
    fn scalar_homomorphism_holds(a in 0u64..65_537, k in -65_536i64..65_537, seed in any::<u64>()) {
        let s = small();
        let t = s.ctx.t() as i128;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = enc(s, a, &mut rng);
        let sk = &s.keys.secret;
        let prod = (a as i128 * k as i128).rem_euclid(t) as u64;
        let sum = (a as i128 + k as i128).rem_euclid(t) as u64;
        prop_assert_eq!(sk.decrypt(&s.eval.mul_plain(&ca, k).unwrap()).unwrap(), prod);
        prop_assert_eq!(sk.decrypt(&s.eval.add_plain(&ca, k).unwrap()).unwrap(), sum);
    }

    #[test]
    fn serialization_is_identity(m in 0u64..65_537, seed in any::<u64>()) {
        let s = small();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let c = enc(s, m, &mut rng);
        let bytes = c.to_bytes();
        let back = Ciphertext::from_bytes(&s.ctx, &bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
