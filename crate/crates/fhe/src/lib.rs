//! A leveled BFV-style scheme over `Z_q[X]/(X^n + 1)` with one integer per
//! ciphertext, RNS arithmetic and NTT-based products.
//!
//! ```
//! use std::sync::Arc;
//! use iris_he_fhe::{keygen, Context, Evaluator, SchemeParams};
//! use rand::SeedableRng;
//!
//! let ctx = Arc::new(Context::new(SchemeParams::insecure(1024)).unwrap());
//! let keys = keygen(&ctx, 1).unwrap();
//! let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2);
//! let a = keys.public.encrypt(3, &mut rng).unwrap();
//! let b = keys.public.encrypt(4, &mut rng).unwrap();
//! let eval = Evaluator::new(&keys.relin);
//! let c = eval.mul(&a, &b).unwrap();
//! assert_eq!(keys.secret.decrypt(&c).unwrap(), 12);
//! ```

pub mod arith;
pub mod ciphertext;
pub mod context;
pub mod error;
pub mod evaluator;
pub mod keyio;
pub mod keys;
pub mod noise;
pub mod ntt;
pub mod params;

pub use ciphertext::Ciphertext;
pub use context::Context;
pub use error::{FheError, Result};
pub use evaluator::{Evaluator, LiftedCiphertext, ProductAccumulator};
pub use keyio::{load_keys, save_key_material, save_public_keys, LoadedKeys};
pub use keys::{check_feasible, keygen, keygen_with_rng, KeyMaterial, PublicKey, RelinKey, SecretKey};
pub use noise::NoiseModel;
pub use params::{SchemeParams, MAX_COUNT, MAX_DEPTH};
