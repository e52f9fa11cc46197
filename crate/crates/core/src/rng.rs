//! Seeded random streams. One run seed fans out into independent ChaCha
//! streams so that e.g. changing the preconditioner never perturbs the
//! sampled problem or the initial guess.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Problem = 1,
    InitialGuess = 2,
    Basis = 3,
    Power = 4,
}

/// Generator behind every stream.
pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Uniform random vector on `[-1, 1]^n`.
pub fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Initial guess for run `seed`.
pub fn initial_guess(seed: u64, n: usize) -> Vec<f64> {
    uniform_vector(&mut stream(seed, Stream::InitialGuess), n)
}
