//! Seeded random streams.
//!
//! One root seed fans out into independent streams: stream `k` is the
//! ChaCha8 generator seeded with the root and switched to stream id `k`.
//! Callers assign a fixed counter per consumer, so adding a consumer never
//! perturbs the draws of existing ones.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub fn stream(root: u64, id: u64) -> Rng {
    let mut r = Rng::seed_from_u64(root);
    r.set_stream(id);
    r
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Standard normal draw.
pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(rng)
}
