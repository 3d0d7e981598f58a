//! Seeded random streams and complex Gaussian sampling.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream that is a
//! pure function of `(seed, stream)`. Trial `t` of a Monte-Carlo batch always
//! uses stream `t`, so any single trial can be replayed in isolation and the
//! results do not depend on how work is split across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha12Rng;

/// RNG for stream `stream` of base seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a sub-seed for an independent purpose (e.g. shadowing vs placement).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One CN(0, 1) sample: independent real and imaginary parts, each N(0, 1/2).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| complex_normal(rng)).collect()
}

/// A uniformly chosen unit-energy QPSK symbol.
pub fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let b: u8 = rng.random_range(0..4);
    qpsk_point(b)
}

pub fn qpsk_point(index: u8) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match index & 3 {
        0 => Complex64::new(s, s),
        1 => Complex64::new(-s, s),
        2 => Complex64::new(-s, -s),
        _ => Complex64::new(s, -s),
    }
}

/// Nearest QPSK point to `z` (by quadrant).
pub fn qpsk_decide(z: Complex64) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(s.copysign(z.re), s.copysign(z.im))
}
