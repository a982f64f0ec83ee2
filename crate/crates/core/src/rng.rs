//! Seeded random streams.
//!
//! Every Monte-Carlo trial owns a ChaCha stream keyed by `(seed, trial, tag)`.
//! The key is mixed with SplitMix64, so streams for different tags or trials
//! are independent and adding a new tag never shifts an existing sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{CMatrix, CVector, Complex64};

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Stream for trial `trial` of a run seeded with `seed`, dedicated to `tag`.
pub fn substream(seed: u64, trial: u64, tag: &str) -> SimRng {
    let mut state = splitmix64(seed ^ splitmix64(trial ^ splitmix64(fnv1a(tag))));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    SimRng::from_seed(key)
}

/// Plain seeded stream, for tests and one-off draws.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// One draw of CN(0, variance): real and imaginary parts each carry half.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// `rows x cols` matrix of i.i.d. CN(0, variance) entries, filled column-major.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, variance))
}

pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng, variance))
}

/// Real zero-mean Gaussian with the given variance.
pub fn real_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    variance.sqrt() * z
}
