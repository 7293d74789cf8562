//! Reproducible random streams.
//!
//! Every sampler draws from a ChaCha stream keyed by `(seed, purpose, chunk)`,
//! so a chunk's samples are the same no matter which worker evaluates it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of draws handled by one stream.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Probe = 1,
    BoundarySeeds = 2,
    Collar = 3,
    CollarAssist = 4,
    Volume = 5,
    Shell = 6,
    Refine = 7,
    Closure = 8,
}

pub fn stream(seed: u64, purpose: Purpose, chunk: u64) -> ChaCha8Rng {
    let key = seed ^ (purpose as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(chunk);
    rng
}

pub fn uniform_in_box<R: Rng>(rng: &mut R, bbox: &[[f64; 2]], out: &mut [f64]) {
    for (x, [lo, hi]) in out.iter_mut().zip(bbox) {
        *x = lo + (hi - lo) * rng.random::<f64>();
    }
}

/// Latin-hypercube design with `count` points in `bbox`.
pub fn latin_hypercube(seed: u64, purpose: Purpose, round: u64, bbox: &[[f64; 2]], count: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, purpose, round);
    let dim = bbox.len();
    let mut points = vec![vec![0.0; dim]; count];
    let mut perm: Vec<usize> = (0..count).collect();
    for (d, [lo, hi]) in bbox.iter().enumerate() {
        for i in (1..count).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        for (i, p) in points.iter_mut().enumerate() {
            let u = (perm[i] as f64 + rng.random::<f64>()) / count as f64;
            p[d] = lo + (hi - lo) * u;
        }
    }
    points
}
