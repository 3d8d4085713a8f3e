//! Named, seed-derived random streams.
//!
//! Every random decision in a run draws from a ChaCha8 generator keyed by the
//! run seed and a stream name (`"init"`, `"shuffle"`, `"noise"`, ...). Adding
//! a draw to one stream never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_INIT: &str = "init";
pub const STREAM_SHUFFLE: &str = "shuffle";
pub const STREAM_NOISE: &str = "noise";
pub const STREAM_MASK: &str = "mask";
pub const STREAM_VALIDATION: &str = "validation";
pub const STREAM_SAMPLE: &str = "sample";
pub const STREAM_SPLIT: &str = "split";
pub const STREAM_SYNTH: &str = "synth";

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Generator for stream `name` under `seed`.
pub fn stream(seed: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

/// Generator for stream `name`, further keyed by an index (e.g. image number).
pub fn indexed_stream(seed: u64, name: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(fnv1a(name));
    rng
}
