//! Named RNG substreams derived from a single run seed.
//!
//! Every substream is a ChaCha8 generator keyed by the run seed and selected
//! by its stream id (ChaCha's 64-bit stream counter), so streams never overlap
//! and adding riders never perturbs the placement or order streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    Orders,
    Rider(usize),
    Bootstrap,
    Clustering,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Placement => 1,
            Stream::Orders => 2,
            Stream::Bootstrap => 3,
            Stream::Clustering => 4,
            Stream::Rider(i) => 1 << 32 | i as u64,
        }
    }
}

pub fn substream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
