//! Independent random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Mobility,
    Arrivals,
    NetworkInit,
    Noise,
    Replay,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Mobility => 0x6d6f_6269,
            Stream::Arrivals => 0x6172_7276,
            Stream::NetworkInit => 0x6e65_7469,
            Stream::Noise => 0x6e6f_6973,
            Stream::Replay => 0x7265_706c,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for `stream` under `master`; `salt` separates e.g. episodes.
pub fn derive(master: u64, stream: Stream, salt: u64) -> u64 {
    splitmix(splitmix(master ^ stream.tag()).wrapping_add(splitmix(salt)))
}

pub fn rng(master: u64, stream: Stream, salt: u64) -> SimRng {
    SimRng::seed_from_u64(derive(master, stream, salt))
}
