//! Reproducible random substreams.
//!
//! Every packet owns one key derived from `(seed, packet index)`; each link
//! role draws from its own ChaCha stream under that key. Results are
//! therefore independent of the order in which packets are simulated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

/// Consumers of randomness within one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Payload,
    DesiredChannel,
    InterfererData,
    InterfererChannel,
    /// Receiver noise on antenna branch `branch` (0 for single-antenna links).
    Noise { branch: u32 },
}

impl Role {
    fn stream_id(self) -> u64 {
        match self {
            Role::Payload => 1,
            Role::DesiredChannel => 2,
            Role::InterfererData => 3,
            Role::InterfererChannel => 4,
            Role::Noise { branch } => 0x100 + u64::from(branch),
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random streams for one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketStreams {
    key: [u8; 32],
}

impl PacketStreams {
    pub fn new(seed: u64, packet_index: u64) -> Self {
        let mut state = seed ^ splitmix64(&mut packet_index.wrapping_mul(0xD1B5_4A32_D192_ED03));
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { key }
    }

    pub fn stream(&self, role: Role) -> RngStream {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(role.stream_id());
        rng
    }
}
