//! The four seven-channel benchmark systems.
//!
//! Transition probabilities and throughputs are the published channel model
//! settings. The CQI observation matrix was not published with them; the
//! shipped default is a reconstructed binary CQI with
//! `p_{2,1} = 0.9, p_{2,0} = 0.1`, i.e. `Σ_P (p_{i,1} − p_{i,0}) = 0.8`,
//! which reproduces the published admissible discount factors
//! (0.2304, 0.3968, 0.5, 0.5). Consumers should treat it as such.

use crate::belief::{ChannelError, ChannelParams, ObservationLevel};

pub const CHANNELS_PER_SYSTEM: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemPreset {
    pub name: &'static str,
    pub p11: [f64; CHANNELS_PER_SYSTEM],
    pub p01: [f64; CHANNELS_PER_SYSTEM],
    pub throughput: [f64; CHANNELS_PER_SYSTEM],
}

const THROUGHPUT: [f64; CHANNELS_PER_SYSTEM] =
    [0.4998, 0.6668, 1.0000, 0.6296, 0.5830, 0.8334, 0.6668];

pub const SYSTEMS: [SystemPreset; 4] = [
    SystemPreset {
        name: "system-1",
        p11: [0.6, 0.4, 0.2, 0.2, 0.4, 0.1, 0.3],
        p01: [0.8, 0.6, 0.4, 0.9, 0.8, 0.6, 0.7],
        throughput: THROUGHPUT,
    },
    SystemPreset {
        name: "system-2",
        p11: [0.8, 0.6, 0.4, 0.9, 0.8, 0.6, 0.7],
        p01: [0.6, 0.4, 0.2, 0.2, 0.4, 0.1, 0.3],
        throughput: THROUGHPUT,
    },
    SystemPreset {
        name: "system-3",
        p11: [0.1, 0.4, 0.3, 0.5, 0.1, 0.3, 0.5],
        p01: [0.3, 0.6, 0.4, 0.7, 0.2, 0.6, 0.8],
        throughput: THROUGHPUT,
    },
    SystemPreset {
        name: "system-4",
        p11: [0.3, 0.6, 0.4, 0.7, 0.2, 0.6, 0.8],
        p01: [0.1, 0.4, 0.3, 0.5, 0.1, 0.3, 0.5],
        throughput: THROUGHPUT,
    },
];

/// Binary CQI: level 1 is mostly reported from the poor state, level 2 from
/// the good state.
pub fn reconstructed_obs() -> Vec<ObservationLevel> {
    vec![
        ObservationLevel::new(0.9, 0.1),
        ObservationLevel::new(0.1, 0.9),
    ]
}

impl SystemPreset {
    pub fn by_name(name: &str) -> Option<&'static SystemPreset> {
        SYSTEMS.iter().find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn channels(&self) -> Vec<ChannelParams> {
        self.channels_with_obs(&reconstructed_obs())
            .expect("preset channels are valid")
    }

    pub fn channels_with_obs(
        &self,
        obs: &[ObservationLevel],
    ) -> Result<Vec<ChannelParams>, ChannelError> {
        (0..CHANNELS_PER_SYSTEM)
            .map(|n| ChannelParams::new(self.p01[n], self.p11[n], obs.to_vec(), self.throughput[n]))
            .collect()
    }
}
