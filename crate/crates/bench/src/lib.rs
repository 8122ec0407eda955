//! Fixed benchmark instances.

use num_complex::Complex64;

use fa_aircomp::oracle::{random_instance, random_transmit};
use fa_aircomp::solvers::solve_beamformer;
use fa_aircomp::{ChannelSet, Solution, SystemConfig};

pub struct Fixture {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub transmit: Vec<Complex64>,
    pub beamformer: Vec<Complex64>,
}

impl Fixture {
    /// Seeded `K`-user, `N`-antenna scenario on an 8-wavelength aperture with
    /// a random placement and the matching optimal beamformer.
    pub fn new(num_users: usize, num_antennas: usize, theta0: f64) -> Self {
        let (config, channels, mut rng) =
            random_instance(0xBE7C, num_users, num_antennas, 8.0, theta0)
                .expect("benchmark instance is feasible");
        let transmit = random_transmit(&config, &mut rng);
        let beamformer = solve_beamformer(&config, &channels, &transmit).expect("beamformer");
        Fixture {
            config,
            channels,
            transmit,
            beamformer,
        }
    }

    pub fn solution(&self) -> Solution {
        Solution {
            transmit_coeffs: self.transmit.clone(),
            beamformer: self.beamformer.clone(),
            positions: self.channels.positions.clone(),
        }
    }
}
