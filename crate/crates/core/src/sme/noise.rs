use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reproducible Gaussian increments keyed on (master seed, trajectory id, step, channel).
///
/// The ChaCha key comes from the master seed, the stream number is the trajectory id and
/// each step owns a fixed block of the keystream, so any step can be regenerated in isolation.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    channels: usize,
    words_per_step: u128,
    next_step: u64,
    master_seed: u64,
    trajectory_id: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64, trajectory_id: u64, channels: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trajectory_id);
        rng.set_word_pos(0);
        NoiseStream {
            rng,
            channels,
            // two u64 draws per Gaussian pair, two 32-bit words per u64
            words_per_step: 4 * channels.div_ceil(2) as u128,
            next_step: 0,
            master_seed,
            trajectory_id,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trajectory_id(&self) -> u64 {
        self.trajectory_id
    }

    fn uniform(&mut self) -> f64 {
        // (0, 1]
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draws for `step`, written to `out[..channels]`.
    pub fn normals(&mut self, step: u64, out: &mut [f64]) {
        if step != self.next_step {
            self.rng.set_word_pos(step as u128 * self.words_per_step);
        }
        let mut c = 0;
        while c < self.channels {
            let r = (-2.0 * self.uniform().ln()).sqrt();
            let theta = std::f64::consts::TAU * self.uniform();
            out[c] = r * theta.cos();
            if c + 1 < self.channels {
                out[c + 1] = r * theta.sin();
            }
            c += 2;
        }
        self.next_step = step + 1;
    }

    /// A uniform draw in (0, 1] from a keystream region no step ever reaches; used to
    /// prepare the initial state of a trajectory without touching its noise.
    pub fn preparation_uniform(&self) -> f64 {
        let mut rng = self.rng.clone();
        rng.set_word_pos(1u128 << 67);
        ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Wiener increments `sqrt(dt) N(0, 1)` for `step`.
    pub fn increments(&mut self, step: u64, dt: f64, out: &mut [f64]) {
        self.normals(step, out);
        let s = dt.sqrt();
        for v in out.iter_mut().take(self.channels) {
            *v *= s;
        }
    }
}
