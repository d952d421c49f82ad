//! Counter-based Gaussian noise: ChaCha8 keyed by the global seed, one
//! stream per path, and a fixed block of words per time step, so any step
//! of any path can be generated without sequential state.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct NoiseStream {
    rng: ChaCha8Rng,
    dim: usize,
    words_per_step: u128,
}

impl NoiseStream {
    pub fn new(seed: u64, path_index: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        rng.set_word_pos(0);
        // two u64 uniforms per Box-Muller pair, two u32 words per u64
        let words_per_step = 4 * dim.div_ceil(2) as u128;
        Self { rng, dim, words_per_step }
    }

    /// Position the stream at the start of `step`.
    pub fn seek(&mut self, step: u64) {
        self.rng.set_word_pos(step as u128 * self.words_per_step);
    }

    /// Standard normals for the current step; advances by one step.
    pub fn fill_step(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut i = 0;
        while i < self.dim {
            let (a, b) = self.normal_pair();
            out[i] = a;
            if i + 1 < self.dim {
                out[i + 1] = b;
            }
            i += 2;
        }
    }

    #[inline]
    fn normal_pair(&mut self) -> (f64, f64) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential() {
        let mut seq = NoiseStream::new(42, 7, 3);
        let mut all = vec![[0.0; 3]; 20];
        for row in all.iter_mut() {
            seq.fill_step(row);
        }
        let mut ra = NoiseStream::new(42, 7, 3);
        for step in [13u64, 2, 19, 0] {
            let mut out = [0.0; 3];
            ra.seek(step);
            ra.fill_step(&mut out);
            assert_eq!(out, all[step as usize]);
        }
    }

    #[test]
    fn paths_are_distinct_streams() {
        let mut a = NoiseStream::new(1, 0, 2);
        let mut b = NoiseStream::new(1, 1, 2);
        let (mut x, mut y) = ([0.0; 2], [0.0; 2]);
        a.fill_step(&mut x);
        b.fill_step(&mut y);
        assert_ne!(x, y);
    }

    #[test]
    fn moments_look_standard() {
        let mut s = NoiseStream::new(9, 3, 2);
        let n = 200_000;
        let (mut m1, mut m2, mut m4) = (0.0, 0.0, 0.0);
        let mut out = [0.0; 2];
        for _ in 0..n / 2 {
            s.fill_step(&mut out);
            for v in out {
                m1 += v;
                m2 += v * v;
                m4 += v * v * v * v;
            }
        }
        let n = n as f64;
        assert!((m1 / n).abs() < 5.0 / n.sqrt());
        assert!((m2 / n - 1.0).abs() < 5.0 * 2f64.sqrt() / n.sqrt());
        assert!((m4 / n - 3.0).abs() < 5.0 * 96f64.sqrt() / n.sqrt());
    }
}
