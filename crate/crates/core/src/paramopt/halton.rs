//! Halton low-discrepancy sequence with a random Cranley-Patterson shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

#[derive(Debug, Clone)]
pub struct ShiftedHalton {
    shift: Vec<f64>,
}

impl ShiftedHalton {
    /// Panics when `dim` exceeds the number of built-in prime bases.
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            shift: (0..dim).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Point `index` of the shifted sequence (index 0 is the first nonzero Halton point).
    pub fn point(&self, index: u64) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, b)| (radical_inverse(index + 1, b) + s).fract())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_prefix() {
        let v: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(v, [0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn points_lie_in_unit_cube() {
        let h = ShiftedHalton::new(5, 3);
        for i in 0..200 {
            assert!(h.point(i).iter().all(|&u| (0.0..1.0).contains(&u)));
        }
    }
}
