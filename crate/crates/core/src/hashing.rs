//! Stateless mixing functions used for replayable random decisions.

#[inline]
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Hash of `(seed, a, b)`; distinct tuples give independent-looking outputs.
#[inline]
pub(crate) fn mix3(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b.rotate_left(17))
}

/// Uniform draw in `[0, 1)` from 53 high-quality bits.
#[inline]
pub(crate) fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_draws_cover_the_interval() {
        let n = 100_000u64;
        let mean = (0..n).map(|k| unit_f64(mix3(7, 3, k))).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
        assert!((0..n).all(|k| (0.0..1.0).contains(&unit_f64(mix3(1, 2, k)))));
    }
}
