//! Run-length codec for binary masks.
//!
//! Runs are counted in column-major scan order and alternate between 0s and
//! 1s, starting with 0s; only the leading zero-run may be empty. This is the
//! interchange convention used by common segmentation toolchains, so
//! externally produced masks can be ingested unchanged.

use crate::error::{Error, Result};
use crate::mask::Mask;

/// Encodes a mask into alternating run counts.
pub fn encode(mask: &Mask) -> Vec<u32> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for x in 0..mask.w {
        for y in 0..mask.h {
            let v = mask.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}

/// Decodes run counts back into a `w` x `h` mask.
///
/// Rejects runs that do not sum to exactly `w * h`.
pub fn decode(counts: &[u32], w: usize, h: usize) -> Result<Mask> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total != (w * h) as u64 {
        return Err(Error::data(format!(
            "rle runs sum to {total}, expected {w}x{h} = {}",
            w * h
        )));
    }
    let mut mask = Mask::new(w, h);
    let mut flat = 0usize;
    let mut value = false;
    for &c in counts {
        if value {
            for i in flat..flat + c as usize {
                // column-major: flat = x * h + y
                let x = i / h;
                let y = i % h;
                mask.set(x, y, true);
            }
        }
        flat += c as usize;
        value = !value;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_false_is_one_zero_run() {
        let mask = Mask::new(2, 2);
        assert_eq!(encode(&mask), vec![4]);
    }

    #[test]
    fn hand_encoded_column_major_runs() {
        // true at column-major flat indices 1 and 2 on a 2x2 grid:
        // flat 1 = (x0, y1), flat 2 = (x1, y0)
        let mut mask = Mask::new(2, 2);
        mask.set(0, 1, true);
        mask.set(1, 0, true);
        assert_eq!(encode(&mask), vec![1, 2, 1]);
    }

    #[test]
    fn leading_one_gets_empty_zero_run() {
        let mut mask = Mask::new(2, 1);
        mask.set(0, 0, true);
        assert_eq!(encode(&mask), vec![0, 1, 1]);
    }

    #[test]
    fn decode_rejects_bad_run_sum() {
        assert!(matches!(decode(&[3], 2, 2), Err(Error::Data(_))));
        assert!(matches!(decode(&[5], 2, 2), Err(Error::Data(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            w in 1usize..24,
            h in 1usize..24,
            seed in 0u64..10_000,
        ) {
            let mut rng = crate::rng::Lcg64::new(seed);
            let mask = Mask::from_fn(w, h, |_, _| rng.next_bool(0.5));
            let counts = encode(&mask);
            let back = decode(&counts, w, h).unwrap();
            prop_assert_eq!(back, mask);
        }
    }
}
