//! Bit interleaving for dyadic cell codes.
//!
//! A depth-`k` cell of `[0,1)^2` with index `(i, j)` gets the code whose even
//! bits are the bits of `i` and whose odd bits are the bits of `j`. The code
//! of the depth-`k'` ancestor (`k' <= k`) is then `code >> (2 * (k - k'))`,
//! so every dyadic cell owns a contiguous range of finer codes.

#[inline]
fn spread(v: u32) -> u64 {
    let mut z = v as u64;
    z = (z | (z << 16)) & 0x0000_FFFF_0000_FFFF;
    z = (z | (z << 8)) & 0x00FF_00FF_00FF_00FF;
    z = (z | (z << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    z = (z | (z << 2)) & 0x3333_3333_3333_3333;
    z = (z | (z << 1)) & 0x5555_5555_5555_5555;
    z
}

#[inline]
fn compact(z: u64) -> u32 {
    let mut z = z & 0x5555_5555_5555_5555;
    z = (z | (z >> 1)) & 0x3333_3333_3333_3333;
    z = (z | (z >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    z = (z | (z >> 4)) & 0x00FF_00FF_00FF_00FF;
    z = (z | (z >> 8)) & 0x0000_FFFF_0000_FFFF;
    z = (z | (z >> 16)) & 0x0000_0000_FFFF_FFFF;
    z as u32
}

/// Interleave two 32-bit indices into a 64-bit Z-order code.
#[inline]
pub fn interleave2(x: u32, y: u32) -> u64 {
    spread(x) | (spread(y) << 1)
}

#[inline]
pub fn deinterleave2(code: u64) -> (u32, u32) {
    (compact(code), compact(code >> 1))
}

/// Code of a cell index in dimension `dim` (1 or 2).
#[inline]
pub fn encode(dim: usize, index: [u64; 2]) -> u64 {
    if dim == 1 {
        index[0]
    } else {
        interleave2(index[0] as u32, index[1] as u32)
    }
}

#[inline]
pub fn decode(dim: usize, code: u64) -> [u64; 2] {
    if dim == 1 {
        [code, 0]
    } else {
        let (x, y) = deinterleave2(code);
        [x as u64, y as u64]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_codes() {
        assert_eq!(interleave2(0, 0), 0);
        assert_eq!(interleave2(1, 0), 1);
        assert_eq!(interleave2(0, 1), 2);
        assert_eq!(interleave2(1, 1), 3);
        assert_eq!(interleave2(2, 0), 4);
        assert_eq!(interleave2(3, 3), 15);
    }

    #[test]
    fn ancestor_is_shifted_prefix() {
        // (5, 6) at depth 3 lies in (2, 3) at depth 2 and (1, 1) at depth 1
        let c = interleave2(5, 6);
        assert_eq!(c >> 2, interleave2(2, 3));
        assert_eq!(c >> 4, interleave2(1, 1));
    }

    proptest! {
        #[test]
        fn roundtrip(x in any::<u32>(), y in any::<u32>()) {
            prop_assert_eq!(deinterleave2(interleave2(x, y)), (x, y));
        }
    }
}
