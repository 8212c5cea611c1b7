//! Machine words the entangled streams are stored in.
//!
//! Each word type carries a signed companion of twice its width, used for
//! the temporary composite value built during disentanglement.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_traits::{PrimInt, Signed, WrappingAdd, WrappingMul, WrappingNeg, WrappingSub};

pub trait Word:
    PrimInt
    + Signed
    + WrappingAdd
    + WrappingSub
    + WrappingMul
    + WrappingNeg
    + Hash
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Signed integer of `2 * BITS` bits.
    type Wide: PrimInt + Signed + WrappingAdd + WrappingSub + WrappingNeg + Debug + Send + Sync;

    const BITS: u32;

    fn widen(self) -> Self::Wide;

    /// Keeps the low `BITS` bits of a wide value (two's complement truncation).
    fn truncate(wide: Self::Wide) -> Self;

    fn as_i128(self) -> i128;

    fn from_i128(v: i128) -> Option<Self>;

    /// Reinterprets the low `BITS` bits of `bits` as a word.
    fn from_bit_pattern(bits: u64) -> Self;

    fn bit_pattern(self) -> u64;
}

macro_rules! impl_word {
    ($t:ty, $wide:ty, $ut:ty) => {
        impl Word for $t {
            type Wide = $wide;
            const BITS: u32 = <$t>::BITS;

            #[inline(always)]
            fn widen(self) -> $wide {
                self as $wide
            }

            #[inline(always)]
            fn truncate(wide: $wide) -> Self {
                wide as $t
            }

            #[inline(always)]
            fn as_i128(self) -> i128 {
                self as i128
            }

            fn from_i128(v: i128) -> Option<Self> {
                <$t>::try_from(v).ok()
            }

            #[inline(always)]
            fn from_bit_pattern(bits: u64) -> Self {
                bits as $ut as $t
            }

            #[inline(always)]
            fn bit_pattern(self) -> u64 {
                self as $ut as u64
            }
        }
    };
}

impl_word!(i32, i64, u32);
impl_word!(i64, i128, u64);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_patterns_are_w_bit() {
        assert_eq!(<i32 as Word>::from_bit_pattern(1 << 31), i32::MIN);
        assert_eq!((-1i32).bit_pattern(), 0xFFFF_FFFF);
        assert_eq!((-1i64).bit_pattern(), u64::MAX);
        assert_eq!(<i32 as Word>::truncate(1i64 << 32 | 7), 7);
    }

    #[test]
    fn from_i128_rejects_wide_values() {
        assert_eq!(<i32 as Word>::from_i128(1 << 31), None);
        assert_eq!(<i32 as Word>::from_i128(-(1 << 31)), Some(i32::MIN));
    }
}
