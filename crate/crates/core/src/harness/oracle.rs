//! Closed-form channel probabilities for `n` independent broadcasters, each
//! transmitting with probability `p`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Zero};

/// Scalar the oracles are generic over: `f32`, `f64` or an exact rational.
pub trait Probability: Num + Clone + PartialOrd + FromPrimitive {}

impl<T: Num + Clone + PartialOrd + FromPrimitive> Probability for T {}

fn powu<T: Probability>(base: T, exp: u64) -> T {
    let mut result = T::one();
    let mut base = base;
    let mut exp = exp;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * base.clone();
        }
        exp >>= 1;
        if exp > 0 {
            base = base.clone() * base;
        }
    }
    result
}

fn check<T: Probability>(p: &T) {
    debug_assert!(*p >= T::zero() && *p <= T::one(), "probability out of range");
}

/// `(1 - p)^n`: nobody broadcasts.
pub fn p_silence<T: Probability>(n: u64, p: T) -> T {
    check(&p);
    powu(T::one() - p, n)
}

/// `n p (1 - p)^(n-1)`: exactly one node broadcasts.
pub fn p_exactly_one<T: Probability>(n: u64, p: T) -> T {
    check(&p);
    if n == 0 {
        return T::zero();
    }
    let count = T::from_u64(n).expect("node count representable");
    count * p.clone() * powu(T::one() - p, n - 1)
}

/// Two or more broadcasters.
pub fn p_noise<T: Probability>(n: u64, p: T) -> T {
    let silence = p_silence(n, p.clone());
    let one = p_exactly_one(n, p);
    T::one() - silence - one
}

/// Exact `(silence, exactly one, noise)` by summing over all `2^n` broadcast
/// patterns. Independent of the closed forms above; meant for small `n`.
pub fn enumerate_channel(n: u32, p: &BigRational) -> [BigRational; 3] {
    assert!(n <= 24, "2^{n} patterns is too many to enumerate");
    assert!(*p >= BigRational::zero() && *p <= BigRational::one());
    let num = p.numer().clone();
    let den = p.denom().clone();
    let rest = &den - &num;
    // Pattern weight is num^k * rest^(n-k) / den^n for k broadcasters.
    let weight: Vec<BigInt> = (0..=n)
        .map(|k| num_traits::pow(num.clone(), k as usize) * num_traits::pow(rest.clone(), (n - k) as usize))
        .collect();
    let mut sums = [BigInt::zero(), BigInt::zero(), BigInt::zero()];
    for mask in 0u32..(1u32 << n) {
        let k = mask.count_ones();
        sums[k.min(2) as usize] += &weight[k as usize];
    }
    let total = num_traits::pow(den, n as usize);
    sums.map(|s| BigRational::new(s, total.clone()))
}
