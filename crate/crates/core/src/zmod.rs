//! Exact arithmetic in the prime field Z_d.
//!
//! Every label that appears in the protocols (basis index `b`, vector index
//! `m`, collective coordinates, control outcomes) is a residue modulo an odd
//! prime `d`. Values are kept reduced into `[0, d)` at all times, so an
//! expression like `-b` is simply the residue `d - b`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZmodError {
    #[error("d must be an odd prime (got {0})")]
    InvalidModulus(u64),
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u32, u32),
    #[error("division by zero in Z_{0}")]
    DivisionByZero(u32),
}

/// An odd prime `d >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeModulus(u32);

impl PrimeModulus {
    pub fn new(d: u64) -> Result<Self, ZmodError> {
        if d < 3 || d > u64::from(u32::MAX) || !is_odd_prime(d) {
            return Err(ZmodError::InvalidModulus(d));
        }
        Ok(Self(d as u32))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn as_usize(self) -> usize {
        self.0 as usize
    }

    /// Reduces any signed integer into the field.
    pub fn elem(self, value: i64) -> FieldElem {
        FieldElem {
            value: value.rem_euclid(i64::from(self.0)) as u32,
            modulus: self,
        }
    }

    pub fn zero(self) -> FieldElem {
        self.elem(0)
    }

    pub fn one(self) -> FieldElem {
        self.elem(1)
    }

    /// The modular half, `(d + 1) / 2`, i.e. the inverse of 2.
    pub fn half(self) -> FieldElem {
        FieldElem {
            value: (self.0 + 1) / 2,
            modulus: self,
        }
    }

    /// All `d` residues in increasing order.
    pub fn elements(self) -> impl Iterator<Item = FieldElem> + Clone {
        (0..self.0).map(move |value| FieldElem {
            value,
            modulus: self,
        })
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Free-function form of [`PrimeModulus::half`].
pub fn half(d: PrimeModulus) -> FieldElem {
    d.half()
}

fn is_odd_prime(n: u64) -> bool {
    if n < 3 || n % 2 == 0 {
        return false;
    }
    let mut k = 3;
    while k * k <= n {
        if n % k == 0 {
            return false;
        }
        k += 2;
    }
    true
}

/// A residue modulo an odd prime, always stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElem {
    value: u32,
    modulus: PrimeModulus,
}

impl FieldElem {
    pub fn new(value: i64, modulus: PrimeModulus) -> Self {
        modulus.elem(value)
    }

    #[inline]
    pub fn value(self) -> u32 {
        self.value
    }

    #[inline]
    pub fn index(self) -> usize {
        self.value as usize
    }

    #[inline]
    pub fn modulus(self) -> PrimeModulus {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn check(self, other: Self) -> Result<u64, ZmodError> {
        if self.modulus != other.modulus {
            return Err(ZmodError::ModulusMismatch(
                self.modulus.get(),
                other.modulus.get(),
            ));
        }
        Ok(u64::from(self.modulus.get()))
    }

    fn raw(self, value: u64) -> Self {
        Self {
            value: value as u32,
            modulus: self.modulus,
        }
    }

    pub fn try_add(self, other: Self) -> Result<Self, ZmodError> {
        let d = self.check(other)?;
        Ok(self.raw((u64::from(self.value) + u64::from(other.value)) % d))
    }

    pub fn try_sub(self, other: Self) -> Result<Self, ZmodError> {
        let d = self.check(other)?;
        Ok(self.raw((u64::from(self.value) + d - u64::from(other.value)) % d))
    }

    pub fn try_mul(self, other: Self) -> Result<Self, ZmodError> {
        let d = self.check(other)?;
        Ok(self.raw(u64::from(self.value) * u64::from(other.value) % d))
    }

    pub fn try_div(self, other: Self) -> Result<Self, ZmodError> {
        self.check(other)?;
        self.try_mul(other.inv()?)
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(self) -> Result<Self, ZmodError> {
        if self.value == 0 {
            return Err(ZmodError::DivisionByZero(self.modulus.get()));
        }
        let d = i64::from(self.modulus.get());
        let (mut r0, mut r1) = (d, i64::from(self.value));
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1);
        Ok(self.modulus.elem(t0))
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let d = u64::from(self.modulus.get());
        let mut base = u64::from(self.value);
        let mut acc = 1 % d;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % d;
            }
            base = base * base % d;
            exp >>= 1;
        }
        self.raw(acc)
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

// The operator forms panic on a modulus mismatch; use the `try_*` methods
// when the operands may come from different fields.
macro_rules! impl_op {
    ($trait:ident, $method:ident, $try:ident) => {
        impl $trait for FieldElem {
            type Output = FieldElem;
            #[inline]
            fn $method(self, rhs: FieldElem) -> FieldElem {
                self.$try(rhs).expect("field elements from different moduli")
            }
        }
    };
}

impl_op!(Add, add, try_add);
impl_op!(Sub, sub, try_sub);
impl_op!(Mul, mul, try_mul);

impl Neg for FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        let d = self.modulus.get();
        self.raw(u64::from((d - self.value) % d))
    }
}
