//! The complete set of `d + 1` mutually unbiased bases of one qudit, and the
//! clock, shift and `K_b` operators built from them.
//!
//! For a shifted basis `b` the vector `|m; b>` has amplitudes
//! `omega^{(b/2) n (n - 1) - m n} / sqrt(d)`, with the whole exponent reduced
//! in Z_d before it becomes a phase. The computational basis is the standard
//! basis, kept separate since it is not of that form.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::qstate::{inner, Basis, Operator, PureState, Qudit};
use crate::zmod::FieldElem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisLabel {
    /// Eigenbasis of the clock operator `Z`.
    Computational,
    Shifted(FieldElem),
}

impl BasisLabel {
    /// The computational basis followed by the shifted bases `0..d`.
    pub fn all(q: &Qudit) -> Vec<BasisLabel> {
        std::iter::once(BasisLabel::Computational)
            .chain(q.elements().map(BasisLabel::Shifted))
            .collect()
    }

    pub fn shifted(self) -> Option<FieldElem> {
        match self {
            BasisLabel::Computational => None,
            BasisLabel::Shifted(b) => Some(b),
        }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Computational => f.write_str("computational"),
            BasisLabel::Shifted(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MubIndex {
    pub basis: BasisLabel,
    pub m: FieldElem,
}

impl MubIndex {
    pub fn new(basis: BasisLabel, m: FieldElem) -> Self {
        Self { basis, m }
    }
}

/// Clock operator, `Z|n> = omega^n |n>`.
pub fn z_op(q: &Qudit) -> Operator {
    Operator::from_fn(q.dim(), |r, c| {
        if r == c {
            q.omega_pow(q.elem(r as i64))
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Cyclic shift, `X|n> = |n + 1 mod d>`.
pub fn x_op(q: &Qudit) -> Operator {
    let d = q.dim();
    Operator::from_fn(d, |r, c| {
        Complex64::new(if r == (c + 1) % d { 1.0 } else { 0.0 }, 0.0)
    })
}

pub fn mub_vector(q: &Qudit, idx: MubIndex) -> PureState {
    match idx.basis {
        BasisLabel::Computational => PureState::basis_vector(q.dim(), idx.m.index()),
        BasisLabel::Shifted(b) => {
            let coeff = b * q.modulus().half();
            let one = q.modulus().one();
            let norm = 1.0 / (q.dim() as f64).sqrt();
            let amps = q
                .elements()
                .map(|n| {
                    let exponent = coeff * n * (n - one) - idx.m * n;
                    q.omega_pow(exponent) * norm
                })
                .collect();
            PureState::normalized(amps).expect("MUB vectors have unit norm")
        }
    }
}

pub fn mub_basis(q: &Qudit, basis: BasisLabel) -> Basis {
    Basis::new(
        q.elements()
            .map(|m| mub_vector(q, MubIndex::new(basis, m)))
            .collect(),
    )
    .expect("MUB vectors form an orthonormal basis")
}

/// `K_b = sum_m |m; b> omega^m <b; m|`.
pub fn k_op(q: &Qudit, basis: BasisLabel) -> Operator {
    let eigenvalues: Vec<_> = q.elements().map(|m| q.omega_pow(m)).collect();
    Operator::spectral(&mub_basis(q, basis), &eigenvalues)
}

#[derive(Debug, Clone, Serialize)]
pub struct UnbiasednessReport {
    pub d: u32,
    pub bases: usize,
    pub basis_pairs: usize,
    pub overlaps_examined: usize,
    /// max over distinct-basis vector pairs of `| |<u|v>|^2 - 1/d |`.
    pub max_deviation: f64,
    /// Largest Gram-matrix residual among the individual bases.
    pub max_gram_residual: f64,
}

pub fn unbiasedness_report(q: &Qudit) -> UnbiasednessReport {
    let labels = BasisLabel::all(q);
    let bases: Vec<Basis> = labels.iter().map(|&b| mub_basis(q, b)).collect();
    let target = 1.0 / q.dim() as f64;
    let mut basis_pairs = 0;
    let mut overlaps_examined = 0;
    let mut max_deviation = 0.0f64;
    for (i, bi) in bases.iter().enumerate() {
        for bj in &bases[i + 1..] {
            basis_pairs += 1;
            for u in bi.iter() {
                for v in bj.iter() {
                    let o = inner(u, v).expect("same dimension").norm_sqr();
                    max_deviation = max_deviation.max((o - target).abs());
                    overlaps_examined += 1;
                }
            }
        }
    }
    UnbiasednessReport {
        d: q.modulus().get(),
        bases: bases.len(),
        basis_pairs,
        overlaps_examined,
        max_deviation,
        max_gram_residual: bases.iter().map(Basis::gram_residual).fold(0.0, f64::max),
    }
}
