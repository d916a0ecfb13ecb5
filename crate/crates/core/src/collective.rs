//! Center-of-mass / relative coordinates for two qudits and the two
//! conjugate bases of maximally entangled states built on them.
//!
//! The pair `|n1>|n2>` is the collective state `|nc>|nr>` with
//! `nc = (n1 + n2)/2` and `nr = (n1 - n2)/2` in Z_d. A product of a
//! c-state and an r-state is expanded onto particle indices through this
//! bijection; both MES families are such products:
//!
//! * family A: `|m̈>_c ⊗ |2 m0; 0>_r` (c computational, r Fourier)
//! * family B: `|2 m0; 0>_c ⊗ |m̈>_r` (the same with c and r interchanged)

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::mub::{mub_vector, x_op, z_op, BasisLabel, MubIndex};
use crate::qstate::{inner, partial_trace, Basis, DensityMatrix, Operator, PureState, Qudit, Side};
use crate::zmod::FieldElem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairIndex {
    pub n1: FieldElem,
    pub n2: FieldElem,
}

impl PairIndex {
    /// Position in the flattened two-particle vector, `n1 * d + n2`.
    pub fn flat(self) -> usize {
        self.n1.index() * self.n1.modulus().as_usize() + self.n2.index()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CollectiveIndex {
    pub nc: FieldElem,
    pub nr: FieldElem,
}

pub fn to_collective(p: PairIndex) -> CollectiveIndex {
    let half = p.n1.modulus().half();
    CollectiveIndex {
        nc: half * (p.n1 + p.n2),
        nr: half * (p.n1 - p.n2),
    }
}

pub fn to_pair(c: CollectiveIndex) -> PairIndex {
    PairIndex {
        n1: c.nc + c.nr,
        n2: c.nc - c.nr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MesFamily {
    /// c-computational ⊗ r-Fourier; the eigenbasis of the `Γ^a` control.
    A,
    /// r-computational ⊗ c-Fourier; the eigenbasis of the `Γ^b` control.
    B,
}

impl fmt::Display for MesFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MesFamily::A => "a",
            MesFamily::B => "b",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MesLabel {
    pub family: MesFamily,
    /// Computational-coordinate index (`m̈`).
    pub mdd: FieldElem,
    /// Fourier-coordinate index; the state carries `2 m0`.
    pub m0: FieldElem,
}

impl MesLabel {
    pub fn new(family: MesFamily, mdd: FieldElem, m0: FieldElem) -> Self {
        Self { family, mdd, m0 }
    }

    /// All `d^2` labels of a family, `m̈` major.
    pub fn all(q: &Qudit, family: MesFamily) -> Vec<MesLabel> {
        let mut out = Vec::with_capacity(q.pair_dim());
        for mdd in q.elements() {
            for m0 in q.elements() {
                out.push(MesLabel::new(family, mdd, m0));
            }
        }
        out
    }
}

impl fmt::Display for MesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.family, self.mdd, self.m0)
    }
}

/// Expands `|c>_c ⊗ |r>_r` onto particle indices.
pub fn from_collective(q: &Qudit, c_state: &PureState, r_state: &PureState) -> PureState {
    let mut amps = vec![Complex64::new(0.0, 0.0); q.pair_dim()];
    for nc in q.elements() {
        let a = c_state.amplitudes()[nc.index()];
        for nr in q.elements() {
            let pair = to_pair(CollectiveIndex { nc, nr });
            amps[pair.flat()] = a * r_state.amplitudes()[nr.index()];
        }
    }
    PureState::normalized(amps).expect("product of unit vectors")
}

pub fn mes_state(q: &Qudit, label: MesLabel) -> PureState {
    let computational = PureState::basis_vector(q.dim(), label.mdd.index());
    let two = q.elem(2);
    let fourier = mub_vector(
        q,
        MubIndex::new(BasisLabel::Shifted(q.elem(0)), two * label.m0),
    );
    match label.family {
        MesFamily::A => from_collective(q, &computational, &fourier),
        MesFamily::B => from_collective(q, &fourier, &computational),
    }
}

/// The orthonormal MES basis of one family together with its outcome labels.
#[derive(Debug, Clone)]
pub struct GammaBasis {
    pub family: MesFamily,
    pub labels: Vec<MesLabel>,
    pub basis: Basis,
}

impl GammaBasis {
    pub fn new(q: &Qudit, family: MesFamily) -> Self {
        let labels = MesLabel::all(q, family);
        let vectors = labels.iter().map(|&l| mes_state(q, l)).collect();
        let basis = Basis::new(vectors).expect("MES family is an orthonormal basis");
        Self {
            family,
            labels,
            basis,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (MesLabel, &PureState)> {
        self.labels.iter().copied().zip(self.basis.iter())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn gamma_basis(q: &Qudit, family: MesFamily) -> GammaBasis {
    GammaBasis::new(q, family)
}

/// Collective clock and shift operators on the pair space.
#[derive(Debug, Clone)]
pub struct CollectiveOps {
    pub zc: Operator,
    pub zr: Operator,
    pub xc: Operator,
    pub xr: Operator,
}

pub fn collective_ops(q: &Qudit) -> CollectiveOps {
    let z = z_op(q);
    let x = x_op(q);
    let half = u64::from(q.modulus().half().value());
    let neg_half = u64::from((-q.modulus().half()).value());
    let neg_one = u64::from(q.modulus().get() - 1);
    let z_half = z.pow(half);
    CollectiveOps {
        zc: z_half.kron(&z_half),
        zr: z_half.kron(&z.pow(neg_half)),
        xc: x.kron(&x),
        xr: x.kron(&x.pow(neg_one)),
    }
}

/// Checks on both MES families: orthonormality, maximal entanglement and
/// mutual unbiasedness of the two families.
#[derive(Debug, Clone, Serialize)]
pub struct MesReport {
    pub d: u32,
    pub states_per_family: usize,
    pub family_a_gram_residual: f64,
    pub family_b_gram_residual: f64,
    /// Largest entrywise distance of either reduced density matrix from `I/d`.
    pub max_partial_trace_deviation: f64,
    pub cross_overlaps: usize,
    /// Target value `1/d^2` of every squared cross-family overlap.
    pub cross_overlap_target: f64,
    pub max_cross_overlap_deviation: f64,
}

impl MesReport {
    pub fn max_residual(&self) -> f64 {
        self.family_a_gram_residual
            .max(self.family_b_gram_residual)
            .max(self.max_partial_trace_deviation)
            .max(self.max_cross_overlap_deviation)
    }
}

pub fn mes_report(q: &Qudit) -> MesReport {
    let a = gamma_basis(q, MesFamily::A);
    let b = gamma_basis(q, MesFamily::B);
    let mixed = DensityMatrix::maximally_mixed(q.dim());
    let mut max_partial_trace_deviation = 0.0f64;
    for (_, s) in a.iter().chain(b.iter()) {
        for side in [Side::Particle1, Side::Particle2] {
            let rho = partial_trace(s, q.dim(), side).expect("pair dimension");
            max_partial_trace_deviation = max_partial_trace_deviation.max(rho.max_abs_diff(&mixed));
        }
    }
    let target = 1.0 / q.pair_dim() as f64;
    let mut cross_overlaps = 0;
    let mut max_cross_overlap_deviation = 0.0f64;
    for (_, u) in a.iter() {
        for (_, v) in b.iter() {
            let o = inner(u, v).expect("pair dimension").norm_sqr();
            max_cross_overlap_deviation = max_cross_overlap_deviation.max((o - target).abs());
            cross_overlaps += 1;
        }
    }
    MesReport {
        d: q.modulus().get(),
        states_per_family: a.len(),
        family_a_gram_residual: a.basis.gram_residual(),
        family_b_gram_residual: b.basis.gram_residual(),
        max_partial_trace_deviation,
        cross_overlaps,
        cross_overlap_target: target,
        max_cross_overlap_deviation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(d: u64) -> Qudit {
        Qudit::new(d).unwrap()
    }

    fn pair(q: &Qudit, n1: i64, n2: i64) -> PairIndex {
        PairIndex {
            n1: q.elem(n1),
            n2: q.elem(n2),
        }
    }

    #[test]
    fn coordinate_examples() {
        let q3 = q(3);
        let c = to_collective(pair(&q3, 0, 0));
        assert_eq!((c.nc.value(), c.nr.value()), (0, 0));
        let c = to_collective(pair(&q3, 1, 2));
        assert_eq!((c.nc.value(), c.nr.value()), (0, 1));
        let p = to_pair(CollectiveIndex {
            nc: q3.elem(0),
            nr: q3.elem(1),
        });
        assert_eq!(p, pair(&q3, 1, 2));
    }

    #[test]
    fn coordinate_bijection() {
        for d in [3, 5, 7, 11, 13] {
            let qd = q(d);
            let mut seen = std::collections::HashSet::new();
            for n1 in qd.elements() {
                for n2 in qd.elements() {
                    let p = PairIndex { n1, n2 };
                    let c = to_collective(p);
                    assert_eq!(to_pair(c), p);
                    seen.insert(c);
                }
            }
            assert_eq!(seen.len(), qd.pair_dim());
        }
    }

    #[test]
    fn collective_weyl_relations() {
        let q3 = q(3);
        let ops = collective_ops(&q3);
        let w = q3.omega();
        let id = Operator::identity(9);
        let mul = |a: &Operator, b: &Operator| a.matmul(b).unwrap();
        assert!(mul(&ops.zc, &ops.xc).max_abs_diff(&mul(&ops.xc, &ops.zc).scale(w)) < 1e-10);
        assert!(mul(&ops.zr, &ops.xr).max_abs_diff(&mul(&ops.xr, &ops.zr).scale(w)) < 1e-10);
        assert!(mul(&ops.zc, &ops.xr).max_abs_diff(&mul(&ops.xr, &ops.zc)) < 1e-10);
        assert!(mul(&ops.zr, &ops.xc).max_abs_diff(&mul(&ops.xc, &ops.zr)) < 1e-10);
        assert!(ops.xc.pow(3).max_abs_diff(&id) < 1e-9);
        assert!(ops.zr.pow(3).max_abs_diff(&id) < 1e-9);
        assert!(ops.zc.pow(3).max_abs_diff(&id) < 1e-9);
        assert!(ops.xr.pow(3).max_abs_diff(&id) < 1e-9);
    }

    #[test]
    fn collective_clock_reads_collective_index() {
        let q5 = q(5);
        let ops = collective_ops(&q5);
        for n1 in q5.elements() {
            for n2 in q5.elements() {
                let p = PairIndex { n1, n2 };
                let c = to_collective(p);
                let e = PureState::basis_vector(25, p.flat());
                let zc_e = ops.zc.apply(&e).unwrap();
                assert!(zc_e.max_abs_diff(&e.scale(q5.omega_pow(c.nc))) < 1e-12);
                let zr_e = ops.zr.apply(&e).unwrap();
                assert!(zr_e.max_abs_diff(&e.scale(q5.omega_pow(c.nr))) < 1e-12);
            }
        }
    }

    #[test]
    fn family_a_matches_explicit_sum() {
        // (1/sqrt d) sum_n |m̈+n>|m̈-n> omega^{-2 m0 n}, written out by hand.
        for d in [3u64, 5, 7] {
            let qd = q(d);
            let du = d as usize;
            for mdd in 0..du {
                for m0 in 0..du {
                    let mut amps = vec![Complex64::new(0.0, 0.0); du * du];
                    for n in 0..du {
                        let n1 = (mdd + n) % du;
                        let n2 = (mdd + du - n) % du;
                        let phase = -2.0 * std::f64::consts::PI * ((2 * m0 * n) % du) as f64 / d as f64;
                        amps[n1 * du + n2] = Complex64::from_polar(1.0 / (d as f64).sqrt(), phase);
                    }
                    let label = MesLabel::new(MesFamily::A, qd.elem(mdd as i64), qd.elem(m0 as i64));
                    let s = mes_state(&qd, label);
                    assert!(s.max_abs_diff(&PureState::unnormalized(amps).unwrap()) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn qutrit_reference_state() {
        let q3 = q(3);
        let s = mes_state(&q3, MesLabel::new(MesFamily::A, q3.elem(0), q3.elem(0)));
        let r = 1.0 / 3f64.sqrt();
        let mut expect = vec![Complex64::new(0.0, 0.0); 9];
        for k in [0, 5, 7] {
            expect[k] = Complex64::new(r, 0.0);
        }
        assert!(s.max_abs_diff(&PureState::unnormalized(expect).unwrap()) < 1e-15);
    }

    #[test]
    fn simultaneous_eigenvectors() {
        for d in [3, 5] {
            let qd = q(d);
            let ops = collective_ops(&qd);
            let two = qd.elem(2);
            for family in [MesFamily::A, MesFamily::B] {
                for label in MesLabel::all(&qd, family) {
                    let s = mes_state(&qd, label);
                    let (clock, shift) = match family {
                        MesFamily::A => (&ops.zc, &ops.xr),
                        MesFamily::B => (&ops.zr, &ops.xc),
                    };
                    let zs = clock.apply(&s).unwrap();
                    assert!(zs.max_abs_diff(&s.scale(qd.omega_pow(label.mdd))) < 1e-9);
                    let xs = shift.apply(&s).unwrap();
                    assert!(xs.max_abs_diff(&s.scale(qd.omega_pow(two * label.m0))) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn families_are_orthonormal_and_complete() {
        for d in [3, 5] {
            let qd = q(d);
            for family in [MesFamily::A, MesFamily::B] {
                let g = gamma_basis(&qd, family);
                assert_eq!(g.len(), qd.pair_dim());
                assert!(g.basis.gram_residual() < 1e-10);
                let eigen = vec![Complex64::new(1.0, 0.0); g.len()];
                let resolution = Operator::spectral(&g.basis, &eigen);
                assert!(resolution.max_abs_diff(&Operator::identity(qd.pair_dim())) < 1e-9);
            }
        }
    }

    #[test]
    fn families_are_mutually_unbiased() {
        for d in [3, 5] {
            let qd = q(d);
            let a = gamma_basis(&qd, MesFamily::A);
            let b = gamma_basis(&qd, MesFamily::B);
            let target = 1.0 / (d * d) as f64;
            for (_, u) in a.iter() {
                for (_, v) in b.iter() {
                    assert!((inner(u, v).unwrap().norm_sqr() - target).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn mes_report_small_primes() {
        for d in [3, 5] {
            let r = mes_report(&q(d));
            assert_eq!(r.states_per_family, (d * d) as usize);
            assert_eq!(r.cross_overlaps, (d * d * d * d) as usize);
            assert!(r.max_residual() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn every_mes_is_maximally_entangled() {
        let q3 = q(3);
        let mixed = DensityMatrix::maximally_mixed(3);
        for family in [MesFamily::A, MesFamily::B] {
            for label in MesLabel::all(&q3, family) {
                let s = mes_state(&q3, label);
                for side in [Side::Particle1, Side::Particle2] {
                    let rho = partial_trace(&s, 3, side).unwrap();
                    assert!(rho.max_abs_diff(&mixed) < 1e-9);
                }
            }
        }
    }
}
