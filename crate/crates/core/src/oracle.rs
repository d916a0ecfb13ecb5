//! Brute-force cross-checks computed from raw amplitudes.
//!
//! Vectors here are rebuilt from their closed forms with plain integer
//! exponents; nothing in this module evaluates the modular inference rules
//! to decide what the quantum support is. The comparison against those
//! rules happens only in [`cross_validate`].

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::collective::{MesFamily, MesLabel};
use crate::mub::{mub_vector, BasisLabel, MubIndex};
use crate::protocol::{
    infer_basis, infer_outcome, predicted_support, run_urm, ControlOutcome, InferenceResult,
    ProtocolError, UrmRecord,
};
use crate::qstate::{seeded_rng, tensor, Qudit, SUPPORT_THRESHOLD};
use crate::zmod::FieldElem;

/// Control outcomes with nonzero probability for one case.
#[derive(Debug, Clone)]
pub struct SupportSet {
    pub prepared: MesLabel,
    pub basis: BasisLabel,
    pub m: FieldElem,
    pub family: MesFamily,
    pub outcomes: Vec<(ControlOutcome, f64)>,
}

impl SupportSet {
    pub fn labels(&self) -> BTreeSet<ControlOutcome> {
        self.outcomes.iter().map(|&(o, _)| o).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|&(_, p)| p).sum()
    }
}

fn phase(d: usize, exponent: i64) -> Complex64 {
    let e = exponent.rem_euclid(d as i64);
    Complex64::from_polar(1.0, 2.0 * PI * e as f64 / d as f64)
}

/// `|m; b>` written out directly.
fn naive_mub_vector(d: usize, basis: BasisLabel, m: i64) -> Vec<Complex64> {
    match basis {
        BasisLabel::Computational => {
            let mut v = vec![Complex64::new(0.0, 0.0); d];
            v[m.rem_euclid(d as i64) as usize] = Complex64::new(1.0, 0.0);
            v
        }
        BasisLabel::Shifted(b) => {
            let half = (d as i64 + 1) / 2;
            let b = i64::from(b.value());
            let s = 1.0 / (d as f64).sqrt();
            (0..d as i64)
                .map(|n| phase(d, b * half * n * (n - 1) - m * n) * s)
                .collect()
        }
    }
}

/// Family A: `sum_n |m̈+n>|m̈-n> w^{-2 m0 n}`; family B:
/// `sum_n |n+m̈>|n-m̈> w^{-2 m0 n}`; both over `sqrt(d)`.
fn naive_mes(d: usize, family: MesFamily, mdd: i64, m0: i64) -> Vec<Complex64> {
    let di = d as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); d * d];
    let s = 1.0 / (d as f64).sqrt();
    for n in 0..di {
        let (n1, n2) = match family {
            MesFamily::A => (mdd + n, mdd - n),
            MesFamily::B => (n + mdd, n - mdd),
        };
        let k = n1.rem_euclid(di) as usize * d + n2.rem_euclid(di) as usize;
        out[k] += phase(d, -2 * m0 * n) * s;
    }
    out
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn enumerate_support(
    q: &Qudit,
    prepared: MesLabel,
    basis: BasisLabel,
    m: FieldElem,
    family: MesFamily,
) -> Result<SupportSet, ProtocolError> {
    let d = q.dim();
    let psi = naive_mes(d, prepared.family, prepared.mdd.value().into(), prepared.m0.value().into());
    let v = naive_mub_vector(d, basis, m.value().into());
    // (|v><v| ⊗ I) psi, one entry at a time.
    let mut post = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..d {
                acc += v[i] * v[k].conj() * psi[k * d + j];
            }
            post[i * d + j] = acc;
        }
    }
    let norm: f64 = post.iter().map(|a| a.norm_sqr()).sum();
    if norm < SUPPORT_THRESHOLD {
        return Err(ProtocolError::ImpossibleOutcome(norm));
    }
    let mut outcomes = Vec::new();
    for mdd in 0..d as i64 {
        for m0 in 0..d as i64 {
            let gamma = naive_mes(d, family, mdd, m0);
            let p = dot(&gamma, &post).norm_sqr() / norm;
            if p > SUPPORT_THRESHOLD {
                let label = MesLabel::new(family, q.elem(mdd), q.elem(m0));
                outcomes.push((ControlOutcome::from(label), p));
            }
        }
    }
    Ok(SupportSet {
        prepared,
        basis,
        m,
        family,
        outcomes,
    })
}

/// `m'' = 2 (m0 + b m̈ - b/2) - m`.
pub fn partner_index(prepared: MesLabel, b: FieldElem, m: FieldElem) -> FieldElem {
    let half = b.modulus().half();
    let two = b.modulus().elem(2);
    two * (prepared.m0 + b * prepared.mdd - b * half) - m
}

/// `1 - |<closed form|simulated>|` where the closed form is
/// `|m; b>_1 |-partner; -b>_2`.
pub fn post_state_residual(
    q: &Qudit,
    prepared: MesLabel,
    b: FieldElem,
    m: FieldElem,
    partner: FieldElem,
) -> Result<f64, ProtocolError> {
    let basis = BasisLabel::Shifted(b);
    let simulated = run_urm(q, prepared, UrmRecord { basis, m })?.state;
    let closed = tensor(
        &mub_vector(q, MubIndex::new(basis, m)),
        &mub_vector(q, MubIndex::new(BasisLabel::Shifted(-b), -partner)),
    );
    let overlap = dot(closed.amplitudes(), simulated.amplitudes()).norm();
    Ok(1.0 - overlap)
}

pub fn check_post_state_form(
    q: &Qudit,
    prepared: MesLabel,
    b: FieldElem,
    m: FieldElem,
) -> Result<f64, ProtocolError> {
    post_state_residual(q, prepared, b, m, partner_index(prepared, b, m))
}

/// Residuals of the closed-form post-measurement state at `count` random
/// (prepared, b, m) points.
pub fn post_state_spot_check(q: &Qudit, count: usize, seed: u64) -> Result<f64, ProtocolError> {
    let mut rng = seeded_rng(seed);
    let d = q.dim() as i64;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let mut draw = || q.elem(rng.random_range(0..d));
        let prepared = MesLabel::new(MesFamily::A, draw(), draw());
        let (b, m) = (draw(), draw());
        worst = worst.max(check_post_state_form(q, prepared, b, m)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub cases: u64,
    pub outcomes_compared: u64,
    /// Cases where the quantum support and the predicted label set differ.
    pub support_mismatches: u64,
    /// Support outcomes where the protocol's inference disagrees with the
    /// hidden record.
    pub inference_disagreements: u64,
    /// Same-family, shifted-basis cases whose predicted support is not of
    /// size `d`.
    pub support_size_anomalies: u64,
    pub max_probability_residual: f64,
    pub max_post_state_residual: f64,
    pub elapsed_ms: u128,
}

impl ValidationReport {
    fn merge(mut self, o: ValidationReport) -> Self {
        self.cases += o.cases;
        self.outcomes_compared += o.outcomes_compared;
        self.support_mismatches += o.support_mismatches;
        self.inference_disagreements += o.inference_disagreements;
        self.support_size_anomalies += o.support_size_anomalies;
        self.max_probability_residual = self.max_probability_residual.max(o.max_probability_residual);
        self.max_post_state_residual = self.max_post_state_residual.max(o.max_post_state_residual);
        self
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.support_mismatches == 0
            && self.inference_disagreements == 0
            && self.support_size_anomalies == 0
            && self.max_probability_residual < tol
            && self.max_post_state_residual < tol
    }
}

/// Compares enumerated supports with the predicted label sets, and the
/// protocol's inference with the hidden record, for every case with a
/// family-A preparation and either control family.
pub fn cross_validate(q: &Qudit) -> ValidationReport {
    let start = Instant::now();
    let mut report = MesLabel::all(q, MesFamily::A)
        .par_iter()
        .map(|&prepared| validate_preparation(q, prepared))
        .reduce(ValidationReport::default, ValidationReport::merge);
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

fn validate_preparation(q: &Qudit, prepared: MesLabel) -> ValidationReport {
    let inv_d = 1.0 / q.dim() as f64;
    let mut r = ValidationReport::default();
    for basis in BasisLabel::all(q) {
        for m in q.elements() {
            let record = UrmRecord { basis, m };
            if let BasisLabel::Shifted(b) = basis {
                let residual = check_post_state_form(q, prepared, b, m).expect("valid labels");
                r.max_post_state_residual = r.max_post_state_residual.max(residual);
            }
            for family in [MesFamily::A, MesFamily::B] {
                r.cases += 1;
                let support = enumerate_support(q, prepared, basis, m, family).expect("possible outcome");
                let predicted: BTreeSet<_> = predicted_support(q, prepared, record, family).into_iter().collect();
                if support.labels() != predicted {
                    r.support_mismatches += 1;
                }
                if family == prepared.family && basis != BasisLabel::Computational && predicted.len() != q.dim() {
                    r.support_size_anomalies += 1;
                }
                r.max_probability_residual = r
                    .max_probability_residual
                    .max((support.total_probability() - 1.0).abs());
                for &(outcome, p) in &support.outcomes {
                    r.outcomes_compared += 1;
                    r.max_probability_residual = r.max_probability_residual.max((p - inv_d).abs());
                    if !inference_agrees(prepared, record, outcome) {
                        r.inference_disagreements += 1;
                    }
                }
            }
        }
    }
    r
}

fn inference_agrees(prepared: MesLabel, record: UrmRecord, outcome: ControlOutcome) -> bool {
    if outcome.family == prepared.family {
        let expected = if outcome.label() == prepared {
            InferenceResult::Undetermined
        } else {
            match record.basis {
                BasisLabel::Computational => InferenceResult::ComputationalBasis,
                BasisLabel::Shifted(b) => InferenceResult::ShiftedBasis(b),
            }
        };
        infer_basis(prepared, outcome).ok() == Some(expected)
    } else {
        match record.basis {
            BasisLabel::Computational => true,
            b => infer_outcome(prepared, outcome, b).ok() == Some(record.m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collective::mes_state;
    use crate::qstate::PureState;

    fn q(d: u64) -> Qudit {
        Qudit::new(d).unwrap()
    }

    fn label(q: &Qudit, mdd: i64, m0: i64) -> MesLabel {
        MesLabel::new(MesFamily::A, q.elem(mdd), q.elem(m0))
    }

    #[test]
    fn naive_vectors_agree_with_library_constructors() {
        let q5 = q(5);
        for basis in BasisLabel::all(&q5) {
            for m in q5.elements() {
                let lib = mub_vector(&q5, MubIndex::new(basis, m));
                let naive = PureState::unnormalized(naive_mub_vector(5, basis, m.value().into())).unwrap();
                assert!(lib.max_abs_diff(&naive) < 1e-12);
            }
        }
        for family in [MesFamily::A, MesFamily::B] {
            for l in MesLabel::all(&q5, family) {
                let naive = naive_mes(5, family, l.mdd.value().into(), l.m0.value().into());
                let naive = PureState::unnormalized(naive).unwrap();
                assert!(mes_state(&q5, l).max_abs_diff(&naive) < 1e-12);
            }
        }
    }

    #[test]
    fn qutrit_shifted_support() {
        let q3 = q(3);
        let s = enumerate_support(&q3, label(&q3, 0, 0), BasisLabel::Shifted(q3.elem(1)), q3.elem(0), MesFamily::A).unwrap();
        let got: Vec<_> = s.outcomes.iter().map(|(o, _)| (o.mdd_p.value(), o.m0_p.value())).collect();
        assert_eq!(got, vec![(0, 0), (1, 2), (2, 1)]);
        for (_, p) in &s.outcomes {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qutrit_computational_support_fixes_center() {
        let q3 = q(3);
        let s = enumerate_support(&q3, label(&q3, 0, 0), BasisLabel::Computational, q3.elem(1), MesFamily::A).unwrap();
        assert_eq!(s.outcomes.len(), 3);
        assert!(s.outcomes.iter().all(|(o, _)| o.mdd_p.value() == 0));
        assert!((s.total_probability() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn post_state_closed_form_qutrit_exhaustive() {
        let q3 = q(3);
        let mut count = 0;
        for prepared in MesLabel::all(&q3, MesFamily::A) {
            for b in q3.elements() {
                for m in q3.elements() {
                    assert!(check_post_state_form(&q3, prepared, b, m).unwrap() < 1e-9);
                    count += 1;
                }
            }
        }
        assert_eq!(count, 81);
    }

    #[test]
    fn post_state_spot_check_d5() {
        assert!(post_state_spot_check(&q(5), 25, 99).unwrap() < 1e-9);
    }

    #[test]
    fn corrupted_partner_index_is_detected() {
        let q5 = q(5);
        for prepared in MesLabel::all(&q5, MesFamily::A) {
            for b in q5.elements() {
                for m in q5.elements() {
                    let wrong = partner_index(prepared, b, m) + q5.elem(1);
                    assert!(post_state_residual(&q5, prepared, b, m, wrong).unwrap() > 0.5);
                }
            }
        }
    }

    #[test]
    fn cross_validation_small_primes() {
        for d in [3, 5] {
            let r = cross_validate(&q(d));
            assert!(r.passed(1e-9), "{r:?}");
            let du = d as u64;
            assert_eq!(r.cases, du * du * (du + 1) * du * 2);
            assert_eq!(r.outcomes_compared, r.cases * du);
        }
    }

    #[test]
    fn inference_agreement_detects_wrong_record() {
        let q3 = q(3);
        let prepared = label(&q3, 0, 0);
        let truth = UrmRecord { basis: BasisLabel::Shifted(q3.elem(1)), m: q3.elem(0) };
        let lie = UrmRecord { basis: BasisLabel::Shifted(q3.elem(2)), m: q3.elem(0) };
        let o = ControlOutcome::from(MesLabel::new(MesFamily::A, q3.elem(1), q3.elem(2)));
        assert!(inference_agrees(prepared, truth, o));
        assert!(!inference_agrees(prepared, lie, o));
    }
}
