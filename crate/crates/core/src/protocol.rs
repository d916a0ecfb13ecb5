//! Measurement episodes and the exact inference that recovers data lost in
//! an unrecorded measurement.
//!
//! An episode: a two-particle MES is prepared; `K_b` is measured on particle
//! 1 with both `b` and the outcome `m` hidden; finally one of the two MES
//! bases is measured on the pair. When the control basis belongs to the same
//! family as the prepared state, the control outcome `(m̈', m0')` satisfies
//!
//! ```text
//! m0' + b m̈' = m0 + b m̈            (shifted b)
//! m̈' = m̈                           (computational b)
//! ```
//!
//! which determines `b` unless the outcome equals the prepared label. With
//! the conjugate family it satisfies
//!
//! ```text
//! m = (m0 + m0') + b (m̈ + m̈') - b/2
//! ```
//!
//! which yields `m` once `b` is known. The quantum simulation only decides
//! which outcomes occur; inference is done in Z_d on labels.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::collective::{mes_state, GammaBasis, MesFamily, MesLabel};
use crate::mub::{mub_basis, mub_vector, BasisLabel, MubIndex};
use crate::qstate::{
    born_probabilities, project_particle1, sample_index, seeded_rng, PureState, Qudit,
    StateError, SUPPORT_THRESHOLD,
};
use crate::zmod::{FieldElem, ZmodError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Field(#[from] ZmodError),
    #[error("measurement outcome has probability {0:e}")]
    ImpossibleOutcome(f64),
    #[error("prepared family {prepared} and control family {control} do not fit this inference")]
    FamilyMismatch {
        prepared: MesFamily,
        control: MesFamily,
    },
    #[error("outcome inference needs a shifted basis")]
    ComputationalBasis,
}

/// Bob's hidden measurement: the basis of `K_b` and its outcome label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UrmRecord {
    pub basis: BasisLabel,
    pub m: FieldElem,
}

impl fmt::Display for UrmRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b={} m={}", self.basis, self.m)
    }
}

/// Result of the two-particle control measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ControlOutcome {
    pub family: MesFamily,
    pub mdd_p: FieldElem,
    pub m0_p: FieldElem,
}

impl From<MesLabel> for ControlOutcome {
    fn from(l: MesLabel) -> Self {
        Self {
            family: l.family,
            mdd_p: l.mdd,
            m0_p: l.m0,
        }
    }
}

impl ControlOutcome {
    pub fn label(self) -> MesLabel {
        MesLabel::new(self.family, self.mdd_p, self.m0_p)
    }
}

impl fmt::Display for ControlOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.label().fmt(f)
    }
}

/// Verdict about the hidden basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InferenceResult {
    ShiftedBasis(FieldElem),
    ComputationalBasis,
    Undetermined,
}

impl InferenceResult {
    pub fn is_definite(self) -> bool {
        !matches!(self, InferenceResult::Undetermined)
    }

    /// Whether a definite verdict names `basis`. `None` when undetermined.
    pub fn matches(self, basis: BasisLabel) -> Option<bool> {
        match (self, basis) {
            (InferenceResult::Undetermined, _) => None,
            (InferenceResult::ComputationalBasis, b) => Some(b == BasisLabel::Computational),
            (InferenceResult::ShiftedBasis(x), b) => Some(b == BasisLabel::Shifted(x)),
        }
    }
}

impl fmt::Display for InferenceResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InferenceResult::ShiftedBasis(b) => write!(f, "basis {b}"),
            InferenceResult::ComputationalBasis => f.write_str("computational basis"),
            InferenceResult::Undetermined => f.write_str("undetermined"),
        }
    }
}

/// State after the hidden measurement, with its record and probability.
#[derive(Debug, Clone)]
pub struct UrmEpisode {
    pub state: PureState,
    pub record: UrmRecord,
    pub probability: f64,
}

/// Projects particle 1 of `state` onto `|m; b>` and renormalizes.
pub fn apply_urm(q: &Qudit, state: &PureState, record: UrmRecord) -> Result<UrmEpisode, ProtocolError> {
    let v = mub_vector(q, MubIndex::new(record.basis, record.m));
    let (probability, projected) = project_particle1(state, &v)?;
    if probability < SUPPORT_THRESHOLD {
        return Err(ProtocolError::ImpossibleOutcome(probability));
    }
    Ok(UrmEpisode {
        state: projected.normalize()?,
        record,
        probability,
    })
}

/// Enumeration mode: prepares `prepared` and applies the given record.
pub fn run_urm(q: &Qudit, prepared: MesLabel, record: UrmRecord) -> Result<UrmEpisode, ProtocolError> {
    apply_urm(q, &mes_state(q, prepared), record)
}

/// Sampling mode: the outcome `m` of `K_b` is drawn by the Born rule.
pub fn run_urm_sampled<R: Rng + ?Sized>(
    q: &Qudit,
    prepared: MesLabel,
    basis: BasisLabel,
    rng: &mut R,
) -> Result<UrmEpisode, ProtocolError> {
    let state = mes_state(q, prepared);
    let probs: Vec<f64> = q
        .elements()
        .map(|m| {
            let v = mub_vector(q, MubIndex::new(basis, m));
            project_particle1(&state, &v).map(|(p, _)| p)
        })
        .collect::<Result<_, _>>()?;
    let m = q.elem(sample_index(&probs, rng) as i64);
    apply_urm(q, &state, UrmRecord { basis, m })
}

/// Born distribution of the control measurement over the MES basis.
pub fn control_distribution(
    state: &PureState,
    gamma: &GammaBasis,
) -> Result<Vec<(ControlOutcome, f64)>, ProtocolError> {
    let probs = born_probabilities(state, &gamma.basis)?;
    Ok(gamma
        .labels
        .iter()
        .map(|&l| ControlOutcome::from(l))
        .zip(probs)
        .collect())
}

/// Outcomes with probability above [`SUPPORT_THRESHOLD`].
pub fn control_support(
    state: &PureState,
    gamma: &GammaBasis,
) -> Result<Vec<(ControlOutcome, f64)>, ProtocolError> {
    let mut dist = control_distribution(state, gamma)?;
    dist.retain(|&(_, p)| p > SUPPORT_THRESHOLD);
    Ok(dist)
}

pub fn control_measure<R: Rng + ?Sized>(
    state: &PureState,
    gamma: &GammaBasis,
    rng: &mut R,
) -> Result<ControlOutcome, ProtocolError> {
    if !state.is_normalized() {
        return Err(StateError::NotNormalized(state.norm_sqr()).into());
    }
    let probs = born_probabilities(state, &gamma.basis)?;
    Ok(gamma.labels[sample_index(&probs, rng)].into())
}

/// Recovers the hidden basis from a control outcome in the prepared
/// state's own family.
pub fn infer_basis(prepared: MesLabel, outcome: ControlOutcome) -> Result<InferenceResult, ProtocolError> {
    if prepared.family != outcome.family {
        return Err(ProtocolError::FamilyMismatch {
            prepared: prepared.family,
            control: outcome.family,
        });
    }
    if outcome.mdd_p != prepared.mdd {
        let b = (prepared.m0 - outcome.m0_p).try_div(outcome.mdd_p - prepared.mdd)?;
        Ok(InferenceResult::ShiftedBasis(b))
    } else if outcome.m0_p != prepared.m0 {
        Ok(InferenceResult::ComputationalBasis)
    } else {
        Ok(InferenceResult::Undetermined)
    }
}

/// Recovers the hidden outcome `m` given a shifted basis `b`, from a
/// control outcome in the conjugate family.
pub fn infer_outcome(
    prepared: MesLabel,
    outcome: ControlOutcome,
    basis: BasisLabel,
) -> Result<FieldElem, ProtocolError> {
    if prepared.family == outcome.family {
        return Err(ProtocolError::FamilyMismatch {
            prepared: prepared.family,
            control: outcome.family,
        });
    }
    let b = basis.shifted().ok_or(ProtocolError::ComputationalBasis)?;
    let half = b.modulus().half();
    Ok((prepared.m0 + outcome.m0_p) + b * (prepared.mdd + outcome.mdd_p) - b * half)
}

/// Whether a control label satisfies the modular constraint for this
/// preparation and hidden record.
pub fn satisfies_constraint(prepared: MesLabel, record: UrmRecord, outcome: ControlOutcome) -> bool {
    let (mdd, m0) = (prepared.mdd, prepared.m0);
    let (mdd_p, m0_p) = (outcome.mdd_p, outcome.m0_p);
    let same_family = prepared.family == outcome.family;
    match (record.basis, same_family) {
        (BasisLabel::Shifted(b), true) => m0_p + b * mdd_p == m0 + b * mdd,
        (BasisLabel::Shifted(b), false) => {
            let half = b.modulus().half();
            let two = b.modulus().elem(2);
            let m = record.m;
            m - two * (m0_p + b * mdd_p) == two * (m0 + b * mdd - b * half) - m
        }
        // A computational-basis measurement fixes the pair to |m>|2m̈ - m>
        // for either preparation, which pins the computational coordinate
        // of the control basis.
        (BasisLabel::Computational, true) => mdd_p == mdd,
        (BasisLabel::Computational, false) => mdd_p == record.m - mdd,
    }
}

/// All control labels allowed by the modular constraint.
pub fn predicted_support(
    q: &Qudit,
    prepared: MesLabel,
    record: UrmRecord,
    control: MesFamily,
) -> Vec<ControlOutcome> {
    MesLabel::all(q, control)
        .into_iter()
        .map(ControlOutcome::from)
        .filter(|&o| satisfies_constraint(prepared, record, o))
        .collect()
}

/// Tallies from an exhaustive sweep over preparations, hidden records and
/// control outcomes in the quantum support.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub cases_total: u64,
    pub support_total: u64,
    pub correct_definite: u64,
    pub undetermined: u64,
    pub wrong_definite: u64,
    pub constraint_violations: u64,
    /// Shifted-basis cases whose support is not exactly `d` outcomes with
    /// the expected inference pattern.
    pub completeness_failures: u64,
    pub computational_cases: u64,
    pub computational_support: u64,
    /// Basis sweep: histogram of `m0' - m0` over computational-basis
    /// support outcomes. Outcome sweep: count of computational-basis
    /// support outcomes with `m = m̈ + m̈'`.
    pub computational_observations: Vec<u64>,
    pub max_residual: f64,
    pub elapsed_ms: u128,
}

impl SweepReport {
    fn empty(d: usize) -> Self {
        Self {
            computational_observations: vec![0; d],
            ..Self::default()
        }
    }

    fn merge(mut self, other: SweepReport) -> SweepReport {
        self.cases_total += other.cases_total;
        self.support_total += other.support_total;
        self.correct_definite += other.correct_definite;
        self.undetermined += other.undetermined;
        self.wrong_definite += other.wrong_definite;
        self.constraint_violations += other.constraint_violations;
        self.completeness_failures += other.completeness_failures;
        self.computational_cases += other.computational_cases;
        self.computational_support += other.computational_support;
        for (a, b) in self
            .computational_observations
            .iter_mut()
            .zip(&other.computational_observations)
        {
            *a += b;
        }
        self.max_residual = self.max_residual.max(other.max_residual);
        self
    }

    pub fn passed(&self) -> bool {
        self.wrong_definite == 0 && self.constraint_violations == 0 && self.completeness_failures == 0
    }
}

/// Exhaustive sweep with the control basis in the prepared family
/// (basis retrieval).
pub fn sweep_protocol_a(q: &Qudit) -> SweepReport {
    sweep(q, MesFamily::A, MesFamily::A)
}

/// Exhaustive sweep with the conjugate control basis (outcome retrieval
/// given the basis).
pub fn sweep_protocol_b(q: &Qudit) -> SweepReport {
    sweep(q, MesFamily::A, MesFamily::B)
}

pub fn sweep(q: &Qudit, prepared_family: MesFamily, control: MesFamily) -> SweepReport {
    let start = Instant::now();
    let gamma = GammaBasis::new(q, control);
    let d = q.dim();
    let mut report = MesLabel::all(q, prepared_family)
        .par_iter()
        .map(|&prepared| sweep_preparation(q, &gamma, prepared))
        .reduce(|| SweepReport::empty(d), SweepReport::merge);
    report.elapsed_ms = start.elapsed().as_millis();
    report
}

fn sweep_preparation(q: &Qudit, gamma: &GammaBasis, prepared: MesLabel) -> SweepReport {
    let d = q.dim();
    let inv_d = 1.0 / d as f64;
    let retrieve_basis = prepared.family == gamma.family;
    let state = mes_state(q, prepared);
    let mut r = SweepReport::empty(d);
    for basis in BasisLabel::all(q) {
        for m in q.elements() {
            let record = UrmRecord { basis, m };
            let episode = apply_urm(q, &state, record).expect("every MES outcome has probability 1/d");
            let support = control_support(&episode.state, gamma).expect("dimensions agree");
            r.cases_total += 1;
            r.support_total += support.len() as u64;
            let total: f64 = support.iter().map(|(_, p)| p).sum();
            r.max_residual = r
                .max_residual
                .max((episode.probability - inv_d).abs())
                .max((total - 1.0).abs());

            let mut case_correct = 0;
            let mut case_undetermined = 0;
            for &(outcome, p) in &support {
                r.max_residual = r.max_residual.max((p - inv_d).abs());
                if !satisfies_constraint(prepared, record, outcome) {
                    r.constraint_violations += 1;
                }
                if basis == BasisLabel::Computational {
                    r.computational_support += 1;
                    if retrieve_basis {
                        r.computational_observations[(outcome.m0_p - prepared.m0).index()] += 1;
                    } else if m == prepared.mdd + outcome.mdd_p {
                        r.computational_observations[0] += 1;
                    }
                }
                if retrieve_basis {
                    let verdict = infer_basis(prepared, outcome).expect("same family");
                    match verdict.matches(basis) {
                        None => {
                            r.undetermined += 1;
                            case_undetermined += 1;
                        }
                        Some(true) => {
                            r.correct_definite += 1;
                            case_correct += 1;
                        }
                        Some(false) => r.wrong_definite += 1,
                    }
                } else if basis != BasisLabel::Computational {
                    let inferred = infer_outcome(prepared, outcome, basis).expect("conjugate family, shifted basis");
                    if inferred == m {
                        r.correct_definite += 1;
                        case_correct += 1;
                    } else {
                        r.wrong_definite += 1;
                    }
                }
            }
            if basis == BasisLabel::Computational {
                r.computational_cases += 1;
            } else {
                let expected = if retrieve_basis { (d - 1, 1) } else { (d, 0) };
                if support.len() != d || (case_correct, case_undetermined) != expected {
                    r.completeness_failures += 1;
                }
            }
        }
    }
    r
}

/// Exact probability of each control label when Bob measures in `basis`
/// with a Born-sampled outcome: `sum_m P(m) P(label | m)`.
pub fn enumerated_control_distribution(
    q: &Qudit,
    prepared: MesLabel,
    basis: BasisLabel,
    gamma: &GammaBasis,
) -> Result<Vec<f64>, ProtocolError> {
    let state = mes_state(q, prepared);
    let mut total = vec![0.0; gamma.len()];
    for v in mub_basis(q, basis).iter() {
        let (p_m, projected) = project_particle1(&state, v)?;
        if p_m < SUPPORT_THRESHOLD {
            continue;
        }
        let post = projected.normalize()?;
        for (acc, p) in total.iter_mut().zip(born_probabilities(&post, &gamma.basis)?) {
            *acc += p_m * p;
        }
    }
    Ok(total)
}

/// Counts of control labels over `trials` sampled episodes with a fixed
/// preparation and basis. Single generator, so runs are bit-reproducible.
pub fn sample_control_counts(
    q: &Qudit,
    prepared: MesLabel,
    basis: BasisLabel,
    gamma: &GammaBasis,
    trials: u64,
    seed: u64,
) -> Result<Vec<u64>, ProtocolError> {
    let mut rng = seeded_rng(seed);
    let state = mes_state(q, prepared);
    // Post-measurement states per m are fixed; sample from cached tables.
    let mut urm_probs = Vec::with_capacity(q.dim());
    let mut control_probs = Vec::with_capacity(q.dim());
    for m in q.elements() {
        let v = mub_vector(q, MubIndex::new(basis, m));
        let (p, projected) = project_particle1(&state, &v)?;
        urm_probs.push(p);
        control_probs.push(if p < SUPPORT_THRESHOLD {
            vec![0.0; gamma.len()]
        } else {
            born_probabilities(&projected.normalize()?, &gamma.basis)?
        });
    }
    let mut counts = vec![0u64; gamma.len()];
    for _ in 0..trials {
        let m = sample_index(&urm_probs, &mut rng);
        counts[sample_index(&control_probs[m], &mut rng)] += 1;
    }
    Ok(counts)
}

/// What the control measurement revealed in one sampled episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retrieval {
    Basis(InferenceResult),
    /// Outcome inferred given the (revealed) basis; `None` for the
    /// computational basis, where no closed form is used.
    Outcome(Option<FieldElem>),
}

#[derive(Debug, Clone)]
pub struct EpisodeTranscript {
    pub prepared: MesLabel,
    pub record: UrmRecord,
    pub control: ControlOutcome,
    pub retrieval: Retrieval,
}

impl EpisodeTranscript {
    /// `Some(true)` if the retrieved data is right, `Some(false)` if a
    /// definite answer is wrong, `None` if nothing was retrieved.
    pub fn verdict(&self) -> Option<bool> {
        match self.retrieval {
            Retrieval::Basis(r) => r.matches(self.record.basis),
            Retrieval::Outcome(m) => m.map(|m| m == self.record.m),
        }
    }
}

/// A full sampled episode. The preparation is given; the hidden basis is
/// drawn uniformly from the `d + 1` bases unless fixed; the hidden outcome
/// is drawn by the Born rule unless fixed.
pub fn run_episode<R: Rng + ?Sized>(
    q: &Qudit,
    prepared: MesLabel,
    basis: Option<BasisLabel>,
    outcome: Option<FieldElem>,
    control: MesFamily,
    rng: &mut R,
) -> Result<EpisodeTranscript, ProtocolError> {
    let basis = match basis {
        Some(b) => b,
        None => {
            let all = BasisLabel::all(q);
            all[rng.random_range(0..all.len())]
        }
    };
    let episode = match outcome {
        Some(m) => run_urm(q, prepared, UrmRecord { basis, m })?,
        None => run_urm_sampled(q, prepared, basis, rng)?,
    };
    let gamma = GammaBasis::new(q, control);
    let control_outcome = control_measure(&episode.state, &gamma, rng)?;
    let retrieval = if prepared.family == control {
        Retrieval::Basis(infer_basis(prepared, control_outcome)?)
    } else {
        Retrieval::Outcome(match basis {
            BasisLabel::Computational => None,
            b => Some(infer_outcome(prepared, control_outcome, b)?),
        })
    };
    Ok(EpisodeTranscript {
        prepared,
        record: episode.record,
        control: control_outcome,
        retrieval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{equal_up_to_global_phase, tensor};

    fn q(d: u64) -> Qudit {
        Qudit::new(d).unwrap()
    }

    fn label(q: &Qudit, family: MesFamily, mdd: i64, m0: i64) -> MesLabel {
        MesLabel::new(family, q.elem(mdd), q.elem(m0))
    }

    fn outcome(q: &Qudit, family: MesFamily, mdd: i64, m0: i64) -> ControlOutcome {
        label(q, family, mdd, m0).into()
    }

    fn shifted(q: &Qudit, b: i64) -> BasisLabel {
        BasisLabel::Shifted(q.elem(b))
    }

    #[test]
    fn infer_basis_examples() {
        let q3 = q(3);
        let prep = label(&q3, MesFamily::A, 0, 0);
        let r = infer_basis(prep, outcome(&q3, MesFamily::A, 1, 2)).unwrap();
        assert_eq!(r, InferenceResult::ShiftedBasis(q3.elem(1)));
        let r = infer_basis(prep, outcome(&q3, MesFamily::A, 0, 1)).unwrap();
        assert_eq!(r, InferenceResult::ComputationalBasis);
        let r = infer_basis(prep, outcome(&q3, MesFamily::A, 0, 0)).unwrap();
        assert_eq!(r, InferenceResult::Undetermined);
        assert!(matches!(
            infer_basis(prep, outcome(&q3, MesFamily::B, 0, 0)),
            Err(ProtocolError::FamilyMismatch { .. })
        ));
    }

    #[test]
    fn infer_outcome_examples() {
        let q3 = q(3);
        let prep = label(&q3, MesFamily::A, 0, 0);
        for mdd in 0..3 {
            for m0 in 0..3 {
                let m = infer_outcome(prep, outcome(&q3, MesFamily::B, mdd, m0), shifted(&q3, 0)).unwrap();
                assert_eq!(m, q3.elem(m0));
            }
        }
        let m = infer_outcome(prep, outcome(&q3, MesFamily::B, 0, 0), shifted(&q3, 1)).unwrap();
        assert_eq!(m.value(), 1);

        let q5 = q(5);
        let prep = label(&q5, MesFamily::A, 1, 2);
        let m = infer_outcome(prep, outcome(&q5, MesFamily::B, 2, 4), shifted(&q5, 3)).unwrap();
        assert_eq!(m.value(), 1);

        assert_eq!(
            infer_outcome(prep, outcome(&q5, MesFamily::B, 2, 4), BasisLabel::Computational),
            Err(ProtocolError::ComputationalBasis)
        );
        assert!(infer_outcome(prep, outcome(&q5, MesFamily::A, 2, 4), shifted(&q5, 1)).is_err());
    }

    #[test]
    fn outcome_examples_are_in_the_quantum_support() {
        // The (0,0) outcome with b = 1 at d = 3 is only reachable when m = 1;
        // likewise (2,4) with b = 3 at d = 5 from A(1,2) only when m = 1.
        for (d, prep, b, out, m_true) in [(3u64, (0, 0), 1, (0, 0), 1), (5, (1, 2), 3, (2, 4), 1)] {
            let qd = q(d);
            let gamma = GammaBasis::new(&qd, MesFamily::B);
            let prep = label(&qd, MesFamily::A, prep.0, prep.1);
            let out = outcome(&qd, MesFamily::B, out.0, out.1);
            for m in qd.elements() {
                let ep = run_urm(&qd, prep, UrmRecord { basis: shifted(&qd, b), m }).unwrap();
                let support = control_support(&ep.state, &gamma).unwrap();
                let reachable = support.iter().any(|&(o, _)| o == out);
                assert_eq!(reachable, m.value() == m_true, "m = {m}");
            }
        }
    }

    #[test]
    fn urm_probabilities_are_uniform() {
        let q5 = q(5);
        for prep in MesLabel::all(&q5, MesFamily::A) {
            for basis in BasisLabel::all(&q5) {
                for m in q5.elements() {
                    let ep = run_urm(&q5, prep, UrmRecord { basis, m }).unwrap();
                    assert!((ep.probability - 0.2).abs() < 1e-10);
                    assert!(ep.state.is_normalized());
                }
            }
        }
    }

    #[test]
    fn computational_urm_collapses_ancilla() {
        let q5 = q(5);
        for mdd in 0..5 {
            let prep = label(&q5, MesFamily::A, mdd, 3);
            for n in q5.elements() {
                let ep = run_urm(&q5, prep, UrmRecord { basis: BasisLabel::Computational, m: n }).unwrap();
                let partner = q5.elem(2 * mdd) - n;
                let expect = tensor(
                    &PureState::basis_vector(5, n.index()),
                    &PureState::basis_vector(5, partner.index()),
                );
                assert!(equal_up_to_global_phase(&ep.state, &expect, 1e-12));
            }
        }
    }

    #[test]
    fn impossible_outcome_is_rejected() {
        let q3 = q(3);
        let product = tensor(&PureState::basis_vector(3, 0), &PureState::basis_vector(3, 0));
        let record = UrmRecord {
            basis: BasisLabel::Computational,
            m: q3.elem(1),
        };
        assert!(matches!(apply_urm(&q3, &product, record), Err(ProtocolError::ImpossibleOutcome(_))));
    }

    #[test]
    fn untouched_preparation_returns_itself() {
        let q3 = q(3);
        let gamma = GammaBasis::new(&q3, MesFamily::A);
        for prep in MesLabel::all(&q3, MesFamily::A) {
            let state = mes_state(&q3, prep);
            let support = control_support(&state, &gamma).unwrap();
            assert_eq!(support.len(), 1);
            assert_eq!(support[0].0, ControlOutcome::from(prep));
            assert!((support[0].1 - 1.0).abs() < 1e-10);
            for seed in 0..10 {
                let o = control_measure(&state, &gamma, &mut seeded_rng(seed)).unwrap();
                assert_eq!(infer_basis(prep, o).unwrap(), InferenceResult::Undetermined);
            }
        }
    }

    #[test]
    fn shifted_control_outcomes_obey_constraint() {
        let q5 = q(5);
        let gamma = GammaBasis::new(&q5, MesFamily::A);
        let prep = label(&q5, MesFamily::A, 2, 1);
        let mut rng = seeded_rng(11);
        for _ in 0..200 {
            let b = q5.elem(rng.random_range(0..5));
            let ep = run_urm_sampled(&q5, prep, BasisLabel::Shifted(b), &mut rng).unwrap();
            let o = control_measure(&ep.state, &gamma, &mut rng).unwrap();
            assert_eq!(o.m0_p + b * o.mdd_p, prep.m0 + b * prep.mdd);
        }
    }

    #[test]
    fn qutrit_sweeps() {
        let q3 = q(3);
        let a = sweep_protocol_a(&q3);
        assert_eq!(a.cases_total, 9 * 4 * 3);
        assert_eq!(a.support_total, 9 * 4 * 3 * 3);
        assert_eq!(a.wrong_definite, 0);
        assert_eq!(a.constraint_violations, 0);
        assert_eq!(a.completeness_failures, 0);
        // shifted: 2 correct + 1 undetermined per case; computational likewise
        assert_eq!(a.undetermined, 9 * 4 * 3);
        assert_eq!(a.correct_definite, 9 * 4 * 3 * 2);
        assert!(a.max_residual < 1e-9);
        // each offset m0' - m0 occurs once per computational case
        assert_eq!(a.computational_observations, vec![27, 27, 27]);

        let b = sweep_protocol_b(&q3);
        assert_eq!(b.wrong_definite, 0);
        assert_eq!(b.constraint_violations, 0);
        assert_eq!(b.completeness_failures, 0);
        assert_eq!(b.correct_definite, 9 * 3 * 3 * 3);
        assert_eq!(b.undetermined, 0);
        assert_eq!(b.computational_support, 81);
        assert_eq!(b.computational_observations[0], 81);
    }

    #[test]
    fn conjugate_preparations_behave_identically() {
        let q5 = q(5);
        for (prep, control) in [(MesFamily::B, MesFamily::B), (MesFamily::B, MesFamily::A)] {
            let r = sweep(&q5, prep, control);
            assert!(r.passed(), "{prep:?}/{control:?}: {r:?}");
            assert_eq!(r.support_total, 25 * 6 * 5 * 5);
        }
    }

    #[test]
    fn predicted_support_sizes() {
        let q5 = q(5);
        let prep = label(&q5, MesFamily::A, 3, 4);
        for basis in BasisLabel::all(&q5) {
            for m in q5.elements() {
                for family in [MesFamily::A, MesFamily::B] {
                    let s = predicted_support(&q5, prep, UrmRecord { basis, m }, family);
                    assert_eq!(s.len(), 5);
                }
            }
        }
    }

    #[test]
    fn episodes_are_reproducible() {
        let q5 = q(5);
        let prep = label(&q5, MesFamily::A, 1, 1);
        let run = |seed| {
            let mut rng = seeded_rng(seed);
            (0..20)
                .map(|_| {
                    let t = run_episode(&q5, prep, None, None, MesFamily::A, &mut rng).unwrap();
                    (t.record, t.control)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        for seed in 0..100 {
            let t = run_episode(&q5, prep, None, None, MesFamily::A, &mut seeded_rng(seed)).unwrap();
            assert_ne!(t.verdict(), Some(false));
            let t = run_episode(&q5, prep, Some(shifted(&q5, 3)), None, MesFamily::B, &mut seeded_rng(seed)).unwrap();
            assert_eq!(t.verdict(), Some(true));
        }
    }

    #[test]
    fn sampled_counts_track_enumeration() {
        let q3 = q(3);
        let gamma = GammaBasis::new(&q3, MesFamily::A);
        let prep = label(&q3, MesFamily::A, 1, 2);
        let basis = shifted(&q3, 2);
        let n = 20_000;
        let exact = enumerated_control_distribution(&q3, prep, basis, &gamma).unwrap();
        let counts = sample_control_counts(&q3, prep, basis, &gamma, n, 5).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), n);
        for (p, k) in exact.iter().zip(&counts) {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*k as f64 / n as f64 - p).abs() <= 5.0 * sigma + 1e-12);
        }
    }
}
