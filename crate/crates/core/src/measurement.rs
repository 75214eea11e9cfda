//! Ideal projective readout of the charge qubit and post-selection of the
//! cavity state.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    coherent_overlap, BranchDecomposition, Label, QubitBasis, LABEL_TAIL_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::hilbert::{CavityState, JointState, Qubit, StateVector, ZERO};

/// Outcome probabilities below this are treated as impossible.
pub const NULL_PROBABILITY: f64 = 1e-14;

/// One cavity term `weight · |label>` of a post-selected state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityTerm {
    pub weight: C64,
    pub label: Label,
}

/// Normalized post-selected cavity state in label form. `normalization` is
/// the factor applied to the raw branch weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPost {
    pub normalization: f64,
    pub terms: Vec<CavityTerm>,
}

impl AnalyticPost {
    pub fn required_dim(&self) -> Result<usize> {
        let mut dim = 2;
        for t in &self.terms {
            dim = dim.max(t.label.required_dim(LABEL_TAIL_TOLERANCE)?);
        }
        Ok(dim)
    }

    pub fn materialize(&self, fock_dim: usize) -> Result<CavityState> {
        let (amps, tail) = superpose(&self.terms, fock_dim);
        if tail >= LABEL_TAIL_TOLERANCE {
            return Err(Error::TruncationInsufficient {
                fock_dim,
                tail,
                required: self.required_dim()?,
            });
        }
        CavityState::from_unnormalized(amps, tail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub outcome: Qubit,
    pub probability: f64,
    pub post_state: CavityState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_post: Option<AnalyticPost>,
}

/// States whose qubit can be read out.
pub trait Measurable {
    fn measure(&self, outcome: Qubit) -> Result<MeasurementRecord>;
}

pub fn measure_qubit<M: Measurable + ?Sized>(
    state: &M,
    outcome: Qubit,
) -> Result<MeasurementRecord> {
    state.measure(outcome)
}

fn null_outcome(outcome: Qubit, probability: f64) -> Error {
    Error::NullOutcome {
        outcome: outcome.to_string(),
        probability,
    }
}

impl Measurable for JointState {
    fn measure(&self, outcome: Qubit) -> Result<MeasurementRecord> {
        let block = self.block(outcome);
        let probability = block.norm_squared() / self.norm_sqr();
        if probability < NULL_PROBABILITY {
            return Err(null_outcome(outcome, probability));
        }
        let post_state = CavityState::from_unnormalized(block, self.leakage())?;
        Ok(MeasurementRecord {
            outcome,
            probability,
            post_state,
            analytic_post: None,
        })
    }
}

/// `<x|y>` of two labels: closed form for coherent pairs, Fock sum otherwise.
pub fn label_overlap(x: &Label, y: &Label) -> Result<C64> {
    match (x, y) {
        (Label::Coherent(a), Label::Coherent(b)) => Ok(coherent_overlap(a, b)),
        _ => {
            let dim = x
                .required_dim(LABEL_TAIL_TOLERANCE * 1e-2)?
                .max(y.required_dim(LABEL_TAIL_TOLERANCE * 1e-2)?);
            let (u, _) = x.amplitudes(dim);
            let (v, _) = y.amplitudes(dim);
            Ok(u.dotc(&v))
        }
    }
}

fn superpose(terms: &[CavityTerm], fock_dim: usize) -> (nalgebra::DVector<C64>, f64) {
    let mut amps = nalgebra::DVector::from_element(fock_dim, ZERO);
    let mut tail = 0.0f64;
    for t in terms {
        let (v, tl) = t.label.amplitudes(fock_dim);
        tail = tail.max(tl);
        amps += v * t.weight;
    }
    (amps, tail)
}

impl Measurable for BranchDecomposition {
    fn measure(&self, outcome: Qubit) -> Result<MeasurementRecord> {
        let charge = self.in_charge_basis();
        let target = QubitBasis::from(outcome);
        let terms: Vec<CavityTerm> = charge
            .branches
            .iter()
            .filter(|b| b.qubit == target)
            .map(|b| CavityTerm {
                weight: b.weight,
                label: b.label,
            })
            .collect();

        let mut probability = 0.0;
        for x in &terms {
            for y in &terms {
                probability += (x.weight.conj() * y.weight * label_overlap(&x.label, &y.label)?).re;
            }
        }
        if probability < NULL_PROBABILITY {
            return Err(null_outcome(outcome, probability.max(0.0)));
        }
        let normalization = probability.sqrt().recip();
        let analytic_post = AnalyticPost {
            normalization,
            terms: terms
                .iter()
                .map(|t| CavityTerm {
                    weight: t.weight * normalization,
                    label: t.label,
                })
                .collect(),
        };
        let post_state = analytic_post.materialize(analytic_post.required_dim()?)?;
        Ok(MeasurementRecord {
            outcome,
            probability,
            post_state,
            analytic_post: Some(analytic_post),
        })
    }
}

/// Weight of the state on even and on odd photon numbers.
pub fn parity_spectrum(state: &CavityState) -> (f64, f64) {
    let (mut even, mut odd) = (0.0, 0.0);
    for (n, z) in state.amplitudes().iter().enumerate() {
        if n % 2 == 0 {
            even += z.norm_sqr();
        } else {
            odd += z.norm_sqr();
        }
    }
    let total = even + odd;
    (even / total, odd / total)
}
