//! Conductance operators and the `m × m` update matrix.
//!
//! A conductance is a PSD linear map `G` on vectorized matrices. Only its
//! action `M ↦ unvec(G·vec(M))` is ever computed:
//!
//! * first ansatz, `G = ½(C⁻¹⊗X + X⊗C⁻¹)`: `M ↦ ½(X M C⁻¹ + C⁻¹ M X)`
//! * second ansatz, `G = X⊗X`: `M ↦ X M X`

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::matcore::SymMatrix;
use crate::model::SdpProblem;
use crate::par::{map_range, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConductanceKind {
    #[serde(alias = "first_ansatz")]
    First,
    #[serde(alias = "second_ansatz")]
    Second,
}

impl ConductanceKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::First => "first",
            Self::Second => "second",
        }
    }
}

impl std::str::FromStr for ConductanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" | "1" => Ok(Self::First),
            "second" | "2" => Ok(Self::Second),
            other => Err(format!("unknown ansatz '{other}' (expected first or second)")),
        }
    }
}

/// A PSD operator on symmetric matrices, bound to one iterate.
pub trait Conductance: Sync {
    fn apply(&self, m: &SymMatrix) -> SymMatrix;
}

/// One of the two shipped conductances, snapshotted at iterate `X`.
#[derive(Debug, Clone, Copy)]
pub struct ConductanceOperator<'a> {
    kind: ConductanceKind,
    x: &'a SymMatrix,
    c_inv: &'a SymMatrix,
}

impl<'a> ConductanceOperator<'a> {
    pub fn new(kind: ConductanceKind, prob: &'a SdpProblem, x: &'a SymMatrix) -> Self {
        assert_eq!(x.dim(), prob.n(), "iterate dimension does not match the problem");
        Self { kind, x, c_inv: prob.c_inv() }
    }

    pub fn kind(&self) -> ConductanceKind {
        self.kind
    }

    pub fn x(&self) -> &SymMatrix {
        self.x
    }
}

impl Conductance for ConductanceOperator<'_> {
    fn apply(&self, m: &SymMatrix) -> SymMatrix {
        match self.kind {
            ConductanceKind::First => {
                // X M C⁻¹ and C⁻¹ M X are transposes of each other.
                let t = self.x.as_dmatrix() * m.as_dmatrix() * self.c_inv.as_dmatrix();
                SymMatrix::symmetrized(t)
            }
            ConductanceKind::Second => self.x.sandwich(m),
        }
    }
}

pub fn apply(op: &impl Conductance, m: &SymMatrix) -> SymMatrix {
    op.apply(m)
}

/// `G`-images of the constraints together with `Lᵢⱼ = tr(Aᵢ·G(Aⱼ))`.
#[derive(Debug, Clone)]
pub struct UpdateSystem {
    pub images: Vec<SymMatrix>,
    pub l: DMatrix<f64>,
}

pub fn assemble(op: &impl Conductance, prob: &SdpProblem, exec: Exec) -> UpdateSystem {
    let a = prob.a();
    let m = a.len();
    let images = map_range(m, exec, |j| op.apply(&a[j]));
    let cols: Vec<Vec<f64>> = map_range(m, exec, |j| (0..m).map(|i| a[i].dot(&images[j])).collect());
    let mut l = DMatrix::zeros(m, m);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            l[(i, j)] = *v;
        }
    }
    let l = 0.5 * (&l + l.transpose());
    UpdateSystem { images, l }
}

pub fn build_l(op: &impl Conductance, prob: &SdpProblem) -> DMatrix<f64> {
    assemble(op, prob, Exec::Sequential).l
}

pub fn build_l_with(op: &impl Conductance, prob: &SdpProblem, exec: Exec) -> DMatrix<f64> {
    assemble(op, prob, exec).l
}

/// `tr(Aℓ·G(C))` for every constraint.
pub fn rhs_feasible(op: &impl Conductance, prob: &SdpProblem) -> DVector<f64> {
    let gc = op.apply(prob.c());
    DVector::from_iterator(prob.m(), prob.a().iter().map(|a| a.dot(&gc)))
}
