//! Spin-1 operator algebra and 27-dimensional full-system operators.
//!
//! Basis convention: the single-spin projection m runs over +1, 0, -1 and
//! maps to local indices 0, 1, 2. The full index of |m1, m2, m3> is
//! 9*i1 + 3*i2 + i3, so site 1 is the most significant tensor factor.

use crate::error::CoreError;
use crate::linalg::{checked_expm, CMatrix};
use crate::scalar::{re, C, Real};

/// 3x3 single-spin operator.
pub type SpinMatrix<T> = CMatrix<T>;
/// 27x27 full-system operator.
pub type Operator27<T> = CMatrix<T>;

pub const DIM_SPIN: usize = 3;
pub const DIM_FULL: usize = 27;

/// Rotation / generator axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SpinAxis {
    pub fn label(self) -> &'static str {
        match self {
            SpinAxis::X => "x",
            SpinAxis::Y => "y",
            SpinAxis::Z => "z",
        }
    }
}

impl std::str::FromStr for SpinAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "x" | "X" => Ok(SpinAxis::X),
            "y" | "Y" => Ok(SpinAxis::Y),
            "z" | "Z" => Ok(SpinAxis::Z),
            other => Err(format!("unknown axis {other:?}")),
        }
    }
}

/// Which of the three spins an operation addresses (1-based, as in the
/// physics convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteIndex {
    S1,
    S2,
    S3,
}

impl SiteIndex {
    pub const ALL: [SiteIndex; 3] = [SiteIndex::S1, SiteIndex::S2, SiteIndex::S3];

    pub fn new(v: u8) -> Result<Self, CoreError> {
        match v {
            1 => Ok(SiteIndex::S1),
            2 => Ok(SiteIndex::S2),
            3 => Ok(SiteIndex::S3),
            other => Err(CoreError::SiteOutOfRange(other)),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            SiteIndex::S1 => 1,
            SiteIndex::S2 => 2,
            SiteIndex::S3 => 3,
        }
    }

    fn slot(self) -> usize {
        (self.number() - 1) as usize
    }

    /// The remaining site of a pair, e.g. the spectator spin left untouched
    /// by a two-spin construction.
    pub fn other_of_pair(a: SiteIndex, b: SiteIndex) -> SiteIndex {
        *SiteIndex::ALL
            .iter()
            .find(|s| **s != a && **s != b)
            .expect("two distinct sites leave one spectator")
    }
}

/// Standard spin-1 generator for the given axis in the (m = 1, 0, -1) basis.
///
/// Sz = diag(1, 0, -1); Sx and Sy are the usual tridiagonal forms with
/// off-diagonal magnitude 1/sqrt(2).
pub fn spin_matrix<T: Real>(axis: SpinAxis) -> SpinMatrix<T> {
    let h = T::of(std::f64::consts::FRAC_1_SQRT_2);
    let mut m = CMatrix::zeros(DIM_SPIN);
    match axis {
        SpinAxis::Z => {
            m[(0, 0)] = re(T::one());
            m[(2, 2)] = re(-T::one());
        }
        SpinAxis::X => {
            m[(0, 1)] = re(h);
            m[(1, 0)] = re(h);
            m[(1, 2)] = re(h);
            m[(2, 1)] = re(h);
        }
        SpinAxis::Y => {
            m[(0, 1)] = C::new(T::zero(), -h);
            m[(1, 0)] = C::new(T::zero(), h);
            m[(1, 2)] = C::new(T::zero(), -h);
            m[(2, 1)] = C::new(T::zero(), h);
        }
    }
    m
}

/// Tensor product placing `op` at `site` and the identity elsewhere.
pub fn embed<T: Real>(op: &SpinMatrix<T>, site: SiteIndex) -> Operator27<T> {
    assert_eq!(op.dim(), DIM_SPIN, "embed expects a 3x3 operator");
    let eye = CMatrix::<T>::identity(DIM_SPIN);
    let factor = |slot: usize| if slot == site.slot() { op } else { &eye };
    factor(0).kron(factor(1)).kron(factor(2))
}

/// Tensor product of three single-spin operators, site 1 most significant.
pub fn kron3<T: Real>(
    a: &SpinMatrix<T>,
    b: &SpinMatrix<T>,
    c: &SpinMatrix<T>,
) -> Operator27<T> {
    a.kron(b).kron(c)
}

/// exp(scale * a); errors on non-finite input.
pub fn matrix_exp<T: Real>(a: &CMatrix<T>, scale: C<T>) -> Result<CMatrix<T>, CoreError> {
    checked_expm(a, scale)
}

/// Result of a phase-insensitive operator comparison.
#[derive(Debug, Clone, Copy)]
pub struct PhaseMatch<T> {
    pub equal: bool,
    /// phi such that v is closest to e^{i phi} u.
    pub phase: T,
    /// max-norm of v - e^{i phi} u.
    pub residual: T,
}

/// Compare two operators up to a global phase.
///
/// The phase is read off the largest-magnitude entry of `v`; `equal`
/// holds when the max-norm residual after phase alignment is below `tol`.
pub fn equal_up_to_phase<T: Real>(
    u: &CMatrix<T>,
    v: &CMatrix<T>,
    tol: T,
) -> Result<PhaseMatch<T>, CoreError> {
    assert_eq!(u.dim(), v.dim(), "dimension mismatch");
    let n = v.dim();
    let mut best = T::zero();
    let mut at = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let m = v[(i, j)].norm();
            if m > best {
                best = m;
                at = (i, j);
            }
        }
    }
    if best <= T::zero() {
        return Err(CoreError::ZeroOperator);
    }
    let phase = if u[at].norm() > T::zero() {
        (v[at] / u[at]).arg()
    } else {
        T::zero()
    };
    let rot = C::new(phase.cos(), phase.sin());
    let residual = v.sub(&u.scale(rot)).max_abs();
    Ok(PhaseMatch {
        equal: residual < tol,
        phase,
        residual,
    })
}
