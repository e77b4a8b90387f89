//! Every Hamiltonian of the model: one-spin terms, dipole-dipole coupling,
//! transverse field, the factorization cost operator, and their annealing
//! interpolation.
//!
//! The cost operator encodes 15 = p*q with p = 2a+1, q = 2b+1 and the
//! ternary digits a = 3*a1 + a2, b = b0 read from the three spin-Z
//! projections. Its diagonal is integer-valued and is computed in integer
//! arithmetic before conversion to complex.

use crate::engine::RunMode;
use crate::error::CoreError;
use crate::linalg::CMatrix;
use crate::scalar::{re, Real};
use crate::spinops::{embed, spin_matrix, Operator27, SiteIndex, SpinAxis, DIM_FULL};

/// One-spin physical constants: resonant frequencies and crystal-field
/// constants, in the dimensionless units used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T> {
    pub omega: [T; 3],
    pub q: [T; 3],
}

impl<T: Real> Default for SystemParams<T> {
    /// All six transition frequencies mutually distinct and much larger than
    /// the couplings, as the selective-control premise requires.
    fn default() -> Self {
        Self {
            omega: [T::of(600.0), T::of(1300.0), T::of(2000.0)],
            q: [T::of(70.0), T::of(110.0), T::of(150.0)],
        }
    }
}

impl<T: Real> SystemParams<T> {
    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.q.iter()).all(|v| v.is_finite())
    }

    /// The six transition frequencies |e_j1 - e_j2| and |e_j2 - e_j3|.
    pub fn transition_frequencies(&self) -> [T; 6] {
        let mut out = [T::zero(); 6];
        for j in 0..3 {
            out[2 * j] = (self.omega[j] - self.q[j]).abs();
            out[2 * j + 1] = (self.omega[j] + self.q[j]).abs();
        }
        out
    }

    /// Selective control wants every pair of transition frequencies separated
    /// by more than the largest coupling. Violations produce a warning, not
    /// an error.
    pub fn selectivity_warning(&self, couplings: &Couplings<T>) -> Option<String> {
        let freqs = self.transition_frequencies();
        let jmax = couplings.max_abs();
        let mut worst: Option<(T, usize, usize)> = None;
        for a in 0..6 {
            for b in (a + 1)..6 {
                let gap = (freqs[a] - freqs[b]).abs();
                if gap <= jmax && worst.is_none_or(|(g, _, _)| gap < g) {
                    worst = Some((gap, a, b));
                }
            }
        }
        worst.map(|(gap, a, b)| {
            format!(
                "transition frequencies {:.6} and {:.6} differ by {:.6} <= max|J| = {:.6}; \
                 selective rotations are not well separated",
                freqs[a], freqs[b], gap, jmax
            )
        })
    }
}

/// Dipole-dipole coupling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings<T> {
    pub j12: T,
    pub j13: T,
    pub j23: T,
}

impl<T: Real> Default for Couplings<T> {
    fn default() -> Self {
        Self {
            j12: T::of(24.0),
            j13: T::of(312.0),
            j23: T::of(104.0),
        }
    }
}

impl<T: Real> Couplings<T> {
    pub fn is_finite(&self) -> bool {
        self.j12.is_finite() && self.j13.is_finite() && self.j23.is_finite()
    }

    pub fn max_abs(&self) -> T {
        self.j12.abs().max(self.j13.abs()).max(self.j23.abs())
    }

    /// Coupling constant for an unordered pair of sites.
    pub fn for_pair(&self, a: SiteIndex, b: SiteIndex) -> T {
        use SiteIndex::*;
        match (a.min(b), a.max(b)) {
            (S1, S2) => self.j12,
            (S1, S3) => self.j13,
            (S2, S3) => self.j23,
            _ => panic!("pair must consist of two distinct sites"),
        }
    }
}

/// Full annealing schedule configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig<T> {
    /// Number of time intervals N; the schedule applies N+1 step operators.
    pub n_steps: usize,
    /// Interval length (dimensionless time).
    pub dt: T,
    /// Transverse field amplitude h.
    pub field: T,
    pub couplings: Couplings<T>,
    pub params: SystemParams<T>,
    pub mode: RunMode,
    /// How many parts each three-spin interval is split into.
    pub split_three_spin: usize,
}

impl<T: Real> Default for AnnealConfig<T> {
    /// The default operating point (N=10, dt=0.01, h=100, 7-way splits).
    fn default() -> Self {
        Self {
            n_steps: 10,
            dt: T::of(0.01),
            field: T::of(100.0),
            couplings: Couplings::default(),
            params: SystemParams::default(),
            mode: RunMode::default(),
            split_three_spin: 7,
        }
    }
}

impl<T: Real> AnnealConfig<T> {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.n_steps < 1 {
            return Err(CoreError::InvalidConfig("N must be >= 1".into()));
        }
        if !self.dt.is_finite() || self.dt <= T::zero() {
            return Err(CoreError::InvalidConfig("dt must be > 0 and finite".into()));
        }
        if !self.field.is_finite() {
            return Err(CoreError::InvalidConfig("field must be finite".into()));
        }
        if !self.couplings.is_finite() || !self.params.is_finite() {
            return Err(CoreError::InvalidConfig(
                "couplings and params must be finite".into(),
            ));
        }
        if self.split_three_spin < 1 {
            return Err(CoreError::InvalidConfig("splits must be >= 1".into()));
        }
        Ok(())
    }

    /// Total annealing time T = N * dt.
    pub fn total_time(&self) -> T {
        T::of_int(self.n_steps as i64) * self.dt
    }

    /// Schedule fraction l/N.
    pub fn fraction(&self, l: usize) -> T {
        T::of_int(l as i64) / T::of_int(self.n_steps as i64)
    }
}

/// A computational basis state |m1, m2, m3> with each projection in
/// {1, 0, -1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub m1: i8,
    pub m2: i8,
    pub m3: i8,
}

impl BasisLabel {
    pub fn new(m1: i8, m2: i8, m3: i8) -> Result<Self, CoreError> {
        for m in [m1, m2, m3] {
            if !(-1..=1).contains(&m) {
                return Err(CoreError::BadProjection(m));
            }
        }
        Ok(Self { m1, m2, m3 })
    }

    /// Full-space index: site 1 most significant, m = 1, 0, -1 -> 0, 1, 2.
    pub fn index(&self) -> usize {
        let i = |m: i8| (1 - m) as usize;
        9 * i(self.m1) + 3 * i(self.m2) + i(self.m3)
    }

    pub fn from_index(idx: usize) -> Self {
        assert!(idx < DIM_FULL);
        let m = |i: usize| 1 - i as i8;
        Self {
            m1: m(idx / 9),
            m2: m((idx / 3) % 3),
            m3: m(idx % 3),
        }
    }

    pub fn all() -> impl Iterator<Item = BasisLabel> {
        (0..DIM_FULL).map(BasisLabel::from_index)
    }

    /// First factor p = 6*a1 + 2*a2 + 1 with a1 = m1, a2 = m2.
    pub fn p(&self) -> i64 {
        6 * self.m1 as i64 + 2 * self.m2 as i64 + 1
    }

    /// Second factor q = 2*b + 1 with b = m3.
    pub fn q(&self) -> i64 {
        2 * self.m3 as i64 + 1
    }
}

impl std::fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "|{},{},{}>", self.m1, self.m2, self.m3)
    }
}

/// The target state |1,-1,1>, i.e. p = 5 and q = 3.
pub fn ground_label() -> BasisLabel {
    BasisLabel { m1: 1, m2: -1, m3: 1 }
}

fn diagonal_operator<T: Real>(f: impl Fn(BasisLabel) -> T) -> Operator27<T> {
    let mut m = CMatrix::zeros(DIM_FULL);
    for label in BasisLabel::all() {
        let i = label.index();
        m[(i, i)] = re(f(label));
    }
    m
}

/// One-spin Hamiltonian: sum of -w_j m_j + q_j (m_j^2 - 2/3) over the spins.
pub fn h_single<T: Real>(params: &SystemParams<T>) -> Operator27<T> {
    let two_thirds = T::of(2.0 / 3.0);
    diagonal_operator(|label| {
        let ms = [label.m1, label.m2, label.m3];
        let mut e = T::zero();
        for ((m, omega), q) in ms.iter().zip(&params.omega).zip(&params.q) {
            let m = T::of_int(*m as i64);
            e = e - *omega * m + *q * (m * m - two_thirds);
        }
        e
    })
}

/// Dipole-dipole Hamiltonian: J12 m1 m2 + J13 m1 m3 + J23 m2 m3 on the
/// diagonal.
pub fn h_dipolar<T: Real>(c: &Couplings<T>) -> Operator27<T> {
    diagonal_operator(|label| {
        let (m1, m2, m3) = (
            T::of_int(label.m1 as i64),
            T::of_int(label.m2 as i64),
            T::of_int(label.m3 as i64),
        );
        c.j12 * m1 * m2 + c.j13 * m1 * m3 + c.j23 * m2 * m3
    })
}

/// Transverse-field Hamiltonian -h (S1x + S2x + S3x).
pub fn h_field<T: Real>(h: T) -> Operator27<T> {
    let sx = spin_matrix::<T>(SpinAxis::X);
    let mut sum = CMatrix::zeros(DIM_FULL);
    for site in SiteIndex::ALL {
        sum = sum.add(&embed(&sx, site));
    }
    sum.scale(re(-h))
}

/// Integer cost at one basis state: (15 - p*q)^2.
pub fn problem_energy(label: BasisLabel) -> i64 {
    let d = 15 - label.p() * label.q();
    d * d
}

/// The factorization cost operator; diagonal, integer-valued.
pub fn h_problem<T: Real>() -> Operator27<T> {
    diagonal_operator(|label| T::of_int(problem_energy(label)))
}

/// Interpolated Hamiltonian at discrete time l: (1 - l/N) H0 + (l/N) Hp.
pub fn h_total<T: Real>(l: usize, cfg: &AnnealConfig<T>) -> Result<Operator27<T>, CoreError> {
    if l > cfg.n_steps {
        return Err(CoreError::TimeStepOutOfRange { l, n: cfg.n_steps });
    }
    let s = cfg.fraction(l);
    Ok(h_field(cfg.field)
        .scale(re(T::one() - s))
        .add(&h_problem::<T>().scale(re(s))))
}

/// All 27 cost values with their labels, sorted ascending (ties broken by
/// basis index).
pub fn problem_spectrum() -> Vec<(BasisLabel, i64)> {
    let mut rows: Vec<(BasisLabel, i64)> = BasisLabel::all()
        .map(|label| (label, problem_energy(label)))
        .collect();
    rows.sort_by_key(|(label, e)| (*e, label.index()));
    rows
}
