//! Self-check suite: every exact synthesis identity at a configurable
//! tolerance, plus the two scaling studies for the approximate three-spin
//! construction.

use crate::compiler::{
    compile_field_step, compile_linear, compile_pair_z_zsq, compile_pair_zz,
    compile_pair_zsq_zsq, compile_problem_step, compile_quadratic_single, compile_triple_zzz,
    TermKind,
};
use crate::error::CoreError;
use crate::hamiltonians::{h_field, h_problem, AnnealConfig, Couplings, SystemParams};
use crate::pulses::{evaluate_program, inversion_program, EvolutionModel, PulseProgram};
use crate::scalar::{C, Real};
use crate::spinops::{embed, spin_matrix, Operator27, SiteIndex, SpinAxis};

/// Pass/fail requirement of one check row.
#[derive(Debug, Clone, Copy)]
pub enum Requirement<T> {
    AtMost(T),
    AtLeast(T),
}

impl<T: Real> Requirement<T> {
    pub fn satisfied_by(&self, measured: T) -> bool {
        match self {
            Requirement::AtMost(t) => measured <= *t,
            Requirement::AtLeast(t) => measured >= *t,
        }
    }
}

impl<T: Real> std::fmt::Display for Requirement<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Requirement::AtMost(t) => write!(f, "<= {t:.3e}"),
            Requirement::AtLeast(t) => write!(f, ">= {t}"),
        }
    }
}

/// One row of the verification table.
#[derive(Debug)]
pub struct CheckRow<T> {
    pub name: String,
    pub measured: T,
    pub requirement: Requirement<T>,
    pub passed: bool,
}

impl<T: Real> CheckRow<T> {
    fn new(name: impl Into<String>, measured: T, requirement: Requirement<T>) -> Self {
        let passed = requirement.satisfied_by(measured);
        Self {
            name: name.into(),
            measured,
            requirement,
            passed,
        }
    }
}

/// Fixed-seed splitmix64; the suite is deterministic run to run.
struct Phases {
    state: u64,
}

impl Phases {
    fn new() -> Self {
        Self {
            state: 0x9e3779b97f4a7c15,
        }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-2 pi, 2 pi), avoiding exact zero.
    fn angle<T: Real>(&mut self) -> T {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let v = (u - 0.5) * 4.0 * std::f64::consts::PI;
        if v == 0.0 {
            T::of(0.1)
        } else {
            T::of(v)
        }
    }

    fn angles<T: Real>(&mut self, n: usize) -> Vec<T> {
        (0..n).map(|_| self.angle()).collect()
    }
}

fn eval<T: Real>(
    prog: &PulseProgram<T>,
    c: &Couplings<T>,
    params: &SystemParams<T>,
) -> Result<Operator27<T>, CoreError> {
    evaluate_program(prog, c, params)
}

fn target<T: Real>(kind: TermKind, phase: T) -> Operator27<T> {
    kind.operator::<T>().expm(C::new(T::zero(), -phase))
}

const DDI: EvolutionModel = EvolutionModel::DdiOnly;
const N_PHASES: usize = 6;

/// Run the whole suite. Exact identities are held to `tol`; the scaling
/// rows use their own fixed thresholds.
pub fn run_all<T: Real>(tol: T) -> Result<Vec<CheckRow<T>>, CoreError> {
    let c = Couplings::<T>::default();
    let params = SystemParams::<T>::default();
    let mut rng = Phases::new();
    let mut rows = Vec::new();

    // Linear Z synthesis.
    let mut worst = T::zero();
    for site in SiteIndex::ALL {
        for phase in rng.angles::<T>(N_PHASES) {
            let u = eval(&compile_linear(site, phase), &c, &params)?;
            worst = worst.max(u.sub(&target(TermKind::Linear(site), phase)).max_abs());
        }
    }
    rows.push(CheckRow::new(
        "linear z rotation pair",
        worst,
        Requirement::AtMost(tol),
    ));

    // Squared-Z synthesis with tracked global phase.
    let mut worst = T::zero();
    for site in SiteIndex::ALL {
        for phase in rng.angles::<T>(N_PHASES) {
            let u = eval(&compile_quadratic_single(site, phase), &c, &params)?;
            worst = worst.max(
                u.sub(&target(TermKind::QuadraticSingle(site), phase))
                    .max_abs(),
            );
        }
    }
    rows.push(CheckRow::new(
        "squared-z rotation pair + phase",
        worst,
        Requirement::AtMost(tol),
    ));

    // Inversion composite: conjugation flips the site's Z and leaves others.
    let mut worst = T::zero();
    for site in SiteIndex::ALL {
        let p = eval(&inversion_program(site), &c, &params)?;
        let z = embed(&spin_matrix::<T>(SpinAxis::Z), site);
        let flipped = p.adjoint().mul(&z).mul(&p);
        worst = worst.max(flipped.add(&z).max_abs());
        for other in SiteIndex::ALL.into_iter().filter(|s| *s != site) {
            let zo = embed(&spin_matrix::<T>(SpinAxis::Z), other);
            worst = worst.max(p.adjoint().mul(&zo).mul(&p).sub(&zo).max_abs());
        }
    }
    rows.push(CheckRow::new(
        "z inversion composite",
        worst,
        Requirement::AtMost(tol),
    ));

    // ZZ pair synthesis, all three pairs.
    use SiteIndex::*;
    for (name, a, b) in [
        ("zz pair (2,3) via spin-1 inversion", S2, S3),
        ("zz pair (1,2) via double inversion", S1, S2),
        ("zz pair (1,3) via spin-2 inversion", S1, S3),
    ] {
        let mut worst = T::zero();
        for phase in rng.angles::<T>(N_PHASES) {
            let u = eval(&compile_pair_zz((a, b), phase, &c, DDI)?, &c, &params)?;
            worst = worst.max(u.sub(&target(TermKind::PairZZ(a, b), phase)).max_abs());
        }
        rows.push(CheckRow::new(name, worst, Requirement::AtMost(tol)));
    }

    // Z x Z^2 sandwich.
    let mut worst = T::zero();
    for (p, q) in [(S3, S1), (S3, S2), (S1, S3), (S2, S3)] {
        for phase in rng.angles::<T>(N_PHASES) {
            let u = eval(&compile_pair_z_zsq(p, q, phase, &c, DDI)?, &c, &params)?;
            worst = worst.max(
                u.sub(&target(TermKind::PairZZsq { z: p, zsq: q }, phase))
                    .max_abs(),
            );
        }
    }
    rows.push(CheckRow::new(
        "z x z^2 sandwich",
        worst,
        Requirement::AtMost(tol),
    ));

    // Z^2 x Z^2 nested sandwich.
    let mut worst = T::zero();
    for (p, q) in [(S3, S1), (S3, S2)] {
        for phase in rng.angles::<T>(N_PHASES) {
            let u = eval(&compile_pair_zsq_zsq((p, q), phase, &c, DDI)?, &c, &params)?;
            worst = worst.max(u.sub(&target(TermKind::PairZsqZsq(p, q), phase)).max_abs());
        }
    }
    rows.push(CheckRow::new(
        "z^2 x z^2 nested sandwich",
        worst,
        Requirement::AtMost(tol),
    ));

    // Field step: exact non-selective rotations.
    let cfg = AnnealConfig::<T>::default();
    let mut worst = T::zero();
    for l in 0..=cfg.n_steps {
        let u = eval(&compile_field_step(l, &cfg)?, &c, &params)?;
        let s = cfg.dt * (T::one() - cfg.fraction(l));
        let exact = h_field(cfg.field).expm(C::new(T::zero(), -s));
        worst = worst.max(u.sub(&exact).max_abs());
    }
    rows.push(CheckRow::new(
        "field step rotations",
        worst,
        Requirement::AtMost(tol),
    ));

    // Three-spin commutator: third-order error scaling in the leg angle.
    let legs = [T::of(0.4), T::of(0.2), T::of(0.1)];
    let mut errs = Vec::new();
    for b in legs {
        let phase = b * b;
        let u = eval(&compile_triple_zzz(phase, 1, &c, DDI)?, &c, &params)?;
        errs.push(u.sub(&target(TermKind::TripleZZZ, phase)).fro_norm());
    }
    let slope = log_log_slope(&legs, &errs);
    rows.push(CheckRow::new(
        "three-spin commutator error order",
        slope,
        Requirement::AtLeast(T::of(2.5)),
    ));

    // Splitting the three-spin interval shrinks the remainder.
    let phase = T::of(0.96);
    let e1 = eval(&compile_triple_zzz(phase, 1, &c, DDI)?, &c, &params)?
        .sub(&target(TermKind::TripleZZZ, phase))
        .fro_norm();
    let e7 = eval(&compile_triple_zzz(phase, 7, &c, DDI)?, &c, &params)?
        .sub(&target(TermKind::TripleZZZ, phase))
        .fro_norm();
    rows.push(CheckRow::new(
        "three-spin split-7 error ratio",
        e1 / e7,
        Requirement::AtLeast(T::of(1.5)),
    ));

    // Whole problem step: deviation within the three-spin error budget.
    let l = 5;
    let s = cfg.dt * cfg.fraction(l);
    let step = compile_problem_step(l, &cfg)?;
    let exact = h_problem::<T>().expm(C::new(T::zero(), -s));
    let total = eval(&step.program, &c, &params)?.sub(&exact).fro_norm();
    let ezzz = eval(
        &compile_triple_zzz(T::of(96.0) * s, cfg.split_three_spin, &c, DDI)?,
        &c,
        &params,
    )?
    .sub(&target(TermKind::TripleZZZ, T::of(96.0) * s))
    .fro_norm();
    let ezsq = eval(
        &crate::compiler::compile_triple_zsqzz(
            T::of(96.0) * s,
            cfg.split_three_spin,
            &c,
            DDI,
        )?,
        &c,
        &params,
    )?
    .sub(&target(TermKind::TripleZsqZZ, T::of(96.0) * s))
    .fro_norm();
    let excess = (total - (ezzz + ezsq)).max(T::zero());
    rows.push(CheckRow::new(
        "problem step error within budget",
        excess,
        Requirement::AtMost(tol),
    ));

    Ok(rows)
}

fn log_log_slope<T: Real>(xs: &[T], ys: &[T]) -> T {
    let n = T::of_int(xs.len() as i64);
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().fold(T::zero(), |a, b| a + *b) / n;
    let my = ly.iter().fold(T::zero(), |a, b| a + *b) / n;
    let mut num = T::zero();
    let mut den = T::zero();
    for (x, y) in lx.iter().zip(ly.iter()) {
        num += (*x - mx) * (*y - my);
        den += (*x - mx) * (*x - mx);
    }
    num / den
}
