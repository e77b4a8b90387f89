//! The primitive pulse instruction set and its evaluator.
//!
//! A `PulseProgram` is an ordered list of primitives; the first element acts
//! first, i.e. it is the rightmost factor in the operator product. Selective
//! rotations act as effective spin-1/2 rotations on two chosen levels of one
//! spin, non-selective rotations drive the whole spin, free evolution runs
//! the native dipole-dipole coupling (optionally together with the one-spin
//! Hamiltonian), and `GlobalPhase` keeps scalar factors explicit so operator
//! identities hold exactly rather than up to phase.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::hamiltonians::{h_dipolar, h_single, Couplings, SystemParams};
use crate::linalg::{CMatrix, CVector};
use crate::scalar::{phase_factor, re, C, Real};
use crate::spinops::{embed, matrix_exp, spin_matrix, Operator27, SiteIndex, SpinAxis, DIM_SPIN};

/// Which two adjacent levels a selective rotation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    /// Levels 1 and 2 (m = 1 and m = 0).
    T12,
    /// Levels 2 and 3 (m = 0 and m = -1).
    T23,
}

impl Transition {
    pub fn label(self) -> &'static str {
        match self {
            Transition::T12 => "t12",
            Transition::T23 => "t23",
        }
    }

    /// Local indices of the two selected levels.
    fn levels(self) -> (usize, usize) {
        match self {
            Transition::T12 => (0, 1),
            Transition::T23 => (1, 2),
        }
    }
}

/// Free-evolution Hamiltonian model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvolutionModel {
    /// Dipole-dipole coupling only; the one-spin terms are assumed refocused.
    DdiOnly,
    /// Dipole-dipole plus the one-spin Hamiltonian.
    Full,
}

impl EvolutionModel {
    pub fn label(self) -> &'static str {
        match self {
            EvolutionModel::DdiOnly => "ddi",
            EvolutionModel::Full => "full",
        }
    }
}

/// One pulse-sequence instruction.
#[derive(Debug, Clone, PartialEq)]
pub enum PulsePrimitive<T> {
    SelectiveRotation {
        site: SiteIndex,
        transition: Transition,
        axis: SpinAxis,
        /// Rotation angle Omega in radians.
        angle: T,
    },
    NonSelectiveRotation {
        site: SiteIndex,
        axis: SpinAxis,
        /// Rotation angle theta in radians; the matrix is exp(-i theta S^axis).
        angle: T,
    },
    FreeEvolution {
        /// Signed dimensionless time; the matrix is exp(-i t H).
        duration: T,
        model: EvolutionModel,
    },
    GlobalPhase {
        /// The matrix is exp(-i angle) * I.
        angle: T,
    },
}

impl<T: Real> PulsePrimitive<T> {
    pub fn is_finite(&self) -> bool {
        match self {
            PulsePrimitive::SelectiveRotation { angle, .. }
            | PulsePrimitive::NonSelectiveRotation { angle, .. }
            | PulsePrimitive::GlobalPhase { angle } => angle.is_finite(),
            PulsePrimitive::FreeEvolution { duration, .. } => duration.is_finite(),
        }
    }
}

/// An ordered pulse sequence; evaluation applies `steps[0]` first.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseProgram<T> {
    pub label: String,
    pub steps: Vec<PulsePrimitive<T>>,
}

impl<T: Real> PulseProgram<T> {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, p: PulsePrimitive<T>) {
        self.steps.push(p);
    }

    /// Append another program's steps (they act after the existing ones).
    pub fn extend(&mut self, other: &PulseProgram<T>) {
        self.steps.extend(other.steps.iter().cloned());
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// The 3x3 block form of a selective rotation, embedded at `site`.
///
/// Z places exp(-/+ i Omega/2) on the two selected levels, Y the real 2x2
/// rotation block, X the same block with both sines multiplied by -i. The
/// unselected level is untouched.
pub fn selective_rotation_matrix<T: Real>(
    site: SiteIndex,
    transition: Transition,
    axis: SpinAxis,
    angle: T,
) -> Operator27<T> {
    let half = angle / T::of(2.0);
    let (k, n) = transition.levels();
    let mut m = CMatrix::identity(DIM_SPIN);
    match axis {
        SpinAxis::Z => {
            m[(k, k)] = phase_factor(half);
            m[(n, n)] = phase_factor(-half);
        }
        SpinAxis::Y => {
            let (c, s) = (half.cos(), half.sin());
            m[(k, k)] = re(c);
            m[(k, n)] = re(-s);
            m[(n, k)] = re(s);
            m[(n, n)] = re(c);
        }
        SpinAxis::X => {
            let (c, s) = (half.cos(), half.sin());
            m[(k, k)] = re(c);
            m[(k, n)] = C::new(T::zero(), -s);
            m[(n, k)] = C::new(T::zero(), -s);
            m[(n, n)] = re(c);
        }
    }
    embed(&m, site)
}

/// exp(-i angle S^axis) on one spin, identity elsewhere.
pub fn nonselective_rotation_matrix<T: Real>(
    site: SiteIndex,
    axis: SpinAxis,
    angle: T,
) -> Operator27<T> {
    let gen = spin_matrix::<T>(axis);
    let u = gen.expm(C::new(T::zero(), -angle));
    embed(&u, site)
}

/// The inversion composite: three selective Y rotations whose product P
/// satisfies P^dag S_site^z P = -S_site^z exactly.
pub fn inversion_program<T: Real>(site: SiteIndex) -> PulseProgram<T> {
    let pi = T::PI();
    let mut prog = PulseProgram::new(format!("invert_z_{}", site.number()));
    for transition in [Transition::T12, Transition::T23, Transition::T12] {
        prog.push(PulsePrimitive::SelectiveRotation {
            site,
            transition,
            axis: SpinAxis::Y,
            angle: -pi,
        });
    }
    prog
}

/// exp(-i t H) for the selected free-evolution model.
pub fn free_evolution_matrix<T: Real>(
    duration: T,
    model: EvolutionModel,
    c: &Couplings<T>,
    params: &SystemParams<T>,
) -> Result<Operator27<T>, CoreError> {
    let h = match model {
        EvolutionModel::DdiOnly => h_dipolar(c),
        EvolutionModel::Full => h_single(params).add(&h_dipolar(c)),
    };
    matrix_exp(&h, C::new(T::zero(), -duration))
}

/// The 27x27 unitary of a single primitive.
pub fn primitive_matrix<T: Real>(
    p: &PulsePrimitive<T>,
    c: &Couplings<T>,
    params: &SystemParams<T>,
) -> Result<Operator27<T>, CoreError> {
    if !p.is_finite() {
        return Err(CoreError::NonFinite);
    }
    Ok(match p {
        PulsePrimitive::SelectiveRotation {
            site,
            transition,
            axis,
            angle,
        } => selective_rotation_matrix(*site, *transition, *axis, *angle),
        PulsePrimitive::NonSelectiveRotation { site, axis, angle } => {
            nonselective_rotation_matrix(*site, *axis, *angle)
        }
        PulsePrimitive::FreeEvolution { duration, model } => {
            free_evolution_matrix(*duration, *model, c, params)?
        }
        PulsePrimitive::GlobalPhase { angle } => {
            CMatrix::identity(crate::spinops::DIM_FULL).scale(phase_factor(*angle))
        }
    })
}

/// Product of the primitive matrices, first step rightmost.
pub fn evaluate_program<T: Real>(
    prog: &PulseProgram<T>,
    c: &Couplings<T>,
    params: &SystemParams<T>,
) -> Result<Operator27<T>, CoreError> {
    let mut acc = CMatrix::identity(crate::spinops::DIM_FULL);
    for step in &prog.steps {
        acc = primitive_matrix(step, c, params)?.mul(&acc);
    }
    Ok(acc)
}

/// Apply a program to a state without forming the full product.
pub fn apply_program<T: Real>(
    state: &CVector<T>,
    prog: &PulseProgram<T>,
    c: &Couplings<T>,
    params: &SystemParams<T>,
) -> Result<CVector<T>, CoreError> {
    let mut psi = state.clone();
    for step in &prog.steps {
        psi = primitive_matrix(step, c, params)?.apply(&psi);
    }
    Ok(psi)
}

// ---------------------------------------------------------------------------
// Physical view: equivalent nonnegative angles and durations.
// ---------------------------------------------------------------------------

/// Greatest common divisor of real magnitudes, Euclid with tolerance.
fn real_gcd<T: Real>(values: &[T], tol: T) -> Option<T> {
    let mut g = T::zero();
    for v in values {
        let mut a = g;
        let mut b = v.abs();
        while b > tol {
            let r = a % b;
            a = b;
            b = r;
        }
        g = a.max(b.abs());
        if g <= tol && v.abs() > tol {
            return None;
        }
    }
    if g > tol {
        Some(g)
    } else {
        None
    }
}

fn wrap_nonneg<T: Real>(value: T, period: T) -> T {
    let r = value % period;
    if r < T::zero() {
        r + period
    } else {
        r
    }
}

/// Smallest t > 0 for which the one-spin Hamiltonian winds every transition
/// phase by a 2 pi multiple; free evolution of that length refocuses it up
/// to a global phase.
pub fn h1_refocus_period<T: Real>(params: &SystemParams<T>) -> Result<T, CoreError> {
    let freqs = params.transition_frequencies();
    let tol = T::of(1e-9)
        * freqs
            .iter()
            .fold(T::one(), |a, b| a.max(*b));
    let g = real_gcd(&freqs, tol).ok_or_else(|| {
        CoreError::FreeEvolution(
            "transition frequencies admit no common period within 1e-9".into(),
        )
    })?;
    Ok(T::of(2.0) * T::PI() / g)
}

/// Smallest t > 0 after which free evolution repeats exactly (every diagonal
/// phase winds by a 2 pi multiple).
pub fn free_evolution_period<T: Real>(
    model: EvolutionModel,
    c: &Couplings<T>,
    params: &SystemParams<T>,
) -> Result<T, CoreError> {
    let h = match model {
        EvolutionModel::DdiOnly => h_dipolar(c),
        EvolutionModel::Full => h_single(params).add(&h_dipolar(c)),
    };
    let diag: Vec<T> = h.diagonal().iter().map(|d| d.re).collect();
    let scale = diag.iter().fold(T::one(), |a, b| a.max(b.abs()));
    let tol = T::of(1e-9) * scale;
    if diag.iter().all(|d| d.abs() <= tol) {
        // Zero Hamiltonian: any duration is the identity.
        return Ok(T::infinity());
    }
    let g = real_gcd(&diag, tol).ok_or_else(|| {
        CoreError::FreeEvolution(
            "free-evolution phases admit no common period within 1e-9".into(),
        )
    })?;
    Ok(T::of(2.0) * T::PI() / g)
}

/// Rewrite a program with equivalent nonnegative angles and durations.
///
/// Every rotation angle is reduced modulo its exact period (4 pi for the
/// effective spin-1/2 selective blocks, 2 pi for whole-spin rotations and
/// global phases) and every free-evolution duration modulo the evolution's
/// recurrence period, so the evaluated unitary is unchanged bit-for-bit at
/// the algebra level while all entries become physically realizable waits.
pub fn physical_view<T: Real>(
    prog: &PulseProgram<T>,
    c: &Couplings<T>,
    params: &SystemParams<T>,
) -> Result<PulseProgram<T>, CoreError> {
    let two_pi = T::of(2.0) * T::PI();
    let four_pi = T::of(4.0) * T::PI();
    let mut out = PulseProgram::new(prog.label.clone());
    for step in &prog.steps {
        out.push(match step {
            PulsePrimitive::SelectiveRotation {
                site,
                transition,
                axis,
                angle,
            } => PulsePrimitive::SelectiveRotation {
                site: *site,
                transition: *transition,
                axis: *axis,
                angle: wrap_nonneg(*angle, four_pi),
            },
            PulsePrimitive::NonSelectiveRotation { site, axis, angle } => {
                PulsePrimitive::NonSelectiveRotation {
                    site: *site,
                    axis: *axis,
                    angle: wrap_nonneg(*angle, two_pi),
                }
            }
            PulsePrimitive::GlobalPhase { angle } => PulsePrimitive::GlobalPhase {
                angle: wrap_nonneg(*angle, two_pi),
            },
            PulsePrimitive::FreeEvolution { duration, model } => {
                let period = free_evolution_period(*model, c, params)?;
                let d = if period.is_finite() {
                    wrap_nonneg(*duration, period)
                } else {
                    T::zero()
                };
                PulsePrimitive::FreeEvolution {
                    duration: d,
                    model: *model,
                }
            }
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Serialization: line-oriented text and an equivalent JSON form.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ProgramDoc {
    label: String,
    steps: Vec<StepDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum StepDoc {
    SelectiveRotation {
        site: u8,
        transition: String,
        axis: String,
        angle: f64,
    },
    NonSelectiveRotation {
        site: u8,
        axis: String,
        angle: f64,
    },
    FreeEvolution {
        duration: f64,
        model: String,
    },
    GlobalPhase {
        angle: f64,
    },
}

fn fmt_num<T: Real>(v: T) -> String {
    // 17 significant digits: enough to reproduce the value exactly.
    format!("{:.16e}", v)
}

/// Canonical line-oriented form: a `program <label>` header, then one
/// primitive per line. Numbers carry 17 significant digits, so
/// parse-then-print returns the input byte for byte.
pub fn format_program<T: Real>(prog: &PulseProgram<T>) -> String {
    let mut out = String::new();
    if prog.label.is_empty() {
        out.push_str("program\n");
    } else {
        out.push_str(&format!("program {}\n", prog.label));
    }
    for step in &prog.steps {
        match step {
            PulsePrimitive::SelectiveRotation {
                site,
                transition,
                axis,
                angle,
            } => out.push_str(&format!(
                "selrot {} {} {} {}\n",
                site.number(),
                transition.label(),
                axis.label(),
                fmt_num(*angle)
            )),
            PulsePrimitive::NonSelectiveRotation { site, axis, angle } => out.push_str(
                &format!("nonsel {} {} {}\n", site.number(), axis.label(), fmt_num(*angle)),
            ),
            PulsePrimitive::FreeEvolution { duration, model } => out.push_str(&format!(
                "free {} {}\n",
                fmt_num(*duration),
                model.label()
            )),
            PulsePrimitive::GlobalPhase { angle } => {
                out.push_str(&format!("phase {}\n", fmt_num(*angle)))
            }
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> CoreError {
    CoreError::ProgramParse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: Real>(s: &str, line: usize) -> Result<T, CoreError> {
    s.parse::<T>()
        .map_err(|_| parse_err(line, format!("bad number {s:?}")))
}

fn parse_site(s: &str, line: usize) -> Result<SiteIndex, CoreError> {
    let v: u8 = s
        .parse()
        .map_err(|_| parse_err(line, format!("bad site {s:?}")))?;
    SiteIndex::new(v).map_err(|_| parse_err(line, format!("site {v} out of range")))
}

fn parse_transition(s: &str, line: usize) -> Result<Transition, CoreError> {
    match s {
        "t12" => Ok(Transition::T12),
        "t23" => Ok(Transition::T23),
        other => Err(parse_err(line, format!("bad transition {other:?}"))),
    }
}

fn parse_axis(s: &str, line: usize) -> Result<SpinAxis, CoreError> {
    s.parse()
        .map_err(|e: String| parse_err(line, e))
}

fn parse_model(s: &str, line: usize) -> Result<EvolutionModel, CoreError> {
    match s {
        "ddi" => Ok(EvolutionModel::DdiOnly),
        "full" => Ok(EvolutionModel::Full),
        other => Err(parse_err(line, format!("bad model {other:?}"))),
    }
}

/// Parse the canonical text form produced by [`format_program`].
pub fn parse_program<T: Real>(text: &str) -> Result<PulseProgram<T>, CoreError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty program text"))?;
    let label = if header == "program" {
        String::new()
    } else {
        header
            .strip_prefix("program ")
            .ok_or_else(|| parse_err(1, "expected `program <label>` header"))?
            .to_string()
    };
    let mut prog = PulseProgram::new(label);
    for (i, raw) in lines {
        let lineno = i + 1;
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut f = line.split(' ');
        let kind = f.next().unwrap_or_default();
        let mut next = |what: &str| {
            f.next()
                .ok_or_else(|| parse_err(lineno, format!("missing field {what}")))
        };
        let step = match kind {
            "selrot" => PulsePrimitive::SelectiveRotation {
                site: parse_site(next("site")?, lineno)?,
                transition: parse_transition(next("transition")?, lineno)?,
                axis: parse_axis(next("axis")?, lineno)?,
                angle: parse_num(next("angle")?, lineno)?,
            },
            "nonsel" => PulsePrimitive::NonSelectiveRotation {
                site: parse_site(next("site")?, lineno)?,
                axis: parse_axis(next("axis")?, lineno)?,
                angle: parse_num(next("angle")?, lineno)?,
            },
            "free" => PulsePrimitive::FreeEvolution {
                duration: parse_num(next("duration")?, lineno)?,
                model: parse_model(next("model")?, lineno)?,
            },
            "phase" => PulsePrimitive::GlobalPhase {
                angle: parse_num(next("angle")?, lineno)?,
            },
            other => return Err(parse_err(lineno, format!("unknown primitive {other:?}"))),
        };
        if f.next().is_some() {
            return Err(parse_err(lineno, "trailing fields"));
        }
        prog.push(step);
    }
    Ok(prog)
}

/// JSON form of the same program (numbers survive a round trip losslessly).
pub fn program_to_json<T: Real>(prog: &PulseProgram<T>) -> Result<String, CoreError> {
    let to_f64 = |v: T| v.to_f64().expect("scalar convertible to f64");
    let steps = prog
        .steps
        .iter()
        .map(|s| match s {
            PulsePrimitive::SelectiveRotation {
                site,
                transition,
                axis,
                angle,
            } => StepDoc::SelectiveRotation {
                site: site.number(),
                transition: transition.label().into(),
                axis: axis.label().into(),
                angle: to_f64(*angle),
            },
            PulsePrimitive::NonSelectiveRotation { site, axis, angle } => {
                StepDoc::NonSelectiveRotation {
                    site: site.number(),
                    axis: axis.label().into(),
                    angle: to_f64(*angle),
                }
            }
            PulsePrimitive::FreeEvolution { duration, model } => StepDoc::FreeEvolution {
                duration: to_f64(*duration),
                model: model.label().into(),
            },
            PulsePrimitive::GlobalPhase { angle } => StepDoc::GlobalPhase {
                angle: to_f64(*angle),
            },
        })
        .collect();
    let doc = ProgramDoc {
        label: prog.label.clone(),
        steps,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parse the JSON form.
pub fn program_from_json<T: Real>(text: &str) -> Result<PulseProgram<T>, CoreError> {
    let doc: ProgramDoc = serde_json::from_str(text)?;
    let of = |v: f64, line: usize| -> Result<T, CoreError> {
        T::from_f64(v).ok_or_else(|| parse_err(line, "number out of range"))
    };
    let mut prog = PulseProgram::new(doc.label);
    for (i, step) in doc.steps.into_iter().enumerate() {
        let lineno = i + 1;
        prog.push(match step {
            StepDoc::SelectiveRotation {
                site,
                transition,
                axis,
                angle,
            } => PulsePrimitive::SelectiveRotation {
                site: SiteIndex::new(site)
                    .map_err(|_| parse_err(lineno, format!("site {site} out of range")))?,
                transition: parse_transition(&transition, lineno)?,
                axis: parse_axis(&axis, lineno)?,
                angle: of(angle, lineno)?,
            },
            StepDoc::NonSelectiveRotation { site, axis, angle } => {
                PulsePrimitive::NonSelectiveRotation {
                    site: SiteIndex::new(site)
                        .map_err(|_| parse_err(lineno, format!("site {site} out of range")))?,
                    axis: parse_axis(&axis, lineno)?,
                    angle: of(angle, lineno)?,
                }
            }
            StepDoc::FreeEvolution { duration, model } => PulsePrimitive::FreeEvolution {
                duration: of(duration, lineno)?,
                model: parse_model(&model, lineno)?,
            },
            StepDoc::GlobalPhase { angle } => PulsePrimitive::GlobalPhase {
                angle: of(angle, lineno)?,
            },
        });
    }
    Ok(prog)
}
