//! Entropy-driven coordinate refinement.
//!
//! The potential is `H(f, I) = sum_a mu(a) phi(E[f | a])` over the cells of
//! `V^I`, with `phi(x) = x ln x`. It is nonpositive, monotone under growing
//! `I`, and zero exactly when conditioning on `I` determines `f` to be 0/1.
//! A refinement witness names, for enough heavy cells, a small set of fresh
//! coordinates and a cell set that is one-sided (probability at most 3/4)
//! yet carries almost all of the cell's mass. Whenever such a witness
//! verifies, adding the fresh coordinates raises the potential by at least
//! `alpha/128`, where `alpha = E[f]`; since the potential starts at
//! `phi(alpha)` and ends at 0, the loop halts within `128 ln(1/alpha)`
//! accepted steps. Witnesses are produced by sweeping the edges of the cell
//! chain and running the one-sided capture on each uncovered endpoint pair.

use thiserror::Error;

use crate::chain::BaseChain;
use crate::functions::{CoordinateSet, FunctionError, PointFunction, Range};
use crate::junta::{one_sided_capture, CaptureParams, JuntaError};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("lambda {lambda} outside [1/4, 1]")]
    LambdaRange { lambda: f64 },
    #[error("means must be positive, got u = {u}, v = {v}")]
    NonpositiveMeans { u: f64, v: f64 },
    #[error("outside mean {u} exceeds half the combined mean {w}")]
    MeanGap { u: f64, w: f64 },
    #[error("entropy needs a [0, 1]-valued function")]
    NotUnitRange,
    #[error("step {step} gained {gain}, the floor is {required}")]
    EntropyGainViolation { step: usize, gain: f64, required: f64 },
    #[error("step {step} accepted a witness that adds no coordinates")]
    Stagnation { step: usize },
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Junta(#[from] JuntaError),
}

/// `x ln x`, continued by 0 at the origin. Negative inputs are a bug in the
/// caller, not data.
pub fn phi(x: f64) -> f64 {
    assert!(x >= 0.0, "phi needs a nonnegative argument, got {x}");
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `H(f, I) = sum over cells a of V^I of mu(a) phi(E[f | a])`. Nonpositive,
/// and 0 exactly when every cell mean is 0 or 1. Conditional means may carry
/// sub-ulp float dust outside [0, 1]; that is clamped, anything larger is a
/// bug.
pub fn entropy(f: &PointFunction, i_set: &CoordinateSet) -> Result<f64, RefineError> {
    if f.range() != Range::Unit {
        return Err(RefineError::NotUnitRange);
    }
    let table = f.conditional_expectation(i_set)?;
    let mut h = 0.0;
    for (cell, &mean) in table.iter().enumerate() {
        assert!(
            (-1e-9..=1.0 + 1e-9).contains(&mean),
            "conditional mean {mean} at cell {cell} is far outside [0, 1]"
        );
        h += i_set.cell_measure(f.space(), cell) * phi(mean.clamp(0.0, 1.0));
    }
    Ok(h)
}

/// The convexity gap behind the per-step entropy bound. For weights
/// `lambda in [1/4, 1]`, outside mean `u`, inside mean `v`, both positive,
/// with `w = lambda u + (1 - lambda) v` and `u <= w/2`:
///
///   lambda phi(u) + (1 - lambda) phi(v) >= phi(w) + w/32.
///
/// Scaling by `w` reduces to means averaging to 1 with `u <= 1/2`, where the
/// chord of phi through the worst admissible point already clears 1/32.
#[derive(Debug, Clone, Copy)]
pub struct PhiCheck {
    /// `lambda phi(u) + (1 - lambda) phi(v) - phi(w)`.
    pub gain: f64,
    pub required: f64,
    pub margin: f64,
    pub w: f64,
}

pub fn check_phi_inequality(lambda: f64, u: f64, v: f64) -> Result<PhiCheck, RefineError> {
    if !(0.25..=1.0).contains(&lambda) {
        return Err(RefineError::LambdaRange { lambda });
    }
    if u <= 0.0 || v <= 0.0 {
        return Err(RefineError::NonpositiveMeans { u, v });
    }
    let w = lambda * u + (1.0 - lambda) * v;
    if u > w / 2.0 {
        return Err(RefineError::MeanGap { u, w });
    }
    let gain = lambda * phi(u) + (1.0 - lambda) * phi(v) - phi(w);
    let required = w / 32.0;
    Ok(PhiCheck { gain, required, margin: gain - required, w })
}

/// One refined cell: fresh coordinates outside the conditioning set and the
/// kept cells of their product space.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRefinement {
    pub cell: usize,
    /// Coordinates in the numbering of the full space, disjoint from `I`.
    pub j_set: CoordinateSet,
    /// Kept cells of `V^J`, sorted ascending.
    pub t_cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementWitness {
    pub i_set: CoordinateSet,
    pub cells: Vec<CellRefinement>,
}

impl RefinementWitness {
    /// `I` together with every fresh coordinate the witness names.
    pub fn refined_set(&self, n: usize) -> Result<CoordinateSet, FunctionError> {
        let mut coords: Vec<usize> = self.i_set.as_slice().to_vec();
        for cell in &self.cells {
            coords.extend_from_slice(cell.j_set.as_slice());
        }
        CoordinateSet::new(coords, n)
    }
}

#[derive(Debug, Clone)]
pub struct CellReport {
    pub cell: usize,
    pub t_probability: f64,
    pub outside_mean: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct WitnessDiagnostics {
    pub alpha: f64,
    /// Mass of the selected cells, `sum over S of mu(x) E[f | x]`.
    pub selected_mass: f64,
    pub required_mass: f64,
    pub cell_reports: Vec<CellReport>,
    pub shape_errors: Vec<String>,
    pub passed: bool,
}

/// Checks a witness from first principles: enough selected mass, and per
/// cell a small fresh coordinate set whose kept cells have probability at
/// most 3/4 while the discarded cells keep mean at most `alpha/8`. Shape
/// problems are reported, not thrown, so a report can show what failed.
pub fn verify_witness(
    f: &PointFunction,
    r: usize,
    witness: &RefinementWitness,
) -> Result<WitnessDiagnostics, RefineError> {
    if f.range() != Range::Unit {
        return Err(RefineError::NotUnitRange);
    }
    let space = f.space();
    let n = space.n();
    let v = space.alphabet();
    let alpha = f.expectation();
    let mut diag = WitnessDiagnostics {
        alpha,
        selected_mass: 0.0,
        required_mass: alpha / 2.0,
        cell_reports: Vec::new(),
        shape_errors: Vec::new(),
        passed: true,
    };
    if !witness.cells.windows(2).all(|w| w[0].cell < w[1].cell) {
        diag.shape_errors.push("witness cells are not sorted and distinct".into());
    }
    let cond = f.conditional_expectation(&witness.i_set)?;
    let rest = witness.i_set.complement(n);
    for cr in &witness.cells {
        if cr.cell >= cond.len() {
            diag.shape_errors.push(format!("cell {} out of range", cr.cell));
            continue;
        }
        diag.selected_mass += witness.i_set.cell_measure(space, cr.cell) * cond[cr.cell];
        if cr.j_set.len() > r {
            diag.shape_errors
                .push(format!("cell {} names {} coordinates, cap is {r}", cr.cell, cr.j_set.len()));
            continue;
        }
        if let Some(&bad) = cr.j_set.as_slice().iter().find(|c| !rest.contains(c)) {
            diag.shape_errors
                .push(format!("cell {}: coordinate {bad} is not outside the base set", cr.cell));
            continue;
        }
        let g = f.restrict(&witness.i_set, cr.cell)?;
        // J in the restricted numbering: positions within the complement.
        let positions: Vec<usize> = cr
            .j_set
            .as_slice()
            .iter()
            .map(|c| rest.binary_search(c).expect("checked membership above"))
            .collect();
        let pos_set = CoordinateSet::new(positions, g.space().n())?;
        let cells = pos_set.cell_count(v);
        if cr.t_cells.iter().any(|&t| t >= cells) {
            diag.shape_errors.push(format!("cell {}: kept cell out of range", cr.cell));
            continue;
        }
        let table = g.conditional_expectation(&pos_set)?;
        let t_probability: f64 =
            cr.t_cells.iter().map(|&t| pos_set.cell_measure(g.space(), t)).sum();
        let outside_mass: f64 = (0..cells)
            .filter(|t| cr.t_cells.binary_search(t).is_err())
            .map(|t| pos_set.cell_measure(g.space(), t) * table[t])
            .sum();
        let outside_probability = 1.0 - t_probability;
        let outside_mean =
            if outside_probability > 0.0 { outside_mass / outside_probability } else { 0.0 };
        let ok = t_probability <= 0.75 + 1e-12 && outside_mean <= alpha / 8.0 + 1e-12;
        diag.cell_reports.push(CellReport { cell: cr.cell, t_probability, outside_mean, ok });
    }
    let mass_ok = diag.selected_mass >= diag.required_mass - 1e-12;
    diag.passed = mass_ok
        && diag.shape_errors.is_empty()
        && diag.cell_reports.len() == witness.cells.len()
        && diag.cell_reports.iter().all(|c| c.ok);
    Ok(diag)
}

#[derive(Debug, Clone)]
pub struct EdgeFailure {
    pub x1: usize,
    pub x2: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RefinementSearch {
    /// Present exactly when the assembled witness verified.
    pub witness: Option<RefinementWitness>,
    pub diagnostics: WitnessDiagnostics,
    pub capture_failures: Vec<EdgeFailure>,
    pub edges_scanned: usize,
}

/// Sweeps the edges of the cell chain of `V^I` in index order, loops
/// included, skipping edges with a covered endpoint, and runs the one-sided
/// capture at threshold `eps/32` on each remaining pair of restricted
/// functions. The chosen endpoint joins the witness with the captured
/// coordinates translated back to the full numbering. The assembled witness
/// is then verified from first principles.
pub fn find_refinement(
    f: &PointFunction,
    i_set: &CoordinateSet,
    r: usize,
    eps: f64,
    params: &CaptureParams,
) -> Result<RefinementSearch, RefineError> {
    let space = f.space();
    let n = space.n();
    let rest = i_set.complement(n);
    let cell_space = space.sibling(i_set.len());
    let capture_params = CaptureParams { j_budget: params.j_budget.min(r), ..*params };
    let mut cells: Vec<CellRefinement> = Vec::new();
    let mut covered = vec![false; cell_space.size()];
    let mut failures = Vec::new();
    let mut edges_scanned = 0usize;
    for x1 in 0..cell_space.size() {
        for x2 in 0..cell_space.size() {
            if !cell_space.adjacent(x1, x2) || covered[x1] || covered[x2] {
                continue;
            }
            edges_scanned += 1;
            let g1 = f.restrict(i_set, x1)?;
            let g2 = f.restrict(i_set, x2)?;
            match one_sided_capture(&g1, &g2, eps / 32.0, &capture_params) {
                Ok(pick) => {
                    let cell = if pick.side == 1 { x1 } else { x2 };
                    let original: Vec<usize> =
                        pick.j_set.as_slice().iter().map(|&p| rest[p]).collect();
                    cells.push(CellRefinement {
                        cell,
                        j_set: CoordinateSet::new(original, n)?,
                        t_cells: pick.t_cells,
                    });
                    covered[cell] = true;
                }
                Err(err @ (JuntaError::NoSideQualifies { .. } | JuntaError::Budget { .. })) => {
                    failures.push(EdgeFailure { x1, x2, reason: err.to_string() });
                }
                Err(other) => return Err(other.into()),
            }
        }
    }
    cells.sort_by_key(|c| c.cell);
    let witness = RefinementWitness { i_set: i_set.clone(), cells };
    let diagnostics = verify_witness(f, r, &witness)?;
    Ok(RefinementSearch {
        witness: diagnostics.passed.then_some(witness),
        diagnostics,
        capture_failures: failures,
        edges_scanned,
    })
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub step: usize,
    /// Conditioning set after this step.
    pub i_set: CoordinateSet,
    pub added: Vec<usize>,
    pub entropy: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    /// The edge sweep produced no verifying witness.
    NoWitness,
    FullCoordinateSet,
    StepLimit,
    /// `E[f] = 0`: nothing to refine.
    ZeroFunction,
}

#[derive(Debug, Clone)]
pub struct RefinementTrace {
    pub alpha: f64,
    pub steps: Vec<TraceStep>,
    pub final_set: CoordinateSet,
    pub final_entropy: f64,
    pub stop: StopReason,
    /// `ceil(128 ln(1/alpha))`, the proved cap on accepted steps.
    pub step_bound: usize,
    pub last_diagnostics: Option<WitnessDiagnostics>,
}

/// Iterates `find_refinement`, growing the conditioning set while witnesses
/// verify. Every accepted step must raise the entropy by `alpha/128`; a
/// smaller gain is an invariant violation, not an outcome.
pub fn refinement_loop(
    f: &PointFunction,
    r: usize,
    eps: f64,
    max_steps: Option<usize>,
    params: &CaptureParams,
) -> Result<RefinementTrace, RefineError> {
    let n = f.space().n();
    let alpha = f.expectation();
    if alpha == 0.0 {
        return Ok(RefinementTrace {
            alpha,
            steps: Vec::new(),
            final_set: CoordinateSet::empty(),
            final_entropy: 0.0,
            stop: StopReason::ZeroFunction,
            step_bound: 0,
            last_diagnostics: None,
        });
    }
    let step_bound = (128.0 * (1.0 / alpha).ln()).ceil() as usize;
    let limit = max_steps.unwrap_or(step_bound + 2);
    let mut i_set = CoordinateSet::empty();
    let mut h = entropy(f, &i_set)?;
    let mut steps = Vec::new();
    let mut last_diagnostics = None;
    let stop = loop {
        if i_set.len() == n {
            break StopReason::FullCoordinateSet;
        }
        if steps.len() >= limit {
            break StopReason::StepLimit;
        }
        let search = find_refinement(f, &i_set, r, eps, params)?;
        last_diagnostics = Some(search.diagnostics);
        let Some(witness) = search.witness else {
            break StopReason::NoWitness;
        };
        let step = steps.len() + 1;
        let refined = witness.refined_set(n)?;
        if refined.len() == i_set.len() {
            return Err(RefineError::Stagnation { step });
        }
        let h_next = entropy(f, &refined)?;
        let gain = h_next - h;
        let required = alpha / 128.0;
        if gain < required - 1e-9 {
            return Err(RefineError::EntropyGainViolation { step, gain, required });
        }
        let added: Vec<usize> =
            refined.as_slice().iter().copied().filter(|c| !i_set.contains(*c)).collect();
        steps.push(TraceStep { step, i_set: refined.clone(), added, entropy: h_next, gain });
        i_set = refined;
        h = h_next;
    };
    Ok(RefinementTrace {
        alpha,
        steps,
        final_set: i_set,
        final_entropy: h,
        stop,
        step_bound,
        last_diagnostics,
    })
}

/// A derived quantity that may leave the window of printable floats. The
/// markers record on which side it left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleValue {
    Finite(f64),
    Astronomical,
    Infinitesimal,
}

const LN_LIMIT: f64 = 690.775527898213705; // ln(1e300)

impl ScheduleValue {
    pub fn from_ln(ln: f64) -> ScheduleValue {
        assert!(!ln.is_nan());
        if ln > LN_LIMIT {
            ScheduleValue::Astronomical
        } else if ln < -LN_LIMIT {
            ScheduleValue::Infinitesimal
        } else {
            ScheduleValue::Finite(ln.exp())
        }
    }

    pub fn as_finite(&self) -> Option<f64> {
        match self {
            ScheduleValue::Finite(v) => Some(*v),
            _ => None,
        }
    }
}

impl std::fmt::Display for ScheduleValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleValue::Finite(v) => write!(f, "{v}"),
            ScheduleValue::Astronomical => write!(f, ">1e300"),
            ScheduleValue::Infinitesimal => write!(f, "<1e-300"),
        }
    }
}

/// One application of the coordinate growth map, `ell + r |V|^ell`.
pub fn growth(ell: f64, r: f64, v: f64) -> f64 {
    ell + r * v.powf(ell)
}

/// `w_min^k (eps/32)^c`, evaluated in log space.
pub fn delta2(eps: f64, c: f64, k: f64, w_min: f64) -> ScheduleValue {
    ScheduleValue::from_ln(k * w_min.ln() + c * (eps / 32.0).ln())
}

/// Iterated exponential `t(0) = 1, t(m) = 2^t(m-1)`.
pub fn tower(m: u32) -> ScheduleValue {
    let mut t = 1.0f64;
    for _ in 0..m {
        if t <= 63.0 {
            // Exact while the exponent is a small integer, which covers
            // every representable tower value.
            t = (1u64 << t as u32) as f64;
        } else {
            let ln_next = t * std::f64::consts::LN_2;
            if ln_next > LN_LIMIT {
                return ScheduleValue::Astronomical;
            }
            t = ln_next.exp();
        }
    }
    ScheduleValue::Finite(t)
}

/// The full parameter trail for a run at accuracy `eps`, exponent `c`,
/// junta cap `r`, over the given chain. Everything downstream of the
/// iterated growth map is astronomical except at toy settings; the point of
/// computing it is to print where desk scale ends.
#[derive(Debug, Clone)]
pub struct ParameterSchedule {
    pub eps: f64,
    pub c: f64,
    pub alpha: f64,
    pub r: usize,
    pub w_min: f64,
    pub alphabet: usize,
    /// `ceil(128 ln(1/alpha))`.
    pub steps: usize,
    /// Growth-map iterates while they stay finite, starting from 0.
    pub growth_preview: Vec<f64>,
    /// Coordinates conditioned on after all steps.
    pub k: ScheduleValue,
    pub delta2: ScheduleValue,
    /// `(eps/32)^(-c)`, the junta cap the sparsity regime needs.
    pub r2: ScheduleValue,
}

pub fn schedule(
    eps: f64,
    c: f64,
    alpha: f64,
    r: usize,
    base: &BaseChain,
) -> ParameterSchedule {
    assert!(eps > 0.0 && eps < 1.0 && c > 0.0 && alpha > 0.0 && alpha <= 1.0);
    let w_min = base.w_min();
    let v = base.size();
    let steps = (128.0 * (1.0 / alpha).ln()).ceil() as usize;
    let mut growth_preview = vec![0.0];
    let mut k = ScheduleValue::Finite(0.0);
    for _ in 0..steps {
        match k {
            ScheduleValue::Finite(ell) => {
                let next = growth(ell, r as f64, v as f64);
                k = if next.is_finite() && next < 1e300 {
                    growth_preview.push(next);
                    ScheduleValue::Finite(next)
                } else {
                    ScheduleValue::Astronomical
                };
            }
            _ => break,
        }
    }
    let delta2 = match k {
        ScheduleValue::Finite(kv) => delta2(eps, c, kv, w_min),
        _ => ScheduleValue::Infinitesimal,
    };
    ParameterSchedule {
        eps,
        c,
        alpha,
        r,
        w_min,
        alphabet: v,
        steps,
        growth_preview,
        k,
        delta2,
        r2: ScheduleValue::from_ln(-c * (eps / 32.0).ln()),
    }
}
