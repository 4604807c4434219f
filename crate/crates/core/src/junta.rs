//! Junta capture: finding the few coordinates that govern a pair of bounded
//! functions, and everything downstream of that.
//!
//! The spectral capture noises both functions, collects the coordinates
//! where either noised function keeps influence above `gamma`, and keeps the
//! cells of `V^J` whose noised conditional mean clears `eps`. Two facts make
//! this usable:
//!
//! * noising commutes with conditioning on `J`, so the noised cell table is
//!   the J-fold noise kernel applied to the raw cell table, and
//! * the mass of the raw function on discarded cells is at most `eps`. That
//!   bound is a theorem, so this module asserts it instead of reporting it.
//!
//! The cross term between the kept cell sets is only reported; the regime
//! where it is provably small needs parameters far beyond desk scale, which
//! `faithful_parameters` computes symbolically instead of running.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::chain::{ChainError, ProductSpace};
use crate::functions::{CoordinateSet, FunctionError, PointFunction, Range};
use crate::independent::{self, IndependentError};
use crate::refine::ScheduleValue;

#[derive(Debug, Error)]
pub enum JuntaError {
    #[error("junta has {got} coordinates, budget is {budget}")]
    Budget { got: usize, budget: usize, influences1: Vec<f64>, influences2: Vec<f64> },
    #[error("neither side is one-sided: Pr[T1] = {p1}, Pr[T2] = {p2}, both above 3/4")]
    NoSideQualifies { p1: f64, p2: f64 },
    #[error("exhaustive capture would scan {pairs} candidate pairs, cap is {cap}")]
    BruteBudget { pairs: u128, cap: u128 },
    #[error("noise rate {eta} outside the open interval (0, 1)")]
    EtaInterval { eta: f64 },
    #[error("noise rate {eta} must lie in ({min}, 1] for this chain")]
    EtaRange { eta: f64, min: f64 },
    #[error("influence cutoff must be positive, got {gamma}")]
    BadGamma { gamma: f64 },
    #[error("cell threshold must be positive, got {eps}")]
    BadEps { eps: f64 },
    #[error("hypercontractivity exponent must exceed 2, got {p}")]
    BadExponent { p: f64 },
    #[error("value {value} at point {index} leaves [-1, 1]")]
    NotBounded { index: usize, value: f64 },
    #[error("functions live on different spaces")]
    SpaceMismatch,
    #[error("label list has {got} entries, cell space has {want}")]
    LabelShape { got: usize, want: usize },
    #[error("cell {cell} carries {got} labels, cap is {ell}")]
    LabelCardinality { cell: usize, got: usize, ell: usize },
    #[error("no loop-free adjacent pair exists in the squared chain")]
    NoCleanPair,
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Independent(#[from] IndependentError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Tunables for the spectral capture. The noise rate must sit close enough
/// to 1 that the noise floor it adds to a cell mean, about
/// `(1 - eta) * E[f]`, stays below the thresholds in play; the refinement
/// sweep works at thresholds around `alpha/32`, where 0.9 is already too
/// coarse and 0.99 is comfortable.
#[derive(Debug, Clone, Copy)]
pub struct CaptureParams {
    pub eta: f64,
    pub gamma: f64,
    /// Refuse juntas with more coordinates than this.
    pub j_budget: usize,
    /// Vertex cap handed to the exact independent-set search.
    pub mwis_cap: usize,
}

impl Default for CaptureParams {
    fn default() -> CaptureParams {
        CaptureParams {
            eta: 0.99,
            gamma: 0.01,
            j_budget: 8,
            mwis_cap: independent::DEFAULT_MWIS_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaptureMethod {
    Spectral { eta: f64, gamma: f64 },
    Exhaustive { j_max: usize },
}

/// A captured junta: the coordinate set, the kept cell sets of both
/// functions, and every quantity a report needs to reproduce the run.
#[derive(Debug, Clone)]
pub struct JuntaCapture {
    pub j_set: CoordinateSet,
    /// Kept cells of `V^J`, sorted ascending.
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    pub t1_probability: f64,
    pub t2_probability: f64,
    /// Raw-function mass on the discarded cells, `E[1_{not T_i} E[f_i(a, .)]]`.
    pub outside1: f64,
    pub outside2: f64,
    /// `<1_{T1}, A 1_{T2}>` on the product chain over `J`.
    pub cross: f64,
    pub eps: f64,
    pub method: CaptureMethod,
}

fn require_same_space(f1: &PointFunction, f2: &PointFunction) -> Result<(), JuntaError> {
    if f1.space().same_space(f2.space()) {
        Ok(())
    } else {
        Err(JuntaError::SpaceMismatch)
    }
}

fn cell_measures(space: &ProductSpace, j_set: &CoordinateSet) -> Vec<f64> {
    (0..j_set.cell_count(space.alphabet()))
        .map(|cell| j_set.cell_measure(space, cell))
        .collect()
}

/// `<1_{T1}, A 1_{T2}>` over the cell space `V^J`, loops included.
fn cross_term(space: &ProductSpace, j_len: usize, t1: &[usize], t2: &[usize]) -> f64 {
    let cells = space.sibling(j_len);
    let mut i1 = vec![0.0; cells.size()];
    let mut i2 = vec![0.0; cells.size()];
    for &a in t1 {
        i1[a] = 1.0;
    }
    for &b in t2 {
        i2[b] = 1.0;
    }
    cells.quad_form(&i1, &i2)
}

/// The capture of Theorem-2.1 shape: noise, collect influential
/// coordinates, keep cells whose noised conditional mean is at least `eps`.
/// The outside mass of the raw functions is asserted, the cross term is
/// reported.
pub fn junta_capture_spectral(
    f1: &PointFunction,
    f2: &PointFunction,
    eps: f64,
    eta: f64,
    gamma: f64,
    j_budget: usize,
) -> Result<JuntaCapture, JuntaError> {
    require_same_space(f1, f2)?;
    if !(0.0 < eta && eta < 1.0) {
        return Err(JuntaError::EtaInterval { eta });
    }
    if gamma <= 0.0 {
        return Err(JuntaError::BadGamma { gamma });
    }
    if eps <= 0.0 {
        return Err(JuntaError::BadEps { eps });
    }
    let space = f1.space();
    let spectrum = space.base().eigendecompose()?;
    let g1 = f1.noise(eta)?;
    let g2 = f2.noise(eta)?;
    let inf1 = g1.influences(&spectrum)?;
    let inf2 = g2.influences(&spectrum)?;
    let coords: Vec<usize> =
        (0..space.n()).filter(|&i| inf1[i] > gamma || inf2[i] > gamma).collect();
    if coords.len() > j_budget {
        return Err(JuntaError::Budget {
            got: coords.len(),
            budget: j_budget,
            influences1: inf1,
            influences2: inf2,
        });
    }
    let j_set = CoordinateSet::new(coords, space.n())?;
    let measures = cell_measures(space, &j_set);
    let mut capture = JuntaCapture {
        j_set: j_set.clone(),
        t1: Vec::new(),
        t2: Vec::new(),
        t1_probability: 0.0,
        t2_probability: 0.0,
        outside1: 0.0,
        outside2: 0.0,
        cross: 0.0,
        eps,
        method: CaptureMethod::Spectral { eta, gamma },
    };
    for (side, (f, g)) in [(f1, &g1), (f2, &g2)].into_iter().enumerate() {
        let raw = f.conditional_expectation(&j_set)?;
        let noised = g.conditional_expectation(&j_set)?;
        let t: Vec<usize> = (0..raw.len()).filter(|&a| noised[a] >= eps).collect();
        let probability: f64 = t.iter().map(|&a| measures[a]).sum();
        let outside: f64 = (0..raw.len())
            .filter(|a| !t.contains(a))
            .map(|a| measures[a] * raw[a])
            .sum();
        // Discarded cells have noised mean below eps, and the noised cell
        // table is the noise kernel applied to the raw table, so the raw
        // mass they carry is at most eps. A violation is a bug, not data.
        assert!(
            outside <= eps + 1e-12,
            "side {} keeps {} raw mass outside T, threshold {}",
            side + 1,
            outside,
            eps
        );
        if side == 0 {
            capture.t1 = t;
            capture.t1_probability = probability;
            capture.outside1 = outside;
        } else {
            capture.t2 = t;
            capture.t2_probability = probability;
            capture.outside2 = outside;
        }
    }
    capture.cross = cross_term(space, j_set.len(), &capture.t1, &capture.t2);
    Ok(capture)
}

/// Cells of `V^J` at or above any fixed threshold of `table`, plus the
/// empty set; when the cell count is at most `EXHAUSTIVE_CELL_LIMIT` every
/// subset is a candidate instead.
const EXHAUSTIVE_CELL_LIMIT: usize = 10;
const BRUTE_PAIR_CAP: u128 = 50_000_000;

struct TCandidate {
    cells: Vec<usize>,
    probability: f64,
    outside: f64,
}

fn t_candidates(table: &[f64], measures: &[f64], eps: f64) -> Vec<TCandidate> {
    let total_mass: f64 = table.iter().zip(measures).map(|(t, m)| t * m).sum();
    let build = |cells: Vec<usize>| {
        let probability: f64 = cells.iter().map(|&a| measures[a]).sum();
        let kept: f64 = cells.iter().map(|&a| measures[a] * table[a]).sum();
        TCandidate { cells, probability, outside: total_mass - kept }
    };
    let mut out = Vec::new();
    if table.len() <= EXHAUSTIVE_CELL_LIMIT {
        for mask in 0u32..(1u32 << table.len()) {
            let cells: Vec<usize> = (0..table.len()).filter(|a| mask >> a & 1 == 1).collect();
            out.push(build(cells));
        }
    } else {
        out.push(build(Vec::new()));
        let mut thresholds: Vec<f64> = table.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        for theta in thresholds {
            let cells: Vec<usize> = (0..table.len()).filter(|&a| table[a] >= theta).collect();
            out.push(build(cells));
        }
    }
    out.retain(|c| c.outside <= eps + 1e-12);
    out
}

fn subsets_up_to(n: usize, j_max: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, all: &mut Vec<Vec<usize>>) {
        if left == 0 {
            all.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, all);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    for size in 0..=j_max.min(n) {
        rec(0, n, size, &mut Vec::new(), &mut all);
    }
    all
}

/// Exhaustive capture oracle: every coordinate set up to `j_max`, every
/// candidate cell set per side, feasibility `outside <= eps`, minimizing
/// (cross term, total outside mass) lexicographically. Candidates are
/// scanned smallest coordinate set first and in a fixed cell-set order, and
/// only strict improvements replace the incumbent, so ties resolve to the
/// earliest candidate.
pub fn junta_capture_bruteforce(
    f1: &PointFunction,
    f2: &PointFunction,
    eps: f64,
    j_max: usize,
) -> Result<JuntaCapture, JuntaError> {
    require_same_space(f1, f2)?;
    if eps <= 0.0 {
        return Err(JuntaError::BadEps { eps });
    }
    let space = f1.space();
    let subsets = subsets_up_to(space.n(), j_max);
    let mut pairs: u128 = 0;
    for coords in &subsets {
        let cells = space.alphabet().pow(coords.len() as u32) as u128;
        let cand = if cells as usize <= EXHAUSTIVE_CELL_LIMIT {
            1u128 << cells
        } else {
            cells + 1
        };
        pairs = pairs.saturating_add(cand * cand);
    }
    if pairs > BRUTE_PAIR_CAP {
        return Err(JuntaError::BruteBudget { pairs, cap: BRUTE_PAIR_CAP });
    }

    let mut best: Option<JuntaCapture> = None;
    for coords in subsets {
        let j_set = CoordinateSet::new(coords, space.n())?;
        let measures = cell_measures(space, &j_set);
        let table1 = f1.conditional_expectation(&j_set)?;
        let table2 = f2.conditional_expectation(&j_set)?;
        let cand1 = t_candidates(&table1, &measures, eps);
        let cand2 = t_candidates(&table2, &measures, eps);
        // Pair weights of the cell chain, so the cross term is a plain
        // double sum instead of a tensor apply per candidate pair.
        let cell_space = space.sibling(j_set.len());
        let m = cell_space.size();
        let weights: Vec<Vec<f64>> = (0..m)
            .map(|a| (0..m).map(|b| cell_space.edge_weight(a, b)).collect())
            .collect();
        for c1 in &cand1 {
            let mut row = vec![0.0; m];
            for &a in &c1.cells {
                for b in 0..m {
                    row[b] += weights[a][b];
                }
            }
            for c2 in &cand2 {
                let cross: f64 = c2.cells.iter().map(|&b| row[b]).sum();
                let outside = c1.outside + c2.outside;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        cross < b.cross || (cross == b.cross && outside < b.outside1 + b.outside2)
                    }
                };
                if better {
                    best = Some(JuntaCapture {
                        j_set: j_set.clone(),
                        t1: c1.cells.clone(),
                        t2: c2.cells.clone(),
                        t1_probability: c1.probability,
                        t2_probability: c2.probability,
                        outside1: c1.outside,
                        outside2: c2.outside,
                        cross,
                        eps,
                        method: CaptureMethod::Exhaustive { j_max },
                    });
                }
            }
        }
    }
    // T = everything is always feasible, so a best candidate exists.
    Ok(best.expect("the all-cells candidate is feasible"))
}

/// One side of a capture, chosen by the 3/4 rule.
#[derive(Debug, Clone)]
pub struct OneSidedCapture {
    /// 1 or 2: which input function the cells belong to.
    pub side: usize,
    pub j_set: CoordinateSet,
    pub t_cells: Vec<usize>,
    pub t_probability: f64,
    pub outside: f64,
    pub capture: JuntaCapture,
}

/// Runs the spectral capture and keeps the side whose kept cells have
/// probability at most 3/4; side 1 wins ties. If both sides are too heavy
/// the input pair was not sparse enough, reported as a soft failure.
pub fn one_sided_capture(
    f1: &PointFunction,
    f2: &PointFunction,
    eps: f64,
    params: &CaptureParams,
) -> Result<OneSidedCapture, JuntaError> {
    let capture = junta_capture_spectral(f1, f2, eps, params.eta, params.gamma, params.j_budget)?;
    let (side, t_cells, t_probability, outside) = if capture.t1_probability <= 0.75 {
        (1, capture.t1.clone(), capture.t1_probability, capture.outside1)
    } else if capture.t2_probability <= 0.75 {
        (2, capture.t2.clone(), capture.t2_probability, capture.outside2)
    } else {
        return Err(JuntaError::NoSideQualifies {
            p1: capture.t1_probability,
            p2: capture.t2_probability,
        });
    };
    Ok(OneSidedCapture {
        side,
        j_set: capture.j_set.clone(),
        t_cells,
        t_probability,
        outside,
        capture,
    })
}

/// Capture of a single function followed by exact pruning of the kept
/// cells to an independent set of the cell chain.
#[derive(Debug, Clone)]
pub struct IndependentCapture {
    pub j_set: CoordinateSet,
    /// Cells kept by the capture before pruning.
    pub t_prime: Vec<usize>,
    /// The independent subset that survived, sorted.
    pub t_cells: Vec<usize>,
    /// Weighted cell mass retained by the pruning search.
    pub mwis_weight: f64,
    /// `E[1_{not T} E[g(a, .)]]`, recomputed from the raw function.
    pub loss: f64,
    pub kept_mass: f64,
    pub capture: JuntaCapture,
}

pub fn independent_junta_capture(
    g: &PointFunction,
    eps: f64,
    params: &CaptureParams,
) -> Result<IndependentCapture, JuntaError> {
    let capture = junta_capture_spectral(g, g, eps, params.eta, params.gamma, params.j_budget)?;
    debug_assert_eq!(capture.t1, capture.t2, "equal inputs must give equal cell sets");
    let space = g.space();
    let j_set = capture.j_set.clone();
    let cell_space = space.sibling(j_set.len());
    let raw = g.conditional_expectation(&j_set)?;
    let measures = cell_measures(space, &j_set);
    let weights: Vec<f64> = capture.t1.iter().map(|&a| measures[a] * raw[a]).collect();
    let mwis = independent::max_weight_independent_set(
        &cell_space,
        &capture.t1,
        &weights,
        params.mwis_cap,
    )?;
    assert!(
        independent::is_independent(&cell_space, &mwis.set),
        "pruned cell set {:?} is not independent",
        mwis.set
    );
    let kept_mass: f64 = mwis.set.iter().map(|&a| measures[a] * raw[a]).sum();
    let loss: f64 = (0..raw.len())
        .filter(|a| mwis.set.binary_search(a).is_err())
        .map(|a| measures[a] * raw[a])
        .sum();
    Ok(IndependentCapture {
        j_set,
        t_prime: capture.t1.clone(),
        t_cells: mwis.set,
        mwis_weight: mwis.weight,
        loss,
        kept_mass,
        capture,
    })
}

/// Practical-mode driver: halve `gamma` until the cross term reaches `eps`
/// or the junta budget refuses to grow further.
#[derive(Debug, Clone)]
pub struct DrivenCapture {
    pub capture: JuntaCapture,
    pub gamma_final: f64,
    pub rounds: usize,
    pub target_met: bool,
}

pub fn driven_capture(
    f1: &PointFunction,
    f2: &PointFunction,
    eps: f64,
    params: &CaptureParams,
) -> Result<DrivenCapture, JuntaError> {
    let mut gamma = params.gamma;
    let mut last: Option<(JuntaCapture, f64)> = None;
    for round in 1..=60 {
        match junta_capture_spectral(f1, f2, eps, params.eta, gamma, params.j_budget) {
            Ok(capture) => {
                let done = capture.cross <= eps;
                last = Some((capture, gamma));
                if done {
                    let (capture, gamma_final) = last.unwrap();
                    return Ok(DrivenCapture { capture, gamma_final, rounds: round, target_met: true });
                }
            }
            Err(JuntaError::Budget { .. }) => {
                // The junta budget refuses a finer cutoff; report the last
                // capture that fit.
                return match last {
                    Some((capture, gamma_final)) => Ok(DrivenCapture {
                        capture,
                        gamma_final,
                        rounds: round,
                        target_met: false,
                    }),
                    None => Err(junta_capture_spectral(
                        f1,
                        f2,
                        eps,
                        params.eta,
                        gamma,
                        params.j_budget,
                    )
                    .unwrap_err()),
                };
            }
            Err(other) => return Err(other),
        }
        gamma /= 2.0;
    }
    let (capture, gamma_final) = last.expect("at least one round ran");
    Ok(DrivenCapture { capture, gamma_final, rounds: 60, target_met: false })
}

/// How far noising both functions can move the quadratic form, checked
/// against the `sqrt(1 - eta)` bound. The bound is guaranteed only when
/// `(1 - eta) log_lambda(1 - eta) <= sqrt(1 - eta)`, with lambda the second
/// absolute eigenvalue; `condition_ok` reports that side condition.
#[derive(Debug, Clone, Copy)]
pub struct NoisyIpGap {
    pub quad_raw: f64,
    pub quad_noised: f64,
    pub gap: f64,
    pub bound: f64,
    pub lambda: f64,
    pub condition_ok: bool,
}

pub fn noisy_ip_gap(
    f1: &PointFunction,
    f2: &PointFunction,
    eta: f64,
) -> Result<NoisyIpGap, JuntaError> {
    require_same_space(f1, f2)?;
    for f in [f1, f2] {
        if let Some((index, &value)) =
            f.values().iter().enumerate().find(|(_, v)| v.abs() > 1.0)
        {
            return Err(JuntaError::NotBounded { index, value });
        }
    }
    let spectrum = f1.space().base().eigendecompose()?;
    let lambda = spectrum.lambda2();
    if !(eta > 1.0 - lambda && eta <= 1.0) {
        return Err(JuntaError::EtaRange { eta, min: 1.0 - lambda });
    }
    let quad_raw = f1.quad_form(f2)?;
    let g1 = f1.noise(eta)?;
    let g2 = f2.noise(eta)?;
    let quad_noised = g1.quad_form(&g2)?;
    let gap = (quad_raw - quad_noised).abs();
    let bound = (1.0 - eta).sqrt();
    let condition_ok = if eta == 1.0 {
        true
    } else {
        (1.0 - eta) * (1.0 - eta).ln() / lambda.ln() <= bound
    };
    Ok(NoisyIpGap { quad_raw, quad_noised, gap, bound, lambda, condition_ok })
}

/// A bounded set of labels per cell of some `V^j`.
#[derive(Debug, Clone)]
pub struct LabelMap {
    space: ProductSpace,
    labels: Vec<Vec<u64>>,
    ell: usize,
    p_exponent: f64,
}

impl LabelMap {
    pub fn new(
        space: ProductSpace,
        mut labels: Vec<Vec<u64>>,
        ell: usize,
        p_exponent: f64,
    ) -> Result<LabelMap, JuntaError> {
        if p_exponent <= 2.0 {
            return Err(JuntaError::BadExponent { p: p_exponent });
        }
        if labels.len() != space.size() {
            return Err(JuntaError::LabelShape { got: labels.len(), want: space.size() });
        }
        for (cell, set) in labels.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.len() > ell {
                return Err(JuntaError::LabelCardinality { cell, got: set.len(), ell });
            }
        }
        Ok(LabelMap { space, labels, ell, p_exponent })
    }

    pub fn labels(&self) -> &[Vec<u64>] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LabelDensity {
    /// Edge-measure of cell pairs sharing a label.
    pub pair_density: f64,
    pub best_index: Option<u64>,
    pub best_measure: f64,
    pub threshold: f64,
    /// Whether the density reached `eps`, making the bound applicable.
    pub applicable: bool,
    /// Vacuously true when not applicable; otherwise whether some label
    /// reaches the threshold measure. A failure for a given exponent says
    /// the exponent undershoots the chain, not that the code is wrong.
    pub holds: bool,
}

pub fn label_density_check(m: &LabelMap, eps: f64) -> LabelDensity {
    let size = m.space.size();
    let mut pair_density = 0.0;
    for a in 0..size {
        if m.labels[a].is_empty() {
            continue;
        }
        for b in 0..size {
            if intersects(&m.labels[a], &m.labels[b]) {
                pair_density += m.space.edge_weight(a, b);
            }
        }
    }
    let mut by_label: BTreeMap<u64, f64> = BTreeMap::new();
    for a in 0..size {
        for &label in &m.labels[a] {
            *by_label.entry(label).or_insert(0.0) += m.space.point_measure(a);
        }
    }
    let (best_index, best_measure) = by_label
        .iter()
        .fold((None, 0.0), |(bi, bm), (&label, &measure)| {
            if measure > bm {
                (Some(label), measure)
            } else {
                (bi, bm)
            }
        });
    let ell = m.ell.max(1) as f64;
    let p = m.p_exponent;
    let threshold = (eps / (ell * ell)).powf(2.0 * p / (p - 2.0));
    let applicable = pair_density >= eps;
    LabelDensity {
        pair_density,
        best_index,
        best_measure,
        threshold,
        applicable,
        holds: !applicable || best_measure >= threshold,
    }
}

fn intersects(a: &[u64], b: &[u64]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Packs two functions on `V^n` into one function on `V^(n+2)` supported on
/// two marker assignments of the leading coordinate pair. The markers are
/// the lexicographically first adjacent loop-free pair of the squared
/// chain, and `<F, AF> = 2 w <f1, A f2>` with `w` the marker edge weight.
#[derive(Debug, Clone)]
pub struct PairEmbedding {
    pub function: PointFunction,
    pub a1: usize,
    pub a2: usize,
    pub edge_weight: f64,
}

pub fn pair_embed(f1: &PointFunction, f2: &PointFunction) -> Result<PairEmbedding, JuntaError> {
    require_same_space(f1, f2)?;
    let space = f1.space();
    let squares = space.sibling(2);
    let mut marker = None;
    'outer: for a1 in 0..squares.size() {
        if squares.adjacent(a1, a1) {
            continue;
        }
        for a2 in 0..squares.size() {
            if a2 != a1 && !squares.adjacent(a2, a2) && squares.adjacent(a1, a2) {
                marker = Some((a1, a2));
                break 'outer;
            }
        }
    }
    let Some((a1, a2)) = marker else {
        return Err(JuntaError::NoCleanPair);
    };
    let big = space.grow(space.n() + 2)?;
    let block = space.size();
    let mut values = vec![0.0; big.size()];
    values[a1 * block..(a1 + 1) * block].copy_from_slice(f1.values());
    values[a2 * block..(a2 + 1) * block].copy_from_slice(f2.values());
    let range = if f1.range() == Range::Unit && f2.range() == Range::Unit {
        Range::Unit
    } else {
        Range::Signed
    };
    let function = PointFunction::new(big, values, range)?;
    Ok(PairEmbedding { function, a1, a2, edge_weight: squares.edge_weight(a1, a2) })
}

/// The appendix's own parameter chain, evaluated symbolically in log space.
/// These are the values at which the cross-term bound becomes a theorem;
/// they are reported, never run.
#[derive(Debug, Clone)]
pub struct FaithfulParameters {
    pub eps: f64,
    pub c: f64,
    pub p_exponent: f64,
    pub lambda: f64,
    pub delta_moo: ScheduleValue,
    pub tau_moo: ScheduleValue,
    /// `1 - eta`; eta itself is too close to 1 to print.
    pub one_minus_eta: ScheduleValue,
    pub ell: ScheduleValue,
    pub gamma_bound: ScheduleValue,
    pub j_bound: ScheduleValue,
    /// Exponent e such that the final sparsity threshold is `eps^e`.
    pub delta_exponent: f64,
}

pub fn faithful_parameters(
    eps: f64,
    c: f64,
    p_exponent: f64,
    lambda: f64,
) -> Result<FaithfulParameters, JuntaError> {
    if p_exponent <= 2.0 {
        return Err(JuntaError::BadExponent { p: p_exponent });
    }
    assert!(eps > 0.0 && eps < 1.0 && c > 0.0 && lambda > 0.0 && lambda < 1.0);
    let ln_eps = eps.ln();
    // 1 - eta must sit below lambda (the eta > 1 - lambda hypothesis),
    // satisfy 2 sqrt(1-eta) <= eps^(c+1)/4, and satisfy the perturbation
    // side condition; keep halving until the last one gives in.
    let mut ln_s = (lambda.ln() + 0.5f64.ln()).min((2.0 * c + 2.0) * ln_eps - 16f64.ln());
    for _ in 0..4096 {
        // Condition: sqrt(s) ln(s) / ln(lambda) <= 1.
        let lhs = (0.5 * ln_s).exp() * ln_s / lambda.ln();
        if lhs <= 1.0 {
            break;
        }
        ln_s -= std::f64::consts::LN_2;
    }
    let s = ln_s.exp();
    // ln(1 - eta^2) = ln(s) + ln(2 - s); when s underflows the second term
    // is ln 2 exactly, which is also its limit.
    let ln_one_minus_eta_sq = ln_s + (2.0 - s).ln();
    let ln_ell = std::f64::consts::LN_2 - 2.0 * ln_one_minus_eta_sq - c * ln_eps;
    let pow = 2.0 * p_exponent / (p_exponent - 2.0);
    let ln_gamma =
        c * ln_eps + pow * (ln_eps - std::f64::consts::LN_2 - 2.0 * ln_ell) - std::f64::consts::LN_2;
    let ln_j = std::f64::consts::LN_2 - 2.0 * ln_one_minus_eta_sq - ln_gamma;
    Ok(FaithfulParameters {
        eps,
        c,
        p_exponent,
        lambda,
        delta_moo: ScheduleValue::from_ln(c * ln_eps),
        tau_moo: ScheduleValue::from_ln(c * ln_eps),
        one_minus_eta: ScheduleValue::from_ln(ln_s),
        ell: ScheduleValue::from_ln(ln_ell),
        gamma_bound: ScheduleValue::from_ln(ln_gamma),
        j_bound: ScheduleValue::from_ln(ln_j),
        delta_exponent: 0.5 * ln_s / ln_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{complete_graph_chain, BaseChain, ProductSpace};
    use crate::functions::Range;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k3(n: usize) -> ProductSpace {
        ProductSpace::new(complete_graph_chain(3), n).unwrap()
    }

    fn dictator(space: &ProductSpace, coord: usize) -> PointFunction {
        PointFunction::from_fn(space.clone(), Range::Unit, |d| f64::from(d[coord] == 0))
    }

    fn random_unit(space: &ProductSpace, rng: &mut ChaCha8Rng) -> PointFunction {
        let values: Vec<f64> = (0..space.size()).map(|_| rng.gen()).collect();
        PointFunction::unit(space.clone(), values).unwrap()
    }

    #[test]
    fn dictatorship_capture_lands_on_its_coordinate() {
        let space = k3(3);
        let f = dictator(&space, 0);
        let c = junta_capture_spectral(&f, &f, 0.1, 0.9, 0.01, 8).unwrap();
        assert_eq!(c.j_set.as_slice(), &[0]);
        assert_eq!(c.t1, vec![0]);
        assert_eq!(c.t2, vec![0]);
        assert_eq!(c.outside1, 0.0, "no raw mass sits outside the kept cell");
        assert_eq!(c.cross, 0.0, "a single loop-free cell spans no edge");
        assert!((c.t1_probability - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_functions_have_empty_juntas() {
        let space = k3(2);
        let zero = PointFunction::constant(space.clone(), 0.0);
        let c = junta_capture_spectral(&zero, &zero, 0.1, 0.99, 0.01, 8).unwrap();
        assert!(c.j_set.is_empty());
        assert!(c.t1.is_empty() && c.t2.is_empty());
        assert_eq!(c.outside1, 0.0);
        assert_eq!(c.cross, 0.0);

        let one = PointFunction::constant(space, 1.0);
        let c = junta_capture_spectral(&one, &one, 0.1, 0.99, 0.01, 8).unwrap();
        assert!(c.j_set.is_empty());
        assert_eq!(c.t1, vec![0], "the single empty-assignment cell is kept");
        assert_eq!(c.cross, 1.0);
        assert_eq!(c.outside1, 0.0);
    }

    #[test]
    fn junta_budget_is_enforced_with_partial_result() {
        let space = k3(3);
        let f = PointFunction::from_fn(space.clone(), Range::Unit, |d| {
            (f64::from(d[0] == 0) + f64::from(d[1] == 0) + f64::from(d[2] == 0)) / 3.0
        });
        let err = junta_capture_spectral(&f, &f, 0.05, 0.99, 0.001, 2).unwrap_err();
        match err {
            JuntaError::Budget { got, budget, influences1, .. } => {
                assert_eq!((got, budget), (3, 2));
                assert!(influences1.iter().all(|&v| v > 0.001));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn parameter_validation() {
        let space = k3(1);
        let f = PointFunction::constant(space.clone(), 0.5);
        let g = PointFunction::constant(k3(2), 0.5);
        assert!(matches!(
            junta_capture_spectral(&f, &g, 0.1, 0.9, 0.01, 8),
            Err(JuntaError::SpaceMismatch)
        ));
        assert!(matches!(
            junta_capture_spectral(&f, &f, 0.1, 1.0, 0.01, 8),
            Err(JuntaError::EtaInterval { .. })
        ));
        assert!(matches!(
            junta_capture_spectral(&f, &f, 0.1, 0.9, 0.0, 8),
            Err(JuntaError::BadGamma { .. })
        ));
        assert!(matches!(
            junta_capture_spectral(&f, &f, 0.0, 0.9, 0.01, 8),
            Err(JuntaError::BadEps { .. })
        ));
    }

    #[test]
    fn bruteforce_agrees_with_spectral_on_dictatorship() {
        let space = k3(3);
        let f = dictator(&space, 0);
        let spectral = junta_capture_spectral(&f, &f, 0.1, 0.9, 0.01, 8).unwrap();
        let brute = junta_capture_bruteforce(&f, &f, 0.1, 1).unwrap();
        assert_eq!(brute.j_set, spectral.j_set);
        assert_eq!(brute.t1, spectral.t1);
        assert_eq!(brute.t2, spectral.t2);
        assert_eq!(brute.cross, 0.0);
    }

    #[test]
    fn bruteforce_on_a_two_junta_recovers_the_exact_quadratic_form() {
        // f depends on the first two coordinates and is 0/1 there, so the
        // minimal feasible cell sets are its support and the cross term is
        // the full quadratic form.
        let space = k3(3);
        let f = PointFunction::from_fn(space.clone(), Range::Unit, |d| f64::from(d[0] == d[1]));
        let brute = junta_capture_bruteforce(&f, &f, 0.05, 2).unwrap();
        assert_eq!(brute.j_set.as_slice(), &[0, 1]);
        let want = f.quad_form(&f).unwrap();
        assert!((brute.cross - want).abs() < 1e-12, "{} vs {want}", brute.cross);
        assert!((want - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn bruteforce_never_does_worse_than_spectral() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let space = k3(2);
        for round in 0..12 {
            let f1 = random_unit(&space, &mut rng);
            let f2 = random_unit(&space, &mut rng);
            let eps = 0.3;
            let spectral = junta_capture_spectral(&f1, &f2, eps, 0.99, 0.05, 8).unwrap();
            let brute = junta_capture_bruteforce(&f1, &f2, eps, spectral.j_set.len()).unwrap();
            assert!(
                brute.cross <= spectral.cross + 1e-12,
                "round {round}: exhaustive {} vs spectral {}",
                brute.cross,
                spectral.cross
            );
        }
    }

    #[test]
    fn one_sided_selection_rules() {
        let space = k3(3);
        let heavy = PointFunction::constant(space.clone(), 1.0);
        let light = dictator(&space, 1);
        let pick = one_sided_capture(&heavy, &light, 0.1, &CaptureParams::default()).unwrap();
        assert_eq!(pick.side, 2, "only the dictatorship side is one-sided");
        assert!((pick.t_probability - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(pick.outside, 0.0);

        let both = one_sided_capture(&light, &light, 0.1, &CaptureParams::default()).unwrap();
        assert_eq!(both.side, 1, "ties go to side 1");

        let err = one_sided_capture(&heavy, &heavy, 0.1, &CaptureParams::default()).unwrap_err();
        match err {
            JuntaError::NoSideQualifies { p1, p2 } => {
                assert_eq!((p1, p2), (1.0, 1.0));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn independent_capture_prunes_to_an_independent_cell_set() {
        // Half-weight on the diagonal of the first two coordinates: the
        // kept cells are the three diagonal cells, which are pairwise
        // adjacent, so exactly one survives and two thirds of the mass is
        // lost.
        let space = k3(2);
        let g = PointFunction::from_fn(space.clone(), Range::Unit, |d| {
            if d[0] == d[1] {
                0.5
            } else {
                0.0
            }
        });
        let out = independent_junta_capture(&g, 0.04, &CaptureParams::default()).unwrap();
        assert_eq!(out.j_set.as_slice(), &[0, 1]);
        assert_eq!(out.t_prime, vec![0, 4, 8]);
        assert_eq!(out.t_cells, vec![0], "equal weights tie toward the smallest cell");
        assert!((out.loss - 1.0 / 9.0).abs() < 1e-12, "loss {}", out.loss);
        assert!((out.kept_mass - 1.0 / 18.0).abs() < 1e-12);
        // Direct recomputation from the raw points.
        let mut direct = 0.0;
        for x in 0..space.size() {
            let d = space.decode(x);
            let cell = (d[0] as usize) * 3 + d[1] as usize;
            if out.t_cells.binary_search(&cell).is_err() {
                direct += space.point_measure(x) * g.values()[x];
            }
        }
        assert!((out.loss - direct).abs() < 1e-15);
    }

    #[test]
    fn independent_capture_of_dictatorship_is_lossless() {
        let space = k3(3);
        let g = dictator(&space, 0);
        let out = independent_junta_capture(&g, 0.1, &CaptureParams::default()).unwrap();
        assert_eq!(out.j_set.as_slice(), &[0]);
        assert_eq!(out.t_cells, vec![0]);
        assert_eq!(out.loss, 0.0);
        let zero = PointFunction::constant(space, 0.0);
        let empty = independent_junta_capture(&zero, 0.1, &CaptureParams::default()).unwrap();
        assert!(empty.j_set.is_empty() && empty.t_cells.is_empty());
        assert_eq!(empty.loss, 0.0);
    }

    #[test]
    fn gamma_halving_reaches_the_cross_target() {
        let space = k3(3);
        let f = dictator(&space, 0);
        let params = CaptureParams { gamma: 0.5, ..CaptureParams::default() };
        let run = driven_capture(&f, &f, 0.1, &params).unwrap();
        assert!(run.target_met);
        assert!(run.capture.cross <= 0.1);
        assert_eq!(run.capture.j_set.as_slice(), &[0]);
        // The dictating coordinate has influence 0.99^2 * 2/9 = 0.2178 in
        // the noised function, reached after halving 0.5 twice.
        assert_eq!(run.rounds, 3);
        assert!((run.gamma_final - 0.125).abs() < 1e-15);
    }

    #[test]
    fn noisy_gap_endpoints_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let space = k3(2);
        let values: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = PointFunction::signed(space.clone(), values).unwrap();
        let at_one = noisy_ip_gap(&f, &f, 1.0).unwrap();
        assert_eq!(at_one.gap, 0.0);
        assert!(at_one.condition_ok);

        for _ in 0..10 {
            let v1: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v2: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f1 = PointFunction::signed(space.clone(), v1).unwrap();
            let f2 = PointFunction::signed(space.clone(), v2).unwrap();
            let out = noisy_ip_gap(&f1, &f2, 0.99).unwrap();
            assert!(out.condition_ok, "eta = 0.99 satisfies the side condition on K3");
            assert!(out.gap <= out.bound + 1e-9, "gap {} bound {}", out.gap, out.bound);
        }

        // K3 has lambda = 1/2 up to solver dust, so eta clearly below it
        // must be refused.
        assert!(matches!(noisy_ip_gap(&f, &f, 0.4), Err(JuntaError::EtaRange { .. })));
        // At 0.9 the side condition fails on K3 but the gap is still data.
        let loose = noisy_ip_gap(&f, &f, 0.9).unwrap();
        assert!(!loose.condition_ok);

        let big = PointFunction::signed(space, vec![2.0; 9]).unwrap();
        assert!(matches!(noisy_ip_gap(&big, &big, 0.99), Err(JuntaError::NotBounded { .. })));
    }

    #[test]
    fn constant_functions_have_zero_gap() {
        let space = k3(2);
        let f = PointFunction::constant(space, 0.7);
        for eta in [0.6, 0.8, 0.99] {
            let out = noisy_ip_gap(&f, &f, eta).unwrap();
            assert!(out.gap < 1e-12, "eta {eta}: gap {}", out.gap);
        }
    }

    #[test]
    fn label_density_hand_case() {
        let space = k3(2);
        // Only the two diagonal cells (0,0) and (1,1) share a label; they
        // are adjacent, so the pair density is twice their edge weight.
        let mut labels = vec![Vec::new(); 9];
        labels[0] = vec![1];
        labels[4] = vec![1];
        let map = LabelMap::new(space, labels, 1, 4.0).unwrap();
        let out = label_density_check(&map, 1.0 / 18.0);
        assert!((out.pair_density - 1.0 / 18.0).abs() < 1e-15);
        assert_eq!(out.best_index, Some(1));
        assert!((out.best_measure - 2.0 / 9.0).abs() < 1e-15);
        assert!(out.applicable && out.holds);
    }

    #[test]
    fn label_density_trivial_cases() {
        let space = k3(1);
        let all = LabelMap::new(space.clone(), vec![vec![7], vec![7], vec![7]], 1, 3.0).unwrap();
        let out = label_density_check(&all, 0.5);
        assert_eq!(out.pair_density, 1.0);
        assert_eq!((out.best_index, out.best_measure), (Some(7), 1.0));
        assert!(out.holds);

        let none = LabelMap::new(space.clone(), vec![vec![], vec![], vec![]], 2, 3.0).unwrap();
        let out = label_density_check(&none, 0.5);
        assert_eq!(out.pair_density, 0.0);
        assert!(!out.applicable && out.holds);

        assert!(matches!(
            LabelMap::new(space.clone(), vec![vec![1, 2], vec![], vec![]], 1, 3.0),
            Err(JuntaError::LabelCardinality { .. })
        ));
        assert!(matches!(
            LabelMap::new(space, vec![vec![]; 3], 1, 2.0),
            Err(JuntaError::BadExponent { .. })
        ));
    }

    #[test]
    fn pair_embedding_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let space = k3(2);
        let f1 = random_unit(&space, &mut rng);
        let f2 = random_unit(&space, &mut rng);
        let embed = pair_embed(&f1, &f2).unwrap();
        assert_eq!((embed.a1, embed.a2), (0, 4), "(0,0) and (1,1) are the first clean pair");
        assert!((embed.edge_weight - 1.0 / 36.0).abs() < 1e-15);
        let lhs = embed.function.quad_form(&embed.function).unwrap();
        let rhs = 2.0 * embed.edge_weight * f1.quad_form(&f2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn pair_embedding_needs_a_loop_free_edge() {
        let lazy = BaseChain::validate(None, vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let space = ProductSpace::new(lazy, 1).unwrap();
        let f = PointFunction::constant(space, 0.5);
        assert!(matches!(pair_embed(&f, &f), Err(JuntaError::NoCleanPair)));
    }

    #[test]
    fn faithful_parameters_scale_to_markers() {
        let modest = faithful_parameters(0.1, 1.0, 4.0, 0.5).unwrap();
        let s = match modest.one_minus_eta {
            ScheduleValue::Finite(v) => v,
            other => panic!("expected finite 1 - eta, got {other:?}"),
        };
        assert!(s <= 1e-4 / 16.0 + 1e-18, "2 sqrt(1-eta) <= eps^(c+1)/2 forces s <= eps^4/16");
        let lhs = s.sqrt() * s.ln() / 0.5f64.ln();
        assert!(lhs <= 1.0, "side condition must hold at the reported eta");
        assert!(matches!(modest.ell, ScheduleValue::Finite(v) if v > 1e9));
        assert!(modest.delta_exponent > 1.0);

        let extreme = faithful_parameters(1e-6, 3.0, 4.0, 0.5).unwrap();
        assert!(matches!(extreme.gamma_bound, ScheduleValue::Infinitesimal));
        assert!(matches!(extreme.j_bound, ScheduleValue::Astronomical));
        assert!(matches!(faithful_parameters(0.1, 1.0, 2.0, 0.5), Err(JuntaError::BadExponent { .. })));
    }

    #[test]
    fn spectral_cross_matches_pairwise_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let space = k3(2);
        let f1 = random_unit(&space, &mut rng);
        let f2 = random_unit(&space, &mut rng);
        let c = junta_capture_spectral(&f1, &f2, 0.25, 0.99, 0.02, 8).unwrap();
        let cell_space = space.sibling(c.j_set.len());
        let mut direct = 0.0;
        for &a in &c.t1 {
            for &b in &c.t2 {
                direct += cell_space.edge_weight(a, b);
            }
        }
        assert!((c.cross - direct).abs() < 1e-12);
    }
}
