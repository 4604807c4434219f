//! Independence in product graphs: exact maximum-weight independent sets,
//! distance from independence, and the matching-like decomposition.
//!
//! Adjacency is always read off the sparsity pattern of the base chain, so
//! independence is a combinatorial statement, never a float comparison. A
//! vertex with a self-loop is adjacent to itself and therefore belongs to no
//! independent set; the decomposition below handles such vertices with a
//! dedicated loop step, otherwise its residual would not be independent on
//! chains with lazy states.

use thiserror::Error;

use crate::chain::ProductSpace;
use crate::functions::{FunctionError, PointFunction};

/// Branch-and-bound refuses instances with more candidate vertices than
/// this; beyond it the exact search stops being a desk-scale computation.
pub const DEFAULT_MWIS_CAP: usize = 2000;

#[derive(Debug, Error)]
pub enum IndependentError {
    #[error("exact search allows at most {cap} candidate vertices, got {got}")]
    VertexCap { got: usize, cap: usize },
    #[error("{vertices} vertices but {weights} weights")]
    WeightMismatch { vertices: usize, weights: usize },
    #[error("vertex {vertex} out of range for {size} points")]
    BadVertex { vertex: usize, size: usize },
    #[error("vertex {vertex} listed twice")]
    DuplicateVertex { vertex: usize },
    #[error("negative weight {weight} at vertex {vertex}")]
    NegativeWeight { vertex: usize, weight: f64 },
    #[error(transparent)]
    Function(#[from] FunctionError),
}

/// No two listed points adjacent, and no listed point a loop vertex.
pub fn is_independent(space: &ProductSpace, set: &[usize]) -> bool {
    for (i, &x) in set.iter().enumerate() {
        for &y in &set[i..] {
            if space.adjacent(x, y) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwisResult {
    /// Point indices of the optimum, sorted ascending.
    pub set: Vec<usize>,
    pub weight: f64,
}

/// Exact maximum-weight independent set over the listed vertices with
/// nonnegative weights. Branch and bound: vertices are branched in order of
/// descending weight, the bound is the total remaining available weight, and
/// pruning is strict, so every exact weight tie is resolved by the
/// lexicographically smallest sorted vertex set.
pub fn max_weight_independent_set(
    space: &ProductSpace,
    vertices: &[usize],
    weights: &[f64],
    cap: usize,
) -> Result<MwisResult, IndependentError> {
    if vertices.len() != weights.len() {
        return Err(IndependentError::WeightMismatch {
            vertices: vertices.len(),
            weights: weights.len(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for (&v, &w) in vertices.iter().zip(weights) {
        if v >= space.size() {
            return Err(IndependentError::BadVertex { vertex: v, size: space.size() });
        }
        if !seen.insert(v) {
            return Err(IndependentError::DuplicateVertex { vertex: v });
        }
        if w < 0.0 {
            return Err(IndependentError::NegativeWeight { vertex: v, weight: w });
        }
    }
    // Loop vertices can never be chosen; drop them before the cap check.
    let mut order: Vec<(usize, f64)> = vertices
        .iter()
        .zip(weights)
        .filter(|&(&v, _)| !space.adjacent(v, v))
        .map(|(&v, &w)| (v, w))
        .collect();
    if order.len() > cap {
        return Err(IndependentError::VertexCap { got: order.len(), cap });
    }
    // Heaviest first; ties by point index keep the branch order canonical.
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let m = order.len();
    let blocks = m.div_ceil(64).max(1);
    let mut adj = vec![vec![0u64; blocks]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            if space.adjacent(order[i].0, order[j].0) {
                adj[i][j / 64] |= 1 << (j % 64);
                adj[j][i / 64] |= 1 << (i % 64);
            }
        }
    }
    let mut search = Search {
        order: &order,
        adj: &adj,
        best_weight: 0.0,
        best_set: Vec::new(),
        current: Vec::new(),
    };
    let mut avail = vec![u64::MAX; blocks];
    if m % 64 != 0 {
        avail[blocks - 1] = (1u64 << (m % 64)) - 1;
    }
    if m == 0 {
        avail[0] = 0;
    }
    let total: f64 = order.iter().map(|&(_, w)| w).sum();
    search.explore(&mut avail, 0.0, total);
    search.best_set.sort_unstable();
    Ok(MwisResult { set: search.best_set, weight: search.best_weight })
}

struct Search<'a> {
    order: &'a [(usize, f64)],
    adj: &'a [Vec<u64>],
    best_weight: f64,
    best_set: Vec<usize>,
    current: Vec<usize>,
}

impl Search<'_> {
    /// `sum_avail` is the exact weight still reachable; pruning on
    /// `current + sum_avail < best` is strict so ties survive to the leaf.
    fn explore(&mut self, avail: &mut [u64], current_weight: f64, sum_avail: f64) {
        if current_weight + sum_avail < self.best_weight {
            return;
        }
        let Some(pos) = first_bit(avail) else {
            self.finish(current_weight);
            return;
        };
        let (vertex, weight) = self.order[pos];
        // Include branch first: with the heaviest-first order this reaches
        // good incumbents early and tightens the bound.
        let saved: Vec<u64> = avail.to_vec();
        clear_bit(avail, pos);
        let mut removed = weight;
        for (b, block) in avail.iter_mut().enumerate() {
            let knocked = *block & self.adj[pos][b];
            if knocked != 0 {
                let mut bits = knocked;
                while bits != 0 {
                    let j = b * 64 + bits.trailing_zeros() as usize;
                    removed += self.order[j].1;
                    bits &= bits - 1;
                }
                *block &= !knocked;
            }
        }
        self.current.push(vertex);
        self.explore(avail, current_weight + weight, sum_avail - removed);
        self.current.pop();
        avail.copy_from_slice(&saved);
        // Exclude branch.
        clear_bit(avail, pos);
        self.explore(avail, current_weight, sum_avail - weight);
        avail.copy_from_slice(&saved);
    }

    fn finish(&mut self, weight: f64) {
        if weight > self.best_weight {
            self.best_weight = weight;
            self.best_set = self.current.clone();
            return;
        }
        if weight == self.best_weight {
            let mut cand = self.current.clone();
            cand.sort_unstable();
            let mut best = self.best_set.clone();
            best.sort_unstable();
            if cand < best {
                self.best_set = self.current.clone();
            }
        }
    }
}

fn first_bit(avail: &[u64]) -> Option<usize> {
    for (b, &block) in avail.iter().enumerate() {
        if block != 0 {
            return Some(b * 64 + block.trailing_zeros() as usize);
        }
    }
    None
}

fn clear_bit(avail: &mut [u64], pos: usize) {
    avail[pos / 64] &= !(1 << (pos % 64));
}

#[derive(Debug, Clone)]
pub struct FarResult {
    /// `E[g]` minus the heaviest independent mass.
    pub distance: f64,
    /// The independent set realizing the maximum of `E[g 1_S]`.
    pub best_set: Vec<usize>,
    pub best_mass: f64,
    pub expectation: f64,
}

/// Distance of `g` from being supported on an independent set, measured as
/// mass that no independent set can capture.
pub fn independent_distance(
    g: &PointFunction,
    cap: usize,
) -> Result<FarResult, IndependentError> {
    let space = g.space();
    let mut vertices = Vec::new();
    let mut weights = Vec::new();
    for (x, &v) in g.values().iter().enumerate() {
        if v > 0.0 {
            vertices.push(x);
            weights.push(space.point_measure(x) * v);
        }
    }
    let mwis = max_weight_independent_set(space, &vertices, &weights, cap)?;
    let expectation = g.expectation();
    Ok(FarResult {
        distance: expectation - mwis.weight,
        best_set: mwis.set,
        best_mass: mwis.weight,
        expectation,
    })
}

pub fn eps_far_from_independent(
    g: &PointFunction,
    eps: f64,
    cap: usize,
) -> Result<bool, IndependentError> {
    Ok(independent_distance(g, cap)?.distance > eps)
}

/// One augmentation of the decomposition: mass `gamma` was routed to each
/// endpoint of the edge `(x, y)`; a loop step has `x == y` and routes
/// `2 gamma` to its single vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentStep {
    pub x: usize,
    pub y: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// The matching-like part, `matched <= g` pointwise.
    pub matched: PointFunction,
    /// `g - matched`, supported on an independent set.
    pub residual: PointFunction,
    /// Support of the residual, sorted.
    pub residual_support: Vec<usize>,
    pub trace: Vec<AugmentStep>,
}

/// Splits `g` into a matching-like function plus a residual supported on an
/// independent set.
///
/// One greedy pass over the unordered edges `(a, b)`, `a <= b`, in
/// lexicographic order, loops included. Each non-loop edge routes
/// `gamma = min` of the two remaining endpoint masses, saturating at least
/// one endpoint; a loop edge saturates its vertex outright. Saturation
/// persists, so after the single pass every edge has a saturated endpoint
/// and the strict-slack set is independent.
pub fn matching_like_decompose(g: &PointFunction) -> Result<Decomposition, IndependentError> {
    if g.range() != crate::functions::Range::Unit {
        return Err(FunctionError::NotUnitRange.into());
    }
    let space = g.space();
    let size = space.size();
    let mut f = vec![0.0; size];
    let mut trace = Vec::new();
    for a in 0..size {
        if space.adjacent(a, a) {
            let gamma = space.point_measure(a) * (g.values()[a] - f[a]) / 2.0;
            if gamma > 0.0 {
                trace.push(AugmentStep { x: a, y: a, gamma });
            }
            f[a] = g.values()[a];
        }
        for b in (a + 1)..size {
            if !space.adjacent(a, b) {
                continue;
            }
            let slack_a = space.point_measure(a) * (g.values()[a] - f[a]);
            let slack_b = space.point_measure(b) * (g.values()[b] - f[b]);
            let gamma = slack_a.min(slack_b);
            if gamma <= 0.0 {
                continue;
            }
            // The saturated endpoint is assigned exactly; the other one is
            // incremented and capped so float dust never pushes f above g.
            if slack_a <= slack_b {
                f[a] = g.values()[a];
                f[b] = (f[b] + gamma / space.point_measure(b)).min(g.values()[b]);
            } else {
                f[b] = g.values()[b];
                f[a] = (f[a] + gamma / space.point_measure(a)).min(g.values()[a]);
            }
            trace.push(AugmentStep { x: a, y: b, gamma });
        }
    }
    let residual: Vec<f64> = (0..size).map(|x| g.values()[x] - f[x]).collect();
    let residual_support: Vec<usize> =
        (0..size).filter(|&x| residual[x] > 0.0).collect();
    debug_assert!(is_independent(space, &residual_support));
    let matched = PointFunction::unit(space.clone(), f)?;
    let residual = PointFunction::unit(space.clone(), residual)?;
    Ok(Decomposition { matched, residual, residual_support, trace })
}

#[derive(Debug, Clone)]
pub struct MatchingCertificate {
    /// Whether every independent set captures at most half of `E[f]`,
    /// within 1e-12.
    pub holds: bool,
    /// The independent set capturing the most mass.
    pub worst_set: Vec<usize>,
    pub worst_mass: f64,
    pub half_expectation: f64,
}

/// Certifies the defining property of a matching-like function: no
/// independent set holds more than half its expectation.
pub fn matching_like_certificate(
    f: &PointFunction,
    cap: usize,
) -> Result<MatchingCertificate, IndependentError> {
    let far = independent_distance(f, cap)?;
    let half = far.expectation / 2.0;
    Ok(MatchingCertificate {
        holds: far.best_mass <= half + 1e-12,
        worst_set: far.best_set,
        worst_mass: far.best_mass,
        half_expectation: half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{complete_graph_chain, BaseChain, ProductSpace};
    use crate::oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k3_square() -> ProductSpace {
        ProductSpace::new(complete_graph_chain(3), 2).unwrap()
    }

    fn disjointness_cube(n: usize) -> ProductSpace {
        let chain = BaseChain::validate(None, vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        ProductSpace::new(chain, n).unwrap()
    }

    #[test]
    fn rows_and_columns_are_the_heaviest_independent_sets() {
        // In K3 x K3 points are adjacent iff both coordinates differ, so
        // rows and columns are independent with weight 1/3 each. The
        // lexicographic tie-break must pick row zero.
        let space = k3_square();
        let vertices: Vec<usize> = (0..9).collect();
        let weights: Vec<f64> = (0..9).map(|x| space.point_measure(x)).collect();
        let r = max_weight_independent_set(&space, &vertices, &weights, DEFAULT_MWIS_CAP).unwrap();
        assert!((r.weight - 1.0 / 3.0).abs() < 1e-15, "weight {}", r.weight);
        assert_eq!(r.set, vec![0, 1, 2]);
        assert!(is_independent(&space, &r.set));
    }

    #[test]
    fn independence_is_pattern_based() {
        let space = k3_square();
        // (0,0) and (1,1) differ in both coordinates: adjacent.
        assert!(!is_independent(&space, &[0, 4]));
        // (0,0) and (0,1) share the first coordinate: not adjacent.
        assert!(is_independent(&space, &[0, 1]));
        // A loop vertex is never independent.
        let cube = disjointness_cube(2);
        assert!(!is_independent(&cube, &[0]), "the all-zero point has a self-loop");
        assert!(is_independent(&cube, &[3]), "the all-one point is isolated");
    }

    #[test]
    fn exact_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for space in [k3_square(), disjointness_cube(3)] {
            for round in 0..20 {
                let vertices: Vec<usize> =
                    (0..space.size()).filter(|_| rng.gen_bool(0.8)).collect();
                let weights: Vec<f64> = vertices.iter().map(|_| rng.gen::<f64>()).collect();
                let got =
                    max_weight_independent_set(&space, &vertices, &weights, DEFAULT_MWIS_CAP)
                        .unwrap();
                let mut edges = Vec::new();
                for i in 0..vertices.len() {
                    for j in i..vertices.len() {
                        if space.adjacent(vertices[i], vertices[j]) {
                            edges.push((i, j));
                        }
                    }
                }
                let (oracle_local, oracle_weight) =
                    oracle::mwis_bruteforce(vertices.len(), &edges, &weights);
                let oracle_set: Vec<usize> =
                    oracle_local.iter().map(|&i| vertices[i]).collect();
                assert!(
                    (got.weight - oracle_weight).abs() < 1e-12,
                    "round {round}: weight {} vs {}",
                    got.weight,
                    oracle_weight
                );
                assert_eq!(got.set, oracle_set, "round {round}");
            }
        }
    }

    #[test]
    fn zero_weight_ties_prefer_the_smaller_set() {
        let space = k3_square();
        // All weights zero: optimum weight 0 is achieved by the empty set,
        // which is lexicographically smallest.
        let vertices: Vec<usize> = (0..9).collect();
        let weights = vec![0.0; 9];
        let r = max_weight_independent_set(&space, &vertices, &weights, DEFAULT_MWIS_CAP).unwrap();
        assert_eq!(r.set, Vec::<usize>::new());
        assert_eq!(r.weight, 0.0);
    }

    #[test]
    fn input_validation() {
        let space = k3_square();
        assert!(matches!(
            max_weight_independent_set(&space, &[0, 1], &[1.0], DEFAULT_MWIS_CAP),
            Err(IndependentError::WeightMismatch { .. })
        ));
        assert!(matches!(
            max_weight_independent_set(&space, &[99], &[1.0], DEFAULT_MWIS_CAP),
            Err(IndependentError::BadVertex { .. })
        ));
        assert!(matches!(
            max_weight_independent_set(&space, &[1, 1], &[1.0, 1.0], DEFAULT_MWIS_CAP),
            Err(IndependentError::DuplicateVertex { vertex: 1 })
        ));
        assert!(matches!(
            max_weight_independent_set(&space, &[1], &[-0.5], DEFAULT_MWIS_CAP),
            Err(IndependentError::NegativeWeight { .. })
        ));
        assert!(matches!(
            max_weight_independent_set(&space, &[0, 1, 2], &[1.0, 1.0, 1.0], 2),
            Err(IndependentError::VertexCap { got: 3, cap: 2 })
        ));
    }

    #[test]
    fn loop_vertices_do_not_count_against_the_cap() {
        let cube = disjointness_cube(1);
        // State 0 has a self-loop, so only state 1 is a candidate.
        let r = max_weight_independent_set(&cube, &[0, 1], &[5.0, 1.0], 1).unwrap();
        assert_eq!(r.set, vec![1]);
    }

    #[test]
    fn all_ones_is_two_thirds_far_on_k3_square() {
        let space = k3_square();
        let g = PointFunction::constant(space, 1.0);
        let far = independent_distance(&g, DEFAULT_MWIS_CAP).unwrap();
        assert!((far.distance - 2.0 / 3.0).abs() < 1e-12, "distance {}", far.distance);
        assert!(eps_far_from_independent(&g, 0.5, DEFAULT_MWIS_CAP).unwrap());
        assert!(!eps_far_from_independent(&g, 0.7, DEFAULT_MWIS_CAP).unwrap());
    }

    fn check_decomposition(g: &PointFunction) -> Decomposition {
        let d = matching_like_decompose(g).unwrap();
        let space = g.space();
        for x in 0..space.size() {
            assert!(
                d.matched.values()[x] <= g.values()[x],
                "matched exceeds g at {x}: {} > {}",
                d.matched.values()[x],
                g.values()[x]
            );
            let sum = d.matched.values()[x] + d.residual.values()[x];
            assert!((sum - g.values()[x]).abs() < 1e-15, "split not exact at {x}");
        }
        assert!(
            is_independent(space, &d.residual_support),
            "residual support is not independent: {:?}",
            d.residual_support
        );
        let cert = matching_like_certificate(&d.matched, DEFAULT_MWIS_CAP).unwrap();
        assert!(
            cert.holds,
            "independent set {:?} holds {} of expectation {}",
            cert.worst_set,
            cert.worst_mass,
            2.0 * cert.half_expectation
        );
        for step in &d.trace {
            assert!(step.gamma > 0.0);
            assert!(space.adjacent(step.x, step.y));
        }
        d
    }

    #[test]
    fn all_ones_on_triangle_decomposes_to_one_leftover_state() {
        let space = ProductSpace::new(complete_graph_chain(3), 1).unwrap();
        let g = PointFunction::constant(space, 1.0);
        let d = check_decomposition(&g);
        // Edge (0,1) saturates both endpoints at once, leaving state 2.
        assert_eq!(d.residual_support, vec![2]);
        assert!((d.matched.expectation() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((d.trace[0].x, d.trace[0].y), (0, 1));
        assert!((d.trace[0].gamma - 1.0 / 3.0).abs() < 1e-15);
        // The solved stationary measure can differ across states in the last
        // bit, which may leave further steps at float-dust scale.
        let dust: f64 = d.trace[1..].iter().map(|s| s.gamma).sum();
        assert!(dust < 1e-13, "spurious augmentation mass {dust}");
    }

    #[test]
    fn indicator_of_independent_set_is_pure_residual() {
        let space = k3_square();
        let g = PointFunction::indicator(space, [0usize, 1, 2]);
        let d = check_decomposition(&g);
        assert_eq!(d.residual_support, vec![0, 1, 2]);
        assert!(d.matched.values().iter().all(|&v| v == 0.0));
        assert!(d.trace.is_empty());
    }

    #[test]
    fn loop_vertex_mass_is_absorbed_by_the_loop_step() {
        // The all-zero point of the disjointness cube is self-adjacent, so
        // an indicator sitting on it must be matched entirely by the loop,
        // not left in the residual.
        let cube = disjointness_cube(2);
        let g = PointFunction::indicator(cube.clone(), [0usize]);
        let d = check_decomposition(&g);
        assert!(d.residual_support.is_empty());
        assert_eq!(d.matched.values()[0], 1.0);
        assert_eq!(d.trace[0], AugmentStep { x: 0, y: 0, gamma: cube.point_measure(0) / 2.0 });
    }

    #[test]
    fn saturated_points_agree_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let space = k3_square();
        let values: Vec<f64> = (0..9).map(|_| rng.gen()).collect();
        let g = PointFunction::unit(space, values).unwrap();
        let d = check_decomposition(&g);
        for x in 0..9 {
            if !d.residual_support.contains(&x) {
                assert_eq!(
                    d.matched.values()[x],
                    g.values()[x],
                    "outside the residual support the split must be exact"
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decomposition_invariants_hold(raw in proptest::collection::vec(0.0f64..=1.0, 27)) {
            let space = ProductSpace::new(complete_graph_chain(3), 3).unwrap();
            let g = PointFunction::unit(space, raw).unwrap();
            check_decomposition(&g);
        }

        #[test]
        fn decomposition_invariants_hold_with_loops(raw in proptest::collection::vec(0.0f64..=1.0, 16)) {
            let space = disjointness_cube(4);
            let g = PointFunction::unit(space, raw).unwrap();
            check_decomposition(&g);
        }

        #[test]
        fn distance_never_exceeds_expectation(raw in proptest::collection::vec(0.0f64..=1.0, 9)) {
            let g = PointFunction::unit(k3_square(), raw).unwrap();
            let far = independent_distance(&g, DEFAULT_MWIS_CAP).unwrap();
            prop_assert!(far.distance >= -1e-12);
            prop_assert!(far.distance <= far.expectation + 1e-12);
        }
    }

    #[test]
    fn decompose_requires_unit_range() {
        let space = k3_square();
        let g = PointFunction::signed(space, vec![2.0; 9]).unwrap();
        assert!(matches!(
            matching_like_decompose(&g),
            Err(IndependentError::Function(FunctionError::NotUnitRange))
        ));
    }
}
