//! Reversible base chains and their tensor products.
//!
//! A `BaseChain` is a row-stochastic matrix over a small state set that has
//! passed the full battery: nonnegative entries, rows summing to one,
//! irreducibility, aperiodicity, and detailed balance against its stationary
//! measure. A `ProductSpace` is the n-fold tensor power of a base chain. Its
//! point set `V^n` is indexed in mixed-radix lexicographic order with the
//! first coordinate most significant; every module in this crate uses that
//! single indexing scheme.
//!
//! The product transition operator is never materialized. Applying it costs
//! `n * |V|^(n+1)` by sweeping the base matrix along each tensor axis.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg;

/// Hard ceiling on dense point tables: 3^16 entries by default.
pub const DEFAULT_POINT_CAP: usize = 43_046_721;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("transition matrix must be square with at least two states, got {rows} rows")]
    Shape { rows: usize },
    #[error("row {row} has width {width}, expected {expected}")]
    RaggedRow { row: usize, width: usize, expected: usize },
    #[error("negative transition probability {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} of the transition matrix sums to {sum:.17}, expected 1 within 1e-12")]
    NotRowStochastic { row: usize, sum: f64 },
    #[error("chain is reducible: state {from} cannot reach state {to} along positive transitions")]
    Reducible { from: usize, to: usize },
    #[error("chain is periodic with period {period}")]
    Periodic { period: u64 },
    #[error(
        "detailed balance fails at ({x}, {y}): mu(x)A(x,y) = {forward:.17} but mu(y)A(y,x) = {backward:.17}"
    )]
    NotReversible { x: usize, y: usize, forward: f64, backward: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("chain definition line {line}: {message}")]
    Definition { line: usize, message: String },
    #[error("product space needs {needed} table entries, cap is {cap}")]
    PointCap { needed: u128, cap: usize },
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
}

/// A validated reversible, irreducible, aperiodic Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseChain {
    states: Vec<String>,
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    w_min: f64,
}

impl BaseChain {
    /// Runs the whole validation battery and computes the stationary measure.
    ///
    /// The stationary measure is found by a dense solve of the stationarity
    /// system with the normalization row appended, then cross-checked by
    /// power iteration; disagreement is a numerical failure, not a tolerance.
    pub fn validate(
        states: Option<Vec<String>>,
        transition: Vec<Vec<f64>>,
    ) -> Result<BaseChain, ChainError> {
        let n = transition.len();
        if n < 2 {
            return Err(ChainError::Shape { rows: n });
        }
        for (row, r) in transition.iter().enumerate() {
            if r.len() != n {
                return Err(ChainError::RaggedRow { row, width: r.len(), expected: n });
            }
        }
        let states = match states {
            Some(s) => {
                if s.len() != n {
                    return Err(ChainError::Shape { rows: n });
                }
                s
            }
            None => (0..n).map(|i| i.to_string()).collect(),
        };
        for (row, r) in transition.iter().enumerate() {
            for (col, &value) in r.iter().enumerate() {
                if value < 0.0 || !value.is_finite() {
                    return Err(ChainError::NegativeEntry { row, col, value });
                }
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(ChainError::NotRowStochastic { row, sum });
            }
        }

        check_irreducible(&transition)?;
        check_aperiodic(&transition)?;

        let stationary = solve_stationary(&transition)?;
        // Detailed balance: mu(x) A(x,y) = mu(y) A(y,x) for every pair.
        for x in 0..n {
            for y in x + 1..n {
                let forward = stationary[x] * transition[x][y];
                let backward = stationary[y] * transition[y][x];
                if (forward - backward).abs() > 1e-12 {
                    return Err(ChainError::NotReversible { x, y, forward, backward });
                }
            }
        }

        let mut w_min = f64::INFINITY;
        for x in 0..n {
            for y in 0..n {
                if transition[x][y] != 0.0 {
                    w_min = w_min.min(stationary[x] * transition[x][y]);
                }
            }
        }

        Ok(BaseChain { states, transition, stationary, w_min })
    }

    pub fn size(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Minimum positive edge weight `mu(x) A(x,y)` of the base chain.
    pub fn w_min(&self) -> f64 {
        self.w_min
    }

    /// Sparsity pattern of the transition matrix. Adjacency everywhere in
    /// this crate is decided by this pattern, never by comparing floats
    /// against a threshold.
    pub fn edge_pattern(&self, x: usize, y: usize) -> bool {
        self.transition[x][y] != 0.0
    }

    pub fn has_self_loop(&self, x: usize) -> bool {
        self.transition[x][x] != 0.0
    }

    /// Parses a chain definition: a `states:` line with whitespace-separated
    /// labels followed by one `row:` line per state. Entries are decimals or
    /// exact fractions like `1/2`, parsed exactly and then converted to
    /// double. `#` starts a comment; blank lines are ignored.
    pub fn parse(text: &str) -> Result<BaseChain, ChainError> {
        let mut states: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix("states:") {
                if states.is_some() {
                    return Err(ChainError::Definition {
                        line,
                        message: "duplicate states line".into(),
                    });
                }
                let labels: Vec<String> = rest.split_whitespace().map(|s| s.to_string()).collect();
                if labels.is_empty() {
                    return Err(ChainError::Definition { line, message: "empty states line".into() });
                }
                states = Some(labels);
            } else if let Some(rest) = content.strip_prefix("row:") {
                let mut row = Vec::new();
                for tok in rest.split_whitespace() {
                    row.push(parse_probability(tok).map_err(|message| ChainError::Definition {
                        line,
                        message,
                    })?);
                }
                rows.push(row);
            } else {
                return Err(ChainError::Definition {
                    line,
                    message: format!("expected `states:` or `row:`, got `{content}`"),
                });
            }
        }
        let states = states.ok_or(ChainError::Definition {
            line: 0,
            message: "missing states line".into(),
        })?;
        BaseChain::validate(Some(states), rows)
    }

    /// Writes the chain back out in the definition format. Values use the
    /// shortest decimal that round-trips, so parse(to_definition()) is exact.
    pub fn to_definition(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "states: {}", self.states.join(" "));
        for row in &self.transition {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "row: {}", cells.join(" "));
        }
        out
    }

    /// Eigendecomposition in the mu-weighted inner product. Reversibility
    /// makes `D^(1/2) A D^(-1/2)` symmetric, so a Jacobi sweep on that
    /// conjugate returns the exact spectrum of A together with a
    /// mu-orthonormal eigenbasis.
    pub fn eigendecompose(&self) -> Result<ChainSpectrum, ChainError> {
        let n = self.size();
        let sqrt_mu: Vec<f64> = self.stationary.iter().map(|m| m.sqrt()).collect();
        let mut sym = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                sym[i][j] = sqrt_mu[i] * self.transition[i][j] / sqrt_mu[j];
            }
        }
        // Symmetrize away float dust before the eigensolve.
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (sym[i][j] + sym[j][i]);
                sym[i][j] = v;
                sym[j][i] = v;
            }
        }
        let (values, columns) = linalg::jacobi_symmetric(sym, 100)
            .ok_or_else(|| ChainError::Numerical("Jacobi eigensolve did not converge".into()))?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let ka = (-values[a].abs(), -values[a]);
            let kb = (-values[b].abs(), -values[b]);
            ka.partial_cmp(&kb).unwrap()
        });

        let mut eigenvalues = Vec::with_capacity(n);
        let mut basis = Vec::with_capacity(n);
        for &idx in &order {
            eigenvalues.push(values[idx]);
            // Back-transform to an eigenfunction of A itself.
            let mut b: Vec<f64> = (0..n).map(|x| columns[idx][x] / sqrt_mu[x]).collect();
            // Deterministic sign: largest-magnitude entry (first on ties) is positive.
            let mut pivot = 0;
            for (i, v) in b.iter().enumerate() {
                if v.abs() > b[pivot].abs() + 1e-14 {
                    pivot = i;
                }
            }
            if b[pivot] < 0.0 {
                for v in &mut b {
                    *v = -*v;
                }
            }
            basis.push(b);
        }

        if (eigenvalues[0] - 1.0).abs() > 1e-9 {
            return Err(ChainError::Numerical(format!(
                "leading eigenvalue {} is not 1",
                eigenvalues[0]
            )));
        }
        // Pin the trivial eigenpair exactly; everything downstream keys on it.
        eigenvalues[0] = 1.0;
        basis[0] = vec![1.0; n];

        let lambda2 = eigenvalues[1].abs();
        if lambda2 >= 1.0 - 1e-9 {
            return Err(ChainError::Numerical(format!(
                "second eigenvalue modulus {lambda2} is not separated from 1"
            )));
        }

        Ok(ChainSpectrum { chain: self.clone(), eigenvalues, basis, lambda2 })
    }
}

fn parse_probability(tok: &str) -> Result<f64, String> {
    if let Some((num, den)) = tok.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| format!("bad fraction numerator `{num}`"))?;
        let d: i64 = den.trim().parse().map_err(|_| format!("bad fraction denominator `{den}`"))?;
        if d == 0 {
            return Err(format!("zero denominator in `{tok}`"));
        }
        Ok(n as f64 / d as f64)
    } else {
        tok.parse::<f64>().map_err(|_| format!("bad probability `{tok}`"))
    }
}

fn check_irreducible(transition: &[Vec<f64>]) -> Result<(), ChainError> {
    let n = transition.len();
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let connected =
                    if forward { transition[u][v] != 0.0 } else { transition[v][u] != 0.0 };
                if connected && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    if let Some(to) = fwd.iter().position(|&s| !s) {
        return Err(ChainError::Reducible { from: 0, to });
    }
    let bwd = reach(false);
    if let Some(from) = bwd.iter().position(|&s| !s) {
        return Err(ChainError::Reducible { from, to: 0 });
    }
    Ok(())
}

/// Period of a strongly connected digraph: gcd over all edges (u, v) of
/// `level(u) + 1 - level(v)` with BFS levels from state 0. Every closed walk
/// length telescopes to a sum of these terms, so the gcd is exactly the
/// chain's period.
fn check_aperiodic(transition: &[Vec<f64>]) -> Result<(), ChainError> {
    let n = transition.len();
    let mut level = vec![i64::MIN; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if transition[u][v] != 0.0 && level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: u64 = 0;
    for u in 0..n {
        for v in 0..n {
            if transition[u][v] != 0.0 {
                let diff = (level[u] + 1 - level[v]).unsigned_abs();
                g = gcd(g, diff);
            }
        }
    }
    if g != 1 {
        return Err(ChainError::Periodic { period: g });
    }
    Ok(())
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn solve_stationary(transition: &[Vec<f64>]) -> Result<Vec<f64>, ChainError> {
    let n = transition.len();
    // (A^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = transition[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        m[n - 1][j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut pi = linalg::solve(m, b)
        .ok_or_else(|| ChainError::Numerical("stationary system is singular".into()))?;
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }
    for (i, &p) in pi.iter().enumerate() {
        if !(p > 1e-14) {
            return Err(ChainError::Numerical(format!(
                "stationary measure has non-positive mass {p} at state {i}"
            )));
        }
    }
    // Independent cross-check: power iteration must land on the same vector.
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..20_000 {
        let mut next = vec![0.0; n];
        for (i, xi) in x.iter().enumerate() {
            for (j, nj) in next.iter_mut().enumerate() {
                *nj += xi * transition[i][j];
            }
        }
        let delta: f64 =
            next.iter().zip(x.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    let disagreement: f64 =
        x.iter().zip(pi.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if disagreement > 1e-8 {
        return Err(ChainError::Numerical(format!(
            "stationary solve and power iteration disagree by {disagreement:.3e}"
        )));
    }
    // Residual check of the direct solve.
    for j in 0..n {
        let back: f64 = (0..n).map(|i| pi[i] * transition[i][j]).sum();
        if (back - pi[j]).abs() > 1e-10 {
            return Err(ChainError::Numerical(format!(
                "stationarity residual {:.3e} at state {j}",
                (back - pi[j]).abs()
            )));
        }
    }
    Ok(pi)
}

/// Complete-graph chain on `q >= 3` states: uniform jumps to the other
/// `q - 1` states. Stationary measure is uniform.
pub fn complete_graph_chain(q: usize) -> BaseChain {
    assert!(q >= 3, "complete-graph chain needs at least 3 states to be aperiodic");
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|i| (0..q).map(|j| if i == j { 0.0 } else { 1.0 / (q - 1) as f64 }).collect())
        .collect();
    BaseChain::validate(None, rows).expect("complete-graph chain is valid")
}

/// Spectrum of a base chain: eigenvalues sorted by descending modulus (the
/// trivial eigenvalue 1 first) and a mu-orthonormal eigenbasis, `basis[s][x]`
/// being the s-th eigenfunction at state x. `basis[0]` is the constant 1.
#[derive(Debug, Clone)]
pub struct ChainSpectrum {
    chain: BaseChain,
    eigenvalues: Vec<f64>,
    basis: Vec<Vec<f64>>,
    lambda2: f64,
}

impl ChainSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Second-largest eigenvalue modulus.
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn matches(&self, chain: &BaseChain) -> bool {
        self.chain == *chain
    }

    pub fn chain(&self) -> &BaseChain {
        &self.chain
    }
}

/// The n-fold tensor power of a base chain. `n = 0` is the one-point space;
/// it shows up as the cell space of an empty coordinate set and behaves like
/// any other product space.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    base: Arc<BaseChain>,
    n: usize,
    size: usize,
}

impl ProductSpace {
    pub fn new(base: BaseChain, n: usize) -> Result<ProductSpace, ChainError> {
        Self::with_cap(base, n, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(base: BaseChain, n: usize, cap: usize) -> Result<ProductSpace, ChainError> {
        Self::from_arc(Arc::new(base), n, cap)
    }

    fn from_arc(base: Arc<BaseChain>, n: usize, cap: usize) -> Result<ProductSpace, ChainError> {
        let v = base.size() as u128;
        let mut needed: u128 = 1;
        for _ in 0..n {
            needed = needed.saturating_mul(v);
            if needed > cap as u128 {
                return Err(ChainError::PointCap { needed, cap });
            }
        }
        Ok(ProductSpace { base, n, size: needed as usize })
    }

    /// Same base chain, different number of coordinates. Used for cell
    /// spaces `V^I` and restricted spaces; shares the validated base.
    /// Panics if `m` exceeds the point cap, so only shrink with it.
    pub fn sibling(&self, m: usize) -> ProductSpace {
        self.grow(m).expect("sibling space is no larger than an existing space")
    }

    /// Fallible variant of `sibling` for spaces with more coordinates.
    pub fn grow(&self, m: usize) -> Result<ProductSpace, ChainError> {
        ProductSpace::from_arc(Arc::clone(&self.base), m, DEFAULT_POINT_CAP)
    }

    pub fn base(&self) -> &BaseChain {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> usize {
        self.base.size()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn same_space(&self, other: &ProductSpace) -> bool {
        self.n == other.n
            && (Arc::ptr_eq(&self.base, &other.base) || *self.base == *other.base)
    }

    /// Digits of a point, first coordinate most significant.
    pub fn decode(&self, idx: usize) -> Vec<u8> {
        debug_assert!(idx < self.size);
        let v = self.alphabet();
        let mut digits = vec![0u8; self.n];
        let mut rest = idx;
        for d in digits.iter_mut().rev() {
            *d = (rest % v) as u8;
            rest /= v;
        }
        digits
    }

    pub fn encode(&self, digits: &[u8]) -> usize {
        debug_assert_eq!(digits.len(), self.n);
        let v = self.alphabet();
        let mut idx = 0usize;
        for &d in digits {
            debug_assert!((d as usize) < v);
            idx = idx * v + d as usize;
        }
        idx
    }

    /// Product stationary measure of a point.
    pub fn point_measure(&self, idx: usize) -> f64 {
        let v = self.alphabet();
        let mu = self.base.stationary();
        let mut rest = idx;
        let mut m = 1.0;
        for _ in 0..self.n {
            m *= mu[rest % v];
            rest /= v;
        }
        m
    }

    /// Dense table of point measures in index order.
    pub fn measures(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.point_measure(i)).collect()
    }

    /// Expectation of a table under the product stationary measure.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.size);
        (0..self.size).map(|i| self.point_measure(i) * values[i]).sum()
    }

    /// Pattern adjacency in the product chain: every coordinate pair must be
    /// an edge of the base pattern. Loops included (x = y qualifies when all
    /// its digits carry base self-loops). Purely combinatorial.
    pub fn adjacent(&self, x: usize, y: usize) -> bool {
        let v = self.alphabet();
        let mut rx = x;
        let mut ry = y;
        for _ in 0..self.n {
            if !self.base.edge_pattern(rx % v, ry % v) {
                return false;
            }
            rx /= v;
            ry /= v;
        }
        true
    }

    /// Weight of the ordered pair (x, y): `mu(x) * A_tensor(x, y)`.
    pub fn edge_weight(&self, x: usize, y: usize) -> f64 {
        let v = self.alphabet();
        let mu = self.base.stationary();
        let a = self.base.transition();
        let mut rx = x;
        let mut ry = y;
        let mut w = 1.0;
        for _ in 0..self.n {
            w *= mu[rx % v] * a[rx % v][ry % v];
            rx /= v;
            ry /= v;
        }
        w
    }

    /// Minimum positive edge weight of the product: `w_min(base)^n`.
    pub fn min_edge_weight(&self) -> f64 {
        self.base.w_min().powi(self.n as i32)
    }

    /// Applies the product transition operator: sweeps the base matrix along
    /// each tensor axis in turn. Cost `n * |V|^(n+1)`; the tensor matrix is
    /// never built.
    pub fn apply_markov(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.size);
        let mut out = values.to_vec();
        for axis in 0..self.n {
            tensor_apply_axis(self.base.transition(), &mut out, self.n, axis);
        }
        out
    }

    /// The mu-weighted quadratic form `<f, A g> = sum_x mu(x) f(x) (Ag)(x)`.
    pub fn quad_form(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.size);
        let ag = self.apply_markov(g);
        (0..self.size).map(|i| self.point_measure(i) * f[i] * ag[i]).sum()
    }

    /// mu-weighted inner product of two tables.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.size);
        debug_assert_eq!(g.len(), self.size);
        (0..self.size).map(|i| self.point_measure(i) * f[i] * g[i]).sum()
    }
}

/// Applies `mat` (square, one row per output symbol) along one tensor axis of
/// `values`, in place. Shared by the transition operator, the noise operator,
/// and the basis transforms.
pub(crate) fn tensor_apply_axis(mat: &[Vec<f64>], values: &mut [f64], n: usize, axis: usize) {
    let v = mat.len();
    debug_assert!(axis < n);
    let stride = v.pow((n - 1 - axis) as u32);
    let block = stride * v;
    let mut fiber = vec![0.0; v];
    let mut base0 = 0;
    while base0 < values.len() {
        for inner in 0..stride {
            let base = base0 + inner;
            for (s, slot) in fiber.iter_mut().enumerate() {
                *slot = values[base + s * stride];
            }
            for (s, row) in mat.iter().enumerate() {
                let mut acc = 0.0;
                for (t, &m) in row.iter().enumerate() {
                    acc += m * fiber[t];
                }
                values[base + s * stride] = acc;
            }
        }
        base0 += block;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn k3() -> BaseChain {
        complete_graph_chain(3)
    }

    fn disjointness_third() -> BaseChain {
        // p = 1/3: [[1/2, 1/2], [1, 0]].
        BaseChain::validate(None, vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn k3_stationary_is_uniform() {
        let c = k3();
        for &m in c.stationary() {
            assert!((m - 1.0 / 3.0).abs() < 1e-14);
        }
        assert!((c.w_min() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn disjointness_stationary_solved_by_hand() {
        // pi = (2/3, 1/3) solves pi A = pi for [[1/2,1/2],[1,0]].
        let c = disjointness_third();
        assert!((c.stationary()[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((c.stationary()[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn identity_matrix_is_reducible() {
        let err = BaseChain::validate(None, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, ChainError::Reducible { .. }), "{err}");
    }

    #[test]
    fn two_cycle_is_periodic() {
        let err = BaseChain::validate(None, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, ChainError::Periodic { period: 2 }), "{err}");
    }

    #[test]
    fn pendant_triangle_walk_is_aperiodic() {
        // Random walk on the graph 0-1, 1-2, 2-3, 3-1. State 0 sits on no odd
        // cycle, but the triangle 1-2-3 makes the chain aperiodic; the level
        // gcd must see through that.
        let third = 1.0 / 3.0;
        let rows = vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![third, 0.0, third, third],
            vec![0.0, 0.5, 0.0, 0.5],
            vec![0.0, 0.5, 0.5, 0.0],
        ];
        let c = BaseChain::validate(None, rows).unwrap();
        // Degree-proportional stationary measure: (1, 3, 2, 2) / 8.
        let expect = [1.0 / 8.0, 3.0 / 8.0, 2.0 / 8.0, 2.0 / 8.0];
        for (m, e) in c.stationary().iter().zip(expect.iter()) {
            assert!((m - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_with_loops_fails_detailed_balance() {
        let rows = vec![
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
        ];
        let err = BaseChain::validate(None, rows).unwrap_err();
        assert!(matches!(err, ChainError::NotReversible { .. }), "{err}");
    }

    #[test]
    fn bad_rows_are_rejected() {
        let err = BaseChain::validate(None, vec![vec![0.4, 0.4], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, ChainError::NotRowStochastic { row: 0, .. }), "{err}");
        let err =
            BaseChain::validate(None, vec![vec![-0.5, 1.5], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, ChainError::NegativeEntry { .. }), "{err}");
        let err = BaseChain::validate(None, vec![vec![1.0]]).unwrap_err();
        assert!(matches!(err, ChainError::Shape { rows: 1 }), "{err}");
    }

    #[test]
    fn k3_spectrum_is_one_and_double_minus_half() {
        let s = k3().eigendecompose().unwrap();
        let e = s.eigenvalues();
        assert_eq!(e[0], 1.0);
        assert!((e[1] + 0.5).abs() < 1e-12, "{e:?}");
        assert!((e[2] + 0.5).abs() < 1e-12, "{e:?}");
        assert!((s.lambda2() - 0.5).abs() < 1e-12);
        assert_eq!(s.basis()[0], vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn disjointness_spectrum() {
        // Trace 1/2, determinant -1/2: eigenvalues 1 and -1/2.
        let s = disjointness_third().eigendecompose().unwrap();
        assert_eq!(s.eigenvalues()[0], 1.0);
        assert!((s.eigenvalues()[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn eigenbasis_is_mu_orthonormal_and_diagonalizes() {
        for chain in [k3(), disjointness_third(), lazy_walk()] {
            let s = chain.eigendecompose().unwrap();
            let n = chain.size();
            let mu = chain.stationary();
            for i in 0..n {
                for j in 0..n {
                    let ip: f64 =
                        (0..n).map(|x| mu[x] * s.basis()[i][x] * s.basis()[j][x]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - want).abs() < 1e-10, "<b{i}, b{j}> = {ip}");
                }
                for x in 0..n {
                    let ab: f64 = (0..n).map(|y| chain.transition()[x][y] * s.basis()[i][y]).sum();
                    assert!(
                        (ab - s.eigenvalues()[i] * s.basis()[i][x]).abs() < 1e-10,
                        "eigen relation fails for value {i} at state {x}"
                    );
                }
            }
        }
    }

    fn lazy_walk() -> BaseChain {
        // Random walk on a weighted triangle (w01 = 3, w02 = 1, w12 = 2):
        // reversible by construction with stationary measure (4, 5, 3)/12.
        let rows = vec![
            vec![0.0, 3.0 / 4.0, 1.0 / 4.0],
            vec![3.0 / 5.0, 0.0, 2.0 / 5.0],
            vec![1.0 / 3.0, 2.0 / 3.0, 0.0],
        ];
        BaseChain::validate(None, rows).unwrap()
    }

    #[test]
    fn mixed_radix_first_coordinate_most_significant() {
        let space = ProductSpace::new(k3(), 2).unwrap();
        assert_eq!(space.encode(&[1, 0]), 3);
        assert_eq!(space.encode(&[0, 1]), 1);
        assert_eq!(space.decode(5), vec![1, 2]);
        for idx in 0..space.size() {
            assert_eq!(space.encode(&space.decode(idx)), idx);
        }
    }

    #[test]
    fn product_edge_weight_example() {
        // K3 x K3: w((0,0) -> (1,1)) = (1/9) * (1/2)^2 = 1/36.
        let space = ProductSpace::new(k3(), 2).unwrap();
        let x = space.encode(&[0, 0]);
        let y = space.encode(&[1, 1]);
        assert!((space.edge_weight(x, y) - 1.0 / 36.0).abs() < 1e-15);
        assert!(!space.adjacent(x, space.encode(&[0, 1])));
        assert!(space.adjacent(x, y));
    }

    #[test]
    fn planted_quad_form_is_one_eighteenth() {
        let space = ProductSpace::new(k3(), 2).unwrap();
        let mut f = vec![0.0; space.size()];
        f[space.encode(&[0, 0])] = 1.0;
        f[space.encode(&[1, 1])] = 1.0;
        let q = space.quad_form(&f, &f);
        assert!((q - 1.0 / 18.0).abs() < 1e-15, "quad form {q}");
    }

    #[test]
    fn apply_markov_fixes_constants() {
        let space = ProductSpace::new(k3(), 3).unwrap();
        let ones = vec![1.0; space.size()];
        let out = space.apply_markov(&ones);
        for v in out {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn apply_markov_scales_eigenfunctions() {
        let chain = disjointness_third();
        let s = chain.eigendecompose().unwrap();
        let space = ProductSpace::new(chain, 3).unwrap();
        // Tensor eigenfunction with multi-index (1, 0, 1): eigenvalue (-1/2)^2.
        let b1 = &s.basis()[1];
        let vals: Vec<f64> = (0..space.size())
            .map(|i| {
                let d = space.decode(i);
                b1[d[0] as usize] * b1[d[2] as usize]
            })
            .collect();
        let out = space.apply_markov(&vals);
        for i in 0..space.size() {
            assert!((out[i] - 0.25 * vals[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn quad_form_matches_naive_double_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (chain, n) in [(k3(), 3usize), (disjointness_third(), 5)] {
            let space = ProductSpace::new(chain, n).unwrap();
            for _ in 0..5 {
                let f: Vec<f64> = (0..space.size()).map(|_| rng.gen::<f64>()).collect();
                let g: Vec<f64> = (0..space.size()).map(|_| rng.gen::<f64>()).collect();
                let fast = space.quad_form(&f, &g);
                let slow = oracle::quad_form_naive(&space, &f, &g);
                assert!((fast - slow).abs() < 1e-12, "fast {fast} vs naive {slow}");
            }
        }
    }

    #[test]
    fn quad_form_is_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let space = ProductSpace::new(k3(), 3).unwrap();
        let f: Vec<f64> = (0..space.size()).map(|_| rng.gen::<f64>()).collect();
        let g: Vec<f64> = (0..space.size()).map(|_| rng.gen::<f64>()).collect();
        assert!((space.quad_form(&f, &g) - space.quad_form(&g, &f)).abs() < 1e-12);
    }

    #[test]
    fn total_edge_mass_is_one() {
        for (chain, n) in [(k3(), 2usize), (disjointness_third(), 3)] {
            let space = ProductSpace::new(chain, n).unwrap();
            let mut total = 0.0;
            for x in 0..space.size() {
                for y in 0..space.size() {
                    total += space.edge_weight(x, y);
                }
            }
            assert!((total - 1.0).abs() < 1e-9, "total edge mass {total}");
        }
    }

    #[test]
    fn min_edge_weight_is_base_power() {
        let space = ProductSpace::new(k3(), 3).unwrap();
        let mut min_seen = f64::INFINITY;
        for x in 0..space.size() {
            for y in 0..space.size() {
                if space.adjacent(x, y) {
                    min_seen = min_seen.min(space.edge_weight(x, y));
                }
            }
        }
        assert!((min_seen - space.min_edge_weight()).abs() < 1e-12);
        assert!((space.min_edge_weight() - (1.0f64 / 6.0).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn point_cap_is_enforced() {
        let err = ProductSpace::with_cap(k3(), 4, 80).unwrap_err();
        assert!(matches!(err, ChainError::PointCap { .. }), "{err}");
    }

    #[test]
    fn zero_coordinate_space_is_one_point() {
        let space = ProductSpace::new(k3(), 0).unwrap();
        assert_eq!(space.size(), 1);
        assert_eq!(space.point_measure(0), 1.0);
        assert_eq!(space.apply_markov(&[2.5]), vec![2.5]);
        assert!(space.adjacent(0, 0));
        assert_eq!(space.edge_weight(0, 0), 1.0);
    }

    #[test]
    fn definition_round_trip() {
        let text = "# a comment\nstates: a b\nrow: 1/2 1/2\nrow: 1 0\n";
        let c = BaseChain::parse(text).unwrap();
        assert_eq!(c.states(), &["a".to_string(), "b".to_string()]);
        assert_eq!(c.transition()[0][1], 0.5);
        let back = BaseChain::parse(&c.to_definition()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn definition_errors_carry_line_numbers() {
        let err = BaseChain::parse("states: a b\nrow: 1/2 1/2\nrow: one 0\n").unwrap_err();
        match err {
            ChainError::Definition { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
        let err = BaseChain::parse("row: 1\n").unwrap_err();
        assert!(matches!(err, ChainError::Definition { .. }));
    }

    #[test]
    fn fractions_parse_exactly() {
        assert_eq!(parse_probability("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(parse_probability("0.25").unwrap(), 0.25);
        assert!(parse_probability("1/0").is_err());
    }
}
