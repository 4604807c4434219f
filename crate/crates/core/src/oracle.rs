//! Brute-force reference implementations.
//!
//! Everything in here recomputes a quantity from its definition with raw
//! index arithmetic: explicit double sums, explicit re-indexing, explicit
//! subset enumeration. Nothing calls the fast paths (tensor sweeps, basis
//! transforms, branch-and-bound), so a match between the two routes actually
//! means something. These functions are used by the test suites and by the
//! report checks in the command-line driver; they are deliberately slow.

use crate::chain::ProductSpace;

/// The quadratic form as a literal double sum over ordered point pairs:
/// `sum_{x,y} mu(x) prod_t A(x_t, y_t) f(x) g(y)`.
pub fn quad_form_naive(space: &ProductSpace, f: &[f64], g: &[f64]) -> f64 {
    let size = space.size();
    let n = space.n();
    let a = space.base().transition();
    let mu = space.base().stationary();
    let digits: Vec<Vec<u8>> = (0..size).map(|i| space.decode(i)).collect();
    let mut total = 0.0;
    for x in 0..size {
        let mut mu_x = 1.0;
        for &d in &digits[x] {
            mu_x *= mu[d as usize];
        }
        let mut row = 0.0;
        for y in 0..size {
            let mut w = 1.0;
            for t in 0..n {
                w *= a[digits[x][t] as usize][digits[y][t] as usize];
                if w == 0.0 {
                    break;
                }
            }
            if w != 0.0 {
                row += w * g[y];
            }
        }
        total += mu_x * f[x] * row;
    }
    total
}

/// Restriction by explicit digit surgery: plugs `cell_digits` into the
/// coordinates `coords` (sorted, 0-based) and reads off the remaining table.
pub fn restrict_naive(
    space: &ProductSpace,
    f: &[f64],
    coords: &[usize],
    cell_digits: &[u8],
) -> Vec<f64> {
    let v = space.alphabet();
    let n = space.n();
    assert_eq!(coords.len(), cell_digits.len());
    let rest: Vec<usize> = (0..n).filter(|i| !coords.contains(i)).collect();
    let rest_size = v.pow(rest.len() as u32);
    let mut out = vec![0.0; rest_size];
    for (slot, out_v) in out.iter_mut().enumerate() {
        // Decode the restricted index over the remaining coordinates.
        let mut digits = vec![0u8; n];
        let mut acc = slot;
        for &pos in rest.iter().rev() {
            digits[pos] = (acc % v) as u8;
            acc /= v;
        }
        for (t, &pos) in coords.iter().enumerate() {
            digits[pos] = cell_digits[t];
        }
        let mut idx = 0usize;
        for &d in &digits {
            idx = idx * v + d as usize;
        }
        *out_v = f[idx];
    }
    out
}

/// Conditional expectation onto the coordinates `coords`, one averaging loop
/// per point: `out[cell] = E[f(cell, .)]` over the complementary product
/// measure. Cells are mixed-radix over `coords`, first coordinate most
/// significant.
pub fn conditional_expectation_naive(space: &ProductSpace, f: &[f64], coords: &[usize]) -> Vec<f64> {
    let v = space.alphabet();
    let mu = space.base().stationary();
    let cells = v.pow(coords.len() as u32);
    let mut acc = vec![0.0; cells];
    for idx in 0..space.size() {
        let digits = space.decode(idx);
        let mut cell = 0usize;
        for &pos in coords {
            cell = cell * v + digits[pos] as usize;
        }
        let mut w_rest = 1.0;
        for (pos, &d) in digits.iter().enumerate() {
            if !coords.contains(&pos) {
                w_rest *= mu[d as usize];
            }
        }
        acc[cell] += w_rest * f[idx];
    }
    acc
}

/// Influence of coordinate `coord` in its variance form:
/// `E_{x_rest}[ Var_{x_coord} f ]`, accumulated pointwise.
pub fn influence_variance_form(space: &ProductSpace, f: &[f64], coord: usize) -> f64 {
    let v = space.alphabet();
    let n = space.n();
    let mu = space.base().stationary();
    let rest_size = space.size() / v;
    let mut mean = vec![0.0; rest_size];
    let mut second = vec![0.0; rest_size];
    let mut w_rest = vec![0.0; rest_size];
    for idx in 0..space.size() {
        let digits = space.decode(idx);
        let mut key = 0usize;
        let mut w = 1.0;
        for (pos, &d) in digits.iter().enumerate() {
            if pos != coord {
                key = key * v + d as usize;
                w *= mu[d as usize];
            }
        }
        let m_here = mu[digits[coord] as usize];
        mean[key] += m_here * f[idx];
        second[key] += m_here * f[idx] * f[idx];
        w_rest[key] = w;
    }
    let _ = n;
    let mut total = 0.0;
    for key in 0..rest_size {
        total += w_rest[key] * (second[key] - mean[key] * mean[key]);
    }
    total
}

/// phi(x) = x ln x with phi(0) = 0, tolerating measure-zero float dust.
fn phi_raw(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Entropy potential recomputed from the definition via the naive
/// conditional expectation.
pub fn entropy_direct(space: &ProductSpace, f: &[f64], coords: &[usize]) -> f64 {
    let v = space.alphabet();
    let mu = space.base().stationary();
    let cond = conditional_expectation_naive(space, f, coords);
    let mut h = 0.0;
    for (cell, &c) in cond.iter().enumerate() {
        let mut w = 1.0;
        let mut acc = cell;
        for _ in 0..coords.len() {
            w *= mu[acc % v];
            acc /= v;
        }
        h += w * phi_raw(c.clamp(0.0, 1.0));
    }
    h
}

/// Exhaustive maximum-weight independent set by backtracking over all
/// subsets. `edges` are unordered local pairs (loops allowed); vertices with
/// loops can never be chosen. Ties break to the lexicographically smallest
/// vertex set. Only for small instances (caps at 24 vertices).
pub fn mwis_bruteforce(
    num_vertices: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
) -> (Vec<usize>, f64) {
    assert!(num_vertices <= 24, "brute-force independent-set search is capped at 24 vertices");
    assert_eq!(weights.len(), num_vertices);
    let mut adj = vec![0u64; num_vertices];
    let mut looped = vec![false; num_vertices];
    for &(a, b) in edges {
        if a == b {
            looped[a] = true;
        } else {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
    }
    let mut best_set: Vec<usize> = Vec::new();
    let mut best_w = 0.0f64;
    // Depth-first over include/exclude decisions in vertex order.
    fn rec(
        pos: usize,
        chosen: u64,
        weight: f64,
        num: usize,
        adj: &[u64],
        looped: &[bool],
        weights: &[f64],
        best_set: &mut Vec<usize>,
        best_w: &mut f64,
    ) {
        if pos == num {
            let set: Vec<usize> = (0..num).filter(|&i| chosen >> i & 1 == 1).collect();
            if weight > *best_w || (weight == *best_w && set < *best_set) {
                *best_w = weight;
                *best_set = set;
            }
            return;
        }
        if !looped[pos] && adj[pos] & chosen == 0 {
            rec(pos + 1, chosen | 1 << pos, weight + weights[pos], num, adj, looped, weights, best_set, best_w);
        }
        rec(pos + 1, chosen, weight, num, adj, looped, weights, best_set, best_w);
    }
    rec(0, 0, 0.0, num_vertices, &adj, &looped, weights, &mut best_set, &mut best_w);
    (best_set, best_w)
}

/// Binomial coefficient as f64 (exact until it leaves the 2^53 window).
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Biased-cube edge mass by the full `4^n` double loop over ordered pairs of
/// point indices; disjointness and set sizes read off the digits.
pub fn edge_cube_pairs(n: usize, p: f64, g: &[f64]) -> f64 {
    let size = 1usize << n;
    assert_eq!(g.len(), size);
    let mut total = 0.0;
    for x in 0..size {
        if g[x] == 0.0 {
            continue;
        }
        for y in 0..size {
            // Point index has the first coordinate most significant; bit
            // (n-1-t) of the index is coordinate t. Intersection tests do
            // not care about bit order, sizes come from popcounts.
            if x & y != 0 {
                continue;
            }
            let sx = (x as u64).count_ones() as i32;
            let sy = (y as u64).count_ones() as i32;
            let w = p.powi(sx + sy) * (1.0 - 2.0 * p).powi(n as i32 - sx - sy);
            total += w * g[x] * g[y];
        }
    }
    total
}

/// Layer edge mass over ordered disjoint pairs of k-sets, enumerating both
/// sets recursively; reads values through a caller-supplied accessor keyed by
/// the sorted element list (0-based), so no ranking convention is shared with
/// the implementation under test.
pub fn edge_layer_pairs(n: usize, k: usize, value: &dyn Fn(&[usize]) -> f64) -> f64 {
    let mut first = Vec::new();
    enumerate_ksets(n, k, &mut Vec::new(), 0, &mut first);
    let denom = binomial_f64(n, k) * binomial_f64(n - k, k);
    let mut total = 0.0;
    for x in &first {
        let fx = value(x);
        if fx == 0.0 {
            continue;
        }
        let mut seconds = Vec::new();
        enumerate_disjoint_ksets(n, k, x, &mut Vec::new(), 0, &mut seconds);
        for y in &seconds {
            total += fx * value(y);
        }
    }
    total / denom
}

fn enumerate_ksets(n: usize, k: usize, cur: &mut Vec<usize>, from: usize, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for e in from..n {
        cur.push(e);
        enumerate_ksets(n, k, cur, e + 1, out);
        cur.pop();
    }
}

fn enumerate_disjoint_ksets(
    n: usize,
    k: usize,
    avoid: &[usize],
    cur: &mut Vec<usize>,
    from: usize,
    out: &mut Vec<Vec<usize>>,
) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for e in from..n {
        if avoid.contains(&e) {
            continue;
        }
        cur.push(e);
        enumerate_disjoint_ksets(n, k, avoid, cur, e + 1, out);
        cur.pop();
    }
}

/// Captured-loss recomputation for a layer function: averages f over the
/// k-sets whose trace on `coords` (sorted, 0-based elements) is not one of
/// the kept cells. A cell is the mixed-radix index over the coordinate list,
/// first listed coordinate most significant, digit 1 meaning "element in x".
pub fn layer_loss_direct(
    n: usize,
    k: usize,
    coords: &[usize],
    kept_cells: &[usize],
    value: &dyn Fn(&[usize]) -> f64,
) -> f64 {
    let mut sets = Vec::new();
    enumerate_ksets(n, k, &mut Vec::new(), 0, &mut sets);
    let mut lost = 0.0;
    for x in &sets {
        let mut cell = 0usize;
        for &c in coords {
            cell = cell * 2 + usize::from(x.contains(&c));
        }
        if !kept_cells.contains(&cell) {
            lost += value(x);
        }
    }
    lost / binomial_f64(n, k)
}

/// Down-transfer bracket by direct enumeration: with `J` the first `j_size`
/// elements and `x'` the next `k - w_size` elements, sums
/// `mu_p(w ∪ x) C(n,k) / C(|x| + w_size, k)` over cube points `x ⊇ x'` on
/// `[n] \ J`. The value depends only on the sizes.
pub fn down_bracket_direct(n: usize, k: usize, p: f64, j_size: usize, w_size: usize) -> f64 {
    assert!(w_size <= j_size && w_size <= k);
    let fixed = k - w_size;
    let m = n - j_size; // free cube positions
    assert!(fixed <= m);
    let extra = m - fixed; // positions that may or may not be added
    assert!(extra <= 30, "bracket enumeration is exponential in n - j_size");
    let mut total = 0.0;
    for mask in 0u64..(1 << extra) {
        let added = mask.count_ones() as usize;
        let set_size = w_size + fixed + added; // |w| + |x|
        let w = p.powi(set_size as i32) * (1.0 - p).powi((n - set_size) as i32);
        total += w * binomial_f64(n, k) / binomial_f64(fixed + added + w_size, k);
    }
    total
}
