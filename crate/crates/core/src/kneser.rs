//! Disjointness chains, layer functions, and intersecting-family capture.
//!
//! A k-subset layer of [n] sits inside the biased cube {0,1}^n, where the
//! two-state disjointness chain makes "adjacent" mean "disjoint": the
//! product edge weight of two masks is `p^|x| p^|y| (1-2p)^(n-|x|-|y|)` when
//! they are disjoint and 0 otherwise. Lifting a layer function by averaging
//! over k-subsets turns layer edge mass into cube edge mass (up to the
//! constant `c(p,n) <= 1`), the cube capture machinery then produces an
//! independent cell set, and independence under disjointness is exactly the
//! intersecting-family property, which transfers back down to the layer.
//!
//! Point indices order coordinate 0 most significant while element masks
//! put element t at bit t, so the two encodings are bit reversals of each
//! other. Set sizes and intersections are oblivious to bit order; only the
//! index conversions care.

use thiserror::Error;

use crate::chain::{BaseChain, ChainError, ProductSpace};
use crate::functions::{FunctionError, PointFunction};
use crate::independent::IndependentError;
use crate::junta::{independent_junta_capture, CaptureParams, IndependentCapture, JuntaError};
use crate::oracle::binomial_f64;

const LAYER_TABLE_CAP: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum KneserError {
    #[error("rate {p} outside the open interval (0, 1/2)")]
    BadRate { p: f64 },
    #[error("p n = {product} is not an integer (n = {n}, p = {p})")]
    NonIntegerRate { n: usize, p: f64, product: f64 },
    #[error("layer needs 0 < k < n/2, got n = {n}, k = {k}")]
    BadLayer { n: usize, k: usize },
    #[error("layer table for n = {n}, k = {k} needs {want} entries, cap is {cap}")]
    TableTooLarge { n: usize, k: usize, want: u128, cap: u128 },
    #[error("table has {got} values, C({n},{k}) = {want}")]
    WrongLength { n: usize, k: usize, got: usize, want: usize },
    #[error("value {value} at rank {rank} leaves [0, 1]")]
    ValueRange { rank: usize, value: f64 },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("function lives on {got} points, the n = {n} cube has {want}")]
    NotCube { n: usize, got: usize, want: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Junta(#[from] JuntaError),
    #[error(transparent)]
    Independent(#[from] IndependentError),
}

/// The two-state chain whose product walk jumps from a set to a disjoint
/// set: state 1 is "element present" and the transition matrix is
/// [[(1-2p)/(1-p), p/(1-p)], [1, 0]]. Stationary measure (1-p, p).
pub fn disjointness_chain(p: f64) -> Result<BaseChain, KneserError> {
    if !(0.0 < p && p < 0.5) {
        return Err(KneserError::BadRate { p });
    }
    let chain = BaseChain::validate(
        Some(vec!["out".into(), "in".into()]),
        vec![vec![(1.0 - 2.0 * p) / (1.0 - p), p / (1.0 - p)], vec![1.0, 0.0]],
    )?;
    Ok(chain)
}

/// Layer parameters with `k = p n` held exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KneserParams {
    n: usize,
    k: usize,
}

impl KneserParams {
    pub fn new(n: usize, k: usize) -> Result<KneserParams, KneserError> {
        if k == 0 || 2 * k >= n {
            return Err(KneserError::BadLayer { n, k });
        }
        Ok(KneserParams { n, k })
    }

    /// Recovers `k` from a rate, snapping float dust like `9 * (1/3)`;
    /// a product genuinely off an integer is refused, not rounded.
    pub fn from_rate(n: usize, p: f64) -> Result<KneserParams, KneserError> {
        if !(0.0 < p && p < 0.5) {
            return Err(KneserError::BadRate { p });
        }
        let product = p * n as f64;
        let k = product.round();
        if (product - k).abs() > 1e-9 {
            return Err(KneserError::NonIntegerRate { n, p, product });
        }
        KneserParams::new(n, k as usize)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn layer_size(&self) -> usize {
        binomial_u128(self.n, self.k) as usize
    }

    /// The disjointness product space on `{0,1}^n`.
    pub fn space(&self) -> Result<ProductSpace, KneserError> {
        Ok(ProductSpace::new(disjointness_chain(self.p())?, self.n)?)
    }
}

pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Point index of an element mask: coordinate t of the cube is element t,
/// and indices put coordinate 0 most significant.
pub fn mask_to_index(n: usize, mask: u64) -> usize {
    debug_assert!(n <= 63 && mask < (1 << n));
    (mask.reverse_bits() >> (64 - n)) as usize
}

pub fn index_to_mask(n: usize, index: usize) -> u64 {
    debug_assert!(n <= 63 && index < (1 << n));
    (index as u64).reverse_bits() >> (64 - n)
}

/// Trace cell of a mask on the listed elements: first element most
/// significant, digit 1 meaning "present".
pub fn cell_of_mask(mask: u64, elements: &[usize]) -> usize {
    let mut cell = 0usize;
    for &e in elements {
        cell = cell * 2 + ((mask >> e) & 1) as usize;
    }
    cell
}

/// Rank of a k-set mask in the combinatorial number system, which lists the
/// layer in increasing mask order.
pub fn rank_of_mask(mask: u64) -> usize {
    let mut rank: u128 = 0;
    let mut seen = 0usize;
    let mut rest = mask;
    while rest != 0 {
        let e = rest.trailing_zeros() as usize;
        seen += 1;
        rank += binomial_u128(e, seen);
        rest &= rest - 1;
    }
    rank as usize
}

pub fn mask_of_rank(n: usize, k: usize, rank: usize) -> u64 {
    let mut rest = rank as u128;
    let mut mask = 0u64;
    for slot in (1..=k).rev() {
        // Largest element whose simplex count fits in what is left.
        let mut e = slot - 1;
        while e + 1 < n && binomial_u128(e + 1, slot) <= rest {
            e += 1;
        }
        rest -= binomial_u128(e, slot);
        mask |= 1 << e;
    }
    mask
}

/// Iterates the k-set masks of [n] in increasing order (Gosper's hack),
/// which is exactly combinatorial-rank order.
pub struct LayerMasks {
    next: Option<u64>,
    limit: u64,
}

pub fn layer_masks(n: usize, k: usize) -> LayerMasks {
    assert!(0 < k && k <= n && n <= 63);
    LayerMasks { next: Some((1u64 << k) - 1), limit: 1u64 << n }
}

impl Iterator for LayerMasks {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        let low = cur & cur.wrapping_neg();
        let carry = cur + low;
        let candidate = carry | (((cur ^ carry) / low) >> 2);
        self.next = (candidate < self.limit && carry < self.limit).then_some(candidate);
        Some(cur)
    }
}

fn for_each_ksubmask(bits: &[u32], k: usize, f: &mut impl FnMut(u64)) {
    fn rec(bits: &[u32], k: usize, from: usize, acc: u64, f: &mut impl FnMut(u64)) {
        if k == 0 {
            f(acc);
            return;
        }
        for i in from..=bits.len() - k {
            rec(bits, k - 1, i + 1, acc | (1u64 << bits[i]), f);
        }
    }
    if k <= bits.len() {
        rec(bits, k, 0, 0, f);
    }
}

/// A [0,1]-valued table over the k-subsets of [n], in combinatorial-rank
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFunction {
    params: KneserParams,
    values: Vec<f64>,
}

impl LayerFunction {
    pub fn new(params: KneserParams, values: Vec<f64>) -> Result<LayerFunction, KneserError> {
        let want = binomial_u128(params.n, params.k);
        if want > LAYER_TABLE_CAP {
            return Err(KneserError::TableTooLarge {
                n: params.n,
                k: params.k,
                want,
                cap: LAYER_TABLE_CAP,
            });
        }
        if values.len() != want as usize {
            return Err(KneserError::WrongLength {
                n: params.n,
                k: params.k,
                got: values.len(),
                want: want as usize,
            });
        }
        if let Some((rank, &value)) =
            values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(KneserError::ValueRange { rank, value });
        }
        Ok(LayerFunction { params, values })
    }

    pub fn from_fn(params: KneserParams, f: impl Fn(u64) -> f64) -> Result<LayerFunction, KneserError> {
        let values: Vec<f64> = layer_masks(params.n, params.k).map(f).collect();
        LayerFunction::new(params, values)
    }

    /// Indicator of all k-sets containing the element.
    pub fn star(params: KneserParams, element: usize) -> Result<LayerFunction, KneserError> {
        assert!(element < params.n);
        LayerFunction::from_fn(params, |mask| f64::from(mask >> element & 1 == 1))
    }

    pub fn params(&self) -> KneserParams {
        self.params
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at_rank(&self, rank: usize) -> f64 {
        self.values[rank]
    }

    pub fn value_of_mask(&self, mask: u64) -> f64 {
        self.values[rank_of_mask(mask)]
    }

    pub fn expectation(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Parses `n:`/`k:` headers followed by one value per line, rank order.
    pub fn parse(text: &str) -> Result<LayerFunction, KneserError> {
        let mut n: Option<usize> = None;
        let mut k: Option<usize> = None;
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fail = |message: String| KneserError::Format { line, message };
            if let Some(rest) = content.strip_prefix("n:") {
                n = Some(rest.trim().parse().map_err(|_| fail(format!("bad n `{rest}`")))?);
            } else if let Some(rest) = content.strip_prefix("k:") {
                k = Some(rest.trim().parse().map_err(|_| fail(format!("bad k `{rest}`")))?);
            } else {
                let value: f64 =
                    content.parse().map_err(|_| fail(format!("bad value `{content}`")))?;
                values.push(value);
            }
        }
        let n = n.ok_or(KneserError::Format { line: 0, message: "missing n: header".into() })?;
        let k = k.ok_or(KneserError::Format { line: 0, message: "missing k: header".into() })?;
        LayerFunction::new(KneserParams::new(n, k)?, values)
    }

    pub fn render(&self) -> String {
        let mut out = format!("n: {}\nk: {}\n", self.params.n, self.params.k);
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        out
    }
}

/// `p^|x| p^|y| (1-2p)^(n-|x|-|y|)` for disjoint masks, 0 otherwise. Equals
/// the disjointness product chain's edge weight.
pub fn mu_pp(n: usize, p: f64, x: u64, y: u64) -> f64 {
    if x & y != 0 {
        return 0.0;
    }
    let sx = x.count_ones() as i32;
    let sy = y.count_ones() as i32;
    p.powi(sx + sy) * (1.0 - 2.0 * p).powi(n as i32 - sx - sy)
}

/// The p-biased product measure of a single mask.
pub fn mu_p(n: usize, p: f64, x: u64) -> f64 {
    let s = x.count_ones() as i32;
    p.powi(s) * (1.0 - p).powi(n as i32 - s)
}

/// Ordered-pair cube edge mass `sum over disjoint (x,y) of
/// mu_pp(x,y) g(x) g(y)`, by the 3^n walk over a mask and the submasks of
/// its complement. Matches the product-chain quadratic form.
pub fn edge_cube(g: &PointFunction, p: f64) -> Result<f64, KneserError> {
    let n = g.space().n();
    let size = g.space().size();
    if g.space().alphabet() != 2 || size != 1 << n {
        return Err(KneserError::NotCube { n, got: size, want: 1 << n });
    }
    let values = g.values();
    let full = (1u64 << n) - 1;
    let mut total = 0.0;
    for x_idx in 0..size {
        let gx = values[x_idx];
        if gx == 0.0 {
            continue;
        }
        let x = index_to_mask(n, x_idx);
        let comp = full & !x;
        let mut y = comp;
        loop {
            let gy = values[mask_to_index(n, y)];
            if gy != 0.0 {
                total += mu_pp(n, p, x, y) * gx * gy;
            }
            if y == 0 {
                break;
            }
            y = (y - 1) & comp;
        }
    }
    Ok(total)
}

/// Ordered-pair layer edge mass, normalized by `C(n,k) C(n-k,k)` so the
/// all-ones function scores exactly 1.
pub fn edge_layer(f: &LayerFunction) -> f64 {
    let (n, k) = (f.params.n, f.params.k);
    let mut total = 0.0;
    for x in layer_masks(n, k) {
        let fx = f.value_of_mask(x);
        if fx == 0.0 {
            continue;
        }
        let comp_bits: Vec<u32> = (0..n as u32).filter(|&b| x >> b & 1 == 0).collect();
        for_each_ksubmask(&comp_bits, k, &mut |y| {
            total += fx * f.value_of_mask(y);
        });
    }
    total / (binomial_f64(n, k) * binomial_f64(n - k, k))
}

/// The averaging lift: `g(x) = C(|x|,k)^(-1) sum over k-subsets x' of x of
/// f(x')` for `|x| >= k`, else 0. Values stay in [0,1].
pub fn up_lift(f: &LayerFunction) -> Result<PointFunction, KneserError> {
    let (n, k) = (f.params.n, f.params.k);
    let space = f.params.space()?;
    let mut values = vec![0.0; space.size()];
    for (idx, slot) in values.iter_mut().enumerate() {
        let mask = index_to_mask(n, idx);
        let m = mask.count_ones() as usize;
        if m < k {
            continue;
        }
        let bits: Vec<u32> = (0..n as u32).filter(|&b| mask >> b & 1 == 1).collect();
        let mut sum = 0.0;
        for_each_ksubmask(&bits, k, &mut |sub| sum += f.value_of_mask(sub));
        *slot = sum / binomial_f64(m, k);
    }
    Ok(PointFunction::unit(space, values)?)
}

/// `c(p,n)`: the cube edge mass of the lift of the all-ones layer function,
/// which is the indicator of `{|x| >= k}`. Always in (0, 1].
pub fn c_constant(params: &KneserParams) -> Result<f64, KneserError> {
    let ones = LayerFunction::new(*params, vec![1.0; params.layer_size()])?;
    edge_cube(&up_lift(&ones)?, params.p())
}

/// Size-grouped closed form for `c(p,n)`: disjoint size pairs (a, b) with
/// both at least k contribute `C(n,a) C(n-a,b) p^(a+b) (1-2p)^(n-a-b)`.
pub fn c_constant_by_sizes(params: &KneserParams) -> f64 {
    let (n, k, p) = (params.n, params.k, params.p());
    let mut total = 0.0;
    for a in k..=n {
        for b in k..=(n - a) {
            total += binomial_f64(n, a)
                * binomial_f64(n - a, b)
                * p.powi((a + b) as i32)
                * (1.0 - 2.0 * p).powi((n - a - b) as i32);
        }
    }
    total
}

/// Layer and cube masses of one trace cell, with the proof's inner sum.
#[derive(Debug, Clone, Copy)]
pub struct DownRatio {
    pub w_cell: usize,
    pub w_size: usize,
    /// `sum over S in the layer with trace w of f(S) / C(n,k)`.
    pub v_w_f: f64,
    /// `sum over masks z with trace w of mu_p(z) g(z)`.
    pub v_w_g: f64,
    /// `v_w_f / v_w_g`, 0 when the cell carries no layer mass.
    pub ratio: f64,
    /// Closed-form lower bound on `v_w_g / v_w_f`; the transfer constant 5
    /// is justified exactly when this clears 1/5.
    pub inner_sum: f64,
    pub clears_fifth: bool,
}

/// The inner sum of the down transfer: with `j = |J|`, `w = |w|`, and
/// `extra = n - k - (j - w)` free positions,
/// `sum over i of p^(k+i) (1-p)^(n-k-i) C(n,k+i) falling(extra,i)/falling(n-k,i)`.
pub fn down_inner_sum(n: usize, k: usize, p: f64, j_size: usize, w_size: usize) -> f64 {
    assert!(w_size <= j_size && w_size <= k && j_size <= n);
    assert!(k - w_size <= n - j_size, "the layer must reach the cell");
    let extra = n - k - (j_size - w_size);
    let mut total = 0.0;
    for i in 0..=extra {
        total += p.powi((k + i) as i32)
            * (1.0 - p).powi((n - k - i) as i32)
            * binomial_f64(n, k + i)
            * falling(extra as f64, i)
            / falling((n - k) as f64, i);
    }
    total
}

fn falling(a: f64, i: usize) -> f64 {
    (0..i).map(|t| a - t as f64).product()
}

/// Both sides of the down transfer for every trace cell of the listed
/// elements, in one sweep over the layer and one over the cube.
pub fn down_profile(
    f: &LayerFunction,
    g: &PointFunction,
    elements: &[usize],
) -> Result<Vec<DownRatio>, KneserError> {
    let (n, k, p) = (f.params.n, f.params.k, f.params.p());
    let want = 1usize << n;
    if g.space().alphabet() != 2 || g.space().size() != want {
        return Err(KneserError::NotCube { n, got: g.space().size(), want });
    }
    let j = elements.len();
    let cells = 1usize << j;
    let mut v_f = vec![0.0; cells];
    let mut v_g = vec![0.0; cells];
    for mask in layer_masks(n, k) {
        v_f[cell_of_mask(mask, elements)] += f.value_of_mask(mask);
    }
    let layer = binomial_f64(n, k);
    for slot in v_f.iter_mut() {
        *slot /= layer;
    }
    for idx in 0..g.space().size() {
        let mask = index_to_mask(n, idx);
        v_g[cell_of_mask(mask, elements)] += mu_p(n, p, mask) * g.values()[idx];
    }
    let mut out = Vec::with_capacity(cells);
    for cell in 0..cells {
        let w_size = cell.count_ones() as usize;
        if w_size > k || k - w_size > n - j {
            // The layer cannot trace to this cell; both masses vanish.
            out.push(DownRatio {
                w_cell: cell,
                w_size,
                v_w_f: v_f[cell],
                v_w_g: v_g[cell],
                ratio: 0.0,
                inner_sum: 0.0,
                clears_fifth: false,
            });
            continue;
        }
        let inner_sum = down_inner_sum(n, k, p, j, w_size);
        let ratio = if v_f[cell] == 0.0 { 0.0 } else { v_f[cell] / v_g[cell] };
        out.push(DownRatio {
            w_cell: cell,
            w_size,
            v_w_f: v_f[cell],
            v_w_g: v_g[cell],
            ratio,
            inner_sum,
            clears_fifth: inner_sum > 0.2,
        });
    }
    Ok(out)
}

pub fn down_ratio(
    f: &LayerFunction,
    g: &PointFunction,
    elements: &[usize],
    w_cell: usize,
) -> Result<DownRatio, KneserError> {
    Ok(down_profile(f, g, elements)?[w_cell])
}

/// True iff no two members of `t_cells` (a member with itself included)
/// have disjoint traces. Equivalent to independence in the disjointness
/// product on `{0,1}^j`; intersection tests ignore bit order, so cell
/// indices can be tested directly.
pub fn is_intersecting(j_size: usize, t_cells: &[usize]) -> bool {
    debug_assert!(t_cells.iter().all(|&t| t < 1usize << j_size));
    for (i, &a) in t_cells.iter().enumerate() {
        for &b in &t_cells[i..] {
            if a & b == 0 {
                return false;
            }
        }
    }
    true
}

/// The end-to-end pipeline: lift the layer function, capture an
/// independent junta cell set on the cube, and read the kept cells back as
/// an intersecting family, with the lost layer mass recomputed from the raw
/// table.
#[derive(Debug, Clone)]
pub struct KneserCapture {
    pub params: KneserParams,
    /// Captured elements of [n], ascending.
    pub j_elements: Vec<usize>,
    /// Kept trace cells over the captured elements, sorted.
    pub t_cells: Vec<usize>,
    /// `C(n,k)^(-1) sum over S with trace outside T of f(S)`.
    pub layer_loss: f64,
    pub kept_layer_mass: f64,
    /// Layer edge mass of the input, reported untouched.
    pub edge_layer: f64,
    pub cube: IndependentCapture,
}

pub fn kneser_capture(
    f: &LayerFunction,
    eps: f64,
    capture: &CaptureParams,
) -> Result<KneserCapture, KneserError> {
    let g = up_lift(f)?;
    let cube = independent_junta_capture(&g, eps, capture)?;
    let j_elements: Vec<usize> = cube.j_set.as_slice().to_vec();
    let t_cells = cube.t_cells.clone();
    assert!(
        is_intersecting(j_elements.len(), &t_cells),
        "independent cells {t_cells:?} fail the intersection check"
    );
    let (n, k) = (f.params.n, f.params.k);
    let mut lost = 0.0;
    let mut kept = 0.0;
    for mask in layer_masks(n, k) {
        let cell = cell_of_mask(mask, &j_elements);
        if t_cells.binary_search(&cell).is_ok() {
            kept += f.value_of_mask(mask);
        } else {
            lost += f.value_of_mask(mask);
        }
    }
    let layer = binomial_f64(n, k);
    Ok(KneserCapture {
        params: f.params,
        j_elements,
        t_cells,
        layer_loss: lost / layer,
        kept_layer_mass: kept / layer,
        edge_layer: edge_layer(f),
        cube,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::independent;
    use crate::oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_layer(params: KneserParams, rng: &mut ChaCha8Rng) -> LayerFunction {
        let values: Vec<f64> = (0..params.layer_size()).map(|_| rng.gen()).collect();
        LayerFunction::new(params, values).unwrap()
    }

    #[test]
    fn params_snap_and_validate() {
        let p = KneserParams::from_rate(9, 1.0 / 3.0).unwrap();
        assert_eq!((p.n(), p.k()), (9, 3));
        assert_eq!(KneserParams::from_rate(12, 0.25).unwrap().k(), 3);
        assert!(matches!(
            KneserParams::from_rate(10, 0.26),
            Err(KneserError::NonIntegerRate { .. })
        ));
        assert!(matches!(KneserParams::new(4, 2), Err(KneserError::BadLayer { .. })));
        assert!(matches!(KneserParams::new(9, 0), Err(KneserError::BadLayer { .. })));
        assert!((KneserParams::new(9, 3).unwrap().p() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn disjointness_chain_frozen_values() {
        let chain = disjointness_chain(1.0 / 3.0).unwrap();
        // (1-2p)/(1-p) carries one ulp of dust at p = 1/3.
        assert!((chain.transition()[0][0] - 0.5).abs() < 1e-15);
        assert!((chain.transition()[0][1] - 0.5).abs() < 1e-15);
        assert_eq!(chain.transition()[1], vec![1.0, 0.0]);
        assert!((chain.stationary()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((chain.stationary()[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(disjointness_chain(0.5), Err(KneserError::BadRate { .. })));
        assert!(matches!(disjointness_chain(0.0), Err(KneserError::BadRate { .. })));
    }

    #[test]
    fn mask_index_conversions() {
        for index in 0..32 {
            assert_eq!(mask_to_index(5, index_to_mask(5, index)), index);
        }
        // Element 0 is the most significant digit of the point index.
        assert_eq!(mask_to_index(5, 0b00001), 16);
        assert_eq!(mask_to_index(5, 0b10000), 1);
        assert_eq!(cell_of_mask(0b00101, &[0, 2, 4]), 0b110);
        assert_eq!(cell_of_mask(0b00101, &[1, 3]), 0);
    }

    #[test]
    fn ranking_is_gosper_order() {
        let masks: Vec<u64> = layer_masks(6, 3).collect();
        assert_eq!(masks.len(), 20);
        for (t, &mask) in masks.iter().enumerate() {
            assert_eq!(rank_of_mask(mask), t);
            assert_eq!(mask_of_rank(6, 3, t), mask);
        }
        assert_eq!(masks[0], 0b000111);
        assert_eq!(masks[19], 0b111000);
        assert!(masks.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mu_pp_frozen_values() {
        // Elements {0} and {1,2} at n = 3, p = 1/4.
        assert!((mu_pp(3, 0.25, 0b001, 0b110) - 1.0 / 64.0).abs() < 1e-18);
        assert_eq!(mu_pp(3, 0.25, 0b011, 0b110), 0.0);
        let p = 0.3f64;
        assert!((mu_pp(4, p, 0, 0) - (1.0 - 2.0 * p).powi(4)).abs() < 1e-15);
    }

    #[test]
    fn mu_pp_matches_product_edge_weights() {
        for p in [0.25, 1.0 / 3.0] {
            let n = 6;
            let space = ProductSpace::new(disjointness_chain(p).unwrap(), n).unwrap();
            for x_idx in 0..space.size() {
                for y_idx in 0..space.size() {
                    let direct =
                        mu_pp(n, p, index_to_mask(n, x_idx), index_to_mask(n, y_idx));
                    let weight = space.edge_weight(x_idx, y_idx);
                    assert!(
                        (direct - weight).abs() < 1e-12,
                        "p {p} pair ({x_idx},{y_idx}): {direct} vs {weight}"
                    );
                }
            }
        }
    }

    #[test]
    fn mu_p_matches_point_measure() {
        let params = KneserParams::new(6, 2).unwrap();
        let space = params.space().unwrap();
        for idx in 0..space.size() {
            let direct = mu_p(6, params.p(), index_to_mask(6, idx));
            assert!((direct - space.point_measure(idx)).abs() < 1e-14);
        }
    }

    #[test]
    fn layer_function_table_contract() {
        let params = KneserParams::new(6, 2).unwrap();
        assert!(matches!(
            LayerFunction::new(params, vec![0.0; 14]),
            Err(KneserError::WrongLength { want: 15, .. })
        ));
        assert!(matches!(
            LayerFunction::new(params, vec![2.0; 15]),
            Err(KneserError::ValueRange { rank: 0, .. })
        ));
        let star = LayerFunction::star(params, 1).unwrap();
        assert_eq!(star.value_of_mask(0b000011), 1.0);
        assert_eq!(star.value_of_mask(0b000101), 0.0);
        assert!((star.expectation() - 5.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn layer_file_round_trip() {
        let params = KneserParams::new(6, 2).unwrap();
        let star = LayerFunction::star(params, 0).unwrap();
        let parsed = LayerFunction::parse(&star.render()).unwrap();
        assert_eq!(parsed, star);

        let text = "# family\nn: 6\nk: 2\n0.5\n";
        assert!(matches!(
            LayerFunction::parse(text),
            Err(KneserError::WrongLength { got: 1, .. })
        ));
        let err = LayerFunction::parse("n: 6\nk: 2\nnope\n").unwrap_err();
        match err {
            KneserError::Format { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            LayerFunction::parse("k: 2\n"),
            Err(KneserError::Format { line: 0, .. })
        ));
    }

    #[test]
    fn edge_cube_anchors() {
        let params = KneserParams::new(6, 2).unwrap();
        let space = params.space().unwrap();
        let ones = PointFunction::constant(space.clone(), 1.0);
        assert!((edge_cube(&ones, params.p()).unwrap() - 1.0).abs() < 1e-12);
        // All sets containing element 0 pairwise intersect.
        let star_values: Vec<f64> =
            (0..space.size()).map(|i| f64::from(index_to_mask(6, i) & 1 == 1)).collect();
        let star = PointFunction::unit(space, star_values).unwrap();
        assert_eq!(edge_cube(&star, params.p()).unwrap(), 0.0);
    }

    #[test]
    fn edge_cube_agrees_with_both_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let params = KneserParams::new(6, 2).unwrap();
        let space = params.space().unwrap();
        for _ in 0..5 {
            let values: Vec<f64> = (0..space.size()).map(|_| rng.gen()).collect();
            let g = PointFunction::unit(space.clone(), values.clone()).unwrap();
            let ours = edge_cube(&g, params.p()).unwrap();
            let pairs = oracle::edge_cube_pairs(6, params.p(), &values);
            let quad = g.quad_form(&g).unwrap();
            assert!((ours - pairs).abs() < 1e-12, "{ours} vs pair oracle {pairs}");
            assert!((ours - quad).abs() < 1e-12, "{ours} vs quad form {quad}");
        }
    }

    #[test]
    fn edge_layer_anchors() {
        let params = KneserParams::new(8, 2).unwrap();
        let ones = LayerFunction::new(params, vec![1.0; params.layer_size()]).unwrap();
        assert_eq!(edge_layer(&ones), 1.0);
        let star = LayerFunction::star(params, 1).unwrap();
        assert_eq!(edge_layer(&star), 0.0);
    }

    #[test]
    fn edge_layer_agrees_with_the_pair_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let params = KneserParams::new(8, 2).unwrap();
        for _ in 0..5 {
            let f = random_layer(params, &mut rng);
            let ours = edge_layer(&f);
            let oracle_value = oracle::edge_layer_pairs(8, 2, &|set: &[usize]| {
                let mask = set.iter().fold(0u64, |m, &e| m | 1 << e);
                f.value_of_mask(mask)
            });
            assert!((ours - oracle_value).abs() < 1e-12, "{ours} vs {oracle_value}");
        }
    }

    #[test]
    fn lift_of_ones_is_the_size_threshold() {
        let params = KneserParams::new(6, 2).unwrap();
        let ones = LayerFunction::new(params, vec![1.0; params.layer_size()]).unwrap();
        let g = up_lift(&ones).unwrap();
        for idx in 0..g.space().size() {
            let size = index_to_mask(6, idx).count_ones() as usize;
            assert_eq!(g.values()[idx], f64::from(size >= 2), "index {idx}");
        }
    }

    #[test]
    fn lift_of_a_star_counts_containing_subsets() {
        let params = KneserParams::new(6, 2).unwrap();
        let star = LayerFunction::star(params, 1).unwrap();
        let g = up_lift(&star).unwrap();
        for idx in 0..g.space().size() {
            let mask = index_to_mask(6, idx);
            let m = mask.count_ones() as usize;
            let want = if m < 2 {
                0.0
            } else if mask >> 1 & 1 == 1 {
                // k-subsets containing the element: C(m-1, k-1) of C(m, k).
                2.0 / m as f64
            } else {
                0.0
            };
            assert!((g.values()[idx] - want).abs() < 1e-15, "mask {mask:b}");
        }
    }

    #[test]
    fn up_transfer_identity_and_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for (n, k) in [(8, 2), (9, 3)] {
            let params = KneserParams::new(n, k).unwrap();
            let c = c_constant(&params).unwrap();
            assert!(0.0 < c && c <= 1.0);
            for _ in 0..4 {
                let f = random_layer(params, &mut rng);
                let layer = edge_layer(&f);
                let cube = edge_cube(&up_lift(&f).unwrap(), params.p()).unwrap();
                assert!(
                    (cube - c * layer).abs() < 1e-12,
                    "(n,k) = ({n},{k}): cube {cube} vs c*layer {}",
                    c * layer
                );
                assert!(cube <= layer + 1e-12);
            }
        }
    }

    #[test]
    fn c_constant_frozen_value() {
        // k = 1, n = 4, p = 1/4: both endpoints nonempty, so
        // 1 - 2 (1-p)^4 + (1-2p)^4.
        let params = KneserParams::from_rate(4, 0.25).unwrap();
        assert_eq!(params.k(), 1);
        let c = c_constant(&params).unwrap();
        assert!((c - 0.4296875).abs() < 1e-12, "{c}");
        let closed = 1.0 - 2.0 * 0.75f64.powi(4) + 0.5f64.powi(4);
        assert!((c - closed).abs() < 1e-12);
        assert!((c_constant_by_sizes(&params) - c).abs() < 1e-12);
        for (n, k) in [(8, 2), (9, 3), (12, 3)] {
            let params = KneserParams::new(n, k).unwrap();
            let c = c_constant(&params).unwrap();
            assert!(0.0 < c && c <= 1.0, "(n,k) = ({n},{k}): c = {c}");
            assert!((c_constant_by_sizes(&params) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_sum_matches_the_enumeration_oracle() {
        for n in [9, 10, 12] {
            for j in 0..=3usize {
                for w in 0..=j.min(3) {
                    let ours = down_inner_sum(n, 3, 0.25, j, w);
                    let direct = oracle::down_bracket_direct(n, 3, 0.25, j, w);
                    assert!(
                        (ours - direct).abs() < 1e-12 * direct.max(1.0),
                        "n {n} j {j} w {w}: {ours} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn inner_sum_clears_a_fifth_at_scale() {
        let value = down_inner_sum(64, 16, 0.25, 2, 1);
        assert!(value > 0.2, "inner sum {value}");
    }

    #[test]
    fn down_profile_of_the_full_layer() {
        // V_w of the all-ones layer function counts sets with the given
        // trace: C(n-|J|, k-|w|) / C(n,k).
        let params = KneserParams::new(9, 3).unwrap();
        let ones = LayerFunction::new(params, vec![1.0; params.layer_size()]).unwrap();
        let g = up_lift(&ones).unwrap();
        let profile = down_profile(&ones, &g, &[0, 1]).unwrap();
        for row in &profile {
            let want = binomial_f64(9 - 2, 3 - row.w_size) / binomial_f64(9, 3);
            assert!(
                (row.v_w_f - want).abs() < 1e-15,
                "cell {}: {} vs {want}",
                row.w_cell,
                row.v_w_f
            );
        }
    }

    #[test]
    fn down_transfer_bound_holds_on_random_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let params = KneserParams::new(12, 3).unwrap();
        for _ in 0..3 {
            let f = random_layer(params, &mut rng);
            let g = up_lift(&f).unwrap();
            for elements in [vec![0], vec![0, 1], vec![2, 5, 7]] {
                for row in down_profile(&f, &g, &elements).unwrap() {
                    if row.inner_sum == 0.0 {
                        continue;
                    }
                    // The cube side dominates the layer side through the
                    // inner sum, with no asymptotics involved.
                    assert!(
                        row.v_w_g >= row.inner_sum * row.v_w_f - 1e-12,
                        "cell {}: {} vs {}",
                        row.w_cell,
                        row.v_w_g,
                        row.inner_sum * row.v_w_f
                    );
                    if row.clears_fifth {
                        assert!(row.ratio <= 5.0 + 1e-9, "ratio {}", row.ratio);
                    }
                }
            }
        }
    }

    #[test]
    fn intersection_check_matches_independence_exhaustively() {
        for j in 0..=4usize {
            let space = ProductSpace::new(disjointness_chain(0.25).unwrap(), j).unwrap();
            let cells = 1usize << j;
            for family_bits in 0u32..(1 << cells) {
                let members: Vec<usize> =
                    (0..cells).filter(|c| family_bits >> c & 1 == 1).collect();
                // A trace cell's point index is its bit-reversed mask; the
                // independence structure is identical either way, but map
                // faithfully anyway.
                let points: Vec<usize> = members
                    .iter()
                    .map(|&m| if j == 0 { 0 } else { mask_to_index(j, m as u64) })
                    .collect();
                let want = independent::is_independent(&space, &points);
                assert_eq!(
                    is_intersecting(j, &members),
                    want,
                    "j {j} family {members:?}"
                );
            }
        }
    }

    #[test]
    fn intersection_check_anchors() {
        assert!(is_intersecting(3, &[0b100, 0b101, 0b110, 0b111]));
        assert!(!is_intersecting(3, &[0b000]));
        assert!(!is_intersecting(3, &[0b001, 0b010]));
        assert!(is_intersecting(3, &[]));
    }

    #[test]
    fn star_capture_is_lossless() {
        let params = KneserParams::new(9, 3).unwrap();
        let star = LayerFunction::star(params, 0).unwrap();
        let capture = CaptureParams { gamma: 0.05, ..CaptureParams::default() };
        let out = kneser_capture(&star, 0.05, &capture).unwrap();
        assert_eq!(out.edge_layer, 0.0);
        assert_eq!(out.layer_loss, 0.0, "every star member traces into T");
        assert_eq!(out.j_elements, vec![0]);
        assert_eq!(out.t_cells, vec![1]);
        assert!((out.kept_layer_mass - star.expectation()).abs() < 1e-15);
    }

    #[test]
    fn zero_layer_captures_nothing() {
        let params = KneserParams::new(9, 3).unwrap();
        let zero = LayerFunction::new(params, vec![0.0; params.layer_size()]).unwrap();
        let out = kneser_capture(&zero, 0.05, &CaptureParams::default()).unwrap();
        assert!(out.j_elements.is_empty() && out.t_cells.is_empty());
        assert_eq!(out.layer_loss, 0.0);
    }

    #[test]
    fn perturbed_star_capture_stays_within_the_transfer_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let params = KneserParams::new(9, 3).unwrap();
        let mut values = LayerFunction::star(params, 0).unwrap().values().to_vec();
        let mut flipped = 0usize;
        while flipped * 100 < params.layer_size() {
            let rank = rng.gen_range(0..params.layer_size());
            if values[rank] == 0.0 {
                values[rank] = 1.0;
                flipped += 1;
            }
        }
        let f = LayerFunction::new(params, values).unwrap();
        let eps = 0.05;
        let capture = CaptureParams { gamma: 0.05, ..CaptureParams::default() };
        let out = kneser_capture(&f, eps, &capture).unwrap();
        assert!(out.layer_loss <= 5.0 * eps, "loss {}", out.layer_loss);
        // Self-consistency: the loss matches the oracle sweep keyed by
        // sorted element lists.
        let direct = oracle::layer_loss_direct(9, 3, &out.j_elements, &out.t_cells, &|set| {
            let mask = set.iter().fold(0u64, |m, &e| m | 1 << e);
            f.value_of_mask(mask)
        });
        assert!((out.layer_loss - direct).abs() < 1e-12);
        assert!((out.layer_loss + out.kept_layer_mass - f.expectation()).abs() < 1e-12);
    }
}
