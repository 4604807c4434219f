//! Bounded functions on product spaces and their spectral toolkit.
//!
//! A `PointFunction` is a dense table over `V^n` in canonical index order
//! with a declared range (`[0,1]` or signed). On top of it sit the
//! structural operations the refinement and capture machinery needs:
//!
//! * restriction and conditional expectation over a coordinate set,
//! * expansion in the product eigenbasis (multi-index `S`, `S_i = 0` the
//!   trivial character; the coefficient table uses the same mixed-radix
//!   layout as the point tables),
//! * the noise operator `N_eta`, realized as the per-coordinate Markov
//!   kernel `eta I + (1-eta) 1 mu^T`. In the eigenbasis this is exactly the
//!   scaling of the S-coefficient by `eta^{|S|}`, but as a convex
//!   combination it also preserves `[0,1]` ranges without round-trip dust,
//! * spectral influences `Inf_i(f) = sum_{S: S_i != 0} fhat(S)^2`,
//! * randomized booleanization with a seeded generator (chacha8).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{tensor_apply_axis, ChainError, ChainSpectrum, ProductSpace};

#[derive(Debug, Error)]
pub enum FunctionError {
    #[error("function tables live on different spaces")]
    SpaceMismatch,
    #[error("value table has {got} entries, space has {want} points")]
    WrongLength { got: usize, want: usize },
    #[error("value {value} at point {index} leaves the declared range")]
    RangeViolation { index: usize, value: f64 },
    #[error("coordinate {coord} out of range for {n} coordinates")]
    InvalidCoordinate { coord: usize, n: usize },
    #[error("cell {cell} out of range, coordinate set has {cells} cells")]
    BadCell { cell: usize, cells: usize },
    #[error("noise rate {eta} outside [0, 1]")]
    EtaOutOfRange { eta: f64 },
    #[error("operation needs a unit-range function")]
    NotUnitRange,
    #[error("spectrum was computed for a different base chain")]
    SpectrumMismatch,
    #[error("function file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Declared range of a point function. `Unit` tables are checked exactly
/// against `[0, 1]` at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Range {
    Unit,
    Signed,
}

/// A sorted duplicate-free set of 0-based coordinates of some `V^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateSet {
    coords: Vec<usize>,
}

impl CoordinateSet {
    /// Canonicalizes (sorts, deduplicates) and bounds-checks against `n`.
    pub fn new(mut coords: Vec<usize>, n: usize) -> Result<CoordinateSet, FunctionError> {
        coords.sort_unstable();
        coords.dedup();
        if let Some(&bad) = coords.iter().find(|&&c| c >= n) {
            return Err(FunctionError::InvalidCoordinate { coord: bad, n });
        }
        Ok(CoordinateSet { coords })
    }

    pub fn empty() -> CoordinateSet {
        CoordinateSet { coords: Vec::new() }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn contains(&self, c: usize) -> bool {
        self.coords.binary_search(&c).is_ok()
    }

    pub fn union(&self, other: &CoordinateSet) -> CoordinateSet {
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        coords.sort_unstable();
        coords.dedup();
        CoordinateSet { coords }
    }

    /// Complementary coordinates in ascending order.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|c| !self.contains(*c)).collect()
    }

    /// Number of cells of `V^I` for alphabet size `v`.
    pub fn cell_count(&self, v: usize) -> usize {
        v.pow(self.coords.len() as u32)
    }

    /// Digits of a cell, first (smallest) coordinate most significant.
    pub fn cell_digits(&self, v: usize, cell: usize) -> Vec<u8> {
        let mut digits = vec![0u8; self.coords.len()];
        let mut rest = cell;
        for d in digits.iter_mut().rev() {
            *d = (rest % v) as u8;
            rest /= v;
        }
        digits
    }

    /// Product stationary measure of a cell.
    pub fn cell_measure(&self, space: &ProductSpace, cell: usize) -> f64 {
        let v = space.alphabet();
        let mu = space.base().stationary();
        let mut rest = cell;
        let mut m = 1.0;
        for _ in 0..self.coords.len() {
            m *= mu[rest % v];
            rest /= v;
        }
        m
    }
}

/// Dense table of a function on a product space.
#[derive(Debug, Clone)]
pub struct PointFunction {
    space: ProductSpace,
    values: Vec<f64>,
    range: Range,
}

impl PointFunction {
    pub fn new(
        space: ProductSpace,
        values: Vec<f64>,
        range: Range,
    ) -> Result<PointFunction, FunctionError> {
        if values.len() != space.size() {
            return Err(FunctionError::WrongLength { got: values.len(), want: space.size() });
        }
        for (index, &value) in values.iter().enumerate() {
            let ok = match range {
                Range::Unit => (0.0..=1.0).contains(&value),
                Range::Signed => value.is_finite(),
            };
            if !ok {
                return Err(FunctionError::RangeViolation { index, value });
            }
        }
        Ok(PointFunction { space, values, range })
    }

    pub fn unit(space: ProductSpace, values: Vec<f64>) -> Result<PointFunction, FunctionError> {
        Self::new(space, values, Range::Unit)
    }

    pub fn signed(space: ProductSpace, values: Vec<f64>) -> Result<PointFunction, FunctionError> {
        Self::new(space, values, Range::Signed)
    }

    pub fn constant(space: ProductSpace, value: f64) -> PointFunction {
        let values = vec![value; space.size()];
        let range = if (0.0..=1.0).contains(&value) { Range::Unit } else { Range::Signed };
        PointFunction { space, values, range }
    }

    /// `{0,1}` indicator of a set of point indices.
    pub fn indicator<I: IntoIterator<Item = usize>>(space: ProductSpace, points: I) -> PointFunction {
        let mut values = vec![0.0; space.size()];
        for p in points {
            values[p] = 1.0;
        }
        PointFunction { space, values, range: Range::Unit }
    }

    pub fn from_fn(space: ProductSpace, range: Range, f: impl Fn(&[u8]) -> f64) -> PointFunction {
        let values: Vec<f64> = (0..space.size()).map(|i| f(&space.decode(i))).collect();
        PointFunction { space, values, range }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn range(&self) -> Range {
        self.range
    }

    pub fn expectation(&self) -> f64 {
        self.space.expectation(&self.values)
    }

    pub fn quad_form(&self, g: &PointFunction) -> Result<f64, FunctionError> {
        if !self.space.same_space(&g.space) {
            return Err(FunctionError::SpaceMismatch);
        }
        Ok(self.space.quad_form(&self.values, &g.values))
    }

    pub fn inner(&self, g: &PointFunction) -> Result<f64, FunctionError> {
        if !self.space.same_space(&g.space) {
            return Err(FunctionError::SpaceMismatch);
        }
        Ok(self.space.inner(&self.values, &g.values))
    }

    /// Plugs the cell assignment into the coordinates of `coords` and returns
    /// the function of the remaining coordinates (kept in their original
    /// relative order). Walks the output with an odometer over the free
    /// positions, so input indices are maintained incrementally.
    pub fn restrict(
        &self,
        coords: &CoordinateSet,
        cell: usize,
    ) -> Result<PointFunction, FunctionError> {
        let n = self.space.n();
        let v = self.space.alphabet();
        if let Some(&bad) = coords.as_slice().iter().find(|&&c| c >= n) {
            return Err(FunctionError::InvalidCoordinate { coord: bad, n });
        }
        let cells = coords.cell_count(v);
        if cell >= cells {
            return Err(FunctionError::BadCell { cell, cells });
        }
        let rest = coords.complement(n);
        let place: Vec<usize> = (0..n).map(|pos| v.pow((n - 1 - pos) as u32)).collect();
        let cell_digits = coords.cell_digits(v, cell);
        let mut base = 0usize;
        for (t, &pos) in coords.as_slice().iter().enumerate() {
            base += cell_digits[t] as usize * place[pos];
        }
        let out_size = v.pow(rest.len() as u32);
        let mut values = Vec::with_capacity(out_size);
        let mut odometer = vec![0u8; rest.len()];
        let mut in_idx = base;
        loop {
            values.push(self.values[in_idx]);
            // Increment the least significant free digit, with carries.
            let mut t = rest.len();
            loop {
                if t == 0 {
                    // Odometer wrapped: done.
                    let space = self.space.sibling(rest.len());
                    return PointFunction::new(space, values, self.range);
                }
                t -= 1;
                if (odometer[t] as usize) + 1 < v {
                    odometer[t] += 1;
                    in_idx += place[rest[t]];
                    break;
                } else {
                    in_idx -= (odometer[t] as usize) * place[rest[t]];
                    odometer[t] = 0;
                }
            }
        }
    }

    /// Conditional expectation table over the cells of `V^I`: entry at a
    /// cell is the mean of the restricted function under the complementary
    /// product measure.
    pub fn conditional_expectation(
        &self,
        coords: &CoordinateSet,
    ) -> Result<Vec<f64>, FunctionError> {
        let v = self.space.alphabet();
        let cells = coords.cell_count(v);
        let mut out = Vec::with_capacity(cells);
        for cell in 0..cells {
            out.push(self.restrict(coords, cell)?.expectation());
        }
        Ok(out)
    }

    /// The noise operator `N_eta`: per-coordinate kernel
    /// `eta I + (1-eta) 1 mu^T` swept along every axis. Unit-range inputs
    /// stay unit-range (the kernel is a convex combination); the clamp only
    /// ever removes sub-ulp float dust.
    pub fn noise(&self, eta: f64) -> Result<PointFunction, FunctionError> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(FunctionError::EtaOutOfRange { eta });
        }
        let v = self.space.alphabet();
        let mu = self.space.base().stationary();
        let kernel: Vec<Vec<f64>> = (0..v)
            .map(|x| {
                (0..v)
                    .map(|y| (1.0 - eta) * mu[y] + if x == y { eta } else { 0.0 })
                    .collect()
            })
            .collect();
        let mut values = self.values.clone();
        for axis in 0..self.space.n() {
            tensor_apply_axis(&kernel, &mut values, self.space.n(), axis);
        }
        if self.range == Range::Unit {
            for value in &mut values {
                debug_assert!(*value > -1e-9 && *value < 1.0 + 1e-9);
                *value = value.clamp(0.0, 1.0);
            }
        }
        Ok(PointFunction { space: self.space.clone(), values, range: self.range })
    }

    /// Expansion in the product eigenbasis. `coefficients[S]` uses the same
    /// mixed-radix indexing as point tables; digit 0 of `S` is the trivial
    /// character of that coordinate.
    pub fn fourier(&self, spectrum: &ChainSpectrum) -> Result<FourierExpansion, FunctionError> {
        if !spectrum.matches(self.space.base()) {
            return Err(FunctionError::SpectrumMismatch);
        }
        let v = self.space.alphabet();
        let mu = self.space.base().stationary();
        // Analysis matrix: row s contracts a coordinate against mu * b_s.
        let analysis: Vec<Vec<f64>> = (0..v)
            .map(|s| (0..v).map(|x| mu[x] * spectrum.basis()[s][x]).collect())
            .collect();
        let mut coefficients = self.values.clone();
        for axis in 0..self.space.n() {
            tensor_apply_axis(&analysis, &mut coefficients, self.space.n(), axis);
        }
        Ok(FourierExpansion {
            space: self.space.clone(),
            spectrum: spectrum.clone(),
            coefficients,
        })
    }

    /// All spectral influences at once from a single expansion:
    /// `Inf_i(f) = sum over S with S_i != 0 of fhat(S)^2`.
    pub fn influences(&self, spectrum: &ChainSpectrum) -> Result<Vec<f64>, FunctionError> {
        let expansion = self.fourier(spectrum)?;
        let n = self.space.n();
        let v = self.space.alphabet();
        let mut inf = vec![0.0; n];
        for (s_idx, &c) in expansion.coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let c2 = c * c;
            let mut rest = s_idx;
            for i in (0..n).rev() {
                if rest % v != 0 {
                    inf[i] += c2;
                }
                rest /= v;
            }
        }
        Ok(inf)
    }

    pub fn influence(&self, spectrum: &ChainSpectrum, coord: usize) -> Result<f64, FunctionError> {
        let n = self.space.n();
        if coord >= n {
            return Err(FunctionError::InvalidCoordinate { coord, n });
        }
        Ok(self.influences(spectrum)?[coord])
    }

    /// Randomized booleanization: `f'(x, y) = 1` with probability `f(x)`,
    /// independently over the `|V|^(n+m)` points of the extended space, in
    /// index order, from a chacha8 stream seeded with `seed`. A `{0,1}`
    /// valued input reproduces itself in every column for every seed.
    pub fn booleanize(&self, m: usize, seed: u64) -> Result<PointFunction, FunctionError> {
        if self.range != Range::Unit {
            return Err(FunctionError::NotUnitRange);
        }
        let space = self.space.grow(self.space.n() + m)?;
        let suffix = space.size() / self.space.size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(space.size());
        for x in 0..self.space.size() {
            let p = self.values[x];
            for _ in 0..suffix {
                let u: f64 = rng.gen();
                values.push(if u < p { 1.0 } else { 0.0 });
            }
        }
        Ok(PointFunction { space, values, range: Range::Unit })
    }
}

/// Coefficients of a function in the product eigenbasis.
#[derive(Debug, Clone)]
pub struct FourierExpansion {
    space: ProductSpace,
    spectrum: ChainSpectrum,
    coefficients: Vec<f64>,
}

impl FourierExpansion {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    /// Number of non-trivial characters in the multi-index.
    pub fn degree(&self, s_idx: usize) -> usize {
        let v = self.space.alphabet();
        let mut rest = s_idx;
        let mut d = 0;
        for _ in 0..self.space.n() {
            if rest % v != 0 {
                d += 1;
            }
            rest /= v;
        }
        d
    }

    /// Product eigenvalue `lambda_S`.
    pub fn lambda(&self, s_idx: usize) -> f64 {
        let v = self.space.alphabet();
        let mut rest = s_idx;
        let mut l = 1.0;
        for _ in 0..self.space.n() {
            l *= self.spectrum.eigenvalues()[rest % v];
            rest /= v;
        }
        l
    }

    /// Sum of squared coefficients (equals `<f, f>` by Parseval).
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    /// Back to the point table.
    pub fn synthesize(&self) -> PointFunction {
        let v = self.space.alphabet();
        let synthesis: Vec<Vec<f64>> = (0..v)
            .map(|x| (0..v).map(|s| self.spectrum.basis()[s][x]).collect())
            .collect();
        let mut values = self.coefficients.clone();
        for axis in 0..self.space.n() {
            tensor_apply_axis(&synthesis, &mut values, self.space.n(), axis);
        }
        PointFunction { space: self.space.clone(), values, range: Range::Signed }
    }
}

/// Parsed function file: header plus one decimal per line in canonical
/// index order. The base reference is an opaque string resolved by whoever
/// loads the file.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFile {
    pub base_ref: String,
    pub n: usize,
    pub range: Range,
    pub values: Vec<f64>,
}

impl FunctionFile {
    pub fn parse(text: &str) -> Result<FunctionFile, FunctionError> {
        let mut base_ref: Option<String> = None;
        let mut n: Option<usize> = None;
        let mut range: Option<Range> = None;
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix("base:") {
                base_ref = Some(rest.trim().to_string());
            } else if let Some(rest) = content.strip_prefix("n:") {
                n = Some(rest.trim().parse().map_err(|_| FunctionError::Format {
                    line,
                    message: format!("bad coordinate count `{}`", rest.trim()),
                })?);
            } else if let Some(rest) = content.strip_prefix("range:") {
                range = Some(match rest.trim() {
                    "unit" => Range::Unit,
                    "signed" => Range::Signed,
                    other => {
                        return Err(FunctionError::Format {
                            line,
                            message: format!("range must be `unit` or `signed`, got `{other}`"),
                        })
                    }
                });
            } else {
                let v: f64 = content.parse().map_err(|_| FunctionError::Format {
                    line,
                    message: format!("bad value `{content}`"),
                })?;
                values.push(v);
            }
        }
        let base_ref = base_ref.ok_or(FunctionError::Format {
            line: 0,
            message: "missing `base:` header".into(),
        })?;
        let n = n.ok_or(FunctionError::Format { line: 0, message: "missing `n:` header".into() })?;
        let range = range.ok_or(FunctionError::Format {
            line: 0,
            message: "missing `range:` header".into(),
        })?;
        Ok(FunctionFile { base_ref, n, range, values })
    }

    pub fn render(f: &PointFunction, base_ref: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "base: {base_ref}");
        let _ = writeln!(out, "n: {}", f.space().n());
        let _ = writeln!(out, "range: {}", match f.range() {
            Range::Unit => "unit",
            Range::Signed => "signed",
        });
        for v in f.values() {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    /// Binds the parsed table to a concrete space.
    pub fn into_function(self, space: ProductSpace) -> Result<PointFunction, FunctionError> {
        if space.n() != self.n {
            return Err(FunctionError::WrongLength { got: self.n, want: space.n() });
        }
        PointFunction::new(space, self.values, self.range)
    }
}
