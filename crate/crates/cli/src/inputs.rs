//! Input loading: chains, point functions, layer functions.
//!
//! Chain specs are file paths or builtins. Point function files carry an
//! `n:` header, an optional `range:` header (`unit` default, `signed`
//! allowed), and one value per line in point-index order. Layer files use
//! the core format (`n:`/`k:` headers plus ranked values).

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use removal_core::chain::{BaseChain, ProductSpace};
use removal_core::functions::{PointFunction, Range};
use removal_core::kneser::{disjointness_chain, LayerFunction};
use removal_core::complete_graph_chain;

use crate::{classify_chain, classify_function, classify_kneser, CliError};

/// Accepts `p` as a decimal or an exact fraction `a/b`.
pub fn parse_number(text: &str) -> Result<f64, CliError> {
    let bad = || CliError::Config(format!("bad number `{text}`"));
    if let Some((num, den)) = text.split_once('/') {
        let num: f64 = num.trim().parse().map_err(|_| bad())?;
        let den: f64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0.0 {
            return Err(bad());
        }
        Ok(num / den)
    } else {
        text.trim().parse().map_err(|_| bad())
    }
}

/// `builtin:k<q>` for the complete graph, `builtin:disjointness:<p>` for
/// the biased two-state chain, anything else a chain definition file.
pub fn load_chain(spec: &str) -> Result<BaseChain, CliError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        if let Some(rate) = name.strip_prefix("disjointness:") {
            let p = parse_number(rate)?;
            return disjointness_chain(p).map_err(classify_kneser);
        }
        if let Some(q) = name.strip_prefix('k') {
            let q: usize = q
                .parse()
                .map_err(|_| CliError::Config(format!("bad builtin chain `{spec}`")))?;
            if q < 3 {
                return Err(CliError::Config(format!(
                    "complete-graph builtin needs at least 3 states, got {q}"
                )));
            }
            return Ok(complete_graph_chain(q));
        }
        return Err(CliError::Config(format!("unknown builtin chain `{spec}`")));
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    BaseChain::parse(&text).map_err(classify_chain)
}

/// Point function file bound to a product space of the given chain.
pub fn load_function(spec: &str, base: &BaseChain, cap: usize) -> Result<PointFunction, CliError> {
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut n: Option<usize> = None;
    let mut range = Range::Unit;
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fail =
            |message: String| CliError::Config(format!("{}:{line}: {message}", path.display()));
        if let Some(rest) = content.strip_prefix("n:") {
            n = Some(rest.trim().parse().map_err(|_| fail(format!("bad n `{rest}`")))?);
        } else if let Some(rest) = content.strip_prefix("range:") {
            range = match rest.trim() {
                "unit" => Range::Unit,
                "signed" => Range::Signed,
                other => return Err(fail(format!("range must be unit or signed, got `{other}`"))),
            };
        } else {
            values.push(content.parse().map_err(|_| fail(format!("bad value `{content}`")))?);
        }
    }
    let n = n.ok_or_else(|| {
        CliError::Config(format!("{}: missing n: header", path.display()))
    })?;
    let space = ProductSpace::with_cap(base.clone(), n, cap).map_err(classify_chain)?;
    PointFunction::new(space, values, range).map_err(classify_function)
}

pub fn load_layer(spec: &str) -> Result<LayerFunction, CliError> {
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    LayerFunction::parse(&text).map_err(classify_kneser)
}

pub fn random_unit_function(space: &ProductSpace, rng: &mut ChaCha8Rng) -> PointFunction {
    let values: Vec<f64> = (0..space.size()).map(|_| rng.gen()).collect();
    PointFunction::new(space.clone(), values, Range::Unit).expect("sampled inside [0, 1]")
}

pub fn random_signed_function(space: &ProductSpace, rng: &mut ChaCha8Rng) -> PointFunction {
    let values: Vec<f64> = (0..space.size()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    PointFunction::new(space.clone(), values, Range::Signed).expect("sampled inside [-1, 1]")
}
