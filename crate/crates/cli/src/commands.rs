//! The subcommand implementations.
//!
//! Every command produces the same report skeleton: `[meta]` (tool,
//! command, seed, rng, mode, caps), `[config]` (the resolved inputs and
//! parameters actually used), command-specific sections, and `[status]`.
//! Coordinates and ground-set elements print 1-indexed; raw point indices
//! and trace-cell masks print as-is.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use removal_core::chain::{BaseChain, ProductSpace};
use removal_core::functions::PointFunction;
use removal_core::independent::{
    independent_distance, is_independent, matching_like_certificate, matching_like_decompose,
};
use removal_core::junta::{
    driven_capture, faithful_parameters, independent_junta_capture, CaptureParams, JuntaError,
};
use removal_core::kneser::{kneser_capture, KneserParams, LayerFunction};
use removal_core::oracle;
use removal_core::refine::{check_phi_inequality, refinement_loop, schedule, tower};

use crate::config::{Mode, RunContext, TOOL_VERSION};
use crate::inputs;
use crate::report::Report;
use crate::suites;
use crate::{classify_junta, classify_kneser, classify_refine, CliError, Outcome, ORACLE_GATE};

pub fn run(ctx: &RunContext) -> Result<(Report, Outcome), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    match ctx.command.as_str() {
        "validate-chain" => validate_chain(ctx),
        "quadform" => quadform(ctx, &mut rng),
        "decompose" => decompose(ctx, &mut rng),
        "far" => far(ctx, &mut rng),
        "refine" => refine(ctx, &mut rng),
        "capture" => capture(ctx, &mut rng),
        "independent-capture" => independent_capture(ctx, &mut rng),
        "kneser" => kneser(ctx),
        "sweep" => sweep(ctx),
        "oracle-compare" => oracle_compare(ctx, &mut rng),
        "schedule" => schedule_cmd(ctx),
        "phi-grid" => phi_grid(ctx),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

fn base_report(ctx: &RunContext) -> Report {
    let mut report = Report::new();
    let meta = report.section("meta");
    meta.text("tool", format!("removal {TOOL_VERSION}"))
        .text("command", &ctx.command)
        .text("mode", ctx.mode.as_str())
        .uint("seed", ctx.seed)
        .text("rng", "chacha8")
        .uint("cap_points", ctx.cap_points as u64)
        .uint("cap_mwis", ctx.cap_mwis as u64);
    let section = report.section("config");
    let inputs = &ctx.config.inputs;
    for (key, value) in [
        ("inputs.chain", &inputs.chain),
        ("inputs.function", &inputs.function),
        ("inputs.function2", &inputs.function2),
        ("inputs.layer", &inputs.layer),
    ] {
        if let Some(value) = value {
            section.text(key, value);
        }
    }
    let p = &ctx.config.params;
    for (key, value) in [
        ("params.eps", p.eps),
        ("params.eta", p.eta),
        ("params.gamma", p.gamma),
        ("params.p", p.p),
        ("params.alpha", p.alpha),
        ("params.c", p.c),
        ("params.p_exponent", p.p_exponent),
        ("params.offstar_mass", p.offstar_mass),
    ] {
        if let Some(value) = value {
            section.float(key, value);
        }
    }
    for (key, value) in [
        ("params.n", p.n),
        ("params.k", p.k),
        ("params.r", p.r),
        ("params.j_budget", p.j_budget),
        ("params.element", p.element),
        ("params.steps", p.steps),
        ("params.pairs", p.pairs),
        ("params.points", p.points),
        ("params.cases", p.cases),
    ] {
        if let Some(value) = value {
            section.uint(key, value as u64);
        }
    }
    for (key, value) in [("params.suite", &p.suite), ("params.target", &p.target)] {
        if let Some(value) = value {
            section.text(key, value);
        }
    }
    report
}

fn finish(mut report: Report, outcome: Outcome) -> Result<(Report, Outcome), CliError> {
    let status = report.section("status");
    match &outcome {
        Outcome::Ok => {
            status.text("outcome", "ok");
        }
        Outcome::Soft(detail) => {
            status.text("outcome", "soft-failure").text("detail", detail);
        }
        Outcome::Invariant(detail) => {
            status.text("outcome", "invariant-failure").text("detail", detail);
        }
    }
    Ok((report, outcome))
}

fn one_indexed(coords: &[usize]) -> Vec<i64> {
    coords.iter().map(|&c| c as i64 + 1).collect()
}

fn as_ints(values: &[usize]) -> Vec<i64> {
    values.iter().map(|&v| v as i64).collect()
}

fn gate(what: &str, got: f64, oracle: f64) -> Result<(), CliError> {
    if (got - oracle).abs() > ORACLE_GATE {
        return Err(CliError::OracleMismatch { what: what.into(), got, oracle });
    }
    Ok(())
}

fn chain_spec(ctx: &RunContext) -> String {
    ctx.config.inputs.chain.clone().unwrap_or_else(|| "builtin:k3".into())
}

fn load_space(ctx: &RunContext, default_n: usize) -> Result<(BaseChain, ProductSpace), CliError> {
    let base = inputs::load_chain(&chain_spec(ctx))?;
    let n = ctx.config.params.n.unwrap_or(default_n);
    let space = ProductSpace::with_cap(base.clone(), n, ctx.cap_points)
        .map_err(crate::classify_chain)?;
    Ok((base, space))
}

fn function_or_random(
    ctx: &RunContext,
    spec: &Option<String>,
    base: &BaseChain,
    space: &ProductSpace,
    rng: &mut ChaCha8Rng,
) -> Result<PointFunction, CliError> {
    match spec {
        Some(path) => {
            let f = inputs::load_function(path, base, ctx.cap_points)?;
            if !f.space().same_space(space) {
                return Err(CliError::Config(format!(
                    "{path}: function has {} coordinates, the run uses {}",
                    f.space().n(),
                    space.n()
                )));
            }
            Ok(f)
        }
        None => Ok(inputs::random_unit_function(space, rng)),
    }
}

/// Mixed-radix cell of a point on the listed coordinates, first coordinate
/// most significant. Matches the conditional-expectation table layout.
fn cell_of_point(space: &ProductSpace, coords: &[usize], point: usize) -> usize {
    let digits = space.decode(point);
    coords.iter().fold(0, |cell, &c| cell * space.alphabet() + digits[c] as usize)
}

fn capture_params(ctx: &RunContext, default_gamma: f64) -> CaptureParams {
    let defaults = CaptureParams::default();
    let p = &ctx.config.params;
    CaptureParams {
        eta: p.eta.unwrap_or(defaults.eta),
        gamma: p.gamma.unwrap_or(default_gamma),
        j_budget: p.j_budget.unwrap_or(defaults.j_budget),
        mwis_cap: ctx.cap_mwis,
    }
}

fn validate_chain(ctx: &RunContext) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let spec = chain_spec(ctx);
    report.section("input").text("chain", &spec);
    // A definition that fails validation is this command's documented
    // negative outcome, not a config error.
    let chain = if spec.starts_with("builtin:") {
        inputs::load_chain(&spec)?
    } else {
        let path = std::path::Path::new(&spec);
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        match BaseChain::parse(&text) {
            Ok(chain) => chain,
            Err(err) => {
                return finish(report, Outcome::Soft(format!("chain rejected: {err}")));
            }
        }
    };
    let section = report.section("chain");
    section
        .texts("states", chain.states().to_vec())
        .uint("size", chain.size() as u64)
        .floats("stationary", chain.stationary().to_vec())
        .float("w_min", chain.w_min())
        .flag("reversible", true);
    let rows: Vec<String> = chain
        .transition()
        .iter()
        .map(|row| row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "))
        .collect();
    section.texts("transition", rows);
    let spectrum = chain.eigendecompose().map_err(crate::classify_chain)?;
    report
        .section("spectrum")
        .floats("eigenvalues", spectrum.eigenvalues().to_vec())
        .float("lambda2", spectrum.lambda2());
    finish(report, Outcome::Ok)
}

fn quadform(ctx: &RunContext, rng: &mut ChaCha8Rng) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let (base, space) = load_space(ctx, 2)?;
    let from_files = ctx.config.inputs.function.is_some();
    let pairs = if from_files { 1 } else { ctx.config.params.pairs.unwrap_or(5) };
    let mut values = Vec::new();
    let mut deviations = Vec::new();
    for _ in 0..pairs {
        let f = function_or_random(ctx, &ctx.config.inputs.function, &base, &space, rng)?;
        let g =
            function_or_random(ctx, &ctx.config.inputs.function2, &base, &space, rng)?;
        let quad = f.quad_form(&g).map_err(crate::classify_function)?;
        let naive = oracle::quad_form_naive(&space, f.values(), g.values());
        gate("quadratic form", quad, naive)?;
        values.push(quad);
        deviations.push((quad - naive).abs());
    }
    let max_deviation = deviations.iter().cloned().fold(0.0, f64::max);
    report
        .section("quadform")
        .uint("n", space.n() as u64)
        .uint("pairs", pairs as u64)
        .floats("values", values)
        .float("max_deviation", max_deviation);
    finish(report, Outcome::Ok)
}

fn decompose(ctx: &RunContext, rng: &mut ChaCha8Rng) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let (base, space) = load_space(ctx, 2)?;
    let g = function_or_random(ctx, &ctx.config.inputs.function, &base, &space, rng)?;
    let parts = matching_like_decompose(&g).map_err(crate::classify_independent)?;
    let dominated = parts
        .matched
        .values()
        .iter()
        .zip(g.values())
        .all(|(m, v)| m <= v);
    let residual_ok = parts
        .matched
        .values()
        .iter()
        .zip(parts.residual.values())
        .zip(g.values())
        .all(|((m, r), v)| (m + r - v).abs() <= 1e-12);
    let independent = is_independent(&space, &parts.residual_support);
    let certificate = matching_like_certificate(&parts.matched, ctx.cap_mwis)
        .map_err(crate::classify_independent)?;
    let section = report.section("decompose");
    section
        .float("g_expectation", g.expectation())
        .float("matched_expectation", parts.matched.expectation())
        .float("residual_expectation", parts.residual.expectation())
        .ints("residual_support", as_ints(&parts.residual_support))
        .uint("augment_steps", parts.trace.len() as u64)
        .flag("matched_dominated", dominated)
        .flag("split_exact", residual_ok)
        .flag("residual_independent", independent)
        .float("certificate_worst_mass", certificate.worst_mass)
        .float("certificate_half_expectation", certificate.half_expectation)
        .flag("certificate_holds", certificate.holds);
    if !(dominated && residual_ok && independent && certificate.holds) {
        return finish(
            report,
            Outcome::Invariant("decomposition checks failed, see the decompose section".into()),
        );
    }
    finish(report, Outcome::Ok)
}

fn far(ctx: &RunContext, rng: &mut ChaCha8Rng) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let (base, space) = load_space(ctx, 2)?;
    let f = function_or_random(ctx, &ctx.config.inputs.function, &base, &space, rng)?;
    let eps = ctx.config.params.eps.unwrap_or(0.1);
    let result = independent_distance(&f, ctx.cap_mwis).map_err(crate::classify_independent)?;
    if !is_independent(&space, &result.best_set) {
        return Err(CliError::Invariant("reported best set is not independent".into()));
    }
    let mass: f64 =
        result.best_set.iter().map(|&x| space.point_measure(x) * f.values()[x]).sum();
    gate("best independent mass", result.best_mass, mass)?;
    gate("distance", result.distance, result.expectation - mass)?;
    let support: Vec<usize> =
        (0..space.size()).filter(|&x| f.values()[x] > 0.0).collect();
    let brute_checked = support.len() <= 24;
    if brute_checked {
        let weights: Vec<f64> =
            support.iter().map(|&x| space.point_measure(x) * f.values()[x]).collect();
        let mut edges = Vec::new();
        for (i, &x) in support.iter().enumerate() {
            for (j, &y) in support.iter().enumerate().skip(i) {
                if space.adjacent(x, y) {
                    edges.push((i, j));
                }
            }
        }
        let (_, brute_weight) = oracle::mwis_bruteforce(support.len(), &edges, &weights);
        gate("brute-force independent mass", result.best_mass, brute_weight)?;
    }
    report
        .section("far")
        .float("eps", eps)
        .float("expectation", result.expectation)
        .ints("best_set", as_ints(&result.best_set))
        .float("best_mass", result.best_mass)
        .float("distance", result.distance)
        .flag("brute_checked", brute_checked)
        .text("verdict", if result.distance > eps { "far" } else { "close" });
    finish(report, Outcome::Ok)
}

fn refine(ctx: &RunContext, rng: &mut ChaCha8Rng) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let (base, space) = load_space(ctx, 2)?;
    let f = function_or_random(ctx, &ctx.config.inputs.function, &base, &space, rng)?;
    let r = ctx.config.params.r.unwrap_or(2);
    let eps = ctx.config.params.eps.unwrap_or(0.05);
    let params = capture_params(ctx, CaptureParams::default().gamma);
    let trace = refinement_loop(&f, r, eps, ctx.config.params.steps, &params)
        .map_err(classify_refine)?;
    let mut lines = Vec::new();
    for step in &trace.steps {
        let direct = oracle::entropy_direct(&space, f.values(), step.i_set.as_slice());
        gate(&format!("entropy after step {}", step.step), step.entropy, direct)?;
        lines.push(format!(
            "step {}: added {:?}, entropy {}, gain {}",
            step.step,
            one_indexed(step.added.as_slice()),
            step.entropy,
            step.gain
        ));
    }
    let final_direct = oracle::entropy_direct(&space, f.values(), trace.final_set.as_slice());
    gate("final entropy", trace.final_entropy, final_direct)?;
    report
        .section("refine")
        .float("alpha", trace.alpha)
        .uint("step_bound", trace.step_bound as u64)
        .uint("steps_taken", trace.steps.len() as u64)
        .texts("trace", lines)
        .ints("final_set", one_indexed(trace.final_set.as_slice()))
        .float("final_entropy", trace.final_entropy)
        .text("stop", format!("{:?}", trace.stop));
    finish(report, Outcome::Ok)
}

fn capture(ctx: &RunContext, rng: &mut ChaCha8Rng) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let (base, space) = load_space(ctx, 2)?;
    let eps = ctx.config.params.eps.unwrap_or(0.1);
    if ctx.mode == Mode::Faithful {
        // The appendix parameter trail is astronomically conservative;
        // faithful mode reports it without attempting to run at it.
        let lambda = base.eigendecompose().map_err(crate::classify_chain)?.lambda2();
        let c = ctx.config.params.c.unwrap_or(1.0);
        let p_exponent = ctx.config.params.p_exponent.unwrap_or(4.0);
        let faithful =
            faithful_parameters(eps, c, p_exponent, lambda).map_err(classify_junta)?;
        report
            .section("faithful")
            .float("eps", faithful.eps)
            .float("c", faithful.c)
            .float("p_exponent", faithful.p_exponent)
            .float("lambda", faithful.lambda)
            .text("delta_moo", faithful.delta_moo.to_string())
            .text("tau_moo", faithful.tau_moo.to_string())
            .text("one_minus_eta", faithful.one_minus_eta.to_string())
            .text("ell", faithful.ell.to_string())
            .text("gamma_bound", faithful.gamma_bound.to_string())
            .text("j_bound", faithful.j_bound.to_string())
            .float("delta_exponent", faithful.delta_exponent);
        return finish(report, Outcome::Ok);
    }
    let f1 = function_or_random(ctx, &ctx.config.inputs.function, &base, &space, rng)?;
    let f2 = function_or_random(ctx, &ctx.config.inputs.function2, &base, &space, rng)?;
    let params = capture_params(ctx, CaptureParams::default().gamma);
    let run = match driven_capture(&f1, &f2, eps, &params) {
        Ok(run) => run,
        Err(err @ (JuntaError::Budget { .. } | JuntaError::NoSideQualifies { .. })) => {
            return finish(report, Outcome::Soft(err.to_string()));
        }
        Err(err) => return Err(classify_junta(err)),
    };
    let cap = &run.capture;
    let coords = cap.j_set.as_slice();
    // Outside mass and cross term recomputed through the naive path.
    for (name, f, t_cells, outside) in [
        ("outside mass 1", &f1, &cap.t1, cap.outside1),
        ("outside mass 2", &f2, &cap.t2, cap.outside2),
    ] {
        let cond = oracle::conditional_expectation_naive(&space, f.values(), coords);
        let direct: f64 = (0..cond.len())
            .filter(|cell| t_cells.binary_search(cell).is_err())
            .map(|cell| cap.j_set.cell_measure(&space, cell) * cond[cell])
            .sum();
        gate(name, outside, direct)?;
    }
    let lift = |cells: &[usize]| -> Vec<f64> {
        (0..space.size())
            .map(|x| f64::from(cells.binary_search(&cell_of_point(&space, coords, x)).is_ok()))
            .collect()
    };
    let cross_direct = oracle::quad_form_naive(&space, &lift(&cap.t1), &lift(&cap.t2));
    gate("cross term", cap.cross, cross_direct)?;
    report
        .section("capture")
        .float("eps", eps)
        .ints("j", one_indexed(coords))
        .ints("t1", as_ints(&cap.t1))
        .ints("t2", as_ints(&cap.t2))
        .float("t1_probability", cap.t1_probability)
        .float("t2_probability", cap.t2_probability)
        .float("outside1", cap.outside1)
        .float("outside2", cap.outside2)
        .float("cross", cap.cross)
        .float("gamma_final", run.gamma_final)
        .uint("rounds", run.rounds as u64)
        .flag("target_met", run.target_met);
    if run.target_met {
        finish(report, Outcome::Ok)
    } else {
        finish(report, Outcome::Soft("cross-term target not met within the budget".into()))
    }
}

fn independent_capture(
    ctx: &RunContext,
    rng: &mut ChaCha8Rng,
) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let (base, space) = load_space(ctx, 2)?;
    let g = function_or_random(ctx, &ctx.config.inputs.function, &base, &space, rng)?;
    let eps = ctx.config.params.eps.unwrap_or(0.1);
    let params = capture_params(ctx, CaptureParams::default().gamma);
    let cap = match independent_junta_capture(&g, eps, &params) {
        Ok(cap) => cap,
        Err(err @ JuntaError::Budget { .. }) => {
            return finish(report, Outcome::Soft(err.to_string()));
        }
        Err(err) => return Err(classify_junta(err)),
    };
    let coords = cap.j_set.as_slice();
    let cell_space = space.sibling(coords.len());
    if !is_independent(&cell_space, &cap.t_cells) {
        return Err(CliError::Invariant("kept cells are not independent".into()));
    }
    let cond = oracle::conditional_expectation_naive(&space, g.values(), coords);
    let loss_direct: f64 = (0..cond.len())
        .filter(|cell| cap.t_cells.binary_search(cell).is_err())
        .map(|cell| cap.j_set.cell_measure(&space, cell) * cond[cell])
        .sum();
    gate("captured loss", cap.loss, loss_direct)?;
    report
        .section("independent-capture")
        .float("eps", eps)
        .ints("j", one_indexed(coords))
        .ints("t_prime", as_ints(&cap.t_prime))
        .ints("t", as_ints(&cap.t_cells))
        .float("mwis_weight", cap.mwis_weight)
        .float("loss", cap.loss)
        .float("kept_mass", cap.kept_mass)
        .flag("independent", true);
    finish(report, Outcome::Ok)
}

fn load_layer_input(ctx: &RunContext) -> Result<LayerFunction, CliError> {
    let spec = ctx
        .config
        .inputs
        .layer
        .clone()
        .unwrap_or_else(|| "builtin:star".into());
    if spec == "builtin:star" || spec == "builtin:perturbed-star" {
        let n = ctx.config.params.n.unwrap_or(9);
        let params = match ctx.config.params.k {
            Some(k) => KneserParams::new(n, k),
            None => match ctx.config.params.p {
                Some(p) => KneserParams::from_rate(n, p),
                None => KneserParams::new(n, 3),
            },
        }
        .map_err(classify_kneser)?;
        let element = ctx.config.params.element.unwrap_or(0);
        if element >= params.n() {
            return Err(CliError::Config(format!(
                "star element {element} out of range for n = {}",
                params.n()
            )));
        }
        let star = LayerFunction::star(params, element).map_err(classify_kneser)?;
        if spec == "builtin:star" {
            return Ok(star);
        }
        // Spread the requested off-star mass uniformly over the non-members.
        let offstar = ctx.config.params.offstar_mass.unwrap_or(0.01);
        let total = params.layer_size() as f64;
        let members = star.values().iter().filter(|&&v| v == 1.0).count() as f64;
        let fill = offstar * total / (total - members);
        if !(0.0..=1.0).contains(&fill) {
            return Err(CliError::Config(format!(
                "off-star mass {offstar} needs per-set value {fill} outside [0, 1]"
            )));
        }
        let values: Vec<f64> =
            star.values().iter().map(|&v| if v == 1.0 { 1.0 } else { fill }).collect();
        return LayerFunction::new(params, values).map_err(classify_kneser);
    }
    inputs::load_layer(&spec)
}

fn kneser(ctx: &RunContext) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let f = load_layer_input(ctx)?;
    let params = f.params();
    let eps = ctx.config.params.eps.unwrap_or(0.05);
    // A looser influence threshold than the generic default keeps the
    // junta at the few genuinely heavy elements of desk-scale layers.
    let capture = capture_params(ctx, 0.05);
    let out = kneser_capture(&f, eps, &capture).map_err(classify_kneser)?;
    let ordered = out.edge_layer;
    let loss_direct = oracle::layer_loss_direct(
        params.n(),
        params.k(),
        &out.j_elements,
        &out.t_cells,
        &|set| {
            let mask = set.iter().fold(0u64, |m, &e| m | 1 << e);
            f.value_of_mask(mask)
        },
    );
    gate("layer loss", out.layer_loss, loss_direct)?;
    let masks: Vec<String> = out
        .t_cells
        .iter()
        .map(|&cell| format!("{cell:0width$b}", width = out.j_elements.len().max(1)))
        .collect();
    let bound = 5.0 * eps;
    let within = out.layer_loss <= bound + 1e-12;
    report
        .section("kneser")
        .uint("n", params.n() as u64)
        .uint("k", params.k() as u64)
        .float("p", params.p())
        .float("eps", eps)
        .float("edge_layer_ordered", ordered)
        .float("edge_layer_unordered", ordered / 2.0)
        .ints("j_elements", one_indexed(&out.j_elements))
        .ints("t_cells", as_ints(&out.t_cells))
        .texts("t_cell_masks", masks)
        .flag("intersecting", true)
        .float("layer_loss", out.layer_loss)
        .float("kept_layer_mass", out.kept_layer_mass)
        .float("transfer_bound", bound)
        .flag("within_transfer_bound", within);
    report
        .section("cube")
        .float("loss", out.cube.loss)
        .float("kept_mass", out.cube.kept_mass)
        .float("mwis_weight", out.cube.mwis_weight)
        .ints("t_prime", as_ints(&out.cube.t_prime));
    if within {
        finish(report, Outcome::Ok)
    } else {
        finish(report, Outcome::Soft(format!("layer loss {} exceeds {bound}", out.layer_loss)))
    }
}

fn sweep(ctx: &RunContext) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let which = ctx.config.params.suite.clone().unwrap_or_else(|| "all".into());
    let outcomes = suites::run_by_name(&which, ctx.seed, ctx.cap_mwis)?;
    let mut all_pass = true;
    for outcome in &outcomes {
        all_pass &= outcome.pass;
        report
            .section(&format!("suite.{}", outcome.name))
            .uint("cases", outcome.cases as u64)
            .uint("violations", outcome.violations as u64)
            .float(outcome.stat_name, outcome.stat)
            .flag("pass", outcome.pass)
            .texts("detail", outcome.lines.clone());
    }
    if all_pass {
        finish(report, Outcome::Ok)
    } else {
        finish(report, Outcome::Invariant("one or more suites failed".into()))
    }
}

fn oracle_compare(ctx: &RunContext, rng: &mut ChaCha8Rng) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let which = ctx.config.params.target.clone().unwrap_or_else(|| "all".into());
    let cases = ctx.config.params.cases.unwrap_or(20);
    let rows = suites::oracle_rows(&which, cases, rng)?;
    let mut worst = 0.0f64;
    for row in &rows {
        worst = worst.max(row.max_deviation);
        report
            .section(&format!("oracle.{}", row.name))
            .uint("cases", row.cases as u64)
            .float("max_deviation", row.max_deviation);
    }
    report.section("summary").float("max_deviation", worst).flag("pass", worst <= ORACLE_GATE);
    if worst <= ORACLE_GATE {
        finish(report, Outcome::Ok)
    } else {
        finish(
            report,
            Outcome::Invariant(format!("oracle deviation {worst} exceeds {ORACLE_GATE}")),
        )
    }
}

fn schedule_cmd(ctx: &RunContext) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let base = inputs::load_chain(&chain_spec(ctx))?;
    let p = &ctx.config.params;
    let eps = p.eps.unwrap_or(0.1);
    let c = p.c.unwrap_or(1.0);
    let alpha = p.alpha.unwrap_or(0.5);
    let r = p.r.unwrap_or(10);
    if !(0.0 < eps && eps < 1.0 && c > 0.0 && 0.0 < alpha && alpha <= 1.0 && r > 0) {
        return Err(CliError::Config(format!(
            "schedule needs eps in (0,1), c > 0, alpha in (0,1], r > 0; \
             got eps {eps}, c {c}, alpha {alpha}, r {r}"
        )));
    }
    let sched = schedule(eps, c, alpha, r, &base);
    report
        .section("schedule")
        .float("eps", sched.eps)
        .float("c", sched.c)
        .float("alpha", sched.alpha)
        .uint("r", sched.r as u64)
        .float("w_min", sched.w_min)
        .uint("alphabet", sched.alphabet as u64)
        .uint("steps", sched.steps as u64)
        .floats("growth_preview", sched.growth_preview.clone())
        .text("k", sched.k.to_string())
        .text("delta2", sched.delta2.to_string())
        .text("r2", sched.r2.to_string());
    let towers: Vec<String> = (0..=6).map(|m| tower(m).to_string()).collect();
    report.section("tower").texts("values", towers);
    if ctx.mode == Mode::Faithful {
        let lambda = base.eigendecompose().map_err(crate::classify_chain)?.lambda2();
        let p_exponent = p.p_exponent.unwrap_or(4.0);
        let faithful =
            faithful_parameters(eps, c, p_exponent, lambda).map_err(classify_junta)?;
        report
            .section("faithful")
            .float("lambda", faithful.lambda)
            .text("delta_moo", faithful.delta_moo.to_string())
            .text("tau_moo", faithful.tau_moo.to_string())
            .text("one_minus_eta", faithful.one_minus_eta.to_string())
            .text("ell", faithful.ell.to_string())
            .text("gamma_bound", faithful.gamma_bound.to_string())
            .text("j_bound", faithful.j_bound.to_string())
            .float("delta_exponent", faithful.delta_exponent);
    }
    finish(report, Outcome::Ok)
}

fn phi_grid(ctx: &RunContext) -> Result<(Report, Outcome), CliError> {
    let mut report = base_report(ctx);
    let points = ctx.config.params.points.unwrap_or(10_000);
    let sweep = suites::phi_sweep(points);
    report
        .section("phi-grid")
        .uint("points", sweep.cases as u64)
        .uint("violations", sweep.violations as u64)
        .float("min_margin", sweep.stat)
        .texts("detail", sweep.lines.clone())
        .flag("pass", sweep.pass);
    // The extremal configuration the bound is tight against.
    let anchor = check_phi_inequality(0.25, 0.5, 7.0 / 6.0).map_err(classify_refine)?;
    report
        .section("anchor")
        .float("gain", anchor.gain)
        .float("required", anchor.required)
        .flag("clears_required", anchor.gain > anchor.required);
    if sweep.pass {
        finish(report, Outcome::Ok)
    } else {
        finish(report, Outcome::Invariant("margin violations on the grid".into()))
    }
}
