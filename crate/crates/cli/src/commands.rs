use std::time::Instant;

use pvar_core::oracle::{build_liouvillian, steady_state, ExactMoment, SteadyStateOptions, TruncationSpec};
use pvar_core::phase_space::{default_sigma, gallery, p_grid, wigner_grid, GridKind, PhaseGrid};
use pvar_core::variational::{bistable_window, branch_select, factorize, maxwell_bloch_fixed_points, tracked_keys};
use pvar_core::{eom_system, ComponentState, SpinOp, ModeAnsatz, Monomial, MomentOptions, C64};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde_json::{json, Value};

use crate::config::{BuiltModel, Format, ModelConfig, OracleConfig, PhaseSource, PhaseSpaceConfig, RunConfig};
use crate::error::CliError;
use crate::output::{num, print_line, OutputDir};
use crate::solve::{record, RecordContext, ResultRecord, Solved, Solver, SweepValue, Warm};

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out: &'a OutputDir,
    pub strict: bool,
    pub pool: &'a ThreadPool,
}

/// What a command did, for the exit code and the final status line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<String>,
    /// Records whose best start did not meet the stall criterion.
    pub not_converged: usize,
    pub records: Vec<ResultRecord>,
}

struct Point {
    sweep: Option<SweepValue>,
    model: ModelConfig,
}

fn points(cfg: &RunConfig, use_sweep: bool) -> Result<Vec<Point>, CliError> {
    let model = cfg.model()?;
    match (&cfg.sweep, use_sweep) {
        (Some(s), true) => s
            .points()?
            .into_iter()
            .map(|value| {
                Ok(Point {
                    sweep: Some(SweepValue { parameter: s.parameter.clone(), value }),
                    model: model.with_parameter(&s.parameter, value)?,
                })
            })
            .collect(),
        _ => Ok(vec![Point { sweep: None, model: model.clone() }]),
    }
}

fn rel(path: &std::path::Path, out: &OutputDir) -> String {
    path.strip_prefix(out.root()).unwrap_or(path).display().to_string()
}

struct SolvedPoint {
    point: Point,
    model: BuiltModel,
    solved: Solved,
    seconds: f64,
}

fn solve_one(ctx: &Context<'_>, point: Point, warm: &Warm) -> Result<SolvedPoint, CliError> {
    let cfg = ctx.config;
    let start = Instant::now();
    let model = point.model.build()?;
    let ansatz = cfg.ansatz_for(&point.model, model.spec.space())?;
    let solver = Solver {
        model: &model,
        ansatz: &ansatz,
        options: cfg.solver.options()?,
        order: cfg.solver.order,
        nested: cfg.solver.nested_start,
        pool: ctx.pool,
    };
    let solved = solver.solve(warm)?;
    Ok(SolvedPoint { point, model, solved, seconds: start.elapsed().as_secs_f64() })
}

/// Warm-started points run in order; independent points run concurrently and
/// are returned in sweep order.
fn solve_points(ctx: &Context<'_>, use_sweep: bool) -> Result<Vec<SolvedPoint>, CliError> {
    let pts = points(ctx.config, use_sweep)?;
    let warm_start = ctx.config.sweep.as_ref().is_none_or(|s| s.warm_start);
    if warm_start || pts.len() == 1 {
        let mut warm = Warm::default();
        let mut out = Vec::with_capacity(pts.len());
        for p in pts {
            let s = solve_one(ctx, p, &warm)?;
            warm = s.solved.warm();
            out.push(s);
        }
        Ok(out)
    } else {
        ctx.pool.install(|| pts.into_par_iter().map(|p| solve_one(ctx, p, &Warm::default())).collect())
    }
}

fn records_of(ctx: &Context<'_>, solved: &[SolvedPoint]) -> Result<Vec<ResultRecord>, CliError> {
    let options = ctx.config.solver.options()?;
    solved
        .iter()
        .map(|s| {
            record(
                RecordContext {
                    config_hash: ctx.out.hash(),
                    model_kind: s.point.model.kind(),
                    parameters: s.point.model.parameters(),
                    sweep: s.point.sweep.clone(),
                    order: ctx.config.solver.order,
                    options: &options,
                    mode_names: &s.model.mode_names,
                },
                &s.solved,
            )
        })
        .collect()
}

fn sweep_column(records: &[ResultRecord]) -> Option<String> {
    records.first().and_then(|r| r.sweep.as_ref()).map(|s| s.parameter.clone())
}

fn write_records(ctx: &Context<'_>, records: &[ResultRecord], outcome: &mut Outcome) -> Result<(), CliError> {
    let cfg = ctx.config;
    if cfg.output.wants(Format::Jsonl) {
        outcome.files.push(rel(&ctx.out.write_jsonl("records.jsonl", records)?, ctx.out));
    }
    if cfg.output.wants(Format::Csv) {
        let mut header: Vec<String> = vec!["index".into()];
        let param = sweep_column(records);
        header.extend(param.clone());
        header.extend(["d", "converged", "start", "origin"].map(String::from));
        if let Some(first) = records.first() {
            for m in &first.modes {
                header.extend([format!("n_{}", m.name), format!("r_{}", m.name), format!("phi_{}", m.name)]);
            }
            if first.uncorrelated.is_some() {
                header.push("d_uncorrelated".into());
            }
        }
        let rows: Vec<Vec<String>> = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![i.to_string()];
                row.extend(r.sweep.as_ref().map(|s| num(s.value)));
                row.extend([num(r.d), r.converged.to_string(), r.start.to_string(), format!("{:?}", r.origin).to_lowercase()]);
                for m in &r.modes {
                    let (sr, sp) = m.squeezing.map_or((String::new(), String::new()), |(a, b)| (num(a), num(b)));
                    row.extend([num(m.intensity), sr, sp]);
                }
                row.extend(r.uncorrelated.as_ref().map(|u| num(u.d)));
                row
            })
            .collect();
        let failures = records.iter().filter(|r| !r.converged).count();
        let meta = json!({
            "points": records.len(),
            "not_converged": failures,
            "model": records.first().map(|r| r.model.clone()),
            "order": cfg.solver.order,
            "weights": cfg.solver.weights,
            "seed": cfg.solver.seed,
        });
        outcome.files.push(rel(&ctx.out.write_csv("summary.csv", &header, &rows, meta)?, ctx.out));
    }
    outcome.not_converged = records.iter().filter(|r| !r.converged).count();
    Ok(())
}

fn write_timing(ctx: &Context<'_>, command: &str, solved: &[SolvedPoint], total: f64) -> Result<(), CliError> {
    let points: Vec<f64> = solved.iter().map(|s| s.seconds).collect();
    ctx.out.write_json("timing.json", json!({ "command": command, "seconds": total, "points": points }))?;
    Ok(())
}

/// The member of `{k, k†}` with no more creation than annihilation factors,
/// so listings read `<a>`, `<σ⁻>` like the usual mean-field equations.
fn lowering_form(k: &Monomial) -> Monomial {
    let raising = |m: &Monomial| -> i64 {
        let bosons: i64 = m.boson.iter().map(|(_, p, q)| p as i64 - q as i64).sum();
        let spins: i64 = m
            .spin
            .iter()
            .map(|(_, op)| match op {
                SpinOp::Raise => 1,
                SpinOp::Lower => -1,
                SpinOp::Z => 0,
            })
            .sum();
        bosons + spins
    };
    let adj = k.adjoint();
    if raising(k) > raising(&adj) {
        adj
    } else {
        k.clone()
    }
}

pub fn derive_eom(ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let model = ctx.config.model()?.build()?;
    let order = ctx.config.solver.order;
    let keys: Vec<Monomial> = tracked_keys(model.spec.space(), order).iter().map(lowering_form).collect();
    let system = eom_system(&model.spec, &keys).map_err(|e| CliError::from_algebra("model", e))?;
    let mut equations = Vec::new();
    for eq in &system.equations {
        print_line(&format!("d<{}>/dt = {}", eq.key, eq.rhs));
        let terms: Vec<Value> = eq
            .rhs
            .terms()
            .map(|(m, c)| {
                let factors: Vec<Monomial> = factorize(m);
                json!({ "monomial": m, "coef": c, "factors": factors })
            })
            .collect();
        let closure: Vec<String> = eq
            .rhs
            .terms()
            .map(|(m, c)| {
                let product: String = factorize(m).iter().map(|f| format!("<{f}>")).collect();
                format!("({}{:+}i){}", c.re, c.im, if product.is_empty() { String::new() } else { format!(" {product}") })
            })
            .collect();
        if !closure.is_empty() && system.boundary.iter().any(|b| eq.rhs.coefficient(b) != C64::new(0.0, 0.0)) {
            print_line(&format!("    closed: {}", closure.join(" + ")));
        }
        equations.push(json!({ "key": eq.key, "rhs": eq.rhs.to_string(), "terms": terms }));
    }
    let boundary: Vec<&Monomial> = system.boundary.iter().collect();
    let path = ctx.out.write_json(
        "eom.json",
        json!({ "order": order, "mode_names": model.mode_names, "keys": keys, "equations": equations, "boundary": boundary }),
    )?;
    Ok(Outcome { files: vec![rel(&path, ctx.out)], ..Outcome::default() })
}

pub fn solve(ctx: &Context<'_>, use_sweep: bool) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let cfg = ctx.config;
    let mut outcome = Outcome::default();
    let sweep = if use_sweep {
        Some(cfg.sweep.as_ref().ok_or_else(|| CliError::config("sweep", "the sweep command needs a sweep section"))?)
    } else {
        None
    };
    if let Some(bs) = sweep.and_then(|s| s.branch_select) {
        let ModelConfig::Jc { params } = cfg.model()? else {
            return Err(CliError::config("sweep.branch_select", "branch selection needs the jc model"));
        };
        let s = sweep.expect("checked");
        if s.parameter != "p" {
            return Err(CliError::config("sweep.branch_select", "branch selection sweeps the drive `p`"));
        }
        let ps = s.points()?;
        let mb = maxwell_bloch_fixed_points(params, &ps);
        let selection = branch_select(params, &mb, bs.order, bs.weights).map_err(|e| CliError::from_variational("sweep.branch_select", e))?;
        let header: Vec<String> =
            ["p", "fixed_points", "n_low", "n_high", "d_low", "d_high", "n_chosen", "upper", "tie"].map(String::from).to_vec();
        let mut rows = Vec::new();
        let mut choices = selection.choices.iter().peekable();
        for point in &mb {
            let (Some(low), Some(high)) = (point.fixed_points.first(), point.fixed_points.last()) else {
                rows.push(vec![num(point.p), "0".into(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                continue;
            };
            let c = choices.next_if(|c| c.p == point.p).expect("one choice per point with fixed points");
            rows.push(vec![
                num(point.p),
                point.fixed_points.len().to_string(),
                num(low.intensity()),
                num(high.intensity()),
                num(c.norms.0),
                num(c.norms.1),
                num(c.chosen.intensity()),
                c.upper.to_string(),
                c.tie.to_string(),
            ]);
        }
        let window = bistable_window(&mb);
        let meta = json!({ "bistable_window": window, "crossings": selection.crossings, "order": bs.order, "weights": bs.weights });
        outcome.files.push(rel(&ctx.out.write_csv("mean_field.csv", &header, &rows, meta)?, ctx.out));
        print_line(&format!("bistable window {window:?}, crossings {:?}", selection.crossings));
    }
    if sweep.is_none_or(|s| s.minimize) {
        let solved = solve_points(ctx, use_sweep)?;
        let records = records_of(ctx, &solved)?;
        write_records(ctx, &records, &mut outcome)?;
        write_timing(ctx, if use_sweep { "sweep" } else { "solve" }, &solved, start.elapsed().as_secs_f64())?;
        for r in &records {
            let at = r.sweep.as_ref().map_or(String::new(), |s| format!("{}={} ", s.parameter, s.value));
            let modes: Vec<String> = r.modes.iter().map(|m| format!("n_{}={:.6}", m.name, m.intensity)).collect();
            print_line(&format!("{at}D={:.3e} converged={} {}", r.d, r.converged, modes.join(" ")));
        }
        outcome.records = records;
    }
    Ok(outcome)
}

struct OracleOutcome {
    moments: Vec<(Monomial, ExactMoment)>,
    residual: f64,
    boundary: Vec<f64>,
    cutoff_warning: bool,
    dim: usize,
    /// Largest moment change when every cutoff is lowered.
    drift: Option<f64>,
}

fn oracle_moments(model: &BuiltModel, cutoffs: Vec<usize>, oc: &OracleConfig, strict: bool, keys: &[Monomial]) -> Result<(Vec<(Monomial, ExactMoment)>, pvar_core::oracle::SteadyStateResult), CliError> {
    let err = |e| CliError::from_oracle("oracle", e);
    let trunc = TruncationSpec::with_cap(cutoffs, model.spec.space().spins, oc.dimension_cap).map_err(err)?;
    let l = build_liouvillian(&model.spec, &trunc).map_err(err)?;
    let ss = steady_state(&l, &SteadyStateOptions { strict, boundary_limit: oc.boundary_limit }).map_err(err)?;
    let moments = keys.iter().map(|k| Ok((k.clone(), ss.exact_moment(k).map_err(err)?))).collect::<Result<Vec<_>, CliError>>()?;
    Ok((moments, ss))
}

fn oracle_point(model: &BuiltModel, oc: &OracleConfig, strict: bool, keys: &[Monomial]) -> Result<OracleOutcome, CliError> {
    let (moments, ss) = oracle_moments(model, oc.cutoffs.clone(), oc, strict, keys)?;
    let step = oc.convergence_step;
    let drift = if step > 0 && oc.cutoffs.iter().all(|&c| c > step) {
        let lower = oc.cutoffs.iter().map(|c| c - step).collect();
        let (coarse, _) = oracle_moments(model, lower, oc, false, keys)?;
        Some(moments.iter().zip(&coarse).map(|((_, a), (_, b))| (a.value - b.value).norm()).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(OracleOutcome {
        moments,
        residual: ss.residual(),
        boundary: ss.boundary_population().to_vec(),
        cutoff_warning: ss.cutoff_warning(),
        dim: ss.truncation().dim(),
        drift,
    })
}

fn diagnostics(o: &OracleOutcome, sweep: &Option<SweepValue>) -> Value {
    json!({
        "sweep": sweep,
        "dimension": o.dim,
        "residual": o.residual,
        "boundary_population": o.boundary,
        "cutoff_warning": o.cutoff_warning,
        "cutoff_drift": o.drift,
        "truncation_warnings": o.moments.iter().filter(|(_, m)| m.truncation_warning).map(|(k, _)| k.to_string()).collect::<Vec<_>>(),
    })
}

pub fn oracle(ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let cfg = ctx.config;
    let oc = cfg.oracle()?;
    let pts = points(cfg, true)?;
    let param = pts[0].sweep.as_ref().map(|s| s.parameter.clone());
    let mut header: Vec<String> = param.into_iter().collect();
    header.extend(["key", "re", "im", "truncation_warning"].map(String::from));
    let mut rows = Vec::new();
    let mut diag = Vec::new();
    for p in &pts {
        let model = p.model.build()?;
        let keys = tracked_keys(model.spec.space(), cfg.solver.order);
        let o = oracle_point(&model, oc, ctx.strict, &keys)?;
        for (k, m) in &o.moments {
            let mut row: Vec<String> = p.sweep.iter().map(|s| num(s.value)).collect();
            row.extend([k.to_string(), num(m.value.re), num(m.value.im), m.truncation_warning.to_string()]);
            rows.push(row);
        }
        diag.push(diagnostics(&o, &p.sweep));
    }
    let path = ctx.out.write_csv("oracle.csv", &header, &rows, json!({ "cutoffs": oc.cutoffs, "points": diag }))?;
    Ok(Outcome { files: vec![rel(&path, ctx.out)], ..Outcome::default() })
}

/// `|v − e| / |e|`, falling back to the absolute deviation where `e = 0`.
pub fn relative_deviation(variational: C64, exact: C64) -> f64 {
    let abs = (variational - exact).norm();
    if exact.norm() > 0.0 {
        abs / exact.norm()
    } else {
        abs
    }
}

pub fn compare(ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let cfg = ctx.config;
    let oc = cfg.oracle()?;
    let solved = solve_points(ctx, true)?;
    let records = records_of(ctx, &solved)?;
    let mut outcome = Outcome::default();
    write_records(ctx, &records, &mut outcome)?;
    let param = sweep_column(&records);
    let mut header: Vec<String> = param.into_iter().collect();
    header.extend(
        ["key", "variational_re", "variational_im", "exact_re", "exact_im", "abs_dev", "rel_dev", "truncation_warning"]
            .map(String::from),
    );
    let mut rows = Vec::new();
    let mut diag = Vec::new();
    let mut worst = 0.0f64;
    for (s, r) in solved.iter().zip(&records) {
        let o = oracle_point(&s.model, oc, ctx.strict, &s.solved.keys)?;
        for (mv, (key, exact)) in r.moments.iter().zip(&o.moments) {
            debug_assert_eq!(&mv.key, key);
            let abs = (mv.value - exact.value).norm();
            let rd = relative_deviation(mv.value, exact.value);
            worst = worst.max(rd);
            let mut row: Vec<String> = r.sweep.iter().map(|s| num(s.value)).collect();
            row.extend([
                key.to_string(),
                num(mv.value.re),
                num(mv.value.im),
                num(exact.value.re),
                num(exact.value.im),
                num(abs),
                num(rd),
                exact.truncation_warning.to_string(),
            ]);
            rows.push(row);
        }
        diag.push(diagnostics(&o, &r.sweep));
    }
    let meta = json!({ "cutoffs": oc.cutoffs, "max_rel_dev": worst, "points": diag });
    outcome.files.push(rel(&ctx.out.write_csv("compare.csv", &header, &rows, meta)?, ctx.out));
    write_timing(ctx, "compare", &solved, start.elapsed().as_secs_f64())?;
    print_line(&format!("largest relative deviation {worst:.3e}"));
    outcome.records = records;
    Ok(outcome)
}

fn source_components(src: &PhaseSource) -> Result<(Vec<ComponentState>, String), CliError> {
    match src {
        PhaseSource::State { components } => {
            let name = components.iter().map(state_tag).collect::<Vec<_>>().join("_");
            Ok((components.clone(), name))
        }
        PhaseSource::Record { path, index, mode } => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let line = text
                .lines()
                .nth(*index)
                .ok_or_else(|| CliError::config("phase_space.source.index", format!("{path} has no record {index}")))?;
            let rec: ResultRecord = serde_json::from_str(line).map_err(|e| CliError::config("phase_space.source.path", e))?;
            let m = rec
                .ansatz
                .modes
                .get(*mode)
                .ok_or_else(|| CliError::config("phase_space.source.mode", format!("record has no mode {mode}")))?;
            Ok((m.components.clone(), format!("record{index}_mode{mode}")))
        }
    }
}

fn state_tag(c: &ComponentState) -> &'static str {
    match c {
        ComponentState::Coherent { .. } => "coherent",
        ComponentState::Thermal { .. } => "thermal",
        ComponentState::Fock { .. } => "fock",
        ComponentState::Squeezed { .. } => "squeezed",
        ComponentState::Cat { .. } => "cat",
        ComponentState::SqueezedThermal { .. } => "squeezed_thermal",
        ComponentState::SqueezedFock { .. } => "squeezed_fock",
    }
}

pub fn grid_file_name(state: &str, kind: GridKind, order: u32, sigma: f64) -> String {
    format!("{state}_{}_{order}_{}.csv", kind.name(), num(sigma))
}

fn write_grid(ctx: &Context<'_>, name: &str, grid: &PhaseGrid, extra: Value) -> Result<String, CliError> {
    let header: Vec<String> = ["re_alpha", "im_alpha", "value"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = grid.samples().map(|(x, y, v)| vec![num(x), num(y), num(v)]).collect();
    let meta = json!({
        "kind": grid.kind(),
        "order": grid.order(),
        "sigma_reg": grid.sigma_reg(),
        "window": grid.window(),
        "extent": grid.extent(),
        "points": grid.points(),
        "integral": grid.integral(),
        "min": grid.min(),
        "max": grid.max(),
        "state": extra,
    });
    Ok(rel(&ctx.out.write_csv(name, &header, &rows, meta)?, ctx.out))
}

pub fn phase_space(ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let ps = ctx.config.phase_space.clone().unwrap_or_default();
    let src = ps.source.as_ref().ok_or_else(|| CliError::config("phase_space.source", "missing state or record source"))?;
    let (components, default_name) = source_components(src)?;
    let mode = ModeAnsatz::new(components.clone()).map_err(|e| CliError::from_moment("phase_space.source", e))?;
    let order = ps.order;
    let opts = MomentOptions { max_order: order.max(MomentOptions::default().max_order) };
    let table = mode.table(order, order, &opts).map_err(|e| CliError::from_moment("phase_space.order", e))?;
    let name = ps.name.clone().unwrap_or(default_name);
    let mut outcome = Outcome::default();
    for &kind in &ps.kinds {
        let sigma = match kind {
            GridKind::P => ps.sigma.unwrap_or_else(|| default_sigma(&components)),
            GridKind::Wigner => ps.sigma.unwrap_or(0.0),
        };
        let grid = grid_for(&ps, kind, &table, sigma)?;
        let file = grid_file_name(&name, kind, order, sigma);
        outcome.files.push(write_grid(ctx, &file, &grid, json!({ "name": name, "components": components }))?);
        print_line(&format!("{file}: min {:.4e} max {:.4e} integral {:.6}", grid.min(), grid.max(), grid.integral()));
    }
    Ok(outcome)
}

fn grid_for(ps: &PhaseSpaceConfig, kind: GridKind, table: &pvar_core::MomentTable, sigma: f64) -> Result<PhaseGrid, CliError> {
    let err = |e| CliError::from_phase_space("phase_space", e);
    match kind {
        GridKind::P => p_grid(table, ps.order, &ps.grid, sigma).map_err(err),
        GridKind::Wigner => wigner_grid(table, ps.order, &ps.grid, sigma).map_err(err),
    }
}

pub fn gallery_cmd(ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let ps = ctx.config.phase_space.clone().unwrap_or_default();
    let cells = gallery(&ps.grid, ps.order).map_err(|e| CliError::from_phase_space("phase_space", e))?;
    let mut outcome = Outcome::default();
    let mut index = Vec::new();
    for c in &cells {
        let file = format!("gallery/{}", grid_file_name(&c.state_name(), GridKind::Wigner, ps.order, 0.0));
        outcome.files.push(write_grid(ctx, &file, &c.grid, json!({ "row": c.row, "column": c.column, "components": c.components }))?);
        index.push(json!({ "row": c.row, "column": c.column, "file": file, "min": c.grid.min(), "max": c.grid.max() }));
    }
    ctx.out.write_json("gallery/index.json", json!({ "order": ps.order, "grid": ps.grid, "cells": index }))?;
    print_line(&format!("{} gallery grids written", cells.len()));
    Ok(outcome)
}
