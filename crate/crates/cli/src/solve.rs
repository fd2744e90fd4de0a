//! Per-point minimization protocol and the records it produces.

use pvar_core::moments::squeezing_of;
use pvar_core::variational::{tracked_keys, AnsatzTemplate, MinimizeOptions, MinimizeResult, Problem, Slot, StartResult, WeightScheme};
use pvar_core::{ansatz_moment, Ansatz, Monomial, MomentOptions, C64};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::config::{frozen_slots, BuiltAnsatz, BuiltModel};
use crate::error::CliError;

/// Where a start point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Seeded perturbation of the template (start 0 is the template itself).
    Seeded,
    /// Best ansatz of the previous sweep point.
    Warm,
    /// Optimum of the same point without correlation parameters.
    Nested,
}

/// Best ansätze carried from one sweep point to the next.
#[derive(Debug, Clone, Default)]
pub struct Warm {
    pub uncorrelated: Option<Ansatz>,
    pub main: Option<Ansatz>,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub main: MinimizeResult,
    pub origins: Vec<Origin>,
    pub uncorrelated: Option<MinimizeResult>,
    pub keys: Vec<Monomial>,
}

impl Solved {
    pub fn origin_of(&self, start: &StartResult) -> Origin {
        self.origins[start.start]
    }

    pub fn warm(&self) -> Warm {
        Warm {
            uncorrelated: self.uncorrelated.as_ref().map(|u| u.best().ansatz.clone()),
            main: Some(self.main.best().ansatz.clone()),
        }
    }
}

pub struct Solver<'a> {
    pub model: &'a BuiltModel,
    pub ansatz: &'a BuiltAnsatz,
    pub options: MinimizeOptions,
    pub order: u32,
    pub nested: bool,
    pub pool: &'a ThreadPool,
}

impl Solver<'_> {
    fn problem(&self, keys: &[Monomial], correlation_keys: Vec<Monomial>) -> Result<Problem, CliError> {
        let err = |e| CliError::from_variational("ansatz", e);
        let template = AnsatzTemplate { base: self.ansatz.base.clone(), correlation_keys };
        let problem = Problem::new(&self.model.spec, keys, &template, self.options).map_err(err)?;
        let with_correlations = !template.correlation_keys.is_empty();
        let mut frozen: Vec<Slot> = Vec::new();
        for spec in &self.ansatz.frozen {
            if spec.starts_with("correlation:") && !with_correlations {
                continue;
            }
            frozen.extend(frozen_slots(spec, problem.schema().slots())?);
        }
        if frozen.is_empty() {
            return Ok(problem);
        }
        problem.freeze(&frozen).map_err(|e| CliError::from_variational("ansatz.frozen", e))
    }

    /// Seeded starts plus `extra` explicit points, labelled after the seeded ones.
    fn run(&self, problem: &Problem, extra: Vec<(Origin, &Ansatz)>) -> Result<(MinimizeResult, Vec<Origin>), CliError> {
        let starts = self.options.starts;
        let mut jobs: Vec<(usize, Vec<f64>)> = (0..starts).map(|s| (s, problem.start_point(s))).collect();
        let mut origins = vec![Origin::Seeded; starts];
        for (origin, a) in extra {
            jobs.push((origins.len(), problem.schema().pack(a)));
            origins.push(origin);
        }
        let results = self.pool.install(|| {
            jobs.par_iter().map(|(s, x)| problem.run_from(*s, x)).collect::<Result<Vec<StartResult>, _>>()
        });
        let results = results.map_err(|e| CliError::from_variational("solver", e))?;
        let result = MinimizeResult::aggregate(results, self.options.branch_factor);
        if !result.best().report.total.is_finite() {
            return Err(CliError::Numerical(String::from("no start reached a finite residual norm")));
        }
        Ok((result, origins))
    }

    pub fn solve(&self, warm: &Warm) -> Result<Solved, CliError> {
        let keys = tracked_keys(self.model.spec.space(), self.order);
        let correlated = !self.ansatz.correlation_keys.is_empty();
        let uncorrelated = if correlated && self.nested {
            let problem = self.problem(&keys, Vec::new())?;
            let extra = warm.uncorrelated.iter().map(|a| (Origin::Warm, a)).collect();
            Some(self.run(&problem, extra)?.0)
        } else {
            None
        };
        let problem = self.problem(&keys, self.ansatz.correlation_keys.clone())?;
        let mut extra: Vec<(Origin, &Ansatz)> = warm.main.iter().map(|a| (Origin::Warm, a)).collect();
        if let Some(u) = &uncorrelated {
            extra.push((Origin::Nested, &u.best().ansatz));
        }
        let (main, origins) = self.run(&problem, extra)?;
        Ok(Solved { main, origins, uncorrelated, keys })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub key: Monomial,
    pub value: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub name: String,
    pub intensity: f64,
    pub mean: C64,
    /// `(r, Φ)`; absent when the second moments are unphysical.
    pub squeezing: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub start: usize,
    pub origin: Origin,
    pub d: f64,
    pub intensities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncorrelatedSummary {
    pub d: f64,
    pub modes: Vec<ModeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepValue {
    pub parameter: String,
    pub value: f64,
}

/// One solved point. Wall-clock timing is kept in `timing.json` so records
/// stay byte-identical between runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub config_hash: String,
    pub model: String,
    pub parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepValue>,
    pub order: u32,
    pub weights: WeightScheme,
    pub d: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub start: usize,
    pub origin: Origin,
    pub ansatz: Ansatz,
    pub params: Vec<f64>,
    /// Ansatz expectation of every tracked key.
    pub moments: Vec<MomentValue>,
    /// Equation residuals `F_n` at the optimum.
    pub residuals: Vec<MomentValue>,
    pub modes: Vec<ModeSummary>,
    pub spins: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncorrelated: Option<UncorrelatedSummary>,
    pub branches: Vec<BranchRecord>,
}

pub fn mode_summaries(ansatz: &Ansatz, names: &[String], opts: &MomentOptions) -> Result<Vec<ModeSummary>, CliError> {
    let get = |m: Monomial| ansatz_moment(ansatz, &m, opts).map_err(|e| CliError::from_moment("ansatz", e));
    names
        .iter()
        .enumerate()
        .map(|(mode, name)| {
            let mean = get(Monomial::boson(mode, 0, 1))?;
            let intensity = get(Monomial::boson(mode, 1, 1))?.re;
            let pair = get(Monomial::boson(mode, 0, 2))?;
            Ok(ModeSummary { name: name.clone(), intensity, mean, squeezing: squeezing_of(mean, intensity, pair).ok() })
        })
        .collect()
}

pub struct RecordContext<'a> {
    pub config_hash: &'a str,
    pub model_kind: &'a str,
    pub parameters: serde_json::Value,
    pub sweep: Option<SweepValue>,
    pub order: u32,
    pub options: &'a MinimizeOptions,
    pub mode_names: &'a [String],
}

pub fn record(ctx: RecordContext<'_>, solved: &Solved) -> Result<ResultRecord, CliError> {
    let opts = &ctx.options.moments;
    let best = solved.main.best();
    let moments = solved
        .keys
        .iter()
        .map(|k| {
            let value = ansatz_moment(&best.ansatz, k, opts).map_err(|e| CliError::from_moment("ansatz", e))?;
            Ok(MomentValue { key: k.clone(), value })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let residuals =
        best.report.residuals.iter().map(|(key, value)| MomentValue { key: key.clone(), value: *value }).collect();
    let branches = solved
        .main
        .branches
        .iter()
        .map(|&i| {
            let s = &solved.main.starts[i];
            let intensities = mode_summaries(&s.ansatz, ctx.mode_names, opts)?.into_iter().map(|m| m.intensity).collect();
            Ok(BranchRecord { start: s.start, origin: solved.origin_of(s), d: s.report.total, intensities })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let uncorrelated = match &solved.uncorrelated {
        Some(u) => Some(UncorrelatedSummary {
            d: u.best().report.total,
            modes: mode_summaries(&u.best().ansatz, ctx.mode_names, opts)?,
        }),
        None => None,
    };
    Ok(ResultRecord {
        config_hash: ctx.config_hash.to_owned(),
        model: ctx.model_kind.to_owned(),
        parameters: ctx.parameters,
        sweep: ctx.sweep,
        order: ctx.order,
        weights: ctx.options.weights,
        d: best.report.total,
        converged: best.report.converged,
        evaluations: solved.main.starts.iter().map(|s| s.report.evaluations).sum(),
        start: best.start,
        origin: solved.origin_of(best),
        ansatz: best.ansatz.clone(),
        params: best.params.clone(),
        moments,
        residuals,
        modes: mode_summaries(&best.ansatz, ctx.mode_names, opts)?,
        spins: best.ansatz.spins.iter().map(|s| s.bloch).collect(),
        uncorrelated,
        branches,
    })
}
