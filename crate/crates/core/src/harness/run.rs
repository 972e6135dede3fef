use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::registry::{find_scenario, Check, Scenario};
use super::ExperimentConfig;
use crate::diagnostics::*;
use crate::error::{Error, Result};
use crate::measure::{standard_test_suite, suite_function, Point, TestFunction};
use crate::predictive::{enumerate_predictive, PredictiveValue};
use crate::processes::{lagged_filtration_model, LagSpec, ProcessModel};

/// One verdict of a run, with the decision the scenario predicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub condition: Condition,
    pub f_id: String,
    /// Absent when the diagnostic failed with `error`.
    pub decision: Option<Decision>,
    pub expected: Option<Decision>,
    pub error: Option<String>,
    pub evidence: Vec<ConvergenceCurve>,
}

impl VerdictRecord {
    /// Informational verdicts always match.
    pub fn matches(&self) -> bool {
        match self.expected {
            None => true,
            Some(e) => self.decision == Some(e),
        }
    }

    pub fn decision_str(&self) -> &'static str {
        self.decision.map_or("error", Decision::as_str)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub tool: String,
    pub version: String,
    /// The configuration with every default filled in.
    pub config: ExperimentConfig,
    pub model: ProcessModel,
    pub citation: String,
    pub verdicts: Vec<VerdictRecord>,
    pub hierarchy_violations: Vec<String>,
    pub passed: bool,
    pub wall_clock_seconds: f64,
}

impl ResultRecord {
    pub fn scenario(&self) -> &str {
        self.config.scenario.as_deref().unwrap_or("")
    }
}

/// Fill defaults from the scenario and apply overrides.
fn resolve(cfg: &ExperimentConfig) -> Result<(ExperimentConfig, Scenario, ProcessModel)> {
    cfg.validate()?;
    let id = cfg.scenario.as_deref().ok_or_else(|| Error::Config("no scenario given".into()))?;
    let mut sc = find_scenario(id)?;
    let mut out = cfg.clone();
    let kind = match &cfg.model {
        Some(k) if k.name() != sc.model.name() => {
            return Err(Error::Config(format!("scenario {id} needs a {} model, got {}", sc.model.name(), k.name())));
        }
        Some(k) => k.clone(),
        None => sc.model.clone(),
    };
    let model = ProcessModel::new(id, kind.clone()).map_err(|e| Error::Config(e.to_string()))?;
    out.model = Some(kind);
    if cfg.lag.is_some() {
        if sc.lag.is_none() {
            return Err(Error::Config(format!("scenario {id} has no sub-filtration")));
        }
        sc.lag = cfg.lag.clone();
    }
    out.lag = sc.lag.clone();
    out.paths = Some(cfg.paths.unwrap_or(sc.default_paths));
    if let Some(g) = &cfg.grid {
        for e in sc.battery.iter_mut().filter(|e| !e.check.is_exact()) {
            *e.check.grid_mut() = g.clone();
        }
    }
    out.validate()?;
    Ok((out, sc, model))
}

/// Run `cfg` in a pool of `threads` workers, or the global pool.
pub fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ResultRecord> {
    match threads {
        None => run_scenario(cfg),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| run_scenario(cfg))
        }
    }
}

/// Execute a scenario's battery. Diagnostic failures are recorded per
/// verdict; configuration errors abort.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let start = Instant::now();
    let (resolved, sc, model) = resolve(cfg)?;
    let t = &resolved.thresholds;
    let mc = MonteCarlo { paths: resolved.paths.expect("resolved"), seed: resolved.seed };
    let mut verdicts = Vec::with_capacity(sc.battery.len());
    for entry in &sc.battery {
        let expected = entry.expected(&model.truth);
        let condition = entry.check.condition();
        let rec = match run_check(&model, sc.lag.as_ref(), &entry.check, &mc, t) {
            Ok(v) => VerdictRecord { condition, f_id: v.f_id, decision: Some(v.decision), expected, error: None, evidence: v.evidence },
            Err(e) => VerdictRecord { condition, f_id: check_id(&entry.check), decision: None, expected, error: Some(e.to_string()), evidence: Vec::new() },
        };
        verdicts.push(rec);
    }
    let keys: Vec<VerdictKey> = verdicts
        .iter()
        .filter_map(|v| Some(VerdictKey { scenario: sc.id.clone(), condition: v.condition, f_id: v.f_id.clone(), decision: v.decision? }))
        .collect();
    let hierarchy = hierarchy_violations(&keys);
    let passed = verdicts.iter().all(VerdictRecord::matches) && hierarchy.is_empty();
    Ok(ResultRecord {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: resolved,
        model,
        citation: sc.citation,
        verdicts,
        hierarchy_violations: hierarchy,
        passed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn check_id(check: &Check) -> String {
    match check {
        Check::Cauchy { f, .. }
        | Check::AlmostSure { f, .. }
        | Check::QuasiMartingale { f, .. }
        | Check::Wlln { f, .. }
        | Check::LaggedWlln { f, .. }
        | Check::Stable { f, .. }
        | Check::SecondMoment { f, .. }
        | Check::Increment { f, .. } => f.clone(),
        Check::Marginal { .. } => MARGINAL_ID.into(),
        Check::Exchangeability { .. } => BLOCK_ID.into(),
    }
}

fn run_check(model: &ProcessModel, lag: Option<&LagSpec>, check: &Check, mc: &MonteCarlo, t: &Thresholds) -> Result<DiagnosticVerdict> {
    let func = |id: &str| suite_function(&model.space, id);
    let mode = |exact: bool| if exact { crate::predictive::MomentMode::Exact } else { mc.moment_mode(t) };
    match check {
        Check::Cauchy { f, grid } => cauchy_in_probability(model, &func(f)?, grid, mc, t),
        Check::AlmostSure { f, grid } => {
            let horizon = 3 * grid.last().copied().unwrap_or(1);
            as_convergence_check(model, &func(f)?, grid, horizon, mc, t)
        }
        Check::QuasiMartingale { f, grid, exact } => {
            let c = quasi_martingale_sum(model, &func(f)?, grid, mode(*exact))?;
            Ok(DiagnosticVerdict::judge(Condition::Qmc, f, vec![c], t))
        }
        Check::Wlln { f, grid } => Ok(DiagnosticVerdict::judge(Condition::Wlln, f, wlln_residual(model, &func(f)?, grid, mc, t)?, t)),
        Check::LaggedWlln { f, grid } => {
            let g = lag.ok_or_else(|| Error::Config("lagged check without a lag".into()))?;
            let lagged = lagged_filtration_model(model.clone(), g.clone())?;
            lagged_wlln_check(&lagged, &func(f)?, grid, mc, t)
        }
        Check::Exchangeability { grid, block } => {
            let curves = asymptotic_exchangeability_stat(model, grid, block, mc, t)?;
            Ok(DiagnosticVerdict::judge(Condition::AsympExch, BLOCK_ID, curves, t))
        }
        Check::Stable { f, grid, events } => {
            let cyl = events
                .iter()
                .map(|e| Ok(Cylinder { id: e.id.clone(), index: e.index, event: e.set.resolve(&model.space)?, target: e.target }))
                .collect::<Result<Vec<_>>>()?;
            stable_convergence_check(model, &func(f)?, &cyl, grid, mc, t)
        }
        Check::SecondMoment { f, grid, exact, moment } => {
            let curves = second_moment_track(model, lag, &func(f)?, grid, mode(*exact), moment)?;
            Ok(DiagnosticVerdict::judge(Condition::SecondMoment, f, curves, t))
        }
        Check::Marginal { sets, grid } => {
            let fs = sets.iter().map(|s| s.resolve(&model.space)).collect::<Result<Vec<_>>>()?;
            marginal_limit_check(model, &fs, grid, mc, t)
        }
        Check::Increment { f, grid } => necessary_increment_check(model, &func(f)?, grid, mc, t),
    }
}

/// Parse a prefix: points separated by `,`, coordinates of product points
/// by `:`.
pub fn parse_prefix(model: &ProcessModel, text: &str) -> Result<Vec<Point>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|p| {
            let xs = p
                .split(':')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad coordinate '{x}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let pt = Point::new(&xs)?;
            if !model.space.contains(&pt) {
                return Err(Error::Domain(format!("{pt} is not in {}", model.space.describe())));
            }
            Ok(pt)
        })
        .collect()
}

/// Exact `αₙ(f)` after `prefix` for the scenario's default model, for one
/// function or the whole standard suite.
pub fn oracle(scenario: &str, prefix: &str, f: Option<&str>) -> Result<Vec<PredictiveValue>> {
    let sc = find_scenario(scenario)?;
    let model = ProcessModel::new(sc.id, sc.model)?;
    let pts = parse_prefix(&model, prefix)?;
    let fs: Vec<TestFunction> = match f {
        Some(id) => vec![suite_function(&model.space, id)?],
        None => standard_test_suite(&model.space),
    };
    fs.iter().map(|f| enumerate_predictive(&model, &pts, f)).collect()
}
