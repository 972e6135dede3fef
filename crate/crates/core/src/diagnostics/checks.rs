use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{tag, Condition, ConvergenceCurve, DiagnosticVerdict, Thresholds};
use crate::error::{invalid, Error, Result};
use crate::measure::{bl_distance, empirical_measure, DiscreteMeasure, Point, StateSpace, TestFunction};
use crate::predictive::{
    batch_mean, pairwise_sum, per_path, predictive_second_moment, prefix_table, sub_filtration_second_moment, sub_filtration_tracked,
    Estimate, MomentMode, Predictor, Prepared, ENUMERATION_BUDGET,
};
use crate::processes::innovation::gaussian_expect;
use crate::processes::{lagged_filtration_model, sample_path, Innovation, LagSpec, LaggedModel, ModelKind, PathSample, ProcessModel};
use crate::quad::{integrate, normal_pdf};
use crate::seed::{derive_seed, rng_from_seed, stream_tag};

const MC: &str = "monte_carlo";
const EXACT: &str = "enumeration";

/// Path count and master seed of a Monte Carlo check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub paths: usize,
    pub seed: u64,
}

impl MonteCarlo {
    /// Seed of path `i`. Every check shares this stream, so checks on one
    /// scenario see the same paths.
    pub fn path_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, i as u64, stream_tag("path"))
    }

    fn aux_rng(&self, label: &str, i: usize) -> ChaCha8Rng {
        rng_from_seed(derive_seed(self.seed, i as u64, stream_tag(label)))
    }

    fn validate(&self, t: &Thresholds) -> Result<()> {
        t.validate()?;
        if self.paths < t.batches {
            return invalid(format!("{} paths cannot fill {} batches", self.paths, t.batches));
        }
        Ok(())
    }

    pub fn moment_mode(&self, t: &Thresholds) -> MomentMode {
        MomentMode::MonteCarlo { paths: self.paths, seed: self.seed, batches: t.batches }
    }
}

fn check_grid(grid: &[u64], min: u64) -> Result<Vec<usize>> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("grid must be non-empty and strictly increasing");
    }
    if grid[0] < min {
        return invalid(format!("grid indices must be at least {min}"));
    }
    Ok(grid.iter().map(|&n| n as usize).collect())
}

fn over_paths<T: Send, J>(model: &ProcessModel, mc: &MonteCarlo, len: usize, job: J) -> Result<Vec<T>>
where
    J: Fn(usize, &PathSample) -> Result<T> + Sync,
{
    per_path(mc.paths, |i| {
        let path = sample_path(model, len.max(1), mc.path_seed(i))?;
        job(i, &path)
    })
}

/// Calls `probe` with the predictor at time `n` for each `n` in the
/// ascending list `at`.
fn probe_along<T>(model: &ProcessModel, path: &PathSample, at: &[usize], mut probe: impl FnMut(&Predictor, usize) -> Result<T>) -> Result<Vec<T>> {
    let mut p = Predictor::new(model)?;
    let mut out = Vec::with_capacity(at.len());
    let mut j = 0;
    for n in 0..=at.last().copied().unwrap_or(0) {
        while j < at.len() && at[j] == n {
            out.push(probe(&p, n)?);
            j += 1;
        }
        if j < at.len() {
            p.observe_sampled(&path.values[n]);
        }
    }
    Ok(out)
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

/// Column-wise means with batch standard errors.
fn column_means(rows: &[Vec<f64>], width: usize, batches: usize) -> (Vec<f64>, Vec<f64>) {
    (0..width).map(|j| batch_mean(&column(rows, j), batches)).map(|e| (e.value, e.stderr)).unzip()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of `xs` with a standard error from batch medians.
pub fn batch_median(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    let b = batches.min(n).max(1);
    let value = median(xs);
    if b < 2 {
        return Estimate { value, stderr: 0.0 };
    }
    let meds: Vec<f64> = (0..b).map(|i| median(&xs[i * n / b..(i + 1) * n / b])).collect();
    let mm = pairwise_sum(&meds) / b as f64;
    let var = meds.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / (b - 1) as f64;
    Estimate { value, stderr: (var / b as f64).sqrt() }
}

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

fn curve(f_id: &str, statistic: &str, grid: &[u64], (values, stderr): (Vec<f64>, Vec<f64>), method: &str) -> Result<ConvergenceCurve> {
    ConvergenceCurve::new(f_id, statistic, grid.to_vec(), values, stderr, method)
}

fn check_function(model: &ProcessModel, f: &TestFunction) -> Result<()> {
    model.space.ensure_same(&f.space)
}

/// `P(|α_{2n}(f) − αₙ(f)| > ε)` over `n` in `grid`.
pub fn cauchy_in_probability(model: &ProcessModel, f: &TestFunction, grid: &[u64], mc: &MonteCarlo, t: &Thresholds) -> Result<DiagnosticVerdict> {
    mc.validate(t)?;
    check_function(model, f)?;
    let ns = check_grid(grid, 0)?;
    let mut at: Vec<usize> = ns.iter().flat_map(|&n| [n, 2 * n]).collect();
    at.sort_unstable();
    at.dedup();
    let rows = over_paths(model, mc, 2 * ns[ns.len() - 1], |_, path| {
        let pf = Prepared::new(model, f);
        let alpha = probe_along(model, path, &at, |p, _| Ok(p.predictive_prepared(&pf)))?;
        let at_n = |n: usize| alpha[at.binary_search(&n).expect("probed index")];
        Ok(ns.iter().map(|&n| flag((at_n(2 * n) - at_n(n)).abs() > t.epsilon)).collect::<Vec<_>>())
    })?;
    let c = curve(&f.id, tag::P_EXCEED, grid, column_means(&rows, ns.len(), t.batches), MC)?;
    Ok(DiagnosticVerdict::judge(Condition::Star, &f.id, vec![c], t))
}

/// Fraction of paths with `sup_{n ≤ k ≤ 3n} |α_k(f) − α_N(f)| > δ`.
pub fn as_convergence_check(model: &ProcessModel, f: &TestFunction, grid: &[u64], horizon: u64, mc: &MonteCarlo, t: &Thresholds) -> Result<DiagnosticVerdict> {
    mc.validate(t)?;
    check_function(model, f)?;
    let ns = check_grid(grid, 1)?;
    let horizon = horizon as usize;
    if horizon < 3 * ns[ns.len() - 1] {
        return invalid(format!("horizon {horizon} is shorter than three times the last grid index"));
    }
    let first = ns[0];
    let at: Vec<usize> = (first..=3 * ns[ns.len() - 1]).chain(std::iter::once(horizon)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let rows = over_paths(model, mc, horizon, |_, path| {
        let pf = Prepared::new(model, f);
        let alpha = probe_along(model, path, &at, |p, _| Ok(p.predictive_prepared(&pf)))?;
        let end = alpha[alpha.len() - 1];
        Ok(ns
            .iter()
            .map(|&n| {
                let sup = alpha[n - first..=3 * n - first].iter().map(|a| (a - end).abs()).fold(0.0, f64::max);
                flag(sup > t.delta)
            })
            .collect::<Vec<_>>())
    })?;
    let c = curve(&f.id, tag::EXCURSION, grid, column_means(&rows, ns.len(), t.batches), MC)?;
    Ok(DiagnosticVerdict::judge(Condition::As, &f.id, vec![c], t))
}

/// Partial sums `Σ_{n ≤ N} E|E{f(X_{n+2}) − f(X_{n+1}) | Fₙ}|` at each `N`
/// in `grid`.
pub fn quasi_martingale_sum(model: &ProcessModel, f: &TestFunction, grid: &[u64], mode: MomentMode) -> Result<ConvergenceCurve> {
    check_function(model, f)?;
    let ns = check_grid(grid, 0)?;
    let last = ns[ns.len() - 1];
    match mode {
        MomentMode::Exact => {
            if last + 2 > ENUMERATION_BUDGET {
                return Err(Error::BudgetExceeded(format!("exact partial sums need {} coordinates, budget is {ENUMERATION_BUDGET}", last + 2)));
            }
            let g = |x: &Point| f.eval_raw(x);
            let mut terms = Vec::with_capacity(last + 1);
            for n in 0..=last {
                let one = prefix_table(model, n, n, &g, ENUMERATION_BUDGET)?;
                let two = prefix_table(model, n, n + 1, &g, ENUMERATION_BUDGET)?;
                let parts: Vec<f64> = one.iter().zip(&two).map(|(a, b)| a.prob * (b.value - a.value).abs()).collect();
                terms.push(pairwise_sum(&parts));
            }
            let sums: Vec<f64> = ns.iter().map(|&n| pairwise_sum(&terms[..=n])).collect();
            curve(&f.id, tag::PARTIAL_SUM, grid, (sums, vec![0.0; ns.len()]), EXACT)
        }
        MomentMode::MonteCarlo { paths, seed, batches } => {
            let mc = MonteCarlo { paths, seed };
            let all: Vec<usize> = (0..=last).collect();
            let rows = over_paths(model, &mc, last, |_, path| {
                let pf = Prepared::new(model, f);
                let inc = probe_along(model, path, &all, |p, _| Ok(p.increment_prepared(&pf)?.abs()))?;
                let mut acc = 0.0;
                let mut cum = Vec::with_capacity(inc.len());
                for v in inc {
                    acc += v;
                    cum.push(acc);
                }
                Ok(ns.iter().map(|&n| cum[n]).collect::<Vec<_>>())
            })?;
            curve(&f.id, tag::PARTIAL_SUM, grid, column_means(&rows, ns.len(), batches), MC)
        }
    }
}

/// Median over paths of `|μₙ(f) − (1/n)Σ_{i ≤ n} α_{i−1}(f)|` and of
/// `|μₙ(f) − αₙ(f)|`.
pub fn wlln_residual(model: &ProcessModel, f: &TestFunction, grid: &[u64], mc: &MonteCarlo, t: &Thresholds) -> Result<Vec<ConvergenceCurve>> {
    mc.validate(t)?;
    check_function(model, f)?;
    let ns = check_grid(grid, 1)?;
    let last = ns[ns.len() - 1];
    let rows = over_paths(model, mc, last, |_, path| {
        let pf = Prepared::new(model, f);
        let mut p = Predictor::new(model)?;
        let (mut sum_alpha, mut sum_f) = (0.0, 0.0);
        let mut out = Vec::with_capacity(2 * ns.len());
        let mut j = 0;
        for n in 1..=last {
            sum_alpha += p.predictive_prepared(&pf);
            let x = &path.values[n - 1];
            sum_f += f.eval_raw(x);
            p.observe_sampled(x);
            if ns[j] == n {
                let mu = sum_f / n as f64;
                out.push((mu - sum_alpha / n as f64).abs());
                out.push((mu - p.predictive_prepared(&pf)).abs());
                j += 1;
            }
        }
        Ok(out)
    })?;
    let med = |off: usize| -> (Vec<f64>, Vec<f64>) {
        (0..ns.len()).map(|j| batch_median(&column(&rows, 2 * j + off), t.batches)).map(|e| (e.value, e.stderr)).unzip()
    };
    Ok(vec![curve(&f.id, tag::MEDIAN_RESIDUAL, grid, med(0), MC)?, curve(&f.id, tag::MEDIAN_GAP, grid, med(1), MC)?])
}

/// Cauchy-in-probability check on the empirical means `μₙ(f)` across
/// `(n, 2n)`, plus the Monte Carlo mean of `μₙ(f)`.
pub fn lagged_wlln_check(lagged: &LaggedModel, f: &TestFunction, grid: &[u64], mc: &MonteCarlo, t: &Thresholds) -> Result<DiagnosticVerdict> {
    lagged.lag.validate()?;
    mc.validate(t)?;
    let model = &lagged.inner;
    check_function(model, f)?;
    let ns = check_grid(grid, 1)?;
    let rows = over_paths(model, mc, 2 * ns[ns.len() - 1], |_, path| {
        let mut cum = Vec::with_capacity(path.len() + 1);
        cum.push(0.0);
        for x in &path.values {
            cum.push(cum[cum.len() - 1] + f.eval_raw(x));
        }
        let mu = |n: usize| cum[n] / n as f64;
        let mut out: Vec<f64> = ns.iter().map(|&n| flag((mu(2 * n) - mu(n)).abs() > t.epsilon)).collect();
        out.extend(ns.iter().map(|&n| mu(n)));
        Ok(out)
    })?;
    let k = ns.len();
    let (p, pse) = column_means(&rows, 2 * k, t.batches);
    let exceed = curve(&f.id, tag::P_EXCEED, grid, (p[..k].to_vec(), pse[..k].to_vec()), MC)?;
    let mean = curve(&f.id, tag::MEAN, grid, (p[k..].to_vec(), pse[k..].to_vec()), MC)?;
    Ok(DiagnosticVerdict::judge(Condition::LaggedWlln, &f.id, vec![exceed, mean], t))
}

/// Registered limit of the block law `(X_{n+1}, …, X_{n+k})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitLaw {
    /// Independent uniforms on `[0, 1]`.
    IidUniform,
    /// `(W, …, W)` with `W` standard normal.
    Diagonal,
}

/// Atoms per axis used to discretise a registered limit law.
const LIMIT_NODES: [usize; 4] = [1024, 32, 16, 8];

fn limit_measure(law: LimitLaw, space: &StateSpace, k: usize) -> Result<DiscreteMeasure> {
    match law {
        LimitLaw::IidUniform => {
            let m = LIMIT_NODES[k - 1];
            let total = m.pow(k as u32);
            let atoms = (0..total)
                .map(|mut code| {
                    let mut xs = [0.0; 4];
                    for x in xs.iter_mut().take(k) {
                        *x = ((code % m) as f64 + 0.5) / m as f64;
                        code /= m;
                    }
                    Point::new(&xs[..k])
                })
                .collect::<Result<Vec<_>>>()?;
            DiscreteMeasure::uniform_on(space, atoms)
        }
        LimitLaw::Diagonal => {
            let m = LIMIT_NODES[0];
            let (lo, hi) = (-6.0, 6.0);
            let h = (hi - lo) / m as f64;
            let nodes: Vec<f64> = (0..m).map(|j| lo + h * (j as f64 + 0.5)).collect();
            let raw: Vec<f64> = nodes.iter().map(|&w| normal_pdf(w)).collect();
            let total = pairwise_sum(&raw);
            let atoms = nodes.iter().map(|&w| Point::new(&vec![w; k])).collect::<Result<Vec<_>>>()?;
            DiscreteMeasure::new(space.clone(), atoms, raw.iter().map(|w| w / total).collect())
        }
    }
}

/// Options of [`asymptotic_exchangeability_stat`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    /// Block length `k`, at most 4.
    pub k: usize,
    /// Coordinate of a product-valued process to project onto.
    pub coordinate: Option<usize>,
    pub limit: Option<LimitLaw>,
}

/// BL distance between the empirical law of the block
/// `(X_{n+1}, …, X_{n+k})` and that of a random permutation of it, its
/// noise floor (two independent permutations), their difference, and the
/// distance to a registered limit.
pub fn asymptotic_exchangeability_stat(model: &ProcessModel, starts: &[u64], block: &BlockSpec, mc: &MonteCarlo, t: &Thresholds) -> Result<Vec<ConvergenceCurve>> {
    mc.validate(t)?;
    let k = block.k;
    if !(2..=4).contains(&k) {
        return invalid(format!("block length must be between 2 and 4, got {k}"));
    }
    let ns = check_grid(starts, 0)?;
    let comp = match block.coordinate {
        Some(c) if c < model.space.dim() && model.space.dim() > 1 => model.space.component(c).clone(),
        Some(c) => return invalid(format!("coordinate {c} is not a component of {}", model.space.describe())),
        None if model.space.dim() == 1 => model.space.clone(),
        None => return invalid("product-valued processes need a projection coordinate"),
    };
    let space = StateSpace::power(&comp, k)?;
    let coord = block.coordinate.unwrap_or(0);
    let width = ns.len();
    // Per path and start: the block and two independent permutations of it.
    let samples = over_paths(model, mc, ns[width - 1] + k, |i, path| {
        let mut rng = mc.aux_rng("permutation", i);
        let mut out = Vec::with_capacity(width);
        for &n in &ns {
            let xs: Vec<f64> = path.values[n..n + k].iter().map(|p| p[coord]).collect();
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(&mut rng);
            let a: Vec<f64> = perm.iter().map(|&j| xs[j]).collect();
            perm.shuffle(&mut rng);
            let b: Vec<f64> = perm.iter().map(|&j| xs[j]).collect();
            out.push([Point::new(&xs)?, Point::new(&a)?, Point::new(&b)?]);
        }
        Ok(out)
    })?;
    let limit = block.limit.map(|law| limit_measure(law, &space, k)).transpose()?;
    let paths = samples.len();
    let b = t.batches;
    let mut cols: [Vec<f64>; 4] = Default::default();
    let mut errs: [Vec<f64>; 4] = Default::default();
    for j in 0..width {
        let stats = |range: std::ops::Range<usize>| -> Result<[f64; 4]> {
            let pick = |s: usize| samples[range.clone()].iter().map(|row| row[j][s]).collect::<Vec<_>>();
            let p = empirical_measure(&space, &pick(0))?;
            let q = empirical_measure(&space, &pick(1))?;
            let q2 = empirical_measure(&space, &pick(2))?;
            let stat = bl_distance(&p, &q)?;
            let floor = bl_distance(&q, &q2)?;
            let lim = match &limit {
                Some(l) => bl_distance(&p, l)?,
                None => 0.0,
            };
            Ok([stat, floor, stat - floor, lim])
        };
        let full = stats(0..paths)?;
        let parts = (0..b).map(|i| stats(i * paths / b..(i + 1) * paths / b)).collect::<Result<Vec<_>>>()?;
        for s in 0..4 {
            let xs: Vec<f64> = parts.iter().map(|p| p[s]).collect();
            cols[s].push(full[s]);
            errs[s].push(batch_mean(&xs, b).stderr);
        }
    }
    let id = BLOCK_ID;
    let tags = [tag::STATISTIC, tag::FLOOR, tag::EXCESS, tag::LIMIT_DISTANCE];
    let used = if limit.is_some() { 4 } else { 3 };
    (0..used).map(|s| curve(id, tags[s], starts, (cols[s].clone(), errs[s].clone()), MC)).collect()
}

/// A cylinder event `{X_{index+1} ∈ B}` with a registered limit
/// `E{1_H α(f)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub id: String,
    /// Zero-based coordinate the event looks at.
    pub index: usize,
    /// Indicator of `B` on the model's space.
    pub event: TestFunction,
    pub target: f64,
}

/// Smallest Monte Carlo probability accepted for a conditioning event.
pub const MIN_EVENT_PROBABILITY: f64 = 0.01;

/// `|Ê{1_H f(Xₙ)} − target|` for each cylinder `H`.
pub fn stable_convergence_check(model: &ProcessModel, f: &TestFunction, events: &[Cylinder], grid: &[u64], mc: &MonteCarlo, t: &Thresholds) -> Result<DiagnosticVerdict> {
    mc.validate(t)?;
    check_function(model, f)?;
    if events.is_empty() {
        return invalid("no conditioning events");
    }
    let ns = check_grid(grid, 1)?;
    let last = ns[ns.len() - 1];
    let len = last.max(events.iter().map(|h| h.index + 1).max().unwrap_or(1));
    let rows = over_paths(model, mc, len, |_, path| {
        let mut out = Vec::with_capacity(events.len() * (ns.len() + 1));
        for h in events {
            let hit = flag(h.event.eval_raw(&path.values[h.index]) > 0.5);
            out.push(hit);
            out.extend(ns.iter().map(|&n| hit * f.eval_raw(&path.values[n - 1])));
        }
        Ok(out)
    })?;
    let stride = ns.len() + 1;
    let mut evidence = Vec::with_capacity(events.len());
    for (e, h) in events.iter().enumerate() {
        let p = batch_mean(&column(&rows, e * stride), t.batches).value;
        if p < MIN_EVENT_PROBABILITY {
            return invalid(format!("event {} has probability {p:.4} below {MIN_EVENT_PROBABILITY}", h.id));
        }
        let (v, s): (Vec<f64>, Vec<f64>) = (0..ns.len())
            .map(|j| batch_mean(&column(&rows, e * stride + 1 + j), t.batches))
            .map(|est| ((est.value - h.target).abs(), est.stderr))
            .unzip();
        evidence.push(curve(&f.id, &format!("{}:{}", tag::ABS_ERROR, h.id), grid, (v, s), MC)?);
    }
    Ok(DiagnosticVerdict::judge(Condition::Stable, &f.id, evidence, t))
}

/// `lim E{1_{Z₁ > 0} g(Xₙ)}` evaluated at `n` for the standard Gaussian
/// CLT model, where `Xₙ = Z₁/√n + √((n−1)/n)·W` with `W` independent.
pub fn clt_positive_start_moment(g: &TestFunction, n: u64) -> f64 {
    let n = n.max(1) as f64;
    let (a, s) = (1.0 / n.sqrt(), ((n - 1.0) / n).sqrt());
    integrate(|z| normal_pdf(z) * gaussian_expect(g, a * z, s), 0.0, 8.5, 1e-10)
}

/// Which second-moment identity a scenario exercises.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentCheck {
    /// `E{αₙ(f)²}` tends to a registered `E{α(f)²}`.
    Target { value: f64 },
    /// `E{αₙ(f)²} − E{f(Xₙ)}²` tends to zero.
    Degenerate,
    /// `E{αₙ(f)²} − E{βₙ(f)²}` tends to zero.
    SubFiltration,
    /// `E{αₙ(f)² − μₙ(f)²}` tends to zero.
    EmpiricalGap,
}

/// Curves of `E{αₙ(f)²}`, `E{μₙ(f)²}`, `E{f(Xₙ)}²`, `E{βₙ(f)²}` (when a lag
/// is given) and the gap named by `check`.
pub fn second_moment_track(
    model: &ProcessModel,
    lag: Option<&LagSpec>,
    f: &TestFunction,
    grid: &[u64],
    mode: MomentMode,
    check: &MomentCheck,
) -> Result<Vec<ConvergenceCurve>> {
    check_function(model, f)?;
    let ns = check_grid(grid, 1)?;
    let lagged = lag.map(|g| lagged_filtration_model(model.clone(), g.clone())).transpose()?;
    if *check == MomentCheck::SubFiltration && lagged.is_none() {
        return invalid("the sub-filtration gap needs a lag");
    }
    let exact = mode == MomentMode::Exact;
    let method = if exact { EXACT } else { MC };
    // Columns per grid point: α², μ², f(Xₙ), β², paired gap.
    let (means, ses) = match mode {
        MomentMode::Exact => exact_moments(model, lagged.as_ref(), f, &ns, check)?,
        MomentMode::MonteCarlo { paths, seed, batches } => {
            let mc = MonteCarlo { paths, seed };
            let rows = over_paths(model, &mc, ns[ns.len() - 1], |_, path| {
                let pf = Prepared::new(model, f);
                let at: Vec<usize> = ns.to_vec();
                let mut sum_f = 0.0;
                let mut prev = 0;
                let mut out = Vec::with_capacity(5 * ns.len());
                let alphas = probe_along(model, path, &at, |p, _| Ok(p.predictive_prepared(&pf)))?;
                for (j, &n) in ns.iter().enumerate() {
                    sum_f += path.values[prev..n].iter().map(|x| f.eval_raw(x)).sum::<f64>();
                    prev = n;
                    let a2 = alphas[j].powi(2);
                    let mu2 = (sum_f / n as f64).powi(2);
                    let fx = f.eval_raw(&path.values[n - 1]);
                    let b2 = match &lagged {
                        Some(l) => sub_filtration_tracked(l, &path.values, n, f)?.powi(2),
                        None => 0.0,
                    };
                    let gap = match check {
                        MomentCheck::Target { value } => a2 - value,
                        MomentCheck::SubFiltration => a2 - b2,
                        MomentCheck::EmpiricalGap => a2 - mu2,
                        MomentCheck::Degenerate => 0.0,
                    };
                    out.extend([a2, mu2, fx, b2, gap]);
                }
                Ok(out)
            })?;
            column_means(&rows, 5 * ns.len(), batches)
        }
    };
    let pick = |c: usize| -> (Vec<f64>, Vec<f64>) { (0..ns.len()).map(|j| (means[5 * j + c], ses[5 * j + c])).unzip() };
    let (fm, fse) = pick(2);
    let mean_sq: (Vec<f64>, Vec<f64>) = (fm.iter().map(|m| m * m).collect(), fm.iter().zip(&fse).map(|(m, s)| 2.0 * m.abs() * s).collect());
    let gap = if *check == MomentCheck::Degenerate {
        let (a, ase) = pick(0);
        let v = a.iter().zip(&mean_sq.0).map(|(x, y)| x - y).collect();
        let s = ase.iter().zip(&mean_sq.1).map(|(x, y)| x.hypot(*y)).collect();
        (v, s)
    } else {
        pick(4)
    };
    let mut out = vec![
        curve(&f.id, tag::ALPHA_SQ, grid, pick(0), method)?,
        curve(&f.id, tag::MU_SQ, grid, pick(1), method)?,
        curve(&f.id, tag::MEAN_F_SQ, grid, mean_sq, method)?,
    ];
    if lagged.is_some() {
        out.push(curve(&f.id, tag::BETA_SQ, grid, pick(3), method)?);
    }
    out.push(curve(&f.id, tag::GAP, grid, gap, method)?);
    Ok(out)
}

fn exact_moments(model: &ProcessModel, lagged: Option<&LaggedModel>, f: &TestFunction, ns: &[usize], check: &MomentCheck) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = |x: &Point| f.eval_raw(x);
    let mut means = Vec::with_capacity(5 * ns.len());
    for &n in ns {
        let a2 = predictive_second_moment(model, n, f, MomentMode::Exact)?.value;
        let rows = prefix_table(model, n, n, &g, ENUMERATION_BUDGET)?;
        let terms: Vec<f64> = rows
            .iter()
            .map(|r| {
                let mu = r.prefix.iter().map(&g).sum::<f64>() / n as f64;
                r.prob * mu * mu
            })
            .collect();
        let mu2 = pairwise_sum(&terms);
        let fx = prefix_table(model, 0, n - 1, &g, ENUMERATION_BUDGET)?[0].value;
        let b2 = match lagged {
            Some(l) => sub_filtration_second_moment(l, n, f, MomentMode::Exact)?.value,
            None => 0.0,
        };
        let gap = match check {
            MomentCheck::Target { value } => a2 - value,
            MomentCheck::SubFiltration => a2 - b2,
            MomentCheck::EmpiricalGap => a2 - mu2,
            MomentCheck::Degenerate => 0.0,
        };
        means.extend([a2, mu2, fx, b2, gap]);
    }
    let zeros = vec![0.0; means.len()];
    Ok((means, zeros))
}

/// `P(Xₙ ∈ B)` for each indicator in `sets`.
pub fn marginal_limit_check(model: &ProcessModel, sets: &[TestFunction], grid: &[u64], mc: &MonteCarlo, t: &Thresholds) -> Result<DiagnosticVerdict> {
    mc.validate(t)?;
    if sets.is_empty() {
        return invalid("no sets to track");
    }
    for s in sets {
        check_function(model, s)?;
    }
    let ns = check_grid(grid, 1)?;
    let rows = over_paths(model, mc, ns[ns.len() - 1], |_, path| {
        Ok(sets.iter().flat_map(|s| ns.iter().map(|&n| s.eval_raw(&path.values[n - 1]))).collect::<Vec<_>>())
    })?;
    let (m, se) = column_means(&rows, sets.len() * ns.len(), t.batches);
    let k = ns.len();
    let evidence = sets
        .iter()
        .enumerate()
        .map(|(i, s)| curve(MARGINAL_ID, &format!("{}:{}", tag::PROB, s.id), grid, (m[i * k..(i + 1) * k].to_vec(), se[i * k..(i + 1) * k].to_vec()), MC))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticVerdict::judge(Condition::Marginal, MARGINAL_ID, evidence, t))
}

/// Identifier of marginal verdicts and their curves.
pub const MARGINAL_ID: &str = "marginal";

/// Identifier of block-law curves.
pub const BLOCK_ID: &str = "block";

/// The limit vector `λ(B)` reported by a marginal verdict, keyed by set id.
pub fn marginal_limits(v: &DiagnosticVerdict) -> Vec<(String, f64)> {
    let prefix = format!("{}:", tag::PROB);
    v.evidence
        .iter()
        .filter_map(|c| Some((c.statistic.strip_prefix(&prefix)?.to_string(), c.values[c.values.len() - 1])))
        .collect()
}

/// `P(|E{f(X_{n+2}) − f(X_{n+1}) | Fₙ}| > ε)`. For the CLT model also the
/// curves `E|αₙ(g) − g(Xₙ)|`, its bound `c(E|Xₙ| + E|Z₁|)/√(n+1)` and their
/// difference.
pub fn necessary_increment_check(model: &ProcessModel, f: &TestFunction, grid: &[u64], mc: &MonteCarlo, t: &Thresholds) -> Result<DiagnosticVerdict> {
    mc.validate(t)?;
    check_function(model, f)?;
    let ns = check_grid(grid, 1)?;
    let clt = match &model.kind {
        ModelKind::Clt { innovation } => Some(innovation),
        _ => None,
    };
    let rows = over_paths(model, mc, ns[ns.len() - 1], |_, path| {
        let pf = Prepared::new(model, f);
        let probes = probe_along(model, path, &ns, |p, n| {
            let inc = p.increment_prepared(&pf)?;
            let alpha = p.predictive_prepared(&pf);
            let x = &path.values[n - 1];
            Ok([flag(inc.abs() > t.epsilon), (alpha - f.eval_raw(x)).abs(), x.x().abs()])
        })?;
        Ok(probes.concat())
    })?;
    let k = ns.len();
    let (m, se) = column_means(&rows, 3 * k, t.batches);
    let col = |c: usize| -> (Vec<f64>, Vec<f64>) { (0..k).map(|j| (m[3 * j + c], se[3 * j + c])).unzip() };
    let mut evidence = vec![curve(&f.id, tag::P_EXCEED, grid, col(0), MC)?];
    if let Some(innovation) = clt {
        let c = f.lipschitz.ok_or_else(|| Error::Unsupported(format!("{} has no Lipschitz constant", f.id)))?;
        let abs_x: Vec<f64> = match innovation {
            Innovation::Gaussian { sd, .. } => vec![sd * crate::processes::innovation::half_normal_mean(); k],
            _ => col(2).0,
        };
        let ez = innovation.mean_abs();
        let bound: Vec<f64> = ns.iter().zip(&abs_x).map(|(&n, ax)| c * (ax + ez) / ((n + 1) as f64).sqrt()).collect();
        let (res, res_se) = col(1);
        let gap: Vec<f64> = res.iter().zip(&bound).map(|(r, b)| r - b).collect();
        evidence.push(curve(&f.id, "abs_residual", grid, (res, res_se.clone()), MC)?);
        evidence.push(curve(&f.id, "bound", grid, (bound, vec![0.0; k]), "closed_form")?);
        evidence.push(curve(&f.id, tag::BOUND_GAP, grid, (gap, res_se), MC)?);
    }
    Ok(DiagnosticVerdict::judge(Condition::Increment, &f.id, evidence, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{suite_function, PointSet, TestFunction};
    use crate::processes::*;

    fn mc(paths: usize) -> MonteCarlo {
        MonteCarlo { paths, seed: 7 }
    }

    fn bin() -> Categorical {
        Categorical::uniform(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn iid_predictive_is_cauchy() {
        let m = iid_model(bin()).unwrap();
        let f = TestFunction::singleton(&m.space, 1.0);
        let v = cauchy_in_probability(&m, &f, &[4, 8, 16], &mc(60), &Thresholds::default()).unwrap();
        assert_eq!(v.decision, Decision::Converges);
        assert!(v.evidence[0].values.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn deterministic_model_has_no_excursions() {
        let m = iid_model(Categorical::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()).unwrap();
        let f = TestFunction::singleton(&m.space, 1.0);
        let v = as_convergence_check(&m, &f, &[4, 8], 24, &mc(30), &Thresholds::default()).unwrap();
        assert_eq!(v.decision, Decision::Converges);
        assert!(as_convergence_check(&m, &f, &[4, 8], 20, &mc(30), &Thresholds::default()).is_err());
    }

    #[test]
    fn exact_partial_sums_match_monte_carlo() {
        let k = KernelSpec { rows: vec![vec![0.3, 0.7], vec![0.6, 0.4]] };
        let q = SequenceSpec::OneMinus { inner: Box::new(SequenceSpec::Geometric { scale: 0.5, ratio: 0.5 }) };
        let m = recursive_predictive_model(bin(), q, vec![k]).unwrap();
        let f = TestFunction::singleton(&m.space, 1.0);
        let exact = quasi_martingale_sum(&m, &f, &[2, 4, 8], MomentMode::Exact).unwrap();
        let sim = quasi_martingale_sum(&m, &f, &[2, 4, 8], MomentMode::MonteCarlo { paths: 3000, seed: 1, batches: 30 }).unwrap();
        for j in 0..3 {
            assert!((exact.values[j] - sim.values[j]).abs() <= 4.0 * sim.stderr[j] + 1e-12, "{j}");
        }
        assert!(exact.values[2] <= 2.0);
        let c = iid_model(bin()).unwrap();
        let z = quasi_martingale_sum(&c, &f, &[3, 6], MomentMode::Exact).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
        assert!(quasi_martingale_sum(&c, &f, &[13], MomentMode::Exact).is_err());
    }

    /// Brute-force posterior `P(Y_{n+1} = 1 | X₁, …, Xₙ)` for the binary
    /// 1-dependent model, as `(probability of the X-prefix, posterior)`.
    fn posterior_table(n: usize) -> Vec<(f64, f64)> {
        let mut groups: std::collections::BTreeMap<Vec<i8>, (f64, f64)> = Default::default();
        let w = 0.5f64.powi(n as i32 + 1);
        for bits in 0u32..1 << (n + 1) {
            let y: Vec<i8> = (0..=n).map(|i| ((bits >> i) & 1) as i8).collect();
            let x: Vec<i8> = (0..n).map(|i| y[i] - y[i + 1]).collect();
            let e = groups.entry(x).or_default();
            e.0 += w;
            e.1 += w * f64::from(y[n]);
        }
        groups.into_values().map(|(mass, one)| (mass, one / mass)).collect()
    }

    #[test]
    fn m_dependent_partial_sums_match_posterior_oracle() {
        let m = m_dependent_model(1, bin()).unwrap();
        let f = TestFunction::identity(&m.space).unwrap();
        let grid = [4u64, 8, 12];
        let c = quasi_martingale_sum(&m, &f, &grid, MomentMode::Exact).unwrap();
        // The increment is E{X_{n+2} | Fₙ} − αₙ = 1/2 − P(Y_{n+1} = 1 | Fₙ).
        let term = |n: usize| -> f64 {
            if n == 0 {
                return 0.0;
            }
            posterior_table(n).iter().map(|(w, p)| w * (0.5 - p).abs()).sum()
        };
        for (j, &g) in grid.iter().enumerate() {
            let want: f64 = (0..=g as usize).map(term).sum();
            assert!((c.values[j] - want).abs() < 1e-10, "{g}");
        }
        assert!(term(12) > 0.1);
    }

    #[test]
    fn batch_median_of_constant() {
        let e = batch_median(&[2.0; 60], 30);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 4.0]), 2.5);
    }

    #[test]
    fn exchangeable_blocks_sit_at_floor() {
        let m = classical_polya(1.0, 1.0).unwrap();
        let spec = BlockSpec { k: 2, coordinate: Some(URN_Y), limit: None };
        let c = asymptotic_exchangeability_stat(&m, &[4, 16], &spec, &mc(600), &Thresholds::default()).unwrap();
        assert_eq!(c.len(), 3);
        let excess = &c[2];
        assert!(excess.values[1].abs() <= 3.0 * excess.stderr[1] + 0.01);
        let bad = BlockSpec { k: 5, coordinate: Some(URN_Y), limit: None };
        assert!(asymptotic_exchangeability_stat(&m, &[4], &bad, &mc(60), &Thresholds::default()).is_err());
        let flat = BlockSpec { k: 2, coordinate: None, limit: None };
        assert!(asymptotic_exchangeability_stat(&m, &[4], &flat, &mc(60), &Thresholds::default()).is_err());
    }

    #[test]
    fn limit_measures_are_probability_measures() {
        let sq = StateSpace::power(&StateSpace::UnitInterval, 2).unwrap();
        let u = limit_measure(LimitLaw::IidUniform, &sq, 2).unwrap();
        assert_eq!(u.len(), 1024);
        let r2 = StateSpace::power(&StateSpace::RealLine, 2).unwrap();
        let d = limit_measure(LimitLaw::Diagonal, &r2, 2).unwrap();
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stable_check_rejects_rare_events() {
        let m = iid_model(Categorical::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap()).unwrap();
        let f = TestFunction::singleton(&m.space, 1.0);
        let h = Cylinder { id: "x1".into(), index: 0, event: TestFunction::singleton(&m.space, 1.0), target: 0.0 };
        assert!(stable_convergence_check(&m, &f, &[h], &[2, 4], &mc(60), &Thresholds::default()).is_err());
    }

    #[test]
    fn whole_space_event_is_marginal_mean() {
        let m = iid_model(bin()).unwrap();
        let f = TestFunction::singleton(&m.space, 1.0);
        let all = TestFunction::indicator(&m.space, PointSet::Values(vec![0.0, 1.0]));
        let h = Cylinder { id: "omega".into(), index: 0, event: all, target: 0.5 };
        let v = stable_convergence_check(&m, &f, &[h], &[8, 16], &mc(3000), &Thresholds::default()).unwrap();
        assert_eq!(v.decision, Decision::Converges);
    }

    #[test]
    fn clt_cylinder_moment_vanishes_for_odd_function() {
        let g = TestFunction::clamp_linear(&StateSpace::RealLine, -1.0, 1.0).unwrap();
        // At n = 1, X₁ = Z₁: E{1_{Z>0} clamp(Z)} = ∫₀¹ zφ + P(Z > 1).
        let direct = integrate(|z| z * normal_pdf(z), 0.0, 1.0, 1e-13) + 1.0 - crate::quad::normal_cdf(1.0);
        assert!((clt_positive_start_moment(&g, 1) - direct).abs() < 1e-8);
        assert!(clt_positive_start_moment(&g, 1_000_000).abs() < 1e-3);
    }

    #[test]
    fn polya_second_moment_exact_curve() {
        let m = classical_polya(1.0, 1.0).unwrap();
        let f = TestFunction::on_coordinate(&m.space, URN_Y, TestFunction::singleton(&StateSpace::binary(), 1.0)).unwrap();
        let c = second_moment_track(&m, None, &f, &[2, 6, 10], MomentMode::Exact, &MomentCheck::Target { value: 1.0 / 3.0 }).unwrap();
        for (j, n) in [2.0, 6.0, 10.0].iter().enumerate() {
            assert!((c[0].values[j] - (2.0 * n + 3.0) / (6.0 * (n + 2.0))).abs() < 1e-12);
            assert!((c[2].values[j] - 0.25).abs() < 1e-12);
        }
        let gap = c.last().unwrap();
        assert!((gap.values[2] + 1.0 / 72.0).abs() < 1e-12);
    }

    #[test]
    fn m_dependent_sub_filtration_gap_persists() {
        let m = m_dependent_model(1, bin()).unwrap();
        let f = TestFunction::identity(&m.space).unwrap();
        let c = second_moment_track(&m, Some(&LagSpec::Constant { m: 1 }), &f, &[4, 8, 12], MomentMode::Exact, &MomentCheck::SubFiltration).unwrap();
        let gap = c.last().unwrap();
        // αₙ(id) = P(Y_{n+1} = 1 | Fₙ) − 1/2 and βₙ(id) = 0.
        for (j, n) in [4, 8, 12].into_iter().enumerate() {
            let want: f64 = posterior_table(n).iter().map(|(w, p)| w * (p - 0.5).powi(2)).sum();
            assert!((gap.values[j] - want).abs() < 1e-12, "{n}");
            assert!(want > 0.05);
        }
        assert_eq!(c.iter().find(|c| c.statistic == tag::BETA_SQ).unwrap().values, vec![0.0; 3]);
    }

    #[test]
    fn marginals_of_identically_distributed_model() {
        let m = m_dependent_model(1, bin()).unwrap();
        let sets: Vec<TestFunction> = standard_test_suite_indicators(&m.space);
        let v = marginal_limit_check(&m, &sets, &[4, 8, 16], &mc(3000), &Thresholds::default()).unwrap();
        assert_eq!(v.decision, Decision::Converges);
        let lim = marginal_limits(&v);
        let zero = lim.iter().find(|(id, _)| id == "ind{0}").unwrap().1;
        assert!((zero - 0.5).abs() < 0.05);
    }

    fn standard_test_suite_indicators(space: &StateSpace) -> Vec<TestFunction> {
        crate::measure::standard_test_suite(space).into_iter().filter(|f| f.id.starts_with("ind")).collect()
    }

    #[test]
    fn cid_increments_vanish() {
        let m = classical_polya(1.0, 1.0).unwrap();
        let f = suite_function(&m.space, "c2:ind{1}").unwrap();
        let v = necessary_increment_check(&m, &f, &[2, 4, 8], &mc(60), &Thresholds::default()).unwrap();
        assert_eq!(v.decision, Decision::Converges);
        assert_eq!(v.evidence.len(), 1);
    }

    #[test]
    fn wlln_residual_shrinks_for_iid() {
        let m = iid_model(bin()).unwrap();
        let f = TestFunction::singleton(&m.space, 1.0);
        let c = wlln_residual(&m, &f, &[16, 256, 4096], &mc(300), &Thresholds::default()).unwrap();
        let r = &c[0].values;
        assert!(r[2] < r[0] && r[2] < 0.02);
    }

    use super::super::Decision;
}
