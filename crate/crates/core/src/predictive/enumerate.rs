use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measure::{Point, PointKey};
use crate::processes::{log_add, ModelKind, ProcessModel};

/// Hidden state of a model between latent steps.
#[derive(Clone, Debug)]
enum Latent {
    Iid,
    Urn { black: f64, total: f64 },
    Weights { w: Vec<f64>, step: u64, ln_acc: f64 },
    Triple { k: u64 },
    /// Unresolved `(Y_{i+1}, …, Y_{i+m})`; empty before the first draw.
    Window { ys: Vec<f64> },
}

struct Branch {
    prob: f64,
    next: Latent,
    emit: Vec<Point>,
}

fn initial(model: &ProcessModel) -> Result<Latent> {
    Ok(match &model.kind {
        ModelKind::Iid { .. } => Latent::Iid,
        ModelKind::PolyaUrn { b, r, .. } => Latent::Urn { black: *b, total: b + r },
        ModelKind::RecursivePredictive { initial, .. } | ModelKind::KernelMixture { initial, .. } => {
            Latent::Weights { w: initial.weights.clone(), step: 0, ln_acc: f64::NEG_INFINITY }
        }
        ModelKind::Triple { .. } => Latent::Triple { k: 1 },
        ModelKind::MDependent { .. } => Latent::Window { ys: Vec::new() },
        ModelKind::SinePair {} | ModelKind::Clt { .. } => {
            return Err(Error::Unsupported(format!("{} has a continuous latent layer", model.kind.name())))
        }
    })
}

/// Every latent move from `state` with its probability and emitted coordinates.
fn branches(model: &ProcessModel, state: &Latent) -> Vec<Branch> {
    let scalar = |x: f64| Point::scalar(x);
    match (&model.kind, state) {
        (ModelKind::Iid { base }, _) => base
            .alphabet
            .iter()
            .zip(&base.weights)
            .map(|(x, w)| Branch { prob: *w, next: Latent::Iid, emit: vec![scalar(*x)] })
            .collect(),
        (ModelKind::PolyaUrn { reinforcement, .. }, Latent::Urn { black, total }) => {
            let mut out = Vec::new();
            for r in reinforcement {
                let draw_black = Branch {
                    prob: r.prob * black / total,
                    next: Latent::Urn { black: black + r.black, total: total + r.black },
                    emit: vec![Point::new(&[r.black, r.red, 1.0]).expect("three coordinates")],
                };
                let draw_red = Branch {
                    prob: r.prob * (total - black) / total,
                    next: Latent::Urn { black: *black, total: total + r.red },
                    emit: vec![Point::new(&[r.black, r.red, 0.0]).expect("three coordinates")],
                };
                out.push(draw_black);
                out.push(draw_red);
            }
            out
        }
        (ModelKind::RecursivePredictive { initial, kernels, q }, Latent::Weights { w, step, ln_acc }) => {
            let (qn, cn) = (q.term(*step), q.complement(*step));
            weight_branches(&initial.alphabet, w, kernels[*step as usize % kernels.len()].rows.as_slice(), qn, cn, *step, *ln_acc)
        }
        (ModelKind::KernelMixture { initial, kernels, d }, Latent::Weights { w, step, ln_acc }) => {
            let ln_d = d.ln_term(*step);
            let next = log_add(*ln_acc, ln_d);
            let (qn, cn) = ((ln_acc - next).exp(), (ln_d - next).exp());
            weight_branches(&initial.alphabet, w, kernels[*step as usize % kernels.len()].rows.as_slice(), qn, cn, *step, next)
        }
        (ModelKind::Triple { d }, Latent::Triple { k }) => {
            // A, B independent with P = d; G has probability d − d² inside Aᶜ∩Bᶜ.
            let dk = d.term(*k);
            let g = dk - dk * dk;
            let outcomes = [
                ([1.0, 1.0, 1.0], dk * dk),
                ([1.0, 0.0, 0.0], dk * (1.0 - dk)),
                ([0.0, 1.0, 0.0], (1.0 - dk) * dk),
                ([0.0, 0.0, 1.0], g),
                ([0.0, 0.0, 0.0], (1.0 - dk) * (1.0 - dk) - g),
            ];
            outcomes
                .into_iter()
                .map(|(bits, prob)| Branch { prob, next: Latent::Triple { k: k + 1 }, emit: bits.iter().map(|b| scalar(*b)).collect() })
                .collect()
        }
        (ModelKind::MDependent { m, base }, Latent::Window { ys }) => {
            if ys.is_empty() {
                // Draw Y₁, …, Y_m without emitting anything.
                let mut windows: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
                for _ in 0..*m {
                    windows = windows
                        .into_iter()
                        .flat_map(|(w, p)| {
                            base.alphabet.iter().zip(&base.weights).map(move |(y, q)| {
                                let mut v = w.clone();
                                v.push(*y);
                                (v, p * q)
                            })
                        })
                        .collect();
                }
                windows.into_iter().map(|(ys, prob)| Branch { prob, next: Latent::Window { ys }, emit: Vec::new() }).collect()
            } else {
                base.alphabet
                    .iter()
                    .zip(&base.weights)
                    .map(|(y, q)| {
                        let mut next = ys[1..].to_vec();
                        next.push(*y);
                        Branch { prob: *q, next: Latent::Window { ys: next }, emit: vec![scalar(ys[0] - y)] }
                    })
                    .collect()
            }
        }
        _ => unreachable!("latent state matches model"),
    }
}

fn weight_branches(alphabet: &[f64], w: &[f64], rows: &[Vec<f64>], q: f64, c: f64, step: u64, ln_acc: f64) -> Vec<Branch> {
    alphabet
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let next: Vec<f64> = w.iter().zip(&rows[i]).map(|(wj, kj)| q * wj + c * kj).collect();
            Branch { prob: w[i], next: Latent::Weights { w: next, step: step + 1, ln_acc }, emit: vec![Point::scalar(*x)] }
        })
        .collect()
}

/// Sums accumulated over latent paths.
#[derive(Clone, Copy, Debug, Default)]
pub struct Conditional {
    /// `P(X₁..X_v = prefix)`.
    pub mass: f64,
    /// `E{g(X_{t+1}); X₁..X_v = prefix}`.
    pub weighted: f64,
}

impl Conditional {
    pub fn value(&self) -> Result<f64> {
        if self.mass > 0.0 {
            Ok(self.weighted / self.mass)
        } else {
            Err(Error::NullConditioning("prefix has probability 0".into()))
        }
    }
}

fn check_budget(target: usize, budget: usize) -> Result<()> {
    if target > budget {
        return Err(Error::BudgetExceeded(format!("conditioning reaches coordinate {} beyond the budget of {budget}", target + 1)));
    }
    Ok(())
}

/// `E{g(X_{target+1}) | X₁..X_v = prefix}` as raw sums over latent
/// completions of `prefix`, where `v = prefix.len() ≤ target`.
pub fn condition<G: Fn(&Point) -> f64>(model: &ProcessModel, prefix: &[Point], target: usize, g: &G, budget: usize) -> Result<Conditional> {
    if target < prefix.len() {
        return Err(Error::InvalidArgument("target precedes the end of the prefix".into()));
    }
    check_budget(target, budget)?;
    for x in prefix {
        if !model.space.contains(x) {
            return Err(Error::Domain(format!("{x} is not in {}", model.space.describe())));
        }
    }
    let mut acc = Conditional { mass: if prefix.is_empty() { 1.0 } else { 0.0 }, weighted: 0.0 };
    dfs(model, &initial(model)?, 0, 1.0, prefix, target, g, &mut acc);
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn dfs<G: Fn(&Point) -> f64>(model: &ProcessModel, state: &Latent, pos: usize, prob: f64, prefix: &[Point], target: usize, g: &G, acc: &mut Conditional) {
    'branch: for b in branches(model, state) {
        let p = prob * b.prob;
        if p <= 0.0 {
            continue;
        }
        for (i, x) in b.emit.iter().enumerate() {
            let idx = pos + i;
            if idx < prefix.len() {
                if *x != prefix[idx] {
                    continue 'branch;
                }
                if idx + 1 == prefix.len() {
                    acc.mass += p;
                }
            }
            if idx == target {
                acc.weighted += p * g(x);
                continue 'branch;
            }
        }
        dfs(model, &b.next, pos + b.emit.len(), p, prefix, target, g, acc);
    }
}

/// One row of [`prefix_table`].
#[derive(Clone, Debug)]
pub struct PrefixRow {
    pub prefix: Vec<Point>,
    pub prob: f64,
    /// `E{g(X_{target+1}) | prefix}`.
    pub value: f64,
}

/// Every positive-probability prefix of length `v` with the conditional
/// expectation of `g(X_{target+1})`, in lexicographic order.
pub fn prefix_table<G: Fn(&Point) -> f64>(model: &ProcessModel, v: usize, target: usize, g: &G, budget: usize) -> Result<Vec<PrefixRow>> {
    if target < v {
        return Err(Error::InvalidArgument("target precedes the end of the prefix".into()));
    }
    check_budget(target, budget)?;
    let mut table: BTreeMap<Vec<PointKey>, (Vec<Point>, Conditional)> = BTreeMap::new();
    if v == 0 {
        table.insert(Vec::new(), (Vec::new(), Conditional { mass: 1.0, weighted: 0.0 }));
    }
    let mut seen = Vec::with_capacity(target + 1);
    walk(model, &initial(model)?, 1.0, v, target, g, &mut seen, &mut table);
    Ok(table
        .into_values()
        .filter(|(_, c)| c.mass > 0.0)
        .map(|(prefix, c)| PrefixRow { prefix, prob: c.mass, value: c.weighted / c.mass })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn walk<G: Fn(&Point) -> f64>(
    model: &ProcessModel,
    state: &Latent,
    prob: f64,
    v: usize,
    target: usize,
    g: &G,
    seen: &mut Vec<Point>,
    table: &mut BTreeMap<Vec<PointKey>, (Vec<Point>, Conditional)>,
) {
    for b in branches(model, state) {
        let p = prob * b.prob;
        if p <= 0.0 {
            continue;
        }
        let mark = seen.len();
        let mut done = false;
        for x in &b.emit {
            let idx = seen.len();
            seen.push(*x);
            if idx + 1 == v {
                let key: Vec<PointKey> = seen.iter().map(Point::key).collect();
                table.entry(key).or_insert_with(|| (seen.clone(), Conditional::default())).1.mass += p;
            }
            if idx == target {
                let key: Vec<PointKey> = seen[..v].iter().map(Point::key).collect();
                table.get_mut(&key).expect("prefix recorded").1.weighted += p * g(x);
                done = true;
                break;
            }
        }
        if !done {
            walk(model, &b.next, p, v, target, g, seen, table);
        }
        seen.truncate(mark);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{StateSpace, TestFunction};
    use crate::processes::*;

    #[test]
    fn m_dependent_enumeration_examples() {
        let m = m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap();
        let id = |x: &Point| x.x();
        let one = condition(&m, &[Point::scalar(1.0)], 1, &id, 14).unwrap();
        assert_eq!(one.value().unwrap(), -0.5);
        assert_eq!(one.mass, 0.25);
        let zero = condition(&m, &[Point::scalar(0.0)], 1, &id, 14).unwrap();
        assert_eq!(zero.value().unwrap(), 0.0);
        let null = condition(&m, &[Point::scalar(1.0), Point::scalar(1.0)], 2, &id, 14).unwrap();
        assert!(null.value().is_err());
    }

    #[test]
    fn budget_and_support_errors() {
        let m = m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap();
        assert!(matches!(condition(&m, &[], 15, &|x: &Point| x.x(), 14), Err(Error::BudgetExceeded(_))));
        assert!(matches!(condition(&sine_pair_model(), &[], 1, &|x: &Point| x.x(), 14), Err(Error::Unsupported(_))));
    }

    #[test]
    fn prefix_table_masses_sum_to_one() {
        let m = triple_model(SequenceSpec::Constant { value: 0.25 }).unwrap();
        let f = TestFunction::singleton(&StateSpace::binary(), 1.0);
        let rows = prefix_table(&m, 5, 5, &|x: &Point| f.eval_raw(x), 14).unwrap();
        let total: f64 = rows.iter().map(|r| r.prob).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // P(C = 1) = P(A∩B) + P(G) = 0.0625 + 0.1875.
        let c = prefix_table(&m, 0, 2, &|x: &Point| f.eval_raw(x), 14).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].value - 0.25).abs() < 1e-15);
    }
}
