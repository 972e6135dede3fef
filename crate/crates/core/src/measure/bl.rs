//! Bounded Lipschitz distance
//! `sup { |p(f) − q(f)| : ‖f‖∞ ≤ 1, Lip(f) ≤ 1 }`.
//!
//! On scalar spaces the supremum is a linear program over the values of `f`
//! at the sorted union of atoms: maximise `Σ cᵢ fᵢ` subject to `|fᵢ| ≤ 1`
//! and `|fᵢ₊₁ − fᵢ| ≤ xᵢ₊₁ − xᵢ`, with `c = p − q`. Any feasible vector
//! extends to an admissible function by linear interpolation, so the
//! program is exact. It is solved by dynamic programming over concave
//! piecewise-linear value functions.
//!
//! On product spaces the Lipschitz class is taken with respect to the ℓ1
//! metric, and the distance equals the optimal transport cost under the
//! truncated metric `min(ℓ1, 2)`, computed exactly.
//!
//! Large continuous atom sets are first projected onto a grid; the
//! resolution used is reported in [`BlOutcome`].

use std::collections::BTreeMap;

use super::discrete::DiscreteMeasure;
use super::function::REAL_WINDOW;
use super::space::{Point, StateSpace};
use super::transport::transport_cost;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct BlOptions {
    /// Scalar atom count above which continuous spaces are gridded.
    pub exact_atoms_1d: usize,
    /// Grid points used for gridded scalar spaces.
    pub grid_1d: usize,
    /// Distinct atom count above which continuous product coordinates are
    /// binned.
    pub exact_atoms_product: usize,
    /// Target number of cells across the continuous coordinates of a
    /// product space.
    pub cell_budget: usize,
}

impl Default for BlOptions {
    fn default() -> Self {
        BlOptions { exact_atoms_1d: 1 << 10, grid_1d: 1 << 10, exact_atoms_product: 256, cell_budget: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Resolution {
    Exact,
    /// Scalar grid with the given spacing.
    Grid1d { spacing: f64 },
    /// Continuous product coordinates binned into this many cells each.
    Cells { per_axis: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlOutcome {
    pub value: f64,
    pub resolution: Resolution,
}

/// Bounded Lipschitz distance with default options.
pub fn bl_distance(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64> {
    Ok(bl_distance_with(p, q, &BlOptions::default())?.value)
}

pub fn bl_distance_with(p: &DiscreteMeasure, q: &DiscreteMeasure, opts: &BlOptions) -> Result<BlOutcome> {
    p.space().ensure_same(q.space())?;
    let space = p.space();
    let out = if space.dim() == 1 {
        scalar_distance(space, p, q, opts)
    } else {
        product_distance(space, p, q, opts)
    };
    Ok(BlOutcome { value: out.value.clamp(0.0, 2.0), resolution: out.resolution })
}

fn scalar_distance(space: &StateSpace, p: &DiscreteMeasure, q: &DiscreteMeasure, opts: &BlOptions) -> BlOutcome {
    let mut net: BTreeMap<_, (f64, f64)> = BTreeMap::new();
    for (a, w) in p.atoms().iter().zip(p.weights()) {
        net.entry(a.key()).or_insert((a.x(), 0.0)).1 += w;
    }
    for (a, w) in q.atoms().iter().zip(q.weights()) {
        net.entry(a.key()).or_insert((a.x(), 0.0)).1 -= w;
    }
    let mut pts: Vec<(f64, f64)> = net.into_values().collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut resolution = Resolution::Exact;
    if pts.len() > opts.exact_atoms_1d && !space.is_finite() {
        let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
        let g = opts.grid_1d.max(2);
        let spacing = (hi - lo) / (g - 1) as f64;
        let mut cells = vec![0.0; g];
        for (x, c) in &pts {
            let k = (((x - lo) / spacing).round() as usize).min(g - 1);
            cells[k] += c;
        }
        pts = cells.into_iter().enumerate().map(|(k, c)| (lo + spacing * k as f64, c)).collect();
        resolution = Resolution::Grid1d { spacing };
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let cs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    BlOutcome { value: chain_lp(&xs, &cs), resolution }
}

/// `max Σ cᵢ fᵢ` over `|fᵢ| ≤ 1`, `|fᵢ₊₁ − fᵢ| ≤ xᵢ₊₁ − xᵢ`, for sorted `xs`.
pub fn chain_lp(xs: &[f64], cs: &[f64]) -> f64 {
    if cs.is_empty() {
        return 0.0;
    }
    // Value function V(y) on [-1, 1], concave and piecewise linear.
    let mut bx = vec![-1.0, 1.0];
    let mut bv = vec![-cs[0], cs[0]];
    for i in 1..cs.len() {
        window_max(&mut bx, &mut bv, xs[i] - xs[i - 1]);
        for (x, v) in bx.iter().zip(bv.iter_mut()) {
            *v += cs[i] * x;
        }
    }
    bv.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Replace `V` by `y ↦ max { V(z) : |z − y| ≤ g, |z| ≤ 1 }`.
fn window_max(bx: &mut Vec<f64>, bv: &mut Vec<f64>, g: f64) {
    let k = bv
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > bv[best] { i } else { best });
    if g >= 2.0 {
        let top = bv[k];
        *bx = vec![-1.0, 1.0];
        *bv = vec![top, top];
        return;
    }
    let mut nx = Vec::with_capacity(bx.len() + 1);
    let mut nv = Vec::with_capacity(bx.len() + 1);
    for j in 0..=k {
        nx.push(bx[j] - g);
        nv.push(bv[j]);
    }
    nx.push(bx[k] + g);
    nv.push(bv[k]);
    for j in (k + 1)..bx.len() {
        nx.push(bx[j] + g);
        nv.push(bv[j]);
    }
    let at = |t: f64| -> f64 {
        let i = nx.partition_point(|x| *x < t).clamp(1, nx.len() - 1);
        let (x0, x1) = (nx[i - 1], nx[i]);
        if x1 <= x0 {
            return nv[i].max(nv[i - 1]);
        }
        nv[i - 1] + (nv[i] - nv[i - 1]) * (t - x0) / (x1 - x0)
    };
    let left = at(-1.0);
    let right = at(1.0);
    bx.clear();
    bv.clear();
    bx.push(-1.0);
    bv.push(left);
    for (x, v) in nx.iter().zip(&nv) {
        if *x > -1.0 && *x < 1.0 && *x > *bx.last().expect("non-empty") {
            bx.push(*x);
            bv.push(*v);
        }
    }
    bx.push(1.0);
    bv.push(right);
}

fn product_distance(space: &StateSpace, p: &DiscreteMeasure, q: &DiscreteMeasure, opts: &BlOptions) -> BlOutcome {
    let mut union: BTreeMap<_, ()> = BTreeMap::new();
    for a in p.atoms().iter().chain(q.atoms()) {
        union.insert(a.key(), ());
    }
    let continuous = (0..space.dim()).filter(|&i| !space.component(i).is_finite()).count();
    let mut resolution = Resolution::Exact;
    let mut project: Box<dyn Fn(&Point) -> Point> = Box::new(|a| *a);
    if union.len() > opts.exact_atoms_product && continuous > 0 {
        let per_axis = ((opts.cell_budget as f64).powf(1.0 / continuous as f64).floor() as usize).max(2);
        resolution = Resolution::Cells { per_axis };
        let space = space.clone();
        project = Box::new(move |a| bin_point(&space, a, per_axis));
    }
    let collapse = |m: &DiscreteMeasure| -> Vec<(Point, f64)> {
        let mut acc: BTreeMap<_, (Point, f64)> = BTreeMap::new();
        for (a, w) in m.atoms().iter().zip(m.weights()) {
            let b = project(a);
            acc.entry(b.key()).or_insert((b, 0.0)).1 += w;
        }
        acc.into_values().collect()
    };
    let pa = collapse(p);
    let qa = collapse(q);
    // Shared mass stays in place at zero cost; transport only the excess.
    let mut net: BTreeMap<_, (Point, f64)> = BTreeMap::new();
    for (a, w) in &pa {
        net.entry(a.key()).or_insert((*a, 0.0)).1 += w;
    }
    for (a, w) in &qa {
        net.entry(a.key()).or_insert((*a, 0.0)).1 -= w;
    }
    let mut sup = Vec::new();
    let mut dem = Vec::new();
    for (a, w) in net.into_values() {
        if w > 0.0 {
            sup.push((a, w));
        } else if w < 0.0 {
            dem.push((a, -w));
        }
    }
    if sup.is_empty() || dem.is_empty() {
        return BlOutcome { value: 0.0, resolution };
    }
    let s: Vec<f64> = sup.iter().map(|x| x.1).collect();
    let mut d: Vec<f64> = dem.iter().map(|x| x.1).collect();
    // Balance rounding so both sides carry identical mass.
    let (ts, td): (f64, f64) = (s.iter().sum(), d.iter().sum());
    if td > 0.0 {
        for x in d.iter_mut() {
            *x *= ts / td;
        }
    }
    let value = transport_cost(&s, &d, |i, j| sup[i].0.l1(&dem[j].0).min(2.0));
    BlOutcome { value, resolution }
}

/// Map continuous coordinates to the centre of their cell; finite
/// coordinates are kept. The real line is binned over the standard window
/// with the outer cells absorbing the tails.
fn bin_point(space: &StateSpace, a: &Point, per_axis: usize) -> Point {
    let mut c = [0.0; super::space::MAX_DIM];
    for i in 0..a.dim() {
        let x = a[i];
        c[i] = match space.component(i) {
            StateSpace::UnitInterval => cell_center(x, 0.0, 1.0, per_axis),
            StateSpace::RealLine => cell_center(x, REAL_WINDOW.0, REAL_WINDOW.1, per_axis),
            _ => x,
        };
    }
    Point::new(&c[..a.dim()]).expect("same dimension")
}

fn cell_center(x: f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let w = (hi - lo) / cells as f64;
    let k = (((x - lo) / w).floor().max(0.0) as usize).min(cells - 1);
    lo + w * (k as f64 + 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::discrete::empirical_measure;

    fn dirac(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(StateSpace::RealLine, Point::scalar(x)).unwrap()
    }

    /// Oracle for two point masses: the two-point program gives min(2, |x−y|).
    #[test]
    fn point_masses() {
        assert_eq!(bl_distance(&dirac(0.0), &dirac(0.0)).unwrap(), 0.0);
        assert!((bl_distance(&dirac(0.0), &dirac(1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((bl_distance(&dirac(0.0), &dirac(3.0)).unwrap() - 2.0).abs() < 1e-15);
        assert!((bl_distance(&dirac(-0.25), &dirac(0.5)).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn space_mismatch_is_an_error() {
        let u = DiscreteMeasure::dirac(StateSpace::UnitInterval, Point::scalar(0.5)).unwrap();
        assert!(bl_distance(&u, &dirac(0.5)).is_err());
    }

    /// Brute-force the LP over a fine lattice of f-values for three atoms.
    #[test]
    fn chain_lp_matches_lattice_search() {
        let xs = [0.0, 0.3, 1.1];
        let cs = [0.5, -0.8, 0.3];
        let steps = 200;
        let vals: Vec<f64> = (0..=steps).map(|i| -1.0 + 2.0 * i as f64 / steps as f64).collect();
        let mut best = f64::NEG_INFINITY;
        for &a in &vals {
            for &b in &vals {
                if (b - a).abs() > 0.3 + 1e-12 {
                    continue;
                }
                for &c in &vals {
                    if (c - b).abs() > 0.8 + 1e-12 {
                        continue;
                    }
                    best = best.max(cs[0] * a + cs[1] * b + cs[2] * c);
                }
            }
        }
        let dp = chain_lp(&xs, &cs);
        // Lattice spacing 0.01 on a grid that contains the optimum vertex.
        assert!((dp - best).abs() < 1e-9, "{dp} vs {best}");
    }

    #[test]
    fn scalar_agrees_with_truncated_transport() {
        let s = StateSpace::RealLine;
        let a: Vec<Point> = [-0.5, 0.1, 0.4, 2.5, 3.0].iter().map(|&x| Point::scalar(x)).collect();
        let p = DiscreteMeasure::new(s.clone(), a.clone(), vec![0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        let q = DiscreteMeasure::new(s, a.clone(), vec![0.3, 0.05, 0.05, 0.4, 0.2]).unwrap();
        let dp = bl_distance(&p, &q).unwrap();
        let ot = transport_cost(p.weights(), q.weights(), |i, j| a[i].l1(&a[j]).min(2.0));
        assert!((dp - ot).abs() < 1e-12, "{dp} vs {ot}");
    }

    #[test]
    fn product_point_masses_use_l1() {
        let s = StateSpace::product(vec![StateSpace::UnitInterval, StateSpace::UnitInterval]).unwrap();
        let p = DiscreteMeasure::dirac(s.clone(), Point::new(&[0.0, 0.0]).unwrap()).unwrap();
        let q = DiscreteMeasure::dirac(s, Point::new(&[0.25, 0.5]).unwrap()).unwrap();
        assert!((bl_distance(&p, &q).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn large_samples_are_gridded_and_report_it() {
        let s = StateSpace::UnitInterval;
        let xs: Vec<Point> = (0..3000).map(|i| Point::scalar((i as f64 * 0.618_034) % 1.0)).collect();
        let ys: Vec<Point> = (0..3000).map(|i| Point::scalar((i as f64 * 0.414_214) % 1.0)).collect();
        let p = empirical_measure(&s, &xs).unwrap();
        let q = empirical_measure(&s, &ys).unwrap();
        let out = bl_distance_with(&p, &q, &BlOptions::default()).unwrap();
        assert!(matches!(out.resolution, Resolution::Grid1d { .. }));
        assert!(out.value < 0.01);
    }
}
