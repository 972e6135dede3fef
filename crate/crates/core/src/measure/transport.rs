//! Exact optimal transport between two finite probability vectors.

const EPS: f64 = 1e-14;

/// Minimal cost of moving `supply` onto `demand` with unit costs
/// `cost(i, j)`. Both vectors must have equal total mass; costs must be
/// non-negative.
///
/// Successive shortest paths on the dense bipartite network with Johnson
/// potentials; exact up to floating-point rounding.
pub fn transport_cost(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let n = supply.len();
    let m = demand.len();
    // Node layout: 0 = source, 1..=n supplies, n+1..=n+m demands, n+m+1 = sink.
    let v = n + m + 2;
    let sink = v - 1;
    let mut cap = vec![0.0f64; v * v];
    let mut cst = vec![0.0f64; v * v];
    for (i, &a) in supply.iter().enumerate() {
        cap[i + 1] = a;
    }
    for (j, &b) in demand.iter().enumerate() {
        cap[(n + 1 + j) * v + sink] = b;
    }
    for i in 0..n {
        for j in 0..m {
            let c = cost(i, j);
            let (a, b) = (i + 1, n + 1 + j);
            cap[a * v + b] = f64::INFINITY;
            cst[a * v + b] = c;
            cst[b * v + a] = -c;
        }
    }
    let target: f64 = supply.iter().sum();
    let mut pot = vec![0.0f64; v];
    let mut sent = 0.0;
    let mut total = 0.0;
    let mut dist = vec![f64::INFINITY; v];
    let mut prev = vec![usize::MAX; v];
    let mut done = vec![false; v];
    let max_rounds = 4 * v * v + 16;
    for _ in 0..max_rounds {
        if target - sent <= EPS {
            break;
        }
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        dist[0] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (k, &d) in dist.iter().enumerate() {
                if !done[k] && d < best {
                    best = d;
                    u = k;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for w in 0..v {
                if done[w] || cap[u * v + w] <= EPS {
                    continue;
                }
                let rc = (cst[u * v + w] + pot[u] - pot[w]).max(0.0);
                let nd = best + rc;
                if nd < dist[w] {
                    dist[w] = nd;
                    prev[w] = u;
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let reach = dist[sink];
        for k in 0..v {
            pot[k] += dist[k].min(reach);
        }
        let mut push = target - sent;
        let mut w = sink;
        while w != 0 {
            let u = prev[w];
            push = push.min(cap[u * v + w]);
            w = u;
        }
        let mut w = sink;
        while w != 0 {
            let u = prev[w];
            cap[u * v + w] -= push;
            cap[w * v + u] += push;
            total += push * cst[u * v + w];
            w = u;
        }
        sent += push;
    }
    total
}
