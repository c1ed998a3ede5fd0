//! Exact balanced transportation problem on small supports.
//!
//! Supplies and demands are integers, so successive shortest augmenting
//! paths on the residual bipartite graph terminate with an optimal integral
//! plan. Paths are found with Bellman-Ford because reverse arcs carry
//! negative costs and the supports are tiny (a question has a few dozen
//! content words at most).

/// Minimum of `Σ flow[i][j] · cost[i][j]` subject to row sums `supply` and
/// column sums `demand`. Returns the optimal cost and plan.
///
/// Panics if the totals differ or `cost` is not `supply.len() × demand.len()`.
pub fn solve(supply: &[u64], demand: &[u64], cost: &[Vec<f64>]) -> (f64, Vec<Vec<u64>>) {
    let (n, m) = (supply.len(), demand.len());
    assert_eq!(
        supply.iter().sum::<u64>(),
        demand.iter().sum::<u64>(),
        "unbalanced transport problem"
    );
    assert!(cost.len() == n && cost.iter().all(|row| row.len() == m));

    let mut flow = vec![vec![0u64; m]; n];
    let mut rest_supply = supply.to_vec();
    let mut rest_demand = demand.to_vec();

    #[derive(Clone, Copy)]
    enum Pred {
        None,
        Source,
        // A demand node reached from supply `i`, or a supply node reached
        // backwards from demand `j`.
        Supply(usize),
        Demand(usize),
    }

    let scale = cost
        .iter()
        .flatten()
        .fold(1.0f64, |acc, &c| acc.max(c.abs()));
    let eps = 1e-12 * scale;

    let mut dist_s = vec![f64::INFINITY; n];
    let mut dist_d = vec![f64::INFINITY; m];
    let mut pred_s = vec![Pred::None; n];
    let mut pred_d = vec![Pred::None; m];

    while rest_supply.iter().any(|&s| s > 0) {
        dist_s.fill(f64::INFINITY);
        dist_d.fill(f64::INFINITY);
        pred_s.fill(Pred::None);
        pred_d.fill(Pred::None);
        for i in 0..n {
            if rest_supply[i] > 0 {
                dist_s[i] = 0.0;
                pred_s[i] = Pred::Source;
            }
        }
        for _ in 0..=(n + m) {
            let mut changed = false;
            for i in 0..n {
                if dist_s[i].is_infinite() {
                    continue;
                }
                for j in 0..m {
                    let d = dist_s[i] + cost[i][j];
                    if d < dist_d[j] - eps {
                        dist_d[j] = d;
                        pred_d[j] = Pred::Supply(i);
                        changed = true;
                    }
                }
            }
            for j in 0..m {
                if dist_d[j].is_infinite() {
                    continue;
                }
                for i in 0..n {
                    if flow[i][j] > 0 {
                        let d = dist_d[j] - cost[i][j];
                        if d < dist_s[i] - eps {
                            dist_s[i] = d;
                            pred_s[i] = Pred::Demand(j);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let sink = (0..m)
            .filter(|&j| rest_demand[j] > 0 && dist_d[j].is_finite())
            .min_by(|&a, &b| dist_d[a].total_cmp(&dist_d[b]))
            .expect("balanced problem always has a reachable sink");

        // Walk back to the source to find the bottleneck, then apply.
        let mut bottleneck = rest_demand[sink];
        let mut j = sink;
        let start = loop {
            let Pred::Supply(i) = pred_d[j] else {
                unreachable!("demand node without a supply predecessor")
            };
            match pred_s[i] {
                Pred::Source => {
                    bottleneck = bottleneck.min(rest_supply[i]);
                    break i;
                }
                Pred::Demand(prev) => {
                    bottleneck = bottleneck.min(flow[i][prev]);
                    j = prev;
                }
                _ => unreachable!("supply node on path without predecessor"),
            }
        };
        debug_assert!(bottleneck > 0);

        rest_supply[start] -= bottleneck;
        rest_demand[sink] -= bottleneck;
        let mut j = sink;
        loop {
            let Pred::Supply(i) = pred_d[j] else { unreachable!() };
            flow[i][j] += bottleneck;
            match pred_s[i] {
                Pred::Source => break,
                Pred::Demand(prev) => {
                    flow[i][prev] -= bottleneck;
                    j = prev;
                }
                _ => unreachable!(),
            }
        }
    }

    let total = flow
        .iter()
        .zip(cost)
        .flat_map(|(f, c)| f.iter().zip(c))
        .map(|(&f, &c)| f as f64 * c)
        .sum();
    (total, flow)
}
