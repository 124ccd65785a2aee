//! Shared fixtures and independent oracles for the integration tests:
//! tiny scenario builders, brute-force grid search, LP vertex enumeration,
//! binary association enumeration, a numerical Hessian, and rank statistics.

#![allow(dead_code)]

use avnet_spectrum::model::{
    equal_allocation, throughput_objective, Allocation, Association, SlicingRatios,
};
use avnet_spectrum::qos::{min_rate_for, TrafficSpec};
use avnet_spectrum::scenario::{
    build_scenario, ApSite, ChannelModel, Deployment, EnbGroup, EnbSite, RoadConfig, Scenario,
};
use nalgebra::{DMatrix, DVector};

/// Two single-eNB cells on a short road with one AP each; low densities give
/// the 3-5 vehicle instances the enumeration oracles can afford.
pub fn micro_deployment(ap_power_w: f64) -> Deployment {
    let enb = |x: f64, group| EnbSite {
        position: [x, -5.0],
        group,
        tx_power_w: 10.0,
        coverage_radius_m: 600.0,
    };
    Deployment {
        enbs: vec![enb(100.0, EnbGroup::B1), enb(300.0, EnbGroup::B2)],
        aps: vec![
            ApSite {
                position: [60.0, -5.0],
                parent_enb: 0,
                tx_power_w: ap_power_w,
            },
            ApSite {
                position: [340.0, -5.0],
                parent_enb: 1,
                tx_power_w: ap_power_w,
            },
        ],
        channel: ChannelModel::default(),
    }
}

/// A scenario with `n_vehicles` on the micro layout's 400 m road.
pub fn micro_scenario(n_vehicles: usize, ap_power_w: f64, seed: u64) -> Scenario {
    let road = RoadConfig {
        length_m: 400.0,
        lanes: 1,
        av_density_per_m: n_vehicles as f64 / 400.0,
        ..RoadConfig::default()
    };
    let s = build_scenario(&road, &micro_deployment(ap_power_w), 0.8, seed).unwrap();
    assert_eq!(s.num_vehicles(), n_vehicles);
    s
}

/// Maximize `sum_k log(r_k * eff_k)` over `r >= 0, sum_k r_k = budget` by
/// exhaustive grid search with `steps` points per budget. Returns the best
/// objective found.
pub fn grid_max_log_split(effs: &[f64], budget: f64, steps: usize) -> f64 {
    fn recurse(effs: &[f64], remaining: usize, step: f64, acc: f64, best: &mut f64) {
        if effs.len() == 1 {
            // Last member takes whatever is left.
            let r = remaining as f64 * step;
            let obj = if r > 0.0 { acc + (r * effs[0]).ln() } else { f64::NEG_INFINITY };
            if obj > *best {
                *best = obj;
            }
            return;
        }
        for units in 0..=remaining {
            let r = units as f64 * step;
            let term = if r > 0.0 { (r * effs[0]).ln() } else { f64::NEG_INFINITY };
            if term == f64::NEG_INFINITY {
                continue;
            }
            recurse(&effs[1..], remaining - units, step, acc + term, best);
        }
    }
    let mut best = f64::NEG_INFINITY;
    recurse(effs, steps, budget / steps as f64, 0.0, &mut best);
    best
}

/// Inner P1 objective of an allocation under a fixed binary association:
/// sum over served vehicles of log(rate).
pub fn log_objective(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &Allocation,
    ap_powers: &[f64],
) -> f64 {
    let mut total = 0.0;
    for k in 0..scenario.num_vehicles() {
        let rate = avnet_spectrum::model::rate_of_vehicle(scenario, assoc, alloc, ap_powers, k);
        total += rate.ln();
    }
    total
}

/// One linear program in standard inequality form for the vertex oracle:
/// maximize c.x subject to A_eq x = b_eq, A_ge x >= b_ge, x >= 0.
pub struct VertexLp {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ge: Vec<Vec<f64>>,
    pub b_ge: Vec<f64>,
}

/// Exhaustive vertex enumeration: every basic point is the solution of the
/// equalities plus a choice of tight inequality/nonnegativity constraints.
/// Returns the best feasible objective, or None when infeasible.
pub fn vertex_enumerate_max(lp: &VertexLp) -> Option<f64> {
    let n = lp.c.len();
    let m_eq = lp.a_eq.len();
    assert!(m_eq <= n);
    let need = n - m_eq;
    // Candidate tight constraints: the >= rows, then the nonnegativity rows.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (a, b) in lp.a_ge.iter().zip(&lp.b_ge) {
        rows.push((a.clone(), *b));
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut choice: Vec<usize> = (0..need).collect();
    let total = rows.len();
    if need > total {
        return None;
    }
    loop {
        // Assemble and solve the square system.
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (r, row) in lp.a_eq.iter().enumerate() {
            for (cidx, v) in row.iter().enumerate() {
                a[(r, cidx)] = *v;
            }
            b[r] = lp.b_eq[r];
        }
        for (extra, &ri) in choice.iter().enumerate() {
            let r = m_eq + extra;
            for (cidx, v) in rows[ri].0.iter().enumerate() {
                a[(r, cidx)] = *v;
            }
            b[r] = rows[ri].1;
        }
        if let Some(x) = a.lu().solve(&b) {
            let scale = 1.0 + b.amax();
            let tol = 1e-7 * scale;
            let feasible = x.iter().all(|&v| v >= -tol)
                && lp
                    .a_ge
                    .iter()
                    .zip(&lp.b_ge)
                    .all(|(row, bg)| {
                        let lhs: f64 = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                        lhs >= bg - 1e-7 * (1.0 + bg.abs())
                    });
            if feasible {
                let obj: f64 = lp.c.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                if best.map_or(true, |cur| obj > cur) {
                    best = Some(obj);
                }
            }
        }
        // Next combination.
        let mut i = need;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] + (need - i) < total {
                choice[i] += 1;
                for j in i + 1..need {
                    choice[j] = choice[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Best throughput over the full P2 block of one scenario at fixed slicing
/// and powers: enumerate every binary association of the AP-covered vehicles
/// and, for each, the per-station allocation optimum by vertex enumeration.
/// Returns (best objective, best association) over the feasible choices.
pub fn enumerate_p2_optimum(
    scenario: &Scenario,
    slicing: &SlicingRatios,
    ap_powers: &[f64],
    qos: &TrafficSpec,
) -> Option<(f64, Association)> {
    let covered: Vec<usize> = (0..scenario.num_vehicles())
        .filter(|&k| scenario.covering_ap[k].is_some())
        .collect();
    assert!(covered.len() <= 10, "enumeration blowup");
    let mut best: Option<(f64, Association)> = None;
    for mask in 0..(1u32 << covered.len()) {
        let mut assoc = Association::all_enb(scenario);
        for (pos, &k) in covered.iter().enumerate() {
            if mask & (1 << pos) != 0 {
                assoc.x_enb[k] = 0.0;
                assoc.x_ap[k] = 1.0;
            }
        }
        if let Some(obj) = allocation_optimum(scenario, slicing, &assoc, ap_powers, qos) {
            if best.as_ref().map_or(true, |(cur, _)| obj > *cur) {
                best = Some((obj, assoc));
            }
        }
    }
    best
}

/// Throughput of the best allocation for one binary association, summed over
/// stations, each solved by exhaustive vertex enumeration. None when some
/// station cannot cover its members' floors.
pub fn allocation_optimum(
    scenario: &Scenario,
    slicing: &SlicingRatios,
    assoc: &Association,
    ap_powers: &[f64],
    qos: &TrafficSpec,
) -> Option<f64> {
    use avnet_spectrum::scenario::ApSlice;
    let mut total = 0.0;
    for j in 0..scenario.enbs.len() {
        let members: Vec<usize> = scenario
            .cell_of_enb(j)
            .filter(|&k| match scenario.covering_ap[k] {
                Some(_) => assoc.x_enb[k] >= 0.5,
                None => true,
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let effs: Vec<f64> = members
            .iter()
            .map(|&k| scenario.eff_enb(j, k, ap_powers))
            .collect();
        let floors: Vec<f64> = members
            .iter()
            .map(|&k| min_rate_for(qos, scenario.vehicles[k].traffic_class))
            .collect();
        let n = members.len();
        let lp = VertexLp {
            c: effs.clone(),
            a_eq: vec![vec![1.0; n]],
            b_eq: vec![slicing.enb_slice_hz(scenario.enb_group(j))],
            a_ge: (0..n)
                .map(|m| {
                    let mut row = vec![0.0; n];
                    row[m] = effs[m];
                    row
                })
                .collect(),
            b_ge: floors,
        };
        total += vertex_enumerate_max(&lp)?;
    }
    for i in 0..scenario.aps.len() {
        let members: Vec<usize> = scenario
            .ap_cell(i)
            .filter(|&k| assoc.x_ap[k] >= 0.5)
            .collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len();
        let e_o: Vec<f64> = members
            .iter()
            .map(|&k| scenario.eff_ap(i, k, ap_powers, ApSlice::OtherEnbSlice))
            .collect();
        let e_w: Vec<f64> = members
            .iter()
            .map(|&k| scenario.eff_ap(i, k, ap_powers, ApSlice::WifiSlice))
            .collect();
        // Variables: r_other then r_wifi, member-major.
        let mut c = vec![0.0; 2 * n];
        let mut row_o = vec![0.0; 2 * n];
        let mut row_w = vec![0.0; 2 * n];
        let mut a_ge = Vec::new();
        let mut b_ge = Vec::new();
        for m in 0..n {
            c[2 * m] = e_o[m];
            c[2 * m + 1] = e_w[m];
            row_o[2 * m] = 1.0;
            row_w[2 * m + 1] = 1.0;
            let mut floor_row = vec![0.0; 2 * n];
            floor_row[2 * m] = e_o[m];
            floor_row[2 * m + 1] = e_w[m];
            a_ge.push(floor_row);
            b_ge.push(min_rate_for(
                qos,
                scenario.vehicles[members[m]].traffic_class,
            ));
        }
        let lp = VertexLp {
            c,
            a_eq: vec![row_o, row_w],
            b_eq: vec![
                slicing.enb_slice_hz(scenario.ap_group(i).other()),
                slicing.wifi_slice_hz(),
            ],
            a_ge,
            b_ge,
        };
        total += vertex_enumerate_max(&lp)?;
    }
    Some(total)
}

/// 3x3 numerical Hessian of `f` by central second differences.
pub fn numerical_hessian(f: &dyn Fn([f64; 3]) -> f64, at: [f64; 3], h: f64) -> [[f64; 3]; 3] {
    let mut hess = [[0.0; 3]; 3];
    let shift = |mut p: [f64; 3], i: usize, s: f64| {
        p[i] += s;
        p
    };
    for i in 0..3 {
        for j in 0..3 {
            let pp = f(shift(shift(at, i, h), j, h));
            let pm = f(shift(shift(at, i, h), j, -h));
            let mp = f(shift(shift(at, i, -h), j, h));
            let mm = f(shift(shift(at, i, -h), j, -h));
            hess[i][j] = (pp - pm - mp + mm) / (4.0 * h * h);
        }
    }
    hess
}

/// Largest eigenvalue of a symmetric 3x3 matrix.
pub fn max_eigenvalue(m: [[f64; 3]; 3]) -> f64 {
    let mat = DMatrix::from_fn(3, 3, |r, c| 0.5 * (m[r][c] + m[c][r]));
    mat.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Spearman rank correlation; ties get averaged ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let rank = (i + j) as f64 / 2.0 + 1.0;
            for &kk in &idx[i..=j] {
                out[kk] = rank;
            }
            i = j + 1;
        }
        out
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt()).max(1e-12)
}

/// Mean of an iterator of f64.
pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Equal allocation restricted helper re-exported for oracle comparisons.
pub fn equal_alloc(scenario: &Scenario, slicing: &SlicingRatios, assoc: &Association) -> Allocation {
    equal_allocation(scenario, slicing, assoc)
}

/// Throughput convenience wrapper.
pub fn throughput(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &Allocation,
    ap_powers: &[f64],
) -> f64 {
    throughput_objective(scenario, assoc, alloc, ap_powers)
}
