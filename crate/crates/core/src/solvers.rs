//! The three per-block optimizers and the alternating search that ties them
//! together: projected gradient ascent for spectrum slicing, linear programs
//! for allocation and association, and a power-control step built on a
//! linearized throughput surrogate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, Relation};
use crate::model::{
    equal_allocation, throughput_objective, Allocation, Association,
    PowerAndSinr, ResidualReport, SlicingRatios, effective_loads, constraint_residuals,
};
use crate::qos::{min_rate_for, TrafficSpec};
use crate::scenario::{ApSlice, EnbGroup, Scenario};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("QoS floors unsatisfiable at {0}")]
    QosInfeasible(String),
    #[error("no feasible solution found, even after re-initialization")]
    NoSolution,
}

/// Tunable knobs of the alternating search and its inner solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcsConfig {
    /// Stop when the utility changes by no more than this (Gbit/s).
    pub kappa1: f64,
    /// Switch to the larger feedback coefficient below this change (Gbit/s).
    pub kappa2: f64,
    /// Feedback coefficient while the utility still moves a lot.
    pub theta1: f64,
    /// Feedback coefficient close to convergence.
    pub theta2: f64,
    pub max_iters: usize,
    /// KKT residual tolerance of the slicing gradient ascent.
    pub p1_tol: f64,
    pub p1_max_iters: usize,
    /// Association fractions below this carry no QoS floor or allocation.
    pub assoc_threshold: f64,
    /// AP transmit power upper bound (W).
    pub p_max_w: f64,
    /// AP transmit power the search starts from (W).
    pub init_power_w: f64,
    /// Fraction by which a power step may degrade an AP member's QoS-binding
    /// SINR before the next allocation round restores the floor.
    pub sinr_relax: f64,
    /// Fraction by which the AP-caused interference at every cellular
    /// downlink must drop below its fixed-power deployment level.
    pub interference_margin: f64,
    /// Up to this many AP-covered vehicles, the association step searches
    /// all binary patterns exhaustively (each repaired by the allocation
    /// LP); above it, the load-aware offer heuristic takes over.
    pub assoc_exact_max_covered: usize,
}

impl Default for AcsConfig {
    fn default() -> Self {
        AcsConfig {
            kappa1: 0.01,
            kappa2: 20.0,
            theta1: 0.001,
            theta2: 0.1,
            max_iters: 100,
            p1_tol: 1e-8,
            p1_max_iters: 10_000,
            assoc_threshold: 1e-6,
            p_max_w: 2.5,
            init_power_w: 2.5,
            sinr_relax: 0.25,
            interference_margin: 0.04,
            assoc_exact_max_covered: 10,
        }
    }
}

impl AcsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.kappa2 > self.kappa1) {
            return Err("kappa2 must exceed kappa1".into());
        }
        for (v, name) in [(self.theta1, "theta1"), (self.theta2, "theta2")] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must lie in (0, 1]"));
            }
        }
        if !(self.p_max_w > 0.0) {
            return Err("p_max_w must be positive".into());
        }
        if !(self.init_power_w > 0.0) {
            return Err("init_power_w must be positive".into());
        }
        if !(self.sinr_relax >= 0.0) {
            return Err("sinr_relax must be non-negative".into());
        }
        if !(self.interference_margin >= 0.0) {
            return Err("interference_margin must be non-negative".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Slicing (log-utility over the simplex)
// ---------------------------------------------------------------------------

/// Per-vehicle-side utility terms: weight w and coefficients a such that the
/// equal-share rate is `a . (beta1, beta2, beta_w)` in bit/s.
fn p1_terms(
    scenario: &Scenario,
    total_hz: f64,
    assoc: &Association,
    ap_powers: &[f64],
    threshold: f64,
) -> Vec<(f64, [f64; 3])> {
    let loads = effective_loads(scenario, assoc);
    let slot = |g: EnbGroup| match g {
        EnbGroup::B1 => 0usize,
        EnbGroup::B2 => 1usize,
    };
    let mut terms = Vec::new();
    for k in 0..scenario.num_vehicles() {
        let j = scenario.serving_enb[k];
        let w_enb = match scenario.covering_ap[k] {
            Some(_) => assoc.x_enb[k],
            None => 1.0,
        };
        if w_enb > threshold && loads.m_eff[j] > 0.0 {
            let mut a = [0.0; 3];
            a[slot(scenario.enb_group(j))] =
                total_hz * scenario.eff_enb(j, k, ap_powers) / loads.m_eff[j];
            terms.push((w_enb, a));
        }
        if let Some(i) = scenario.covering_ap[k] {
            let w_ap = assoc.x_ap[k];
            if w_ap > threshold && loads.n_prime[i] > 0.0 {
                let mut a = [0.0; 3];
                a[slot(scenario.ap_group(i).other())] =
                    total_hz * scenario.eff_ap(i, k, ap_powers, ApSlice::OtherEnbSlice)
                        / loads.n_prime[i];
                a[2] = total_hz * scenario.eff_ap(i, k, ap_powers, ApSlice::WifiSlice)
                    / loads.n_prime[i];
                terms.push((w_ap, a));
            }
        }
    }
    terms
}

fn p1_value(terms: &[(f64, [f64; 3])], beta: [f64; 3]) -> f64 {
    let mut total = 0.0;
    for (w, a) in terms {
        let rate = a[0] * beta[0] + a[1] * beta[1] + a[2] * beta[2];
        if !(rate > 0.0) {
            return f64::NEG_INFINITY;
        }
        total += w * rate.ln();
    }
    total
}

fn p1_grad(terms: &[(f64, [f64; 3])], beta: [f64; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (w, a) in terms {
        let rate = a[0] * beta[0] + a[1] * beta[1] + a[2] * beta[2];
        if rate > 0.0 {
            for d in 0..3 {
                g[d] += w * a[d] / rate;
            }
        }
    }
    g
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: [f64; 3]) -> [f64; 3] {
    let mut u = v;
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            tau = t;
        }
    }
    [
        (v[0] - tau).max(0.0),
        (v[1] - tau).max(0.0),
        (v[2] - tau).max(0.0),
    ]
}

/// Maximize the proportional-fair slicing utility over the simplex by
/// projected gradient ascent with backtracking line search.
pub fn solve_p1(
    scenario: &Scenario,
    total_hz: f64,
    assoc: &Association,
    ap_powers: &[f64],
    cfg: &AcsConfig,
) -> SlicingRatios {
    let terms = p1_terms(scenario, total_hz, assoc, ap_powers, cfg.assoc_threshold);
    let mut beta = [1.0 / 3.0; 3];
    if terms.is_empty() {
        return SlicingRatios::new(beta[0], beta[1], beta[2], total_hz);
    }
    let mut step = 1.0f64;
    for _ in 0..cfg.p1_max_iters {
        let g = p1_grad(&terms, beta);
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // Fixed-point optimality test, with a normalized gradient so the
        // residual scale does not depend on the vehicle count.
        let scale = 1.0 / (1.0 + gnorm);
        let probe = project_simplex([
            beta[0] + scale * g[0],
            beta[1] + scale * g[1],
            beta[2] + scale * g[2],
        ]);
        let residual = (0..3).map(|d| (probe[d] - beta[d]).abs()).fold(0.0, f64::max);
        if residual <= cfg.p1_tol {
            break;
        }
        let f0 = p1_value(&terms, beta);
        step = (step * 4.0).min(1e6);
        let mut moved = false;
        while step >= 1e-18 {
            let cand = project_simplex([
                beta[0] + step * g[0],
                beta[1] + step * g[1],
                beta[2] + step * g[2],
            ]);
            let descent: f64 = (0..3).map(|d| g[d] * (cand[d] - beta[d])).sum();
            if p1_value(&terms, cand) >= f0 + 1e-4 * descent && descent > 0.0 {
                beta = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    SlicingRatios::new(beta[0], beta[1], beta[2], total_hz)
}

// ---------------------------------------------------------------------------
// Allocation (throughput LP per station, QoS floors)
// ---------------------------------------------------------------------------

/// Throughput-optimal spectrum allocation for fixed slicing, association, and
/// powers. Decomposes per station. Fails when some station cannot cover the
/// QoS floors of its (fractionally) associated vehicles.
pub fn solve_p2_allocation(
    scenario: &Scenario,
    slicing: &SlicingRatios,
    assoc: &Association,
    ap_powers: &[f64],
    qos: &TrafficSpec,
    cfg: &AcsConfig,
) -> Result<Allocation, SolverError> {
    let mut alloc = Allocation::zeros(scenario.num_vehicles());

    for j in 0..scenario.enbs.len() {
        let budget = slicing.enb_slice_hz(scenario.enb_group(j));
        // (vehicle, weight, efficiency, floor allocation)
        let mut members: Vec<(usize, f64, f64, f64)> = Vec::new();
        for k in scenario.cell_of_enb(j) {
            let w = match scenario.covering_ap[k] {
                Some(_) => assoc.x_enb[k],
                None => 1.0,
            };
            if w <= cfg.assoc_threshold {
                continue;
            }
            let e = scenario.eff_enb(j, k, ap_powers);
            let floor = min_rate_for(qos, scenario.vehicles[k].traffic_class);
            if !(e > 0.0) && floor > 0.0 {
                return Err(SolverError::QosInfeasible(scenario.enbs[j].id.clone()));
            }
            members.push((k, w, e, if e > 0.0 { floor / e } else { 0.0 }));
        }
        if members.is_empty() {
            continue;
        }
        let consumed: f64 = members.iter().map(|(_, w, _, fr)| w * fr).sum();
        let slack = budget - consumed;
        if slack < -1e-9 * budget.max(1.0) {
            return Err(SolverError::QosInfeasible(scenario.enbs[j].id.clone()));
        }
        // Single-equality LP: all remaining spectrum goes to the member with
        // the best spectrum efficiency.
        let best = members
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.2.partial_cmp(&b.2).unwrap())
            .map(|(idx, _)| idx)
            .unwrap();
        for (idx, (k, w, _, fr)) in members.iter().enumerate() {
            let extra = if idx == best { slack.max(0.0) / w } else { 0.0 };
            alloc.r_enb[*k] = fr + extra;
        }
    }

    for i in 0..scenario.aps.len() {
        let members: Vec<usize> = scenario
            .ap_cell(i)
            .filter(|&k| assoc.x_ap[k] > cfg.assoc_threshold)
            .collect();
        if members.is_empty() {
            continue;
        }
        let budget_other = slicing.enb_slice_hz(scenario.ap_group(i).other());
        let budget_wifi = slicing.wifi_slice_hz();
        let n = members.len();
        let mut objective = vec![0.0; 2 * n];
        let mut row_other = vec![0.0; 2 * n];
        let mut row_wifi = vec![0.0; 2 * n];
        for (m, &k) in members.iter().enumerate() {
            let x = assoc.x_ap[k];
            let e_o = scenario.eff_ap(i, k, ap_powers, ApSlice::OtherEnbSlice);
            let e_w = scenario.eff_ap(i, k, ap_powers, ApSlice::WifiSlice);
            objective[2 * m] = x * e_o;
            objective[2 * m + 1] = x * e_w;
            row_other[2 * m] = x;
            row_wifi[2 * m + 1] = x;
        }
        let mut lp = LinearProgram::maximize(2 * n, objective);
        lp.add_row(row_other, Relation::Eq, budget_other);
        lp.add_row(row_wifi, Relation::Eq, budget_wifi);
        for (m, &k) in members.iter().enumerate() {
            let mut row = vec![0.0; 2 * n];
            row[2 * m] = scenario.eff_ap(i, k, ap_powers, ApSlice::OtherEnbSlice);
            row[2 * m + 1] = scenario.eff_ap(i, k, ap_powers, ApSlice::WifiSlice);
            let floor = min_rate_for(qos, scenario.vehicles[k].traffic_class);
            lp.add_row(row, Relation::Ge, floor);
        }
        let sol = lp
            .solve()
            .optimal()
            .ok_or_else(|| SolverError::QosInfeasible(scenario.aps[i].id.clone()))?;
        for (m, &k) in members.iter().enumerate() {
            alloc.r_ap_other[k] = sol.x[2 * m].max(0.0);
            alloc.r_ap_wifi[k] = sol.x[2 * m + 1].max(0.0);
        }
    }

    Ok(alloc)
}

// ---------------------------------------------------------------------------
// Association (per-vehicle endpoint choice on load-aware offers)
// ---------------------------------------------------------------------------

/// Association step. Small instances (at most `assoc_exact_max_covered`
/// AP-covered vehicles) are solved exactly: every binary pattern is tried
/// and repaired by the allocation LP, so the step returns the best feasible
/// binary association outright.
///
/// At scale the step is a load-aware best response: each AP-covered vehicle
/// compares the equal-share rate it would get on either side, counting
/// itself in that side's load, and picks the better endpoint. The relaxed
/// per-vehicle problem is linear over `[0, 1]`, so an endpoint is always
/// optimal; the outer damping turns the stream of endpoint choices into a
/// fractional trajectory.
///
/// A final rebalancing pass enforces the coupling with the next allocation
/// round: stations whose members' QoS floors exceed the station budget shed
/// the members that are cheapest to carry on the other side.
pub fn solve_p2_association(
    scenario: &Scenario,
    slicing: &SlicingRatios,
    assoc: &Association,
    ap_powers: &[f64],
    qos: &TrafficSpec,
    cfg: &AcsConfig,
) -> Result<Association, SolverError> {
    let covered: Vec<usize> = (0..scenario.num_vehicles())
        .filter(|&k| scenario.covering_ap[k].is_some())
        .collect();
    if covered.len() <= cfg.assoc_exact_max_covered {
        if let Some(best) =
            exact_binary_association(scenario, slicing, ap_powers, qos, cfg, &covered)
        {
            return Ok(best);
        }
        // No binary pattern carries the floors; fall through so the
        // heuristic's rebalancing pass reports which station is stuck.
    }
    let loads = effective_loads(scenario, assoc);
    let mut out = Association::all_enb(scenario);
    for k in 0..scenario.num_vehicles() {
        let Some(i) = scenario.covering_ap[k] else {
            continue;
        };
        let j = scenario.serving_enb[k];
        let enb_offer = slicing.enb_slice_hz(scenario.enb_group(j))
            / (loads.m_eff[j] - assoc.x_enb[k] + 1.0)
            * scenario.eff_enb(j, k, ap_powers);
        let ap_offer = (slicing.enb_slice_hz(scenario.ap_group(i).other())
            * scenario.eff_ap(i, k, ap_powers, ApSlice::OtherEnbSlice)
            + slicing.wifi_slice_hz() * scenario.eff_ap(i, k, ap_powers, ApSlice::WifiSlice))
            / (loads.n_prime[i] - assoc.x_ap[k] + 1.0);
        if enb_offer >= ap_offer {
            out.x_enb[k] = 1.0;
            out.x_ap[k] = 0.0;
        } else {
            out.x_enb[k] = 0.0;
            out.x_ap[k] = 1.0;
        }
    }
    rebalance_overloaded(scenario, slicing, ap_powers, qos, &mut out)?;
    Ok(out)
}

/// Exhaustive association search for small instances: every binary pattern
/// of the AP-covered vehicles, each repaired by the allocation LP, best
/// feasible throughput wins. Returns None when no pattern is feasible.
fn exact_binary_association(
    scenario: &Scenario,
    slicing: &SlicingRatios,
    ap_powers: &[f64],
    qos: &TrafficSpec,
    cfg: &AcsConfig,
    covered: &[usize],
) -> Option<Association> {
    let mut best: Option<(f64, Association)> = None;
    for mask in 0u64..(1u64 << covered.len()) {
        let mut cand = Association::all_enb(scenario);
        for (pos, &k) in covered.iter().enumerate() {
            if mask & (1 << pos) != 0 {
                cand.x_enb[k] = 0.0;
                cand.x_ap[k] = 1.0;
            }
        }
        let Ok(alloc) = solve_p2_allocation(scenario, slicing, &cand, ap_powers, qos, cfg) else {
            continue;
        };
        let obj = throughput_objective(scenario, &cand, &alloc, ap_powers);
        if best.as_ref().map_or(true, |(b, _)| obj > *b) {
            best = Some((obj, cand));
        }
    }
    best.map(|(_, a)| a)
}

/// Spectrum a station must spend to carry one vehicle's QoS floor, per side.
/// The AP cost uses whichever of its two slices is more efficient for the
/// vehicle; infinite when the side cannot carry the vehicle at all.
fn floor_cost_enb(scenario: &Scenario, qos: &TrafficSpec, ap_powers: &[f64], k: usize) -> f64 {
    let e = scenario.eff_enb(scenario.serving_enb[k], k, ap_powers);
    let floor = min_rate_for(qos, scenario.vehicles[k].traffic_class);
    if e > 0.0 {
        floor / e
    } else if floor > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn floor_cost_ap(scenario: &Scenario, qos: &TrafficSpec, ap_powers: &[f64], k: usize) -> f64 {
    let Some(i) = scenario.covering_ap[k] else {
        return f64::INFINITY;
    };
    let e = scenario
        .eff_ap(i, k, ap_powers, ApSlice::OtherEnbSlice)
        .max(scenario.eff_ap(i, k, ap_powers, ApSlice::WifiSlice));
    let floor = min_rate_for(qos, scenario.vehicles[k].traffic_class);
    if e > 0.0 {
        floor / e
    } else if floor > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Move vehicles off stations whose QoS floors exceed the station budget, as
/// long as the receiving station has room. Keeps the association binary.
fn rebalance_overloaded(
    scenario: &Scenario,
    slicing: &SlicingRatios,
    ap_powers: &[f64],
    qos: &TrafficSpec,
    assoc: &mut Association,
) -> Result<(), SolverError> {
    let n_enb = scenario.enbs.len();
    let n_ap = scenario.aps.len();
    let enb_budget: Vec<f64> = (0..n_enb)
        .map(|j| slicing.enb_slice_hz(scenario.enb_group(j)))
        .collect();
    let ap_budget: Vec<f64> = (0..n_ap)
        .map(|i| slicing.enb_slice_hz(scenario.ap_group(i).other()) + slicing.wifi_slice_hz())
        .collect();
    let mut enb_sub = vec![0.0; n_enb];
    let mut ap_sub = vec![0.0; n_ap];
    for k in 0..scenario.num_vehicles() {
        if assoc.x_ap[k] >= 0.5 {
            ap_sub[scenario.covering_ap[k].unwrap()] += floor_cost_ap(scenario, qos, ap_powers, k);
        } else {
            enb_sub[scenario.serving_enb[k]] += floor_cost_enb(scenario, qos, ap_powers, k);
        }
    }

    // Overloaded eNBs shed AP-covered members to their APs, cheapest first.
    for j in 0..n_enb {
        if enb_sub[j] <= enb_budget[j] {
            continue;
        }
        let mut movable: Vec<(f64, usize)> = (0..scenario.num_vehicles())
            .filter(|&k| {
                scenario.serving_enb[k] == j && assoc.x_enb[k] >= 0.5 && scenario.covering_ap[k].is_some()
            })
            .map(|k| (floor_cost_ap(scenario, qos, ap_powers, k), k))
            .collect();
        movable.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (cost_ap, k) in movable {
            if enb_sub[j] <= enb_budget[j] {
                break;
            }
            let i = scenario.covering_ap[k].unwrap();
            if ap_sub[i] + cost_ap > ap_budget[i] {
                continue;
            }
            assoc.x_enb[k] = 0.0;
            assoc.x_ap[k] = 1.0;
            enb_sub[j] -= floor_cost_enb(scenario, qos, ap_powers, k);
            ap_sub[i] += cost_ap;
        }
        if enb_sub[j] > enb_budget[j] {
            return Err(SolverError::QosInfeasible(scenario.enbs[j].id.clone()));
        }
    }

    // Overloaded APs shed members back to their eNB.
    for i in 0..n_ap {
        if ap_sub[i] <= ap_budget[i] {
            continue;
        }
        let mut movable: Vec<(f64, usize)> = (0..scenario.num_vehicles())
            .filter(|&k| scenario.covering_ap[k] == Some(i) && assoc.x_ap[k] >= 0.5)
            .map(|k| (floor_cost_enb(scenario, qos, ap_powers, k), k))
            .collect();
        movable.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (cost_enb, k) in movable {
            if ap_sub[i] <= ap_budget[i] {
                break;
            }
            let j = scenario.serving_enb[k];
            if enb_sub[j] + cost_enb > enb_budget[j] {
                continue;
            }
            assoc.x_ap[k] = 0.0;
            assoc.x_enb[k] = 1.0;
            ap_sub[i] -= floor_cost_ap(scenario, qos, ap_powers, k);
            enb_sub[j] += cost_enb;
        }
        if ap_sub[i] > ap_budget[i] {
            return Err(SolverError::QosInfeasible(scenario.aps[i].id.clone()));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Power control (SINR variables + linearized power step)
// ---------------------------------------------------------------------------

/// Maximize `c . p` over `{p : rows a.p <= b, 0 <= p <= upper}`. Rows that
/// cannot bind anywhere in the box (most of them; one row per served vehicle
/// and slice, nearly all far from every AP) are pruned, each survivor is
/// normalized to unit max coefficient, and the remaining small LP is solved
/// directly.
fn maximize_over_box(
    c: &[f64],
    rows: &[(Vec<f64>, f64)],
    upper: f64,
) -> Option<Vec<f64>> {
    let n = c.len();
    let c_scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if c_scale <= 0.0 {
        return None;
    }
    let mut lp = LinearProgram::maximize(n, c.iter().map(|v| v / c_scale).collect());
    for (a, b) in rows {
        let s = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s <= 0.0 {
            if *b < 0.0 {
                return None;
            }
            continue;
        }
        // Worst case of a.p over the box: positive coefficients at `upper`,
        // negative ones at 0. If even that satisfies the row, drop it.
        let worst: f64 = a.iter().map(|v| v.max(0.0) * upper).sum();
        if worst <= *b {
            continue;
        }
        lp.add_row(a.iter().map(|v| v / s).collect(), Relation::Le, b / s);
    }
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        lp.add_row(row, Relation::Le, upper);
    }
    let sol = lp.solve().optimal()?;
    Some(sol.x.iter().map(|v| v.clamp(0.0, upper)).collect())
}

/// One linearized power step: each AP pushes its power up for its own
/// members' throughput (the objective keeps only the own-signal gradient
/// terms, linearized at `p`), subject to the power box and two families of
/// SINR protection rows, both exact linear constraints in the powers and
/// both anchored at the fixed deployment powers so they do not drift with
/// the iterate:
///
/// * the AP-caused interference at every (fractionally) cellular vehicle
///   must drop `interference_margin` below its fixed-power deployment
///   level, so every cellular SINR strictly improves on the deployment the
///   rest of the search is anchored to — a pure interference budget with no
///   noise term, which keeps the binding victims the geometrically close
///   ones rather than far vehicles whose links are noise-dominated;
/// * every AP member's per-slice SINR may degrade at most `sinr_relax`
///   below its deployment-power, QoS-capped level.
///
/// All interference coupling — AP to cellular victim and AP to the other
/// APs' members — lives in the rows, not the objective, so the step is a
/// coordinate ascent whose equilibrium is set by whichever protection row
/// binds first. Returns `None` when no AP serves anyone or the step LP has
/// no solution.
fn power_step(
    scenario: &Scenario,
    assoc: &Association,
    alloc: &Allocation,
    qos: &TrafficSpec,
    p: &[f64],
    cfg: &AcsConfig,
) -> Option<Vec<f64>> {
    let n_ap = scenario.aps.len();
    if n_ap == 0 {
        return None;
    }
    let sigma = scenario.channel.noise_power_w;
    let relax = 1.0 + cfg.sinr_relax;
    let margin = 1.0 + cfg.interference_margin;
    let p_build = scenario.build_ap_powers();
    let mut c = vec![0.0; n_ap];
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();

    for k in 0..scenario.num_vehicles() {
        let j = scenario.serving_enb[k];
        let floor = min_rate_for(qos, scenario.vehicles[k].traffic_class);

        let w_enb = match scenario.covering_ap[k] {
            Some(_) => assoc.x_enb[k],
            None => 1.0,
        };
        let r_enb = alloc.r_enb[k];
        if w_enb > cfg.assoc_threshold && r_enb > 0.0 && floor > 0.0 {
            let group = scenario.enb_group(j);
            let interferers: Vec<usize> = (0..n_ap)
                .filter(|&i| scenario.ap_group(i) == group.other())
                .collect();
            let int_build: f64 = interferers
                .iter()
                .map(|&i| p_build[i] * scenario.ap_gains[i][k])
                .sum();
            if int_build > 0.0 {
                let mut a = vec![0.0; n_ap];
                for &i in &interferers {
                    a[i] = scenario.ap_gains[i][k];
                }
                rows.push((a, int_build / margin));
            }
        }

        if let Some(i) = scenario.covering_ap[k] {
            let x = assoc.x_ap[k];
            if x <= cfg.assoc_threshold {
                continue;
            }
            let group = scenario.ap_group(i);
            let g_own = scenario.ap_gains[i][k];
            // (allocation, interferer APs, fixed interference)
            let slices: [(f64, Vec<usize>, f64); 2] = [
                (
                    alloc.r_ap_other[k],
                    (0..n_ap)
                        .filter(|&i2| i2 != i && scenario.ap_group(i2) == group)
                        .collect(),
                    scenario
                        .enbs
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.group == group.other())
                        .map(|(j2, s)| s.tx_power_w * scenario.enb_gains[j2][k])
                        .sum(),
                ),
                (
                    alloc.r_ap_wifi[k],
                    (0..n_ap).filter(|&i2| i2 != i).collect(),
                    0.0,
                ),
            ];
            let sinr_of = |powers: &[f64], interferers: &[usize], fixed: f64| {
                let interference: f64 = fixed
                    + interferers
                        .iter()
                        .map(|&i2| powers[i2] * scenario.ap_gains[i2][k])
                        .sum::<f64>();
                (g_own * powers[i] / (interference + sigma), interference)
            };
            let refs = [
                sinr_of(&p_build, &slices[0].1, slices[0].2).0,
                sinr_of(&p_build, &slices[1].1, slices[1].2).0,
            ];
            // The QoS floor splits across the two slices in proportion to the
            // rates they carry at the deployment powers.
            let rate_ref = [
                slices[0].0 * (1.0 + refs[0]).log2(),
                slices[1].0 * (1.0 + refs[1]).log2(),
            ];
            let rate_total = rate_ref[0] + rate_ref[1];
            for (idx, (r_l, interferers, fixed)) in slices.iter().enumerate() {
                if !(*r_l > 0.0) {
                    continue;
                }
                let (sinr, interference) = sinr_of(p, interferers, *fixed);
                let omega = x * r_l / ((1.0 + sinr) * (interference + sigma));
                c[i] += omega * g_own;
                let share = if rate_total > 0.0 {
                    floor * rate_ref[idx] / rate_total
                } else {
                    f64::INFINITY
                };
                let c_min = if share > 0.0 {
                    2f64.powf(share / r_l) - 1.0
                } else {
                    0.0
                };
                let c_hat = refs[idx].min(c_min) / relax;
                if c_hat > 0.0 {
                    let mut a = vec![0.0; n_ap];
                    for &i2 in interferers {
                        a[i2] = c_hat * scenario.ap_gains[i2][k];
                    }
                    a[i] -= g_own;
                    rows.push((a, -c_hat * (fixed + sigma)));
                }
            }
        }
    }

    let c_scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if c_scale <= 1e-300 {
        return None;
    }
    maximize_over_box(&c, &rows, cfg.p_max_w)
}

/// One linearized power step: maximize the throughput gradient at the entry
/// powers over the relaxed-QoS polytope anchored there. The returned vertex
/// is a target for the outer damping, which bounds how far the powers
/// actually move per iteration.
pub fn solve_p3(
    scenario: &Scenario,
    _slicing: &SlicingRatios,
    assoc: &Association,
    alloc: &Allocation,
    qos: &TrafficSpec,
    p_init: &[f64],
    cfg: &AcsConfig,
) -> PowerAndSinr {
    let p_ref: Vec<f64> = p_init.iter().map(|v| v.clamp(0.0, cfg.p_max_w)).collect();
    let p = power_step(scenario, assoc, alloc, qos, &p_ref, cfg).unwrap_or_else(|| p_ref.clone());
    PowerAndSinr::from_powers(scenario, p)
}

// ---------------------------------------------------------------------------
// Alternating search
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub utility_gbps: f64,
    pub delta_gbps: f64,
    pub theta: f64,
    pub beta: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcsSolution {
    pub slicing: SlicingRatios,
    pub assoc: Association,
    pub alloc: Allocation,
    pub ap_powers: Vec<f64>,
    pub throughput_bps: f64,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    /// Whether the final association is fully binary.
    pub binary_association: bool,
    pub trace: Vec<IterationRecord>,
}

fn damp(current: &mut [f64], target: &[f64], theta: f64) {
    for (c, t) in current.iter_mut().zip(target) {
        *c += theta * (*t - *c);
    }
}

/// Round the relaxed association to a binary one and re-solve the allocation.
/// On infeasibility, flips the most ambiguous vehicles one at a time.
fn round_association(
    scenario: &Scenario,
    slicing: &SlicingRatios,
    assoc: &Association,
    ap_powers: &[f64],
    qos: &TrafficSpec,
    cfg: &AcsConfig,
) -> Option<(Association, Allocation)> {
    let mut bin = Association::all_enb(scenario);
    for k in 0..scenario.num_vehicles() {
        if scenario.covering_ap[k].is_some() && assoc.x_ap[k] >= 0.5 {
            bin.x_enb[k] = 0.0;
            bin.x_ap[k] = 1.0;
        }
    }
    if let Ok(alloc) = solve_p2_allocation(scenario, slicing, &bin, ap_powers, qos, cfg) {
        return Some((bin, alloc));
    }
    let mut candidates: Vec<usize> = (0..scenario.num_vehicles())
        .filter(|&k| scenario.covering_ap[k].is_some())
        .collect();
    candidates.sort_by(|&a, &b| {
        let da = (assoc.x_ap[a] - 0.5).abs();
        let db = (assoc.x_ap[b] - 0.5).abs();
        da.partial_cmp(&db).unwrap()
    });
    for k in candidates {
        let flipped = bin.x_ap[k] < 0.5;
        bin.x_ap[k] = if flipped { 1.0 } else { 0.0 };
        bin.x_enb[k] = if flipped { 0.0 } else { 1.0 };
        if let Ok(alloc) = solve_p2_allocation(scenario, slicing, &bin, ap_powers, qos, cfg) {
            return Some((bin, alloc));
        }
    }
    None
}

/// Alternate concave search over slicing, allocation, association, and AP
/// powers, with damped feedback between iterations.
pub fn run_acs(
    scenario: &Scenario,
    total_hz: f64,
    qos: &TrafficSpec,
    cfg: &AcsConfig,
) -> Result<AcsSolution, SolverError> {
    let init_powers: Vec<f64> =
        vec![cfg.init_power_w.min(cfg.p_max_w); scenario.aps.len()];

    let mut slicing = SlicingRatios::uniform(total_hz);
    let mut powers = init_powers.clone();
    let mut assoc = Association::max_sinr(scenario, &powers);
    let mut alloc = equal_allocation(scenario, &slicing, &assoc);
    let mut u_prev = 0.0f64;
    let mut delta_prev = f64::INFINITY;
    let mut reinitialized = false;
    let mut converged = false;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut t = 0usize;

    while t < cfg.max_iters {
        t += 1;
        let slicing_new = solve_p1(scenario, total_hz, &assoc, &powers, cfg);
        let inner = solve_p2_allocation(scenario, &slicing_new, &assoc, &powers, qos, cfg)
            .and_then(|alloc_new| {
                let assoc_new =
                    solve_p2_association(scenario, &slicing_new, &assoc, &powers, qos, cfg)?;
                Ok((alloc_new, assoc_new))
            });
        let (alloc_new, assoc_new) = match inner {
            Ok(v) => v,
            Err(_) if !reinitialized => {
                // One restart from the most conservative state: everyone on
                // their eNB, uniform slicing, initial powers.
                reinitialized = true;
                slicing = SlicingRatios::uniform(total_hz);
                powers = init_powers.clone();
                assoc = Association::all_enb(scenario);
                alloc = equal_allocation(scenario, &slicing, &assoc);
                u_prev = 0.0;
                delta_prev = f64::INFINITY;
                trace.clear();
                t = 0;
                continue;
            }
            Err(_) => return Err(SolverError::NoSolution),
        };

        let theta = if delta_prev <= cfg.kappa2 {
            cfg.theta2
        } else {
            cfg.theta1
        };
        let mut beta = [slicing.beta1, slicing.beta2, slicing.beta_w];
        damp(
            &mut beta,
            &[slicing_new.beta1, slicing_new.beta2, slicing_new.beta_w],
            theta,
        );
        slicing = SlicingRatios::new(beta[0], beta[1], beta[2], total_hz);
        damp(&mut alloc.r_enb, &alloc_new.r_enb, theta);
        damp(&mut alloc.r_ap_other, &alloc_new.r_ap_other, theta);
        damp(&mut alloc.r_ap_wifi, &alloc_new.r_ap_wifi, theta);
        damp(&mut assoc.x_enb, &assoc_new.x_enb, theta);
        damp(&mut assoc.x_ap, &assoc_new.x_ap, theta);
        // The power step runs on the damped state: the feedback margins in the
        // allocation are what let the QoS-capped LP move the powers at all.
        let power_new = solve_p3(scenario, &slicing, &assoc, &alloc, qos, &powers, cfg);
        damp(&mut powers, &power_new.p_ap, theta);

        let u = throughput_objective(scenario, &assoc, &alloc, &powers) / 1e9;
        let delta = (u - u_prev).abs();
        trace.push(IterationRecord {
            iter: t,
            utility_gbps: u,
            delta_gbps: delta,
            theta,
            beta,
        });
        u_prev = u;
        delta_prev = delta;
        if delta <= cfg.kappa1 {
            converged = true;
            break;
        }
    }

    let (assoc_final, alloc_final, binary) =
        match round_association(scenario, &slicing, &assoc, &powers, qos, cfg) {
            Some((a, r)) => (a, r, true),
            None => (assoc.clone(), alloc.clone(), false),
        };
    let throughput = throughput_objective(scenario, &assoc_final, &alloc_final, &powers);
    let report = final_residuals(
        scenario,
        &slicing,
        &assoc_final,
        &alloc_final,
        &powers,
        qos,
        cfg,
    );
    Ok(AcsSolution {
        slicing,
        assoc: assoc_final,
        alloc: alloc_final,
        ap_powers: powers,
        throughput_bps: throughput,
        iterations: t,
        converged,
        feasible: binary && report.feasible(crate::model::FEASIBILITY_TOL),
        binary_association: binary,
        trace,
    })
}

fn final_residuals(
    scenario: &Scenario,
    slicing: &SlicingRatios,
    assoc: &Association,
    alloc: &Allocation,
    powers: &[f64],
    qos: &TrafficSpec,
    cfg: &AcsConfig,
) -> ResidualReport {
    let aux = PowerAndSinr::from_powers(scenario, powers.to_vec());
    constraint_residuals(
        scenario,
        slicing,
        assoc,
        alloc,
        powers,
        qos,
        Some(&aux),
        cfg.p_max_w,
    )
}
