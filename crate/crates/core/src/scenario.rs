//! Static network snapshot: road geometry, base stations, vehicles, channel
//! gains, coverage sets, and interference-aware SINR evaluation.
//!
//! A [`Scenario`] is immutable after construction and safe to share across
//! parallel experiment runs. The spectrum reuse pattern is:
//! eNB group 1 transmits on slice 1, eNB group 2 on slice 2, and every Wi-Fi
//! AP reuses the Wi-Fi slice plus the slice of the *opposite* eNB group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Road geometry and vehicle placement parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoadConfig {
    pub length_m: f64,
    pub lanes: usize,
    pub lane_width_m: f64,
    pub min_headway_m: f64,
    /// Vehicles per meter per lane, nominally in [0.04, 0.20].
    pub av_density_per_m: f64,
    /// Default seed when the caller does not supply one.
    pub rng_seed: u64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        RoadConfig {
            length_m: 1200.0,
            lanes: 2,
            lane_width_m: 4.0,
            min_headway_m: 5.0,
            av_density_per_m: 0.05,
            rng_seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnbGroup {
    B1,
    B2,
}

impl EnbGroup {
    pub fn other(self) -> EnbGroup {
        match self {
            EnbGroup::B1 => EnbGroup::B2,
            EnbGroup::B2 => EnbGroup::B1,
        }
    }
}

/// Which spectrum slice an AP transmission uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApSlice {
    /// The slice of the eNB group the AP's parent does *not* belong to.
    OtherEnbSlice,
    /// The Wi-Fi slice shared by all APs.
    WifiSlice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enb {
    pub id: String,
    pub group: EnbGroup,
    pub position: [f64; 2],
    pub tx_power_w: f64,
    pub coverage_radius_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ap {
    pub id: String,
    /// Index into the scenario's eNB list.
    pub parent_enb: usize,
    pub position: [f64; 2],
    /// Transmit power assumed at build time; fixes the coverage radius.
    pub tx_power_w: f64,
    pub coverage_radius_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrafficClass {
    DelaySensitive,
    DelayTolerant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    pub position: [f64; 2],
    pub traffic_class: TrafficClass,
}

/// Log-distance path loss per station kind, plus flat noise power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    pub enb_intercept_db: f64,
    pub ap_intercept_db: f64,
    pub slope_db_per_decade: f64,
    pub noise_power_w: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            enb_intercept_db: -30.0,
            ap_intercept_db: -40.0,
            slope_db_per_decade: 35.0,
            // -104 dBm
            noise_power_w: 10f64.powf(-13.4),
        }
    }
}

impl ChannelModel {
    /// Linear power gain eNB -> point at distance d (clamped below 1 m).
    pub fn enb_gain(&self, d: f64) -> f64 {
        let d = d.max(1.0);
        let db = self.enb_intercept_db - self.slope_db_per_decade * d.log10();
        10f64.powf(db / 10.0)
    }

    pub fn ap_gain(&self, d: f64) -> f64 {
        let d = d.max(1.0);
        let db = self.ap_intercept_db - self.slope_db_per_decade * d.log10();
        10f64.powf(db / 10.0)
    }
}

/// Station layout used to build a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnbSite {
    pub position: [f64; 2],
    pub group: EnbGroup,
    pub tx_power_w: f64,
    pub coverage_radius_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApSite {
    pub position: [f64; 2],
    pub parent_enb: usize,
    pub tx_power_w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub enbs: Vec<EnbSite>,
    pub aps: Vec<ApSite>,
    pub channel: ChannelModel,
}

/// AP coverage radius as a function of build-time power: 200 m at 1 W and
/// 260 m at 2.5 W, linearly interpolated in between.
pub fn ap_coverage_radius_m(tx_power_w: f64) -> f64 {
    (200.0 + 40.0 * (tx_power_w - 1.0)).max(0.0)
}

impl Deployment {
    /// Two adjacent eNBs (one per group) with four evenly spaced APs under
    /// them along one side of a 1200 m road. Vehicles near the cell boundary
    /// at x = 600 sit between the inner APs, far from every station and
    /// exposed to cross-cell interference.
    pub fn default_two_enb_four_ap(ap_power_w: f64) -> Deployment {
        let y = -5.0;
        let enb = |x: f64, group| EnbSite {
            position: [x, y],
            group,
            tx_power_w: 10.0,
            coverage_radius_m: 600.0,
        };
        let ap = |x: f64, parent| ApSite {
            position: [x, y],
            parent_enb: parent,
            tx_power_w: ap_power_w,
        };
        Deployment {
            enbs: vec![enb(300.0, EnbGroup::B1), enb(900.0, EnbGroup::B2)],
            aps: vec![ap(150.0, 0), ap(450.0, 0), ap(750.0, 1), ap(1050.0, 1)],
            channel: ChannelModel::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("infeasible density: av_density_per_m * min_headway_m = {0} > 1")]
    InfeasibleDensity(f64),
    #[error("min_headway_m must be positive")]
    NonPositiveHeadway,
    #[error("AP {ap} coverage disc extends outside its parent eNB disc by {excess_m} m")]
    ApOutsideParent { ap: usize, excess_m: f64 },
    #[error("AP {0} references unknown parent eNB {1}")]
    BadParent(usize, usize),
    #[error("vehicle at x={0} is outside all eNB coverage")]
    UncoveredVehicle(f64),
    #[error("sensitive probability {0} outside [0,1]")]
    BadProbability(f64),
}

/// Immutable world snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub road: RoadConfig,
    pub channel: ChannelModel,
    pub enbs: Vec<Enb>,
    pub aps: Vec<Ap>,
    pub vehicles: Vec<Vehicle>,
    /// Linear gain eNB j -> vehicle k, indexed `enb_gains[j][k]`.
    pub enb_gains: Vec<Vec<f64>>,
    /// Linear gain AP i -> vehicle k.
    pub ap_gains: Vec<Vec<f64>>,
    /// Covering eNB per vehicle (nearest in-range eNB).
    pub serving_enb: Vec<usize>,
    /// Covering AP per vehicle, if any; always under the vehicle's eNB.
    pub covering_ap: Vec<Option<usize>>,
    /// Probability a vehicle is delay-sensitive (kept for replay).
    pub sensitive_prob: f64,
    pub seed: u64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Place `n` points on `[0, length]` with minimum spacing `headway`,
/// uniformly over the feasible configurations. Order statistics of uniforms
/// on the free space, then re-inflated by the headway; exact even when the
/// density is at the packing limit.
fn place_with_headway(rng: &mut impl Rng, n: usize, length: f64, headway: f64) -> Vec<f64> {
    if n == 0 {
        return vec![];
    }
    let free = (length - (n as f64 - 1.0) * headway).max(0.0);
    let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=free)).collect();
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    u.iter()
        .enumerate()
        .map(|(i, v)| v + i as f64 * headway)
        .collect()
}

/// Build the static snapshot. Deterministic for a fixed seed.
pub fn build_scenario(
    road: &RoadConfig,
    deployment: &Deployment,
    sensitive_prob: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    if !(road.min_headway_m > 0.0) {
        return Err(ScenarioError::NonPositiveHeadway);
    }
    let packing = road.av_density_per_m * road.min_headway_m;
    if packing > 1.0 + 1e-12 {
        return Err(ScenarioError::InfeasibleDensity(packing));
    }
    if !(0.0..=1.0).contains(&sensitive_prob) {
        return Err(ScenarioError::BadProbability(sensitive_prob));
    }

    let enbs: Vec<Enb> = deployment
        .enbs
        .iter()
        .enumerate()
        .map(|(j, s)| Enb {
            id: format!("enb-{}", j + 1),
            group: s.group,
            position: s.position,
            tx_power_w: s.tx_power_w,
            coverage_radius_m: s.coverage_radius_m,
        })
        .collect();
    let mut aps = Vec::with_capacity(deployment.aps.len());
    for (i, s) in deployment.aps.iter().enumerate() {
        let parent = enbs
            .get(s.parent_enb)
            .ok_or(ScenarioError::BadParent(i, s.parent_enb))?;
        let radius = ap_coverage_radius_m(s.tx_power_w);
        let excess = dist(s.position, parent.position) + radius - parent.coverage_radius_m;
        if excess > 1e-9 {
            return Err(ScenarioError::ApOutsideParent { ap: i, excess_m: excess });
        }
        aps.push(Ap {
            id: format!("ap-{}", i + 1),
            parent_enb: s.parent_enb,
            position: s.position,
            tx_power_w: s.tx_power_w,
            coverage_radius_m: radius,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_lane = (road.av_density_per_m * road.length_m).round() as usize;
    let mut vehicles = Vec::new();
    for lane in 0..road.lanes {
        let y = road.lane_width_m * (lane as f64 + 0.5);
        for x in place_with_headway(&mut rng, per_lane, road.length_m, road.min_headway_m) {
            let class = if rng.gen_bool(sensitive_prob) {
                TrafficClass::DelaySensitive
            } else {
                TrafficClass::DelayTolerant
            };
            vehicles.push(Vehicle {
                id: vehicles.len() as u32,
                position: [x, y],
                traffic_class: class,
            });
        }
    }

    let channel = deployment.channel.clone();
    let enb_gains: Vec<Vec<f64>> = enbs
        .iter()
        .map(|s| {
            vehicles
                .iter()
                .map(|v| channel.enb_gain(dist(s.position, v.position)))
                .collect()
        })
        .collect();
    let ap_gains: Vec<Vec<f64>> = aps
        .iter()
        .map(|s| {
            vehicles
                .iter()
                .map(|v| channel.ap_gain(dist(s.position, v.position)))
                .collect()
        })
        .collect();

    let mut serving_enb = Vec::with_capacity(vehicles.len());
    let mut covering_ap = Vec::with_capacity(vehicles.len());
    for v in &vehicles {
        let mut best: Option<(usize, f64)> = None;
        for (j, s) in enbs.iter().enumerate() {
            let d = dist(s.position, v.position);
            if d <= s.coverage_radius_m && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.ok_or(ScenarioError::UncoveredVehicle(v.position[0]))?;
        serving_enb.push(j);
        let mut best_ap: Option<(usize, f64)> = None;
        for (i, a) in aps.iter().enumerate() {
            if a.parent_enb != j {
                continue;
            }
            let d = dist(a.position, v.position);
            if d <= a.coverage_radius_m && best_ap.map_or(true, |(_, bd)| d < bd) {
                best_ap = Some((i, d));
            }
        }
        covering_ap.push(best_ap.map(|(i, _)| i));
    }

    Ok(Scenario {
        road: road.clone(),
        channel,
        enbs,
        aps,
        vehicles,
        enb_gains,
        ap_gains,
        serving_enb,
        covering_ap,
        sensitive_prob,
        seed,
    })
}

impl Scenario {
    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    /// Vehicle indices covered by eNB `j` (its cell).
    pub fn cell_of_enb(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.serving_enb
            .iter()
            .enumerate()
            .filter(move |(_, s)| **s == j)
            .map(|(k, _)| k)
    }

    /// Vehicles covered by eNB `j` but by no AP (the residual cell).
    pub fn residual_cell(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_of_enb(j).filter(|&k| self.covering_ap[k].is_none())
    }

    /// Vehicles inside AP `i`'s coverage.
    pub fn ap_cell(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.covering_ap
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == Some(i))
            .map(|(k, _)| k)
    }

    pub fn enb_group(&self, j: usize) -> EnbGroup {
        self.enbs[j].group
    }

    pub fn ap_group(&self, i: usize) -> EnbGroup {
        self.enbs[self.aps[i].parent_enb].group
    }

    /// SINR of vehicle `k` served by eNB `j` on that group's slice, given AP
    /// transmit powers. Interference: same-group other eNBs plus all APs
    /// under the opposite group's eNBs.
    pub fn sinr_enb(&self, j: usize, k: usize, ap_powers: &[f64]) -> f64 {
        let group = self.enbs[j].group;
        let signal = self.enbs[j].tx_power_w * self.enb_gains[j][k];
        let mut interference = 0.0;
        for (j2, s) in self.enbs.iter().enumerate() {
            if j2 != j && s.group == group {
                interference += s.tx_power_w * self.enb_gains[j2][k];
            }
        }
        for (i, a) in self.aps.iter().enumerate() {
            if self.enbs[a.parent_enb].group == group.other() {
                interference += ap_powers[i] * self.ap_gains[i][k];
            }
        }
        signal / (interference + self.channel.noise_power_w)
    }

    /// SINR of vehicle `k` served by AP `i` on the given slice.
    /// On the opposite eNB group's slice the interferers are the same-group
    /// APs and the opposite group's eNBs; on the Wi-Fi slice, all other APs.
    pub fn sinr_ap(&self, i: usize, k: usize, ap_powers: &[f64], slice: ApSlice) -> f64 {
        let group = self.ap_group(i);
        let signal = ap_powers[i] * self.ap_gains[i][k];
        let mut interference = 0.0;
        match slice {
            ApSlice::OtherEnbSlice => {
                for (i2, a) in self.aps.iter().enumerate() {
                    if i2 != i && self.enbs[a.parent_enb].group == group {
                        interference += ap_powers[i2] * self.ap_gains[i2][k];
                    }
                }
                for (j, s) in self.enbs.iter().enumerate() {
                    if s.group == group.other() {
                        interference += s.tx_power_w * self.enb_gains[j][k];
                    }
                }
            }
            ApSlice::WifiSlice => {
                for i2 in 0..self.aps.len() {
                    if i2 != i {
                        interference += ap_powers[i2] * self.ap_gains[i2][k];
                    }
                }
            }
        }
        signal / (interference + self.channel.noise_power_w)
    }

    /// Spectrum efficiency log2(1 + SINR) for the eNB downlink.
    pub fn eff_enb(&self, j: usize, k: usize, ap_powers: &[f64]) -> f64 {
        (1.0 + self.sinr_enb(j, k, ap_powers)).log2()
    }

    pub fn eff_ap(&self, i: usize, k: usize, ap_powers: &[f64], slice: ApSlice) -> f64 {
        (1.0 + self.sinr_ap(i, k, ap_powers, slice)).log2()
    }

    /// Build-time AP powers, the default power vector for evaluation.
    pub fn build_ap_powers(&self) -> Vec<f64> {
        self.aps.iter().map(|a| a.tx_power_w).collect()
    }

    /// Structural invariant check; returns human-readable violations.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for v in &self.vehicles {
            if !(0.0..=self.road.length_m).contains(&v.position[0]) {
                problems.push(format!("vehicle {} off-road at x={}", v.id, v.position[0]));
            }
        }
        for (i, a) in self.aps.iter().enumerate() {
            let parent = &self.enbs[a.parent_enb];
            if dist(a.position, parent.position) + a.coverage_radius_m
                > parent.coverage_radius_m + 1e-9
            {
                problems.push(format!("ap {i} disc outside parent"));
            }
        }
        for k in 0..self.vehicles.len() {
            let j = self.serving_enb[k];
            let d = dist(self.enbs[j].position, self.vehicles[k].position);
            if d > self.enbs[j].coverage_radius_m + 1e-9 {
                problems.push(format!("vehicle {k} outside serving eNB"));
            }
            if let Some(i) = self.covering_ap[k] {
                let d = dist(self.aps[i].position, self.vehicles[k].position);
                if d > self.aps[i].coverage_radius_m + 1e-9 {
                    problems.push(format!("vehicle {k} outside covering AP"));
                }
                if self.aps[i].parent_enb != j {
                    problems.push(format!("vehicle {k} AP under a different eNB"));
                }
            }
        }
        // Lane headway
        for lane in 0..self.road.lanes {
            let y = self.road.lane_width_m * (lane as f64 + 0.5);
            let mut xs: Vec<f64> = self
                .vehicles
                .iter()
                .filter(|v| (v.position[1] - y).abs() < 1e-9)
                .map(|v| v.position[0])
                .collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in xs.windows(2) {
                if w[1] - w[0] < self.road.min_headway_m - 1e-9 {
                    problems.push(format!("headway violation on lane {lane}"));
                }
            }
        }
        problems
    }
}
