//! Multi-lane highway segment with car following and platoon formation.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::metrics::{RawMonitoringRecord, TripRecord};
use crate::scenario::{Scenario, SpeedDistribution};
use crate::strategy::{StrategyConfig, StrategyKind};

const CAR_LENGTH_M: f64 = 4.5;
const TRUCK_LENGTH_M: f64 = 12.0;
const ACCEL_MS2: f64 = 1.5;
const DECEL_MS2: f64 = 4.0;
/// Standstill distance and time headway of the safety rule.
const MIN_GAP_M: f64 = 3.0;
const HEADWAY_S: f64 = 1.2;
const COMFORT_DECEL_MS2: f64 = 1.0;
/// Gain of the platoon gap controller, per second.
const GAP_GAIN: f64 = 0.5;
/// Extra speed a platoon member may use to close up to its platoon.
const CATCH_UP_KMH: f64 = 20.0;
/// Closing speed assumed for a join maneuver; the member counts as platooning after covering
/// the distance to its partner at this speed.
const JOIN_CLOSING_KMH: f64 = 10.0;
/// Free road needed behind the entry point before a vehicle is inserted.
const SPAWN_CLEARANCE_M: f64 = 20.0;
/// Free space needed in front of and behind a vehicle changing lanes.
const LANE_CHANGE_CLEARANCE_M: f64 = 2.0;
const MAX_PLATOON_SIZE: usize = 8;

fn millis(t: f64) -> u64 {
    (t * 1000.0).ceil() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleKind {
    Car,
    Truck,
}

impl VehicleKind {
    pub fn length(self) -> f64 {
        match self {
            VehicleKind::Car => CAR_LENGTH_M,
            VehicleKind::Truck => TRUCK_LENGTH_M,
        }
    }
}

/// Speeds in km/h, positions in meters of the front bumper from the segment entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub kind: VehicleKind,
    pub position: f64,
    pub lane: u8,
    pub speed: f64,
    pub desired_speed: f64,
    pub capable: bool,
    pub platoon: Option<u64>,
    pub spawn_time: f64,
    pub exit_time: Option<f64>,
    /// Member of a platoon whose join maneuver is complete.
    pub formed: bool,
    pub platoon_time: f64,
    advertising_since: f64,
    left_platoon: Option<u64>,
    formation_due: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Platoon {
    pub id: u64,
    pub members: Vec<u64>,
    pub lane: u8,
    /// Slowest desired speed among the members.
    pub cruise: f64,
}

/// A vehicle to place on the road directly, bypassing the spawn process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleSpec {
    pub kind: VehicleKind,
    pub position: f64,
    pub lane: u8,
    pub speed: f64,
    pub desired_speed: f64,
    pub capable: bool,
}

#[derive(Debug, Clone, Copy)]
struct PendingVehicle {
    kind: VehicleKind,
    desired_speed: f64,
    capable: bool,
    lane: u8,
}

pub struct Simulator {
    scenario: Scenario,
    rng: ChaCha8Rng,
    clock: f64,
    vehicles: BTreeMap<u64, Vehicle>,
    platoons: BTreeMap<u64, Platoon>,
    pending: VecDeque<PendingVehicle>,
    next_vehicle: u64,
    next_platoon: u64,
    config: StrategyConfig,
    next_config: Option<StrategyConfig>,
    spawned: u64,
    exited: u64,
    /// Milliseconds at which inserted vehicles would leave under free flow.
    free_flow_exits: BinaryHeap<Reverse<u64>>,
}

impl Simulator {
    pub fn new(scenario: Scenario, config: StrategyConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            scenario,
            clock: 0.0,
            vehicles: BTreeMap::new(),
            platoons: BTreeMap::new(),
            pending: VecDeque::new(),
            next_vehicle: 0,
            next_platoon: 0,
            config,
            next_config: None,
            spawned: 0,
            exited: 0,
            free_flow_exits: BinaryHeap::new(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn time(&self) -> f64 {
        self.clock
    }

    /// Configuration currently driving coordination. A configuration passed to
    /// [`Simulator::apply`] shows up here after the next step starts.
    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    /// Replaces the strategy at the next step boundary.
    pub fn apply(&mut self, config: StrategyConfig) {
        self.next_config = Some(config);
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.values()
    }

    pub fn vehicle(&self, id: u64) -> Option<&Vehicle> {
        self.vehicles.get(&id)
    }

    pub fn platoons(&self) -> impl Iterator<Item = &Platoon> {
        self.platoons.values()
    }

    pub fn spawned(&self) -> u64 {
        self.spawned
    }

    pub fn exited(&self) -> u64 {
        self.exited
    }

    pub fn on_road(&self) -> usize {
        self.vehicles.len()
    }

    /// Generated vehicles still waiting for room at the entry.
    pub fn waiting_at_entry(&self) -> usize {
        self.pending.len()
    }

    /// Places a vehicle on the road and returns its id.
    pub fn insert(&mut self, spec: VehicleSpec) -> u64 {
        let id = self.next_vehicle;
        self.next_vehicle += 1;
        let now = self.time();
        let ff = self.free_flow_time(spec.desired_speed);
        self.free_flow_exits.push(Reverse(millis(now + ff)));
        self.vehicles.insert(
            id,
            Vehicle {
                id,
                kind: spec.kind,
                position: spec.position,
                lane: spec.lane,
                speed: spec.speed,
                desired_speed: spec.desired_speed,
                capable: spec.capable,
                platoon: None,
                spawn_time: now,
                exit_time: None,
                formed: false,
                platoon_time: 0.0,
                advertising_since: now,
                left_platoon: None,
                formation_due: now,
            },
        );
        self.spawned += 1;
        id
    }

    fn free_flow_time(&self, desired_kmh: f64) -> f64 {
        self.scenario.segment_length_m / (desired_kmh / 3.6)
    }

    fn kind_max(&self, kind: VehicleKind) -> f64 {
        match kind {
            VehicleKind::Car => self.scenario.car_max_kmh,
            VehicleKind::Truck => self.scenario.truck_max_kmh,
        }
    }

    /// Steps through one observation window and returns the per-step records.
    pub fn run_window(&mut self) -> Vec<RawMonitoringRecord> {
        let dt = self.scenario.dt_s;
        (0..self.scenario.steps_per_window()).map(|_| self.step(dt)).collect()
    }

    /// Advances the simulation by `dt` seconds.
    pub fn step(&mut self, dt: f64) -> RawMonitoringRecord {
        assert!(dt > 0.0, "step needs a positive dt");
        if let Some(c) = self.next_config.take() {
            self.config = c;
        }
        let now = self.time();
        self.generate(now, dt);
        self.admit();
        self.coordinate(now);
        self.maintain_platoons(now);
        self.change_lanes();
        self.advance(dt);
        self.clock += dt;
        let end = self.time();
        let trips = self.remove_exited(end);
        self.mark_formations(end);
        for v in self.vehicles.values_mut() {
            if v.formed {
                v.platoon_time += dt;
            }
        }
        self.record(end, dt, trips)
    }

    fn draw_speed(&mut self, d: SpeedDistribution, max: f64) -> f64 {
        let n = Normal::new(d.mean, d.sd.max(f64::MIN_POSITIVE)).expect("validated distribution");
        n.sample(&mut self.rng).clamp(0.5 * d.mean, max)
    }

    fn generate(&mut self, now: f64, dt: f64) {
        let lambda = self.scenario.profile.rate_at(now) * dt / 3600.0;
        if lambda <= 0.0 {
            return;
        }
        let n = Poisson::new(lambda).expect("positive rate").sample(&mut self.rng) as usize;
        for _ in 0..n {
            let truck = self.rng.random::<f64>() < self.scenario.truck_share;
            let capable = self.rng.random::<f64>() < self.scenario.platooning_share;
            let (kind, desired, lane) = if truck {
                let d = self.draw_speed(self.scenario.truck_desired_kmh, self.scenario.truck_max_kmh);
                (VehicleKind::Truck, d, 1)
            } else {
                let d = self.draw_speed(self.scenario.car_desired_kmh, self.scenario.car_max_kmh);
                (VehicleKind::Car, d, self.rng.random_range(2..=self.scenario.lanes))
            };
            self.pending.push_back(PendingVehicle {
                kind,
                desired_speed: desired,
                capable,
                lane,
            });
        }
    }

    /// Rearmost vehicle in a lane.
    fn last_in_lane(&self, lane: u8) -> Option<&Vehicle> {
        self.vehicles
            .values()
            .filter(|v| v.lane == lane)
            .min_by(|a, b| a.position.total_cmp(&b.position).then(b.id.cmp(&a.id)))
    }

    /// Inserts waiting vehicles in arrival order wherever the entry has room. Cars try their
    /// drawn lane first and then the other car lanes; trucks only use lane 1.
    fn admit(&mut self) {
        let mut still = VecDeque::new();
        while let Some(p) = self.pending.pop_front() {
            let lanes: Vec<u8> = match p.kind {
                VehicleKind::Truck => vec![1],
                VehicleKind::Car => {
                    let mut l = vec![p.lane];
                    l.extend((2..=self.scenario.lanes).filter(|&x| x != p.lane));
                    l
                }
            };
            let slot = lanes.into_iter().find_map(|lane| match self.last_in_lane(lane) {
                None => Some((lane, p.desired_speed)),
                Some(v) if v.position - v.kind.length() >= SPAWN_CLEARANCE_M => {
                    Some((lane, p.desired_speed.min(v.speed.max(0.0)).max(0.0)))
                }
                Some(_) => None,
            });
            match slot {
                Some((lane, speed)) => {
                    self.insert(VehicleSpec {
                        kind: p.kind,
                        position: 0.0,
                        lane,
                        speed,
                        desired_speed: p.desired_speed,
                        capable: p.capable,
                    });
                }
                None => still.push_back(p),
            }
        }
        self.pending = still;
    }

    /// Reference speed a joining vehicle compares against.
    fn reference_speed(&self, v: &Vehicle) -> f64 {
        v.platoon
            .and_then(|p| self.platoons.get(&p))
            .map_or(v.desired_speed, |p| p.cruise)
    }

    fn coordinate(&mut self, now: f64) {
        let cfg = self.config;
        let ids: Vec<u64> = self
            .vehicles
            .values()
            .filter(|v| v.capable && v.platoon.is_none())
            .filter(|v| now - v.advertising_since >= cfg.params.advertising_duration)
            .map(|v| v.id)
            .collect();
        for id in ids {
            let v = &self.vehicles[&id];
            if v.platoon.is_some() {
                continue;
            }
            let (lo, hi) = match cfg.kind {
                StrategyKind::BestVelocity => (
                    v.position - cfg.params.search_distance_back,
                    v.position + cfg.params.search_distance_front,
                ),
                _ => {
                    let half = self.scenario.best_distance_window_m / 2.0;
                    (v.position - half, v.position + half)
                }
            };
            let mut best: Option<(f64, f64, u64)> = None;
            for c in self.vehicles.values() {
                if c.id == id || !c.capable || c.position < lo || c.position > hi {
                    continue;
                }
                if let Some(p) = c.platoon {
                    if Some(p) == v.left_platoon || self.platoons[&p].members.len() >= MAX_PLATOON_SIZE {
                        continue;
                    }
                }
                let dv = (v.desired_speed - self.reference_speed(c)).abs();
                let dx = (c.position - v.position).abs();
                let key = match cfg.kind {
                    StrategyKind::BestVelocity => (dv, dx, c.id),
                    _ if dv > cfg.params.max_speed_difference => continue,
                    _ => (dx, dv, c.id),
                };
                if best.is_none_or(|b| (key.0, key.1, key.2) < b) {
                    best = Some(key);
                }
            }
            match best {
                Some((_, _, c)) => self.join(id, c, now),
                None => self.vehicles.get_mut(&id).expect("listed").advertising_since = now,
            }
        }
    }

    /// Adds `joiner` to the candidate's platoon, founding one if needed. The maneuver takes as long
    /// as closing the distance at catch-up speed.
    fn join(&mut self, joiner: u64, candidate: u64, now: f64) {
        let dx = (self.vehicles[&joiner].position - self.vehicles[&candidate].position).abs();
        let due = now + dx / (JOIN_CLOSING_KMH / 3.6);
        let pid = match self.vehicles[&candidate].platoon {
            Some(p) => p,
            None => {
                let p = self.next_platoon;
                self.next_platoon += 1;
                let lane = self.vehicles[&candidate].lane;
                self.platoons.insert(
                    p,
                    Platoon {
                        id: p,
                        members: vec![candidate],
                        lane,
                        cruise: 0.0,
                    },
                );
                let c = self.vehicles.get_mut(&candidate).expect("exists");
                c.platoon = Some(p);
                c.formation_due = due;
                p
            }
        };
        self.platoons.get_mut(&pid).expect("exists").members.push(joiner);
        let v = self.vehicles.get_mut(&joiner).expect("exists");
        v.platoon = Some(pid);
        v.left_platoon = None;
        v.formation_due = due;
        self.refresh_platoon(pid);
    }

    /// Recomputes cruise speed and lane after membership changes.
    fn refresh_platoon(&mut self, pid: u64) {
        let p = &self.platoons[&pid];
        let cruise = p
            .members
            .iter()
            .map(|m| self.vehicles[m].desired_speed)
            .fold(f64::INFINITY, f64::min);
        let lane = if self.config.kind == StrategyKind::BestDistanceAndLane {
            self.config.params.lane_for(cruise, self.scenario.lanes)
        } else {
            p.lane
        };
        let p = self.platoons.get_mut(&pid).expect("exists");
        p.cruise = cruise;
        p.lane = lane;
    }

    /// Members too fast for their platoon's cruise speed leave it; platoons left with a single
    /// member dissolve.
    fn maintain_platoons(&mut self, now: f64) {
        let tol = self.scenario.leave_tolerance_kmh;
        let pids: Vec<u64> = self.platoons.keys().copied().collect();
        for pid in pids {
            let cruise = self.platoons[&pid].cruise;
            let members = self.platoons[&pid].members.clone();
            let (leaving, staying): (Vec<u64>, Vec<u64>) = members
                .into_iter()
                .partition(|m| self.vehicles[m].desired_speed - cruise > tol);
            for m in &leaving {
                let v = self.vehicles.get_mut(m).expect("member");
                v.platoon = None;
                v.left_platoon = Some(pid);
                v.advertising_since = now;
            }
            if staying.len() < 2 {
                for m in &staying {
                    let v = self.vehicles.get_mut(m).expect("member");
                    v.platoon = None;
                    v.advertising_since = now;
                }
                self.platoons.remove(&pid);
            } else {
                self.platoons.get_mut(&pid).expect("exists").members = staying;
                self.refresh_platoon(pid);
            }
        }
    }

    fn lane_is_free(&self, id: u64, lane: u8) -> bool {
        let v = &self.vehicles[&id];
        self.vehicles
            .values()
            .filter(|o| o.lane == lane && o.id != id)
            .all(|o| {
                if o.position >= v.position {
                    o.position - o.kind.length() - v.position >= LANE_CHANGE_CLEARANCE_M
                } else {
                    v.position - v.kind.length() - o.position >= LANE_CHANGE_CLEARANCE_M
                }
            })
    }

    /// Platoon members move into their platoon's lane when there is room.
    fn change_lanes(&mut self) {
        let moves: Vec<(u64, u8)> = self
            .vehicles
            .values()
            .filter_map(|v| {
                let lane = self.platoons.get(&v.platoon?)?.lane;
                (lane != v.lane).then_some((v.id, lane))
            })
            .collect();
        for (id, lane) in moves {
            if self.lane_is_free(id, lane) {
                self.vehicles.get_mut(&id).expect("exists").lane = lane;
            }
        }
    }

    fn advance(&mut self, dt: f64) {
        for lane in 1..=self.scenario.lanes {
            let mut order: Vec<u64> = self
                .vehicles
                .values()
                .filter(|v| v.lane == lane)
                .map(|v| v.id)
                .collect();
            order.sort_by(|a, b| {
                let (va, vb) = (&self.vehicles[a], &self.vehicles[b]);
                vb.position.total_cmp(&va.position).then(a.cmp(b))
            });
            // (position before and after this step, length, new speed in m/s, platoon)
            let mut ahead: Option<(f64, f64, f64, f64, Option<u64>)> = None;
            let mut platoon_seen: Vec<u64> = Vec::new();
            for id in order {
                let v = &self.vehicles[&id];
                let vmax = self.kind_max(v.kind) / 3.6;
                let speed = v.speed / 3.6;
                let mut target = match v.platoon {
                    Some(p) => {
                        let cruise = self.platoons[&p].cruise / 3.6;
                        match ahead {
                            Some((pos, _, len, s, Some(q))) if q == p => {
                                let e = pos - len - v.position - self.scenario.platoon_gap_m;
                                // close the gap no faster than a comfortable stop allows
                                let closing = if e > 0.0 {
                                    (GAP_GAIN * e).min((2.0 * COMFORT_DECEL_MS2 * e).sqrt())
                                } else {
                                    GAP_GAIN * e
                                };
                                (s + closing).min(cruise + CATCH_UP_KMH / 3.6)
                            }
                            _ if platoon_seen.contains(&p) => cruise + CATCH_UP_KMH / 3.6,
                            _ => cruise,
                        }
                    }
                    None => v.desired_speed / 3.6,
                }
                .min(vmax);
                let mut limit = f64::INFINITY;
                if let Some((pos, next, len, s, _)) = ahead {
                    let gap = pos - len - v.position;
                    target = target.min(s + (gap - MIN_GAP_M) / HEADWAY_S);
                    limit = (next - len - 0.5 - v.position) / dt;
                }
                let new_speed = (speed + ACCEL_MS2 * dt)
                    .min(target.max(speed - DECEL_MS2 * dt))
                    .min(limit)
                    .max(0.0);
                let new_pos = v.position + new_speed * dt;
                if let Some(p) = v.platoon {
                    platoon_seen.push(p);
                }
                ahead = Some((v.position, new_pos, v.kind.length(), new_speed, v.platoon));
                let kmh = (new_speed * 3.6).min(self.kind_max(v.kind));
                let v = self.vehicles.get_mut(&id).expect("exists");
                v.position = new_pos;
                v.speed = kmh;
            }
        }
    }

    /// A member counts as platooning once its join maneuver has had time to complete.
    fn mark_formations(&mut self, now: f64) {
        for v in self.vehicles.values_mut() {
            v.formed = v.platoon.is_some() && now >= v.formation_due;
        }
    }

    fn remove_exited(&mut self, now: f64) -> Vec<TripRecord> {
        let length = self.scenario.segment_length_m;
        let gone: Vec<u64> = self
            .vehicles
            .values()
            .filter(|v| v.position >= length)
            .map(|v| v.id)
            .collect();
        let mut trips = Vec::with_capacity(gone.len());
        for id in gone {
            let mut v = self.vehicles.remove(&id).expect("listed");
            v.exit_time = Some(now);
            if let Some(pid) = v.platoon {
                self.drop_member(pid, id, now);
            }
            trips.push(TripRecord {
                vehicle: id,
                capable: v.capable,
                spawn_time: v.spawn_time,
                exit_time: now,
                free_flow_time: self.free_flow_time(v.desired_speed),
                platoon_time: v.platoon_time,
            });
            self.exited += 1;
        }
        trips
    }

    fn drop_member(&mut self, pid: u64, id: u64, now: f64) {
        let p = self.platoons.get_mut(&pid).expect("platoon of member");
        p.members.retain(|&m| m != id);
        if p.members.len() < 2 {
            let rest = std::mem::take(&mut p.members);
            self.platoons.remove(&pid);
            for m in rest {
                let v = self.vehicles.get_mut(&m).expect("member");
                v.platoon = None;
                v.advertising_since = now;
            }
        } else {
            self.refresh_platoon(pid);
        }
    }

    fn record(&mut self, now: f64, dt: f64, trips: Vec<TripRecord>) -> RawMonitoringRecord {
        let mut expected = 0;
        while let Some(Reverse(due)) = self.free_flow_exits.peek() {
            if *due > millis(now) {
                break;
            }
            self.free_flow_exits.pop();
            expected += 1;
        }
        let mut r = RawMonitoringRecord {
            timestamp: now,
            dt,
            vehicles_on_road: self.vehicles.len(),
            expected_exits: expected,
            trips,
            ..Default::default()
        };
        for v in self.vehicles.values() {
            if v.kind == VehicleKind::Car {
                r.cars_on_road += 1;
                r.car_speed_sum += v.speed;
            }
            if v.capable {
                r.capable_on_road += 1;
                if v.formed {
                    r.capable_in_platoon += 1;
                }
            }
        }
        r
    }

    /// False once any vehicle state is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        self.vehicles
            .values()
            .all(|v| v.position.is_finite() && v.speed.is_finite())
    }

    /// Checks conservation, per-lane ordering, speed limits and platoon membership rules.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.spawned != self.vehicles.len() as u64 + self.exited {
            return Err(format!(
                "spawned {} != on road {} + exited {}",
                self.spawned,
                self.vehicles.len(),
                self.exited
            ));
        }
        for lane in 1..=self.scenario.lanes {
            let mut in_lane: Vec<&Vehicle> = self.vehicles.values().filter(|v| v.lane == lane).collect();
            in_lane.sort_by(|a, b| b.position.total_cmp(&a.position));
            for w in in_lane.windows(2) {
                if w[1].position > w[0].position - w[0].kind.length() {
                    return Err(format!("vehicles {} and {} overlap in lane {lane}", w[0].id, w[1].id));
                }
            }
        }
        for v in self.vehicles.values() {
            if v.position < 0.0 || v.position > self.scenario.segment_length_m {
                return Err(format!("vehicle {} off the segment at {}", v.id, v.position));
            }
            if v.speed > self.kind_max(v.kind) + 1e-9 {
                return Err(format!("vehicle {} exceeds its speed limit", v.id));
            }
            if let Some(p) = v.platoon {
                let members = &self.platoons.get(&p).ok_or("dangling platoon")?.members;
                if !v.capable || members.iter().filter(|&&m| m == v.id).count() != 1 {
                    return Err(format!("vehicle {} has an invalid platoon membership", v.id));
                }
            }
        }
        for p in self.platoons.values() {
            if p.members.len() < 2 || p.members.iter().any(|m| self.vehicles[m].platoon != Some(p.id)) {
                return Err(format!("platoon {} is inconsistent", p.id));
            }
        }
        Ok(())
    }
}
