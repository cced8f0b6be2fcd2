//! Community-based synthetic mobility and contact extraction.
//!
//! The area is split into a `grid x grid` lattice of cells. Each community
//! lives in its own cell, and no two community cells touch (not even at a
//! corner). Nodes roam between uniform waypoints inside their home cell at a
//! uniform random speed. Travellers, after reaching a waypoint at home, head
//! with `travel_probability` to a waypoint inside a uniformly chosen foreign
//! community, and go back home after reaching it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::item::NodeId;
use crate::Seconds;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityConfig {
    pub area_width: f64,
    pub area_height: f64,
    /// Cells per side.
    pub grid: u32,
    pub num_nodes: u32,
    pub num_communities: u32,
    pub travellers_per_community: u32,
    pub speed_min: f64,
    pub speed_max: f64,
    pub tx_range: f64,
    pub time_step: Seconds,
    pub duration: Seconds,
    /// Chance, per waypoint reached at home, that a traveller leaves on an
    /// excursion.
    pub travel_probability: f64,
    pub seed: u64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self::scenario(1).expect("scenario 1 exists")
    }
}

impl MobilityConfig {
    /// Mobility presets for the three reference scenarios.
    pub fn scenario(n: u8) -> Option<Self> {
        let base = Self {
            area_width: 1000.0,
            area_height: 1000.0,
            grid: 1,
            num_nodes: 99,
            num_communities: 1,
            travellers_per_community: 0,
            speed_min: 1.0,
            speed_max: 1.86,
            tx_range: 20.0,
            time_step: 1.0,
            duration: 25_000.0,
            travel_probability: 0.1,
            seed: 0,
        };
        match n {
            1 => Some(base),
            2 => Some(Self { num_nodes: 50, ..base }),
            3 => Some(Self {
                grid: 6,
                num_communities: 3,
                travellers_per_community: 2,
                ..base
            }),
            _ => None,
        }
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (self.area_width / self.grid as f64, self.area_height / self.grid as f64)
    }

    fn max_separated_cells(&self) -> u32 {
        let half = self.grid.div_ceil(2);
        half * half
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(field, "must be positive and finite"))
            }
        };
        positive("area_width", self.area_width)?;
        positive("area_height", self.area_height)?;
        positive("tx_range", self.tx_range)?;
        positive("time_step", self.time_step)?;
        positive("duration", self.duration)?;
        if self.grid == 0 {
            return Err(ConfigError::new("grid", "must be at least 1"));
        }
        if self.num_nodes == 0 {
            return Err(ConfigError::new("num_nodes", "must be at least 1"));
        }
        if !(self.speed_min >= 0.0) || !self.speed_max.is_finite() || self.speed_min > self.speed_max {
            return Err(ConfigError::new("speed_min", "need 0 <= speed_min <= speed_max"));
        }
        if !(0.0..=1.0).contains(&self.travel_probability) {
            return Err(ConfigError::new("travel_probability", "must lie in [0, 1]"));
        }
        if self.num_communities == 0 {
            return Err(ConfigError::new("num_communities", "must be at least 1"));
        }
        if self.num_communities > self.grid * self.grid {
            return Err(ConfigError::new("num_communities", "exceeds the number of grid cells"));
        }
        if self.num_communities > self.max_separated_cells() {
            return Err(ConfigError::new(
                "num_communities",
                format!(
                    "only {} mutually non-adjacent cells fit in a {}x{} grid",
                    self.max_separated_cells(),
                    self.grid,
                    self.grid
                ),
            ));
        }
        if self.num_communities > 1 {
            let (w, h) = self.cell_size();
            if w.min(h) <= self.tx_range {
                return Err(ConfigError::new(
                    "grid",
                    "cells must be wider than the transmission range to keep communities apart",
                ));
            }
        }
        if self.num_communities > self.num_nodes {
            return Err(ConfigError::new("num_communities", "more communities than nodes"));
        }
        let smallest = self.num_nodes / self.num_communities;
        if self.travellers_per_community > smallest {
            return Err(ConfigError::new(
                "travellers_per_community",
                "exceeds the size of the smallest community",
            ));
        }
        Ok(())
    }

    /// Node `i` belongs to community `i mod num_communities`.
    pub fn community_of(&self, node: NodeId) -> u32 {
        node.0 % self.num_communities
    }

    /// The highest-numbered members of each community are its travellers.
    pub fn is_traveller(&self, node: NodeId) -> bool {
        let c = self.community_of(node);
        let members = (self.num_nodes - c).div_ceil(self.num_communities);
        let rank = node.0 / self.num_communities;
        rank + self.travellers_per_community >= members
    }
}

/// An interval during which two nodes were within range. `a < b`, and the
/// interval is half-open: `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub a: NodeId,
    pub b: NodeId,
    pub start: Seconds,
    pub end: Seconds,
}

impl ContactEvent {
    pub fn duration(&self) -> Seconds {
        self.end - self.start
    }
}

/// Checks per-event validity and that events of the same pair never overlap.
pub fn validate_contacts(events: &[ContactEvent]) -> Result<(), (usize, &'static str)> {
    let mut last_end: BTreeMap<(NodeId, NodeId), Seconds> = BTreeMap::new();
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&i, &j| events[i].start.total_cmp(&events[j].start));
    for i in order {
        let ev = &events[i];
        if ev.a >= ev.b {
            return Err((i, "node_a must be smaller than node_b"));
        }
        if !(ev.end > ev.start) || !ev.start.is_finite() || !ev.end.is_finite() {
            return Err((i, "end must be after start"));
        }
        if let Some(&prev) = last_end.get(&(ev.a, ev.b)) {
            if ev.start < prev {
                return Err((i, "overlaps an earlier contact of the same pair"));
            }
        }
        last_end.insert((ev.a, ev.b), ev.end);
    }
    Ok(())
}

/// Sorts by start time, then by pair.
pub fn sort_contacts(events: &mut [ContactEvent]) {
    events.sort_by(|x, y| {
        x.start
            .total_cmp(&y.start)
            .then((x.a, x.b).cmp(&(y.a, y.b)))
            .then(x.end.total_cmp(&y.end))
    });
}

/// Turns sampled positions into contact intervals.
#[derive(Clone, Debug)]
pub struct ContactTracker {
    tx_range_sq: f64,
    open: BTreeMap<(u32, u32), Seconds>,
    closed: Vec<ContactEvent>,
}

impl ContactTracker {
    pub fn new(tx_range: f64) -> Self {
        Self {
            tx_range_sq: tx_range * tx_range,
            open: BTreeMap::new(),
            closed: Vec::new(),
        }
    }

    /// Records the positions sampled at time `t`.
    pub fn observe(&mut self, t: Seconds, positions: &[(f64, f64)]) {
        for i in 0..positions.len() {
            let (xi, yi) = positions[i];
            for (j, &(xj, yj)) in positions.iter().enumerate().skip(i + 1) {
                let (dx, dy) = (xi - xj, yi - yj);
                let in_range = dx * dx + dy * dy <= self.tx_range_sq;
                let key = (i as u32, j as u32);
                match (in_range, self.open.get(&key)) {
                    (true, None) => {
                        self.open.insert(key, t);
                    }
                    (false, Some(&start)) => {
                        self.open.remove(&key);
                        self.push(key, start, t);
                    }
                    _ => {}
                }
            }
        }
    }

    fn push(&mut self, (a, b): (u32, u32), start: Seconds, end: Seconds) {
        if end > start {
            self.closed.push(ContactEvent {
                a: NodeId(a),
                b: NodeId(b),
                start,
                end,
            });
        }
    }

    /// Closes every open contact at `end` and returns all events sorted.
    pub fn finish(mut self, end: Seconds) -> Vec<ContactEvent> {
        let open = core::mem::take(&mut self.open);
        for (key, start) in open {
            self.push(key, start, end);
        }
        sort_contacts(&mut self.closed);
        self.closed
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Cell {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Cell {
    fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        (
            self.x0 + rng.random::<f64>() * self.w,
            self.y0 + rng.random::<f64>() * self.h,
        )
    }

    #[cfg(test)]
    fn contains(&self, (x, y): (f64, f64)) -> bool {
        x >= self.x0 && x <= self.x0 + self.w && y >= self.y0 && y <= self.y0 + self.h
    }
}

#[derive(Clone, Copy, Debug)]
struct Walker {
    pos: (f64, f64),
    waypoint: (f64, f64),
    speed: f64,
    home: u32,
    away: bool,
    traveller: bool,
}

/// Result of trace generation.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub contacts: Vec<ContactEvent>,
    /// Community of every node, by node index.
    pub communities: Vec<u32>,
    pub travellers: Vec<bool>,
    /// Lower-left corner of each community's cell, by community index.
    pub community_cells: Vec<(f64, f64)>,
}

fn community_cells<R: Rng>(cfg: &MobilityConfig, rng: &mut R) -> Vec<Cell> {
    let (w, h) = cfg.cell_size();
    // Cells with even row and column never touch each other.
    let mut spots: Vec<(u32, u32)> = (0..cfg.grid)
        .step_by(2)
        .flat_map(|r| (0..cfg.grid).step_by(2).map(move |c| (r, c)))
        .collect();
    spots.shuffle(rng);
    spots.truncate(cfg.num_communities as usize);
    spots
        .into_iter()
        .map(|(r, c)| Cell {
            x0: c as f64 * w,
            y0: r as f64 * h,
            w,
            h,
        })
        .collect()
}

/// Generates the contact trace for `cfg`, reporting every sampled position to
/// `observe(t, node, x, y)`.
pub fn generate_trace_with(
    cfg: &MobilityConfig,
    mut observe: impl FnMut(Seconds, NodeId, f64, f64),
) -> Result<Trace, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cells = community_cells(cfg, &mut rng);
    let speed = |rng: &mut ChaCha8Rng| rng.random_range(cfg.speed_min..=cfg.speed_max);

    let mut walkers: Vec<Walker> = (0..cfg.num_nodes)
        .map(|i| {
            let home = cfg.community_of(NodeId(i));
            let cell = cells[home as usize];
            Walker {
                pos: cell.sample(&mut rng),
                waypoint: cell.sample(&mut rng),
                speed: speed(&mut rng),
                home,
                away: false,
                traveller: cfg.is_traveller(NodeId(i)),
            }
        })
        .collect();

    let mut tracker = ContactTracker::new(cfg.tx_range);
    let mut positions: Vec<(f64, f64)> = walkers.iter().map(|w| w.pos).collect();
    let report = |t, positions: &[(f64, f64)], observe: &mut dyn FnMut(Seconds, NodeId, f64, f64)| {
        for (i, &(x, y)) in positions.iter().enumerate() {
            observe(t, NodeId(i as u32), x, y);
        }
    };
    report(0.0, &positions, &mut observe);
    tracker.observe(0.0, &positions);

    let steps = libm::floor(cfg.duration / cfg.time_step) as u64;
    for k in 1..=steps {
        let t = k as f64 * cfg.time_step;
        for w in walkers.iter_mut() {
            let stride = w.speed * cfg.time_step;
            let (dx, dy) = (w.waypoint.0 - w.pos.0, w.waypoint.1 - w.pos.1);
            let dist = libm::sqrt(dx * dx + dy * dy);
            if dist <= stride {
                w.pos = w.waypoint;
                let next = if w.away {
                    w.away = false;
                    w.home
                } else if w.traveller && cells.len() > 1 && rng.random::<f64>() < cfg.travel_probability {
                    let mut c = rng.random_range(0..cells.len() as u32 - 1);
                    if c >= w.home {
                        c += 1;
                    }
                    w.away = true;
                    c
                } else {
                    w.home
                };
                w.waypoint = cells[next as usize].sample(&mut rng);
                w.speed = speed(&mut rng);
            } else {
                w.pos = (w.pos.0 + dx / dist * stride, w.pos.1 + dy / dist * stride);
            }
        }
        for (p, w) in positions.iter_mut().zip(&walkers) {
            *p = w.pos;
        }
        report(t, &positions, &mut observe);
        tracker.observe(t, &positions);
    }

    Ok(Trace {
        contacts: tracker.finish(cfg.duration),
        communities: walkers.iter().map(|w| w.home).collect(),
        travellers: walkers.iter().map(|w| w.traveller).collect(),
        community_cells: cells.iter().map(|c| (c.x0, c.y0)).collect(),
    })
}

pub fn generate_trace(cfg: &MobilityConfig) -> Result<Trace, ConfigError> {
    generate_trace_with(cfg, |_, _, _, _| {})
}
