//! Active-user populations: a fixed set of users, Poisson arrivals with
//! uniform activation times, or mobility traces read from disk.
//!
//! Under Poisson arrivals with rate `lambda` and durations uniform on
//! `[t_min : t_max]`, Little's law gives a stationary mean active count of
//! `lambda * (t_min + t_max) / 2`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::env::UserId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub id: UserId,
    pub t_arr: u64,
    pub t_dep: u64,
    /// One position per slot in `[t_arr : t_dep]`.
    pub trajectory: Option<Vec<Position>>,
}

impl UserRecord {
    pub fn new(id: UserId, t_arr: u64, t_dep: u64) -> Self {
        UserRecord { id, t_arr, t_dep, trajectory: None }
    }

    pub fn is_active(&self, t: u64) -> bool {
        self.t_arr <= t && t <= self.t_dep
    }

    /// Active duration `T_k`.
    pub fn duration(&self) -> u64 {
        self.t_dep - self.t_arr + 1
    }

    pub fn position(&self, t: u64) -> Option<Position> {
        if !self.is_active(t) {
            return None;
        }
        self.trajectory.as_ref().map(|tr| tr[(t - self.t_arr) as usize])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PopulationModel {
    FixedK { k: usize },
    PoissonDynamic { lambda: f64, t_min: u64, t_max: u64 },
    TraceDriven { records: Vec<UserRecord> },
}

impl PopulationModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PopulationModel::FixedK { k } if *k == 0 => {
                Err(Error::Domain("fixed population needs K >= 1".into()))
            }
            PopulationModel::PoissonDynamic { lambda, t_min, t_max } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::Domain(format!("arrival rate must be > 0, got {lambda}")));
                }
                if *t_min < 1 || t_min > t_max {
                    return Err(Error::Domain(format!(
                        "need 1 <= t_min <= t_max, got [{t_min}, {t_max}]"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Users arriving at slot `t` under Poisson arrivals. Ids continue from
/// `next_id`, which is advanced past the new users.
pub fn sample_arrivals<R: Rng + ?Sized>(
    lambda: f64,
    t_min: u64,
    t_max: u64,
    t: u64,
    next_id: &mut u32,
    rng: &mut R,
) -> Result<Vec<UserRecord>> {
    let poisson = Poisson::new(lambda)
        .map_err(|e| Error::Domain(format!("arrival rate {lambda}: {e}")))?;
    let count = poisson.sample(rng) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let duration = rng.random_range(t_min..=t_max);
        let id = UserId(*next_id);
        *next_id += 1;
        out.push(UserRecord::new(id, t, t + duration - 1));
    }
    Ok(out)
}

/// A population materialized up to a fixed horizon, records sorted by
/// arrival slot.
#[derive(Clone, Debug)]
pub struct Population {
    records: Vec<UserRecord>,
    index: HashMap<UserId, usize>,
    horizon: u64,
}

impl Population {
    pub fn materialize<R: Rng + ?Sized>(
        model: &PopulationModel,
        horizon: u64,
        rng: &mut R,
    ) -> Result<Self> {
        model.validate()?;
        let records = match model {
            PopulationModel::FixedK { k } => (1..=*k as u32)
                .map(|id| UserRecord::new(UserId(id), 1, horizon))
                .collect(),
            PopulationModel::PoissonDynamic { lambda, t_min, t_max } => {
                let mut next_id = 1;
                let mut records = Vec::new();
                for t in 1..=horizon {
                    records.extend(sample_arrivals(*lambda, *t_min, *t_max, t, &mut next_id, rng)?);
                }
                records
            }
            PopulationModel::TraceDriven { records } => {
                let mut records = records.clone();
                records.sort_by_key(|r| (r.t_arr, r.id));
                records
            }
        };
        Ok(Population::from_records(records, horizon))
    }

    pub fn from_records(mut records: Vec<UserRecord>, horizon: u64) -> Self {
        records.sort_by_key(|r| (r.t_arr, r.id));
        let index = records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        Population { records, index, horizon }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn records(&self) -> &[UserRecord] {
        &self.records
    }

    pub fn record(&self, id: UserId) -> Option<&UserRecord> {
        self.index.get(&id).map(|&i| &self.records[i])
    }

    /// Users with `t_arr <= t <= t_dep`, in id order.
    pub fn active_set(&self, t: u64) -> Result<Vec<UserId>> {
        if t > self.horizon {
            return Err(Error::Horizon { t, horizon: self.horizon });
        }
        let arrived = self.records.partition_point(|r| r.t_arr <= t);
        let mut ids: Vec<UserId> =
            self.records[..arrived].iter().filter(|r| r.t_dep >= t).map(|r| r.id).collect();
        ids.sort();
        Ok(ids)
    }
}

/// Parses the `user_id,t,x,y` trace format. A first row whose first field is
/// not numeric is treated as a header.
pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<UserRecord>> {
    use std::collections::BTreeMap;

    let parse_err = |line: usize, msg: String| Error::TraceParse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows: BTreeMap<u32, Vec<(u64, Position, usize)>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<f64>().is_err() {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, found {}", fields.len())));
        }
        let user: u32 = fields[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad user id `{}`", fields[0])))?;
        let t: u64 = fields[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad slot `{}`", fields[1])))?;
        if t == 0 {
            return Err(parse_err(line, "slots are 1-based".into()));
        }
        let coord = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("bad coordinate `{s}`")))
        };
        let pos = Position { x: coord(fields[2])?, y: coord(fields[3])? };
        rows.entry(user).or_default().push((t, pos, line));
    }

    let mut records = Vec::with_capacity(rows.len());
    for (user, mut pts) in rows {
        pts.sort_by_key(|p| p.0);
        let t_arr = pts[0].0;
        let t_dep = pts[pts.len() - 1].0;
        for (expected, &(t, _, line)) in (t_arr..).zip(&pts) {
            if t < expected {
                return Err(parse_err(line, format!("duplicate slot {t} for user {user}")));
            }
            if t > expected {
                return Err(Error::TraceGap { user: UserId(user), slot: expected });
            }
        }
        records.push(UserRecord {
            id: UserId(user),
            t_arr,
            t_dep,
            trajectory: Some(pts.into_iter().map(|p| p.1).collect()),
        });
    }
    records.sort_by_key(|r| (r.t_arr, r.id));
    Ok(records)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<UserRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_trace(&text, path)
}

/// Inverse of [`parse_trace`] for records that carry trajectories.
pub fn emit_trace(records: &[UserRecord]) -> String {
    let mut out = String::from("user_id,t,x,y\n");
    for r in records {
        if let Some(tr) = &r.trajectory {
            for (i, p) in tr.iter().enumerate() {
                let _ = writeln!(out, "{},{},{:?},{:?}", r.id, r.t_arr + i as u64, p.x, p.y);
            }
        }
    }
    out
}

/// Poisson arrivals whose users cross the cell on straight chords at
/// constant speed, entering and leaving on the cell edge.
pub fn synthetic_trace<R: Rng + ?Sized>(
    lambda: f64,
    t_min: u64,
    t_max: u64,
    radius: f64,
    horizon: u64,
    rng: &mut R,
) -> Result<Vec<UserRecord>> {
    PopulationModel::PoissonDynamic { lambda, t_min, t_max }.validate()?;
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::Domain(format!("cell radius must be > 0, got {radius}")));
    }
    let mut next_id = 1;
    let mut out = Vec::new();
    for t in 1..=horizon {
        for mut r in sample_arrivals(lambda, t_min, t_max, t, &mut next_id, rng)? {
            r.t_dep = r.t_dep.min(horizon);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let b = rng.random_range(0.0..std::f64::consts::TAU);
            // endpoints a hair inside the edge so rounding never leaves the cell
            let edge = radius * (1.0 - 1e-9);
            let (x0, y0) = (edge * a.cos(), edge * a.sin());
            let (x1, y1) = (edge * b.cos(), edge * b.sin());
            let steps = r.duration().max(2) - 1;
            let tr = (0..r.duration())
                .map(|i| {
                    let f = i as f64 / steps as f64;
                    Position { x: x0 + f * (x1 - x0), y: y0 + f * (y1 - y0) }
                })
                .collect();
            r.trajectory = Some(tr);
            out.push(r);
        }
    }
    Ok(out)
}

/// First (user, slot) whose position lies outside the cell, if any.
pub fn outside_cell(records: &[UserRecord], radius: f64) -> Option<(UserId, u64)> {
    records.iter().find_map(|r| {
        r.trajectory.as_ref().and_then(|tr| {
            tr.iter()
                .position(|p| p.norm() > radius)
                .map(|i| (r.id, r.t_arr + i as u64))
        })
    })
}
