//! Run metrics and their CSV form.
//!
//! Floats are written in shortest round-trip notation so that reloading a
//! run reproduces it exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::env::UserId;
use crate::error::{Error, Result};
use crate::policy::DecisionWindow;

#[derive(Clone, Debug, PartialEq)]
pub struct SlotRow {
    pub t: u64,
    pub user: UserId,
    pub choice: usize,
    pub gamma: f64,
    /// Windowed achieved throughput `Gamma_k(t)`.
    pub gamma_avg: f64,
    /// Windowed target `Gamma_target,k(t)`.
    pub target_avg: f64,
    pub collided: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserRow {
    pub user: UserId,
    pub t_arr: u64,
    pub t_dep: u64,
    pub long_term_throughput: f64,
    pub long_term_target: f64,
    /// `Delta_k` for each configured window, in config order.
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    /// Mean over non-empty slots of the summed instantaneous throughput.
    pub sum_throughput: f64,
    pub weighted_objective: f64,
    /// Collided transmissions over transmission attempts.
    pub collision_rate: f64,
    pub seed: u64,
}

/// Aggregate counts for one non-empty slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotStats {
    pub t: u64,
    pub active: usize,
    pub attempts: usize,
    pub successes: usize,
    pub collided_attempts: usize,
    /// RBs with two or more transmitters.
    pub collided_rbs: usize,
    /// RBs with at least one transmitter.
    pub busy_rbs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsLog {
    pub windows: Vec<u64>,
    pub slots: Vec<SlotRow>,
    pub users: Vec<UserRow>,
    pub slot_stats: Vec<SlotStats>,
    pub decisions: Vec<DecisionWindow>,
    pub summary: RunSummary,
}

impl MetricsLog {
    /// Collided attempts over attempts for slots after `from`.
    pub fn collision_rate_after(&self, from: u64) -> f64 {
        let (att, col) = self
            .slot_stats
            .iter()
            .filter(|s| s.t > from)
            .fold((0usize, 0usize), |acc, s| (acc.0 + s.attempts, acc.1 + s.collided_attempts));
        if att == 0 {
            0.0
        } else {
            col as f64 / att as f64
        }
    }

    /// Mean summed throughput over non-empty slots after `from`.
    pub fn sum_throughput_after(&self, from: u64) -> f64 {
        let mut total = 0.0;
        let mut slots = 0usize;
        let mut last = 0;
        for row in self.slots.iter().filter(|r| r.t > from) {
            total += row.gamma;
            if row.t != last {
                slots += 1;
                last = row.t;
            }
        }
        if slots == 0 {
            0.0
        } else {
            total / slots as f64
        }
    }

    /// Mean `Delta_k` over users for the window at position `idx`.
    pub fn mean_delta(&self, idx: usize) -> f64 {
        if self.users.is_empty() {
            return 0.0;
        }
        self.users.iter().map(|u| u.deltas[idx]).sum::<f64>() / self.users.len() as f64
    }
}

fn users_header(windows: &[u64]) -> String {
    let mut h = String::from("user_id,t_arr,t_dep,long_term_throughput,long_term_target");
    for w in windows {
        let _ = write!(h, ",delta_Tw{w}");
    }
    h
}

const SLOTS_HEADER: &str = "t,user_id,choice,gamma,Gamma,Gamma_target,collided";
const SUMMARY_HEADER: &str = "sum_throughput,weighted_objective,collision_rate,seed";

pub fn slots_csv(log: &MetricsLog) -> String {
    let mut out = String::with_capacity(log.slots.len() * 32);
    out.push_str(SLOTS_HEADER);
    out.push('\n');
    for r in &log.slots {
        let _ = writeln!(
            out,
            "{},{},{},{:?},{:?},{:?},{}",
            r.t, r.user, r.choice, r.gamma, r.gamma_avg, r.target_avg, r.collided as u8
        );
    }
    out
}

pub fn users_csv(log: &MetricsLog) -> String {
    let mut out = users_header(&log.windows);
    out.push('\n');
    for u in &log.users {
        let _ = write!(
            out,
            "{},{},{},{:?},{:?}",
            u.user, u.t_arr, u.t_dep, u.long_term_throughput, u.long_term_target
        );
        for d in &u.deltas {
            let _ = write!(out, ",{d:?}");
        }
        out.push('\n');
    }
    out
}

pub fn summary_csv(log: &MetricsLog) -> String {
    let s = &log.summary;
    format!(
        "{SUMMARY_HEADER}\n{:?},{:?},{:?},{}\n",
        s.sum_throughput, s.weighted_objective, s.collision_rate, s.seed
    )
}

/// Writes `slots.csv`, `users.csv` and `summary.csv` into `out_dir`.
pub fn emit_metrics(log: &MetricsLog, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let files = [
        ("slots.csv", slots_csv(log)),
        ("users.csv", users_csv(log)),
        ("summary.csv", summary_csv(log)),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let p = out_dir.join(name);
        std::fs::write(&p, body)?;
        paths.push(p);
    }
    Ok(paths)
}

fn bad(file: &str, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Domain(format!("{file} line {line}: {msg}"))
}

fn field<T: std::str::FromStr>(file: &str, line: usize, s: Option<&str>) -> Result<T> {
    let s = s.ok_or_else(|| bad(file, line, "missing field"))?;
    s.parse().map_err(|_| bad(file, line, format!("bad value `{s}`")))
}

/// Reloads the numeric content written by [`emit_metrics`]. Slot statistics
/// and decision windows are not part of the CSV set and come back empty.
pub fn read_metrics(out_dir: &Path) -> Result<MetricsLog> {
    let slots_text = std::fs::read_to_string(out_dir.join("slots.csv"))?;
    let mut slots = Vec::new();
    for (i, line) in slots_text.lines().enumerate().skip(1) {
        let mut f = line.split(',');
        slots.push(SlotRow {
            t: field("slots.csv", i + 1, f.next())?,
            user: UserId(field("slots.csv", i + 1, f.next())?),
            choice: field("slots.csv", i + 1, f.next())?,
            gamma: field("slots.csv", i + 1, f.next())?,
            gamma_avg: field("slots.csv", i + 1, f.next())?,
            target_avg: field("slots.csv", i + 1, f.next())?,
            collided: field::<u8>("slots.csv", i + 1, f.next())? == 1,
        });
    }

    let users_text = std::fs::read_to_string(out_dir.join("users.csv"))?;
    let mut lines = users_text.lines();
    let header = lines.next().ok_or_else(|| bad("users.csv", 1, "empty file"))?;
    let windows = header
        .split(',')
        .skip(5)
        .map(|h| {
            h.strip_prefix("delta_Tw")
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| bad("users.csv", 1, format!("bad column `{h}`")))
        })
        .collect::<Result<Vec<u64>>>()?;
    let mut users = Vec::new();
    for (i, line) in lines.enumerate() {
        let ln = i + 2;
        let mut f = line.split(',');
        let user = UserId(field("users.csv", ln, f.next())?);
        let t_arr = field("users.csv", ln, f.next())?;
        let t_dep = field("users.csv", ln, f.next())?;
        let long_term_throughput = field("users.csv", ln, f.next())?;
        let long_term_target = field("users.csv", ln, f.next())?;
        let deltas = f.map(|v| field("users.csv", ln, Some(v))).collect::<Result<Vec<f64>>>()?;
        users.push(UserRow { user, t_arr, t_dep, long_term_throughput, long_term_target, deltas });
    }

    let summary_text = std::fs::read_to_string(out_dir.join("summary.csv"))?;
    let row = summary_text.lines().nth(1).ok_or_else(|| bad("summary.csv", 2, "missing row"))?;
    let mut f = row.split(',');
    let summary = RunSummary {
        sum_throughput: field("summary.csv", 2, f.next())?,
        weighted_objective: field("summary.csv", 2, f.next())?,
        collision_rate: field("summary.csv", 2, f.next())?,
        seed: field("summary.csv", 2, f.next())?,
    };
    Ok(MetricsLog { windows, slots, users, slot_stats: Vec::new(), decisions: Vec::new(), summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsLog {
        MetricsLog {
            windows: vec![5, 20],
            slots: vec![
                SlotRow { t: 1, user: UserId(1), choice: 2, gamma: 1.0, gamma_avg: 1.0, target_avg: 0.4, collided: false },
                SlotRow { t: 1, user: UserId(2), choice: 0, gamma: 0.0, gamma_avg: 0.0, target_avg: 0.4, collided: false },
                SlotRow { t: 2, user: UserId(1), choice: 1, gamma: 0.0, gamma_avg: 0.5, target_avg: 0.1 + 0.2, collided: true },
            ],
            users: vec![UserRow {
                user: UserId(1),
                t_arr: 1,
                t_dep: 2,
                long_term_throughput: 0.5,
                long_term_target: 1.0 / 3.0,
                deltas: vec![0.125, 1e-300],
            }],
            slot_stats: Vec::new(),
            decisions: Vec::new(),
            summary: RunSummary { sum_throughput: 0.5, weighted_objective: 0.1, collision_rate: 0.5, seed: 7 },
        }
    }

    #[test]
    fn headers() {
        let log = sample();
        assert!(slots_csv(&log).starts_with("t,user_id,choice,gamma,Gamma,Gamma_target,collided\n"));
        assert!(users_csv(&log).starts_with(
            "user_id,t_arr,t_dep,long_term_throughput,long_term_target,delta_Tw5,delta_Tw20\n"
        ));
        assert!(summary_csv(&log).starts_with("sum_throughput,weighted_objective,collision_rate,seed\n"));
    }

    #[test]
    fn emit_and_reload_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let log = sample();
        let paths = emit_metrics(&log, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        assert_eq!(read_metrics(dir.path()).unwrap(), log);
    }

    #[test]
    fn throughput_after_counts_slots() {
        let log = sample();
        assert_eq!(log.sum_throughput_after(0), 0.5);
        assert_eq!(log.sum_throughput_after(1), 0.0);
        assert_eq!(log.mean_delta(0), 0.125);
    }
}
