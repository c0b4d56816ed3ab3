//! Kinematic fling trajectories P1 -> P2 -> P3 -> P4 in the `x = 0` plane.
//!
//! Each segment is a straight line traversed with a trapezoidal
//! (acceleration-limited) speed profile. This stands in for a jerk-limited
//! time-optimal generator: waypoints, boundary speeds and speed caps are
//! honoured exactly, optimality is not.
//!
//! Joint 3 holds its start angle until P2, follows the cubic that reaches
//! `(theta, v_theta, a_theta)` at P3, then continues on the matching
//! quadratic. `v_theta` and `a_theta` keep the units the parameter table
//! prints for them (m/s, m/s^2) and are applied numerically as deg/s and
//! deg/s^2.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_space::{FlingParams, ParamBounds};

pub type Point = [f64; 3];

/// Fixed geometry and limits. The point defaults are placeholders, not
/// measured robot values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    pub p1: Point,
    pub p2: Point,
    pub p4: Point,
    /// Speed cap on P1 -> P2 (m/s).
    pub v12_max: f64,
    /// Acceleration limit (m/s^2); the 9-D space overrides it on P2 -> P3
    /// and P3 -> P4.
    pub accel_limit: f64,
    /// Joint-3 angle before the fling (deg).
    pub theta_start: f64,
    pub sample_rate: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            p1: [0.0, 0.45, 0.45],
            p2: [0.0, 0.30, 0.55],
            p4: [0.0, 0.75, 0.15],
            v12_max: 1.0,
            accel_limit: 20.0,
            theta_start: 0.0,
            sample_rate: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Joint3 {
    pub theta: f64,
    pub v_theta: f64,
    pub a_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Waypoint {
    pub position: Point,
    /// Speed when passing this point (m/s).
    pub speed: f64,
    pub joint3: Option<Joint3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentLimits {
    pub v_max: f64,
    pub a_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlingPlan {
    pub waypoints: [Waypoint; 4],
    /// Limits for P1->P2, P2->P3, P3->P4.
    pub segments: [SegmentLimits; 3],
    pub theta_start: f64,
}

const SEGMENT_NAMES: [&str; 3] = ["P1->P2", "P2->P3", "P3->P4"];

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Places P3 from the parameters and attaches limits and boundary speeds.
///
/// P3 is passed at the highest speed both adjoining segments allow and can
/// reach from rest; P1, P2 and P4 are passed at rest.
pub fn build_waypoints(
    bounds: &ParamBounds,
    p: &FlingParams,
    cfg: &TrajectoryConfig,
) -> Result<FlingPlan> {
    bounds.check(p)?;
    for (name, pt) in [("P1", cfg.p1), ("P2", cfg.p2), ("P4", cfg.p4)] {
        if pt.iter().any(|v| !v.is_finite()) || pt[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{name} must be finite with x = 0"
            )));
        }
    }
    let (a23, a34) = if p.len() >= 9 {
        (p[7], p[8])
    } else {
        (cfg.accel_limit, cfg.accel_limit)
    };
    let segments = [
        SegmentLimits {
            v_max: cfg.v12_max,
            a_max: cfg.accel_limit,
        },
        SegmentLimits {
            v_max: p[0],
            a_max: a23,
        },
        SegmentLimits {
            v_max: p[1],
            a_max: a34,
        },
    ];
    for (s, lim) in segments.iter().enumerate() {
        if !(lim.v_max.is_finite() && lim.v_max > 0.0 && lim.a_max.is_finite() && lim.a_max > 0.0) {
            return Err(Error::Infeasible {
                segment: SEGMENT_NAMES[s].into(),
                reason: "speed and acceleration limits must be positive".into(),
            });
        }
    }
    let p3: Point = [0.0, p[2], p[3]];
    let reach23 = (2.0 * a23 * dist(&cfg.p2, &p3)).sqrt();
    let reach34 = (2.0 * a34 * dist(&p3, &cfg.p4)).sqrt();
    let v3 = p[0].min(p[1]).min(reach23).min(reach34);
    let at_rest = |position| Waypoint {
        position,
        speed: 0.0,
        joint3: None,
    };
    Ok(FlingPlan {
        waypoints: [
            at_rest(cfg.p1),
            at_rest(cfg.p2),
            Waypoint {
                position: p3,
                speed: v3,
                joint3: Some(Joint3 {
                    theta: p[4],
                    v_theta: p[5],
                    a_theta: p[6],
                }),
            },
            at_rest(cfg.p4),
        ],
        segments,
        theta_start: cfg.theta_start,
    })
}

/// Trapezoidal speed profile over one straight segment.
#[derive(Debug, Clone, Copy)]
struct Trapezoid {
    v0: f64,
    v1: f64,
    peak: f64,
    accel: f64,
    t_acc: f64,
    t_cruise: f64,
    t_dec: f64,
    length: f64,
}

impl Trapezoid {
    fn plan(segment: usize, length: f64, v0: f64, v1: f64, lim: SegmentLimits) -> Result<Self> {
        let fail = |reason: String| Error::Infeasible {
            segment: SEGMENT_NAMES[segment].into(),
            reason,
        };
        if !(length > 1e-9) {
            return Err(fail(format!("segment length {length} m is degenerate")));
        }
        let tol = 1e-9;
        if v0 > lim.v_max + tol || v1 > lim.v_max + tol {
            return Err(fail(format!(
                "boundary speeds ({v0}, {v1}) exceed the limit {}",
                lim.v_max
            )));
        }
        let a = lim.a_max;
        if (v1 * v1 - v0 * v0).abs() > 2.0 * a * length * (1.0 + 1e-12) {
            return Err(fail(format!(
                "cannot change speed from {v0} to {v1} m/s within {length} m"
            )));
        }
        let peak = lim
            .v_max
            .min(((2.0 * a * length + v0 * v0 + v1 * v1) / 2.0).sqrt())
            .max(v0.max(v1));
        let d_acc = (peak * peak - v0 * v0) / (2.0 * a);
        let d_dec = (peak * peak - v1 * v1) / (2.0 * a);
        let d_cruise = (length - d_acc - d_dec).max(0.0);
        Ok(Self {
            v0,
            v1,
            peak,
            accel: a,
            t_acc: (peak - v0) / a,
            t_cruise: if peak > 0.0 { d_cruise / peak } else { 0.0 },
            t_dec: (peak - v1) / a,
            length,
        })
    }

    fn duration(&self) -> f64 {
        self.t_acc + self.t_cruise + self.t_dec
    }

    /// (arc length, speed) at local time `t`.
    fn at(&self, t: f64) -> (f64, f64) {
        let a = self.accel;
        if t <= self.t_acc {
            (self.v0 * t + 0.5 * a * t * t, self.v0 + a * t)
        } else if t <= self.t_acc + self.t_cruise {
            let d_acc = self.v0 * self.t_acc + 0.5 * a * self.t_acc * self.t_acc;
            (d_acc + self.peak * (t - self.t_acc), self.peak)
        } else {
            let rem = (self.duration() - t).max(0.0);
            // measured back from the segment end
            (
                self.length - (self.v1 * rem + 0.5 * a * rem * rem),
                self.v1 + a * rem,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Point,
    pub speed: f64,
    pub theta: f64,
    pub theta_rate: f64,
    /// Segment index 0..3 the sample belongs to.
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub samples: Vec<TrajectorySample>,
    pub segment_durations: [f64; 3],
    pub plan: FlingPlan,
}

impl Profile {
    pub fn duration(&self) -> f64 {
        self.segment_durations.iter().sum()
    }

    pub fn p3_time(&self) -> f64 {
        self.segment_durations[0] + self.segment_durations[1]
    }

    /// CSV with columns `t,x,y,z,speed,theta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,z,speed,theta\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.t, s.position[0], s.position[1], s.position[2], s.speed, s.theta
            );
        }
        out
    }
}

struct Joint3Profile {
    start: f64,
    j: Joint3,
    cubic: f64,
    t2: f64,
    t3: f64,
}

impl Joint3Profile {
    /// (angle, rate) at global time `t`.
    fn at(&self, t: f64) -> (f64, f64) {
        if t <= self.t2 {
            return (self.start, 0.0);
        }
        let s = t - self.t3;
        let Joint3 {
            theta,
            v_theta: v,
            a_theta: a,
        } = self.j;
        if t <= self.t3 {
            (
                theta + v * s + 0.5 * a * s * s + self.cubic * s * s * s,
                v + a * s + 3.0 * self.cubic * s * s,
            )
        } else {
            (theta + v * s + 0.5 * a * s * s, v + a * s)
        }
    }
}

/// Samples the plan at `sample_rate` Hz plus exactly at every waypoint.
pub fn generate_profile(plan: &FlingPlan, sample_rate: f64) -> Result<Profile> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let w = &plan.waypoints;
    let segs: Vec<Trapezoid> = (0..3)
        .map(|s| {
            Trapezoid::plan(
                s,
                dist(&w[s].position, &w[s + 1].position),
                w[s].speed,
                w[s + 1].speed,
                plan.segments[s],
            )
        })
        .collect::<Result<_>>()?;
    let durations = [segs[0].duration(), segs[1].duration(), segs[2].duration()];
    let starts = [0.0, durations[0], durations[0] + durations[1]];
    let total = starts[2] + durations[2];

    let j3 = w[2].joint3.unwrap_or(Joint3 {
        theta: plan.theta_start,
        v_theta: 0.0,
        a_theta: 0.0,
    });
    let t23 = durations[1];
    let cubic = (j3.theta - j3.v_theta * t23 + 0.5 * j3.a_theta * t23 * t23 - plan.theta_start)
        / t23.powi(3);
    let joint = Joint3Profile {
        start: plan.theta_start,
        j: j3,
        cubic,
        t2: starts[1],
        t3: starts[2],
    };

    let events = [0.0, starts[1], starts[2], total];
    let dt = 1.0 / sample_rate;
    let n_uniform = (total / dt).ceil() as usize;
    if n_uniform > 50_000_000 {
        return Err(Error::InvalidArgument(
            "sample rate too high for trajectory length".into(),
        ));
    }
    let mut samples = Vec::with_capacity(n_uniform + 4);
    let mut next_event = 1;
    let push_event = |samples: &mut Vec<TrajectorySample>, e: usize| {
        let t = events[e];
        let (theta, theta_rate) = joint.at(t);
        samples.push(TrajectorySample {
            t,
            position: w[e].position,
            speed: w[e].speed,
            theta,
            theta_rate,
            segment: e.min(2),
        });
    };
    push_event(&mut samples, 0);
    for i in 1..=n_uniform {
        let t = i as f64 * dt;
        while next_event < 4 && events[next_event] <= t + 1e-12 {
            if events[next_event] > samples.last().map_or(-1.0, |s| s.t) {
                push_event(&mut samples, next_event);
            }
            next_event += 1;
        }
        if t >= total || t <= samples.last().map_or(-1.0, |s| s.t) + 1e-12 {
            continue;
        }
        let s = (0..3).rev().find(|&s| t > starts[s]).unwrap_or(0);
        let (arc, speed) = segs[s].at(t - starts[s]);
        let (a, b) = (&w[s].position, &w[s + 1].position);
        let f = arc / segs[s].length;
        let (theta, theta_rate) = joint.at(t);
        samples.push(TrajectorySample {
            t,
            position: [
                a[0] + (b[0] - a[0]) * f,
                a[1] + (b[1] - a[1]) * f,
                a[2] + (b[2] - a[2]) * f,
            ],
            speed,
            theta,
            theta_rate,
            segment: s,
        });
    }
    while next_event < 4 {
        if events[next_event] > samples.last().map_or(-1.0, |s| s.t) {
            push_event(&mut samples, next_event);
        }
        next_event += 1;
    }
    Ok(Profile {
        samples,
        segment_durations: durations,
        plan: plan.clone(),
    })
}

/// Non-fling parts of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShakeConfig {
    /// Crumple, lift, lay-down and image capture (s).
    pub reset: f64,
    pub period: f64,
    pub vertical_repeats: u32,
    pub horizontal_repeats: u32,
}

impl Default for ShakeConfig {
    fn default() -> Self {
        Self {
            reset: 34.0,
            period: 1.5,
            vertical_repeats: 3,
            horizontal_repeats: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleTiming {
    pub reset: f64,
    pub vertical_shake: f64,
    pub horizontal_shake: f64,
    pub fling: f64,
    pub total: f64,
}

pub fn cycle_timing(profile: &Profile, shake: &ShakeConfig) -> CycleTiming {
    let vertical_shake = f64::from(shake.vertical_repeats) * shake.period;
    let horizontal_shake = f64::from(shake.horizontal_repeats) * shake.period;
    let fling = profile.duration();
    CycleTiming {
        reset: shake.reset,
        vertical_shake,
        horizontal_shake,
        fling,
        total: shake.reset + vertical_shake + horizontal_shake + fling,
    }
}
