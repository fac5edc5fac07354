//! Two agents swapping places across a circle under the dodge policy,
//! checked against a stand-alone re-simulation that shares no code with the
//! world stepping.

use swarmnav_core::eval::{run_trials, EvalOptions, FixedPolicy, TrialOutcome};
use swarmnav_core::sim::{ScenarioKind, ScenarioSpec, World, WorldConfig};

const SIDE: f64 = 40.0;
const RAYS: usize = 45;
const RANGE: f64 = 20.0;

#[derive(Clone, Copy, Debug)]
struct Body {
    x: f64,
    y: f64,
    h: f64,
    gx: f64,
    gy: f64,
    dist: f64,
}

/// Distance along the ray to the first wall of the square.
fn wall_hit(x: f64, y: f64, dx: f64, dy: f64) -> f64 {
    let mut t = f64::INFINITY;
    if dx > 0.0 {
        t = t.min((SIDE - x) / dx);
    } else if dx < 0.0 {
        t = t.min(-x / dx);
    }
    if dy > 0.0 {
        t = t.min((SIDE - y) / dy);
    } else if dy < 0.0 {
        t = t.min(-y / dy);
    }
    t
}

/// Distance along the ray to a unit disc, if it is hit ahead.
fn disc_hit(x: f64, y: f64, dx: f64, dy: f64, cx: f64, cy: f64) -> Option<f64> {
    let tc = (cx - x) * dx + (cy - y) * dy;
    let h2 = (cx - x).powi(2) + (cy - y).powi(2) - tc * tc;
    if h2 > 1.0 || tc < 0.0 {
        return None;
    }
    Some(tc - (1.0 - h2).sqrt())
}

/// Which rays see the partner within 8 units, before anything else.
fn partner_rays(me: &Body, other: &Body) -> Vec<usize> {
    (0..RAYS)
        .filter(|&k| {
            let a = me.h + std::f64::consts::TAU * k as f64 / RAYS as f64;
            let (dx, dy) = (a.cos(), a.sin());
            match disc_hit(me.x, me.y, dx, dy, other.x, other.y) {
                Some(t) => t < RANGE && t < wall_hit(me.x, me.y, dx, dy) && t <= 0.4 * RANGE,
                None => false,
            }
        })
        .collect()
}

fn wrap(h: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let w = h.rem_euclid(t);
    if w >= t {
        0.0
    } else {
        w
    }
}

fn advance(me: &mut Body, other: &Body) {
    let seen = partner_rays(me, other);
    let (x0, y0) = (me.x, me.y);
    if seen.iter().any(|&k| k == RAYS - 1 || k == 0 || k == 1) {
        me.h = wrap(me.h + 1.0);
    } else if seen.iter().any(|&k| (RAYS - 9..=RAYS - 2).contains(&k)) {
        me.x += me.h.cos();
        me.y += me.h.sin();
    } else {
        let (ox, oy) = (me.gx - me.x, me.gy - me.y);
        let d = (ox * ox + oy * oy).sqrt();
        if d > 0.0 {
            me.h = wrap(oy.atan2(ox));
            let s = d.min(1.0) / d;
            me.x += ox * s;
            me.y += oy * s;
        }
    }
    me.dist += ((me.x - x0).powi(2) + (me.y - y0).powi(2)).sqrt();
}

#[test]
fn dodge_matches_hand_simulation() {
    let mut spec = ScenarioSpec::scaled(ScenarioKind::CircleTransport, SIDE);
    spec.circle_radius = 15.0;
    let cfg = WorldConfig::new(swarmnav_core::MapSpec::empty(SIDE), 2, 21);
    let world = World::new(cfg.clone(), spec.clone()).unwrap();
    let mut bodies: Vec<Body> = world
        .agents()
        .iter()
        .map(|a| Body {
            x: a.start.x,
            y: a.start.y,
            h: a.pose.heading(),
            gx: a.goal.x,
            gy: a.goal.y,
            dist: 0.0,
        })
        .collect();
    assert!((bodies[0].x - 35.0).abs() < 1e-12 && (bodies[1].x - 5.0).abs() < 1e-12);

    let mut closed: Vec<(usize, TrialOutcome, f64, u64)> = Vec::new();
    let mut dodged = false;
    for step in 1..=200u64 {
        let snapshot = bodies.clone();
        for i in 0..2 {
            if !partner_rays(&snapshot[i], &snapshot[1 - i]).is_empty() {
                dodged = true;
            }
            advance(&mut bodies[i], &snapshot[1 - i]);
        }
        let gap = ((bodies[0].x - bodies[1].x).powi(2) + (bodies[0].y - bodies[1].y).powi(2)).sqrt();
        for (i, b) in bodies.iter().enumerate() {
            let off_map = b.x < 1.0 || b.y < 1.0 || b.x > SIDE - 1.0 || b.y > SIDE - 1.0;
            let home = ((b.x - b.gx).powi(2) + (b.y - b.gy).powi(2)).sqrt() <= 1.0;
            if gap < 2.0 || off_map {
                closed.push((i, TrialOutcome::Accident, b.dist, step));
            } else if home {
                closed.push((i, TrialOutcome::Success, b.dist, step));
            }
        }
        if !closed.is_empty() {
            break;
        }
    }
    assert!(dodged, "the scenario never triggered the dodge rule");
    assert!(!closed.is_empty(), "hand simulation did not finish");

    let opts = EvalOptions::new(closed.len() as u64);
    let report = run_trials(&mut FixedPolicy::Dodge, cfg, spec, &opts).unwrap();
    assert_eq!(report.records.len(), closed.len());
    for (rec, (agent, outcome, dist, step)) in report.records.iter().zip(&closed) {
        assert_eq!(rec.agent, *agent);
        assert_eq!(rec.outcome, *outcome);
        assert_eq!(rec.step, *step);
        assert!((rec.distance - dist).abs() < 1e-9, "{} vs {}", rec.distance, dist);
    }
    let successes = closed.iter().filter(|c| c.1 == TrialOutcome::Success).count();
    assert_eq!(report.successes as usize, successes);
}
