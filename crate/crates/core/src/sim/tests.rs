use super::*;
use crate::geom::HitKind;
use crate::navmesh::{MapSpec, Polygon};

fn open_world(side: f64, n: usize, seed: u64) -> World {
    let spec = ScenarioSpec::scaled(ScenarioKind::Basic, side);
    let cfg = WorldConfig::new(MapSpec::empty(side), n, seed);
    World::new(cfg, spec).unwrap()
}

/// Independent ray–circle solver by projecting the center onto the ray.
fn ray_circle(o: Vec2, d: Vec2, c: Vec2, r: f64) -> Option<f64> {
    let tc = (c.x - o.x) * d.x + (c.y - o.y) * d.y;
    let h2 = (c.x - o.x).powi(2) + (c.y - o.y).powi(2) - tc * tc;
    if h2 > r * r || tc < 0.0 {
        return None;
    }
    Some(tc - (r * r - h2).sqrt())
}

#[test]
fn single_agent_starts_at_its_start() {
    let w = open_world(100.0, 1, 1);
    let a = w.agent(0);
    assert_eq!(a.status, AgentStatus::Running);
    assert_eq!(a.pose.position, a.start);
    assert_eq!(a.distance_traveled, 0.0);
    assert!(a.start.distance(a.goal) >= 10.0);
    assert!((a.baseline_length - (a.start.distance(a.goal) - 1.0)).abs() < 1e-12);
}

#[test]
fn spawn_layout_is_deterministic_and_spaced() {
    let a = open_world(200.0, 80, 42);
    let b = open_world(200.0, 80, 42);
    assert_eq!(a.agents(), b.agents());
    for (i, p) in a.agents().iter().enumerate() {
        for q in &a.agents()[i + 1..] {
            assert!(p.pose.position.distance(q.pose.position) >= 2.0);
        }
    }
    let c = open_world(200.0, 80, 43);
    assert_ne!(a.agents(), c.agents());
}

#[test]
fn circle_transport_uses_antipodes() {
    let spec = ScenarioSpec::preset(ScenarioKind::CircleTransport);
    let cfg = spec.world_config(20, 5).unwrap();
    let w = World::new(cfg, spec).unwrap();
    let c = Vec2::new(100.0, 100.0);
    for (k, a) in w.agents().iter().enumerate() {
        let angle = 2.0 * core::f64::consts::PI * k as f64 / 20.0;
        let expect = Vec2::new(100.0 + 80.0 * angle.cos(), 100.0 + 80.0 * angle.sin());
        assert!(a.start.distance(expect) < 1e-9, "agent {k}");
        assert!((a.goal - c + (a.start - c)).norm() < 1e-9);
    }
}

#[test]
fn overcrowded_world_is_rejected() {
    let cfg = WorldConfig::new(MapSpec::empty(20.0), 200, 1);
    let err = World::new(cfg, ScenarioSpec::scaled(ScenarioKind::Basic, 20.0)).unwrap_err();
    assert!(matches!(err, SimError::Overcrowded { .. }));
}

#[test]
fn lone_agent_sees_nothing() {
    let mut w = open_world(1000.0, 1, 2);
    w.place_agent(0, Pose::new(Vec2::new(500.0, 500.0), 0.3), Vec2::new(600.0, 500.0))
        .unwrap();
    let obs = w.observe(0);
    assert_eq!(obs.rays.len(), 45);
    assert!(obs.rays.iter().all(|r| *r == RayHit { distance: 20.0, kind: HitKind::None }));
    assert_eq!(obs.encoded.len(), 90);
    assert!(obs.encoded.chunks(2).all(|c| c == [1.0, 0.0]));
    assert_eq!(w.crowdedness(0), 0);
}

#[test]
fn wall_ahead() {
    let mut w = open_world(100.0, 1, 2);
    w.place_agent(0, Pose::new(Vec2::new(95.0, 50.0), 0.0), Vec2::new(50.0, 50.0))
        .unwrap();
    let obs = w.observe(0);
    assert_eq!(obs.rays[0], RayHit { distance: 5.0, kind: HitKind::StaticObstacle });
    assert_eq!(obs.encoded[0], 0.25);
}

#[test]
fn partner_hit_matches_circle_oracle() {
    let mut w = open_world(100.0, 2, 2);
    let o = Vec2::new(40.0, 40.0);
    let c = Vec2::new(46.0, 41.5);
    w.place_agent(0, Pose::new(o, 0.0), Vec2::new(10.0, 10.0)).unwrap();
    w.place_agent(1, Pose::new(c, 0.0), Vec2::new(90.0, 90.0)).unwrap();
    let obs = w.observe(0);
    let mut hits = 0;
    for (k, ray) in obs.rays.iter().enumerate() {
        let dir = Vec2::from_angle(2.0 * core::f64::consts::PI * k as f64 / 45.0);
        match ray_circle(o, dir, c, 1.0) {
            Some(t) if t < 20.0 => {
                hits += 1;
                assert_eq!(ray.kind, HitKind::Agent);
                assert!((ray.distance - t).abs() < 1e-9);
            }
            _ => assert_ne!(ray.kind, HitKind::Agent),
        }
    }
    assert!(hits >= 1);
    assert_eq!(w.crowdedness(0), 1);
}

#[test]
fn ring_of_six_is_fully_perceived() {
    let mut w = open_world(100.0, 7, 3);
    let o = Vec2::new(50.0, 50.0);
    w.place_agent(0, Pose::new(o, 0.1), Vec2::new(10.0, 10.0)).unwrap();
    let centers: Vec<Vec2> = (0..6)
        .map(|k| o + Vec2::from_angle(k as f64 * core::f64::consts::PI / 3.0) * 3.0)
        .collect();
    for (k, &c) in centers.iter().enumerate() {
        w.place_agent(k + 1, Pose::new(c, 0.0), Vec2::new(90.0, 90.0)).unwrap();
    }
    // exhaustive enumeration: nearest disc per ray
    let mut seen = [false; 6];
    for r in 0..45 {
        let dir = Vec2::from_angle(0.1 + 2.0 * core::f64::consts::PI * r as f64 / 45.0);
        let best = centers
            .iter()
            .enumerate()
            .filter_map(|(k, &c)| ray_circle(o, dir, c, 1.0).map(|t| (t, k)))
            .filter(|&(t, _)| t < 20.0)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, k)) = best {
            seen[k] = true;
        }
    }
    let oracle = seen.iter().filter(|&&s| s).count();
    assert_eq!(oracle, 6);
    assert_eq!(w.crowdedness(0), oracle);
}

#[test]
fn kinematics_of_local_moves() {
    let mut w = open_world(100.0, 1, 2);
    let start = Pose::new(Vec2::new(0.0, 0.0), 0.0);
    w.place_agent(0, start, Vec2::new(50.0, 50.0)).unwrap();
    w.apply_action(0, Action::Forward).unwrap();
    assert_eq!(w.agent(0).pose.position, Vec2::new(1.0, 0.0));
    w.apply_action(0, Action::Stay).unwrap();
    assert_eq!(w.agent(0).pose.position, Vec2::new(1.0, 0.0));
    w.apply_action(0, Action::Backward).unwrap();
    assert_eq!(w.agent(0).pose.position, Vec2::new(0.0, 0.0));
    assert_eq!(w.agent(0).distance_traveled, 2.0);
    w.apply_action(0, Action::TurnRight).unwrap();
    assert_eq!(w.agent(0).pose.heading(), 1.0);
    w.apply_action(0, Action::TurnLeft).unwrap();
    w.apply_action(0, Action::TurnLeft).unwrap();
    assert!((w.agent(0).pose.heading() - (2.0 * core::f64::consts::PI - 1.0)).abs() < 1e-15);
}

#[test]
fn navigate_steps_toward_waypoint() {
    let mut w = open_world(100.0, 1, 2);
    w.place_agent(0, Pose::new(Vec2::new(0.0, 0.0), 2.0), Vec2::new(10.0, 0.0))
        .unwrap();
    w.apply_action(0, Action::Navigate).unwrap();
    assert_eq!(w.agent(0).pose.position, Vec2::new(1.0, 0.0));
    assert_eq!(w.agent(0).pose.heading(), 0.0);
}

#[test]
fn navigate_never_overshoots() {
    let mut w = open_world(100.0, 1, 2);
    w.place_agent(0, Pose::new(Vec2::new(50.0, 50.0), 0.0), Vec2::new(50.4, 50.0))
        .unwrap();
    w.apply_action(0, Action::Navigate).unwrap();
    assert_eq!(w.agent(0).pose.position, Vec2::new(50.4, 50.0));
}

#[test]
fn head_on_collision() {
    let mut w = open_world(100.0, 2, 2);
    w.place_agent(0, Pose::new(Vec2::new(48.05, 50.0), 0.0), Vec2::new(90.0, 50.0))
        .unwrap();
    w.place_agent(1, Pose::new(Vec2::new(51.95, 50.0), core::f64::consts::PI), Vec2::new(10.0, 50.0))
        .unwrap();
    let out = w.step(&[Some(Action::Forward), Some(Action::Forward)]).unwrap();
    for s in out.agents.iter().map(|s| s.as_ref().unwrap()) {
        assert!((s.position.x - 50.0).abs() > 0.9);
        assert_eq!(s.transition, Some(AgentStatus::Collided));
        assert_eq!(s.reward.r_scenario, -0.5);
        assert!(s.agent_contact);
        assert!(s.respawned);
    }
    assert!(w.agents().iter().all(|a| a.status == AgentStatus::Running));
}

#[test]
fn arrival_rewards_and_respawns() {
    let mut w = open_world(100.0, 1, 2);
    w.place_agent(0, Pose::new(Vec2::new(50.0, 50.0), 0.0), Vec2::new(51.5, 50.0))
        .unwrap();
    let out = w.step(&[Some(Action::Forward)]).unwrap();
    let s = out.agents[0].as_ref().unwrap();
    assert_eq!(s.transition, Some(AgentStatus::Arrived));
    assert_eq!(s.reward.r_scenario, 1.0);
    assert_eq!(s.reward.total, 0.0 + 1.0 + -0.0001);
    assert_ne!(w.agent(0).goal, Vec2::new(51.5, 50.0));
    assert_eq!(w.agent(0).spawn_step, 1);
}

#[test]
fn navigate_reward_without_event() {
    let mut w = open_world(100.0, 1, 2);
    w.place_agent(0, Pose::new(Vec2::new(20.0, 20.0), 0.0), Vec2::new(80.0, 80.0))
        .unwrap();
    let out = w.step(&[Some(Action::Navigate)]).unwrap();
    let s = out.agents[0].as_ref().unwrap();
    assert_eq!(s.transition, None);
    assert_eq!(s.reward.total, 0.00005 + 0.0 + -0.0001);
    assert!((s.reward.total + 0.00005).abs() < 1e-18);
}

#[test]
fn wall_contact_collides() {
    let mut w = open_world(100.0, 1, 2);
    w.place_agent(0, Pose::new(Vec2::new(1.5, 50.0), core::f64::consts::PI), Vec2::new(80.0, 50.0))
        .unwrap();
    let out = w.step(&[Some(Action::Forward)]).unwrap();
    let s = out.agents[0].as_ref().unwrap();
    assert!(s.obstacle_contact && !s.agent_contact);
    assert_eq!(s.transition, Some(AgentStatus::Collided));
}

#[test]
fn timeout_after_budget() {
    let spec = ScenarioSpec::scaled(ScenarioKind::Basic, 100.0);
    let mut cfg = WorldConfig::new(MapSpec::empty(100.0), 1, 4);
    cfg.max_steps = 5;
    let mut w = World::new(cfg, spec).unwrap();
    for k in 1..=6 {
        let out = w.step(&[Some(Action::Stay)]).unwrap();
        let s = out.agents[0].as_ref().unwrap();
        if k <= 5 {
            assert_eq!(s.transition, None);
        } else {
            assert_eq!(s.transition, Some(AgentStatus::TimedOut));
            assert_eq!(s.reward.r_scenario, 0.0);
        }
    }
}

#[test]
fn protocol_errors() {
    let mut w = open_world(100.0, 2, 2);
    assert!(matches!(w.step(&[Some(Action::Stay)]), Err(SimError::Protocol { .. })));
    assert!(matches!(
        w.step(&[Some(Action::Stay), None]),
        Err(SimError::Protocol { agent: 1, .. })
    ));
    let spec = ScenarioSpec::scaled(ScenarioKind::Basic, 100.0);
    let mut cfg = WorldConfig::new(MapSpec::empty(100.0), 1, 4);
    cfg.baseline_mode = true;
    let mut w = World::new(cfg, spec).unwrap();
    assert!(matches!(w.step(&[Some(Action::Navigate)]), Err(SimError::Protocol { .. })));
    assert_eq!(w.observe(0).encoded.len(), 92);
    assert!(w.observe(0).encoded.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn planner_only_arrival_step_bound() {
    for seed in 0..20 {
        let mut w = open_world(100.0, 1, seed);
        let a = w.agent(0).clone();
        let bound = (a.start.distance(a.goal) / 1.0).ceil() as u64 + 2;
        let mut steps = 0;
        loop {
            steps += 1;
            let out = w.step(&[Some(Action::Navigate)]).unwrap();
            if let Some(t) = out.agents[0].as_ref().unwrap().transition {
                assert_eq!(t, AgentStatus::Arrived);
                break;
            }
            assert!(steps <= bound);
        }
        assert!(steps <= bound);
    }
}

#[test]
fn planner_routes_around_a_wall() {
    let map = MapSpec {
        domain_side: 60.0,
        obstacles: vec![Polygon::rect(Vec2::new(28.0, 5.0), 4.0, 45.0)],
    };
    let spec = ScenarioSpec::scaled(ScenarioKind::Basic, 60.0);
    let cfg = WorldConfig::new(map, 1, 1);
    let mut w = World::new(cfg, spec).unwrap();
    w.place_agent(0, Pose::new(Vec2::new(10.0, 20.0), 0.0), Vec2::new(50.0, 20.0))
        .unwrap();
    let baseline = w.agent(0).baseline_length;
    for _ in 0..500 {
        let out = w.step(&[Some(Action::Navigate)]).unwrap();
        let s = out.agents[0].clone().unwrap();
        if let Some(t) = s.transition {
            assert_eq!(t, AgentStatus::Arrived);
            assert!(s.distance_traveled >= baseline * 0.9);
            return;
        }
    }
    panic!("planner never arrived");
}

#[test]
fn identical_inputs_give_identical_outcomes() {
    let run = || {
        let mut w = open_world(60.0, 10, 8);
        let mut log = Vec::new();
        for t in 0..200 {
            let acts: Vec<Option<Action>> = (0..10)
                .map(|i| Some(Action::ALL[(i * 7 + t * 3) % 6]))
                .collect();
            log.push(w.step(&acts).unwrap());
        }
        log
    };
    assert_eq!(run(), run());
}
