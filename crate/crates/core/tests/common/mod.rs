//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmnav_core::geom::Vec2;
use swarmnav_core::navmesh::{MapSpec, NavMesh};
use swarmnav_core::nn::{self, init_params, Matrix, NetworkShape, PolicyParams};
use swarmnav_core::ppo::{ppo_loss, Batch, TrainConfig};
use swarmnav_core::sim::{random_rect_map, Action, AgentStatus, World};

pub fn random_map(rng: &mut ChaCha8Rng) -> MapSpec {
    let count = rng.gen_range(0..=10);
    random_rect_map(100.0, count, 4.0, 20.0, 3.0, rng).unwrap()
}

pub fn free_point(mesh: &NavMesh, rng: &mut ChaCha8Rng) -> Vec2 {
    loop {
        let p = Vec2::new(rng.gen_range(0.5..99.5), rng.gen_range(0.5..99.5));
        if mesh.locate(p).is_some() {
            return p;
        }
    }
}

/// Plain Dijkstra over (triangle, entry edge) with the midpoint crossing
/// cost, using a linear scan instead of a heap.
pub fn dijkstra_cost(mesh: &NavMesh, start: Vec2, goal: Vec2) -> Option<f64> {
    let s = mesh.locate(start)?;
    let g = mesh.locate(goal)?;
    if s == g {
        return Some(0.0);
    }
    let n = mesh.triangles.len() * 4;
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[s * 4 + 3] = 0.0;
    loop {
        let mut best = None;
        for i in 0..n {
            if !done[i] && dist[i].is_finite() && best.map_or(true, |b: usize| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let cur = best?;
        done[cur] = true;
        let (t, entry) = (cur / 4, cur % 4);
        if t == g {
            return Some(dist[cur]);
        }
        let tri = mesh.triangles[t];
        let mid = |k: usize| {
            let a = mesh.vertices[tri[k]];
            let b = mesh.vertices[tri[(k + 1) % 3]];
            Vec2::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
        };
        for k in 0..3 {
            if k == entry {
                continue;
            }
            let Some(next) = mesh.adjacency[t][k] else { continue };
            let cost = if entry == 3 { 0.0 } else { mid(entry).distance(mid(k)) };
            let back = (0..3).find(|&j| mesh.adjacency[next][j] == Some(t)).unwrap();
            let ns = next * 4 + back;
            if dist[cur] + cost < dist[ns] {
                dist[ns] = dist[cur] + cost;
            }
        }
    }
}

/// Denominator floor of the elementwise relative error, so entries that are
/// zero up to rounding are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// Largest `|g - fd| / max(|g|, |fd|, REL_FLOOR)` over all parameters, with
/// central differences of step 1e-5.
fn gradient_error(params: &PolicyParams, grad: &[f64], loss: impl Fn(&PolicyParams) -> f64) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let mut up = params.data().to_vec();
        let mut down = up.clone();
        up[i] += h;
        down[i] -= h;
        let lu = loss(&PolicyParams::from_data(params.shape(), up).unwrap());
        let ld = loss(&PolicyParams::from_data(params.shape(), down).unwrap());
        let fd = (lu - ld) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(REL_FLOOR));
    }
    worst
}

fn small_net(rng: &mut ChaCha8Rng, seed: u64) -> (PolicyParams, Matrix) {
    let shape = NetworkShape::new(rng.gen_range(3..9), rng.gen_range(1..4), rng.gen_range(3..9), 6);
    let mut params = init_params(shape, seed).unwrap();
    for w in params.data_mut() {
        *w += rng.gen_range(-0.1..0.1);
    }
    let rows = 5;
    let obs: Vec<f64> = (0..rows * shape.input).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (params, Matrix::from_vec(rows, shape.input, obs).unwrap())
}

/// Checks the network gradient on the squared error
/// `½ Σ (π - Y)² + ½ Σ (V - c)²` against random targets. The logit gradient
/// `π ⊙ (e - ⟨e, π⟩)` with `e = π - Y` is written out here.
pub fn network_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, obs) = small_net(&mut rng, seed);
    let k = 6;
    let y: Vec<f64> = (0..obs.rows * k).map(|_| rng.gen_range(0.0..1.0)).collect();
    let c: Vec<f64> = (0..obs.rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let loss = |p: &PolicyParams| {
        let out = nn::infer(p, &obs).unwrap();
        let lp: f64 = out.probs.data.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        0.5 * (lp + out.values.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
    };
    let (out, trace) = nn::forward(&params, &obs).unwrap();
    let mut d_logits = Matrix::zeros(obs.rows, k);
    for i in 0..obs.rows {
        let p = out.probs.row(i);
        let e: Vec<f64> = (0..k).map(|j| p[j] - y[i * k + j]).collect();
        let m: f64 = e.iter().zip(p).map(|(a, b)| a * b).sum();
        for j in 0..k {
            d_logits.data[i * k + j] = p[j] * (e[j] - m);
        }
    }
    let d_values: Vec<f64> = out.values.iter().zip(&c).map(|(a, b)| a - b).collect();
    let grad = nn::backward(&params, &trace, &d_logits, &d_values).unwrap();
    gradient_error(&params, &grad, loss)
}

/// Checks the clipped surrogate loss gradient. Old log-probabilities are
/// jittered so some ratios fall outside the clip range, keeping away from
/// the kinks.
pub fn ppo_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, obs) = small_net(&mut rng, seed);
    let cfg = TrainConfig {
        clip: 0.1,
        value_weight: 0.5,
        entropy_coef: if seed % 2 == 0 { 0.0 } else { 0.01 },
        ..TrainConfig::default()
    };
    let out = nn::infer(&params, &obs).unwrap();
    let n = obs.rows;
    let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(0..6)).collect();
    let old_log_probs = (0..n)
        .map(|i| loop {
            let jitter: f64 = rng.gen_range(-0.3..0.3);
            let r = (-jitter).exp();
            if (r - 1.0 - cfg.clip).abs() > 1e-3 && (r - 1.0 + cfg.clip).abs() > 1e-3 {
                break out.log_probs.get(i, actions[i]) + jitter;
            }
        })
        .collect();
    let batch = Batch {
        obs,
        actions,
        old_log_probs,
        advantages: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        targets: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let (_, grad) = ppo_loss(&params, &batch, &cfg).unwrap();
    gradient_error(&params, &grad, |p| ppo_loss(p, &batch, &cfg).unwrap().0.loss)
}

/// Advantages by the explicit sum `Σ_l (γλ)^l δ_{t+l}`, stopping after the
/// first terminal transition.
pub fn gae_expansion(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, g: f64, lam: f64) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta = |t: usize| rewards[t] + if dones[t] { 0.0 } else { g * next_value(t) } - values[t];
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for l in t..n {
                sum += w * delta(l);
                if dones[l] {
                    break;
                }
                w *= g * lam;
            }
            sum
        })
        .collect()
}

/// Discounted reward-to-go, restarting at terminal transitions.
pub fn reward_to_go(rewards: &[f64], dones: &[bool], g: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for l in t..rewards.len() {
                sum += w * rewards[l];
                if dones[l] {
                    break;
                }
                w *= g;
            }
            sum
        })
        .collect()
}

fn seg_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((a.x + t * dx - p.x).powi(2) + (a.y + t * dy - p.y).powi(2)).sqrt()
}

fn inside(p: Vec2, poly: &[Vec2]) -> bool {
    let mut odd = false;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) {
            odd = !odd;
        }
    }
    odd
}

/// Drives `world` with uniform random actions and compares every reported
/// contact flag with an all-pairs distance check and a direct obstacle
/// test. Returns (agent-steps checked, mismatches).
pub fn collision_mismatches(world: &mut World, steps: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = world.config().clone();
    let (r, side) = (cfg.agent_radius, cfg.map.domain_side);
    let (mut checked, mut bad) = (0, 0);
    for _ in 0..steps {
        let actions: Vec<Option<Action>> = world
            .agents()
            .iter()
            .map(|a| (a.status == AgentStatus::Running).then(|| Action::ALL[rng.gen_range(0..6)]))
            .collect();
        let out = world.step(&actions).unwrap();
        let moved: Vec<(usize, Vec2)> = out
            .agents
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|s| (i, s.position)))
            .collect();
        for &(i, p) in &moved {
            let s = out.agents[i].as_ref().unwrap();
            let near = moved.iter().any(|&(j, q)| j != i && p.distance(q) < cfg.safe_distance);
            let wall = p.x < r || p.y < r || p.x > side - r || p.y > side - r;
            let block = cfg.map.obstacles.iter().any(|o| {
                let v = &o.vertices;
                inside(p, v) || (0..v.len()).any(|k| seg_dist(p, v[k], v[(k + 1) % v.len()]) < r)
            });
            let collided = s.transition == Some(AgentStatus::Collided);
            checked += 1;
            if near != s.agent_contact || (wall || block) != s.obstacle_contact || collided != (near || wall || block) {
                bad += 1;
            }
        }
    }
    (checked, bad)
}
