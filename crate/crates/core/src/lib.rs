//! Kernels for multi-agent navigation on triangulated maps.
//!
//! Agents are unit discs moving in a square domain with polygon obstacles.
//! At every step each agent either defers to a navmesh planner ([`navmesh`])
//! or takes one of five local avoidance moves, and the choice is learned with
//! PPO ([`ppo`]) on a small fully-connected network ([`nn`]). The simulator
//! ([`sim`]) and evaluation metrics ([`eval`]) are deterministic for a given
//! seed.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the CLI and
//! anything touching the filesystem live in the `swarmnav` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod eval;
pub mod geom;
pub mod math;
pub mod navmesh;
pub mod nn;
pub mod ppo;
pub mod sim;

pub use geom::{Pose, RayHit, Vec2};
pub use navmesh::{MapSpec, NavMesh, Polygon};
pub use nn::{Matrix, PolicyParams};
pub use sim::{Action, ScenarioKind, ScenarioSpec, World, WorldConfig};


