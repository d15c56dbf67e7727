//! Deployment geometry: AP and user positions plus cached link distances
//! and unit direction vectors.

use crate::error::{Error, Result};
use crate::params::{SystemParams, REF_DISTANCE_M};
use crate::vec3::Vec3;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How many times a user position may be redrawn before layout generation
/// gives up on satisfying the distance floor.
const MAX_REDRAWS: usize = 1000;

/// One realized network geometry. Distances and directions are precomputed
/// for every (AP, user) pair; `directions[[l, k]]` points from AP `l` toward
/// user `k` and has unit length.
#[derive(Debug, Clone)]
pub struct ScenarioLayout {
    pub ap_positions: Vec<Vec3>,
    pub user_positions: Vec<Vec3>,
    pub distances: Array2<f64>,
    pub directions: Array2<Vec3>,
}

impl ScenarioLayout {
    /// Builds the derived tables from explicit positions. Fails if any link
    /// is shorter than the path loss reference distance.
    pub fn from_positions(ap_positions: Vec<Vec3>, user_positions: Vec<Vec3>) -> Result<Self> {
        let l = ap_positions.len();
        let k = user_positions.len();
        if l == 0 || k == 0 {
            return Err(Error::DimensionMismatch("need at least one AP and one user".into()));
        }
        if k > l {
            return Err(Error::DimensionMismatch(format!(
                "more users than APs ({k} > {l})"
            )));
        }
        for (name, ps) in [("ap", &ap_positions), ("user", &user_positions)] {
            if let Some(i) = ps.iter().position(|p| !p.is_finite()) {
                return Err(Error::LayoutGeneration(format!("{name} position {i} is not finite")));
            }
        }
        let mut distances = Array2::zeros((l, k));
        let mut directions = Array2::from_elem((l, k), Vec3::ZERO);
        for (li, ap) in ap_positions.iter().enumerate() {
            for (ki, user) in user_positions.iter().enumerate() {
                let diff = *user - *ap;
                let d = diff.norm();
                if d < REF_DISTANCE_M {
                    return Err(Error::LayoutGeneration(format!(
                        "link ({li}, {ki}) is {d:.3} m, below the {REF_DISTANCE_M} m floor"
                    )));
                }
                distances[[li, ki]] = d;
                directions[[li, ki]] = diff * (1.0 / d);
            }
        }
        Ok(ScenarioLayout { ap_positions, user_positions, distances, directions })
    }

    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }
}

/// Draws a uniform random layout: APs at `ap_height`, users at `user_height`,
/// both uniform over the square area. Users violating the distance floor
/// against any AP are redrawn.
pub fn make_layout(params: &SystemParams, seed: u64) -> Result<ScenarioLayout> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = params.area_side;

    let ap_positions: Vec<Vec3> = (0..params.num_aps)
        .map(|_| {
            let x = rng.random_range(0.0..side);
            let y = rng.random_range(0.0..side);
            Vec3::new(x, y, params.ap_height)
        })
        .collect();

    let mut user_positions = Vec::with_capacity(params.num_users);
    for k in 0..params.num_users {
        let mut placed = false;
        for _ in 0..MAX_REDRAWS {
            let x = rng.random_range(0.0..side);
            let y = rng.random_range(0.0..side);
            let cand = Vec3::new(x, y, params.user_height);
            let ok = ap_positions.iter().all(|ap| (cand - *ap).norm() >= REF_DISTANCE_M);
            if ok {
                user_positions.push(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::LayoutGeneration(format!(
                "could not place user {k} at least {REF_DISTANCE_M} m from every AP after {MAX_REDRAWS} draws"
            )));
        }
    }

    ScenarioLayout::from_positions(ap_positions, user_positions)
}
