use crate::cloth::{
    make_cloth, settle_mut, ClothState, Collider, Constraint, PhysicalParams, SettleOptions,
    Sphere, Vec3,
};
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::savgol::savgol_smooth;

const SAVGOL_WINDOW: usize = 21;
const SAVGOL_ORDER: usize = 3;

/// One recorded frame of the pulling action.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Simulation frame index, counted from 1 after the pull starts.
    pub t: usize,
    pub positions: Vec<Vec3>,
    /// Smoothed force sensed by the gripper on the last row, tared against
    /// the settled cloth before pulling (N).
    pub force: Vec3,
}

/// `count` evenly spaced actions from 0 to `max` inclusive.
pub fn action_grid(max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|i| max * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Frame numbers (1-based) of `t` observations spread uniformly over
/// `raw_steps` frames; the last one is always the final frame.
pub fn subsample_indices(raw_steps: usize, t: usize) -> Vec<usize> {
    (0..t)
        .map(|j| ((j + 1) as f64 * raw_steps as f64 / t as f64).round() as usize)
        .collect()
}

fn settle_options(cfg: &SimConfig, gravity: f64) -> SettleOptions {
    SettleOptions {
        tol: cfg.settle_tol,
        max_steps: cfg.settle_max_steps,
        dt: cfg.dt,
        gravity,
        damping: cfg.settle_damping,
    }
}

fn base_cloth(params: PhysicalParams, cfg: &SimConfig) -> Result<ClothState> {
    let mut s = make_cloth(cfg.rows, cfg.cols, cfg.spacing, params)?;
    s.node_mass = cfg.node_mass;
    s.contact_stiffness = cfg.contact_stiffness;
    Ok(s)
}

fn check_action(a: f64, max: f64, what: &str) -> Result<()> {
    if !(0.0..=max * (1.0 + 1e-12)).contains(&a) {
        return Err(SimError::Argument(format!(
            "{what} action {a} outside [0, {max}]"
        )));
    }
    Ok(())
}

/// Cloth held by both gripper rows and settled under gravity.
pub fn pulling_initial(params: PhysicalParams, cfg: &SimConfig) -> Result<ClothState> {
    let mut s = base_cloth(params, cfg)?;
    for r in s.gripper_rows() {
        s.set_row_constraint(r, Constraint::Fixed);
    }
    let opts = SettleOptions {
        tol: cfg.ea_settle_tol,
        ..settle_options(cfg, cfg.gravity)
    };
    settle_mut(&mut s, &opts)?;
    Ok(s)
}

/// Pulls the two gripper rows apart along y at `cfg.ea_pull_speed` for
/// `raw_steps` frames and returns `t` uniformly subsampled observations.
pub fn run_pulling_ea(
    params: PhysicalParams,
    cfg: &SimConfig,
    raw_steps: usize,
    t: usize,
) -> Result<Vec<Observation>> {
    if raw_steps < SAVGOL_WINDOW {
        return Err(SimError::Argument(format!(
            "pulling needs at least {SAVGOL_WINDOW} frames, got {raw_steps}"
        )));
    }
    if t == 0 || t > raw_steps {
        return Err(SimError::Argument(format!(
            "cannot take {t} observations from {raw_steps} frames"
        )));
    }
    let mut s = pulling_initial(params, cfg)?;
    let [first, last] = s.gripper_rows();
    let sensor = s.row_nodes(last);
    let sensed = |s: &ClothState| -> Vec3 {
        let f = s.spring_forces();
        let mut out = [0.0, 0.0, s.node_mass * cfg.gravity * sensor.len() as f64];
        for i in sensor.clone() {
            for a in 0..3 {
                out[a] += f[i][a];
            }
        }
        out
    };
    let tare = sensed(&s);
    let shift = cfg.ea_pull_speed * cfg.dt;
    let mut raw_force: [Vec<f64>; 3] = Default::default();
    let mut frames = Vec::with_capacity(raw_steps);
    for _ in 0..raw_steps {
        for i in s.row_nodes(first) {
            s.positions[i][1] -= shift;
        }
        for i in s.row_nodes(last) {
            s.positions[i][1] += shift;
        }
        s.step_mut(cfg.dt, cfg.gravity, cfg.damping)?;
        let f = sensed(&s);
        for a in 0..3 {
            raw_force[a].push(f[a] - tare[a]);
        }
        frames.push(s.positions.clone());
    }
    let smooth = raw_force
        .iter()
        .map(|c| savgol_smooth(c, SAVGOL_WINDOW, SAVGOL_ORDER))
        .collect::<Result<Vec<_>>>()?;
    Ok(subsample_indices(raw_steps, t)
        .into_iter()
        .map(|frame| Observation {
            t: frame,
            positions: frames[frame - 1].clone(),
            force: [
                smooth[0][frame - 1],
                smooth[1][frame - 1],
                smooth[2][frame - 1],
            ],
        })
        .collect())
}

/// Flat cloth resting on top of the arm with both gripper rows on vertical
/// sliders. Gravity is off in this scene, so this is the rest sheet for
/// every parameter setting.
pub fn bandage_initial(params: PhysicalParams, cfg: &SimConfig) -> Result<ClothState> {
    let mut s = base_cloth(params, cfg)?;
    for p in &mut s.positions {
        p[2] = cfg.arm_radius;
    }
    s.colliders.push(Collider::Cylinder {
        y: 0.0,
        z: 0.0,
        radius: cfg.arm_radius,
    });
    for r in s.gripper_rows() {
        s.set_row_constraint(r, Constraint::VerticalSlider);
    }
    settle_mut(&mut s, &settle_options(cfg, 0.0))?;
    Ok(s)
}

/// Pulls both gripper rows down with force `a` each (spread evenly over the
/// row) and settles over the arm. Returns the states before and after.
pub fn run_bandage(
    params: PhysicalParams,
    a: f64,
    cfg: &SimConfig,
) -> Result<(ClothState, ClothState)> {
    check_action(a, cfg.bandage_f_max, "bandage")?;
    let before = bandage_initial(params, cfg)?;
    let mut after = before.clone();
    if a > 0.0 {
        let per_node = a / after.cols as f64;
        for r in after.gripper_rows() {
            for i in after.row_nodes(r) {
                after.loads[i] = [0.0, 0.0, -per_node];
            }
        }
        settle_mut(&mut after, &settle_options(cfg, 0.0))?;
    }
    Ok((before, after))
}

/// Cloth lying on a table with a sphere resting at its centre, settled under
/// gravity. Both gripper rows are held.
pub fn lifting_initial(params: PhysicalParams, cfg: &SimConfig) -> Result<ClothState> {
    let mut s = base_cloth(params, cfg)?;
    s.colliders.push(Collider::Floor { height: 0.0 });
    for r in s.gripper_rows() {
        s.set_row_constraint(r, Constraint::Fixed);
    }
    let radius = cfg.sphere_radius;
    let height = s
        .positions
        .iter()
        .map(|p| radius * radius - p[0] * p[0] - p[1] * p[1])
        .filter(|h2| *h2 > 0.0)
        .map(f64::sqrt)
        .fold(0.0, f64::max);
    s.sphere = Some(Sphere {
        center: [0.0, 0.0, height],
        velocity: [0.0; 3],
        radius,
        mass: cfg.sphere_mass,
    });
    settle_mut(&mut s, &settle_options(cfg, cfg.gravity))?;
    Ok(s)
}

/// Raises both gripper rows by `a` at `cfg.lifting_speed` and settles.
/// Returns the states before and after.
pub fn run_lifting(
    params: PhysicalParams,
    a: f64,
    cfg: &SimConfig,
) -> Result<(ClothState, ClothState)> {
    check_action(a, cfg.lifting_d_max, "lifting")?;
    let before = lifting_initial(params, cfg)?;
    let mut after = before.clone();
    if a > 0.0 {
        let held: Vec<usize> = after
            .gripper_rows()
            .into_iter()
            .flat_map(|r| after.row_nodes(r))
            .collect();
        let base: Vec<f64> = held.iter().map(|&i| after.positions[i][2]).collect();
        let ramp = (a / (cfg.lifting_speed * cfg.dt)).ceil().max(1.0) as usize;
        for k in 1..=ramp {
            let h = a * k as f64 / ramp as f64;
            for (&i, z0) in held.iter().zip(&base) {
                after.positions[i][2] = z0 + h;
            }
            after.step_mut(cfg.dt, cfg.gravity, cfg.settle_damping)?;
        }
        settle_mut(&mut after, &settle_options(cfg, cfg.gravity))?;
    }
    Ok((before, after))
}
