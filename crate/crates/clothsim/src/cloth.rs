use crate::error::{Result, SimError};

pub type Vec3 = [f64; 3];

/// Material parameters of a cloth instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Structural and shear spring constant (N/m).
    pub stiffness: f64,
    /// Bending spring constant (N/m).
    pub bending: f64,
}

impl PhysicalParams {
    pub fn new(stiffness: f64, bending: f64) -> Self {
        Self { stiffness, bending }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpringKind {
    Structural,
    Shear,
    Bending,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spring {
    pub i: usize,
    pub j: usize,
    pub rest: f64,
    pub stiffness: f64,
    pub kind: SpringKind,
}

/// How a node responds to forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Free,
    /// Held by a gripper; the position is prescribed by the scene.
    Fixed,
    /// Held in x and y, free to move vertically.
    VerticalSlider,
}

/// Static penalty colliders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Collider {
    /// Infinite cylinder with axis parallel to x through (0, y, z).
    Cylinder { y: f64, z: f64, radius: f64 },
    /// Horizontal plane; nodes below it are pushed up.
    Floor { height: f64 },
}

/// A rigid sphere that interacts with the cloth nodes through penalty contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub velocity: Vec3,
    pub radius: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClothState {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub node_mass: f64,
    pub params: PhysicalParams,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub springs: Vec<Spring>,
    pub constraints: Vec<Constraint>,
    /// Constant external force on each node.
    pub loads: Vec<Vec3>,
    pub colliders: Vec<Collider>,
    pub contact_stiffness: f64,
    pub sphere: Option<Sphere>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleOptions {
    pub tol: f64,
    pub max_steps: usize,
    pub dt: f64,
    pub gravity: f64,
    pub damping: f64,
}

const DEFAULT_NODE_MASS: f64 = 0.01;
const DEFAULT_CONTACT_STIFFNESS: f64 = 5_000.0;

/// Builds a flat cloth in the z = 0 plane centred on the origin. Node
/// `(r, c)` has index `r * cols + c` and sits at x = c·spacing, y = r·spacing
/// (shifted so the grid is centred).
pub fn make_cloth(
    rows: usize,
    cols: usize,
    spacing: f64,
    params: PhysicalParams,
) -> Result<ClothState> {
    if rows < 2 || cols < 2 {
        return Err(SimError::Argument(format!(
            "cloth needs at least 2x2 nodes, got {rows}x{cols}"
        )));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(SimError::Argument(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let x0 = (cols - 1) as f64 * spacing / 2.0;
    let y0 = (rows - 1) as f64 * spacing / 2.0;
    let mut positions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            positions.push([c as f64 * spacing - x0, r as f64 * spacing - y0, 0.0]);
        }
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut springs = Vec::new();
    let mut add = |i: usize, j: usize, stiffness: f64, kind: SpringKind| {
        let rest = norm(sub(positions[j], positions[i]));
        springs.push(Spring {
            i,
            j,
            rest,
            stiffness,
            kind,
        });
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                add(
                    idx(r, c),
                    idx(r, c + 1),
                    params.stiffness,
                    SpringKind::Structural,
                );
            }
            if r + 1 < rows {
                add(
                    idx(r, c),
                    idx(r + 1, c),
                    params.stiffness,
                    SpringKind::Structural,
                );
            }
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            add(
                idx(r, c),
                idx(r + 1, c + 1),
                params.stiffness,
                SpringKind::Shear,
            );
            add(
                idx(r, c + 1),
                idx(r + 1, c),
                params.stiffness,
                SpringKind::Shear,
            );
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            if c + 2 < cols {
                add(
                    idx(r, c),
                    idx(r, c + 2),
                    params.bending,
                    SpringKind::Bending,
                );
            }
            if r + 2 < rows {
                add(
                    idx(r, c),
                    idx(r + 2, c),
                    params.bending,
                    SpringKind::Bending,
                );
            }
        }
    }
    let n = rows * cols;
    Ok(ClothState {
        rows,
        cols,
        spacing,
        node_mass: DEFAULT_NODE_MASS,
        params,
        positions,
        velocities: vec![[0.0; 3]; n],
        springs,
        constraints: vec![Constraint::Free; n],
        loads: vec![[0.0; 3]; n],
        colliders: Vec::new(),
        contact_stiffness: DEFAULT_CONTACT_STIFFNESS,
        sphere: None,
    })
}

impl ClothState {
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    /// Node indices of one grid row.
    pub fn row_nodes(&self, r: usize) -> std::ops::Range<usize> {
        r * self.cols..(r + 1) * self.cols
    }

    /// Rows 0 and `rows - 1`, the edges held by the two grippers.
    pub fn gripper_rows(&self) -> [usize; 2] {
        [0, self.rows - 1]
    }

    pub fn fixed_mask(&self) -> Vec<bool> {
        self.constraints
            .iter()
            .map(|c| *c != Constraint::Free)
            .collect()
    }

    pub fn set_row_constraint(&mut self, r: usize, constraint: Constraint) {
        for i in self.row_nodes(r) {
            self.constraints[i] = constraint;
            self.velocities[i] = [0.0; 3];
        }
    }

    /// Per-node spring forces only.
    pub fn spring_forces(&self) -> Vec<Vec3> {
        let mut f = vec![[0.0; 3]; self.num_nodes()];
        self.add_spring_forces(&mut f);
        f
    }

    fn add_spring_forces(&self, f: &mut [Vec3]) {
        let p = &self.positions;
        for s in &self.springs {
            let d = sub(p[s.j], p[s.i]);
            let len = norm(d);
            if len <= 1e-12 {
                continue;
            }
            let mag = s.stiffness * (len - s.rest) / len;
            for a in 0..3 {
                let g = mag * d[a];
                f[s.i][a] += g;
                f[s.j][a] -= g;
            }
        }
    }

    /// Conservative forces on every node and on the sphere: springs,
    /// gravity, loads and contact. Damping is not included.
    pub fn forces(&self, gravity: f64) -> (Vec<Vec3>, Vec3) {
        let mut f = vec![[0.0; 3]; self.num_nodes()];
        let fs = self.accumulate(gravity, &mut f);
        (f, fs)
    }

    fn accumulate(&self, gravity: f64, f: &mut [Vec3]) -> Vec3 {
        self.add_spring_forces(f);
        let kc = self.contact_stiffness;
        let weight = self.node_mass * gravity;
        for (i, fi) in f.iter_mut().enumerate() {
            let p = self.positions[i];
            fi[2] += weight;
            for a in 0..3 {
                fi[a] += self.loads[i][a];
            }
            for col in &self.colliders {
                match *col {
                    Collider::Floor { height } => {
                        if p[2] < height {
                            fi[2] += kc * (height - p[2]);
                        }
                    }
                    Collider::Cylinder { y, z, radius } => {
                        let dy = p[1] - y;
                        let dz = p[2] - z;
                        let r = (dy * dy + dz * dz).sqrt();
                        if r < radius && r > 1e-12 {
                            let m = kc * (radius - r) / r;
                            fi[1] += m * dy;
                            fi[2] += m * dz;
                        }
                    }
                }
            }
        }
        let mut fs = [0.0; 3];
        if let Some(sph) = &self.sphere {
            fs[2] += sph.mass * gravity;
            for (i, fi) in f.iter_mut().enumerate() {
                let d = sub(self.positions[i], sph.center);
                let r = norm(d);
                if r < sph.radius && r > 1e-12 {
                    let m = kc * (sph.radius - r) / r;
                    for a in 0..3 {
                        fi[a] += m * d[a];
                        fs[a] -= m * d[a];
                    }
                }
            }
        }
        fs
    }

    /// Largest unbalanced static force over all unconstrained degrees of
    /// freedom, including the sphere.
    pub fn residual(&self, gravity: f64) -> f64 {
        let (f, fs) = self.forces(gravity);
        let mut worst: f64 = 0.0;
        for (fi, c) in f.iter().zip(&self.constraints) {
            let r = match c {
                Constraint::Free => norm(*fi),
                Constraint::VerticalSlider => fi[2].abs(),
                Constraint::Fixed => 0.0,
            };
            worst = worst.max(r);
        }
        if self.sphere.is_some() {
            worst = worst.max(norm(fs));
        }
        worst
    }

    /// One semi-implicit Euler step in place.
    pub fn step_mut(&mut self, dt: f64, gravity: f64, damping: f64) -> Result<()> {
        let mut f = vec![[0.0; 3]; self.num_nodes()];
        let fs = self.accumulate(gravity, &mut f);
        let inv_m = 1.0 / self.node_mass;
        for i in 0..self.positions.len() {
            let v = &mut self.velocities[i];
            let p = &mut self.positions[i];
            match self.constraints[i] {
                Constraint::Fixed => *v = [0.0; 3],
                Constraint::Free => {
                    for a in 0..3 {
                        v[a] += dt * (f[i][a] - damping * v[a]) * inv_m;
                        p[a] += dt * v[a];
                    }
                }
                Constraint::VerticalSlider => {
                    v[0] = 0.0;
                    v[1] = 0.0;
                    v[2] += dt * (f[i][2] - damping * v[2]) * inv_m;
                    p[2] += dt * v[2];
                }
            }
        }
        if let Some(sph) = &mut self.sphere {
            for a in 0..3 {
                sph.velocity[a] += dt * (fs[a] - damping * sph.velocity[a]) / sph.mass;
                sph.center[a] += dt * sph.velocity[a];
            }
        }
        let finite = self.positions.iter().flatten().all(|x| x.is_finite())
            && self
                .sphere
                .is_none_or(|s| s.center.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(SimError::Diverged {
                dt,
                params: self.params,
            });
        }
        Ok(())
    }

    /// Kinetic plus spring, gravitational, load and contact potential energy.
    pub fn energy(&self, gravity: f64) -> f64 {
        let mut e = 0.0;
        for v in &self.velocities {
            e += 0.5 * self.node_mass * dot(*v, *v);
        }
        e += self.potential_energy(gravity);
        if let Some(s) = &self.sphere {
            e += 0.5 * s.mass * dot(s.velocity, s.velocity);
        }
        e
    }

    /// Energy whose kinetic term pairs the current velocities with those of
    /// the next step, as in the leapfrog form of semi-implicit Euler. Unlike
    /// [`ClothState::energy`] it does not oscillate with the integrator, so
    /// it decreases monotonically under damping.
    pub fn staggered_energy(&self, dt: f64, gravity: f64, damping: f64) -> f64 {
        let (f, fs) = self.forces(gravity);
        let m = self.node_mass;
        let mut e = self.potential_energy(gravity);
        for (i, v) in self.velocities.iter().enumerate() {
            let next = |a: usize| v[a] + dt * (f[i][a] - damping * v[a]) / m;
            let ke = match self.constraints[i] {
                Constraint::Fixed => 0.0,
                Constraint::Free => (0..3).map(|a| v[a] * next(a)).sum(),
                Constraint::VerticalSlider => v[2] * next(2),
            };
            e += 0.5 * m * ke;
        }
        if let Some(s) = &self.sphere {
            let ke: f64 = (0..3)
                .map(|a| {
                    s.velocity[a]
                        * (s.velocity[a] + dt * (fs[a] - damping * s.velocity[a]) / s.mass)
                })
                .sum();
            e += 0.5 * s.mass * ke;
        }
        e
    }

    pub fn potential_energy(&self, gravity: f64) -> f64 {
        let p = &self.positions;
        let kc = self.contact_stiffness;
        let mut e = 0.0;
        for s in &self.springs {
            let ext = norm(sub(p[s.j], p[s.i])) - s.rest;
            e += 0.5 * s.stiffness * ext * ext;
        }
        for (i, pi) in p.iter().enumerate() {
            e -= self.node_mass * gravity * pi[2];
            e -= dot(self.loads[i], *pi);
            for col in &self.colliders {
                let pen = match *col {
                    Collider::Floor { height } => (height - pi[2]).max(0.0),
                    Collider::Cylinder { y, z, radius } => {
                        (radius - ((pi[1] - y).powi(2) + (pi[2] - z).powi(2)).sqrt()).max(0.0)
                    }
                };
                e += 0.5 * kc * pen * pen;
            }
            if let Some(s) = &self.sphere {
                let pen = (s.radius - norm(sub(*pi, s.center))).max(0.0);
                e += 0.5 * kc * pen * pen;
            }
        }
        if let Some(s) = &self.sphere {
            e -= s.mass * gravity * s.center[2];
        }
        e
    }

    /// Largest depth by which any node centre lies inside a cylinder collider.
    pub fn max_cylinder_penetration(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for col in &self.colliders {
            if let Collider::Cylinder { y, z, radius } = *col {
                for p in &self.positions {
                    let r = ((p[1] - y).powi(2) + (p[2] - z).powi(2)).sqrt();
                    worst = worst.max(radius - r);
                }
            }
        }
        worst
    }
}

/// Advances `state` by one semi-implicit Euler step.
pub fn step(state: &ClothState, dt: f64, gravity: f64, damping: f64) -> Result<ClothState> {
    check_step_args(dt, damping)?;
    let mut next = state.clone();
    next.step_mut(dt, gravity, damping)?;
    Ok(next)
}

fn check_step_args(dt: f64, damping: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(SimError::Argument(format!("dt must be positive, got {dt}")));
    }
    if !(0.0..1.0).contains(&damping) {
        return Err(SimError::Argument(format!(
            "damping must lie in [0, 1), got {damping}"
        )));
    }
    Ok(())
}

/// Steps with damping until the static residual drops below `opts.tol`, then
/// zeroes all velocities.
pub fn settle(state: &ClothState, opts: &SettleOptions) -> Result<ClothState> {
    let mut s = state.clone();
    settle_mut(&mut s, opts)?;
    Ok(s)
}

pub(crate) fn settle_mut(s: &mut ClothState, opts: &SettleOptions) -> Result<usize> {
    if !(opts.tol > 0.0) {
        return Err(SimError::Argument(format!(
            "settle tolerance must be positive, got {}",
            opts.tol
        )));
    }
    check_step_args(opts.dt, opts.damping)?;
    let mut steps = 0;
    loop {
        let r = s.residual(opts.gravity);
        if r < opts.tol {
            for v in &mut s.velocities {
                *v = [0.0; 3];
            }
            if let Some(sph) = &mut s.sphere {
                sph.velocity = [0.0; 3];
            }
            return Ok(steps);
        }
        if steps >= opts.max_steps {
            return Err(SimError::NotConverged { steps, residual: r });
        }
        s.step_mut(opts.dt, opts.gravity, opts.damping)?;
        steps += 1;
    }
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(s: &ClothState, kind: SpringKind) -> usize {
        s.springs.iter().filter(|sp| sp.kind == kind).count()
    }

    #[test]
    fn spring_counts_2x2() {
        let s = make_cloth(2, 2, 1.0, PhysicalParams::new(10.0, 1.0)).unwrap();
        assert_eq!(count(&s, SpringKind::Structural), 4);
        assert_eq!(count(&s, SpringKind::Shear), 2);
        assert_eq!(count(&s, SpringKind::Bending), 0);
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(make_cloth(3, 3, 0.0, PhysicalParams::new(10.0, 1.0)).is_err());
        assert!(make_cloth(3, 3, -1.0, PhysicalParams::new(10.0, 1.0)).is_err());
        assert!(make_cloth(1, 3, 1.0, PhysicalParams::new(10.0, 1.0)).is_err());
    }

    #[test]
    fn rejects_bad_damping() {
        let s = make_cloth(2, 2, 1.0, PhysicalParams::new(10.0, 1.0)).unwrap();
        assert!(step(&s, 1e-3, 0.0, 1.0).is_err());
        assert!(step(&s, 0.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn nan_reports_divergence() {
        let mut s = make_cloth(2, 2, 1.0, PhysicalParams::new(10.0, 1.0)).unwrap();
        s.velocities[0] = [f64::NAN, 0.0, 0.0];
        match step(&s, 1e-3, 0.0, 0.0) {
            Err(SimError::Diverged { dt, .. }) => assert_eq!(dt, 1e-3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
