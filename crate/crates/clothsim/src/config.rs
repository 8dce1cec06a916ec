/// Physical constants shared by all scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Simulated grid size.
    pub rows: usize,
    pub cols: usize,
    /// Rest distance between 4-neighbours (m).
    pub spacing: f64,
    /// Mass of each node (kg).
    pub node_mass: f64,
    pub dt: f64,
    /// Viscous damping used while a scene is being driven (N·s/m).
    pub damping: f64,
    /// Viscous damping used by quasi-static settling (N·s/m).
    pub settle_damping: f64,
    pub settle_tol: f64,
    pub settle_max_steps: usize,
    /// Vertical gravitational acceleration (m/s², negative is down).
    pub gravity: f64,
    /// Penalty stiffness of every contact (N/m).
    pub contact_stiffness: f64,
    /// Settling tolerance before pulling. Tighter than `settle_tol` so the
    /// tared force does not drift when the cloth is released to the lightly
    /// damped pulling dynamics.
    pub ea_settle_tol: f64,
    /// Frames of the pulling action.
    pub ea_raw_steps: usize,
    /// Speed at which each gripper moves outwards during pulling (m/s).
    pub ea_pull_speed: f64,
    pub arm_radius: f64,
    /// Largest force applied by each bandage gripper (N).
    pub bandage_f_max: f64,
    pub sphere_radius: f64,
    pub sphere_mass: f64,
    /// Largest gripper lift in the lifting scene (m).
    pub lifting_d_max: f64,
    /// Gripper lift speed while ramping to the target height (m/s).
    pub lifting_speed: f64,
    /// Number of uniformly spaced action instances.
    pub action_count: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            spacing: 0.05,
            node_mass: 0.01,
            dt: 1e-3,
            damping: 0.02,
            settle_damping: 0.2,
            settle_tol: 1e-4,
            settle_max_steps: 200_000,
            gravity: -9.81,
            contact_stiffness: 5_000.0,
            ea_settle_tol: 1e-6,
            ea_raw_steps: 300,
            ea_pull_speed: 0.1,
            arm_radius: 0.08,
            bandage_f_max: 1.0,
            sphere_radius: 0.08,
            sphere_mass: 0.1,
            lifting_d_max: 0.2,
            lifting_speed: 0.5,
            action_count: 30,
        }
    }
}
