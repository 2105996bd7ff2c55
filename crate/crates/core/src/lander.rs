//! Three-phase landing controller and a closed-loop kinematic simulator.
//!
//! Conventions:
//! - Horizontal setpoints are in camera axes, signed so that positive `vx`
//!   (`vy`) makes the pad drift right (down) in the image. The proportional
//!   law `v = −Kp·offset` therefore pulls the marker toward the image centre.
//! - Yaw is counter-clockwise seen from above, relative to the pad's nominal
//!   axis; the pad then appears rotated by `+yaw` clockwise on screen, so the
//!   measured marker orientation equals the yaw error.

use std::collections::VecDeque;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::marker::MarkerPose;
use crate::pipeline::Detector;
use crate::shapes::wrap_deg;
use crate::synth::{self, Background, Illumination, ScenePose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LandingPhase {
    Search,
    Align,
    Orient,
    Descend,
    Touchdown,
    Done,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LandingCommand {
    pub vx: f64,
    pub vy: f64,
    /// Negative is down.
    pub vz: f64,
    /// Degrees per second.
    pub yaw_rate: f64,
    pub motors_off: bool,
}

impl LandingCommand {
    pub const HOLD: LandingCommand = LandingCommand {
        vx: 0.0,
        vy: 0.0,
        vz: 0.0,
        yaw_rate: 0.0,
        motors_off: false,
    };

    pub const CUTOFF: LandingCommand = LandingCommand {
        vx: 0.0,
        vy: 0.0,
        vz: 0.0,
        yaw_rate: 0.0,
        motors_off: true,
    };

    /// Clamps every setpoint to the limits in `params`.
    pub fn clamped(self, p: &LanderParams) -> Self {
        if self.motors_off {
            return Self::CUTOFF;
        }
        let clamp = |v: f64, lim: f64| if v.is_finite() { v.clamp(-lim, lim) } else { 0.0 };
        Self {
            vx: clamp(self.vx, p.max_horizontal_speed),
            vy: clamp(self.vy, p.max_horizontal_speed),
            vz: clamp(self.vz, p.max_vertical_speed),
            yaw_rate: clamp(self.yaw_rate, p.max_yaw_rate),
            motors_off: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanderParams {
    pub control_period_s: f64,
    /// Horizontal gain, (m/s) per cm of offset.
    pub kp_per_cm: f64,
    /// Yaw gain, (deg/s) per degree.
    pub k_yaw: f64,
    /// Vertical gain toward the orientation altitude, (m/s) per m.
    pub k_altitude: f64,
    pub max_horizontal_speed: f64,
    pub max_vertical_speed: f64,
    pub max_yaw_rate: f64,
    pub centring_band_px: f64,
    pub centred_hold_s: f64,
    pub yaw_band_deg: f64,
    pub orient_altitude_m: f64,
    pub orient_altitude_band_m: f64,
    pub descent_speed: f64,
    pub touchdown_altitude_m: f64,
    pub loss_hold_s: f64,
    pub loss_abort_s: f64,
    pub abort_altitude_m: f64,
    pub lidar_max_m: f64,
    /// First-order velocity time constant of the vehicle.
    pub tau_s: f64,
    pub lidar_noise_m: f64,
    /// Median window applied to raw LiDAR samples.
    pub lidar_median_len: usize,
    pub timeout_s: f64,
}

impl Default for LanderParams {
    fn default() -> Self {
        Self {
            control_period_s: 1.0 / 60.0,
            kp_per_cm: 0.02,
            k_yaw: 0.5,
            k_altitude: 1.0,
            max_horizontal_speed: 0.5,
            max_vertical_speed: 0.4,
            max_yaw_rate: 30.0,
            centring_band_px: 20.0,
            centred_hold_s: 0.5,
            yaw_band_deg: 5.0,
            orient_altitude_m: 1.0,
            orient_altitude_band_m: 0.1,
            descent_speed: 0.2,
            touchdown_altitude_m: 0.10,
            loss_hold_s: 1.0,
            loss_abort_s: 5.0,
            abort_altitude_m: 1.5,
            lidar_max_m: 40.0,
            tau_s: 0.3,
            lidar_noise_m: 0.02,
            lidar_median_len: 5,
            timeout_s: 120.0,
        }
    }
}

impl LanderParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.control_period_s,
            self.max_horizontal_speed,
            self.max_vertical_speed,
            self.max_yaw_rate,
            self.descent_speed,
            self.touchdown_altitude_m,
            self.tau_s,
            self.timeout_s,
        ];
        if positive.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Input("lander periods, limits and speeds must be positive".into()));
        }
        if self.lidar_median_len == 0 {
            return Err(Error::Input("lidar_median_len must be at least 1".into()));
        }
        if self.loss_abort_s < self.loss_hold_s {
            return Err(Error::Input("loss_abort_s must not be shorter than loss_hold_s".into()));
        }
        Ok(())
    }
}

/// Controller memory between ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlState {
    pub phase: LandingPhase,
    /// How long the marker has stayed inside the centring band.
    pub centred_for_s: f64,
}

impl Default for ControlState {
    fn default() -> Self {
        Self {
            phase: LandingPhase::Search,
            centred_for_s: 0.0,
        }
    }
}

fn centring(pose: &MarkerPose, p: &LanderParams) -> (f64, f64) {
    (-p.kp_per_cm * pose.offset_cm.0, -p.kp_per_cm * pose.offset_cm.1)
}

fn yaw_correction(pose: &MarkerPose, p: &LanderParams) -> f64 {
    match pose.orientation_deg {
        Some(o) if !pose.orientation_stale => -p.k_yaw * o,
        _ => 0.0,
    }
}

fn is_centred(pose: &MarkerPose, p: &LanderParams) -> bool {
    pose.offset_px.0.hypot(pose.offset_px.1) < p.centring_band_px
}

/// One controller tick.
///
/// `since_fix_s` is the time since the last frame with a marker fix (0 when
/// `pose` is present).
pub fn step(
    state: ControlState,
    pose: Option<&MarkerPose>,
    altitude_lidar: f64,
    since_fix_s: f64,
    p: &LanderParams,
) -> (ControlState, LandingCommand) {
    use LandingPhase::*;
    let dt = p.control_period_s;
    let mut next = state;
    let hold = LandingCommand::HOLD;

    match state.phase {
        Done => return (state, LandingCommand::CUTOFF),
        Touchdown => {
            next.phase = Done;
            return (next, LandingCommand::CUTOFF);
        }
        _ => {}
    }
    if !(altitude_lidar > 0.0 && altitude_lidar <= p.lidar_max_m) {
        // sensor fault
        return (state, hold);
    }

    let cmd = match (state.phase, pose) {
        (Abort, _) => {
            if altitude_lidar >= p.abort_altitude_m {
                next.phase = Search;
                next.centred_for_s = 0.0;
                hold
            } else {
                LandingCommand {
                    vz: (p.k_altitude * (p.abort_altitude_m - altitude_lidar)).max(0.1),
                    ..hold
                }
            }
        }
        (Search, Some(_)) => {
            next.phase = Align;
            next.centred_for_s = 0.0;
            hold
        }
        (Search, None) => hold,
        (Align | Orient | Descend, None) => {
            next.centred_for_s = 0.0;
            if since_fix_s > p.loss_abort_s {
                next.phase = Abort;
                LandingCommand {
                    vz: p.max_vertical_speed,
                    ..hold
                }
            } else if since_fix_s > p.loss_hold_s {
                hold
            } else if state.phase == Descend {
                LandingCommand {
                    vz: -p.descent_speed,
                    ..hold
                }
            } else {
                hold
            }
        }
        (Align, Some(pose)) => {
            let (vx, vy) = centring(pose, p);
            if is_centred(pose, p) {
                next.centred_for_s += dt;
            } else {
                next.centred_for_s = 0.0;
            }
            if next.centred_for_s >= p.centred_hold_s - 1e-9 {
                next.phase = Orient;
            }
            LandingCommand { vx, vy, ..hold }
        }
        (Orient, Some(pose)) => {
            let (vx, vy) = centring(pose, p);
            let alt_err = altitude_lidar - p.orient_altitude_m;
            let yaw_ok = pose.orientation_deg.is_some_and(|o| o.abs() < p.yaw_band_deg);
            if yaw_ok && is_centred(pose, p) && alt_err.abs() <= p.orient_altitude_band_m {
                next.phase = Descend;
            }
            LandingCommand {
                vx,
                vy,
                vz: -p.k_altitude * alt_err,
                yaw_rate: yaw_correction(pose, p),
                motors_off: false,
            }
        }
        (Descend, Some(pose)) => {
            if altitude_lidar <= p.touchdown_altitude_m {
                next.phase = Touchdown;
                return (next, LandingCommand::CUTOFF);
            }
            let (vx, vy) = centring(pose, p);
            LandingCommand {
                vx,
                vy,
                vz: -p.descent_speed,
                yaw_rate: yaw_correction(pose, p),
                motors_off: false,
            }
        }
        (Touchdown | Done, _) => unreachable!(),
    };
    // touchdown also applies while briefly blind in Descend
    if next.phase == Descend && pose.is_none() && altitude_lidar <= p.touchdown_altitude_m {
        next.phase = Touchdown;
        return (next, LandingCommand::CUTOFF);
    }
    (next, cmd.clamped(p))
}

/// Simulated vehicle state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DroneState {
    /// Metres, pad frame, drone relative to pad centre.
    pub position: [f64; 2],
    pub altitude: f64,
    /// Degrees.
    pub yaw: f64,
    /// Camera-axis horizontal velocity and vertical velocity, m/s.
    pub velocity: [f64; 3],
    pub yaw_rate: f64,
}

impl DroneState {
    pub fn at(x: f64, y: f64, altitude: f64, yaw: f64) -> Self {
        Self {
            position: [x, y],
            altitude,
            yaw,
            ..Self::default()
        }
    }

    /// Advances the kinematics by `dt` toward the command.
    pub fn integrate(&mut self, cmd: &LandingCommand, tau: f64, dt: f64) {
        if cmd.motors_off {
            self.velocity = [0.0; 3];
            self.yaw_rate = 0.0;
            self.altitude = 0.0;
            return;
        }
        let a = 1.0 - (-dt / tau).exp();
        let target = [cmd.vx, cmd.vy, cmd.vz];
        for (v, t) in self.velocity.iter_mut().zip(target) {
            *v += (t - *v) * a;
        }
        self.yaw_rate += (cmd.yaw_rate - self.yaw_rate) * a;
        // pad drift in the image = −R(yaw)·ṗ·scale, so ṗ = −R(−yaw)·v
        let (s, c) = self.yaw.to_radians().sin_cos();
        let (vx, vy) = (self.velocity[0], self.velocity[1]);
        self.position[0] -= (c * vx + s * vy) * dt;
        self.position[1] -= (-s * vx + c * vy) * dt;
        self.altitude = (self.altitude + self.velocity[2] * dt).max(0.0);
        self.yaw = wrap_deg(self.yaw + self.yaw_rate * dt);
    }
}

/// Imaging conditions and fault injection for [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimScene {
    pub illumination: Illumination,
    pub noise_sigma: f64,
    pub background: Background,
    /// Remove the marker from the scene from this time on.
    pub marker_removed_at_s: Option<f64>,
    pub keep_log: bool,
}

impl Default for SimScene {
    fn default() -> Self {
        Self {
            illumination: Illumination::default(),
            noise_sigma: 0.0,
            background: Background::default(),
            marker_removed_at_s: None,
            keep_log: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub time_s: f64,
    pub phase: LandingPhase,
    pub state: DroneState,
    pub lidar_m: f64,
    pub pose: Option<MarkerPose>,
    pub command: LandingCommand,
    pub latency_ms: f64,
    /// Pipeline latency exceeded the control period.
    pub overrun: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub landed: bool,
    pub ticks: u64,
    pub final_state: DroneState,
    /// True altitude when the motors were cut.
    pub cutoff_altitude_m: Option<f64>,
    pub phases: Vec<LandingPhase>,
    pub log: Vec<TickRecord>,
}

impl SimulationResult {
    pub fn final_ground_error_m(&self) -> f64 {
        self.final_state.position[0].hypot(self.final_state.position[1])
    }

    pub fn final_yaw_error_deg(&self) -> f64 {
        wrap_deg(self.final_state.yaw).abs()
    }
}

/// Closed-loop run: render → detect → step → integrate, once per control
/// period, until `Done` or the timeout.
pub fn simulate(
    initial: DroneState,
    config: &Config,
    scene: &SimScene,
    seed: u64,
) -> Result<SimulationResult> {
    let p = &config.lander;
    p.validate()?;
    if !(1.0..=2.5).contains(&initial.altitude) {
        return Err(Error::contract(format!(
            "initial altitude {} m outside [1.0, 2.5] m",
            initial.altitude
        )));
    }
    let dt = p.control_period_s;
    let mut detector = Detector::new(config.clone())?.with_exec(Exec::Sequential);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lidar_noise = Normal::new(0.0, p.lidar_noise_m).map_err(|e| Error::contract(e.to_string()))?;
    let mut lidar_window: VecDeque<f64> = VecDeque::with_capacity(p.lidar_median_len);

    let mut state = initial;
    let mut ctrl = ControlState::default();
    let mut since_fix = f64::INFINITY;
    let mut log = Vec::new();
    let mut phases = vec![ctrl.phase];
    let mut cutoff_altitude = None;
    let max_ticks = (p.timeout_s / dt).ceil() as u64;
    let mut tick = 0u64;

    while tick < max_ticks {
        let time_s = tick as f64 * dt;
        let raw = state.altitude + lidar_noise.sample(&mut rng);
        if lidar_window.len() == p.lidar_median_len {
            lidar_window.pop_front();
        }
        lidar_window.push_back(raw);
        let mut sorted: Vec<f64> = lidar_window.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let lidar = sorted[sorted.len() / 2];

        let marker_present = scene.marker_removed_at_s.is_none_or(|t| time_s < t);
        let started = Instant::now();
        let pose = if state.altitude > crate::shapes::MIN_ALTITUDE_M && lidar > crate::shapes::MIN_ALTITUDE_M {
            let scene_pose = ScenePose {
                position: state.position,
                altitude: state.altitude,
                yaw_deg: state.yaw,
                illumination: scene.illumination,
                noise_sigma: scene.noise_sigma,
                background: scene.background,
                marker_present,
            };
            let frame_seed = seed ^ (tick + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let (frame, _) = synth::render_with(
                &config.marker_spec,
                &config.camera,
                &scene_pose,
                frame_seed,
                Exec::Sequential,
            )?;
            detector.process(&frame.with_index(tick), lidar)?.pose
        } else {
            None
        };
        let latency_ms = started.elapsed().as_secs_f64() * 1e3;
        since_fix = if pose.is_some() { 0.0 } else { since_fix + dt };

        let (next, command) = step(ctrl, pose.as_ref(), lidar, since_fix, p);
        if command.motors_off && cutoff_altitude.is_none() {
            cutoff_altitude = Some(state.altitude);
        }
        if scene.keep_log {
            log.push(TickRecord {
                tick,
                time_s,
                phase: next.phase,
                state,
                lidar_m: lidar,
                pose,
                command,
                latency_ms,
                overrun: latency_ms > dt * 1e3,
            });
        }
        if phases.last() != Some(&next.phase) {
            phases.push(next.phase);
        }
        ctrl = next;
        state.integrate(&command, p.tau_s, dt);
        tick += 1;
        if ctrl.phase == LandingPhase::Done {
            break;
        }
    }
    Ok(SimulationResult {
        landed: ctrl.phase == LandingPhase::Done,
        ticks: tick,
        final_state: state,
        cutoff_altitude_m: cutoff_altitude,
        phases,
        log,
    })
}
