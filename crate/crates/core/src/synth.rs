//! Synthetic tap-gesture and daily-activity sensor streams.
//!
//! A tap is a minimum-jerk reach with a wrist roll, an alignment phase of
//! small high-frequency jitter ending at the contact point, a short hold and
//! a withdrawal. Linear acceleration and angular velocity are generated in
//! the device frame; orientation comes from integrating the angular velocity
//! and the accelerometer adds gravity rotated into the device frame.
//!
//! Every user draws a style from a population distribution. Gesture-level
//! variation is a small relative perturbation of that style, so users differ
//! more from each other than gestures of one user do.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forest::splitmix64;
use crate::ingest::{write_dataset, ActivitySpan, Dataset, NfcEvent};
use crate::types::{Activity, QuaternionSample, RawSamples, SensorStream, Terminal, TriaxialSample};

pub const RATE_HZ: f64 = 50.0;
pub const SAMPLE_MS: i64 = 20;
pub const GRAVITY: f64 = 9.81;
/// Spacing between consecutive contact points of one session.
pub const SLOT_MS: i64 = 8_000;
/// Contact point position inside its slot.
const CONTACT_IN_SLOT_MS: i64 = 5_000;
const HOLD_S: f64 = 0.2;
/// Idle time after withdrawal spent returning to the resting orientation.
const LEVEL_S: f64 = 1.5;
pub const TAP_SESSIONS: [&str; 3] = ["1", "2", "3"];
pub const ACTIVITY_SESSION: &str = "activity";

const DT: f64 = SAMPLE_MS as f64 / 1000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserStyle {
    pub reach_amplitude_m: f64,
    pub reach_duration_s: f64,
    /// Reach direction components along device y and z, relative to x.
    pub reach_dir_y: f64,
    pub reach_dir_z: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub jitter_amplitude: f64,
    pub jitter_gyro_dps: f64,
    pub jitter_hz: f64,
    pub jitter_phase: [f64; 4],
    pub alignment_s: f64,
    pub withdrawal_speed: f64,
    /// Standard deviation of accelerometer noise, m/s².
    pub noise_scale: f64,
    /// Relative gesture-to-gesture perturbation of the style.
    pub variability: f64,
    pub walk_hz: f64,
    pub walk_amplitude: f64,
}

impl UserStyle {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        Self {
            reach_amplitude_m: rng.random_range(0.2..0.5),
            reach_duration_s: rng.random_range(0.5..1.1),
            reach_dir_y: rng.random_range(-0.5..0.5),
            reach_dir_z: rng.random_range(-0.4..0.6),
            roll_deg: rng.random_range(20.0..90.0),
            pitch_deg: rng.random_range(-20.0..20.0),
            jitter_amplitude: rng.random_range(0.15..0.6),
            jitter_gyro_dps: rng.random_range(4.0..16.0),
            jitter_hz: rng.random_range(3.0..9.0),
            jitter_phase: [0; 4].map(|_| rng.random_range(0.0..2.0 * PI)),
            alignment_s: rng.random_range(0.5..1.5),
            withdrawal_speed: rng.random_range(0.7..1.5),
            noise_scale: rng.random_range(0.02..0.06),
            variability: 0.04,
            walk_hz: rng.random_range(1.7..2.3),
            walk_amplitude: rng.random_range(1.0..2.5),
        }
    }

    /// The same style without sensor noise or gesture-to-gesture variation.
    pub fn noiseless(self) -> Self {
        Self {
            noise_scale: 0.0,
            variability: 0.0,
            ..self
        }
    }
}

/// Systematic effect of a terminal's placement on the tap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalProfile {
    pub terminal: Terminal,
    pub dir_z_offset: f64,
    pub roll_offset_deg: f64,
    /// Per-gesture random spread added on top of the offsets.
    pub spread: f64,
}

impl TerminalProfile {
    pub fn standard(terminal: Terminal) -> Self {
        let (dir_z_offset, roll_offset_deg, spread) = match terminal {
            Terminal::Fixed(n) => {
                let k = n as f64 - 3.5;
                (0.04 * k, 2.5 * k, 0.0)
            }
            Terminal::Freestyle => (0.0, 0.0, 1.0),
        };
        Self {
            terminal,
            dir_z_offset,
            roll_offset_deg,
            spread,
        }
    }

    pub fn all() -> Vec<Self> {
        Terminal::ALL.into_iter().map(Self::standard).collect()
    }
}

/// One gesture's parameters after perturbation.
#[derive(Debug, Clone, Copy)]
struct GestureDraw {
    amplitude: f64,
    duration: f64,
    dir: Vector3<f64>,
    roll: f64,
    pitch: f64,
    jitter_amplitude: f64,
    jitter_gyro: f64,
    jitter_hz: f64,
    phase: [f64; 4],
    alignment: f64,
    withdrawal: f64,
}

impl GestureDraw {
    fn new<R: Rng>(style: &UserStyle, profile: &TerminalProfile, rng: &mut R) -> Self {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut jig = |v: f64| v * (1.0 + style.variability * unit.sample(rng));
        let amplitude = jig(style.reach_amplitude_m);
        let duration = jig(style.reach_duration_s).max(0.3);
        let roll = jig(style.roll_deg);
        let pitch = jig(style.pitch_deg);
        let jitter_amplitude = jig(style.jitter_amplitude);
        let jitter_gyro = jig(style.jitter_gyro_dps);
        let jitter_hz = jig(style.jitter_hz);
        let alignment = jig(style.alignment_s).clamp(0.5, 1.5);
        let withdrawal = duration / jig(style.withdrawal_speed).max(0.3);
        let dy = jig(style.reach_dir_y);
        let dz = jig(style.reach_dir_z);
        let (fz, fr) = if profile.spread > 0.0 {
            (
                profile.spread * rng.random_range(-0.2..0.2),
                profile.spread * rng.random_range(-15.0..15.0),
            )
        } else {
            (0.0, 0.0)
        };
        Self {
            amplitude,
            duration,
            dir: Vector3::new(1.0, dy, dz + profile.dir_z_offset + fz).normalize(),
            roll: roll + profile.roll_offset_deg + fr,
            pitch,
            jitter_amplitude,
            jitter_gyro,
            jitter_hz,
            phase: style.jitter_phase,
            alignment,
            withdrawal,
        }
    }

    fn start_s(&self) -> f64 {
        -(self.alignment + self.duration)
    }

    fn end_s(&self) -> f64 {
        HOLD_S + self.withdrawal
    }

    /// Linear acceleration (m/s²) and angular velocity (deg/s) at `t` seconds
    /// relative to contact.
    fn motion(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let zero = Vector3::zeros();
        if t < self.start_s() || t >= self.end_s() {
            return (zero, zero);
        }
        if t < -self.alignment {
            let tau = (t - self.start_s()) / self.duration;
            let (_, ds, dds) = min_jerk(tau);
            let lac = self.dir * (self.amplitude * dds / (self.duration * self.duration));
            let w = Vector3::new(self.pitch, self.roll, 0.0) * (ds / self.duration);
            return (lac, w);
        }
        if t < 0.0 {
            let u = (t + self.alignment) / self.alignment;
            let env = (PI * u).sin().powi(2);
            let w0 = 2.0 * PI * self.jitter_hz * t;
            let p = self.phase;
            let lac = Vector3::new(0.0, (w0 + p[0]).sin(), (1.3 * w0 + p[1]).sin()) * (self.jitter_amplitude * env);
            let w = Vector3::new((w0 + p[2]).sin(), 0.0, (0.8 * w0 + p[3]).sin()) * (self.jitter_gyro * env);
            return (lac, w);
        }
        if t < HOLD_S {
            return (zero, zero);
        }
        let tau = (t - HOLD_S) / self.withdrawal;
        let (_, ds, dds) = min_jerk(tau);
        let lac = -self.dir * (0.9 * self.amplitude * dds / (self.withdrawal * self.withdrawal));
        let w = -Vector3::new(self.pitch, self.roll, 0.0) * (ds / self.withdrawal);
        (lac, w)
    }
}

/// Minimum-jerk position, velocity and acceleration for normalized time τ ∈ [0, 1].
pub fn min_jerk(tau: f64) -> (f64, f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let (t2, t3) = (t * t, t * t * t);
    (
        10.0 * t3 - 15.0 * t2 * t2 + 6.0 * t3 * t2,
        30.0 * t2 - 60.0 * t3 + 30.0 * t2 * t2,
        60.0 * t - 180.0 * t2 + 120.0 * t3,
    )
}

/// Rounds to `1 / per_unit` steps, landing on the double nearest the decimal.
fn quantize(v: f64, per_unit: f64) -> f64 {
    (v * per_unit).round() / per_unit
}

/// Noise-free motion on the 50 Hz grid: linear acceleration and angular
/// velocity in the device frame.
#[derive(Debug, Clone, Default)]
struct Track {
    lac: Vec<Vector3<f64>>,
    gyr_dps: Vec<Vector3<f64>>,
}

/// Orientation state with the rest pose it returns to.
struct Attitude {
    base: UnitQuaternion<f64>,
    q: UnitQuaternion<f64>,
}

impl Attitude {
    fn new<R: Rng>(rng: &mut R) -> Self {
        let base = UnitQuaternion::from_euler_angles(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(-PI..PI),
        );
        Self { base, q: base }
    }

    /// Body rate (rad/s) that reaches the rest pose after `seconds`.
    fn leveling_rate(&self, seconds: f64) -> Vector3<f64> {
        (self.q.inverse() * self.base).scaled_axis() / seconds
    }

    fn step(&mut self, w_rad: Vector3<f64>) {
        self.q *= UnitQuaternion::from_scaled_axis(w_rad * DT);
    }
}

/// Turns a track into sensor samples from `t_start_ms`, adding gravity,
/// noise and orientation. `rate_at` supplies an extra body rate per sample
/// from the current attitude (deg/s).
fn render(
    track: &Track,
    t_start_ms: i64,
    attitude: &mut Attitude,
    noise_scale: f64,
    rng: &mut ChaCha8Rng,
    mut extra_rate: impl FnMut(usize, &Attitude) -> Vector3<f64>,
) -> RawSamples {
    let n = track.lac.len();
    let mut raw = RawSamples {
        acc: Vec::with_capacity(n),
        gyr: Vec::with_capacity(n),
        lac: Vec::with_capacity(n),
        grv: Vec::with_capacity(n),
    };
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let g_world = Vector3::new(0.0, 0.0, GRAVITY);
    for k in 0..n {
        let t = t_start_ms + k as i64 * SAMPLE_MS;
        let w_dps = track.gyr_dps[k] + extra_rate(k, attitude);
        let g_dev = attitude.q.inverse_transform_vector(&g_world);
        let q = attitude.q.quaternion();
        let mut draw = || noise.sample(rng) * noise_scale;
        let lac = track.lac[k] + Vector3::new(draw(), draw(), draw());
        let acc = track.lac[k] + g_dev + Vector3::new(draw(), draw(), draw());
        let gyr = w_dps + Vector3::new(draw(), draw(), draw()) * 40.0;
        let tri = |v: Vector3<f64>| TriaxialSample {
            t_ms: t,
            x: quantize(v.x, 1e6),
            y: quantize(v.y, 1e6),
            z: quantize(v.z, 1e6),
        };
        raw.acc.push(tri(acc));
        raw.lac.push(tri(lac));
        raw.gyr.push(tri(gyr));
        let grv = QuaternionSample {
            t_ms: t,
            x: quantize(q.i, 1e7),
            y: quantize(q.j, 1e7),
            z: quantize(q.k, 1e7),
            w: quantize(q.w, 1e7),
        };
        raw.grv.push(grv.normalize().unwrap_or(grv));
        attitude.step(w_dps.map(f64::to_radians));
    }
    raw
}

fn stream_from(user_id: &str, session_id: &str, raw: RawSamples) -> SensorStream {
    SensorStream::from_raw(user_id, session_id, RATE_HZ, raw)
        .expect("synthetic samples are valid")
        .0
}

/// One session of taps, `SLOT_MS` apart, terminals taken round-robin from
/// `terminals` starting at `first_terminal`.
#[allow(clippy::too_many_arguments)]
pub fn generate_tap_stream(
    user_id: &str,
    session_id: &str,
    style: &UserStyle,
    n_gestures: usize,
    terminals: &[TerminalProfile],
    first_terminal: usize,
    seed: u64,
) -> Result<(SensorStream, Vec<NfcEvent>)> {
    if n_gestures == 0 || terminals.is_empty() {
        return Err(Error::InvalidConfig("tap stream needs gestures and terminals".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_ms = n_gestures as i64 * SLOT_MS + 2_000;
    let n = (total_ms / SAMPLE_MS) as usize;
    let mut track = Track {
        lac: vec![Vector3::zeros(); n],
        gyr_dps: vec![Vector3::zeros(); n],
    };
    let mut events = Vec::with_capacity(n_gestures);
    // sample index at which each gesture's leveling phase starts
    let mut level_starts = Vec::with_capacity(n_gestures);
    for g in 0..n_gestures {
        let profile = &terminals[(first_terminal + g) % terminals.len()];
        let draw = GestureDraw::new(style, profile, &mut rng);
        let jitter_steps = if style.variability > 0.0 { rng.random_range(-10..=10) } else { 0 };
        let t0 = g as i64 * SLOT_MS + CONTACT_IN_SLOT_MS + jitter_steps * SAMPLE_MS;
        events.push(NfcEvent {
            user_id: user_id.to_string(),
            session_id: session_id.to_string(),
            t0_ms: t0,
            terminal: profile.terminal,
        });
        let first = ((t0 as f64 / 1000.0 + draw.start_s()) / DT).floor() as usize;
        let last = (((t0 as f64 / 1000.0 + draw.end_s()) / DT).ceil() as usize).min(n);
        for k in first..last {
            let t_rel = (k as i64 * SAMPLE_MS - t0) as f64 / 1000.0;
            let (lac, w) = draw.motion(t_rel);
            track.lac[k] = lac;
            track.gyr_dps[k] = w;
        }
        level_starts.push(last);
    }
    let mut attitude = Attitude::new(&mut rng);
    let level_steps = (LEVEL_S / DT).round() as usize;
    let mut level_rate = Vector3::zeros();
    let raw = render(&track, 0, &mut attitude, style.noise_scale, &mut rng, |k, att| {
        if level_starts.contains(&k) {
            level_rate = att.leveling_rate(LEVEL_S).map(f64::to_degrees);
        }
        let leveling = level_starts.iter().any(|&s| k >= s && k < s + level_steps);
        if leveling {
            level_rate
        } else {
            Vector3::zeros()
        }
    });
    Ok((stream_from(user_id, session_id, raw), events))
}

/// Motion model of one out-of-lab activity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityModel {
    pub kind: Activity,
    /// Arm-swing frequency while walking, Hz.
    pub step_hz: f64,
    pub swing_amplitude: f64,
    /// Mean jolts per second on a bus or train.
    pub jolt_rate: f64,
    pub jolt_amplitude: f64,
    /// Mean seconds between reach-and-rotate movements in a shop.
    pub reach_interval_s: f64,
}

impl ActivityModel {
    pub fn new(kind: Activity) -> Self {
        Self {
            kind,
            step_hz: 2.0,
            swing_amplitude: 1.8,
            jolt_rate: 0.2,
            jolt_amplitude: 1.5,
            reach_interval_s: 7.0,
        }
    }

    pub fn for_user(kind: Activity, style: &UserStyle) -> Self {
        Self {
            step_hz: style.walk_hz,
            swing_amplitude: style.walk_amplitude,
            ..Self::new(kind)
        }
    }

    fn render_into(&self, track: &mut Track, n: usize, rng: &mut ChaCha8Rng) {
        match self.kind {
            Activity::Walking => self.walk(track, n, 1.0, rng),
            Activity::BusOrTrain => self.ride(track, n, rng),
            Activity::InStore => self.shop(track, n, rng),
            Activity::Combined => {
                // alternating 10 s stretches of walking and shopping
                let chunk = (10.0 / DT) as usize;
                let mut done = 0;
                let mut walking = true;
                while done < n {
                    let m = chunk.min(n - done);
                    if walking {
                        self.walk(track, m, 1.0, rng);
                    } else {
                        self.shop(track, m, rng);
                    }
                    walking = !walking;
                    done += m;
                }
            }
        }
    }

    fn walk(&self, track: &mut Track, n: usize, scale: f64, rng: &mut ChaCha8Rng) {
        let phase = rng.random_range(0.0..2.0 * PI);
        let w = 2.0 * PI * self.step_hz;
        let a = self.swing_amplitude * scale;
        // arm swing of ±15° about y
        let swing_deg = 15.0 * scale;
        for k in 0..n {
            let t = k as f64 * DT;
            let p = w * t + phase;
            track.lac.push(Vector3::new(a * p.sin(), 0.2 * a * (2.0 * p).sin(), 0.6 * a * (p + 0.8).sin()));
            track.gyr_dps.push(Vector3::new(0.0, swing_deg * w * p.cos(), 0.1 * swing_deg * w * (p + 1.1).cos()));
        }
    }

    fn ride(&self, track: &mut Track, n: usize, rng: &mut ChaCha8Rng) {
        let noise = Normal::new(0.0, 0.08).expect("normal");
        let mut jolt: Option<(usize, Vector3<f64>)> = None;
        let jolt_len = (0.3 / DT) as usize;
        for k in 0..n {
            let t = k as f64 * DT;
            if jolt.is_none() && rng.random_bool((self.jolt_rate * DT).min(1.0)) {
                let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5));
                jolt = Some((k, dir * self.jolt_amplitude));
            }
            let mut lac = Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng))
                + Vector3::new(0.0, 0.15 * (2.0 * PI * 0.3 * t).sin(), 0.0);
            let mut gyr = Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng)) * 10.0;
            if let Some((start, v)) = jolt {
                let u = (k - start) as f64 / jolt_len as f64;
                if u >= 1.0 {
                    jolt = None;
                } else {
                    let shape = (PI * u).sin() * (-3.0 * u).exp();
                    lac += v * shape;
                    gyr += Vector3::new(v.y, v.x, 0.0) * (12.0 * shape);
                }
            }
            track.lac.push(lac);
            track.gyr_dps.push(gyr);
        }
    }

    fn shop(&self, track: &mut Track, n: usize, rng: &mut ChaCha8Rng) {
        let mut k = 0;
        while k < n {
            let gap = (rng.random_range(0.5..1.5) * self.reach_interval_s / DT) as usize;
            let idle = gap.min(n - k);
            // slow shuffling between reaches
            self.walk(track, idle, 0.25, rng);
            k += idle;
            let reach = 1.4;
            let amp = rng.random_range(0.15..0.35);
            let turn = rng.random_range(-70.0..70.0);
            let hold = rng.random_range(0.5..1.5);
            let dir = Vector3::new(1.0, rng.random_range(-0.3..0.3), rng.random_range(0.0..0.8)).normalize();
            let total = ((2.0 * reach + hold) / DT) as usize;
            for j in 0..total.min(n - k) {
                let t = j as f64 * DT;
                let (lac, w) = if t < reach {
                    let (_, ds, dds) = min_jerk(t / reach);
                    (dir * (amp * dds / (reach * reach)), Vector3::new(0.0, 0.0, turn * ds / reach))
                } else if t < reach + hold {
                    (Vector3::zeros(), Vector3::zeros())
                } else {
                    let (_, ds, dds) = min_jerk((t - reach - hold) / reach);
                    (-dir * (amp * dds / (reach * reach)), Vector3::new(0.0, 0.0, -turn * ds / reach))
                };
                track.lac.push(lac);
                track.gyr_dps.push(w);
            }
            k += total.min(n - k);
        }
    }
}

/// Body rate pulling the attitude back toward rest, deg/s.
fn restoring_rate(att: &Attitude) -> Vector3<f64> {
    (att.q.inverse() * att.base).scaled_axis().map(f64::to_degrees) * 0.5
}

/// Renders consecutive activity segments into one stream starting at 0.
pub fn generate_activity_segments(
    user_id: &str,
    session_id: &str,
    segments: &[(ActivityModel, i64)],
    noise_scale: f64,
    seed: u64,
) -> Result<(SensorStream, Vec<ActivitySpan>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut track = Track::default();
    let mut spans = Vec::with_capacity(segments.len());
    let mut t = 0i64;
    for (model, duration_ms) in segments {
        if *duration_ms < 4_000 {
            return Err(Error::InvalidConfig(format!(
                "activity segment of {duration_ms} ms is shorter than 4 s"
            )));
        }
        let n = (*duration_ms / SAMPLE_MS) as usize;
        let before = track.lac.len();
        model.render_into(&mut track, n, &mut rng);
        debug_assert_eq!(track.lac.len() - before, n);
        spans.push(ActivitySpan::new(user_id, model.kind, t, t + duration_ms)?);
        t += duration_ms;
    }
    let mut attitude = Attitude::new(&mut rng);
    let raw = render(&track, 0, &mut attitude, noise_scale, &mut rng, |_, att| restoring_rate(att));
    Ok((stream_from(user_id, session_id, raw), spans))
}

/// A single-activity stream of `duration_s` seconds.
pub fn generate_activity_stream(
    user_id: &str,
    session_id: &str,
    model: &ActivityModel,
    duration_s: f64,
    noise_scale: f64,
    seed: u64,
) -> Result<(SensorStream, ActivitySpan)> {
    if !(duration_s >= 4.0) {
        return Err(Error::InvalidConfig(format!("activity duration {duration_s} s is below 4 s")));
    }
    let ms = (duration_s * 1000.0).round() as i64 / SAMPLE_MS * SAMPLE_MS;
    let (stream, mut spans) = generate_activity_segments(user_id, session_id, &[(*model, ms)], noise_scale, seed)?;
    Ok((stream, spans.remove(0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationParams {
    pub n_users: usize,
    pub gestures_per_user: usize,
    pub activity_minutes_per_user: f64,
    pub master_seed: u64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        Self {
            n_users: 8,
            gestures_per_user: 60,
            activity_minutes_per_user: 30.0,
            master_seed: 0,
        }
    }
}

impl PopulationParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::InvalidConfig("n_users: must be positive".into()));
        }
        if self.n_users > 999 {
            return Err(Error::InvalidConfig("n_users: at most 999".into()));
        }
        if self.gestures_per_user == 0 {
            return Err(Error::InvalidConfig("gestures_per_user: must be positive".into()));
        }
        if !(self.activity_minutes_per_user.is_finite() && self.activity_minutes_per_user >= 0.0) {
            return Err(Error::InvalidConfig("activity_minutes_per_user: must be non-negative".into()));
        }
        Ok(())
    }
}

/// Shares of the activity time, the remainder going to `combined`.
pub const ACTIVITY_SHARES: [(Activity, f64); 3] = [
    (Activity::Walking, 0.38),
    (Activity::BusOrTrain, 0.30),
    (Activity::InStore, 0.30),
];

pub fn user_name(index: usize) -> String {
    format!("u{:03}", index + 1)
}

fn user_seed(master: u64, user: usize, stream: u64) -> u64 {
    splitmix64(splitmix64(master ^ 0x5EED_0000) ^ splitmix64((user as u64) << 8 | stream))
}

fn activity_plan(style: &UserStyle, minutes: f64) -> Vec<(ActivityModel, i64)> {
    let total_ms = (minutes * 60_000.0).round() as i64;
    let mut plan = Vec::new();
    let mut used = 0;
    for (kind, share) in ACTIVITY_SHARES {
        let ms = ((total_ms as f64 * share) as i64) / SAMPLE_MS * SAMPLE_MS;
        if ms >= 4_000 {
            plan.push((ActivityModel::for_user(kind, style), ms));
            used += ms;
        }
    }
    let rest = (total_ms - used) / SAMPLE_MS * SAMPLE_MS;
    if rest >= 4_000 {
        plan.push((ActivityModel::for_user(Activity::Combined, style), rest));
    }
    plan
}

/// Streams and labels for one user: three tap sessions plus one activity
/// session.
fn generate_user(p: &PopulationParams, u: usize) -> Result<(Vec<SensorStream>, Vec<NfcEvent>, Vec<ActivitySpan>)> {
    let name = user_name(u);
    let mut style_rng = ChaCha8Rng::seed_from_u64(user_seed(p.master_seed, u, 0));
    let style = UserStyle::sample(&mut style_rng);
    let terminals = TerminalProfile::all();
    let mut streams = Vec::new();
    let mut events = Vec::new();
    let sessions = TAP_SESSIONS.len();
    for (si, session) in TAP_SESSIONS.iter().enumerate() {
        let count = p.gestures_per_user / sessions + usize::from(si < p.gestures_per_user % sessions);
        if count == 0 {
            continue;
        }
        let (s, e) = generate_tap_stream(
            &name,
            session,
            &style,
            count,
            &terminals,
            si * 3,
            user_seed(p.master_seed, u, 1 + si as u64),
        )?;
        streams.push(s);
        events.extend(e);
    }
    let plan = activity_plan(&style, p.activity_minutes_per_user);
    let mut spans = Vec::new();
    if !plan.is_empty() {
        let (s, sp) = generate_activity_segments(
            &name,
            ACTIVITY_SESSION,
            &plan,
            style.noise_scale,
            user_seed(p.master_seed, u, 16),
        )?;
        streams.push(s);
        spans = sp;
    }
    Ok((streams, events, spans))
}

/// Generates a whole population in memory.
pub fn generate_population(p: &PopulationParams) -> Result<Dataset> {
    p.validate()?;
    let users: Vec<_> = (0..p.n_users)
        .into_par_iter()
        .map(|u| generate_user(p, u))
        .collect::<Result<_>>()?;
    let mut streams = Vec::new();
    let mut events = Vec::new();
    let mut spans = Vec::new();
    for (s, e, a) in users {
        streams.extend(s);
        events.extend(e);
        spans.extend(a);
    }
    Dataset::new(RATE_HZ, streams, events, spans)
}

/// Generates a population and writes it in the canonical file layout.
pub fn write_population(root: &Path, p: &PopulationParams) -> Result<Dataset> {
    let ds = generate_population(p)?;
    write_dataset(root, &ds)?;
    Ok(ds)
}
