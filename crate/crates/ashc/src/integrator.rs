//! Deterministic fixed-step integration and the two interconnection
//! simulations: hierarchical control (abstraction drives the plant through
//! the interface) and the m-relation link (plant drives the abstraction).
//! Also the input signals and reference controller the experiments use.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::certificates::{lyapunov_value, QuadraticCertificate};
use crate::engine::{interface_u_unsaturated, AbstractionMaps, InterfaceSpec};
use crate::linalg::norm;
use crate::system::{AbstractSystem, InputAffineSystem, Region, Trajectory};
use crate::{Error, Result};

/// One classical 4th-order Runge-Kutta update. The field is re-evaluated
/// at every stage; a non-finite stage aborts with the failing time.
pub fn rk4_step<F>(field: &mut F, t: f64, state: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>> + ?Sized,
{
    if h <= 0.0 {
        return Err(Error::Argument("step size must be positive".into()));
    }
    let check = |k: &[f64], stage: &str, ts: f64| -> Result<()> {
        if k.iter().any(|v| !v.is_finite()) {
            Err(Error::Integration {
                t: ts,
                reason: format!("non-finite derivative at stage {stage}"),
            })
        } else {
            Ok(())
        }
    };
    let n = state.len();
    let k1 = field(t, state)?;
    check(&k1, "k1", t)?;
    let mut s2 = vec![0.0; n];
    for i in 0..n {
        s2[i] = state[i] + 0.5 * h * k1[i];
    }
    let k2 = field(t + 0.5 * h, &s2)?;
    check(&k2, "k2", t + 0.5 * h)?;
    let mut s3 = vec![0.0; n];
    for i in 0..n {
        s3[i] = state[i] + 0.5 * h * k2[i];
    }
    let k3 = field(t + 0.5 * h, &s3)?;
    check(&k3, "k3", t + 0.5 * h)?;
    let mut s4 = vec![0.0; n];
    for i in 0..n {
        s4[i] = state[i] + h * k3[i];
    }
    let k4 = field(t + h, &s4)?;
    check(&k4, "k4", t + h)?;
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Triangle wave of period 2*pi: value -1 at t = 0, peak +1 at t = pi,
/// piecewise linear in between. Closed form of the integrated square wave
/// `(2/pi) * int_0^t sign(sin(tau)) dtau - 1`.
pub fn triangle_wave(t: f64) -> f64 {
    let tm = t.rem_euclid(2.0 * PI);
    if tm <= PI {
        (2.0 / PI) * tm - 1.0
    } else {
        3.0 - (2.0 / PI) * tm
    }
}

/// Duty-cycle test signal for the m-relation experiment:
/// `0.3 * triangle(t - 2) + 0.1 * sin(2 pi (t - 2)) + 0.45`, which stays
/// inside [0, 1] by its amplitude budget.
pub fn mrelation_input(t: f64) -> f64 {
    0.3 * triangle_wave(t - 2.0) + 0.1 * (2.0 * PI * (t - 2.0)).sin() + 0.45
}

/// Piecewise-constant list of output targets with a shared dwell time,
/// tracked by a proportional law with amplitude cap.
#[derive(Debug, Clone)]
pub struct ReferenceSchedule {
    targets: Vec<f64>,
    dwell: f64,
    kp: f64,
    v_max: f64,
}

impl ReferenceSchedule {
    /// `solvable` is the open output interval on which the abstraction's
    /// output map can be inverted; every target must lie inside it and be
    /// nonpositive (the converter regulates negative voltages).
    pub fn new(
        targets: Vec<f64>,
        dwell: f64,
        kp: f64,
        v_max: f64,
        solvable: (f64, f64),
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Schedule("at least one target required".into()));
        }
        if !(dwell > 0.0 && kp > 0.0 && v_max > 0.0) {
            return Err(Error::Schedule("dwell, kp, v_max must be positive".into()));
        }
        for &t in &targets {
            if !(t > solvable.0 && t <= 0.0) {
                return Err(Error::Schedule(format!(
                    "target {t} outside the solvable interval ({:.4}, 0]",
                    solvable.0
                )));
            }
        }
        Ok(Self {
            targets,
            dwell,
            kp,
            v_max,
        })
    }

    /// Active target at time `t` past the schedule start; the last target
    /// holds forever.
    pub fn active_target(&self, t: f64) -> f64 {
        let idx = if t <= 0.0 {
            0
        } else {
            ((t / self.dwell) as usize).min(self.targets.len() - 1)
        };
        self.targets[idx]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn dwell(&self) -> f64 {
        self.dwell
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }
}

/// Proportional reference law: invert the output map at the active target
/// and steer `xi` toward it, normalising the authority by `delta(xi)` so
/// the unclamped closed loop is first-order with rate `kp`.
pub fn reference_controller(
    schedule: &ReferenceSchedule,
    kappa_inverse: &dyn Fn(f64) -> Result<f64>,
    delta: &dyn Fn(f64) -> f64,
    xi: f64,
    t: f64,
) -> Result<f64> {
    let target = schedule.active_target(t);
    let xi_star = kappa_inverse(target)?;
    let v = schedule.kp * (xi_star - xi) / delta(xi);
    Ok(v.clamp(-schedule.v_max, schedule.v_max))
}

/// Fixed-step simulation window.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub xi0: Vec<f64>,
    pub x0: Vec<f64>,
    step_cap: u64,
}

/// Default ceiling on the number of integration steps.
pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

impl SimConfig {
    pub fn new(t0: f64, t_end: f64, step: f64, xi0: Vec<f64>, x0: Vec<f64>) -> Result<Self> {
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::Argument("step must be positive".into()));
        }
        if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
            return Err(Error::Argument("t_end must exceed t0".into()));
        }
        let cfg = Self {
            t0,
            t_end,
            step,
            xi0,
            x0,
            step_cap: DEFAULT_STEP_CAP,
        };
        cfg.steps()?;
        Ok(cfg)
    }

    pub fn with_step_cap(mut self, cap: u64) -> Result<Self> {
        self.step_cap = cap;
        self.steps()?;
        Ok(self)
    }

    /// Number of RK4 steps (samples are `steps + 1`).
    pub fn steps(&self) -> Result<u64> {
        let raw = ((self.t_end - self.t0) / self.step).round();
        if !raw.is_finite() || raw < 1.0 || raw as u64 > self.step_cap {
            return Err(Error::Argument(format!(
                "window/step imply {raw} steps, cap is {}",
                self.step_cap
            )));
        }
        Ok(raw as u64)
    }
}

/// Abstract-side input policy for the hierarchical experiment.
#[derive(Clone)]
pub enum InputPolicy {
    /// `v = 0`: the interconnection rests on the invariant manifold.
    Zero,
    /// Track a target schedule; `kappa_inverse` turns an output target
    /// into the abstract state that produces it.
    Reference {
        schedule: ReferenceSchedule,
        kappa_inverse: Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>,
    },
}

/// Result of the hierarchical interconnection run.
pub struct HierarchicalRun {
    /// Abstraction trajectory: states `xi`, inputs `v`, outputs `psi`.
    pub abstract_traj: Trajectory,
    /// Plant trajectory: states `x`, inputs `u`, outputs `y`.
    pub concrete_traj: Trajectory,
    /// Simulation-function value per sample.
    pub w: Vec<f64>,
    /// Saturation flag per sample (the recorded input was clipped).
    pub sat_flags: Vec<bool>,
    pub saturation_count: u64,
    pub clamp_count: u64,
    /// Samples where the plant state left its declared operating box
    /// (evaluation is permitted there, but the excursion is reported).
    pub outside_box_count: u64,
    /// False iff the abstract state ever had to be clamped back into the
    /// certified domain.
    pub certified: bool,
    pub max_abs_ey: f64,
}

impl HierarchicalRun {
    /// Output error `psi - y` at sample `i`.
    pub fn e_y(&self, i: usize) -> Vec<f64> {
        self.abstract_traj.outputs[i]
            .iter()
            .zip(&self.concrete_traj.outputs[i])
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// Couples `xidot = phi_bar(xi) + delta(xi) v` with
/// `xdot = f(x, u_w(xi, x, v))` under the chosen input policy, recording
/// the simulation function and output error at every step. Abstract states
/// that leave the certified domain are clamped back with a warning count;
/// any clamp clears the certification flag.
pub fn simulate_hierarchical(
    cfg: &SimConfig,
    policy: &InputPolicy,
    plant: &InputAffineSystem,
    absys: &AbstractSystem,
    maps: &AbstractionMaps,
    cert: &QuadraticCertificate,
    iface: &InterfaceSpec,
) -> Result<HierarchicalRun> {
    if cfg.xi0.len() != absys.n_hat() || cfg.x0.len() != plant.n() {
        return Err(Error::Dimension("initial states do not match system dimensions".into()));
    }
    if matches!(policy, InputPolicy::Reference { .. }) && absys.n_hat() != 1 {
        return Err(Error::Schedule(
            "the reference policy drives scalar abstractions only".into(),
        ));
    }
    maps.require_in_domain(&cfg.xi0)?;
    let n_hat = absys.n_hat();
    let steps = cfg.steps()?;
    let h = cfg.step;

    let eval_v = |xi: &[f64], t: f64| -> Result<Vec<f64>> {
        match policy {
            InputPolicy::Zero => Ok(vec![0.0; absys.m_hat()]),
            InputPolicy::Reference {
                schedule,
                kappa_inverse,
            } => {
                let delta = |s: f64| (absys.delta())(&[s])[(0, 0)];
                let v = reference_controller(
                    schedule,
                    &|target| kappa_inverse(target),
                    &delta,
                    xi[0],
                    t - cfg.t0,
                )?;
                Ok(vec![v])
            }
        }
    };

    let mut field = |t: f64, s: &[f64]| -> Result<Vec<f64>> {
        let (xi, x) = s.split_at(n_hat);
        let v = eval_v(xi, t)?;
        let mut u = interface_u_unsaturated(maps, iface, cert, xi, x, &v)?;
        iface.saturate(&mut u);
        let xidot = absys.dynamics(xi, &v)?;
        let xdot = crate::system::evaluate_dynamics(plant, x, &u)?;
        let mut out = xidot;
        out.extend(xdot);
        Ok(out)
    };

    let mut abstract_traj = Trajectory::with_capacity(steps as usize + 1);
    let mut concrete_traj = Trajectory::with_capacity(steps as usize + 1);
    let mut w_series = Vec::with_capacity(steps as usize + 1);
    let mut sat_flags = Vec::with_capacity(steps as usize + 1);
    let mut saturation_count = 0u64;
    let mut clamp_count = 0u64;
    let mut outside_box_count = 0u64;
    let mut max_abs_ey: f64 = 0.0;

    let mut state: Vec<f64> = cfg.xi0.iter().chain(cfg.x0.iter()).copied().collect();
    for k in 0..=steps {
        let t = cfg.t0 + k as f64 * h;
        let (xi, x) = state.split_at(n_hat);
        if !plant.operating_box().contains(x) {
            outside_box_count += 1;
        }
        let v = eval_v(xi, t)?;
        let mut u = interface_u_unsaturated(maps, iface, cert, xi, x, &v)?;
        let clipped = iface.saturate(&mut u);
        if clipped {
            saturation_count += 1;
        }
        let psi = (absys.kappa())(xi);
        let y = plant.output(x);
        let ey = norm(
            &psi.iter()
                .zip(&y)
                .map(|(a, b)| a - b)
                .collect::<Vec<f64>>(),
        );
        max_abs_ey = max_abs_ey.max(ey);
        let w = lyapunov_value(cert, &maps.p(xi), x)?;
        abstract_traj.push(t, xi.to_vec(), v, psi)?;
        concrete_traj.push(t, x.to_vec(), u, y)?;
        w_series.push(w);
        sat_flags.push(clipped);
        if k < steps {
            state = rk4_step(&mut field, t, &state, h)?;
            // keep the abstract state inside the certified domain
            let domain = maps.domain_v();
            for (s, (lo, hi)) in state[..n_hat]
                .iter_mut()
                .zip(domain.lo().iter().zip(domain.hi()))
            {
                let clamped = s.clamp(*lo, *hi);
                if clamped != *s {
                    clamp_count += 1;
                    *s = clamped;
                }
            }
        }
    }

    Ok(HierarchicalRun {
        abstract_traj,
        concrete_traj,
        w: w_series,
        sat_flags,
        saturation_count,
        clamp_count,
        outside_box_count,
        certified: clamp_count == 0,
        max_abs_ey,
    })
}

/// Result of the m-relation interconnection run.
pub struct MrelationRun {
    pub concrete_traj: Trajectory,
    /// Abstraction trajectory driven through the link `v = b(x) + c(x) u`.
    pub abstract_traj: Trajectory,
    pub max_output_mismatch: f64,
    /// Max of `|xi - m(x)|` along the run (manifold invariance).
    pub max_manifold_residual: f64,
    /// Samples where the plant output left the region of interest.
    pub left_region_count: u64,
    pub certified: bool,
}

/// Integrates `xdot = f(x, u(t))` and
/// `xidot = phi_bar(xi) + delta(xi) (b(x) + c(x) u)` on a shared grid.
/// With `xi0 = m(x0)` the manifold `xi = m(x)` is invariant and both
/// output series coincide; initialisation off the manifold is permitted
/// and shows up in `max_output_mismatch`.
pub fn simulate_mrelation(
    cfg: &SimConfig,
    plant: &InputAffineSystem,
    absys: &AbstractSystem,
    maps: &AbstractionMaps,
    u_signal: &dyn Fn(f64) -> Vec<f64>,
    output_region: &Region,
) -> Result<MrelationRun> {
    if cfg.x0.len() != plant.n() || cfg.xi0.len() != absys.n_hat() {
        return Err(Error::Dimension("initial states do not match system dimensions".into()));
    }
    let n = plant.n();
    let steps = cfg.steps()?;
    let h = cfg.step;

    let link_v = |x: &[f64], u: &[f64]| -> Result<Vec<f64>> {
        let (b, c) = crate::engine::link_coefficients(maps, plant, absys, x)?;
        let cu = c.matvec(u)?;
        Ok(b.iter().zip(&cu).map(|(a, d)| a + d).collect())
    };

    let mut field = |t: f64, s: &[f64]| -> Result<Vec<f64>> {
        let (x, xi) = s.split_at(n);
        let u = u_signal(t);
        let v = link_v(x, &u)?;
        let mut out = crate::system::evaluate_dynamics(plant, x, &u)?;
        out.extend(absys.dynamics(xi, &v)?);
        Ok(out)
    };

    let mut concrete_traj = Trajectory::with_capacity(steps as usize + 1);
    let mut abstract_traj = Trajectory::with_capacity(steps as usize + 1);
    let mut max_output_mismatch: f64 = 0.0;
    let mut max_manifold_residual: f64 = 0.0;
    let mut left_region_count = 0u64;

    let mut state: Vec<f64> = cfg.x0.iter().chain(cfg.xi0.iter()).copied().collect();
    for k in 0..=steps {
        let t = cfg.t0 + k as f64 * h;
        let (x, xi) = state.split_at(n);
        let u = u_signal(t);
        let v = link_v(x, &u)?;
        let y = plant.output(x);
        let psi = (absys.kappa())(xi);
        let mismatch = norm(
            &psi.iter()
                .zip(&y)
                .map(|(a, b)| a - b)
                .collect::<Vec<f64>>(),
        );
        max_output_mismatch = max_output_mismatch.max(mismatch);
        if let Ok(m_x) = maps.m(x) {
            let res = norm(
                &xi.iter()
                    .zip(&m_x)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<f64>>(),
            );
            max_manifold_residual = max_manifold_residual.max(res);
        }
        if !output_region.contains(&y) {
            left_region_count += 1;
        }
        concrete_traj.push(t, x.to_vec(), u, y)?;
        abstract_traj.push(t, xi.to_vec(), v, psi)?;
        if k < steps {
            state = rk4_step(&mut field, t, &state, h)?;
        }
    }

    Ok(MrelationRun {
        concrete_traj,
        abstract_traj,
        max_output_mismatch,
        max_manifold_residual,
        left_region_count,
        certified: left_region_count == 0,
    })
}
