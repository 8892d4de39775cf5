//! Data model for concrete and abstract systems, trajectories, and
//! sampling grids. Plant-independent: concrete instances wire closures in.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// State- or parameter-indexed vector field.
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// State-indexed matrix field (input matrices, Jacobians).
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// Feedback term `k(z, x, u)` of a stabilisability certificate.
pub type FeedbackFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Axis-aligned box in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension("region bounds must have equal, nonzero length".into()));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !a.is_finite() || !b.is_finite() || a >= b)
        {
            return Err(Error::Argument("region requires finite lo < hi per dimension".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Deterministic uniform sample cloud (seeded ChaCha stream).
    pub fn sample_cloud(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.lo
                    .iter()
                    .zip(&self.hi)
                    .map(|(a, b)| rng.random_range(*a..*b))
                    .collect()
            })
            .collect()
    }
}

/// Rectangular sampling grid: per-dimension bounds and point counts.
#[derive(Debug, Clone)]
pub struct GridSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<usize>,
    cap: u128,
}

/// Default ceiling on the total number of grid points.
pub const DEFAULT_GRID_CAP: u128 = 10_000_000;

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.is_empty() {
            return Err(Error::Dimension("grid spec arrays must have equal, nonzero length".into()));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::Argument("grid counts must be >= 2".into()));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !a.is_finite() || !b.is_finite() || a >= b)
        {
            return Err(Error::Argument("grid requires finite lo < hi per dimension".into()));
        }
        Ok(Self {
            lo,
            hi,
            counts,
            cap: DEFAULT_GRID_CAP,
        })
    }

    /// 1-D convenience constructor.
    pub fn line(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![count])
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.cap = cap;
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().fold(1u128, |acc, &c| acc * c as u128)
    }
}

/// Lexicographic enumeration of the full Cartesian grid, both endpoints
/// included in every dimension.
pub fn grid_points(spec: &GridSpec) -> Result<GridIter> {
    let total = spec.total();
    if total > spec.cap {
        return Err(Error::GridCap {
            count: total,
            cap: spec.cap,
        });
    }
    Ok(GridIter {
        spec: spec.clone(),
        index: vec![0; spec.dim()],
        done: false,
    })
}

#[derive(Debug)]
pub struct GridIter {
    spec: GridSpec,
    index: Vec<usize>,
    done: bool,
}

impl Iterator for GridIter {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let point: Vec<f64> = self
            .index
            .iter()
            .enumerate()
            .map(|(d, &i)| {
                let n = self.spec.counts[d];
                self.spec.lo[d] + (self.spec.hi[d] - self.spec.lo[d]) * i as f64 / (n - 1) as f64
            })
            .collect();
        // advance odometer, last dimension fastest
        for d in (0..self.index.len()).rev() {
            self.index[d] += 1;
            if self.index[d] < self.spec.counts[d] {
                return Some(point);
            }
            self.index[d] = 0;
        }
        self.done = true;
        Some(point)
    }
}

/// Input-affine concrete plant `xdot = f_bar(x) + g(x) u`, `y = h(x)`,
/// optionally carrying the affine-in-state form `f(x, u) = A_bar(u) x + b_bar`.
#[derive(Clone)]
pub struct InputAffineSystem {
    n: usize,
    m: usize,
    p_out: usize,
    f_bar: VectorFn,
    g: MatrixFn,
    h: VectorFn,
    a_bar: Option<MatrixFn>,
    b_bar: Option<Vec<f64>>,
    operating_box: Region,
    input_box: Region,
}

impl InputAffineSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        m: usize,
        p_out: usize,
        f_bar: VectorFn,
        g: MatrixFn,
        h: VectorFn,
        a_bar: Option<MatrixFn>,
        b_bar: Option<Vec<f64>>,
        operating_box: Region,
        input_box: Region,
    ) -> Result<Self> {
        if operating_box.dim() != n || input_box.dim() != m {
            return Err(Error::Dimension(
                "operating/input box dimensions must match n/m".into(),
            ));
        }
        if a_bar.is_some() != b_bar.is_some() {
            return Err(Error::Construction(
                "A_bar and b_bar must be supplied together".into(),
            ));
        }
        if let Some(b) = &b_bar {
            if b.len() != n {
                return Err(Error::Dimension("b_bar length must equal n".into()));
            }
        }
        let sys = Self {
            n,
            m,
            p_out,
            f_bar,
            g,
            h,
            a_bar,
            b_bar,
            operating_box,
            input_box,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Probes callables for shape and finiteness over the declared boxes
    /// and, when the affine-in-state form is present, checks that both
    /// formulations agree on a deterministic sample cloud.
    fn validate(&self) -> Result<()> {
        let xs = self.operating_box.sample_cloud(50, 0x5157);
        let us = self.input_box.sample_cloud(50, 0x5158);
        for (x, u) in xs.iter().zip(&us) {
            let fx = (self.f_bar)(x);
            let gx = (self.g)(x);
            let hx = (self.h)(x);
            if fx.len() != self.n {
                return Err(Error::Dimension("f_bar output length != n".into()));
            }
            if gx.rows() != self.n || gx.cols() != self.m {
                return Err(Error::Dimension("g output shape != n x m".into()));
            }
            if hx.len() != self.p_out {
                return Err(Error::Dimension("h output length != p".into()));
            }
            if fx.iter().any(|v| !v.is_finite()) || !gx.is_finite() || hx.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    field: "plant callables".into(),
                    location: format!("{x:?}"),
                });
            }
            if let (Some(a_bar), Some(b_bar)) = (&self.a_bar, &self.b_bar) {
                let direct = self.evaluate_dynamics_at(x, u)?;
                let via_affine = a_bar(u).matvec(x)?;
                for i in 0..self.n {
                    let alt = via_affine[i] + b_bar[i];
                    if (direct[i] - alt).abs() > 1e-9 * (1.0 + direct[i].abs()) {
                        return Err(Error::Construction(format!(
                            "affine-in-state form disagrees with f_bar + g*u at x={x:?}, u={u:?} \
                             (component {i}: {} vs {alt})",
                            direct[i]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p_out(&self) -> usize {
        self.p_out
    }

    pub fn f_bar(&self) -> &VectorFn {
        &self.f_bar
    }

    pub fn g(&self) -> &MatrixFn {
        &self.g
    }

    pub fn h(&self) -> &VectorFn {
        &self.h
    }

    pub fn operating_box(&self) -> &Region {
        &self.operating_box
    }

    pub fn input_box(&self) -> &Region {
        &self.input_box
    }

    /// The affine-in-state matrix, if the plant declares one.
    pub fn a_bar(&self, u: &[f64]) -> Result<Matrix> {
        match &self.a_bar {
            Some(f) => Ok(f(u)),
            None => Err(Error::UnsupportedPlant(
                "this plant does not expose the affine-in-state form".into(),
            )),
        }
    }

    pub fn b_bar(&self) -> Result<&[f64]> {
        match &self.b_bar {
            Some(b) => Ok(b),
            None => Err(Error::UnsupportedPlant(
                "this plant does not expose the affine-in-state form".into(),
            )),
        }
    }

    pub fn has_affine_form(&self) -> bool {
        self.a_bar.is_some()
    }

    fn evaluate_dynamics_at(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n || u.len() != self.m {
            return Err(Error::Dimension(format!(
                "state/input lengths {}/{} vs declared {}/{}",
                x.len(),
                u.len(),
                self.n,
                self.m
            )));
        }
        let mut out = (self.f_bar)(x);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                field: "f_bar".into(),
                location: format!("x = {x:?}"),
            });
        }
        let gx = (self.g)(x);
        if !gx.is_finite() {
            return Err(Error::NonFinite {
                field: "g".into(),
                location: format!("x = {x:?}"),
            });
        }
        let gu = gx.matvec(u)?;
        for i in 0..self.n {
            out[i] += gu[i];
        }
        Ok(out)
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        (self.h)(x)
    }
}

/// `f_bar(x) + g(x) u`.
pub fn evaluate_dynamics(sys: &InputAffineSystem, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    sys.evaluate_dynamics_at(x, u)
}

/// Input-affine abstraction `xidot = phi_bar(xi) + delta(xi) v`,
/// `psi = kappa(xi)`.
#[derive(Clone)]
pub struct AbstractSystem {
    n_hat: usize,
    m_hat: usize,
    phi_bar: VectorFn,
    delta: MatrixFn,
    kappa: VectorFn,
}

impl AbstractSystem {
    pub fn new(
        n_hat: usize,
        m_hat: usize,
        phi_bar: VectorFn,
        delta: MatrixFn,
        kappa: VectorFn,
    ) -> Result<Self> {
        if n_hat == 0 || m_hat == 0 {
            return Err(Error::Dimension("abstract dimensions must be >= 1".into()));
        }
        Ok(Self {
            n_hat,
            m_hat,
            phi_bar,
            delta,
            kappa,
        })
    }

    pub fn n_hat(&self) -> usize {
        self.n_hat
    }

    pub fn m_hat(&self) -> usize {
        self.m_hat
    }

    pub fn phi_bar(&self) -> &VectorFn {
        &self.phi_bar
    }

    pub fn delta(&self) -> &MatrixFn {
        &self.delta
    }

    pub fn kappa(&self) -> &VectorFn {
        &self.kappa
    }

    pub fn dynamics(&self, xi: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.n_hat || v.len() != self.m_hat {
            return Err(Error::Dimension("abstract state/input length mismatch".into()));
        }
        let mut out = (self.phi_bar)(xi);
        let dv = (self.delta)(xi).matvec(v)?;
        for i in 0..self.n_hat {
            out[i] += dv[i];
        }
        Ok(out)
    }

    /// Finite-difference continuity spot-check of `delta` over a box.
    pub fn probe_delta_continuity(&self, domain: &Region, samples: usize, seed: u64) -> Result<()> {
        let h = 1e-6;
        for xi in domain.sample_cloud(samples, seed) {
            let d0 = (self.delta)(&xi);
            let mut shifted = xi.clone();
            shifted[0] += h;
            let d1 = (self.delta)(&shifted);
            let jump = d1.sub(&d0)?.max_abs();
            if !jump.is_finite() || jump > 1e3 * h * (1.0 + d0.max_abs()) {
                return Err(Error::Construction(format!(
                    "delta looks discontinuous near xi = {xi:?} (jump {jump:.3e} over step {h:.1e})"
                )));
            }
        }
        Ok(())
    }
}

/// Sampled trajectory; outputs are derived from states and stored for
/// convenience.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            inputs: Vec::with_capacity(n),
            outputs: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, state: Vec<f64>, input: Vec<f64>, output: Vec<f64>) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::Argument(format!(
                    "times must be strictly increasing ({t} after {last})"
                )));
            }
        }
        self.times.push(t);
        self.states.push(state);
        self.inputs.push(input);
        self.outputs.push(output);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Re-derives every stored output through `h` and checks agreement.
    pub fn validate_outputs(&self, h: &VectorFn, tol: f64) -> Result<()> {
        for (i, (x, y)) in self.states.iter().zip(&self.outputs).enumerate() {
            let hx = h(x);
            if hx.len() != y.len()
                || hx.iter().zip(y).any(|(a, b)| (a - b).abs() > tol)
            {
                return Err(Error::Construction(format!(
                    "outputs[{i}] disagrees with h(states[{i}])"
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic uniform samples from a box, plus a uniform scalar channel
/// (used for input amplitudes alongside state clouds).
pub fn sample_scalar(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
