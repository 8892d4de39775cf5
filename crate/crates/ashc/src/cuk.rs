//! The bundled worked example: an averaged DC-to-DC converter model with
//! closed-form abstraction maps, wired into the generic machinery.
//!
//! The plant is the four-state averaged model of a Ćuk converter (two
//! inductor currents, two capacitor voltages, duty-cycle input). The
//! abstraction is scalar: `p` maps a duty value to the corresponding
//! equilibrium of the plant, `kappa` is the equilibrium output voltage,
//! and `m` inverts `kappa` on the certified output region.

use std::sync::Arc;

use crate::engine::{AbstractionMaps, InterfaceSpec};
use crate::certificates::QuadraticCertificate;
use crate::linalg::{Matrix, SymMatrix};
use crate::system::{AbstractSystem, InputAffineSystem, Region};
use crate::{Error, Result};

/// Electrical parameters of the averaged converter model.
///
/// Defaults: `R_i = 0.05` ohm, `L1 = L3 = 10` mH, `C2 = C4 = 11` mF,
/// `G_L = 44.7` mS, `E = 12` V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CukParams {
    pub r_i: f64,
    pub l1: f64,
    pub l3: f64,
    pub c2: f64,
    pub c4: f64,
    pub g_l: f64,
    pub e: f64,
}

impl Default for CukParams {
    fn default() -> Self {
        Self {
            r_i: 0.05,
            l1: 0.010,
            l3: 0.010,
            c2: 0.011,
            c4: 0.011,
            g_l: 0.0447,
            e: 12.0,
        }
    }
}

impl CukParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("r_i", self.r_i),
            ("l1", self.l1),
            ("l3", self.l3),
            ("c2", self.c2),
            ("c4", self.c4),
            ("g_l", self.g_l),
            ("e", self.e),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Construction(format!(
                    "parameter {name} must be strictly positive (got {v})"
                )));
            }
        }
        Ok(())
    }

    /// Open interval of output voltages for which the left inverse `m`
    /// exists: `(-E / (2 sqrt(R_i G_L)), +E / (2 sqrt(R_i G_L)))`.
    pub fn solvable_interval(&self) -> (f64, f64) {
        let half = self.e / (2.0 * (self.r_i * self.g_l).sqrt());
        (-half, half)
    }
}

/// Choice of the abstract input matrix `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaVariant {
    /// `delta = 1`.
    Unit,
    /// `delta(xi) = ((xi - 1)^2 + G_L R_i xi^2)^2`, which flattens the
    /// cross-term norm over the domain.
    Redesigned,
}

fn denom(p: &CukParams, xi: f64) -> f64 {
    (xi - 1.0) * (xi - 1.0) + p.g_l * p.r_i * xi * xi
}

/// Equilibrium family: state of the plant held at constant duty `xi`.
pub fn p_map(p: &CukParams, xi: f64) -> Vec<f64> {
    let d = denom(p, xi);
    vec![
        p.e * p.g_l * xi * xi / d,
        -p.e * (xi - 1.0) / d,
        p.e * p.g_l * xi * (xi - 1.0) / d,
        p.e * xi * (xi - 1.0) / d,
    ]
}

/// Derivative of [`p_map`] with respect to `xi` (quotient rule, exact).
pub fn dp_dxi_map(p: &CukParams, xi: f64) -> Vec<f64> {
    let d = denom(p, xi);
    let dd = 2.0 * (xi - 1.0) + 2.0 * p.g_l * p.r_i * xi;
    let n = [
        p.e * p.g_l * xi * xi,
        -p.e * (xi - 1.0),
        p.e * p.g_l * xi * (xi - 1.0),
        p.e * xi * (xi - 1.0),
    ];
    let np = [
        2.0 * p.e * p.g_l * xi,
        -p.e,
        p.e * p.g_l * (2.0 * xi - 1.0),
        p.e * (2.0 * xi - 1.0),
    ];
    (0..4).map(|i| (np[i] * d - n[i] * dd) / (d * d)).collect()
}

/// Equilibrium output voltage `kappa(xi) = E xi (xi - 1) / D(xi)`.
pub fn kappa_map(p: &CukParams, xi: f64) -> f64 {
    p.e * xi * (xi - 1.0) / denom(p, xi)
}

fn chi(p: &CukParams, x4: f64) -> f64 {
    p.e * p.e - 4.0 * p.g_l * p.r_i * x4 * x4
}

/// Left inverse of `kappa` on the certified domain:
/// `m(x4) = (-E + 2 x4 + sqrt(chi)) / (2 (G_L R_i + 1) x4 - 2 E)` with
/// `chi = E^2 - 4 G_L R_i x4^2`. Rejects outputs with negative
/// discriminant (outside the solvable interval).
pub fn m_map(p: &CukParams, x4: f64) -> Result<f64> {
    let chi = chi(p, x4);
    if chi < 0.0 {
        let (lo, hi) = p.solvable_interval();
        return Err(Error::Domain(format!(
            "output {x4} outside the solvable interval [{lo:.4}, {hi:.4}]"
        )));
    }
    Ok((-p.e + 2.0 * x4 + chi.sqrt()) / (2.0 * (p.g_l * p.r_i + 1.0) * x4 - 2.0 * p.e))
}

/// The other root of the defining quadratic; not a left inverse of `p` on
/// the certified domain. Exposed for fault-injection tests only.
pub fn m_map_alternate(p: &CukParams, x4: f64) -> Result<f64> {
    let chi = chi(p, x4);
    if chi < 0.0 {
        return Err(Error::Domain(format!("output {x4} outside the solvable interval")));
    }
    Ok((-p.e + 2.0 * x4 - chi.sqrt()) / (2.0 * (p.g_l * p.r_i + 1.0) * x4 - 2.0 * p.e))
}

/// Derivative of [`m_map`] with respect to `x4` (quotient rule, exact).
pub fn dm_dx4_map(p: &CukParams, x4: f64) -> Result<f64> {
    let chi = chi(p, x4);
    if chi <= 0.0 {
        return Err(Error::Domain(format!(
            "derivative of the left inverse undefined at output {x4}"
        )));
    }
    let sqrt_chi = chi.sqrt();
    let num = -p.e + 2.0 * x4 + sqrt_chi;
    let den = 2.0 * (p.g_l * p.r_i + 1.0) * x4 - 2.0 * p.e;
    let dnum = 2.0 - 4.0 * p.g_l * p.r_i * x4 / sqrt_chi;
    let dden = 2.0 * (p.g_l * p.r_i + 1.0);
    Ok((dnum * den - num * dden) / (den * den))
}

/// Residual of the quadratic that defines the left inverse:
/// `|[(G_L R_i + 1) x4 - E] m^2 + (E - 2 x4) m + x4|`.
pub fn quadratic_root_check(p: &CukParams, x4: f64, m_val: f64) -> f64 {
    let a = (p.g_l * p.r_i + 1.0) * x4 - p.e;
    let b = p.e - 2.0 * x4;
    (a * m_val * m_val + b * m_val + x4).abs()
}

/// Abstract input matrix value for the chosen variant.
pub fn delta_map(p: &CukParams, variant: DeltaVariant, xi: f64) -> f64 {
    match variant {
        DeltaVariant::Unit => 1.0,
        DeltaVariant::Redesigned => {
            let d = denom(p, xi);
            d * d
        }
    }
}

/// Which way `chi` enters the denominator of the rational closed form
/// for the link coefficient `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiReading {
    SquareRoot,
    Linear,
}

/// Rational closed form for the m-relation link coefficient `b` under the
/// redesigned `delta`. The constructive pseudoinverse route in the engine
/// is authoritative; `verify` reports the numerical agreement of each
/// reading of this form against it.
pub fn b_closed_form(p: &CukParams, x: &[f64], reading: ChiReading) -> Result<f64> {
    let x3 = x[2];
    let x4 = x[3];
    let chi = chi(p, x4);
    if chi <= 0.0 {
        return Err(Error::Domain(format!("output {x4} outside the solvable interval")));
    }
    let ch = match reading {
        ChiReading::SquareRoot => chi.sqrt(),
        ChiReading::Linear => chi,
    };
    let num = -2.0 * (x3 - p.g_l * x4) * (x4 - p.e + p.g_l * p.r_i * x4).powi(2);
    let den = p.c4
        * p.e
        * ch
        * (p.e + ch - p.g_l * p.r_i * ch + p.e * p.g_l * p.r_i - 4.0 * p.g_l * p.r_i * x4);
    Ok(num / den)
}

/// Affine-in-state matrix of the plant at duty `u`.
pub fn a_bar_matrix(p: &CukParams, u: f64) -> Matrix {
    Matrix::from_rows(&[
        vec![-p.r_i / p.l1, -(1.0 - u) / p.l1, 0.0, 0.0],
        vec![(1.0 - u) / p.c2, 0.0, u / p.c2, 0.0],
        vec![0.0, -u / p.l3, 0.0, -1.0 / p.l3],
        vec![0.0, 0.0, 1.0 / p.c4, -p.g_l / p.c4],
    ])
    .unwrap()
}

/// Constant offset of the affine-in-state form.
pub fn b_bar_vec(p: &CukParams) -> Vec<f64> {
    vec![p.e / p.l1, 0.0, 0.0, 0.0]
}

/// Stabilisability certificate weight solved offline for the default
/// parameters, feasible with decay rate 2.
pub fn default_certificate_matrix() -> SymMatrix {
    SymMatrix::new(
        4,
        vec![
            0.4804, 0.0102, 0.0002, -0.0093, //
            0.0102, 0.5304, 0.0081, 0.0001, //
            0.0002, 0.0081, 0.4824, -0.0135, //
            -0.0093, 0.0001, -0.0135, 0.5304,
        ],
    )
    .unwrap()
}

/// Output envelope coefficient certified by `M >= c0 C^T C` for the
/// default certificate.
pub const DEFAULT_C0: f64 = 0.52;

/// Certified abstract domain.
pub const DOMAIN_LO: f64 = 0.0;
pub const DOMAIN_HI: f64 = 0.95;

/// Output region of interest (volts).
pub const OUTPUT_LO: f64 = -120.0;
pub const OUTPUT_HI: f64 = 0.0;

/// Deliberate faults for validation of the checking pipeline. A faulted
/// artifact skips the constructor self-checks so the downstream residual
/// checks and experiments can demonstrate detection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CukFaults {
    /// Additive shift of the fourth component of `p`.
    pub p4_offset: f64,
    /// Swap the left inverse for the other quadratic root.
    pub alternate_m_root: bool,
}

impl CukFaults {
    pub fn any(&self) -> bool {
        self.p4_offset != 0.0 || self.alternate_m_root
    }
}

/// The fully wired converter instance.
#[derive(Clone)]
pub struct CukAbstraction {
    params: CukParams,
    delta_variant: DeltaVariant,
    lambda: f64,
    epsilon: f64,
    plant: InputAffineSystem,
    absys: AbstractSystem,
    maps: AbstractionMaps,
    cert: QuadraticCertificate,
    interface: InterfaceSpec,
    c_matrix: Matrix,
}

impl CukAbstraction {
    pub fn params(&self) -> &CukParams {
        &self.params
    }

    pub fn delta_variant(&self) -> DeltaVariant {
        self.delta_variant
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn plant(&self) -> &InputAffineSystem {
        &self.plant
    }

    pub fn abstract_system(&self) -> &AbstractSystem {
        &self.absys
    }

    pub fn maps(&self) -> &AbstractionMaps {
        &self.maps
    }

    pub fn certificate(&self) -> &QuadraticCertificate {
        &self.cert
    }

    pub fn interface(&self) -> &InterfaceSpec {
        &self.interface
    }

    /// Linear output matrix `C = [0 0 0 1]`.
    pub fn c_matrix(&self) -> &Matrix {
        &self.c_matrix
    }

    /// Output region of interest.
    pub fn output_region(&self) -> (f64, f64) {
        (OUTPUT_LO, OUTPUT_HI)
    }
}

/// Builds the converter instance with the default certificate data
/// (`lambda = 2`, `epsilon = 1`) and validates every constructor
/// invariant.
pub fn build_cuk(params: &CukParams, variant: DeltaVariant) -> Result<CukAbstraction> {
    build_cuk_configured(params, variant, 2.0, 1.0, &CukFaults::default())
}

/// Builds a deliberately faulted instance, skipping the self-checks the
/// fault would trip. Only meant to exercise the verification pipeline.
pub fn build_cuk_with_faults(
    params: &CukParams,
    variant: DeltaVariant,
    faults: &CukFaults,
) -> Result<CukAbstraction> {
    build_cuk_configured(params, variant, 2.0, 1.0, faults)
}

/// Full builder: certificate rate `lambda`, interface split `epsilon`.
pub fn build_cuk_configured(
    params: &CukParams,
    variant: DeltaVariant,
    lambda: f64,
    epsilon: f64,
    faults: &CukFaults,
) -> Result<CukAbstraction> {
    params.validate()?;
    let p = *params;
    let faults = *faults;

    // plant callables
    let f_bar: crate::system::VectorFn = Arc::new(move |x: &[f64]| {
        vec![
            (-p.r_i * x[0] - x[1] + p.e) / p.l1,
            x[0] / p.c2,
            -x[3] / p.l3,
            (x[2] - p.g_l * x[3]) / p.c4,
        ]
    });
    // third entry rides on the capacitor voltage x2 (duty couples L3 to C2)
    let g: crate::system::MatrixFn = Arc::new(move |x: &[f64]| {
        Matrix::from_row_major(
            4,
            1,
            vec![x[1] / p.l1, (-x[0] + x[2]) / p.c2, -x[1] / p.l3, 0.0],
        )
        .unwrap()
    });
    let h: crate::system::VectorFn = Arc::new(move |x: &[f64]| vec![x[3]]);
    let a_bar: crate::system::MatrixFn = Arc::new(move |u: &[f64]| a_bar_matrix(&p, u[0]));

    // operating box: bounding box of the equilibrium family, inflated
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for k in 0..=512 {
        let xi = DOMAIN_LO + (DOMAIN_HI - DOMAIN_LO) * k as f64 / 512.0;
        for (i, v) in p_map(&p, xi).iter().enumerate() {
            lo[i] = lo[i].min(*v);
            hi[i] = hi[i].max(*v);
        }
    }
    let pad: Vec<f64> = (0..4).map(|i| 0.2 * (hi[i] - lo[i]) + 1.0).collect();
    let operating_box = Region::new(
        (0..4).map(|i| lo[i] - pad[i]).collect(),
        (0..4).map(|i| hi[i] + pad[i]).collect(),
    )?;
    let input_box = Region::new(vec![0.0], vec![1.0])?;

    let plant = InputAffineSystem::new(
        4,
        1,
        1,
        f_bar,
        g,
        h,
        Some(a_bar),
        Some(b_bar_vec(&p)),
        operating_box.clone(),
        input_box,
    )?;

    // abstraction callables
    let phi_bar: crate::system::VectorFn = Arc::new(|_: &[f64]| vec![0.0]);
    let delta: crate::system::MatrixFn = Arc::new(move |xi: &[f64]| {
        Matrix::from_row_major(1, 1, vec![delta_map(&p, variant, xi[0])]).unwrap()
    });
    let kappa: crate::system::VectorFn = Arc::new(move |xi: &[f64]| vec![kappa_map(&p, xi[0])]);
    let absys = AbstractSystem::new(1, 1, phi_bar, delta, kappa)?;

    // abstraction maps, optionally faulted
    let p4_offset = faults.p4_offset;
    let p_fn: crate::system::VectorFn = Arc::new(move |xi: &[f64]| {
        let mut v = p_map(&p, xi[0]);
        v[3] += p4_offset;
        v
    });
    let dp_fn: crate::system::MatrixFn = Arc::new(move |xi: &[f64]| {
        Matrix::from_row_major(4, 1, dp_dxi_map(&p, xi[0])).unwrap()
    });
    let l_fn: crate::system::VectorFn = Arc::new(move |xi: &[f64]| vec![xi[0]]);
    let alternate = faults.alternate_m_root;
    let m_fn: crate::engine::FallibleVectorFn = Arc::new(move |x: &[f64]| {
        let val = if alternate {
            m_map_alternate(&p, x[3])?
        } else {
            m_map(&p, x[3])?
        };
        Ok(vec![val])
    });
    let dm_fn: crate::engine::FallibleMatrixFn = Arc::new(move |x: &[f64]| {
        let d = dm_dx4_map(&p, x[3])?;
        Ok(Matrix::from_row_major(1, 4, vec![0.0, 0.0, 0.0, d]).unwrap())
    });
    let domain_v = Region::new(vec![DOMAIN_LO], vec![DOMAIN_HI])?;
    let operating_xy = Region::new(
        vec![lo[0] - pad[0], lo[1] - pad[1], lo[2] - pad[2], OUTPUT_LO],
        vec![hi[0] + pad[0], hi[1] + pad[1], hi[2] + pad[2], OUTPUT_HI],
    )?;

    let maps = if faults.any() {
        AbstractionMaps::new_unchecked(
            4, 1, 1, p_fn, dp_fn, l_fn, m_fn, dm_fn, domain_v.clone(), operating_xy,
        )?
    } else {
        AbstractionMaps::new(
            4, 1, 1, p_fn, dp_fn, l_fn, m_fn, dm_fn, domain_v.clone(), operating_xy,
        )?
    };

    let cert = QuadraticCertificate::new(default_certificate_matrix(), lambda, None)?;

    // least-squares interface gain, saturated to the duty range
    let maps_for_gain = maps.clone();
    let cert_for_gain = cert.clone();
    let g_for_gain = plant.g().clone();
    let delta_for_gain = absys.delta().clone();
    let gain: crate::engine::GainFn = Arc::new(move |xi: &[f64], x: &[f64]| {
        crate::engine::least_squares_gain(
            &maps_for_gain,
            &cert_for_gain,
            &g_for_gain,
            &delta_for_gain,
            xi,
            x,
        )
        .expect("gain dimensions are fixed by construction")
    });
    let interface = InterfaceSpec::new(gain, Some(vec![(0.0, 1.0)]), epsilon, lambda)?;

    if !faults.any() {
        absys.probe_delta_continuity(&domain_v, 32, 0x72)?;
        validate_instance(&p, variant)?;
    }

    Ok(CukAbstraction {
        params: p,
        delta_variant: variant,
        lambda,
        epsilon,
        plant,
        absys,
        maps,
        cert,
        interface,
        c_matrix: Matrix::from_row_major(1, 4, vec![0.0, 0.0, 0.0, 1.0])?,
    })
}

/// Closed-form invariants of the instance, checked on dense grids.
fn validate_instance(p: &CukParams, variant: DeltaVariant) -> Result<()> {
    // delta keeps full row rank (positive) over the certified domain
    let mut delta_min = f64::INFINITY;
    for k in 0..=1000 {
        let xi = DOMAIN_LO + (DOMAIN_HI - DOMAIN_LO) * k as f64 / 1000.0;
        delta_min = delta_min.min(delta_map(p, variant, xi));
    }
    if delta_min <= 1e-7 {
        return Err(Error::Construction(format!(
            "delta loses rank on the domain (min {delta_min:.3e})"
        )));
    }
    // kappa pins zero at both duty extremes
    if kappa_map(p, 0.0).abs() > 1e-12 || kappa_map(p, 1.0).abs() > 1e-12 {
        return Err(Error::Construction(
            "kappa(0) = kappa(1) = 0 fails for these parameters".into(),
        ));
    }
    // kappa never leaves the solvable interval on [0, 1]
    let (solv_lo, _) = p.solvable_interval();
    let mut kappa_min = f64::INFINITY;
    for k in 0..=1000 {
        let xi = k as f64 / 1000.0;
        kappa_min = kappa_min.min(kappa_map(p, xi));
    }
    if kappa_min <= solv_lo {
        return Err(Error::Construction(format!(
            "kappa dips to {kappa_min} below the solvable bound {solv_lo}"
        )));
    }
    Ok(())
}
