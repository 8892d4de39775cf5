//! The five commands: verification suite, cross-term scan, bound printer,
//! and the two interconnection experiments.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use ashc::certificates::{check_output_lower_bound, verify_polytopic_lmi};
use ashc::cuk::{self, ChiReading, CukAbstraction, CukParams, DeltaVariant};
use ashc::engine::{
    self, csv_float, BoundConstants, QPolicy, ResidualReport, ResidualSample,
};
use ashc::integrator::{
    mrelation_input, simulate_hierarchical, simulate_mrelation, InputPolicy, ReferenceSchedule,
    SimConfig,
};
use ashc::linalg::{sym_eigenvalues, SymMatrix};
use ashc::system::{GridSpec, Region};

use crate::config::Config;
use crate::csvout::{render_csv, Field};
use crate::manifest::{sha256_hex, write_atomic, RunManifest};

pub enum CliError {
    /// Unusable configuration: exit 2.
    Config(String),
    /// Runtime failure (integration abort, I/O): exit 1.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Run(m) => m,
        }
    }
}

type CmdResult = Result<i32, CliError>;

pub struct Ctx {
    pub config: Config,
    pub config_digest: String,
    pub out_dir: PathBuf,
}

impl Ctx {
    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, &self.config_digest, &self.config.snapshot())
    }

    fn build(&self) -> Result<(CukAbstraction, CukParams, DeltaVariant), CliError> {
        let params = self.config.params.to_params();
        let variant = self
            .config
            .abstraction
            .variant()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let artifact = cuk::build_cuk_configured(
            &params,
            variant,
            self.config.certificate.lambda,
            self.config.certificate.epsilon,
            &self.config.faults.to_faults(),
        )
        .map_err(|e| CliError::Config(format!("cannot build the instance: {e}")))?;
        Ok((artifact, params, variant))
    }

    fn emit(&self, manifest: &mut RunManifest, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Run(format!("cannot create {}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        write_atomic(&path, contents.as_bytes())
            .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))?;
        manifest.add_file(&path, contents.as_bytes());
        Ok(path)
    }

    fn finish(&self, mut manifest: RunManifest, started: Instant, exit: i32) -> CmdResult {
        manifest.wall_time_s = started.elapsed().as_secs_f64();
        manifest.exit_status = exit;
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Run(format!("cannot create {}: {e}", self.out_dir.display())))?;
        manifest
            .write(&self.out_dir)
            .map_err(|e| CliError::Run(format!("cannot write manifest: {e}")))?;
        Ok(exit)
    }
}

struct CheckRow {
    report: ResidualReport,
    /// Informational rows report values without gating the exit status.
    info: bool,
}

fn grid_1d(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn cmd_verify(ctx: &Ctx) -> CmdResult {
    let started = Instant::now();
    let (artifact, params, variant) = ctx.build()?;
    let vcfg = &ctx.config.verify;
    let lambda = ctx.config.certificate.lambda;
    let c0 = ctx.config.certificate.c0;
    let maps = artifact.maps();
    let plant = artifact.plant();
    let absys = artifact.abstract_system();
    let cert = artifact.certificate();
    let (dom_lo, dom_hi) = (maps.domain_v().lo()[0], maps.domain_v().hi()[0]);
    let (out_lo, out_hi) = artifact.output_region();

    let mut rows: Vec<CheckRow> = Vec::new();
    let mut failed: Vec<String> = Vec::new();
    let chk = |rows: &mut Vec<CheckRow>, failed: &mut Vec<String>, report: ResidualReport, info: bool| {
        if !info && !report.pass {
            failed.push(report.name.clone());
        }
        rows.push(CheckRow { report, info });
    };

    // polytopic LMI at the duty extremes
    let vertices = [
        cuk::a_bar_matrix(&params, 0.0),
        cuk::a_bar_matrix(&params, 1.0),
    ];
    let lmi = verify_polytopic_lmi(&vertices, cert.m(), lambda, vcfg.tol_lmi)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let lmi_ok = lmi.feasible;
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples(
            "lmi_feasibility",
            lmi.vertex_max_eigs
                .iter()
                .enumerate()
                .map(|(i, &e)| ResidualSample {
                    location: vec![i as f64],
                    residual: e,
                })
                .collect(),
            vcfg.tol_lmi,
        ),
        false,
    );

    // invariance and output identities over the domain grid
    let xi_grid = grid_1d(dom_lo, dom_hi, vcfg.grid_points);
    let residual_grid = |f: &dyn Fn(f64) -> Result<f64, ashc::Error>| -> Result<Vec<ResidualSample>, CliError> {
        xi_grid
            .iter()
            .map(|&xi| {
                Ok(ResidualSample {
                    location: vec![xi],
                    residual: f(xi).map_err(|e| CliError::Run(e.to_string()))?,
                })
            })
            .collect()
    };
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples(
            "invariance_equation",
            residual_grid(&|xi| {
                engine::invariance_residual_p(maps, plant, &[xi], absys.phi_bar())
            })?,
            vcfg.tol_invariance,
        ),
        false,
    );
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples(
            "output_consistency",
            residual_grid(&|xi| {
                engine::output_consistency_residual(maps, absys.kappa(), plant.h(), &[xi])
            })?,
            vcfg.tol_output_consistency,
        ),
        false,
    );
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples(
            "left_inverse_identity",
            residual_grid(&|xi| Ok((maps.m(&maps.p(&[xi]))?[0] - xi).abs()))?,
            vcfg.tol_left_inverse,
        ),
        false,
    );

    // output recovery and kernel condition over the output region
    let x4_grid = grid_1d(out_lo, out_hi, vcfg.grid_points);
    let recovery: Vec<ResidualSample> = x4_grid
        .iter()
        .map(|&x4| {
            let m = cuk::m_map(&params, x4).map_err(|e| CliError::Run(e.to_string()))?;
            Ok(ResidualSample {
                location: vec![x4],
                residual: (cuk::kappa_map(&params, m) - x4).abs(),
            })
        })
        .collect::<Result<_, CliError>>()?;
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples("output_recovery", recovery, vcfg.tol_output_recovery),
        false,
    );

    let xy = maps.operating_xy();
    let cloud = xy.sample_cloud(vcfg.cloud_samples, vcfg.seed);
    let kernel: Vec<ResidualSample> = cloud
        .iter()
        .map(|x| {
            Ok(ResidualSample {
                location: x.clone(),
                residual: engine::kernel_condition_residual(maps, artifact.c_matrix(), x)
                    .map_err(|e| CliError::Run(e.to_string()))?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples("kernel_condition", kernel, vcfg.tol_kernel),
        false,
    );

    // m-relation differential conditions
    let mut mrel = Vec::with_capacity(cloud.len());
    for x in &cloud {
        let (ra, rb) =
            engine::mrelation_residuals(maps, plant, absys, x).map_err(|e| CliError::Run(e.to_string()))?;
        mrel.push(ResidualSample {
            location: x.clone(),
            residual: ra.max(rb),
        });
    }
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples("mrelation_links", mrel, vcfg.tol_mrelation),
        false,
    );

    // certified output envelope
    let ctc_ok = check_output_lower_bound(cert.m(), artifact.c_matrix(), c0, 1e-9)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let envelope_gap = {
        let ctc = artifact
            .c_matrix()
            .transpose()
            .matmul(artifact.c_matrix())
            .and_then(|m| cert.m().as_matrix().sub(&m.scale(c0)))
            .and_then(|m| SymMatrix::from_matrix(&m))
            .map_err(|e| CliError::Run(e.to_string()))?;
        sym_eigenvalues(&ctc, 1e-12)
            .map_err(|e| CliError::Run(e.to_string()))?
            .eigenvalues[0]
    };
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples(
            "output_envelope",
            vec![ResidualSample {
                location: vec![c0],
                residual: if ctc_ok { 0.0 } else { -envelope_gap },
            }],
            1e-9,
        ),
        false,
    );

    // pointwise dissipation over a (xi, x, v) cloud
    let v_amp = ctx.config.hierarchical.v_max;
    let mut dis_lo = vec![dom_lo];
    dis_lo.extend_from_slice(plant.operating_box().lo());
    dis_lo.push(-v_amp);
    let mut dis_hi = vec![dom_hi];
    dis_hi.extend_from_slice(plant.operating_box().hi());
    dis_hi.push(v_amp);
    let dis_region = Region::new(dis_lo, dis_hi).map_err(|e| CliError::Run(e.to_string()))?;
    let mut dis = Vec::with_capacity(vcfg.cloud_samples);
    for s in dis_region.sample_cloud(vcfg.cloud_samples, vcfg.seed ^ 0x5af3) {
        let xi = [s[0]];
        let x = &s[1..5];
        let v = [s[5]];
        let r = engine::dissipation_residual(maps, cert, artifact.interface(), plant, absys, &xi, x, &v)
            .map_err(|e| CliError::Run(e.to_string()))?;
        dis.push(ResidualSample {
            location: s.clone(),
            residual: r,
        });
    }
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples("dissipation", dis, vcfg.tol_dissipation),
        false,
    );

    // analytic Jacobians against central finite differences
    let fd = 1e-6;
    let mut jac = Vec::new();
    for &xi in grid_1d(dom_lo + fd, dom_hi - fd, 200).iter() {
        let an = cuk::dp_dxi_map(&params, xi);
        let plus = cuk::p_map(&params, xi + fd);
        let minus = cuk::p_map(&params, xi - fd);
        let rel = (0..4)
            .map(|i| {
                let d = (plus[i] - minus[i]) / (2.0 * fd);
                (d - an[i]).abs() / an[i].abs().max(1.0)
            })
            .fold(0.0f64, f64::max);
        jac.push(ResidualSample {
            location: vec![xi],
            residual: rel,
        });
    }
    for &x4 in grid_1d(out_lo + 1.0, out_hi - 1e-3, 200).iter() {
        let an = cuk::dm_dx4_map(&params, x4).map_err(|e| CliError::Run(e.to_string()))?;
        let d = (cuk::m_map(&params, x4 + fd).map_err(|e| CliError::Run(e.to_string()))?
            - cuk::m_map(&params, x4 - fd).map_err(|e| CliError::Run(e.to_string()))?)
            / (2.0 * fd);
        jac.push(ResidualSample {
            location: vec![x4],
            residual: (d - an).abs() / an.abs().max(1.0),
        });
    }
    chk(
        &mut rows,
        &mut failed,
        ResidualReport::from_samples("jacobian_consistency", jac, vcfg.tol_jacobian),
        false,
    );

    // closed-form cross-check of the link coefficient b: the square-root
    // reading must agree with the constructive route; the linear reading
    // is reported for the record
    let mut link_sqrt = Vec::new();
    let mut link_linear_max: f64 = 0.0;
    for x in &cloud {
        if x[3] > -1e-3 {
            continue; // skip the removable singularity of the rational form
        }
        let (b, _) =
            engine::link_coefficients(maps, plant, absys, x).map_err(|e| CliError::Run(e.to_string()))?;
        if variant == DeltaVariant::Redesigned {
            let sqrt_reading = cuk::b_closed_form(&params, x, ChiReading::SquareRoot)
                .map_err(|e| CliError::Run(e.to_string()))?;
            let linear_reading = cuk::b_closed_form(&params, x, ChiReading::Linear)
                .map_err(|e| CliError::Run(e.to_string()))?;
            link_sqrt.push(ResidualSample {
                location: x.clone(),
                residual: (b[0] - sqrt_reading).abs(),
            });
            link_linear_max = link_linear_max.max((b[0] - linear_reading).abs());
        }
    }
    if variant == DeltaVariant::Redesigned {
        chk(
            &mut rows,
            &mut failed,
            ResidualReport::from_samples("link_form_sqrt_reading", link_sqrt, vcfg.tol_link_form),
            false,
        );
    }

    // informational cross-term scans (values only)
    let scan_grid = GridSpec::line(dom_lo, dom_hi, vcfg.scan_points)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let mut scan_info = Vec::new();
    for (name, var) in [("redesigned", DeltaVariant::Redesigned), ("unit", DeltaVariant::Unit)] {
        let scanned = cuk::build_cuk_configured(
            &params,
            var,
            lambda,
            ctx.config.certificate.epsilon,
            &Default::default(),
        )
        .map_err(|e| CliError::Run(e.to_string()))?;
        let scan = engine::scan_vartheta_bound(
            scanned.maps(),
            scanned.certificate(),
            scanned.plant().g(),
            scanned.abstract_system().delta(),
            QPolicy::Zero,
            &scan_grid,
        )
        .map_err(|e| CliError::Run(e.to_string()))?;
        scan_info.push((name, scan.d_bar, scan.argmax[0]));
        chk(
            &mut rows,
            &mut failed,
            ResidualReport::from_samples(
                &format!("scan_d_bar_{name}"),
                vec![ResidualSample {
                    location: vec![scan.argmax[0]],
                    residual: scan.d_bar,
                }],
                f64::INFINITY,
            ),
            true,
        );
    }

    // report
    let mut text = String::new();
    text.push_str("verification report\n===================\n\n");
    text.push_str(&lmi.to_text());
    text.push('\n');
    for row in &rows {
        if row.info {
            text.push_str(&format!(
                "{}: value {:.6e} at {:?} (informational)\n",
                row.report.name, row.report.max_residual, row.report.worst_location
            ));
        } else {
            text.push_str(&row.report.to_text());
            text.push('\n');
        }
    }
    text.push_str(&format!(
        "\nlink_form_linear_reading: max deviation {link_linear_max:.6e} (informational)\n"
    ));
    let ok = failed.is_empty();
    text.push_str(&format!(
        "\noverall: {}\n",
        if ok { "PASS" } else { "FAIL" }
    ));
    if !ok {
        text.push_str(&format!("failed checks: {}\n", failed.join(", ")));
    }
    print!("{text}");

    let mut manifest = ctx.manifest("verify");
    manifest.flag("lmi_ok", lmi_ok);
    manifest.flag("residuals_ok", ok);
    for (name, d_bar, argmax) in &scan_info {
        manifest.flag(&format!("d_bar_{name}"), format!("{d_bar:.6}"));
        manifest.flag(&format!("d_bar_{name}_argmax"), format!("{argmax:.6}"));
    }
    if !failed.is_empty() {
        manifest.flag("failed_checks", failed.join(","));
    }
    ctx.emit(&mut manifest, "verify_report.txt", &text)?;
    ctx.finish(manifest, started, if ok { 0 } else { 1 })
}

pub fn cmd_scan_bound(ctx: &Ctx, grid_n: Option<usize>, delta: Option<String>) -> CmdResult {
    let started = Instant::now();
    let mut config = ctx.config.clone();
    if let Some(d) = delta {
        config.abstraction.delta = d;
    }
    let ctx2 = Ctx {
        config,
        config_digest: ctx.config_digest.clone(),
        out_dir: ctx.out_dir.clone(),
    };
    let (artifact, _, variant) = ctx2.build()?;
    let n = grid_n.unwrap_or(ctx2.config.verify.scan_points);
    if n < 2 {
        return Err(CliError::Config("--grid must be at least 2".into()));
    }
    let maps = artifact.maps();
    let grid = GridSpec::line(maps.domain_v().lo()[0], maps.domain_v().hi()[0], n)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let scan = engine::scan_vartheta_bound(
        maps,
        artifact.certificate(),
        artifact.plant().g(),
        artifact.abstract_system().delta(),
        QPolicy::Zero,
        &grid,
    )
    .map_err(|e| CliError::Run(e.to_string()))?;

    let variant_name = match variant {
        DeltaVariant::Unit => "unit",
        DeltaVariant::Redesigned => "redesigned",
    };
    let csv = render_csv(
        &["xi", "vartheta_norm"],
        scan.points
            .iter()
            .map(|(xi, v)| vec![Field::Float(xi[0]), Field::Float(*v)]),
    );
    let mut manifest = ctx2.manifest("scan-bound");
    let path = ctx2.emit(&mut manifest, &format!("scan_bound_{variant_name}.csv"), &csv)?;
    println!(
        "d_bar = {:.6} at xi = {:.6} ({} points, delta = {variant_name})",
        scan.d_bar, scan.argmax[0], n
    );
    println!("wrote {}", path.display());
    manifest.flag("d_bar", format!("{:.12}", scan.d_bar));
    manifest.flag("argmax_xi", format!("{:.12}", scan.argmax[0]));
    manifest.flag("delta_variant", variant_name);
    manifest.flag("grid_points", n);
    ctx.finish(manifest, started, 0)
}

pub fn cmd_bound(ctx: &Ctx, vinf: Option<f64>) -> CmdResult {
    let started = Instant::now();
    let v_inf = vinf.unwrap_or(ctx.config.bound.v_inf);
    if v_inf < 0.0 {
        return Err(CliError::Config("--vinf must be nonnegative".into()));
    }
    let cert = &ctx.config.certificate;
    let bc = BoundConstants::new(cert.c0, cert.lambda, cert.epsilon, ctx.config.bound.d_bar)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let asymptotic = engine::asymptotic_error_bound(&bc, v_inf);
    println!(
        "asymptotic output-error bound: {asymptotic:.6} (c0 = {}, lambda = {}, epsilon = {}, d_bar = {}, v_inf = {v_inf})",
        cert.c0, cert.lambda, cert.epsilon, ctx.config.bound.d_bar
    );
    let mut manifest = ctx.manifest("bound");
    manifest.flag("bound_value", format!("{asymptotic:.12}"));
    manifest.flag("v_inf", v_inf);
    if let Some(w0) = ctx.config.bound.w0 {
        println!("transient bound (W0 = {w0}):");
        for &t in &ctx.config.bound.times {
            let b = engine::transient_error_bound(&bc, w0, v_inf, t);
            println!("  t = {t:>8.3} s: {b:.6}");
            manifest.flag(&format!("transient_t_{t}"), format!("{b:.12}"));
        }
    }
    ctx.finish(manifest, started, 0)
}

fn hier_csv(run: &ashc::integrator::HierarchicalRun, every: usize) -> String {
    let header = [
        "t", "xi", "x1", "x2", "x3", "x4", "u", "v", "y", "psi", "e_y", "W", "sat_flag",
    ];
    let rows = (0..run.concrete_traj.len()).step_by(every).map(|i| {
        let t = run.concrete_traj.times[i];
        let xi = run.abstract_traj.states[i][0];
        let x = &run.concrete_traj.states[i];
        let u = run.concrete_traj.inputs[i][0];
        let v = run.abstract_traj.inputs[i][0];
        let y = run.concrete_traj.outputs[i][0];
        let psi = run.abstract_traj.outputs[i][0];
        vec![
            Field::Float(t),
            Field::Float(xi),
            Field::Float(x[0]),
            Field::Float(x[1]),
            Field::Float(x[2]),
            Field::Float(x[3]),
            Field::Float(u),
            Field::Float(v),
            Field::Float(y),
            Field::Float(psi),
            Field::Float(psi - y),
            Field::Float(run.w[i]),
            Field::Int(run.sat_flags[i] as i64),
        ]
    });
    render_csv(&header, rows)
}

pub fn cmd_sim_hier(ctx: &Ctx, full_resolution: bool) -> CmdResult {
    let started = Instant::now();
    let (artifact, params, _) = ctx.build()?;
    let h = &ctx.config.hierarchical;
    let xi0 = h.xi0;
    let x0 = if h.x0.is_empty() {
        artifact.maps().p(&[xi0])
    } else {
        h.x0.clone()
    };
    let sim = SimConfig::new(h.t0, h.t_end, h.step, vec![xi0], x0)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let policy = match h.policy.as_str() {
        "zero" => InputPolicy::Zero,
        _ => {
            let schedule = ReferenceSchedule::new(
                h.targets.clone(),
                h.dwell,
                h.kp,
                h.v_max,
                params.solvable_interval(),
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            InputPolicy::Reference {
                schedule,
                kappa_inverse: Arc::new(move |target| cuk::m_map(&params, target)),
            }
        }
    };

    let mut manifest = ctx.manifest("sim-hier");
    let run = match simulate_hierarchical(
        &sim,
        &policy,
        artifact.plant(),
        artifact.abstract_system(),
        artifact.maps(),
        artifact.certificate(),
        artifact.interface(),
    ) {
        Ok(run) => run,
        Err(e) => {
            manifest.flag("integration_error", e.to_string());
            eprintln!("{e}");
            return ctx.finish(manifest, started, 1);
        }
    };

    let bc = BoundConstants::new(
        ctx.config.certificate.c0,
        ctx.config.certificate.lambda,
        ctx.config.certificate.epsilon,
        ctx.config.bound.d_bar,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let bound = engine::asymptotic_error_bound(&bc, h.v_max);
    let within_bound = run.max_abs_ey <= bound;
    let every = if full_resolution {
        1
    } else {
        ctx.config.output.decimation
    };
    let csv = hier_csv(&run, every);
    let path = ctx.emit(&mut manifest, "sim_hier.csv", &csv)?;
    println!(
        "hierarchical run: max|e_y| = {:.6} (bound {:.2}), saturation {} steps, clamps {}, certified {}",
        run.max_abs_ey, bound, run.saturation_count, run.clamp_count, run.certified
    );
    println!("wrote {}", path.display());
    manifest.flag("max_error", format!("{:.12}", run.max_abs_ey));
    manifest.flag("bound_value", format!("{bound:.12}"));
    manifest.flag("within_bound", within_bound);
    manifest.flag("saturation_count", run.saturation_count);
    manifest.flag("clamp_count", run.clamp_count);
    manifest.flag("outside_box_count", run.outside_box_count);
    manifest.flag("certified", run.certified);
    let ok = within_bound && run.certified;
    ctx.finish(manifest, started, if ok { 0 } else { 1 })
}

fn mrel_csv(run: &ashc::integrator::MrelationRun, every: usize) -> String {
    let header = ["t", "xi", "x1", "x2", "x3", "x4", "u", "v", "y", "psi", "e_y"];
    let rows = (0..run.concrete_traj.len()).step_by(every).map(|i| {
        let t = run.concrete_traj.times[i];
        let xi = run.abstract_traj.states[i][0];
        let x = &run.concrete_traj.states[i];
        let u = run.concrete_traj.inputs[i][0];
        let v = run.abstract_traj.inputs[i][0];
        let y = run.concrete_traj.outputs[i][0];
        let psi = run.abstract_traj.outputs[i][0];
        vec![
            Field::Float(t),
            Field::Float(xi),
            Field::Float(x[0]),
            Field::Float(x[1]),
            Field::Float(x[2]),
            Field::Float(x[3]),
            Field::Float(u),
            Field::Float(v),
            Field::Float(y),
            Field::Float(psi),
            Field::Float(psi - y),
        ]
    });
    render_csv(&header, rows)
}

pub fn cmd_sim_mrel(ctx: &Ctx, full_resolution: bool) -> CmdResult {
    let started = Instant::now();
    let (artifact, params, _) = ctx.build()?;
    let m = &ctx.config.mrelation;
    let xi0 = cuk::m_map(&params, m.x0[3])
        .map_err(|e| CliError::Config(format!("mrelation.x0 is outside the solvable region: {e}")))?
        + m.xi0_offset;
    let sim = SimConfig::new(m.t0, m.t_end, m.step, vec![xi0], m.x0.clone())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (lo, hi) = artifact.output_region();
    let region = Region::new(vec![lo], vec![hi]).map_err(|e| CliError::Run(e.to_string()))?;

    let mut manifest = ctx.manifest("sim-mrel");
    let run = match simulate_mrelation(
        &sim,
        artifact.plant(),
        artifact.abstract_system(),
        artifact.maps(),
        &|t| vec![mrelation_input(t)],
        &region,
    ) {
        Ok(run) => run,
        Err(e) => {
            manifest.flag("integration_error", e.to_string());
            eprintln!("{e}");
            return ctx.finish(manifest, started, 1);
        }
    };

    let matching_ok = run.max_output_mismatch <= m.match_tol;
    let every = if full_resolution {
        1
    } else {
        ctx.config.output.decimation
    };
    let csv = mrel_csv(&run, every);
    let path = ctx.emit(&mut manifest, "sim_mrel.csv", &csv)?;
    println!(
        "m-relation run: max|psi - y| = {:.3e} (tolerance {:.1e}), manifold residual {:.3e}, matching {}",
        run.max_output_mismatch,
        m.match_tol,
        run.max_manifold_residual,
        if matching_ok { "ok" } else { "FAILED" }
    );
    println!("wrote {}", path.display());
    manifest.flag("max_error", csv_float(run.max_output_mismatch));
    manifest.flag("manifold_residual", csv_float(run.max_manifold_residual));
    manifest.flag("matching_ok", matching_ok);
    manifest.flag("xi0", csv_float(xi0));
    manifest.flag("left_region_count", run.left_region_count);
    manifest.flag("certified", run.certified);
    let ok = matching_ok && run.certified;
    ctx.finish(manifest, started, if ok { 0 } else { 1 })
}

pub fn config_digest_of(text: &str) -> String {
    sha256_hex(text.as_bytes())
}
