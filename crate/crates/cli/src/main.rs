//! Experiment driver: spectrum scans, kernel certificates, simulations,
//! the toy scheme, and the aggregated verification suite.
//!
//! Exit codes: 0 all checks passed, 1 a verification criterion failed,
//! 2 usage or configuration error, 3 numerical divergence.

mod config;

use clap::{Args, Parser, Subcommand};
use config::Config;
use rollstab::decay::{
    default_fit_window, eval_template, fit_rate, integral_inequality_oracle, log_times,
    track_norms, OracleKind, TemplateVariant, ToyCase,
};
use rollstab::dynamics::{make_initial, simulate, InitKind, Scheme, SimConfig};
use rollstab::grid::Grid;
use rollstab::params::RollParams;
use rollstab::report::{self, FitReport, SnapshotManifest};
use rollstab::semigroup::{
    certify_diffusive, certify_exponential, certify_refined, greens_kernel, KernelColumn,
    KernelMachine,
};
use rollstab::symbol::{
    lambda1_pm, routh_hurwitz_check, spectral_curves, symmetric_grid, verify_projection_identity,
    StabilityVerdict,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rollstab",
    about = "Spectral stability and nonlinear decay laboratory for Ginzburg-Landau rolls",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Flat key = value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "D")]
    d: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

impl CommonOpts {
    fn resolve(&self) -> Result<Config, String> {
        let mut cfg = Config::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.l {
            cfg.l = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Stability report and eigenvalue curves for one parameter point.
    Spectrum(CommonOpts),
    /// Green's kernel table and semigroup decay certificates.
    Kernel(CommonOpts),
    /// Integrate the perturbation system and fit norm decay rates.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Named experiment: gl-decay | modgl-partloc | modgl-explong |
        /// modgl-q0 | eckhaus | eckhaus-stable.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Scalar toy equation experiments.
    Toy {
        #[command(flatten)]
        common: CommonOpts,
        /// Case: a1 (gradient nonlinearity) or a2 (divergence form).
        #[arg(long, default_value = "a1")]
        case: String,
    },
    /// Run the verification suite and write a pass/fail summary.
    VerifyAll {
        #[command(flatten)]
        common: CommonOpts,
        /// Module filter (symbol | semigroup | dynamics | decay) or a
        /// comma-separated list of criterion numbers.
        #[arg(long)]
        only: Option<String>,
    },
    /// Print the documented default configuration.
    PrintDefaults,
}

struct OutDir {
    root: PathBuf,
    files: Vec<(String, u64)>,
}

impl OutDir {
    fn create(root: &Path, cfg: &Config) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        let mut dir = OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        };
        dir.write("resolved.conf", cfg.render().as_bytes())?;
        Ok(dir)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.root.join(name), bytes)?;
        self.files.push((name.to_string(), fnv1a64(bytes)));
        Ok(())
    }

    fn finish(&self) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Entry<'a> {
            file: &'a str,
            fnv1a64: String,
        }
        let entries: Vec<Entry> = self
            .files
            .iter()
            .map(|(f, h)| Entry {
                file: f,
                fnv1a64: format!("{h:016x}"),
            })
            .collect();
        let json = report::to_json_pretty(&entries);
        std::fs::write(self.root.join("manifest.json"), json)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn params_of(cfg: &Config) -> RollParams {
    RollParams::new(cfg.q, cfg.d, cfg.gamma)
}

fn fail_usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum(common) => cmd_spectrum(&common),
        Command::Kernel(common) => cmd_kernel(&common),
        Command::Simulate { common, preset } => cmd_simulate(&common, preset.as_deref()),
        Command::Toy { common, case } => cmd_toy(&common, &case),
        Command::VerifyAll { common, only } => cmd_verify_all(&common, only.as_deref()),
        Command::PrintDefaults => {
            print!("{}", Config::render_defaults_documented());
            return ExitCode::SUCCESS;
        }
    };
    match result {
        Ok(code) => code,
        Err(msg) => fail_usage(&msg),
    }
}

#[derive(Serialize)]
struct SpectrumReport {
    stability: rollstab::symbol::StabilityReport,
    lambda1: rollstab::symbol::Lambda1,
    k0: Option<f64>,
    projection_identity_residual: f64,
    damped_branch_margin: Option<f64>,
    sup_re_nonzero: Option<f64>,
}

fn cmd_spectrum(common: &CommonOpts) -> Result<ExitCode, String> {
    let cfg = common.resolve()?;
    let p = params_of(&cfg);
    let mut dir = OutDir::create(&common.out, &cfg).map_err(|e| e.to_string())?;

    let n_half = (cfg.k_max / cfg.k_step).round() as usize;
    let scan = symmetric_grid(cfg.k_max, n_half.max(10));
    let stability = routh_hurwitz_check(&p, &scan, cfg.boundary_tol);

    let mut rep = SpectrumReport {
        stability,
        lambda1: lambda1_pm(&p),
        k0: None,
        projection_identity_residual: verify_projection_identity(&p, &[0.0, 0.1, 0.5, 1.0]),
        damped_branch_margin: None,
        sup_re_nonzero: None,
    };

    let mut invariant_ok = true;
    if p.spectrally_stable() {
        let curves_grid = symmetric_grid(1.0f64.min(cfg.k_max), 400);
        let sd = spectral_curves(&p, &curves_grid).map_err(|e| e.to_string())?;
        rep.k0 = Some(sd.k0);
        rep.damped_branch_margin = Some(sd.damped_branch_margin());
        rep.sup_re_nonzero = Some(sd.sup_re_nonzero());
        let mut csv = Vec::new();
        report::write_curves_csv(&mut csv, &sd).map_err(|e| e.to_string())?;
        dir.write("curves.csv", &csv).map_err(|e| e.to_string())?;
        invariant_ok &= sd.sup_re_nonzero() < 0.0 && sd.damped_branch_margin() > 0.0;
        invariant_ok &= matches!(rep.stability.verdict, StabilityVerdict::Stable);
        invariant_ok &= rep.stability.margin > 0.0;
        invariant_ok &= rep.projection_identity_residual < 1e-10;
    }
    dir.write("report.json", report::to_json_pretty(&rep).as_bytes())
        .map_err(|e| e.to_string())?;
    dir.finish().map_err(|e| e.to_string())?;
    println!(
        "spectrum: verdict {:?}, margin {:.4e}",
        rep.stability.verdict, rep.stability.margin
    );
    Ok(if invariant_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct KernelSummary {
    certificates: Vec<rollstab::semigroup::EstimateCertificate>,
    all_pass: bool,
}

fn cmd_kernel(common: &CommonOpts) -> Result<ExitCode, String> {
    let cfg = common.resolve()?;
    let p = params_of(&cfg);
    if !p.spectrally_stable() {
        return Err("kernel certificates need spectrally stable parameters".into());
    }
    let mut dir = OutDir::create(&common.out, &cfg).map_err(|e| e.to_string())?;

    // Peak-type fits only start after the cutoff-shoulder transient, so
    // the sampled range must extend well beyond it.
    let t_hi = cfg
        .t_end
        .max(40.0)
        .max(8.0 * rollstab::semigroup::diffusive_transient_end(&p));
    let times = rollstab::decay::log_times(cfg.fit_lo.max(1.0), t_hi, 24);
    // Peak-type fits start after the cutoff-shoulder transient and need a
    // denser sampling to keep enough points in window.
    let times_dense = rollstab::decay::log_times(cfg.fit_lo.max(1.0), t_hi, 48);
    let mut certs = Vec::new();
    for (n, m) in [(0u32, 0u32), (1, 0), (0, 1), (1, 1)] {
        certs.push(
            certify_diffusive(&p, n, m, None, KernelColumn::Generic, &times, 0.1)
                .map_err(|e| e.to_string())?,
        );
        certs.push(
            certify_diffusive(
                &p,
                n,
                m,
                Some(cfg.p),
                KernelColumn::Generic,
                &times_dense,
                0.1,
            )
            .map_err(|e| e.to_string())?,
        );
    }
    certs.push(certify_refined(&p, 1, 0, &times, 0.1).map_err(|e| e.to_string())?);
    certs.push(
        certify_refined(&p, 2, 0, &times, if p.q == 0.0 { 0.2 } else { 0.15 })
            .map_err(|e| e.to_string())?,
    );
    let exp_times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    certs.push(certify_exponential(&p, 0, 0, &exp_times).map_err(|e| e.to_string())?);

    let all_pass = certs.iter().all(|c| c.pass);
    for c in &certs {
        println!(
            "kernel: {} fitted {:.3} target {:.2} [{}]",
            c.id,
            c.fitted,
            c.target,
            if c.pass { "pass" } else { "fail" }
        );
    }
    let summary = KernelSummary {
        certificates: certs,
        all_pass,
    };
    dir.write(
        "certificates.json",
        report::to_json_pretty(&summary).as_bytes(),
    )
    .map_err(|e| e.to_string())?;

    // Kernel table at a few times, decimated in z. The damped part's
    // cutoff-transform tails may need a wider window; retry with doubling.
    let table_times = [1.0, 4.0, 16.0, 64.0];
    let mut table = None;
    let mut scale = 1.0;
    for attempt in 0..4 {
        let machine = KernelMachine::for_exponential_scaled(&p, 1.0, 64.0, scale);
        match greens_kernel(&machine, &table_times) {
            Ok(t) => {
                table = Some(t);
                break;
            }
            Err(rollstab::semigroup::SemigroupError::TailTooLarge { .. }) if attempt < 3 => {
                scale *= 2.0;
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    let table = table.ok_or("kernel table window did not converge")?;
    let mut decimated = table.clone();
    let stride = (decimated.z.len() / 256).max(1);
    decimated.z = decimated.z.iter().copied().step_by(stride).collect();
    for set in [&mut decimated.gc, &mut decimated.ge] {
        for kern in set.iter_mut() {
            *kern = kern.iter().copied().step_by(stride).collect();
        }
    }
    let mut csv = Vec::new();
    report::write_kernel_csv(&mut csv, &decimated).map_err(|e| e.to_string())?;
    dir.write("kernel_table.csv", &csv)
        .map_err(|e| e.to_string())?;
    dir.finish().map_err(|e| e.to_string())?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

struct Preset {
    params: RollParams,
    init: InitKind,
    zero_b: bool,
    track_mode: Option<usize>,
    targets: Vec<(&'static str, f64, f64)>,
}

fn preset_of(name: &str, cfg: &Config) -> Result<Preset, String> {
    let own = Preset {
        params: params_of(cfg),
        init: match cfg.init.as_str() {
            "random_bounded" => InitKind::RandomBounded,
            "bounded_fronts" => InitKind::BoundedFronts,
            "quasiperiodic" => InitKind::Quasiperiodic,
            "gaussian_localized" => InitKind::GaussianLocalized,
            "lp_localized_b" => InitKind::LpLocalizedB { p: cfg.p },
            "sideband" => InitKind::Sideband {
                mode: cfg.sideband_mode,
            },
            s => return Err(format!("unknown init kind '{s}'")),
        },
        zero_b: false,
        track_mode: None,
        targets: Vec::new(),
    };
    Ok(match name {
        "none" => own,
        "gl-decay" => Preset {
            params: RollParams::real_gl(0.2),
            init: InitKind::BoundedFronts,
            zero_b: true,
            track_mode: None,
            targets: vec![
                ("r_inf", -0.5, 0.15),
                ("phi_x_inf", -0.5, 0.15),
                ("r_x_inf", -1.0, 0.2),
                ("phi_xx_inf", -1.0, 0.2),
                ("v_inf", -1.0, 0.2),
            ],
        },
        "modgl-partloc" => Preset {
            params: RollParams::new(0.3, 1.0, 0.5),
            init: InitKind::LpLocalizedB { p: 1.0 },
            zero_b: false,
            track_mode: None,
            targets: vec![
                ("b_inf", -0.5, 0.15),
                ("r_inf", -0.5, 0.15),
                ("phi_x_inf", -0.5, 0.15),
                ("r_x_inf", -1.0, 0.2),
                ("phi_xx_inf", -1.0, 0.2),
                ("b_x_inf", -1.0, 0.2),
            ],
        },
        "modgl-explong" => Preset {
            params: RollParams::new(0.3, 1.0, 0.5),
            init: InitKind::BoundedFronts,
            zero_b: false,
            track_mode: None,
            targets: vec![
                ("r_x_inf", -0.5, 0.15),
                ("phi_xx_inf", -0.5, 0.15),
                ("b_x_inf", -0.5, 0.15),
            ],
        },
        "modgl-q0" => Preset {
            params: RollParams::new(0.0, 1.0, 0.5),
            init: InitKind::BoundedFronts,
            zero_b: false,
            track_mode: None,
            targets: vec![("r_x_inf", -0.5, 0.15), ("b_x_inf", -0.5, 0.15)],
        },
        "eckhaus" => Preset {
            params: RollParams::real_gl(0.62),
            init: InitKind::Sideband {
                mode: cfg.sideband_mode,
            },
            zero_b: true,
            track_mode: Some(cfg.sideband_mode),
            targets: Vec::new(),
        },
        "eckhaus-stable" => Preset {
            params: RollParams::real_gl(0.2),
            init: InitKind::Sideband {
                mode: cfg.sideband_mode,
            },
            zero_b: true,
            track_mode: Some(cfg.sideband_mode),
            targets: Vec::new(),
        },
        other => return Err(format!("unknown preset '{other}'")),
    })
}

#[derive(Serialize)]
struct SimulateSummary {
    params: RollParams,
    diverged: Option<f64>,
    fits: Vec<FitReport>,
    template_explong_eta: f64,
    template_constant: f64,
    /// q = 0 template with the configured alpha, when applicable.
    template_q0_eta: Option<f64>,
    sideband_growth: Option<f64>,
    all_pass: bool,
}

fn cmd_simulate(common: &CommonOpts, preset: Option<&str>) -> Result<ExitCode, String> {
    let cfg = common.resolve()?;
    let preset = preset_of(preset.unwrap_or("none"), &cfg)?;
    let mut dir = OutDir::create(&common.out, &cfg).map_err(|e| e.to_string())?;

    let grid = Grid::new(cfg.l, cfg.n);
    if let InitKind::Sideband { mode } = preset.init {
        if mode == 0 || mode >= cfg.n / 3 {
            return Err(format!("sideband mode {mode} outside the dealiased band"));
        }
    }
    let (mut init, meta) =
        make_initial(preset.init, &grid, cfg.eps, cfg.seed).map_err(|e| e.to_string())?;
    if preset.zero_b {
        init.b.iter_mut().for_each(|v| *v = 0.0);
    }
    let sim_cfg = SimConfig {
        t_end: cfg.t_end,
        dt: cfg.dt,
        scheme: if cfg.scheme == "imex-bdf2" {
            Scheme::ImexBdf2
        } else {
            Scheme::Etdrk4
        },
        log_every: cfg.log_every,
        snapshot_every: cfg.snapshot_every,
        blowup_threshold: 1e6,
        track_mode: preset.track_mode,
    };
    let traj = simulate(&preset.params, &grid, &init, &sim_cfg);

    let mut csv = Vec::new();
    report::write_norm_log_csv(&mut csv, &traj).map_err(|e| e.to_string())?;
    dir.write("norms.csv", &csv).map_err(|e| e.to_string())?;
    dir.write("init_meta.json", report::to_json_pretty(&meta).as_bytes())
        .map_err(|e| e.to_string())?;

    // Snapshots as one CSV per field plus a manifest.
    if !traj.snapshots.is_empty() {
        let mut files = Vec::new();
        for (i, snap) in traj.snapshots.iter().enumerate() {
            for (fname, field) in [
                ("r", &snap.r),
                ("psi", &snap.psi),
                ("b", &snap.b),
                ("phi", &snap.phi),
            ] {
                let name = format!("snapshot_{i:04}_{fname}.csv");
                let mut buf = Vec::new();
                report::write_field_csv(&mut buf, &grid.x, field).map_err(|e| e.to_string())?;
                dir.write(&name, &buf).map_err(|e| e.to_string())?;
                files.push(name);
            }
        }
        let manifest = SnapshotManifest::from_trajectory(&traj, Some(cfg.seed), files);
        dir.write(
            "snapshots.json",
            report::to_json_pretty(&manifest).as_bytes(),
        )
        .map_err(|e| e.to_string())?;
    }

    let window = default_fit_window(cfg.t_end, cfg.l, preset.params.d.max(1.0));
    let series = track_norms(&traj);
    let mut fits = Vec::new();
    let mut all_pass = traj.diverged.is_none();
    for s in &series {
        if s.norm_id == "sideband_amp" {
            continue;
        }
        if let Ok(fit) = fit_rate(s, window) {
            let target = preset
                .targets
                .iter()
                .find(|(id, _, _)| *id == s.norm_id)
                .map(|&(_, t, tol)| (t, tol));
            let pass = target.map(|(t, tol)| (fit.exponent - t).abs() <= tol);
            if let Some(false) = pass {
                all_pass = false;
            }
            fits.push(FitReport {
                norm_id: s.norm_id.clone(),
                fit,
                target: target.map(|(t, _)| t),
                tolerance: target.map(|(_, tol)| tol),
                pass,
            });
        }
    }
    let eta = eval_template(TemplateVariant::ExpLong, &traj, traj.final_time());
    let eta_q0 = (preset.params.q == 0.0).then(|| {
        eval_template(
            TemplateVariant::QZero { alpha: cfg.alpha },
            &traj,
            traj.final_time(),
        )
        .eta
    });
    let growth = traj
        .norm_log
        .iter()
        .filter_map(|r| r.sideband_amp)
        .fold(None::<(f64, f64)>, |acc, a| match acc {
            None => Some((a, a)),
            Some((first, max)) => Some((first, max.max(a))),
        })
        .map(|(first, max)| max / first);

    let summary = SimulateSummary {
        params: preset.params,
        diverged: traj.diverged,
        fits,
        template_explong_eta: eta.eta,
        template_constant: eta.eta / cfg.eps.max(f64::MIN_POSITIVE),
        template_q0_eta: eta_q0,
        sideband_growth: growth,
        all_pass,
    };
    dir.write("fits.json", report::to_json_pretty(&summary).as_bytes())
        .map_err(|e| e.to_string())?;
    dir.finish().map_err(|e| e.to_string())?;

    for f in &summary.fits {
        println!(
            "simulate: {} exponent {:.3}{}",
            f.norm_id,
            f.fit.exponent,
            match (f.target, f.pass) {
                (Some(t), Some(ok)) =>
                    format!(" (target {t}, {})", if ok { "pass" } else { "fail" }),
                _ => String::new(),
            }
        );
    }
    if let Some(g) = growth {
        println!("simulate: sideband growth factor {g:.2}");
    }
    if let Some(t) = traj.diverged {
        println!("simulate: diverged at t = {t}");
        return Ok(ExitCode::from(3));
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_toy(common: &CommonOpts, case: &str) -> Result<ExitCode, String> {
    let cfg = common.resolve()?;
    let mut dir = OutDir::create(&common.out, &cfg).map_err(|e| e.to_string())?;
    let case_ = match case {
        "a1" => ToyCase::GradientPower,
        "a2" => ToyCase::DivergencePower { p: cfg.p },
        other => return Err(format!("unknown toy case '{other}' (a1 | a2)")),
    };
    let grid = Grid::new(cfg.l, cfg.n.min(2048));
    let rep = rollstab::decay::toy_scheme_experiment(
        case_, cfg.eps, &grid, cfg.t_end, cfg.dt, cfg.seed, 0.15,
    )
    .map_err(|e| e.to_string())?;
    dir.write("toy_report.json", report::to_json_pretty(&rep).as_bytes())
        .map_err(|e| e.to_string())?;

    // The bounding-integral oracles behind the scheme, as sup ratios over
    // two sampling decades.
    #[derive(Serialize)]
    struct OracleReport {
        kind: OracleKind,
        sup_ratio: f64,
        sup_ratio_last_decade: f64,
    }
    let oracles: Vec<OracleReport> = [
        OracleKind::A { j: 0 },
        OracleKind::A { j: 1 },
        OracleKind::B { p: cfg.p },
        OracleKind::BPrime { p: cfg.p },
    ]
    .into_iter()
    .map(|kind| OracleReport {
        kind,
        sup_ratio: integral_inequality_oracle(kind, &log_times(1.0, 1e3, 40)),
        sup_ratio_last_decade: integral_inequality_oracle(kind, &log_times(1e3, 1e4, 20)),
    })
    .collect();
    dir.write("oracles.json", report::to_json_pretty(&oracles).as_bytes())
        .map_err(|e| e.to_string())?;
    dir.finish().map_err(|e| e.to_string())?;
    println!(
        "toy {case}: u exponent {:.3}, du exponent {:.3} [{}]",
        rep.fit_u.exponent,
        rep.fit_ux.exponent,
        if rep.pass { "pass" } else { "fail" }
    );
    if rep.diverged.is_some() {
        return Ok(ExitCode::from(3));
    }
    Ok(if rep.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify_all(common: &CommonOpts, only: Option<&str>) -> Result<ExitCode, String> {
    let cfg = common.resolve()?;
    let mut dir = OutDir::create(&common.out, &cfg).map_err(|e| e.to_string())?;
    let selection: Option<Vec<u32>> = match only {
        None => None,
        Some(spec) => Some(match rollstab::verify::criteria_for_module(spec) {
            Some(ids) => ids,
            None => spec
                .split(',')
                .map(|s| s.trim().parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("--only expects a module name or criterion numbers: {e}"))?,
        }),
    };
    let results = rollstab::verify::run_all(selection.as_deref());
    for r in &results {
        println!("{}", r.summary_line());
    }
    let all_pass = results.iter().all(|r| r.pass);
    dir.write("summary.json", report::to_json_pretty(&results).as_bytes())
        .map_err(|e| e.to_string())?;
    dir.finish().map_err(|e| e.to_string())?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
