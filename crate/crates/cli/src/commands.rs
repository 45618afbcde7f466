use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use quadpos::controllers::Controller;
use quadpos::gain_synthesis::{
    alpha2_star, certify_chi_closed_loop, chi_eigenvalues, synthesize_alpha_chain, AlphaChain, ChiCertificate, GammaSet, PDGains,
};
use quadpos::sim::run_scenario;

use crate::checks::{render_table, run_checks, InjectedFault};
use crate::config::RunConfig;
use crate::CliError;

/// Real-axis extent of the RK4 stability region, |λ·dt|.
const RK4_STABLE_STEP: f64 = 2.78;

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn simulate(config: &Path, overrides: &[String], out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config, overrides)?;
    let sc = cfg.scenario()?;
    let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    prepare_dir(&dir)?;

    if let Controller::A(a) = &sc.controller {
        let fastest = a
            .beta_bound()
            .vertices()
            .iter()
            .flat_map(|b| chi_eigenvalues(&a.kvec[0], *b))
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if fastest * sc.dt > RK4_STABLE_STEP {
            eprintln!(
                "quadpos: warning: horizontal chain pole of magnitude {fastest:.3e} is beyond the RK4 stability limit at dt = {}",
                sc.dt
            );
        }
    }

    let (traj, metrics) = run_scenario(&sc).map_err(CliError::from_core)?;
    let csv_path = dir.join("trajectory.csv");
    let file = File::create(&csv_path).map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
    traj.write_csv(BufWriter::new(file), cfg.output.columns())
        .map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
    write_text(&dir.join("metrics.json"), &metrics.to_json())?;

    println!("rows        {}", metrics.rows);
    println!("final time  {:.6}", metrics.final_time);
    for c in &metrics.channels {
        let settle = c.settle_time.map_or("-".to_string(), |t| format!("{t:.3}"));
        println!("{:<4} final error {:>12.3e}  settle {:>8}  overshoot {:.3}", c.name, c.final_error, settle, c.overshoot);
    }
    println!("max tilt    {:.6} rad", metrics.max_tilt);
    println!("beta range  [{:.6}, {:.6}]", metrics.beta_min, metrics.beta_max);
    println!("wrote       {}", dir.display());

    if let Some(f) = &metrics.fault {
        return Err(CliError::Runtime(format!("{:?} fault at t = {:.6}: {}", f.kind, f.time, f.message)));
    }
    if !metrics.converged {
        let worst = metrics
            .channels
            .iter()
            .map(|c| c.final_error.abs())
            .fold(0.0, f64::max);
        return Err(CliError::Runtime(format!(
            "not converged: largest final error {worst:.3e} exceeds tolerance {:.1e}",
            sc.convergence_tol
        )));
    }
    println!("converged");
    Ok(())
}

#[derive(Debug, Serialize)]
struct BacksteppingReport {
    alpha2_star: f64,
    chain: AlphaChain,
    certificate: ChiCertificate,
    trials_passed: usize,
}

#[derive(Debug, Serialize)]
struct PoleListing {
    re: f64,
    im: f64,
    magnitude: f64,
}

#[derive(Debug, Serialize)]
struct GammaReport {
    set: GammaSet,
    poles: Vec<PoleListing>,
    hurwitz: bool,
}

#[derive(Debug, Serialize)]
struct PdReport {
    gains: PDGains,
    altitude_poles: Vec<PoleListing>,
    yaw_poles: Vec<PoleListing>,
}

#[derive(Debug, Default, Serialize)]
struct GainsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    backstepping: Option<BacksteppingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pd: Option<PdReport>,
    gamma: Vec<GammaReport>,
}

fn listing(poles: &[nalgebra::Complex<f64>]) -> Vec<PoleListing> {
    poles
        .iter()
        .map(|p| PoleListing {
            re: p.re,
            im: p.im,
            magnitude: p.norm(),
        })
        .collect()
}

fn quadratic_roots(k1: f64, k2: f64) -> Vec<nalgebra::Complex<f64>> {
    let m = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -k1, -k2]);
    quadpos::linalg::eigenvalues(&m)
}

fn print_poles(poles: &[PoleListing]) {
    for p in poles {
        println!("    {:>12.6} {:+.6}i   |p| = {:.6}", p.re, p.im, p.magnitude);
    }
}

pub fn gains(config: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config, &[])?;
    let spec = cfg
        .gains
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("{}: no `gains` section", config.display())))?;
    let mut report = GainsReport::default();
    let mut ok = true;

    if let Some(bs) = &spec.backstepping {
        let bound = bs.bound().map_err(CliError::from_core)?;
        let a2_star = alpha2_star(bs.alpha1, bound.beta_min).map_err(CliError::from_core)?;
        let chain = synthesize_alpha_chain(&bound, bs.alpha1, bs.growth).map_err(CliError::from_core)?;
        let cert = certify_chi_closed_loop(&chain.kvector(), &bound, bs.trials, bs.seed);
        let passed = cert.trials.iter().filter(|t| t.passed()).count();
        println!("backstepping  beta in [{}, {}]", bound.beta_min, bound.beta_max);
        println!("  alpha2*     {a2_star:.6}");
        println!("  alphas      {:?}", chain.alphas);
        println!("  margins     {:?}", chain.margins);
        println!("  k           {:?}", chain.kvector().0);
        for v in &cert.vertices {
            println!("  vertex beta = {}  hurwitz = {}", v.beta, v.hurwitz);
            for (re, im) in &v.eigenvalues {
                println!("    {re:>12.6} {im:+.6}i");
            }
        }
        if let Some(m) = cert.lyapunov_margin {
            println!("  lyapunov    {m:.6e}");
        }
        println!("  trials      {passed}/{} within horizon {:.3} s", cert.trials.len(), cert.horizon);
        ok &= chain.is_certified() && cert.passed();
        report.backstepping = Some(BacksteppingReport {
            alpha2_star: a2_star,
            chain,
            certificate: cert,
            trials_passed: passed,
        });
    }

    if let Some(pd) = &spec.pd {
        let g = pd.resolve().map_err(CliError::from_core)?;
        let r = PdReport {
            gains: g,
            altitude_poles: listing(&quadratic_roots(g.k11, g.k21)),
            yaw_poles: listing(&quadratic_roots(g.k12, g.k22)),
        };
        println!("pd            k11 = {}, k21 = {}, k12 = {}, k22 = {}", g.k11, g.k21, g.k12, g.k22);
        println!("  altitude poles");
        print_poles(&r.altitude_poles);
        println!("  yaw poles");
        print_poles(&r.yaw_poles);
        report.pd = Some(r);
    }

    for gs in &spec.gamma {
        let set = gs.resolve().map_err(CliError::from_core)?;
        let hurwitz = set.validate().is_ok();
        let r = GammaReport {
            set,
            poles: listing(&set.poles()),
            hurwitz,
        };
        let omega = set.omega.map_or(String::new(), |w| format!(" omega = {w}"));
        println!("gamma         {}{omega}  {:?}  hurwitz = {hurwitz}", set.family, set.gamma);
        print_poles(&r.poles);
        ok &= hurwitz;
        report.gamma.push(r);
    }

    if let Some(dir) = &cfg.output.dir {
        prepare_dir(dir)?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_text(&dir.join("gains.json"), &json)?;
    }
    if ok {
        println!("all certificates pass");
        Ok(())
    } else {
        Err(CliError::Synthesis("certification failed; see report".into()))
    }
}

pub fn verify(seed: u64, trials: usize, fault: Option<InjectedFault>) -> Result<(), CliError> {
    let results = run_checks(seed, trials, fault);
    print!("{}", render_table(&results));
    let failing: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("failing checks: {}", failing.join(", "))))
    }
}
