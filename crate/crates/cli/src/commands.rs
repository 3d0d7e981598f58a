use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use lsfp_core::analytic::SinrReport;
use lsfp_core::beta_estimation::{beta_convergence_study, convergence_slope};
use lsfp_core::experiments::{run_cdf_experiment, CdfResult, Scheme};
use lsfp_core::network::{generate_network, random_fading};
use lsfp_core::oracle::{
    downlink_closed_form, oracle_csv, oracle_rows, run_downlink_batch, run_uplink_batch, uplink_closed_form,
    ClosedForm, OracleRow, OracleSetup, TrialBatch,
};
use lsfp_core::precoding::{no_lsfp, zf_lsfd, zf_lsfp, LsfMatrices, ZfVariant};
use lsfp_core::rng::derive_seed;
use lsfp_core::Error;

use crate::{BetaArgs, CdfArgs, Common, Failure, Outcome, SinrArgs, ValidateArgs};

const REFERENCE_SEED: u64 = 2024;
const RESIDUAL_MAX: f64 = 1e-10;

fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Check(e.into())
}

fn core(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::Parse(_) => Failure::Usage(e.into()),
        _ => Failure::Check(e.into()),
    }
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(io)?;
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display())).map_err(io)
}

/// LSF matrices of `scheme`; `antennas` only matters without zero-forcing.
fn matrices(
    fading: &lsfp_core::LargeScaleFading,
    scheme: Scheme,
    variant: ZfVariant,
    rho_r: f64,
    tau: usize,
    antennas: usize,
) -> lsfp_core::Result<LsfMatrices> {
    Ok(match scheme {
        Scheme::NoLsfp => no_lsfp(fading, rho_r, tau, antennas),
        Scheme::ZfLsfp => LsfMatrices { precoding: zf_lsfp(fading, rho_r, tau, variant)?, decoding: zf_lsfd(fading)? },
    })
}

struct Failed {
    batch: String,
    what: String,
    value: f64,
}

pub fn validate(c: &Common, a: &ValidateArgs) -> Outcome {
    let setup = match c.loaded()? {
        Some(mut cfg) => {
            if let Some(s) = c.seed {
                cfg.network.seed = s;
            }
            let n = &cfg.network;
            OracleSetup {
                fading: generate_network(n).map_err(core)?,
                rho_f: n.rho_f,
                rho_r: n.rho_r,
                tau: n.tau,
                antennas: a.antennas.unwrap_or(n.antennas),
            }
        }
        None => OracleSetup {
            fading: random_fading(3, 2, c.seed.unwrap_or(REFERENCE_SEED)).map_err(core)?,
            rho_f: 1.0,
            rho_r: 1.0,
            tau: 2,
            antennas: a.antennas.unwrap_or(32),
        },
    };
    if a.trials < 2 {
        return Err(Failure::Usage(anyhow!("--trials must be at least 2")));
    }
    let seed = c.seed.unwrap_or(REFERENCE_SEED);
    let (f, m) = (&setup.fading, setup.antennas);
    let none = no_lsfp(f, setup.rho_r, setup.tau, m);
    let zf = zf_lsfp(f, setup.rho_r, setup.tau, ZfVariant::Mu).map_err(core)?;
    let zd = zf_lsfd(f).map_err(core)?;

    println!(
        "oracle suite: L={} K={} tau={} M={} rho_f={} rho_r={} trials={}",
        f.cells(),
        f.users(),
        setup.tau,
        m,
        setup.rho_f,
        setup.rho_r,
        a.trials
    );
    println!("{:<16} {:<22} {:>12} {:>12} {:>10} {:>8}", "batch", "term", "closed", "empirical", "stderr", "z");

    type Closed<'a> = Box<dyn Fn(usize, usize) -> ClosedForm + 'a>;
    let batches: Vec<(&str, TrialBatch, Closed)> = vec![
        (
            "downlink_nolsfp",
            run_downlink_batch(&setup, &none.precoding, a.trials, derive_seed(seed, 0)).map_err(core)?,
            Box::new(|k, l| downlink_closed_form(&setup, &none.precoding, k, l)),
        ),
        (
            "downlink_zf",
            run_downlink_batch(&setup, &zf, a.trials, derive_seed(seed, 1)).map_err(core)?,
            Box::new(|k, l| downlink_closed_form(&setup, &zf, k, l)),
        ),
        (
            "uplink_nolsfd",
            run_uplink_batch(&setup, &none.decoding, a.trials, derive_seed(seed, 2)).map_err(core)?,
            Box::new(|k, l| uplink_closed_form(&setup, &none.decoding, k, l)),
        ),
        (
            "uplink_zf",
            run_uplink_batch(&setup, &zd, a.trials, derive_seed(seed, 3)).map_err(core)?,
            Box::new(|k, l| uplink_closed_form(&setup, &zd, k, l)),
        ),
    ];

    let mut failed = Vec::new();
    for (name, batch, closed) in &batches {
        let mut rows: Vec<OracleRow> = Vec::new();
        for k in 0..f.users() {
            for l in 0..f.cells() {
                rows.extend(oracle_rows(batch, &closed(k, l), k, l));
            }
        }
        for r in &rows {
            let flag = if r.z_score.abs() > a.z_max { "  FAIL" } else { "" };
            println!(
                "{:<16} {:<22} {:>12.5e} {:>12.5e} {:>10.3e} {:>8.3}{flag}",
                name, r.term, r.closed_form, r.empirical, r.stderr, r.z_score
            );
            if !flag.is_empty() {
                failed.push(Failed { batch: name.to_string(), what: r.term.clone(), value: r.z_score });
            }
        }
        let residual = batch.max_residual();
        println!("{:<16} {:<22} {:>12.3e}", name, "max residual", residual);
        if residual.is_nan() || residual >= RESIDUAL_MAX {
            failed.push(Failed { batch: name.to_string(), what: "residual".into(), value: residual });
        }
        if let Some(dir) = &c.out {
            write_out(dir, &format!("oracle_{name}.csv"), &oracle_csv(&rows))?;
        }
    }

    let mut summary = String::from("batch,check,value\n");
    for x in &failed {
        let _ = writeln!(summary, "{},{},{:e}", x.batch, x.what, x.value);
    }
    if let Some(dir) = &c.out {
        write_out(dir, "validate_failures.csv", &summary)?;
    }
    if failed.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        eprint!("{summary}");
        Err(Failure::Check(anyhow!("{} oracle check(s) failed", failed.len())))
    }
}

pub fn cdf(c: &Common, a: &CdfArgs) -> Outcome {
    let mut cfg = c.experiment()?;
    if let Some(grid) = &a.antennas {
        cfg.antenna_grid = grid.clone();
    }
    if let Some(d) = a.draws {
        cfg.draws = d;
    }
    if let Some(v) = a.variant {
        cfg.zf_variant = v.into();
    }
    cfg.validate().map_err(core)?;
    let result = run_cdf_experiment(&cfg, a.scheme.into()).map_err(core)?;
    let dir = c.out.clone().unwrap_or_else(|| ".".into());
    let paths = result.write(&dir).with_context(|| format!("writing into {}", dir.display())).map_err(io)?;
    let summary = CdfResult::summary_csv(std::slice::from_ref(&result));
    write_out(&dir, &format!("summary_{}.csv", result.scheme.label()), &summary)?;
    print!("{summary}");
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

pub fn sinr(c: &Common, a: &SinrArgs) -> Outcome {
    let mut cfg = c.experiment()?;
    if let Some(m) = a.antennas {
        cfg.network.antennas = m;
    }
    if let Some(v) = a.variant {
        cfg.zf_variant = v.into();
    }
    cfg.validate().map_err(core)?;
    let n = &cfg.network;
    let fading = generate_network(n).map_err(core)?;
    let scheme: Scheme = a.scheme.into();
    let lsf = matrices(&fading, scheme, cfg.zf_variant, n.rho_r, n.tau, n.antennas).map_err(core)?;
    let report = SinrReport::compute(&fading, &lsf, n.rho_f, n.rho_r, n.tau, n.antennas).map_err(core)?;
    let csv = report.to_csv();
    print!("{csv}");
    if let Some(dir) = &c.out {
        write_out(dir, &format!("sinr_{}_M{}.csv", scheme.label(), n.antennas), &csv)?;
        write_out(dir, "fading.csv", &fading.to_csv())?;
    }
    Ok(())
}

pub fn estimate_beta(c: &Common, a: &BetaArgs) -> Outcome {
    let cfg = c.loaded()?;
    let rho = a.rho.or(cfg.as_ref().map(|x| x.network.rho_r)).unwrap_or(1.0);
    let seed = c.seed.or(cfg.as_ref().map(|x| x.network.seed)).unwrap_or(REFERENCE_SEED);
    if a.mu == 0 || a.trials < 2 {
        return Err(Failure::Usage(anyhow!("--mu must be >= 1 and --trials >= 2")));
    }
    let mut gains = vec![a.interference; a.mu];
    gains[0] = a.beta;
    let rows = beta_convergence_study(&gains, 0, rho, &a.antennas, a.trials, seed).map_err(core)?;

    let mut csv = String::from("M,trials,mean,stderr,spread,z\n");
    let mut failures = Vec::new();
    println!("{:>8} {:>12} {:>10} {:>10} {:>8}", "M", "mean", "stderr", "spread", "z");
    for r in &rows {
        let z = r.mean.z_score(a.beta);
        println!("{:>8} {:>12.6} {:>10.3e} {:>10.3e} {:>8.3}", r.antennas, r.mean.value, r.mean.stderr, r.spread, z);
        let _ =
            writeln!(csv, "{},{},{:e},{:e},{:e},{:.4}", r.antennas, r.trials, r.mean.value, r.mean.stderr, r.spread, z);
        if z.abs() > 4.0 {
            failures.push(format!("bias at M={}: z={z:.3}", r.antennas));
        }
    }
    if rows.len() >= 2 {
        let slope = convergence_slope(&rows);
        println!("spread slope {slope:.4} (expected -0.5 +/- 0.1)");
        if (slope + 0.5).abs() > 0.1 {
            failures.push(format!("spread slope {slope:.4}"));
        }
    }
    if let Some(dir) = &c.out {
        write_out(dir, "beta_study.csv", &csv)?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("FAIL {f}");
        }
        Err(Failure::Check(anyhow!("{} estimator check(s) failed", failures.len())))
    }
}
