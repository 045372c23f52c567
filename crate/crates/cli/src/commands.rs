//! Command implementations. Each command assembles every output in memory
//! first and then writes through temp files renamed into place, so a failure
//! never leaves partial output behind.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use hman_core::graph::erdos_renyi_network;
use hman_core::model::{AgentRoster, AgentType, Hman, OpinionVector};
use hman_core::moments::{write_msd_csv, ExtendedRecursion};
use hman_core::spectral::{
    consensus_time_bound, dominant_of_g2, format_complex, rate_ordering_report, spectral_report,
    write_sweep_csv, SweepRecord, DEFAULT_POWER_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SweepSpec};
use crate::error::CliError;
use crate::svg::{line_plot, Series};

fn write_atomic(out_dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("creating {}", out_dir.display()), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(out_dir)
        .map_err(|e| CliError::io(format!("temp file in {}", out_dir.display()), e))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::io(format!("writing temp file for {name}"), e))?;
    let target = out_dir.join(name);
    tmp.persist(&target)
        .map_err(|e| CliError::io(format!("renaming into {}", target.display()), e.error))?;
    Ok(target)
}

fn build_model(cfg: &ExperimentConfig) -> Result<(Hman<f64>, OpinionVector<f64>), CliError> {
    let g = cfg.build_matrix()?;
    let roster = cfg.primary_roster(g.n())?;
    let x0 = cfg.initial_opinions(g.n())?;
    let model = Hman::new(g, roster)?;
    Ok((model, x0))
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path, plot: bool) -> Result<(), CliError> {
    let (model, x0) = build_model(cfg)?;
    let trajectory = model.simulate(&x0, cfg.horizon, cfg.seed);
    let mut csv = Vec::new();
    trajectory
        .write_csv(&mut csv)
        .map_err(|e| CliError::io("encoding trajectory CSV", e))?;
    let svg = plot.then(|| {
        let series: Vec<Series> = (0..model.n())
            .map(|i| Series {
                label: format!("x_{i}"),
                points: trajectory
                    .states()
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (k as f64, s.get(i)))
                    .collect(),
            })
            .collect();
        line_plot("opinion trajectories", "k", "opinion", &series)
    });
    let path = write_atomic(out_dir, "trajectory.csv", &csv)?;
    println!("wrote {}", path.display());
    if let Some(svg) = svg {
        let path = write_atomic(out_dir, "trajectory.svg", svg.as_bytes())?;
        println!("wrote {}", path.display());
    }
    match trajectory.consensus_time(cfg.epsilon) {
        Some(k) => println!("consensus_time={k}"),
        None => println!("consensus_time=none"),
    }
    Ok(())
}

pub fn cmd_msd(cfg: &ExperimentConfig, out_dir: &Path, plot: bool) -> Result<(), CliError> {
    if cfg.trials == 0 {
        return Err(CliError::Validation("trials must be at least 1".into()));
    }
    let (model, x0) = build_model(cfg)?;
    let n = model.n();
    let rec = ExtendedRecursion::new(&model);
    let exact = rec.iterate(&x0, cfg.horizon);
    let mc = model.monte_carlo_msd(&x0, cfg.trials, cfg.horizon, cfg.seed);

    let pairs: Vec<(usize, usize)> = (1..n).map(|i| (i, 0)).collect();
    let mut exact_csv = Vec::new();
    write_msd_csv(&exact, &pairs, &mut exact_csv)
        .map_err(|e| CliError::io("encoding exact MSD CSV", e))?;
    let mut mc_csv = Vec::new();
    mc.write_csv(&mut mc_csv)
        .map_err(|e| CliError::io("encoding Monte Carlo MSD CSV", e))?;

    // Standardized discrepancies where the sampler has spread; absolute ones
    // where it is deterministic.
    let mut max_standardized = 0.0f64;
    let mut standardized_at = (0usize, 0usize);
    let mut max_deterministic = 0.0f64;
    for (k, eov) in exact.iter().enumerate() {
        for i in 1..n {
            let e = eov.mean_square_deviation(i, 0);
            let m = mc.msd(k, i);
            let s = mc.stderr(k, i);
            let diff = (e - m).abs();
            if s > 0.0 {
                if diff / s > max_standardized {
                    max_standardized = diff / s;
                    standardized_at = (k, i);
                }
            } else if diff > max_deterministic {
                max_deterministic = diff;
            }
        }
    }
    let mut summary = String::new();
    let _ = writeln!(summary, "trials={}", cfg.trials);
    let _ = writeln!(summary, "horizon={}", cfg.horizon);
    let _ = writeln!(summary, "pairs={}", pairs.len());
    let _ = writeln!(summary, "max_standardized_discrepancy={max_standardized}");
    let _ = writeln!(
        summary,
        "max_standardized_at=k:{},pair:{}:0",
        standardized_at.0, standardized_at.1
    );
    let _ = writeln!(summary, "max_deterministic_discrepancy={max_deterministic}");

    let svg = plot.then(|| {
        let mut series = Vec::new();
        for &(i, j) in &pairs {
            series.push(Series {
                label: format!("exact {i}:{j}"),
                points: (0..=cfg.horizon)
                    .map(|k| (k as f64, exact[k].mean_square_deviation(i, j)))
                    .collect(),
            });
            series.push(Series {
                label: format!("mc {i}:{j}"),
                points: (0..=cfg.horizon).map(|k| (k as f64, mc.msd(k, i))).collect(),
            });
        }
        line_plot("mean square deviation from agent 0", "k", "msd", &series)
    });

    let path = write_atomic(out_dir, "msd_exact.csv", &exact_csv)?;
    println!("wrote {}", path.display());
    let path = write_atomic(out_dir, "msd_mc.csv", &mc_csv)?;
    println!("wrote {}", path.display());
    let path = write_atomic(out_dir, "msd_summary.txt", summary.as_bytes())?;
    println!("wrote {}", path.display());
    if let Some(svg) = svg {
        let path = write_atomic(out_dir, "msd.svg", svg.as_bytes())?;
        println!("wrote {}", path.display());
    }
    print!("{summary}");
    Ok(())
}

pub fn cmd_spectrum(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let g = cfg.build_matrix()?;
    let diag = g.diagnostics();
    if !diag.ergodic {
        return Err(CliError::Validation(format!(
            "matrix is not ergodic (strongly_connected={}, aperiodic={})",
            diag.strongly_connected, diag.aperiodic
        )));
    }
    let rosters = cfg.roster_list(g.n())?;

    let mut text = String::new();
    for roster in &rosters {
        let model = Hman::new(g.clone(), roster.clone())?;
        let report = spectral_report(&model)?;
        let _ = writeln!(
            text,
            "roster=a{}c{}v{}",
            report.m_a, report.m_c, report.m_v
        );
        text.push_str(&report.to_text());
        text.push('\n');
    }

    let ordering = if rosters.len() > 1 {
        Some(rate_ordering_report(&g, &rosters)?)
    } else {
        None
    };
    let mut ordering_csv = None;
    if let Some(report) = &ordering {
        text.push_str("ordering=|lambda_s| ascending\n");
        let mut csv = String::from("roster,m_a,m_c,m_v,lambda_s_re,lambda_s_im,lambda_s_abs\n");
        for e in &report.entries {
            let (m_a, m_c, m_v) = (e.roster.m_a(), e.roster.m_c(), e.roster.m_v());
            let _ = writeln!(
                text,
                "  a{m_a}c{m_c}v{m_v}: lambda_s={} abs={}",
                format_complex(e.lambda_s),
                e.magnitude()
            );
            let _ = writeln!(
                csv,
                "a{m_a}c{m_c}v{m_v},{m_a},{m_c},{m_v},{},{},{}",
                e.lambda_s.re,
                e.lambda_s.im,
                e.magnitude()
            );
        }
        let _ = writeln!(text, "ordering_violations={}", report.violations.len());
        for v in &report.violations {
            let _ = writeln!(text, "  violation: {v}");
        }
        ordering_csv = Some(csv.into_bytes());
    }

    let path = write_atomic(out_dir, "spectral_report.txt", text.as_bytes())?;
    println!("wrote {}", path.display());
    if let Some(csv) = ordering_csv {
        let path = write_atomic(out_dir, "rate_ordering.csv", &csv)?;
        println!("wrote {}", path.display());
    }
    print!("{text}");

    if let Some(report) = &ordering {
        if !report.violations.is_empty() {
            return Err(CliError::Numerical(format!(
                "rate ordering violated: {}",
                report.violations.join("; ")
            )));
        }
    }
    Ok(())
}

struct SweepInstance {
    record: SweepRecord<f64>,
    seed: u64,
    graph_seed: u64,
    resamples: usize,
    voters: Vec<usize>,
}

fn run_sweep_instance(n: usize, seed: u64, sweep: &SweepSpec) -> Result<SweepInstance, CliError> {
    let mut found = None;
    for attempt in 0..sweep.resample_limit {
        // Odd multiplier walks the whole u64 space without repeating.
        let graph_seed = seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let g = erdos_renyi_network::<f64>(n, sweep.p, graph_seed)?;
        if g.diagnostics().ergodic {
            found = Some((g, graph_seed, attempt));
            break;
        }
    }
    let (g, graph_seed, resamples) = found.ok_or_else(|| {
        CliError::Validation(format!(
            "no ergodic graph after {} attempts (n={n}, p={}); raise p or resample_limit",
            sweep.resample_limit, sweep.p
        ))
    })?;

    // Voter placement: distinct vertices by partial shuffle on a stream kept
    // separate from the one the generator consumed.
    let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
    rng.set_stream(1);
    let mut vertices: Vec<usize> = (0..n).collect();
    for i in 0..sweep.m_v {
        let j = rng.gen_range(i..n);
        vertices.swap(i, j);
    }
    let mut voters = vertices[..sweep.m_v].to_vec();
    voters.sort_unstable();
    let mut types = vec![AgentType::Averager; n];
    for &v in &voters {
        types[v] = AgentType::Voter;
    }

    let model = Hman::new(g, AgentRoster::new(types))?;
    let rec = ExtendedRecursion::new(&model);
    let rho = dominant_of_g2(&rec, DEFAULT_POWER_TOL)?;
    if !rho.is_finite() || rho >= 1.0 {
        return Err(CliError::Numerical(format!(
            "dominant eigenvalue {rho} is not strictly below 1 (n={n}, seed={seed})"
        )));
    }
    let time = 1.0 / (1.0 - rho);
    let bound = consensus_time_bound::<f64>(n, sweep.m_v)?;
    Ok(SweepInstance {
        record: SweepRecord {
            n,
            m_v: sweep.m_v,
            lambda_s: rho,
            bound_lambda: bound.bound_lambda,
            time,
            bound_time: bound.bound_time,
            ratio: time / bound.bound_time,
        },
        seed,
        graph_seed,
        resamples,
        voters,
    })
}

pub fn cmd_bound_sweep(cfg: &ExperimentConfig, out_dir: &Path, plot: bool) -> Result<(), CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Validation("config needs a sweep section".into()))?;
    let instances: Vec<(usize, u64)> = sweep
        .n_list
        .iter()
        .flat_map(|&n| sweep.seeds.iter().map(move |&s| (n, s)))
        .collect();
    // Instances run concurrently; collect preserves their order, so output is
    // independent of scheduling.
    let results: Vec<Result<SweepInstance, CliError>> = instances
        .par_iter()
        .map(|&(n, seed)| run_sweep_instance(n, seed, sweep))
        .collect();

    let mut records = Vec::with_capacity(results.len());
    let mut meta = String::from("n,seed,graph_seed,resamples,voters\n");
    for result in results {
        let inst = result?;
        let voters: Vec<String> = inst.voters.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            meta,
            "{},{},{},{},{}",
            inst.record.n,
            inst.seed,
            inst.graph_seed,
            inst.resamples,
            voters.join(";")
        );
        records.push(inst.record);
    }

    let mut csv = Vec::new();
    write_sweep_csv(&records, &mut csv).map_err(|e| CliError::io("encoding sweep CSV", e))?;

    let mut mean_csv = String::from("n,m_v,mean_ratio,seeds\n");
    let mut mean_points = Vec::new();
    let mut stdout_lines = String::new();
    for &n in &sweep.n_list {
        let ratios: Vec<f64> = records
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.ratio)
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let _ = writeln!(mean_csv, "{n},{},{mean},{}", sweep.m_v, ratios.len());
        mean_points.push((n as f64, mean));
        let _ = writeln!(stdout_lines, "n={n} mean_ratio={mean}");
    }

    let svg = plot.then(|| {
        let series = [Series {
            label: "mean ratio".into(),
            points: mean_points.clone(),
        }];
        line_plot("consensus time over bound", "n", "ratio", &series)
    });

    let path = write_atomic(out_dir, "bound_sweep.csv", &csv)?;
    println!("wrote {}", path.display());
    let path = write_atomic(out_dir, "bound_sweep_mean.csv", mean_csv.as_bytes())?;
    println!("wrote {}", path.display());
    let path = write_atomic(out_dir, "bound_sweep_meta.csv", meta.as_bytes())?;
    println!("wrote {}", path.display());
    if let Some(svg) = svg {
        let path = write_atomic(out_dir, "bound_sweep.svg", svg.as_bytes())?;
        println!("wrote {}", path.display());
    }
    print!("{stdout_lines}");
    Ok(())
}

pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let g = cfg.build_matrix()?;
    let diag = g.diagnostics();
    println!("n={}", g.n());
    println!("nnz={}", g.nnz());
    println!("strongly_connected={}", diag.strongly_connected);
    println!("aperiodic={}", diag.aperiodic);
    println!("ergodic={}", diag.ergodic);
    if cfg.roster.is_some() {
        let roster = cfg.primary_roster(g.n())?;
        println!("m_a={}", roster.m_a());
        println!("m_c={}", roster.m_c());
        println!("m_v={}", roster.m_v());
    }
    for spec in cfg.rosters.iter().flatten() {
        spec.build(g.n())?;
    }
    let x0 = cfg.initial_opinions(g.n())?;
    println!("x0_len={}", x0.len());
    println!("config=ok");
    Ok(())
}
