//! Command implementations and error-to-exit-code mapping.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use switchstab::nalgebra::{DMatrix, DVector};

use switchstab::certify::{
    check_convergence, check_corollary_final, empirical_stability_test, ConvergenceOptions,
    CorollaryOptions, StabilityTestOptions, TheoremId, Verdict,
};
use switchstab::integrator::{simulate, SimOptions};
use switchstab::limits::{omega_limit, omega_sharp};
use switchstab::signal::{validate, GenerateOptions, ModeId, SetValuedMap, SignalClassSpec};
use switchstab::system::SystemJson;

use crate::config::{
    check_schema, load_config, schemas, CertifyConfig, GenerateConfig, GenerateSpec,
    LimitsConfig, ReportConfig, SimulateConfig, SweepConfig, ValidateConfig,
};
use crate::{ClassFlags, Command, Failure};

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenerateSignal {
            config,
            class,
            t0,
            t1,
            seed,
            initial_mode,
            out,
        } => generate_signal(config, class, t0, t1, seed, initial_mode, out),
        Command::ValidateSignal {
            config,
            class,
            signal,
            strict,
            out,
        } => validate_signal(config, class, signal, strict, out),
        Command::Simulate { config, out } => simulate_cmd(&config, out),
        Command::Limits { config, out } => limits_cmd(&config, out),
        Command::Certify {
            theorem,
            config,
            strict,
            out,
        } => certify_cmd(&theorem, &config, strict, out),
        Command::StabilitySweep { config, out } => sweep_cmd(&config, out),
        Command::Report {
            config,
            certificate,
            validation,
            stats,
            limits,
            out,
        } => report_cmd(config, certificate, validation, stats, limits, out),
    }
}

fn config_err(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(err.into())
}

fn numeric_err(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Numeric(err.into())
}

fn signal_failure(err: switchstab::signal::SignalError<f64>) -> Failure {
    // every signal-level error is a usage problem, not a numeric one
    config_err(err)
}

fn certify_failure(err: switchstab::certify::CertifyError<f64>) -> Failure {
    use switchstab::certify::CertifyError as E;
    match err {
        E::ClassTheoremMismatch { .. } | E::Invalid(_) | E::Lyapunov(_) | E::Signal(_) => {
            config_err(err)
        }
        E::Sim(_) | E::Observability(_) | E::System(_) => numeric_err(err),
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("SWITCHSTAB_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map(Some)
            .map_err(|_| config_err(anyhow!("SWITCHSTAB_SEED must be an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(config_err),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn to_pretty_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| numeric_err(anyhow!("serializing output: {e}")))
}

fn parse_modes(text: &str) -> Result<Vec<ModeId>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map(ModeId)
                .map_err(|_| anyhow!("bad mode id `{part}`"))
        })
        .collect()
}

fn parse_edges(text: &str) -> Result<SetValuedMap> {
    let mut map = SetValuedMap::default();
    for part in text.split(',') {
        let (from, to) = part
            .trim()
            .split_once('>')
            .ok_or_else(|| anyhow!("bad edge `{part}`, expected `from>to`"))?;
        map.add_edge(
            ModeId(from.trim().parse().map_err(|_| anyhow!("bad mode id `{from}`"))?),
            ModeId(to.trim().parse().map_err(|_| anyhow!("bad mode id `{to}`"))?),
        );
    }
    Ok(map)
}

impl ClassFlags {
    fn build(&self) -> Result<SignalClassSpec> {
        let name = self
            .class
            .as_deref()
            .ok_or_else(|| anyhow!("--class (or --config) is required"))?;
        match name {
            "dwell" => Ok(SignalClassSpec::Dwell {
                tau_d: self.tau_d.ok_or_else(|| anyhow!("dwell class needs --tau-d"))?,
            }),
            "adt" => Ok(SignalClassSpec::Adt {
                tau_d: self.tau_d.ok_or_else(|| anyhow!("adt class needs --tau-d"))?,
                n0: self.n0.ok_or_else(|| anyhow!("adt class needs --n0"))?,
            }),
            "ergodic" => Ok(SignalClassSpec::Ergodic {
                window: self
                    .window
                    .ok_or_else(|| anyhow!("ergodic class needs --window"))?,
                modes: parse_modes(
                    self.modes
                        .as_deref()
                        .ok_or_else(|| anyhow!("ergodic class needs --modes"))?,
                )?,
            }),
            "graph" => Ok(SignalClassSpec::Graph {
                map: parse_edges(
                    self.edges
                        .as_deref()
                        .ok_or_else(|| anyhow!("graph class needs --edges"))?,
                )?,
            }),
            other => Err(anyhow!(
                "unknown class `{other}` (expected dwell, adt, ergodic or graph)"
            )),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn generate_signal(
    config: Option<PathBuf>,
    class: ClassFlags,
    t0: Option<f64>,
    t1: Option<f64>,
    seed: Option<u64>,
    initial_mode: Option<u32>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let seed_override = env_seed()?.or(seed);
    let (spec, out_path) = if let Some(path) = config {
        let (cfg, _base): (GenerateConfig, _) = load_config(&path).map_err(config_err)?;
        check_schema(&cfg.schema, schemas::GENERATE).map_err(config_err)?;
        (cfg.generate, out.or(cfg.out))
    } else {
        let class = class.build().map_err(config_err)?;
        let horizon = match (t0, t1) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        };
        (
            GenerateSpec {
                class,
                horizon,
                seed: 0,
                // no flag for an explicit universe: the generator falls back
                // to the class-implied mode set
                modes: None,
                initial_mode,
                mode_weights: None,
            },
            out,
        )
    };
    let sig = spec.build(None, seed_override).map_err(|e| {
        match e.downcast::<switchstab::signal::SignalError<f64>>() {
            Ok(sig_err) => signal_failure(sig_err),
            Err(other) => config_err(other),
        }
    })?;
    let json = to_pretty_json(&sig)?;
    write_output(out_path.as_deref(), &json)
}


fn validate_signal(
    config: Option<PathBuf>,
    class: ClassFlags,
    signal: Option<PathBuf>,
    strict: bool,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let (spec, sig) = if let Some(path) = config {
        let (cfg, base): (ValidateConfig, _) = load_config(&path).map_err(config_err)?;
        check_schema(&cfg.schema, schemas::VALIDATE).map_err(config_err)?;
        let sig = cfg.signal.load(&base, None, None).map_err(config_err)?;
        (cfg.class, sig)
    } else {
        let spec = class.build().map_err(config_err)?;
        let path = signal.ok_or_else(|| config_err(anyhow!("--signal (or --config) is required")))?;
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(config_err)?;
        let sig = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(config_err)?;
        (spec, sig)
    };
    let report = validate(&sig, &spec).map_err(signal_failure)?;
    let json = to_pretty_json(&report)?;
    write_output(out.as_deref(), &json)?;
    if strict && !report.pass {
        return Err(Failure::Strict("signal is not in the class".into()));
    }
    Ok(())
}

fn simulate_cmd(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let (cfg, base): (SimulateConfig, _) = load_config(config).map_err(config_err)?;
    check_schema(&cfg.schema, schemas::SIMULATE).map_err(config_err)?;
    let seed_override = env_seed()?;
    let sys = cfg
        .system
        .load(&base)
        .and_then(|j: SystemJson| j.build().map_err(Into::into))
        .map_err(config_err)?;
    let sig = cfg
        .signal
        .load(&base, Some(cfg.span), seed_override)
        .map_err(config_err)?;
    let traj = simulate(
        &sys,
        &sig,
        &DVector::from_row_slice(&cfg.x0),
        cfg.span,
        cfg.step,
        cfg.backward,
        &SimOptions::default(),
    )
    .map_err(numeric_err)?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)
        .map_err(|e| numeric_err(anyhow!("writing csv: {e}")))?;
    let content = String::from_utf8(buf).expect("csv is utf-8");
    write_output(out.or(cfg.out).as_deref(), &content)
}

fn limits_cmd(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let (cfg, base): (LimitsConfig, _) = load_config(config).map_err(config_err)?;
    check_schema(&cfg.schema, schemas::LIMITS).map_err(config_err)?;
    let seed_override = env_seed()?;
    let sys = cfg
        .system
        .load(&base)
        .and_then(|j: SystemJson| j.build().map_err(Into::into))
        .map_err(config_err)?;
    let sig = cfg
        .signal
        .load(&base, Some(cfg.span), seed_override)
        .map_err(config_err)?;
    let traj = simulate(
        &sys,
        &sig,
        &DVector::from_row_slice(&cfg.x0),
        cfg.span,
        cfg.step,
        false,
        &SimOptions::default(),
    )
    .map_err(numeric_err)?;
    let omega = omega_limit(&traj, cfg.tail_fraction, cfg.cluster_tol).map_err(config_err)?;
    let r_min = cfg.r_min.unwrap_or_else(|| {
        let min_gap = sig
            .switch_times()
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if min_gap.is_finite() {
            min_gap / 4.0
        } else {
            0.25
        }
    });
    let sharp =
        omega_sharp(&traj, cfg.tail_fraction, r_min, cfg.cluster_tol).map_err(config_err)?;
    let payload = serde_json::json!({
        "schema": "switchstab/limits/v1",
        "r_min": r_min,
        "omega": omega,
        "omega_sharp": sharp,
    });
    let json = to_pretty_json(&payload)?;
    write_output(out.or(cfg.out).as_deref(), &json)
}

fn certify_cmd(
    theorem: &str,
    config: &Path,
    strict: bool,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let theorem: TheoremId = theorem.parse().map_err(|e: String| config_err(anyhow!(e)))?;
    let (cfg, base): (CertifyConfig, _) = load_config(config).map_err(config_err)?;
    check_schema(&cfg.schema, schemas::CERTIFY).map_err(config_err)?;
    let seed_override = env_seed()?;
    let sys_json: SystemJson = cfg.system.load(&base).map_err(config_err)?;
    let sys = sys_json.build().map_err(config_err)?;
    let pair_json = cfg.pair.load(&base).map_err(config_err)?;

    let report = if theorem == TheoremId::CorollaryFinal {
        let a_list: Vec<DMatrix<f64>> = sys
            .modes()
            .iter()
            .map(|m| {
                m.linear_matrix().cloned().ok_or_else(|| {
                    config_err(anyhow!(
                        "corollary_final needs an all-linear system (mode {} is not)",
                        m.id()
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        let to_mat = |rows: &Vec<Vec<f64>>| {
            DMatrix::from_fn(rows.len(), rows.first().map_or(0, Vec::len), |i, j| rows[i][j])
        };
        let p_list: Vec<DMatrix<f64>> = pair_json.p.iter().map(to_mat).collect();
        let c_list: Vec<DMatrix<f64>> = pair_json.c.iter().map(to_mat).collect();
        let mut opts = CorollaryOptions::default();
        if let Some(seed) = seed_override.or(cfg.options.seed) {
            opts.seed = seed;
        }
        check_corollary_final(&a_list, &p_list, &c_list, cfg.common_p_assumed, &opts)
            .map_err(certify_failure)?
    } else {
        let class = cfg.class.clone().ok_or_else(|| {
            config_err(anyhow!("theorem {theorem} needs a `class` entry in the config"))
        })?;
        let pair = pair_json.build().map_err(config_err)?;
        let mut opts = ConvergenceOptions::default();
        let tuning = &cfg.options;
        if let Some(seed) = seed_override.or(tuning.seed) {
            opts.seed = seed;
        }
        if let Some(v) = tuning.candidate_samples {
            opts.candidate_samples = v;
        }
        if let Some(v) = tuning.decrease_samples {
            opts.decrease_samples = v;
        }
        if let Some(v) = tuning.membership_tau {
            opts.membership_tau = Some(v);
        }
        if let Some(v) = tuning.membership_step {
            opts.membership_step = v;
        }
        if let Some(v) = tuning.monitor_trials {
            opts.monitor_trials = v;
        }
        if let Some(v) = tuning.monitor_horizon {
            opts.monitor_horizon = v;
        }
        if let Some(v) = tuning.uniqueness_asserted {
            opts.uniqueness_asserted = v;
        }
        check_convergence(&sys, &pair, &class, theorem, &opts).map_err(certify_failure)?
    };

    let json = to_pretty_json(&report)?;
    write_output(out.or(cfg.out).as_deref(), &json)?;
    if strict && report.verdict == Verdict::Refuted {
        return Err(Failure::Strict(format!(
            "certificate refuted for theorem {theorem}"
        )));
    }
    Ok(())
}

fn sweep_cmd(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let (cfg, base): (SweepConfig, _) = load_config(config).map_err(config_err)?;
    check_schema(&cfg.schema, schemas::SWEEP).map_err(config_err)?;
    let seed = env_seed()?.unwrap_or(cfg.seed);
    let sys = cfg
        .system
        .load(&base)
        .and_then(|j: SystemJson| j.build().map_err(Into::into))
        .map_err(config_err)?;
    let opts = StabilityTestOptions {
        step: cfg.step,
        seed,
        target: None,
        generate: GenerateOptions {
            modes: cfg
                .modes
                .as_ref()
                .map(|m| m.iter().copied().map(ModeId).collect()),
            ..Default::default()
        },
    };
    let stats = empirical_stability_test(
        &sys,
        &cfg.class,
        cfg.trials,
        cfg.ball_radius,
        cfg.horizon,
        cfg.eps,
        &opts,
    )
    .map_err(certify_failure)?;
    let mut buf = Vec::new();
    stats
        .write_csv(&mut buf)
        .map_err(|e| numeric_err(anyhow!("writing csv: {e}")))?;
    let content = String::from_utf8(buf).expect("csv is utf-8");
    write_output(out.or(cfg.out).as_deref(), &content)
}

fn report_cmd(
    config: Option<PathBuf>,
    certificate: Option<PathBuf>,
    validation: Option<PathBuf>,
    stats: Option<PathBuf>,
    limits: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let (cfg, base) = match config {
        Some(path) => load_config::<ReportConfig>(&path).map_err(config_err)?,
        None => (ReportConfig::default(), PathBuf::from(".")),
    };
    check_schema(&cfg.schema, schemas::REPORT).map_err(config_err)?;
    let resolve = |flag: Option<PathBuf>, from_cfg: &Option<PathBuf>| {
        flag.or_else(|| from_cfg.as_ref().map(|p| base.join(p)))
    };
    let mut text = String::from("switchstab report\n=================\n");

    if let Some(path) = resolve(certificate, &cfg.certificate) {
        let value: serde_json::Value = read_json(&path)?;
        let theorem = value["theorem"].as_str().unwrap_or("?");
        let verdict = value["verdict"].as_str().unwrap_or("?");
        let empty = Vec::new();
        let hyps = value["hypotheses"].as_array().unwrap_or(&empty);
        let count = |status: &str| {
            hyps.iter()
                .filter(|h| h["status"].as_str() == Some(status))
                .count()
        };
        text.push_str(&format!(
            "certificate: theorem {theorem} -> {verdict} ({} hold, {} asserted, {} evidence, {} failed)\n",
            count("holds"),
            count("asserted"),
            count("evidence"),
            count("fails")
        ));
        if let Some(limit) = value["predicted_limit"]["description"].as_str() {
            text.push_str(&format!("  predicted limit: {limit}\n"));
        }
        for h in hyps {
            if h["status"].as_str() == Some("fails") {
                text.push_str(&format!(
                    "  failed hypothesis: {} ({})\n",
                    h["name"].as_str().unwrap_or("?"),
                    h["witness"]["description"].as_str().unwrap_or("")
                ));
            }
        }
    }
    if let Some(path) = resolve(validation, &cfg.validation) {
        let value: serde_json::Value = read_json(&path)?;
        let pass = value["pass"].as_bool().unwrap_or(false);
        text.push_str(&format!(
            "validation: {}\n",
            if pass { "pass" } else { "FAIL" }
        ));
        if let Some(kind) = value["violation"]["kind"].as_str() {
            text.push_str(&format!("  first violation: {kind}\n"));
        }
    }
    if let Some(path) = resolve(stats, &cfg.stats) {
        let content = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(config_err)?;
        let rows: Vec<&str> = content.lines().skip(1).collect();
        let ok = rows.iter().filter(|r| r.contains(",ok,")).count();
        text.push_str(&format!(
            "stability sweep: {} trials, {} ok, {} failed\n",
            rows.len(),
            ok,
            rows.len() - ok
        ));
    }
    if let Some(path) = resolve(limits, &cfg.limits) {
        let value: serde_json::Value = read_json(&path)?;
        let omega = value["omega"]["points"].as_array().map_or(0, Vec::len);
        let sharp = value["omega_sharp"]["entries"].as_array().map_or(0, Vec::len);
        text.push_str(&format!(
            "limit sets: omega estimate {omega} points, refined estimate {sharp} state-mode pairs\n"
        ));
    }
    write_output(out.or(cfg.out).as_deref(), &text)
}

fn read_json(path: &Path) -> Result<serde_json::Value, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(config_err)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(config_err)
}
