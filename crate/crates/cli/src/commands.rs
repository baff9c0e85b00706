//! The five subcommands. Every command returns its full output text plus
//! the process exit code; `main` handles writing and exiting.

use std::fmt::Write as _;
use std::io::Write as _;

use rayon::prelude::*;
use serde_json::Value;

use rmab_core::verify::{run_suite, VerifySuite};
use rmab_core::{
    evaluate_conditions, iid_special_case_check, myopic_action, myopic_value, optimal_value_with_cap,
    simulate_belief_level_logged, simulate_channel_level_logged, Fidelity, PlannerError, SimStats,
};

use crate::config::{self, ExperimentConfig, FidelitySpec};
use crate::output::{
    csv_row, fmt_action, fmt_action_list, fmt_f64, fmt_opt_bool, timestamp_comment,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_CONDITION_FAILS: u8 = 3;
pub const EXIT_INDETERMINATE: u8 = 4;
pub const EXIT_CAP: u8 = 5;
pub const EXIT_VERIFICATION: u8 = 6;

/// A command failure carrying its exit code.
#[derive(Debug)]
pub struct CmdError {
    pub exit: u8,
    pub message: String,
}

impl CmdError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_PARSE,
            message: message.into(),
        }
    }
}

fn planner_error(err: PlannerError) -> CmdError {
    let exit = match &err {
        PlannerError::CapExceeded { .. } => EXIT_CAP,
        PlannerError::Verification(_) => EXIT_VERIFICATION,
        _ => EXIT_PARSE,
    };
    CmdError {
        exit,
        message: err.to_string(),
    }
}

pub struct CmdOutput {
    pub text: String,
    pub exit: u8,
}

/// Closed-form condition report as JSON.
pub fn cmd_check(raw: &Value) -> Result<CmdOutput, CmdError> {
    let config = config::typed(raw).map_err(CmdError::config)?;
    let instance = config.build_instance().map_err(CmdError::config)?;
    let report = evaluate_conditions(&instance).map_err(|e| CmdError::config(e.to_string()))?;
    let exit = match report.theorem1_holds {
        Some(true) if report.myopic_proven_optimal() => EXIT_OK,
        Some(_) if instance.reward().is_builtin() => {
            if report.theorem1_holds == Some(true) {
                EXIT_OK
            } else {
                EXIT_CONDITION_FAILS
            }
        }
        _ => EXIT_INDETERMINATE,
    };
    let mut doc = serde_json::to_value(&report).expect("report serializes");
    doc["iid_special_case"] =
        serde_json::to_value(iid_special_case_check(&instance)).expect("verdict serializes");
    doc["instance_id"] = Value::String(config.instance_id());
    let text = serde_json::to_string_pretty(&doc).expect("doc serializes") + "\n";
    Ok(CmdOutput { text, exit })
}

pub const SOLVE_HEADER: &str = "instance-id,N,k,T,beta,epsilon,delta,delta_p_max,reward_kind,\
theorem1_holds,theorem2_holds,V_optimal,V_myopic,gap,node_count,\
optimal_first_actions,myopic_first_action";

fn solve_row(config: &ExperimentConfig, instance_id: &str) -> Result<String, CmdError> {
    let instance = config.build_instance().map_err(CmdError::config)?;
    let cap = config.node_cap().map_err(CmdError::config)?;
    let conditions =
        evaluate_conditions(&instance).map_err(|e| CmdError::config(e.to_string()))?;
    let optimal = optimal_value_with_cap(&instance, cap).map_err(planner_error)?;
    let myopic = myopic_value(&instance).map_err(planner_error)?;
    let gap = optimal.value - myopic;
    if gap < -1e-12 {
        return Err(CmdError {
            exit: EXIT_VERIFICATION,
            message: format!(
                "internal inconsistency: V_optimal={} fell below V_myopic={myopic}",
                optimal.value
            ),
        });
    }
    let first_myopic = myopic_action(instance.initial_belief(), instance.channels(), instance.k())
        .map_err(|e| CmdError::config(e.to_string()))?;
    Ok(csv_row(&[
        instance_id.to_string(),
        instance.n().to_string(),
        instance.k().to_string(),
        instance.horizon().slots().to_string(),
        fmt_f64(instance.horizon().discount()),
        fmt_f64(instance.sensing().epsilon()),
        fmt_f64(instance.sensing().delta()),
        fmt_f64(conditions.quantities.delta_p_max),
        instance.reward().kind_label(),
        fmt_opt_bool(conditions.theorem1_holds),
        fmt_opt_bool(conditions.theorem2_holds),
        fmt_f64(optimal.value),
        fmt_f64(myopic),
        fmt_f64(gap),
        optimal.node_count.to_string(),
        fmt_action_list(&optimal.first_actions),
        fmt_action(&first_myopic),
    ]))
}

/// Exact optimal-vs-myopic table for the configured instance.
pub fn cmd_solve(raw: &Value) -> Result<CmdOutput, CmdError> {
    let config = config::typed(raw).map_err(CmdError::config)?;
    let row = solve_row(&config, &config.instance_id())?;
    let mut text = String::new();
    writeln!(text, "# schema=rmab-solve-v1").unwrap();
    writeln!(text, "{}", timestamp_comment()).unwrap();
    writeln!(text, "# seed={}", config.seed).unwrap();
    writeln!(text, "{SOLVE_HEADER}").unwrap();
    writeln!(text, "{row}").unwrap();
    Ok(CmdOutput {
        text,
        exit: EXIT_OK,
    })
}

const SIMULATE_HEADER: &str = "instance-id,fidelity,policy,episodes,seed,mean_discounted_f,\
stderr_f,mean_discounted_success,stderr_success,sensed_slots,acks,collisions,collision_rate";

fn stats_row(config: &ExperimentConfig, label: &str, stats: &SimStats) -> String {
    csv_row(&[
        config.instance_id(),
        label.to_string(),
        config.policy.label(),
        stats.episodes.to_string(),
        stats.seed.to_string(),
        fmt_f64(stats.mean_discounted_f),
        fmt_f64(stats.stderr_f),
        fmt_f64(stats.mean_discounted_success),
        fmt_f64(stats.stderr_success),
        stats.sensed_slots.to_string(),
        stats.acks.to_string(),
        stats.collisions.map(|c| c.to_string()).unwrap_or_default(),
        stats.collision_rate.map(fmt_f64).unwrap_or_default(),
    ])
}

/// Monte Carlo estimates at the configured fidelities.
pub fn cmd_simulate(
    raw: &Value,
    episode_log: Option<&std::path::Path>,
) -> Result<CmdOutput, CmdError> {
    let config = config::typed(raw).map_err(CmdError::config)?;
    let instance = config.build_instance().map_err(CmdError::config)?;
    let policy = config.build_policy(&instance).map_err(CmdError::config)?;

    let fidelities: &[Fidelity] = match config.fidelity {
        FidelitySpec::Channel => &[Fidelity::ChannelLevel],
        FidelitySpec::Belief => &[Fidelity::BeliefLevel],
        FidelitySpec::Both => &[Fidelity::ChannelLevel, Fidelity::BeliefLevel],
    };

    let mut log_writer = match episode_log {
        Some(path) => Some(std::io::BufWriter::new(std::fs::File::create(path).map_err(
            |e| CmdError::config(format!("episode log {}: {e}", path.display())),
        )?)),
        None => None,
    };
    let logging = log_writer.is_some();
    let mut log_error: Option<std::io::Error> = None;

    let mut text = String::new();
    writeln!(text, "# schema=rmab-simulate-v1").unwrap();
    writeln!(text, "{}", timestamp_comment()).unwrap();
    writeln!(text, "# seed={}", config.seed).unwrap();
    writeln!(text, "{SIMULATE_HEADER}").unwrap();
    for fidelity in fidelities {
        let mut sink = |record: rmab_core::EpisodeRecord| {
            if let Some(writer) = log_writer.as_mut() {
                if log_error.is_none() {
                    let line = serde_json::to_string(&record).expect("record serializes");
                    if let Err(e) = writeln!(writer, "{line}") {
                        log_error = Some(e);
                    }
                }
            }
        };
        let run = match fidelity {
            Fidelity::ChannelLevel => {
                if logging {
                    simulate_channel_level_logged(
                        &instance,
                        policy.as_ref(),
                        config.episodes,
                        config.seed,
                        &mut sink,
                    )
                } else {
                    rmab_core::simulate_channel_level(
                        &instance,
                        policy.as_ref(),
                        config.episodes,
                        config.seed,
                    )
                }
            }
            Fidelity::BeliefLevel => {
                if logging {
                    simulate_belief_level_logged(
                        &instance,
                        policy.as_ref(),
                        config.episodes,
                        config.seed,
                        &mut sink,
                    )
                } else {
                    rmab_core::simulate_belief_level(
                        &instance,
                        policy.as_ref(),
                        config.episodes,
                        config.seed,
                    )
                }
            }
        }
        .map_err(|e| CmdError::config(e.to_string()))?;
        let label = match fidelity {
            Fidelity::ChannelLevel => "channel",
            Fidelity::BeliefLevel => "belief",
        };
        writeln!(text, "{}", stats_row(&config, label, &run)).unwrap();
    }
    if let Some(e) = log_error {
        return Err(CmdError::config(format!("episode log write failed: {e}")));
    }
    if let Some(mut writer) = log_writer {
        writer
            .flush()
            .map_err(|e| CmdError::config(format!("episode log flush failed: {e}")))?;
    }
    Ok(CmdOutput {
        text,
        exit: EXIT_OK,
    })
}

/// Randomized verification suites from the `verify` config section.
pub fn cmd_verify(raw: &Value) -> Result<CmdOutput, CmdError> {
    let config = config::typed(raw).map_err(CmdError::config)?;
    let verify = config
        .verify
        .as_ref()
        .ok_or_else(|| CmdError::config("config has no `verify` section"))?;
    if verify.suites.is_empty() {
        return Err(CmdError::config("verify.suites is empty"));
    }
    let suites: Vec<VerifySuite> = verify
        .suites
        .iter()
        .map(|s| s.parse().map_err(CmdError::config))
        .collect::<Result<_, _>>()?;

    let mut text = String::new();
    writeln!(text, "# schema=rmab-verify-v1").unwrap();
    writeln!(text, "{}", timestamp_comment()).unwrap();
    writeln!(text, "# seed={}", verify.params.seed).unwrap();
    writeln!(text, "suite,trials,failures,result,notes").unwrap();
    let mut any_failed = false;
    let mut failure_comments = Vec::new();
    for suite in suites {
        let report = run_suite(suite, &verify.params);
        let result = if report.passed() { "pass" } else { "fail" };
        writeln!(
            text,
            "{}",
            csv_row(&[
                report.suite.clone(),
                report.trials.to_string(),
                report.failures.to_string(),
                result.to_string(),
                report.notes.clone(),
            ])
        )
        .unwrap();
        if !report.passed() {
            any_failed = true;
            if let Some(detail) = &report.first_failure {
                failure_comments.push(format!("# failure({}): {detail}", report.suite));
            }
        }
    }
    for comment in failure_comments {
        writeln!(text, "{comment}").unwrap();
    }
    Ok(CmdOutput {
        text,
        exit: if any_failed {
            EXIT_VERIFICATION
        } else {
            EXIT_OK
        },
    })
}

/// Cartesian sweep over the declared grids: one solve+check row per point.
/// Grids vary row-major in declaration order (the last grid fastest);
/// rows are emitted in that order regardless of scheduling.
pub fn cmd_sweep(raw: &Value) -> Result<CmdOutput, CmdError> {
    let config = config::typed(raw).map_err(CmdError::config)?;
    if config.sweep.is_empty() {
        return Err(CmdError::config("config has no `sweep` grids"));
    }
    let sizes: Vec<usize> = config.sweep.iter().map(|g| g.values.len()).collect();
    if sizes.contains(&0) {
        return Err(CmdError::config("sweep grid with no values"));
    }
    let total: usize = sizes.iter().product();
    let base_id = config.instance_id();

    let rows: Vec<Result<String, CmdError>> = (0..total)
        .into_par_iter()
        .map(|index| {
            let mut point = raw.clone();
            let mut code = index;
            for (grid, &size) in config.sweep.iter().zip(&sizes).rev() {
                let value = grid.values[code % size].clone();
                config::set_path(&mut point, &grid.path, value).map_err(CmdError::config)?;
                code /= size;
            }
            let point_config = config::typed(&point).map_err(CmdError::config)?;
            solve_row(&point_config, &format!("{base_id}-s{index:04}"))
        })
        .collect();

    let mut text = String::new();
    writeln!(text, "# schema=rmab-solve-v1").unwrap();
    writeln!(text, "{}", timestamp_comment()).unwrap();
    writeln!(text, "# seed={}", config.seed).unwrap();
    writeln!(
        text,
        "# sweep over {} grid(s), {total} points",
        config.sweep.len()
    )
    .unwrap();
    writeln!(text, "{SOLVE_HEADER}").unwrap();
    for row in rows {
        writeln!(text, "{}", row?).unwrap();
    }
    Ok(CmdOutput {
        text,
        exit: EXIT_OK,
    })
}
