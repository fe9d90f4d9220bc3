use std::path::PathBuf;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use sgc_core::accuracy::ProcedureKind;
use sgc_core::cost::{CanteenProfile, System};
use sgc_core::cv::{self, detect_periods, CvModel, RngMode};
use sgc_core::experiments::{
    self, reference_beta, SensitivityParam, SweepParam, SweepSpec, DEFAULT_CAPACITIES,
    DEFAULT_MAX_IMPROVEMENT,
};
use sgc_core::output::{self, fmt_f64, human};
use sgc_core::rfid::{self, AllocationProblem, CorrectionPolicy};
use sgc_core::scenario::{effective_config, load_scenario, ModelConfig, Scenario};
use sgc_core::Error;

use crate::{Cli, Command, GridArgs};

const DEFAULT_MEALS: usize = 100;
const DEFAULT_CONTOUR_TARGET: f64 = 0.9;
const DEFAULT_CONTOUR_POINTS: usize = 21;
const DEFAULT_DEVIATIONS: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];

fn preset(name: &str) -> Result<CanteenProfile> {
    let found = match name {
        "baseline" => Some(CanteenProfile::baseline()),
        "enlarged" => Some(CanteenProfile::enlarged()),
        _ => experiments::typical_canteens()
            .into_iter()
            .find(|p| p.name == name),
    };
    found.ok_or_else(|| {
        Error::Usage(format!(
            "unknown canteen preset `{name}` (expected baseline, enlarged, type-i, type-ii, type-iii or type-iv)"
        ))
        .into()
    })
}

/// Swap in the preset's menu and scale, keep the scenario's economics.
fn apply_preset(profile: &CanteenProfile, preset: CanteenProfile) -> CanteenProfile {
    CanteenProfile {
        name: preset.name,
        t_types: preset.t_types,
        n_per_type: preset.n_per_type,
        f_new: preset.f_new,
        r_rotation: preset.r_rotation,
        customers: preset.customers,
        ..profile.clone()
    }
}

fn grid(args: &GridArgs, defaults: (f64, f64, f64), scenario: &mut Scenario) -> Result<Vec<f64>> {
    let s = &mut scenario.study;
    let start = *s.grid_start.insert(args.start.or(s.grid_start).unwrap_or(defaults.0));
    let end = *s.grid_end.insert(args.end.or(s.grid_end).unwrap_or(defaults.1));
    let step = *s.grid_step.insert(args.step.or(s.grid_step).unwrap_or(defaults.2));
    if !(step > 0.0) || end < start || !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) {
        return Err(Error::Usage(format!(
            "accuracy grid needs 0 <= start <= end <= 1 and step > 0 (got {start}, {end}, {step})"
        ))
        .into());
    }
    Ok(rfid::accuracy_grid(start, end, step))
}

fn policy(name: &str, max_improvement: f64) -> Result<CorrectionPolicy> {
    match name {
        "billing-only" => Ok(CorrectionPolicy::BillingOnly),
        "balanced" => Ok(CorrectionPolicy::BalancedCorrection { max_improvement }),
        other => Err(Error::Usage(format!(
            "unknown correction policy `{other}` (expected billing-only or balanced)"
        ))
        .into()),
    }
}

fn default_sweep_values(param: SweepParam) -> Result<Vec<f64>> {
    Ok(match param {
        SweepParam::T => vec![10.0, 20.0, 30.0, 40.0, 50.0],
        SweepParam::N => vec![30.0, 50.0, 70.0, 90.0, 110.0],
        SweepParam::F => vec![0.3, 1.0, 3.0],
        SweepParam::R => vec![0.0, 6.0, 12.0],
        other => {
            return Err(Error::Usage(format!(
                "sweep over {} needs --values",
                other.label()
            ))
            .into())
        }
    })
}

struct Sink {
    dir: PathBuf,
    profile: String,
    run_id: String,
}

impl Sink {
    fn write(&self, study: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self
            .dir
            .join(format!("{study}_{}_{}.csv", self.profile, self.run_id));
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(path)
    }
}

fn run_id(command: &str, scenario: &Scenario) -> String {
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update(b"\n");
    hasher.update(effective_config(scenario).as_bytes());
    hex::encode(hasher.finalize())[..12].to_string()
}

fn study_name(command: &Command) -> &'static str {
    match command {
        Command::Simulate { .. } => "simulate",
        Command::Optimize { .. } => "optimize",
        Command::Curve { .. } => "curve",
        Command::Contour { .. } => "contour",
        Command::Sweep { .. } => "sweep",
        Command::Compare { .. } => "compare",
        Command::Calibrate { .. } => "calibrate",
        Command::Sensitivity { .. } => "sensitivity",
        Command::Standardize => "standardize",
        Command::CorrectionBalance { .. } => "correction_balance",
    }
}

fn load(cli: &Cli) -> Result<Scenario> {
    let mut scenario = match &cli.scenario {
        Some(path) => load_scenario(path)?,
        None => Scenario {
            model: ModelConfig::default().resolve(None)?,
            ..Scenario::default()
        },
    };
    if let Some(name) = &cli.canteen {
        scenario.profile = apply_preset(&scenario.profile, preset(name)?);
    }
    Ok(scenario)
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut scenario = load(cli)?;
    // resolve every argument first so the run id covers the full effective input
    let plan = plan(&cli.command, &mut scenario)?;
    let study = study_name(&cli.command);
    if cli.echo_config {
        eprintln!("# effective configuration\n{}", effective_config(&scenario));
    }
    let sink = Sink {
        dir: cli.out.clone(),
        profile: scenario.profile.name.replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_"),
        run_id: run_id(study, &scenario),
    };
    execute(plan, &scenario, &sink, study)
}

enum Plan {
    Simulate { meals: usize, mode: RngMode, beta: Option<f64> },
    Optimize { target: f64 },
    Curve { grid: Vec<f64>, policy: CorrectionPolicy },
    Contour { target: f64, points: usize },
    Sweep { spec: SweepSpec },
    Compare { grid: Vec<f64> },
    Calibrate { sp_accuracy: f64 },
    Sensitivity { param: SensitivityParam, deviations: Vec<f64> },
    Standardize,
    CorrectionBalance { capacities: Vec<u32> },
}

fn plan(command: &Command, scenario: &mut Scenario) -> Result<Plan> {
    Ok(match command {
        Command::Simulate { meals, seed, beta } => {
            let s = &mut scenario.study;
            let meals = *s.meals.insert(meals.or(s.meals).unwrap_or(DEFAULT_MEALS));
            let seed = seed.or(s.seed);
            s.seed = seed;
            if let Some(b) = beta {
                scenario.model.beta = Some(*b);
            }
            Plan::Simulate {
                meals,
                mode: seed.map_or(RngMode::Deterministic, RngMode::Seeded),
                beta: scenario.model.beta,
            }
        }
        Command::Optimize { target } => {
            let s = &mut scenario.study;
            Plan::Optimize {
                target: *s.target.insert(target.or(s.target).unwrap_or(1.0)),
            }
        }
        Command::Curve {
            grid: g,
            policy: p,
            max_improvement,
        } => {
            let grid = grid(g, (0.0, 1.0, 0.05), scenario)?;
            let s = &mut scenario.study;
            let name = s
                .policy
                .insert(p.clone().or(s.policy.clone()).unwrap_or("billing-only".into()))
                .clone();
            let cap = *s.max_improvement.insert(
                max_improvement
                    .or(s.max_improvement)
                    .unwrap_or(DEFAULT_MAX_IMPROVEMENT),
            );
            Plan::Curve {
                grid,
                policy: policy(&name, cap)?,
            }
        }
        Command::Contour { target, points } => {
            let s = &mut scenario.study;
            let target = *s
                .target
                .insert(target.or(s.target).unwrap_or(DEFAULT_CONTOUR_TARGET));
            let points = *s
                .grid_points
                .insert(points.or(s.grid_points).unwrap_or(DEFAULT_CONTOUR_POINTS));
            // contours are drawn for a fixed menu
            scenario.profile.f_new = 0.0;
            Plan::Contour { target, points }
        }
        Command::Sweep {
            parameter,
            values,
            systems,
            targets,
        } => {
            let s = &mut scenario.study;
            let name = s
                .parameter
                .insert(parameter.clone().or(s.parameter.clone()).unwrap_or("F".into()))
                .clone();
            let param: SweepParam = name.parse()?;
            let values = match values.clone().or(s.values.clone()) {
                Some(v) => v,
                None => default_sweep_values(param)?,
            };
            s.values = Some(values.clone());
            let system_names = systems
                .clone()
                .or(s.systems.clone())
                .unwrap_or(vec!["rfid".into(), "cv".into()]);
            s.systems = Some(system_names.clone());
            let systems = system_names
                .iter()
                .map(|n| n.parse::<System>())
                .collect::<sgc_core::Result<Vec<_>>>()?;
            let targets = targets.clone().or(s.targets.clone()).unwrap_or(vec![1.0]);
            s.targets = Some(targets.clone());
            Plan::Sweep {
                spec: SweepSpec {
                    systems,
                    accuracy_targets: targets,
                    ..SweepSpec::new(param, values)
                },
            }
        }
        Command::Compare { grid: g } => Plan::Compare {
            grid: grid(g, (0.8, 1.0, 0.02), scenario)?,
        },
        Command::Calibrate { sp_accuracy } => {
            let s = &mut scenario.study;
            let default = scenario.model.sp_target;
            Plan::Calibrate {
                sp_accuracy: *s.sp_accuracy.insert(sp_accuracy.or(s.sp_accuracy).unwrap_or(default)),
            }
        }
        Command::Sensitivity {
            parameter,
            deviations,
        } => {
            let s = &mut scenario.study;
            let name = s
                .parameter
                .insert(parameter.clone().or(s.parameter.clone()).unwrap_or("S_label".into()))
                .clone();
            let deviations = s
                .deviations
                .insert(
                    deviations
                        .clone()
                        .or(s.deviations.clone())
                        .unwrap_or(DEFAULT_DEVIATIONS.to_vec()),
                )
                .clone();
            Plan::Sensitivity {
                param: name.parse()?,
                deviations,
            }
        }
        Command::Standardize => Plan::Standardize,
        Command::CorrectionBalance { capacities } => {
            let s = &mut scenario.study;
            Plan::CorrectionBalance {
                capacities: s
                    .capacities
                    .insert(
                        capacities
                            .clone()
                            .or(s.capacities.clone())
                            .unwrap_or(DEFAULT_CAPACITIES.to_vec()),
                    )
                    .clone(),
            }
        }
    })
}

fn percent(v: f64) -> String {
    format!("{}%", human(100.0 * v))
}

fn execute(plan: Plan, scenario: &Scenario, sink: &Sink, study: &str) -> Result<()> {
    let profile = &scenario.profile;
    let model = &scenario.model;
    let currency = &profile.currency;
    println!("profile = {}", profile.name);
    match plan {
        Plan::Simulate { meals, mode, beta } => {
            let beta = match beta {
                Some(b) => b,
                None => reference_beta(model)?,
            };
            let traj = cv::run(profile, &CvModel::from_params(model, beta), meals, mode)?;
            sink.write(study, &output::trajectory_csv(&traj)?)?;
            println!("beta = {}", fmt_f64(beta));
            println!("meals = {meals}");
            let summary = detect_periods(&traj, model.rp_window, model.rp_threshold)?;
            print!("{}", summary.to_text());
        }
        Plan::Optimize { target } => {
            let problem = AllocationProblem::for_canteen(profile, model, target);
            let result = rfid::optimal_allocation(&problem)?;
            let rows = problem.procedures.iter().enumerate().map(|(i, term)| {
                vec![
                    term.kind.to_string(),
                    fmt_f64(term.executions),
                    fmt_f64(result.per_procedure_h[i]),
                    fmt_f64(result.per_procedure_accuracy[i]),
                    fmt_f64(result.per_procedure_total[i]),
                ]
            });
            let csv = output::to_csv(
                &["procedure", "executions", "emh_per_execution", "accuracy", "emh_total"],
                rows,
            )?;
            sink.write(study, &csv)?;
            println!("target_accuracy = {}", fmt_f64(target));
            println!("achieved_accuracy = {}", fmt_f64(result.achieved_accuracy));
            println!("total_emh = {} h", human(result.total_emh));
            for (kind, total) in result.kinds.iter().zip(&result.per_procedure_total) {
                let share = if result.total_emh > 0.0 { total / result.total_emh } else { 0.0 };
                println!("{kind} = {} h ({} share)", human(*total), percent(share));
            }
            if result.total_emh > 0.0 {
                let labeling = result.total_for(ProcedureKind::Labeling) / result.total_emh;
                println!("labeling_share = {}", percent(labeling));
            }
        }
        Plan::Curve { grid, policy } => {
            let curve = rfid::cost_accuracy_curve(profile, model, &grid, policy)?;
            sink.write(study, &output::curve_csv(&curve)?)?;
            if let Some(best) = curve
                .iter()
                .min_by(|a, b| a.breakdown.total_currency().total_cmp(&b.breakdown.total_currency()))
            {
                println!(
                    "cheapest_total = {} {currency} at accuracy {}",
                    human(best.breakdown.total_currency()),
                    fmt_f64(best.target)
                );
            }
            if let Some(last) = curve.last() {
                println!(
                    "sorc_at_{} = {} h",
                    fmt_f64(last.target),
                    human(last.breakdown.sorc_emh())
                );
            }
        }
        Plan::Contour { target, points } => {
            let contour = rfid::accuracy_contour(target, points, profile, model)?;
            sink.write(study, &output::contour_csv(&contour)?)?;
            println!("f_new = 0 (contour on a fixed menu)");
            if let Some(best) = contour.iter().min_by(|a, b| a.h_sum.total_cmp(&b.h_sum)) {
                println!(
                    "cheapest_point = a_setting {} a_labeling {} ({} h)",
                    human(best.a_setting),
                    human(best.a_labeling),
                    human(best.h_sum)
                );
            }
        }
        Plan::Sweep { spec } => {
            let table = experiments::sweep(&spec, profile, model)?;
            sink.write(study, &output::sweep_csv(&table)?)?;
            if table.beta.is_finite() {
                println!("beta = {}", fmt_f64(table.beta));
            }
            let distinct = {
                let mut v = spec.values.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len()
            };
            if distinct >= 2 {
                let slopes = experiments::marginal_fit(&table)?;
                sink.write("marginal", &output::marginal_csv(&slopes)?)?;
                for s in &slopes {
                    let cost = s.cost_slope.map_or("undefined".into(), human);
                    let acc = s.accuracy_slope.map_or("undefined".into(), human);
                    println!(
                        "{} @ {}: d(emh)/d{} = {cost} h, d(accuracy)/d{} = {acc}",
                        s.system,
                        s.target,
                        table.parameter.label(),
                        table.parameter.label()
                    );
                }
            }
        }
        Plan::Compare { grid } => {
            let table = experiments::compare_systems(profile, model, &grid)?;
            sink.write(study, &output::compare_csv(&table)?)?;
            match table.rfid_cheaper_from() {
                Some(t) => println!("rfid_cheaper_from = {}", fmt_f64(t)),
                None => println!("rfid_cheaper_from = none"),
            }
            let cross: Vec<String> = table.crossovers.iter().map(|t| fmt_f64(*t)).collect();
            println!("crossovers = [{}]", cross.join(", "));
            if table.multiple_crossovers {
                println!("warning: more than one crossover above accuracy 0.6");
            }
        }
        Plan::Calibrate { sp_accuracy } => {
            let cal = cv::calibrate_beta(profile, model, sp_accuracy)?;
            let check = cv::steady_state(profile, model, cal.beta)?;
            let residual = (check.sp_mean_accuracy - sp_accuracy).abs();
            let csv = output::to_csv(
                &["target_sp_accuracy", "beta", "sp_accuracy", "residual"],
                [vec![
                    fmt_f64(sp_accuracy),
                    fmt_f64(cal.beta),
                    fmt_f64(check.sp_mean_accuracy),
                    fmt_f64(residual),
                ]],
            )?;
            sink.write(study, &csv)?;
            println!("beta = {}", fmt_f64(cal.beta));
            println!("sp_accuracy = {}", fmt_f64(check.sp_mean_accuracy));
            println!("residual = {residual:e}");
        }
        Plan::Sensitivity { param, deviations } => {
            let rows = experiments::sensitivity_study(param, &deviations, profile, model)?;
            sink.write(study, &output::sensitivity_csv(&rows)?)?;
            println!("parameter = {}", param.label());
            for r in &rows {
                match r.sp_accuracy_change {
                    Some(da) => println!(
                        "deviation {}: sp sorc {}, sp accuracy {:+.4}",
                        fmt_f64(r.deviation),
                        percent(r.sorc_change_high),
                        da
                    ),
                    None => println!(
                        "deviation {}: sorc {} at accuracy 1, {} at accuracy 0.8",
                        fmt_f64(r.deviation),
                        percent(r.sorc_change_high),
                        percent(r.sorc_change_low)
                    ),
                }
            }
        }
        Plan::Standardize => {
            let rows = experiments::standardization_study(profile, model)?;
            sink.write(study, &output::standardization_csv(&rows)?)?;
            for r in &rows {
                println!(
                    "{}: sorc saving {}, total saving {}",
                    r.system,
                    percent(r.sorc_saving),
                    percent(r.total_saving)
                );
            }
        }
        Plan::CorrectionBalance { capacities } => {
            let rows = experiments::correction_balance_study(&capacities, profile, model)?;
            sink.write(study, &output::correction_balance_csv(&rows)?)?;
            for r in &rows {
                println!(
                    "capacity {}: limit {}{}",
                    r.capacity,
                    human(r.limit),
                    if r.knee_found { "" } else { " (no knee)" }
                );
            }
            if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
                println!(
                    "limit_change = {}",
                    human(first.limit - last.limit)
                );
            }
        }
    }
    Ok(())
}
