//! Batch front end for the portfolio case: solve, simulate, compare and export.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use msmo_core::horizon::{HorizonError, HorizonRun, ResidualOutcome};
use msmo_core::lp::{self, Sense, Status};
use msmo_core::model::{dominates, Dominance, MSMOModel, MetaDecision, ModelError, ObjectiveMatrix};
use msmo_core::portfolio::{
    build_three_stage, currency_matrix, data, path_summaries, reference_point, robustness_report, solve_moving_horizon,
    solve_three_stage, summary_matrix, Money, PortfolioError, PortfolioInstance, WeightOverride,
};
use msmo_core::rgp::{scalarize, RgpError, ScalarizationResult};

pub const OUT_DIR_ENV: &str = "MSMO_OUT_DIR";

/// Objectives of the portfolio model: remaining funds and total withdrawals.
const OBJECTIVES: usize = 2;

#[derive(Debug, Parser)]
#[command(name = "msmo", version, about = "Multi-stage multi-objective portfolio planning under deep uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the instance and write solution, objective and deviation files.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Mode::ThreeStage)]
        mode: Mode,
        /// Also write the scalarized three-stage LP.
        #[arg(long)]
        export_lp: bool,
    },
    /// Solve, then replay the plan on every path and report profit robustness.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Mode::ThreeStage)]
        mode: Mode,
        /// Minimum acceptable profit, currency units.
        #[arg(long, default_value_t = 500_000)]
        threshold: i64,
    },
    /// Solve with both strategies and compare them path by path.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write the scalarized three-stage LP in LP format.
    ExportLp {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write long-format per-path objective data for attainment plots.
    ExportAttainment {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Source::All)]
        source: Source,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    ThreeStage,
    MovingHorizon,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    /// Freshly solved three-stage and moving-horizon plans.
    Solved,
    /// The published reference results bundled with the library.
    Published,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Instance file (TOML); the bundled case-study instance when omitted.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Augmentation coefficient of the scalarization.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// One weight for every meta-objective, or one per objective (`2,1`).
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    /// Enforce the instance's maximum withdrawal per stage.
    #[arg(long)]
    pub max_withdrawal: bool,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "msmo-out")]
    pub out: PathBuf,
}

/// How a finished command should exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Optimal,
    Infeasible,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Optimal => 0,
            Outcome::Infeasible => 2,
        }
    }
}

impl RunArgs {
    /// The instance with command-line overrides applied.
    pub fn load_instance(&self) -> Result<PortfolioInstance> {
        let mut inst = match &self.instance {
            Some(path) => PortfolioInstance::load(path)?,
            None => PortfolioInstance::bundled(),
        };
        if let Some(eps) = self.epsilon {
            inst.preferences.epsilon = eps;
        }
        match self.weights.as_slice() {
            [] => {}
            [w] => inst.preferences.weight = *w,
            ws if ws.len() == OBJECTIVES => {
                inst.preferences.overrides.extend(ws.iter().enumerate().map(|(i, &weight)| WeightOverride {
                    objective: Some(i + 1),
                    path: "*".into(),
                    weight,
                }));
            }
            ws => bail!("--weights takes 1 or {} values, got {}", OBJECTIVES, ws.len()),
        }
        inst.enforce_max_withdrawal |= self.max_withdrawal;
        inst.validate()?;
        Ok(inst)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("cannot create {}", self.out.display()))?;
        Ok(&self.out)
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Solve { run, mode, export_lp } => cmd_solve(&run, mode, export_lp),
        Command::Simulate { run, mode, threshold } => cmd_simulate(&run, mode, threshold),
        Command::Compare { run } => cmd_solve(&run, Mode::Compare, false),
        Command::ExportLp { run } => cmd_export_lp(&run),
        Command::ExportAttainment { run, source } => cmd_export_attainment(&run, source),
    }
}

/// A solved plan over the three-stage tree.
struct Plan {
    label: &'static str,
    model: MSMOModel,
    decision: MetaDecision,
    /// Meta-objective values in currency units.
    matrix: ObjectiveMatrix,
    /// (model description, scalarization) pairs for the deviation report.
    parts: Vec<(String, ScalarizationResult)>,
}

fn is_infeasible(e: &PortfolioError) -> bool {
    matches!(
        e,
        PortfolioError::Rgp(RgpError::NotOptimal(Status::Infeasible))
            | PortfolioError::Horizon(HorizonError::FirstStageInfeasible)
            | PortfolioError::Horizon(HorizonError::Rgp(RgpError::NotOptimal(Status::Infeasible)))
    )
}

fn three_stage_plan(inst: &PortfolioInstance) -> Result<Option<Plan>> {
    match solve_three_stage(inst) {
        Ok((model, res)) => Ok(Some(Plan {
            label: "3-stage",
            decision: res.decision.clone(),
            matrix: currency_matrix(&res.objective_matrix),
            model,
            parts: vec![("three-stage".into(), res)],
        })),
        Err(e) if is_infeasible(&e) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn moving_horizon_plan(inst: &PortfolioInstance) -> Result<(Option<Plan>, Option<HorizonRun>)> {
    let (model, run) = match solve_moving_horizon(inst) {
        Ok(r) => r,
        Err(e) if is_infeasible(&e) => return Ok((None, None)),
        Err(e) => return Err(e.into()),
    };
    let Some(decision) = run.composite.clone() else { return Ok((None, Some(run))) };
    let mut parts = vec![("first two-stage".to_string(), run.first_stage.clone())];
    for (k1, outcome) in &run.residuals {
        if let ResidualOutcome::Solved(r) = outcome {
            parts.push((format!("residual {k1}"), r.clone()));
        }
    }
    let matrix = currency_matrix(&model.evaluate(&decision)?);
    Ok((Some(Plan { label: "2x2-stage", model, decision, matrix, parts }), Some(run)))
}

fn solve_plans(inst: &PortfolioInstance, mode: Mode) -> Result<(Vec<Plan>, Vec<String>)> {
    let mut plans = Vec::new();
    let mut failures = Vec::new();
    if matches!(mode, Mode::ThreeStage | Mode::Compare) {
        match three_stage_plan(inst)? {
            Some(p) => plans.push(p),
            None => failures.push("3-stage: infeasible".to_string()),
        }
    }
    if matches!(mode, Mode::MovingHorizon | Mode::Compare) {
        match moving_horizon_plan(inst)? {
            (Some(p), _) => plans.push(p),
            (None, Some(run)) => {
                let failed: Vec<String> = run
                    .residuals
                    .iter()
                    .filter_map(|(k, o)| match o {
                        ResidualOutcome::Failed(s) => Some(format!("{k} {s:?}")),
                        ResidualOutcome::Solved(_) => None,
                    })
                    .collect();
                failures.push(format!("2x2-stage: residual models failed ({})", failed.join(", ")));
            }
            (None, None) => failures.push("2x2-stage: first two-stage model infeasible".to_string()),
        }
    }
    Ok((plans, failures))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_solve(run: &RunArgs, mode: Mode, export_lp: bool) -> Result<Outcome> {
    let inst = run.load_instance()?;
    let out = run.out_dir()?;
    write(out, "instance.toml", &inst.to_toml_string())?;
    if export_lp {
        write(out, "scalarized.lp", &scalarized_lp(&inst)?)?;
    }
    let (plans, failures) = solve_plans(&inst, mode)?;

    let mut solution = String::new();
    for f in &failures {
        writeln!(solution, "{f}")?;
    }
    for plan in &plans {
        solution.push_str(&render_solution(&inst, plan));
    }
    write(out, "solution.txt", &solution)?;
    write(out, "objectives.csv", &objectives_csv(&plans))?;
    write(out, "deviations.csv", &deviations_csv(&plans))?;
    if mode == Mode::Compare {
        write(out, "dominance.txt", &dominance_report(&plans))?;
    }
    print!("{solution}");
    for f in &failures {
        eprintln!("{f}");
    }
    Ok(if failures.is_empty() { Outcome::Optimal } else { Outcome::Infeasible })
}

fn cmd_simulate(run: &RunArgs, mode: Mode, threshold: i64) -> Result<Outcome> {
    let inst = run.load_instance()?;
    let out = run.out_dir()?;
    let (plans, failures) = solve_plans(&inst, mode)?;
    let mut text = String::new();
    for f in &failures {
        writeln!(text, "{f}")?;
    }
    for plan in &plans {
        let rows = path_summaries(&inst, &plan.model, &plan.decision);
        let report = robustness_report(&summary_matrix(&rows), Money::from_units(threshold), inst.capital())?;
        writeln!(text, "== {} ==\n{report}\n", plan.label)?;
    }
    write(out, "robustness.txt", &text)?;
    print!("{text}");
    Ok(if failures.is_empty() { Outcome::Optimal } else { Outcome::Infeasible })
}

fn scalarized_lp(inst: &PortfolioInstance) -> Result<String> {
    let model = build_three_stage(inst)?;
    let rp = reference_point(inst, &model, &[])?;
    let lp = scalarize(&model, &rp)?;
    Ok(lp::export_lp(&lp, &format!("{}: scalarized three-stage model", inst.name))?)
}

fn cmd_export_lp(run: &RunArgs) -> Result<Outcome> {
    let inst = run.load_instance()?;
    let out = run.out_dir()?;
    write(out, "scalarized.lp", &scalarized_lp(&inst)?)?;
    println!("wrote {}", out.join("scalarized.lp").display());
    Ok(Outcome::Optimal)
}

fn cmd_export_attainment(run: &RunArgs, source: Source) -> Result<Outcome> {
    let inst = run.load_instance()?;
    let out = run.out_dir()?;
    let mut matrices = Vec::new();
    let mut labels = Vec::new();
    let mut outcome = Outcome::Optimal;
    if matches!(source, Source::Published | Source::All) {
        for sol in [data::three_stage(), data::moving_horizon()] {
            matrices.push(sol.objective_matrix());
            labels.push(format!("published {}", sol.label));
        }
    }
    if matches!(source, Source::Solved | Source::All) {
        let (plans, failures) = solve_plans(&inst, Mode::Compare)?;
        for plan in plans {
            matrices.push(plan.matrix);
            labels.push(plan.label.to_string());
        }
        if !failures.is_empty() {
            outcome = Outcome::Infeasible;
        }
    }
    let csv = export_attainment(&matrices, &labels)?;
    write(out, "attainment.csv", &csv)?;
    println!("wrote {}", out.join("attainment.csv").display());
    Ok(outcome)
}

/// Fixed two-decimal rendering without negative zero.
pub fn fixed(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long-format CSV `solution_label,path_id,objective_id,value`, sorted by
/// solution label, then path, then objective. Path ids are `s1, s2, …` and
/// objective ids `Z1, Z2, …`.
pub fn export_attainment(matrices: &[ObjectiveMatrix], labels: &[String]) -> Result<String, ModelError> {
    if matrices.len() != labels.len() {
        return Err(ModelError::ShapeMismatch(format!("{} matrices but {} labels", matrices.len(), labels.len())));
    }
    if let Some(first) = matrices.first() {
        if let Some(bad) = matrices.iter().find(|m| m.m != first.m || m.column_count() != first.column_count()) {
            return Err(ModelError::ShapeMismatch(format!(
                "{}x{} versus {}x{}",
                bad.m,
                bad.column_count(),
                first.m,
                first.column_count()
            )));
        }
    }
    let mut order: Vec<usize> = (0..matrices.len()).collect();
    order.sort_by(|&a, &b| labels[a].cmp(&labels[b]).then(a.cmp(&b)));
    let mut out = String::from("solution_label,path_id,objective_id,value\n");
    for idx in order {
        let m = &matrices[idx];
        for k in 0..m.column_count() {
            for i in 0..m.m {
                let _ = writeln!(out, "{},s{},Z{},{}", csv_field(&labels[idx]), k + 1, i + 1, fixed(m.get(i, k)));
            }
        }
    }
    Ok(out)
}

fn objectives_csv(plans: &[Plan]) -> String {
    let mut out = String::from("solution,path_id,path,objective,value\n");
    for plan in plans {
        let names = plan.model.objective_names();
        for k in 0..plan.matrix.column_count() {
            for (i, name) in names.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},s{},{},{},{}",
                    plan.label,
                    k + 1,
                    csv_field(&plan.matrix.labels[k]),
                    name,
                    fixed(plan.matrix.get(i, k))
                );
            }
        }
    }
    out
}

fn deviations_csv(plans: &[Plan]) -> String {
    let mut out = String::from("solution,model,path,objective,goal,achieved,deviation\n");
    for plan in plans {
        for (part, res) in &plan.parts {
            let labels = &res.objective_matrix.labels;
            for (id, &delta) in &res.deviations {
                let achieved = res.objective_matrix.at(*id);
                // Both objectives are maximised, so the deviation is g − z.
                let goal = achieved + delta;
                let _ = writeln!(
                    out,
                    "{},{},{},Z{},{},{},{}",
                    plan.label,
                    csv_field(part),
                    csv_field(&labels[id.path]),
                    id.objective + 1,
                    fixed(goal * 1e6),
                    fixed(achieved * 1e6),
                    fixed(delta * 1e6)
                );
            }
        }
    }
    out
}

fn verdict_word(d: Dominance) -> &'static str {
    match d {
        Dominance::Dominates => "dominates",
        Dominance::DominatedBy => "is dominated by",
        Dominance::Incomparable => "is incomparable with",
        Dominance::Equal => "equals",
    }
}

/// Per-path and overall dominance between every pair of matrices.
pub fn compare_matrices(named: &[(String, ObjectiveMatrix)], senses: &[Sense]) -> Result<String, ModelError> {
    let mut out = String::new();
    for (a_idx, (a_name, a)) in named.iter().enumerate() {
        for (b_name, b) in &named[a_idx + 1..] {
            let overall = dominates(a, b, senses)?;
            let _ = writeln!(out, "{a_name} {} {b_name} overall", verdict_word(overall));
            for k in 0..a.column_count() {
                let d = dominates(&a.restrict(&[k]), &b.restrict(&[k]), senses)?;
                let _ = writeln!(out, "  {}: {a_name} {} {b_name}", a.labels[k], verdict_word(d));
            }
        }
    }
    Ok(out)
}

fn dominance_report(plans: &[Plan]) -> String {
    let senses = [Sense::Maximize; 2];
    let solved: Vec<(String, ObjectiveMatrix)> = plans.iter().map(|p| (p.label.to_string(), p.matrix.clone())).collect();
    let published: Vec<(String, ObjectiveMatrix)> = [data::three_stage(), data::moving_horizon()]
        .into_iter()
        .map(|s| (format!("published {}", s.label), s.objective_matrix()))
        .collect();
    let mut out = String::from("# solved plans\n");
    out.push_str(&compare_matrices(&solved, &senses).unwrap_or_else(|e| format!("{e}\n")));
    out.push_str("\n# published results\n");
    out.push_str(&compare_matrices(&published, &senses).unwrap_or_else(|e| format!("{e}\n")));
    out
}

fn render_solution(inst: &PortfolioInstance, plan: &Plan) -> String {
    let n = inst.n();
    let mut out = String::new();
    let money = |v: f64| Money::from_units_f64(v * 1e6).rounded_to(1).to_string();
    let _ = writeln!(out, "== {} ==", plan.label);
    let _ = writeln!(out, "initial decision (state {}), from row option to column:", inst.root_state);
    let _ = write!(out, "{:>6}", "");
    for o in &inst.options {
        let _ = write!(out, "{o:>12}");
    }
    let _ = writeln!(out, "{:>12}", "withdraw");
    let x0 = plan.decision.node(0);
    for (i, o) in inst.options.iter().enumerate() {
        let _ = write!(out, "{o:>6}");
        for j in 0..=n {
            let _ = write!(out, "{:>12}", money(x0[i * (n + 1) + j]));
        }
        out.push('\n');
    }

    let rows = path_summaries(inst, &plan.model, &plan.decision);
    let _ = writeln!(out, "\n{:<10} {:>12} {:>12} {:>12} {:>12} {:>12}", "path", "w0", "w1", "w2", "remained", "profit");
    for r in &rows {
        let w: Vec<String> = r.withdrawals.iter().map(|w| w.rounded_to(1).to_string()).collect();
        let p = msmo_core::portfolio::profit(r.remained, r.total_withdrawal(), inst.capital());
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12}",
            r.label,
            w.first().cloned().unwrap_or_default(),
            w.get(1).cloned().unwrap_or_default(),
            w.get(2).cloned().unwrap_or_default(),
            r.remained.rounded_to(1),
            p.rounded_to(1)
        );
    }

    let _ = writeln!(out, "\nnode decisions (nonzero entries):");
    let tree = plan.model.tree();
    let labels = plan.model.var_labels();
    for (idx, node) in tree.nodes().iter().enumerate() {
        let entries: Vec<String> = plan
            .decision
            .node(idx)
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() * 1e6 >= 0.5)
            .map(|(j, &v)| format!("{}={}", labels[node.stage][j], money(v)))
            .collect();
        let _ = writeln!(out, "  stage {} ({}): {}", node.stage, node.prefix.join(","), entries.join(" "));
    }
    out.push('\n');
    out
}
