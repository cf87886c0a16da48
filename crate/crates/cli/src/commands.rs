use std::fs;
use std::path::PathBuf;

use pareto_avgcost::avgcost::table_csv;
use pareto_avgcost::model::{factored_policy_count, CheckStatus, DEFAULT_ENUMERATION_CAP};
use pareto_avgcost::scenario::paper::{TABLE_SUBSYSTEM_1, TABLE_SUBSYSTEM_2, TABLE_SYSTEM, TABLE_TOL};
use pareto_avgcost::scenario::{replicate_on, OutputRanges, VIOLATION_TOL};
use pareto_avgcost::{
    enumerate_and_rank, evaluate_policy, pareto_policy, paper_example, relative_value_iteration, theorem1_audit,
    CompositePolicy, CompositeSystem, Norm, Objective, Policy, ReplicationConfig, RviOptions,
};
use serde_json::{json, Value};

use crate::Failure;

pub struct Context {
    pub name: String,
    pub builtin: bool,
    pub sys: CompositeSystem,
    pub out: PathBuf,
    pub seed: u64,
    pub norm: Norm,
    pub tol: Option<f64>,
}

impl Context {
    pub fn new(scenario: &str, out: PathBuf, seed: u64, norm: Norm, tol: Option<f64>) -> Result<Self, Failure> {
        let builtin = scenario == "paper";
        let sys = if builtin {
            paper_example()
        } else {
            let text = fs::read_to_string(scenario).map_err(|e| Failure::Usage(format!("cannot read {scenario}: {e}")))?;
            CompositeSystem::from_json_str(&text).map_err(|e| Failure::Usage(format!("cannot load {scenario}: {e}")))?
        };
        Ok(Self {
            name: scenario.to_string(),
            builtin,
            sys,
            out,
            seed,
            norm,
            tol,
        })
    }

    fn write(&self, file: &str, contents: &str) -> Result<(), Failure> {
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join(file), contents)?;
        Ok(())
    }

    fn write_json(&self, file: &str, value: &Value) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
        text.push('\n');
        self.write(file, &text)
    }
}

fn one_based(policy: &CompositePolicy, sys: &CompositeSystem) -> Vec<Vec<usize>> {
    (0..sys.num_states()).map(|m| policy.action(m).iter().map(|a| a + 1).collect()).collect()
}

pub fn validate(ctx: &Context) -> Result<bool, Failure> {
    let report = pareto_avgcost::validate(&ctx.sys);
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.checks {
        let status = match c.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "skip",
        };
        println!("{:width$}  {status}  {}", c.name, c.detail);
    }
    ctx.write_json(
        "validation.json",
        &json!({
            "scenario": ctx.name,
            "all_passed": report.all_passed(),
            "checks": report.checks,
        }),
    )?;
    Ok(report.all_passed())
}

fn require_valid(ctx: &Context) -> Result<(), Failure> {
    let report = pareto_avgcost::validate(&ctx.sys);
    let failure = report.failures().next().map(|c| format!("scenario fails check {}: {}", c.name, c.detail));
    failure.map_or(Ok(()), |msg| Err(Failure::Analytic(msg)))
}

pub fn tables(ctx: &Context, golden: bool) -> Result<bool, Failure> {
    require_valid(ctx)?;
    let table = enumerate_and_rank(&ctx.sys, Objective::System)?;
    let csv = table_csv(&table.evaluations);
    ctx.write("tables.csv", &csv)?;
    print!("{csv}");
    if !golden {
        return Ok(true);
    }
    if table.evaluations.len() != 16 || ctx.sys.num_subsystems() != 2 {
        return Err(Failure::Usage("--golden needs a scenario with two subsystems and 16 policies".into()));
    }
    let tol = ctx.tol.unwrap_or(TABLE_TOL);
    let mut ok = true;
    for (n, e) in table.evaluations.iter().enumerate() {
        let cells = [
            ("J_sub1", e.j_subsystem[0], TABLE_SUBSYSTEM_1[n]),
            ("J_sub2", e.j_subsystem[1], TABLE_SUBSYSTEM_2[n]),
            ("J_system", e.j_system, TABLE_SYSTEM[n]),
        ];
        for (name, got, expected) in cells {
            if (got - expected).abs() > tol {
                ok = false;
                println!("mismatch: policy {} {name} = {got:.6}, expected {expected} (tolerance {tol:e})", n + 1);
            }
        }
    }
    println!("golden comparison: {}", if ok { "ok" } else { "FAILED" });
    Ok(ok)
}

pub fn pareto(ctx: &Context) -> Result<bool, Failure> {
    require_valid(ctx)?;
    let report = pareto_policy(&ctx.sys)?;
    let eval = evaluate_policy(&ctx.sys, &Policy::Composite(report.policy.clone()))?;
    ctx.write("frontier.csv", &report.frontier_csv())?;
    ctx.write_json(
        "pareto.json",
        &json!({
            "scenario": ctx.name,
            "policy_id": report.policy_id,
            "policy": one_based(&report.policy, &ctx.sys),
            "J_subsystem": eval.j_subsystem,
            "J_system": eval.j_system,
            "selection_on_frontier": report.selection_on_frontier(),
            "group": report.group,
        }),
    )?;
    match report.policy_id {
        Some(id) => println!("pareto policy: {id}"),
        None => println!("pareto policy: not factored"),
    }
    println!("J_system = {}", eval.j_system);
    Ok(true)
}

pub fn dp(ctx: &Context) -> Result<bool, Failure> {
    require_valid(ctx)?;
    let opts = RviOptions {
        tol: ctx.tol.unwrap_or(RviOptions::default().tol),
        ..RviOptions::default()
    };
    let rvi = relative_value_iteration(&ctx.sys, opts)?;
    let policy_id = rvi.policy.to_factored(&ctx.sys).map(|f| f.index(&ctx.sys));
    let enumeration = if factored_policy_count(&ctx.sys) <= DEFAULT_ENUMERATION_CAP {
        let t = enumerate_and_rank(&ctx.sys, Objective::System)?;
        json!({ "policy_id": t.best().policy_id, "J_system": t.min_j() })
    } else {
        Value::Null
    };
    ctx.write_json(
        "dp.json",
        &json!({
            "scenario": ctx.name,
            "gain": rvi.gain,
            "lower": rvi.lower,
            "upper": rvi.upper,
            "iterations": rvi.iterations,
            "tol": opts.tol,
            "policy_id": policy_id,
            "policy": one_based(&rvi.policy, &ctx.sys),
            "bias": rvi.bias,
            "enumeration": enumeration,
        }),
    )?;
    println!("gain = {} in [{}, {}] after {} iterations", rvi.gain, rvi.lower, rvi.upper, rvi.iterations);
    match policy_id {
        Some(id) => println!("optimal policy: {id}"),
        None => println!("optimal policy: not factored"),
    }
    Ok(true)
}

pub fn audit(ctx: &Context) -> Result<bool, Failure> {
    require_valid(ctx)?;
    let q = vec![0.0; ctx.sys.num_states()];
    let audit = theorem1_audit(&ctx.sys, &q, ctx.norm)?;
    let tol = ctx.tol.unwrap_or(1e-9);
    ctx.write("audit.csv", &audit.to_csv())?;
    let mut summary = json!({
        "scenario": ctx.name,
        "tol": tol,
        "elementwise_all_ok": audit.elementwise_all_ok(),
        "pareto_phi_minimal": audit.pareto_phi_minimal(),
    });
    let detail = serde_json::to_value(&audit).map_err(|e| Failure::Usage(e.to_string()))?;
    if let (Value::Object(s), Value::Object(d)) = (&mut summary, detail) {
        s.extend(d);
    }
    ctx.write_json("audit.json", &summary)?;
    let pareto_id = audit.pareto_policy_id.map_or("not factored".to_string(), |id| id.to_string());
    println!(
        "pareto policy {pareto_id}: J = {}; optimum {}: J = {}; gap = {:e}",
        audit.j_pareto, audit.optimal_policy_id, audit.j_min, audit.gap
    );
    println!("phi* = {}, b* = {}, duality margin = {:e}", audit.phi_star, audit.b_star, audit.duality_margin);
    Ok(audit.gap <= tol)
}

pub fn replicate(ctx: &Context, reps: usize, randomize_transitions: bool, spread: f64) -> Result<bool, Failure> {
    require_valid(ctx)?;
    let defaults = ReplicationConfig::paper_default(ctx.seed);
    let output_ranges = if ctx.builtin {
        defaults.output_ranges.clone()
    } else {
        OutputRanges::around(&ctx.sys, spread).map_err(|e| Failure::Usage(e.to_string()))?
    };
    let config = ReplicationConfig {
        reps,
        output_ranges,
        randomize_transitions,
        norm: ctx.norm,
        ..defaults
    };
    if reps == 0 {
        return Err(Failure::Usage("--reps must be at least 1".into()));
    }
    let report = replicate_on(&ctx.sys, &config)?;
    let tol = ctx.tol.unwrap_or(VIOLATION_TOL);
    let dj = report.records.iter().filter(|r| r.dj > tol).count();
    let drho = report.records.iter().filter(|r| r.drho > tol).count();
    ctx.write("replications.csv", &report.to_csv())?;
    ctx.write("histogram.csv", &report.histogram_csv())?;
    let skipped: Vec<Value> = report.skipped.iter().map(|(r, e)| json!({ "rep": r, "error": e })).collect();
    ctx.write_json(
        "replicate.json",
        &json!({
            "scenario": ctx.name,
            "reps": reps,
            "master_seed": ctx.seed,
            "randomize_transitions": randomize_transitions,
            "norm": ctx.norm,
            "tol": tol,
            "completed": report.records.len(),
            "dJ_violations": dj,
            "drho_violations": drho,
            "rho_argmin_mismatches": report.rho_argmin_mismatches,
            "skipped": skipped,
        }),
    )?;
    println!(
        "{} replications, {} skipped; dJ violations {dj}, drho violations {drho}",
        report.records.len(),
        report.skipped.len()
    );
    Ok(dj == 0 && drho == 0)
}
