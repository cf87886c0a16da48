//! Randomized replication study: resample subsystem outputs, then compare
//! the Pareto control policy against the enumerated average-cost optimum
//! and against the utopia-distance metric ρ.
//!
//! Replication `r` (1-based) draws from `ChaCha8Rng::seed_from_u64(master ^ r)`.
//! Outputs are drawn in `(subsystem, state, action, next state)` order;
//! transition rows, when randomized, are drawn afterwards in
//! `(subsystem, state, action)` order as normalized exponentials (uniform on
//! the simplex).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::avgcost::{enumerate_and_rank, evaluate_policy, Objective};
use crate::error::{Error, Result};
use crate::model::{lift_policy, CompositeSystem, Policy};
use crate::norm::Norm;
use crate::pareto::{pareto_policy_from_table, stacked_costs, utopia_from_table};
use crate::scenario::paper::paper_example;
use crate::stage::StageTable;

/// Violation threshold for both `ΔJ` and `Δρ`.
pub const VIOLATION_TOL: f64 = 1e-9;

/// `ρ^π = ‖f^π − f^s‖` with `f` stacked state-major, subsystem-minor.
pub fn rho(sys: &CompositeSystem, policy: &Policy, norm: Norm) -> Result<f64> {
    let table = StageTable::build(sys)?;
    let utopia = utopia_from_table(&table);
    Ok(rho_from_table(&table, &utopia, &policy.to_composite(sys)?, norm))
}

fn rho_from_table(table: &StageTable, utopia: &[f64], policy: &crate::model::CompositePolicy, norm: Norm) -> f64 {
    let f = stacked_costs(table, policy);
    let diff: Vec<f64> = f.iter().zip(utopia).map(|(a, b)| a - b).collect();
    norm.apply(&diff)
}

type Tensor<T> = Vec<Vec<Vec<T>>>;

/// Uniform sampling interval for every output entry, `[i][x][u][x']`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRanges {
    ranges: Vec<Tensor<(f64, f64)>>,
}

impl OutputRanges {
    /// One interval per (subsystem, action), shared by all states.
    pub fn per_action(sys: &CompositeSystem, ranges: &[Vec<(f64, f64)>]) -> Result<Self> {
        if ranges.len() != sys.num_subsystems() {
            return Err(Error::Config(format!("{} range lists for {} subsystems", ranges.len(), sys.num_subsystems())));
        }
        let mut out = Vec::new();
        for (s, r) in sys.subsystems().iter().zip(ranges) {
            if r.len() != s.num_actions() {
                return Err(Error::Config(format!("{} ranges for {} actions", r.len(), s.num_actions())));
            }
            out.push(vec![r.iter().map(|&iv| vec![iv; s.num_states()]).collect(); s.num_states()]);
        }
        let o = Self { ranges: out };
        o.check()?;
        Ok(o)
    }

    /// Degenerate intervals pinned at the system's current outputs.
    pub fn exact(sys: &CompositeSystem) -> Self {
        Self {
            ranges: sys
                .subsystems()
                .iter()
                .map(|s| {
                    s.output_tensor()
                        .into_iter()
                        .map(|per_x| per_x.into_iter().map(|row| row.into_iter().map(|y| (y, y)).collect()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    /// Multiplicative band `[y (1 − spread), y (1 + spread)]` around every
    /// current output, `0 <= spread < 1`.
    pub fn around(sys: &CompositeSystem, spread: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&spread) {
            return Err(Error::Config(format!("spread must be in [0, 1), got {spread}")));
        }
        let mut out = Self::exact(sys);
        for iv in out.ranges.iter_mut().flatten().flatten().flatten() {
            *iv = (iv.0 * (1.0 - spread), iv.1 * (1.0 + spread));
        }
        out.check()?;
        Ok(out)
    }

    fn check(&self) -> Result<()> {
        for (lo, hi) in self.ranges.iter().flatten().flatten().flatten() {
            if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo <= hi) {
                return Err(Error::Config(format!("output range [{lo}, {hi}] must be finite with 0 < lo <= hi")));
            }
        }
        Ok(())
    }

    fn check_shape(&self, sys: &CompositeSystem) -> Result<()> {
        let ok = self.ranges.len() == sys.num_subsystems()
            && self.ranges.iter().zip(sys.subsystems()).all(|(r, s)| {
                r.len() == s.num_states()
                    && r.iter().all(|per_u| per_u.len() == s.num_actions() && per_u.iter().all(|row| row.len() == s.num_states()))
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Config("output ranges do not match the system's dimensions".into()))
        }
    }

    pub fn contains(&self, sys: &CompositeSystem) -> bool {
        sys.subsystems().iter().zip(&self.ranges).all(|(s, r)| {
            let out = s.output_tensor();
            out.iter().flatten().flatten().zip(r.iter().flatten().flatten()).all(|(y, (lo, hi))| lo <= y && y <= hi)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationConfig {
    pub reps: usize,
    pub output_ranges: OutputRanges,
    pub master_seed: u64,
    pub randomize_transitions: bool,
    pub norm: Norm,
    pub histogram_bins: usize,
}

impl ReplicationConfig {
    /// 1000 replications on the built-in system with outputs drawn from
    /// U(1,3) / U(8,10) for subsystem 1 actions a / b and U(2,4) / U(9,12)
    /// for subsystem 2.
    pub fn paper_default(master_seed: u64) -> Self {
        let sys = paper_example();
        Self {
            reps: 1000,
            output_ranges: OutputRanges::per_action(&sys, &[vec![(1.0, 3.0), (8.0, 10.0)], vec![(2.0, 4.0), (9.0, 12.0)]])
                .expect("built-in ranges"),
            master_seed,
            randomize_transitions: false,
            norm: Norm::Euclidean,
            histogram_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub seed: u64,
    pub pareto_policy_id: Option<usize>,
    pub optimal_policy_id: usize,
    pub j_pareto: f64,
    pub j_opt: f64,
    pub dj: f64,
    pub rho_pareto: f64,
    pub rho_opt: f64,
    pub drho: f64,
    pub argmin_rho_is_pareto: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub records: Vec<ReplicationRecord>,
    /// `(rep, error)` for replications whose sampled system was rejected.
    pub skipped: Vec<(usize, String)>,
    pub dj_violations: usize,
    pub drho_violations: usize,
    pub rho_argmin_mismatches: usize,
    #[serde(skip)]
    pub histogram_bins: usize,
}

impl ReplicationReport {
    pub fn violations(&self) -> usize {
        self.dj_violations + self.drho_violations
    }

    /// `rep,seed,J_pareto,J_opt,dJ,rho_pareto,rho_opt,drho,argmin_rho_is_pareto`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rep,seed,J_pareto,J_opt,dJ,rho_pareto,rho_opt,drho,argmin_rho_is_pareto\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.rep, r.seed, r.j_pareto, r.j_opt, r.dj, r.rho_pareto, r.rho_opt, r.drho, r.argmin_rho_is_pareto
            );
        }
        out
    }

    /// `bin_lo,bin_hi,count_dJ,count_drho` over a shared range covering
    /// both differences and zero.
    pub fn histogram_csv(&self) -> String {
        let bins = self.histogram_bins.max(1);
        let values = self.records.iter().flat_map(|r| [r.dj, r.drho]);
        let lo = values.clone().fold(0.0, f64::min);
        let mut hi = values.fold(0.0, f64::max);
        if hi - lo < VIOLATION_TOL {
            hi = lo + VIOLATION_TOL;
        }
        let width = (hi - lo) / bins as f64;
        let bin_of = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
        let mut dj = vec![0usize; bins];
        let mut drho = vec![0usize; bins];
        for r in &self.records {
            dj[bin_of(r.dj)] += 1;
            drho[bin_of(r.drho)] += 1;
        }
        let mut out = String::from("bin_lo,bin_hi,count_dJ,count_drho\n");
        for b in 0..bins {
            let _ = writeln!(out, "{},{},{},{}", lo + width * b as f64, lo + width * (b + 1) as f64, dj[b], drho[b]);
        }
        out
    }
}

pub fn replication_seed(master: u64, rep: usize) -> u64 {
    master ^ rep as u64
}

/// Samples the system for one replication.
pub fn sample_system(base: &CompositeSystem, config: &ReplicationConfig, seed: u64) -> Result<CompositeSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subsystems: Vec<_> = base
        .subsystems()
        .iter()
        .zip(&config.output_ranges.ranges)
        .map(|(s, ranges)| {
            let output = ranges
                .iter()
                .map(|per_u| {
                    per_u
                        .iter()
                        .map(|row| row.iter().map(|&(lo, hi)| if lo < hi { rng.random_range(lo..hi) } else { lo }).collect())
                        .collect()
                })
                .collect();
            s.with_output(output)
        })
        .collect::<Result<Vec<_>>>()?;
    if config.randomize_transitions {
        subsystems = subsystems
            .into_iter()
            .map(|s| {
                let transition = (0..s.num_states())
                    .map(|_| {
                        (0..s.num_actions())
                            .map(|_| {
                                let w: Vec<f64> = (0..s.num_states()).map(|_| Exp1.sample(&mut rng)).collect();
                                let total: f64 = w.iter().sum();
                                w.into_iter().map(|x: f64| x / total).collect()
                            })
                            .collect()
                    })
                    .collect();
                s.with_transition(transition)
            })
            .collect::<Result<Vec<_>>>()?;
    }
    base.with_subsystems(subsystems)
}

fn run_one(base: &CompositeSystem, config: &ReplicationConfig, rep: usize) -> Result<ReplicationRecord> {
    let seed = replication_seed(config.master_seed, rep);
    let sys = sample_system(base, config, seed)?;
    let table = StageTable::build(&sys)?;
    let report = pareto_policy_from_table(&sys, &table)?;
    let pareto_eval = evaluate_policy(&sys, &Policy::Composite(report.policy.clone()))?;
    let ranked = enumerate_and_rank(&sys, Objective::System)?;
    let best = ranked.best();
    let utopia = utopia_from_table(&table);
    let rhos = ranked
        .evaluations
        .iter()
        .map(|e| match &e.policy {
            Policy::Factored(p) => Ok(rho_from_table(&table, &utopia, &lift_policy(p, &sys)?, config.norm)),
            Policy::Composite(p) => Ok(rho_from_table(&table, &utopia, p, config.norm)),
        })
        .collect::<Result<Vec<_>>>()?;
    let rho_pareto = rho_from_table(&table, &utopia, &report.policy, config.norm);
    let rho_opt = rhos[ranked.ranking[0]];
    let min_rho = rhos.iter().copied().fold(f64::INFINITY, f64::min);
    let j_pareto = pareto_eval.j_system;
    let j_opt = best.j_system;
    Ok(ReplicationRecord {
        rep,
        seed,
        pareto_policy_id: report.policy_id,
        optimal_policy_id: best.policy_id.expect("factored"),
        j_pareto,
        j_opt,
        dj: j_pareto - j_opt,
        rho_pareto,
        rho_opt,
        drho: (rho_pareto - rho_opt).abs(),
        argmin_rho_is_pareto: rho_pareto <= min_rho + 1e-12,
    })
}

/// Runs the study on the built-in system.
pub fn replicate(config: &ReplicationConfig) -> Result<ReplicationReport> {
    replicate_on(&paper_example(), config)
}

pub fn replicate_on(base: &CompositeSystem, config: &ReplicationConfig) -> Result<ReplicationReport> {
    if config.reps == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    config.output_ranges.check()?;
    config.output_ranges.check_shape(base)?;
    let outcomes: Vec<Result<ReplicationRecord>> = (1..=config.reps).into_par_iter().map(|r| run_one(base, config, r)).collect();
    let mut records = Vec::with_capacity(config.reps);
    let mut skipped = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(rec) => records.push(rec),
            Err(e) => skipped.push((r + 1, e.to_string())),
        }
    }
    let dj_violations = records.iter().filter(|r| r.dj > VIOLATION_TOL).count();
    let drho_violations = records.iter().filter(|r| r.drho > VIOLATION_TOL).count();
    let rho_argmin_mismatches = records.iter().filter(|r| !r.argmin_rho_is_pareto).count();
    Ok(ReplicationReport {
        records,
        skipped,
        dj_violations,
        drho_violations,
        rho_argmin_mismatches,
        histogram_bins: config.histogram_bins,
    })
}
