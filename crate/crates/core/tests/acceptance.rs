//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_GAPS` are expected to fail; the process exits
//! nonzero if any other criterion fails or if a known gap starts passing.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use qubo_dr::bounds::{dr_lower_bound, max_dist_lower_bound_values, min_dist_upper_bound_values};
use qubo_dr::eval::{
    run_experiment, write_csv, ExperimentConfig, ExperimentReport, PolicyConfig, ReportRow,
    SamplerConfig, SuiteConfig,
};
use qubo_dr::metrics::{dynamic_range, max_coeff_ratio, ValueSet};
use qubo_dr::problems::{generate_suite, Family, ProblemInstance};
use qubo_dr::qubo::{optimum_included, solve_exhaustive, DEFAULT_EXHAUSTIVE_CAP};
use qubo_dr::search::{BnbConfig, IndexMode, Policy, Reducer};
use qubo_dr::{Assignment, QuboMatrix};

const KNOWN_GAPS: &[u32] = &[5, 11];

/// Family of the n = 8 reference suite.
const SUITE_FAMILY: Family = Family::BinClustering;

const DR_TOL: f64 = 0.005;
const CMAX_REL_TOL: f64 = 1e-9;
const PARALLEL_JOBS: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn dr0(q: &QuboMatrix) -> f64 {
    ValueSet::from_matrix(q).dynamic_range().unwrap_or(0.0)
}

fn suites(n: usize, count: usize) -> Vec<SuiteConfig> {
    Family::ALL
        .iter()
        .map(|&family| SuiteConfig {
            family,
            n,
            count,
            seed: 0,
        })
        .collect()
}

fn config(suites: Vec<SuiteConfig>, policies: Vec<PolicyConfig>, horizons: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig {
        suites,
        policies,
        horizons,
        jobs: PARALLEL_JOBS,
        ..ExperimentConfig::default()
    }
}

fn bnb(rollout_depth: usize, update_depth: usize, mode: IndexMode) -> PolicyConfig {
    PolicyConfig::new(
        Policy::BranchAndBound {
            rollout_depth,
            update_depth,
        },
        mode,
    )
}

fn rollout(mode: IndexMode) -> PolicyConfig {
    PolicyConfig::new(
        Policy::RolloutSelection {
            top_k: None,
            truncation: None,
        },
        mode,
    )
}

fn rows_for<'a>(report: &'a ExperimentReport, label: &str, mode: IndexMode) -> Vec<&'a ReportRow> {
    report
        .rows
        .iter()
        .zip(row_modes(report))
        .filter(|(r, m)| r.row.policy == label && *m == mode)
        .map(|(r, _)| &r.row)
        .collect()
}

/// Index mode of each row, following the task order of the report.
fn row_modes(report: &ExperimentReport) -> Vec<IndexMode> {
    let c = &report.config;
    let per_instance: Vec<IndexMode> = c
        .policies
        .iter()
        .flat_map(|p| c.horizons.iter().map(move |_| p.index_mode))
        .collect();
    let mut out = Vec::new();
    for s in &c.suites {
        for _ in 0..s.count {
            if c.include_original {
                out.push(IndexMode::default());
            }
            out.extend(per_instance.iter().copied());
        }
    }
    out
}

fn csv_bytes(report: &ExperimentReport) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(report, &mut buf).unwrap();
    buf
}

fn cmax_holds(q: &QuboMatrix) -> bool {
    match (max_coeff_ratio(q), dynamic_range(q)) {
        (Ok(c), Ok(dr)) => c <= dr.exp2() * (1.0 + CMAX_REL_TOL),
        _ => true,
    }
}

/// Counts matrices checked and violations of the coefficient-ratio invariant.
#[derive(Default)]
struct CmaxLedger {
    checked: usize,
    violations: usize,
}

impl CmaxLedger {
    fn check(&mut self, q: &QuboMatrix) {
        self.checked += 1;
        if !cmax_holds(q) {
            self.violations += 1;
        }
    }

    fn check_report(&mut self, report: &ExperimentReport) {
        for r in &report.rows {
            for q in r.trace.to_trace().states().unwrap() {
                self.check(&q);
            }
        }
    }
}

fn example_q() -> QuboMatrix {
    QuboMatrix::from_dense(&[vec![0.8, -1.5], vec![0.0, -1000.0]]).unwrap()
}

fn example_q_prime() -> QuboMatrix {
    QuboMatrix::from_dense(&[vec![0.8, -1.5], vec![0.0, -2.0]]).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let q = example_q();
    let qp = example_q_prime();
    let dr = dynamic_range(&q).unwrap();
    let drp = dynamic_range(&qp).unwrap();
    let a = solve_exhaustive(&q).unwrap();
    let b = solve_exhaustive(&qp).unwrap();
    let included = optimum_included(&q, &qp).unwrap();
    let elapsed = start.elapsed();
    let both_ones = Assignment(vec![true, true]);
    let pass = (dr - 10.289).abs() <= DR_TOL
        && (drp - 2.485).abs() <= DR_TOL
        && a.optimizers == vec![both_ones.clone()]
        && b.optimizers == vec![both_ones]
        && included
        && within(elapsed, Duration::from_millis(1));
    outcome(
        pass,
        format!("DR {dr:.4} -> {drp:.4}, included {included}, {elapsed:?}"),
    )
}

fn criterion_2() -> Outcome {
    let values = ValueSet::from_matrix(&example_q_prime());
    let v = values.values();
    let got = [
        max_dist_lower_bound_values(v, 1).unwrap(),
        min_dist_upper_bound_values(v, 1).unwrap(),
        max_dist_lower_bound_values(v, 2).unwrap(),
        min_dist_upper_bound_values(v, 2).unwrap(),
    ];
    outcome(got == [2.0, 0.8, 0.8, 2.0], format!("bounds {got:?}"))
}

/// Visits every node of the action tree below `q` to depth `depth`.
fn walk_tree(
    reducer: &Reducer,
    q: &QuboMatrix,
    depth: usize,
    max_depth: usize,
    visit: &mut impl FnMut(&QuboMatrix, usize),
) {
    visit(q, depth);
    if depth == max_depth {
        return;
    }
    let moves = reducer.ranked_moves(q).unwrap();
    for m in moves.iter() {
        walk_tree(reducer, &m.apply(q), depth + 1, max_depth, visit);
    }
}

fn mixed_instance(i: usize, sizes: &[usize]) -> ProblemInstance {
    let family = Family::ALL[i % Family::ALL.len()];
    let n = sizes[(i / Family::ALL.len()) % sizes.len()];
    ProblemInstance::random(family, n, i as u64).unwrap()
}

fn criterion_3(cmax: &mut CmaxLedger) -> Outcome {
    let start = Instant::now();
    let mut leaves = 0usize;
    let mut violations = 0usize;
    for i in 0..200 {
        let q = mixed_instance(i, &[4, 5, 6]).matrix;
        let bounds: Vec<f64> = (0..=3).map(|t| dr_lower_bound(&q, t).unwrap_or(0.0)).collect();
        let reducer = Reducer::new(IndexMode::All);
        walk_tree(&reducer, &q, 0, 3, &mut |node, depth| {
            cmax.check(node);
            if depth >= 1 {
                leaves += 1;
                if bounds[depth] > dr0(node) {
                    violations += 1;
                }
            }
        });
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && within(elapsed, Duration::from_secs(300)),
        format!("{leaves} leaves over T=1..3, {violations} violations, {elapsed:.1?}"),
    )
}

fn criterion_4(cmax: &mut CmaxLedger) -> Outcome {
    let start = Instant::now();
    let policies = [
        Policy::Base,
        Policy::RandomizedBase { top_k: 4, seed: 7 },
        Policy::RolloutSelection {
            top_k: None,
            truncation: None,
        },
        Policy::BranchAndBound {
            rollout_depth: 6,
            update_depth: 1,
        },
    ];
    let mut traces = 0usize;
    let mut steps = 0usize;
    let mut violations = 0usize;
    for family in Family::ALL {
        for inst in generate_suite(family, 12, 100, 0).unwrap() {
            // sizes 4..=12
            let n = 4 + (inst.seed as usize % 9);
            let inst = ProblemInstance::random(family, n, inst.seed).unwrap();
            let reducer = Reducer::new(IndexMode::Impact);
            for p in &policies {
                let trace = reducer.run(&inst.matrix, p, 8).unwrap().best_trace;
                traces += 1;
                steps += trace.len();
                for q in trace.states().unwrap() {
                    cmax.check(&q);
                }
                if trace.verify(DEFAULT_EXHAUSTIVE_CAP).unwrap().is_some() {
                    violations += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && within(elapsed, Duration::from_secs(600)),
        format!("{traces} traces, {steps} steps, {violations} violations, {elapsed:.1?}"),
    )
}

fn criterion_5(report: &ExperimentReport, elapsed: Duration) -> Outcome {
    let base = rows_for(report, "base", IndexMode::Impact);
    let roll = rows_for(report, "rollout", IndexMode::Impact);
    let le = base.iter().zip(&roll).filter(|(b, r)| r.dr_final <= b.dr_final).count();
    let strict = base.iter().zip(&roll).filter(|(b, r)| r.dr_final < b.dr_final).count();
    let total = base.len();
    outcome(
        total == 100 && le == total && 2 * strict >= total && within(elapsed, Duration::from_secs(600)),
        format!("rollout <= base on {le}/{total}, strictly better on {strict}/{total}, {elapsed:.1?}"),
    )
}

fn criterion_6(report: &ExperimentReport, cmax: &mut CmaxLedger) -> Outcome {
    let start = Instant::now();
    let c = &report.config;
    let instances: Vec<ProblemInstance> = c
        .suites
        .iter()
        .flat_map(|s| generate_suite(s.family, s.n, s.count, s.seed).unwrap())
        .collect();
    let mut mismatches = 0usize;
    let mut counter_changes = 0usize;
    let mut pruned = 0u64;
    for (inst, row) in instances.iter().zip(&report.rows) {
        let q = &inst.matrix;
        let reducer = Reducer::new(IndexMode::All);
        let mut oracle = f64::INFINITY;
        walk_tree(&reducer, q, 0, 3, &mut |node, _| {
            cmax.check(node);
            oracle = oracle.min(dr0(node));
        });
        let mut cfg = BnbConfig::new(3, 0);
        let with = reducer.branch_and_bound(q, &cfg).unwrap();
        cfg.use_bounds = false;
        let without = reducer.branch_and_bound(q, &cfg).unwrap();
        if with.final_dr() != oracle || without.final_dr() != oracle || row.row.dr_final != oracle {
            mismatches += 1;
        }
        if without.nodes_pruned != 0 {
            mismatches += 1;
        }
        if (with.nodes_expanded, with.nodes_pruned) != (without.nodes_expanded, without.nodes_pruned) {
            counter_changes += 1;
        }
        pruned += with.nodes_pruned;
    }
    let elapsed = start.elapsed();
    outcome(
        instances.len() == 50
            && mismatches == 0
            && pruned > 0
            && within(elapsed, Duration::from_secs(300)),
        format!(
            "{} instances, {mismatches} optimum mismatches, counters differ on {counter_changes}, {pruned} nodes pruned, {elapsed:.1?}",
            instances.len()
        ),
    )
}

fn criterion_7(report: &ExperimentReport) -> Outcome {
    let labels: Vec<String> = (0..=3)
        .map(|d| format!("bnb_r{}_u1", 6 - d))
        .collect();
    let columns: Vec<Vec<&ReportRow>> = labels
        .iter()
        .map(|l| rows_for(report, l, IndexMode::Impact))
        .collect();
    let total = columns[0].len();
    let mut violations = 0usize;
    let mut improved = 0usize;
    for i in 0..total {
        let drs: Vec<f64> = columns.iter().map(|c| c[i].dr_final).collect();
        if drs.windows(2).any(|w| w[1] > w[0]) {
            violations += 1;
        }
        if drs[3] < drs[0] {
            improved += 1;
        }
    }
    outcome(
        total == 30 && violations == 0,
        format!("{total} instances, {violations} increases, depth 3 beats depth 0 on {improved}"),
    )
}

fn mean_reduction(rows: &[&ReportRow]) -> f64 {
    rows.iter().map(|r| r.rel_reduction).sum::<f64>() / rows.len() as f64
}

fn criterion_8(report: &ExperimentReport) -> Outcome {
    let reduction = |mode: IndexMode, family: Option<Family>| {
        let rows: Vec<&ReportRow> = rows_for(report, "rollout", mode)
            .into_iter()
            .filter(|r| family.map_or(true, |f| r.family == f))
            .collect();
        mean_reduction(&rows)
    };
    let all = reduction(IndexMode::All, Some(SUITE_FAMILY));
    let impact = reduction(IndexMode::Impact, Some(SUITE_FAMILY));
    let pooled_gap = reduction(IndexMode::All, None) - reduction(IndexMode::Impact, None);
    let instances: Vec<QuboMatrix> = Family::ALL
        .iter()
        .flat_map(|&f| generate_suite(f, 16, 5, 0).unwrap())
        .map(|i| i.matrix)
        .collect();
    let time = |mode: IndexMode| {
        let start = Instant::now();
        for q in &instances {
            Reducer::new(mode).rollout_selection(q, 10, None, None).unwrap();
        }
        start.elapsed()
    };
    let t_all = time(IndexMode::All);
    let t_impact = time(IndexMode::Impact);
    let ratio = t_all.as_secs_f64() / t_impact.as_secs_f64();
    outcome(
        (all - impact).abs() <= 0.02 && ratio >= 3.0,
        format!(
            "mean reduction all {:.2}% impact {:.2}% (all families gap {:.2} points), n=16 time all {t_all:.2?} impact {t_impact:.2?} ({ratio:.1}x)",
            100.0 * all,
            100.0 * impact,
            100.0 * pooled_gap
        ),
    )
}

fn criterion_9(report: &ExperimentReport) -> Outcome {
    let mean = |family: Family| {
        let rows: Vec<&ReportRow> = report.rows().filter(|r| r.family == family).collect();
        rows.iter().map(|r| r.pruned_fraction).sum::<f64>() / rows.len() as f64
    };
    let others: Vec<String> = Family::ALL
        .iter()
        .filter(|&&f| f != SUITE_FAMILY)
        .map(|&f| format!("{f} {:.3}", mean(f)))
        .collect();
    let main = mean(SUITE_FAMILY);
    outcome(
        main > 0.2,
        format!("mean pruned fraction {main:.3} (other families: {})", others.join(", ")),
    )
}

fn criterion_10(report: &ExperimentReport) -> Outcome {
    let original = rows_for(report, "original", IndexMode::default());
    let compressed = rows_for(report, "rollout", IndexMode::Impact);
    let mut wins = 0usize;
    for (o, c) in original.iter().zip(&compressed) {
        let (Some(mo), Some(mc), Some(no), Some(nc)) =
            (o.median_rel_energy, c.median_rel_energy, o.n_opt, c.n_opt)
        else {
            continue;
        };
        if mc <= mo && nc >= no {
            wins += 1;
        }
    }
    let mixed: usize = report.rows().filter_map(|r| r.mixed_sign).sum();
    outcome(
        original.len() == 10 && wins >= 8,
        format!(
            "compressed at least as good on {wins}/{}, {mixed} samples with energy of opposite sign to the optimum",
            original.len()
        ),
    )
}

fn criterion_11(cmax: &CmaxLedger, report: &ExperimentReport) -> Outcome {
    let reduced = |family: Family| {
        let rows: Vec<&ReportRow> = rows_for(report, "rollout", IndexMode::Impact)
            .into_iter()
            .filter(|r| r.family == family)
            .collect();
        let count = rows
            .iter()
            .filter(|r| matches!((r.cmax_initial, r.cmax_final), (Some(a), Some(b)) if b < a))
            .count();
        (count, rows.len())
    };
    let (count, total) = reduced(SUITE_FAMILY);
    let others: Vec<String> = Family::ALL
        .iter()
        .filter(|&&f| f != SUITE_FAMILY)
        .map(|&f| {
            let (c, t) = reduced(f);
            format!("{f} {c}/{t}")
        })
        .collect();
    outcome(
        cmax.violations == 0 && total > 0 && 5 * count >= 4 * total,
        format!(
            "{} matrices checked, {} violations, C_max reduced on {count}/{total} (other families: {})",
            cmax.checked,
            cmax.violations,
            others.join(", ")
        ),
    )
}

fn criterion_12(reports: &[&ExperimentReport]) -> Outcome {
    let mut differing = 0usize;
    for report in reports {
        let mut serial = report.config.clone();
        serial.jobs = 1;
        let again = run_experiment(&serial).unwrap();
        let same = csv_bytes(report) == csv_bytes(&again)
            && serde_json::to_string(&report.rows).unwrap() == serde_json::to_string(&again.rows).unwrap();
        if !same {
            differing += 1;
        }
    }
    outcome(
        differing == 0,
        format!("{} reports rerun with 1 vs {PARALLEL_JOBS} jobs, {differing} differ", reports.len()),
    )
}

fn timed(f: impl FnOnce() -> ExperimentReport) -> (ExperimentReport, Duration) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed())
}

fn main() {
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let report_line = |id: u32, o: Outcome, results: &mut Vec<(u32, Outcome)>| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {tag}  {}", o.detail);
        results.push((id, o));
    };
    let mut cmax = CmaxLedger::default();

    report_line(1, criterion_1(), &mut results);
    report_line(2, criterion_2(), &mut results);
    report_line(3, criterion_3(&mut cmax), &mut results);
    report_line(4, criterion_4(&mut cmax), &mut results);

    let (c5, t5) = timed(|| {
        run_experiment(&config(
            vec![SuiteConfig {
                family: Family::BinClustering,
                n: 8,
                count: 100,
                seed: 0,
            }],
            vec![
                PolicyConfig::new(Policy::Base, IndexMode::Impact),
                rollout(IndexMode::Impact),
            ],
            vec![10],
        ))
        .unwrap()
    });
    cmax.check_report(&c5);
    report_line(5, criterion_5(&c5, t5), &mut results);

    let c6 = run_experiment(&config(
        Family::ALL
            .iter()
            .zip([17, 17, 16])
            .map(|(&family, count)| SuiteConfig {
                family,
                n: 4,
                count,
                seed: 0,
            })
            .collect(),
        vec![bnb(0, 1, IndexMode::All)],
        vec![3],
    ))
    .unwrap();
    cmax.check_report(&c6);
    report_line(6, criterion_6(&c6, &mut cmax), &mut results);

    let c7 = run_experiment(&config(
        suites(8, 10),
        (0..=3).map(|d| bnb(6 - d, 1, IndexMode::Impact)).collect(),
        vec![6],
    ))
    .unwrap();
    cmax.check_report(&c7);
    report_line(7, criterion_7(&c7), &mut results);

    let c8 = run_experiment(&config(
        suites(8, 100),
        vec![rollout(IndexMode::All), rollout(IndexMode::Impact)],
        vec![10],
    ))
    .unwrap();
    cmax.check_report(&c8);
    report_line(8, criterion_8(&c8), &mut results);

    let c9 = run_experiment(&config(suites(8, 100), vec![bnb(0, 2, IndexMode::Impact)], vec![6])).unwrap();
    cmax.check_report(&c9);
    report_line(9, criterion_9(&c9), &mut results);

    let mut c10_config = config(
        vec![SuiteConfig {
            family: Family::SubsetSum,
            n: 16,
            count: 10,
            seed: 0,
        }],
        vec![rollout(IndexMode::Impact)],
        vec![100],
    );
    c10_config.include_original = true;
    c10_config.sampler = Some(SamplerConfig {
        samples: 1000,
        sweeps: 1000,
        seed: 0,
        beta_range: None,
    });
    let c10 = run_experiment(&c10_config).unwrap();
    cmax.check_report(&c10);
    report_line(10, criterion_10(&c10), &mut results);

    report_line(11, criterion_11(&cmax, &c8), &mut results);
    report_line(12, criterion_12(&[&c5, &c6, &c7, &c8, &c9]), &mut results);

    let failed: BTreeSet<u32> = results.iter().filter(|(_, o)| !o.pass).map(|(id, _)| *id).collect();
    let expected: BTreeSet<u32> = KNOWN_GAPS.iter().copied().collect();
    let passed = results.len() - failed.len();
    println!("{passed}/{} criteria pass; known gaps {:?}", results.len(), KNOWN_GAPS);
    if failed != expected {
        eprintln!("unexpected acceptance outcome: failing {failed:?}, expected {expected:?}");
        std::process::exit(1);
    }
}
