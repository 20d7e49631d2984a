//! Replicated simulation studies: generate data, fit, score, aggregate.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coupling::CouplingSpec;
use crate::error::{CmtfError, Result};
use crate::metrics::{clustering_accuracy, fit_percentage, fms, fms_match, kmeans};
use crate::prox::Regularizer;
use crate::solver::{multi_init_fit, Dataset, FitResult, ProblemSpec, RunSummary, SolverConfig};
use crate::synthgen::{
    gen_experiment1, gen_experiment2, gen_experiment3_with_noise, SyntheticProblem, EXP2_CLUSTERS, EXP3_DICTIONARY_COLS,
    EXP3_SELECT_A, EXP3_SELECT_E,
};
use crate::tensor::{Decomposition, Parafac2Decomposition};

pub const DATASET_WEIGHT: f64 = 0.5;
pub const RIDGE_PENALTY: f64 = 1e-4;
pub const SMOOTHNESS_STRENGTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
        }
    }

    pub fn default_noise(self) -> f64 {
        match self {
            Experiment::Exp1 => 0.0,
            Experiment::Exp2 => 1.0,
            Experiment::Exp3 => crate::synthgen::EXP3_NOISE,
        }
    }
}

/// One model configuration of the Experiment 2 grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Exp2Variant {
    pub coupled: bool,
    pub ridge: bool,
}

impl Exp2Variant {
    pub fn label(self) -> String {
        format!(
            "{}-{}",
            if self.coupled { "coupled" } else { "uncoupled" },
            if self.ridge { "ridge" } else { "no-ridge" }
        )
    }

    pub fn grid(coupled: &[bool], ridge: &[bool]) -> Vec<Self> {
        let mut v = Vec::new();
        for &r in ridge {
            for &c in coupled {
                v.push(Exp2Variant { coupled: c, ridge: r });
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOptions {
    pub noise: f64,
    pub replicates: usize,
    pub solver: SolverConfig,
    /// Experiment 2 model grid.
    pub exp2_variants: Vec<Exp2Variant>,
    /// Experiment 3: also fit without the smoothness penalty.
    pub exp3_compare_unsmoothed: bool,
}

impl ExperimentOptions {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            noise: experiment.default_noise(),
            replicates: 20,
            solver: SolverConfig::default(),
            exp2_variants: Exp2Variant::grid(&[false, true], &[false, true]),
            exp3_compare_unsmoothed: true,
        }
    }
}

/// One table row: a replicate of one model variant, or the variant average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub variant: String,
    /// `None` on the average row.
    pub replicate: Option<usize>,
    pub data_seed: Option<u64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateDiagnostics {
    pub variant: String,
    pub replicate: usize,
    pub wall_seconds: f64,
    pub termination: crate::solver::TerminationReason,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub options: ExperimentOptions,
    pub columns: Vec<String>,
    /// Replicate rows grouped by variant, each group followed by its average.
    pub rows: Vec<ReportRow>,
    pub diagnostics: Vec<ReplicateDiagnostics>,
    /// Tidy recovered-versus-true `B_k` components (Experiment 3 only).
    #[serde(skip)]
    pub components: Option<ComponentTable>,
}

impl ExperimentReport {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Average row value of `column` for `variant`.
    pub fn average(&self, variant: &str, column: &str) -> Option<f64> {
        let c = self.column(column)?;
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.replicate.is_none())
            .map(|r| r.values[c])
    }

    pub fn variants(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.variant) {
                v.push(r.variant.clone());
            }
        }
        v
    }

    /// Writes `<name>.csv`, `<name>_summary.json` and, for Experiment 3,
    /// `<name>_components.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CmtfError::io(dir, e))?;
        let name = self.experiment.name();
        let csv_path = dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CmtfError::io(&csv_path, e))?;
        let mut header = vec!["variant".to_string(), "replicate".into(), "data_seed".into()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(|e| CmtfError::io(&csv_path, e))?;
        for row in &self.rows {
            let mut rec = vec![
                row.variant.clone(),
                row.replicate.map_or("mean".into(), |r| r.to_string()),
                row.data_seed.map_or(String::new(), |s| s.to_string()),
            ];
            rec.extend(row.values.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(|e| CmtfError::io(&csv_path, e))?;
        }
        w.flush().map_err(|e| CmtfError::io(&csv_path, e))?;

        let summary_path = dir.join(format!("{name}_summary.json"));
        let summary = Summary {
            experiment: self.experiment,
            options: &self.options,
            averages: self
                .variants()
                .into_iter()
                .map(|v| {
                    let values = self
                        .columns
                        .iter()
                        .map(|c| (c.clone(), self.average(&v, c).unwrap_or(f64::NAN)))
                        .collect();
                    (v, values)
                })
                .collect(),
            replicates: &self.diagnostics,
        };
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CmtfError::io(&summary_path, e))?;
        fs::write(&summary_path, text + "\n").map_err(|e| CmtfError::io(&summary_path, e))?;

        if let Some(table) = &self.components {
            table.write(&dir.join(format!("{name}_components.csv")))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: Experiment,
    options: &'a ExperimentOptions,
    averages: std::collections::BTreeMap<String, std::collections::BTreeMap<String, f64>>,
    replicates: &'a [ReplicateDiagnostics],
}

/// Long-format table of `B_k` columns: true and recovered values per node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComponentTable {
    pub rows: Vec<(String, usize, usize, usize, f64, f64)>,
}

impl ComponentTable {
    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CmtfError::io(path, e))?;
        w.write_record(["variant", "slice", "component", "node", "truth", "estimate"])
            .map_err(|e| CmtfError::io(path, e))?;
        for (variant, k, r, j, t, e) in &self.rows {
            w.write_record([
                variant.clone(),
                k.to_string(),
                r.to_string(),
                j.to_string(),
                format!("{t:?}"),
                format!("{e:?}"),
            ])
            .map_err(|e| CmtfError::io(path, e))?;
        }
        w.flush().map_err(|e| CmtfError::io(path, e))
    }
}

/// Seed of stream `stream` for replicate `replicate` derived from `base`.
pub fn derive_seed(base: u64, replicate: usize, stream: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = base
        .wrapping_add((replicate as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_DATA: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_KMEANS: u64 = 3;

fn datasets_with_regs(synth: &SyntheticProblem, regs: Vec<Vec<Vec<Regularizer>>>, rank: usize) -> Vec<Dataset> {
    synth
        .names
        .iter()
        .zip(&synth.datasets)
        .zip(regs)
        .map(|((name, data), r)| {
            let mut ds = Dataset::new(name.clone(), data.clone(), rank, DATASET_WEIGHT);
            ds.regularizers = r;
            ds
        })
        .collect()
}

fn parafac2_of(dec: &Decomposition) -> &Parafac2Decomposition {
    match dec {
        Decomposition::Parafac2(d) => d,
        _ => unreachable!("dataset 0 is the PARAFAC2 model"),
    }
}

fn factor(dec: &Decomposition, mode: usize) -> &Array2<f64> {
    match dec {
        Decomposition::Parafac2(d) => match mode {
            0 => &d.a,
            2 => &d.c,
            _ => unreachable!("B is scored through the stacked slices"),
        },
        Decomposition::Cp(d) => &d.factors[mode],
        Decomposition::Matrix(d) => {
            if mode == 0 {
                &d.e
            } else {
                &d.f
            }
        }
    }
}

fn fits(synth: &SyntheticProblem, fit: &FitResult) -> Result<Vec<f64>> {
    synth
        .datasets
        .iter()
        .zip(&fit.decompositions)
        .map(|(data, dec)| fit_percentage(data, &dec.reconstruct()?))
        .collect()
}

/// FMS of A, B (stacked), C of the PARAFAC2 model against `truth`.
fn parafac2_fms(truth: &Parafac2Decomposition, est: &Parafac2Decomposition) -> Result<[f64; 3]> {
    Ok([
        fms(truth.a.view(), est.a.view())?,
        fms(truth.stacked_b().view(), est.stacked_b().view())?,
        fms(truth.c.view(), est.c.view())?,
    ])
}

fn run_variant(
    problem: &ProblemSpec,
    solver: &SolverConfig,
    replicate: usize,
    base_seed: u64,
) -> Result<(FitResult, f64)> {
    let config = SolverConfig {
        seed: derive_seed(base_seed, replicate, STREAM_INIT),
        ..solver.clone()
    };
    let start = Instant::now();
    let fit = multi_init_fit(problem, &config)?;
    Ok((fit, start.elapsed().as_secs_f64()))
}

fn push_average(rows: &mut Vec<ReportRow>, variant: &str, first: usize) {
    let group = &rows[first..];
    let n = group.len() as f64;
    let cols = group.first().map_or(0, |r| r.values.len());
    let values = (0..cols)
        .map(|c| group.iter().map(|r| r.values[c]).sum::<f64>() / n)
        .collect();
    rows.push(ReportRow {
        variant: variant.to_string(),
        replicate: None,
        data_seed: None,
        values,
    });
}

fn check_options(options: &ExperimentOptions) -> Result<()> {
    if options.replicates == 0 {
        return Err(CmtfError::Validation("replicates must be positive".into()));
    }
    if !(options.noise >= 0.0) || !options.noise.is_finite() {
        return Err(CmtfError::Validation(format!("noise must be >= 0, got {}", options.noise)));
    }
    options.solver.validate()
}

pub fn run_experiment(experiment: Experiment, options: &ExperimentOptions) -> Result<ExperimentReport> {
    check_options(options)?;
    match experiment {
        Experiment::Exp1 => run_exp1(options),
        Experiment::Exp2 => run_exp2(options),
        Experiment::Exp3 => run_exp3(options),
    }
}

const EXP1_COLUMNS: [&str; 9] = [
    "fit_X", "fit_Y", "fms_A", "fms_B", "fms_C", "fms_E", "fms_F", "objective", "iterations",
];

fn exp1_problem(synth: &SyntheticProblem) -> Result<ProblemSpec> {
    let nn = || vec![Regularizer::NonNegativity];
    Ok(ProblemSpec {
        datasets: datasets_with_regs(synth, vec![vec![nn(), nn(), nn()], vec![nn(), nn()]], 3),
        coupling: Some(CouplingSpec::exact(vec![0, 1], 3)?),
    })
}

fn run_exp1(options: &ExperimentOptions) -> Result<ExperimentReport> {
    let variant = "coupled-nonneg";
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for rep in 0..options.replicates {
        let data_seed = derive_seed(options.solver.seed, rep, STREAM_DATA);
        let synth = gen_experiment1(options.noise, &mut ChaCha8Rng::seed_from_u64(data_seed))?;
        let problem = exp1_problem(&synth)?;
        let (fit, secs) = run_variant(&problem, &options.solver, rep, options.solver.seed)?;
        let [fit_x, fit_y]: [f64; 2] = fits(&synth, &fit)?.try_into().expect("two datasets");
        let truth = &synth.truth.decompositions;
        let [fa, fb, fc] = parafac2_fms(parafac2_of(&truth[0]), parafac2_of(&fit.decompositions[0]))?;
        let fe = fms(factor(&truth[1], 0).view(), factor(&fit.decompositions[1], 0).view())?;
        let ff = fms(factor(&truth[1], 1).view(), factor(&fit.decompositions[1], 1).view())?;
        rows.push(ReportRow {
            variant: variant.into(),
            replicate: Some(rep),
            data_seed: Some(data_seed),
            values: vec![
                fit_x,
                fit_y,
                fa,
                fb,
                fc,
                fe,
                ff,
                fit.final_objective(),
                fit.iterations as f64,
            ],
        });
        diagnostics.push(ReplicateDiagnostics {
            variant: variant.into(),
            replicate: rep,
            wall_seconds: secs,
            termination: fit.termination,
            runs: fit.runs,
        });
    }
    push_average(&mut rows, variant, 0);
    Ok(ExperimentReport {
        experiment: Experiment::Exp1,
        options: options.clone(),
        columns: EXP1_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        diagnostics,
        components: None,
    })
}

const EXP2_COLUMNS: [&str; 12] = [
    "fit_X",
    "fit_Y",
    "fms_A",
    "fms_A_clean",
    "fms_B",
    "fms_C",
    "fms_E",
    "fms_F",
    "accuracy_A",
    "accuracy_E",
    "objective",
    "iterations",
];

pub fn exp2_problem(synth: &SyntheticProblem, variant: Exp2Variant) -> Result<ProblemSpec> {
    let ridge = || -> Result<Vec<Regularizer>> {
        Ok(if variant.ridge {
            vec![Regularizer::ridge(RIDGE_PENALTY)?]
        } else {
            Vec::new()
        })
    };
    let with_nonneg = || -> Result<Vec<Regularizer>> {
        let mut r = vec![Regularizer::NonNegativity];
        r.extend(ridge()?);
        Ok(r)
    };
    let regs = vec![
        vec![ridge()?, ridge()?, with_nonneg()?],
        vec![ridge()?, with_nonneg()?],
    ];
    Ok(ProblemSpec {
        datasets: datasets_with_regs(synth, regs, 3),
        coupling: if variant.coupled {
            Some(CouplingSpec::exact(vec![0, 1], 3)?)
        } else {
            None
        },
    })
}

fn cluster_accuracy(factor: &Array2<f64>, labels: &[usize], seed: u64) -> Result<f64> {
    let est = kmeans(factor.view(), EXP2_CLUSTERS, &mut ChaCha8Rng::seed_from_u64(seed))?;
    clustering_accuracy(labels, &est)
}

fn run_exp2(options: &ExperimentOptions) -> Result<ExperimentReport> {
    if options.exp2_variants.is_empty() {
        return Err(CmtfError::Validation("no model variant selected".into()));
    }
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for &variant in &options.exp2_variants {
        let label = variant.label();
        let first = rows.len();
        for rep in 0..options.replicates {
            let data_seed = derive_seed(options.solver.seed, rep, STREAM_DATA);
            let synth = gen_experiment2(options.noise, &mut ChaCha8Rng::seed_from_u64(data_seed))?;
            let problem = exp2_problem(&synth, variant)?;
            let (fit, secs) = run_variant(&problem, &options.solver, rep, options.solver.seed)?;
            let [fit_x, fit_y]: [f64; 2] = fits(&synth, &fit)?.try_into().expect("two datasets");
            let truth = &synth.truth.decompositions;
            let est_x = parafac2_of(&fit.decompositions[0]);
            let [fa, fb, fc] = parafac2_fms(parafac2_of(&truth[0]), est_x)?;
            let clean = synth.truth.clean_a.as_ref().expect("experiment 2 keeps the clean A");
            let fa_clean = fms(clean.view(), est_x.a.view())?;
            let est_e = factor(&fit.decompositions[1], 0);
            let fe = fms(factor(&truth[1], 0).view(), est_e.view())?;
            let ff = fms(factor(&truth[1], 1).view(), factor(&fit.decompositions[1], 1).view())?;
            let labels = synth.truth.labels.as_ref().expect("experiment 2 has labels");
            let km_seed = derive_seed(options.solver.seed, rep, STREAM_KMEANS);
            let acc_a = cluster_accuracy(&est_x.a, labels, km_seed)?;
            let acc_e = cluster_accuracy(est_e, labels, km_seed)?;
            rows.push(ReportRow {
                variant: label.clone(),
                replicate: Some(rep),
                data_seed: Some(data_seed),
                values: vec![
                    fit_x,
                    fit_y,
                    fa,
                    fa_clean,
                    fb,
                    fc,
                    fe,
                    ff,
                    acc_a,
                    acc_e,
                    fit.final_objective(),
                    fit.iterations as f64,
                ],
            });
            diagnostics.push(ReplicateDiagnostics {
                variant: label.clone(),
                replicate: rep,
                wall_seconds: secs,
                termination: fit.termination,
                runs: fit.runs,
            });
        }
        push_average(&mut rows, &label, first);
    }
    Ok(ExperimentReport {
        experiment: Experiment::Exp2,
        options: options.clone(),
        columns: EXP2_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        diagnostics,
        components: None,
    })
}

const EXP3_COLUMNS: [&str; 10] = [
    "fit_X", "fit_Y", "fms_A", "fms_B", "fms_C", "fms_E", "fms_F", "fms_G", "objective", "iterations",
];

pub fn exp3_problem(synth: &SyntheticProblem, smooth: bool) -> Result<ProblemSpec> {
    let b_regs = if smooth {
        vec![Regularizer::path_smoothness(SMOOTHNESS_STRENGTH)?]
    } else {
        Vec::new()
    };
    let regs = vec![
        vec![vec![Regularizer::UnitBallL2], b_regs, vec![Regularizer::NonNegUnitBallL2]],
        vec![vec![Regularizer::UnitBallL2], Vec::new(), Vec::new()],
    ];
    let select = |cols: &[usize]| cols.iter().map(|&c| Some(c)).collect::<Vec<_>>();
    Ok(ProblemSpec {
        datasets: datasets_with_regs(synth, regs, 3),
        coupling: Some(CouplingSpec::column_selection(
            vec![0, 1],
            vec![select(&EXP3_SELECT_A), select(&EXP3_SELECT_E)],
            EXP3_DICTIONARY_COLS,
        )?),
    })
}

/// True and recovered `B_k` columns for a few slices, recovered columns
/// matched, sign-corrected and rescaled to the truth.
fn component_rows(
    variant: &str,
    truth: &Parafac2Decomposition,
    est: &Parafac2Decomposition,
    table: &mut ComponentTable,
) -> Result<()> {
    let matching = fms_match(truth.stacked_b().view(), est.stacked_b().view())?;
    let k_max = truth.b.len() - 1;
    let mut slices = vec![0, k_max / 2, k_max];
    slices.dedup();
    for k in slices {
        for (r_est, &r_true) in matching.permutation.iter().enumerate() {
            let t = truth.b[k].column(r_true);
            let e = est.b[k].column(r_est);
            let ee = e.dot(&e);
            let scale = if ee > 0.0 { t.dot(&e) / ee } else { 0.0 };
            for j in 0..t.len() {
                table
                    .rows
                    .push((variant.to_string(), k, r_true, j, t[j], scale * e[j]));
            }
        }
    }
    Ok(())
}

fn run_exp3(options: &ExperimentOptions) -> Result<ExperimentReport> {
    let mut variants = vec![("smooth", true)];
    if options.exp3_compare_unsmoothed {
        variants.push(("no-smooth", false));
    }
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut components = ComponentTable::default();
    for (label, smooth) in variants {
        let first = rows.len();
        for rep in 0..options.replicates {
            let data_seed = derive_seed(options.solver.seed, rep, STREAM_DATA);
            let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
            let synth = gen_experiment3_with_noise(options.noise, &mut rng)?;
            let problem = exp3_problem(&synth, smooth)?;
            let (fit, secs) = run_variant(&problem, &options.solver, rep, options.solver.seed)?;
            let [fit_x, fit_y]: [f64; 2] = fits(&synth, &fit)?.try_into().expect("two datasets");
            let truth = &synth.truth.decompositions;
            let est_x = parafac2_of(&fit.decompositions[0]);
            let [fa, fb, fc] = parafac2_fms(parafac2_of(&truth[0]), est_x)?;
            let cp_fms: Vec<f64> = (0..3)
                .map(|m| fms(factor(&truth[1], m).view(), factor(&fit.decompositions[1], m).view()))
                .collect::<Result<_>>()?;
            if rep == 0 {
                component_rows(label, parafac2_of(&truth[0]), est_x, &mut components)?;
            }
            rows.push(ReportRow {
                variant: label.into(),
                replicate: Some(rep),
                data_seed: Some(data_seed),
                values: vec![
                    fit_x,
                    fit_y,
                    fa,
                    fb,
                    fc,
                    cp_fms[0],
                    cp_fms[1],
                    cp_fms[2],
                    fit.final_objective(),
                    fit.iterations as f64,
                ],
            });
            diagnostics.push(ReplicateDiagnostics {
                variant: label.into(),
                replicate: rep,
                wall_seconds: secs,
                termination: fit.termination,
                runs: fit.runs,
            });
        }
        push_average(&mut rows, label, first);
    }
    Ok(ExperimentReport {
        experiment: Experiment::Exp3,
        options: options.clone(),
        columns: EXP3_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        diagnostics,
        components: Some(components),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_by_stream_and_replicate() {
        let a = derive_seed(7, 0, STREAM_DATA);
        assert_ne!(a, derive_seed(7, 1, STREAM_DATA));
        assert_ne!(a, derive_seed(7, 0, STREAM_INIT));
        assert_eq!(a, derive_seed(7, 0, STREAM_DATA));
    }

    #[test]
    fn averages_are_column_means() {
        let mut rows = vec![
            ReportRow {
                variant: "v".into(),
                replicate: Some(0),
                data_seed: Some(1),
                values: vec![1.0, 10.0],
            },
            ReportRow {
                variant: "v".into(),
                replicate: Some(1),
                data_seed: Some(2),
                values: vec![2.0, 20.0],
            },
        ];
        push_average(&mut rows, "v", 0);
        assert_eq!(rows[2].values, vec![1.5, 15.0]);
        assert_eq!(rows[2].replicate, None);
    }

    #[test]
    fn exp2_grid_labels() {
        let g = Exp2Variant::grid(&[false, true], &[false, true]);
        let labels: Vec<String> = g.iter().map(|v| v.label()).collect();
        assert_eq!(
            labels,
            vec!["uncoupled-no-ridge", "coupled-no-ridge", "uncoupled-ridge", "coupled-ridge"]
        );
    }
}
