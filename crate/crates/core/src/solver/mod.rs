//! Alternating optimization over modes with ADMM subproblem solvers.
//!
//! One outer iteration updates, in order: the first-mode factors of every
//! dataset (jointly for coupled participants), the PARAFAC2 `B_k` factors,
//! the PARAFAC2 `C` factors, and finally the remaining matrix and CP modes.

pub mod admm;
pub mod projection;
pub mod stopping;

use ndarray::{Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupling_residual, CouplingSpec, DictionaryVariable};
use crate::error::{CmtfError, Result};
use crate::linalg::{dot_thin, gram, t_dot_thin};
use crate::prox::{penalty_value, Regularizer};
use crate::tensor::{
    mttkrp, CpDecomposition, DataTensor, Decomposition, MatrixDecomposition, Parafac2Decomposition,
};

pub use admm::{
    admm_bk_mode, admm_c_mode, admm_coupled_first_mode, admm_mode, compute_step_size, BModeState, CoupledBlock,
    ModeState, Split,
};
pub use projection::{
    cross_product_spread, project_parafac2, project_parafac2_weighted, relative_cross_product_spread,
    Parafac2Projection,
};
pub use stopping::{stopping_check, Feasibility, StopDecision, TerminationReason};

/// One dataset together with its model, rank, weight and per-mode regularizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub data: DataTensor,
    pub rank: usize,
    pub weight: f64,
    /// One list per mode: `[A, B, C]` for PARAFAC2, `[E, F, G]` for CP,
    /// `[E, F]` for a matrix. Each non-`None` entry gets its own split.
    pub regularizers: Vec<Vec<Regularizer>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, data: DataTensor, rank: usize, weight: f64) -> Self {
        let modes = match &data {
            DataTensor::Ragged(_) | DataTensor::Dense(_) => 3,
            DataTensor::Matrix(_) => 2,
        };
        Self {
            name: name.into(),
            data,
            rank,
            weight,
            regularizers: vec![Vec::new(); modes],
        }
    }

    pub fn with_regularizer(mut self, mode: usize, reg: Regularizer) -> Self {
        self.regularizers[mode].push(reg);
        self
    }

    pub fn n_modes(&self) -> usize {
        self.regularizers.len()
    }

    pub fn mode_names(&self) -> &'static [&'static str] {
        match self.data {
            DataTensor::Ragged(_) => &["A", "B", "C"],
            DataTensor::Dense(_) => &["E", "F", "G"],
            DataTensor::Matrix(_) => &["E", "F"],
        }
    }

    fn first_mode_rows(&self) -> usize {
        match &self.data {
            DataTensor::Ragged(x) => x.n_rows(),
            DataTensor::Dense(x) => x.shape()[0],
            DataTensor::Matrix(y) => y.nrows(),
        }
    }
}

/// The full coupled factorization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub datasets: Vec<Dataset>,
    pub coupling: Option<CouplingSpec>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(CmtfError::Validation("problem has no datasets".into()));
        }
        for ds in &self.datasets {
            let name = &ds.name;
            if !(ds.weight > 0.0) || !ds.weight.is_finite() {
                return Err(CmtfError::Validation(format!("dataset {name}: weight must be > 0")));
            }
            if ds.rank == 0 {
                return Err(CmtfError::Validation(format!("dataset {name}: rank must be >= 1")));
            }
            let expected_modes = match ds.data {
                DataTensor::Matrix(_) => 2,
                _ => 3,
            };
            if ds.regularizers.len() != expected_modes {
                return Err(CmtfError::Validation(format!(
                    "dataset {name}: {} regularizer lists for {expected_modes} modes",
                    ds.regularizers.len()
                )));
            }
            let finite = match &ds.data {
                DataTensor::Ragged(x) => x.slices().iter().all(|s| s.iter().all(|v| v.is_finite())),
                DataTensor::Dense(x) => x.data().iter().all(|v| v.is_finite()),
                DataTensor::Matrix(y) => y.iter().all(|v| v.is_finite()),
            };
            if !finite {
                return Err(CmtfError::Validation(format!("dataset {name}: data contains non-finite values")));
            }
            if let DataTensor::Ragged(x) = &ds.data {
                let min_width = x.slice_widths().into_iter().min().unwrap_or(0);
                if ds.rank > min_width {
                    return Err(CmtfError::Validation(format!(
                        "dataset {name}: rank {} exceeds the narrowest slice width {min_width}",
                        ds.rank
                    )));
                }
            }
        }
        if let Some(coupling) = &self.coupling {
            let mut ranks = Vec::new();
            let mut rows = None;
            for &d in coupling.participants() {
                let Some(ds) = self.datasets.get(d) else {
                    return Err(CmtfError::Validation(format!("coupling references missing dataset {d}")));
                };
                let r = ds.first_mode_rows();
                if *rows.get_or_insert(r) != r {
                    return Err(CmtfError::Validation(format!(
                        "coupled dataset {} has {r} first-mode rows, others have {}",
                        ds.name,
                        rows.unwrap_or(0)
                    )));
                }
                ranks.push(ds.rank);
            }
            coupling.validate_ranks(&ranks)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_outer_iterations: usize,
    pub inner_admm_iterations: usize,
    pub absolute_tolerance: f64,
    pub relative_tolerance: f64,
    pub feasibility_tolerance: f64,
    pub projection_iterations: usize,
    pub initializations: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 2000,
            inner_admm_iterations: 5,
            absolute_tolerance: 1e-9,
            relative_tolerance: 1e-9,
            feasibility_tolerance: 1e-4,
            projection_iterations: 5,
            initializations: 5,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_outer_iterations", self.max_outer_iterations),
            ("inner_admm_iterations", self.inner_admm_iterations),
            ("projection_iterations", self.projection_iterations),
            ("initializations", self.initializations),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(CmtfError::Validation(format!("{name} must be positive")));
            }
        }
        let tols = [
            ("absolute_tolerance", self.absolute_tolerance),
            ("relative_tolerance", self.relative_tolerance),
            ("feasibility_tolerance", self.feasibility_tolerance),
        ];
        for (name, v) in tols {
            if !(v > 0.0 && v < 1.0) {
                return Err(CmtfError::Validation(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-iteration progress record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub feasibility: Feasibility,
}

/// Final objective (or failure) of one initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub objective: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub decompositions: Vec<Decomposition>,
    /// Entry 0 is the objective at initialization, entry `n` after outer iteration `n`.
    pub objective_trace: Vec<f64>,
    pub feasibility: Feasibility,
    pub seed: u64,
    pub iterations: usize,
    pub termination: TerminationReason,
    pub dictionary: Option<Array2<f64>>,
    /// Every initialization tried by [`multi_init_fit`]; a single entry for [`fit`].
    pub runs: Vec<RunSummary>,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// `Σ w_i‖data_i − model_i‖²_F + Σ g(factor)` with the penalties evaluated at
/// the decomposition factors.
pub fn objective(problem: &ProblemSpec, decompositions: &[Decomposition]) -> Result<f64> {
    if decompositions.len() != problem.datasets.len() {
        return Err(CmtfError::Dimension(format!(
            "{} decompositions for {} datasets",
            decompositions.len(),
            problem.datasets.len()
        )));
    }
    let mut total = 0.0;
    for (ds, dec) in problem.datasets.iter().zip(decompositions) {
        total += ds.weight * dec.squared_residual(&ds.data)?;
        let factors: Vec<Vec<&Array2<f64>>> = match dec {
            Decomposition::Parafac2(d) => vec![vec![&d.a], d.b.iter().collect(), vec![&d.c]],
            Decomposition::Cp(d) => d.factors.iter().map(|f| vec![f]).collect(),
            Decomposition::Matrix(d) => vec![vec![&d.e], vec![&d.f]],
        };
        for (regs, mats) in ds.regularizers.iter().zip(&factors) {
            for reg in regs {
                for m in mats {
                    total += penalty_value(reg, m);
                }
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone)]
enum DatasetState {
    Parafac2 { a: ModeState, b: BModeState, c: ModeState },
    Cp { modes: [ModeState; 3] },
    Matrix { modes: [ModeState; 2] },
}

impl DatasetState {
    fn first_mut(&mut self) -> &mut ModeState {
        match self {
            DatasetState::Parafac2 { a, .. } => a,
            DatasetState::Cp { modes } => &mut modes[0],
            DatasetState::Matrix { modes } => &mut modes[0],
        }
    }

    fn first(&self) -> &ModeState {
        match self {
            DatasetState::Parafac2 { a, .. } => a,
            DatasetState::Cp { modes } => &modes[0],
            DatasetState::Matrix { modes } => &modes[0],
        }
    }

    fn decomposition(&self) -> Decomposition {
        match self {
            DatasetState::Parafac2 { a, b, c } => Decomposition::Parafac2(Parafac2Decomposition {
                a: a.factor.clone(),
                b: b.factors(),
                c: c.factor.clone(),
            }),
            DatasetState::Cp { modes } => Decomposition::Cp(CpDecomposition {
                factors: [
                    modes[0].factor.clone(),
                    modes[1].factor.clone(),
                    modes[2].factor.clone(),
                ],
            }),
            DatasetState::Matrix { modes } => Decomposition::Matrix(MatrixDecomposition {
                e: modes[0].factor.clone(),
                f: modes[1].factor.clone(),
            }),
        }
    }

    fn all_modes(&self) -> Vec<&ModeState> {
        match self {
            DatasetState::Parafac2 { a, b, c } => {
                let mut v = vec![a, c];
                v.extend(b.slices.iter());
                v
            }
            DatasetState::Cp { modes } => modes.iter().collect(),
            DatasetState::Matrix { modes } => modes.iter().collect(),
        }
    }

    /// `Σ g(Z)` over every split.
    fn split_penalty(&self) -> f64 {
        self.all_modes()
            .iter()
            .flat_map(|m| m.regs.iter().zip(&m.splits))
            .map(|(r, s)| penalty_value(r, &s.z))
            .sum()
    }
}

fn random_factor(rows: usize, cols: usize, nonneg: bool, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = if nonneg {
        Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())
    } else {
        Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
    };
    for mut col in m.axis_iter_mut(Axis(1)) {
        let n = col.dot(&col).sqrt();
        if n > 0.0 {
            col /= n;
        }
    }
    m
}

/// Random initial decompositions: uniform entries for modes whose
/// regularizers imply non-negativity, standard normal otherwise; unit-norm
/// columns.
pub fn random_initialization(problem: &ProblemSpec, seed: u64) -> Vec<Decomposition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem
        .datasets
        .iter()
        .map(|ds| {
            let nonneg = |m: usize| ds.regularizers[m].iter().any(Regularizer::implies_nonnegativity);
            let r = ds.rank;
            match &ds.data {
                DataTensor::Ragged(x) => {
                    let a = random_factor(x.n_rows(), r, nonneg(0), &mut rng);
                    let b = x
                        .slice_widths()
                        .into_iter()
                        .map(|j| random_factor(j, r, nonneg(1), &mut rng))
                        .collect();
                    let c = random_factor(x.n_slices(), r, nonneg(2), &mut rng);
                    Decomposition::Parafac2(Parafac2Decomposition { a, b, c })
                }
                DataTensor::Dense(x) => {
                    let s = x.shape();
                    Decomposition::Cp(CpDecomposition {
                        factors: [
                            random_factor(s[0], r, nonneg(0), &mut rng),
                            random_factor(s[1], r, nonneg(1), &mut rng),
                            random_factor(s[2], r, nonneg(2), &mut rng),
                        ],
                    })
                }
                DataTensor::Matrix(y) => Decomposition::Matrix(MatrixDecomposition {
                    e: random_factor(y.nrows(), r, nonneg(0), &mut rng),
                    f: random_factor(y.ncols(), r, nonneg(1), &mut rng),
                }),
            }
        })
        .collect()
}

/// Gram matrix and data term of the least-squares problem in one factor.
struct ModeTerms {
    gram: Array2<f64>,
    data_term: Array2<f64>,
}

/// `Σ_k (B_kᵀB_k) ∘ (c_k c_kᵀ)` style weighted sums use this outer product.
fn outer(row: ndarray::ArrayView1<'_, f64>) -> Array2<f64> {
    let r = row.len();
    Array2::from_shape_fn((r, r), |(i, j)| row[i] * row[j])
}

/// Per-slice Gram matrices and data rows of the latest C update, which give
/// the PARAFAC2 residual as `w‖X_k‖² − 2 c_k·t_k + c_kᵀ G_k c_k`.
struct ResidualTerms {
    grams: Vec<Array2<f64>>,
    rows: Array2<f64>,
}

struct Fitter<'p> {
    problem: &'p ProblemSpec,
    config: &'p SolverConfig,
    states: Vec<DatasetState>,
    dict: Option<DictionaryVariable>,
    /// `w‖X_k‖²` per slice for PARAFAC2 datasets.
    slice_norms: Vec<Vec<f64>>,
    residual_terms: Vec<Option<ResidualTerms>>,
}

impl<'p> Fitter<'p> {
    fn new(problem: &'p ProblemSpec, config: &'p SolverConfig, init: Vec<Decomposition>) -> Result<Self> {
        if init.len() != problem.datasets.len() {
            return Err(CmtfError::Dimension("initialization does not match datasets".into()));
        }
        let mut states = Vec::with_capacity(init.len());
        for (ds, dec) in problem.datasets.iter().zip(init) {
            if dec.rank() != ds.rank {
                return Err(CmtfError::Dimension(format!(
                    "initialization for {} has rank {}, expected {}",
                    ds.name,
                    dec.rank(),
                    ds.rank
                )));
            }
            let regs = &ds.regularizers;
            let st = match dec {
                Decomposition::Parafac2(d) => {
                    d.validate()?;
                    DatasetState::Parafac2 {
                        a: ModeState::new(d.a, &regs[0]),
                        b: BModeState::new(d.b, &regs[1], config.projection_iterations)?,
                        c: ModeState::new(d.c, &regs[2]),
                    }
                }
                Decomposition::Cp(d) => {
                    let [e, f, g] = d.factors;
                    DatasetState::Cp {
                        modes: [
                            ModeState::new(e, &regs[0]),
                            ModeState::new(f, &regs[1]),
                            ModeState::new(g, &regs[2]),
                        ],
                    }
                }
                Decomposition::Matrix(d) => DatasetState::Matrix {
                    modes: [ModeState::new(d.e, &regs[0]), ModeState::new(d.f, &regs[1])],
                },
            };
            states.push(st);
        }
        let dict = match &problem.coupling {
            Some(spec) => {
                let factors: Vec<_> = spec
                    .participants()
                    .iter()
                    .map(|&d| states[d].first().factor.view())
                    .collect();
                Some(DictionaryVariable::initialize(spec, &factors)?)
            }
            None => None,
        };
        let slice_norms = problem
            .datasets
            .iter()
            .map(|ds| match &ds.data {
                DataTensor::Ragged(x) => x.slices().iter().map(|s| ds.weight * s.iter().map(|v| v * v).sum::<f64>()).collect(),
                _ => Vec::new(),
            })
            .collect();
        let residual_terms = problem.datasets.iter().map(|_| None).collect();
        Ok(Self {
            problem,
            config,
            states,
            dict,
            slice_norms,
            residual_terms,
        })
    }

    fn first_mode_terms(ds: &Dataset, st: &DatasetState) -> Result<ModeTerms> {
        let w = ds.weight;
        let r = ds.rank;
        Ok(match (&ds.data, st) {
            (DataTensor::Ragged(x), DatasetState::Parafac2 { b, c, .. }) => {
                let mut g = Array2::zeros((r, r));
                let mut t = Array2::zeros((x.n_rows(), r));
                for (k, (xk, bk)) in x.slices().iter().zip(&b.slices).enumerate() {
                    let ck = c.factor.row(k);
                    g += &(gram(bk.factor.view()) * &outer(ck));
                    t += &(dot_thin(xk.view(), bk.factor.view()) * &ck);
                }
                ModeTerms {
                    gram: g * w,
                    data_term: t * w,
                }
            }
            (DataTensor::Matrix(y), DatasetState::Matrix { modes }) => ModeTerms {
                gram: gram(modes[1].factor.view()) * w,
                data_term: dot_thin(y.view(), modes[1].factor.view()) * w,
            },
            (DataTensor::Dense(x), DatasetState::Cp { .. }) => Self::cp_terms(x, st, 0, w)?,
            _ => unreachable!("state layout follows the data layout"),
        })
    }

    fn cp_terms(x: &crate::tensor::DenseTensor3, st: &DatasetState, mode: usize, w: f64) -> Result<ModeTerms> {
        let DatasetState::Cp { modes } = st else {
            unreachable!("cp terms on a non-CP state")
        };
        let factors = CpDecomposition {
            factors: [
                modes[0].factor.clone(),
                modes[1].factor.clone(),
                modes[2].factor.clone(),
            ],
        };
        let r = modes[0].factor.ncols();
        let mut g = Array2::ones((r, r));
        for (m, f) in modes.iter().enumerate() {
            if m != mode {
                g = g * gram(f.factor.view());
            }
        }
        Ok(ModeTerms {
            gram: g * w,
            data_term: mttkrp(x, &factors, mode)? * w,
        })
    }

    fn update_first_modes(&mut self) -> Result<()> {
        let inner = self.config.inner_admm_iterations;
        let mut terms = Vec::with_capacity(self.states.len());
        for (ds, st) in self.problem.datasets.iter().zip(&self.states) {
            terms.push(Some(Self::first_mode_terms(ds, st)?));
        }
        for (st, t) in self.states.iter_mut().zip(&terms) {
            st.first_mut().rho = compute_step_size(&t.as_ref().expect("filled above").gram);
        }
        let mut slots: Vec<Option<&mut ModeState>> = self.states.iter_mut().map(|s| Some(s.first_mut())).collect();
        if let (Some(spec), Some(dict)) = (&self.problem.coupling, self.dict.as_mut()) {
            let mut blocks = Vec::with_capacity(spec.participants().len());
            for &d in spec.participants() {
                let t = terms[d].take().expect("participants are distinct");
                blocks.push(CoupledBlock {
                    state: slots[d].take().expect("participants are distinct"),
                    gram: t.gram,
                    data_term: t.data_term,
                });
            }
            admm_coupled_first_mode(&mut blocks, spec, dict, inner)?;
        }
        for (slot, t) in slots.into_iter().zip(terms) {
            if let (Some(state), Some(t)) = (slot, t) {
                admm_mode(state, &t.gram, &t.data_term, inner)?;
            }
        }
        Ok(())
    }

    fn update_parafac2_b(&mut self) -> Result<()> {
        let config = self.config;
        for (ds, st) in self.problem.datasets.iter().zip(self.states.iter_mut()) {
            let (DataTensor::Ragged(x), DatasetState::Parafac2 { a, b, c }) = (&ds.data, st) else {
                continue;
            };
            let w = ds.weight;
            let ata = gram(a.factor.view());
            let mut grams = Vec::with_capacity(x.n_slices());
            let mut terms = Vec::with_capacity(x.n_slices());
            for (k, xk) in x.slices().iter().enumerate() {
                let ck = c.factor.row(k);
                let g = &ata * &outer(ck) * w;
                b.slices[k].rho = compute_step_size(&g);
                grams.push(g);
                terms.push(t_dot_thin(xk.view(), a.factor.view()) * &ck * w);
            }
            // slices with small weights otherwise stall against strong penalties
            let mean_rho = b.slices.iter().map(|s| s.rho).sum::<f64>() / b.slices.len().max(1) as f64;
            for s in b.slices.iter_mut() {
                s.rho = s.rho.max(mean_rho);
            }
            admm_bk_mode(
                b,
                &grams,
                &terms,
                config.inner_admm_iterations,
                config.projection_iterations,
            )?;
        }
        Ok(())
    }

    fn update_parafac2_c(&mut self) -> Result<()> {
        let inner = self.config.inner_admm_iterations;
        for ((ds, st), cache) in self
            .problem
            .datasets
            .iter()
            .zip(self.states.iter_mut())
            .zip(self.residual_terms.iter_mut())
        {
            let (DataTensor::Ragged(x), DatasetState::Parafac2 { a, b, c }) = (&ds.data, st) else {
                continue;
            };
            let w = ds.weight;
            let r = ds.rank;
            let ata = gram(a.factor.view());
            let mut grams = Vec::with_capacity(x.n_slices());
            let mut rows = Array2::zeros((x.n_slices(), r));
            let mut mean_gram = Array2::zeros((r, r));
            for (k, xk) in x.slices().iter().enumerate() {
                let bk = &b.slices[k].factor;
                let g = &ata * &gram(bk.view()) * w;
                mean_gram += &g;
                grams.push(g);
                let xb = dot_thin(xk.view(), bk.view());
                let mut row = rows.row_mut(k);
                Zip::from(&mut row)
                    .and(a.factor.axis_iter(Axis(1)))
                    .and(xb.axis_iter(Axis(1)))
                    .for_each(|o, ac, xc| *o = w * ac.dot(&xc));
            }
            mean_gram /= x.n_slices() as f64;
            c.rho = compute_step_size(&mean_gram);
            admm_c_mode(c, &grams, &rows, inner)?;
            *cache = Some(ResidualTerms { grams, rows });
        }
        Ok(())
    }

    fn update_remaining_modes(&mut self) -> Result<()> {
        let inner = self.config.inner_admm_iterations;
        for (ds, st) in self.problem.datasets.iter().zip(self.states.iter_mut()) {
            let w = ds.weight;
            match (&ds.data, st) {
                (DataTensor::Matrix(y), DatasetState::Matrix { modes }) => {
                    let g = gram(modes[0].factor.view()) * w;
                    let t = t_dot_thin(y.view(), modes[0].factor.view()) * w;
                    modes[1].rho = compute_step_size(&g);
                    admm_mode(&mut modes[1], &g, &t, inner)?;
                }
                (DataTensor::Dense(x), st @ DatasetState::Cp { .. }) => {
                    for mode in 1..3 {
                        let terms = Self::cp_terms(x, st, mode, w)?;
                        let DatasetState::Cp { modes } = st else { unreachable!() };
                        modes[mode].rho = compute_step_size(&terms.gram);
                        admm_mode(&mut modes[mode], &terms.gram, &terms.data_term, inner)?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn iterate(&mut self) -> Result<()> {
        self.residual_terms.iter_mut().for_each(|t| *t = None);
        self.update_first_modes()?;
        self.update_parafac2_b()?;
        self.update_parafac2_c()?;
        self.update_remaining_modes()
    }

    fn decompositions(&self) -> Vec<Decomposition> {
        self.states.iter().map(DatasetState::decomposition).collect()
    }

    /// Data-fit terms at the factors plus penalties at the split variables.
    fn objective(&self) -> Result<f64> {
        let mut total = 0.0;
        for (d, (ds, st)) in self.problem.datasets.iter().zip(&self.states).enumerate() {
            total += match (&self.residual_terms[d], st) {
                (Some(terms), DatasetState::Parafac2 { c, .. }) => {
                    let mut r = 0.0;
                    for (k, g) in terms.grams.iter().enumerate() {
                        let ck = c.factor.row(k);
                        r += self.slice_norms[d][k] - 2.0 * ck.dot(&terms.rows.row(k)) + ck.dot(&g.dot(&ck));
                    }
                    r.max(0.0)
                }
                _ => ds.weight * st.decomposition().squared_residual(&ds.data)?,
            };
            total += st.split_penalty();
        }
        Ok(total)
    }

    fn feasibility(&self) -> Result<Feasibility> {
        let mut f = Feasibility::default();
        if let (Some(spec), Some(dict)) = (&self.problem.coupling, &self.dict) {
            for (p, &d) in spec.participants().iter().enumerate() {
                let r = coupling_residual(spec, p, &self.states[d].first().factor, &dict.delta)?;
                f.coupling_residual = f.coupling_residual.max(r);
            }
        }
        for st in &self.states {
            for m in st.all_modes() {
                f.split_residual = f.split_residual.max(m.split_residual());
            }
            if let DatasetState::Parafac2 { b, .. } = st {
                f.split_residual = f.split_residual.max(b.constraint_residual());
                f.cross_product_spread = f.cross_product_spread.max(relative_cross_product_spread(&b.factors()));
            }
        }
        Ok(f)
    }
}

/// Fits from a random initialization drawn with `seed`.
pub fn fit(problem: &ProblemSpec, config: &SolverConfig, seed: u64) -> Result<FitResult> {
    problem.validate()?;
    let init = random_initialization(problem, seed);
    fit_from(problem, config, init, seed, None)
}

/// Fits from the given initial decompositions, reporting every outer
/// iteration to `progress` when provided.
pub fn fit_from(
    problem: &ProblemSpec,
    config: &SolverConfig,
    init: Vec<Decomposition>,
    seed: u64,
    mut progress: Option<&mut dyn FnMut(&TraceRecord)>,
) -> Result<FitResult> {
    problem.validate()?;
    config.validate()?;
    let mut fitter = Fitter::new(problem, config, init)?;
    let mut trace = vec![fitter.objective()?];
    let mut feasibility = fitter.feasibility()?;
    if let Some(cb) = progress.as_mut() {
        cb(&TraceRecord {
            iteration: 0,
            objective: trace[0],
            feasibility,
        });
    }
    let termination = loop {
        fitter.iterate()?;
        let obj = fitter.objective()?;
        if !obj.is_finite() {
            return Err(CmtfError::NonFinite(format!("objective at iteration {}", trace.len())));
        }
        trace.push(obj);
        feasibility = fitter.feasibility()?;
        if let Some(cb) = progress.as_mut() {
            cb(&TraceRecord {
                iteration: trace.len() - 1,
                objective: obj,
                feasibility,
            });
        }
        if let StopDecision::Stop(reason) = stopping_check(&trace, &feasibility, config) {
            break reason;
        }
    };
    let iterations = trace.len() - 1;
    let final_objective = trace[iterations];
    Ok(FitResult {
        decompositions: fitter.decompositions(),
        objective_trace: trace,
        feasibility,
        seed,
        iterations,
        termination,
        dictionary: fitter.dict.map(|d| d.delta),
        runs: vec![RunSummary {
            seed,
            objective: Some(final_objective),
            iterations: Some(iterations),
            error: None,
        }],
    })
}

/// Runs `config.initializations` fits with seeds `config.seed + i` and keeps
/// the one with the lowest final objective.
pub fn multi_init_fit(problem: &ProblemSpec, config: &SolverConfig) -> Result<FitResult> {
    problem.validate()?;
    config.validate()?;
    let seeds: Vec<u64> = (0..config.initializations as u64)
        .map(|i| config.seed.wrapping_add(i))
        .collect();
    let results: Vec<Result<FitResult>> = seeds.par_iter().map(|&s| fit(problem, config, s)).collect();

    let runs: Vec<RunSummary> = seeds
        .iter()
        .zip(&results)
        .map(|(&seed, r)| match r {
            Ok(f) => RunSummary {
                seed,
                objective: Some(f.final_objective()),
                iterations: Some(f.iterations),
                error: None,
            },
            Err(e) => RunSummary {
                seed,
                objective: None,
                iterations: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut best: Option<FitResult> = None;
    let mut last_error = None;
    for r in results {
        match r {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.final_objective() < b.final_objective()) {
                    best = Some(f);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    match best {
        Some(mut b) => {
            b.runs = runs;
            Ok(b)
        }
        None => Err(CmtfError::AllRunsAborted(
            seeds.len(),
            last_error.map(|e| e.to_string()).unwrap_or_default(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RaggedTensor;
    use ndarray::array;

    fn tiny_problem() -> ProblemSpec {
        let x = RaggedTensor::new(vec![
            array![[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]],
            array![[2.0, 1.0, 0.0], [1.0, 0.0, 1.0]],
        ])
        .unwrap();
        ProblemSpec {
            datasets: vec![Dataset::new("X", DataTensor::Ragged(x), 2, 0.5)],
            coupling: None,
        }
    }

    #[test]
    fn zero_factors_give_weighted_norms() {
        let y1 = array![[0.6, 0.8]];
        let y2 = array![[0.0, 1.0], [0.0, 0.0]];
        let problem = ProblemSpec {
            datasets: vec![
                Dataset::new("Y1", DataTensor::Matrix(y1), 1, 0.5),
                Dataset::new("Y2", DataTensor::Matrix(y2), 1, 0.5),
            ],
            coupling: None,
        };
        let decs = vec![
            Decomposition::Matrix(MatrixDecomposition::new(Array2::zeros((1, 1)), Array2::zeros((2, 1))).unwrap()),
            Decomposition::Matrix(MatrixDecomposition::new(Array2::zeros((2, 1)), Array2::zeros((2, 1))).unwrap()),
        ];
        assert!((objective(&problem, &decs).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_model_has_zero_objective_and_ridge_adds() {
        let e = array![[1.0], [2.0]];
        let f = array![[3.0], [1.0]];
        let y = e.dot(&f.t());
        let ds = Dataset::new("Y", DataTensor::Matrix(y), 1, 0.5);
        let dec = vec![Decomposition::Matrix(MatrixDecomposition::new(e, f).unwrap())];
        let plain = ProblemSpec {
            datasets: vec![ds.clone()],
            coupling: None,
        };
        assert_eq!(objective(&plain, &dec).unwrap(), 0.0);
        let ridged = ProblemSpec {
            datasets: vec![ds.with_regularizer(1, Regularizer::ridge(0.1).unwrap())],
            coupling: None,
        };
        assert!(objective(&ridged, &dec).unwrap() > 0.0);
    }

    #[test]
    fn rank_wider_than_slice_is_rejected() {
        let mut p = tiny_problem();
        p.datasets[0].rank = 4;
        assert!(matches!(p.validate(), Err(CmtfError::Validation(_))));
    }

    #[test]
    fn fit_runs_and_decreases() {
        let p = tiny_problem();
        let cfg = SolverConfig {
            max_outer_iterations: 50,
            ..Default::default()
        };
        let r = fit(&p, &cfg, 1).unwrap();
        assert!(r.final_objective() <= r.objective_trace[0]);
        assert_eq!(r.objective_trace.len(), r.iterations + 1);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            relative_tolerance: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            initializations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
