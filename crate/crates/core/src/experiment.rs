//! Experiment harness: generates trajectory data, fits surrogates over
//! (M, p, ρ) sweeps, measures step-wise mean prediction errors on held-out
//! test trajectories, and emits CSV tables plus SVG plots.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csvio::fmt_f64;
use crate::dde::{
    hill_system_with_delay, integrate, sample_initial_histories, tumor_system_with_delay,
    DdeSystem, Trajectory,
};
use crate::discretize::{DiscretizationGrid, DiscretizedState};
use crate::error::{Error, Result};
use crate::kedmd::{
    build_dataset, fit, fit_with_centers, greedy_until_fill, CenterStrategy, FitOptions,
    KoopmanSurrogate, SigmaPolicy, StateScaling, TransitionDataset,
};
use crate::plot::{Curve, LinePlot};

/// Which benchmark the experiment runs. `Identity` is a pipeline test hook:
/// transition pairs satisfy z⁺ = z exactly and test "trajectories" are
/// constant, so a correct fit must reproduce every state it is started from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Hill,
    Tumor,
    Identity,
}

impl SystemKind {
    pub fn default_delay(&self) -> f64 {
        match self {
            SystemKind::Hill => 1.0,
            SystemKind::Tumor => 1.64,
            SystemKind::Identity => 1.0,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SystemKind::Tumor => 2,
            _ => 1,
        }
    }

    pub fn default_bounds(&self) -> Vec<(f64, f64)> {
        match self {
            SystemKind::Hill | SystemKind::Identity => vec![(0.1, 1.5)],
            SystemKind::Tumor => vec![(0.1, 1.5), (0.1, 20.0)],
        }
    }

    fn resolve(&self, delay: f64) -> Option<DdeSystem> {
        match self {
            SystemKind::Hill => Some(hill_system_with_delay(delay)),
            SystemKind::Tumor => Some(tumor_system_with_delay(delay)),
            SystemKind::Identity => None,
        }
    }
}

impl std::str::FromStr for SystemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hill" => Ok(SystemKind::Hill),
            "tumor" => Ok(SystemKind::Tumor),
            "identity" => Ok(SystemKind::Identity),
            other => Err(Error::Config(format!("unknown system '{other}'"))),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub delay: f64,
    pub horizon: f64,
    pub delta: f64,
    pub step: f64,
    pub m_list: Vec<usize>,
    pub p_list: Vec<usize>,
    pub rho_list: Vec<f64>,
    /// Training trajectories per M entry (length 1 broadcasts).
    pub n_train: Vec<usize>,
    pub n_test: usize,
    pub ic_bounds: Vec<(f64, f64)>,
    pub data_seed: u64,
    pub test_seed: u64,
    pub center_seed: u64,
    /// 0 = max(nM + 1, 10).
    pub min_neighbors: usize,
    pub strategy: CenterStrategy,
    pub sigma_policy: SigmaPolicy,
    /// Per-component state normalization; ρ and σ are interpreted in the
    /// scaled coordinates when enabled.
    pub scaling: StateScaling,
    pub failure_threshold: f64,
    /// When true, M entries after the first get their center count chosen by
    /// growing the greedy sequence until the fill distance matches the first
    /// cell's, instead of using `p_list`.
    pub match_fill: bool,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(system: SystemKind, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            system,
            delay: system.default_delay(),
            horizon: 10.0,
            delta: 0.01,
            step: 0.001,
            m_list: vec![2],
            p_list: vec![121],
            rho_list: vec![0.3],
            n_train: vec![20],
            n_test: 15,
            ic_bounds: system.default_bounds(),
            data_seed: 1,
            test_seed: 1001,
            center_seed: 1,
            min_neighbors: 0,
            strategy: CenterStrategy::GreedyFarthest,
            sigma_policy: SigmaPolicy::default(),
            scaling: StateScaling::None,
            failure_threshold: 0.10,
            match_fill: false,
            out_dir: out_dir.into(),
        }
    }

    /// N_t: sampled steps per trajectory.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.delta).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, why: String| Err(Error::Config(format!("{key}: {why}")));
        if self.m_list.is_empty() {
            return fail("m_list", "must be non-empty".into());
        }
        if self.m_list.iter().any(|&m| m < 2) {
            return fail("m_list", "entries must be >= 2".into());
        }
        if self.p_list.is_empty() {
            return fail("p_list", "must be non-empty".into());
        }
        if self.rho_list.is_empty() {
            return fail("rho_list", "must be non-empty".into());
        }
        if self.n_train.is_empty() {
            return fail("n_train", "must be non-empty".into());
        }
        if self.n_train.len() != 1 && self.n_train.len() != self.m_list.len() {
            return fail(
                "n_train",
                format!(
                    "length must be 1 or match m_list ({} entries), got {}",
                    self.m_list.len(),
                    self.n_train.len()
                ),
            );
        }
        if self.n_test < 1 {
            return fail("n_test", "must be >= 1".into());
        }
        if self.data_seed == self.test_seed {
            return fail("test_seed", "must differ from data_seed".into());
        }
        if self.ic_bounds.len() != self.system.state_dim() {
            return fail(
                "ic_bounds",
                format!(
                    "need one [lo, hi] per state component ({}), got {}",
                    self.system.state_dim(),
                    self.ic_bounds.len()
                ),
            );
        }
        for &(lo, hi) in &self.ic_bounds {
            if !(lo <= hi) {
                return fail("ic_bounds", format!("empty interval [{lo}, {hi}]"));
            }
        }
        if !(self.failure_threshold >= 0.0 && self.failure_threshold <= 1.0) {
            return fail("failure_threshold", "must lie in [0, 1]".into());
        }
        if !(self.horizon > 0.0 && self.delta > 0.0 && self.step > 0.0) {
            return fail("horizon/delta/step", "must be positive".into());
        }
        if self.match_fill && self.scaling != StateScaling::None {
            return fail(
                "match_fill",
                "fill-distance matching runs in raw coordinates and cannot be combined with scaling".into(),
            );
        }
        Ok(())
    }

    fn n_train_for(&self, m_index: usize) -> usize {
        if self.n_train.len() == 1 {
            self.n_train[0]
        } else {
            self.n_train[m_index]
        }
    }
}

/// Step-wise mean prediction error μ_{z_k} with per-step min/max envelopes
/// over the test trajectories, for k = 1…N_t.
#[derive(Debug, Clone)]
pub struct ErrorCurve {
    pub label: String,
    /// t_k = kΔ for k = 1…N_t.
    pub t: Vec<f64>,
    pub mu: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// e_k^{(i)} per test trajectory, outer index i.
    pub per_trajectory: Vec<Vec<f64>>,
}

impl ErrorCurve {
    pub fn mean_mu(&self) -> f64 {
        self.mu.iter().sum::<f64>() / self.mu.len() as f64
    }

    pub fn final_mu(&self) -> f64 {
        *self.mu.last().unwrap()
    }
}

/// One (M, p, ρ) sweep cell outcome.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub label: String,
    pub m: usize,
    pub p_requested: usize,
    pub p: usize,
    pub rho: f64,
    pub n_train: usize,
    pub status: String,
    pub h_fill: f64,
    pub lambda: f64,
    pub condition_estimate: f64,
    pub mean_mu: f64,
    pub final_mu: f64,
    pub curve: Option<ErrorCurve>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
    pub summary_path: PathBuf,
}

/// Per-M data shared by that M's sweep cells.
struct MData {
    m: usize,
    n_train: usize,
    dataset: TransitionDataset,
    /// Test trajectories as sampled state sequences z_0 … z_{N_t}.
    test_series: Vec<Vec<DVector<f64>>>,
}

enum CellCenters {
    FromP(usize),
    Matched { target_h: f64 },
}

/// Samples z_k = Q(φ_k) for k = 0…N_t from a trajectory's dense output.
pub fn sample_state_series(traj: &Trajectory, grid: &DiscretizationGrid) -> Vec<DVector<f64>> {
    let n = traj.state_dim();
    let m = grid.m();
    (0..=traj.n_steps())
        .map(|k| {
            let t_k = traj.sample_time(k);
            let mut z = DVector::zeros(n * m);
            for j in 0..m {
                z.rows_mut(j * n, n)
                    .copy_from(&traj.dense_eval(t_k + grid.theta(j)));
            }
            z
        })
        .collect()
}

fn build_identity_mdata(config: &ExperimentConfig, m_index: usize, m: usize) -> Result<MData> {
    let n = 1;
    let nm = n * m;
    let n_train = config.n_train_for(m_index);
    let count = n_train * config.n_steps();
    let (lo, hi) = config.ic_bounds[0];
    let mut rng = ChaCha8Rng::seed_from_u64(config.data_seed);
    let mut preds = Vec::with_capacity(count);
    let mut prov = Vec::with_capacity(count);
    for k in 0..count {
        let z = DVector::from_iterator(nm, (0..nm).map(|_| {
            let u: f64 = rng.gen();
            lo + u * (hi - lo)
        }));
        preds.push(z);
        prov.push((0, k));
    }
    let dataset = TransitionDataset::from_pairs(
        n,
        m,
        config.delta,
        config.delay,
        preds.clone(),
        preds,
        prov,
    )?;
    Ok(MData {
        m,
        n_train,
        dataset,
        test_series: Vec::new(), // filled per fit from the centers
    })
}

fn build_system_mdata(
    config: &ExperimentConfig,
    m_index: usize,
    m: usize,
    train_trajs: &[Trajectory],
    test_trajs: &[Trajectory],
) -> Result<MData> {
    let n_train = config.n_train_for(m_index);
    if n_train > train_trajs.len() {
        return Err(Error::Config(format!(
            "n_train: {n_train} exceeds generated trajectories {}",
            train_trajs.len()
        )));
    }
    let grid = DiscretizationGrid::new(m, config.delay)?;
    let dataset = build_dataset(&train_trajs[..n_train], &grid)?;
    let test_series = test_trajs
        .par_iter()
        .map(|t| sample_state_series(t, &grid))
        .collect();
    Ok(MData {
        m,
        n_train,
        dataset,
        test_series,
    })
}

/// Runs the configured sweep. Each (M, p, ρ) cell fits a surrogate, simulates
/// the test trajectories through it, and writes `curve_<label>.csv`,
/// `errors_<label>.csv` and `plot_<label>.svg`; a `summary.csv` row records
/// every cell. Fit failures are isolated per cell. Deterministic given the
/// config seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;

    let sys = config.system.resolve(config.delay);
    let (train_trajs, test_trajs): (Vec<Trajectory>, Vec<Trajectory>) = match &sys {
        Some(system) => {
            let n_train_max = (0..config.m_list.len())
                .map(|i| config.n_train_for(i))
                .max()
                .unwrap();
            let train_ics =
                sample_initial_histories(system, n_train_max, &config.ic_bounds, config.data_seed)?;
            let test_ics =
                sample_initial_histories(system, config.n_test, &config.ic_bounds, config.test_seed)?;
            for (i, t) in test_ics.iter().enumerate() {
                if train_ics.iter().any(|tr| tr == t) {
                    return Err(Error::Config(format!(
                        "test_seed: test initial state {i} coincides with a training initial state"
                    )));
                }
            }
            let train = train_ics
                .par_iter()
                .map(|h| integrate(system, h, config.horizon, config.delta, config.step))
                .collect::<Result<Vec<_>>>()?;
            let test = test_ics
                .par_iter()
                .map(|h| integrate(system, h, config.horizon, config.delta, config.step))
                .collect::<Result<Vec<_>>>()?;
            (train, test)
        }
        None => (Vec::new(), Vec::new()),
    };

    let mut m_data: BTreeMap<usize, MData> = BTreeMap::new();
    for (i, &m) in config.m_list.iter().enumerate() {
        let data = if sys.is_some() {
            build_system_mdata(config, i, m, &train_trajs, &test_trajs)?
        } else {
            build_identity_mdata(config, i, m)?
        };
        m_data.insert(m, data);
    }

    // Fill-distance matching: the first (M, p) cell fixes the target.
    let mut matched_target: Option<f64> = None;
    if config.match_fill {
        let first_m = config.m_list[0];
        let data = &m_data[&first_m];
        let centers = crate::kedmd::select_centers(
            &data.dataset,
            config.p_list[0],
            config.strategy,
            config.center_seed,
        )?;
        let distinct: Vec<DVector<f64>> = data
            .dataset
            .distinct_predecessor_indices()
            .into_iter()
            .map(|i| data.dataset.predecessors()[i].clone())
            .collect();
        let h = crate::kernel::fill_distance(&centers, &distinct)?;
        matched_target = Some(h);
        log::info!("fill-distance matching target h = {h:.6} (M = {first_m}, p = {})", config.p_list[0]);
    }

    // Cell list.
    let mut cells: Vec<(usize, CellCenters, f64)> = Vec::new();
    for (mi, &m) in config.m_list.iter().enumerate() {
        let center_specs: Vec<CellCenters> = if config.match_fill && mi > 0 {
            vec![CellCenters::Matched {
                target_h: matched_target.unwrap(),
            }]
        } else {
            config.p_list.iter().map(|&p| CellCenters::FromP(p)).collect()
        };
        for centers_spec in center_specs {
            for &rho in &config.rho_list {
                let centers_spec = match centers_spec {
                    CellCenters::FromP(p) => CellCenters::FromP(p),
                    CellCenters::Matched { target_h } => CellCenters::Matched { target_h },
                };
                cells.push((m, centers_spec, rho));
            }
        }
    }

    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|(m, centers_spec, rho)| run_cell(config, &m_data[m], centers_spec, *rho))
        .collect();

    // Combined overview plot of all successful cells.
    let overview_curves: Vec<Curve> = results
        .iter()
        .filter_map(|r| {
            r.curve.as_ref().map(|c| Curve {
                label: r.label.clone(),
                points: c.t.iter().zip(c.mu.iter()).map(|(&t, &m)| (t, m)).collect(),
                band: None,
            })
        })
        .collect();
    if !overview_curves.is_empty() {
        LinePlot {
            title: format!("step-wise mean prediction error ({:?})", config.system),
            x_label: "t".into(),
            y_label: "log10 mu".into(),
            log_y: true,
            curves: overview_curves,
        }
        .render_to_file(&config.out_dir.join("overview.svg"))?;
    }

    let summary_path = config.out_dir.join("summary.csv");
    write_summary(&summary_path, config, &results)?;
    Ok(ExperimentReport {
        cells: results,
        summary_path,
    })
}

fn cell_label(config: &ExperimentConfig, m: usize, p: usize, rho: f64) -> String {
    format!(
        "{}_M{}_p{}_rho{}",
        match config.system {
            SystemKind::Hill => "hill",
            SystemKind::Tumor => "tumor",
            SystemKind::Identity => "identity",
        },
        m,
        p,
        rho
    )
}

fn run_cell(
    config: &ExperimentConfig,
    data: &MData,
    centers_spec: &CellCenters,
    rho: f64,
) -> CellResult {
    let mut opts = FitOptions::new(0, rho);
    opts.min_neighbors = config.min_neighbors;
    opts.strategy = config.strategy;
    opts.seed = config.center_seed;
    opts.sigma_policy = config.sigma_policy;
    opts.scaling = config.scaling;
    opts.failure_threshold = config.failure_threshold;

    let fit_result = match centers_spec {
        CellCenters::FromP(p) => {
            opts.p = *p;
            fit(&data.dataset, &opts)
        }
        CellCenters::Matched { target_h } => {
            match greedy_until_fill(&data.dataset, *target_h, 4000) {
                Ok((centers, achieved)) => {
                    opts.p = centers.len();
                    log::info!(
                        "M = {}: matched fill {achieved:.6} with p = {}",
                        data.m,
                        centers.len()
                    );
                    fit_with_centers(&data.dataset, centers, &opts)
                }
                Err(e) => Err(e),
            }
        }
    };

    let p_requested = opts.p;
    let label_for = |p: usize| cell_label(config, data.m, p, rho);
    let surrogate = match fit_result {
        Ok(s) => s,
        Err(e) => {
            return CellResult {
                label: label_for(p_requested),
                m: data.m,
                p_requested,
                p: 0,
                rho,
                n_train: data.n_train,
                status: format!("fit_failed: {e}"),
                h_fill: f64::NAN,
                lambda: f64::NAN,
                condition_estimate: f64::NAN,
                mean_mu: f64::NAN,
                final_mu: f64::NAN,
                curve: None,
            };
        }
    };

    let label = label_for(p_requested);
    let meta = surrogate.metadata().clone();

    // Identity hook: test states are drawn from the fitted centers, and the
    // true sequence is constant.
    let test_series: Vec<Vec<DVector<f64>>> = if matches!(config.system, SystemKind::Identity) {
        let n_t = config.n_steps();
        surrogate
            .centers()
            .iter()
            .take(config.n_test)
            .map(|c| vec![c.clone(); n_t + 1])
            .collect()
    } else {
        data.test_series.clone()
    };

    match measure_curve(&surrogate, &test_series, config.delta, &label) {
        Ok(curve) => {
            let (mean_mu, final_mu) = (curve.mean_mu(), curve.final_mu());
            if let Err(e) = write_cell_outputs(config, &curve) {
                log::error!("cell {label}: output write failed: {e}");
            }
            CellResult {
                label,
                m: data.m,
                p_requested,
                p: meta.p,
                rho,
                n_train: data.n_train,
                status: "ok".into(),
                h_fill: meta.h_fill,
                lambda: meta.lambda,
                condition_estimate: meta.condition_estimate,
                mean_mu,
                final_mu,
                curve: Some(curve),
            }
        }
        Err(e) => CellResult {
            label,
            m: data.m,
            p_requested,
            p: meta.p,
            rho,
            n_train: data.n_train,
            status: format!("rollout_failed: {e}"),
            h_fill: meta.h_fill,
            lambda: meta.lambda,
            condition_estimate: meta.condition_estimate,
            mean_mu: f64::NAN,
            final_mu: f64::NAN,
            curve: None,
        },
    }
}

/// Rolls the surrogate out along each test series and aggregates
/// e_k^{(i)} = ‖z_k^{(i)} − ẑ_k^{(i)}‖ into μ/min/max per step.
pub fn measure_curve(
    surrogate: &KoopmanSurrogate,
    test_series: &[Vec<DVector<f64>>],
    delta: f64,
    label: &str,
) -> Result<ErrorCurve> {
    let n_t = test_series
        .first()
        .map(|s| s.len().saturating_sub(1))
        .ok_or_else(|| Error::PreconditionViolation("no test series".into()))?;
    let meta = surrogate.metadata();
    let per_trajectory: Vec<Vec<f64>> = test_series
        .par_iter()
        .map(|series| -> Result<Vec<f64>> {
            let z0 = DiscretizedState::new(meta.n, meta.m, series[0].clone())?;
            let rollout = surrogate.rollout(&z0, n_t)?;
            Ok((1..=n_t)
                .map(|k| (&series[k] - rollout[k].data()).norm())
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let n_test = per_trajectory.len();
    let mut mu = Vec::with_capacity(n_t);
    let mut min = Vec::with_capacity(n_t);
    let mut max = Vec::with_capacity(n_t);
    let t: Vec<f64> = (1..=n_t).map(|k| k as f64 * delta).collect();
    for k in 0..n_t {
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for traj in &per_trajectory {
            sum += traj[k];
            lo = lo.min(traj[k]);
            hi = hi.max(traj[k]);
        }
        mu.push(sum / n_test as f64);
        min.push(lo);
        max.push(hi);
    }
    Ok(ErrorCurve {
        label: label.to_string(),
        t,
        mu,
        min,
        max,
        per_trajectory,
    })
}

fn write_cell_outputs(config: &ExperimentConfig, curve: &ErrorCurve) -> Result<()> {
    let curve_path = config.out_dir.join(format!("curve_{}.csv", curve.label));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&curve_path)?);
    writeln!(f, "k,t,mu,min,max")?;
    for k in 0..curve.mu.len() {
        writeln!(
            f,
            "{},{},{},{},{}",
            k + 1,
            fmt_f64(curve.t[k]),
            fmt_f64(curve.mu[k]),
            fmt_f64(curve.min[k]),
            fmt_f64(curve.max[k])
        )?;
    }
    f.flush()?;

    let errors_path = config.out_dir.join(format!("errors_{}.csv", curve.label));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&errors_path)?);
    let header: Vec<String> = ["k".to_string(), "t".to_string()]
        .into_iter()
        .chain((1..=curve.per_trajectory.len()).map(|i| format!("e{i}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for k in 0..curve.mu.len() {
        let mut row = vec![(k + 1).to_string(), fmt_f64(curve.t[k])];
        row.extend(curve.per_trajectory.iter().map(|traj| fmt_f64(traj[k])));
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;

    LinePlot {
        title: curve.label.clone(),
        x_label: "t".into(),
        y_label: "log10 mu".into(),
        log_y: true,
        curves: vec![Curve {
            label: "mu".into(),
            points: curve.t.iter().zip(curve.mu.iter()).map(|(&t, &m)| (t, m)).collect(),
            band: Some(
                curve
                    .min
                    .iter()
                    .zip(curve.max.iter())
                    .map(|(&lo, &hi)| (lo, hi))
                    .collect(),
            ),
        }],
    }
    .render_to_file(&config.out_dir.join(format!("plot_{}.svg", curve.label)))?;
    Ok(())
}

fn write_summary(path: &Path, config: &ExperimentConfig, cells: &[CellResult]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "system,M,p,rho,d,N_tr,h_fill,lambda,cond_est,mean_mu,final_mu,status"
    )?;
    let sys = match config.system {
        SystemKind::Hill => "hill",
        SystemKind::Tumor => "tumor",
        SystemKind::Identity => "identity",
    };
    let d_eff = |m: usize| {
        if config.min_neighbors == 0 {
            (m * config.system.state_dim() + 1).max(10)
        } else {
            config.min_neighbors
        }
    };
    for c in cells {
        writeln!(
            f,
            "{sys},{},{},{},{},{},{},{},{},{},{},{}",
            c.m,
            c.p,
            fmt_f64(c.rho),
            d_eff(c.m),
            c.n_train,
            fmt_f64(c.h_fill),
            fmt_f64(c.lambda),
            fmt_f64(c.condition_estimate),
            fmt_f64(c.mean_mu),
            fmt_f64(c.final_mu),
            c.status
        )?;
    }
    f.flush()?;
    Ok(())
}

/// Extracts the current value x(t) (block M) from paired true/predicted state
/// sequences, for tracking plots and CSVs.
pub fn compare_current_value(
    truth: &[DiscretizedState],
    predicted: &[DiscretizedState],
    delta: f64,
) -> Result<CurrentValueSeries> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(format!(
            "true series has {} states, predicted {}",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::LengthMismatch("empty series".into()));
    }
    let t = (0..truth.len()).map(|k| k as f64 * delta).collect();
    let true_values = truth.iter().map(|z| z.current_value().into_owned()).collect();
    let predicted_values = predicted
        .iter()
        .map(|z| z.current_value().into_owned())
        .collect();
    Ok(CurrentValueSeries {
        t,
        true_values,
        predicted_values,
    })
}

/// Paired series of true and predicted current values.
#[derive(Debug, Clone)]
pub struct CurrentValueSeries {
    pub t: Vec<f64>,
    pub true_values: Vec<DVector<f64>>,
    pub predicted_values: Vec<DVector<f64>>,
}

impl CurrentValueSeries {
    /// Header `t,true_x1,…,true_xn,pred_x1,…,pred_xn`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.true_values[0].len();
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("true_x{i}")))
            .chain((1..=n).map(|i| format!("pred_x{i}")))
            .collect();
        writeln!(f, "{}", header.join(","))?;
        for k in 0..self.t.len() {
            let mut row = vec![fmt_f64(self.t[k])];
            row.extend(self.true_values[k].iter().map(|&v| fmt_f64(v)));
            row.extend(self.predicted_values[k].iter().map(|&v| fmt_f64(v)));
            writeln!(f, "{}", row.join(","))?;
        }
        f.flush()?;
        Ok(())
    }

    /// Per-component max |true − pred| divided by the true component's range.
    pub fn relative_deviation(&self) -> Vec<f64> {
        let n = self.true_values[0].len();
        (0..n)
            .map(|c| {
                let mut dev = 0.0f64;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for k in 0..self.t.len() {
                    let tv = self.true_values[k][c];
                    dev = dev.max((tv - self.predicted_values[k][c]).abs());
                    lo = lo.min(tv);
                    hi = hi.max(tv);
                }
                if hi > lo {
                    dev / (hi - lo)
                } else {
                    dev
                }
            })
            .collect()
    }
}
