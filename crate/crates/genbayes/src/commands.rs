//! One function per subcommand. Each validates its full configuration before
//! running anything and writes its outputs only after every computation has
//! succeeded.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use genbayes_core::calibration::{hierarchical_posterior, operational_weight, unit_info_weight_from, OperationalConfig, WeightRule};
use genbayes_core::engines::{credible_interval, random_walk_mh, Chain, McmcConfig, Target};
use genbayes_core::loss::DensityModel;
use genbayes_core::math::mean_sd;
use genbayes_core::misspec::{concentration_experiment, ConcentrationSetup, TrueDensity};
use genbayes_core::quantiles::{bayesian_boxplot, empirical_quartiles, BoxplotConfig, SortedCheckLoss};
use genbayes_core::rng::{derive_seed, stream};
use genbayes_core::survival::{
    inclusion_probabilities, simulate_cox_data, single_marker_bf, variable_selection_mcmc, BfFlag, BfMethod, CoxLoss, CoxSimulation,
    SelectionConfig, DEFAULT_MODEL_CAP,
};
use genbayes_core::{DatasetLoss, Datum, GibbsPosterior, LogPrior, ParamPoint, PointLoss};

use crate::cli::Flags;
use crate::config::{
    load, resolve, BoxplotConfigFile, CoxBfConfig, CoxSelectConfig, DensitySpec, FamilySpec, FitConfig, GeneratorSpec, LossSpec,
    MisspecConfig, OneOrMany, PriorSpec, SimulateConfig, WeightSpec, DEFAULT_MC_DRAWS, DEFAULT_SEED, DEFAULT_W_MAX,
};
use crate::data::{read_fit_data, read_grouped, read_survival};
use crate::error::{CliError, Result, EXIT_OK, EXIT_PARTIAL};
use crate::output::{bitmask_hex, num, nums, sibling, write_atomic, RunHeader, TableWriter};
use crate::steps::local_widths;

pub const FIT_ITERATIONS: usize = 20_000;
pub const FIT_BURN_IN: usize = 5_000;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_SLAB_VARIANCE: f64 = 0.5;
pub const DEFAULT_IS_DRAWS: usize = 1_000;
pub const SELECT_ITERATIONS: usize = 100_000;
pub const SELECT_BURN_IN: usize = 10_000;
pub const BOXPLOT_ITERATIONS: usize = 100_000;
pub const BOXPLOT_BURN_IN: usize = 50_000;
pub const BOXPLOT_PRIOR_MEANS: [f64; 3] = [10.0, 20.0, 30.0];
pub const BOXPLOT_PRIOR_VARIANCE: f64 = 100.0;
pub const MISSPEC_SCHEDULE: [usize; 4] = [10, 100, 1_000, 10_000];
pub const MISSPEC_EPS: f64 = 0.1;
pub const MISSPEC_SEEDS: usize = 10;
pub const MISSPEC_PRIOR_VARIANCE: f64 = 10.0;

// Child-seed streams.
const UNIT_INFO_STREAM: u64 = 2;
const OPERATIONAL_STREAM: u64 = 3;

fn path_arg(flag: &Option<PathBuf>, config: &Option<PathBuf>, base: &Path, what: &str) -> Result<PathBuf> {
    match (flag, config) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(p)) => Ok(resolve(base, p)),
        (None, None) => Err(CliError::config(format!("no {what} path: give --{what} or set `{what}` in the config"))),
    }
}

fn check_run_length(iterations: usize, burn_in: usize, thin: usize) -> Result<()> {
    if iterations == 0 || burn_in >= iterations {
        return Err(CliError::config(format!("burn-in ({burn_in}) must be smaller than iterations ({iterations})")));
    }
    if thin == 0 {
        return Err(CliError::config("thin must be at least 1"));
    }
    Ok(())
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::config(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Iteration number (from one) of the `k`-th kept draw.
fn kept_iteration(burn_in: usize, thin: usize, k: usize) -> usize {
    burn_in + (k + 1) * thin
}

// ---------------------------------------------------------------- fit

fn loss_name(spec: &LossSpec) -> String {
    match spec {
        LossSpec::Squared => "squared".into(),
        LossSpec::Absolute => "absolute".into(),
        LossSpec::Pinball { tau } => format!("pinball(tau={})", num(*tau)),
        LossSpec::Huber { k } => format!("huber(k={})", num(*k)),
        LossSpec::Quartiles => "quartiles".into(),
        LossSpec::Normal { sd } => format!("normal(sd={})", num(*sd)),
        LossSpec::NormalLocationScale => "normal-location-scale".into(),
        LossSpec::Exponential => "exponential".into(),
    }
}

fn prior_name(spec: &PriorSpec) -> String {
    let list = |v: &OneOrMany| match v {
        OneOrMany::One(x) => num(*x),
        OneOrMany::Many(xs) => format!("[{}]", nums(xs).replace(',', ";")),
    };
    match spec {
        PriorSpec::Normal { means, variances } => format!("normal(means={};variances={})", list(means), list(variances)),
        PriorSpec::OrderedNormal { means, variances } => {
            format!("ordered-normal(means={};variances={})", list(means), list(variances))
        }
        PriorSpec::Uniform { lower, upper } => format!("uniform(lower={};upper={})", list(lower), list(upper)),
    }
}

/// Point loss and parameter dimension for the data shape.
fn build_loss(spec: &LossSpec, covariates: Option<usize>) -> Result<(PointLoss, usize)> {
    let scalar_only = |name: &str| CliError::config(format!("loss `{name}` needs a single-column data file"));
    let location_dim = covariates.unwrap_or(1);
    Ok(match spec {
        LossSpec::Squared => (PointLoss::Squared, location_dim),
        LossSpec::Absolute => (PointLoss::Absolute, location_dim),
        LossSpec::Pinball { tau } => (PointLoss::pinball(*tau)?, location_dim),
        LossSpec::Huber { k } => (PointLoss::huber(*k)?, location_dim),
        LossSpec::Normal { sd } => {
            if !(*sd > 0.0 && sd.is_finite()) {
                return Err(CliError::config("normal loss needs a positive sd"));
            }
            match covariates {
                None => (PointLoss::NegLogDensity(DensityModel::NormalLocation { sd: *sd }), 1),
                Some(q) => (PointLoss::NegLogDensity(DensityModel::NormalRegression { sd: *sd }), q),
            }
        }
        LossSpec::Quartiles if covariates.is_none() => (PointLoss::QuartileTriple, 3),
        LossSpec::NormalLocationScale if covariates.is_none() => (PointLoss::NegLogDensity(DensityModel::NormalLocationScale), 2),
        LossSpec::Exponential if covariates.is_none() => (PointLoss::NegLogDensity(DensityModel::Exponential), 1),
        LossSpec::Quartiles => return Err(scalar_only("quartiles")),
        LossSpec::NormalLocationScale => return Err(scalar_only("normal-location-scale")),
        LossSpec::Exponential => return Err(scalar_only("exponential")),
    })
}

/// Cumulative loss; check losses on scalar data use the sorted evaluator.
fn cumulative_loss(loss: &PointLoss, data: &[Datum], values: Option<&[f64]>) -> Result<DatasetLoss> {
    let fast: Option<SortedCheckLoss> = match (loss, values) {
        (PointLoss::Absolute, Some(v)) => Some(SortedCheckLoss::absolute(v)?),
        (PointLoss::Pinball { tau }, Some(v)) => Some(SortedCheckLoss::new(v, vec![(0, *tau, 1.0)])?),
        (PointLoss::QuartileTriple, Some(v)) => Some(SortedCheckLoss::quartile_triple(v)?),
        _ => None,
    };
    Ok(match fast {
        Some(f) => DatasetLoss::whole_sample(f),
        None => DatasetLoss::separable(loss.clone(), data.to_vec())?,
    })
}

/// A data-based starting guess for the loss minimizer.
fn initial_guess(loss: &PointLoss, values: Option<&[f64]>, prior: &LogPrior) -> Result<Vec<f64>> {
    let Some(v) = values else {
        return Ok(prior.mode().map(ParamPoint::into_values).unwrap_or_else(|_| vec![0.0; prior.dim()]));
    };
    let q = empirical_quartiles(v)?;
    let (mean, sd) = mean_sd(v);
    Ok(match loss {
        PointLoss::QuartileTriple => {
            let gap = 1e-3 * (q[2] - q[0]).max(sd).max(1e-6);
            if q[0] < q[1] && q[1] < q[2] {
                q.to_vec()
            } else {
                vec![q[1] - gap, q[1], q[1] + gap]
            }
        }
        PointLoss::NegLogDensity(DensityModel::NormalLocationScale) => vec![mean, sd.max(1e-6)],
        PointLoss::NegLogDensity(DensityModel::Exponential) => vec![1.0 / mean.max(1e-12)],
        PointLoss::Squared | PointLoss::NegLogDensity(_) => vec![mean],
        _ => vec![q[1]],
    })
}

fn minimizer_start(loss: &DatasetLoss, guess: Vec<f64>, prior: &LogPrior) -> Vec<f64> {
    use genbayes_core::engines::{nelder_mead, NelderMeadOptions};
    let constraint = prior.constraint();
    let objective = |t: &[f64]| if constraint.admits(t) { loss.eval(t).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
    let start_value = objective(&guess);
    if !start_value.is_finite() {
        return guess;
    }
    let opts = NelderMeadOptions { tolerance: 1e-10 * start_value.abs().max(1e-300), max_evals: 5_000 * guess.len(), ..Default::default() };
    match nelder_mead(objective, &guess, &opts) {
        Ok(fit) if fit.value <= start_value => fit.point,
        _ => guess,
    }
}

fn fill_steps<T: Target>(configured: &Option<Vec<f64>>, target: &T, start: &[f64]) -> Vec<f64> {
    configured.clone().unwrap_or_else(|| local_widths(target, start))
}

struct FitResult {
    chain: Chain<ParamPoint>,
    weight: f64,
    names: Vec<String>,
    notes: Vec<String>,
}

pub fn fit(flags: &Flags) -> Result<i32> {
    flags.reject("fit", &["method", "is-draws"])?;
    let (cfg, base): (FitConfig, _) = load(flags.config.as_deref())?;
    let seed = flags.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let iterations = flags.iters.or(cfg.iterations).unwrap_or(FIT_ITERATIONS);
    let burn_in = flags.burnin.or(cfg.burn_in).unwrap_or(FIT_BURN_IN);
    let thin = cfg.thin.unwrap_or(1);
    let level = flags.level.or(cfg.level).unwrap_or(DEFAULT_LEVEL);
    check_run_length(iterations, burn_in, thin)?;
    check_level(level)?;
    let data_path = path_arg(&flags.data, &cfg.data, &base, "data")?;
    let out = path_arg(&flags.out, &cfg.out, &base, "out")?;
    let loss_spec = cfg.loss.clone().ok_or_else(|| CliError::config("fit needs a [loss] table"))?;
    let prior_spec = cfg.prior.clone().ok_or_else(|| CliError::config("fit needs a [prior] table"))?;
    let weight_spec = cfg.weight.clone().unwrap_or_default();

    let (columns, data) = read_fit_data(&data_path)?;
    let covariates = (columns.len() > 1).then(|| columns.len() - 1);
    let (point_loss, dim) = build_loss(&loss_spec, covariates)?;
    let prior = prior_spec.build(dim)?;
    let values: Option<Vec<f64>> =
        covariates.is_none().then(|| data.iter().map(|d| if let Datum::Scalar(x) = d { *x } else { f64::NAN }).collect());
    if let Some(steps) = &cfg.step_scales {
        let expected = dim + usize::from(matches!(weight_spec, WeightSpec::Hierarchical { .. }));
        if steps.len() != expected || steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(CliError::config(format!("step_scales needs {expected} positive entries")));
        }
    }
    let rule = validate_weight(&weight_spec, seed, dim)?;

    let mut header = RunHeader::new("fit", seed);
    header
        .set("loss", loss_name(&loss_spec))
        .set("prior", prior_name(&prior_spec))
        .set("iterations", iterations)
        .set("burn_in", burn_in)
        .set("thin", thin)
        .set("level", num(level));

    let loss = cumulative_loss(&point_loss, &data, values.as_deref())?;
    let guess = initial_guess(&point_loss, values.as_deref(), &prior)?;
    let start = match &cfg.start {
        Some(s) if s.len() != dim => return Err(CliError::config(format!("start needs {dim} entries"))),
        Some(s) => s.clone(),
        None => minimizer_start(&loss, guess, &prior),
    };
    let theta_names: Vec<String> = (1..=dim).map(|k| format!("theta_{k}")).collect();

    let result = match (&weight_spec, rule) {
        (WeightSpec::Hierarchical { xi, w_max }, _) => {
            let w_max = w_max.unwrap_or(DEFAULT_W_MAX);
            if !(w_max > 0.0 && w_max.is_finite()) {
                return Err(CliError::config("w_max must be positive"));
            }
            header.set("weight", format!("hierarchical(xi={};w_max={})", num(*xi), num(w_max)));
            let joint_prior = LogPrior::product(vec![prior.clone(), LogPrior::uniform(vec![0.0], vec![w_max])?])?;
            let target = hierarchical_posterior(loss.clone(), joint_prior, *xi)?;
            // Conditional mode of w given theta at the start.
            let l0 = loss.eval(&start)?;
            let w0 = if l0 > 0.0 { (xi / l0).clamp(1e-6 * w_max, 0.5 * w_max) } else { 0.5 * w_max };
            let mut joint_start = start.clone();
            joint_start.push(if w0 > 0.0 { w0 } else { 0.5 * w_max });
            let steps = fill_steps(&cfg.step_scales, &target, &joint_start);
            let mcmc = McmcConfig { thin, start: Some(joint_start), ..McmcConfig::new(iterations, burn_in, steps, seed) };
            let chain = random_walk_mh(&target, &mcmc)?;
            let weight = chain.mean(dim);
            let mut names = theta_names;
            names.push("w".into());
            FitResult { chain, weight, names, notes: vec![format!("posterior_mean_w={}", num(weight))] }
        }
        (WeightSpec::Operational { alpha, grid, replications, coordinate, iterations: op_iters, burn_in: op_burn }, _) => {
            header.set(
                "weight",
                format!("operational(alpha={};grid=[{}];replications={replications})", num(*alpha), nums(grid).replace(',', ";")),
            );
            let unit = GibbsPosterior::new(loss.clone(), 1.0, prior.clone())?;
            let steps = fill_steps(&cfg.step_scales, &unit, &start);
            let op_mcmc = McmcConfig {
                thin,
                start: Some(start.clone()),
                ..McmcConfig::new(op_iters.unwrap_or(iterations), op_burn.unwrap_or(burn_in), steps.clone(), seed)
            };
            let op = OperationalConfig {
                alpha: *alpha,
                w_grid: grid.clone(),
                replications: *replications,
                coordinate: coordinate.unwrap_or(0),
                mcmc: op_mcmc,
            };
            let chosen = operational_weight(&point_loss, &prior, &data, &op, derive_seed(seed, OPERATIONAL_STREAM))?;
            let posterior = GibbsPosterior::new(loss, chosen.weight, prior.clone())?;
            let steps = fill_steps(&cfg.step_scales, &posterior, &start);
            let mcmc = McmcConfig { thin, start: Some(start.clone()), ..McmcConfig::new(iterations, burn_in, steps, seed) };
            let chain = random_walk_mh(&posterior, &mcmc)?;
            let mut notes = vec![format!("coverage=[{}]", nums(&chosen.coverage).replace(',', ";"))];
            if !chosen.monotone {
                notes.push("warning: coverage is not monotone in w".into());
            }
            FitResult { chain, weight: chosen.weight, names: theta_names, notes }
        }
        (_, rule) => {
            let (weight, notes) = match rule {
                WeightRule::Fixed(w) => {
                    header.set("weight", format!("fixed({})", num(w)));
                    (w, Vec::new())
                }
                WeightRule::UnitInformation { mc_draws, seed: ui_seed } => {
                    header.set("weight", format!("unit-information(mc_draws={mc_draws})"));
                    let ui = unit_info_weight_from(&prior, &point_loss, &data, ui_seed, mc_draws, &start)?;
                    let note = format!(
                        "unit_information numerator={} numerator_se={} denominator={}",
                        num(ui.numerator),
                        num(ui.numerator_se),
                        num(ui.denominator)
                    );
                    (ui.weight, vec![note])
                }
                _ => unreachable!("handled above"),
            };
            let posterior = GibbsPosterior::new(loss, weight, prior.clone())?;
            let start = if posterior.log_unnormalized(&start)?.is_finite() { Some(start) } else { None };
            let probe = start.clone().map_or_else(|| prior.mode().map(ParamPoint::into_values), Ok)?;
            let steps = fill_steps(&cfg.step_scales, &posterior, &probe);
            let mcmc = McmcConfig { thin, start, ..McmcConfig::new(iterations, burn_in, steps, seed) };
            let chain = random_walk_mh(&posterior, &mcmc)?;
            FitResult { chain, weight, names: theta_names, notes }
        }
    };

    let FitResult { chain, weight, names, notes } = result;
    let mut cols: Vec<&str> = vec!["iter"];
    cols.extend(names.iter().map(String::as_str));
    let mut draws = TableWriter::new(&header, &cols);
    for (k, d) in chain.draws.iter().enumerate() {
        let mut row = vec![kept_iteration(burn_in, thin, k).to_string()];
        row.extend(d.values().iter().map(|x| num(*x)));
        draws.row(row);
    }

    let map = chain.max_density_draw().map(|d| d.values().to_vec()).unwrap_or_default();
    let mut summary = TableWriter::new(&header, &["parameter", "map", "mean", "ci_lo", "ci_hi", "w", "acceptance"]);
    for (k, name) in names.iter().enumerate() {
        let (lo, hi) = credible_interval(&chain, k, level)?;
        summary.row([name.clone(), num(map[k]), num(chain.mean(k)), num(lo), num(hi), num(weight), num(chain.acceptance_rate)]);
    }
    for n in notes {
        summary.note(n);
    }
    write_atomic(&out, &draws.into_bytes())?;
    write_atomic(&sibling(&out, "summary", "csv"), &summary.into_bytes())?;
    Ok(EXIT_OK)
}

/// Checks the weight settings and turns the simple rules into core rules.
fn validate_weight(spec: &WeightSpec, seed: u64, dim: usize) -> Result<WeightRule> {
    let rule = match spec {
        WeightSpec::Fixed { value } => WeightRule::Fixed(*value),
        WeightSpec::UnitInformation { mc_draws } => {
            WeightRule::UnitInformation { mc_draws: mc_draws.unwrap_or(DEFAULT_MC_DRAWS), seed: derive_seed(seed, UNIT_INFO_STREAM) }
        }
        WeightSpec::Hierarchical { xi, .. } => WeightRule::Hierarchical { xi: *xi },
        WeightSpec::Operational { coordinate, iterations, burn_in, alpha, grid, replications } => {
            if coordinate.unwrap_or(0) >= dim {
                return Err(CliError::config(format!("operational coordinate must be below {dim}")));
            }
            if let (Some(i), Some(b)) = (iterations, burn_in) {
                check_run_length(*i, *b, 1)?;
            }
            let probe = OperationalConfig {
                alpha: *alpha,
                w_grid: grid.clone(),
                replications: *replications,
                coordinate: 0,
                mcmc: McmcConfig::new(2, 1, vec![1.0; dim], 0),
            };
            probe.validate()?;
            WeightRule::Operational(probe)
        }
    };
    rule.validate()?;
    Ok(rule)
}

// ---------------------------------------------------------------- cox-bf

fn parse_method(name: &str, draws: usize) -> Result<BfMethod> {
    match name {
        "laplace" => Ok(BfMethod::Laplace),
        "quadrature" => Ok(BfMethod::Quadrature),
        "importance" => Ok(BfMethod::Importance { draws, seed: 0 }),
        other => Err(CliError::config(format!("unknown method `{other}` (laplace, quadrature, importance)"))),
    }
}

pub fn cox_bf(flags: &Flags) -> Result<i32> {
    flags.reject("cox-bf", &["iters", "burnin", "level"])?;
    let (cfg, base): (CoxBfConfig, _) = load(flags.config.as_deref())?;
    let seed = flags.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let data_path = path_arg(&flags.data, &cfg.data, &base, "data")?;
    let out = path_arg(&flags.out, &cfg.out, &base, "out")?;
    let names = flags.method.clone().or(cfg.methods.clone()).unwrap_or_else(|| vec!["laplace".into()]);
    let is_draws = flags.is_draws.or(cfg.is_draws).unwrap_or(DEFAULT_IS_DRAWS);
    if names.is_empty() || names.len() > 2 {
        return Err(CliError::config("give one or two methods"));
    }
    if is_draws < 2 {
        return Err(CliError::config("importance sampling needs at least 2 draws"));
    }
    let methods = names.iter().map(|n| parse_method(n, is_draws)).collect::<Result<Vec<_>>>()?;
    let v_spec = cfg.v.clone().unwrap_or(OneOrMany::One(DEFAULT_SLAB_VARIANCE));

    let (markers, data) = read_survival(&data_path)?;
    let v = v_spec.expand(markers.len(), "v")?;
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(CliError::config("slab variances must be positive"));
    }
    let loss = CoxLoss::new(Arc::new(data));

    let mut header = RunHeader::new("cox-bf", seed);
    header.set("v", describe_broadcast(&v_spec)).set("methods", names.join(";"));
    if methods.iter().any(|m| matches!(m, BfMethod::Importance { .. })) {
        header.set("is_draws", is_draws);
    }
    let mut cols = vec!["marker".to_owned()];
    cols.extend(names.iter().map(|n| format!("logbf_{n}")));
    cols.extend(["se".to_owned(), "flag".to_owned()]);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = TableWriter::new(&header, &cols);

    for (j, name) in markers.iter().enumerate() {
        let mut row = vec![name.clone()];
        let mut se = None;
        let mut flag = BfFlag::Ok;
        for method in &methods {
            let method = match method {
                BfMethod::Importance { draws, .. } => BfMethod::Importance { draws: *draws, seed: derive_seed(seed, j as u64 + 1) },
                m => *m,
            };
            let bf = single_marker_bf(&loss, j, v[j], method)?;
            row.push(num(bf.log_bf));
            se = se.or(bf.std_error);
            if flag == BfFlag::Ok {
                flag = bf.flag;
            }
        }
        row.push(se.map(num).unwrap_or_default());
        row.push(flag.name().to_owned());
        table.row(row);
    }
    write_atomic(&out, &table.into_bytes())?;
    Ok(EXIT_OK)
}

fn describe_broadcast(v: &OneOrMany) -> String {
    match v {
        OneOrMany::One(x) => num(*x),
        OneOrMany::Many(xs) => format!("[{}]", nums(xs).replace(',', ";")),
    }
}

// ---------------------------------------------------------------- cox-select

pub fn cox_select(flags: &Flags) -> Result<i32> {
    flags.reject("cox-select", &["method", "level", "is-draws"])?;
    let (cfg, base): (CoxSelectConfig, _) = load(flags.config.as_deref())?;
    let seed = flags.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let iterations = flags.iters.or(cfg.iterations).unwrap_or(SELECT_ITERATIONS);
    let burn_in = flags.burnin.or(cfg.burn_in).unwrap_or(SELECT_BURN_IN);
    let thin = cfg.thin.unwrap_or(1);
    check_run_length(iterations, burn_in, thin)?;
    let data_path = path_arg(&flags.data, &cfg.data, &base, "data")?;
    let out = path_arg(&flags.out, &cfg.out, &base, "out")?;
    let v_spec = cfg.v.clone().unwrap_or(OneOrMany::One(DEFAULT_SLAB_VARIANCE));
    let model_cap = cfg.model_cap.unwrap_or(DEFAULT_MODEL_CAP);

    let (markers, data) = read_survival(&data_path)?;
    let p = markers.len();
    let v = v_spec.expand(p, "v")?;
    let a = match &cfg.a {
        Some(spec) => spec.expand(p, "a")?,
        None => vec![1.0 / p as f64; p],
    };
    let prior = LogPrior::spike_slab(v, a)?;
    let config = SelectionConfig { thin, model_cap, ..SelectionConfig::new(iterations, burn_in, seed) };
    config.validate()?;
    let loss = CoxLoss::new(Arc::new(data));

    let mut header = RunHeader::new("cox-select", seed);
    header
        .set("v", describe_broadcast(&v_spec))
        .set("a", cfg.a.as_ref().map_or_else(|| "1/p".to_owned(), describe_broadcast))
        .set("iterations", iterations)
        .set("burn_in", burn_in)
        .set("thin", thin)
        .set("model_cap", model_cap);

    let chain = variable_selection_mcmc(&loss, &prior, &config)?;
    let probs = inclusion_probabilities(&chain)?;

    let mut incl = TableWriter::new(&header, &["marker", "prob"]);
    for (name, pr) in markers.iter().zip(&probs) {
        incl.row([name.clone(), num(*pr)]);
    }
    let stats = format!("acceptance={} failed_proposals={}", num(chain.acceptance_rate), chain.failed_proposals);
    incl.note(stats.clone());
    let mut states = TableWriter::new(&header, &["iter", "accepted", "model_size", "delta_bitmask_hex"]);
    for (k, (s, acc)) in chain.states.iter().zip(&chain.accepted).enumerate() {
        states.row([
            kept_iteration(burn_in, thin, k).to_string(),
            u8::from(*acc).to_string(),
            s.size().to_string(),
            bitmask_hex(s.delta()),
        ]);
    }
    states.note(stats);
    write_atomic(&out, &incl.into_bytes())?;
    write_atomic(&sibling(&out, "states", "csv"), &states.into_bytes())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- boxplot

pub fn boxplot(flags: &Flags) -> Result<i32> {
    flags.reject("boxplot", &["method", "is-draws"])?;
    let (cfg, base): (BoxplotConfigFile, _) = load(flags.config.as_deref())?;
    let seed = flags.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let iterations = flags.iters.or(cfg.iterations).unwrap_or(BOXPLOT_ITERATIONS);
    let burn_in = flags.burnin.or(cfg.burn_in).unwrap_or(BOXPLOT_BURN_IN);
    let thin = cfg.thin.unwrap_or(1);
    let level = flags.level.or(cfg.level).unwrap_or(DEFAULT_LEVEL);
    check_run_length(iterations, burn_in, thin)?;
    check_level(level)?;
    let data_path = path_arg(&flags.data, &cfg.data, &base, "data")?;
    let out = path_arg(&flags.out, &cfg.out, &base, "out")?;
    let means = cfg.prior_means.unwrap_or(BOXPLOT_PRIOR_MEANS);
    let variances = cfg.prior_variances.clone().unwrap_or(OneOrMany::One(BOXPLOT_PRIOR_VARIANCE)).expand(3, "prior_variances")?;
    let prior = LogPrior::ordered_normal(means.to_vec(), variances.clone())?;
    let weight_spec = cfg.weight.clone().unwrap_or(WeightSpec::UnitInformation { mc_draws: None });
    let rule = match &weight_spec {
        WeightSpec::Fixed { .. } | WeightSpec::UnitInformation { .. } => validate_weight(&weight_spec, seed, 3)?,
        _ => return Err(CliError::config("boxplot supports the fixed and unit-information weight rules")),
    };
    let step_scales = cfg.step_scales.clone().unwrap_or_default();
    if !step_scales.is_empty() && (step_scales.len() != 3 || step_scales.iter().any(|s| !(*s > 0.0 && s.is_finite()))) {
        return Err(CliError::config("step_scales needs 3 positive entries"));
    }
    let data = read_grouped(&data_path)?;

    let mut header = RunHeader::new("boxplot", seed);
    let prior_text: Vec<String> = means.iter().zip(&variances).map(|(m, v)| format!("N({},{})", num(*m), num(*v))).collect();
    header
        .set("prior", prior_text.join(","))
        .set("iterations", iterations)
        .set("burn_in", burn_in)
        .set("thin", thin)
        .set("level", num(level))
        .set(
            "weight",
            match &rule {
                WeightRule::Fixed(w) => format!("fixed({})", num(*w)),
                WeightRule::UnitInformation { mc_draws, .. } => format!("unit-information(mc_draws={mc_draws})"),
                _ => unreachable!("rejected above"),
            },
        );

    let config = BoxplotConfig { iterations, burn_in, thin, level, seed, step_scales };
    let summary = bayesian_boxplot(&data, &[prior], &rule, &config)?;
    if summary.groups.iter().all(|g| g.is_err()) {
        let first = summary.groups.into_iter().find_map(std::result::Result::err).expect("at least one group");
        return Err(first.error.into());
    }

    let cols = ["label", "n", "q1", "q2", "q3", "w", "ci1_lo", "ci1_hi", "ci2_lo", "ci2_hi", "ci3_lo", "ci3_hi", "acceptance"];
    let mut table = TableWriter::new(&header, &cols);
    let mut failed = 0;
    for group in &summary.groups {
        match group {
            Ok(g) => {
                let mut row = vec![g.label.clone(), g.n.to_string()];
                row.extend(g.quartiles.iter().map(|q| num(*q)));
                row.push(num(g.weight));
                for (lo, hi) in g.intervals {
                    row.push(num(lo));
                    row.push(num(hi));
                }
                row.push(num(g.acceptance));
                table.row(row);
            }
            Err(f) => {
                failed += 1;
                eprintln!("genbayes boxplot: group `{}` failed: {}", f.label, f.error);
                table.note(format!("failed group={} error={}", f.label, f.error));
            }
        }
    }
    write_atomic(&out, &table.into_bytes())?;
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

// ---------------------------------------------------------------- misspec

fn density_name(spec: &DensitySpec) -> String {
    match spec {
        DensitySpec::Normal { mean, var } => format!("normal(mean={};var={})", num(*mean), num(*var)),
        DensitySpec::Mixture { weights, means, vars } => format!(
            "mixture(weights=[{}];means=[{}];vars=[{}])",
            nums(weights).replace(',', ";"),
            nums(means).replace(',', ";"),
            nums(vars).replace(',', ";")
        ),
        DensitySpec::Exponential { rate } => format!("exponential(rate={})", num(*rate)),
    }
}

pub fn misspec(flags: &Flags) -> Result<i32> {
    flags.reject("misspec", &["iters", "burnin", "data", "method", "level", "is-draws"])?;
    let (cfg, base): (MisspecConfig, _) = load(flags.config.as_deref())?;
    let seed = flags.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let out = path_arg(&flags.out, &cfg.out, &base, "out")?;
    let truth_spec = cfg.truth.clone().ok_or_else(|| CliError::config("misspec needs a [truth] table"))?;
    let family_spec = cfg.family.clone().unwrap_or(FamilySpec::NormalLocation { var: 1.0 });
    let prior_spec =
        cfg.prior.clone().unwrap_or(PriorSpec::Normal { means: OneOrMany::One(0.0), variances: OneOrMany::One(MISSPEC_PRIOR_VARIANCE) });
    let schedule = cfg.schedule.clone().unwrap_or_else(|| MISSPEC_SCHEDULE.to_vec());
    let radii = match cfg.eps.clone().unwrap_or(OneOrMany::One(MISSPEC_EPS)) {
        OneOrMany::One(e) => vec![e],
        OneOrMany::Many(es) => es,
    };
    let n_seeds = cfg.n_seeds.unwrap_or(MISSPEC_SEEDS);
    if n_seeds == 0 {
        return Err(CliError::config("n_seeds must be at least 1"));
    }
    let truth: TrueDensity = truth_spec.build()?;
    let family = family_spec.build()?;
    let prior = prior_spec.build(family.dim())?;
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| derive_seed(seed, k + 1)).collect();
    let setup = ConcentrationSetup { schedule, radii, seeds };

    let report = concentration_experiment(&truth, &family, &prior, &setup)?;

    let mut header = RunHeader::new("misspec", seed);
    header
        .set("truth", density_name(&truth_spec))
        .set(
            "family",
            match family_spec {
                FamilySpec::NormalLocation { var } => format!("normal-location(var={})", num(var)),
                FamilySpec::NormalLocationScale => "normal-location-scale".into(),
            },
        )
        .set("prior", prior_name(&prior_spec))
        .set("n_seeds", n_seeds)
        .set("theta0", num(report.theta0))
        .set("kl_min", num(report.divergence))
        .set("grid_step", num(report.grid_step));
    let mut table = TableWriter::new(&header, &["n", "eps", "mass_mean", "mass_sd", "seeds"]);
    for r in &report.rows {
        table.row([r.n.to_string(), num(r.eps), num(r.mass_mean), num(r.mass_sd), r.seeds.to_string()]);
    }
    write_atomic(&out, &table.into_bytes())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- simulate

fn check_generator(spec: &GeneratorSpec) -> Result<()> {
    let positive_n = |n: usize, what: &str| if n == 0 { Err(CliError::config(format!("{what} needs n >= 1"))) } else { Ok(()) };
    match spec {
        GeneratorSpec::Cox { n, beta, .. } => {
            positive_n(*n, "cox generator")?;
            if beta.is_empty() {
                return Err(CliError::config("cox generator needs at least one beta"));
            }
        }
        GeneratorSpec::Grouped { groups } => {
            if groups.is_empty() {
                return Err(CliError::config("grouped generator needs at least one group"));
            }
            for (g, spec) in groups.iter().enumerate() {
                positive_n(spec.n, &format!("group `{}`", spec.label))?;
                if groups[..g].iter().any(|o| o.label == spec.label) {
                    return Err(CliError::config(format!("duplicate group label `{}`", spec.label)));
                }
                spec.distribution.build()?;
            }
        }
        GeneratorSpec::Scalar { n, distribution } => {
            positive_n(*n, "scalar generator")?;
            distribution.build()?;
        }
    }
    Ok(())
}

pub fn simulate(flags: &Flags) -> Result<i32> {
    flags.reject("simulate", &["iters", "burnin", "data", "method", "level", "is-draws"])?;
    let (cfg, base): (SimulateConfig, _) = load(flags.config.as_deref())?;
    let seed = flags.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let out = path_arg(&flags.out, &cfg.out, &base, "out")?;
    let generator = cfg.generator.clone().ok_or_else(|| CliError::config("simulate needs a [generator] table"))?;
    check_generator(&generator)?;

    let mut header = RunHeader::new("simulate", seed);
    let table = match &generator {
        GeneratorSpec::Cox { n, beta, baseline_hazard, censoring, maf } => {
            let sim = CoxSimulation {
                n: *n,
                beta: beta.clone(),
                baseline_hazard: *baseline_hazard,
                censoring: *censoring,
                minor_allele_freqs: maf.expand(beta.len(), "maf")?,
                seed,
            };
            sim.validate()?;
            header.set("generator", "cox");
            let data = simulate_cox_data(&sim)?;
            let mut cols = vec!["time".to_owned(), "event".to_owned()];
            cols.extend((1..=data.p()).map(|j| format!("x{j}")));
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut t = TableWriter::new(&header, &cols);
            for i in 0..data.n() {
                let mut row = vec![num(data.times()[i]), u8::from(data.events()[i]).to_string()];
                row.extend(data.row(i).iter().map(|x| num(*x)));
                t.row(row);
            }
            t
        }
        GeneratorSpec::Grouped { groups } => {
            header.set("generator", "grouped");
            let mut t = TableWriter::new(&header, &["group", "value"]);
            for (g, spec) in groups.iter().enumerate() {
                let values = spec.distribution.build()?.sample_n(&mut stream(seed, g as u64 + 1), spec.n);
                for x in values {
                    t.row([spec.label.clone(), num(x)]);
                }
            }
            t
        }
        GeneratorSpec::Scalar { n, distribution } => {
            header.set("generator", "scalar");
            let values = distribution.build()?.sample_n(&mut stream(seed, 1), *n);
            let mut t = TableWriter::new(&header, &["x"]);
            for x in values {
                t.row([num(x)]);
            }
            t
        }
    };

    // The manifest sits next to the data, so the bare file name resolves
    // back to the same output when it is used as a config.
    let manifest = SimulateConfig { seed: Some(seed), out: out.file_name().map(PathBuf::from), generator: Some(generator) };
    let text = toml::to_string(&manifest).map_err(|e| CliError::config(e.to_string()))?;
    let manifest_bytes = format!("{}\n{text}", header.line()).into_bytes();
    write_atomic(&out, &table.into_bytes())?;
    write_atomic(&sibling(&out, "manifest", "toml"), &manifest_bytes)?;
    Ok(EXIT_OK)
}
