//! Parameter blocks for each experiment kind and their runners.

use clap::ValueEnum;
use rand::SeedableRng;
use serde_json::{json, Map, Value};

use impuritylab::error::Error;
use impuritylab::exactmb::{fcs_check, run_particle, ParticleConfig, DEFAULT_DT, DEFAULT_TOL, DENSE_MAX_SITES};
use impuritylab::freeprop::{
    finite_size_time, fit_power_law, local_maxima, time_grid, PowerLawFit, ReturnSeries, SpectralPropagator,
};
use impuritylab::gaussian::{GaussianState, NumberDistribution};
use impuritylab::lattice::{build_hopping, build_kitaev, ChainSpec, ImpurityVariant};
use impuritylab::monitored::{placement_region, Monitor, MonitoredConfig, Placement};
use impuritylab::opdyn::{majorana_free_evolve, run_operator, FloquetSpec, MajoranaVector, OperatorConfig};
use impuritylab::renewal::{config_entropy, free_kernel, solve_renewal, ConfigEntropyParams, KernelSource};

use crate::output::{Cell, Csv};
use crate::params::Params;

/// Largest deviation accepted between the two counting-statistics routes.
pub const FCS_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Monitored,
    Particle,
    Operator,
    ReturnProb,
    Renewal,
    EntropyEstimate,
    FcsCheck,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Monitored => "monitored",
            Kind::Particle => "particle",
            Kind::Operator => "operator",
            Kind::ReturnProb => "return-prob",
            Kind::Renewal => "renewal",
            Kind::EntropyEstimate => "entropy-estimate",
            Kind::FcsCheck => "fcs-check",
        }
    }
}

/// Why a run did not succeed, with its exit code.
#[derive(Debug)]
pub enum Failure {
    Config(Vec<String>),
    Resource { message: String, required_bytes: Option<u128> },
    Io(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Resource { .. } | Failure::Io(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, messages, extra) = match self {
            Failure::Config(m) => ("config", m.clone(), Value::Null),
            Failure::Resource { message, required_bytes } => {
                ("resource", vec![message.clone()], required_bytes.map_or(Value::Null, |b| json!(b.to_string())))
            }
            Failure::Io(m) => ("io", vec![m.clone()], Value::Null),
            Failure::Numerical(m) => ("numerical", vec![m.clone()], Value::Null),
        };
        let mut out = json!({"error": kind, "exit_code": self.exit_code(), "messages": messages});
        if !extra.is_null() {
            out["required_bytes"] = extra;
        }
        out
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        if e.is_resource() {
            let mut inner = &e;
            while let Error::Trajectory { source, .. } = inner {
                inner = source;
            }
            let required_bytes = match inner {
                Error::Resource { required_bytes, .. } => Some(*required_bytes),
                _ => None,
            };
            Failure::Resource { message, required_bytes }
        } else if e.is_config() {
            Failure::Config(vec![message])
        } else {
            Failure::Numerical(message)
        }
    }
}

/// A validated experiment: the typed job plus the effective parameters.
pub struct Experiment {
    pub kind: Kind,
    pub seed: u64,
    /// Zero selects one worker per core.
    pub workers: usize,
    pub out: std::path::PathBuf,
    pub echo: Value,
    job: Job,
}

enum Job {
    Monitored { cfg: MonitoredConfig, fit: Option<(f64, f64)> },
    Particle(ParticleConfig),
    Operator(OperatorConfig),
    Kitaev { len: usize, mu: f64, lambda: f64, dt: f64, t_max: f64, cut: Option<usize> },
    ReturnProb { chain: ChainSpec, placement: Placement, m: usize, dt: f64, t_max: f64, fit: Option<(f64, f64)> },
    Renewal { source: KernelSource, p_m: f64, dt: f64, t_max: f64, fit: Option<(f64, f64)> },
    Entropy { xi: f64, v: f64, t_min: f64, t_max: f64, dt: f64 },
    Fcs { len: usize },
}

/// Files and a JSON summary produced by a run.
pub struct Products {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
    /// Set when the run finished but violated a numerical contract.
    pub violation: Option<String>,
}

fn placement(p: &mut Params) -> Placement {
    match p.choice("placement", &["boundary", "bulk"], "boundary") {
        "bulk" => Placement::Bulk,
        _ => Placement::Boundary,
    }
}

fn variant(p: &mut Params, default: &'static str) -> ImpurityVariant {
    let v = p.choice("variant", &["density2", "density3", "raise3", "parity_breaking"], default);
    v.parse().expect("listed variant names parse")
}

fn positive(p: &mut Params, key: &'static str, x: f64) {
    p.check(x > 0.0 && x.is_finite(), key, &format!("must be positive, got {x}"));
}

fn collect<T>(p: &mut Params, r: Result<T, Error>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            p.error(e.to_string());
            None
        }
    }
}

fn placement_name(p: Placement) -> &'static str {
    match p {
        Placement::Boundary => "boundary",
        Placement::Bulk => "bulk",
    }
}

/// Validates a flat parameter object for `kind`, reporting every problem.
pub fn parse(kind: Kind, map: Map<String, Value>) -> Result<Experiment, Failure> {
    let mut p = Params::new(map);
    let seed = p.u64("seed").unwrap_or(0);
    let workers = p.typed_workers().unwrap_or(0);
    let out = p.string("out").unwrap_or_else(|| "impuritylab-out".into());
    let parsed = match kind {
        Kind::Monitored => parse_monitored(&mut p, seed),
        Kind::Particle => parse_particle(&mut p),
        Kind::Operator => parse_operator(&mut p),
        Kind::ReturnProb => parse_return_prob(&mut p),
        Kind::Renewal => parse_renewal(&mut p),
        Kind::EntropyEstimate => parse_entropy(&mut p),
        Kind::FcsCheck => parse_fcs(&mut p),
    };
    let errors = p.finish();
    match parsed {
        Some((job, mut echo)) if errors.is_empty() => {
            echo["seed"] = json!(seed);
            echo["out"] = json!(out);
            Ok(Experiment { kind, seed, workers, out: out.into(), echo, job })
        }
        _ => Err(Failure::Config(errors)),
    }
}

impl Params {
    /// `workers`: a positive integer or `"auto"`.
    fn typed_workers(&mut self) -> Option<usize> {
        let v = self.json("workers")?;
        match v {
            Value::String(s) if s == "auto" => Some(0),
            Value::Number(n) if n.as_u64().is_some_and(|w| w >= 1) => n.as_u64().map(|w| w as usize),
            other => {
                self.error(format!("workers: expected a positive integer or \"auto\", got {other}"));
                None
            }
        }
    }
}

fn parse_monitored(p: &mut Params, seed: u64) -> Option<(Job, Value)> {
    let len = p.required("L", Params::usize);
    let p_m = p.required("p_m", Params::f64);
    let steps = p.required("steps", Params::usize);
    let samples = p.required("samples", Params::usize);
    let dt = p.f64("dt").unwrap_or(impuritylab::monitored::DEFAULT_DT);
    let m = p.usize("m").unwrap_or(impuritylab::lattice::DEFAULT_REGION_SIZE);
    let place = placement(p);
    let checkpoints = p.usize_list("checkpoints").unwrap_or_default();
    let fit = p.window("fit_window");
    if let Some(x) = p_m {
        p.check((0.0..=1.0).contains(&x), "p_m", &format!("must lie in [0, 1], got {x}"));
    }
    positive(p, "dt", dt);
    p.check(m >= 1, "m", "must be at least 1");
    if let Some(s) = samples {
        p.check(s >= 1, "samples", "must be at least 1");
    }
    if let Some(s) = steps {
        p.check(s >= 1, "steps", "must be at least 1");
        if let Some(&c) = checkpoints.iter().find(|&&c| c == 0 || c > s) {
            p.error(format!("checkpoints: step {c} outside 1..={s}"));
        }
    }
    let chain = collect(p, ChainSpec::new(len?))?;
    let (region, source) = collect(p, placement_region(&chain, place, m))?;
    let cfg = MonitoredConfig {
        chain,
        region,
        source,
        p_m: p_m?,
        dt,
        steps: steps?,
        samples: samples?,
        seed,
        distribution_checkpoints: checkpoints.clone(),
    };
    if !p.has_errors() {
        collect(p, cfg.validate())?;
    }
    let echo = json!({
        "L": cfg.chain.len(), "p_m": cfg.p_m, "steps": cfg.steps, "samples": cfg.samples, "dt": dt, "m": m,
        "placement": placement_name(place), "checkpoints": checkpoints, "fit_window": fit.map(|w| [w.0, w.1]),
    });
    Some((Job::Monitored { cfg, fit }, echo))
}

fn parse_particle(p: &mut Params) -> Option<(Job, Value)> {
    let len = p.required("L", Params::usize);
    let var = variant(p, "raise3");
    let delta = p.required("delta", Params::f64);
    let place = placement(p);
    let t_max = p.f64("t_max");
    let dt = p.f64("dt").unwrap_or(DEFAULT_DT);
    let tol = p.f64("tol").unwrap_or(DEFAULT_TOL);
    let checkpoints = p.f64_list("checkpoints").unwrap_or_default();
    positive(p, "dt", dt);
    positive(p, "tol", tol);
    if let Some(t) = t_max {
        p.check(t >= 0.0 && t.is_finite(), "t_max", &format!("must be nonnegative, got {t}"));
    }
    if let Some(d) = delta {
        p.check(d.is_finite(), "delta", "must be finite");
    }
    let mut cfg = collect(p, ParticleConfig::new(len?, var, delta?, place, 0.0))?;
    cfg.t_max = t_max.unwrap_or_else(|| cfg.t_edge());
    cfg.dt = dt;
    cfg.tol = tol;
    cfg.checkpoints = checkpoints.clone();
    if let Some(&c) = checkpoints.iter().find(|&&c| !(0.0..=cfg.t_max).contains(&c)) {
        p.error(format!("checkpoints: time {c} outside [0, {}]", cfg.t_max));
    }
    if !p.has_errors() {
        collect(p, cfg.validate())?;
    }
    let echo = json!({
        "L": len, "variant": var.name(), "delta": delta, "placement": placement_name(place),
        "t_max": cfg.t_max, "dt": dt, "tol": tol, "checkpoints": checkpoints,
    });
    Some((Job::Particle(cfg), echo))
}

/// `cut`: a bond `1..L-1`, or 0 to skip the entanglement column.
fn cut(p: &mut Params, len: Option<usize>, default: Option<usize>) -> Option<usize> {
    match p.usize("cut") {
        None => default,
        Some(0) => None,
        Some(c) => {
            if let Some(l) = len {
                p.check(c < l, "cut", &format!("bond {c} must lie in 1..{l}"));
            }
            Some(c)
        }
    }
}

fn parse_operator(p: &mut Params) -> Option<(Job, Value)> {
    let model = p.choice("model", &["impurity", "kitaev"], "impurity");
    let len = p.required("L", Params::usize);
    let dt = p.f64("dt").unwrap_or(0.1);
    let t_max = p.f64("t_max");
    positive(p, "dt", dt);
    if let Some(t) = t_max {
        p.check(t >= 0.0 && t.is_finite(), "t_max", &format!("must be nonnegative, got {t}"));
    }
    if let Some(l) = len {
        p.check(l >= 2, "L", "must be at least 2");
    }
    if model == "kitaev" {
        let mu = p.required("mu", Params::f64);
        let lambda = p.f64("lambda").unwrap_or(1.0);
        let c = cut(p, len, None);
        let len = len?;
        let t_max = t_max.unwrap_or_else(|| finite_size_time(len, 1));
        let echo = json!({"model": model, "L": len, "mu": mu, "lambda": lambda, "dt": dt, "t_max": t_max, "cut": c});
        return Some((Job::Kitaev { len, mu: mu?, lambda, dt, t_max, cut: c }, echo));
    }
    let var = variant(p, "density2");
    let delta = p.required("delta", Params::f64);
    let place = placement(p);
    let omega = p.f64("omega");
    if let Some(w) = omega {
        positive(p, "omega", w);
    }
    let mut cfg = collect(p, OperatorConfig::new(len?, var, delta?, place))?;
    cfg.cut = cut(p, len, cfg.cut);
    cfg.dt = dt;
    if let Some(t) = t_max {
        cfg.t_max = t;
    }
    if let Some(w) = omega {
        cfg.floquet = Some(collect(p, FloquetSpec::new(w))?);
    }
    let echo = json!({
        "model": model, "L": len, "variant": var.name(), "delta": delta, "placement": placement_name(place),
        "dt": dt, "t_max": cfg.t_max, "omega": omega, "cut": cfg.cut,
    });
    Some((Job::Operator(cfg), echo))
}

fn parse_return_prob(p: &mut Params) -> Option<(Job, Value)> {
    let len = p.required("L", Params::usize);
    let place = placement(p);
    let m = p.usize("m").unwrap_or(1);
    let dt = p.f64("dt").unwrap_or(0.1);
    let t_max = p.f64("t_max");
    let fit = p.window("fit_window");
    positive(p, "dt", dt);
    p.check(m >= 1, "m", "must be at least 1");
    let chain = collect(p, ChainSpec::new(len?))?;
    let (_, source) = collect(p, placement_region(&chain, place, m))?;
    let t_max = t_max.unwrap_or_else(|| finite_size_time(chain.len(), source));
    p.check(t_max >= 0.0 && t_max.is_finite(), "t_max", &format!("must be nonnegative, got {t_max}"));
    let echo = json!({
        "L": len, "placement": placement_name(place), "m": m, "dt": dt, "t_max": t_max,
        "fit_window": fit.map(|w| [w.0, w.1]),
    });
    Some((Job::ReturnProb { chain, placement: place, m, dt, t_max, fit }, echo))
}

fn parse_renewal(p: &mut Params) -> Option<(Job, Value)> {
    let source = match p.choice("kernel", &["bulk", "boundary"], "bulk") {
        "boundary" => KernelSource::Boundary,
        _ => KernelSource::Bulk,
    };
    let p_m = p.required("p_m", Params::f64);
    let dt = p.f64("dt").unwrap_or(impuritylab::renewal::DEFAULT_GRID_STEP);
    let t_max = p.f64("t_max").unwrap_or(impuritylab::renewal::DEFAULT_T_MAX);
    let fit = p.window("fit_window");
    if let Some(x) = p_m {
        p.check((0.0..=1.0).contains(&x), "p_m", &format!("must lie in [0, 1], got {x}"));
    }
    positive(p, "dt", dt);
    positive(p, "t_max", t_max);
    let kernel = if source == KernelSource::Bulk { "bulk" } else { "boundary" };
    let echo = json!({"kernel": kernel, "p_m": p_m, "dt": dt, "t_max": t_max, "fit_window": fit.map(|w| [w.0, w.1])});
    Some((Job::Renewal { source, p_m: p_m?, dt, t_max, fit }, echo))
}

fn parse_entropy(p: &mut Params) -> Option<(Job, Value)> {
    let xi = p.required("xi", Params::f64);
    let v = p.f64("v").unwrap_or(impuritylab::renewal::DEFAULT_VELOCITY);
    let t_max = p.required("t_max", Params::f64);
    let dt = p.f64("dt").unwrap_or(1.0);
    if let Some(x) = xi {
        positive(p, "xi", x);
    }
    positive(p, "v", v);
    positive(p, "dt", dt);
    let t_min = 1.0 / v;
    let t_min = p.f64("t_min").unwrap_or(t_min);
    p.check(t_min * v >= 1.0, "t_min", &format!("light cone v·t_min must hold a site, got {}", t_min * v));
    if let Some(t) = t_max {
        p.check(t >= t_min, "t_max", &format!("must be at least t_min = {t_min}"));
    }
    let echo = json!({"xi": xi, "v": v, "t_min": t_min, "t_max": t_max, "dt": dt});
    Some((Job::Entropy { xi: xi?, v, t_min, t_max: t_max?, dt }, echo))
}

fn parse_fcs(p: &mut Params) -> Option<(Job, Value)> {
    let len = p.usize("L").unwrap_or(6);
    p.check((1..=DENSE_MAX_SITES).contains(&len), "L", &format!("must lie in 1..={DENSE_MAX_SITES}"));
    Some((Job::Fcs { len }, json!({"L": len})))
}

fn fit_json(fit: &PowerLawFit) -> Value {
    json!({
        "exponent": fit.exponent, "prefactor": fit.prefactor, "r_squared": fit.r_squared,
        "points": fit.points, "window": [fit.window.0, fit.window.1], "beyond_edge": fit.beyond_edge,
    })
}

/// Fits a user-chosen window; a window without enough data is a config problem.
fn fit_window(series: &ReturnSeries, window: Option<(f64, f64)>) -> Result<Value, Failure> {
    match window {
        None => Ok(Value::Null),
        Some(w) => match fit_power_law(series, w, true) {
            Ok(f) => Ok(fit_json(&f)),
            Err(e @ (Error::InsufficientData(_) | Error::Domain(_))) => {
                Err(Failure::Config(vec![format!("fit_window: {e}")]))
            }
            Err(e) => Err(e.into()),
        },
    }
}

fn distributions_json(entries: impl IntoIterator<Item = (Value, f64, NumberDistribution)>) -> Vec<u8> {
    let list: Vec<Value> = entries
        .into_iter()
        .map(|(key, t, d)| {
            json!({"checkpoint": key, "t": t, "P": d.probs, "raw_total": d.raw_total, "max_imag": d.max_imag})
        })
        .collect();
    let mut bytes = serde_json::to_vec_pretty(&list).expect("JSON serialisation");
    bytes.push(b'\n');
    bytes
}

fn envelope_flags(values: &[f64]) -> Vec<bool> {
    let mut flags = vec![false; values.len()];
    for i in local_maxima(values) {
        flags[i] = true;
    }
    flags
}

/// Runs the experiment on the current rayon pool.
pub fn run(exp: &Experiment) -> Result<Products, Failure> {
    let mut files = Vec::new();
    let mut violation = None;
    let summary = match &exp.job {
        Job::Monitored { cfg, fit } => {
            let res = Monitor::new(cfg)?.run_ensemble()?;
            let mut csv = Csv::new(&["step", "t", "N_mean", "N_stderr", "Nimp_mean", "Nimp_stderr"]);
            for s in 0..cfg.steps {
                csv.row(&[
                    Cell::Int(s as i64 + 1),
                    Cell::Num(res.times[s]),
                    Cell::Num(res.n.mean[s]),
                    Cell::Num(res.n.stderr[s]),
                    Cell::Num(res.n_imp.mean[s]),
                    Cell::Num(res.n_imp.stderr[s]),
                ]);
            }
            files.push(("monitored.csv".to_string(), csv.into_bytes()));
            if !res.distributions.is_empty() {
                let entries = res.distributions.iter().map(|(&s, d)| (json!(s), s as f64 * cfg.dt, d.clone()));
                files.push(("distributions.json".to_string(), distributions_json(entries)));
            }
            let series = ReturnSeries::new(res.times.clone(), res.n_imp.mean.clone());
            json!({
                "samples": res.samples,
                "monotonicity_violations": res.monotonicity_violations,
                "final_N_mean": res.n.mean.last(),
                "fit": fit_window(&series, *fit)?,
            })
        }
        Job::Particle(cfg) => {
            let run = run_particle(cfg)?;
            let mut csv = Csv::new(&["t", "N", "N_imp", "J"]);
            for i in 0..run.times.len() {
                csv.row(&[
                    Cell::Num(run.times[i]),
                    Cell::Num(run.n[i]),
                    Cell::Num(run.n_imp[i]),
                    Cell::Num(run.current[i]),
                ]);
            }
            files.push(("particle.csv".to_string(), csv.into_bytes()));
            if !run.distributions.is_empty() {
                let entries = run.distributions.iter().map(|(t, d)| (json!(t), *t, d.clone()));
                files.push(("distributions.json".to_string(), distributions_json(entries)));
            }
            json!({"t_edge": run.t_edge, "final_N": run.n.last()})
        }
        Job::Operator(cfg) => {
            let rows = run_operator(cfg)?;
            let t_edge = finite_size_time(cfg.chain.len(), cfg.impurity.site());
            let mut csv = operator_csv();
            let mut drift: f64 = 0.0;
            for r in &rows {
                let w = &r.weights;
                csv.row(&[
                    Cell::Num(r.t),
                    Cell::Num(w.w()),
                    Cell::Num(w.w_i),
                    Cell::Num(w.w_eta),
                    Cell::Num(w.w_plus),
                    Cell::Num(w.w_minus),
                    Cell::Num(r.entropy.unwrap_or(f64::NAN)),
                ]);
                drift = drift.max((r.hs_norm_sq - 1.0).abs());
            }
            files.push(("operator.csv".to_string(), csv.into_bytes()));
            let late = late_mean(rows.iter().map(|r| (r.t, r.weights.w())), t_edge);
            json!({"t_edge": t_edge, "late_mean_w": late, "max_norm_drift": drift})
        }
        Job::Kitaev { len, mu, lambda, dt, t_max, cut } => {
            let chain = ChainSpec::new(*len)?;
            let h = build_kitaev(&chain, *mu, *lambda);
            let times = time_grid(*t_max, *dt);
            let weights = majorana_free_evolve(&h, &MajoranaVector::creation(*len, 1)?, 1, &times, *cut)?;
            let mut csv = operator_csv();
            for (t, w) in times.iter().zip(&weights) {
                csv.row(&[
                    Cell::Num(*t),
                    Cell::Num(w.w()),
                    Cell::Num(w.w_i),
                    Cell::Num(w.w_eta),
                    Cell::Num(w.w_plus),
                    Cell::Num(w.w_minus),
                    Cell::Num(w.entropy.unwrap_or(f64::NAN)),
                ]);
            }
            files.push(("operator.csv".to_string(), csv.into_bytes()));
            let t_edge = finite_size_time(*len, 1);
            let late = late_mean(times.iter().copied().zip(weights.iter().map(|w| w.w())), t_edge);
            json!({"t_edge": t_edge, "late_mean_w": late})
        }
        Job::ReturnProb { chain, placement, m, dt, t_max, fit } => {
            let (region, source) = placement_region(chain, *placement, *m)?;
            let prop = SpectralPropagator::new(&build_hopping(chain))?;
            let series = prop.return_probability(&region, source, &time_grid(*t_max, *dt))?;
            let flags = envelope_flags(&series.values);
            let mut csv = Csv::new(&["t", "P", "envelope_flag"]);
            for ((&t, &v), &f) in series.times.iter().zip(&series.values).zip(&flags) {
                csv.row(&[Cell::Num(t), Cell::Num(v), Cell::Int(f as i64)]);
            }
            files.push(("return_prob.csv".to_string(), csv.into_bytes()));
            json!({"source": source, "t_edge": series.t_edge, "fit": fit_window(&series, *fit)?})
        }
        Job::Renewal { source, p_m, dt, t_max, fit } => {
            let (times, a0) = free_kernel(*source, *dt, *t_max)?;
            let kernel = solve_renewal(&times, &a0, *p_m)?;
            let series = kernel.probability();
            let flags = envelope_flags(&series.values);
            let mut csv = Csv::new(&["t", "A_abs_sq", "envelope_flag"]);
            for ((&t, &v), &f) in series.times.iter().zip(&series.values).zip(&flags) {
                csv.row(&[Cell::Num(t), Cell::Num(v), Cell::Int(f as i64)]);
            }
            files.push(("renewal.csv".to_string(), csv.into_bytes()));
            json!({"fit": fit_window(&series, *fit)?})
        }
        Job::Entropy { xi, v, t_min, t_max, dt } => {
            let mut csv = Csv::new(&["t", "S_conf"]);
            let steps = ((t_max - t_min) / dt + 1e-9).floor() as usize;
            let mut last = f64::NAN;
            for k in 0..=steps {
                let t = t_min + k as f64 * dt;
                last = config_entropy(&ConfigEntropyParams { xi: *xi, v: *v, t })?;
                csv.row(&[Cell::Num(t), Cell::Num(last)]);
            }
            files.push(("entropy_estimate.csv".to_string(), csv.into_bytes()));
            json!({"final_S_conf": last})
        }
        Job::Fcs { len } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(exp.seed);
            let state = GaussianState::random_mixed(*len, &mut rng)?;
            let check = fcs_check(&state)?;
            let mut csv = Csv::new(&["n", "P_brute_force", "P_determinant"]);
            for (n, (a, b)) in check.brute_force.iter().zip(&check.determinant.probs).enumerate() {
                csv.row(&[Cell::Int(n as i64), Cell::Num(*a), Cell::Num(*b)]);
            }
            files.push(("fcs_check.csv".to_string(), csv.into_bytes()));
            let passed = check.max_deviation < FCS_TOLERANCE;
            if !passed {
                violation = Some(format!(
                    "determinant and brute-force P(n) differ by {:e}, above {FCS_TOLERANCE:e}",
                    check.max_deviation
                ));
            }
            json!({
                "max_deviation": check.max_deviation, "tolerance": FCS_TOLERANCE, "passed": passed,
                "total": check.total, "mean": check.determinant.mean(),
            })
        }
    };
    Ok(Products { files, summary, violation })
}

fn operator_csv() -> Csv {
    Csv::new(&["t", "w", "w_I", "w_eta", "w_plus", "w_minus", "op_entropy"])
}

/// Mean of `w` over the late pre-reflection window `[t_edge/2, t_edge]`.
fn late_mean(series: impl Iterator<Item = (f64, f64)>, t_edge: f64) -> Option<f64> {
    let late: Vec<f64> = series.filter(|(t, _)| *t >= t_edge / 2.0 && *t <= t_edge).map(|(_, w)| w).collect();
    (!late.is_empty()).then(|| late.iter().sum::<f64>() / late.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(Failure::from(Error::InvalidSpec("x".into())).exit_code(), 2);
        assert_eq!(Failure::from(Error::Resource { what: "x".into(), required_bytes: 9 }).exit_code(), 3);
        assert_eq!(Failure::from(Error::Krylov("x".into())).exit_code(), 4);
        assert_eq!(Failure::from(Error::CorruptedState("x".into())).exit_code(), 4);
        let wrapped =
            Error::Trajectory { index: 3, source: Box::new(Error::Resource { what: "x".into(), required_bytes: 9 }) };
        match Failure::from(wrapped) {
            Failure::Resource { required_bytes, .. } => assert_eq!(required_bytes, Some(9)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_json_is_machine_readable() {
        let j = Failure::Numerical("drift".into()).to_json();
        assert_eq!(j["error"], "numerical");
        assert_eq!(j["exit_code"], 4);
        assert_eq!(j["messages"][0], "drift");
    }

    fn parsed(kind: Kind, v: Value) -> Result<Experiment, Failure> {
        parse(kind, v.as_object().unwrap().clone())
    }

    #[test]
    fn minimal_monitored_config_takes_defaults() {
        let exp =
            parsed(Kind::Monitored, json!({"L": 100, "p_m": 0.5, "steps": 50, "samples": 10, "seed": 1})).unwrap();
        assert_eq!(exp.echo["dt"], 0.5);
        assert_eq!(exp.echo["m"], 5);
        assert_eq!(exp.echo["placement"], "boundary");
        assert_eq!(exp.seed, 1);
        assert_eq!(exp.workers, 0);
    }

    #[test]
    fn every_kind_rejects_foreign_keys() {
        for kind in
            [Kind::Particle, Kind::Operator, Kind::ReturnProb, Kind::Renewal, Kind::EntropyEstimate, Kind::FcsCheck]
        {
            match parsed(kind, json!({"bogus_key": 1})) {
                Err(Failure::Config(errors)) => {
                    assert!(errors.iter().any(|e| e.starts_with("bogus_key")), "{errors:?}")
                }
                _ => panic!("{kind:?} accepted an unknown key"),
            }
        }
    }

    #[test]
    fn model_specific_keys() {
        let kitaev = parsed(Kind::Operator, json!({"model": "kitaev", "L": 20, "mu": 1.6})).unwrap();
        assert_eq!(kitaev.echo["lambda"], 1.0);
        // pairing strength is meaningless for the impurity model
        assert!(parsed(Kind::Operator, json!({"L": 6, "delta": 0.3, "mu": 1.6})).is_err());
        let floquet = parsed(Kind::Operator, json!({"L": 6, "delta": 0.1, "omega": 2.5, "cut": 0})).unwrap();
        assert_eq!(floquet.echo["cut"], Value::Null);
        assert!(parsed(Kind::Operator, json!({"L": 6, "delta": 0.1, "omega": -1.0})).is_err());
    }

    #[test]
    fn renewal_and_entropy_ranges() {
        assert!(parsed(Kind::Renewal, json!({"p_m": 0.5})).is_ok());
        assert!(parsed(Kind::Renewal, json!({"p_m": 2.0})).is_err());
        assert!(parsed(Kind::EntropyEstimate, json!({"xi": 1.0, "t_max": 10.0})).is_ok());
        match parsed(Kind::EntropyEstimate, json!({"xi": -1.0, "t_max": 0.1})) {
            Err(Failure::Config(errors)) => assert_eq!(errors.len(), 2, "{errors:?}"),
            _ => panic!("accepted invalid entropy parameters"),
        }
        assert!(parsed(Kind::FcsCheck, json!({"L": 11})).is_err());
    }

    #[test]
    fn late_window_mean() {
        let series = (0..=10).map(|k| (k as f64, if k >= 5 { 1.0 } else { 0.0 }));
        assert_eq!(late_mean(series, 10.0), Some(1.0));
        assert_eq!(late_mean(std::iter::empty(), 10.0), None);
    }
}
