//! One function per subcommand: resolve the section, run it, and render the
//! payload with the resolved config echoed at the top.

use clap::{Args, ValueEnum};
use pll_core::compensator::{exact_compensator_1d, joint_compensator_with, CompensatorPath};
use pll_core::copula::{extremes_window, fit_tail_law, tail_constant, NormalCopula};
use pll_core::epp::{Frame, OrthantBox, ScaleRule};
use pll_core::knn::{lr_gap_test_in, naive_estimate, neighbour_span_in, umvu_estimate, Method};
use pll_core::rvdist::{StreamKey, UnivariateModel, WindowRequest, WindowedSample};
use pll_core::verify::{
    draw_process, independence_test, limit_means, poisson_count_test, timechange_spacing_test, CountPair, Decision,
    FitReport, ReplicationConfig, Scenario,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config;
use crate::error::{lib, CliError, Result};
use crate::model::{FamilyName, ModelArgs, Pair};

pub const SEED_ENV: &str = "PLL_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    /// Match one expected point per unit of scaled distance
    Quantile,
    /// Power scalings n^(-1/alpha) from the local indices
    Power,
}

impl From<RuleName> for ScaleRule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::Quantile => ScaleRule::Quantile,
            RuleName::Power => ScaleRule::Power,
        }
    }
}

/// Checks the file section for unknown or ill-typed keys, naming the key at
/// fault, then layers the flags over it.
fn prepare<P>(section: &str, flags: &P, file: Option<&Map<String, Value>>) -> Result<P>
where
    P: Args + Serialize + DeserializeOwned,
{
    let allowed: Vec<String> = P::augment_args(clap::Command::new("section"))
        .get_arguments()
        .map(|a| a.get_id().as_str().replace('_', "-"))
        .collect();
    if let Some(entries) = file.and_then(|m| m.get(section)) {
        let Value::Object(entries) = entries else {
            return Err(CliError::invalid(section, "expected a section of key-value pairs"));
        };
        for (key, value) in entries {
            let qualified = format!("{section}.{key}");
            if !allowed.contains(key) {
                return Err(CliError::UnknownKey { key: qualified, expected: allowed.join(", ") });
            }
            let single = Value::Object(Map::from_iter([(key.clone(), value.clone())]));
            serde_json::from_value::<P>(single).map_err(|e| CliError::invalid(&qualified, e.to_string()))?;
        }
    }
    config::layer(section, flags, file)
}

fn required<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
    v.clone().ok_or_else(|| CliError::missing(key))
}

fn positive_count(v: &Option<usize>, key: &str) -> Result<usize> {
    match required(v, key)? {
        0 => Err(CliError::invalid(key, "must be at least 1")),
        x => Ok(x),
    }
}

fn probability(v: f64, key: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(CliError::invalid(key, format!("{v} is outside [0, 1]")))
    }
}

fn open_unit(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::invalid(key, format!("{v} is outside (0, 1)")))
    }
}

/// Flag, then file, then `PLL_SEED`, then 0. The result is written back so
/// the echoed config pins it.
fn resolve_seed(seed: &mut Option<u64>) -> Result<u64> {
    if let Some(s) = *seed {
        return Ok(s);
    }
    let s = match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::invalid("seed", format!("{SEED_ENV}={v} is not an unsigned integer")))?,
        Err(_) => 0,
    };
    *seed = Some(s);
    Ok(s)
}

fn build_model(args: &mut ModelArgs, default: Option<FamilyName>) -> Result<UnivariateModel> {
    let family = args.resolve(default)?;
    UnivariateModel::from_family(family).map_err(|e| CliError::invalid("model", e.to_string()))
}

fn reject_unused(present: bool, key: &str, why: &str) -> Result<()> {
    if present {
        Err(CliError::invalid(key, format!("not used {why}")))
    } else {
        Ok(())
    }
}

fn with_header<P: Serialize>(section: &str, params: &P, body: Vec<u8>) -> Result<String> {
    let mut text = config::comment_header(section, params)?;
    text.push_str(&String::from_utf8(body).map_err(lib)?);
    Ok(text)
}

fn json_record<P: Serialize>(section: &str, params: &P, mut fields: Map<String, Value>) -> Result<String> {
    let header: Value = serde_json::from_str(&config::json_header(section, params)?).map_err(lib)?;
    fields.insert("config".into(), header["config"].clone());
    Ok(format!("{}\n", Value::Object(fields)))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(lib)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Quantile of the anchor in [0, 1] [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Sample size
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Lower end of the scaled window [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_lo: Option<f64>,
    /// Upper end of the scaled window [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_hi: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleName>,
}

pub fn simulate(flags: &SimulateArgs, file: Option<&Map<String, Value>>) -> Result<String> {
    let mut p = prepare("simulate", flags, file)?;
    let model = build_model(&mut p.model, None)?;
    let q = probability(*p.q.get_or_insert(0.0), "q")?;
    let n = positive_count(&p.n, "n")?;
    let seed = resolve_seed(&mut p.seed)?;
    let t_lo = *p.t_lo.get_or_insert(0.0);
    let t_hi = *p.t_hi.get_or_insert(1.0);
    if !(t_lo <= t_hi) {
        return Err(CliError::invalid("t-lo", format!("{t_lo} exceeds t-hi = {t_hi}")));
    }
    let rule = *p.rule.get_or_insert(RuleName::Quantile);
    let frame = Frame::resolve(&model, q, n, rule.into()).map_err(|e| CliError::invalid("q", e.to_string()))?;
    let (process, _) = draw_process(&model, &frame, StreamKey::new(seed, 0), t_lo, t_hi, 0).map_err(lib)?;
    let mut body = Vec::new();
    process.write_csv(&mut body).map_err(lib)?;
    with_header("simulate", &p, body)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case")]
pub struct CompensatorArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Anchor quantiles, comma separated; more than one gives the joint
    /// compensator [default: 0]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    /// Sample size
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Sorted evaluation points, comma separated [default: 0,0.25,...,2]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleName>,
}

pub fn compensator(flags: &CompensatorArgs, file: Option<&Map<String, Value>>) -> Result<String> {
    let mut p = prepare("compensator", flags, file)?;
    let model = build_model(&mut p.model, None)?;
    let quantiles = p.q.get_or_insert_with(|| vec![0.0]).clone();
    if quantiles.is_empty() {
        return Err(CliError::invalid("q", "needs at least one quantile"));
    }
    for &q in &quantiles {
        probability(q, "q")?;
    }
    let n = positive_count(&p.n, "n")?;
    let seed = resolve_seed(&mut p.seed)?;
    let grid = p.grid.get_or_insert_with(|| (0..=8).map(|i| 0.25 * i as f64).collect()).clone();
    let rule: ScaleRule = (*p.rule.get_or_insert(RuleName::Quantile)).into();

    let reach = grid.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let reach = if reach > 0.0 { reach } else { 1.0 };
    let frames = quantiles
        .iter()
        .map(|&q| Frame::resolve(&model, q, n, rule).map_err(|e| CliError::invalid("q", e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let requests: Vec<WindowRequest> = frames
        .iter()
        .map(|f| {
            let lo = if f.scaling.left.is_some() { f.unscale(-reach) } else { f.anchor };
            WindowRequest::new(lo, f.unscale(reach))
        })
        .collect();
    let sample = WindowedSample::draw(&model, StreamKey::new(seed, 0), n, &requests).map_err(lib)?;
    let paths: Vec<CompensatorPath> = if frames.len() == 1 {
        vec![exact_compensator_1d(&sample, &model, &frames[0], &grid).map_err(lib)?]
    } else {
        joint_compensator_with(&sample, &model, &quantiles, reach, n, &grid, rule).map_err(lib)?
    };

    let mut body = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut body);
        w.write_record(["q", "t", "value", "limit"]).map_err(lib)?;
        for (q, path) in quantiles.iter().zip(&paths) {
            for (i, (t, v)) in path.grid.iter().zip(&path.values).enumerate() {
                let limit = path.limit.as_ref().map(|l| l[i].to_string()).unwrap_or_default();
                w.write_record([q.to_string(), t.to_string(), v.to_string(), limit]).map_err(lib)?;
            }
        }
        w.flush()?;
    }
    with_header("compensator", &p, body)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    /// One-sided anchor (default power law at q = 0): Poisson counts,
    /// independent increments, exponential time-changed spacings
    Theorem31,
    /// Interior anchor (default uniform at q = 0.5): Poisson counts on both
    /// sides and their independence
    Corollary32,
    /// Independence of the processes at two quantiles q1 < q2
    Independence,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case")]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioName>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Anchor quantile (theorem31 default 0, corollary32 default 0.5)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// First quantile of the independence scenario [default: 0.3]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q1: Option<f64>,
    /// Second quantile of the independence scenario [default: 0.7]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q2: Option<f64>,
    /// Scaled half-width of the independence windows [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    /// Sample size per replication [default: 100000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Replications [default: 1000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Significance level; any p-value below it rejects and exits with 2
    /// [default: 0.001]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleName>,
}

fn unit_box(lo: f64, hi: f64) -> Result<OrthantBox> {
    OrthantBox::interval(lo, hi).map_err(lib)
}

/// Returns the payload and, separately, whether the run passed, so that a
/// rejection still writes its reports.
pub fn verify(flags: &VerifyArgs, file: Option<&Map<String, Value>>) -> Result<(String, Result<()>)> {
    let mut p = prepare("verify", flags, file)?;
    let scenario = required(&p.scenario, "scenario")?;
    let default_family = match scenario {
        ScenarioName::Theorem31 => FamilyName::PowerLaw,
        ScenarioName::Corollary32 | ScenarioName::Independence => FamilyName::Uniform,
    };
    let model = build_model(&mut p.model, Some(default_family))?;
    let n = *p.n.get_or_insert(100_000);
    let reps = *p.reps.get_or_insert(1000);
    let seed = resolve_seed(&mut p.seed)?;
    let level = open_unit(*p.level.get_or_insert(0.001), "level")?;
    let rule: ScaleRule = (*p.rule.get_or_insert(RuleName::Quantile)).into();
    let family = p.model.resolve(None)?;

    let independence_only = "outside the independence scenario";
    let q = match scenario {
        ScenarioName::Independence => {
            reject_unused(p.q.is_some(), "q", "by the independence scenario; use q1 and q2")?;
            probability(*p.q1.get_or_insert(0.3), "q1")?
        }
        ScenarioName::Theorem31 | ScenarioName::Corollary32 => {
            reject_unused(p.q1.is_some(), "q1", independence_only)?;
            reject_unused(p.q2.is_some(), "q2", independence_only)?;
            reject_unused(p.window.is_some(), "window", independence_only)?;
            let default = if scenario == ScenarioName::Theorem31 { 0.0 } else { 0.5 };
            probability(*p.q.get_or_insert(default), "q")?
        }
    };
    let config = ReplicationConfig::new(n, reps, seed, Scenario { model: family, q, rule })
        .map_err(|e| CliError::invalid("n", e.to_string()))?;
    // Fail on configuration problems (such as a missing left scaling) before
    // any simulation runs.
    Frame::resolve(&model, q, n, rule).map_err(|e| CliError::invalid("q", e.to_string()))?;

    let mut reports: Vec<FitReport> = Vec::new();
    match scenario {
        ScenarioName::Theorem31 => {
            let boxes = [unit_box(0.0, 0.5)?, unit_box(0.5, 1.0)?];
            let means = limit_means(&config, &boxes).map_err(lib)?;
            reports.push(poisson_count_test(&config, &boxes, &means).map_err(lib)?);
            let [first, second] = boxes;
            reports.push(independence_test(&config, &CountPair::Boxes { first, second }).map_err(lib)?);
            reports.push(timechange_spacing_test(&config, None).map_err(lib)?);
        }
        ScenarioName::Corollary32 => {
            let boxes = [unit_box(-1.0, 0.0)?, unit_box(0.0, 1.0)?];
            let means = limit_means(&config, &boxes).map_err(lib)?;
            reports.push(poisson_count_test(&config, &boxes, &means).map_err(lib)?);
            let [first, second] = boxes;
            reports.push(independence_test(&config, &CountPair::Boxes { first, second }).map_err(lib)?);
        }
        ScenarioName::Independence => {
            let q2 = probability(*p.q2.get_or_insert(0.7), "q2")?;
            let window = *p.window.get_or_insert(1.0);
            if !(window > 0.0 && window.is_finite()) {
                return Err(CliError::invalid("window", format!("{window} must be positive")));
            }
            let pair = CountPair::Quantiles { q1: q, q2, window };
            reports.push(independence_test(&config, &pair).map_err(|e| CliError::invalid("q1", e.to_string()))?);
        }
    }

    let mut text = config::json_header("verify", &p)?;
    text.push('\n');
    let mut rejected = 0;
    for mut r in reports.iter().cloned() {
        r.decision = Decision::at(r.p_value, level);
        if r.decision == Decision::Reject {
            rejected += 1;
        }
        text.push_str(&r.to_json_line().map_err(lib)?);
        text.push('\n');
    }
    let summary = json!({"summary": {
        "tests": reports.len(),
        "rejected": rejected,
        "level": level,
        "decision": if rejected == 0 { Decision::Accept } else { Decision::Reject },
    }});
    text.push_str(&summary.to_string());
    text.push('\n');
    let outcome = if rejected == 0 { Ok(()) } else { Err(CliError::Rejected { rejected, total: reports.len(), level }) };
    Ok((text, outcome))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    /// k = 1 estimator, no interval
    Naive,
    /// (2k - 1) / (n * span), with a Gamma-pivot interval
    Umvu,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case")]
pub struct KnnArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Evaluation point
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Neighbours on each side
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Sample size
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Confidence level of the interval [default: 0.95]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn knn(flags: &KnnArgs, file: Option<&Map<String, Value>>) -> Result<String> {
    let mut p = prepare("knn", flags, file)?;
    let model = build_model(&mut p.model, None)?;
    let t = required(&p.t, "t")?;
    let k = positive_count(&p.k, "k")?;
    let n = positive_count(&p.n, "n")?;
    let seed = resolve_seed(&mut p.seed)?;
    let method = *p.method.get_or_insert(MethodName::Umvu);
    let level = match method {
        MethodName::Umvu => Some(open_unit(*p.level.get_or_insert(0.95), "level")?),
        MethodName::Naive => {
            reject_unused(p.level.is_some(), "level", "by the naive method")?;
            None
        }
    };
    let sample = WindowedSample::draw(&model, StreamKey::new(seed, 0), n, &[WindowRequest::neighbours(t, k)])
        .map_err(|e| CliError::invalid("t", e.to_string()))?;
    let span = neighbour_span_in(&sample, t, k).map_err(|e| CliError::invalid("k", e.to_string()))?;
    let estimate = match method {
        MethodName::Naive => naive_estimate(&span, n),
        MethodName::Umvu => umvu_estimate(&span, n, level),
    }
    .map_err(|e| CliError::invalid("k", e.to_string()))?;
    debug_assert_eq!(estimate.method, if method == MethodName::Umvu { Method::Umvu } else { Method::Naive });
    let fields = Map::from_iter([
        ("estimate".to_string(), to_value(&estimate)?),
        ("span".to_string(), to_value(&span)?),
        ("density".to_string(), json!(model.pdf(t))),
    ]);
    json_record("knn", &p, fields)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case")]
pub struct GapTestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Number of smallest points used (at least 2)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Sample size
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Significance level of the reported decision [default: 0.05]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn gap_test(flags: &GapTestArgs, file: Option<&Map<String, Value>>) -> Result<String> {
    let mut p = prepare("gap-test", flags, file)?;
    let model = build_model(&mut p.model, None)?;
    let k = positive_count(&p.k, "k")?;
    let n = positive_count(&p.n, "n")?;
    let level = open_unit(*p.level.get_or_insert(0.05), "level")?;
    let seed = resolve_seed(&mut p.seed)?;
    let request = WindowRequest::new(0.0, 0.0).with_extra(0, k);
    let sample = WindowedSample::draw(&model, StreamKey::new(seed, 0), n, &[request]).map_err(lib)?;
    let test = lr_gap_test_in(&sample, k).map_err(|e| CliError::invalid("k", e.to_string()))?;
    let fields = Map::from_iter([
        ("test".to_string(), to_value(&test)?),
        ("decision".to_string(), to_value(&Decision::at(test.p_value, level))?),
    ]);
    json_record("gap-test", &p, fields)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    /// Tail exponent and tail-law shape on a grid
    Json,
    /// Scaled joint extremes near the upper corner
    Csv,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case")]
pub struct CopulaArgs {
    /// Correlation of the normal copula, in (-1, 1]
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Tail probabilities for the exponent fit [json; default: 1e-2,1e-3,1e-4]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    /// Tail-law arguments `t1:t2` [json; default: 1:1,1:2,2:1,0.5:0.5]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<Pair<f64>>>,
    /// Sample size [csv]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Side of the scaled box [-extent, 0]^2 [csv; default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn copula(flags: &CopulaArgs, file: Option<&Map<String, Value>>) -> Result<String> {
    let mut p = prepare("copula", flags, file)?;
    let rho = required(&p.rho, "rho")?;
    let cop = NormalCopula::new(rho).map_err(|e| CliError::invalid("rho", e.to_string()))?;
    match *p.format.get_or_insert(Format::Json) {
        Format::Json => {
            let why = "by the json format";
            reject_unused(p.n.is_some(), "n", why)?;
            reject_unused(p.extent.is_some(), "extent", why)?;
            reject_unused(p.seed.is_some(), "seed", why)?;
            let xs = p.x_grid.get_or_insert_with(|| vec![1e-2, 1e-3, 1e-4]).clone();
            let ts: Vec<[f64; 2]> = p
                .t_grid
                .get_or_insert_with(|| vec![Pair([1.0, 1.0]), Pair([1.0, 2.0]), Pair([2.0, 1.0]), Pair([0.5, 0.5])])
                .iter()
                .map(|t| t.0)
                .collect();
            let fit = fit_tail_law(&cop, &xs, &ts).map_err(|e| CliError::invalid("x-grid", e.to_string()))?;
            let constant = tail_constant(&cop, fit.x_range.0).map_err(|e| CliError::invalid("x-grid", e.to_string()))?;
            let fields = Map::from_iter([
                ("fit".to_string(), to_value(&fit)?),
                ("exponent".to_string(), json!(cop.tail_exponent())),
                ("limit_constant".to_string(), json!(constant)),
            ]);
            json_record("copula", &p, fields)
        }
        Format::Csv => {
            let why = "by the csv format";
            reject_unused(p.x_grid.is_some(), "x-grid", why)?;
            reject_unused(p.t_grid.is_some(), "t-grid", why)?;
            let n = positive_count(&p.n, "n")?;
            let extent = *p.extent.get_or_insert(1.0);
            let seed = resolve_seed(&mut p.seed)?;
            let process = extremes_window(&cop, StreamKey::new(seed, 0), n, extent)
                .map_err(|e| CliError::invalid("extent", e.to_string()))?;
            let mut body = Vec::new();
            process.write_csv(&mut body).map_err(lib)?;
            with_header("copula", &p, body)
        }
    }
}
