use blurforge::attack::{abba_attack, AttackConfig};
use blurforge::model::Classifier;

use super::{finish, fmt, load_model, prepare, resolve_attack, Prepared};
use crate::config::derive_seed;
use crate::corpus::{run_batch, split_outcomes, thread_pool, Corpus};
use crate::error::{CliError, CliResult};
use crate::SweepCmd;

pub const HEADER: [&str; 3] = ["param", "value", "succ_rate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Eps,
    EpsTheta,
    Direction,
}

impl Param {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "eps" => Ok(Param::Eps),
            "eps-theta" | "eps_theta" => Ok(Param::EpsTheta),
            "direction" => Ok(Param::Direction),
            _ => Err(CliError::Config(format!("unknown sweep parameter '{s}' (eps|eps-theta|direction)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Eps => "eps",
            Param::EpsTheta => "eps_theta",
            Param::Direction => "direction",
        }
    }

    /// eps 5..=50 step 5, eps-theta 0..=1 step 0.1, direction 10..=170 step 20 degrees.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Param::Eps => (1..=10).map(|i| 5.0 * i as f64).collect(),
            Param::EpsTheta => (0..=10).map(|i| i as f64 / 10.0).collect(),
            Param::Direction => (0..9).map(|i| 10.0 + 20.0 * i as f64).collect(),
        }
    }

    pub fn apply(self, base: &AttackConfig, value: f64) -> AttackConfig {
        let mut cfg = base.clone();
        match self {
            Param::Eps => cfg.eps = value,
            Param::EpsTheta => cfg.eps_theta = value,
            Param::Direction => cfg.direction_deg = Some(value),
        }
        cfg
    }
}

pub fn run(c: &SweepCmd) -> CliResult<()> {
    let (base, _) = resolve_attack(&c.attack)?;
    let param = Param::parse(&c.param)?;
    let values = c.values.clone().unwrap_or_else(|| param.default_grid());
    if values.is_empty() {
        return Err(CliError::Config("empty sweep grid".into()));
    }
    let configs: Vec<AttackConfig> = values.iter().map(|&v| param.apply(&base, v)).collect();
    for cfg in &configs {
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let model = load_model(&c.model)?;
    let corpus = Corpus::load(&c.corpus)?;
    corpus.check_labels(model.num_classes())?;
    let pool = thread_pool()?;

    let outcomes = run_batch(&pool, &corpus.entries, |e| prepare(e, &model));
    let (kept, skipped) = split_outcomes(corpus.entries.iter().map(|e| e.id.clone()), outcomes);
    let prepared: Vec<Prepared> = kept.into_iter().map(|(_, p)| p).collect();

    if let Some(parent) = c.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(&c.out)?;
    w.write_record(HEADER)?;
    for (value, cfg) in values.iter().zip(&configs) {
        let results = run_batch(&pool, &prepared, |p| {
            let cfg = AttackConfig { seed: derive_seed(cfg.seed, &p.id), ..cfg.clone() };
            abba_attack(&model, &p.image, p.label, &p.mask, &cfg)
                .map(|(_, r)| r.success)
                .map_err(|e| e.to_string())
        });
        let (ok, failed) = split_outcomes(prepared.iter().map(|p| p.id.clone()), results);
        let n = ok.len();
        let rate = if n == 0 { 0.0 } else { ok.iter().filter(|(_, s)| *s).count() as f64 / n as f64 };
        println!(
            "{}={} success_rate={} n={n} skipped={}",
            param.name(),
            fmt(*value),
            fmt(rate),
            skipped + failed
        );
        w.write_record([param.name().to_string(), fmt(*value), fmt(rate)])?;
    }
    w.flush()?;
    finish(skipped, c.strict)
}
