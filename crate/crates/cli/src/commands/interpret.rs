use blurforge::analysis::{consistency, interpretable_map, transferability_score, InterpretConfig};
use blurforge::imgcore::codec::{load_image, write_png};
use blurforge::model::{predict, Classifier, TinyCnn};
use blurforge::Image;

use super::{finish, fmt, load_model, model_name};
use crate::corpus::{run_batch, split_outcomes, thread_pool, Corpus, Entry};
use crate::error::{CliError, CliResult};
use crate::InterpretCmd;

pub const MAPS: &str = "interpret.csv";
pub const MAPS_HEADER: [&str; 8] = [
    "id",
    "model",
    "objective_initial",
    "objective_final",
    "mask_mean",
    "transfer_t",
    "fooled",
    "mask",
];
pub const CONSISTENCY: &str = "consistency.csv";

struct PerModel {
    mask: Image,
    initial: f64,
    final_value: f64,
    t: f64,
    fooled: bool,
}

fn interpret_entry(
    models: &[TinyCnn],
    clean: &Corpus,
    adv_entry: &Entry,
    cfg: &InterpretConfig,
) -> Result<Vec<PerModel>, String> {
    let real_entry = clean
        .find(&adv_entry.id)
        .ok_or_else(|| format!("no clean image with id '{}'", adv_entry.id))?;
    let x_adv = load_image(&adv_entry.image).map_err(|e| e.to_string())?;
    let x_real = load_image(&real_entry.image).map_err(|e| e.to_string())?;
    let label = real_entry.label;
    models
        .iter()
        .map(|m| {
            let res = interpretable_map(m, &x_adv, &x_real, label, cfg)?;
            let t = transferability_score(m, &x_adv, label)?;
            Ok(PerModel {
                initial: res.trace[0],
                final_value: *res.trace.last().expect("trace holds the initial value"),
                mask: res.mask,
                t,
                fooled: predict(m, &x_adv)?.0 != label,
            })
        })
        .collect::<blurforge::Result<Vec<_>>>()
        .map_err(|e| e.to_string())
}

pub fn run(c: &InterpretCmd) -> CliResult<()> {
    let cfg = InterpretConfig {
        lambda1: c.lambda1,
        lambda2: c.lambda2,
        iterations: c.iters,
        lr: c.lr,
    };
    if !(cfg.lr > 0.0 && cfg.lambda1 >= 0.0 && cfg.lambda2 >= 0.0) {
        return Err(CliError::Config("lr must be positive and lambdas non-negative".into()));
    }
    let models = c.model.iter().map(|p| load_model(p)).collect::<CliResult<Vec<_>>>()?;
    let mut names: Vec<String> = Vec::with_capacity(c.model.len());
    for (i, p) in c.model.iter().enumerate() {
        let name = model_name(p);
        // repeated stems would overwrite each other's mask files
        names.push(if names.contains(&name) { format!("{name}_{i}") } else { name });
    }
    let clean = Corpus::load(&c.corpus)?;
    let adv = Corpus::load(&c.adv)?;
    for m in &models {
        clean.check_labels(m.num_classes())?;
    }
    let pool = thread_pool()?;
    std::fs::create_dir_all(&c.out)?;

    let outcomes = run_batch(&pool, &adv.entries, |e| interpret_entry(&models, &clean, e, &cfg));
    let (kept, skipped) = split_outcomes(adv.entries.iter().map(|e| e.id.clone()), outcomes);

    let mut w = csv::Writer::from_path(c.out.join(MAPS))?;
    w.write_record(MAPS_HEADER)?;
    let mut cw = if models.len() >= 2 {
        let mut cw = csv::Writer::from_path(c.out.join(CONSISTENCY))?;
        cw.write_record(["id", "consistency"])?;
        Some(cw)
    } else {
        None
    };
    let mut total_consistency = 0.0;
    for (id, per_model) in &kept {
        for (name, r) in names.iter().zip(per_model) {
            let file = format!("{id}__{name}_mask.png");
            write_png(&r.mask, c.out.join(&file))?;
            w.write_record([
                id.clone(),
                name.clone(),
                fmt(r.initial),
                fmt(r.final_value),
                fmt(r.mask.mean()),
                fmt(r.t),
                (r.fooled as u8).to_string(),
                file,
            ])?;
        }
        if let Some(cw) = cw.as_mut() {
            let maps: Vec<Image> = per_model.iter().map(|r| r.mask.clone()).collect();
            let value = consistency(&maps)?;
            total_consistency += value;
            cw.write_record([id.clone(), fmt(value)])?;
        }
    }
    w.flush()?;
    if let Some(mut cw) = cw {
        cw.flush()?;
        let mean = if kept.is_empty() { 0.0 } else { total_consistency / kept.len() as f64 };
        println!("mean_consistency={} n={} skipped={skipped}", fmt(mean), kept.len());
    } else {
        println!("n={} skipped={skipped}", kept.len());
    }
    finish(skipped, c.strict)
}
