use blurforge::imgcore::codec::{load_image, write_mask_png, write_png};
use blurforge::model::{train, Sample, TinyCnn, TrainConfig};
use blurforge::shapes::generate;

use super::finish;
use crate::corpus::{run_batch, split_outcomes, thread_pool, write_manifest, Corpus};
use crate::error::{CliError, CliResult};
use crate::{GenerateCmd, TrainCmd};

fn load_samples(corpus: &Corpus, pool: &rayon::ThreadPool) -> (Vec<Sample>, usize) {
    let outcomes = run_batch(pool, &corpus.entries, |e| {
        load_image(&e.image)
            .map(|image| Sample { image, label: e.label })
            .map_err(|err| err.to_string())
    });
    let (kept, skipped) = split_outcomes(corpus.entries.iter().map(|e| e.id.clone()), outcomes);
    (kept.into_iter().map(|(_, s)| s).collect(), skipped)
}

pub fn run(c: &TrainCmd) -> CliResult<()> {
    if !(c.lr >= 0.0 && c.lr.is_finite()) {
        return Err(CliError::Config(format!("lr must be non-negative, got {}", c.lr)));
    }
    let pool = thread_pool()?;
    let corpus = Corpus::load(&c.corpus)?;
    let (train_set, mut skipped) = load_samples(&corpus, &pool);
    let first = train_set.first().ok_or_else(|| CliError::Config("no readable training images".into()))?;
    let shape = first.image.shape();
    let max_label = train_set.iter().map(|s| s.label).max().unwrap_or(0);
    let classes = c.classes.unwrap_or(max_label + 1).max(2);
    corpus.check_labels(classes)?;

    let test_set = match &c.test_corpus {
        Some(dir) => {
            let tc = Corpus::load(dir)?;
            tc.check_labels(classes)?;
            let (set, s) = load_samples(&tc, &pool);
            skipped += s;
            Some(set)
        }
        None => None,
    };
    let mut model = TinyCnn::new(shape, classes, c.seed)?;
    let cfg = TrainConfig {
        epochs: c.epochs,
        lr: c.lr,
        seed: c.seed,
    };
    for s in train(&mut model, &train_set, test_set.as_deref(), cfg)? {
        let test = s.test_accuracy.map(|a| format!(" test_accuracy={a}")).unwrap_or_default();
        println!(
            "epoch={} train_loss={} train_accuracy={}{test}",
            s.epoch, s.train_loss, s.train_accuracy
        );
    }
    if let Some(parent) = c.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    model.save(&c.out)?;
    finish(skipped, c.strict)
}

pub fn run_generate(c: &GenerateCmd) -> CliResult<()> {
    if c.count == 0 {
        return Err(CliError::Config("count must be at least 1".into()));
    }
    if c.size < 8 {
        return Err(CliError::Config(format!("size must be at least 8, got {}", c.size)));
    }
    std::fs::create_dir_all(&c.out)?;
    let mut rows = Vec::with_capacity(c.count);
    for (i, s) in generate(c.seed, c.offset, c.count, c.size).iter().enumerate() {
        let id = format!("shape_{:06}", c.offset + i as u64);
        write_png(&s.image, c.out.join(format!("{id}.png")))?;
        write_mask_png(&s.mask, c.out.join(format!("{id}_mask.png")))?;
        rows.push((format!("{id}.png"), s.label, Some(format!("{id}_mask.png"))));
    }
    write_manifest(&c.out, &rows)?;
    println!("wrote {} images to {}", rows.len(), c.out.display());
    Ok(())
}
