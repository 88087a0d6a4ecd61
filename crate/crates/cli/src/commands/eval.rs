use blurforge::analysis::deblur_resilience;
use blurforge::attack::evaluate;
use blurforge::imgcore::codec::load_image;
use blurforge::model::{Classifier, TinyCnn};
use blurforge::Image;

use super::{finish, fmt, load_model, model_name};
use crate::corpus::{run_batch, split_outcomes, thread_pool, Corpus};
use crate::error::{CliError, CliResult};
use crate::{EvalCmd, ResilienceCmd};

/// Decoded images and labels of a corpus, in manifest order; returns the skip count too.
fn load_set(corpus: &Corpus, pool: &rayon::ThreadPool, shape: (usize, usize, usize)) -> (Vec<(String, Image, usize)>, usize) {
    let outcomes = run_batch(pool, &corpus.entries, |e| {
        let img = load_image(&e.image).map_err(|err| err.to_string())?;
        if img.shape() != shape {
            return Err(format!("image shape {:?} does not match model input {shape:?}", img.shape()));
        }
        Ok((img, e.label))
    });
    let (kept, skipped) = split_outcomes(corpus.entries.iter().map(|e| e.id.clone()), outcomes);
    (kept.into_iter().map(|(id, (img, l))| (id, img, l)).collect(), skipped)
}

pub fn run(c: &EvalCmd) -> CliResult<()> {
    let models = c.model.iter().map(|p| load_model(p)).collect::<CliResult<Vec<TinyCnn>>>()?;
    let shape = models[0].input_shape();
    if models.iter().any(|m| m.input_shape() != shape) {
        return Err(CliError::Config("all models must share one input shape".into()));
    }
    let refs: Vec<&dyn Classifier> = models.iter().map(|m| m as &dyn Classifier).collect();
    let pool = thread_pool()?;

    let mut header = vec!["source".to_string()];
    header.extend(c.model.iter().map(|p| model_name(p)));
    let mut rows = Vec::new();
    let mut skipped_total = 0;
    for dir in &c.adv {
        let corpus = Corpus::load(dir)?;
        for m in &models {
            corpus.check_labels(m.num_classes())?;
        }
        let (set, skipped) = load_set(&corpus, &pool, shape);
        skipped_total += skipped;
        if set.is_empty() {
            return Err(CliError::Config(format!("{}: no readable images", dir.display())));
        }
        let imgs: Vec<Image> = set.iter().map(|(_, i, _)| i.clone()).collect();
        let labels: Vec<usize> = set.iter().map(|(_, _, l)| *l).collect();
        let rates = evaluate(&refs, &imgs, &labels)?;
        let mut row = vec![model_name(dir)];
        row.extend(rates.iter().map(|&r| fmt(r)));
        rows.push(row);
    }

    let mut w = match &c.out {
        Some(path) => csv::Writer::from_writer(Box::new(std::fs::File::create(path)?) as Box<dyn std::io::Write>),
        None => csv::Writer::from_writer(Box::new(std::io::stdout()) as Box<dyn std::io::Write>),
    };
    w.write_record(&header)?;
    for row in &rows {
        w.write_record(row)?;
    }
    w.flush()?;
    finish(skipped_total, c.strict)
}

pub fn run_resilience(c: &ResilienceCmd) -> CliResult<()> {
    let model = load_model(&c.model)?;
    let pool = thread_pool()?;
    let adv = Corpus::load(&c.adv)?;
    let deblurred = Corpus::load(&c.deblurred)?;
    adv.check_labels(model.num_classes())?;
    deblurred.check_labels(model.num_classes())?;
    let (a, skip_a) = load_set(&adv, &pool, model.input_shape());
    let (d, skip_d) = load_set(&deblurred, &pool, model.input_shape());
    // only ids present in both sets are compared
    let paired: Vec<_> = a
        .iter()
        .filter_map(|(id, img, l)| d.iter().find(|(did, _, _)| did == id).map(|(_, dimg, _)| (img, dimg, *l)))
        .collect();
    if paired.is_empty() {
        return Err(CliError::Config("no ids shared by the adversarial and deblurred sets".into()));
    }
    let labels: Vec<usize> = paired.iter().map(|p| p.2).collect();
    let before = evaluate(&[&model], &paired.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), &labels)?[0];
    let after = evaluate(&[&model], &paired.iter().map(|p| p.1.clone()).collect::<Vec<_>>(), &labels)?[0];
    let r = deblur_resilience(before, after)?;
    println!(
        "resilience={} before={} after={} n={}",
        r.map(fmt).unwrap_or_else(|| "undefined".into()),
        fmt(before),
        fmt(after),
        paired.len()
    );
    finish(skip_a + skip_d, c.strict)
}
