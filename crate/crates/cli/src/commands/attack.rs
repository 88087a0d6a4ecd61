use blurforge::attack::{abba_attack, blur_baseline, fgsm, mifgsm, AttackConfig, BlurKind, Region};
use blurforge::imgcore::codec::{write_png, write_rawf};
use blurforge::model::{cross_entropy, predict, Classifier};
use blurforge::{Image, Translation};

use super::{finish, fmt, load_model, prepare, print_summary, resolve_attack};
use crate::config::{derive_seed, pick, ConfigFile};
use crate::corpus::{run_batch, split_outcomes, thread_pool, write_manifest, Corpus, Outcome};
use crate::error::{CliError, CliResult};
use crate::AttackCmd;

pub const REPORT: &str = "report.csv";
pub const REPORT_HEADER: [&str; 10] = [
    "id",
    "clean_pred",
    "adv_pred",
    "success",
    "iters",
    "loss_final",
    "theta_ox",
    "theta_oy",
    "theta_bx",
    "theta_by",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Method {
    Abba,
    Fgsm { eps_a: f64 },
    Mifgsm { eps_a: f64 },
    Blur { kind: BlurKind, size: f64, region: Region },
}

fn resolve_method(c: &AttackCmd, file: &ConfigFile) -> CliResult<Method> {
    let region = match c.region.as_deref().or(file.raw("region")).unwrap_or("whole") {
        "whole" => Region::Whole,
        "obj" => Region::Obj,
        "bg" => Region::Bg,
        other => return Err(CliError::Config(format!("unknown region '{other}' (whole|obj|bg)"))),
    };
    let eps_a = pick(c.eps_a, file, "eps-a", 0.03)?;
    let size = pick(c.size, file, "size", 15.0)?;
    let check_eps_a = || {
        if eps_a > 0.0 && eps_a <= 1.0 {
            Ok(())
        } else {
            Err(CliError::Config(format!("eps-a must lie in (0, 1], got {eps_a}")))
        }
    };
    let check_size = || {
        if size > 0.0 && size.is_finite() {
            Ok(())
        } else {
            Err(CliError::Config(format!("size must be positive, got {size}")))
        }
    };
    Ok(match c.baseline.as_deref().or(file.raw("baseline")) {
        None => Method::Abba,
        Some("fgsm") => {
            check_eps_a()?;
            Method::Fgsm { eps_a }
        }
        Some("mifgsm") => {
            check_eps_a()?;
            Method::Mifgsm { eps_a }
        }
        Some("gauss") => {
            check_size()?;
            Method::Blur { kind: BlurKind::Gauss, size, region }
        }
        Some("defocus") => {
            check_size()?;
            Method::Blur { kind: BlurKind::Defocus, size, region }
        }
        Some(other) => return Err(CliError::Config(format!("unknown baseline '{other}' (fgsm|mifgsm|gauss|defocus)"))),
    })
}

/// One report row plus the image it describes.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub label: usize,
    pub clean_pred: usize,
    pub adv_pred: usize,
    pub success: bool,
    pub iters: usize,
    pub loss_final: f64,
    pub theta_o: Translation,
    pub theta_b: Translation,
    pub adv: Image,
}

impl Row {
    pub(crate) fn record(&self, id: &str) -> Vec<String> {
        vec![
            id.to_string(),
            self.clean_pred.to_string(),
            self.adv_pred.to_string(),
            (self.success as u8).to_string(),
            self.iters.to_string(),
            fmt(self.loss_final),
            fmt(self.theta_o.tx),
            fmt(self.theta_o.ty),
            fmt(self.theta_b.tx),
            fmt(self.theta_b.ty),
        ]
    }
}

fn baseline_row(model: &dyn Classifier, img: &Image, label: usize, adv: Image, iters: usize) -> blurforge::Result<Row> {
    let clean_pred = predict(model, img)?.0;
    let (adv_pred, logits) = predict(model, &adv)?;
    Ok(Row {
        label,
        clean_pred,
        adv_pred,
        success: adv_pred != label,
        iters,
        loss_final: cross_entropy(&logits, label)?,
        theta_o: Translation::ZERO,
        theta_b: Translation::ZERO,
        adv,
    })
}

fn attack_entry(model: &dyn Classifier, entry: &crate::corpus::Entry, cfg: &AttackConfig, method: Method) -> Outcome<Row> {
    let p = prepare(entry, model)?;
    let run = || -> blurforge::Result<Row> {
        match method {
            Method::Abba => {
                let cfg = AttackConfig { seed: derive_seed(cfg.seed, &p.id), ..cfg.clone() };
                let (adv, rep) = abba_attack(model, &p.image, p.label, &p.mask, &cfg)?;
                Ok(Row {
                    label: p.label,
                    clean_pred: rep.clean_pred,
                    adv_pred: rep.final_pred,
                    success: rep.success,
                    iters: rep.iterations_used,
                    loss_final: rep.final_loss,
                    theta_o: rep.theta_o,
                    theta_b: rep.theta_b,
                    adv,
                })
            }
            Method::Fgsm { eps_a } => baseline_row(model, &p.image, p.label, fgsm(model, &p.image, p.label, eps_a)?, 1),
            Method::Mifgsm { eps_a } => {
                let adv = mifgsm(model, &p.image, p.label, eps_a, cfg.iterations, cfg.mu)?;
                baseline_row(model, &p.image, p.label, adv, cfg.iterations)
            }
            Method::Blur { kind, size, region } => {
                baseline_row(model, &p.image, p.label, blur_baseline(&p.image, &p.mask, kind, size, region)?, 0)
            }
        }
    };
    run().map_err(|e| e.to_string())
}

/// Writes `<id>.png`, `<id>.rawf`, the report and a manifest for the kept rows.
pub(crate) fn write_outputs(out: &std::path::Path, header: &[&str], rows: &[(String, Vec<String>, usize, &Image)]) -> CliResult<()> {
    let mut report = csv::Writer::from_path(out.join(REPORT))?;
    report.write_record(header)?;
    let mut manifest = Vec::with_capacity(rows.len());
    for (id, record, label, adv) in rows {
        write_png(adv, out.join(format!("{id}.png")))?;
        write_rawf(adv, out.join(format!("{id}.rawf")))?;
        report.write_record(record)?;
        manifest.push((format!("{id}.rawf"), *label, None));
    }
    report.flush()?;
    write_manifest(out, &manifest)
}

pub fn run(c: &AttackCmd) -> CliResult<()> {
    let (cfg, file) = resolve_attack(&c.attack)?;
    let method = resolve_method(c, &file)?;
    let model = load_model(&c.model)?;
    let corpus = Corpus::load(&c.corpus)?;
    corpus.check_labels(model.num_classes())?;
    let pool = thread_pool()?;
    std::fs::create_dir_all(&c.out)?;

    let outcomes = run_batch(&pool, &corpus.entries, |e| attack_entry(&model, e, &cfg, method));
    let (kept, skipped) = split_outcomes(corpus.entries.iter().map(|e| e.id.clone()), outcomes);
    for (id, row) in &kept {
        eprintln!(
            "attack {id}: label={} clean={} adv={} success={} iters={}",
            row.label, row.clean_pred, row.adv_pred, row.success, row.iters
        );
    }
    let rows: Vec<_> = kept.iter().map(|(id, r)| (id.clone(), r.record(id), r.label, &r.adv)).collect();
    write_outputs(&c.out, &REPORT_HEADER, &rows)?;
    print_summary(kept.iter().filter(|(_, r)| r.success).count(), kept.len(), skipped);
    finish(skipped, c.strict)
}
