use std::path::PathBuf;

use blurforge::imgcore::codec::read_rawf;
use blurforge::physical::{camera_translation, object_depth, physical_attack, CameraIntrinsics};
use blurforge::model::Classifier;
use blurforge::Translation;

use super::attack::write_outputs;
use super::{finish, fmt, load_model, prepare, print_summary, resolve_attack};
use crate::config::{derive_seed, ConfigFile};
use crate::corpus::{run_batch, split_outcomes, thread_pool, Corpus, Entry, Outcome};
use crate::error::{CliError, CliResult};
use crate::PhysicalCmd;

pub const HEADER: [&str; 11] = [
    "id",
    "clean_pred",
    "adv_pred",
    "success",
    "iters",
    "loss_final",
    "theta_x",
    "theta_y",
    "depth_m",
    "cam_x_m",
    "cam_y_m",
];

#[derive(Debug, Clone)]
enum Depth {
    Scalar(f64),
    /// Directory of `<id>.rawf` single-channel maps.
    Maps(PathBuf),
}

fn resolve_depth(flag: Option<&str>, file: &ConfigFile) -> CliResult<Depth> {
    let raw = flag
        .or(file.raw("depth"))
        .ok_or_else(|| CliError::Config("--depth is required (meters or a directory of .rawf maps)".into()))?;
    if let Ok(v) = raw.parse::<f64>() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Config(format!("depth must be positive, got {v}")));
        }
        return Ok(Depth::Scalar(v));
    }
    let dir = PathBuf::from(raw);
    if !dir.is_dir() {
        return Err(CliError::Io(format!("depth directory {} not found", dir.display())));
    }
    Ok(Depth::Maps(dir))
}

struct Intrinsics {
    fx: Option<f64>,
    fy: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
}

impl Intrinsics {
    fn for_image(&self, h: usize, w: usize) -> blurforge::Result<CameraIntrinsics> {
        CameraIntrinsics::new(
            self.fx.unwrap_or(w as f64),
            self.fy.unwrap_or(h as f64),
            self.cx.unwrap_or(w as f64 / 2.0),
            self.cy.unwrap_or(h as f64 / 2.0),
        )
    }
}

struct PhysRow {
    row: super::attack::Row,
    theta: Translation,
    depth: f64,
    cam: (f64, f64),
}

fn physical_entry(
    model: &dyn Classifier,
    entry: &Entry,
    cfg: &blurforge::attack::AttackConfig,
    depth: &Depth,
    k: &Intrinsics,
) -> Outcome<PhysRow> {
    let p = prepare(entry, model)?;
    let run = || -> blurforge::Result<PhysRow> {
        let (h, w, _) = p.image.shape();
        let depth_m = match depth {
            Depth::Scalar(v) => *v,
            Depth::Maps(dir) => object_depth(&read_rawf(dir.join(format!("{}.rawf", p.id)))?, &p.mask)?,
        };
        let intrinsics = k.for_image(h, w)?;
        let cfg = blurforge::attack::AttackConfig { seed: derive_seed(cfg.seed, &p.id), ..cfg.clone() };
        let (adv, theta, rep) = physical_attack(model, &p.image, p.label, &cfg)?;
        let cam = camera_translation(theta, (h, w), depth_m, &intrinsics)?;
        Ok(PhysRow {
            row: super::attack::Row {
                label: p.label,
                clean_pred: rep.clean_pred,
                adv_pred: rep.final_pred,
                success: rep.success,
                iters: rep.iterations_used,
                loss_final: rep.final_loss,
                theta_o: theta,
                theta_b: theta,
                adv,
            },
            theta,
            depth: depth_m,
            cam,
        })
    };
    run().map_err(|e| e.to_string())
}

pub fn run(c: &PhysicalCmd) -> CliResult<()> {
    let (cfg, file) = resolve_attack(&c.attack)?;
    let depth = resolve_depth(c.depth.as_deref(), &file)?;
    let k = Intrinsics {
        fx: c.fx.or(file.get("fx")?),
        fy: c.fy.or(file.get("fy")?),
        cx: c.cx.or(file.get("cx")?),
        cy: c.cy.or(file.get("cy")?),
    };
    if [k.fx, k.fy].iter().flatten().any(|&f| !(f > 0.0)) {
        return Err(CliError::Config("focal lengths must be positive".into()));
    }
    let model = load_model(&c.model)?;
    let corpus = Corpus::load(&c.corpus)?;
    corpus.check_labels(model.num_classes())?;
    let pool = thread_pool()?;
    std::fs::create_dir_all(&c.out)?;

    let outcomes = run_batch(&pool, &corpus.entries, |e| physical_entry(&model, e, &cfg, &depth, &k));
    let (kept, skipped) = split_outcomes(corpus.entries.iter().map(|e| e.id.clone()), outcomes);
    let rows: Vec<_> = kept
        .iter()
        .map(|(id, r)| {
            eprintln!(
                "physical {id}: success={} theta=({}, {}) camera=({} m, {} m)",
                r.row.success, r.theta.tx, r.theta.ty, r.cam.0, r.cam.1
            );
            let mut record = r.row.record(id);
            record.truncate(8);
            record.extend([fmt(r.depth), fmt(r.cam.0), fmt(r.cam.1)]);
            (id.clone(), record, r.row.label, &r.row.adv)
        })
        .collect();
    write_outputs(&c.out, &HEADER, &rows)?;
    print_summary(kept.iter().filter(|(_, r)| r.row.success).count(), kept.len(), skipped);
    finish(skipped, c.strict)
}
