//! Subcommand implementations and the helpers they share.

use std::path::Path;

use blurforge::attack::{AttackConfig, Variant};
use blurforge::imgcore::codec::load_image;
use blurforge::model::{Classifier, TinyCnn};
use blurforge::saliency::{load_mask, spectral_residual, DEFAULT_THRESHOLD_FACTOR};
use blurforge::{Image, Padding, SaliencyMask};

use crate::config::{pick, ConfigFile};
use crate::corpus::{Entry, Outcome};
use crate::error::{CliError, CliResult};
use crate::AttackArgs;

pub mod attack;
pub mod eval;
pub mod interpret;
pub mod physical;
pub mod sweep;
pub mod train;

pub(crate) fn load_model(path: &Path) -> CliResult<TinyCnn> {
    TinyCnn::load(path).map_err(|e| CliError::Io(format!("model {}: {e}", path.display())))
}

pub(crate) fn model_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// An entry's decoded image and saliency mask.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub id: String,
    pub label: usize,
    pub image: Image,
    pub mask: SaliencyMask,
}

/// Decodes the image, checks it against the model input, and reads the mask
/// file or falls back to spectral-residual saliency.
pub(crate) fn prepare(entry: &Entry, model: &dyn Classifier) -> Outcome<Prepared> {
    let image = load_image(&entry.image).map_err(|e| e.to_string())?;
    if image.shape() != model.input_shape() {
        return Err(format!("image shape {:?} does not match model input {:?}", image.shape(), model.input_shape()));
    }
    let (h, w, _) = image.shape();
    let mask = match &entry.mask {
        Some(path) => load_mask(path, (h, w)),
        None => spectral_residual(&image, DEFAULT_THRESHOLD_FACTOR),
    }
    .map_err(|e| e.to_string())?;
    Ok(Prepared {
        id: entry.id.clone(),
        label: entry.label,
        image,
        mask,
    })
}

/// Shortest representation that round-trips, so reports are exact and stable.
/// Negative zero prints as `0`.
pub(crate) fn fmt(v: f64) -> String {
    format!("{}", v + 0.0)
}

pub(crate) fn print_summary(successes: usize, n: usize, skipped: usize) {
    let rate = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
    println!("success_rate={} n={n} skipped={skipped}", fmt(rate));
}

pub(crate) fn finish(skipped: usize, strict: bool) -> CliResult<()> {
    if strict && skipped > 0 {
        Err(CliError::Skipped(skipped))
    } else {
        Ok(())
    }
}

pub(crate) fn parse_variant(s: &str) -> CliResult<Variant> {
    s.parse().map_err(|_| CliError::Config(format!("unknown variant '{s}' (pixel|obj|bg|image|full)")))
}

fn parse_padding(s: &str) -> CliResult<Padding> {
    match s {
        "zero" => Ok(Padding::Zero),
        "replicate" => Ok(Padding::Replicate),
        _ => Err(CliError::Config(format!("unknown padding '{s}' (zero|replicate)"))),
    }
}

/// Resolves attack flags over the config file and library defaults.
pub(crate) fn resolve_attack(args: &AttackArgs) -> CliResult<(AttackConfig, ConfigFile)> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let d = AttackConfig::default();
    let variant = match args.variant.as_deref().or(file.raw("variant")) {
        Some(v) => parse_variant(v)?,
        None => d.variant,
    };
    let padding = match args.padding.as_deref().or(file.raw("padding")) {
        Some(p) => parse_padding(p)?,
        None => d.padding,
    };
    let early_stop = if args.no_early_stop { false } else { pick(None, &file, "early-stop", d.early_stop)? };
    let cfg = AttackConfig {
        variant,
        eps: pick(args.eps, &file, "eps", d.eps)?,
        eps_theta: pick(args.eps_theta, &file, "eps-theta", d.eps_theta)?,
        n_steps: pick(args.n_steps, &file, "n-steps", d.n_steps)?,
        iterations: pick(args.iters, &file, "iters", d.iterations)?,
        step_kernel: pick(args.step_kernel, &file, "step-kernel", d.step_kernel)?,
        step_theta_px: pick(args.step_theta_px, &file, "step-theta-px", d.step_theta_px)?,
        mu: pick(args.mu, &file, "mu", d.mu)?,
        seed: pick(args.seed, &file, "seed", d.seed)?,
        early_stop,
        padding,
        direction_deg: None,
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok((cfg, file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_library() {
        let (cfg, _) = resolve_attack(&AttackArgs::default()).unwrap();
        assert_eq!(cfg, AttackConfig::default());
    }

    #[test]
    fn explicit_paper_flags_equal_defaults() {
        let args = AttackArgs {
            variant: Some("full".into()),
            eps: Some(15.0),
            eps_theta: Some(0.4),
            iters: Some(10),
            ..Default::default()
        };
        assert_eq!(resolve_attack(&args).unwrap().0, AttackConfig::default());
    }

    #[test]
    fn config_file_fills_unset_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "eps = 30\nvariant = obj\nmu = 0.5\nearly-stop = false\n").unwrap();
        let args = AttackArgs {
            eps: Some(20.0),
            config: Some(path),
            ..Default::default()
        };
        let (cfg, _) = resolve_attack(&args).unwrap();
        assert_eq!(cfg.eps, 20.0);
        assert_eq!(cfg.variant, Variant::Obj);
        assert_eq!(cfg.mu, 0.5);
        assert!(!cfg.early_stop);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for args in [
            AttackArgs { eps: Some(0.5), ..Default::default() },
            AttackArgs { variant: Some("wide".into()), ..Default::default() },
            AttackArgs { padding: Some("mirror".into()), ..Default::default() },
        ] {
            assert!(matches!(resolve_attack(&args), Err(CliError::Config(_))));
        }
    }
}
