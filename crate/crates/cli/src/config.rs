use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use spde_lab_core::experiment::{Experiment, ExperimentConfig, NoiseKind};

pub const SEED_ENV: &str = "SPDE_LAB_SEED";

/// Run parameters shared by every subcommand. Each flag doubles as a key of
/// the `--config` file; values given on the command line win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Overrides {
    /// Subcommand a config file was written for; only read from files.
    #[arg(skip)]
    pub experiment: Option<Experiment>,
    /// Covariance spectrum: finite:q1,q2,..  power:p  exp:r
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Number of retained modes
    #[arg(long)]
    pub modes: Option<usize>,
    /// Domain length
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Monte Carlo sample count
    #[arg(long)]
    pub samples: Option<usize>,
    /// Master seed (falls back to SPDE_LAB_SEED)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on this
    #[arg(long)]
    pub workers: Option<usize>,
    /// Wave speed
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Viscosity
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Exit-probability level
    #[arg(long)]
    pub delta: Option<f64>,
    /// Poincaré constant (default (l/pi)^2)
    #[arg(long)]
    pub poincare_c: Option<f64>,
    /// Burgers noise model
    #[arg(long, value_parser = parse_noise)]
    pub noise: Option<NoiseKind>,
    /// Mode carrying the initial condition
    #[arg(long)]
    pub mode: Option<usize>,
    /// Initial amplitude along --mode
    #[arg(long, allow_negative_numbers = true)]
    pub u0_amp: Option<f64>,
    /// Initial velocity along --mode (wave)
    #[arg(long, allow_negative_numbers = true)]
    pub velocity: Option<f64>,
    /// Independent paths for the exponent estimate (lyapunov)
    #[arg(long)]
    pub keys: Option<usize>,
    /// Output directory [default: runs/<subcommand>]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_noise(s: &str) -> Result<NoiseKind, String> {
    match s {
        "additive" => Ok(NoiseKind::Additive),
        "multiplicative" => Ok(NoiseKind::Multiplicative),
        _ => Err(format!("expected `additive` or `multiplicative`, got `{s}`")),
    }
}

impl Overrides {
    /// Fills every unset field from `lower`.
    fn or(self, lower: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: self.$f.or(lower.$f)),* } };
        }
        pick!(
            experiment, spectrum, modes, l, dt, t_final, samples, seed, workers, c, epsilon, sigma, nu, alpha, beta, gamma, delta,
            poincare_c, noise, mode, u0_amp, velocity, keys, out
        )
    }
}

pub struct Resolved {
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

/// Layers command line over config file over `SPDE_LAB_SEED` over defaults.
pub fn resolve(
    experiment: Experiment,
    cli: Overrides,
    file: Option<&Path>,
    env_seed: Option<String>,
) -> Result<Resolved, String> {
    let from_file = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let parsed: Overrides =
                toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?;
            if let Some(e) = parsed.experiment.filter(|&e| e != experiment) {
                return Err(format!("config {} was written for `{e}`, not `{experiment}`", path.display()));
            }
            parsed
        }
        None => Overrides::default(),
    };
    let mut merged = cli.or(from_file);
    if merged.seed.is_none() {
        if let Some(s) = env_seed {
            let seed = s.trim().parse().map_err(|_| format!("{SEED_ENV}={s} is not an unsigned integer"))?;
            merged.seed = Some(seed);
        }
    }

    let d = ExperimentConfig::defaults(experiment);
    let config = ExperimentConfig {
        experiment,
        spectrum: merged.spectrum.unwrap_or(d.spectrum),
        modes: merged.modes.unwrap_or(d.modes),
        l: merged.l.unwrap_or(d.l),
        dt: merged.dt.unwrap_or(d.dt),
        t_final: merged.t_final.unwrap_or(d.t_final),
        samples: merged.samples.unwrap_or(d.samples),
        seed: merged.seed.unwrap_or(d.seed),
        workers: merged.workers.unwrap_or(d.workers),
        c: merged.c.unwrap_or(d.c),
        epsilon: merged.epsilon.unwrap_or(d.epsilon),
        sigma: merged.sigma.unwrap_or(d.sigma),
        nu: merged.nu.unwrap_or(d.nu),
        alpha: merged.alpha.unwrap_or(d.alpha),
        beta: merged.beta.unwrap_or(d.beta),
        gamma: merged.gamma.unwrap_or(d.gamma),
        delta: merged.delta.unwrap_or(d.delta),
        poincare_c: merged.poincare_c.or(d.poincare_c),
        noise: merged.noise.unwrap_or(d.noise),
        mode: merged.mode.unwrap_or(d.mode),
        u0_amp: merged.u0_amp.unwrap_or(d.u0_amp),
        velocity: merged.velocity.unwrap_or(d.velocity),
        keys: merged.keys.unwrap_or(d.keys),
    };
    config.validate().map_err(|e| e.to_string())?;
    let out = merged.out.unwrap_or_else(|| Path::new("runs").join(experiment.name()));
    Ok(Resolved { config, out })
}
