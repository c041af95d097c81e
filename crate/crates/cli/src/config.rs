//! Run configuration: every key the runner understands, with its default.
//!
//! | key | default |
//! |---|---|
//! | `mu`, `lambda`, `kappa`, `c_v`, `rho_inf`, `theta_inf` | `1`, `0`, `1`, `1.5`, `1`, `1` |
//! | `pressure.law`, `pressure.R` | `ideal`, `1` |
//! | `potential.kind`, `potential.a`, `potential.w`, `potential.file` | `gaussian`, `0.01`, `1`, empty |
//! | `grid.N`, `grid.L` | `32`, `8` |
//! | `cutoff.eta` | `auto` (half the largest resolved frequency) |
//! | `energy.eta1`, `energy.eta2` | `0.1`, `0.1` |
//! | `linear.t_min`, `linear.t_max`, `linear.samples` | `100`, `10000`, `40` |
//! | `linear.r_max`, `linear.profile`, `linear.radius` | `50`, `step`, `1` |
//! | `tolerance` | `0.05` |
//! | `init.kind`, `init.amplitude`, `init.k`, `init.file` | `random-smooth`, `0.001`, `4`, empty |
//! | `dt`, `t_end`, `sample.count` | `0.05`, `1`, `11` |
//! | `nonlinear.reference` | `linearized` (or `semigroup`) |
//! | `check.trials`, `check.fault` | `100`, `none` (or `hermitian`) |
//! | `seed` | `0` |
//! | `output.dir` | `cns-out` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cns_core::config::KeyValues;
use cns_core::nonlinear::{InitKind, SourceMode};
use cns_core::params::law_from_config;
use cns_core::{FrequencyCutoff, Grid, IdealGas, PhysicalParams, Potential};

#[derive(Debug, Clone)]
pub struct LinearSettings {
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub r_max: f64,
    pub zero_profile: bool,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub law: IdealGas,
    pub grid: Grid,
    pub potential: Potential,
    pub cutoff: FrequencyCutoff,
    pub eta1: f64,
    pub eta2: f64,
    pub linear: LinearSettings,
    pub tolerance: f64,
    pub init: InitKind,
    pub amplitude: f64,
    pub init_k: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_count: usize,
    pub reference: SourceMode,
    pub trials: usize,
    pub hermitian_fault: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub resolved: BTreeMap<String, String>,
}

/// Command-line flags that override config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        if let Some(out) = &overrides.out {
            kv.set("output.dir", out.display());
        }
        if let Some(seed) = overrides.seed {
            kv.set("seed", seed);
        }
        if let Some(tol) = overrides.tolerance {
            kv.set("tolerance", tol);
        }

        let params = PhysicalParams::from_config(&mut kv)?;
        let law = law_from_config(&mut kv)?;
        let grid = Grid::new(kv.take_usize("grid.N", 32)?, kv.take_f64("grid.L", 8.0)?)?;
        let potential = Potential::from_config(&mut kv, &grid)?;
        let cutoff = match kv.take_str("cutoff.eta", "auto")?.as_str() {
            "auto" => FrequencyCutoff::default_for(&grid),
            raw => FrequencyCutoff::new(raw.parse().with_context(|| format!("cutoff.eta = `{raw}`"))?)?,
        };
        let eta1 = kv.take_f64("energy.eta1", 0.1)?;
        let eta2 = kv.take_f64("energy.eta2", 0.1)?;
        let linear = LinearSettings {
            t_min: kv.take_f64("linear.t_min", 100.0)?,
            t_max: kv.take_f64("linear.t_max", 1e4)?,
            samples: kv.take_usize("linear.samples", 40)?,
            r_max: kv.take_f64("linear.r_max", 50.0)?,
            zero_profile: match kv.take_str("linear.profile", "step")?.as_str() {
                "step" => false,
                "zero" => true,
                other => bail!("linear.profile must be `step` or `zero`, got `{other}`"),
            },
            radius: kv.take_f64("linear.radius", 1.0)?,
        };
        if !(linear.t_min > 0.0 && linear.t_max > linear.t_min && linear.samples >= 2) {
            bail!("need 0 < linear.t_min < linear.t_max and linear.samples >= 2");
        }
        let tolerance = kv.take_f64("tolerance", 0.05)?;
        let init_kind = kv.take_str("init.kind", "random-smooth")?;
        let amplitude = kv.take_f64("init.amplitude", 1e-3)?;
        let init_k = kv.take_f64("init.k", 4.0)?;
        let init_file = kv.take_str("init.file", "")?;
        let init = match init_kind.as_str() {
            "random-smooth" => InitKind::RandomSmooth,
            "single-mode" => InitKind::SingleMode,
            "file" => InitKind::File(PathBuf::from(init_file)),
            other => bail!("init.kind must be random-smooth, single-mode or file, got `{other}`"),
        };
        let dt = kv.take_f64("dt", 0.05)?;
        let t_end = kv.take_f64("t_end", 1.0)?;
        let sample_count = kv.take_usize("sample.count", 11)?;
        let reference = match kv.take_str("nonlinear.reference", "linearized")?.as_str() {
            "linearized" => SourceMode::Linearized,
            "semigroup" => SourceMode::Off,
            other => bail!("nonlinear.reference must be `linearized` or `semigroup`, got `{other}`"),
        };
        let trials = kv.take_usize("check.trials", 100)?;
        let hermitian_fault = match kv.take_str("check.fault", "none")?.as_str() {
            "none" => false,
            "hermitian" => true,
            other => bail!("check.fault must be `none` or `hermitian`, got `{other}`"),
        };
        let seed = kv.take("seed", 0u64)?;
        let out_dir = PathBuf::from(kv.take_str("output.dir", "cns-out")?);
        kv.finish()?;
        Ok(Self {
            params,
            law,
            grid,
            potential,
            cutoff,
            eta1,
            eta2,
            linear,
            tolerance,
            init,
            amplitude,
            init_k,
            dt,
            t_end,
            sample_count,
            reference,
            trials,
            hermitian_fault,
            seed,
            out_dir,
            resolved: kv.resolved().clone(),
        })
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating output directory {}", self.out_dir.display()))?;
        let probe = self.out_dir.join(".write-probe");
        std::fs::write(&probe, b"").with_context(|| format!("{} is not writable", self.out_dir.display()))?;
        std::fs::remove_file(&probe)?;
        Ok(())
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
