use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain Monte Carlo from the prior.
    Mc,
    /// Multicanonical Monte Carlo with true evaluations at every step.
    Mmc,
    /// Multicanonical Monte Carlo with local GP surrogates.
    Gpmmc,
}

/// One experiment, read from a flat TOML file.
///
/// Method-specific keys are optional and checked by [`RunConfig::validate`];
/// model keys that do not apply to the chosen model are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `min_distance`, `beam` or `poisson_kl`.
    pub model: String,
    pub method: Method,
    pub seed: u64,
    /// Output directory; the CLI's `--out` takes precedence.
    pub output: Option<PathBuf>,

    /// Output range `[lo, hi]`. When both are omitted the range is taken from
    /// a pilot sample of `pilot_samples` prior draws, padded by 10%.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub bins: usize,
    pub pilot_samples: Option<usize>,

    /// Sample count for `mc`.
    pub samples: Option<usize>,

    /// MMC iterations `K` and samples per iteration `N`.
    pub iterations: Option<usize>,
    pub samples_per_iteration: Option<usize>,
    /// One shared or one per-coordinate random-walk scale; defaults to 0.5.
    pub proposal_scale: Option<Vec<f64>>,
    /// Discarded steps per iteration; defaults to `N / 10`.
    pub burn_in: Option<usize>,

    /// GP-MMC settings.
    pub gamma: Option<f64>,
    pub beta_max: Option<f64>,
    pub kernel_exponent: Option<u32>,
    pub initial_design: Option<usize>,

    /// `min_distance`: explicit centers, or `dimension` for the diagonal
    /// centers `±(1, …, 1)`. The default is the planar pair `(3, ±3)`.
    pub centers: Option<[Vec<f64>; 2]>,
    pub dimension: Option<usize>,

    /// `beam`: mean of the elastic modulus.
    pub e_mean: Option<f64>,

    /// `poisson_kl` settings; unset keys take the defaults of
    /// [`crate::benchmarks::PoissonKlSpec`].
    pub cells: Option<usize>,
    pub modes: Option<usize>,
    pub corr_length: Option<f64>,
    pub a0: Option<f64>,
    /// Directory for cached KL bases.
    pub kl_cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse { path: "<config>".into(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Parse { path: path.display().to_string(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let missing = |key: &str| Error::Config(format!("method {:?} requires `{key}`", self.method));
        let reject = |key: &str, present: bool| {
            if present {
                Err(Error::Config(format!("`{key}` does not apply to model {:?}", self.model)))
            } else {
                Ok(())
            }
        };
        match self.model.as_str() {
            "min_distance" => {
                reject("e_mean", self.e_mean.is_some())?;
                self.reject_pde_keys(reject)?;
                if self.centers.is_some() && self.dimension.is_some() {
                    return Err(Error::Config("give either `centers` or `dimension`, not both".into()));
                }
            }
            "beam" => {
                reject("centers", self.centers.is_some())?;
                reject("dimension", self.dimension.is_some())?;
                self.reject_pde_keys(reject)?;
            }
            "poisson_kl" => {
                reject("centers", self.centers.is_some())?;
                reject("dimension", self.dimension.is_some())?;
                reject("e_mean", self.e_mean.is_some())?;
            }
            other => return Err(Error::Config(format!("unknown model {other:?}"))),
        }
        if self.bins == 0 {
            return Err(Error::Config("`bins` must be positive".into()));
        }
        match (self.lo, self.hi) {
            (Some(lo), Some(hi)) if !(lo < hi) => return Err(Error::Config("`lo` must be below `hi`".into())),
            (Some(_), None) | (None, Some(_)) => return Err(Error::Config("give both `lo` and `hi`, or neither".into())),
            _ => {}
        }
        match self.method {
            Method::Mc => {
                if self.samples.is_none() {
                    return Err(missing("samples"));
                }
            }
            Method::Mmc | Method::Gpmmc => {
                if self.iterations.is_none() {
                    return Err(missing("iterations"));
                }
                if self.samples_per_iteration.is_none() {
                    return Err(missing("samples_per_iteration"));
                }
            }
        }
        if self.method == Method::Gpmmc {
            for (key, present) in [
                ("gamma", self.gamma.is_some()),
                ("beta_max", self.beta_max.is_some()),
                ("kernel_exponent", self.kernel_exponent.is_some()),
                ("initial_design", self.initial_design.is_some()),
            ] {
                if !present {
                    return Err(missing(key));
                }
            }
            if self.initial_design < Some(2) {
                return Err(Error::Config("`initial_design` must be at least 2".into()));
            }
        }
        Ok(())
    }

    fn reject_pde_keys(&self, reject: impl Fn(&str, bool) -> Result<()>) -> Result<()> {
        reject("cells", self.cells.is_some())?;
        reject("modes", self.modes.is_some())?;
        reject("corr_length", self.corr_length.is_some())?;
        reject("a0", self.a0.is_some())?;
        reject("kl_cache", self.kl_cache.is_some())
    }
}
