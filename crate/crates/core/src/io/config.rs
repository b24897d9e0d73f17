//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory of the config file. Unknown keys are
//! errors. List values (`pre_stack`) are comma-separated.

use std::path::{Path, PathBuf};

use crate::detect::ChannelSet;
use crate::error::{Error, Result};
use crate::geometry::LocalTangentPlane;
use crate::pipeline::{PipelineInputs, PipelineParams, SlcSet};
use crate::preprocess::LeeSigmaConfig;
use crate::raster::RasterStack;
use crate::scoring::CurveSet;

use super::raster_io::{read_complex, read_mask, read_raster};
use super::tables::read_parcels;

/// Input files named by a config. All paths are absolute or relative to
/// the process working directory once loaded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputPaths {
    pub pre_stack: Vec<PathBuf>,
    pub post: Option<PathBuf>,
    pub slc_pre_primary: Option<PathBuf>,
    pub slc_pre_secondary: Option<PathBuf>,
    pub slc_co: Option<PathBuf>,
    pub dem: Option<PathBuf>,
    pub drainage: Option<PathBuf>,
    pub urban: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub permanent_water: Option<PathBuf>,
    pub parcels: Option<PathBuf>,
    pub curves: Option<PathBuf>,
}

/// Pipeline stage whose inputs are checked by [`RunConfig::require`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Detect,
    /// Detection with every channel, regardless of `channels`.
    Ablate,
    Depth,
    Score,
    Triage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub base_dir: PathBuf,
    pub inputs: InputPaths,
    pub dem_label: String,
    /// ISO-8601 acquisition date copied into every output row.
    pub sar_date: String,
    /// Geographic anchor of the map frame, for lon-lat output.
    pub geo_origin: Option<LocalTangentPlane>,
    pub output_dir: PathBuf,
    /// Every tunable except the seed and the curve set, which are bound by
    /// [`RunConfig::params`].
    pub params: PipelineParams,
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: {what}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(key, v, "expected a finite number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, v, "expected a non-negative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

fn parse_window(key: &str, v: &str) -> Result<(usize, usize)> {
    let (a, b) = v
        .split_once(['x', 'X'])
        .ok_or_else(|| bad(key, v, "expected RANGExAZIMUTH, e.g. 9x9"))?;
    Ok((parse_usize(key, a.trim())?, parse_usize(key, b.trim())?))
}

impl RunConfig {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        let base_dir = base_dir.into();
        Self {
            output_dir: base_dir.join("out"),
            base_dir,
            inputs: InputPaths::default(),
            dem_label: "dem".into(),
            sar_date: String::new(),
            geo_origin: None,
            params: PipelineParams::new(0),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>, source_name: &str) -> Result<Self> {
        let mut cfg = Self::new(base_dir);
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(source_name, format!("line {}", ln + 1), "expected key = value")
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::parse(source_name, format!("line {}", ln + 1), e.to_string()))?;
        }
        Ok(cfg)
    }

    fn path(&self, v: &str) -> PathBuf {
        let p = Path::new(v);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn opt_path(&self, v: &str) -> Option<PathBuf> {
        (!v.is_empty()).then(|| self.path(v))
    }

    /// Applies one setting. Also used for command-line overrides, whose
    /// relative paths resolve against `base_dir` like file entries.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.params;
        let det = &mut p.detection;
        match key {
            "pre_stack" => {
                self.inputs.pre_stack = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| self.path(s))
                    .collect()
            }
            "post" => self.inputs.post = self.opt_path(v),
            "slc_pre_primary" => self.inputs.slc_pre_primary = self.opt_path(v),
            "slc_pre_secondary" => self.inputs.slc_pre_secondary = self.opt_path(v),
            "slc_co" => self.inputs.slc_co = self.opt_path(v),
            "dem" => self.inputs.dem = self.opt_path(v),
            "drainage" => self.inputs.drainage = self.opt_path(v),
            "urban" => self.inputs.urban = self.opt_path(v),
            "reference" => self.inputs.reference = self.opt_path(v),
            "permanent_water" => self.inputs.permanent_water = self.opt_path(v),
            "parcels" => self.inputs.parcels = self.opt_path(v),
            "curves" => self.inputs.curves = self.opt_path(v),
            "output_dir" => self.output_dir = self.path(v),
            "dem_label" => self.dem_label = v.to_string(),
            "sar_date" => self.sar_date = v.to_string(),
            "geo_origin" => {
                let (lat, lon) = v
                    .split_once(',')
                    .ok_or_else(|| bad(key, v, "expected LAT,LON in degrees"))?;
                let plane = LocalTangentPlane::new(parse_f64(key, lat.trim())?, parse_f64(key, lon.trim())?)
                    .map_err(|e| bad(key, v, &e.to_string()))?;
                self.geo_origin = Some(plane);
            }
            "seed" => return Err(Error::Config("the seed is a command-line flag (--seed), not a config key".into())),

            "channels" => det.channels = v.parse::<ChannelSet>().map_err(|e| bad(key, v, &e.to_string()))?,
            "bcr_sigma_mult" => det.bcr_sigma_mult = parse_f64(key, v)?,
            "cci_threshold" => det.cci_threshold = parse_f64(key, v)?,
            "hand_threshold_m" => det.hand_threshold_m = parse_f64(key, v)?,
            "posterior_threshold" => det.posterior_threshold = parse_f64(key, v)?,
            "prior_flood" => det.prior_flood = parse_f64(key, v)?,
            "bcr_flood_offset_db" => det.bcr_flood_offset_db = parse_f64(key, v)?,
            "cci_flood_offset" => det.cci_flood_offset = parse_f64(key, v)?,
            "candidate_premask" => det.candidate_premask = parse_bool(key, v)?,
            "coherence_window" => p.coherence_window = parse_window(key, v)?,

            "despeckle" => {
                p.despeckle = if parse_bool(key, v)? {
                    Some(p.despeckle.clone().unwrap_or_default())
                } else {
                    None
                }
            }
            "lee_kernel" | "lee_sigma_mult" | "lee_looks" | "lee_min_retained" => {
                let lee = p.despeckle.get_or_insert_with(LeeSigmaConfig::default);
                match key {
                    "lee_kernel" => lee.kernel = parse_usize(key, v)?,
                    "lee_sigma_mult" => lee.sigma_mult = parse_f64(key, v)?,
                    "lee_looks" => lee.looks = parse_f64(key, v)?,
                    _ => lee.min_retained = parse_usize(key, v)?,
                }
            }

            "min_region_cells" => p.min_region_cells = parse_usize(key, v)?,
            "n_sample" => p.n_sample = parse_usize(key, v)?,
            "n_bins" => p.n_bins = parse_usize(key, v)?,
            "measurement_nugget" => p.measurement_nugget = parse_bool(key, v)?,
            "n_mc" => p.mc.n_mc = parse_usize(key, v)?,
            "dem_sigma_m" => p.mc.dem_sigma_m = parse_f64(key, v)?,
            "corr_length_m" => p.mc.corr_length_m = parse_f64(key, v)?,
            "decimation" => p.mc.decimation = parse_usize(key, v)?,

            "lambda_m" => p.scoring.lambda_m = parse_f64(key, v)?,
            "theta_damage_usd" => p.scoring.theta_damage_usd = parse_f64(key, v)?,
            "faf_min" => p.scoring.faf_min = parse_f64(key, v)?,
            "rescale" => p.scoring.rescale = parse_f64(key, v)?,
            "tier_t1" => p.tiers.t1 = parse_f64(key, v)?,
            "tier_t2" => p.tiers.t2 = parse_f64(key, v)?,
            "tier_c3_min" => p.tiers.c3_min = parse_f64(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides<'a>(&mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Parameters bound to `seed`, with the curve set loaded (built-in RES1
    /// curves unless `curves` names a file) at the configured rescale.
    pub fn params(&self, seed: u64) -> Result<PipelineParams> {
        let mut p = self.params.clone();
        p.mc.seed = seed;
        p.curves = match &self.inputs.curves {
            Some(path) => CurveSet::load(path, p.scoring.rescale)?,
            None => CurveSet::default_res1(p.scoring.rescale)?,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks that every file `stage` reads is configured and exists,
    /// without reading any of them.
    pub fn require(&self, stage: Stage) -> Result<()> {
        let i = &self.inputs;
        let mut needed: Vec<(&str, Option<&PathBuf>)> = Vec::new();
        match stage {
            Stage::Detect | Stage::Ablate => {
                if i.pre_stack.is_empty() {
                    return Err(Error::Config("pre_stack is not set".into()));
                }
                needed.extend(i.pre_stack.iter().map(|p| ("pre_stack", Some(p))));
                needed.extend([("post", i.post.as_ref()), ("dem", i.dem.as_ref()), ("drainage", i.drainage.as_ref())]);
                if stage == Stage::Ablate || self.params.detection.channels.cci {
                    needed.extend([
                        ("slc_pre_primary", i.slc_pre_primary.as_ref()),
                        ("slc_pre_secondary", i.slc_pre_secondary.as_ref()),
                        ("slc_co", i.slc_co.as_ref()),
                        ("urban", i.urban.as_ref()),
                    ]);
                }
                for (k, p) in [("reference", &i.reference), ("permanent_water", &i.permanent_water)] {
                    if p.is_some() {
                        needed.push((k, p.as_ref()));
                    }
                }
            }
            Stage::Depth => {
                needed.push(("dem", i.dem.as_ref()));
                if i.permanent_water.is_some() {
                    needed.push(("permanent_water", i.permanent_water.as_ref()));
                }
            }
            Stage::Score => {
                needed.push(("parcels", i.parcels.as_ref()));
                if i.curves.is_some() {
                    needed.push(("curves", i.curves.as_ref()));
                }
            }
            Stage::Triage => {
                needed.push(("parcels", i.parcels.as_ref()));
                if self.geo_origin.is_none() {
                    return Err(Error::Config("geo_origin is not set (needed for GeoJSON output)".into()));
                }
            }
        }
        for (key, path) in needed {
            match path {
                None => return Err(Error::Config(format!("{key} is not set"))),
                Some(p) if !p.is_file() => {
                    return Err(Error::Config(format!("{key}: {} does not exist", p.display())))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Reads every configured input. Rasters must share one grid.
    pub fn load_inputs(&self) -> Result<PipelineInputs> {
        let i = &self.inputs;
        let need = |k: &str, p: &Option<PathBuf>| -> Result<PathBuf> {
            p.clone().ok_or_else(|| Error::Config(format!("{k} is not set")))
        };
        let layers = i.pre_stack.iter().map(|p| read_raster(p)).collect::<Result<Vec<_>>>()?;
        let pre_stack = RasterStack::new(layers)?;
        let post = read_raster(&need("post", &i.post)?)?;
        let slc = match (&i.slc_pre_primary, &i.slc_pre_secondary, &i.slc_co) {
            (Some(a), Some(b), Some(c)) => Some(SlcSet {
                pre_primary: read_complex(a)?,
                pre_secondary: read_complex(b)?,
                co: read_complex(c)?,
            }),
            (None, None, None) => None,
            _ => return Err(Error::Config("slc_pre_primary, slc_pre_secondary and slc_co go together".into())),
        };
        let opt_mask = |p: &Option<PathBuf>| p.as_ref().map(|p| read_mask(p)).transpose();
        let inputs = PipelineInputs {
            pre_stack,
            post,
            slc,
            dem: read_raster(&need("dem", &i.dem)?)?,
            dem_label: self.dem_label.clone(),
            drainage: read_mask(&need("drainage", &i.drainage)?)?,
            urban: opt_mask(&i.urban)?,
            reference: opt_mask(&i.reference)?,
            permanent_water: opt_mask(&i.permanent_water)?,
            properties: match &i.parcels {
                Some(p) => read_parcels(p)?,
                None => Vec::new(),
            },
        };
        inputs.validate()?;
        Ok(inputs)
    }
}
