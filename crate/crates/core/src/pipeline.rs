//! End-to-end orchestration of detection, depth, scoring, and triage.

use num_complex::Complex32;

use crate::depth::{
    clean_mask, empirical_semivariogram, extract_boundary, fit_spherical_or_nugget, monte_carlo_depth,
    sample_boundary, BoundarySamples, DepthField, MonteCarloConfig, VariogramBin, VariogramModel,
};
use crate::detect::{
    apply_premask, candidate_mask, coherence, compute_bcr, compute_cci, extent_mask, fit_likelihoods,
    fuse_posterior, scene_threshold, ChannelSet, DetectionConfig, FloodOffsets, LikelihoodModel,
};
use crate::error::{Error, Result};
use crate::preprocess::{lee_sigma_filter, median_composite, to_db, LeeSigmaConfig};
use crate::raster::{Mask, Raster, RasterStack, NODATA};
use crate::scoring::{score_portfolio, CurveSet, Property, ScoringConfig};
use crate::terrain::{compute_hand, d8_flow_with_sinks, HandRaster};
use crate::triage::{assign_tiers, rank, RankedList, TierBoundaries};

/// Complex acquisitions for the two coherence pairs: (pre_primary,
/// pre_secondary) before the event and (pre_secondary, co) across it.
#[derive(Debug, Clone, PartialEq)]
pub struct SlcSet {
    pub pre_primary: Raster<Complex32>,
    pub pre_secondary: Raster<Complex32>,
    pub co: Raster<Complex32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineInputs {
    /// Pre-event linear intensities.
    pub pre_stack: RasterStack,
    /// Co-event linear intensity.
    pub post: Raster<f64>,
    pub slc: Option<SlcSet>,
    pub dem: Raster<f64>,
    pub dem_label: String,
    pub drainage: Mask,
    pub urban: Option<Mask>,
    /// Known-dry region for scene statistics; whole scene when absent.
    pub reference: Option<Mask>,
    pub permanent_water: Option<Mask>,
    pub properties: Vec<Property>,
}

impl PipelineInputs {
    /// All rasters share the intensity grid.
    pub fn validate(&self) -> Result<()> {
        let grid = &self.post;
        self.pre_stack.layers()[0].ensure_same_grid(grid)?;
        self.dem.ensure_same_grid(grid)?;
        self.drainage.ensure_same_grid(grid)?;
        for m in [&self.urban, &self.reference, &self.permanent_water].into_iter().flatten() {
            m.ensure_same_grid(grid)?;
        }
        if let Some(s) = &self.slc {
            s.pre_primary.ensure_same_grid(grid)?;
            s.pre_secondary.ensure_same_grid(grid)?;
            s.co.ensure_same_grid(grid)?;
        }
        for p in &self.properties {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    /// Lee sigma filtering of both intensity images; `None` skips it.
    pub despeckle: Option<LeeSigmaConfig>,
    /// Coherence estimation window `(range, azimuth)`.
    pub coherence_window: (usize, usize),
    pub detection: DetectionConfig,
    /// Flood specks smaller than this are dropped before depth estimation.
    pub min_region_cells: usize,
    pub n_sample: usize,
    pub n_bins: usize,
    /// Floor the fitted nugget at `mc.dem_sigma_m^2`, treating DEM vertical
    /// error as measurement error on every boundary sample.
    pub measurement_nugget: bool,
    pub mc: MonteCarloConfig,
    pub scoring: ScoringConfig,
    pub curves: CurveSet,
    pub tiers: TierBoundaries,
}

impl PipelineParams {
    pub fn new(seed: u64) -> Self {
        Self {
            despeckle: Some(LeeSigmaConfig::default()),
            coherence_window: (9, 9),
            detection: DetectionConfig::default(),
            min_region_cells: 16,
            n_sample: 500,
            n_bins: 15,
            measurement_nugget: true,
            mc: MonteCarloConfig::new(seed),
            scoring: ScoringConfig::default(),
            curves: CurveSet::default_res1(ScoringConfig::default().rescale).expect("built-in curve is valid"),
            tiers: TierBoundaries::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.mc.validate()?;
        self.tiers.validate()?;
        if self.coherence_window.0 == 0 || self.coherence_window.1 == 0 {
            return Err(Error::BadConfig("coherence window must be at least 1x1".into()));
        }
        if self.n_sample < BoundarySamples::MIN_SAMPLES {
            return Err(Error::BadConfig(format!(
                "n_sample must be >= {}",
                BoundarySamples::MIN_SAMPLES
            )));
        }
        if self.n_bins == 0 {
            return Err(Error::BadConfig("n_bins must be >= 1".into()));
        }
        if !(self.scoring.lambda_m > 0.0) {
            return Err(Error::BadLambda(self.scoring.lambda_m));
        }
        Ok(())
    }
}

/// Channel evidence shared by every fusion configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub bcr: Raster<f64>,
    /// Present when coherence inputs and an urban mask are available.
    pub cci: Option<Raster<f64>>,
    pub hand: HandRaster,
    pub reference: Mask,
    pub model: LikelihoodModel,
    pub bcr_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub channels: ChannelSet,
    pub posterior: Raster<f64>,
    pub extent: Mask,
}

/// Despeckled pre-event composite and co-event image, both in dB.
pub fn preprocess(inputs: &PipelineInputs, params: &PipelineParams) -> Result<(Raster<f64>, Raster<f64>)> {
    let composite = median_composite(&inputs.pre_stack)?;
    let (pre, post) = match &params.despeckle {
        Some(cfg) => (lee_sigma_filter(&composite, cfg)?, lee_sigma_filter(&inputs.post, cfg)?),
        None => (composite, inputs.post.clone()),
    };
    Ok((to_db(&pre)?, to_db(&post)?))
}

/// Computes BCR, HAND, and (if `with_cci`) CCI, then fits the likelihoods.
pub fn gather_evidence(inputs: &PipelineInputs, params: &PipelineParams, with_cci: bool) -> Result<Evidence> {
    inputs.validate()?;
    let (pre_db, post_db) = preprocess(inputs, params)?;
    let bcr = compute_bcr(&pre_db, &post_db)?;
    let reference = match &inputs.reference {
        Some(r) => r.clone(),
        None => Raster::filled(bcr.transform().clone(), true),
    };
    let bcr_threshold = scene_threshold(&bcr, &reference, params.detection.bcr_sigma_mult)?;
    let cci = if with_cci {
        let (slc, urban) = match (&inputs.slc, &inputs.urban) {
            (Some(s), Some(u)) => (s, u),
            _ => {
                return Err(Error::BadConfig(
                    "CCI channel needs the complex image triplet and an urban mask".into(),
                ))
            }
        };
        let coh_pre = coherence(&slc.pre_primary, &slc.pre_secondary, params.coherence_window)?;
        let coh_co = coherence(&slc.pre_secondary, &slc.co, params.coherence_window)?;
        Some(compute_cci(&coh_pre, &coh_co, urban)?)
    } else {
        None
    };
    let flow = d8_flow_with_sinks(&inputs.dem, Some(&inputs.drainage));
    let hand = compute_hand(&inputs.dem, &inputs.drainage, &flow)?;
    let offsets = FloodOffsets {
        bcr_db: params.detection.bcr_flood_offset_db,
        cci: params.detection.cci_flood_offset,
    };
    let model = fit_likelihoods(&bcr, cci.as_ref(), &reference, offsets)?;
    Ok(Evidence {
        bcr,
        cci,
        hand,
        reference,
        model,
        bcr_threshold,
    })
}

/// Posterior and extent for one channel configuration.
pub fn fuse(evidence: &Evidence, channels: ChannelSet, detection: &DetectionConfig) -> Result<Detection> {
    let cfg = DetectionConfig {
        channels,
        ..detection.clone()
    };
    let mut posterior = fuse_posterior(&evidence.bcr, evidence.cci.as_ref(), Some(&evidence.hand), &evidence.model, &cfg)?;
    if cfg.candidate_premask {
        let cci = if channels.cci { evidence.cci.as_ref() } else { None };
        let candidates = candidate_mask(&evidence.bcr, cci, evidence.bcr_threshold, &cfg)?;
        posterior = apply_premask(&posterior, &candidates)?;
    }
    let extent = extent_mask(&posterior, cfg.posterior_threshold);
    Ok(Detection {
        channels,
        posterior,
        extent,
    })
}

pub fn detect(inputs: &PipelineInputs, params: &PipelineParams) -> Result<(Evidence, Detection)> {
    params.validate()?;
    let channels = params.detection.channels;
    let evidence = gather_evidence(inputs, params, channels.cci)?;
    let detection = fuse(&evidence, channels, &params.detection)?;
    Ok((evidence, detection))
}

/// Extent masks for the four ablation configurations, in reporting order.
pub fn ablate(inputs: &PipelineInputs, params: &PipelineParams) -> Result<Vec<Detection>> {
    params.validate()?;
    let evidence = gather_evidence(inputs, params, true)?;
    ChannelSet::ablations()
        .into_iter()
        .map(|ch| fuse(&evidence, ch, &params.detection))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthOutput {
    /// Extent after speck removal and hole filling.
    pub cleaned: Mask,
    pub samples: Option<BoundarySamples>,
    pub bins: Vec<VariogramBin>,
    pub model: Option<VariogramModel>,
    /// The spherical fit failed and a pure-nugget model was used.
    pub nugget_fallback: bool,
    pub field: DepthField,
}

/// Depth field with every raster nodata, for events with no flooding.
pub fn empty_depth_field(like: &Raster<f64>) -> DepthField {
    let blank = Raster::with_default_nodata(like.transform().clone(), vec![NODATA; like.len()])
        .expect("shape preserved");
    DepthField::from_depth(blank)
}

/// Boundary sampling, variogram fit, and Monte Carlo kriging over the
/// cleaned extent. An extent that is empty after cleaning gives an all-dry
/// field.
pub fn estimate_depth(extent: &Mask, inputs: &PipelineInputs, params: &PipelineParams) -> Result<DepthOutput> {
    estimate_depth_on(extent, &inputs.dem, &inputs.dem_label, inputs.permanent_water.as_ref(), params)
}

/// [`estimate_depth`] from the terrain inputs alone.
pub fn estimate_depth_on(
    extent: &Mask,
    dem: &Raster<f64>,
    dem_label: &str,
    permanent_water: Option<&Mask>,
    params: &PipelineParams,
) -> Result<DepthOutput> {
    params.validate()?;
    extent.ensure_same_grid(dem)?;
    let cleaned = clean_mask(extent, params.min_region_cells);
    if cleaned.count_true() == 0 {
        log::warn!("flood extent is empty after cleaning; all properties are dry");
        return Ok(DepthOutput {
            cleaned,
            samples: None,
            bins: Vec::new(),
            model: None,
            nugget_fallback: false,
            field: empty_depth_field(dem),
        });
    }
    let boundary = extract_boundary(&cleaned, permanent_water)?;
    let samples = sample_boundary(&boundary, dem, params.n_sample, params.mc.seed, dem_label)?;
    let bins = empirical_semivariogram(&samples, params.n_bins)?;
    let (model, nugget_fallback) = fit_spherical_or_nugget(&bins);
    if nugget_fallback {
        log::warn!("spherical variogram fit failed; using a pure-nugget model");
    }
    let model = if params.measurement_nugget {
        model.with_nugget_floor(params.mc.dem_sigma_m * params.mc.dem_sigma_m)
    } else {
        model
    };
    let field = monte_carlo_depth(&samples, model, dem, &cleaned, &params.mc)?;
    Ok(DepthOutput {
        cleaned,
        samples: Some(samples),
        bins,
        model: Some(model),
        nugget_fallback,
        field,
    })
}

/// Scores, ranks, and tiers the portfolio against a depth field.
pub fn triage(properties: &[Property], field: &DepthField, params: &PipelineParams) -> Result<(RankedList, Vec<u8>)> {
    let scored = score_portfolio(properties, field, &params.curves, &params.scoring)?;
    let ranked = rank(scored);
    let tiers = assign_tiers(&ranked, &params.tiers)?;
    Ok((ranked, tiers))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub evidence: Evidence,
    pub detection: Detection,
    pub depth: DepthOutput,
    pub ranked: RankedList,
    /// Tier per ranked position.
    pub tiers: Vec<u8>,
}

pub fn run(inputs: &PipelineInputs, params: &PipelineParams) -> Result<PipelineOutput> {
    let (evidence, detection) = detect(inputs, params)?;
    let depth = estimate_depth(&detection.extent, inputs, params)?;
    let (ranked, tiers) = triage(&inputs.properties, &depth.field, params)?;
    Ok(PipelineOutput {
        evidence,
        detection,
        depth,
        ranked,
        tiers,
    })
}
