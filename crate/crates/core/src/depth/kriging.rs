//! Ordinary kriging with a global neighbourhood.

use nalgebra::{DMatrix, DVector, LU};

use crate::depth::boundary::{BoundarySamples, SamplePoint};
use crate::depth::variogram::VariogramModel;
use crate::error::{Error, Result};

/// Diagonal jitter added once when the kriging matrix is singular.
pub const SINGULAR_JITTER: f64 = 1e-10;

type Lu = LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// A factorised ordinary-kriging system.
///
/// The system matrix uses semivariances with `gamma = 0` for coincident
/// points, bordered by the unbiasedness row and column. It is factorised
/// once; [`OrdinaryKriging::with_values`] re-solves for new sample values at
/// the same locations.
#[derive(Debug, Clone)]
pub struct OrdinaryKriging {
    model: VariogramModel,
    xy: Vec<(f64, f64)>,
    /// Original sample indices merged into each kriging point.
    groups: Vec<Vec<usize>>,
    lu: Lu,
    /// Dual coefficients `A^-1 [z; 0]`.
    dual: DVector<f64>,
    n_original: usize,
}

impl OrdinaryKriging {
    pub fn new(samples: &BoundarySamples, model: VariogramModel) -> Result<Self> {
        Self::from_points(samples.points(), model, 0.0)
    }

    /// Builds the system from raw points. Points closer than `min_separation`
    /// to an earlier kept point are merged into it (values averaged).
    /// Needs at least two points.
    pub fn from_points(points: &[SamplePoint], model: VariogramModel, min_separation: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewSamples {
                need: 2,
                got: points.len(),
            });
        }
        let mut xy: Vec<(f64, f64)> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let hit = xy
                .iter()
                .position(|&(x, y)| (x - p.x).hypot(y - p.y) < min_separation.max(0.0) || (x == p.x && y == p.y));
            match hit {
                Some(k) => groups[k].push(i),
                None => {
                    xy.push((p.x, p.y));
                    groups.push(vec![i]);
                }
            }
        }
        let n = xy.len();
        let gamma = |a: (f64, f64), b: (f64, f64)| {
            let h = (a.0 - b.0).hypot(a.1 - b.1);
            if h == 0.0 {
                0.0
            } else {
                model.gamma(h)
            }
        };
        let build = |jitter: f64| {
            DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
                (true, true) if i == j => jitter,
                (true, true) => gamma(xy[i], xy[j]),
                (false, false) => 0.0,
                _ => 1.0,
            })
        };
        let z = merged_values(&groups, points.iter().map(|p| p.z));
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&z);

        for jitter in [0.0, SINGULAR_JITTER] {
            let lu = build(jitter).lu();
            if let Some(dual) = lu.solve(&rhs) {
                if dual.iter().all(|v| v.is_finite()) {
                    return Ok(Self {
                        model,
                        xy,
                        groups,
                        lu,
                        dual,
                        n_original: points.len(),
                    });
                }
            }
        }
        Err(Error::SingularSystem)
    }

    pub fn model(&self) -> &VariogramModel {
        &self.model
    }

    /// Number of distinct kriging points after merging.
    pub fn n_points(&self) -> usize {
        self.xy.len()
    }

    /// Same locations and model with new per-sample values (one per original
    /// input point).
    pub fn with_values(&self, z: &[f64]) -> Result<Self> {
        if z.len() != self.n_original {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", self.n_original),
                got: format!("{} values", z.len()),
            });
        }
        let n = self.xy.len();
        let zm = merged_values(&self.groups, z.iter().copied());
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&zm);
        let dual = self.lu.solve(&rhs).ok_or(Error::SingularSystem)?;
        Ok(Self {
            dual,
            ..self.clone()
        })
    }

    fn gamma_to(&self, x: f64, y: f64) -> DVector<f64> {
        let n = self.xy.len();
        DVector::from_fn(n + 1, |i, _| {
            if i == n {
                1.0
            } else {
                let h = (self.xy[i].0 - x).hypot(self.xy[i].1 - y);
                if h == 0.0 {
                    0.0
                } else {
                    self.model.gamma(h)
                }
            }
        })
    }

    /// Prediction through the dual form, `O(n)` per target.
    pub fn predict(&self, x: f64, y: f64) -> f64 {
        let n = self.xy.len();
        let mut acc = self.dual[n];
        for (i, &(px, py)) in self.xy.iter().enumerate() {
            let h = (px - x).hypot(py - y);
            if h != 0.0 {
                acc += self.dual[i] * self.model.gamma(h);
            }
        }
        acc
    }

    /// Kriging weights (one per merged point) and the Lagrange multiplier.
    pub fn weights(&self, x: f64, y: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.xy.len();
        let sol = self.lu.solve(&self.gamma_to(x, y)).ok_or(Error::SingularSystem)?;
        Ok((sol.rows(0, n).iter().copied().collect(), sol[n]))
    }

    /// Prediction and ordinary-kriging variance `lambda . gamma0 + mu`
    /// (clamped at 0).
    pub fn predict_with_variance(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let n = self.xy.len();
        let g0 = self.gamma_to(x, y);
        let sol = self.lu.solve(&g0).ok_or(Error::SingularSystem)?;
        let variance = sol.rows(0, n).dot(&g0.rows(0, n)) + sol[n];
        Ok((self.predict(x, y), variance.max(0.0)))
    }
}

fn merged_values(groups: &[Vec<usize>], z: impl Iterator<Item = f64>) -> DVector<f64> {
    let z: Vec<f64> = z.collect();
    DVector::from_iterator(
        groups.len(),
        groups
            .iter()
            .map(|g| g.iter().map(|&i| z[i]).sum::<f64>() / g.len() as f64),
    )
}

/// Predictions and kriging variances at `targets`.
pub fn krige_predict(
    samples: &BoundarySamples,
    model: VariogramModel,
    targets: &[(f64, f64)],
) -> Result<Vec<(f64, f64)>> {
    let ok = OrdinaryKriging::new(samples, model)?;
    targets.iter().map(|&(x, y)| ok.predict_with_variance(x, y)).collect()
}
