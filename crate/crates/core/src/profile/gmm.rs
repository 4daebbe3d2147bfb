//! Mixture model over (time, SPD matrix) pairs.
//!
//! Component `k` is a product density: a 1-D Gaussian over time and a
//! zero-mean Gaussian over the whitened tangent coordinates
//! `sym_vec(log(C_k^{-1/2} X C_k^{-1/2}))` at its SPD center `C_k`. EM
//! re-centers every iteration: the new center is the responsibility-weighted
//! Fréchet mean, and the tangent covariance is re-estimated at that center.
//!
//! Because the Fréchet mean does not maximize the expected log-likelihood
//! exactly when the tangent covariance is anisotropic, the M-step is
//! generalized: per component, the candidate parameters are kept only if they
//! do not lower the expected complete-data log-likelihood (falling back to
//! the old center with a refitted covariance, then to the old parameters).
//! That keeps the log-likelihood non-decreasing between iterations.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{
    spd_distance, sym_vec_len, sym_vec_unchecked, weighted_frechet_mean, whitened_log_with, CovarianceWire,
    FrechetOptions, SpdMatrix,
};

/// One training sample: normalized time plus an SPD matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedSpd {
    pub u: f64,
    pub m: SpdMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GmmInit {
    /// Contiguous equal-count time bins.
    #[default]
    TimeBins,
    /// Seeded k-means++ over `spd_distance² + Δu²`.
    Seeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmmOptions {
    pub k: usize,
    pub seed: u64,
    pub max_em_iter: usize,
    /// Stop when the log-likelihood gain falls below `tol · max(1, |LL|)`.
    pub tol: f64,
    pub init: GmmInit,
    /// Added to tangent covariances (times identity) and time variances.
    pub regularization: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            k: 5,
            seed: 0,
            max_em_iter: 100,
            tol: 1e-8,
            init: GmmInit::TimeBins,
            regularization: 1e-6,
        }
    }
}

pub const EMPTY_COMPONENT_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub time_mean: f64,
    pub time_var: f64,
    pub center: SpdMatrix,
    /// Covariance of whitened tangent coordinates at `center` (sym_vec ordering).
    pub tangent_cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmWire", into = "GmmWire")]
pub struct SpdGmm {
    pub dim: usize,
    pub components: Vec<GmmComponent>,
    /// Log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    /// Entries of `log_likelihood` right after an empty component was re-seeded.
    pub reseeded_at: Vec<usize>,
}

fn log_normal_1d(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * PI * var).ln() + d * d / var)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

struct TangentGaussian {
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl TangentGaussian {
    fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Gmm("tangent covariance is not positive definite".into()))?;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let d = cov.nrows() as f64;
        Ok(TangentGaussian {
            chol,
            log_norm: -0.5 * (d * (2.0 * PI).ln() + log_det),
        })
    }

    fn log_density(&self, v: &DVector<f64>) -> f64 {
        let y = self
            .chol
            .l()
            .solve_lower_triangular(v)
            .expect("cholesky factor is invertible");
        self.log_norm - 0.5 * y.norm_squared()
    }
}

fn tangent_coords(center: &SpdMatrix, data: &[TimedSpd]) -> Result<Vec<DVector<f64>>> {
    let (_, inv_sqrt) = center.sqrt_and_inv_sqrt();
    data.iter()
        .map(|p| Ok(sym_vec_unchecked(&whitened_log_with(&inv_sqrt, &p.m)?).into_vector()))
        .collect()
}

fn weighted_scatter(coords: &[DVector<f64>], r: &[f64], total: f64, reg: f64) -> DMatrix<f64> {
    let d = coords[0].len();
    let mut s = DMatrix::zeros(d, d);
    for (v, &w) in coords.iter().zip(r) {
        if w > 0.0 {
            s.ger(w / total, v, v, 1.0);
        }
    }
    s += DMatrix::identity(d, d) * reg;
    s
}

fn tangent_q(coords: &[DVector<f64>], r: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    let g = TangentGaussian::new(cov)?;
    Ok(coords
        .iter()
        .zip(r)
        .filter(|(_, &w)| w > 0.0)
        .map(|(v, &w)| w * g.log_density(v))
        .sum())
}

fn time_q(data: &[TimedSpd], r: &[f64], mean: f64, var: f64) -> f64 {
    data.iter()
        .zip(r)
        .map(|(p, &w)| w * log_normal_1d(p.u, mean, var))
        .sum()
}

fn time_moments(data: &[TimedSpd], r: &[f64], total: f64, reg: f64) -> (f64, f64) {
    let mean = data.iter().zip(r).map(|(p, &w)| w * p.u).sum::<f64>() / total;
    let var = data.iter().zip(r).map(|(p, &w)| w * (p.u - mean).powi(2)).sum::<f64>() / total;
    (mean, var + reg)
}

fn canonical_cmp(a: &TimedSpd, b: &TimedSpd) -> Ordering {
    a.u.total_cmp(&b.u).then_with(|| {
        let (x, y) = (a.m.upper_triangular_row_major(), b.m.upper_triangular_row_major());
        x.iter()
            .zip(&y)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Fits the component to hard or soft responsibilities with no fallback.
fn fit_component(data: &[TimedSpd], r: &[f64], reg: f64) -> Result<GmmComponent> {
    let total: f64 = r.iter().sum();
    let points: Vec<SpdMatrix> = data.iter().map(|p| p.m.clone()).collect();
    let center = weighted_frechet_mean(&points, r, FrechetOptions::default())?;
    let coords = tangent_coords(&center, data)?;
    let (time_mean, time_var) = time_moments(data, r, total, reg);
    Ok(GmmComponent {
        weight: total / data.len() as f64,
        time_mean,
        time_var,
        tangent_cov: weighted_scatter(&coords, r, total, reg),
        center,
    })
}

struct EStep {
    resp: Vec<Vec<f64>>,
    coords: Vec<Vec<DVector<f64>>>,
    point_ll: Vec<f64>,
    ll: f64,
}

fn e_step(data: &[TimedSpd], comps: &[GmmComponent]) -> Result<EStep> {
    let k = comps.len();
    let mut coords = Vec::with_capacity(k);
    let mut log_p = vec![vec![0.0; k]; data.len()];
    for (j, c) in comps.iter().enumerate() {
        let g = TangentGaussian::new(&c.tangent_cov)?;
        let v = tangent_coords(&c.center, data)?;
        for (n, p) in data.iter().enumerate() {
            log_p[n][j] = c.weight.ln() + log_normal_1d(p.u, c.time_mean, c.time_var) + g.log_density(&v[n]);
        }
        coords.push(v);
    }
    let mut resp = vec![vec![0.0; data.len()]; k];
    let mut point_ll = Vec::with_capacity(data.len());
    for (n, row) in log_p.iter().enumerate() {
        let lse = log_sum_exp(row);
        if !lse.is_finite() {
            return Err(Error::Gmm(format!("log-likelihood of point {n} is not finite")));
        }
        for j in 0..k {
            resp[j][n] = (row[j] - lse).exp();
        }
        point_ll.push(lse);
    }
    let ll = point_ll.iter().sum();
    Ok(EStep {
        resp,
        coords,
        point_ll,
        ll,
    })
}

fn m_step_component(
    data: &[TimedSpd],
    old: &GmmComponent,
    r: &[f64],
    old_coords: &[DVector<f64>],
    reg: f64,
) -> Result<GmmComponent> {
    let total: f64 = r.iter().sum();
    let weight = total / data.len() as f64;

    let (mu, var) = time_moments(data, r, total, reg);
    let (time_mean, time_var) = if time_q(data, r, mu, var) >= time_q(data, r, old.time_mean, old.time_var) {
        (mu, var)
    } else {
        (old.time_mean, old.time_var)
    };

    let points: Vec<SpdMatrix> = data.iter().map(|p| p.m.clone()).collect();
    let q_old = tangent_q(old_coords, r, &old.tangent_cov)?;
    let refit_old = weighted_scatter(old_coords, r, total, reg);
    let q_refit = tangent_q(old_coords, r, &refit_old)?;
    let (mut center, mut cov, best) = if q_refit >= q_old {
        (old.center.clone(), refit_old, q_refit)
    } else {
        (old.center.clone(), old.tangent_cov.clone(), q_old)
    };
    match weighted_frechet_mean(&points, r, FrechetOptions::default()) {
        Ok(new_center) => {
            let coords = tangent_coords(&new_center, data)?;
            let new_cov = weighted_scatter(&coords, r, total, reg);
            let q_new = tangent_q(&coords, r, &new_cov)?;
            if q_new >= best {
                center = new_center;
                cov = new_cov;
            }
        }
        Err(Error::MeanNotConverged { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(GmmComponent {
        weight,
        time_mean,
        time_var,
        center,
        tangent_cov: cov,
    })
}

fn initialize(data: &[TimedSpd], opts: &GmmOptions) -> Result<Vec<GmmComponent>> {
    let n = data.len();
    let k = opts.k;
    let mut assign = vec![0usize; n];
    match opts.init {
        GmmInit::TimeBins => {
            for (i, a) in assign.iter_mut().enumerate() {
                *a = i * k / n;
            }
        }
        GmmInit::Seeded => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let dist2 = |a: &TimedSpd, b: &TimedSpd| -> Result<f64> {
                Ok(spd_distance(&a.m, &b.m)?.powi(2) + (a.u - b.u).powi(2))
            };
            let mut centers = vec![rng.random_range(0..n)];
            let mut nearest: Vec<f64> = data
                .iter()
                .map(|p| dist2(p, &data[centers[0]]))
                .collect::<Result<_>>()?;
            while centers.len() < k {
                let total: f64 = nearest.iter().sum();
                let next = if total > 0.0 {
                    let mut target = rng.random_range(0.0..total);
                    let mut pick = n - 1;
                    for (i, &d) in nearest.iter().enumerate() {
                        if target < d {
                            pick = i;
                            break;
                        }
                        target -= d;
                    }
                    pick
                } else {
                    rng.random_range(0..n)
                };
                centers.push(next);
                for (i, p) in data.iter().enumerate() {
                    nearest[i] = nearest[i].min(dist2(p, &data[next])?);
                }
            }
            for (i, p) in data.iter().enumerate() {
                let mut best = (f64::INFINITY, 0);
                for (j, &c) in centers.iter().enumerate() {
                    let d = dist2(p, &data[c])?;
                    if d < best.0 {
                        best = (d, j);
                    }
                }
                assign[i] = best.1;
            }
        }
    }
    (0..k)
        .map(|j| {
            let r: Vec<f64> = assign.iter().map(|&a| if a == j { 1.0 } else { 0.0 }).collect();
            if r.iter().sum::<f64>() == 0.0 {
                return Err(Error::Gmm(format!("initial component {j} has no data")));
            }
            fit_component(data, &r, opts.regularization)
        })
        .collect()
}

/// Fits a `k`-component mixture by EM.
pub fn fit_gmm(data: &[TimedSpd], opts: &GmmOptions) -> Result<SpdGmm> {
    if opts.k == 0 {
        return Err(Error::OutOfRange {
            value: 0.0,
            range: "k >= 1",
        });
    }
    let dim = data.first().map_or(0, |p| p.m.dim());
    let required = opts.k * (1 + sym_vec_len(dim.max(1)));
    if data.len() < required {
        return Err(Error::TooFewSamples {
            required,
            got: data.len(),
        });
    }
    for p in data {
        if p.m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.m.dim(),
            });
        }
        if !p.u.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    let mut data = data.to_vec();
    data.sort_by(canonical_cmp);

    let reg = opts.regularization;
    let mut comps = initialize(&data, opts)?;
    let mut history: Vec<f64> = Vec::new();
    let mut reseeded_at = Vec::new();
    for _ in 0..opts.max_em_iter {
        let e = e_step(&data, &comps)?;
        let converged = history.last().is_some_and(|&prev| {
            reseeded_at.last() != Some(&(history.len() - 1)) && (e.ll - prev).abs() < opts.tol * prev.abs().max(1.0)
        });
        history.push(e.ll);
        if converged {
            break;
        }

        let totals: Vec<f64> = e.resp.iter().map(|r| r.iter().sum::<f64>()).collect();
        let empty: Vec<usize> = (0..comps.len())
            .filter(|&j| totals[j] / (data.len() as f64) < EMPTY_COMPONENT_WEIGHT)
            .collect();
        if !empty.is_empty() {
            if !reseeded_at.is_empty() {
                return Err(Error::Gmm(format!(
                    "component {} emptied again after re-seeding",
                    empty[0]
                )));
            }
            reseed(&data, &mut comps, &empty, &e.point_ll, reg)?;
            reseeded_at.push(history.len());
            continue;
        }

        comps = comps
            .iter()
            .enumerate()
            .map(|(j, c)| m_step_component(&data, c, &e.resp[j], &e.coords[j], reg))
            .collect::<Result<_>>()?;
    }
    Ok(SpdGmm {
        dim,
        components: comps,
        log_likelihood: history,
        reseeded_at,
    })
}

/// Moves each empty component onto the currently worst-modeled point.
fn reseed(data: &[TimedSpd], comps: &mut [GmmComponent], empty: &[usize], point_ll: &[f64], reg: f64) -> Result<()> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)));
    let donor = comps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.weight.total_cmp(&b.1.weight))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let template = comps[donor].clone();
    let n = data.len() as f64;
    let u_mean = data.iter().map(|p| p.u).sum::<f64>() / n;
    let u_var = data.iter().map(|p| (p.u - u_mean).powi(2)).sum::<f64>() / n + reg;
    for (slot, &j) in empty.iter().enumerate() {
        let p = &data[order[slot]];
        comps[j] = GmmComponent {
            weight: 1.0 / n,
            time_mean: p.u,
            time_var: u_var,
            center: p.m.clone(),
            tangent_cov: template.tangent_cov.clone(),
        };
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps.iter_mut() {
        c.weight /= total;
    }
    Ok(())
}

impl SpdGmm {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Component responsibilities from the time marginals alone.
    pub fn time_responsibilities(&self, u: f64) -> Vec<f64> {
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + log_normal_1d(u, c.time_mean, c.time_var))
            .collect();
        let lse = log_sum_exp(&logs);
        logs.iter().map(|l| (l - lse).exp()).collect()
    }

    /// Desired manipulability at normalized time `u`: the Fréchet mean of the
    /// component centers weighted by their time responsibilities.
    pub fn retrieve(&self, u: f64) -> SpdMatrix {
        let h = self.time_responsibilities(u);
        let centers: Vec<SpdMatrix> = self.components.iter().map(|c| c.center.clone()).collect();
        match weighted_frechet_mean(&centers, &h, FrechetOptions::default()) {
            Ok(m) => m,
            Err(Error::MeanNotConverged { last, .. }) => *last,
            // weights come from a softmax, so they are finite with a positive sum
            Err(_) => centers[h
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0)]
            .clone(),
        }
    }

    /// Final log-likelihood of the training data.
    pub fn final_log_likelihood(&self) -> Option<f64> {
        self.log_likelihood.last().copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn retrieve_profile(model: &SpdGmm, u: f64) -> SpdMatrix {
    model.retrieve(u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentWire {
    weight: f64,
    time_mean: f64,
    time_var: f64,
    center: SpdMatrix,
    tangent_cov: CovarianceWire,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmWire {
    dim: usize,
    components: Vec<ComponentWire>,
    #[serde(default)]
    log_likelihood: Vec<f64>,
    #[serde(default)]
    reseeded_at: Vec<usize>,
}

impl From<SpdGmm> for GmmWire {
    fn from(g: SpdGmm) -> Self {
        GmmWire {
            dim: g.dim,
            components: g
                .components
                .into_iter()
                .map(|c| {
                    let d = c.tangent_cov.nrows();
                    ComponentWire {
                        weight: c.weight,
                        time_mean: c.time_mean,
                        time_var: c.time_var,
                        tangent_cov: CovarianceWire {
                            dim: c.center.dim(),
                            matricized: (0..d * d).map(|i| c.tangent_cov[(i / d, i % d)]).collect(),
                        },
                        center: c.center,
                    }
                })
                .collect(),
            log_likelihood: g.log_likelihood,
            reseeded_at: g.reseeded_at,
        }
    }
}

impl TryFrom<GmmWire> for SpdGmm {
    type Error = Error;
    fn try_from(w: GmmWire) -> Result<Self> {
        if w.components.is_empty() {
            return Err(Error::Gmm("model has no components".into()));
        }
        let d = sym_vec_len(w.dim);
        let mut components = Vec::new();
        for c in w.components {
            if c.center.dim() != w.dim || c.tangent_cov.dim != w.dim {
                return Err(Error::DimensionMismatch {
                    expected: w.dim,
                    got: c.center.dim(),
                });
            }
            if c.tangent_cov.matricized.len() != d * d {
                return Err(Error::DimensionMismatch {
                    expected: d * d,
                    got: c.tangent_cov.matricized.len(),
                });
            }
            if !(c.weight > 0.0 && c.time_var > 0.0) {
                return Err(Error::Gmm("weights and time variances must be positive".into()));
            }
            let cov = DMatrix::from_row_slice(d, d, &c.tangent_cov.matricized);
            TangentGaussian::new(&cov)?;
            components.push(GmmComponent {
                weight: c.weight,
                time_mean: c.time_mean,
                time_var: c.time_var,
                center: c.center,
                tangent_cov: cov,
            });
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Gmm(format!("component weights sum to {total}")));
        }
        Ok(SpdGmm {
            dim: w.dim,
            components,
            log_likelihood: w.log_likelihood,
            reseeded_at: w.reseeded_at,
        })
    }
}
