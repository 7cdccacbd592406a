//! Joint parameter / model-error ensembles, likelihoods and importance weights.
//!
//! A member is the stacked vector `v = [u q]`: the first `n` entries are the
//! uncertain parameters, the last `m` entries the model error. Members are
//! stored as the columns of a dense matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::grid::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    data: DMatrix<f64>,
    n: usize,
    m: usize,
}

impl Ensemble {
    pub fn new(data: DMatrix<f64>, n: usize, m: usize) -> Result<Self> {
        ensure_dims(data.nrows() == n + m, || {
            format!("member length {} but n + m = {}", data.nrows(), n + m)
        })?;
        if data.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "an ensemble needs at least 2 members, got {}",
                data.ncols()
            )));
        }
        Ok(Self { data, n, m })
    }

    /// Stacks a parameter block (`n x M`) on top of a model-error block (`m x M`).
    pub fn from_blocks(u: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        ensure_dims(u.ncols() == q.ncols(), || {
            format!("parameter block has {} members, model-error block {}", u.ncols(), q.ncols())
        })?;
        let (n, m, size) = (u.nrows(), q.nrows(), u.ncols());
        let mut data = DMatrix::zeros(n + m, size);
        data.rows_mut(0, n).copy_from(u);
        data.rows_mut(n, m).copy_from(q);
        Self::new(data, n, m)
    }

    pub fn size(&self) -> usize {
        self.data.ncols()
    }

    pub fn param_dim(&self) -> usize {
        self.n
    }

    pub fn error_dim(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn member(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data.as_slice()[i * d..(i + 1) * d]
    }

    pub fn member_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.data.as_mut_slice()[i * d..(i + 1) * d]
    }

    pub fn params(&self, i: usize) -> &[f64] {
        &self.member(i)[..self.n]
    }

    pub fn model_error(&self, i: usize) -> &[f64] {
        &self.member(i)[self.n..]
    }

    pub fn param_block(&self) -> DMatrix<f64> {
        self.data.rows(0, self.n).into_owned()
    }

    pub fn error_block(&self) -> DMatrix<f64> {
        self.data.rows(self.n, self.m).into_owned()
    }

    pub fn set_param_block(&mut self, u: &DMatrix<f64>) -> Result<()> {
        ensure_dims(u.nrows() == self.n && u.ncols() == self.size(), || {
            format!("parameter block {}x{} does not fit {}x{}", u.nrows(), u.ncols(), self.n, self.size())
        })?;
        self.data.rows_mut(0, self.n).copy_from(u);
        Ok(())
    }

    pub fn set_error_block(&mut self, q: &DMatrix<f64>) -> Result<()> {
        ensure_dims(q.nrows() == self.m && q.ncols() == self.size(), || {
            format!("model-error block {}x{} does not fit {}x{}", q.nrows(), q.ncols(), self.m, self.size())
        })?;
        self.data.rows_mut(self.n, self.m).copy_from(q);
        Ok(())
    }

    pub fn mean(&self) -> DVector<f64> {
        ensemble_mean(&self.data)
    }

    pub fn variance(&self) -> DVector<f64> {
        // `new` guarantees at least two members
        ensemble_variance(&self.data).expect("ensemble has at least two members")
    }
}

/// Per-coordinate sample mean over the columns.
pub fn ensemble_mean(members: &DMatrix<f64>) -> DVector<f64> {
    let m = members.ncols() as f64;
    members.column_sum() / m
}

/// Per-coordinate sample variance with `1/(M-1)` normalization.
pub fn ensemble_variance(members: &DMatrix<f64>) -> Result<DVector<f64>> {
    let size = members.ncols();
    if size < 2 {
        return Err(Error::InvalidInput("variance needs at least 2 members".into()));
    }
    let mean = ensemble_mean(members);
    let mut var = DVector::zeros(members.nrows());
    for col in members.column_iter() {
        for (k, (x, mu)) in col.iter().zip(mean.iter()).enumerate() {
            var[k] += (x - mu) * (x - mu);
        }
    }
    Ok(var / (size - 1) as f64)
}

/// Observation-noise covariance `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseCovariance {
    Diagonal(Vec<f64>),
    /// Dense symmetric positive-definite matrix, row-major.
    Full { dim: usize, entries: Vec<f64> },
}

impl NoiseCovariance {
    pub fn dim(&self) -> usize {
        match self {
            NoiseCovariance::Diagonal(d) => d.len(),
            NoiseCovariance::Full { dim, .. } => *dim,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            NoiseCovariance::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            NoiseCovariance::Full { dim, entries } => DMatrix::from_row_slice(*dim, *dim, entries),
        }
    }

    /// `R^{-1} d`.
    pub fn solve(&self, d: &DVector<f64>) -> DVector<f64> {
        match self {
            NoiseCovariance::Diagonal(r) => DVector::from_iterator(d.len(), d.iter().zip(r).map(|(a, b)| a / b)),
            NoiseCovariance::Full { .. } => self
                .to_matrix()
                .cholesky()
                .expect("noise covariance validated as positive definite")
                .solve(d),
        }
    }

    /// `||R^{-1/2} d||`.
    pub fn whitened_norm(&self, d: &DVector<f64>) -> f64 {
        d.dot(&self.solve(d)).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub values: Vec<f64>,
    /// Physical observation locations; absent for problems without a grid.
    pub locations: Option<Vec<Point>>,
    pub noise_cov: NoiseCovariance,
}

impl ObservationSet {
    pub fn new(values: Vec<f64>, locations: Option<Vec<Point>>, noise_cov: NoiseCovariance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("observation set is empty".into()));
        }
        ensure_dims(noise_cov.dim() == values.len(), || {
            format!("{} observations but noise covariance of dimension {}", values.len(), noise_cov.dim())
        })?;
        if let Some(loc) = &locations {
            ensure_dims(loc.len() == values.len(), || {
                format!("{} observations but {} locations", values.len(), loc.len())
            })?;
        }
        match &noise_cov {
            NoiseCovariance::Diagonal(d) => {
                if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidInput("noise variances must be strictly positive".into()));
                }
            }
            NoiseCovariance::Full { dim, entries } => {
                ensure_dims(entries.len() == dim * dim, || "full covariance has wrong entry count".into())?;
                let mat = noise_cov.to_matrix();
                if (&mat - mat.transpose()).amax() > 1e-12 * mat.amax() {
                    return Err(Error::InvalidInput("noise covariance is not symmetric".into()));
                }
                if mat.cholesky().is_none() {
                    return Err(Error::NotPositiveDefinite("noise covariance".into()));
                }
            }
        }
        Ok(Self { values, locations, noise_cov })
    }

    /// Diagonal noise `variance * I`.
    pub fn with_isotropic_noise(values: Vec<f64>, locations: Option<Vec<Point>>, variance: f64) -> Result<Self> {
        let k = values.len();
        Self::new(values, locations, NoiseCovariance::Diagonal(vec![variance; k]))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

/// Misfits `d' R^{-1} d` and the likelihood values derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodVector {
    pub misfits: Vec<f64>,
}

impl LikelihoodVector {
    /// `exp(-misfit / 2)`; underflows to zero for large misfits.
    pub fn h(&self) -> Vec<f64> {
        self.misfits.iter().map(|m| (-0.5 * m).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates nonnegativity and normalization within `1e-12`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InfeasibleMarginals(format!("weights sum to {sum}")));
        }
        Ok(Self(w))
    }

    pub fn uniform(size: usize) -> Self {
        Self(vec![1.0 / size as f64; size])
    }

    /// Normalizes nonnegative masses.
    pub fn from_unnormalized(h: &[f64]) -> Result<Self> {
        let sum: f64 = h.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        Self::new(h.iter().map(|x| x / sum).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Prior marginal of one coordinate of `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Marginal {
    Gaussian { mean: f64, std: f64 },
    Uniform { a: f64, b: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Gaussian { std, mean } if std > 0.0 && mean.is_finite() => Ok(()),
            Marginal::Uniform { a, b } if a < b => Ok(()),
            m => Err(Error::InvalidInput(format!("invalid prior marginal {m:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            Marginal::Uniform { a, b } => rng.gen_range(a..b),
        }
    }

    /// Range used for histograms: `mean ± 4 std` or `[a, b]`.
    pub fn plot_range(&self) -> (f64, f64) {
        match *self {
            Marginal::Gaussian { mean, std } => (mean - 4.0 * std, mean + 4.0 * std),
            Marginal::Uniform { a, b } => (a, b),
        }
    }
}

/// Independent prior marginals, one per coordinate of `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub marginals: Vec<Marginal>,
}

impl PriorSpec {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    /// `n` copies of `u_prior` followed by `m` copies of `q_prior`.
    pub fn blocks(n: usize, u_prior: Marginal, m: usize, q_prior: Marginal) -> Result<Self> {
        let mut marginals = vec![u_prior; n];
        marginals.extend(std::iter::repeat(q_prior).take(m));
        Self::new(marginals)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Draws `size` members; member `i` uses its own stream from `stream_for(i)`.
    pub fn sample_ensemble<R, F>(&self, n: usize, size: usize, mut stream_for: F) -> Result<Ensemble>
    where
        R: Rng,
        F: FnMut(usize) -> R,
    {
        let d = self.dim();
        let mut data = DMatrix::zeros(d, size);
        for i in 0..size {
            let mut rng = stream_for(i);
            for (k, marg) in self.marginals.iter().enumerate() {
                data[(k, i)] = marg.sample(&mut rng);
            }
        }
        Ensemble::new(data, n, d - n)
    }
}

/// Per-member misfits `d_i' (C R^{-1}) d_i` with `d_i = g_i - y_obs`.
///
/// `predictions` is `kappa x M`. `taper` is the diagonal of `C`; `None`
/// means identity.
pub fn compute_misfits(
    predictions: &DMatrix<f64>,
    obs: &ObservationSet,
    taper: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let kappa = obs.len();
    ensure_dims(predictions.nrows() == kappa, || {
        format!("predictions have {} rows but there are {} observations", predictions.nrows(), kappa)
    })?;
    if let Some(c) = taper {
        ensure_dims(c.len() == kappa, || format!("taper has {} entries, expected {}", c.len(), kappa))?;
        if c.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInput("taper entries must lie in [0, 1]".into()));
        }
    }
    if predictions.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite prediction".into()));
    }
    let y = &obs.values;
    let misfits = predictions
        .column_iter()
        .map(|g| match &obs.noise_cov {
            NoiseCovariance::Diagonal(r) => {
                let mut acc = 0.0;
                for l in 0..kappa {
                    let d = g[l] - y[l];
                    let mut term = d * d / r[l];
                    if let Some(c) = taper {
                        term *= c[l];
                    }
                    acc += term;
                }
                acc
            }
            NoiseCovariance::Full { .. } => {
                let d = DVector::from_iterator(kappa, g.iter().zip(y).map(|(a, b)| a - b));
                let rinv_d = obs.noise_cov.solve(&d);
                match taper {
                    Some(c) => (0..kappa).map(|l| d[l] * c[l] * rinv_d[l]).sum(),
                    None => d.dot(&rinv_d),
                }
            }
        })
        .collect();
    Ok(misfits)
}

/// Per-observation squared residual terms `d_l^2 / R_ll` (`kappa x M`),
/// the building blocks of localized misfits. Requires diagonal `R`.
pub fn misfit_components(predictions: &DMatrix<f64>, obs: &ObservationSet) -> Result<DMatrix<f64>> {
    let kappa = obs.len();
    ensure_dims(predictions.nrows() == kappa, || {
        format!("predictions have {} rows but there are {} observations", predictions.nrows(), kappa)
    })?;
    let r = match &obs.noise_cov {
        NoiseCovariance::Diagonal(r) => r,
        NoiseCovariance::Full { .. } => {
            return Err(Error::Unsupported("localized misfits need a diagonal noise covariance".into()))
        }
    };
    Ok(DMatrix::from_fn(kappa, predictions.ncols(), |l, i| {
        let d = predictions[(l, i)] - obs.values[l];
        d * d / r[l]
    }))
}

/// Log weights `-Δφ misfit / 2`, shifted so the largest is zero.
fn shifted_log_weights(misfits: &[f64], dphi: f64) -> Result<Vec<f64>> {
    let min = misfits.iter().copied().filter(|x| !x.is_nan()).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(misfits
        .iter()
        .map(|&x| if x.is_nan() { f64::NEG_INFINITY } else { -0.5 * dphi * (x - min) })
        .collect())
}

/// Bridging weights `w_i ∝ exp(-Δφ misfit_i / 2)`, normalized in log space.
pub fn tempered_weights(misfits: &[f64], dphi: f64) -> Result<WeightVector> {
    if !(dphi > 0.0 && dphi <= 1.0) {
        return Err(Error::InvalidInput(format!("temperature increment {dphi} outside (0, 1]")));
    }
    let logw = shifted_log_weights(misfits, dphi)?;
    let h: Vec<f64> = logw.iter().map(|x| x.exp()).collect();
    let sum: f64 = h.iter().sum();
    // the minimum contributes exp(0) = 1, so sum >= 1
    let mut w: Vec<f64> = h.iter().map(|x| x / sum).collect();
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-14 {
        w.iter_mut().for_each(|x| *x /= total);
    }
    WeightVector::new(w)
}

/// ESS of the bridging weights without building a [`WeightVector`].
pub fn tempered_ess(misfits: &[f64], dphi: f64) -> f64 {
    match shifted_log_weights(misfits, dphi) {
        Ok(logw) => {
            let (s1, s2) = logw.iter().fold((0.0, 0.0), |(a, b), lw| {
                let h = lw.exp();
                (a + h, b + h * h)
            });
            s1 * s1 / s2
        }
        Err(_) => 0.0,
    }
}

/// Effective sample size `(Σw)^2 / Σw^2`.
pub fn ess(w: &WeightVector) -> f64 {
    ess_unnormalized(w.as_slice())
}

/// Same as [`ess`] for arbitrary nonnegative masses; invariant under scaling.
pub fn ess_unnormalized(h: &[f64]) -> f64 {
    let s1: f64 = h.iter().sum();
    let s2: f64 = h.iter().map(|x| x * x).sum();
    if s2 > 0.0 {
        s1 * s1 / s2
    } else {
        0.0
    }
}

/// Euclidean norm of the difference between a mean field and a reference.
///
/// Not divided by the vector length.
pub fn rmse(field_mean: &[f64], reference: &[f64]) -> Result<f64> {
    ensure_dims(field_mean.len() == reference.len(), || {
        format!("lengths {} and {} differ", field_mean.len(), reference.len())
    })?;
    Ok(field_mean
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn obs2(var: f64) -> ObservationSet {
        ObservationSet::with_isotropic_noise(vec![1.8, 1.8], None, var).unwrap()
    }

    #[test]
    fn zero_residual_gives_zero_misfit() {
        let pred = DMatrix::from_column_slice(2, 1, &[1.8, 1.8]);
        let mis = compute_misfits(&pred, &obs2(0.001), None).unwrap();
        assert_eq!(mis, vec![0.0]);
        let lik = LikelihoodVector { misfits: mis };
        assert_eq!(lik.h(), vec![1.0]);
    }

    #[test]
    fn toy_quadratic_form() {
        let pred = DMatrix::from_column_slice(2, 1, &[1.9, 1.9]);
        let mis = compute_misfits(&pred, &obs2(0.001), None).unwrap();
        assert_relative_eq!(mis[0], 20.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_taper_annihilates() {
        let pred = DMatrix::from_column_slice(2, 2, &[0.0, 5.0, 3.0, -1.0]);
        let mis = compute_misfits(&pred, &obs2(0.1), Some(&[0.0, 0.0])).unwrap();
        assert_eq!(mis, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_taper_is_bitwise_identical() {
        let pred = DMatrix::from_fn(3, 5, |i, j| ((i * 7 + j * 3) as f64).sin() * 4.0);
        let obs = ObservationSet::new(vec![0.3, -0.2, 1.1], None, NoiseCovariance::Diagonal(vec![0.3, 0.07, 2.0])).unwrap();
        let a = compute_misfits(&pred, &obs, None).unwrap();
        let b = compute_misfits(&pred, &obs, Some(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let pred = DMatrix::zeros(3, 4);
        assert!(matches!(compute_misfits(&pred, &obs2(1.0), None), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn full_covariance_matches_diagonal_path() {
        let pred = DMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64 * 0.4);
        let diag = ObservationSet::new(vec![0.1, 0.2], None, NoiseCovariance::Diagonal(vec![0.5, 2.0])).unwrap();
        let full = ObservationSet::new(
            vec![0.1, 0.2],
            None,
            NoiseCovariance::Full { dim: 2, entries: vec![0.5, 0.0, 0.0, 2.0] },
        )
        .unwrap();
        let a = compute_misfits(&pred, &diag, None).unwrap();
        let b = compute_misfits(&pred, &full, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, max_relative = 1e-13);
        }
    }

    #[test]
    fn weights_examples() {
        let w = tempered_weights(&[3.0, 3.0, 3.0, 3.0], 0.4).unwrap();
        assert!(w.as_slice().iter().all(|x| (x - 0.25).abs() < 1e-15));

        let w = tempered_weights(&[0.0, 2.0 * 2f64.ln()], 1.0).unwrap();
        assert_relative_eq!(w[0], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(w[1], 1.0 / 3.0, max_relative = 1e-14);

        let w = tempered_weights(&[0.0, 50.0, 400.0], 1e-12).unwrap();
        assert!(w.as_slice().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn degenerate_weights_rejected() {
        let inf = f64::INFINITY;
        assert!(matches!(tempered_weights(&[inf, inf], 1.0), Err(Error::DegenerateWeights)));
        assert!(tempered_weights(&[1.0, 2.0], 0.0).is_err());
        assert!(tempered_weights(&[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn peaked_misfits_do_not_underflow() {
        let w = tempered_weights(&[1e6, 1e6 + 2.0 * 3f64.ln()], 1.0).unwrap();
        assert_relative_eq!(w[0], 0.75, max_relative = 1e-9);
    }

    #[test]
    fn ess_examples() {
        assert_relative_eq!(ess(&WeightVector::uniform(7)), 7.0, max_relative = 1e-14);
        assert_eq!(ess(&WeightVector::new(vec![0.0, 1.0, 0.0]).unwrap()), 1.0);
        assert_eq!(ess(&WeightVector::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap()), 2.0);
    }

    #[test]
    fn rmse_is_a_plain_norm() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mean_and_variance() {
        let e = Ensemble::new(DMatrix::from_row_slice(1, 2, &[0.0, 2.0]), 1, 0).unwrap();
        assert_eq!(e.mean()[0], 1.0);
        assert_eq!(e.variance()[0], 2.0);
        let same = DMatrix::from_element(3, 4, 1.25);
        assert!(ensemble_variance(&same).unwrap().iter().all(|v| *v == 0.0));
        let sym = DMatrix::from_row_slice(2, 2, &[0.7, -0.7, -3.0, 3.0]);
        assert!(ensemble_mean(&sym).iter().all(|v| *v == 0.0));
        assert!(ensemble_variance(&DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn blocks_partition_members() {
        let u = DMatrix::from_fn(3, 4, |i, j| (10 * i + j) as f64);
        let q = DMatrix::from_fn(2, 4, |i, j| -((10 * i + j) as f64));
        let e = Ensemble::from_blocks(&u, &q).unwrap();
        assert_eq!(e.dim(), 5);
        for i in 0..4 {
            assert_eq!(e.params(i), u.column(i).as_slice());
            assert_eq!(e.model_error(i), q.column(i).as_slice());
            assert_eq!(e.member(i).len(), e.params(i).len() + e.model_error(i).len());
        }
        assert_eq!(e.param_block(), u);
        assert_eq!(e.error_block(), q);
        assert!(Ensemble::new(DMatrix::zeros(3, 1), 2, 1).is_err());
    }

    #[test]
    fn prior_validation() {
        assert!(Marginal::Gaussian { mean: 0.0, std: 0.0 }.validate().is_err());
        assert!(Marginal::Uniform { a: 1.0, b: 1.0 }.validate().is_err());
        assert!(PriorSpec::blocks(2, Marginal::Gaussian { mean: 2.4, std: 1.0 }, 2, Marginal::Uniform { a: 0.0, b: 0.5 }).is_ok());
    }

    proptest! {
        #[test]
        fn weights_normalized_and_shift_invariant(
            mis in proptest::collection::vec(0.0f64..500.0, 2..40),
            shift in -100.0f64..100.0,
            dphi in 1e-6f64..1.0,
        ) {
            let w = tempered_weights(&mis, dphi).unwrap();
            let s: f64 = w.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = mis.iter().map(|x| x + shift).collect();
            let w2 = tempered_weights(&shifted, dphi).unwrap();
            for (a, b) in w.as_slice().iter().zip(w2.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let e = ess(&w);
            prop_assert!(e >= 1.0 - 1e-12 && e <= mis.len() as f64 + 1e-9);
            prop_assert!((tempered_ess(&mis, dphi) - e).abs() < 1e-9 * e);
        }

        #[test]
        fn ess_scale_invariant(h in proptest::collection::vec(0.0f64..10.0, 2..30), scale in 1e-3f64..1e3) {
            prop_assume!(h.iter().sum::<f64>() > 1e-6);
            let w = WeightVector::from_unnormalized(&h).unwrap();
            let scaled: Vec<f64> = h.iter().map(|x| x * scale).collect();
            let a = ess(&w);
            let b = ess_unnormalized(&scaled);
            prop_assert!((a - b).abs() < 1e-9 * a);
        }
    }
}
