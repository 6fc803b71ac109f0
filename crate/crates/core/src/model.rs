//! Domain types and least-squares primitives.
//!
//! Everything downstream (criteria, selectors, the simulation lab) consumes
//! exactly three quantities per candidate support: the OLS coefficients, the
//! residual sum of squares, and the Gram log-determinant. All of them come
//! out of one column-pivoted QR factorization of the candidate submatrix;
//! normal equations are never formed.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Immutable experiment input: design matrix `A` (n rows, p columns) plus
/// response `y` (length n).
#[derive(Debug, Clone)]
pub struct Dataset {
    a: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// Builds a dataset, validating shapes and finiteness.
    pub fn new(a: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = a.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidDataset(format!(
                "design matrix must be non-empty, got {n}x{p}"
            )));
        }
        if y.len() != n {
            return Err(Error::InvalidDataset(format!(
                "response length {} does not match {} design rows",
                y.len(),
                n
            )));
        }
        if a.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(
                "non-finite entry in design or response".into(),
            ));
        }
        Ok(Self { a, y })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    /// Same design, response multiplied by `c`. Used by the scale-invariance
    /// checks and the CLI `--scale` debug flag.
    pub fn with_scaled_response(&self, c: f64) -> Result<Self> {
        Self::new(self.a.clone(), &self.y * c)
    }

    /// Reads a dataset from CSV text: first column is the response, remaining
    /// columns are the regressors. An optional header row is auto-detected by
    /// a non-numeric first row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = None;
        for (idx, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Csv(format!("record {}: {e}", idx + 1)))?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(vals) => {
                    if vals.len() < 2 {
                        return Err(Error::Csv(format!(
                            "row {}: need at least 2 columns (response + one regressor), got {}",
                            idx + 1,
                            vals.len()
                        )));
                    }
                    match width {
                        None => width = Some(vals.len()),
                        Some(w) if w != vals.len() => {
                            return Err(Error::Csv(format!(
                                "row {}: expected {} columns, got {}",
                                idx + 1,
                                w,
                                vals.len()
                            )))
                        }
                        _ => {}
                    }
                    rows.push(vals);
                }
                Err(e) => {
                    // A non-numeric first row is treated as a header; anywhere
                    // else it is malformed data.
                    if idx == 0 && rows.is_empty() {
                        continue;
                    }
                    return Err(Error::Csv(format!("row {}: {e}", idx + 1)));
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::Csv("no data rows".into()));
        }
        let n = rows.len();
        let p = rows[0].len() - 1;
        let y = DVector::from_iterator(n, rows.iter().map(|r| r[0]));
        let a = DMatrix::from_fn(n, p, |i, j| rows[i][j + 1]);
        Self::new(a, y).map_err(|e| match e {
            Error::InvalidDataset(m) => Error::Csv(m),
            other => other,
        })
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub(crate) fn y_norm_squared(&self) -> f64 {
        self.y.norm_squared()
    }
}

/// Ordered set of column indices; the unit of hypothesis.
///
/// Order is the selector's insertion order and is meaningful for path
/// truncation, never for scoring: set comparisons go through [`Support::set_eq`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    indices: Vec<usize>,
}

impl Support {
    /// Builds a support from distinct indices, preserving order.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSupport(format!(
                "duplicate index in {indices:?}"
            )));
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self {
            indices: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut s = self.indices.clone();
        s.sort_unstable();
        s
    }

    /// Set equality, ignoring insertion order.
    pub fn set_eq(&self, other: &Support) -> bool {
        self.len() == other.len() && self.sorted_indices() == other.sorted_indices()
    }

    pub fn is_subset_of(&self, other: &Support) -> bool {
        self.indices.iter().all(|i| other.contains(*i))
    }

    /// New support with `index` appended.
    pub fn with_appended(&self, index: usize) -> Result<Self> {
        let mut v = self.indices.clone();
        v.push(index);
        Self::new(v)
    }

    fn validate_against(&self, dataset: &Dataset) -> Result<()> {
        let (n, p) = (dataset.n(), dataset.p());
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= p) {
            return Err(Error::InvalidSupport(format!(
                "index {bad} out of range for p = {p}"
            )));
        }
        if self.len() >= n {
            return Err(Error::InvalidSupport(format!(
                "cardinality {} leaves no residual degrees of freedom (n = {n})",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Exact least-squares fit of one candidate support.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub support: Support,
    /// Coefficients in the order of `support.indices()`.
    pub coefficients: DVector<f64>,
    /// Residual sum of squares after projecting `y` off the candidate columns.
    pub rss: f64,
    /// Variance estimate `rss / n`.
    pub sigma2_hat: f64,
    /// `ln |A_I^T A_I|`, read off the R diagonal of the factorization
    /// (0 for the empty support: the empty determinant is 1 by convention).
    pub gram_logdet: f64,
}

/// The empty-model variance `||y||^2 / n`; the normalizer that makes the
/// robust criterion scale-invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullVariance(pub f64);

impl NullVariance {
    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Least-squares fit of `y` on the columns selected by `support`.
///
/// Computed through a column-pivoted QR factorization; a candidate whose
/// submatrix falls below full column rank is reported as
/// [`Error::RankDeficient`] rather than silently pseudo-inverted.
pub fn ols_fit(dataset: &Dataset, support: &Support) -> Result<FitResult> {
    support.validate_against(dataset)?;
    let n = dataset.n();
    let k = support.len();

    if k == 0 {
        let rss = dataset.y_norm_squared();
        return Ok(FitResult {
            support: support.clone(),
            coefficients: DVector::zeros(0),
            rss,
            sigma2_hat: rss / n as f64,
            gram_logdet: 0.0,
        });
    }

    let a_i = dataset.a.select_columns(support.indices().iter());
    let qr = a_i.clone().col_piv_qr();
    let r = qr.r();

    // Rank-revealing convention: pivoting sorts |r_ii| non-increasing, so the
    // numerical rank is the number of diagonal entries above tolerance.
    let r_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0_f64, f64::max);
    let tol = r_max * n.max(k) as f64 * f64::EPSILON;
    let rank = (0..k).take_while(|&i| r[(i, i)].abs() > tol).count();
    if rank < k {
        return Err(Error::RankDeficient {
            support: support.clone(),
            cardinality: k,
            rank,
        });
    }

    let qty = qr.q().transpose() * &dataset.y;
    let mut coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient {
            support: support.clone(),
            cardinality: k,
            rank,
        })?;
    qr.p().inv_permute_rows(&mut coefficients);

    let residual = &dataset.y - &a_i * &coefficients;
    let rss = residual.norm_squared();
    let gram_logdet = 2.0 * (0..k).map(|i| r[(i, i)].abs().ln()).sum::<f64>();

    Ok(FitResult {
        support: support.clone(),
        coefficients,
        rss,
        sigma2_hat: rss / n as f64,
        gram_logdet,
    })
}

/// `||y||^2 / n`, the variance of the intercept-free null model.
pub fn null_variance(dataset: &Dataset) -> NullVariance {
    NullVariance(dataset.y_norm_squared() / dataset.n() as f64)
}

/// Energy captured by projecting `y` onto the candidate columns:
/// `||y||^2 - rss(I)`.
pub fn projection_energy(dataset: &Dataset, support: &Support) -> Result<f64> {
    let fit = ols_fit(dataset, support)?;
    Ok((dataset.y_norm_squared() - fit.rss).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        Dataset::new(a, y).unwrap()
    }

    #[test]
    fn single_column_fit_by_inspection() {
        // A = [[1],[0]], y = [3,4]: projection keeps 3, residual is 4.
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let y = DVector::from_row_slice(&[3.0, 4.0]);
        let ds = Dataset::new(a, y).unwrap();
        let fit = ols_fit(&ds, &Support::new(vec![0]).unwrap()).unwrap();
        assert_relative_eq!(fit.coefficients[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(fit.rss, 16.0, max_relative = 1e-12);
        assert_relative_eq!(fit.sigma2_hat, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_support_is_null_model() {
        let ds = random_dataset(7, 10, 4);
        let fit = ols_fit(&ds, &Support::empty()).unwrap();
        assert_eq!(fit.coefficients.len(), 0);
        assert_relative_eq!(fit.rss, ds.y_norm_squared(), max_relative = 1e-15);
        assert_relative_eq!(
            fit.sigma2_hat,
            null_variance(&ds).value(),
            max_relative = 1e-15
        );
        assert_eq!(fit.gram_logdet, 0.0);
    }

    #[test]
    fn noiseless_instance_has_vanishing_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(8, 3, |_, _| StandardNormal.sample(&mut rng));
        let x = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        let y = &a * &x;
        let ds = Dataset::new(a, y.clone()).unwrap();
        let fit = ols_fit(&ds, &Support::new(vec![0, 1, 2]).unwrap()).unwrap();
        assert!(fit.rss <= 1e-10 * y.norm_squared());
        for i in 0..3 {
            assert_relative_eq!(fit.coefficients[i], x[i], max_relative = 1e-8);
        }
    }

    #[test]
    fn rank_deficiency_is_detected() {
        // Second column is an exact multiple of the first.
        let a = DMatrix::from_fn(6, 2, |i, j| (i as f64 + 1.0) * if j == 0 { 1.0 } else { 2.0 });
        let y = DVector::from_fn(6, |i, _| i as f64);
        let ds = Dataset::new(a, y).unwrap();
        let err = ols_fit(&ds, &Support::new(vec![0, 1]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { rank: 1, .. }));
    }

    #[test]
    fn support_cardinality_must_leave_dof() {
        let ds = random_dataset(3, 4, 8);
        let err = ols_fit(&ds, &Support::new(vec![0, 1, 2, 3]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidSupport(_)));
    }

    #[test]
    fn support_rejects_duplicates_and_bounds() {
        assert!(Support::new(vec![1, 1]).is_err());
        let ds = random_dataset(5, 6, 3);
        let err = ols_fit(&ds, &Support::new(vec![0, 3]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidSupport(_)));
    }

    #[test]
    fn null_variance_examples() {
        let a = DMatrix::from_element(2, 1, 1.0);
        let ds = Dataset::new(a.clone(), DVector::from_row_slice(&[3.0, 4.0])).unwrap();
        assert_relative_eq!(null_variance(&ds).value(), 12.5, max_relative = 1e-15);

        let zeros = Dataset::new(a.clone(), DVector::zeros(2)).unwrap();
        assert_eq!(null_variance(&zeros).value(), 0.0);

        let scaled = ds.with_scaled_response(3.0).unwrap();
        assert_relative_eq!(
            null_variance(&scaled).value(),
            9.0 * null_variance(&ds).value(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn projection_energy_empty_and_spanning() {
        let ds = random_dataset(13, 9, 5);
        assert_eq!(projection_energy(&ds, &Support::empty()).unwrap(), 0.0);

        // y in span(A_I) with k = n-1: the projection captures everything.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let a = DMatrix::from_fn(n, n - 1, |_, _| StandardNormal.sample(&mut rng));
        let x = DVector::from_fn(n - 1, |i, _| 1.0 + i as f64);
        let y = &a * &x;
        let ds = Dataset::new(a, y.clone()).unwrap();
        let s = Support::new((0..n - 1).collect()).unwrap();
        assert_relative_eq!(
            projection_energy(&ds, &s).unwrap(),
            y.norm_squared(),
            max_relative = 1e-10
        );
    }

    /// Independent oracle: explicit Gram–Schmidt basis of the candidate
    /// columns, energy as `||Q^T y||^2`.
    fn gram_schmidt_energy(ds: &Dataset, support: &Support) -> f64 {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for &j in support.indices() {
            let mut v = ds.design().column(j).clone_owned();
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
            let norm = v.norm();
            if norm > 1e-12 {
                basis.push(v / norm);
            }
        }
        basis.iter().map(|q| q.dot(ds.response()).powi(2)).sum()
    }

    #[test]
    fn projection_energy_matches_gram_schmidt_oracle() {
        for seed in 0..20 {
            let ds = random_dataset(100 + seed, 12, 7);
            let s = Support::new(vec![1, 4, 6]).unwrap();
            let got = projection_energy(&ds, &s).unwrap();
            let want = gram_schmidt_energy(&ds, &s);
            assert_relative_eq!(got, want, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn rss_non_increasing_along_nested_chains() {
        for seed in 0..100 {
            let ds = random_dataset(200 + seed, 15, 8);
            let mut prev = f64::INFINITY;
            for k in 0..=5 {
                let s = Support::new((0..k).collect()).unwrap();
                let fit = ols_fit(&ds, &s).unwrap();
                assert!(fit.rss <= prev * (1.0 + 1e-12));
                assert!(fit.rss <= ds.y_norm_squared() * (1.0 + 1e-12));
                assert_relative_eq!(fit.rss, fit.sigma2_hat * 15.0, max_relative = 1e-12);
                prev = fit.rss;
            }
        }
    }

    #[test]
    fn refit_on_residual_gives_null_coefficients() {
        let ds = random_dataset(42, 20, 6);
        let s = Support::new(vec![0, 2, 5]).unwrap();
        let fit = ols_fit(&ds, &s).unwrap();
        let a_i = ds.design().select_columns(s.indices().iter());
        let residual = ds.response() - &a_i * &fit.coefficients;
        let rds = Dataset::new(ds.design().clone(), residual).unwrap();
        let refit = ols_fit(&rds, &s).unwrap();
        let scale = fit.coefficients.norm().max(1.0);
        assert!(refit.coefficients.norm() <= 1e-8 * scale);
    }

    #[test]
    fn scaling_response_scales_fit_quantities() {
        let ds = random_dataset(77, 18, 5);
        let s = Support::new(vec![1, 3]).unwrap();
        let base = ols_fit(&ds, &s).unwrap();
        let c = 37.5;
        let scaled = ols_fit(&ds.with_scaled_response(c).unwrap(), &s).unwrap();
        assert_relative_eq!(scaled.rss, c * c * base.rss, max_relative = 1e-10);
        assert_relative_eq!(
            scaled.sigma2_hat,
            c * c * base.sigma2_hat,
            max_relative = 1e-10
        );
        for i in 0..2 {
            assert_relative_eq!(
                scaled.coefficients[i],
                c * base.coefficients[i],
                max_relative = 1e-10
            );
        }
        assert_relative_eq!(scaled.gram_logdet, base.gram_logdet, max_relative = 1e-12);
    }

    #[test]
    fn pythagoras_holds() {
        for seed in 0..20 {
            let ds = random_dataset(300 + seed, 14, 6);
            let s = Support::new(vec![0, 2, 4]).unwrap();
            let fit = ols_fit(&ds, &s).unwrap();
            let energy = projection_energy(&ds, &s).unwrap();
            assert_relative_eq!(
                energy + fit.rss,
                ds.y_norm_squared(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn gram_logdet_matches_direct_determinant() {
        let ds = random_dataset(55, 10, 6);
        let s = Support::new(vec![0, 1, 4]).unwrap();
        let fit = ols_fit(&ds, &s).unwrap();
        let a_i = ds.design().select_columns(s.indices().iter());
        let gram = a_i.transpose() * &a_i;
        assert_relative_eq!(
            fit.gram_logdet,
            gram.determinant().ln(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn csv_roundtrip_with_and_without_header() {
        let with_header = "y,x1,x2\n1.0,2.0,3.0\n4.0,5.0,6.0\n";
        let ds = Dataset::from_csv_reader(with_header.as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.p()), (2, 2));
        assert_eq!(ds.response()[1], 4.0);
        assert_eq!(ds.design()[(1, 1)], 6.0);

        let bare = "1.0,2.0,3.0\n4.0,5.0,6.0\n";
        let ds2 = Dataset::from_csv_reader(bare.as_bytes()).unwrap();
        assert_eq!((ds2.n(), ds2.p()), (2, 2));

        let malformed = "1.0,2.0\nnope,3.0\n";
        assert!(matches!(
            Dataset::from_csv_reader(malformed.as_bytes()),
            Err(Error::Csv(_))
        ));
    }
}
