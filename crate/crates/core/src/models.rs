//! Parameter ensembles, system families, the block-diagonal extended system
//! and the built-in example families.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix;

/// Ordered finite list of real parameter values.
#[derive(Debug, Clone)]
pub struct ParameterEnsemble {
    values: Vec<f64>,
    pairwise_distinct: bool,
}

impl ParameterEnsemble {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty {
                what: "parameter ensemble",
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let pairwise_distinct = sorted.windows(2).all(|w| w[0] != w[1]);
        Ok(Self {
            values,
            pairwise_distinct,
        })
    }

    /// Uniform partition of `[a, b]` into `n` values,
    /// `a + (i-1) (b-a) / (n-1)` for `i = 1..n`; `n = 1` yields the midpoint.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty {
                what: "parameter ensemble",
            });
        }
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::InvalidParameter(format!(
                "invalid partition interval [{a}, {b}]"
            )));
        }
        if n == 1 {
            return Self::new(vec![0.5 * (a + b)]);
        }
        let step = (b - a) / (n - 1) as f64;
        Self::new((0..n).map(|i| a + i as f64 * step).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_pairwise_distinct(&self) -> bool {
        self.pairwise_distinct
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

type SystemRule = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// A rule `sigma -> A_sigma` together with the shared input matrix `B`.
///
/// `B` is deliberately independent of the parameter; families with
/// parameter-dependent input matrices are outside this crate's model.
#[derive(Clone)]
pub struct SystemFamily {
    name: String,
    n: usize,
    m: usize,
    b: DMatrix<f64>,
    a_of: SystemRule,
}

impl fmt::Debug for SystemFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemFamily")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl SystemFamily {
    pub fn new<F>(name: impl Into<String>, b: DMatrix<f64>, a_of: F) -> Result<Self>
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let (n, m) = b.shape();
        if n == 0 || m == 0 {
            return Err(Error::Empty {
                what: "input matrix",
            });
        }
        Ok(Self {
            name: name.into(),
            n,
            m,
            b,
            a_of: Arc::new(a_of),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension of one plant.
    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// Input dimension.
    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Evaluates the system matrix at a parameter value, validating its shape.
    pub fn system_matrix(&self, sigma: f64) -> Result<DMatrix<f64>> {
        let a = (self.a_of)(sigma);
        if a.shape() != (self.n, self.n) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.n, self.n),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        Ok(a)
    }
}

/// The stacked system: block-diagonal `a_big` with one block per ensemble
/// member and `b_big` holding vertically repeated copies of `B`.
#[derive(Debug, Clone)]
pub struct ExtendedSystem {
    pub a_big: DMatrix<f64>,
    pub b_big: DMatrix<f64>,
    /// Per-plant state dimension.
    pub n: usize,
    /// Input dimension.
    pub m: usize,
    /// Ensemble size.
    pub count: usize,
}

impl ExtendedSystem {
    pub fn dim(&self) -> usize {
        self.n * self.count
    }
}

/// Builds the extended system for a family over an ensemble.
pub fn extend(family: &SystemFamily, ens: &ParameterEnsemble) -> Result<ExtendedSystem> {
    let n = family.state_dim();
    let m = family.input_dim();
    let count = ens.len();
    let mut a_big = DMatrix::<f64>::zeros(n * count, n * count);
    let mut b_big = DMatrix::<f64>::zeros(n * count, m);
    for (i, &sigma) in ens.values().iter().enumerate() {
        let block = family.system_matrix(sigma)?;
        a_big.view_mut((i * n, i * n), (n, n)).copy_from(&block);
        b_big
            .view_mut((i * n, 0), (n, m))
            .copy_from(family.input_matrix());
    }
    Ok(ExtendedSystem {
        a_big,
        b_big,
        n,
        m,
        count,
    })
}

/// Stacks `count` copies of a plant-size vector.
pub fn extension_apply(x: &DVector<f64>, count: usize) -> DVector<f64> {
    let n = x.len();
    let mut big = DVector::<f64>::zeros(n * count);
    for i in 0..count {
        big.rows_mut(i * n, n).copy_from(x);
    }
    big
}

/// Adjoint of [`extension_apply`]: sums the `count` plant-size slices.
pub fn extension_adjoint(x_big: &DVector<f64>, n: usize) -> Result<DVector<f64>> {
    if n == 0 || x_big.len() % n != 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("multiple of {n}"),
            got: format!("{}", x_big.len()),
        });
    }
    let count = x_big.len() / n;
    let mut out = DVector::<f64>::zeros(n);
    for i in 0..count {
        out += x_big.rows(i * n, n);
    }
    Ok(out)
}

/// Compresses a stacked matrix to plant size: the sum of all `n x n` blocks,
/// i.e. the two-sided contraction with the stacking operator.
pub fn compress(m_big: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 || m_big.nrows() % n != 0 || m_big.ncols() % n != 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("square multiple of {n}"),
            got: format!("{}x{}", m_big.nrows(), m_big.ncols()),
        });
    }
    let rows = m_big.nrows() / n;
    let cols = m_big.ncols() / n;
    let mut out = DMatrix::<f64>::zeros(n, n);
    for i in 0..rows {
        for j in 0..cols {
            out += m_big.view((i * n, j * n), (n, n));
        }
    }
    Ok(out)
}

/// Largest per-member deviation `max_i |A_{sigma_i} - A_sigma|` in operator
/// norm. Equals the operator norm of the stacked difference because that
/// difference is block-diagonal.
pub fn deviation_norm(family: &SystemFamily, ens: &ParameterEnsemble, sigma: f64) -> Result<f64> {
    let a_ref = family.system_matrix(sigma)?;
    let mut worst = 0.0f64;
    for &s in ens.values() {
        let diff = family.system_matrix(s)? - &a_ref;
        worst = worst.max(matrix::operator_norm(&diff));
    }
    Ok(worst)
}

/// Damped oscillator with uncertain damping:
/// `A_sigma = [[0, 1], [-1, -sigma]]`, `B = [0, 1]^T`.
pub fn oscillator() -> SystemFamily {
    SystemFamily::new(
        "oscillator",
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        |sigma| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -sigma]),
    )
    .expect("static oscillator family")
}

/// Three-compartment chain with uncertain flow between the last two
/// compartments and no sinks or sources; columns of `A` sum to zero.
pub fn catenary_closed(b12: f64, b21: f64, b23: f64, b32: f64) -> Result<SystemFamily> {
    for (name, v) in [("b12", b12), ("b21", b21), ("b23", b23), ("b32", b32)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be nonnegative, got {v}"
            )));
        }
    }
    SystemFamily::new(
        "catenary-closed",
        DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
        move |sigma| {
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    -b12,
                    b21,
                    0.0,
                    b12,
                    -(b21 + b23),
                    b32 + sigma,
                    0.0,
                    b23,
                    -b32 - sigma,
                ],
            )
        },
    )
}

/// Chain variant with a parameter-dependent sink in the third compartment;
/// coincides with the closed chain at `sigma = 0`.
pub fn catenary_open(b12: f64, b21: f64, b23: f64, b32: f64) -> Result<SystemFamily> {
    for (name, v) in [("b12", b12), ("b21", b21), ("b23", b23), ("b32", b32)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    SystemFamily::new(
        "catenary-open",
        DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
        move |sigma| {
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    -b12,
                    b21,
                    0.0,
                    b12,
                    -(b21 + b23),
                    b32,
                    0.0,
                    b23,
                    -b32 - sigma,
                ],
            )
        },
    )
}

/// Cyclic three-compartment model with an uncertain feed from the third to
/// the first compartment; `B = [0, 1, 0]^T`.
pub fn cyclic(b12: f64, b23: f64, b32: f64) -> Result<SystemFamily> {
    for (name, v) in [("b12", b12), ("b23", b23), ("b32", b32)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    SystemFamily::new(
        "cyclic",
        DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]),
        move |sigma| {
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    -b12, 0.0, sigma, //
                    b12, -b23, b32, //
                    0.0, b23, -b32,
                ],
            )
        },
    )
}

/// Entry `j` of the actuator expansion for the indicator of
/// `(omega1, omega2)` in the sine basis on `(0, 2 pi)`.
pub fn spectral_heat_input_entry(j: usize, omega1: f64, omega2: f64) -> f64 {
    let jf = j as f64;
    2.0 / (jf * PI) * ((jf / 2.0 * omega1).cos() - (jf / 2.0 * omega2).cos())
}

/// Galerkin truncation of a 1-d reaction-diffusion equation on `(0, 2 pi)`
/// with uncertain reaction coefficient: `A = diag(sigma - j^2 / 4)` for
/// `j = 1..modes`, actuation through the indicator of `(omega1, omega2)`.
pub fn spectral_heat(modes: usize, omega1: f64, omega2: f64) -> Result<SystemFamily> {
    if modes == 0 {
        return Err(Error::Empty {
            what: "spectral modes",
        });
    }
    if !(0.0 <= omega1 && omega1 < omega2 && omega2 <= 2.0 * PI) {
        return Err(Error::InvalidParameter(format!(
            "actuator interval ({omega1}, {omega2}) must satisfy 0 <= w1 < w2 <= 2 pi"
        )));
    }
    let b = DMatrix::from_fn(modes, 1, |j, _| {
        spectral_heat_input_entry(j + 1, omega1, omega2)
    });
    SystemFamily::new("spectral-heat", b, move |sigma| {
        DMatrix::from_fn(modes, modes, |j, k| {
            if j == k {
                sigma - ((j + 1) * (j + 1)) as f64 / 4.0
            } else {
                0.0
            }
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{eigenvalues, operator_norm, SolverSettings};
    use approx::assert_relative_eq;

    #[test]
    fn uniform_partition_matches_formula() {
        let ens = ParameterEnsemble::uniform(-0.5, 0.5, 5).unwrap();
        assert_eq!(ens.values(), &[-0.5, -0.25, 0.0, 0.25, 0.5]);
        assert!(ens.is_pairwise_distinct());
        assert_relative_eq!(ens.mean(), 0.0);
    }

    #[test]
    fn duplicate_values_clear_distinct_flag() {
        let ens = ParameterEnsemble::new(vec![1.0, 2.0, 1.0]).unwrap();
        assert!(!ens.is_pairwise_distinct());
    }

    #[test]
    fn single_member_extension_is_the_plant() {
        let fam = oscillator();
        let ens = ParameterEnsemble::new(vec![0.25]).unwrap();
        let ext = extend(&fam, &ens).unwrap();
        assert_eq!(ext.a_big, fam.system_matrix(0.25).unwrap());
        assert_eq!(ext.b_big, *fam.input_matrix());
    }

    #[test]
    fn oscillator_extension_blocks() {
        let fam = oscillator();
        let ens = ParameterEnsemble::new(vec![-0.5, 0.5]).unwrap();
        let ext = extend(&fam, &ens).unwrap();
        assert_eq!(ext.dim(), 4);
        let expected_first = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.5]);
        let expected_second = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.5]);
        assert_eq!(ext.a_big.view((0, 0), (2, 2)).clone_owned(), expected_first);
        assert_eq!(
            ext.a_big.view((2, 2), (2, 2)).clone_owned(),
            expected_second
        );
        // Structural zeros off the block diagonal.
        assert_eq!(ext.a_big.view((0, 2), (2, 2)).sum(), 0.0);
        assert_eq!(ext.a_big.view((2, 0), (2, 2)).sum(), 0.0);
    }

    #[test]
    fn extended_spectrum_is_union_of_block_spectra() {
        let fam = oscillator();
        let ens = ParameterEnsemble::new(vec![-1.0, 0.3, 2.0]).unwrap();
        let ext = extend(&fam, &ens).unwrap();
        let settings = SolverSettings::default();
        let mut big: Vec<(f64, f64)> = eigenvalues(&ext.a_big, &settings)
            .unwrap()
            .iter()
            .map(|l| (l.re, l.im))
            .collect();
        let mut blocks: Vec<(f64, f64)> = ens
            .values()
            .iter()
            .flat_map(|&s| {
                eigenvalues(&fam.system_matrix(s).unwrap(), &settings)
                    .unwrap()
                    .iter()
                    .map(|l| (l.re, l.im))
                    .collect::<Vec<_>>()
            })
            .collect();
        let key = |p: &(f64, f64)| (p.0, p.1);
        big.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        blocks.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (b, e) in big.iter().zip(blocks.iter()) {
            assert_relative_eq!(b.0, e.0, epsilon = 1e-10);
            assert_relative_eq!(b.1.abs(), e.1.abs(), epsilon = 1e-10);
        }
    }

    #[test]
    fn compress_of_identity_scales_by_count() {
        let id = DMatrix::<f64>::identity(6, 6);
        let c = compress(&id, 2).unwrap();
        assert_eq!(c, DMatrix::identity(2, 2) * 3.0);
    }

    #[test]
    fn compress_of_block_diagonal_sums_blocks() {
        let m1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m2 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, 2.0]);
        let mut big = DMatrix::<f64>::zeros(4, 4);
        big.view_mut((0, 0), (2, 2)).copy_from(&m1);
        big.view_mut((2, 2), (2, 2)).copy_from(&m2);
        assert_eq!(compress(&big, 2).unwrap(), m1 + m2);
    }

    #[test]
    fn stacking_scales_norm_by_count() {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let big = extension_apply(&x, 4);
        assert_relative_eq!(big.norm_squared(), 4.0 * x.norm_squared());
        let back = extension_adjoint(&big, 3).unwrap();
        assert_relative_eq!(back, x * 4.0);
    }

    #[test]
    fn deviation_norm_special_cases() {
        let fam = oscillator();
        let single = ParameterEnsemble::new(vec![0.7]).unwrap();
        assert_eq!(deviation_norm(&fam, &single, 0.7).unwrap(), 0.0);

        let ens = ParameterEnsemble::new(vec![-4.0, -2.0, 0.0, 2.0, 4.0]).unwrap();
        // Differences have a single nonzero entry, so the deviation is the
        // largest parameter distance.
        assert_relative_eq!(deviation_norm(&fam, &ens, 0.0).unwrap(), 4.0);
    }

    #[test]
    fn deviation_norm_matches_full_stacked_difference() {
        let fam = cyclic(1.0, 2.0, 1.0).unwrap();
        let ens = ParameterEnsemble::new(vec![-3.0, 1.0, 5.0]).unwrap();
        let sigma = 0.4;
        let ext = extend(&fam, &ens).unwrap();
        let same = extend(&fam, &ParameterEnsemble::new(vec![sigma; 3]).unwrap()).unwrap();
        let full = operator_norm(&(ext.a_big - same.a_big));
        assert_relative_eq!(
            deviation_norm(&fam, &ens, sigma).unwrap(),
            full,
            max_relative = 1e-10
        );
    }

    #[test]
    fn oscillator_entries() {
        let fam = oscillator();
        assert_relative_eq!(fam.system_matrix(0.0).unwrap().trace(), 0.0);
        assert_relative_eq!(fam.system_matrix(0.25).unwrap()[(1, 1)], -0.25);
        for sigma in [-3.0, 0.0, 1.7] {
            let a = fam.system_matrix(sigma).unwrap();
            assert_relative_eq!(a.lu().determinant(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn catenary_closed_conserves_mass() {
        let fam = catenary_closed(1.0, 0.5, 2.0, 1.0).unwrap();
        for sigma in [0.0, 0.3, 2.0] {
            let a = fam.system_matrix(sigma).unwrap();
            for j in 0..3 {
                assert_relative_eq!(a.column(j).sum(), 0.0, epsilon = 1e-14);
            }
        }
        assert_relative_eq!(fam.system_matrix(0.3).unwrap()[(1, 2)], 1.3);
    }

    #[test]
    fn open_catenary_at_zero_matches_closed() {
        let closed = catenary_closed(1.0, 0.5, 2.0, 1.0).unwrap();
        let open = catenary_open(1.0, 0.5, 2.0, 1.0).unwrap();
        assert_eq!(
            closed.system_matrix(0.0).unwrap(),
            open.system_matrix(0.0).unwrap()
        );
    }

    #[test]
    fn cyclic_structure() {
        let fam = cyclic(1.0, 2.0, 1.0).unwrap();
        let a0 = fam.system_matrix(0.0).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 1.0, -2.0, 1.0, 0.0, 2.0, -1.0]);
        assert_eq!(a0, expected);
        let sigma = 0.7;
        let a = fam.system_matrix(sigma).unwrap();
        assert_relative_eq!(a[(0, 2)], sigma);
        // Column sums: [0, 0, sigma].
        assert_relative_eq!(a.column(0).sum(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(a.column(1).sum(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(a.column(2).sum(), sigma, epsilon = 1e-14);
    }

    #[test]
    fn spectral_heat_matrices() {
        let fam = spectral_heat(2, 1.0, 2.0).unwrap();
        let a = fam.system_matrix(0.0).unwrap();
        assert_relative_eq!(a[(0, 0)], -0.25);
        assert_relative_eq!(a[(1, 1)], -1.0);
        assert_eq!(a[(0, 1)], 0.0);

        let fam5 = spectral_heat(5, 1.0, 2.0).unwrap();
        let b = fam5.input_matrix();
        for j in 0..5 {
            assert!(b[(j, 0)].abs() > 1e-3, "input entry {j} vanished");
        }
        assert_relative_eq!(
            b[(0, 0)],
            2.0 / PI * ((0.5f64).cos() - 1.0f64.cos()),
            epsilon = 1e-15
        );
        // Diagonal construction: eigenvalues are sigma - j^2/4 exactly.
        let sigma = 0.37;
        let a = fam5.system_matrix(sigma).unwrap();
        for j in 0..5 {
            assert_eq!(a[(j, j)], sigma - ((j + 1) * (j + 1)) as f64 / 4.0);
        }
    }

    #[test]
    fn spectral_heat_rejects_bad_interval() {
        assert!(spectral_heat(3, 2.0, 1.0).is_err());
        assert!(spectral_heat(3, -0.1, 1.0).is_err());
        assert!(spectral_heat(0, 1.0, 2.0).is_err());
    }
}
