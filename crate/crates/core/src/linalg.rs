//! Dense symmetric matrices: eigen-decomposition by cyclic Jacobi rotations,
//! PSD square roots, traces of powers and a Cholesky-based solver.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{dim_err, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_CLAMP: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// A real symmetric `d x d` matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: Array2<f64>,
}

impl SymMatrix {
    /// Validates symmetry to a relative tolerance of 1e-12 and stores the
    /// exactly symmetrised matrix.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(dim_err(format!("square matrix ({r}x{r})"), format!("{r}x{c}")));
        }
        if r == 0 {
            return Err(Error::InvalidInput("matrix must have d >= 1".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut sym = entries;
        for i in 0..r {
            for j in (i + 1)..r {
                let (a, b) = (sym[[i, j]], sym[[j, i]]);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let m = 0.5 * (a + b);
                sym[[i, j]] = m;
                sym[[j, i]] = m;
            }
        }
        Ok(Self { entries: sym })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            entries: Array2::eye(d),
        }
    }

    pub fn scaled_identity(d: usize, c: f64) -> Self {
        Self {
            entries: Array2::eye(d) * c,
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self {
            entries: Array2::from_diag(&Array1::from(diag.to_vec())),
        }
    }

    /// Builds from row-major data without a symmetry check; the caller
    /// guarantees symmetry (used for internally accumulated Gram matrices).
    pub(crate) fn from_symmetric_unchecked(entries: Array2<f64>) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }

    pub fn mul_vec(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.dim() {
            return Err(dim_err(self.dim(), x.len()));
        }
        Ok(self.entries.dot(&x))
    }

    /// `x' M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.entries[[i, j]] * x[j];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn eigen(&self) -> Spectrum {
        jacobi_eigen(self)
    }

    /// Principal square root of a PSD matrix. Eigenvalues down to
    /// `-1e-10 * lambda_max` are treated as round-off and clamped to zero.
    pub fn sqrt(&self) -> Result<SymMatrix> {
        let spec = self.eigen();
        let vals = clamp_psd(&spec.eigenvalues)?;
        Ok(spec.reassemble(vals.iter().map(|v| v.sqrt())))
    }

    /// `tr(M^k)` for `k` in 1..=3.
    pub fn trace_power(&self, k: u32) -> Result<f64> {
        let m = &self.entries;
        match k {
            1 => Ok(self.trace()),
            // tr(M^2) = sum of squared entries for symmetric M
            2 => Ok(m.iter().map(|v| v * v).sum()),
            3 => {
                let m2 = m.dot(m);
                Ok((&m2 * m).sum())
            }
            _ => Err(Error::InvalidArgument(format!(
                "trace_power supports k in 1..=3, got {k}"
            ))),
        }
    }

    /// Inverse of a positive definite matrix via Cholesky. If the
    /// factorisation fails a ridge of `1e-10 * tr/d` is added, escalating by
    /// 10x up to six times.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        let d = self.dim();
        let chol = Cholesky::new_with_ridge(self.view(), 6)?;
        let mut inv = Array2::zeros((d, d));
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = chol.solve(&e);
            for i in 0..d {
                inv[[i, j]] = col[i];
            }
        }
        // symmetrise round-off
        let t = inv.t().to_owned();
        Ok(SymMatrix::from_symmetric_unchecked((inv + t) * 0.5))
    }
}

/// Eigen-decomposition with eigenvalues sorted in descending order and
/// orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

impl Spectrum {
    pub fn reassemble(&self, values: impl Iterator<Item = f64>) -> SymMatrix {
        let d = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let vals: Vec<f64> = values.collect();
        let mut out = Array2::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let mut acc = 0.0;
                for (k, lam) in vals.iter().enumerate() {
                    acc += v[[i, k]] * lam * v[[j, k]];
                }
                out[[i, j]] = acc;
                out[[j, i]] = acc;
            }
        }
        SymMatrix::from_symmetric_unchecked(out)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// Returns PSD-clamped eigenvalues or a not-PSD error.
pub fn clamp_psd(eigenvalues: &Array1<f64>) -> Result<Vec<f64>> {
    let max = eigenvalues.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let min = eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let floor = -PSD_CLAMP * max.max(0.0);
    if min < floor || (max <= 0.0 && min < 0.0) {
        return Err(Error::NotPsd {
            min_eig: min,
            max_eig: max,
        });
    }
    Ok(eigenvalues.iter().map(|&v| v.max(0.0)).collect())
}

pub fn sym_eigen(m: &SymMatrix) -> Spectrum {
    m.eigen()
}

pub fn matrix_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    m.sqrt()
}

pub fn trace_power(m: &SymMatrix, k: u32) -> Result<f64> {
    m.trace_power(k)
}

fn jacobi_eigen(m: &SymMatrix) -> Spectrum {
    let d = m.dim();
    let mut a = m.entries.clone();
    let mut v = Array2::<f64>::eye(d);

    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off <= 1e-32 * total || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..d {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut eigenvectors = Array2::zeros((d, d));
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.column_mut(col).assign(&v.column(i));
    }
    Spectrum {
        eigenvalues,
        eigenvectors,
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub(crate) fn new(a: ArrayView2<f64>) -> Option<Self> {
        let d = a.nrows();
        let mut l = Array2::<f64>::zeros((d, d));
        for j in 0..d {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= l[[j, k]] * l[[j, k]];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[[j, j]] = ljj;
            for i in (j + 1)..d {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / ljj;
            }
        }
        Some(Self { l })
    }

    /// Factorises `a`, adding an escalating ridge (starting at
    /// `1e-10 * tr(a)/d`) when the plain factorisation fails.
    pub(crate) fn new_with_ridge(a: ArrayView2<f64>, max_retries: usize) -> Result<Self> {
        if let Some(c) = Self::new(a) {
            return Ok(c);
        }
        let d = a.nrows();
        let base = (a.diag().sum() / d as f64).abs().max(f64::MIN_POSITIVE);
        let mut ridge = 1e-10 * base;
        for _ in 0..max_retries {
            let mut b = a.to_owned();
            for i in 0..d {
                b[[i, i]] += ridge;
            }
            if let Some(c) = Self::new(b.view()) {
                return Ok(c);
            }
            ridge *= 10.0;
        }
        Err(Error::InvalidInput(
            "matrix is not positive definite even after ridge regularisation".into(),
        ))
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.l.nrows();
        let l = &self.l;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s -= l[[k, i]] * x[k];
            }
            x[i] = s / l[[i, i]];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn max_abs_diff(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn identity_spectrum() {
        let s = SymMatrix::identity(3).eigen();
        assert!(s.eigenvalues.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diagonal_spectrum_has_axis_vectors() {
        let s = SymMatrix::from_diag(&[1.0, 3.0]).eigen();
        assert_eq!(s.eigenvalues.to_vec(), vec![3.0, 1.0]);
        assert!((s.eigenvectors[[1, 0]].abs() - 1.0).abs() < 1e-14);
        assert!((s.eigenvectors[[0, 1]].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_characteristic_polynomial() {
        // det([[2-l,1],[1,2-l]]) = (2-l)^2 - 1 => l in {3, 1}
        let m = SymMatrix::new(array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let s = m.eigen();
        assert!((s.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric() {
        let err = SymMatrix::new(array![[1.0, 2.0], [0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn sqrt_examples() {
        let s = SymMatrix::identity(4).sqrt().unwrap();
        assert!(max_abs_diff(s.view(), Array2::eye(4).view()) < 1e-14);

        let s = SymMatrix::from_diag(&[4.0, 9.0]).sqrt().unwrap();
        assert!(max_abs_diff(s.view(), array![[2.0, 0.0], [0.0, 3.0]].view()) < 1e-14);

        let c = 1.0 + 4.0 / 500f64.sqrt();
        let s = SymMatrix::scaled_identity(3, c).sqrt().unwrap();
        for i in 0..3 {
            assert!((s.get(i, i) - c.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = SymMatrix::from_diag(&[1.0, -0.1]);
        assert!(matches!(m.sqrt(), Err(Error::NotPsd { .. })));
        // round-off sized negatives are clamped
        let m = SymMatrix::from_diag(&[1.0, -1e-14]);
        assert!(m.sqrt().is_ok());
    }

    #[test]
    fn trace_power_examples() {
        assert_eq!(SymMatrix::identity(5).trace_power(1).unwrap(), 5.0);
        assert_eq!(SymMatrix::from_diag(&[2.0, 3.0]).trace_power(2).unwrap(), 13.0);
        assert!(matches!(
            SymMatrix::identity(2).trace_power(4),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn inverse_of_spd() {
        let m = SymMatrix::new(array![[4.0, 1.0], [1.0, 3.0]]).unwrap();
        let inv = m.inverse_pd().unwrap();
        let prod = m.view().dot(&inv.view());
        assert!(max_abs_diff(prod.view(), Array2::eye(2).view()) < 1e-14);
    }
}
