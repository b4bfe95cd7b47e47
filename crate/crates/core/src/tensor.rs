//! Dense N-way tensors and the multilinear kernels built on them.
//!
//! Element `(i_1, …, i_N)` lives at linear offset `Σ_k i_k · Π_{m<k} I_m`
//! (first index fastest). Modes are 0-based in this API; file formats and
//! CLI output use 1-based modes.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{Element, Scalar};

#[derive(Clone, PartialEq, Debug)]
pub struct DenseTensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidShape("tensor order must be at least 1".into()));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidShape(format!("zero extent in {dims:?}")));
    }
    Ok(dims.iter().product())
}

/// Product of extents before and after `mode`.
#[inline]
fn strides_around(dims: &[usize], mode: usize) -> (usize, usize) {
    let left = dims[..mode].iter().product();
    let right = dims[mode + 1..].iter().product();
    (left, right)
}

impl<T: Element> DenseTensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let len = check_dims(&dims)?;
        if len != data.len() {
            return Err(Error::InvalidShape(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![T::zero(); len],
        })
    }

    /// Builds a tensor by evaluating `f` at every (0-based) multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let len = check_dims(dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < dims[k] {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(dims.to_vec(), data)
    }

    pub(crate) fn from_raw(dims: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dims.len(), "index arity");
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            assert!(i < d, "index out of bounds");
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Mode-`mode` unfolding: an `I_mode × Π_{j≠mode} I_j` matrix whose
    /// columns are the mode fibers, ordered by the remaining indices with
    /// the lowest mode varying fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix<T>> {
        self.check_mode(mode)?;
        let n = self.dims[mode];
        let (left, right) = strides_around(&self.dims, mode);
        if left == 1 {
            // Mode-1 unfolding is the buffer itself.
            return Ok(Matrix::from_raw(n, right, self.data.clone()));
        }
        let cols = left * right;
        let mut out = vec![T::zero(); n * cols];
        for b in 0..right {
            for i in 0..n {
                let src = &self.data[(b * n + i) * left..(b * n + i + 1) * left];
                for (a, &v) in src.iter().enumerate() {
                    out[i + (a + left * b) * n] = v;
                }
            }
        }
        Ok(Matrix::from_raw(n, cols, out))
    }

    /// Inverse of [`unfold`](Self::unfold).
    pub fn refold(m: &Matrix<T>, mode: usize, dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        if mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let n = dims[mode];
        if m.rows() != n || m.rows() * m.cols() != len {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix cannot refold along mode {mode} into {dims:?}",
                m.rows(),
                m.cols()
            )));
        }
        let (left, right) = strides_around(dims, mode);
        let src = m.data();
        if left == 1 {
            return Ok(Self::from_raw(dims.to_vec(), src.to_vec()));
        }
        let mut out = vec![T::zero(); len];
        for b in 0..right {
            for i in 0..n {
                let dst = &mut out[(b * n + i) * left..(b * n + i + 1) * left];
                for (a, d) in dst.iter_mut().enumerate() {
                    *d = src[i + (a + left * b) * n];
                }
            }
        }
        Ok(Self::from_raw(dims.to_vec(), out))
    }

    /// `self ×_mode u`: replaces extent `I_mode` by `rows(u)`, with
    /// `(t ×_n U)_{…j…} = Σ_i t_{…i…} u_{j i}`.
    pub fn mode_product(&self, u: &Matrix<T>, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let n = self.dims[mode];
        if u.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "mode-{mode} product needs a matrix with {n} columns, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        let j_out = u.rows();
        let (left, right) = strides_around(&self.dims, mode);
        let mut dims = self.dims.clone();
        dims[mode] = j_out;
        let mut out = vec![T::zero(); left * j_out * right];
        for b in 0..right {
            let src_block = &self.data[b * n * left..(b + 1) * n * left];
            let dst_block = &mut out[b * j_out * left..(b + 1) * j_out * left];
            for i in 0..n {
                let src = &src_block[i * left..(i + 1) * left];
                for j in 0..j_out {
                    let w = u.get(j, i);
                    if w == T::zero() {
                        continue;
                    }
                    let dst = &mut dst_block[j * left..(j + 1) * left];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = *d + s * w;
                    }
                }
            }
        }
        Ok(Self::from_raw(dims, out))
    }

    /// `self ×_mode uᵀ` without materializing the transpose.
    pub fn mode_product_transpose(&self, u: &Matrix<T>, mode: usize) -> Result<Self> {
        self.mode_product(&u.transpose(), mode)
    }

    /// Applies `mats[n]` along every mode `n` except `skip`.
    pub fn multi_mode_product(&self, mats: &[Matrix<T>], skip: Option<usize>) -> Result<Self> {
        if mats.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices for an order-{} tensor",
                mats.len(),
                self.order()
            )));
        }
        let mut out = self.clone();
        for (n, m) in mats.iter().enumerate() {
            if Some(n) != skip {
                out = out.mode_product(m, n)?;
            }
        }
        Ok(out)
    }

    /// Applies `mats[n]ᵀ` along every mode `n` except `skip`.
    pub fn multi_mode_product_transpose(
        &self,
        mats: &[Matrix<T>],
        skip: Option<usize>,
    ) -> Result<Self> {
        let transposed: Vec<_> = mats.iter().map(Matrix::transpose).collect();
        self.multi_mode_product(&transposed, skip)
    }

    /// Sum of elementwise products.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self::from_raw(self.dims.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self::from_raw(
            self.dims.clone(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self += s · other`, in place.
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
        Ok(())
    }

    /// Same data viewed as an order-2 tensor when `self` is a matrix.
    pub fn to_matrix(&self) -> Result<Matrix<T>> {
        match self.dims.as_slice() {
            [r, c] => Ok(Matrix::from_raw(*r, *c, self.data.clone())),
            _ => Err(Error::InvalidShape(format!(
                "order-{} tensor is not a matrix",
                self.order()
            ))),
        }
    }

    pub fn from_matrix(m: &Matrix<T>) -> Self {
        Self::from_raw(vec![m.rows(), m.cols()], m.data().to_vec())
    }
}

impl<T: Scalar> DenseTensor<T> {
    pub fn frob_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// `‖self − other‖_F`.
    pub fn distance(&self, other: &Self) -> Result<T> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

/// Free-function form of [`DenseTensor::unfold`].
pub fn unfold<T: Element>(t: &DenseTensor<T>, mode: usize) -> Result<Matrix<T>> {
    t.unfold(mode)
}

/// Free-function form of [`DenseTensor::refold`].
pub fn refold<T: Element>(m: &Matrix<T>, mode: usize, dims: &[usize]) -> Result<DenseTensor<T>> {
    DenseTensor::refold(m, mode, dims)
}

/// Free-function form of [`DenseTensor::mode_product`].
pub fn mode_product<T: Element>(
    t: &DenseTensor<T>,
    u: &Matrix<T>,
    mode: usize,
) -> Result<DenseTensor<T>> {
    t.mode_product(u, mode)
}

pub fn kronecker<T: Element>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    a.kronecker(b)
}

pub fn inner<T: Element>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<T> {
    a.inner(b)
}

pub fn frob_norm<T: Scalar>(t: &DenseTensor<T>) -> T {
    t.frob_norm()
}

/// `U_N ⊗ ⋯ ⊗ U_{n+1} ⊗ U_{n−1} ⊗ ⋯ ⊗ U_1`, the Kronecker factor that
/// satisfies `unfold(G ×_1 U_1 ⋯ ×_N U_N, n) = U_n · unfold(G, n) · Pᵀ`.
///
/// Materializes the full product; meant for checks on small problems.
pub fn kronecker_complement<T: Element>(factors: &[Matrix<T>], skip: usize) -> Matrix<T> {
    let mut acc: Option<Matrix<T>> = None;
    for (n, u) in factors.iter().enumerate().rev() {
        if n == skip {
            continue;
        }
        acc = Some(match acc {
            None => u.clone(),
            Some(a) => a.kronecker(u),
        });
    }
    acc.unwrap_or_else(|| Matrix::identity(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    /// Value `i1 + 2(i2−1) + 4(i3−1)` in 1-based indices.
    fn counting_222() -> DenseTensor<f64> {
        DenseTensor::from_fn(&[2, 2, 2], |i| (1 + i[0] + 2 * i[1] + 4 * i[2]) as f64).unwrap()
    }

    /// Reference unfolding straight from the 1-based column index formula
    /// `j = 1 + Σ_{k≠n} (i_k − 1) J_k`, `J_k = Π_{m<k, m≠n} I_m`.
    fn unfold_by_formula(t: &DenseTensor<f64>, n: usize) -> Vec<Vec<f64>> {
        let dims = t.dims();
        let cols: usize = dims.iter().enumerate().filter(|&(k, _)| k != n).map(|(_, &d)| d).product();
        let mut out = vec![vec![0.0; cols]; dims[n]];
        let total: usize = dims.iter().product();
        for lin in 0..total {
            let mut rem = lin;
            let idx: Vec<usize> = dims
                .iter()
                .map(|&d| {
                    let i = rem % d;
                    rem /= d;
                    i + 1
                })
                .collect();
            let mut j = 1;
            for k in 0..dims.len() {
                if k == n {
                    continue;
                }
                let jk: usize = (0..k).filter(|&m| m != n).map(|m| dims[m]).product();
                j += (idx[k] - 1) * jk;
            }
            out[idx[n] - 1][j - 1] = t.get(&idx.iter().map(|i| i - 1).collect::<Vec<_>>());
        }
        out
    }

    fn rows_of(m: &Matrix<f64>) -> Vec<Vec<f64>> {
        (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
            .collect()
    }

    #[test]
    fn unfold_mode1_and_mode3_match_formula() {
        let t = counting_222();
        let m1 = t.unfold(0).unwrap();
        assert_eq!(rows_of(&m1), vec![vec![1., 3., 5., 7.], vec![2., 4., 6., 8.]]);
        assert_eq!(rows_of(&m1), unfold_by_formula(&t, 0));
        let m3 = t.unfold(2).unwrap();
        assert_eq!(rows_of(&m3), vec![vec![1., 2., 3., 4.], vec![5., 6., 7., 8.]]);
        assert_eq!(rows_of(&m3), unfold_by_formula(&t, 2));
    }

    #[test]
    fn unfold_matches_formula_on_uneven_dims() {
        let t = DenseTensor::from_fn(&[2, 3, 4, 2], |i| (i[0] * 7 + i[1] * 5 + i[2] * 3 + i[3] * 11) as f64)
            .unwrap();
        for n in 0..4 {
            assert_eq!(rows_of(&t.unfold(n).unwrap()), unfold_by_formula(&t, n));
        }
    }

    #[test]
    fn vector_unfolds_to_column() {
        let v = DenseTensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let m = v.unfold(0).unwrap();
        assert_eq!(m.shape(), (3, 1));
        assert_eq!(m.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn refold_inverts_unfold() {
        let m = Matrix::from_rows(&[&[1., 3., 5., 7.], &[2., 4., 6., 8.]]).unwrap();
        assert_eq!(DenseTensor::refold(&m, 0, &[2, 2, 2]).unwrap(), counting_222());
        let s = Matrix::from_rows(&[&[4.5]]).unwrap();
        let t = DenseTensor::refold(&s, 0, &[1, 1]).unwrap();
        assert_eq!(t.dims(), &[1, 1]);
        assert_eq!(t.data(), &[4.5]);
        let t = DenseTensor::from_fn(&[3, 4, 5], |i| (i[0] as f64).sin() + (i[1] * i[2]) as f64).unwrap();
        for n in 0..3 {
            assert_eq!(DenseTensor::refold(&t.unfold(n).unwrap(), n, t.dims()).unwrap(), t);
        }
    }

    #[test]
    fn refold_rejects_wrong_shape() {
        let m = Matrix::<f64>::zeros(2, 3);
        assert!(DenseTensor::refold(&m, 0, &[2, 2, 2]).is_err());
        assert!(DenseTensor::refold(&m, 5, &[2, 3]).is_err());
    }

    #[test]
    fn unfold_rejects_bad_mode() {
        assert!(matches!(
            counting_222().unfold(3),
            Err(Error::ModeOutOfRange { mode: 3, order: 3 })
        ));
    }

    #[test]
    fn constructors_validate() {
        assert!(DenseTensor::<f64>::new(vec![], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 0], Vec::<f64>::new()).is_err());
        assert!(DenseTensor::new(vec![2], vec![1.0]).is_err());
        assert!(DenseTensor::new(vec![2], vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn mode_product_identity_and_scaling() {
        let t = DenseTensor::from_fn(&[2, 3], |i| (i[0] + 10 * i[1]) as f64).unwrap();
        assert_eq!(t.mode_product(&Matrix::identity(2), 0).unwrap(), t);
        let doubled = t.mode_product(&Matrix::identity(2).scale(2.0), 0).unwrap();
        assert_eq!(doubled, t.scale(2.0));
        assert!(t.mode_product(&Matrix::identity(3), 0).is_err());
    }

    #[test]
    fn mode_product_matches_triple_loop() {
        let t = DenseTensor::from_fn(&[3, 4, 5], |i| ((i[0] * 31 + i[1] * 17 + i[2] * 7) % 13) as f64 - 6.0)
            .unwrap();
        let u = Matrix::from_fn(2, 3, |i, j| (i as f64) - 0.5 * j as f64 + 0.25);
        let got = t.mode_product(&u, 0).unwrap();
        assert_eq!(got.dims(), &[2, 4, 5]);
        for j in 0..2 {
            for b in 0..4 {
                for c in 0..5 {
                    let want: f64 = (0..3).map(|i| t.get(&[i, b, c]) * u.get(j, i)).sum();
                    assert!((got.get(&[j, b, c]) - want).abs() < 1e-12);
                }
            }
        }
        let v = Matrix::from_fn(6, 5, |i, j| (i * j) as f64 * 0.1 - 1.0);
        let got = t.mode_product(&v, 2).unwrap();
        let via_unfold = DenseTensor::refold(&v.matmul(&t.unfold(2).unwrap()).unwrap(), 2, &[3, 4, 6]).unwrap();
        assert!(got.distance(&via_unfold).unwrap() < 1e-12);
    }

    #[test]
    fn exact_mode_product_over_rationals() {
        let t = DenseTensor::from_fn(&[2, 2, 2], |i| Ratio::new((1 + i[0] + 2 * i[1] + 4 * i[2]) as i64, 3))
            .unwrap();
        let a = Matrix::from_rows(&[&[Ratio::new(1, 2), Ratio::new(-1, 1)]]).unwrap();
        let b = Matrix::from_rows(&[&[Ratio::new(2, 1), Ratio::new(1, 5)], &[Ratio::new(0, 1), Ratio::new(3, 1)]])
            .unwrap();
        let ab = t.mode_product(&a, 0).unwrap().mode_product(&b, 1).unwrap();
        let ba = t.mode_product(&b, 1).unwrap().mode_product(&a, 0).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn inner_and_norm() {
        let t = counting_222();
        assert_eq!(t.inner(&DenseTensor::zeros(&[2, 2, 2]).unwrap()).unwrap(), 0.0);
        let mut e = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        e.set(&[1, 0, 1], 1.0);
        assert_eq!(e.inner(&t).unwrap(), t.get(&[1, 0, 1]));
        let ones = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
        assert_eq!(ones.frob_norm(), 8f64.sqrt());
        assert_eq!(DenseTensor::<f64>::zeros(&[3]).unwrap().frob_norm(), 0.0);
        assert!((t.frob_norm() - t.inner(&t).unwrap().sqrt()).abs() < 1e-12);
        assert!(t.inner(&ones.unfold(0).map(|m| DenseTensor::from_matrix(&m)).unwrap()).is_err());
    }

    #[test]
    fn kronecker_complement_orders_modes_descending() {
        let u: Vec<Matrix<f64>> = (0..3).map(|n| Matrix::identity(n + 1).scale((n + 1) as f64)).collect();
        let p = kronecker_complement(&u, 1);
        assert_eq!(p, u[2].kronecker(&u[0]));
    }
}
