//! Dense row-major tensors and the primitive kernels the layers build on.
//!
//! The flat offset of index `(i0, i1, .., ik)` in a tensor of shape
//! `[d0, d1, .., dk]` is `sum_j i_j * stride_j` with `stride_k = 1` and
//! `stride_j = stride_{j+1} * d_{j+1}`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F = f64> {
    shape: Vec<usize>,
    data: Vec<F>,
}

/// Fill rule for [`Tensor::create`].
pub enum Fill<'a, F, R: Rng + ?Sized> {
    Value(F),
    /// Uniform on `[-bound, bound)`.
    Uniform { bound: F, rng: &'a mut R },
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape("empty shape"));
    }
    if let Some(pos) = shape.iter().position(|&d| d == 0) {
        return Err(Error::shape(format!("extent {pos} of {shape:?} is zero")));
    }
    Ok(shape.iter().product())
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

impl<F: Scalar> Tensor<F> {
    pub fn create<R: Rng + ?Sized>(shape: &[usize], fill: Fill<'_, F, R>) -> Result<Self> {
        let n = check_shape(shape)?;
        let data = match fill {
            Fill::Value(v) => vec![v; n],
            Fill::Uniform { bound, rng } => {
                let b = bound.to_f64().unwrap_or(0.0);
                (0..n).map(|_| F::of(rng.gen_range(-b..b))).collect()
            }
        };
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn full(shape: &[usize], v: F) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![v; n],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, F::zero())
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: F, rng: &mut R) -> Result<Self> {
        Self::create(shape, Fill::Uniform { bound, rng })
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = F::one();
        }
        Ok(t)
    }

    pub fn zeros_like(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: vec![F::zero(); self.data.len()],
        }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            debug_assert!(i < d);
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> F {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], v: F) {
        let o = self.offset(index);
        self.data[o] = v;
    }

    pub fn row(&self, r: usize) -> &[F] {
        let w = self.shape[1..].iter().product::<usize>();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        let w = self.shape[1..].iter().product::<usize>();
        &mut self.data[r * w..(r + 1) * w]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(F, F) -> F) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: F) -> Self {
        self.map(|x| x * s)
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, s: F) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn dims2(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(format!(
                "{what} must be rank 2, got {:?}",
                self.shape
            ))),
        }
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.dims2("transpose input")?;
        let mut out = vec![F::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::from_vec(&[c, r], out)
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.dims2("matmul lhs")?;
        let (k2, n) = other.dims2("matmul rhs")?;
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner extents {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![F::zero(); m * n];
        gemm_nn(&self.data, &other.data, &mut out, m, k, n);
        Tensor::from_vec(&[m, n], out)
    }

    /// `self · otherᵀ`
    pub fn matmul_bt(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.dims2("matmul lhs")?;
        let (n, k2) = other.dims2("matmul rhs")?;
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul_bt inner extents {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![F::zero(); m * n];
        gemm_nt(&self.data, &other.data, &mut out, m, k, n);
        Tensor::from_vec(&[m, n], out)
    }

    /// `selfᵀ · other`
    pub fn matmul_at(&self, other: &Self) -> Result<Self> {
        let (k, m) = self.dims2("matmul lhs")?;
        let (k2, n) = other.dims2("matmul rhs")?;
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul_at inner extents {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![F::zero(); m * n];
        gemm_tn(&self.data, &other.data, &mut out, k, m, n);
        Tensor::from_vec(&[m, n], out)
    }

    /// Row-wise softmax of a rank-2 tensor, max-subtracted.
    pub fn softmax_rows(&self) -> Result<Self> {
        let (r, _) = self.dims2("softmax input")?;
        let mut out = self.clone();
        for i in 0..r {
            softmax_in_place(out.row_mut(i));
        }
        Ok(out)
    }

    /// Row-wise log-softmax of a rank-2 tensor.
    pub fn log_softmax_rows(&self) -> Result<Self> {
        let (r, _) = self.dims2("log-softmax input")?;
        let mut out = self.clone();
        for i in 0..r {
            log_softmax_in_place(out.row_mut(i));
        }
        Ok(out)
    }

    pub fn convert<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|x| G::of(x.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }
}

pub fn softmax_in_place<F: Scalar>(row: &mut [F]) {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

pub fn log_softmax_in_place<F: Scalar>(row: &mut [F]) {
    let lse = logsumexp(row);
    for x in row.iter_mut() {
        *x -= lse;
    }
}

pub fn logsumexp<F: Scalar>(xs: &[F]) -> F {
    let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<F>().ln()
}

/// `log(exp(a) + exp(b))` tolerant of `-inf` operands.
#[inline]
pub fn log_add<F: Scalar>(a: F, b: F) -> F {
    if a == F::neg_infinity() {
        return b;
    }
    if b == F::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[inline]
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `c[m,n] += a[m,k] · b[k,n]`
pub(crate) fn gemm_nn<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av != F::zero() {
                axpy(av, &b[p * n..(p + 1) * n], crow);
            }
        }
    }
}

/// `c[m,n] += a[m,k] · b[n,k]ᵀ`
pub(crate) fn gemm_nt<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            c[i * n + j] += dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `c[m,n] += a[k,m]ᵀ · b[k,n]`
pub(crate) fn gemm_tn<F: Scalar>(a: &[F], b: &[F], c: &mut [F], k: usize, m: usize, n: usize) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av != F::zero() {
                axpy(av, brow, &mut c[i * n..(i + 1) * n]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn create_fills() {
        let t = Tensor::<f64>::zeros(&[2, 3]).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.data(), &[0.0; 6]);
        let t = Tensor::<f64>::full(&[1], 7.5).unwrap();
        assert_eq!(t.data(), &[7.5]);
    }

    #[test]
    fn create_rejects_zero_extent() {
        assert!(matches!(Tensor::<f64>::zeros(&[2, 0]), Err(Error::Shape(_))));
        assert!(Tensor::<f64>::zeros(&[]).is_err());
        assert!(Tensor::<f64>::from_vec(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn seeded_uniform_is_deterministic() {
        let a = Tensor::<f64>::uniform(&[2, 2], 1.0, &mut stream(9, Stream::Init, 0)).unwrap();
        let b = Tensor::<f64>::uniform(&[2, 2], 1.0, &mut stream(9, Stream::Init, 0)).unwrap();
        assert_eq!(a, b);
        let c = Tensor::<f64>::uniform(&[2, 2], 1.0, &mut stream(10, Stream::Init, 0)).unwrap();
        assert_ne!(a, c);
    }

    fn lexicographic(shape: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &d in shape {
            out = out
                .into_iter()
                .flat_map(|p| (0..d).map(move |i| [p.clone(), vec![i]].concat()))
                .collect();
        }
        out
    }

    #[test]
    fn offsets_follow_stride_formula() {
        for rank in 1..=4 {
            for extents in lexicographic(&vec![3; rank]) {
                let shape: Vec<usize> = extents.iter().map(|e| e + 1).collect();
                let t = Tensor::<f64>::zeros(&shape).unwrap();
                let st = strides(&shape);
                for (flat, idx) in lexicographic(&shape).iter().enumerate() {
                    let by_stride: usize = idx.iter().zip(&st).map(|(i, s)| i * s).sum();
                    assert_eq!(t.offset(idx), flat);
                    assert_eq!(by_stride, flat);
                }
            }
        }
    }

    #[test]
    fn matmul_small_cases() {
        let m = Tensor::from_vec(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(Tensor::identity(3).unwrap().matmul(&m).unwrap(), m);
        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2, 1], vec![1.0, 1.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[3.0, 7.0]);
        assert!(a.matmul(&m).is_err());
    }

    #[test]
    fn transposed_products_agree() {
        let mut rng = stream(3, Stream::Init, 0);
        let a = Tensor::<f64>::uniform(&[4, 5], 1.0, &mut rng).unwrap();
        let b = Tensor::<f64>::uniform(&[3, 5], 1.0, &mut rng).unwrap();
        let direct = a.matmul(&b.transpose().unwrap()).unwrap();
        let nt = a.matmul_bt(&b).unwrap();
        let tn = a.transpose().unwrap().matmul_at(&b.transpose().unwrap()).unwrap();
        for ((x, y), z) in direct.data().iter().zip(nt.data()).zip(tn.data()) {
            assert!((x - y).abs() < 1e-14 && (x - z).abs() < 1e-14);
        }
    }

    #[test]
    fn elementwise() {
        let t = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.add(&t.zeros_like()).unwrap(), t);
        assert_eq!(t.mul(&Tensor::full(&[3], 1.0).unwrap()).unwrap(), t);
        assert_eq!(t.map(|x| 2.0 * x).data(), &[2.0, 4.0, 6.0]);
        assert!(t.add(&Tensor::zeros(&[1, 3]).unwrap()).is_err());
    }

    #[test]
    fn softmax_examples() {
        let eq = Tensor::<f64>::from_vec(&[1, 4], vec![0.3; 4]).unwrap().softmax_rows().unwrap();
        for &p in eq.data() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        let s = Tensor::from_vec(&[1, 2], vec![0.0, 3f64.ln()]).unwrap().softmax_rows().unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-15);
        assert!((s.data()[1] - 0.75).abs() < 1e-15);
        let sat = Tensor::<f64>::from_vec(&[1, 3], vec![1000.0, 0.0, -1.0]).unwrap().softmax_rows().unwrap();
        assert!((sat.data()[0] - 1.0).abs() < 1e-9);
        assert!(sat.is_finite());
    }

    #[test]
    fn log_add_handles_neg_inf() {
        let ninf = f64::NEG_INFINITY;
        assert_eq!(log_add(ninf, ninf), ninf);
        assert_eq!(log_add(ninf, 1.5), 1.5);
        assert!((log_add(0.0f64, 0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
