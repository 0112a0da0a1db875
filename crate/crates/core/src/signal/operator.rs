//! Linear measurement operators with exact adjoints.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::signal::image::{Image, Shape};
use crate::signal::kernel::Kernel;

/// A linear map between image spaces together with its adjoint.
pub trait LinearOperator: Debug + Send + Sync {
    fn input_shape(&self) -> Shape;
    fn output_shape(&self) -> Shape;
    fn forward(&self, x: &Image) -> Result<Image>;
    fn adjoint(&self, u: &Image) -> Result<Image>;

    /// `self.adjoint(self.forward(x))`
    fn normal(&self, x: &Image) -> Result<Image> {
        self.adjoint(&self.forward(x)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityOperator {
    shape: Shape,
}

impl IdentityOperator {
    pub fn new(shape: Shape) -> Self {
        IdentityOperator { shape }
    }
}

impl LinearOperator for IdentityOperator {
    fn input_shape(&self) -> Shape {
        self.shape
    }

    fn output_shape(&self) -> Shape {
        self.shape
    }

    fn forward(&self, x: &Image) -> Result<Image> {
        x.ensure_shape(self.shape)?;
        Ok(x.clone())
    }

    fn adjoint(&self, u: &Image) -> Result<Image> {
        self.forward(u)
    }
}

/// Circular (periodic-boundary) 2D convolution by a fixed kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionOperator {
    kernel: Kernel,
    flipped: Kernel,
    shape: Shape,
}

impl ConvolutionOperator {
    pub fn new(kernel: Kernel, shape: Shape) -> Result<Self> {
        check_kernel_fits(&kernel, shape)?;
        Ok(ConvolutionOperator {
            flipped: kernel.flipped(),
            kernel,
            shape,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
}

impl LinearOperator for ConvolutionOperator {
    fn input_shape(&self) -> Shape {
        self.shape
    }

    fn output_shape(&self) -> Shape {
        self.shape
    }

    fn forward(&self, x: &Image) -> Result<Image> {
        x.ensure_shape(self.shape)?;
        Ok(circular_convolve(x, &self.kernel))
    }

    fn adjoint(&self, u: &Image) -> Result<Image> {
        u.ensure_shape(self.shape)?;
        Ok(circular_convolve(u, &self.flipped))
    }
}

/// Dense matrix acting on flattened images; meant for small test problems.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    input: Shape,
    output: Shape,
    /// Row-major, `output.len()` rows by `input.len()` columns.
    entries: Vec<f64>,
}

impl DenseOperator {
    pub fn new(input: Shape, output: Shape, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != input.len() * output.len() {
            return Err(Error::dims(
                format!("{}x{} matrix", output.len(), input.len()),
                format!("{} entries", entries.len()),
            ));
        }
        Ok(DenseOperator {
            input,
            output,
            entries,
        })
    }

    /// Square diagonal operator on a column vector.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut entries = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = d;
        }
        let shape = Shape::new(1, n);
        DenseOperator {
            input: shape,
            output: shape,
            entries,
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.input.len() + col]
    }
}

impl LinearOperator for DenseOperator {
    fn input_shape(&self) -> Shape {
        self.input
    }

    fn output_shape(&self) -> Shape {
        self.output
    }

    fn forward(&self, x: &Image) -> Result<Image> {
        x.ensure_shape(self.input)?;
        let n = self.input.len();
        let out = self
            .entries
            .chunks_exact(n)
            .map(|row| row.iter().zip(x.data()).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Image::from_raw(self.output, out))
    }

    fn adjoint(&self, u: &Image) -> Result<Image> {
        u.ensure_shape(self.output)?;
        let n = self.input.len();
        let mut out = vec![0.0; n];
        for (row, &ui) in self.entries.chunks_exact(n).zip(u.data()) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * ui;
            }
        }
        Ok(Image::from_raw(self.input, out))
    }
}

fn check_kernel_fits(k: &Kernel, shape: Shape) -> Result<()> {
    if k.rows() > shape.height || k.cols() > shape.width {
        return Err(Error::dims(
            format!("kernel no larger than image {shape}"),
            format!("{}x{} kernel", k.cols(), k.rows()),
        ));
    }
    Ok(())
}

/// `out[i, j] = sum_{p, q} k[p, q] * x[(i + cr - p) mod H, (j + cc - q) mod W]`
fn circular_convolve(x: &Image, k: &Kernel) -> Image {
    let (h, w) = (x.height() as isize, x.width() as isize);
    let (cr, cc) = ((k.rows() / 2) as isize, (k.cols() / 2) as isize);
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    for p in 0..k.rows() {
        let dr = cr - p as isize;
        for q in 0..k.cols() {
            let tap = k.tap(p, q);
            if tap == 0.0 {
                continue;
            }
            // source column for output column j is (j + dc) mod W
            let dc = (cc - q as isize).rem_euclid(w) as usize;
            for i in 0..h {
                let si = (i + dr).rem_euclid(h) as usize;
                let src_row = &src[si * w as usize..(si + 1) * w as usize];
                let out_row = &mut out[i as usize * w as usize..(i as usize + 1) * w as usize];
                let split = w as usize - dc;
                for (o, s) in out_row[..split].iter_mut().zip(&src_row[dc..]) {
                    *o += tap * s;
                }
                for (o, s) in out_row[split..].iter_mut().zip(&src_row[..dc]) {
                    *o += tap * s;
                }
            }
        }
    }
    Image::from_raw(x.shape(), out)
}

/// Circular convolution of `x` with `k`; output has the shape of `x`.
pub fn conv2d_forward(x: &Image, k: &Kernel) -> Result<Image> {
    check_kernel_fits(k, x.shape())?;
    Ok(circular_convolve(x, k))
}

/// Adjoint of [`conv2d_forward`]: circular correlation with `k`.
pub fn conv2d_adjoint(u: &Image, k: &Kernel) -> Result<Image> {
    check_kernel_fits(k, u.shape())?;
    Ok(circular_convolve(u, &k.flipped()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, shape: Shape) -> Image {
        Image::from_fn(shape, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Direct double loop over output pixels and kernel taps.
    fn brute_force_conv(x: &Image, k: &Kernel) -> Image {
        let (h, w) = (x.height(), x.width());
        let (cr, cc) = (k.rows() / 2, k.cols() / 2);
        Image::from_fn(x.shape(), |i, j| {
            let mut acc = 0.0;
            for p in 0..k.rows() {
                for q in 0..k.cols() {
                    let si = (i + h + cr - p) % h;
                    let sj = (j + w + cc - q) % w;
                    acc += k.tap(p, q) * x.get(si, sj);
                }
            }
            acc
        })
    }

    #[test]
    fn identity_kernel_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_image(&mut rng, Shape::new(5, 4));
        assert_eq!(conv2d_forward(&x, &Kernel::identity()).unwrap(), x);
        assert_eq!(conv2d_adjoint(&x, &Kernel::identity()).unwrap(), x);
    }

    #[test]
    fn constant_image_is_preserved() {
        let x = Image::filled(Shape::new(12, 10), 3.5);
        let k = Kernel::gaussian(9, 1.6).unwrap();
        let y = conv2d_forward(&x, &k).unwrap();
        assert!(y.max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn impulse_wraps_kernel_around_origin() {
        let mut data = vec![0.0; 16];
        data[0] = 1.0;
        let x = Image::new(4, 4, data).unwrap();
        let k = Kernel::uniform(3).unwrap();
        let y = conv2d_forward(&x, &k).unwrap();
        let oracle = brute_force_conv(&x, &k);
        assert!(y.max_abs_diff(&oracle).unwrap() < 1e-15);
        // rows/cols {3, 0, 1} receive 1/9, the rest zero
        for i in 0..4 {
            for j in 0..4 {
                let hit = [3, 0, 1].contains(&i) && [3, 0, 1].contains(&j);
                let expected = if hit { 1.0 / 9.0 } else { 0.0 };
                assert!((y.get(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn matches_brute_force_on_random_asymmetric_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(w, h, kr, kc) in &[(8, 8, 3, 3), (7, 5, 5, 3), (32, 32, 9, 9), (9, 9, 9, 9)] {
            let x = random_image(&mut rng, Shape::new(w, h));
            let taps: Vec<f64> = (0..kr * kc).map(|_| rng.random_range(0.0..1.0)).collect();
            let k = Kernel::normalized(kr, kc, taps).unwrap();
            let fast = conv2d_forward(&x, &k).unwrap();
            let oracle = brute_force_conv(&x, &k);
            assert!(fast.max_abs_diff(&oracle).unwrap() <= 1e-12 * (1.0 + oracle.norm_l2()));
        }
    }

    #[test]
    fn symmetric_kernel_is_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_image(&mut rng, Shape::new(16, 12));
        for k in [Kernel::uniform(9).unwrap(), Kernel::gaussian(9, 1.6).unwrap()] {
            let a = conv2d_forward(&x, &k).unwrap();
            let b = conv2d_adjoint(&x, &k).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn adjoint_inner_product_random_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shape = Shape::new(8, 8);
        let x = random_image(&mut rng, shape);
        let u = random_image(&mut rng, shape);
        let taps: Vec<f64> = (0..9).map(|_| rng.random_range(0.1..1.0)).collect();
        let k = Kernel::normalized(3, 3, taps).unwrap();
        let lhs = conv2d_forward(&x, &k).unwrap().dot(&u).unwrap();
        let rhs = x.dot(&conv2d_adjoint(&u, &k).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn kernel_larger_than_image_is_an_error() {
        let x = Image::zeros(Shape::new(4, 4));
        let k = Kernel::uniform(9).unwrap();
        assert!(matches!(conv2d_forward(&x, &k), Err(Error::Dimension { .. })));
        assert!(ConvolutionOperator::new(k, Shape::new(8, 9)).is_err());
    }

    #[test]
    fn operator_shape_mismatch() {
        let op = ConvolutionOperator::new(Kernel::uniform(3).unwrap(), Shape::new(6, 6)).unwrap();
        assert!(op.adjoint(&Image::zeros(Shape::new(5, 6))).is_err());
    }

    #[test]
    fn dense_adjoint_is_transpose() {
        let op = DenseOperator::new(
            Shape::new(1, 3),
            Shape::new(1, 2),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        let x = Image::vector(vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(op.forward(&x).unwrap().data(), &[-2.0, -2.0]);
        let u = Image::vector(vec![1.0, 1.0]).unwrap();
        assert_eq!(op.adjoint(&u).unwrap().data(), &[5.0, 7.0, 9.0]);
    }
}
