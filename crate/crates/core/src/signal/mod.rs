//! Images, blur kernels, measurement operators, quality metrics and file I/O.

pub mod image;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod operator;

pub use self::image::{Image, Shape};
pub use self::kernel::{make_kernel, Kernel, KernelSpec};
pub use self::metrics::{psnr, PSNR_CAP_DB};
pub use self::operator::{
    conv2d_adjoint, conv2d_forward, ConvolutionOperator, DenseOperator, IdentityOperator,
    LinearOperator,
};
