//! Linear-algebra and series kernels: cosine distances, the SVD-based
//! pseudoinverse, Gaussian smoothing, curvature and L-curve corners.

mod distance;
mod linalg;
mod matrix;
mod series;

pub use distance::{cosine_distance, mean_column_cosine_distance};
pub use linalg::{
    default_rcond, min_norm_solution, min_norm_solution_matrix, pseudoinverse, Pseudoinverse,
};
pub use matrix::{dot, norm, DenseMatrix, DenseVector};
pub use series::{
    curvature_series, detect_corner, detect_corner_masked, gaussian_smooth, CornerConfig,
    CornerMethod, Series,
};
