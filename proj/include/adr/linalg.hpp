#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace adr {

/// Row-major double matrix, the workhorse type for features, weights and
/// memory banks. Row-major so serialized bytes match in-memory layout.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Regularized least-squares system (R + gamma*I) W = Q built from
/// accumulated autocorrelation R and cross-correlation Q statistics.
struct RidgeProblem {
    Mat R;
    Mat Q;
    double gamma = 0.0;

    /// Validates shape, symmetry (1e-10 relative) and gamma >= 0.
    RidgeProblem(Mat r, Mat q, double g);
};

/// Returns R + X^T X. The result is exactly symmetric when R is.
Mat gram_accumulate(const Mat& R, const Mat& X);

/// Returns Q + X^T T.
Mat cross_accumulate(const Mat& Q, const Mat& X, const Mat& T);

/// Solves (R + gamma*I) W = Q by Cholesky factorization. On a failed
/// factorization retries once with jitter gamma + 1e-10*trace(R)/d,
/// then throws SingularError.
Mat ridge_solve(const RidgeProblem& p);

/// Symmetry / positive-semidefiniteness report for a square matrix.
/// Pivots are those of an unblocked semidefinite Cholesky over the lower
/// triangle; exact rank deficiency (zero pivot with a zero residual column,
/// e.g. a gram matrix of rank-deficient data) still counts as psd.
struct SpectralReport {
    double max_asymmetry = 0.0;
    double min_pivot = 0.0;
    bool psd = false;
};

SpectralReport spectral_sanity(const Mat& A);

/// Binary matrix file: 8-byte LE row count, 8-byte LE col count, then
/// rows*cols little-endian IEEE-754 doubles in row-major order.
void save_matrix(const std::string& path, const Mat& m);
Mat load_matrix(const std::string& path);

/// FNV-1a over the serialized byte stream (dims + data).
std::uint64_t matrix_checksum(const Mat& m);

}  // namespace adr
