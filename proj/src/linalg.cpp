#include "adr/linalg.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

static_assert(std::endian::native == std::endian::little,
              "matrix serialization assumes a little-endian host");

namespace adr {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace

RidgeProblem::RidgeProblem(Mat r, Mat q, double g)
    : R(std::move(r)), Q(std::move(q)), gamma(g) {
    require(R.rows() == R.cols(), "RidgeProblem: R must be square");
    require(R.rows() == Q.rows(), "RidgeProblem: R and Q row counts differ");
    if (gamma < 0.0) throw ShapeError("RidgeProblem: gamma must be nonnegative");
    if (R.size() > 0) {
        double scale = std::max(1.0, R.cwiseAbs().maxCoeff());
        double asym = (R - R.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-10 * scale)
            throw ShapeError("RidgeProblem: R is not symmetric");
    }
}

Mat gram_accumulate(const Mat& R, const Mat& X) {
    require(R.rows() == R.cols(), "gram_accumulate: R must be square");
    require(X.cols() == R.rows(), "gram_accumulate: X column count must match R");
    const Eigen::Index d = R.rows();
    Mat gram = Mat::Zero(d, d);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    return R + gram;
}

Mat cross_accumulate(const Mat& Q, const Mat& X, const Mat& T) {
    require(X.rows() == T.rows(), "cross_accumulate: X and T row counts differ");
    require(Q.rows() == X.cols(), "cross_accumulate: Q rows must match X columns");
    require(Q.cols() == T.cols(), "cross_accumulate: Q cols must match T columns");
    return Q + X.transpose() * T;
}

Mat ridge_solve(const RidgeProblem& p) {
    const Eigen::Index d = p.R.rows();
    Mat a = p.R;
    a.diagonal().array() += p.gamma;
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success) {
        double jitter = d > 0 ? 1e-10 * p.R.trace() / static_cast<double>(d) : 0.0;
        a.diagonal().array() += jitter;
        llt.compute(a);
        if (llt.info() != Eigen::Success)
            throw SingularError("ridge_solve: system not positive definite after jitter");
    }
    Mat w = llt.solve(p.Q);
    if (!w.allFinite())
        throw SingularError("ridge_solve: non-finite solution");
    return w;
}

SpectralReport spectral_sanity(const Mat& A) {
    require(A.rows() == A.cols(), "spectral_sanity: matrix must be square");
    SpectralReport rep;
    const Eigen::Index n = A.rows();
    if (n == 0) {
        rep.psd = true;
        rep.min_pivot = std::numeric_limits<double>::infinity();
        return rep;
    }
    rep.max_asymmetry = (A - A.transpose()).cwiseAbs().maxCoeff();

    // Semidefinite Cholesky over the lower triangle. A zero pivot is fine as
    // long as the remaining column is zero too (the row is spanned by earlier
    // ones); a nonzero residual under a zero pivot means an indefinite minor.
    const double scale = std::max(1.0, A.diagonal().cwiseAbs().maxCoeff());
    const double pivot_tol = 1e-12 * scale;
    const double residual_tol = 1e-6 * scale;  // |c| <= sqrt(pivot_tol * scale)

    Mat l = Mat::Zero(n, n);
    rep.psd = true;
    rep.min_pivot = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n && rep.psd; ++i) {
        const double pivot = A(i, i) - l.row(i).head(i).squaredNorm();
        rep.min_pivot = std::min(rep.min_pivot, pivot);
        if (pivot < -pivot_tol) {
            rep.psd = false;
            break;
        }
        if (pivot <= pivot_tol) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double residual = A(j, i) - l.row(j).head(i).dot(l.row(i).head(i));
                if (std::abs(residual) > residual_tol) {
                    rep.psd = false;
                    break;
                }
            }
            continue;  // l(i, i) and the column stay zero
        }
        l(i, i) = std::sqrt(pivot);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            l(j, i) = (A(j, i) - l.row(j).head(i).dot(l.row(i).head(i))) / l(i, i);
        }
    }
    return rep;
}

void save_matrix(const std::string& path, const Mat& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_matrix: cannot open " + path);
    std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!out) throw IoError("save_matrix: write failed for " + path);
}

Mat load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_matrix: cannot open " + path);
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    if (!in) throw IoError("load_matrix: truncated header in " + path);
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw IoError("load_matrix: truncated data in " + path);
    return m;
}

std::uint64_t matrix_checksum(const Mat& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const unsigned char* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    feed(reinterpret_cast<const unsigned char*>(&rows), 8);
    feed(reinterpret_cast<const unsigned char*>(&cols), 8);
    feed(reinterpret_cast<const unsigned char*>(m.data()), sizeof(double) * m.size());
    return h;
}

}  // namespace adr
