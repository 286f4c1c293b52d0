#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adr/linalg.hpp"
#include "adr/rng.hpp"
#include "oracles.hpp"

#include <cstdio>
#include <filesystem>

using adr::Mat;

TEST_CASE("gram_accumulate basics") {
    Mat r = Mat::Zero(2, 2);
    Mat x = Mat::Identity(2, 2);
    CHECK(oracle::rel_frob_err(adr::gram_accumulate(r, x), Mat::Identity(2, 2)) == 0.0);

    Mat r1 = Mat::Identity(2, 2);
    Mat x1(1, 2);
    x1 << 1.0, 0.0;
    Mat want(2, 2);
    want << 2.0, 0.0, 0.0, 1.0;
    CHECK(oracle::rel_frob_err(adr::gram_accumulate(r1, x1), want) == 0.0);

    CHECK_THROWS_AS(adr::gram_accumulate(Mat::Zero(2, 2), Mat::Zero(3, 3)), adr::ShapeError);
}

TEST_CASE("gram accumulation over chunks equals one-shot stacking") {
    adr::Rng rng(42);
    Mat x = oracle::random_matrix(5, 3, rng);
    Mat chunked = adr::gram_accumulate(Mat::Zero(3, 3), x.topRows(2));
    chunked = adr::gram_accumulate(chunked, x.bottomRows(3));
    Mat whole = oracle::naive_matmul(x.transpose(), x);
    CHECK(oracle::frob_norm(chunked - whole) < 1e-12);
}

TEST_CASE("cross_accumulate basics and chunking") {
    CHECK(oracle::rel_frob_err(
              adr::cross_accumulate(Mat::Zero(2, 2), Mat::Identity(2, 2), Mat::Identity(2, 2)),
              Mat::Identity(2, 2)) == 0.0);

    Mat x(2, 2);
    x << 2.0, 0.0, 0.0, 2.0;
    CHECK(oracle::rel_frob_err(adr::cross_accumulate(Mat::Zero(2, 2), x, Mat::Identity(2, 2)),
                               2.0 * Mat::Identity(2, 2)) == 0.0);

    adr::Rng rng(7);
    Mat xs = oracle::random_matrix(6, 3, rng);
    Mat ts = oracle::random_matrix(6, 4, rng);
    Mat chunked = adr::cross_accumulate(Mat::Zero(3, 4), xs.topRows(4), ts.topRows(4));
    chunked = adr::cross_accumulate(chunked, xs.bottomRows(2), ts.bottomRows(2));
    CHECK(oracle::frob_norm(chunked - oracle::naive_matmul(xs.transpose(), ts)) < 1e-12);

    CHECK_THROWS_AS(adr::cross_accumulate(Mat::Zero(3, 4), xs, ts.topRows(4)), adr::ShapeError);
}

TEST_CASE("ridge_solve pinned instances") {
    Mat i2 = Mat::Identity(2, 2);
    CHECK(oracle::rel_frob_err(adr::ridge_solve(adr::RidgeProblem(i2, i2, 1.0)), 0.5 * i2) <
          1e-15);
    CHECK(oracle::rel_frob_err(adr::ridge_solve(adr::RidgeProblem(i2, i2, 0.0)), i2) < 1e-15);
}

TEST_CASE("ridge_solve matches Gauss-Jordan inverse on random full-rank systems") {
    adr::Rng rng(123);
    for (int trial = 0; trial < 10; ++trial) {
        Mat x = oracle::random_matrix(12, 6, rng);
        Mat r = oracle::naive_matmul(x.transpose(), x);
        Mat q = oracle::random_matrix(6, 4, rng);
        const double gamma = 0.1;
        Mat got = adr::ridge_solve(adr::RidgeProblem(r, q, gamma));
        Mat want = oracle::naive_ridge(r, q, gamma);
        CHECK(oracle::rel_frob_err(got, want) < 1e-9);

        // residual bound from the contract
        Mat lhs = r;
        lhs.diagonal().array() += gamma;
        CHECK(oracle::frob_norm(oracle::naive_matmul(lhs, got) - q) /
                  std::max(1.0, oracle::frob_norm(q)) <
              1e-8);
    }
}

TEST_CASE("ridge_solve minimizes the stacked objective") {
    adr::Rng rng(321);
    Mat x = oracle::random_matrix(20, 5, rng);
    Mat t = oracle::random_matrix(20, 3, rng);
    const double gamma = 0.05;
    Mat r = oracle::naive_matmul(x.transpose(), x);
    Mat q = oracle::naive_matmul(x.transpose(), t);
    Mat w = adr::ridge_solve(adr::RidgeProblem(r, q, gamma));

    const auto objective = [&](const Mat& cand) {
        const double fit = oracle::frob_norm(t - oracle::naive_matmul(x, cand));
        const double reg = oracle::frob_norm(cand);
        return fit * fit + gamma * reg * reg;
    };
    const double at_w = objective(w);
    for (double eps : {1e-3, 1e-4}) {
        for (int trial = 0; trial < 5; ++trial) {
            Mat delta = oracle::random_matrix(w.rows(), w.cols(), rng);
            CHECK(objective(w + eps * delta) >= at_w);
        }
    }
}

TEST_CASE("ridge_solve determinism and error paths") {
    adr::Rng rng(5);
    Mat x = oracle::random_matrix(10, 4, rng);
    Mat r = oracle::naive_matmul(x.transpose(), x);
    Mat q = oracle::random_matrix(4, 2, rng);
    Mat a = adr::ridge_solve(adr::RidgeProblem(r, q, 0.3));
    Mat b = adr::ridge_solve(adr::RidgeProblem(r, q, 0.3));
    CHECK(a == b);

    // PSD-singular R with gamma=0 is rescued by the single jitter retry
    Mat singular = Mat::Zero(3, 3);
    singular(0, 0) = 1.0;
    CHECK_NOTHROW(adr::ridge_solve(adr::RidgeProblem(singular, Mat::Zero(3, 2), 0.0)));

    // indefinite R stays unsolvable after the retry
    Mat indefinite(2, 2);
    indefinite << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(adr::ridge_solve(adr::RidgeProblem(indefinite, Mat::Zero(2, 2), 0.0)),
                    adr::SingularError);

    // asymmetric R is rejected at construction
    Mat asym(2, 2);
    asym << 0.0, 1.0, -1.0, 0.0;
    CHECK_THROWS_AS(adr::RidgeProblem(asym, Mat::Zero(2, 2), 1.0), adr::ShapeError);
}

TEST_CASE("spectral_sanity") {
    const adr::SpectralReport id = adr::spectral_sanity(Mat::Identity(3, 3));
    CHECK(id.max_asymmetry == 0.0);
    CHECK(id.min_pivot == doctest::Approx(1.0));
    CHECK(id.psd);

    Mat anti(2, 2);
    anti << 0.0, 1.0, -1.0, 0.0;
    const adr::SpectralReport bad = adr::spectral_sanity(anti);
    CHECK(bad.max_asymmetry == 2.0);
    CHECK_FALSE(bad.psd);

    adr::Rng rng(99);
    Mat x = oracle::random_matrix(8, 5, rng);
    const adr::SpectralReport gram = adr::spectral_sanity(adr::gram_accumulate(Mat::Zero(5, 5), x));
    CHECK(gram.max_asymmetry < 1e-12);
    CHECK(gram.psd);

    // gram of rank-deficient data (dead feature column): singular but psd
    Mat xz = x;
    xz.col(2).setZero();
    const adr::SpectralReport thin = adr::spectral_sanity(adr::gram_accumulate(Mat::Zero(5, 5), xz));
    CHECK(thin.psd);
    CHECK(thin.min_pivot == doctest::Approx(0.0).epsilon(1e-12));

    // zero pivot hiding a nonzero cross term: indefinite, must fail
    Mat indef(2, 2);
    indef << 0.0, 0.5, 0.5, 1.0;
    CHECK_FALSE(adr::spectral_sanity(indef).psd);

    Mat negdef = -Mat::Identity(2, 2);
    CHECK_FALSE(adr::spectral_sanity(negdef).psd);
}

TEST_CASE("matrix file round-trip and checksum") {
    adr::Rng rng(2024);
    Mat m = oracle::random_matrix(7, 3, rng);
    const auto file = std::filesystem::temp_directory_path() / "adr_test_matrix.bin";
    adr::save_matrix(file, m);
    Mat back = adr::load_matrix(file);
    CHECK(back == m);
    CHECK(adr::matrix_checksum(back) == adr::matrix_checksum(m));

    Mat other = m;
    other(0, 0) += 1e-9;
    CHECK(adr::matrix_checksum(other) != adr::matrix_checksum(m));
    std::filesystem::remove(file);

    CHECK_THROWS_AS(adr::load_matrix("/nonexistent/adr.bin"), adr::IoError);
}
