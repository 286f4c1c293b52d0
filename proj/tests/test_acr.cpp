#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adr/acr.hpp"
#include "adr/rng.hpp"
#include "oracles.hpp"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using adr::Mat;

namespace {

// zero-padded one-hot blocks for the stacking oracle: task i's targets sit in
// its own slice of the full class range
Mat padded_targets(const Mat& y, Eigen::Index offset, Eigen::Index total) {
    Mat full = Mat::Zero(y.rows(), total);
    full.middleCols(offset, y.cols()) = y;
    return full;
}

}  // namespace

TEST_CASE("feature buffer construction") {
    const adr::FeatureBuffer id = adr::make_feature_buffer(6, 1, 3);
    CHECK(id.out_dim() == 6);
    CHECK(id.w_psi.size() == 0);

    const adr::FeatureBuffer b4 = adr::make_feature_buffer(6, 4, 3);
    CHECK(b4.w_psi.rows() == 6);
    CHECK(b4.w_psi.cols() == 24);
    CHECK(b4.out_dim() == 24);

    const adr::FeatureBuffer again = adr::make_feature_buffer(6, 4, 3);
    CHECK(oracle::frob_norm(b4.w_psi - again.w_psi) == 0.0);
    const adr::FeatureBuffer other = adr::make_feature_buffer(6, 4, 4);
    CHECK(oracle::frob_norm(b4.w_psi - other.w_psi) > 0.0);

    // entries ~ N(0, 1/d): sample std close to 1/sqrt(6)
    const double sd = std::sqrt(b4.w_psi.array().square().mean());
    CHECK(sd > 0.5 / std::sqrt(6.0));
    CHECK(sd < 2.0 / std::sqrt(6.0));

    CHECK_THROWS_AS(adr::make_feature_buffer(0, 2, 1), adr::ShapeError);
    CHECK_THROWS_AS(adr::make_feature_buffer(6, 0, 1), adr::ShapeError);
}

TEST_CASE("expand") {
    adr::Rng rng(9);
    const Mat h = oracle::random_matrix(5, 6, rng);

    const adr::FeatureBuffer id = adr::make_feature_buffer(6, 1, 0);
    CHECK(oracle::frob_norm(adr::expand(id, h) - h) == 0.0);

    const adr::FeatureBuffer b2 = adr::make_feature_buffer(6, 2, 7);
    const Mat out = adr::expand(b2, h);
    CHECK(out.rows() == 5);
    CHECK(out.cols() == 12);
    Mat want = oracle::naive_matmul(h, b2.w_psi);
    for (Eigen::Index i = 0; i < want.rows(); ++i)
        for (Eigen::Index j = 0; j < want.cols(); ++j) want(i, j) = std::max(0.0, want(i, j));
    CHECK(oracle::rel_frob_err(out, want) < 1e-13);
    CHECK(out.minCoeff() >= 0.0);

    CHECK(adr::expand(b2, Mat::Zero(3, 6)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(adr::expand(b2, Mat::Zero(3, 5)), adr::ShapeError);
}

TEST_CASE("one_hot_targets column order follows the class set") {
    const std::vector<int> labels = {4, 2, 4, 7};
    const Mat y = adr::one_hot_targets(labels, {0, 1, 3}, {2, 4, 7});
    CHECK(y.rows() == 3);
    CHECK(y.cols() == 3);
    CHECK(y(0, 1) == 1.0);  // label 4 -> column of class 4
    CHECK(y(1, 0) == 1.0);
    CHECK(y(2, 2) == 1.0);
    CHECK(y.sum() == 3.0);
    CHECK_THROWS_AS(adr::one_hot_targets(labels, {0, 1, 2, 3}, {2, 4}), adr::ShapeError);
}

TEST_CASE("classifier bank accumulation") {
    adr::ClassifierMemoryBank bank = adr::make_classifier_bank(3);
    CHECK(bank.empty());
    bank = adr::update_classifier_bank(std::move(bank), Mat::Identity(3, 3), Mat::Identity(3, 3),
                                       {0, 1, 2});
    CHECK(oracle::frob_norm(bank.r_phi - Mat::Identity(3, 3)) == 0.0);
    CHECK(oracle::frob_norm(bank.q_phi - Mat::Identity(3, 3)) == 0.0);
    CHECK(bank.seen_classes == std::vector<int>{0, 1, 2});

    // class reuse across tasks is a contract violation
    CHECK_THROWS_AS(
        adr::update_classifier_bank(bank, Mat::Identity(3, 3), Mat::Identity(3, 3), {2, 3, 4}),
        adr::ShapeError);

    // sequential updates equal one stacked update
    adr::Rng rng(12);
    const Mat h1 = oracle::random_matrix(9, 4, rng);
    const Mat h2 = oracle::random_matrix(7, 4, rng);
    const Mat y1 = adr::one_hot_targets({0, 1, 0, 1, 1, 0, 0, 1, 0},
                                        {0, 1, 2, 3, 4, 5, 6, 7, 8}, {0, 1});
    const Mat y2 =
        adr::one_hot_targets({2, 3, 3, 2, 2, 3, 2}, {0, 1, 2, 3, 4, 5, 6}, {2, 3});

    adr::ClassifierMemoryBank seq = adr::make_classifier_bank(4);
    seq = adr::update_classifier_bank(std::move(seq), h1, y1, {0, 1});
    seq = adr::update_classifier_bank(std::move(seq), h2, y2, {2, 3});
    CHECK(seq.q_phi.cols() == 4);

    Mat h_all(16, 4);
    h_all << h1, h2;
    Mat y_all(16, 4);
    y_all << padded_targets(y1, 0, 4), padded_targets(y2, 2, 4);
    adr::ClassifierMemoryBank once = adr::make_classifier_bank(4);
    once = adr::update_classifier_bank(std::move(once), h_all, y_all, {0, 1, 2, 3});
    CHECK(oracle::rel_frob_err(seq.r_phi, once.r_phi) < 1e-12);
    CHECK(oracle::rel_frob_err(seq.q_phi, once.q_phi) < 1e-12);

    CHECK_THROWS_AS(adr::update_classifier_bank(seq, oracle::random_matrix(3, 5, rng),
                                                Mat::Identity(3, 3), {7, 8, 9}),
                    adr::ShapeError);
}

TEST_CASE("reconstruct_classifier equals the joint solve over cached features") {
    // identity pinned case, gamma = 0 allowed because R is PD
    adr::ClassifierMemoryBank idbank = adr::make_classifier_bank(3);
    idbank = adr::update_classifier_bank(std::move(idbank), Mat::Identity(3, 3),
                                         Mat::Identity(3, 3), {0, 1, 2});
    CHECK(oracle::frob_norm(adr::reconstruct_classifier(idbank, 0.0) - Mat::Identity(3, 3)) <
          1e-12);

    // multi-task streams vs explicitly stacked caches
    adr::Rng rng(77);
    for (int trial = 0; trial < 8; ++trial) {
        const int d = 4 + static_cast<int>(rng.uniform_int(5));
        const int tasks = 2 + static_cast<int>(rng.uniform_int(3));
        const int per_task = 2;
        adr::ClassifierMemoryBank bank = adr::make_classifier_bank(d);
        std::vector<Mat> hs, ys;
        int next_class = 0;
        for (int t = 0; t < tasks; ++t) {
            const int rows = 6 + static_cast<int>(rng.uniform_int(20));
            const Mat h = oracle::random_matrix(rows, d, rng);
            std::vector<int> labels, row_ids, classes;
            for (int c = 0; c < per_task; ++c) classes.push_back(next_class + c);
            for (int r = 0; r < rows; ++r) {
                labels.push_back(classes[static_cast<std::size_t>(
                    rng.uniform_int(static_cast<std::uint64_t>(per_task)))]);
                row_ids.push_back(r);
            }
            const Mat y = adr::one_hot_targets(labels, row_ids, classes);
            bank = adr::update_classifier_bank(std::move(bank), h, y, classes);
            hs.push_back(h);
            ys.push_back(padded_targets(y, next_class, tasks * per_task));
            next_class += per_task;
        }
        const double gamma = trial % 2 == 0 ? 1e-3 : 1e-1;
        const Mat got = adr::reconstruct_classifier(bank, gamma);

        // pad cached targets to the final width before stacking
        std::vector<Mat> ys_full;
        for (const Mat& y : ys) {
            Mat full = Mat::Zero(y.rows(), next_class);
            full.leftCols(y.cols()) = y;
            ys_full.push_back(full);
        }
        const Mat want = oracle::stacked_ridge(hs, ys_full, gamma);
        CHECK(oracle::rel_frob_err(got, want) < 1e-9);

        // identical argmax on the cached embeddings
        int agree = 0;
        int total = 0;
        for (const Mat& h : hs) {
            const Mat sa = h * got;
            const Mat sb = h * want;
            for (Eigen::Index v = 0; v < sa.rows(); ++v) {
                Eigen::Index ia, ib;
                sa.row(v).maxCoeff(&ia);
                sb.row(v).maxCoeff(&ib);
                agree += ia == ib;
                ++total;
            }
        }
        CHECK(agree == total);
    }

    CHECK_THROWS_AS(adr::reconstruct_classifier(adr::make_classifier_bank(3), 1e-3),
                    adr::ShapeError);
}

TEST_CASE("predict") {
    // identity encoder so scores are a pure function of the features
    adr::GcnModel enc = adr::init_model({2, 2}, 2, 0.0, 1);
    enc.layer_weights[0] = Mat::Identity(2, 2);
    const adr::NormalizedAdjacency iso = adr::normalize(adr::make_sparse_graph(4, {}));
    Mat x(4, 2);
    x << 3, 0, 2.5, 0, 0, 4, 0, 1;  // rows 0,1 lean class A; rows 2,3 class B
    const adr::FeatureBuffer id = adr::make_feature_buffer(2, 1, 0);

    // single seen class: everything maps to it
    const std::vector<int> one =
        adr::predict(enc, id, Mat::Ones(2, 1), {6}, x, iso);
    CHECK(one == std::vector<int>{6, 6, 6, 6});

    // orthogonal two-class split recovers labels
    Mat w(2, 2);
    w << 1, 0, 0, 1;
    CHECK(adr::predict(enc, id, w, {0, 1}, x, iso) == std::vector<int>{0, 0, 1, 1});

    // exact ties resolve to the lowest class id regardless of column order
    Mat tied(2, 2);
    tied << 1, 1, 1, 1;
    CHECK(adr::predict(enc, id, tied, {5, 2}, x, iso) == std::vector<int>{2, 2, 2, 2});

    CHECK_THROWS_AS(adr::predict(enc, id, w, {0, 1, 2}, x, iso), adr::ShapeError);
}

TEST_CASE("argmax is stable across the regularization grid on separated data") {
    // margin-2 synthetic embeddings, classes 0/1
    adr::Rng rng(41);
    Mat h(30, 4);
    std::vector<int> labels(30), rows(30);
    for (int v = 0; v < 30; ++v) {
        const int c = v % 2;
        labels[static_cast<std::size_t>(v)] = c;
        rows[static_cast<std::size_t>(v)] = v;
        for (int j = 0; j < 4; ++j)
            h(v, j) = 0.1 * rng.normal() + (j == c ? 2.0 : 0.0);
    }
    adr::ClassifierMemoryBank bank = adr::make_classifier_bank(4);
    bank = adr::update_classifier_bank(std::move(bank), h,
                                       adr::one_hot_targets(labels, rows, {0, 1}), {0, 1});
    std::vector<int> prev;
    for (const double gamma : {1e-3, 1e-2, 1e-1}) {
        const Mat w = adr::reconstruct_classifier(bank, gamma);
        std::vector<int> pred(30);
        const Mat scores = h * w;
        for (int v = 0; v < 30; ++v) pred[static_cast<std::size_t>(v)] =
            scores(v, 0) >= scores(v, 1) ? 0 : 1;
        if (!prev.empty()) CHECK(pred == prev);
        prev = std::move(pred);
        CHECK(prev == labels);
    }
}

TEST_CASE("bank keeps aggregates, not rows") {
    adr::Rng rng(15);
    const Mat h = oracle::random_matrix(25, 4, rng);
    const Mat y = adr::one_hot_targets(std::vector<int>(25, 0), [] {
        std::vector<int> r(25);
        for (int i = 0; i < 25; ++i) r[static_cast<std::size_t>(i)] = i;
        return r;
    }(), {0});

    adr::ClassifierMemoryBank a = adr::make_classifier_bank(4);
    a = adr::update_classifier_bank(std::move(a), h, y, {0});
    adr::ClassifierMemoryBank b = adr::make_classifier_bank(4);
    b = adr::update_classifier_bank(std::move(b), h.colwise().reverse().eval(),
                                    y.colwise().reverse().eval(), {0});
    CHECK(oracle::rel_frob_err(a.r_phi, b.r_phi) < 1e-10);
    CHECK(oracle::rel_frob_err(a.q_phi, b.q_phi) < 1e-10);
    // and r has no more than d directions to give back
    CHECK(adr::spectral_sanity(a.r_phi).psd);
}

TEST_CASE("classifier bank checkpoint round-trips") {
    adr::Rng rng(18);
    const adr::FeatureBuffer buf = adr::make_feature_buffer(5, 2, 99);
    adr::ClassifierMemoryBank bank = adr::make_classifier_bank(buf.out_dim());
    const Mat h = adr::expand(buf, oracle::random_matrix(12, 5, rng));
    std::vector<int> labels(12), rows(12);
    for (int i = 0; i < 12; ++i) {
        labels[static_cast<std::size_t>(i)] = 3 + i % 2;
        rows[static_cast<std::size_t>(i)] = i;
    }
    bank = adr::update_classifier_bank(std::move(bank), h,
                                       adr::one_hot_targets(labels, rows, {3, 4}), {3, 4});

    const fs::path dir = fs::temp_directory_path() / ("adr_cbank_" + std::to_string(std::rand()));
    adr::save_classifier_bank(dir, bank, buf);
    const auto [back, rebuilt] = adr::load_classifier_bank(dir);
    CHECK(back.seen_classes == bank.seen_classes);
    CHECK(oracle::frob_norm(back.r_phi - bank.r_phi) == 0.0);
    CHECK(oracle::frob_norm(back.q_phi - bank.q_phi) == 0.0);
    CHECK(rebuilt.alpha == 2);
    CHECK(oracle::frob_norm(rebuilt.w_psi - buf.w_psi) == 0.0);
    fs::remove_all(dir);
    CHECK_THROWS_AS(adr::load_classifier_bank(dir), adr::IoError);
}
