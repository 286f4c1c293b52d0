#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adr/datasets.hpp"
#include "adr/rng.hpp"
#include "oracles.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using adr::Mat;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("adr_ds_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

adr::RawDataset small_dataset() {
    adr::RawDataset ds;
    ds.features.resize(5, 3);
    ds.features << 0.25, -1, 2, 0.5, 0, 1, 1.0 / 3.0, 4, 5, 6, 7, 8, 9, 10, 11;
    ds.labels = {0, 0, 1, 1, 2};
    ds.class_count = 3;
    ds.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
    return ds;
}

}  // namespace

TEST_CASE("ceil_frac") {
    CHECK(adr::ceil_frac(0.6, 10) == 6);
    CHECK(adr::ceil_frac(0.2, 10) == 2);
    CHECK(adr::ceil_frac(0.6, 7) == 5);   // 4.2 -> 5
    CHECK(adr::ceil_frac(0.2, 7) == 2);   // 1.4 -> 2
    CHECK(adr::ceil_frac(0.6, 1) == 1);
    CHECK(adr::ceil_frac(1.0, 9) == 9);   // guard: 9.000000000000002 must not become 10
    CHECK(adr::ceil_frac(0.1, 30) == 3);  // 0.1*30 = 3.0000000000000004
}

TEST_CASE("dataset save/load round-trips exactly") {
    TempDir tmp;
    const adr::RawDataset ds = small_dataset();
    adr::save_dataset(tmp.path, ds);
    const adr::RawDataset back = adr::load_dataset(tmp.path);
    CHECK(back.num_nodes() == 5);
    CHECK(back.class_count == 3);
    CHECK(back.labels == ds.labels);
    CHECK(back.edges == ds.edges);
    CHECK(oracle::frob_norm(back.features - ds.features) == 0.0);
}

TEST_CASE("load_dataset rejects malformed input with file and line") {
    TempDir tmp;
    write_file(tmp.path / "features.tsv", "1\t2\n3\n");
    write_file(tmp.path / "labels.tsv", "0\n0\n");
    write_file(tmp.path / "edges.tsv", "");
    try {
        adr::load_dataset(tmp.path);
        FAIL("expected ParseError");
    } catch (const adr::ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("features.tsv") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }

    write_file(tmp.path / "features.tsv", "1\t2\n3\t4\n");
    write_file(tmp.path / "labels.tsv", "0\n-1\n");
    CHECK_THROWS_AS(adr::load_dataset(tmp.path), adr::ParseError);

    write_file(tmp.path / "labels.tsv", "0\n1\n");
    write_file(tmp.path / "edges.tsv", "0\t9\n");
    CHECK_THROWS_AS(adr::load_dataset(tmp.path), adr::ParseError);

    CHECK_THROWS_AS(adr::load_dataset(tmp.path / "missing"), adr::IoError);
}

TEST_CASE("generate_sbm shape, labels and determinism") {
    adr::SbmSpec spec;
    spec.blocks = {30, 30, 30};
    spec.p_intra = 0.2;
    spec.p_inter = 0.02;
    spec.feature_dim = 8;
    spec.feature_shift = 2.0;
    spec.seed = 5;

    const adr::RawDataset a = adr::generate_sbm(spec);
    CHECK(a.num_nodes() == 90);
    CHECK(a.class_count == 3);
    CHECK(a.features.cols() == 8);
    for (int v = 0; v < 90; ++v) CHECK(a.labels[static_cast<std::size_t>(v)] == v / 30);

    std::size_t intra = 0;
    std::size_t inter = 0;
    for (auto [s, d] : a.edges)
        (a.labels[static_cast<std::size_t>(s)] == a.labels[static_cast<std::size_t>(d)] ? intra
                                                                                        : inter)++;
    // 3 * C(30,2) * 0.2 ~ 261 intra, 3 * 900 * 0.02 = 54 inter
    CHECK(intra > 150);
    CHECK(inter < 150);
    CHECK(intra > inter);

    // class-conditional mean shows up on the hot dimension
    double on = 0.0;
    double off = 0.0;
    for (int v = 0; v < 90; ++v) {
        const int hot = a.labels[static_cast<std::size_t>(v)] % 8;
        for (int j = 0; j < 8; ++j)
            (j == hot ? on : off) += a.features(v, j);
    }
    CHECK(on / 90.0 > 1.5);
    CHECK(std::abs(off / (90.0 * 7.0)) < 0.5);

    const adr::RawDataset b = adr::generate_sbm(spec);
    CHECK(oracle::frob_norm(a.features - b.features) == 0.0);
    CHECK(a.edges == b.edges);

    spec.seed = 6;
    const adr::RawDataset c = adr::generate_sbm(spec);
    CHECK(a.edges != c.edges);
}

TEST_CASE("build_task_stream schedules classes and splits per ratio") {
    adr::SbmSpec sbm;
    sbm.blocks = {20, 20, 20, 20, 20, 20};
    sbm.feature_dim = 4;
    sbm.seed = 13;
    const adr::RawDataset ds = adr::generate_sbm(sbm);

    adr::TaskStreamSpec spec;
    spec.base_classes = 2;
    spec.increment_classes = 2;
    spec.seed = 3;

    const std::vector<adr::TaskGraph> tasks = adr::build_task_stream(ds, spec);
    REQUIRE(tasks.size() == 3);
    CHECK(tasks[0].classes == std::vector<int>{0, 1});
    CHECK(tasks[1].classes == std::vector<int>{2, 3});
    CHECK(tasks[2].classes == std::vector<int>{4, 5});
    for (const adr::TaskGraph& tg : tasks) {
        CHECK(tg.num_nodes() == 40);
        // 6:2:2 on each 20-node class
        const auto train = tg.nodes_with_split(adr::Split::train);
        const auto val = tg.nodes_with_split(adr::Split::val);
        const auto test = tg.nodes_with_split(adr::Split::test);
        CHECK(train.size() == 24);
        CHECK(val.size() == 8);
        CHECK(test.size() == 8);
        // per class exactly 12/4/4
        for (int c : tg.classes) {
            int n_train = 0;
            for (int v : train)
                if (tg.labels[static_cast<std::size_t>(v)] == c) ++n_train;
            CHECK(n_train == 12);
        }
    }

    // disjoint label spaces
    std::set<int> seen;
    for (const adr::TaskGraph& tg : tasks)
        for (int c : tg.classes) CHECK(seen.insert(c).second);

    // deterministic
    const std::vector<adr::TaskGraph> again = adr::build_task_stream(ds, spec);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        CHECK(tasks[t].orig_ids == again[t].orig_ids);
        CHECK(tasks[t].split == again[t].split);
    }
}

TEST_CASE("prefix stream equals full-stream prefix bit for bit") {
    adr::SbmSpec sbm;
    sbm.blocks = {15, 15, 15, 15, 15, 15, 15, 15};
    sbm.feature_dim = 4;
    sbm.seed = 21;
    const adr::RawDataset ds = adr::generate_sbm(sbm);

    adr::TaskStreamSpec spec;
    spec.base_classes = 2;
    spec.increment_classes = 2;
    spec.seed = 9;

    const std::vector<adr::TaskGraph> full = adr::build_task_stream(ds, spec);
    REQUIRE(full.size() == 4);
    for (int last = 0; last < 4; ++last) {
        const std::vector<adr::TaskGraph> pre = adr::build_task_stream_prefix(ds, spec, last);
        REQUIRE(pre.size() == static_cast<std::size_t>(last) + 1);
        for (int t = 0; t <= last; ++t) {
            CHECK(pre[static_cast<std::size_t>(t)].classes ==
                  full[static_cast<std::size_t>(t)].classes);
            CHECK(pre[static_cast<std::size_t>(t)].split ==
                  full[static_cast<std::size_t>(t)].split);
            CHECK(pre[static_cast<std::size_t>(t)].orig_ids ==
                  full[static_cast<std::size_t>(t)].orig_ids);
        }
    }
    CHECK_THROWS_AS(adr::build_task_stream_prefix(ds, spec, 4), adr::ShapeError);
}

TEST_CASE("shuffled schedule permutes classes deterministically") {
    adr::SbmSpec sbm;
    sbm.blocks = {10, 10, 10, 10, 10, 10};
    sbm.feature_dim = 4;
    sbm.seed = 2;
    const adr::RawDataset ds = adr::generate_sbm(sbm);

    adr::TaskStreamSpec spec;
    spec.seed = 77;
    spec.shuffle_classes = true;
    const std::vector<adr::TaskGraph> a = adr::build_task_stream(ds, spec);
    const std::vector<adr::TaskGraph> b = adr::build_task_stream(ds, spec);
    std::set<int> all;
    for (const adr::TaskGraph& tg : a)
        for (int c : tg.classes) all.insert(c);
    CHECK(all == std::set<int>{0, 1, 2, 3, 4, 5});
    for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t].classes == b[t].classes);
}

TEST_CASE("stream spec validation") {
    adr::SbmSpec sbm;
    sbm.blocks = {10, 10, 10};
    sbm.feature_dim = 4;
    const adr::RawDataset ds = adr::generate_sbm(sbm);

    adr::TaskStreamSpec spec;
    spec.base_classes = 2;
    spec.increment_classes = 2;  // 3 classes: 2 + 2k never hits 3
    CHECK_THROWS_AS(adr::build_task_stream(ds, spec), adr::ShapeError);

    spec.increment_classes = 1;
    CHECK_NOTHROW(adr::build_task_stream(ds, spec));

    spec.base_classes = 0;
    CHECK_THROWS_AS(adr::build_task_stream(ds, spec), adr::ShapeError);

    spec.base_classes = 2;
    spec.split_ratio = {0.5, 0.2, 0.2};
    CHECK_THROWS_AS(adr::build_task_stream(ds, spec), adr::ShapeError);
}
