#include "adr/encoder.hpp"

#include "adr/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace adr {

namespace {

Mat seeded_uniform(Eigen::Index rows, Eigen::Index cols, double scale, std::uint64_t seed) {
    Rng rng(seed);
    Mat w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-scale, scale);
    return w;
}

}  // namespace

GcnModel init_model(const std::vector<int>& layer_dims, int num_classes, double dropout,
                    std::uint64_t seed) {
    if (layer_dims.size() < 2) throw ShapeError("init_model: need at least input and output dims");
    for (int d : layer_dims)
        if (d < 1) throw ShapeError("init_model: nonpositive layer dim");
    if (num_classes < 1) throw ShapeError("init_model: need at least one class");
    if (dropout < 0.0 || dropout >= 1.0) throw ShapeError("init_model: dropout outside [0,1)");

    GcnModel m;
    m.dropout_rate = dropout;
    m.init_seed = seed;
    for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(layer_dims[k]));
        m.layer_weights.push_back(seeded_uniform(layer_dims[k], layer_dims[k + 1], scale,
                                                 mix_seed(seed, static_cast<std::uint64_t>(k))));
    }
    const double cscale = 1.0 / std::sqrt(static_cast<double>(layer_dims.back()));
    m.classifier = seeded_uniform(layer_dims.back(), num_classes, cscale,
                                  mix_seed(seed, static_cast<std::uint64_t>(layer_dims.size())));
    return m;
}

void grow_classifier(GcnModel& model, int num_classes) {
    const Eigen::Index old_cols = model.classifier.cols();
    if (num_classes <= old_cols) return;
    model.classifier.conservativeResize(Eigen::NoChange, num_classes);
    model.classifier.rightCols(num_classes - old_cols).setZero();
}

TappedForward forward_tapped(const GcnModel& model, const Mat& x, const NormalizedAdjacency& adj,
                             bool train_mode, std::uint64_t dropout_seed) {
    if (x.cols() != model.input_dim())
        throw ShapeError("forward: feature dim " + std::to_string(x.cols()) + " != model input " +
                         std::to_string(model.input_dim()));

    TappedForward tap;
    tap.train_mode = train_mode;
    const int K = model.num_layers();
    const double p = model.dropout_rate;
    Rng drop_rng(mix_seed(dropout_seed, 0x6d61736bULL));

    Mat cur = x;
    for (int k = 0; k < K; ++k) {
        Mat agg = propagate(adj, cur);
        Mat pre = agg * model.layer_weights[static_cast<std::size_t>(k)];
        Mat post = pre.cwiseMax(0.0);
        if (train_mode) {
            Mat mask(post.rows(), post.cols());
            const double keep_scale = p > 0.0 ? 1.0 / (1.0 - p) : 1.0;
            for (Eigen::Index i = 0; i < mask.rows(); ++i)
                for (Eigen::Index j = 0; j < mask.cols(); ++j)
                    mask(i, j) = (p > 0.0 && drop_rng.uniform() < p) ? 0.0 : keep_scale;
            post = post.cwiseProduct(mask);
            tap.dropout_masks.push_back(std::move(mask));
        }
        tap.agg_inputs.push_back(std::move(agg));
        tap.pre_acts.push_back(std::move(pre));
        cur = std::move(post);
    }
    tap.h_final = std::move(cur);
    tap.logits = tap.h_final * model.classifier;
    return tap;
}

TappedForward forward_tapped(const GcnModel& model, const TaskGraph& tg, bool train_mode,
                             std::uint64_t dropout_seed) {
    return forward_tapped(model, tg.features, tg.norm_adj, train_mode, dropout_seed);
}

namespace {

std::vector<int> column_of_class(const std::vector<int>& class_cols, Eigen::Index logit_cols) {
    std::vector<int> col_of;
    int max_c = 0;
    for (int c : class_cols) max_c = std::max(max_c, c);
    col_of.assign(static_cast<std::size_t>(max_c) + 1, -1);
    for (int c : class_cols) {
        if (c < 0 || c >= logit_cols)
            throw ShapeError("class id " + std::to_string(c) + " outside classifier width " +
                             std::to_string(logit_cols));
        col_of[static_cast<std::size_t>(c)] = c;
    }
    return col_of;
}

}  // namespace

double cross_entropy_loss(const Mat& logits, const std::vector<int>& labels,
                          const std::vector<int>& mask, const std::vector<int>& class_cols) {
    if (mask.empty()) throw ShapeError("cross_entropy_loss: empty mask");
    if (class_cols.empty()) throw ShapeError("cross_entropy_loss: empty class set");
    const auto col_of = column_of_class(class_cols, logits.cols());

    double total = 0.0;
    for (int v : mask) {
        if (v < 0 || v >= logits.rows()) throw ShapeError("cross_entropy_loss: node out of range");
        const int y = labels[static_cast<std::size_t>(v)];
        if (y < 0 || static_cast<std::size_t>(y) >= col_of.size() ||
            col_of[static_cast<std::size_t>(y)] < 0)
            throw ShapeError("cross_entropy_loss: label " + std::to_string(y) +
                             " not in current task classes");
        double mx = -std::numeric_limits<double>::infinity();
        for (int c : class_cols) mx = std::max(mx, logits(v, c));
        double sum = 0.0;
        for (int c : class_cols) sum += std::exp(logits(v, c) - mx);
        total += mx + std::log(sum) - logits(v, y);
    }
    return total / static_cast<double>(mask.size());
}

Gradients backward(const GcnModel& model, const NormalizedAdjacency& adj,
                   const TappedForward& tapped, const std::vector<int>& labels,
                   const std::vector<int>& mask, const std::vector<int>& class_cols,
                   double loss_scale) {
    if (mask.empty()) throw ShapeError("backward: empty mask");
    if (!tapped.train_mode || tapped.dropout_masks.size() != tapped.pre_acts.size())
        throw ShapeError("backward: tap lacks dropout masks (needs a train-mode forward)");
    const auto col_of = column_of_class(class_cols, tapped.logits.cols());
    const int K = model.num_layers();

    // d loss / d logits: softmax minus one-hot on masked rows, task columns only.
    Mat dlogits = Mat::Zero(tapped.logits.rows(), tapped.logits.cols());
    const double w = loss_scale / static_cast<double>(mask.size());
    for (int v : mask) {
        const int y = labels[static_cast<std::size_t>(v)];
        if (y < 0 || static_cast<std::size_t>(y) >= col_of.size() ||
            col_of[static_cast<std::size_t>(y)] < 0)
            throw ShapeError("backward: label " + std::to_string(y) + " not in current task classes");
        double mx = -std::numeric_limits<double>::infinity();
        for (int c : class_cols) mx = std::max(mx, tapped.logits(v, c));
        double sum = 0.0;
        for (int c : class_cols) sum += std::exp(tapped.logits(v, c) - mx);
        for (int c : class_cols) {
            const double p = std::exp(tapped.logits(v, c) - mx) / sum;
            dlogits(v, c) = (p - (c == y ? 1.0 : 0.0)) * w;
        }
    }

    Gradients g;
    g.layer_grads.resize(static_cast<std::size_t>(K));
    g.classifier_grad = tapped.h_final.transpose() * dlogits;

    Mat dpost = dlogits * model.classifier.transpose();
    for (int k = K - 1; k >= 0; --k) {
        const auto ku = static_cast<std::size_t>(k);
        Mat dpre = dpost.cwiseProduct(tapped.dropout_masks[ku])
                       .cwiseProduct((tapped.pre_acts[ku].array() > 0.0).cast<double>().matrix());
        g.layer_grads[ku] = tapped.agg_inputs[ku].transpose() * dpre;
        if (k > 0) dpost = propagate_adjoint(adj, dpre * model.layer_weights[ku].transpose());
    }
    return g;
}

GcnModel adapt_task(GcnModel model, const TaskGraph& tg, const AdaptConfig& cfg) {
    std::vector<int> train_nodes = tg.nodes_with_split(Split::train);
    if (train_nodes.empty()) throw ShapeError("adapt_task: empty training mask");
    if (cfg.epochs < 0 || cfg.batch_size < 1) throw ShapeError("adapt_task: bad epoch/batch config");

    int max_class = 0;
    for (int c : tg.classes) max_class = std::max(max_class, c);
    grow_classifier(model, max_class + 1);

    std::vector<Mat> m1, m2;
    for (const Mat& w : model.layer_weights) {
        m1.push_back(Mat::Zero(w.rows(), w.cols()));
        m2.push_back(Mat::Zero(w.rows(), w.cols()));
    }
    Mat c1 = Mat::Zero(model.classifier.rows(), model.classifier.cols());
    Mat c2 = c1;

    const auto adam_step = [&](Mat& w, Mat& m, Mat& v, const Mat& grad, long step) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        w.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
    };

    Rng shuffle_rng(mix_seed(cfg.seed, 0x73687566ULL));
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(train_nodes);
        for (std::size_t off = 0; off < train_nodes.size();
             off += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(train_nodes.size(), off + static_cast<std::size_t>(cfg.batch_size));
            const std::vector<int> batch(train_nodes.begin() + static_cast<std::ptrdiff_t>(off),
                                         train_nodes.begin() + static_cast<std::ptrdiff_t>(end));
            ++step;
            const TappedForward tap = forward_tapped(
                model, tg, true, mix_seed(cfg.seed, 0x64726f70ULL + static_cast<std::uint64_t>(step)));
            const Gradients g = backward(model, tg.norm_adj, tap, tg.labels, batch, tg.classes);
            for (int k = 0; k < model.num_layers(); ++k) {
                const auto ku = static_cast<std::size_t>(k);
                adam_step(model.layer_weights[ku], m1[ku], m2[ku], g.layer_grads[ku], step);
            }
            adam_step(model.classifier, c1, c2, g.classifier_grad, step);
        }
    }
    return model;
}

void save_model(const std::filesystem::path& dir, const GcnModel& model) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    std::vector<long long> dims;
    dims.push_back(static_cast<long long>(model.input_dim()));
    for (const Mat& w : model.layer_weights) dims.push_back(static_cast<long long>(w.cols()));
    manifest["layer_dims"] = dims;
    manifest["classes"] = static_cast<long long>(model.num_classes());
    manifest["activation"] = "relu";
    manifest["dropout"] = model.dropout_rate;
    manifest["init_seed"] = model.init_seed;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';

    for (int k = 0; k < model.num_layers(); ++k)
        save_matrix(dir / ("w" + std::to_string(k) + ".bin"),
                    model.layer_weights[static_cast<std::size_t>(k)]);
    save_matrix(dir / "classifier.bin", model.classifier);
}

GcnModel load_model(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad model manifest: " + std::string(e.what()));
    }
    const auto dims = manifest.at("layer_dims").get<std::vector<long long>>();
    if (dims.size() < 2) throw IoError("bad model manifest: layer_dims too short");

    GcnModel model;
    model.dropout_rate = manifest.at("dropout").get<double>();
    model.init_seed = manifest.value("init_seed", 0ULL);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        Mat w = load_matrix(dir / ("w" + std::to_string(k) + ".bin"));
        if (w.rows() != dims[k] || w.cols() != dims[k + 1])
            throw IoError("model layer " + std::to_string(k) + " dims disagree with manifest");
        model.layer_weights.push_back(std::move(w));
    }
    model.classifier = load_matrix(dir / "classifier.bin");
    if (model.classifier.rows() != dims.back() ||
        model.classifier.cols() != manifest.at("classes").get<long long>())
        throw IoError("model classifier dims disagree with manifest");
    return model;
}

}  // namespace adr
