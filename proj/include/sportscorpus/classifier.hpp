#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sportscorpus/corpus.hpp"
#include "sportscorpus/util.hpp"

namespace sportscorpus::classifier {

using json = nlohmann::json;

// ---- featurizer ----
// Hashed n-gram bag of words: lowercase, split on Unicode whitespace, hash
// each n-gram with FNV-1a 64 reduced modulo hash_dimension. The hash is
// pinned so feature vectors are bit-identical across platforms. Any other
// text -> vector map can stand in behind the same sparse-vector contract.

enum class Normalization { l2, none };

struct FeaturizerConfig {
    std::uint32_t hash_dimension = 1u << 18;
    std::vector<int> ngram_orders = {1, 2};
    Normalization normalization = Normalization::l2;

    void validate() const {
        if (hash_dimension < 2 || (hash_dimension & (hash_dimension - 1)) != 0)
            throw Error("config", "hash_dimension must be a power of two >= 2");
        if (ngram_orders.empty()) throw Error("config", "ngram_orders must be non-empty");
        for (int n : ngram_orders)
            if (n < 1) throw Error("config", "ngram orders must be >= 1");
    }
};

// Sparse feature vector, sorted by index.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

namespace detail {

inline std::vector<std::string> whitespace_tokens_lower(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::uint32_t cp = 0;
        std::size_t len = decode_utf8(text, pos, cp);
        if (is_unicode_space(cp)) {
            if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
        } else {
            for (std::size_t i = 0; i < len; ++i) {
                char c = text[pos + i];
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
                current.push_back(c);
            }
        }
        pos += len;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace detail

inline SparseVector featurize(std::string_view text, const FeaturizerConfig& cfg) {
    cfg.validate();
    const std::uint64_t mask = cfg.hash_dimension - 1;
    std::vector<std::string> tokens = detail::whitespace_tokens_lower(text);
    std::map<std::uint32_t, double> counts;  // ordered: deterministic output
    for (int order : cfg.ngram_orders) {
        if (tokens.size() < static_cast<std::size_t>(order)) continue;
        for (std::size_t i = 0; i + static_cast<std::size_t>(order) <= tokens.size(); ++i) {
            std::uint64_t h = kFnv64Offset;
            for (int k = 0; k < order; ++k) {
                if (k > 0) h = fnv1a64(std::string_view("\x1f", 1), h);
                h = fnv1a64(tokens[i + static_cast<std::size_t>(k)], h);
            }
            counts[static_cast<std::uint32_t>(h & mask)] += 1.0;
        }
    }
    SparseVector features(counts.begin(), counts.end());
    if (cfg.normalization == Normalization::l2 && !features.empty()) {
        double sq = 0.0;
        for (const auto& [idx, v] : features) sq += v * v;
        double norm = std::sqrt(sq);
        for (auto& [idx, v] : features) v /= norm;
    }
    return features;
}

// ---- model ----

struct ClassifierModel {
    std::vector<double> weights;  // length == featurizer.hash_dimension
    double bias = 0.0;
    FeaturizerConfig featurizer;
    double threshold = 0.5;

    void validate() const {
        featurizer.validate();
        if (weights.size() != featurizer.hash_dimension)
            throw Error("data", "model weight vector length does not match hash_dimension");
        for (double w : weights)
            if (!std::isfinite(w)) throw Error("data", "model contains non-finite weight");
        if (!std::isfinite(bias)) throw Error("data", "model bias is non-finite");
        if (!(threshold >= 0.0 && threshold <= 1.0))
            throw Error("data", "threshold outside [0,1]");
    }

    static ClassifierModel zeros(FeaturizerConfig cfg, double threshold = 0.5) {
        cfg.validate();
        ClassifierModel m;
        m.weights.assign(cfg.hash_dimension, 0.0);
        m.featurizer = std::move(cfg);
        m.threshold = threshold;
        return m;
    }
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double predict_features(const ClassifierModel& model, const SparseVector& features) {
    double z = model.bias;
    for (const auto& [idx, v] : features) z += model.weights[idx] * v;
    if (!std::isfinite(z))
        throw Error("data", "non-finite score: model is corrupted");
    return sigmoid(z);
}

// Probability that `text` is in-domain (class 1).
inline double predict(const ClassifierModel& model, std::string_view text) {
    return predict_features(model, featurize(text, model.featurizer));
}

inline bool classify(const ClassifierModel& model, std::string_view text) {
    return predict(model, text) >= model.threshold;
}

// ---- training ----

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 3e-4;
    int batch_size = 32;
    std::uint64_t shuffle_seed = 0;

    void validate() const {
        if (epochs < 1) throw Error("config", "epochs must be >= 1");
        if (!(learning_rate > 0.0) && learning_rate != 0.0)
            throw Error("config", "learning_rate must be >= 0");
        if (batch_size < 1) throw Error("config", "batch_size must be >= 1");
    }
};

struct LabeledExample {
    std::string text;
    int label = 0;  // 1 = in-domain
};

struct TrainResult {
    ClassifierModel model;
    double initial_loss = 0.0;
    std::vector<double> epoch_losses;
};

namespace detail {

struct PreparedExample {
    SparseVector features;
    double label;
    std::uint64_t content_hash;
    const std::string* text;
};

// Mean binary cross-entropy over prepared examples, accumulated in the given
// index order. Probabilities are clamped away from 0/1 for the log only.
inline double mean_bce(const ClassifierModel& model, std::span<const PreparedExample> examples,
                       std::span<const std::size_t> order) {
    constexpr double eps = 1e-12;
    double total = 0.0;
    for (std::size_t i : order) {
        double p = predict_features(model, examples[i].features);
        p = std::min(1.0 - eps, std::max(eps, p));
        total += -(examples[i].label * std::log(p) + (1.0 - examples[i].label) * std::log(1.0 - p));
    }
    return total / static_cast<double>(order.size());
}

// Content-based total order. Batches are accumulated in this order so the
// resulting float sums do not depend on how the caller arranged the data.
inline void sort_canonical(std::vector<std::size_t>& idx,
                           std::span<const PreparedExample> examples) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = examples[a];
        const auto& eb = examples[b];
        if (ea.content_hash != eb.content_hash) return ea.content_hash < eb.content_hash;
        if (ea.label != eb.label) return ea.label < eb.label;
        return *ea.text < *eb.text;
    });
}

}  // namespace detail

// Mini-batch gradient descent on mean binary cross-entropy. Deterministic
// given shuffle_seed: the shuffle and every accumulation order are pinned.
inline TrainResult train(std::span<const LabeledExample> data, const TrainConfig& cfg,
                         const FeaturizerConfig& fcfg) {
    cfg.validate();
    fcfg.validate();
    if (data.empty()) throw Error("data", "training data is empty");
    bool saw[2] = {false, false};
    for (const auto& ex : data) {
        if (ex.label != 0 && ex.label != 1)
            throw Error("data", "label must be 0 or 1, got " + std::to_string(ex.label));
        saw[ex.label] = true;
    }
    if (!saw[0] || !saw[1])
        throw Error("data", "training data contains a single class; need both labels");

    std::vector<detail::PreparedExample> examples;
    examples.reserve(data.size());
    for (const auto& ex : data)
        examples.push_back({featurize(ex.text, fcfg), static_cast<double>(ex.label),
                            fnv1a64(ex.text), &ex.text});

    TrainResult result;
    result.model = ClassifierModel::zeros(fcfg);
    std::vector<double>& w = result.model.weights;
    double& bias = result.model.bias;

    std::vector<std::size_t> full_order(examples.size());
    for (std::size_t i = 0; i < full_order.size(); ++i) full_order[i] = i;
    detail::sort_canonical(full_order, examples);
    result.initial_loss = detail::mean_bce(result.model, examples, full_order);

    std::mt19937_64 rng(cfg.shuffle_seed);
    std::vector<std::size_t> order(full_order.begin(), full_order.end());
    std::vector<double> grad(fcfg.hash_dimension, 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<std::size_t> batch;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        std::size_t n_batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++n_batches) {
            std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
            detail::sort_canonical(batch, examples);

            double batch_loss = 0.0;
            double grad_bias = 0.0;
            touched.clear();
            for (std::size_t i : batch) {
                const auto& ex = examples[i];
                double z = bias;
                for (const auto& [idx, v] : ex.features) z += w[idx] * v;
                if (!std::isfinite(z))
                    throw Error("data", "non-finite loss in epoch " + std::to_string(epoch + 1) +
                                            ", batch " + std::to_string(n_batches + 1));
                double p = sigmoid(z);
                constexpr double eps = 1e-12;
                double pc = std::min(1.0 - eps, std::max(eps, p));
                batch_loss += -(ex.label * std::log(pc) + (1.0 - ex.label) * std::log(1.0 - pc));
                double g = p - ex.label;
                grad_bias += g;
                for (const auto& [idx, v] : ex.features) {
                    if (grad[idx] == 0.0) touched.push_back(idx);
                    grad[idx] += g * v;
                }
            }
            if (!std::isfinite(batch_loss))
                throw Error("data", "non-finite loss in epoch " + std::to_string(epoch + 1) +
                                        ", batch " + std::to_string(n_batches + 1));
            const double step = cfg.learning_rate / static_cast<double>(batch.size());
            std::sort(touched.begin(), touched.end());
            for (std::uint32_t idx : touched) {
                w[idx] -= step * grad[idx];
                grad[idx] = 0.0;
            }
            bias -= step * grad_bias;
        }
        result.epoch_losses.push_back(detail::mean_bce(result.model, examples, full_order));
    }
    return result;
}

// Analytic gradient of mean BCE at the model's current parameters; used by
// the finite-difference check. Returns d/dw (dense) and d/dbias.
inline std::pair<std::vector<double>, double> bce_gradient(
    const ClassifierModel& model, std::span<const LabeledExample> data) {
    if (data.empty()) throw Error("data", "gradient of empty dataset");
    std::vector<double> grad_w(model.weights.size(), 0.0);
    double grad_b = 0.0;
    for (const auto& ex : data) {
        SparseVector f = featurize(ex.text, model.featurizer);
        double g = predict_features(model, f) - static_cast<double>(ex.label);
        grad_b += g;
        for (const auto& [idx, v] : f) grad_w[idx] += g * v;
    }
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (double& g : grad_w) g *= inv_n;
    return {std::move(grad_w), grad_b * inv_n};
}

inline double mean_bce_loss(const ClassifierModel& model, std::span<const LabeledExample> data) {
    if (data.empty()) throw Error("data", "loss of empty dataset");
    constexpr double eps = 1e-12;
    double total = 0.0;
    for (const auto& ex : data) {
        double p = predict(model, ex.text);
        p = std::min(1.0 - eps, std::max(eps, p));
        total += -(ex.label * std::log(p) + (1.0 - ex.label) * std::log(1.0 - p));
    }
    return total / static_cast<double>(data.size());
}

// ---- evaluation ----

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct Averages {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    std::array<ClassMetrics, 2> per_class;  // index = class label
    double accuracy = 0.0;
    Averages macro_avg;
    Averages weighted_avg;
    std::uint64_t total_support = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline void finalize_averages(MetricsReport& r) {
    r.total_support = r.per_class[0].support + r.per_class[1].support;
    if (r.total_support == 0) throw Error("data", "metrics over zero samples");
    const double w0 = static_cast<double>(r.per_class[0].support);
    const double w1 = static_cast<double>(r.per_class[1].support);
    const double total = w0 + w1;
    r.macro_avg = {(r.per_class[0].precision + r.per_class[1].precision) / 2.0,
                   (r.per_class[0].recall + r.per_class[1].recall) / 2.0,
                   (r.per_class[0].f1 + r.per_class[1].f1) / 2.0};
    r.weighted_avg = {(w0 * r.per_class[0].precision + w1 * r.per_class[1].precision) / total,
                      (w0 * r.per_class[0].recall + w1 * r.per_class[1].recall) / total,
                      (w0 * r.per_class[0].f1 + w1 * r.per_class[1].f1) / total};
}

}  // namespace detail

// Builds a report from binary confusion counts (class 1 = positive).
// A class with zero predicted positives gets precision 0 plus a warning.
inline MetricsReport metrics_from_confusion(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                            std::uint64_t tn) {
    MetricsReport r;
    auto fill = [&](int cls, std::uint64_t correct, std::uint64_t predicted,
                    std::uint64_t actual) {
        ClassMetrics& m = r.per_class[cls];
        m.support = actual;
        if (predicted == 0) {
            m.precision = 0.0;
            r.warnings.push_back("class " + std::to_string(cls) +
                                 " has zero predicted positives; precision reported as 0");
        } else {
            m.precision = static_cast<double>(correct) / static_cast<double>(predicted);
        }
        m.recall = actual == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(actual);
        m.f1 = (m.precision + m.recall) == 0.0
                   ? 0.0
                   : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    };
    fill(1, tp, tp + fp, tp + fn);
    fill(0, tn, tn + fn, tn + fp);
    std::uint64_t total = tp + fp + fn + tn;
    if (total == 0) throw Error("data", "metrics over zero samples");
    r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
    detail::finalize_averages(r);
    return r;
}

// Builds the summary rows from per-class values alone (e.g. replaying a
// published report). Accuracy is recovered as the support-weighted recall.
inline MetricsReport metrics_from_per_class(const ClassMetrics& class0,
                                            const ClassMetrics& class1) {
    MetricsReport r;
    r.per_class = {class0, class1};
    const double total =
        static_cast<double>(class0.support) + static_cast<double>(class1.support);
    if (total == 0.0) throw Error("data", "metrics over zero samples");
    r.accuracy = (class0.recall * static_cast<double>(class0.support) +
                  class1.recall * static_cast<double>(class1.support)) /
                 total;
    detail::finalize_averages(r);
    return r;
}

inline MetricsReport evaluate(const ClassifierModel& model, std::span<const LabeledExample> data) {
    if (data.empty()) throw Error("data", "evaluation data is empty");
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& ex : data) {
        if (ex.label != 0 && ex.label != 1)
            throw Error("data", "label must be 0 or 1, got " + std::to_string(ex.label));
        bool predicted = predict(model, ex.text) >= model.threshold;
        if (predicted && ex.label == 1) ++tp;
        else if (predicted && ex.label == 0) ++fp;
        else if (!predicted && ex.label == 1) ++fn;
        else ++tn;
    }
    return metrics_from_confusion(tp, fp, fn, tn);
}

inline json metrics_to_json(const MetricsReport& r) {
    json per_class = json::object();
    for (int cls = 0; cls < 2; ++cls)
        per_class[std::to_string(cls)] = {{"precision", r.per_class[cls].precision},
                                          {"recall", r.per_class[cls].recall},
                                          {"f1", r.per_class[cls].f1},
                                          {"support", r.per_class[cls].support}};
    return json{{"per_class", per_class},
                {"accuracy", r.accuracy},
                {"macro_avg",
                 {{"precision", r.macro_avg.precision},
                  {"recall", r.macro_avg.recall},
                  {"f1", r.macro_avg.f1}}},
                {"weighted_avg",
                 {{"precision", r.weighted_avg.precision},
                  {"recall", r.weighted_avg.recall},
                  {"f1", r.weighted_avg.f1}}},
                {"total_support", r.total_support},
                {"warnings", r.warnings}};
}

// Plain-text report: per-class rows, accuracy, macro and weighted averages.
inline std::string render_metrics(const MetricsReport& r) {
    char buf[160];
    std::string out = "              precision    recall  f1-score   support\n\n";
    for (int cls = 0; cls < 2; ++cls) {
        const auto& m = r.per_class[cls];
        std::snprintf(buf, sizeof(buf), "%12d %10.2f %9.2f %9.2f %9llu\n", cls, m.precision,
                      m.recall, m.f1, static_cast<unsigned long long>(m.support));
        out += buf;
    }
    out += "\n";
    std::snprintf(buf, sizeof(buf), "%12s %10s %9s %9.2f %9llu\n", "accuracy", "", "", r.accuracy,
                  static_cast<unsigned long long>(r.total_support));
    out += buf;
    std::snprintf(buf, sizeof(buf), "%12s %10.2f %9.2f %9.2f %9llu\n", "macro avg",
                  r.macro_avg.precision, r.macro_avg.recall, r.macro_avg.f1,
                  static_cast<unsigned long long>(r.total_support));
    out += buf;
    std::snprintf(buf, sizeof(buf), "%12s %10.2f %9.2f %9.2f %9llu\n", "weighted avg",
                  r.weighted_avg.precision, r.weighted_avg.recall, r.weighted_avg.f1,
                  static_cast<unsigned long long>(r.total_support));
    out += buf;
    for (const auto& w : r.warnings) out += "warning: " + w + "\n";
    return out;
}

// ---- model file ----
// JSON with the hash function named in the header; weights are a dense array.

inline constexpr const char* kModelFormat = "sportscorpus.classifier";
inline constexpr std::uint32_t kModelVersion = 1;

inline json model_to_json(const ClassifierModel& model) {
    model.validate();
    return json{{"format", kModelFormat},
                {"version", kModelVersion},
                {"hash_function", "fnv1a64"},
                {"featurizer",
                 {{"hash_dimension", model.featurizer.hash_dimension},
                  {"ngram_orders", model.featurizer.ngram_orders},
                  {"normalization",
                   model.featurizer.normalization == Normalization::l2 ? "l2" : "none"}}},
                {"threshold", model.threshold},
                {"bias", model.bias},
                {"weights", model.weights}};
}

inline ClassifierModel model_from_json(const json& j) {
    ClassifierModel m;
    try {
        if (j.at("format").get<std::string>() != kModelFormat)
            throw Error("format", "not a classifier model file");
        if (j.at("version").get<std::uint32_t>() != kModelVersion)
            throw Error("format", "unsupported model version");
        if (j.at("hash_function").get<std::string>() != "fnv1a64")
            throw Error("format", "unsupported hash function");
        const json& f = j.at("featurizer");
        m.featurizer.hash_dimension = f.at("hash_dimension").get<std::uint32_t>();
        m.featurizer.ngram_orders = f.at("ngram_orders").get<std::vector<int>>();
        std::string norm = f.at("normalization").get<std::string>();
        if (norm == "l2") m.featurizer.normalization = Normalization::l2;
        else if (norm == "none") m.featurizer.normalization = Normalization::none;
        else throw Error("format", "unknown normalization \"" + norm + "\"");
        m.threshold = j.at("threshold").get<double>();
        m.bias = j.at("bias").get<double>();
        m.weights = j.at("weights").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error("format", std::string("bad model file: ") + e.what());
    }
    m.validate();
    return m;
}

inline void save_model(const ClassifierModel& model, const std::string& path) {
    write_text_file(path, model_to_json(model).dump() + "\n");
}

inline ClassifierModel load_model(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error("format", path + ": malformed model JSON: " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const Error& e) {
        throw Error(e.kind(), path + ": " + e.what());
    }
}

// Training/evaluation data file: the corpus shard format plus an integer
// `label` field on every line.
inline std::vector<LabeledExample> load_training_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    std::vector<LabeledExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim_view(line).empty()) continue;
        corpus::WebRecord rec = corpus::detail::record_from_line(line, line_no, path);
        json j = json::parse(line);
        auto it = j.find("label");
        if (it == j.end())
            throw Error("format", path + ": line " + std::to_string(line_no) +
                                      ": missing required field \"label\"");
        if (!it->is_number_integer())
            throw Error("format", path + ": line " + std::to_string(line_no) +
                                      ": field \"label\" must be an integer");
        int label = it->get<int>();
        if (label != 0 && label != 1)
            throw Error("format",
                        path + ": line " + std::to_string(line_no) + ": label must be 0 or 1");
        out.push_back({std::move(rec.text), label});
    }
    if (in.bad()) throw Error("io", "read failed for " + path);
    return out;
}

}  // namespace sportscorpus::classifier
