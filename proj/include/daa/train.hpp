#pragma once

// Desk-scale training of the docking-aware pooling head on a synthetic binary
// task, plus a static mean-pooling baseline trained with the same optimizer.
//
// Toy task construction (per sample, CounterRng(derive_seed(seed, sample))):
//   * embeddings: n x d, entries noise * N(0, 1)
//   * four distinct residues are drawn: A, B and two decoys
//   * A gets +marker*e_1 + signal*e_0, B gets +marker*e_1 - signal*e_0,
//     each decoy gets +/- signal*e_0 with a random sign
//   * scores: background residues 0.2 * |N(0, 1)|; the class residue
//     (A for label 0, B for label 1) and both decoys high_score + 0.2 * N(0, 1)
// The embedding distribution does not depend on the label, so the row mean
// carries no class signal; only the scores say which marked residue to read,
// and only the query-key term says which high-scoring residue is marked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "daa/analysis.hpp"
#include "daa/attention.hpp"
#include "daa/ljscore.hpp"
#include "daa/rng.hpp"
#include "daa/structio.hpp"

namespace daa {

struct ToySample {
    EmbeddingMatrix embeddings;
    std::vector<double> scores;  // transformed scores; smoothing uses the model's beta
    int label = 0;
};

struct ToyTaskOptions {
    double noise = 0.4;
    double signal = 1.5;
    double marker = 1.5;
    double high_score = 3.0;
};

struct ToyTask {
    std::vector<ToySample> samples;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

inline ToyTask make_toy_task(std::size_t n_samples, std::size_t n, std::size_t d,
                             std::uint64_t seed, const ToyTaskOptions& opt = {}) {
    if (n_samples < 4 || n_samples % 2 != 0)
        throw ValidationError("toy task needs an even sample count of at least 4");
    if (n < 4) throw ValidationError("toy task needs at least 4 residues per sample");
    if (d < 2) throw ValidationError("toy task needs embedding dimension of at least 2");

    ToyTask task;
    task.seed = seed;
    const std::size_t pairs = n_samples / 2;
    const std::size_t train_pairs = (pairs + 1) / 2;
    for (std::size_t s = 0; s < n_samples; ++s) {
        CounterRng rng(derive_seed(seed, s));
        const int label = static_cast<int>(s % 2);
        Matrix e(n, d);
        for (double& v : e.values()) v = opt.noise * rng.normal();

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = 0; i < 4; ++i)
            std::swap(order[i], order[i + rng.below(n - i)]);
        const std::size_t a = order[0], b = order[1];
        const std::size_t decoys[2] = {order[2], order[3]};

        e(a, 0) += opt.signal;
        e(a, 1) += opt.marker;
        e(b, 0) -= opt.signal;
        e(b, 1) += opt.marker;
        for (std::size_t dc : decoys) e(dc, 0) += (rng.uniform() < 0.5 ? -1.0 : 1.0) * opt.signal;

        std::vector<double> scores(n);
        for (double& v : scores) v = 0.2 * std::fabs(rng.normal());
        scores[label == 0 ? a : b] = opt.high_score + 0.2 * rng.normal();
        for (std::size_t dc : decoys) scores[dc] = opt.high_score + 0.2 * rng.normal();

        task.samples.push_back({EmbeddingMatrix(std::move(e)), std::move(scores), label});
        (s / 2 < train_pairs ? task.train : task.test).push_back(s);
    }
    return task;
}

/// Copy of the task with labels permuted by a seeded shuffle.
inline ToyTask shuffle_labels(ToyTask task, std::uint64_t seed) {
    std::vector<int> labels;
    for (const auto& s : task.samples) labels.push_back(s.label);
    CounterRng rng(seed);
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);
    for (std::size_t i = 0; i < labels.size(); ++i) task.samples[i].label = labels[i];
    return task;
}

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t steps = 500;
    std::uint64_t seed = 0;
    double l2 = 0.0;
    std::size_t d_h = 4;
    std::size_t d_v = 0;  // 0 means d_v = d
    unsigned threads = 1;

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ValidationError("learning rate must be positive");
        if (!(l2 >= 0.0)) throw ValidationError("l2 must be non-negative");
        if (d_h == 0) throw ValidationError("d_h must be at least 1");
    }
};

struct MetricsRow {
    std::size_t step = 0;
    double loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct RunMetrics {
    std::vector<MetricsRow> history;  // row t: state after t updates
    std::size_t test_correct = 0;
    std::size_t test_total = 0;

    double test_accuracy() const {
        return test_total ? static_cast<double>(test_correct) / static_cast<double>(test_total) : 0.0;
    }
};

inline void write_metrics_tsv(std::ostream& os, const RunMetrics& m) {
    os << "# step\tloss\ttrain_acc\ttest_acc\n";
    for (const auto& r : m.history)
        os << r.step << '\t' << format_double(r.loss) << '\t' << format_double(r.train_accuracy)
           << '\t' << format_double(r.test_accuracy) << '\n';
}

struct DaaModel {
    DaaParams params;
    std::vector<double> head;  // d_v weights followed by the bias
    AttentionMode mode = AttentionMode::full;
};

struct TrainResult {
    DaaModel model;
    RunMetrics metrics;
};

struct StaticResult {
    std::vector<double> head;  // d weights followed by the bias
    RunMetrics metrics;
};

namespace detail {

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }
inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double head_logit(std::span<const double> head, std::span<const double> features) {
    return dot(head.first(features.size()), features) + head.back();
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers; exceptions are
/// rethrown in index order.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = count * w / workers; i < count * (w + 1) / workers; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct SampleGrad {
    double loss = 0.0;
    DaaGradients attn;
    double beta = 0.0;
    std::vector<double> head;
};

inline double params_sq_norm(const DaaModel& m) {
    double s = dot(m.params.w_query.values(), m.params.w_query.values()) +
               dot(m.params.w_key.values(), m.params.w_key.values()) +
               dot(m.params.w_value.values(), m.params.w_value.values()) +
               dot(m.params.pool_query, m.params.pool_query);
    s += dot(std::span<const double>(m.head).first(m.head.size() - 1),
             std::span<const double>(m.head).first(m.head.size() - 1));
    return s;
}

inline bool model_finite(const DaaModel& m) {
    return all_finite(m.params.w_query.values()) && all_finite(m.params.w_key.values()) &&
           all_finite(m.params.w_value.values()) && all_finite(m.params.pool_query) &&
           std::isfinite(m.params.gamma) && std::isfinite(m.params.beta) && all_finite(m.head);
}

inline void axpy(std::span<double> y, double a, std::span<const double> x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

} // namespace detail

/// Representation of one sample under a model: smooth the scores with the
/// model's beta, then pool.
inline DaaOutput model_forward(const DaaModel& model, const EmbeddingMatrix& E,
                               std::span<const double> scores) {
    const auto s_hat = smooth_scores(scores, model.params.beta);
    return attention_forward(E, s_hat, model.params, model.mode);
}

inline double model_probability(const DaaModel& model, const ToySample& s) {
    const auto out = model_forward(model, s.embeddings, s.scores);
    return detail::sigmoid(detail::head_logit(model.head, out.representation));
}

inline DaaModel init_model(std::size_t d, const TrainConfig& cfg, AttentionMode mode) {
    const std::size_t dv = cfg.d_v ? cfg.d_v : d;
    DaaModel m;
    m.params = init_params(d, cfg.d_h, dv, derive_seed(cfg.seed, 0xDAA));
    m.head.assign(dv + 1, 0.0);
    m.mode = mode;
    return m;
}

/// Mean logistic loss over the training split plus l2/2 * ||weights||^2
/// (projections, pooling query and head weights).
inline double model_loss(const DaaModel& model, const ToyTask& task, double l2 = 0.0) {
    double loss = 0.0;
    for (std::size_t idx : task.train) {
        const auto& s = task.samples[idx];
        const auto out = model_forward(model, s.embeddings, s.scores);
        const double z = detail::head_logit(model.head, out.representation);
        loss += detail::softplus(z) - s.label * z;
    }
    loss /= static_cast<double>(task.train.size());
    return loss + 0.5 * l2 * detail::params_sq_norm(model);
}

/// Gradient of model_loss. Gradients for beta, gamma and the projections are
/// only non-zero where the attention mode uses them.
struct ModelGradients {
    DaaGradients attn;
    double beta = 0.0;
    std::vector<double> head;
    double loss = 0.0;
};

inline ModelGradients model_gradients(const DaaModel& model, const ToyTask& task, double l2 = 0.0,
                                      unsigned threads = 1) {
    const std::size_t N = task.train.size();
    const double inv_n = 1.0 / static_cast<double>(N);
    std::vector<detail::SampleGrad> per(N);
    detail::parallel_for(N, threads, [&](std::size_t t) {
        const auto& s = task.samples[task.train[t]];
        const double m = mean(s.scores);
        const auto s_hat = smooth_scores(s.scores, model.params.beta);
        const auto out = attention_forward(s.embeddings, s_hat, model.params, model.mode);
        const auto& p = out.representation;
        const double z = detail::head_logit(model.head, p);
        const double dz = (detail::sigmoid(z) - s.label) * inv_n;

        auto& g = per[t];
        g.loss = (detail::softplus(z) - s.label * z) * inv_n;
        g.head.assign(model.head.size(), 0.0);
        for (std::size_t c = 0; c < p.size(); ++c) g.head[c] = dz * p[c];
        g.head.back() = dz;
        std::vector<double> upstream(p.size());
        for (std::size_t c = 0; c < p.size(); ++c) upstream[c] = dz * model.head[c];
        g.attn = attention_backward(s.embeddings, s_hat, model.params, upstream, model.mode);
        for (std::size_t i = 0; i < s.scores.size(); ++i)
            g.beta += g.attn.s_hat[i] * (s.scores[i] - m);
    });

    // Fixed-order reduction keeps results independent of the thread count.
    ModelGradients total;
    const auto& p = model.params;
    total.attn.w_query = Matrix(p.d(), p.d_h());
    total.attn.w_key = Matrix(p.d(), p.d_h());
    total.attn.w_value = Matrix(p.d(), p.d_v());
    total.attn.pool_query.assign(p.d(), 0.0);
    total.head.assign(model.head.size(), 0.0);
    for (const auto& g : per) {
        total.loss += g.loss;
        detail::axpy(total.attn.w_query.values(), 1.0, g.attn.w_query.values());
        detail::axpy(total.attn.w_key.values(), 1.0, g.attn.w_key.values());
        detail::axpy(total.attn.w_value.values(), 1.0, g.attn.w_value.values());
        detail::axpy(total.attn.pool_query, 1.0, g.attn.pool_query);
        total.attn.gamma += g.attn.gamma;
        total.beta += g.beta;
        detail::axpy(total.head, 1.0, g.head);
    }
    if (l2 > 0.0) {
        total.loss += 0.5 * l2 * detail::params_sq_norm(model);
        detail::axpy(total.attn.w_query.values(), l2, p.w_query.values());
        detail::axpy(total.attn.w_key.values(), l2, p.w_key.values());
        detail::axpy(total.attn.w_value.values(), l2, p.w_value.values());
        detail::axpy(total.attn.pool_query, l2, p.pool_query);
        detail::axpy(std::span<double>(total.head).first(total.head.size() - 1), l2,
                     std::span<const double>(model.head).first(model.head.size() - 1));
    }
    return total;
}

inline std::size_t count_correct(const DaaModel& model, const ToyTask& task,
                                 std::span<const std::size_t> split, unsigned threads = 1) {
    std::vector<char> ok(split.size(), 0);
    detail::parallel_for(split.size(), threads, [&](std::size_t t) {
        const auto& s = task.samples[split[t]];
        ok[t] = (model_probability(model, s) > 0.5 ? 1 : 0) == s.label;
    });
    return static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
}

/// Full-batch gradient descent on the logistic loss. beta is clamped to
/// [0, 1] after every update.
inline TrainResult train_daa_classifier(const ToyTask& task, const TrainConfig& cfg,
                                        AttentionMode mode = AttentionMode::full) {
    cfg.validate();
    if (task.samples.empty() || task.train.empty() || task.test.empty())
        throw ValidationError("toy task has an empty split");
    const std::size_t d = task.samples.front().embeddings.cols();
    TrainResult res;
    res.model = init_model(d, cfg, mode);
    DaaModel& model = res.model;
    const double lr = cfg.learning_rate;
    const auto n_train = static_cast<double>(task.train.size());
    const auto n_test = static_cast<double>(task.test.size());

    for (std::size_t step = 0;; ++step) {
        ModelGradients g;
        std::size_t train_ok = 0, test_ok = 0;
        try {
            g = model_gradients(model, task, cfg.l2, cfg.threads);
            train_ok = count_correct(model, task, task.train, cfg.threads);
            test_ok = count_correct(model, task, task.test, cfg.threads);
        } catch (const ValidationError& e) {
            throw DivergenceError("training diverged at step " + std::to_string(step) + ": " +
                                      e.what(),
                                  step);
        }
        if (!std::isfinite(g.loss))
            throw DivergenceError("training diverged at step " + std::to_string(step) +
                                      ": non-finite loss",
                                  step);
        res.metrics.history.push_back({step, g.loss, train_ok / n_train, test_ok / n_test});
        res.metrics.test_correct = test_ok;
        res.metrics.test_total = task.test.size();
        if (step == cfg.steps) break;

        auto& p = model.params;
        detail::axpy(p.w_query.values(), -lr, g.attn.w_query.values());
        detail::axpy(p.w_key.values(), -lr, g.attn.w_key.values());
        detail::axpy(p.w_value.values(), -lr, g.attn.w_value.values());
        detail::axpy(p.pool_query, -lr, g.attn.pool_query);
        p.gamma -= lr * g.attn.gamma;
        p.beta = std::clamp(p.beta - lr * g.beta, 0.0, 1.0);
        detail::axpy(model.head, -lr, g.head);
        if (!detail::model_finite(model))
            throw DivergenceError("training diverged at step " + std::to_string(step + 1) +
                                      ": non-finite parameters",
                                  step + 1);
    }
    return res;
}

/// Row mean of the embedding matrix: the static representation.
inline std::vector<double> mean_pool(const EmbeddingMatrix& E) {
    std::vector<double> out(E.cols(), 0.0);
    for (std::size_t i = 0; i < E.rows(); ++i) detail::axpy(out, 1.0, E.row(i));
    for (double& v : out) v /= static_cast<double>(E.rows());
    return out;
}

/// Logistic regression on mean-pooled embeddings, ignoring the scores.
inline StaticResult train_static_baseline(const ToyTask& task, const TrainConfig& cfg) {
    cfg.validate();
    if (task.samples.empty() || task.train.empty() || task.test.empty())
        throw ValidationError("toy task has an empty split");
    const std::size_t d = task.samples.front().embeddings.cols();
    std::vector<std::vector<double>> features;
    features.reserve(task.samples.size());
    for (const auto& s : task.samples) features.push_back(mean_pool(s.embeddings));

    StaticResult res;
    res.head.assign(d + 1, 0.0);
    auto& w = res.head;
    const double inv_n = 1.0 / static_cast<double>(task.train.size());
    auto correct = [&](std::span<const std::size_t> split) {
        std::size_t ok = 0;
        for (std::size_t idx : split)
            ok += (detail::head_logit(w, features[idx]) > 0.0 ? 1 : 0) == task.samples[idx].label;
        return ok;
    };

    for (std::size_t step = 0;; ++step) {
        double loss = 0.0;
        std::vector<double> grad(d + 1, 0.0);
        for (std::size_t idx : task.train) {
            const auto& f = features[idx];
            const int y = task.samples[idx].label;
            const double z = detail::head_logit(w, f);
            loss += (detail::softplus(z) - y * z) * inv_n;
            const double dz = (detail::sigmoid(z) - y) * inv_n;
            detail::axpy(std::span<double>(grad).first(d), dz, f);
            grad[d] += dz;
        }
        if (cfg.l2 > 0.0) {
            const auto wv = std::span<const double>(w).first(d);
            loss += 0.5 * cfg.l2 * dot(wv, wv);
            detail::axpy(std::span<double>(grad).first(d), cfg.l2, wv);
        }
        if (!std::isfinite(loss))
            throw DivergenceError("static baseline diverged at step " + std::to_string(step),
                                  step);
        const std::size_t test_ok = correct(task.test);
        res.metrics.history.push_back(
            {step, loss, static_cast<double>(correct(task.train)) / task.train.size(),
             static_cast<double>(test_ok) / task.test.size()});
        res.metrics.test_correct = test_ok;
        res.metrics.test_total = task.test.size();
        if (step == cfg.steps) break;
        detail::axpy(w, -cfg.learning_rate, grad);
    }
    return res;
}

struct RunComparison {
    double accuracy_delta = 0.0;  // a - b
    ZTestResult test;
};

/// Two-sided two-proportion z-test on test-set correct counts, alpha = 0.05.
inline RunComparison compare_runs(const RunMetrics& a, const RunMetrics& b) {
    if (a.test_total != b.test_total)
        throw ValidationError("runs were evaluated on test sets of different size");
    if (a.test_total == 0) throw ValidationError("runs have no test samples");
    RunComparison c;
    c.accuracy_delta = a.test_accuracy() - b.test_accuracy();
    c.test = two_proportion_z_test(static_cast<long long>(a.test_correct),
                                   static_cast<long long>(a.test_total),
                                   static_cast<long long>(b.test_correct),
                                   static_cast<long long>(b.test_total));
    return c;
}

} // namespace daa
