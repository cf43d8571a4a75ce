#pragma once

// Docking-biased attention pooling.
//
// A single learned pooling query attends over the residues of one protein:
//
//   query    = q_pool^T W_q                         (1 x d_h)
//   keys     = E W_k                                (n x d_h)
//   values   = E W_v                                (n x d_v)
//   logit_i  = (query . key_i + gamma * s_hat_i) / sqrt(d_h)
//   weights  = softmax(logits)
//   p_M      = weights^T values                     (d_v)
//
// The two ablations drop one of the logit terms. Gradients of a linear
// functional g . p_M are available for every parameter and for s_hat.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "daa/common.hpp"
#include "daa/rng.hpp"
#include "daa/structio.hpp"

namespace daa {

enum class AttentionMode { full, standard, docking };

inline std::string to_string(AttentionMode m) {
    switch (m) {
    case AttentionMode::full: return "full";
    case AttentionMode::standard: return "standard";
    case AttentionMode::docking: return "docking";
    }
    return "full";
}

inline AttentionMode parse_attention_mode(std::string_view name) {
    if (name == "full") return AttentionMode::full;
    if (name == "standard") return AttentionMode::standard;
    if (name == "docking") return AttentionMode::docking;
    throw ValidationError("unknown ablation '" + std::string(name) + "'");
}

struct DaaParams {
    Matrix w_query;                  // d x d_h
    Matrix w_key;                    // d x d_h
    Matrix w_value;                  // d x d_v
    std::vector<double> pool_query;  // d
    double gamma = 1.0;
    double beta = 0.5;

    std::size_t d() const { return w_query.rows(); }
    std::size_t d_h() const { return w_query.cols(); }
    std::size_t d_v() const { return w_value.cols(); }

    void validate() const {
        const std::size_t dd = d();
        if (dd == 0 || d_h() == 0 || d_v() == 0)
            throw ValidationError("attention dimensions must be at least 1");
        if (w_key.rows() != dd || w_key.cols() != d_h() || w_value.rows() != dd ||
            pool_query.size() != dd)
            throw ValidationError("attention parameter shapes are inconsistent");
        if (!all_finite(w_query.values()) || !all_finite(w_key.values()) ||
            !all_finite(w_value.values()) || !all_finite(pool_query) || !std::isfinite(gamma))
            throw ValidationError("attention parameters contain non-finite values");
        if (!(beta >= 0.0 && beta <= 1.0))
            throw ValidationError("beta must lie in [0, 1], got " + format_double(beta));
    }

    friend bool operator==(const DaaParams&, const DaaParams&) = default;
};

/// Seeded initialization. One CounterRng(seed) stream is consumed in order:
/// W_q, W_k, W_v row-major with U(-a, a), a = sqrt(6 / (fan_in + fan_out)),
/// then q_pool with N(0, 1). gamma = 1, beta = 0.5.
inline DaaParams init_params(std::size_t d, std::size_t d_h, std::size_t d_v, std::uint64_t seed) {
    if (d == 0 || d_h == 0 || d_v == 0)
        throw ValidationError("attention dimensions must be at least 1");
    CounterRng rng(seed);
    auto glorot = [&](std::size_t rows, std::size_t cols) {
        const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Matrix m(rows, cols);
        for (double& v : m.values()) v = rng.uniform(-a, a);
        return m;
    };
    DaaParams p;
    p.w_query = glorot(d, d_h);
    p.w_key = glorot(d, d_h);
    p.w_value = glorot(d, d_v);
    p.pool_query.resize(d);
    for (double& v : p.pool_query) v = rng.normal();
    return p;
}

struct DaaOutput {
    std::vector<double> representation;  // p_M, length d_v
    std::vector<double> weights;         // length n, sums to 1
    std::vector<double> logits;          // length n
};

namespace detail {

struct AttentionState {
    std::vector<double> query;  // d_h
    Matrix keys;                // n x d_h
    Matrix values;              // n x d_v
    DaaOutput out;
};

inline void check_stage(std::span<const double> v, const char* stage) {
    if (!all_finite(v)) throw ValidationError(std::string("non-finite ") + stage);
}

inline Matrix project(const EmbeddingMatrix& E, const Matrix& w) {
    Matrix out(E.rows(), w.cols());
    for (std::size_t i = 0; i < E.rows(); ++i)
        for (std::size_t a = 0; a < E.cols(); ++a) {
            const double e = E(i, a);
            for (std::size_t c = 0; c < w.cols(); ++c) out(i, c) += e * w(a, c);
        }
    return out;
}

inline void softmax_into(std::span<const double> logits, std::vector<double>& weights) {
    const double m = *std::max_element(logits.begin(), logits.end());
    weights.resize(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        weights[i] = std::exp(logits[i] - m);
        sum += weights[i];
    }
    for (double& w : weights) w /= sum;
}

inline AttentionState attend(const EmbeddingMatrix& E, std::span<const double> s_hat,
                             const DaaParams& params, AttentionMode mode) {
    params.validate();
    const std::size_t n = E.rows();
    if (E.cols() != params.d())
        throw ValidationError("embedding dimension " + std::to_string(E.cols()) +
                              " does not match parameter dimension " +
                              std::to_string(params.d()));
    if (mode != AttentionMode::standard && s_hat.size() != n)
        throw ValidationError("score vector length " + std::to_string(s_hat.size()) +
                              " does not match residue count " + std::to_string(n));
    if (mode != AttentionMode::standard) check_stage(s_hat, "interaction scores");

    AttentionState st;
    const std::size_t dh = params.d_h();
    const double scale = std::sqrt(static_cast<double>(dh));

    st.query.assign(dh, 0.0);
    for (std::size_t a = 0; a < params.d(); ++a)
        for (std::size_t c = 0; c < dh; ++c) st.query[c] += params.pool_query[a] * params.w_query(a, c);
    st.keys = project(E, params.w_key);
    st.values = project(E, params.w_value);
    check_stage(st.query, "query");
    check_stage(st.keys.values(), "keys");
    check_stage(st.values.values(), "values");

    st.out.logits.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        switch (mode) {
        case AttentionMode::full:
            st.out.logits[i] = (dot(st.query, st.keys.row(i)) + params.gamma * s_hat[i]) / scale;
            break;
        case AttentionMode::standard:
            st.out.logits[i] = dot(st.query, st.keys.row(i)) / scale;
            break;
        case AttentionMode::docking:
            st.out.logits[i] = params.gamma * s_hat[i] / scale;
            break;
        }
    }
    check_stage(st.out.logits, "logits");
    softmax_into(st.out.logits, st.out.weights);
    check_stage(st.out.weights, "attention weights");

    st.out.representation.assign(params.d_v(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = st.out.weights[i];
        const auto v = st.values.row(i);
        for (std::size_t c = 0; c < v.size(); ++c) st.out.representation[c] += w * v[c];
    }
    check_stage(st.out.representation, "representation");
    return st;
}

} // namespace detail

inline DaaOutput attention_forward(const EmbeddingMatrix& E, std::span<const double> s_hat,
                                   const DaaParams& params, AttentionMode mode) {
    return detail::attend(E, s_hat, params, mode).out;
}

inline DaaOutput daa_forward(const EmbeddingMatrix& E, std::span<const double> s_hat,
                             const DaaParams& params) {
    return attention_forward(E, s_hat, params, AttentionMode::full);
}

/// Query-key attention only; gamma and the scores play no part.
inline DaaOutput standard_attention(const EmbeddingMatrix& E, const DaaParams& params) {
    return attention_forward(E, {}, params, AttentionMode::standard);
}

/// Bias-only attention: logit_i = gamma * s_hat_i / sqrt(d_h).
inline DaaOutput docking_only(const EmbeddingMatrix& E, std::span<const double> s_hat,
                              const DaaParams& params) {
    return attention_forward(E, s_hat, params, AttentionMode::docking);
}

/// Independent heads with concatenated representations.
inline std::vector<double> multi_head_forward(const EmbeddingMatrix& E,
                                              std::span<const double> s_hat,
                                              std::span<const DaaParams> heads) {
    if (heads.empty()) throw ValidationError("multi-head attention needs at least one head");
    std::vector<double> out;
    for (const auto& h : heads) {
        const auto r = daa_forward(E, s_hat, h).representation;
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

struct DaaGradients {
    Matrix w_query;
    Matrix w_key;
    Matrix w_value;
    std::vector<double> pool_query;
    double gamma = 0.0;
    std::vector<double> s_hat;
};

/// Gradients of upstream . p_M. Parameters that do not enter the chosen mode
/// get zero gradients.
inline DaaGradients attention_backward(const EmbeddingMatrix& E, std::span<const double> s_hat,
                                       const DaaParams& params, std::span<const double> upstream,
                                       AttentionMode mode) {
    const auto st = detail::attend(E, s_hat, params, mode);
    if (upstream.size() != params.d_v())
        throw ValidationError("upstream gradient length " + std::to_string(upstream.size()) +
                              " does not match d_v " + std::to_string(params.d_v()));
    const std::size_t n = E.rows();
    const std::size_t d = params.d();
    const std::size_t dh = params.d_h();
    const std::size_t dv = params.d_v();
    const double scale = std::sqrt(static_cast<double>(dh));
    const auto& w = st.out.weights;

    DaaGradients g;
    g.w_query = Matrix(d, dh);
    g.w_key = Matrix(d, dh);
    g.w_value = Matrix(d, dv);
    g.pool_query.assign(d, 0.0);
    g.s_hat.assign(n, 0.0);

    // dL/dW_v[a][c] = sum_i w_i E[i][a] upstream[c]
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) {
            const double we = w[i] * E(i, a);
            for (std::size_t c = 0; c < dv; ++c) g.w_value(a, c) += we * upstream[c];
        }

    // Softmax Jacobian: dL/dlogit_i = w_i (u_i - sum_j w_j u_j), u_i = upstream . value_i
    std::vector<double> u(n);
    double ubar = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = dot(upstream, st.values.row(i));
        ubar += w[i] * u[i];
    }
    std::vector<double> dlogit(n);
    for (std::size_t i = 0; i < n; ++i) dlogit[i] = w[i] * (u[i] - ubar);

    if (mode != AttentionMode::standard) {
        for (std::size_t i = 0; i < n; ++i) {
            g.gamma += dlogit[i] * s_hat[i] / scale;
            g.s_hat[i] = dlogit[i] * params.gamma / scale;
        }
    }

    if (mode != AttentionMode::docking) {
        std::vector<double> dquery(dh, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double coef = dlogit[i] / scale;
            const auto k = st.keys.row(i);
            for (std::size_t c = 0; c < dh; ++c) dquery[c] += coef * k[c];
            for (std::size_t a = 0; a < d; ++a) {
                const double ce = coef * E(i, a);
                for (std::size_t c = 0; c < dh; ++c) g.w_key(a, c) += ce * st.query[c];
            }
        }
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t c = 0; c < dh; ++c) {
                g.w_query(a, c) = params.pool_query[a] * dquery[c];
                g.pool_query[a] += params.w_query(a, c) * dquery[c];
            }
    }
    return g;
}

inline DaaGradients daa_backward(const EmbeddingMatrix& E, std::span<const double> s_hat,
                                 const DaaParams& params, std::span<const double> upstream) {
    return attention_backward(E, s_hat, params, upstream, AttentionMode::full);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

inline double relative_error(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

struct GradCheckEntry {
    std::string parameter;
    double max_relative_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 1e-4;

    bool passed() const {
        return std::all_of(entries.begin(), entries.end(),
                           [&](const auto& e) { return e.max_relative_error < tolerance; });
    }
    double worst() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, e.max_relative_error);
        return m;
    }
};

struct GradCheckOptions {
    std::size_t n = 8;
    std::size_t d = 16;
    std::size_t d_h = 8;
    std::size_t d_v = 8;
    std::size_t fixtures = 4;
    double step = 1e-5;
    // Negative control: perturbs one analytic W_k entry before comparison.
    bool corrupt_analytic = false;
};

/// Compares attention_backward against central differences of upstream . p_M
/// on seeded fixtures; each entry is the max elementwise relative error
/// |a - b| / max(|a|, |b|, 1e-8) over all fixtures.
inline GradCheckReport grad_check(std::uint64_t seed, const GradCheckOptions& opt = {}) {
    if (opt.n == 0 || opt.d == 0 || opt.d_h == 0 || opt.d_v == 0)
        throw ValidationError("gradient check dimensions must be at least 1");
    GradCheckReport report;
    report.entries = {{"W_q"}, {"W_k"}, {"W_v"}, {"q_pool"}, {"gamma"}, {"s_hat"}};
    const double h = opt.step;

    for (std::size_t f = 0; f < opt.fixtures; ++f) {
        const std::uint64_t fs = derive_seed(seed, f);
        const auto E = synth_embeddings(opt.n, opt.d, derive_seed(fs, 1));
        DaaParams params = init_params(opt.d, opt.d_h, opt.d_v, derive_seed(fs, 2));
        CounterRng rng(derive_seed(fs, 3));
        params.gamma = rng.uniform(-2.0, 2.0);
        std::vector<double> s_hat(opt.n);
        for (double& s : s_hat) s = rng.normal();
        std::vector<double> upstream(opt.d_v);
        for (double& u : upstream) u = rng.normal();

        auto grads = daa_backward(E, s_hat, params, upstream);
        if (opt.corrupt_analytic) grads.w_key(0, 0) = grads.w_key(0, 0) * 1.1 + 1e-3;

        // upstream . p_M, evaluated as sum_i w_i (upstream . v_i - ref). The
        // weights sum to one, so this is the same function; subtracting the
        // dominant residue's value keeps the difference quotient resolvable
        // when some weights are tiny.
        auto projected_values = [&](const DaaParams& p) {
            std::vector<double> pv(opt.n, 0.0);
            for (std::size_t i = 0; i < opt.n; ++i)
                for (std::size_t a = 0; a < opt.d; ++a)
                    for (std::size_t c = 0; c < opt.d_v; ++c)
                        pv[i] += E(i, a) * p.w_value(a, c) * upstream[c];
            return pv;
        };
        const auto base = daa_forward(E, s_hat, params);
        const auto top = static_cast<std::size_t>(
            std::max_element(base.weights.begin(), base.weights.end()) - base.weights.begin());
        const double ref = projected_values(params)[top];
        auto objective = [&](const DaaParams& p, std::span<const double> s) {
            const auto w = daa_forward(E, s, p).weights;
            const auto pv = projected_values(p);
            double f = 0.0;
            for (std::size_t i = 0; i < opt.n; ++i) f += w[i] * (pv[i] - ref);
            return f;
        };
        auto record = [&](std::size_t slot, double analytic, double numeric) {
            auto& e = report.entries[slot];
            e.max_relative_error = std::max(e.max_relative_error, relative_error(analytic, numeric));
        };
        auto check_values = [&](std::size_t slot, std::span<double> target,
                                 std::span<const double> analytic) {
            for (std::size_t i = 0; i < target.size(); ++i) {
                const double orig = target[i];
                target[i] = orig + h;
                const double fp = objective(params, s_hat);
                target[i] = orig - h;
                const double fm = objective(params, s_hat);
                target[i] = orig;
                record(slot, analytic[i], (fp - fm) / (2.0 * h));
            }
        };
        check_values(0, params.w_query.values(), grads.w_query.values());
        check_values(1, params.w_key.values(), grads.w_key.values());
        check_values(2, params.w_value.values(), grads.w_value.values());
        check_values(3, params.pool_query, grads.pool_query);
        check_values(4, std::span<double>(&params.gamma, 1), std::span<const double>(&grads.gamma, 1));
        check_values(5, s_hat, grads.s_hat);
    }
    return report;
}

inline void write_gradcheck_report(std::ostream& os, const GradCheckReport& report) {
    os << "# parameter\tmax_relative_error\n";
    for (const auto& e : report.entries)
        os << e.parameter << '\t' << format_double(e.max_relative_error) << '\n';
    os << "# tolerance " << format_double(report.tolerance) << '\n';
    os << "status\t" << (report.passed() ? "pass" : "fail") << '\n';
}

// ---------------------------------------------------------------------------
// Parameter bundle TSV
//
//   # gamma <float>
//   # beta <float>
//   # dims <d> <d_h> <d_v>
//   # block W_q      d rows of d_h values
//   # block W_k      d rows of d_h values
//   # block W_v      d rows of d_v values
//   # block q_pool   one row of d values
//   # block head     optional: one row of d_v weights followed by the bias
// ---------------------------------------------------------------------------

struct ParamsBundle {
    DaaParams params;
    std::optional<std::vector<double>> head;
};

inline void write_params_bundle(std::ostream& os, const DaaParams& p,
                                std::optional<std::span<const double>> head = std::nullopt) {
    os << "# gamma " << format_double(p.gamma) << '\n';
    os << "# beta " << format_double(p.beta) << '\n';
    os << "# dims " << p.d() << ' ' << p.d_h() << ' ' << p.d_v() << '\n';
    auto block = [&](const char* name, const Matrix& m) {
        os << "# block " << name << '\n';
        for (std::size_t i = 0; i < m.rows(); ++i) write_row(os, m.row(i));
    };
    block("W_q", p.w_query);
    block("W_k", p.w_key);
    block("W_v", p.w_value);
    os << "# block q_pool\n";
    write_row(os, p.pool_query);
    if (head) {
        os << "# block head\n";
        write_row(os, *head);
    }
}

inline ParamsBundle parse_params_bundle(std::string_view text) {
    std::optional<double> gamma, beta;
    std::optional<std::array<std::size_t, 3>> dims;
    std::vector<std::pair<std::string, std::vector<std::vector<double>>>> blocks;
    const auto lines = lines_of(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = trim(lines[ln]);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(ln + 1);
        if (line.front() == '#') {
            const auto toks = split_ws(line.substr(1));
            if (toks.empty()) continue;
            if (toks[0] == "gamma" || toks[0] == "beta") {
                const auto v = toks.size() == 2 ? parse_double(toks[1]) : std::nullopt;
                if (!v) throw ParseError("bad " + std::string(toks[0]) + " header at " + where);
                (toks[0] == "gamma" ? gamma : beta) = *v;
            } else if (toks[0] == "dims") {
                if (toks.size() != 4) throw ParseError("bad dims header at " + where);
                std::array<std::size_t, 3> dd{};
                for (int i = 0; i < 3; ++i) {
                    const auto v = parse_int(toks[1 + i]);
                    if (!v || *v < 1) throw ParseError("bad dims header at " + where);
                    dd[i] = static_cast<std::size_t>(*v);
                }
                dims = dd;
            } else if (toks[0] == "block") {
                if (toks.size() != 2) throw ParseError("bad block header at " + where);
                blocks.emplace_back(std::string(toks[1]), std::vector<std::vector<double>>{});
            }
            continue;
        }
        if (blocks.empty()) throw ParseError("values before any block header at " + where);
        std::vector<double> row;
        for (const auto tok : split(line, '\t')) {
            const auto v = parse_double(tok);
            if (!v) throw ParseError("bad number at " + where);
            row.push_back(*v);
        }
        blocks.back().second.push_back(std::move(row));
    }
    if (!gamma || !beta || !dims) throw ParseError("params bundle is missing gamma, beta or dims");
    const auto [d, dh, dv] = *dims;

    auto find = [&](const std::string& name) -> const std::vector<std::vector<double>>* {
        for (const auto& [n, rows] : blocks)
            if (n == name) return &rows;
        return nullptr;
    };
    auto matrix = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        const auto* b = find(name);
        if (!b) throw ParseError("params bundle is missing block " + name);
        if (b->size() != rows) throw ParseError("block " + name + " has wrong row count");
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i) {
            if ((*b)[i].size() != cols) throw ParseError("block " + name + " has wrong column count");
            std::copy((*b)[i].begin(), (*b)[i].end(), m.row(i).begin());
        }
        return m;
    };
    for (const auto& [name, rows] : blocks)
        if (name != "W_q" && name != "W_k" && name != "W_v" && name != "q_pool" && name != "head")
            throw ParseError("unknown params block " + name);

    ParamsBundle out;
    out.params.gamma = *gamma;
    out.params.beta = *beta;
    out.params.w_query = matrix("W_q", d, dh);
    out.params.w_key = matrix("W_k", d, dh);
    out.params.w_value = matrix("W_v", d, dv);
    const Matrix q = matrix("q_pool", 1, d);
    out.params.pool_query.assign(q.values().begin(), q.values().end());
    if (find("head")) {
        const Matrix h = matrix("head", 1, dv + 1);
        out.head = std::vector<double>(h.values().begin(), h.values().end());
    }
    out.params.validate();
    return out;
}

} // namespace daa
