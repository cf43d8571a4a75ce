#pragma once

// Evaluation and analysis helpers: top-k accuracy over ranked candidate lists,
// the two-proportion z-test, PCA by deflated power iteration, and TSV exports
// of attention profiles and context-dependent representations.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "daa/attention.hpp"
#include "daa/common.hpp"
#include "daa/structio.hpp"

namespace daa {

// ---------------------------------------------------------------------------
// Top-k accuracy
// ---------------------------------------------------------------------------

struct RankedInstance {
    std::vector<std::string> candidates;  // most confident first
    std::string truth;
};

struct RankedPredictions {
    std::vector<RankedInstance> instances;

    void validate() const {
        if (instances.empty()) throw ValidationError("no ranked instances");
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto& c = instances[i].candidates;
            if (c.empty())
                throw ValidationError("instance " + std::to_string(i + 1) + " has no candidates");
            std::set<std::string_view> seen;
            for (const auto& s : c)
                if (!seen.insert(s).second)
                    throw ValidationError("instance " + std::to_string(i + 1) +
                                          " has duplicate candidate '" + s + "'");
        }
    }
};

/// Fraction of instances whose truth is among the first min(k, size) candidates.
/// Ties in confidence are the caller's business; list order is taken as given.
inline double top_k_accuracy(const RankedPredictions& preds, std::size_t k) {
    if (k == 0) throw ValidationError("k must be at least 1");
    preds.validate();
    std::size_t hits = 0;
    for (const auto& inst : preds.instances) {
        const auto limit = std::min(k, inst.candidates.size());
        const auto end = inst.candidates.begin() + static_cast<std::ptrdiff_t>(limit);
        if (std::find(inst.candidates.begin(), end, inst.truth) != end) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.instances.size());
}

/// One instance per line: truth<TAB>candidate_1<TAB>candidate_2 ...
inline RankedPredictions parse_ranked_tsv(std::string_view text) {
    RankedPredictions preds;
    const auto lines = lines_of(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (is_comment_or_blank(lines[ln])) continue;
        const auto fields = split(trim(lines[ln]), '\t');
        if (fields.size() < 2)
            throw ParseError("line " + std::to_string(ln + 1) +
                             ": expected truth followed by at least one candidate");
        RankedInstance inst;
        inst.truth = std::string(trim(fields[0]));
        for (std::size_t i = 1; i < fields.size(); ++i)
            inst.candidates.emplace_back(trim(fields[i]));
        preds.instances.push_back(std::move(inst));
    }
    if (preds.instances.empty()) throw ParseError("no ranked instances in input");
    return preds;
}

// ---------------------------------------------------------------------------
// Two-proportion z-test (pooled variance, two-sided)
// ---------------------------------------------------------------------------

struct ZTestResult {
    double z = 0.0;
    double p_two_sided = 1.0;
    bool significant = false;
    bool degenerate = false;  // pooled proportion 0 or 1
};

inline constexpr double kSignificanceLevel = 0.05;

/// Two-sided p uses the standard normal tail 2 (1 - Phi(|z|)) = erfc(|z| / sqrt 2),
/// evaluated with the C library erfc (error well below 1e-7).
inline ZTestResult two_proportion_z_test(long long s1, long long n1, long long s2, long long n2,
                                         double alpha = kSignificanceLevel) {
    if (n1 < 1 || n2 < 1) throw ValidationError("z-test group sizes must be at least 1");
    if (s1 < 0 || s1 > n1 || s2 < 0 || s2 > n2)
        throw ValidationError("z-test success counts must lie in [0, n]");
    const double p1 = static_cast<double>(s1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(s2) / static_cast<double>(n2);
    const double pooled = static_cast<double>(s1 + s2) / static_cast<double>(n1 + n2);
    ZTestResult r;
    if (s1 + s2 == 0 || s1 + s2 == n1 + n2) {
        r.degenerate = true;
        return r;
    }
    const double se = std::sqrt(pooled * (1.0 - pooled) *
                                (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
    r.z = (p1 - p2) / se;
    r.p_two_sided = std::min(1.0, std::erfc(std::fabs(r.z) / std::numbers::sqrt2));
    r.significant = r.p_two_sided < alpha;
    return r;
}

// ---------------------------------------------------------------------------
// PCA by deflated power iteration
// ---------------------------------------------------------------------------

struct ProjectionResult {
    Matrix components;                      // m x d, orthonormal rows
    Matrix projected;                       // n x m
    std::vector<double> explained_variance; // non-increasing, >= 0
    std::vector<double> mean;               // d
};

struct PcaOptions {
    double tolerance = 1e-10;
    std::size_t max_iterations = 1000;
};

/// Principal components of the rows of X. Covariance uses the n - 1
/// denominator. Each component is flipped so its largest-magnitude entry is
/// positive.
inline ProjectionResult pca_project(const Matrix& X, std::size_t m, const PcaOptions& opt = {}) {
    const std::size_t n = X.rows();
    const std::size_t d = X.cols();
    if (n < 2) throw ValidationError("PCA needs at least 2 rows");
    if (m < 1 || m > std::min(n, d))
        throw ValidationError("PCA component count must lie in [1, min(n, d)]");
    if (!all_finite(X.values())) throw ValidationError("PCA input has non-finite entries");

    ProjectionResult res;
    res.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) res.mean[j] += X(i, j);
    for (double& v : res.mean) v /= static_cast<double>(n);

    Matrix centered(n, d);
    double max_abs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            centered(i, j) = X(i, j) - res.mean[j];
            max_abs = std::max(max_abs, std::fabs(centered(i, j)));
        }
    if (max_abs == 0.0) throw ValidationError("zero-variance data: all rows are equal");

    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b) cov(a, b) += centered(i, a) * centered(i, b);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            cov(a, b) /= static_cast<double>(n - 1);
            cov(b, a) = cov(a, b);
        }
    double trace = 0.0;
    for (std::size_t a = 0; a < d; ++a) trace += cov(a, a);
    const double negligible = 1e-14 * trace;

    auto mat_vec = [d](const Matrix& M, std::span<const double> v) {
        std::vector<double> out(d, 0.0);
        for (std::size_t a = 0; a < d; ++a) out[a] = dot(M.row(a), v);
        return out;
    };
    auto norm = [](std::span<const double> v) { return std::sqrt(dot(v, v)); };

    std::vector<std::vector<double>> comps;
    std::vector<double> variances;
    Matrix residual = cov;

    auto orthogonalize = [&](std::vector<double>& v) {
        for (const auto& c : comps) {
            const double p = dot(v, c);
            for (std::size_t a = 0; a < d; ++a) v[a] -= p * c[a];
        }
    };

    for (std::size_t k = 0; k < m; ++k) {
        // Start from the residual column with the largest norm.
        std::vector<double> v(d, 0.0);
        double best = -1.0;
        for (std::size_t a = 0; a < d; ++a) {
            const double nn = norm(residual.row(a));
            if (nn > best) {
                best = nn;
                v.assign(residual.row(a).begin(), residual.row(a).end());
            }
        }
        orthogonalize(v);
        if (norm(v) <= negligible) {
            // Residual spectrum is exhausted: any unit vector orthogonal to the
            // previous components is an eigenvector with eigenvalue ~0.
            for (std::size_t a = 0; a < d; ++a) {
                std::vector<double> e(d, 0.0);
                e[a] = 1.0;
                orthogonalize(e);
                orthogonalize(e);
                if (norm(e) > 1e-6) {
                    v = std::move(e);
                    break;
                }
            }
        }
        double nv = norm(v);
        for (double& x : v) x /= nv;

        for (std::size_t it = 0; it < opt.max_iterations; ++it) {
            auto w = mat_vec(residual, v);
            orthogonalize(w);
            const double nw = norm(w);
            if (nw <= negligible) break;
            double change = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                w[a] /= nw;
                change += (w[a] - v[a]) * (w[a] - v[a]);
            }
            v = std::move(w);
            if (std::sqrt(change) < opt.tolerance) break;
        }
        orthogonalize(v);
        nv = norm(v);
        for (double& x : v) x /= nv;

        std::size_t arg = 0;
        for (std::size_t a = 1; a < d; ++a)
            if (std::fabs(v[a]) > std::fabs(v[arg])) arg = a;
        if (v[arg] < 0.0)
            for (double& x : v) x = -x;

        const double lambda = std::max(0.0, dot(v, mat_vec(cov, v)));
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) residual(a, b) -= lambda * v[a] * v[b];
        comps.push_back(std::move(v));
        variances.push_back(lambda);
    }

    std::vector<std::size_t> order(m);
    for (std::size_t k = 0; k < m; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return variances[a] > variances[b]; });

    res.components = Matrix(m, d);
    res.explained_variance.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        std::copy(comps[order[k]].begin(), comps[order[k]].end(), res.components.row(k).begin());
        res.explained_variance[k] = variances[order[k]];
    }
    res.projected = Matrix(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k)
            res.projected(i, k) = dot(centered.row(i), res.components.row(k));
    return res;
}

inline void write_projection_tsv(std::ostream& os, const ProjectionResult& res) {
    os << "# explained_variance";
    for (double v : res.explained_variance) os << ' ' << format_double(v);
    os << '\n';
    for (std::size_t k = 0; k < res.components.rows(); ++k) {
        os << "# component " << (k + 1);
        for (double v : res.components.row(k)) os << ' ' << format_double(v);
        os << '\n';
    }
    for (std::size_t i = 0; i < res.projected.rows(); ++i) write_row(os, res.projected.row(i));
}

// ---------------------------------------------------------------------------
// Attention profile export: index<TAB>label<TAB>weight, one line per residue.
// Weights are written in shortest round-trip form so the emitted column still
// sums to 1 to within 1e-9.
// ---------------------------------------------------------------------------

inline std::string format_exact(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline void export_attention_profile(std::ostream& os, const DaaOutput& output,
                                     const ProteinStructure& protein) {
    if (output.weights.size() != protein.size())
        throw ValidationError("attention weights length " + std::to_string(output.weights.size()) +
                              " does not match residue count " + std::to_string(protein.size()));
    os << "# index\tlabel\tweight\n";
    for (std::size_t i = 0; i < protein.size(); ++i)
        os << protein[i].index << '\t' << protein[i].label << '\t'
           << format_exact(output.weights[i]) << '\n';
}

struct ProfileRow {
    int index = 0;
    std::string label;
    double weight = 0.0;
};

inline std::vector<ProfileRow> parse_attention_profile(std::string_view text) {
    std::vector<ProfileRow> rows;
    const auto lines = lines_of(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (is_comment_or_blank(lines[ln])) continue;
        const auto f = split(trim(lines[ln]), '\t');
        const auto idx = f.size() == 3 ? parse_int(f[0]) : std::nullopt;
        const auto w = f.size() == 3 ? parse_double(f[2]) : std::nullopt;
        if (!idx || !w) throw ParseError("malformed attention profile line " + std::to_string(ln + 1));
        rows.push_back({static_cast<int>(*idx), std::string(f[1]), *w});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Context-dependent representation export
// ---------------------------------------------------------------------------

struct ContextEntry {
    std::string protein_id;
    std::string molecule_id;
    std::vector<double> representation;
};

inline Matrix context_matrix(std::span<const ContextEntry> entries) {
    if (entries.empty()) throw ValidationError("no context entries");
    const std::size_t dim = entries.front().representation.size();
    if (dim == 0) throw ValidationError("context representation is empty");
    Matrix m(entries.size(), dim);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& r = entries[i].representation;
        if (r.size() != dim)
            throw ValidationError("inconsistent representation dimension at entry " +
                                  std::to_string(i + 1));
        std::copy(r.begin(), r.end(), m.row(i).begin());
    }
    return m;
}

/// protein<TAB>molecule<TAB>v_1..v_d, with pc_1..pc_m appended when
/// projection_dims > 0. Returns the projection when one was computed.
inline std::optional<ProjectionResult> export_context_embeddings(
    std::ostream& os, std::span<const ContextEntry> entries, std::size_t projection_dims = 0) {
    const Matrix m = context_matrix(entries);
    std::optional<ProjectionResult> proj;
    if (projection_dims > 0) proj = pca_project(m, projection_dims);

    os << "# protein\tmolecule";
    for (std::size_t c = 0; c < m.cols(); ++c) os << "\tv" << (c + 1);
    if (proj)
        for (std::size_t c = 0; c < projection_dims; ++c) os << "\tpc" << (c + 1);
    os << '\n';
    for (std::size_t i = 0; i < entries.size(); ++i) {
        os << entries[i].protein_id << '\t' << entries[i].molecule_id;
        for (double v : m.row(i)) os << '\t' << format_double(v);
        if (proj)
            for (double v : proj->projected.row(i)) os << '\t' << format_double(v);
        os << '\n';
    }
    return proj;
}

} // namespace daa
