#pragma once

// Per-residue ensemble-averaged Lennard-Jones interaction scores, the sign
// transform applied to them, and the adaptive smoothing that blends each
// score with the protein-wide mean.

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <string>
#include <thread>
#include <vector>

#include "daa/common.hpp"
#include "daa/structio.hpp"

namespace daa {

enum class ScoreTransform { raw, negate, abs };

inline std::string to_string(ScoreTransform t) {
    switch (t) {
    case ScoreTransform::raw: return "raw";
    case ScoreTransform::negate: return "negate";
    case ScoreTransform::abs: return "abs";
    }
    return "raw";
}

inline ScoreTransform parse_transform(std::string_view name) {
    if (name == "raw") return ScoreTransform::raw;
    if (name == "negate") return ScoreTransform::negate;
    if (name == "abs") return ScoreTransform::abs;
    throw ValidationError("unknown score transform '" + std::string(name) + "'");
}

struct LjParams {
    double epsilon = 1.0;      // well depth, reduced units
    double sigma = 3.4;        // zero-crossing distance, angstrom
    double r_min_clamp = 0.5;  // distances below this are evaluated at the clamp
    ScoreTransform transform = ScoreTransform::abs;

    void validate() const {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon))
            throw ValidationError("LJ epsilon must be positive");
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw ValidationError("LJ sigma must be positive");
        if (!(r_min_clamp > 0.0) || !std::isfinite(r_min_clamp))
            throw ValidationError("LJ distance clamp must be positive");
    }
};

/// 4 eps [(sigma/r')^12 - (sigma/r')^6] with r' = max(r, r_min_clamp).
/// r <= 0 means two points coincide, which only happens with corrupt input.
inline double lj_pair(double r, const LjParams& params) {
    if (!(r > 0.0)) throw ValidationError("non-positive pair distance " + format_double(r));
    const double rc = std::max(r, params.r_min_clamp);
    const double s = params.sigma / rc;
    const double s2 = s * s;
    const double s6 = s2 * s2 * s2;
    return 4.0 * params.epsilon * (s6 * s6 - s6);
}

/// S_i = (1/K) sum_k sum_j lj_pair(|p_i - m_j^k|).
///
/// Summation scheme, fixed so results are reproducible:
///   * per pose, the atom terms are sorted by (|term|, term) and added
///     sequentially, so the pose sum does not depend on atom order;
///   * the K pose sums V_k are averaged as V_1 + sum_k (V_k - V_1) / K, which
///     returns V_1 exactly when all poses agree.
/// Residues are independent; `threads` only splits the residue range.
inline std::vector<double> interaction_scores(const ProteinStructure& protein,
                                              const PoseEnsemble& poses, const LjParams& params,
                                              unsigned threads = 1) {
    params.validate();
    const std::size_t n = protein.size();
    const std::size_t K = poses.pose_count();
    if (n == 0 || K == 0) throw ValidationError("interaction scores need residues and poses");
    std::vector<double> scores(n, 0.0);

    auto score_range = [&](std::size_t begin, std::size_t end) {
        std::vector<double> terms;
        std::vector<double> pose_sums(K);
        for (std::size_t i = begin; i < end; ++i) {
            const Vec3& p = protein[i].position;
            for (std::size_t k = 0; k < K; ++k) {
                const Pose& pose = poses[k];
                terms.clear();
                for (std::size_t j = 0; j < pose.size(); ++j) {
                    const double r = distance(p, pose[j].position);
                    if (!(r > 0.0))
                        throw ValidationError("coincident positions: residue " +
                                              std::to_string(i + 1) + ", pose " +
                                              std::to_string(k + 1) + ", atom " +
                                              std::to_string(j + 1));
                    terms.push_back(lj_pair(r, params));
                }
                std::sort(terms.begin(), terms.end(), [](double a, double b) {
                    const double fa = std::fabs(a), fb = std::fabs(b);
                    return fa < fb || (fa == fb && a < b);
                });
                double sum = 0.0;
                for (double t : terms) sum += t;
                pose_sums[k] = sum;
            }
            double shift = 0.0;
            for (std::size_t k = 1; k < K; ++k) shift += pose_sums[k] - pose_sums[0];
            scores[i] = pose_sums[0] + shift / static_cast<double>(K);
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
    if (workers == 1) {
        score_range(0, n);
        return scores;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = n * w / workers;
        const std::size_t e = n * (w + 1) / workers;
        pool.emplace_back([&, w, b, e] {
            try {
                score_range(b, e);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    return scores;
}

inline std::vector<double> apply_transform(std::span<const double> raw, ScoreTransform mode) {
    std::vector<double> out(raw.begin(), raw.end());
    switch (mode) {
    case ScoreTransform::raw: break;
    case ScoreTransform::negate:
        for (double& v : out) v = -v;
        break;
    case ScoreTransform::abs:
        for (double& v : out) v = std::fabs(v);
        break;
    }
    return out;
}

/// s_hat_i = beta * v_i + (1 - beta) * mean(v).
inline std::vector<double> smooth_scores(std::span<const double> transformed, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ValidationError("smoothing beta must lie in [0, 1], got " + format_double(beta));
    if (transformed.empty()) throw ValidationError("cannot smooth an empty score vector");
    if (!all_finite(transformed)) throw ValidationError("score vector has non-finite entries");
    const double m = mean(transformed);
    std::vector<double> out(transformed.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = beta * transformed[i] + (1.0 - beta) * m;
    return out;
}

struct InteractionProfile {
    std::vector<double> raw;
    std::vector<double> transformed;
    std::vector<double> smoothed;
    double beta_used = 0.0;
};

inline InteractionProfile score_pipeline(const ProteinStructure& protein, const PoseEnsemble& poses,
                                         const LjParams& params, double beta,
                                         unsigned threads = 1) {
    InteractionProfile prof;
    prof.raw = interaction_scores(protein, poses, params, threads);
    if (!all_finite(prof.raw))
        throw ValidationError("interaction scores overflowed; check the distance clamp");
    prof.transformed = apply_transform(prof.raw, params.transform);
    prof.smoothed = smooth_scores(prof.transformed, beta);
    prof.beta_used = beta;
    return prof;
}

// ---------------------------------------------------------------------------
// Profile TSV: one float per line, each stage introduced by "# stage: <name>".
// ---------------------------------------------------------------------------

inline void write_profile_tsv(std::ostream& os, const InteractionProfile& prof) {
    os << "# beta " << format_double(prof.beta_used) << '\n';
    auto stage = [&](const char* name, const std::vector<double>& v) {
        os << "# stage: " << name << '\n';
        for (double x : v) os << format_double(x) << '\n';
    };
    stage("raw", prof.raw);
    stage("transformed", prof.transformed);
    stage("smoothed", prof.smoothed);
}

inline InteractionProfile parse_profile_tsv(std::string_view text) {
    InteractionProfile prof;
    std::vector<double>* current = nullptr;
    const auto lines = lines_of(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const auto line = trim(lines[ln]);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto body = trim(line.substr(1));
            if (body.starts_with("stage:")) {
                const auto name = trim(body.substr(6));
                if (name == "raw") current = &prof.raw;
                else if (name == "transformed") current = &prof.transformed;
                else if (name == "smoothed") current = &prof.smoothed;
                else throw ParseError("unknown stage '" + std::string(name) + "'");
            } else if (body.starts_with("beta ")) {
                const auto b = parse_double(body.substr(5));
                if (!b) throw ParseError("bad beta header at line " + std::to_string(ln + 1));
                prof.beta_used = *b;
            }
            continue;
        }
        if (!current) throw ParseError("score value before any stage header at line " +
                                       std::to_string(ln + 1));
        const auto v = parse_double(line);
        if (!v) throw ParseError("bad score at line " + std::to_string(ln + 1));
        current->push_back(*v);
    }
    if (prof.raw.size() != prof.transformed.size() || prof.raw.size() != prof.smoothed.size())
        throw ParseError("profile stages have different lengths");
    return prof;
}

} // namespace daa
