#pragma once

// Command-line frontend. run_cli() is the whole program minus main(), so the
// tests can drive it in-process.
//
// Exit codes: 0 success, 1 parse error (bad flags, unreadable or malformed
// files), 2 validation error, 3 gradient check failure, 4 training divergence.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "daa/analysis.hpp"
#include "daa/attention.hpp"
#include "daa/ljscore.hpp"
#include "daa/structio.hpp"
#include "daa/train.hpp"

namespace daa::cli {

enum ExitCode : int {
    kOk = 0,
    kParseError = 1,
    kValidationError = 2,
    kGradCheckFailed = 3,
    kDiverged = 4,
};

struct RunConfig {
    std::string protein;
    std::vector<std::string> poses;
    std::string embeddings;
    std::string params;
    std::string input;
    std::string out;
    std::string attention_out;
    std::string params_out;

    LjParams lj;
    std::string transform = "abs";
    double beta = 0.5;
    bool beta_set = false;
    double gamma = 1.0;
    bool gamma_set = false;
    std::string ablation = "full";

    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::size_t steps = 500;
    double lr = 0.05;
    std::vector<std::size_t> k_list;

    std::size_t n = 8, d = 16, d_h = 8, d_v = 8;
    std::size_t fixtures = 4;
    bool corrupt_gradient = false;
    std::size_t pool_dh = 8;
    std::size_t pool_dv = 0;

    std::size_t samples = 400;
    std::size_t residues = 8;
    std::size_t dim = 8;

    std::size_t components = 2;
    std::vector<long long> counts;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_output(const std::string& path, const std::string& data, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << data;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot write file: " + path);
    f << data;
}

inline bool has_suffix(const std::string& s, std::string_view suf) {
    if (s.size() < suf.size()) return false;
    std::string tail = s.substr(s.size() - suf.size());
    std::transform(tail.begin(), tail.end(), tail.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return tail == suf;
}

/// .pdb / .ent files go through the C-alpha reader, everything else is residue TSV.
inline ProteinStructure load_protein(const std::string& path) {
    const std::string text = read_file(path);
    try {
        if (has_suffix(path, ".pdb") || has_suffix(path, ".ent")) return parse_pdb_ca(text);
        return parse_protein_tsv(text);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline PoseEnsemble load_poses(const std::vector<std::string>& paths) {
    std::vector<std::string> texts;
    for (const auto& p : paths) texts.push_back(read_file(p));
    return parse_pose_xyz(std::span<const std::string>(texts));
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return parse_embeddings(text);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline LjParams lj_from(const RunConfig& cfg) {
    LjParams lj = cfg.lj;
    lj.transform = parse_transform(cfg.transform);
    lj.validate();
    return lj;
}

inline void check_beta(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ValidationError("--beta must lie in [0, 1], got " + format_double(beta));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int cmd_score(const RunConfig& cfg, std::ostream& out) {
    const auto protein = load_protein(cfg.protein);
    const auto poses = load_poses(cfg.poses);
    const auto lj = lj_from(cfg);
    check_beta(cfg.beta);
    const auto prof = score_pipeline(protein, poses, lj, cfg.beta, cfg.threads);
    std::ostringstream ss;
    ss << "# eps " << format_double(lj.epsilon) << '\n'
       << "# sigma " << format_double(lj.sigma) << '\n'
       << "# rmin " << format_double(lj.r_min_clamp) << '\n'
       << "# transform " << to_string(lj.transform) << '\n'
       << "# poses " << poses.pose_count() << '\n';
    write_profile_tsv(ss, prof);
    write_output(cfg.out, ss.str(), out);
    return kOk;
}

inline int cmd_pool(const RunConfig& cfg, std::ostream& out) {
    const auto protein = load_protein(cfg.protein);
    const auto poses = load_poses(cfg.poses);
    const auto E = load_embeddings(cfg.embeddings);
    if (E.rows() != protein.size())
        throw ValidationError("embedding rows (" + std::to_string(E.rows()) +
                              ") do not match residue count (" + std::to_string(protein.size()) +
                              ")");
    const auto mode = parse_attention_mode(cfg.ablation);

    DaaParams params;
    if (!cfg.params.empty()) {
        try {
            params = parse_params_bundle(read_file(cfg.params)).params;
        } catch (const ParseError& e) {
            throw ParseError(cfg.params + ": " + e.what());
        }
    } else {
        params = init_params(E.cols(), cfg.pool_dh, cfg.pool_dv ? cfg.pool_dv : E.cols(), cfg.seed);
    }
    if (cfg.gamma_set) params.gamma = cfg.gamma;
    if (cfg.beta_set) {
        check_beta(cfg.beta);
        params.beta = cfg.beta;
    }
    params.validate();
    if (params.d() != E.cols())
        throw ValidationError("embedding dimension " + std::to_string(E.cols()) +
                              " does not match parameter dimension " + std::to_string(params.d()));

    const auto lj = lj_from(cfg);
    const auto prof = score_pipeline(protein, poses, lj, params.beta, cfg.threads);
    const auto result = attention_forward(E, prof.smoothed, params, mode);

    // Standard attention is the gamma = 0 case, and is reported as such.
    const double gamma_used = mode == AttentionMode::standard ? 0.0 : params.gamma;
    std::ostringstream pm;
    pm << "# gamma " << format_double(gamma_used) << '\n'
       << "# beta " << format_double(params.beta) << '\n'
       << "# residues " << protein.size() << '\n';
    write_row(pm, result.representation);
    write_output(cfg.out, pm.str(), out);

    if (!cfg.attention_out.empty()) {
        std::ostringstream ap;
        ap << "# gamma " << format_double(gamma_used) << '\n'
           << "# beta " << format_double(params.beta) << '\n';
        export_attention_profile(ap, result, protein);
        write_output(cfg.attention_out, ap.str(), out);
    }
    return kOk;
}

inline int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
    GradCheckOptions opt;
    opt.n = cfg.n;
    opt.d = cfg.d;
    opt.d_h = cfg.d_h;
    opt.d_v = cfg.d_v;
    opt.fixtures = cfg.fixtures;
    opt.corrupt_analytic = cfg.corrupt_gradient;
    const auto report = grad_check(cfg.seed, opt);
    std::ostringstream ss;
    ss << "# seed " << cfg.seed << "\n# dims n=" << opt.n << " d=" << opt.d << " d_h=" << opt.d_h
       << " d_v=" << opt.d_v << " fixtures=" << opt.fixtures << '\n';
    write_gradcheck_report(ss, report);
    write_output(cfg.out, ss.str(), out);
    return report.passed() ? kOk : kGradCheckFailed;
}

inline int cmd_train_toy(const RunConfig& cfg, std::ostream& out) {
    const auto task = make_toy_task(cfg.samples, cfg.residues, cfg.dim, cfg.seed);
    TrainConfig tc;
    tc.learning_rate = cfg.lr;
    tc.steps = cfg.steps;
    tc.seed = cfg.seed;
    tc.threads = cfg.threads;

    const auto full = train_daa_classifier(task, tc, AttentionMode::full);
    const auto standard = train_daa_classifier(task, tc, AttentionMode::standard);
    const auto docking = train_daa_classifier(task, tc, AttentionMode::docking);
    const auto baseline = train_static_baseline(task, tc);

    if (!cfg.out.empty()) {
        std::ostringstream m;
        write_metrics_tsv(m, full.metrics);
        write_output(cfg.out, m.str(), out);
    }
    if (!cfg.params_out.empty()) {
        std::ostringstream p;
        write_params_bundle(p, full.model.params, std::span<const double>(full.model.head));
        write_output(cfg.params_out, p.str(), out);
    }

    std::ostringstream s;
    s << "# seed " << cfg.seed << "\tsteps " << cfg.steps << "\tlr " << format_double(cfg.lr)
      << '\n';
    s << "# model\ttest_acc\tcorrect\ttotal\n";
    auto model_line = [&](const char* name, const RunMetrics& m) {
        s << name << '\t' << format_double(m.test_accuracy()) << '\t' << m.test_correct << '\t'
          << m.test_total << '\n';
    };
    model_line("daa", full.metrics);
    model_line("standard", standard.metrics);
    model_line("docking", docking.metrics);
    model_line("static", baseline.metrics);
    s << "# comparison\tdelta\tz\tp\tsignificant_at_0.05\n";
    auto compare_line = [&](const char* name, const RunMetrics& a, const RunMetrics& b) {
        const auto c = compare_runs(a, b);
        s << name << '\t' << format_double(c.accuracy_delta) << '\t' << format_double(c.test.z)
          << '\t' << format_double(c.test.p_two_sided) << '\t'
          << (c.test.significant ? "yes" : "no") << '\n';
    };
    compare_line("daa_vs_static", full.metrics, baseline.metrics);
    compare_line("daa_vs_standard", full.metrics, standard.metrics);
    compare_line("daa_vs_docking", full.metrics, docking.metrics);
    out << s.str();
    return kOk;
}

inline int cmd_topk(const RunConfig& cfg, std::ostream& out) {
    const auto preds = parse_ranked_tsv(read_file(cfg.input));
    std::vector<std::size_t> ks = cfg.k_list.empty() ? std::vector<std::size_t>{1, 3, 5} : cfg.k_list;
    std::ostringstream ss;
    ss << "# k\taccuracy\n";
    for (auto k : ks) ss << k << '\t' << format_double(top_k_accuracy(preds, k)) << '\n';
    write_output(cfg.out, ss.str(), out);
    return kOk;
}

inline int cmd_ztest(const RunConfig& cfg, std::ostream& out) {
    if (cfg.counts.size() != 4) throw ParseError("ztest expects four counts: s1 n1 s2 n2");
    const auto r = two_proportion_z_test(cfg.counts[0], cfg.counts[1], cfg.counts[2], cfg.counts[3]);
    std::ostringstream ss;
    ss << "z\t" << format_double(r.z) << '\n'
       << "p\t" << format_double(r.p_two_sided) << '\n'
       << "significant_at_0.05\t" << (r.significant ? "yes" : "no") << '\n'
       << "degenerate\t" << (r.degenerate ? "yes" : "no") << '\n';
    write_output(cfg.out, ss.str(), out);
    return kOk;
}

inline int cmd_pca(const RunConfig& cfg, std::ostream& out) {
    const auto X = load_embeddings(cfg.input);
    const auto res = pca_project(X.matrix(), cfg.components);
    std::ostringstream ss;
    write_projection_tsv(ss, res);
    write_output(cfg.out, ss.str(), out);
    return kOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Docking-aware attention pooling: interaction scoring, pooling, "
                 "gradient checks, toy training and analysis"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "Seed for every random draw");
        sub->add_option("--threads", cfg.threads, "Worker thread cap")->check(CLI::PositiveNumber);
        sub->add_option("--out", cfg.out, "Output path (default: standard output)");
    };
    auto add_lj = [&](CLI::App* sub) {
        sub->add_option("--eps", cfg.lj.epsilon, "LJ well depth")->capture_default_str();
        sub->add_option("--sigma", cfg.lj.sigma, "LJ zero-crossing distance")->capture_default_str();
        sub->add_option("--rmin", cfg.lj.r_min_clamp, "Distance clamp")->capture_default_str();
        sub->add_option("--transform", cfg.transform, "raw, negate or abs")->capture_default_str();
    };
    auto add_inputs = [&](CLI::App* sub) {
        sub->add_option("--protein", cfg.protein, "Residue TSV or PDB file")->required();
        sub->add_option("--poses", cfg.poses, "Pose XYZ file, repeatable")->required();
    };

    auto* score = app.add_subcommand("score", "Per-residue interaction profile");
    add_common(score);
    add_inputs(score);
    add_lj(score);
    score->add_option("--beta", cfg.beta, "Smoothing weight in [0, 1]")->capture_default_str();

    auto* pool = app.add_subcommand("pool", "Context-dependent representation and attention profile");
    add_common(pool);
    add_inputs(pool);
    add_lj(pool);
    pool->add_option("--embeddings", cfg.embeddings, "Embedding TSV")->required();
    pool->add_option("--params", cfg.params, "Parameter bundle (default: seeded init)");
    pool->add_option("--gamma", cfg.gamma, "Override gamma");
    pool->add_option("--beta", cfg.beta, "Override beta");
    pool->add_option("--ablation", cfg.ablation, "full, standard or docking")->capture_default_str();
    pool->add_option("--attention", cfg.attention_out, "Attention profile output path");
    pool->add_option("--dh", cfg.pool_dh, "Head dimension for seeded init")->capture_default_str();
    pool->add_option("--dv", cfg.pool_dv, "Value dimension for seeded init (default: d)");

    auto* grad = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
    add_common(grad);
    grad->add_option("--n", cfg.n, "Residues")->capture_default_str();
    grad->add_option("--d", cfg.d, "Embedding dimension")->capture_default_str();
    grad->add_option("--dh", cfg.d_h, "Head dimension")->capture_default_str();
    grad->add_option("--dv", cfg.d_v, "Value dimension")->capture_default_str();
    grad->add_option("--fixtures", cfg.fixtures, "Seeded fixtures")->capture_default_str();
    grad->add_flag("--corrupt-gradient", cfg.corrupt_gradient)->group("");

    auto* train = app.add_subcommand("train-toy", "Train DAA, ablations and static baseline on the toy task");
    add_common(train);
    train->add_option("--steps", cfg.steps, "Gradient steps")->capture_default_str();
    train->add_option("--lr", cfg.lr, "Learning rate")->capture_default_str();
    train->add_option("--samples", cfg.samples, "Task size")->capture_default_str();
    train->add_option("--residues", cfg.residues, "Residues per sample")->capture_default_str();
    train->add_option("--dim", cfg.dim, "Embedding dimension")->capture_default_str();
    train->add_option("--params-out", cfg.params_out, "Write trained DAA parameters here");

    auto* topk = app.add_subcommand("topk", "Top-k accuracy of ranked candidate lists");
    add_common(topk);
    topk->add_option("input,--input", cfg.input, "truth<TAB>candidates... per line")->required();
    topk->add_option("--k", cfg.k_list, "k values (default 1 3 5)");

    auto* ztest = app.add_subcommand("ztest", "Two-proportion z-test");
    add_common(ztest);
    ztest->add_option("counts", cfg.counts, "s1 n1 s2 n2")->required()->expected(4);

    auto* pca = app.add_subcommand("pca", "Principal components of a matrix TSV");
    add_common(pca);
    pca->add_option("input,--input", cfg.input, "Matrix TSV")->required();
    pca->add_option("--components", cfg.components, "Components to keep")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kParseError;
    }
    cfg.beta_set = pool->count("--beta") > 0;
    cfg.gamma_set = pool->count("--gamma") > 0;

    try {
        if (*score) return cmd_score(cfg, out);
        if (*pool) return cmd_pool(cfg, out);
        if (*grad) return cmd_gradcheck(cfg, out);
        if (*train) return cmd_train_toy(cfg, out);
        if (*topk) return cmd_topk(cfg, out);
        if (*ztest) return cmd_ztest(cfg, out);
        if (*pca) return cmd_pca(cfg, out);
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kDiverged;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kParseError;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationError;
    }
    return kParseError;
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, out, err);
}

} // namespace daa::cli
