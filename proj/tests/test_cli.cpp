#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "daa/cli.hpp"

using namespace daa;
namespace fs = std::filesystem;

namespace {

const std::string kData = DAA_TEST_DATA_DIR;

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return kData + "/" + name; }

std::vector<std::string> fixture_args(std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"--protein", data("fixture_protein.tsv"), "--poses", data("fixture_pose1.xyz"),
                               "--poses", data("fixture_pose2.xyz")};
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
}

std::vector<std::string> cmd(const std::string& sub, std::vector<std::string> rest) {
    rest.insert(rest.begin(), sub);
    return rest;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("daa_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name, const std::string& content = "") const {
        const auto p = (path_ / name).string();
        if (!content.empty()) std::ofstream(p) << content;
        return p;
    }

private:
    fs::path path_;
};

std::string slurp(const std::string& path) { return cli::read_file(path); }

} // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"bogus"}).code, cli::kParseError);
    EXPECT_EQ(run({"score"}).code, cli::kParseError);
    EXPECT_EQ(run({"ztest", "1", "2"}).code, cli::kParseError);
}

TEST(Cli, MissingFileNamesThePath) {
    const auto r = run({"score", "--protein", "/nonexistent/p.tsv", "--poses", data("fixture_pose1.xyz")});
    EXPECT_EQ(r.code, cli::kParseError);
    EXPECT_NE(r.err.find("/nonexistent/p.tsv"), std::string::npos);
}

TEST(Cli, ScoreOutputParsesBack) {
    const auto r = run(cmd("score", fixture_args()));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto prof = parse_profile_tsv(r.out);
    EXPECT_EQ(prof.raw.size(), 4u);
    EXPECT_NE(r.out.find("# poses 2\n"), std::string::npos);
    EXPECT_NE(r.out.find("# transform abs\n"), std::string::npos);

    const auto ident = run(cmd("score", fixture_args({"--beta", "1", "--transform", "raw"})));
    ASSERT_EQ(ident.code, 0);
    const auto p1 = parse_profile_tsv(ident.out);
    EXPECT_EQ(p1.smoothed, p1.raw);

    EXPECT_EQ(run(cmd("score", fixture_args({"--beta", "1.5"}))).code, cli::kValidationError);
    EXPECT_EQ(run(cmd("score", fixture_args({"--transform", "square"}))).code, cli::kValidationError);
}

TEST(Cli, ScoreReadsPdb) {
    const auto r = run({"score", "--protein", data("fixture_ca.pdb"), "--poses", data("fixture_pose1.xyz")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_FALSE(parse_profile_tsv(r.out).raw.empty());
}

TEST(Cli, PoolGoldenFixture) {
    const auto r = run(cmd("pool", fixture_args({"--embeddings", data("fixture_embeddings.tsv"), "--seed",
                                                 "11", "--dh", "2"})));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, slurp(data("fixture_pool.golden.tsv")));
}

TEST(Cli, PoolStandardAblationEqualsGammaZero) {
    TempDir tmp;
    const auto base = fixture_args({"--embeddings", data("fixture_embeddings.tsv"), "--seed", "3"});
    auto a = cmd("pool", base), b = cmd("pool", base);
    a.insert(a.end(), {"--gamma", "0", "--attention", tmp.file("a.tsv")});
    b.insert(b.end(), {"--ablation", "standard", "--attention", tmp.file("b.tsv")});
    const auto ra = run(a), rb = run(b);
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(rb.code, 0) << rb.err;
    EXPECT_EQ(ra.out, rb.out);
    EXPECT_EQ(slurp(tmp.file("a.tsv")), slurp(tmp.file("b.tsv")));
}

TEST(Cli, PoolSingleResidue) {
    TempDir tmp;
    const auto protein = tmp.file("one.tsv", "1\tGLY\t0\t0\t0\n");
    const auto emb = tmp.file("one_emb.tsv", "0.5\t-1\t2\n");
    const auto profile = tmp.file("one_attn.tsv");
    const auto r = run({"pool", "--protein", protein, "--poses", data("fixture_pose1.xyz"), "--embeddings", emb,
                        "--attention", profile});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = parse_attention_profile(slurp(profile));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].weight, 1.0);
}

TEST(Cli, PoolParamsBundleAndMismatch) {
    TempDir tmp;
    const auto bundle = tmp.file("params.tsv");
    {
        std::ofstream os(bundle);
        write_params_bundle(os, init_params(3, 2, 2, 9));
    }
    const auto ok = run(cmd("pool", fixture_args({"--embeddings", data("fixture_embeddings.tsv"), "--params", bundle})));
    EXPECT_EQ(ok.code, 0) << ok.err;

    {
        std::ofstream os(bundle);
        write_params_bundle(os, init_params(5, 2, 2, 9));
    }
    const auto bad = run(cmd("pool", fixture_args({"--embeddings", data("fixture_embeddings.tsv"), "--params", bundle})));
    EXPECT_EQ(bad.code, cli::kValidationError);
    EXPECT_NE(bad.err.find("dimension"), std::string::npos);

    const auto rows = tmp.file("short.tsv", "1\t2\t3\n4\t5\t6\n");
    EXPECT_EQ(run(cmd("pool", fixture_args({"--embeddings", rows}))).code, cli::kValidationError);
}

TEST(Cli, GradcheckExitCodes) {
    const auto ok = run({"gradcheck", "--seed", "4"});
    EXPECT_EQ(ok.code, 0) << ok.out;
    EXPECT_NE(ok.out.find("status\tpass"), std::string::npos);
    EXPECT_EQ(run({"gradcheck", "--seed", "4"}).out, ok.out);

    const auto thin = run({"gradcheck", "--dh", "1", "--fixtures", "20"});
    EXPECT_EQ(thin.code, 0) << thin.out;

    const auto bad = run({"gradcheck", "--seed", "4", "--corrupt-gradient"});
    EXPECT_EQ(bad.code, cli::kGradCheckFailed);
    EXPECT_NE(bad.out.find("status\tfail"), std::string::npos);
}

TEST(Cli, TrainToyDefault) {
    TempDir tmp;
    const auto metrics = tmp.file("metrics.tsv");
    const auto params = tmp.file("params.tsv");
    const auto r = run({"train-toy", "--out", metrics, "--params-out", params});
    ASSERT_EQ(r.code, 0) << r.err;

    std::map<std::string, std::vector<std::string>> rows;
    for (auto line : lines_of(r.out)) {
        if (is_comment_or_blank(line)) continue;
        const auto f = split(line, '\t');
        rows[std::string(f[0])] = std::vector<std::string>(f.begin() + 1, f.end());
    }
    EXPECT_GE(*parse_double(rows.at("daa")[0]), 0.9);
    EXPECT_LE(*parse_double(rows.at("static")[0]), 0.65);
    EXPECT_EQ(rows.at("daa_vs_static")[3], "yes");
    EXPECT_GE(*parse_double(rows.at("daa_vs_static")[0]), 0.2);
    EXPECT_NE(r.out.find("significant_at_0.05"), std::string::npos);

    const auto m = slurp(metrics);
    EXPECT_EQ(lines_of(m).size(), 502u);
    const auto bundle = parse_params_bundle(slurp(params));
    ASSERT_TRUE(bundle.head.has_value());
    EXPECT_EQ(bundle.head->size(), 9u);
}

TEST(Cli, TrainToyZeroStepsAndDivergence) {
    const auto zero = run({"train-toy", "--steps", "0"});
    ASSERT_EQ(zero.code, 0) << zero.err;
    for (auto line : lines_of(zero.out)) {
        const auto f = split(line, '\t');
        if (f[0] == "daa" || f[0] == "standard" || f[0] == "docking" || f[0] == "static") {
            EXPECT_NEAR(*parse_double(f[1]), 0.5, 0.15) << line;
        }
    }

    const auto boom = run({"train-toy", "--lr", "1e250", "--steps", "10"});
    EXPECT_EQ(boom.code, cli::kDiverged);
    EXPECT_NE(boom.err.find("step"), std::string::npos);

    EXPECT_EQ(run({"train-toy", "--samples", "7"}).code, cli::kValidationError);
}

TEST(Cli, ZTestOutput) {
    const auto r = run({"ztest", "60", "100", "50", "100"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "z\t1.42134\np\t0.155218\nsignificant_at_0.05\tno\ndegenerate\tno\n");
    const auto d = run({"ztest", "0", "100", "0", "100"});
    EXPECT_NE(d.out.find("degenerate\tyes"), std::string::npos);
    EXPECT_EQ(run({"ztest", "5", "4", "1", "4"}).code, cli::kValidationError);
}

TEST(Cli, TopK) {
    TempDir tmp;
    const auto perfect = tmp.file("perfect.tsv", "A\tA\tB\nC\tC\n");
    const auto r = run({"topk", perfect, "--k", "1", "--k", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "# k\taccuracy\n1\t1\n2\t1\n");

    const auto mixed = tmp.file("mixed.tsv", "A\tB\tA\tC\nX\tY\tZ\n");
    EXPECT_EQ(run({"topk", "--input", mixed}).out, "# k\taccuracy\n1\t0\n3\t0.5\n5\t0.5\n");
    EXPECT_EQ(run({"topk", tmp.file("dup.tsv", "A\tA\tA\n")}).code, cli::kValidationError);
}

TEST(Cli, Pca) {
    TempDir tmp;
    const auto line = tmp.file("line.tsv", "0\t0\n1\t2\n2\t4\n3\t6\n");
    const auto r = run({"pca", line});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto header = split_ws(lines_of(r.out)[0]);
    ASSERT_EQ(header.size(), 4u);
    EXPECT_LT(std::fabs(*parse_double(header[3])), 1e-10);
    EXPECT_EQ(run({"pca", tmp.file("flat.tsv", "1\t1\n1\t1\n")}).code, cli::kValidationError);
}

TEST(Cli, DeterministicAcrossRunsAndThreads) {
    const std::vector<std::vector<std::string>> invocations{
        cmd("score", fixture_args()),
        cmd("pool", fixture_args({"--embeddings", data("fixture_embeddings.tsv"), "--seed", "5"})),
        {"gradcheck", "--seed", "2", "--fixtures", "2"},
        {"train-toy", "--steps", "40", "--samples", "80"},
        {"ztest", "7", "20", "3", "20"},
        {"pca", data("fixture_embeddings.tsv")},
    };
    for (const auto& args : invocations) {
        const auto a = run(args), b = run(args);
        auto threaded = args;
        threaded.insert(threaded.end(), {"--threads", "4"});
        const auto c = run(threaded);
        EXPECT_EQ(a.code, 0) << args[0] << ": " << a.err;
        EXPECT_EQ(a.out, b.out) << args[0];
        EXPECT_EQ(a.out, c.out) << args[0];
    }
}
