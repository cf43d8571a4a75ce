#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "daa/structio.hpp"

using namespace daa;

namespace {

std::string read_data(const std::string& name) {
    std::ifstream in(std::string(DAA_TEST_DATA_DIR) + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class Fn>
std::string error_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(ProteinTsv, SingleRecordAtOrigin) {
    const auto p = parse_protein_tsv("1\tALA\t0.0\t0.0\t0.0\n");
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0].index, 1);
    EXPECT_EQ(p[0].label, "ALA");
    EXPECT_EQ(p[0].position, (Vec3{0, 0, 0}));
}

TEST(ProteinTsv, PreservesOrder) {
    const auto p = parse_protein_tsv("1\tALA\t0\t0\t0\n2\tGLY\t1.5\t-2\t3e1\n");
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[1].label, "GLY");
    EXPECT_EQ(p[1].position, (Vec3{1.5, -2.0, 30.0}));
}

TEST(ProteinTsv, NonFiniteCoordinate) {
    EXPECT_THROW(parse_protein_tsv("1\tALA\tNaN\t0\t0"), ValidationError);
    EXPECT_EQ(error_of([] { parse_protein_tsv("1\tALA\tNaN\t0\t0"); }),
              "non-finite coordinate at line 1");
    EXPECT_THROW(parse_protein_tsv("1\tALA\tinf\t0\t0"), ValidationError);
}

TEST(ProteinTsv, MalformedLineReportsLineNumber) {
    const auto msg = error_of([] { parse_protein_tsv("# header\n1\tALA\t0\t0\n"); });
    EXPECT_NE(msg.find("malformed line 2"), std::string::npos) << msg;
    EXPECT_THROW(parse_protein_tsv("x\tALA\t0\t0\t0"), ParseError);
    EXPECT_THROW(parse_protein_tsv("1\tALA\t0.0.0\t0\t0"), ParseError);
}

TEST(ProteinTsv, DuplicateAndGapsAndEmpty) {
    EXPECT_THROW(parse_protein_tsv("1\tA\t0\t0\t0\n1\tB\t1\t0\t0\n"), ValidationError);
    EXPECT_NE(error_of([] { parse_protein_tsv("1\tA\t0\t0\t0\n1\tB\t1\t0\t0\n"); })
                  .find("duplicate residue index 1"),
              std::string::npos);
    EXPECT_THROW(parse_protein_tsv("1\tA\t0\t0\t0\n3\tB\t1\t0\t0\n"), ValidationError);
    EXPECT_THROW(parse_protein_tsv(""), ParseError);
    EXPECT_THROW(parse_protein_tsv("# only a comment\n\n"), ParseError);
}

TEST(ProteinTsv, RenumbersContiguousIndices) {
    const auto p = parse_protein_tsv("10\tA\t0\t0\t0\r\n11\tB\t1\t0\t0\r\n12\tC\t2\t0\t0\r\n");
    ASSERT_EQ(p.size(), 3u);
    EXPECT_EQ(p[0].index, 1);
    EXPECT_EQ(p[2].index, 3);
    EXPECT_EQ(p[2].label, "C");
}

TEST(PdbCa, ExtractsOneCaPerResidue) {
    const auto p = parse_pdb_ca(read_data("fixture_ca.pdb"));
    ASSERT_EQ(p.size(), 4u);
    EXPECT_EQ(p[1].label, "SER");
    EXPECT_EQ(p[1].position, (Vec3{3.8, 0.0, 0.0}));  // CA, not the CB at y = 1
    EXPECT_EQ(p[3].index, 4);
}

TEST(PdbCa, CaAndCbForOneResidue) {
    const std::string text =
        "ATOM      1  CA  ALA A   1       1.000   2.000   3.000  1.00  0.00           C\n"
        "ATOM      2  CB  ALA A   1       2.000   2.000   3.000  1.00  0.00           C\n";
    const auto p = parse_pdb_ca(text);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0].position, (Vec3{1.0, 2.0, 3.0}));
}

TEST(PdbCa, Errors) {
    const std::string het =
        "HETATM    1  CA  CA  A 101       1.000   2.000   3.000  1.00  0.00          CA\n";
    EXPECT_EQ(error_of([&] { parse_pdb_ca(het); }), "zero CA atoms found");
    EXPECT_THROW(parse_pdb_ca("ATOM      1  CA  ALA A   1       1.000   x.000   3.000\n"),
                 ParseError);
    EXPECT_THROW(parse_pdb_ca("ATOM      1  CA  ALA A   1       1.000\n"), ParseError);
}

TEST(PoseXyz, SingleAndMultiplePoses) {
    const std::vector<std::string> one = {"2\ncomment\nC 0 0 0\nO 1.2 0 0\n"};
    const auto e1 = parse_pose_xyz(std::span<const std::string>(one));
    EXPECT_EQ(e1.pose_count(), 1u);
    EXPECT_EQ(e1.atom_count(), 2u);

    const std::vector<std::string> two = {"2\n\nC 0 0 0\nO 1.2 0 0\n",
                                          "2\nsecond\nC 0.5 0 0\nO 1.7 0.1 0\n\n"};
    const auto e2 = parse_pose_xyz(std::span<const std::string>(two));
    EXPECT_EQ(e2.pose_count(), 2u);
    EXPECT_DOUBLE_EQ(e2[1][1].position[1], 0.1);
}

TEST(PoseXyz, Errors) {
    const std::vector<std::string> swapped = {"2\n\nC 0 0 0\nO 1 0 0\n", "2\n\nO 0 0 0\nC 1 0 0\n"};
    EXPECT_NE(error_of([&] { parse_pose_xyz(std::span<const std::string>(swapped)); })
                  .find("pose atom mismatch"),
              std::string::npos);
    const std::vector<std::string> short_count = {"3\n\nC 0 0 0\nO 1 0 0\n"};
    EXPECT_THROW(parse_pose_xyz(std::span<const std::string>(short_count)), ParseError);
    const std::vector<std::string> long_count = {"1\n\nC 0 0 0\nO 1 0 0\n"};
    EXPECT_THROW(parse_pose_xyz(std::span<const std::string>(long_count)), ParseError);
    const std::vector<std::string> none;
    EXPECT_THROW(parse_pose_xyz(std::span<const std::string>(none)), ValidationError);
    const std::vector<std::string> sizes = {"1\n\nC 0 0 0\n", "2\n\nC 0 0 0\nO 1 0 0\n"};
    EXPECT_THROW(parse_pose_xyz(std::span<const std::string>(sizes)), ValidationError);
}

TEST(Embeddings, ParsesRectangularTsv) {
    const auto e = parse_embeddings("1.0\t2.0\n3.0\t4.0");
    ASSERT_EQ(e.rows(), 2u);
    ASSERT_EQ(e.cols(), 2u);
    EXPECT_EQ(e(0, 1), 2.0);
    EXPECT_EQ(e(1, 0), 3.0);
    const auto single = parse_embeddings("5.0");
    EXPECT_EQ(single.rows(), 1u);
    EXPECT_EQ(single(0, 0), 5.0);
}

TEST(Embeddings, Errors) {
    EXPECT_EQ(error_of([] { parse_embeddings("1.0\n1.0\t2.0"); }), "ragged row 2");
    EXPECT_THROW(parse_embeddings("1.0\tnan"), ValidationError);
    EXPECT_THROW(parse_embeddings(""), ParseError);
    EXPECT_THROW(parse_embeddings("1.0\tabc"), ParseError);
}

TEST(Synthetic, EmbeddingsAreDeterministic) {
    EXPECT_EQ(synth_embeddings(5, 4, 99), synth_embeddings(5, 4, 99));
    EXPECT_NE(synth_embeddings(5, 4, 99), synth_embeddings(5, 4, 100));
    EXPECT_THROW(synth_embeddings(0, 4, 1), ValidationError);
    EXPECT_THROW(synth_embeddings(3, 0, 1), ValidationError);
}

TEST(Synthetic, EmbeddingsMatchReferenceGenerator) {
    // Values from tests/oracles/gen_goldens.py, which re-implements the stream.
    const auto e = synth_embeddings(4, 3, 7);
    EXPECT_NEAR(e(0, 0), 0.9884743323187353, 1e-15);
    EXPECT_NEAR(e(0, 1), -1.8642558067312274, 1e-15);
    EXPECT_NEAR(e(0, 2), 0.00392020721518934, 1e-15);
}

TEST(Synthetic, EmbeddingMomentsRegression) {
    const auto e = synth_embeddings(1000, 8, 2024);
    const double m = mean(e.matrix().values());
    EXPECT_NEAR(m, 0.0, 0.1);
    EXPECT_NEAR(m, -0.0025741573992835694, 1e-12);
    double var = 0.0;
    for (double v : e.matrix().values()) var += (v - m) * (v - m);
    var /= 8000.0;
    EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Synthetic, PoseEnsemble) {
    std::vector<Residue> rs;
    for (int i = 1; i <= 6; ++i) rs.push_back({i, "ALA", {1.5 * i, -0.5 * i, 2.0}});
    const ProteinStructure protein(rs);

    const auto tight = synth_pose_ensemble(protein, 2, 5, 3, 1e-9, 1);
    for (const auto& pose : tight.poses())
        for (const auto& atom : pose) EXPECT_LT(distance(atom.position, protein[1].position), 1e-6);

    EXPECT_EQ(synth_pose_ensemble(protein, 3, 4, 3, 0.7, 5),
              synth_pose_ensemble(protein, 3, 4, 3, 0.7, 5));

    const auto spread = synth_pose_ensemble(protein, 5, 25, 4, 1.0, 17);
    Vec3 c{};
    for (const auto& pose : spread.poses())
        for (const auto& atom : pose)
            for (int a = 0; a < 3; ++a) c[a] += atom.position[a] / 100.0;
    EXPECT_LT(distance(c, protein[4].position), 3.0 * (1.0 / std::sqrt(100.0)));

    EXPECT_THROW(synth_pose_ensemble(protein, 0, 4, 3, 1.0, 5), ValidationError);
    EXPECT_THROW(synth_pose_ensemble(protein, 7, 4, 3, 1.0, 5), ValidationError);
    EXPECT_THROW(synth_pose_ensemble(protein, 1, 4, 3, 0.0, 5), ValidationError);
}

TEST(RoundTrip, ProteinAndEmbeddingsAtSixDigits) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CounterRng rng(seed);
        const std::size_t n = 1 + rng.below(12);
        std::vector<Residue> rs;
        for (std::size_t i = 0; i < n; ++i)
            rs.push_back({static_cast<int>(i + 1), "R" + std::to_string(rng.below(20)),
                          {rng.normal() * 30, rng.normal() * 1e-3, rng.normal() * 1e4}});
        const ProteinStructure protein(rs);
        std::ostringstream a;
        write_protein_tsv(a, protein);
        const auto back = parse_protein_tsv(a.str());
        ASSERT_EQ(back.size(), n);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(back[i].label, protein[i].label);
            for (int c = 0; c < 3; ++c)
                EXPECT_EQ(back[i].position[c], *parse_double(format_double(protein[i].position[c])));
        }
        std::ostringstream b;
        write_protein_tsv(b, back);
        EXPECT_EQ(a.str(), b.str());

        const auto e = synth_embeddings(n, 1 + rng.below(6), seed);
        std::ostringstream c;
        write_embeddings(c, e);
        const auto eb = parse_embeddings(c.str());
        ASSERT_EQ(eb.rows(), e.rows());
        ASSERT_EQ(eb.cols(), e.cols());
        for (std::size_t i = 0; i < e.rows(); ++i)
            for (std::size_t j = 0; j < e.cols(); ++j)
                EXPECT_NEAR(eb(i, j), e(i, j), 5e-6 * std::fabs(e(i, j)));
    }
}

TEST(Format, LocaleIndependentSixDigits) {
    EXPECT_EQ(format_double(0.1234567), "0.123457");
    EXPECT_EQ(format_double(1234567.0), "1.23457e+06");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_EQ(format_double(-0.0615234375), "-0.0615234");
}
