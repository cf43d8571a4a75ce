#pragma once

// Readers, writers and seeded generators for the three inputs of the
// docking-aware pooling pipeline: residue coordinates, ligand pose ensembles
// and per-residue embedding matrices.
//
// Residue TSV    index<TAB>label<TAB>x<TAB>y<TAB>z, '#' starts a comment line
// Pose XYZ       atom count, free comment, then "element x y z" per atom
// Embedding TSV  n lines of d tab-separated floats, no header

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "daa/common.hpp"
#include "daa/rng.hpp"

namespace daa {

struct Residue {
    int index = 0;  // 1-based
    std::string label;
    Vec3 position{};

    friend bool operator==(const Residue&, const Residue&) = default;
};

/// Ordered residues, one reference point (C-alpha) each.
class ProteinStructure {
public:
    ProteinStructure() = default;

    /// Checks: at least one residue, indices 1..n in order, finite coordinates.
    explicit ProteinStructure(std::vector<Residue> residues) : residues_(std::move(residues)) {
        if (residues_.empty()) throw ValidationError("protein has no residues");
        for (std::size_t i = 0; i < residues_.size(); ++i) {
            const auto& r = residues_[i];
            if (r.index != static_cast<int>(i + 1))
                throw ValidationError("residue indices must run 1..n; found " +
                                      std::to_string(r.index) + " at position " +
                                      std::to_string(i + 1));
            for (double c : r.position)
                if (!std::isfinite(c))
                    throw ValidationError("non-finite coordinate for residue " +
                                          std::to_string(r.index));
        }
    }

    std::size_t size() const { return residues_.size(); }
    const std::vector<Residue>& residues() const { return residues_; }
    const Residue& operator[](std::size_t i) const { return residues_[i]; }

    friend bool operator==(const ProteinStructure&, const ProteinStructure&) = default;

private:
    std::vector<Residue> residues_;
};

struct PoseAtom {
    std::string element;
    Vec3 position{};

    friend bool operator==(const PoseAtom&, const PoseAtom&) = default;
};

using Pose = std::vector<PoseAtom>;

/// K ligand poses sharing one atom sequence.
class PoseEnsemble {
public:
    PoseEnsemble() = default;

    explicit PoseEnsemble(std::vector<Pose> poses) : poses_(std::move(poses)) {
        if (poses_.empty()) throw ValidationError("pose ensemble is empty");
        const Pose& ref = poses_.front();
        if (ref.empty()) throw ValidationError("pose 1 has no atoms");
        for (std::size_t k = 0; k < poses_.size(); ++k) {
            const Pose& p = poses_[k];
            if (p.size() != ref.size())
                throw ValidationError("pose atom mismatch: pose " + std::to_string(k + 1) +
                                      " has " + std::to_string(p.size()) + " atoms, pose 1 has " +
                                      std::to_string(ref.size()));
            for (std::size_t j = 0; j < p.size(); ++j) {
                if (p[j].element != ref[j].element)
                    throw ValidationError("pose atom mismatch: pose " + std::to_string(k + 1) +
                                          " atom " + std::to_string(j + 1) + " is " +
                                          p[j].element + ", pose 1 has " + ref[j].element);
                for (double c : p[j].position)
                    if (!std::isfinite(c))
                        throw ValidationError("non-finite coordinate in pose " +
                                              std::to_string(k + 1) + " atom " +
                                              std::to_string(j + 1));
            }
        }
    }

    std::size_t pose_count() const { return poses_.size(); }
    std::size_t atom_count() const { return poses_.empty() ? 0 : poses_.front().size(); }
    const std::vector<Pose>& poses() const { return poses_; }
    const Pose& operator[](std::size_t k) const { return poses_[k]; }

    friend bool operator==(const PoseEnsemble&, const PoseEnsemble&) = default;

private:
    std::vector<Pose> poses_;
};

/// n x d per-residue embeddings with finite entries.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;

    explicit EmbeddingMatrix(Matrix values) : values_(std::move(values)) {
        if (values_.rows() == 0 || values_.cols() == 0)
            throw ValidationError("embedding matrix must have at least one row and column");
        for (std::size_t i = 0; i < values_.rows(); ++i)
            for (std::size_t j = 0; j < values_.cols(); ++j)
                if (!std::isfinite(values_(i, j)))
                    throw ValidationError("non-finite entry at row " + std::to_string(i + 1) +
                                          ", column " + std::to_string(j + 1));
    }

    std::size_t rows() const { return values_.rows(); }
    std::size_t cols() const { return values_.cols(); }
    double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
    std::span<const double> row(std::size_t i) const { return values_.row(i); }
    const Matrix& matrix() const { return values_; }

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

private:
    Matrix values_;
};

// ---------------------------------------------------------------------------
// Residue TSV
// ---------------------------------------------------------------------------

inline ProteinStructure parse_protein_tsv(std::string_view text) {
    std::vector<Residue> residues;
    std::vector<std::size_t> line_of;
    std::set<long long> seen;
    const auto lines = lines_of(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const std::string_view line = lines[ln];
        if (is_comment_or_blank(line)) continue;
        const std::string where = "line " + std::to_string(ln + 1);
        const auto fields = split(trim(line), '\t');
        if (fields.size() != 5)
            throw ParseError("malformed " + where + ": expected 5 tab-separated fields, got " +
                             std::to_string(fields.size()));
        const auto idx = parse_int(fields[0]);
        if (!idx) throw ParseError("malformed " + where + ": bad residue index");
        const auto label = trim(fields[1]);
        if (label.empty()) throw ParseError("malformed " + where + ": empty residue label");
        Vec3 pos{};
        for (int a = 0; a < 3; ++a) {
            const auto v = parse_double(fields[2 + a]);
            if (!v) throw ParseError("malformed " + where + ": bad coordinate");
            if (!std::isfinite(*v)) throw ValidationError("non-finite coordinate at " + where);
            pos[a] = *v;
        }
        if (!seen.insert(*idx).second)
            throw ValidationError("duplicate residue index " + std::to_string(*idx) + " at " +
                                  where);
        residues.push_back({static_cast<int>(*idx), std::string(label), pos});
        line_of.push_back(ln + 1);
    }
    if (residues.empty()) throw ParseError("empty protein file");

    // Contiguous indices starting anywhere are renumbered to 1..n.
    const int first = residues.front().index;
    for (std::size_t i = 0; i < residues.size(); ++i) {
        if (residues[i].index != first + static_cast<int>(i))
            throw ValidationError("non-contiguous residue index " +
                                  std::to_string(residues[i].index) + " at line " +
                                  std::to_string(line_of[i]));
        residues[i].index = static_cast<int>(i + 1);
    }
    return ProteinStructure(std::move(residues));
}

inline void write_protein_tsv(std::ostream& os, const ProteinStructure& protein) {
    for (const auto& r : protein.residues()) {
        os << r.index << '\t' << r.label;
        for (double c : r.position) os << '\t' << format_double(c);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// PDB C-alpha reader. Fixed columns: record name 1-6, atom name 13-16,
// residue name 18-20, chain 22, residue number 23-26, insertion code 27,
// x/y/z 31-38/39-46/47-54. Only the first model is read.
// ---------------------------------------------------------------------------

inline ProteinStructure parse_pdb_ca(std::string_view text) {
    std::vector<Residue> residues;
    std::string last_key;
    const auto lines = lines_of(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const std::string_view line = lines[ln];
        if (line.substr(0, 6) == "ENDMDL") break;
        if (line.substr(0, 6) != "ATOM  ") continue;
        if (line.size() < 16 || trim(line.substr(12, 4)) != "CA") continue;
        if (line.size() < 54)
            throw ParseError("unparseable coordinate columns at line " + std::to_string(ln + 1));
        Vec3 pos{};
        for (int a = 0; a < 3; ++a) {
            const auto v = parse_double(line.substr(30 + 8 * a, 8));
            if (!v || !std::isfinite(*v))
                throw ParseError("unparseable coordinate columns at line " +
                                 std::to_string(ln + 1));
            pos[a] = *v;
        }
        // One CA per residue: alternate locations of the same residue are skipped.
        std::string key(line.substr(21, 6));
        if (!residues.empty() && key == last_key) continue;
        last_key = std::move(key);
        std::string label(trim(line.substr(17, 3)));
        if (label.empty()) label = "UNK";
        residues.push_back({static_cast<int>(residues.size() + 1), std::move(label), pos});
    }
    if (residues.empty()) throw ParseError("zero CA atoms found");
    return ProteinStructure(std::move(residues));
}

// ---------------------------------------------------------------------------
// Pose XYZ
// ---------------------------------------------------------------------------

inline Pose parse_xyz_pose(std::string_view text, std::size_t pose_number = 1) {
    const std::string which = "pose " + std::to_string(pose_number);
    const auto lines = lines_of(text);
    if (lines.empty()) throw ParseError(which + ": empty XYZ input");
    const auto count = parse_int(lines[0]);
    if (!count || *count < 1) throw ParseError(which + ": bad atom count line");

    // Trailing blank lines are tolerated; everything after the comment line
    // up to the last non-blank line must be an atom record.
    std::size_t end = lines.size();
    while (end > 2 && trim(lines[end - 1]).empty()) --end;
    const std::size_t found = end > 2 ? end - 2 : 0;
    if (found != static_cast<std::size_t>(*count))
        throw ParseError(which + ": atom count mismatch, header says " +
                         std::to_string(*count) + ", found " + std::to_string(found) +
                         " atom lines");

    Pose pose;
    pose.reserve(found);
    for (std::size_t ln = 2; ln < end; ++ln) {
        const auto toks = split_ws(lines[ln]);
        const std::string where = which + " line " + std::to_string(ln + 1);
        if (toks.size() < 4) throw ParseError(where + ": expected 'element x y z'");
        PoseAtom atom;
        atom.element = std::string(toks[0]);
        for (int a = 0; a < 3; ++a) {
            const auto v = parse_double(toks[1 + a]);
            if (!v) throw ParseError(where + ": bad coordinate");
            if (!std::isfinite(*v)) throw ValidationError("non-finite coordinate at " + where);
            atom.position[a] = *v;
        }
        pose.push_back(std::move(atom));
    }
    return pose;
}

/// One text per pose.
inline PoseEnsemble parse_pose_xyz(std::span<const std::string_view> texts) {
    std::vector<Pose> poses;
    poses.reserve(texts.size());
    for (std::size_t k = 0; k < texts.size(); ++k) poses.push_back(parse_xyz_pose(texts[k], k + 1));
    return PoseEnsemble(std::move(poses));
}

inline PoseEnsemble parse_pose_xyz(std::span<const std::string> texts) {
    std::vector<std::string_view> views(texts.begin(), texts.end());
    return parse_pose_xyz(std::span<const std::string_view>(views));
}

inline void write_pose_xyz(std::ostream& os, const Pose& pose, std::string_view comment = {}) {
    os << pose.size() << '\n' << comment << '\n';
    for (const auto& a : pose) {
        os << a.element;
        for (double c : a.position) os << ' ' << format_double(c);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Embedding TSV. '#' lines are skipped so the metadata headers written by the
// other exporters do not get in the way.
// ---------------------------------------------------------------------------

inline EmbeddingMatrix parse_embeddings(std::string_view text) {
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    for (const auto line : lines_of(text)) {
        if (is_comment_or_blank(line)) continue;
        const auto fields = split(trim(line), '\t');
        ++rows;
        if (rows == 1) cols = fields.size();
        else if (fields.size() != cols) throw ParseError("ragged row " + std::to_string(rows));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto v = parse_double(fields[c]);
            if (!v)
                throw ParseError("bad number at row " + std::to_string(rows) + ", column " +
                                 std::to_string(c + 1));
            if (!std::isfinite(*v))
                throw ValidationError("non-finite entry at row " + std::to_string(rows) +
                                      ", column " + std::to_string(c + 1));
            values.push_back(*v);
        }
    }
    if (rows == 0) throw ParseError("empty input");
    return EmbeddingMatrix(Matrix(rows, cols, std::move(values)));
}

inline void write_embeddings(std::ostream& os, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) write_row(os, m.row(i));
}

inline void write_embeddings(std::ostream& os, const EmbeddingMatrix& e) {
    write_embeddings(os, e.matrix());
}

// ---------------------------------------------------------------------------
// Seeded generators (see rng.hpp for the exact stream definition)
// ---------------------------------------------------------------------------

/// Entry (i, j) is normal draw number i*d + j of CounterRng(seed).
inline EmbeddingMatrix synth_embeddings(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (n == 0 || d == 0) throw ValidationError("synthetic embeddings need n >= 1 and d >= 1");
    CounterRng rng(seed);
    Matrix m(n, d);
    for (double& v : m.values()) v = rng.normal();
    return EmbeddingMatrix(std::move(m));
}

/// K poses of n_m carbon atoms around one residue. Atom coordinates are
/// anchor + spread * N(0, 1) per axis, drawn in (pose, atom, axis) order
/// from CounterRng(seed).
inline PoseEnsemble synth_pose_ensemble(const ProteinStructure& protein, int anchor_residue,
                                        std::size_t atoms_per_pose, std::size_t pose_count,
                                        double spread, std::uint64_t seed) {
    if (anchor_residue < 1 || static_cast<std::size_t>(anchor_residue) > protein.size())
        throw ValidationError("invalid anchor residue " + std::to_string(anchor_residue));
    if (!(spread > 0.0) || !std::isfinite(spread))
        throw ValidationError("pose spread must be positive");
    if (atoms_per_pose == 0 || pose_count == 0)
        throw ValidationError("pose ensemble needs at least one pose and one atom");
    const Vec3 anchor = protein[static_cast<std::size_t>(anchor_residue - 1)].position;
    CounterRng rng(seed);
    std::vector<Pose> poses(pose_count, Pose(atoms_per_pose));
    for (auto& pose : poses)
        for (auto& atom : pose) {
            atom.element = "C";
            for (int a = 0; a < 3; ++a) atom.position[a] = anchor[a] + spread * rng.normal();
        }
    return PoseEnsemble(std::move(poses));
}

} // namespace daa
