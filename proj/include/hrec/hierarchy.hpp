#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hrec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised for malformed aggregation trees.
class HierarchyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Edge = std::pair<std::string, std::string>;  // (parent, child)

/**
 * Nested aggregation tree with its summing matrix.
 *
 * Rows are ordered with internal nodes first (by depth, then label) and the
 * m leaves last (by label), so the trailing m x m block of S is the identity.
 * Immutable after construction.
 */
class Hierarchy {
public:
    /// Builds the tree from (parent, child) edges. Edge order does not matter.
    static Hierarchy from_edges(const std::vector<Edge>& edges);

    std::size_t n() const { return labels_.size(); }
    std::size_t m() const { return m_; }

    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(std::size_t i) const { return labels_.at(i); }
    const std::string& root() const { return labels_.front(); }
    std::optional<std::size_t> index_of(const std::string& label) const;
    std::optional<std::string> parent_of(const std::string& label) const;

    /// Depth of each row (root = 0).
    const std::vector<int>& levels() const { return levels_; }
    int num_levels() const;

    /// n x m binary summing matrix.
    const Matrix& summing() const { return S_; }

    /// Bottom (leaf) block of a full n-vector.
    Vector bottom(const Vector& y) const { return y.tail(static_cast<Eigen::Index>(m_)); }

    const std::vector<Edge>& edges() const { return edges_; }

private:
    std::vector<std::string> labels_;
    std::vector<int> levels_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, std::string> parent_;
    std::vector<Edge> edges_;
    std::size_t m_ = 0;
    Matrix S_;
};

Hierarchy build_hierarchy(const std::vector<Edge>& edges);

/// True iff max_i |y_i - (S * bottom(y))_i| <= tol.
bool check_coherent(const Hierarchy& h, const Vector& y, double tol);

/// Largest aggregation violation of y, max_i |y_i - (S * bottom(y))_i|.
double coherence_gap(const Hierarchy& h, const Vector& y);

/// Reads a `parent,child` CSV.
Hierarchy load_hierarchy(const std::filesystem::path& path);
void save_hierarchy(const Hierarchy& h, const std::filesystem::path& path);

}  // namespace hrec
