#include "hrec/hierarchy.hpp"

#include "hrec/csv.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace hrec {

Hierarchy Hierarchy::from_edges(const std::vector<Edge>& edges)
{
    if (edges.empty()) {
        throw HierarchyError("hierarchy: no edges, leaf set is empty");
    }

    std::map<std::string, std::string> parent;
    std::map<std::string, std::vector<std::string>> children;
    std::set<std::string> nodes;
    for (const auto& [p, c] : edges) {
        if (p.empty() || c.empty()) {
            throw HierarchyError("hierarchy: empty node label");
        }
        if (p == c) {
            throw HierarchyError("hierarchy: cycle detected at '" + p + "'");
        }
        if (parent.count(c)) {
            throw HierarchyError("hierarchy: duplicate child '" + c + "'");
        }
        parent[c] = p;
        children[p].push_back(c);
        nodes.insert(p);
        nodes.insert(c);
    }

    std::vector<std::string> roots;
    for (const auto& v : nodes) {
        if (!parent.count(v)) roots.push_back(v);
    }
    if (roots.empty()) {
        throw HierarchyError("hierarchy: cycle detected (no root)");
    }
    if (roots.size() > 1) {
        throw HierarchyError("hierarchy: multiple roots ('" + roots[0] + "', '" + roots[1] + "')");
    }

    // Breadth-first from the root; anything unreached sits on a cycle.
    std::map<std::string, int> depth;
    std::vector<std::string> frontier{roots.front()};
    depth[roots.front()] = 0;
    while (!frontier.empty()) {
        std::vector<std::string> next;
        for (const auto& v : frontier) {
            auto it = children.find(v);
            if (it == children.end()) continue;
            for (const auto& c : it->second) {
                if (depth.count(c)) {
                    throw HierarchyError("hierarchy: cycle detected at '" + c + "'");
                }
                depth[c] = depth[v] + 1;
                next.push_back(c);
            }
        }
        frontier = std::move(next);
    }
    if (depth.size() != nodes.size()) {
        for (const auto& v : nodes) {
            if (!depth.count(v)) {
                throw HierarchyError("hierarchy: cycle detected at '" + v + "'");
            }
        }
    }

    std::vector<std::string> internal;
    std::vector<std::string> leaves;
    for (const auto& v : nodes) {
        (children.count(v) ? internal : leaves).push_back(v);
    }
    std::stable_sort(internal.begin(), internal.end(), [&](const auto& a, const auto& b) {
        return depth[a] != depth[b] ? depth[a] < depth[b] : a < b;
    });
    // leaves are already in label order (std::set iteration)

    Hierarchy h;
    h.m_ = leaves.size();
    h.labels_ = internal;
    h.labels_.insert(h.labels_.end(), leaves.begin(), leaves.end());
    for (std::size_t i = 0; i < h.labels_.size(); ++i) {
        h.index_[h.labels_[i]] = i;
        h.levels_.push_back(depth[h.labels_[i]]);
    }
    h.parent_ = std::move(parent);

    const auto n = static_cast<Eigen::Index>(h.labels_.size());
    const auto m = static_cast<Eigen::Index>(h.m_);
    h.S_ = Matrix::Zero(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        std::string v = h.labels_[static_cast<std::size_t>(n - m + j)];
        h.S_(static_cast<Eigen::Index>(h.index_[v]), j) = 1.0;
        while (h.parent_.count(v)) {
            v = h.parent_.at(v);
            h.S_(static_cast<Eigen::Index>(h.index_[v]), j) = 1.0;
        }
    }

    for (const auto& v : h.labels_) {
        if (auto it = h.parent_.find(v); it != h.parent_.end()) {
            h.edges_.emplace_back(it->second, v);
        }
    }
    return h;
}

std::optional<std::size_t> Hierarchy::index_of(const std::string& label) const
{
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> Hierarchy::parent_of(const std::string& label) const
{
    auto it = parent_.find(label);
    if (it == parent_.end()) return std::nullopt;
    return it->second;
}

int Hierarchy::num_levels() const
{
    return levels_.empty() ? 0 : *std::max_element(levels_.begin(), levels_.end()) + 1;
}

Hierarchy build_hierarchy(const std::vector<Edge>& edges)
{
    return Hierarchy::from_edges(edges);
}

double coherence_gap(const Hierarchy& h, const Vector& y)
{
    if (static_cast<std::size_t>(y.size()) != h.n()) {
        throw std::invalid_argument("check_coherent: vector length " + std::to_string(y.size()) +
                                    " does not match n=" + std::to_string(h.n()));
    }
    const Vector implied = h.summing() * h.bottom(y);
    return (y - implied).cwiseAbs().maxCoeff();
}

bool check_coherent(const Hierarchy& h, const Vector& y, double tol)
{
    return coherence_gap(h, y) <= tol;
}

Hierarchy load_hierarchy(const std::filesystem::path& path)
{
    const CsvTable table = read_csv(path);
    const auto pcol = table.column("parent");
    const auto ccol = table.column("child");
    if (!pcol || !ccol) {
        throw HierarchyError("hierarchy: " + path.string() + " needs a `parent,child` header");
    }
    std::vector<Edge> edges;
    edges.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        edges.emplace_back(row.at(*pcol), row.at(*ccol));
    }
    return build_hierarchy(edges);
}

void save_hierarchy(const Hierarchy& h, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("hierarchy: cannot write " + path.string());
    out << "parent,child\n";
    for (const auto& [p, c] : h.edges()) out << p << ',' << c << '\n';
}

}  // namespace hrec
