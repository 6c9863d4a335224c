#pragma once

// Small dense conic solver for linear matrix inequalities.
//
//   minimize    c^T x
//   subject to  Z(x) = F0 + sum_i x_i F_i  in  K
//
// K is a product of PSD cones and nonnegative orthants. The dual is
//
//   maximize    -F0 . X
//   subject to  F_i . X = c_i,  X in K.

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace hrec::conic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ConeKind { psd, nonneg };

struct Cone {
    ConeKind kind = ConeKind::psd;
    int size = 0;
};

/// One symmetric coefficient: `value` at (row, col) and (col, row) of cone
/// `cone`. Nonneg cones use row == col == position.
struct Entry {
    int cone = 0;
    int row = 0;
    int col = 0;
    double value = 0.0;
};

struct Program {
    std::vector<Cone> cones;
    Vector c;
    std::vector<std::vector<Entry>> coeff;  // F_i, one list per variable
    std::vector<Entry> constant;            // F0
    std::vector<std::string> names;         // optional, for dumps

    int num_vars() const { return static_cast<int>(coeff.size()); }

    /// Throws std::invalid_argument on out-of-range or lower-triangle entries.
    void validate() const;

    /// Plain-text listing of cones, objective and sparse affine entries.
    void dump(std::ostream& os) const;
};

/// Block-diagonal symmetric matrix laid out per cone; nonneg cones are size x 1.
struct BlockMatrix {
    std::vector<Matrix> blocks;
};

BlockMatrix affine_value(const Program& prog, const Vector& x);

struct Settings {
    double tol = 1e-7;
    int max_iter = 100;
    double step_fraction = 0.95;
    bool verbose = false;
};

enum class Status { optimal, near_optimal, failed };

std::string to_string(Status s);

struct Result {
    Status status = Status::failed;
    Vector x;
    BlockMatrix Z;  // primal slack Z(x)
    BlockMatrix X;  // dual variable
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    double primal_infeas = 0.0;  // relative ||Z - Z(x)||
    double dual_infeas = 0.0;    // relative ||c - A(X)||
    double rel_gap = 0.0;
    int iterations = 0;
    std::string message;

    double kkt_residual() const;
};

Result solve(const Program& prog, const Settings& settings = {});

}  // namespace hrec::conic
