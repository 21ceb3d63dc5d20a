#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "neuralot/errors.hpp"
#include "neuralot/sinkhorn.hpp"

namespace neuralot {

namespace {

bool is_uniform(const Vector& w) {
  const double first = w[0];
  return (w.array() - first).abs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(first));
}

ExactOtResult solve_by_permutations(const CostMatrix& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  ExactOtResult best;
  best.cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
    // Strict improvement keeps the lexicographically smallest minimizer.
    if (total < best.cost) {
      best.cost = total;
      best.assignment = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.cost /= n;
  best.plan = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) best.plan(i, best.assignment[static_cast<std::size_t>(i)]) = 1.0 / n;
  return best;
}

// Tries to read a basic feasible solution off the cells selected by `mask`
// (|mask| = n + m - 1). Succeeds only if the cells form a spanning tree of the
// bipartite row/column graph and the induced flows are non-negative.
bool solve_basis(const Vector& a, const Vector& b, const std::vector<int>& cells, Matrix& plan) {
  const Eigen::Index n = a.size();
  const Eigen::Index m = b.size();
  Vector row_left = a;
  Vector col_left = b;
  std::vector<bool> done(cells.size(), false);
  plan.setZero(n, m);
  std::size_t remaining = cells.size();
  while (remaining > 0) {
    bool progressed = false;
    for (Eigen::Index r = 0; r < n + m && !progressed; ++r) {
      // Find a row (r < n) or column (r >= n) touched by exactly one open cell.
      int only = -1;
      int count = 0;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (done[c]) continue;
        const Eigen::Index ci = cells[c] / m;
        const Eigen::Index cj = cells[c] % m;
        if ((r < n && ci == r) || (r >= n && cj == r - n)) {
          ++count;
          only = static_cast<int>(c);
        }
      }
      if (count != 1) continue;
      const Eigen::Index ci = cells[static_cast<std::size_t>(only)] / m;
      const Eigen::Index cj = cells[static_cast<std::size_t>(only)] % m;
      const double flow = r < n ? row_left[ci] : col_left[cj];
      plan(ci, cj) = flow;
      row_left[ci] -= flow;
      col_left[cj] -= flow;
      done[static_cast<std::size_t>(only)] = true;
      --remaining;
      progressed = true;
    }
    if (!progressed) return false;  // cycle: not a basis
  }
  const double tol = 1e-12;
  if (row_left.cwiseAbs().maxCoeff() > tol || col_left.cwiseAbs().maxCoeff() > tol) return false;
  return plan.minCoeff() >= -tol;
}

ExactOtResult solve_by_vertices(const CostMatrix& cost, const Vector& a, const Vector& b) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const int cells = n * m;
  const int basis = n + m - 1;
  ExactOtResult best;
  best.cost = std::numeric_limits<double>::infinity();
  Matrix plan;
  for (unsigned mask = 0; mask < (1u << cells); ++mask) {
    if (std::popcount(mask) != basis) continue;
    std::vector<int> chosen;
    for (int c = 0; c < cells; ++c) {
      if (mask & (1u << c)) chosen.push_back(c);
    }
    if (!solve_basis(a, b, chosen, plan)) continue;
    plan = plan.cwiseMax(0.0);
    const double total = plan.cwiseProduct(cost).sum();
    if (total < best.cost - 1e-14) {
      best.cost = total;
      best.plan = plan;
    }
  }
  if (!std::isfinite(best.cost)) throw NumericalError("brute_force_ot: no feasible vertex found");
  return best;
}

}  // namespace

ExactOtResult brute_force_ot(const CostMatrix& cost, const Vector& a, const Vector& b) {
  require(cost.rows() == a.size() && cost.cols() == b.size(),
          "brute_force_ot: cost shape does not match weights");
  require(a.size() > 0 && b.size() > 0, "brute_force_ot: empty instance");
  require((a.array() > 0.0).all() && (b.array() > 0.0).all(),
          "brute_force_ot: weights must be positive");
  require(std::abs(a.sum() - b.sum()) <= 1e-9, "brute_force_ot: weights must have equal mass");
  const auto n = a.size();
  const auto m = b.size();
  if (n == m && is_uniform(a) && is_uniform(b)) {
    if (n > 8) {
      throw PreconditionError("brute_force_ot: permutation search limited to n <= 8, got " +
                              std::to_string(n));
    }
    return solve_by_permutations(cost);
  }
  if (n * m > 12) {
    throw PreconditionError("brute_force_ot: vertex search limited to n*m <= 12, got " +
                            std::to_string(n * m));
  }
  return solve_by_vertices(cost, a, b);
}

}  // namespace neuralot
