#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace zeroreg {

using IndexPair = std::pair<int, int>;

/// Binary n x m object assignment together with its objective value.
struct AssignmentMatrix {
  Eigen::MatrixXd entries;
  double objective = 0.0;

  /// Matched (source, target) pairs sorted by source index.
  std::vector<IndexPair> pairs() const;

  static AssignmentMatrix FromPairs(Eigen::Index n, Eigen::Index m, const std::vector<IndexPair>& pairs);
};

struct ObjectCorrespondences {
  std::vector<IndexPair> pairs;

  std::size_t count() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Row/column sums <= 1, binary, and the smaller side fully matched.
bool is_feasible_assignment(const Eigen::MatrixXd& x);

/// ||Wp - X Wq X^T||_F^2 - sum_jk C_jk X_jk. Accepts relaxed (fractional) X.
double qap_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq,
                     const Eigen::MatrixXd& c);

/// Gradient of qap_objective with respect to X.
Eigen::MatrixXd qap_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq,
                             const Eigen::MatrixXd& c);

struct QapOptions {
  int exact_limit = 8;        // exhaustive search when min(n, m) <= this
  int max_iterations = 100;   // conditional-gradient iterations
  double tolerance = 1e-8;    // stop when the objective changes less than this
};

/// Exhaustive search over injective matchings of the smaller side. Ties go to
/// the lexicographically smallest pair list. Throws SizeLimitError when
/// min(n, m) > exact_limit.
AssignmentMatrix solve_qap_exact(const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& c,
                                 int exact_limit = 8);

/// Exact search for small instances, otherwise conditional gradient on the
/// relaxed polytope followed by assignment rounding. The rounded iterate with
/// the lowest objective is returned.
AssignmentMatrix solve_qap(const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& c,
                           const QapOptions& options = {});

/// Linear assignment maximizing total similarity; object matching without the
/// structural term.
AssignmentMatrix solve_similarity_matching(const Eigen::MatrixXd& c);

/// Penalty placed on label-mismatched pairs when categories act as a hard constraint.
inline constexpr double kCategoryMismatchPenalty = -1.0e4;

/// Copy of C with label-mismatched entries replaced by `penalty`.
Eigen::MatrixXd apply_category_constraint(const Eigen::MatrixXd& c, const std::vector<std::string>& labels_p,
                                          const std::vector<std::string>& labels_q,
                                          double penalty = kCategoryMismatchPenalty);

/// Keeps matched pairs whose (trimmed) labels are equal.
ObjectCorrespondences filter_by_category(const AssignmentMatrix& assignment, const std::vector<std::string>& labels_p,
                                         const std::vector<std::string>& labels_q);

}  // namespace zeroreg
