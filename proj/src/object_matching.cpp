#include "zeroreg/object_matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "zeroreg/assignment.hpp"
#include "zeroreg/error.hpp"
#include "zeroreg/scene_bundle.hpp"

namespace zeroreg {

std::vector<IndexPair> AssignmentMatrix::pairs() const {
  std::vector<IndexPair> out;
  for (Eigen::Index j = 0; j < entries.rows(); ++j) {
    for (Eigen::Index k = 0; k < entries.cols(); ++k) {
      if (entries(j, k) > 0.5) out.emplace_back(static_cast<int>(j), static_cast<int>(k));
    }
  }
  return out;
}

AssignmentMatrix AssignmentMatrix::FromPairs(Eigen::Index n, Eigen::Index m, const std::vector<IndexPair>& pairs) {
  AssignmentMatrix a;
  a.entries = Eigen::MatrixXd::Zero(n, m);
  for (const auto& [j, k] : pairs) a.entries(j, k) = 1.0;
  return a;
}

bool is_feasible_assignment(const Eigen::MatrixXd& x) {
  if (((x.array() != 0.0) && (x.array() != 1.0)).any()) return false;
  const Eigen::VectorXd rows = x.rowwise().sum();
  const Eigen::RowVectorXd cols = x.colwise().sum();
  if ((rows.array() > 1.0).any() || (cols.array() > 1.0).any()) return false;
  if (x.rows() <= x.cols()) return (rows.array() == 1.0).all();
  return (cols.array() == 1.0).all();
}

namespace {

void check_shapes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq,
                  const Eigen::MatrixXd& c) {
  const Eigen::Index n = c.rows();
  const Eigen::Index m = c.cols();
  if (wp.rows() != n || wp.cols() != n) throw ShapeError("qap: Wp must be n x n with n = rows(C)");
  if (wq.rows() != m || wq.cols() != m) throw ShapeError("qap: Wq must be m x m with m = cols(C)");
  if (x.rows() != n || x.cols() != m) throw ShapeError("qap: X must be n x m");
}

}  // namespace

double qap_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq,
                     const Eigen::MatrixXd& c) {
  check_shapes(x, wp, wq, c);
  return (wp - x * wq * x.transpose()).squaredNorm() - c.cwiseProduct(x).sum();
}

Eigen::MatrixXd qap_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq,
                             const Eigen::MatrixXd& c) {
  check_shapes(x, wp, wq, c);
  const Eigen::MatrixXd r = wp - x * wq * x.transpose();
  return -2.0 * (r * x * wq.transpose() + r.transpose() * x * wq) - c;
}

namespace {

// Depth-first enumeration of injective maps from the smaller side into the
// larger one with incremental objective bookkeeping. The objective of a
// matching is ||Wp||^2 + sum over matched source pairs (a, b) of
// [(Wp_ab - Wq_{pi(a) pi(b)})^2 - Wp_ab^2] - sum C_{a pi(a)}, which equals
// qap_objective for both n <= m and n > m.
class ExactSearch {
 public:
  ExactSearch(const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& c)
      : wp_(wp), wq_(wq), c_(c), rows_small_(c.rows() <= c.cols()),
        small_(std::min(c.rows(), c.cols())), large_(std::max(c.rows(), c.cols())) {
    src_.resize(small_);
    tgt_.resize(small_);
    used_.assign(large_, 0);
  }

  std::vector<IndexPair> run() {
    if (small_ == 0) return {};
    descend(0, wp_.squaredNorm());
    return best_pairs_;
  }

  double best_objective() const { return best_; }

 private:
  void descend(Eigen::Index depth, double cost) {
    if (depth == small_) {
      consider(cost);
      return;
    }
    for (Eigen::Index choice = 0; choice < large_; ++choice) {
      if (used_[choice]) continue;
      used_[choice] = 1;
      if (rows_small_) {
        src_[depth] = static_cast<int>(depth);
        tgt_[depth] = static_cast<int>(choice);
      } else {
        src_[depth] = static_cast<int>(choice);
        tgt_[depth] = static_cast<int>(depth);
      }
      descend(depth + 1, cost + increment(depth));
      used_[choice] = 0;
    }
  }

  double increment(Eigen::Index depth) const {
    const int a = src_[depth];
    const int pa = tgt_[depth];
    const auto term = [&](int s1, int s2, int t1, int t2) {
      const double w = wp_(s1, s2);
      const double diff = w - wq_(t1, t2);
      return diff * diff - w * w;
    };
    double inc = term(a, a, pa, pa) - c_(a, pa);
    for (Eigen::Index e = 0; e < depth; ++e) {
      const int b = src_[e];
      const int pb = tgt_[e];
      inc += term(a, b, pa, pb) + term(b, a, pb, pa);
    }
    return inc;
  }

  void consider(double cost) {
    std::vector<IndexPair> pairs(small_);
    for (Eigen::Index i = 0; i < small_; ++i) pairs[i] = {src_[i], tgt_[i]};
    std::sort(pairs.begin(), pairs.end());
    const double tol = 1e-12 * std::max(1.0, std::abs(cost));
    if (best_pairs_.empty() || cost < best_ - tol ||
        (std::abs(cost - best_) <= tol && pairs < best_pairs_)) {
      best_ = cost;
      best_pairs_ = std::move(pairs);
    }
  }

  const Eigen::MatrixXd& wp_;
  const Eigen::MatrixXd& wq_;
  const Eigen::MatrixXd& c_;
  bool rows_small_;
  Eigen::Index small_;
  Eigen::Index large_;
  std::vector<int> src_, tgt_;
  std::vector<char> used_;
  double best_ = std::numeric_limits<double>::infinity();
  std::vector<IndexPair> best_pairs_;
};

AssignmentMatrix finish(Eigen::Index n, Eigen::Index m, const std::vector<IndexPair>& pairs,
                        const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& c) {
  AssignmentMatrix a = AssignmentMatrix::FromPairs(n, m, pairs);
  a.objective = qap_objective(a.entries, wp, wq, c);
  return a;
}

Eigen::MatrixXd round_to_assignment(const Eigen::MatrixXd& x) {
  const std::vector<int> cols = solve_linear_assignment(-x);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (std::size_t r = 0; r < cols.size(); ++r) {
    if (cols[r] >= 0) out(static_cast<Eigen::Index>(r), cols[r]) = 1.0;
  }
  return out;
}

}  // namespace

AssignmentMatrix solve_qap_exact(const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& c,
                                 int exact_limit) {
  check_shapes(Eigen::MatrixXd::Zero(c.rows(), c.cols()), wp, wq, c);
  if (std::min(c.rows(), c.cols()) > exact_limit) {
    throw SizeLimitError("solve_qap_exact: min(n, m) = " + std::to_string(std::min(c.rows(), c.cols())) +
                         " exceeds limit " + std::to_string(exact_limit));
  }
  ExactSearch search(wp, wq, c);
  return finish(c.rows(), c.cols(), search.run(), wp, wq, c);
}

AssignmentMatrix solve_qap(const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& c,
                           const QapOptions& options) {
  check_shapes(Eigen::MatrixXd::Zero(c.rows(), c.cols()), wp, wq, c);
  const Eigen::Index n = c.rows();
  const Eigen::Index m = c.cols();
  if (std::min(n, m) <= options.exact_limit) return solve_qap_exact(wp, wq, c, options.exact_limit);

  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(n, m, 1.0 / static_cast<double>(std::max(n, m)));
  double f = qap_objective(x, wp, wq, c);
  AssignmentMatrix best;
  best.entries = round_to_assignment(x);
  best.objective = qap_objective(best.entries, wp, wq, c);

  for (int t = 0; t < options.max_iterations; ++t) {
    const Eigen::MatrixXd vertex = round_to_assignment(-qap_gradient(x, wp, wq, c));
    const double step = 2.0 / (t + 2.0);
    x += step * (vertex - x);
    const double f_next = qap_objective(x, wp, wq, c);

    Eigen::MatrixXd rounded = round_to_assignment(x);
    const double rounded_obj = qap_objective(rounded, wp, wq, c);
    if (rounded_obj < best.objective) {
      best.entries = std::move(rounded);
      best.objective = rounded_obj;
    }
    const bool converged = std::abs(f_next - f) < options.tolerance;
    f = f_next;
    if (converged) break;
  }
  return best;
}

AssignmentMatrix solve_similarity_matching(const Eigen::MatrixXd& c) {
  AssignmentMatrix a;
  a.entries = round_to_assignment(c);
  a.objective = -c.cwiseProduct(a.entries).sum();
  return a;
}

Eigen::MatrixXd apply_category_constraint(const Eigen::MatrixXd& c, const std::vector<std::string>& labels_p,
                                          const std::vector<std::string>& labels_q, double penalty) {
  if (static_cast<Eigen::Index>(labels_p.size()) != c.rows() ||
      static_cast<Eigen::Index>(labels_q.size()) != c.cols()) {
    throw ShapeError("apply_category_constraint: label counts do not match C");
  }
  Eigen::MatrixXd out = c;
  for (Eigen::Index j = 0; j < c.rows(); ++j) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
      if (!same_category(labels_p[j], labels_q[k])) out(j, k) = penalty;
    }
  }
  return out;
}

ObjectCorrespondences filter_by_category(const AssignmentMatrix& assignment, const std::vector<std::string>& labels_p,
                                         const std::vector<std::string>& labels_q) {
  if (static_cast<Eigen::Index>(labels_p.size()) != assignment.entries.rows() ||
      static_cast<Eigen::Index>(labels_q.size()) != assignment.entries.cols()) {
    throw ShapeError("filter_by_category: labels must cover every node");
  }
  ObjectCorrespondences out;
  for (const auto& [j, k] : assignment.pairs()) {
    if (same_category(labels_p[j], labels_q[k])) out.pairs.emplace_back(j, k);
  }
  return out;
}

}  // namespace zeroreg
