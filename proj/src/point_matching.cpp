#include "zeroreg/point_matching.hpp"

#include "zeroreg/projection.hpp"

namespace zeroreg {

PointCorrespondences match_descriptor_block(const Eigen::MatrixXd& gp, const Eigen::MatrixXd& gq,
                                            const PointMatchingConfig& config) {
  if (gp.rows() == 0 || gq.rows() == 0) return {};
  // Temperature sharpens the similarities; the slack is appended on the logit scale.
  const Eigen::MatrixXd logits = augment_slack(similarity_matrix(gp, gq) / config.temperature, config.slack);
  const Eigen::MatrixXd transport = sinkhorn_normalize(logits, config.sinkhorn_iterations, 1.0);
  return extract_correspondences(transport, config.gamma);
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<int> owned_by(const PointDescriptorCloud& cloud, int object) {
  std::vector<int> out;
  for (std::size_t i = 0; i < cloud.object_index.size(); ++i) {
    if (cloud.object_index[i] == object) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

PointCorrespondences match_points_global(const PointDescriptorCloud& source, const PointDescriptorCloud& target,
                                         const PointMatchingConfig& config) {
  if (source.size() == 0 || target.size() == 0) throw EmptyInputError("match_points: empty descriptor cloud");
  return match_descriptor_block(source.descriptors, target.descriptors, config);
}

PointCorrespondences match_points(const ObjectCorrespondences& regions, const PointDescriptorCloud& source,
                                  const PointDescriptorCloud& target, const PointMatchingConfig& config) {
  if (source.size() == 0 || target.size() == 0) throw EmptyInputError("match_points: empty descriptor cloud");
  if (regions.empty()) {
    if (!config.global_fallback) throw EmptyInputError("match_points: no object pairs and fallback disabled");
    return match_points_global(source, target, config);
  }

  PointCorrespondences out;
  for (std::size_t r = 0; r < regions.pairs.size(); ++r) {
    const auto [src_obj, tgt_obj] = regions.pairs[r];
    const std::vector<int> src_idx = owned_by(source, src_obj);
    const std::vector<int> tgt_idx = owned_by(target, tgt_obj);
    const PointCorrespondences local = match_descriptor_block(gather_rows(source.descriptors, src_idx),
                                                              gather_rows(target.descriptors, tgt_idx), config);
    for (const PointMatch& m : local.pairs) {
      out.pairs.push_back({src_idx[m.source], tgt_idx[m.target], m.confidence, static_cast<int>(r)});
    }
  }
  return out;
}

}  // namespace zeroreg
