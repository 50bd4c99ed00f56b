#include "zeroreg/scene_graph.hpp"

#include "zeroreg/projection.hpp"

namespace zeroreg {

SceneGraphRep build_scene_graph(const MaskedPointCloud& cloud, int k, bool directed) {
  const auto n = static_cast<Eigen::Index>(cloud.objects.size());
  if (n == 0) throw EmptyInputError("build_scene_graph: no objects");
  const Eigen::Index d = cloud.objects.front().semantic.size();

  SceneGraphRep graph;
  graph.k = static_cast<int>(std::max<Eigen::Index>(1, std::min<Eigen::Index>(k, n - 1)));
  graph.centroids.resize(3, n);
  graph.node_semantics.resize(n, d);
  for (Eigen::Index j = 0; j < n; ++j) {
    const ObjectRegion& region = cloud.objects[j];
    Points3d pts(3, static_cast<Eigen::Index>(region.point_indices.size()));
    for (std::size_t i = 0; i < region.point_indices.size(); ++i) {
      pts.col(static_cast<Eigen::Index>(i)) = cloud.all_points.col(region.point_indices[i]);
    }
    graph.centroids.col(j) = centroid(pts);
    graph.node_semantics.row(j) = region.semantic.transpose();
    graph.node_labels.push_back(region.category_label);
  }
  graph.affinity = build_affinity(graph.centroids, graph.node_semantics, graph.k, directed);
  return graph;
}

}  // namespace zeroreg
