#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

namespace zeroreg {

/// Uniform-grid hash for fixed-radius neighbour queries. Cell size equals the
/// query radius, so a query inspects the 27 cells around the probe.
class VoxelHash {
 public:
  explicit VoxelHash(double radius) : radius_(radius), inv_cell_(1.0 / radius) {}

  void insert(int id, const Eigen::Vector3d& p) {
    cells_[key(cell_of(p))].push_back(id);
    if (static_cast<std::size_t>(id) >= points_.size()) points_.resize(id + 1);
    points_[id] = p;
  }

  /// Nearest inserted id within the radius (strictly closer than `radius`, or
  /// equal when the radius is zero), or -1. Ties resolve to the lowest id.
  template <typename Accept>
  int nearest(const Eigen::Vector3d& p, Accept&& accept) const {
    const Eigen::Vector3i c = cell_of(p);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(key(c + Eigen::Vector3i(dx, dy, dz)));
          if (it == cells_.end()) continue;
          for (int id : it->second) {
            const double d2 = (points_[id] - p).squaredNorm();
            if (d2 > radius_ * radius_ || !accept(id)) continue;
            if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
              best_d2 = d2;
              best = id;
            }
          }
        }
      }
    }
    return best;
  }

  int nearest(const Eigen::Vector3d& p) const {
    return nearest(p, [](int) { return true; });
  }

  bool any_within(const Eigen::Vector3d& p) const { return nearest(p) >= 0; }

 private:
  Eigen::Vector3i cell_of(const Eigen::Vector3d& p) const {
    return (p * inv_cell_).array().floor().cast<int>();
  }

  static std::uint64_t key(const Eigen::Vector3i& c) {
    const auto h = [](int v) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)); };
    return (h(c.x()) * 73856093ULL) ^ (h(c.y()) * 19349663ULL << 21) ^ (h(c.z()) * 83492791ULL << 42);
  }

  double radius_;
  double inv_cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
  std::vector<Eigen::Vector3d> points_;
};

}  // namespace zeroreg
