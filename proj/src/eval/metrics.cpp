#include "vreid/eval/metrics.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vreid::evalkit {

using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const MatRM>;

Tensor distance_matrix(const Tensor& query, const Tensor& gallery, Metric metric) {
  if (query.ndim() != 2 || gallery.ndim() != 2 || query.dim(1) != gallery.dim(1))
    throw ValidationError(cat("distance_matrix: dimension mismatch ", shape_str(query.shape()), " vs ",
                              shape_str(gallery.shape())));
  const int q = query.dim(0), g = gallery.dim(0), d = query.dim(1);
  Tensor dist({q, g});

  ConstMatMap qm(query.data(), q, d);
  ConstMatMap gm(gallery.data(), g, d);
  Eigen::Map<MatRM> dm(dist.data(), q, g);
  dm.noalias() = qm * gm.transpose();

  if (metric == Metric::euclidean) {
    Eigen::VectorXd qn = qm.rowwise().squaredNorm();
    Eigen::VectorXd gn = gm.rowwise().squaredNorm();
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < g; ++j) {
        const Scalar sq = std::max(0.0, qn(i) + gn(j) - 2.0 * dm(i, j));
        dm(i, j) = std::sqrt(sq);
      }
  } else {
    Eigen::VectorXd qn = qm.rowwise().norm();
    Eigen::VectorXd gn = gm.rowwise().norm();
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < g; ++j) {
        const Scalar denom = std::max(qn(i) * gn(j), 1e-12);
        dm(i, j) = 1.0 - dm(i, j) / denom;
      }
  }
  return dist;
}

namespace {

// Valid (non-filtered) gallery order for one query, ties broken by gallery
// index. Returns indices into the gallery.
std::vector<int> ranked_valid(const Tensor& dist, int qi, const ItemMeta& qm,
                              const std::vector<ItemMeta>& gallery) {
  std::vector<int> order;
  order.reserve(gallery.size());
  for (int j = 0; j < static_cast<int>(gallery.size()); ++j) {
    const auto& gm = gallery[static_cast<std::size_t>(j)];
    if (gm.person_id == qm.person_id && gm.camera_id == qm.camera_id) continue;
    order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist(qi, a) < dist(qi, b); });
  return order;
}

}  // namespace

CmcResult compute_cmc(const Tensor& dist, const std::vector<ItemMeta>& query,
                      const std::vector<ItemMeta>& gallery, const std::vector<int>& ranks) {
  if (dist.ndim() != 2 || dist.dim(0) != static_cast<int>(query.size()) ||
      dist.dim(1) != static_cast<int>(gallery.size()))
    throw ValidationError(cat("compute_cmc: distance matrix ", shape_str(dist.shape()), " vs ",
                              query.size(), " queries and ", gallery.size(), " gallery entries"));
  if (ranks.empty()) throw ValidationError("compute_cmc: no ranks requested");

  CmcResult result;
  std::map<int, int> hits;
  for (int r : ranks) hits[r] = 0;

  for (int qi = 0; qi < static_cast<int>(query.size()); ++qi) {
    const auto& qm = query[static_cast<std::size_t>(qi)];
    const auto order = ranked_valid(dist, qi, qm, gallery);
    int first_match = -1;
    for (int pos = 0; pos < static_cast<int>(order.size()); ++pos) {
      if (gallery[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])].person_id == qm.person_id) {
        first_match = pos + 1;  // 1-indexed rank
        break;
      }
    }
    if (first_match < 0) {
      ++result.excluded;
      continue;
    }
    ++result.evaluated;
    for (auto& [r, h] : hits)
      if (first_match <= r) ++h;
  }

  for (auto& [r, h] : hits)
    result.cmc[r] = result.evaluated > 0 ? static_cast<double>(h) / result.evaluated : 0.0;
  return result;
}

MapResult compute_map(const Tensor& dist, const std::vector<ItemMeta>& query,
                      const std::vector<ItemMeta>& gallery) {
  if (dist.ndim() != 2 || dist.dim(0) != static_cast<int>(query.size()) ||
      dist.dim(1) != static_cast<int>(gallery.size()))
    throw ValidationError(cat("compute_map: distance matrix ", shape_str(dist.shape()), " vs ",
                              query.size(), " queries and ", gallery.size(), " gallery entries"));

  MapResult result;
  double ap_sum = 0.0;
  for (int qi = 0; qi < static_cast<int>(query.size()); ++qi) {
    const auto& qm = query[static_cast<std::size_t>(qi)];
    const auto order = ranked_valid(dist, qi, qm, gallery);
    int relevant = 0, seen = 0;
    double ap = 0.0;
    for (int pos = 0; pos < static_cast<int>(order.size()); ++pos) {
      if (gallery[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])].person_id == qm.person_id) {
        ++relevant;
        seen = pos + 1;
        ap += static_cast<double>(relevant) / seen;
      }
    }
    if (relevant == 0) {
      ++result.excluded;
      continue;
    }
    ++result.evaluated;
    ap_sum += ap / relevant;
  }
  result.map = result.evaluated > 0 ? ap_sum / result.evaluated : 0.0;
  return result;
}

}  // namespace vreid::evalkit
