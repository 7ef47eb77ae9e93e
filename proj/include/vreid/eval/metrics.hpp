#pragma once

#include <map>
#include <vector>

#include "vreid/core/tensor.hpp"

namespace vreid::evalkit {

struct ItemMeta {
  int person_id = -1;
  int camera_id = -1;
};

enum class Metric { euclidean, cosine };

/// Pairwise distances between feature rows: (Q, D) x (G, D) -> (Q, G).
Tensor distance_matrix(const Tensor& query, const Tensor& gallery, Metric metric = Metric::euclidean);

struct CmcResult {
  std::map<int, double> cmc;  // rank -> accuracy over evaluated queries
  int evaluated = 0;
  int excluded = 0;  // queries with no valid cross-camera match
};

/// Cumulative match characteristic. Gallery entries sharing both the query's
/// id and camera are excluded per query; ties break by gallery order.
CmcResult compute_cmc(const Tensor& dist, const std::vector<ItemMeta>& query,
                      const std::vector<ItemMeta>& gallery, const std::vector<int>& ranks);

struct MapResult {
  double map = 0.0;
  int evaluated = 0;
  int excluded = 0;
};

/// Mean average precision over the same filtered ranked lists as compute_cmc.
MapResult compute_map(const Tensor& dist, const std::vector<ItemMeta>& query,
                      const std::vector<ItemMeta>& gallery);

}  // namespace vreid::evalkit
