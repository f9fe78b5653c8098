#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cdcr/errors.hpp"

namespace cdcr {

// A set of disjoint, non-empty clusters of mention ids.
using Clustering = std::vector<std::set<std::string>>;

inline void check_partition(const Clustering& c, const char* what = "clustering") {
  std::set<std::string> seen;
  for (const auto& cluster : c) {
    if (cluster.empty()) throw Error(ErrorCode::not_a_partition, std::string(what) + " has an empty cluster");
    for (const auto& m : cluster) {
      if (!seen.insert(m).second) {
        throw Error(ErrorCode::not_a_partition, std::string(what) + " places " + m + " in two clusters");
      }
    }
  }
}

// Clusters sorted by their smallest member, so equal partitions compare equal.
inline Clustering canonical(Clustering c) {
  std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return *a.begin() < *b.begin(); });
  return c;
}

inline std::map<std::string, std::size_t> cluster_index(const Clustering& c) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (const auto& m : c[i]) idx[m] = i;
  }
  return idx;
}

}  // namespace cdcr
