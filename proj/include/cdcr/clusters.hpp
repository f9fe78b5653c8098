#pragma once

// Mutable partition of mentions into coreference clusters with stable ids.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/corpus.hpp"

namespace cdcr {

struct MergeOutcome {
  bool changed = false;
  std::string cluster_id;
  // Ids that no longer exist after the merge.
  std::vector<std::string> absorbed;
};

class ClusterSet {
 public:
  std::optional<std::string> cluster_of(const MentionId& m) const {
    auto it = membership_.find(m);
    if (it == membership_.end()) return std::nullopt;
    return format_id(it->second);
  }

  bool co_clustered(const MentionId& a, const MentionId& b) const {
    auto ia = membership_.find(a);
    auto ib = membership_.find(b);
    return ia != membership_.end() && ib != membership_.end() && ia->second == ib->second;
  }

  // Members of the cluster containing `m`, or empty if unclustered.
  std::set<MentionId> members_with(const MentionId& m) const {
    auto it = membership_.find(m);
    if (it == membership_.end()) return {};
    return clusters_.at(it->second);
  }

  MergeOutcome merge(const MentionId& a, const MentionId& b) {
    std::uint64_t ca = ensure(a);
    std::uint64_t cb = ensure(b);
    if (ca == cb) return {false, format_id(ca), {}};
    // The older cluster keeps its id.
    if (cb < ca) std::swap(ca, cb);
    auto& into = clusters_[ca];
    for (const auto& m : clusters_[cb]) {
      into.insert(m);
      membership_[m] = ca;
    }
    clusters_.erase(cb);
    return {true, format_id(ca), {format_id(cb)}};
  }

  std::vector<CoreferenceCluster> clusters() const {
    std::vector<CoreferenceCluster> out;
    out.reserve(clusters_.size());
    for (const auto& [id, members] : clusters_) out.push_back({format_id(id), members});
    return out;
  }

  std::size_t cluster_count() const { return clusters_.size(); }
  std::size_t non_singleton_count() const {
    std::size_t n = 0;
    for (const auto& [id, members] : clusters_) n += members.size() > 1 ? 1 : 0;
    return n;
  }

  friend bool operator==(const ClusterSet& a, const ClusterSet& b) {
    return a.clusters_ == b.clusters_ && a.next_id_ == b.next_id_;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    j["next_id"] = next_id_;
    auto& arr = j["clusters"] = nlohmann::json::array();
    for (const auto& [id, members] : clusters_) {
      arr.push_back({{"id", id}, {"mentions", members}});
    }
    return j;
  }

  static ClusterSet from_json(const nlohmann::json& j) {
    ClusterSet s;
    s.next_id_ = j.at("next_id").get<std::uint64_t>();
    for (const auto& c : j.at("clusters")) {
      auto id = c.at("id").get<std::uint64_t>();
      auto members = c.at("mentions").get<std::set<MentionId>>();
      for (const auto& m : members) s.membership_[m] = id;
      s.clusters_[id] = std::move(members);
    }
    return s;
  }

 private:
  static std::string format_id(std::uint64_t id) { return "c" + std::to_string(id); }

  std::uint64_t ensure(const MentionId& m) {
    auto it = membership_.find(m);
    if (it != membership_.end()) return it->second;
    std::uint64_t id = next_id_++;
    clusters_[id] = {m};
    membership_[m] = id;
    return id;
  }

  std::map<std::uint64_t, std::set<MentionId>> clusters_;
  std::map<MentionId, std::uint64_t> membership_;
  std::uint64_t next_id_ = 1;
};

}  // namespace cdcr
