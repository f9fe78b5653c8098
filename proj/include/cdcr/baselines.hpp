#pragma once

// Similarity thresholding with transitive closure, threshold sweeps, and
// agglomerative clustering of externally produced pairwise scores.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/corpus.hpp"
#include "cdcr/errors.hpp"
#include "cdcr/ingestion.hpp"
#include "cdcr/partition.hpp"
#include "cdcr/union_find.hpp"

namespace cdcr {

struct ScoredPair {
  PairKey key;
  std::optional<double> similarity;
  std::optional<bool> coreferent;  // gold label, when known
};

inline std::vector<int> threshold_classify(const std::vector<ScoredPair>& pairs, double t) {
  if (!std::isfinite(t)) throw Error(ErrorCode::validation, "threshold must be finite");
  std::vector<int> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.similarity && *p.similarity >= t ? 1 : 0);
  return out;
}

// Connected components of the positive-link graph over `universe` plus every
// mention named by a link.
inline Clustering transitive_inference(const std::vector<PairKey>& positives,
                                       const std::vector<std::string>& universe = {}) {
  std::map<std::string, std::size_t> index;
  std::vector<std::string> names;
  auto id = [&](const std::string& m) {
    auto [it, added] = index.emplace(m, names.size());
    if (added) names.push_back(m);
    return it->second;
  };
  for (const auto& m : universe) id(m);
  for (const auto& k : positives) {
    id(k.first());
    id(k.second());
  }
  UnionFind uf(names.size());
  for (const auto& k : positives) uf.unite(index.at(k.first()), index.at(k.second()));
  std::map<std::size_t, std::set<std::string>> groups;
  for (std::size_t i = 0; i < names.size(); ++i) groups[uf.find(i)].insert(names[i]);
  Clustering out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return canonical(std::move(out));
}

// Every pair of mentions placed together by a clustering.
inline std::vector<PairKey> implied_links(const Clustering& c) {
  std::vector<PairKey> out;
  for (const auto& cluster : c) {
    for (auto a = cluster.begin(); a != cluster.end(); ++a) {
      for (auto b = std::next(a); b != cluster.end(); ++b) out.emplace_back(*a, *b);
    }
  }
  return out;
}

struct ScoredPairFile {
  std::vector<ScoredPair> pairs;
  std::vector<RecordError> errors;
};

// One line per pair: {mention_id_a, mention_id_b, similarity, gold}. gold may
// be yes / no, coreferent / not_coreferent, a boolean, or absent.
inline ScoredPairFile parse_scored_pairs(std::istream& in) {
  ScoredPairFile out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(detail::null_out_nonfinite(line));
      ScoredPair p;
      p.key = PairKey(j.at("mention_id_a").get<std::string>(), j.at("mention_id_b").get<std::string>());
      if (j.contains("similarity") && !j["similarity"].is_null()) {
        if (!j["similarity"].is_number()) throw Error(ErrorCode::schema, "similarity must be a number");
        p.similarity = j["similarity"].get<double>();
      }
      if (j.contains("gold") && !j["gold"].is_null()) {
        const auto& g = j["gold"];
        if (g.is_boolean()) {
          p.coreferent = g.get<bool>();
        } else {
          auto s = g.get<std::string>();
          if (s == "yes" || s == "coreferent") {
            p.coreferent = true;
          } else if (s == "no" || s == "not_coreferent") {
            p.coreferent = false;
          } else {
            throw Error(ErrorCode::validation, "gold must be yes or no");
          }
        }
      }
      out.pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({lineno, ErrorCode::schema, e.what()});
    } catch (const Error& e) {
      out.errors.push_back({lineno, e.code(), e.what()});
    }
  }
  return out;
}

struct SweepPoint {
  double threshold = 0.0;
  double accuracy = 0.0;
};

struct SweepResult {
  double best_threshold = 0.0;
  double best_accuracy = 0.0;
  std::vector<SweepPoint> curve;
};

inline std::vector<double> threshold_grid(double t_min, double t_max, double step) {
  if (!(step > 0) || !std::isfinite(t_min) || !std::isfinite(t_max) || t_max < t_min) {
    throw Error(ErrorCode::validation, "threshold grid needs finite t_min <= t_max and step > 0");
  }
  auto count = static_cast<std::size_t>(std::llround((t_max - t_min) / step)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::round((t_min + static_cast<double>(i) * step) * 1e6) / 1e6);
  }
  return out;
}

// Pairwise accuracy of thresholding at each grid value; the lowest threshold
// wins ties.
inline SweepResult sweep_threshold(const std::vector<ScoredPair>& dev, double t_min = 0.30, double t_max = 0.80,
                                   double step = 0.01) {
  if (dev.empty()) throw Error(ErrorCode::insufficient_data, "empty development set");
  for (const auto& p : dev) {
    if (!p.similarity || !p.coreferent) {
      throw Error(ErrorCode::validation, "pair " + p.key.str() + " lacks a similarity or gold label");
    }
  }
  SweepResult r;
  bool first = true;
  for (double t : threshold_grid(t_min, t_max, step)) {
    auto predicted = threshold_classify(dev, t);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dev.size(); ++i) correct += (predicted[i] == 1) == *dev[i].coreferent ? 1 : 0;
    double acc = static_cast<double>(correct) / static_cast<double>(dev.size());
    r.curve.push_back({t, acc});
    if (first || acc > r.best_accuracy) {
      r.best_threshold = t;
      r.best_accuracy = acc;
      first = false;
    }
  }
  return r;
}

// Dense symmetric score matrix; absent pairs hold -infinity and never merge
// unless the stop threshold is itself -infinity.
class ScoreMatrix {
 public:
  static constexpr double missing = -std::numeric_limits<double>::infinity();

  ScoreMatrix() = default;
  explicit ScoreMatrix(std::vector<std::string> ids, std::string source_tag = {})
      : ids_(std::move(ids)), source_tag_(std::move(source_tag)), values_(ids_.size() * ids_.size(), missing) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!index_.emplace(ids_[i], i).second) throw Error(ErrorCode::validation, "duplicate mention " + ids_[i]);
    }
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& source_tag() const { return source_tag_; }
  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  }

  double at(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
  void set(std::size_t i, std::size_t j, double v) { values_[i * ids_.size() + j] = v; }
  void set_symmetric(std::size_t i, std::size_t j, double v) {
    set(i, j, v);
    set(j, i, v);
  }

  void validate(double tolerance = 1e-6) const {
    std::size_t n = ids_.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double a = at(i, j), b = at(j, i);
        if (std::isnan(a) || std::isnan(b) || a == std::numeric_limits<double>::infinity() ||
            b == std::numeric_limits<double>::infinity()) {
          throw Error(ErrorCode::validation, "non-finite score between " + ids_[i] + " and " + ids_[j]);
        }
        if (a == b) continue;
        if (std::isinf(a) || std::isinf(b) || std::fabs(a - b) > tolerance) {
          throw Error(ErrorCode::asymmetric_matrix, "scores for " + ids_[i] + " and " + ids_[j] + " differ");
        }
      }
    }
  }

 private:
  std::vector<std::string> ids_;
  std::string source_tag_;
  std::vector<double> values_;
  std::map<std::string, std::size_t> index_;
};

enum class Linkage { average, single, complete };

inline Linkage parse_linkage(const std::string& s) {
  if (s == "average") return Linkage::average;
  if (s == "single") return Linkage::single;
  if (s == "complete") return Linkage::complete;
  throw Error(ErrorCode::validation, "unknown linkage '" + s + "'");
}

namespace detail {

// Greedy agglomeration over one group of matrix indices.
inline void agglomerate(const ScoreMatrix& m, const std::vector<std::size_t>& members, double tau, Linkage linkage,
                        Clustering& out) {
  std::size_t k = members.size();
  std::vector<std::set<std::string>> clusters(k);
  std::vector<std::size_t> weight(k, 1);
  std::vector<bool> alive(k, true);
  std::vector<double> link(k * k);
  for (std::size_t i = 0; i < k; ++i) {
    clusters[i] = {m.ids()[members[i]]};
    for (std::size_t j = 0; j < k; ++j) link[i * k + j] = i == j ? ScoreMatrix::missing : m.at(members[i], members[j]);
  }
  for (std::size_t round = 1; round < k; ++round) {
    std::optional<std::pair<std::size_t, std::size_t>> best;
    double best_score = 0.0;
    std::pair<std::string, std::string> best_names;
    for (std::size_t i = 0; i < k; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < k; ++j) {
        if (!alive[j]) continue;
        double s = link[i * k + j];
        if (!(s >= tau)) continue;
        std::pair<std::string, std::string> names = std::minmax(*clusters[i].begin(), *clusters[j].begin());
        if (!best || s > best_score || (s == best_score && names < best_names)) {
          best = {i, j};
          best_score = s;
          best_names = std::move(names);
        }
      }
    }
    if (!best) break;
    auto [a, b] = *best;
    for (std::size_t x = 0; x < k; ++x) {
      if (!alive[x] || x == a || x == b) continue;
      double sa = link[a * k + x], sb = link[b * k + x], merged;
      switch (linkage) {
        case Linkage::single:
          merged = std::max(sa, sb);
          break;
        case Linkage::complete:
          merged = std::min(sa, sb);
          break;
        default:
          merged = (std::isinf(sa) || std::isinf(sb))
                       ? ScoreMatrix::missing
                       : (static_cast<double>(weight[a]) * sa + static_cast<double>(weight[b]) * sb) /
                             static_cast<double>(weight[a] + weight[b]);
      }
      link[a * k + x] = link[x * k + a] = merged;
    }
    clusters[a].insert(clusters[b].begin(), clusters[b].end());
    weight[a] += weight[b];
    alive[b] = false;
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (alive[i]) out.push_back(std::move(clusters[i]));
  }
}

}  // namespace detail

// Starting from singletons, repeatedly merges the two clusters with the
// highest linkage score while it is >= tau. Ties go to the lexicographically
// smallest pair of cluster names (a cluster's name is its smallest member).
inline Clustering agglomerative_cluster(const ScoreMatrix& m, double tau = 0.5, Linkage linkage = Linkage::average) {
  if (std::isnan(tau)) throw Error(ErrorCode::validation, "stop threshold is NaN");
  m.validate();
  std::size_t n = m.size();
  // Clusters can only ever join along entries >= tau, so connected groups of
  // such entries are clustered independently.
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (m.at(i, j) >= tau) uf.unite(i, j);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);
  Clustering out;
  for (const auto& [root, members] : groups) detail::agglomerate(m, members, tau, linkage, out);
  return canonical(std::move(out));
}

struct ExternalScores {
  ScoreMatrix matrix;
  std::size_t records = 0;
  std::vector<RecordError> errors;
};

// One record per line: {mention_id_a, mention_id_b, score}. With a non-empty
// universe, records naming other mentions are rejected and the matrix spans
// the universe; otherwise it spans every mention named in the file.
inline ExternalScores load_external_scores(std::istream& in, const std::set<std::string>& universe = {},
                                           std::string source_tag = {}) {
  struct Row {
    std::string a, b;
    double score;
  };
  std::vector<Row> rows;
  ExternalScores result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    ++result.records;
    try {
      auto j = nlohmann::json::parse(detail::null_out_nonfinite(line));
      if (!j.is_object() || !j.contains("mention_id_a") || !j.contains("mention_id_b") || !j.contains("score")) {
        throw Error(ErrorCode::schema, "score record needs mention_id_a, mention_id_b, score");
      }
      if (!j["score"].is_number()) throw Error(ErrorCode::schema, "score must be a finite number");
      Row r{j["mention_id_a"].get<std::string>(), j["mention_id_b"].get<std::string>(), j["score"].get<double>()};
      if (r.a == r.b) throw Error(ErrorCode::validation, "self-pair for " + r.a);
      for (const auto* id : {&r.a, &r.b}) {
        if (!universe.empty() && !universe.count(*id)) {
          throw Error(ErrorCode::unknown_mention, "unknown mention " + *id);
        }
      }
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      result.errors.push_back({lineno, ErrorCode::format, e.what()});
    } catch (const Error& e) {
      result.errors.push_back({lineno, e.code(), e.what()});
    }
  }

  std::set<std::string> ids = universe;
  for (const auto& r : rows) {
    ids.insert(r.a);
    ids.insert(r.b);
  }
  ScoreMatrix m(std::vector<std::string>(ids.begin(), ids.end()), std::move(source_tag));
  std::map<PairKey, double> seen;
  for (const auto& r : rows) {
    PairKey key(r.a, r.b);
    auto [it, added] = seen.emplace(key, r.score);
    if (!added) {
      if (it->second != r.score) throw Error(ErrorCode::conflict, "contradictory scores for " + key.str());
      continue;
    }
    m.set_symmetric(*m.index_of(r.a), *m.index_of(r.b), r.score);
  }
  result.matrix = std::move(m);
  return result;
}

inline ExternalScores load_external_scores(const std::string& path, const std::set<std::string>& universe = {}) {
  auto in = detail::open_input(path);
  return load_external_scores(in, universe, path);
}

}  // namespace cdcr
