#pragma once

// Link-based (MUC) and mention-based (B-cubed) coreference scores, the
// capability-test harness, similarity histograms and cluster files.

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/corpus_store.hpp"
#include "cdcr/errors.hpp"
#include "cdcr/ingestion.hpp"
#include "cdcr/partition.hpp"

namespace cdcr {

enum class Metric { muc, b3 };

inline std::string to_string(Metric m) { return m == Metric::muc ? "muc" : "b3"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "muc" || s == "MUC") return Metric::muc;
  if (s == "b3" || s == "B3" || s == "bcubed") return Metric::b3;
  throw Error(ErrorCode::validation, "unknown metric '" + s + "'");
}

struct ScoreReport {
  Metric metric = Metric::muc;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double precision_num = 0.0, precision_den = 0.0;
  double recall_num = 0.0, recall_den = 0.0;
  std::size_t mentions = 0;
  std::vector<std::string> notes;
};

inline nlohmann::json to_json(const ScoreReport& r) {
  return {{"metric", to_string(r.metric)},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"precision_counts", {r.precision_num, r.precision_den}},
          {"recall_counts", {r.recall_num, r.recall_den}},
          {"mentions", r.mentions},
          {"notes", r.notes}};
}

namespace detail {

inline void finish(ScoreReport& r) {
  auto ratio = [&](double num, double den, const char* what) {
    if (den == 0) {
      r.notes.push_back(std::string(what) + " is 0/0, reported as 0");
      return 0.0;
    }
    return num / den;
  };
  r.precision = ratio(r.precision_num, r.precision_den, "precision");
  r.recall = ratio(r.recall_num, r.recall_den, "recall");
  r.f1 = r.precision + r.recall == 0 ? 0.0 : 2 * r.precision * r.recall / (r.precision + r.recall);
}

// Sum over key clusters of (|K| - number of pieces K is cut into by the
// response), and the matching denominator sum of (|K| - 1). Key mentions
// missing from the response form a piece each.
inline std::pair<double, double> muc_counts(const Clustering& key, const Clustering& response) {
  auto where = cluster_index(response);
  double num = 0, den = 0;
  for (const auto& k : key) {
    std::set<std::size_t> pieces;
    std::size_t orphans = 0;
    for (const auto& m : k) {
      auto it = where.find(m);
      if (it == where.end()) {
        ++orphans;
      } else {
        pieces.insert(it->second);
      }
    }
    num += static_cast<double>(k.size() - pieces.size() - orphans);
    den += static_cast<double>(k.size() - 1);
  }
  return {num, den};
}

}  // namespace detail

inline ScoreReport muc_score(const Clustering& gold, const Clustering& system) {
  check_partition(gold, "gold");
  check_partition(system, "system");
  ScoreReport r;
  r.metric = Metric::muc;
  std::tie(r.recall_num, r.recall_den) = detail::muc_counts(gold, system);
  std::tie(r.precision_num, r.precision_den) = detail::muc_counts(system, gold);
  for (const auto& k : gold) r.mentions += k.size();
  detail::finish(r);
  return r;
}

// Scored over the gold mentions, minus gold singletons when requested.
// System clusters are restricted to that universe; a mention the system omits
// counts as a system singleton.
inline ScoreReport b3_score(const Clustering& gold, const Clustering& system, bool remove_singletons = true) {
  check_partition(gold, "gold");
  check_partition(system, "system");
  std::set<std::string> universe;
  for (const auto& k : gold) {
    if (remove_singletons && k.size() == 1) continue;
    universe.insert(k.begin(), k.end());
  }
  if (universe.empty()) throw Error(ErrorCode::undefined_statistic, "no mentions left to score");

  auto gold_at = cluster_index(gold);
  auto sys_at = cluster_index(system);
  ScoreReport r;
  r.metric = Metric::b3;
  for (const auto& m : universe) {
    const auto& g = gold[gold_at.at(m)];
    std::set<std::string> s;
    if (auto it = sys_at.find(m); it != sys_at.end()) {
      for (const auto& x : system[it->second]) {
        if (universe.count(x)) s.insert(x);
      }
    } else {
      s.insert(m);
    }
    double common = 0;
    for (const auto& x : s) common += g.count(x) ? 1 : 0;
    r.recall_num += common / static_cast<double>(g.size());
    r.precision_num += common / static_cast<double>(s.size());
  }
  r.mentions = universe.size();
  r.recall_den = r.precision_den = static_cast<double>(universe.size());
  detail::finish(r);
  return r;
}

inline ScoreReport score(Metric metric, const Clustering& gold, const Clustering& system,
                         bool remove_singletons = true) {
  return metric == Metric::muc ? muc_score(gold, system) : b3_score(gold, system, remove_singletons);
}

// ---- capability tests ----------------------------------------------------------

enum class CapabilityCategory { anaphora_exophora, subset_relationship, paraphrase };

inline std::string to_string(CapabilityCategory c) {
  switch (c) {
    case CapabilityCategory::anaphora_exophora:
      return "anaphora_exophora";
    case CapabilityCategory::subset_relationship:
      return "subset_relationship";
    default:
      return "paraphrase";
  }
}

inline CapabilityCategory parse_category(const std::string& s) {
  if (s == "anaphora_exophora") return CapabilityCategory::anaphora_exophora;
  if (s == "subset_relationship") return CapabilityCategory::subset_relationship;
  if (s == "paraphrase") return CapabilityCategory::paraphrase;
  throw Error(ErrorCode::validation, "unknown capability category '" + s + "'");
}

struct CapabilityCase {
  CapabilityCategory category = CapabilityCategory::paraphrase;
  bool expected_coreferent = false;
  PairKey key;
  std::optional<bool> predicted_coreferent;
};

struct CapabilityCell {
  CapabilityCategory category = CapabilityCategory::paraphrase;
  bool expected_coreferent = false;
  std::size_t passes = 0;
  std::size_t total = 0;

  double pass_rate() const { return total == 0 ? 0.0 : static_cast<double>(passes) / static_cast<double>(total); }
  std::string pass_rate_text() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * pass_rate());
    return buf;
  }
};

struct CaseFile {
  std::vector<CapabilityCase> cases;
  std::vector<RecordError> errors;
};

// {category, expected, mention_id_a, mention_id_b}; expected is
// coreferent / not_coreferent (yes / no also accepted).
inline CaseFile parse_capability_cases(std::istream& in) {
  CaseFile out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CapabilityCase c;
      c.category = parse_category(j.at("category").get<std::string>());
      auto expected = j.at("expected").get<std::string>();
      if (expected == "coreferent" || expected == "yes") {
        c.expected_coreferent = true;
      } else if (expected != "not_coreferent" && expected != "no") {
        throw Error(ErrorCode::validation, "expected must be coreferent or not_coreferent");
      }
      c.key = PairKey(j.at("mention_id_a").get<std::string>(), j.at("mention_id_b").get<std::string>());
      out.cases.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({lineno, ErrorCode::schema, e.what()});
    } catch (const Error& e) {
      out.errors.push_back({lineno, e.code(), e.what()});
    }
  }
  return out;
}

// A case is predicted coreferent when the system puts both mentions in one
// cluster. A mention absent from the system output leaves the case without a
// prediction.
inline void predict_from_clusters(std::vector<CapabilityCase>& cases, const Clustering& system) {
  auto where = cluster_index(system);
  for (auto& c : cases) {
    auto a = where.find(c.key.first());
    auto b = where.find(c.key.second());
    if (a == where.end() || b == where.end()) continue;
    c.predicted_coreferent = a->second == b->second;
  }
}

// One cell per (category, expected) combination, always six cells.
inline std::vector<CapabilityCell> capability_report(const std::vector<CapabilityCase>& cases) {
  std::string missing;
  for (const auto& c : cases) {
    if (!c.predicted_coreferent) missing += (missing.empty() ? "" : ", ") + c.key.str();
  }
  if (!missing.empty()) throw Error(ErrorCode::validation, "cases without a prediction: " + missing);
  std::vector<CapabilityCell> cells;
  for (auto cat : {CapabilityCategory::anaphora_exophora, CapabilityCategory::subset_relationship,
                   CapabilityCategory::paraphrase}) {
    for (bool expected : {true, false}) {
      CapabilityCell cell{cat, expected, 0, 0};
      for (const auto& c : cases) {
        if (c.category != cat || c.expected_coreferent != expected) continue;
        ++cell.total;
        cell.passes += *c.predicted_coreferent == expected ? 1 : 0;
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

inline nlohmann::json to_json(const CapabilityCell& c) {
  return {{"category", to_string(c.category)},
          {"expected", c.expected_coreferent ? "coreferent" : "not_coreferent"},
          {"passes", c.passes},
          {"total", c.total},
          {"pass_rate", c.pass_rate()},
          {"pass_rate_text", c.pass_rate_text() + " (" + std::to_string(c.passes) + "/" + std::to_string(c.total) + ")"}};
}

// ---- similarity histogram ----------------------------------------------------------

struct LabeledSimilarity {
  double similarity = 0.0;
  bool coreferent = false;
};

struct HistogramBin {
  double start = 0.0;
  std::size_t yes = 0;
  std::size_t no = 0;
};

// Half-open bins of `bin_width` from -1; the last bin also takes 1.0.
inline std::vector<HistogramBin> similarity_histogram(const std::vector<LabeledSimilarity>& pairs,
                                                      double bin_width = 0.05) {
  if (!(bin_width > 0) || !std::isfinite(bin_width)) throw Error(ErrorCode::validation, "bin width must be positive");
  auto count = static_cast<std::size_t>(std::ceil(2.0 / bin_width - 1e-9));
  std::vector<HistogramBin> bins(count);
  for (std::size_t i = 0; i < count; ++i) {
    bins[i].start = std::round((-1.0 + static_cast<double>(i) * bin_width) * 1e9) / 1e9;
  }
  for (const auto& p : pairs) {
    if (!(p.similarity >= -1.0 && p.similarity <= 1.0)) {
      throw Error(ErrorCode::validation, "similarity outside [-1, 1]");
    }
    auto idx = static_cast<std::size_t>(std::floor((p.similarity + 1.0) / bin_width + 1e-9));
    idx = std::min(idx, count - 1);
    ++(p.coreferent ? bins[idx].yes : bins[idx].no);
  }
  return bins;
}

inline void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins) {
  out << "bin_start,count_yes,count_no\n";
  char buf[64];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof buf, "%.4f,%zu,%zu\n", b.start, b.yes, b.no);
    out << buf;
  }
}

// ---- cluster files ----------------------------------------------------------------

struct ClusterRecord {
  DocId doc_id;
  CharRange range;
  std::string cluster_id;
};

inline nlohmann::json to_json(const ClusterRecord& r) {
  return {{"doc_id", r.doc_id}, {"start_char", r.range.start}, {"end_char", r.range.end}, {"cluster_id", r.cluster_id}};
}

struct ClusterFile {
  Clustering clustering;
  std::size_t records = 0;
  std::vector<RecordError> errors;
};

// One line per mention: {doc_id, start_char, end_char, cluster_id}.
inline ClusterFile read_cluster_file(std::istream& in) {
  ClusterFile out;
  std::map<std::string, std::set<std::string>> by_cluster;
  std::map<std::string, std::string> cluster_of;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    ++out.records;
    try {
      auto j = nlohmann::json::parse(line);
      auto start = j.at("start_char").get<std::int64_t>();
      auto end = j.at("end_char").get<std::int64_t>();
      if (start < 0 || end <= start) throw Error(ErrorCode::validation, "empty or inverted span");
      CharRange range{static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
      auto doc = j.at("doc_id").get<std::string>();
      const auto& cid = j.at("cluster_id");
      auto cluster = cid.is_string() ? cid.get<std::string>() : cid.dump();
      auto id = make_mention_id(doc, range);
      auto [it, added] = cluster_of.emplace(id, cluster);
      if (!added && it->second != cluster) {
        throw Error(ErrorCode::not_a_partition, "mention " + id + " appears in clusters " + it->second + " and " + cluster);
      }
      by_cluster[cluster].insert(id);
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({lineno, ErrorCode::schema, e.what()});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::not_a_partition) throw;
      out.errors.push_back({lineno, e.code(), e.what()});
    }
  }
  for (auto& [id, members] : by_cluster) out.clustering.push_back(std::move(members));
  out.clustering = canonical(std::move(out.clustering));
  return out;
}

inline ClusterFile read_cluster_file(const std::string& path) {
  auto in = detail::open_input(path);
  return read_cluster_file(in);
}

// Every clustered mention plus every active mention (as a singleton named
// "s:<mention_id>") of the documents in `split`, or of all documents.
inline std::vector<ClusterRecord> export_cluster_records(const CorpusStore& store,
                                                         const std::optional<std::string>& split = std::nullopt) {
  std::set<DocId> docs;
  for (const auto& [id, p] : store.pairs()) {
    if (split && p.split != split) continue;
    docs.insert(p.news.doc_id);
    docs.insert(p.science.doc_id);
  }
  std::vector<ClusterRecord> out;
  for (const auto& [id, m] : store.mentions()) {
    if (!docs.count(m.doc_id)) continue;
    auto cluster = store.clusters().cluster_of(m.mention_id);
    if (!cluster && m.superseded_by) continue;
    out.push_back({m.doc_id, m.range, cluster ? *cluster : "s:" + m.mention_id});
  }
  return out;
}

// Inverse of make_mention_id: "doc:start-end".
inline std::pair<DocId, CharRange> parse_mention_id(const MentionId& id) {
  auto colon = id.rfind(':');
  auto dash = colon == std::string::npos ? std::string::npos : id.find('-', colon);
  try {
    if (dash == std::string::npos || colon == 0) throw std::invalid_argument(id);
    std::size_t used = 0;
    auto start = std::stoull(id.substr(colon + 1, dash - colon - 1), &used);
    if (used != dash - colon - 1) throw std::invalid_argument(id);
    auto end = std::stoull(id.substr(dash + 1), &used);
    if (used != id.size() - dash - 1) throw std::invalid_argument(id);
    return {id.substr(0, colon), CharRange{static_cast<std::size_t>(start), static_cast<std::size_t>(end)}};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::format, "mention id '" + id + "' is not of the form doc:start-end");
  }
}

// Cluster-file records for a clustering over location-derived mention ids.
// Clusters are named k0, k1, ... in canonical order.
inline std::vector<ClusterRecord> cluster_records(const Clustering& c) {
  std::vector<ClusterRecord> out;
  auto sorted = canonical(c);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (const auto& id : sorted[i]) {
      auto [doc, range] = parse_mention_id(id);
      out.push_back({doc, range, "k" + std::to_string(i)});
    }
  }
  return out;
}

inline void write_cluster_file(std::ostream& out, const std::vector<ClusterRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace cdcr
