#pragma once

// In-memory corpus: document pairs, mentions, embedding tables and clusters,
// plus the corpus-level validation report.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/clusters.hpp"
#include "cdcr/corpus.hpp"
#include "cdcr/embedding.hpp"
#include "cdcr/text.hpp"

namespace cdcr {

struct SplitCounts {
  std::size_t documents = 0;
  std::size_t mentions = 0;
  std::size_t clusters = 0;
};

struct ValidationReport {
  std::size_t document_pairs = 0;
  std::size_t documents = 0;
  std::size_t mentions = 0;
  // Mentions that belong to a cluster of size >= 2.
  std::size_t clustered_mentions = 0;
  // Clusters of size >= 2.
  std::size_t clusters = 0;
  std::map<std::string, SplitCounts> splits;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

inline nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [name, c] : r.splits) {
    splits[name] = {{"documents", c.documents}, {"mentions", c.mentions}, {"clusters", c.clusters}};
  }
  return {{"document_pairs", r.document_pairs}, {"documents", r.documents},
          {"mentions", r.mentions},             {"clustered_mentions", r.clustered_mentions},
          {"clusters", r.clusters},             {"splits", splits},
          {"violations", r.violations}};
}

enum class AddStatus { added, unchanged };

class CorpusStore {
 public:
  // Throws on anything add_document_pair() would reject.
  AddStatus check_document_pair(const DocumentPair& pair) const {
    check_pair(pair);
    if (auto it = pairs_.find(pair.pair_id); it != pairs_.end()) {
      if (same_content(it->second, pair)) return AddStatus::unchanged;
      throw Error(ErrorCode::conflict, "pair_id " + pair.pair_id + " already stored with different content");
    }
    for (const Document* d : {&pair.news, &pair.science}) {
      if (doc_to_pair_.count(d->doc_id)) {
        throw Error(ErrorCode::conflict, "doc_id " + d->doc_id + " already belongs to pair " +
                                             doc_to_pair_.at(d->doc_id));
      }
    }
    return AddStatus::added;
  }

  AddStatus add_document_pair(DocumentPair pair) {
    if (check_document_pair(pair) == AddStatus::unchanged) return AddStatus::unchanged;
    doc_to_pair_[pair.news.doc_id] = pair.pair_id;
    doc_to_pair_[pair.science.doc_id] = pair.pair_id;
    pairs_.emplace(pair.pair_id, std::move(pair));
    return AddStatus::added;
  }

  // Content equality ignoring the ingestion timestamp.
  static bool same_content(const DocumentPair& a, const DocumentPair& b) {
    return a.pair_id == b.pair_id && a.split == b.split && a.news == b.news && a.science == b.science;
  }

  bool has_pair(const PairId& id) const { return pairs_.count(id) != 0; }
  const DocumentPair& pair(const PairId& id) const {
    auto it = pairs_.find(id);
    if (it == pairs_.end()) throw Error(ErrorCode::validation, "unknown document pair " + id);
    return it->second;
  }
  const std::map<PairId, DocumentPair>& pairs() const { return pairs_; }

  bool has_document(const DocId& id) const { return doc_to_pair_.count(id) != 0; }
  const Document& document(const DocId& id) const {
    const auto& p = pair(pair_id_of(id));
    return p.news.doc_id == id ? p.news : p.science;
  }
  const PairId& pair_id_of(const DocId& id) const {
    auto it = doc_to_pair_.find(id);
    if (it == doc_to_pair_.end()) throw Error(ErrorCode::validation, "unknown document " + id);
    return it->second;
  }

  // Validates a prospective mention and returns the id it would get.
  MentionId check_mention(const DocId& doc_id, const CharRange& range) const {
    if (!has_document(doc_id)) throw Error(ErrorCode::validation, "unknown doc_id " + doc_id);
    const auto& doc = document(doc_id);
    if (!range.valid()) throw Error(ErrorCode::validation, "empty or inverted mention range");
    auto len = text::length(doc.summary_text);
    if (range.end > len) {
      throw Error(ErrorCode::validation, "mention [" + std::to_string(range.start) + "," +
                                             std::to_string(range.end) + ") exceeds summary length " +
                                             std::to_string(len) + " of " + doc_id);
    }
    return make_mention_id(doc_id, range);
  }

  // Derives the surface from the summary; identical spans in one document map
  // to one mention.
  std::pair<const Mention*, bool> add_mention(const DocId& doc_id, CharRange range) {
    auto id = check_mention(doc_id, range);
    if (auto it = mentions_.find(id); it != mentions_.end()) return {&it->second, false};
    const auto& doc = document(doc_id);
    Mention m;
    m.mention_id = id;
    m.doc_id = doc_id;
    m.range = range;
    m.surface = text::substr(doc.summary_text, range.start, range.end);
    if (auto t = tables_.find(pair_id_of(doc_id)); t != tables_.end()) {
      m.token_span = resolve_token_span(t->second, doc_id, range);
    }
    auto [it, _] = mentions_.emplace(id, std::move(m));
    by_doc_[doc_id].insert(id);
    return {&it->second, true};
  }

  bool has_mention(const MentionId& id) const { return mentions_.count(id) != 0; }
  const Mention& mention(const MentionId& id) const {
    auto it = mentions_.find(id);
    if (it == mentions_.end()) throw Error(ErrorCode::unknown_mention, "unknown mention " + id);
    return it->second;
  }
  const std::map<MentionId, Mention>& mentions() const { return mentions_; }

  void set_superseded(const MentionId& id, std::optional<MentionId> by) {
    auto it = mentions_.find(id);
    if (it == mentions_.end()) throw Error(ErrorCode::unknown_mention, "unknown mention " + id);
    it->second.superseded_by = std::move(by);
  }

  // Live (not superseded) mentions of one document, in id order.
  std::vector<const Mention*> active_mentions(const DocId& doc_id) const {
    std::vector<const Mention*> out;
    auto it = by_doc_.find(doc_id);
    if (it == by_doc_.end()) return out;
    for (const auto& id : it->second) {
      const auto& m = mentions_.at(id);
      if (!m.superseded_by) out.push_back(&m);
    }
    return out;
  }

  void check_embedding_table(const EmbeddingTable& table) const {
    const auto& p = pair(table.pair_id);
    if (table.dim == 0 || table.values.size() != table.rows() * table.dim) {
      throw Error(ErrorCode::format, "table " + table.pair_id + " has inconsistent dimensions");
    }
    for (std::size_t i = 0; i < table.tokens.size(); ++i) {
      const auto& tok = table.tokens[i];
      if (tok.doc_id != p.news.doc_id && tok.doc_id != p.science.doc_id) {
        throw Error(ErrorCode::format, "token row " + std::to_string(i) + " names doc " + tok.doc_id +
                                           " outside pair " + p.pair_id);
      }
      auto len = text::length(document(tok.doc_id).summary_text);
      if (!tok.range.valid() || tok.range.end > len) {
        throw Error(ErrorCode::format, "token row " + std::to_string(i) + " outside summary bounds");
      }
      if (i > 0 && table.tokens[i - 1].doc_id == tok.doc_id && table.tokens[i - 1].range.start >= tok.range.start) {
        throw Error(ErrorCode::format, "token row " + std::to_string(i) + " out of order");
      }
      if (i > 1 && table.tokens[i - 1].doc_id != tok.doc_id) {
        for (std::size_t k = 0; k + 1 < i; ++k) {
          if (table.tokens[k].doc_id == tok.doc_id) {
            throw Error(ErrorCode::format, "rows of " + tok.doc_id + " are not contiguous");
          }
        }
      }
    }
    for (float v : table.values) {
      if (!std::isfinite(v)) throw Error(ErrorCode::format, "table " + table.pair_id + " has non-finite values");
    }
  }

  void set_embedding_table(EmbeddingTable table) {
    check_embedding_table(table);
    const auto& p = pair(table.pair_id);
    auto id = table.pair_id;
    tables_[id] = std::move(table);
    const auto& stored = tables_[id];
    for (const Document* d : {&p.news, &p.science}) {
      if (auto it = by_doc_.find(d->doc_id); it != by_doc_.end()) {
        for (const auto& mid : it->second) {
          auto& m = mentions_.at(mid);
          m.token_span = resolve_token_span(stored, m.doc_id, m.range);
        }
      }
    }
  }

  const EmbeddingTable* embedding_table(const PairId& id) const {
    auto it = tables_.find(id);
    return it == tables_.end() ? nullptr : &it->second;
  }

  ClusterSet& clusters() { return clusters_; }
  const ClusterSet& clusters() const { return clusters_; }

  friend bool operator==(const CorpusStore& a, const CorpusStore& b) {
    return a.pairs_ == b.pairs_ && a.mentions_ == b.mentions_ && a.tables_ == b.tables_ &&
           a.clusters_ == b.clusters_;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    auto& pairs = j["pairs"] = nlohmann::json::array();
    for (const auto& [id, p] : pairs_) pairs.push_back(p);
    auto& mentions = j["mentions"] = nlohmann::json::array();
    for (const auto& [id, m] : mentions_) mentions.push_back(m);
    auto& tables = j["tables"] = nlohmann::json::array();
    for (const auto& [id, t] : tables_) tables.push_back(t);
    j["clusters"] = clusters_.to_json();
    return j;
  }

  // Restores a stored snapshot verbatim; validate_corpus() reports anything
  // inconsistent in it.
  static CorpusStore from_json(const nlohmann::json& j) {
    CorpusStore s;
    for (const auto& pj : j.at("pairs")) {
      auto p = pj.get<DocumentPair>();
      s.doc_to_pair_[p.news.doc_id] = p.pair_id;
      s.doc_to_pair_[p.science.doc_id] = p.pair_id;
      s.pairs_.emplace(p.pair_id, std::move(p));
    }
    for (const auto& mj : j.at("mentions")) {
      auto m = mj.get<Mention>();
      s.by_doc_[m.doc_id].insert(m.mention_id);
      s.mentions_.emplace(m.mention_id, std::move(m));
    }
    for (const auto& tj : j.at("tables")) {
      auto t = tj.get<EmbeddingTable>();
      s.tables_.emplace(t.pair_id, std::move(t));
    }
    s.clusters_ = ClusterSet::from_json(j.at("clusters"));
    return s;
  }

 private:
  static void check_pair(const DocumentPair& p) {
    if (p.pair_id.empty()) throw Error(ErrorCode::schema, "empty pair_id");
    if (p.news.kind != DocKind::news || p.science.kind != DocKind::science) {
      throw Error(ErrorCode::schema, "pair " + p.pair_id + " must hold one news and one science document");
    }
    for (const Document* d : {&p.news, &p.science}) {
      if (d->doc_id.empty()) throw Error(ErrorCode::schema, "empty doc_id in pair " + p.pair_id);
      if (d->doc_id.find('|') != std::string::npos) {
        throw Error(ErrorCode::schema, "doc_id may not contain '|': " + d->doc_id);
      }
      if (d->summary_text.empty()) {
        throw Error(ErrorCode::schema, "document " + d->doc_id + " has empty summary_text");
      }
    }
    if (p.news.doc_id == p.science.doc_id) {
      throw Error(ErrorCode::schema, "pair " + p.pair_id + " uses one doc_id for both documents");
    }
  }

  std::map<PairId, DocumentPair> pairs_;
  std::map<DocId, PairId> doc_to_pair_;
  std::map<MentionId, Mention> mentions_;
  std::map<DocId, std::set<MentionId>> by_doc_;
  std::map<PairId, EmbeddingTable> tables_;
  ClusterSet clusters_;
};

inline ValidationReport validate_corpus(const CorpusStore& store) {
  ValidationReport r;
  std::map<DocId, std::size_t> seen_docs;
  for (const auto& [id, p] : store.pairs()) {
    ++r.document_pairs;
    r.documents += 2;
    auto& split = r.splits[p.split.value_or("unassigned")];
    split.documents += 2;
    if (p.news.kind != DocKind::news) r.violations.push_back("pair " + id + ": news_doc kind is not news");
    if (p.science.kind != DocKind::science) {
      r.violations.push_back("pair " + id + ": sci_doc kind is not science");
    }
    for (const Document* d : {&p.news, &p.science}) {
      if (d->summary_text.empty()) r.violations.push_back("document " + d->doc_id + ": empty summary_text");
      if (++seen_docs[d->doc_id] == 2) r.violations.push_back("document " + d->doc_id + ": duplicate doc_id");
    }
  }

  auto split_of_doc = [&](const DocId& doc) -> std::optional<std::string> {
    if (!store.has_document(doc)) return std::nullopt;
    return store.pair(store.pair_id_of(doc)).split.value_or("unassigned");
  };

  for (const auto& [id, m] : store.mentions()) {
    ++r.mentions;
    auto split = split_of_doc(m.doc_id);
    if (!split) {
      r.violations.push_back("mention " + id + ": unknown doc_id " + m.doc_id);
      continue;
    }
    ++r.splits[*split].mentions;
    const auto& text = store.document(m.doc_id).summary_text;
    auto len = text::length(text);
    if (!(m.range.start < m.range.end && m.range.end <= len)) {
      r.violations.push_back("mention " + id + ": range [" + std::to_string(m.range.start) + "," +
                             std::to_string(m.range.end) + ") outside summary of length " +
                             std::to_string(len));
      continue;
    }
    if (text::substr(text, m.range.start, m.range.end) != m.surface) {
      r.violations.push_back("mention " + id + ": surface does not match offsets");
    }
    if (const auto* table = store.embedding_table(store.pair_id_of(m.doc_id))) {
      if (resolve_token_span(*table, m.doc_id, m.range) != m.token_span) {
        r.violations.push_back("mention " + id + ": token_span does not cover its characters");
      }
    }
  }

  std::map<MentionId, std::string> owner;
  for (const auto& c : store.clusters().clusters()) {
    for (const auto& m : c.mention_ids) {
      if (!store.has_mention(m)) r.violations.push_back("cluster " + c.cluster_id + ": unknown mention " + m);
      auto [it, fresh] = owner.emplace(m, c.cluster_id);
      if (!fresh) {
        r.violations.push_back("mention " + m + " in clusters " + it->second + " and " + c.cluster_id);
      }
    }
    if (c.mention_ids.size() < 2) continue;
    ++r.clusters;
    r.clustered_mentions += c.mention_ids.size();
    const auto& first = *c.mention_ids.begin();
    if (store.has_mention(first)) {
      if (auto split = split_of_doc(store.mention(first).doc_id)) ++r.splits[*split].clusters;
    }
  }
  return r;
}

}  // namespace cdcr
