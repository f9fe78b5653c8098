#pragma once

// Corpus data model: documents, document pairs, mentions, candidate pairs,
// clusters and annotation events.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/errors.hpp"
#include "cdcr/time.hpp"

namespace cdcr {

using json = nlohmann::json;

using DocId = std::string;
using MentionId = std::string;
using PairId = std::string;
using AnnotatorId = std::string;

enum class DocKind { news, science };

NLOHMANN_JSON_SERIALIZE_ENUM(DocKind, {{DocKind::news, "news"}, {DocKind::science, "science"}})

// Half-open code-point range [start, end).
struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;

  bool valid() const { return start < end; }
  friend bool operator==(const CharRange&, const CharRange&) = default;
  friend auto operator<=>(const CharRange&, const CharRange&) = default;
};

inline bool span_overlap(const CharRange& a, const CharRange& b) {
  if (!a.valid() || !b.valid()) {
    throw Error(ErrorCode::validation, "invalid character range (start must be < end)");
  }
  return std::max(a.start, b.start) < std::min(a.end, b.end);
}

// Inclusive token index range.
struct TokenSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Document {
  DocId doc_id;
  DocKind kind = DocKind::news;
  std::string title;
  std::string summary_text;
  std::optional<std::string> full_text;
  std::optional<std::string> doi;
  std::vector<std::string> authors;
  std::optional<Date> published;
  std::optional<std::string> url;
  std::vector<std::string> affiliations;

  friend bool operator==(const Document&, const Document&) = default;
};

struct DocumentPair {
  PairId pair_id;
  std::optional<std::string> split;
  Document news;
  Document science;
  Timestamp created_at{};

  friend bool operator==(const DocumentPair&, const DocumentPair&) = default;
};

struct Mention {
  MentionId mention_id;
  DocId doc_id;
  CharRange range;
  std::optional<TokenSpan> token_span;
  std::string surface;
  // Set when a span adjustment replaced this version.
  std::optional<MentionId> superseded_by;

  friend bool operator==(const Mention&, const Mention&) = default;
};

// Mention ids are derived from their location, which makes duplicate spans in
// one document collapse to the same id.
inline MentionId make_mention_id(const DocId& doc_id, const CharRange& range) {
  return doc_id + ":" + std::to_string(range.start) + "-" + std::to_string(range.end);
}

// Canonical unordered pair of mention ids; `first < second` always holds.
class PairKey {
 public:
  PairKey() = default;
  PairKey(MentionId a, MentionId b) {
    if (a == b) throw Error(ErrorCode::cross_document, "a pair needs two distinct mentions");
    if (b < a) std::swap(a, b);
    first_ = std::move(a);
    second_ = std::move(b);
  }

  static PairKey parse(const std::string& s) {
    auto bar = s.find('|');
    if (bar == std::string::npos || s.find('|', bar + 1) != std::string::npos) {
      throw Error(ErrorCode::format, "malformed pair key '" + s + "'");
    }
    return PairKey(s.substr(0, bar), s.substr(bar + 1));
  }

  const MentionId& first() const { return first_; }
  const MentionId& second() const { return second_; }
  bool contains(const MentionId& m) const { return m == first_ || m == second_; }
  const MentionId& other(const MentionId& m) const { return m == first_ ? second_ : first_; }
  std::string str() const { return first_ + "|" + second_; }

  friend bool operator==(const PairKey&, const PairKey&) = default;
  friend auto operator<=>(const PairKey&, const PairKey&) = default;

 private:
  MentionId first_;
  MentionId second_;
};

inline PairKey pair_key(const Mention& a, const Mention& b) {
  if (a.doc_id == b.doc_id) {
    throw Error(ErrorCode::cross_document,
                "mentions " + a.mention_id + " and " + b.mention_id + " share document " + a.doc_id);
  }
  return PairKey(a.mention_id, b.mention_id);
}

enum class PairStatus { pending, claimed, resolved };
enum class Gold { coreferent, not_coreferent, unresolved };
enum class Verdict { yes, no };

NLOHMANN_JSON_SERIALIZE_ENUM(PairStatus, {{PairStatus::pending, "pending"},
                                          {PairStatus::claimed, "claimed"},
                                          {PairStatus::resolved, "resolved"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Gold, {{Gold::coreferent, "coreferent"},
                                    {Gold::not_coreferent, "not_coreferent"},
                                    {Gold::unresolved, "unresolved"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Verdict, {{Verdict::yes, "yes"}, {Verdict::no, "no"}})

struct CandidatePair {
  PairKey key;
  PairId pair_id;
  std::optional<double> similarity;
  bool iaa = false;
  PairStatus status = PairStatus::pending;
  std::optional<Gold> gold;
  bool difficult = false;

  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

struct CoreferenceCluster {
  std::string cluster_id;
  std::set<MentionId> mention_ids;
};

struct SpanEdit {
  MentionId mention_id;
  CharRange range;
  friend bool operator==(const SpanEdit&, const SpanEdit&) = default;
};

struct AnnotationEvent {
  std::uint64_t event_id = 0;
  AnnotatorId annotator_id;
  PairKey pair_key;
  Verdict verdict = Verdict::no;
  bool difficult = false;
  std::optional<SpanEdit> proposed_span_edit;
  Timestamp timestamp{};

  friend bool operator==(const AnnotationEvent&, const AnnotationEvent&) = default;
};

// ---------------------------------------------------------------------------
// JSON mappings

inline void to_json(json& j, const CharRange& r) { j = json::array({r.start, r.end}); }
inline void from_json(const json& j, CharRange& r) {
  r.start = j.at(0).get<std::size_t>();
  r.end = j.at(1).get<std::size_t>();
}

inline void to_json(json& j, const PairKey& k) { j = k.str(); }
inline void from_json(const json& j, PairKey& k) { k = PairKey::parse(j.get<std::string>()); }

namespace detail {

template <class T>
void put_optional(json& j, const char* name, const std::optional<T>& v) {
  if (v) j[name] = *v;
}

template <class T>
void get_optional(const json& j, const char* name, std::optional<T>& v) {
  auto it = j.find(name);
  if (it != j.end() && !it->is_null()) {
    v = it->template get<T>();
  } else {
    v.reset();
  }
}

}  // namespace detail

inline void to_json(json& j, const Document& d) {
  j = json{{"doc_id", d.doc_id},
           {"kind", d.kind},
           {"title", d.title},
           {"summary_text", d.summary_text},
           {"authors", d.authors}};
  detail::put_optional(j, "full_text", d.full_text);
  detail::put_optional(j, "doi", d.doi);
  detail::put_optional(j, "url", d.url);
  if (d.published) j["published"] = format_date(*d.published);
  if (!d.affiliations.empty()) j["affiliations"] = d.affiliations;
}

inline void from_json(const json& j, Document& d) {
  d.doc_id = j.at("doc_id").get<std::string>();
  d.kind = j.at("kind").get<DocKind>();
  d.title = j.value("title", std::string{});
  d.summary_text = j.at("summary_text").get<std::string>();
  d.authors = j.value("authors", std::vector<std::string>{});
  detail::get_optional(j, "full_text", d.full_text);
  detail::get_optional(j, "doi", d.doi);
  detail::get_optional(j, "url", d.url);
  d.published.reset();
  if (j.contains("published") && !j["published"].is_null()) {
    d.published = parse_date(j["published"].get<std::string>());
  }
  d.affiliations = j.value("affiliations", std::vector<std::string>{});
}

inline void to_json(json& j, const DocumentPair& p) {
  j = json{{"pair_id", p.pair_id},
           {"news", p.news},
           {"science", p.science},
           {"created_at", format_timestamp(p.created_at)}};
  detail::put_optional(j, "split", p.split);
}

inline void from_json(const json& j, DocumentPair& p) {
  p.pair_id = j.at("pair_id").get<std::string>();
  p.news = j.at("news").get<Document>();
  p.science = j.at("science").get<Document>();
  p.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  detail::get_optional(j, "split", p.split);
}

inline void to_json(json& j, const Mention& m) {
  j = json{{"mention_id", m.mention_id},
           {"doc_id", m.doc_id},
           {"range", m.range},
           {"surface", m.surface}};
  if (m.token_span) j["token_span"] = json::array({m.token_span->first, m.token_span->last});
  detail::put_optional(j, "superseded_by", m.superseded_by);
}

inline void from_json(const json& j, Mention& m) {
  m.mention_id = j.at("mention_id").get<std::string>();
  m.doc_id = j.at("doc_id").get<std::string>();
  m.range = j.at("range").get<CharRange>();
  m.surface = j.at("surface").get<std::string>();
  m.token_span.reset();
  if (j.contains("token_span")) {
    m.token_span = TokenSpan{j["token_span"].at(0).get<std::size_t>(),
                             j["token_span"].at(1).get<std::size_t>()};
  }
  detail::get_optional(j, "superseded_by", m.superseded_by);
}

inline void to_json(json& j, const CandidatePair& c) {
  j = json{{"pair_key", c.key},
           {"pair_id", c.pair_id},
           {"iaa", c.iaa},
           {"status", c.status},
           {"difficult", c.difficult}};
  detail::put_optional(j, "similarity", c.similarity);
  detail::put_optional(j, "gold", c.gold);
}

inline void from_json(const json& j, CandidatePair& c) {
  c.key = j.at("pair_key").get<PairKey>();
  c.pair_id = j.at("pair_id").get<std::string>();
  c.iaa = j.at("iaa").get<bool>();
  c.status = j.at("status").get<PairStatus>();
  c.difficult = j.value("difficult", false);
  detail::get_optional(j, "similarity", c.similarity);
  detail::get_optional(j, "gold", c.gold);
}

inline void to_json(json& j, const AnnotationEvent& e) {
  j = json{{"event_id", e.event_id},
           {"annotator", e.annotator_id},
           {"pair_key", e.pair_key},
           {"verdict", e.verdict},
           {"difficult", e.difficult},
           {"timestamp", format_timestamp(e.timestamp)}};
  if (e.proposed_span_edit) {
    j["span_edit"] = json{{"mention_id", e.proposed_span_edit->mention_id},
                          {"range", e.proposed_span_edit->range}};
  }
}

inline void from_json(const json& j, AnnotationEvent& e) {
  e.event_id = j.value("event_id", std::uint64_t{0});
  e.annotator_id = j.at("annotator").get<std::string>();
  e.pair_key = j.at("pair_key").get<PairKey>();
  e.verdict = j.at("verdict").get<Verdict>();
  e.difficult = j.value("difficult", false);
  e.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
  e.proposed_span_edit.reset();
  if (j.contains("span_edit")) {
    e.proposed_span_edit = SpanEdit{j["span_edit"].at("mention_id").get<std::string>(),
                                    j["span_edit"].at("range").get<CharRange>()};
  }
}

}  // namespace cdcr
