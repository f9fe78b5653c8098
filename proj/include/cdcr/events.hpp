#pragma once

// Every state change of the workbench is one of these events. Applying the
// same sequence of events to an empty engine always yields the same state.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "cdcr/corpus.hpp"
#include "cdcr/embedding.hpp"

namespace cdcr {

struct QueueConfig {
  double iaa_fraction = 0.05;
  std::int64_t weekly_iaa_cap = 150;
  std::uint64_t sampling_seed = 0;
  std::chrono::seconds claim_lease = std::chrono::minutes(15);
  bool stratified_ranking = false;

  void validate() const {
    if (!(iaa_fraction >= 0.0 && iaa_fraction <= 1.0)) {
      throw Error(ErrorCode::validation, "iaa_fraction must lie in [0, 1]");
    }
    if (weekly_iaa_cap < 0) throw Error(ErrorCode::validation, "weekly_iaa_cap must be >= 0");
    if (claim_lease.count() <= 0) throw Error(ErrorCode::validation, "claim_lease must be positive");
  }

  friend bool operator==(const QueueConfig&, const QueueConfig&) = default;
};

inline void to_json(nlohmann::json& j, const QueueConfig& c) {
  j = nlohmann::json{{"iaa_fraction", c.iaa_fraction},
                     {"weekly_iaa_cap", c.weekly_iaa_cap},
                     {"sampling_seed", c.sampling_seed},
                     {"claim_lease_seconds", c.claim_lease.count()},
                     {"stratified_ranking", c.stratified_ranking}};
}

inline void from_json(const nlohmann::json& j, QueueConfig& c) {
  c.iaa_fraction = j.at("iaa_fraction").get<double>();
  c.weekly_iaa_cap = j.at("weekly_iaa_cap").get<std::int64_t>();
  c.sampling_seed = j.at("sampling_seed").get<std::uint64_t>();
  c.claim_lease = std::chrono::seconds(j.at("claim_lease_seconds").get<std::int64_t>());
  c.stratified_ranking = j.value("stratified_ranking", false);
}

namespace events {

struct ConfigSet {
  QueueConfig config;
  friend bool operator==(const ConfigSet&, const ConfigSet&) = default;
};
struct AnnotatorRegistered {
  AnnotatorId annotator;
  friend bool operator==(const AnnotatorRegistered&, const AnnotatorRegistered&) = default;
};
struct DocumentPairAdded {
  DocumentPair pair;
  friend bool operator==(const DocumentPairAdded&, const DocumentPairAdded&) = default;
};
struct MentionAdded {
  DocId doc_id;
  CharRange range;
  friend bool operator==(const MentionAdded&, const MentionAdded&) = default;
};
struct EmbeddingsLoaded {
  EmbeddingTable table;
  friend bool operator==(const EmbeddingsLoaded&, const EmbeddingsLoaded&) = default;
};
struct CandidatesGenerated {
  PairId pair_id;
  friend bool operator==(const CandidatesGenerated&, const CandidatesGenerated&) = default;
};
struct TaskClaimed {
  AnnotatorId annotator;
  PairKey key;
  friend bool operator==(const TaskClaimed&, const TaskClaimed&) = default;
};
struct AnnotationSubmitted {
  AnnotatorId annotator;
  PairKey key;
  Verdict verdict = Verdict::no;
  bool difficult = false;
  std::optional<SpanEdit> span_edit;
  std::optional<std::string> idempotency_token;
  friend bool operator==(const AnnotationSubmitted&, const AnnotationSubmitted&) = default;
};
struct PairProposed {
  AnnotatorId annotator;
  PairKey shown;
  MentionId keep;
  DocId doc_id;
  CharRange range;
  friend bool operator==(const PairProposed&, const PairProposed&) = default;
};
struct SpanAdjusted {
  AnnotatorId annotator;
  MentionId mention_id;
  CharRange range;
  friend bool operator==(const SpanAdjusted&, const SpanAdjusted&) = default;
};

}  // namespace events

using EventBody = std::variant<events::ConfigSet, events::AnnotatorRegistered, events::DocumentPairAdded,
                               events::MentionAdded, events::EmbeddingsLoaded, events::CandidatesGenerated,
                               events::TaskClaimed, events::AnnotationSubmitted, events::PairProposed,
                               events::SpanAdjusted>;

struct Event {
  std::uint64_t seq = 0;
  Timestamp at{};
  EventBody body;
  friend bool operator==(const Event&, const Event&) = default;
};

inline nlohmann::json event_to_json(const Event& e) {
  nlohmann::json j{{"seq", e.seq}, {"at", format_timestamp(e.at)}};
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, events::ConfigSet>) {
          j["type"] = "config";
          j["config"] = b.config;
        } else if constexpr (std::is_same_v<T, events::AnnotatorRegistered>) {
          j["type"] = "annotator";
          j["annotator"] = b.annotator;
        } else if constexpr (std::is_same_v<T, events::DocumentPairAdded>) {
          j["type"] = "document_pair";
          j["pair"] = b.pair;
        } else if constexpr (std::is_same_v<T, events::MentionAdded>) {
          j["type"] = "mention";
          j["doc_id"] = b.doc_id;
          j["range"] = b.range;
        } else if constexpr (std::is_same_v<T, events::EmbeddingsLoaded>) {
          j["type"] = "embeddings";
          j["table"] = b.table;
        } else if constexpr (std::is_same_v<T, events::CandidatesGenerated>) {
          j["type"] = "candidates";
          j["pair_id"] = b.pair_id;
        } else if constexpr (std::is_same_v<T, events::TaskClaimed>) {
          j["type"] = "claim";
          j["annotator"] = b.annotator;
          j["pair_key"] = b.key;
        } else if constexpr (std::is_same_v<T, events::AnnotationSubmitted>) {
          j["type"] = "annotation";
          j["annotator"] = b.annotator;
          j["pair_key"] = b.key;
          j["verdict"] = b.verdict;
          j["difficult"] = b.difficult;
          if (b.span_edit) j["span_edit"] = {{"mention_id", b.span_edit->mention_id}, {"range", b.span_edit->range}};
          if (b.idempotency_token) j["idempotency_token"] = *b.idempotency_token;
        } else if constexpr (std::is_same_v<T, events::PairProposed>) {
          j["type"] = "proposal";
          j["annotator"] = b.annotator;
          j["shown_pair_key"] = b.shown;
          j["keep"] = b.keep;
          j["doc_id"] = b.doc_id;
          j["range"] = b.range;
        } else if constexpr (std::is_same_v<T, events::SpanAdjusted>) {
          j["type"] = "span";
          j["annotator"] = b.annotator;
          j["mention_id"] = b.mention_id;
          j["range"] = b.range;
        }
      },
      e.body);
  return j;
}

inline Event event_from_json(const nlohmann::json& j) {
  Event e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.at = parse_timestamp(j.at("at").get<std::string>());
  auto type = j.at("type").get<std::string>();
  if (type == "config") {
    e.body = events::ConfigSet{j.at("config").get<QueueConfig>()};
  } else if (type == "annotator") {
    e.body = events::AnnotatorRegistered{j.at("annotator").get<std::string>()};
  } else if (type == "document_pair") {
    e.body = events::DocumentPairAdded{j.at("pair").get<DocumentPair>()};
  } else if (type == "mention") {
    e.body = events::MentionAdded{j.at("doc_id").get<std::string>(), j.at("range").get<CharRange>()};
  } else if (type == "embeddings") {
    e.body = events::EmbeddingsLoaded{j.at("table").get<EmbeddingTable>()};
  } else if (type == "candidates") {
    e.body = events::CandidatesGenerated{j.at("pair_id").get<std::string>()};
  } else if (type == "claim") {
    e.body = events::TaskClaimed{j.at("annotator").get<std::string>(), j.at("pair_key").get<PairKey>()};
  } else if (type == "annotation") {
    events::AnnotationSubmitted b;
    b.annotator = j.at("annotator").get<std::string>();
    b.key = j.at("pair_key").get<PairKey>();
    b.verdict = j.at("verdict").get<Verdict>();
    b.difficult = j.at("difficult").get<bool>();
    if (j.contains("span_edit")) {
      b.span_edit = SpanEdit{j["span_edit"].at("mention_id").get<std::string>(),
                             j["span_edit"].at("range").get<CharRange>()};
    }
    if (j.contains("idempotency_token")) b.idempotency_token = j["idempotency_token"].get<std::string>();
    e.body = std::move(b);
  } else if (type == "proposal") {
    e.body = events::PairProposed{j.at("annotator").get<std::string>(), j.at("shown_pair_key").get<PairKey>(),
                                  j.at("keep").get<std::string>(), j.at("doc_id").get<std::string>(),
                                  j.at("range").get<CharRange>()};
  } else if (type == "span") {
    e.body = events::SpanAdjusted{j.at("annotator").get<std::string>(), j.at("mention_id").get<std::string>(),
                                  j.at("range").get<CharRange>()};
  } else {
    throw Error(ErrorCode::format, "unknown event type '" + type + "'");
  }
  return e;
}

// Receives each event before it is applied. Throwing aborts the operation
// with state unchanged.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void append(const Event& event) = 0;
};

}  // namespace cdcr
