#pragma once

// The annotation protocol as an event-sourced state machine.
//
// Each command validates against the current state, hands one Event to the
// sink (the durable log), then applies it. Replaying the same events through
// apply() rebuilds identical state. Queue order: IAA pairs this annotator has
// not answered (while under the weekly cap), then the annotator's own live
// claim, then unclaimed unanswered pairs in queue order. Queue order is batch
// order, ranked within each batch.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/corpus_store.hpp"
#include "cdcr/events.hpp"
#include "cdcr/ingestion.hpp"
#include "cdcr/pair_generation.hpp"

namespace cdcr {

// Seeded, stable membership: the same key and seed always give the same
// answer no matter when the pair enters the corpus.
inline bool sample_iaa(const PairKey& key, const QueueConfig& config) {
  std::uint64_t state = detail::fnv1a(key.str()) ^ (config.sampling_seed * 0x9E3779B97F4A7C15ULL);
  detail::splitmix64(state);
  double u = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
  return u < config.iaa_fraction;
}

struct ConflictReport {
  std::uint64_t event_id = 0;
  PairKey negative_pair;
  std::string cluster_id;
  std::string detail;
};

inline nlohmann::json to_json(const ConflictReport& c) {
  return {{"event_id", c.event_id},
          {"pair_key", c.negative_pair.str()},
          {"cluster_id", c.cluster_id},
          {"detail", c.detail}};
}

struct StateDelta {
  std::uint64_t event_id = 0;
  PairKey key;
  bool iaa = false;
  bool resolved = false;
  std::optional<Gold> gold;
  bool clusters_changed = false;
  std::optional<std::string> cluster_id;
  std::vector<std::string> absorbed_clusters;
  std::vector<ConflictReport> conflicts;
};

inline nlohmann::json to_json(const StateDelta& d) {
  nlohmann::json j{{"event_id", d.event_id},       {"pair_key", d.key.str()},
                   {"iaa", d.iaa},                 {"resolved", d.resolved},
                   {"clusters_changed", d.clusters_changed}, {"absorbed_clusters", d.absorbed_clusters}};
  j["gold"] = d.gold ? nlohmann::json(*d.gold) : nlohmann::json(nullptr);
  j["cluster_id"] = d.cluster_id ? nlohmann::json(*d.cluster_id) : nlohmann::json(nullptr);
  auto conflicts = nlohmann::json::array();
  for (const auto& c : d.conflicts) conflicts.push_back(to_json(c));
  j["conflicts"] = conflicts;
  return j;
}

struct ConsensusResult {
  Gold gold = Gold::unresolved;
  bool difficult = false;
  std::size_t yes = 0;
  std::size_t no = 0;
};

struct Claim {
  PairKey key;
  Timestamp expires{};
};

struct AnnotatorState {
  AnnotatorId annotator_id;
  std::map<IsoWeek, std::int64_t> iaa_by_week;
  std::optional<Claim> claim;

  std::int64_t iaa_completed(IsoWeek week) const {
    auto it = iaa_by_week.find(week);
    return it == iaa_by_week.end() ? 0 : it->second;
  }
};

struct PairState {
  CandidatePair pair;
  std::uint64_t queue_pos = 0;
  // Latest verdict per annotator; a resubmission replaces the earlier one.
  std::map<AnnotatorId, AnnotationEvent> verdicts;
  // Lease expiry per claimant.
  std::map<AnnotatorId, Timestamp> claims;

  bool answered() const { return !verdicts.empty(); }
  bool claimed_by_other(const AnnotatorId& a, Timestamp now) const {
    for (const auto& [who, expires] : claims) {
      if (who != a && expires > now) return true;
    }
    return false;
  }
};

class AnnotationEngine {
 public:
  explicit AnnotationEngine(QueueConfig config = {}, EventSink* sink = nullptr)
      : config_(config), sink_(sink) {
    config_.validate();
  }

  void set_sink(EventSink* sink) { sink_ = sink; }

  // ---- reads -------------------------------------------------------------

  const CorpusStore& corpus() const { return corpus_; }
  const QueueConfig& config() const { return config_; }
  std::uint64_t last_seq() const { return last_seq_; }
  const std::map<PairKey, PairState>& pairs() const { return pairs_; }
  const std::vector<ConflictReport>& conflicts() const { return conflicts_; }
  const std::map<AnnotatorId, AnnotatorState>& annotators() const { return annotators_; }

  bool has_pair(const PairKey& key) const { return pairs_.count(key) != 0; }
  const PairState& pair(const PairKey& key) const {
    auto it = pairs_.find(key);
    if (it == pairs_.end()) throw Error(ErrorCode::unknown_pair, "unknown pair " + key.str());
    return it->second;
  }

  bool is_registered(const AnnotatorId& id) const { return annotators_.count(id) != 0; }
  const AnnotatorState& annotator(const AnnotatorId& id) const {
    auto it = annotators_.find(id);
    if (it == annotators_.end()) throw Error(ErrorCode::unknown_annotator, "unknown annotator " + id);
    return it->second;
  }

  std::int64_t iaa_completed(const AnnotatorId& id, Timestamp now) const {
    return annotator(id).iaa_completed(iso_week(now));
  }

  std::set<PairKey> keys_for(const PairId& pair_id) const {
    std::set<PairKey> out;
    for (const auto& [k, ps] : pairs_) {
      if (ps.pair.pair_id == pair_id) out.insert(k);
    }
    return out;
  }

  const std::map<std::string, nlohmann::json>& idempotency() const { return idempotency_; }

  // ---- ingestion & configuration ------------------------------------------

  void configure(QueueConfig config, Timestamp now) {
    config.validate();
    if (config == config_ && last_seq_ > 0) return;
    commit(events::ConfigSet{config}, now);
  }

  void register_annotator(const AnnotatorId& id, Timestamp now) {
    if (id.empty()) throw Error(ErrorCode::validation, "empty annotator id");
    if (is_registered(id)) return;
    commit(events::AnnotatorRegistered{id}, now);
  }

  AddStatus add_document_pair(DocumentPair pair, Timestamp now) {
    if (corpus_.check_document_pair(pair) == AddStatus::unchanged) return AddStatus::unchanged;
    commit(events::DocumentPairAdded{std::move(pair)}, now);
    return AddStatus::added;
  }

  std::pair<MentionId, bool> add_mention(const DocId& doc_id, CharRange range, Timestamp now) {
    auto id = corpus_.check_mention(doc_id, range);
    if (corpus_.has_mention(id)) return {id, false};
    commit(events::MentionAdded{doc_id, range}, now);
    return {id, true};
  }

  void load_embedding_table(EmbeddingTable table, Timestamp now) {
    corpus_.check_embedding_table(table);
    if (const auto* existing = corpus_.embedding_table(table.pair_id); existing && *existing == table) return;
    commit(events::EmbeddingsLoaded{std::move(table)}, now);
  }

  // Number of new candidate pairs created.
  std::size_t generate_candidates(const PairId& pair_id, Timestamp now) {
    auto preview = cdcr::generate_candidates(corpus_, pair_id, keys_for(pair_id));
    if (preview.pairs.empty()) return 0;
    commit(events::CandidatesGenerated{pair_id}, now);
    return preview.pairs.size();
  }

  // ---- protocol ------------------------------------------------------------

  // The pair next_task() would serve, without claiming it.
  std::optional<PairKey> peek_task(const AnnotatorId& id, Timestamp now) const {
    const auto& a = annotator(id);
    if (a.iaa_completed(iso_week(now)) < config_.weekly_iaa_cap) {
      for (const auto& [pos, key] : iaa_queue_) {
        if (!pairs_.at(key).verdicts.count(id)) return key;
      }
    }
    if (a.claim && a.claim->expires > now) {
      const auto& ps = pairs_.at(a.claim->key);
      if (!ps.pair.iaa && !ps.answered()) return a.claim->key;
    }
    for (const auto& [pos, key] : open_queue_) {
      if (!pairs_.at(key).claimed_by_other(id, now)) return key;
    }
    return std::nullopt;
  }

  std::optional<CandidatePair> next_task(const AnnotatorId& id, Timestamp now) {
    auto key = peek_task(id, now);
    if (!key) return std::nullopt;
    commit(events::TaskClaimed{id, *key}, now);
    return pairs_.at(*key).pair;
  }

  StateDelta submit_annotation(const AnnotatorId& id, const PairKey& key, Verdict verdict, bool difficult,
                               Timestamp now, std::optional<std::string> idempotency_token = std::nullopt,
                               std::optional<SpanEdit> span_edit = std::nullopt) {
    if (idempotency_token) {
      if (auto it = idempotency_.find(*idempotency_token); it != idempotency_.end()) {
        return delta_from_json(it->second);
      }
    }
    check_submit(id, key, now);
    if (span_edit) {
      if (!key.contains(span_edit->mention_id)) {
        throw Error(ErrorCode::validation, "span edit must target a member of the pair");
      }
      corpus_.check_mention(corpus_.mention(span_edit->mention_id).doc_id, span_edit->range);
    }
    return std::get<StateDelta>(commit(
        events::AnnotationSubmitted{id, key, verdict, difficult, std::move(span_edit), std::move(idempotency_token)},
        now));
  }

  // Counter-proposal: `keep` (default: the shown member outside `doc_id`)
  // paired with a new span in the opposite document.
  CandidatePair propose_pair(const AnnotatorId& id, const PairKey& shown, const DocId& doc_id, CharRange range,
                             Timestamp now, std::optional<MentionId> keep = std::nullopt) {
    annotator(id);
    const auto& shown_state = pair(shown);
    const auto& dp = corpus_.pair(shown_state.pair.pair_id);
    if (doc_id != dp.news.doc_id && doc_id != dp.science.doc_id) {
      throw Error(ErrorCode::cross_document, "document " + doc_id + " is not part of pair " + dp.pair_id);
    }
    MentionId kept;
    if (keep) {
      if (!shown.contains(*keep)) throw Error(ErrorCode::validation, *keep + " is not a member of the shown pair");
      kept = *keep;
    } else {
      kept = corpus_.mention(shown.first()).doc_id == doc_id ? shown.second() : shown.first();
    }
    const auto& kept_mention = corpus_.mention(kept);
    if (kept_mention.doc_id == doc_id) {
      throw Error(ErrorCode::cross_document, "alternative mention shares document " + doc_id + " with " + kept);
    }
    auto alt_id = corpus_.check_mention(doc_id, range);
    PairKey key(kept, alt_id);
    if (auto it = pairs_.find(key); it != pairs_.end()) {
      if (it->second.answered() || it->second.pair.status == PairStatus::resolved) {
        throw Error(ErrorCode::duplicate_pair, "pair already annotated: " + key.str());
      }
      if (!it->second.pair.iaa && it->second.claimed_by_other(id, now)) {
        throw Error(ErrorCode::duplicate_pair, "pair currently claimed by another annotator: " + key.str());
      }
    } else if (auto dup = overlapping_annotated(dp.pair_id, kept_mention, doc_id, range)) {
      throw Error(ErrorCode::duplicate_pair, "overlaps annotated pair " + dup->str());
    }
    commit(events::PairProposed{id, shown, kept, doc_id, range}, now);
    return pairs_.at(key).pair;
  }

  Mention adjust_span(const AnnotatorId& id, const MentionId& mention_id, CharRange range, Timestamp now) {
    annotator(id);
    const auto& m = corpus_.mention(mention_id);
    if (m.superseded_by) {
      throw Error(ErrorCode::validation, mention_id + " was already replaced by " + *m.superseded_by);
    }
    if (!range.valid()) throw Error(ErrorCode::validation, "span would be empty");
    corpus_.check_mention(m.doc_id, range);
    if (range == m.range) return m;
    for (const auto& key : index_lookup(mention_id)) {
      const auto& ps = pairs_.at(key);
      if (ps.pair.iaa && ps.pair.status == PairStatus::resolved) {
        throw Error(ErrorCode::validation, mention_id + " belongs to resolved IAA pair " + key.str());
      }
    }
    auto new_id = make_mention_id(m.doc_id, range);
    commit(events::SpanAdjusted{id, mention_id, range}, now);
    return corpus_.mention(new_id);
  }

  ConsensusResult consensus_gold(const PairKey& key) const {
    const auto& ps = pair(key);
    if (!ps.pair.iaa) throw Error(ErrorCode::validation, key.str() + " is not an IAA pair");
    if (ps.verdicts.size() < 2) {
      throw Error(ErrorCode::insufficient_data, key.str() + " has " + std::to_string(ps.verdicts.size()) +
                                                    " verdict(s); consensus needs at least 2");
    }
    return tally(ps);
  }

  // One record per difficult pair, for guideline review.
  std::vector<nlohmann::json> difficult_export() const {
    std::vector<nlohmann::json> out;
    for (const auto& [key, ps] : pairs_) {
      if (!ps.pair.difficult) continue;
      nlohmann::json verdicts = nlohmann::json::object();
      for (const auto& [a, ev] : ps.verdicts) {
        verdicts[a] = {{"verdict", ev.verdict}, {"difficult", ev.difficult}};
      }
      nlohmann::json j{{"pair_key", key.str()},
                       {"pair_id", ps.pair.pair_id},
                       {"mentions", {corpus_.mention(key.first()).surface, corpus_.mention(key.second()).surface}},
                       {"iaa", ps.pair.iaa},
                       {"verdicts", verdicts}};
      j["gold"] = ps.pair.gold ? nlohmann::json(*ps.pair.gold) : nlohmann::json(nullptr);
      out.push_back(std::move(j));
    }
    return out;
  }

  // ---- replay --------------------------------------------------------------

  using ApplyResult = std::variant<std::monostate, StateDelta>;

  ApplyResult apply(const Event& e) {
    if (e.seq != last_seq_ + 1) {
      throw Error(ErrorCode::storage, "event sequence gap: expected " + std::to_string(last_seq_ + 1) +
                                          ", got " + std::to_string(e.seq));
    }
    ApplyResult result;
    std::visit([&](const auto& body) { result = apply_body(e, body); }, e.body);
    last_seq_ = e.seq;
    return result;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["last_seq"] = last_seq_;
    j["next_pos"] = next_pos_;
    j["config"] = config_;
    auto& annotators = j["annotators"] = nlohmann::json::array();
    for (const auto& [id, a] : annotators_) {
      nlohmann::json weeks = nlohmann::json::array();
      for (const auto& [w, n] : a.iaa_by_week) weeks.push_back({w.year, w.week, n});
      nlohmann::json aj{{"id", id}, {"iaa_by_week", weeks}};
      if (a.claim) aj["claim"] = {{"pair_key", a.claim->key}, {"expires", format_timestamp(a.claim->expires)}};
      annotators.push_back(std::move(aj));
    }
    auto& pairs = j["pairs"] = nlohmann::json::array();
    for (const auto& [key, ps] : pairs_) {
      nlohmann::json verdicts = nlohmann::json::array();
      for (const auto& [a, ev] : ps.verdicts) verdicts.push_back(ev);
      nlohmann::json claims = nlohmann::json::object();
      for (const auto& [a, t] : ps.claims) claims[a] = format_timestamp(t);
      pairs.push_back({{"pair", ps.pair}, {"pos", ps.queue_pos}, {"verdicts", verdicts}, {"claims", claims}});
    }
    j["negatives"] = negatives_;
    j["conflicted"] = conflicted_;
    auto& conflicts = j["conflicts"] = nlohmann::json::array();
    for (const auto& c : conflicts_) conflicts.push_back(cdcr::to_json(c));
    j["idempotency"] = idempotency_;
    j["corpus"] = corpus_.to_json();
    return j;
  }

  static AnnotationEngine from_json(const nlohmann::json& j) {
    AnnotationEngine e(j.at("config").get<QueueConfig>());
    e.last_seq_ = j.at("last_seq").get<std::uint64_t>();
    e.next_pos_ = j.at("next_pos").get<std::uint64_t>();
    for (const auto& aj : j.at("annotators")) {
      AnnotatorState a;
      a.annotator_id = aj.at("id").get<std::string>();
      for (const auto& w : aj.at("iaa_by_week")) {
        a.iaa_by_week[IsoWeek{w.at(0).get<int>(), w.at(1).get<unsigned>()}] = w.at(2).get<std::int64_t>();
      }
      if (aj.contains("claim")) {
        a.claim = Claim{aj["claim"].at("pair_key").get<PairKey>(),
                        parse_timestamp(aj["claim"].at("expires").get<std::string>())};
      }
      e.annotators_.emplace(a.annotator_id, std::move(a));
    }
    for (const auto& pj : j.at("pairs")) {
      PairState ps;
      ps.pair = pj.at("pair").get<CandidatePair>();
      ps.queue_pos = pj.at("pos").get<std::uint64_t>();
      for (const auto& vj : pj.at("verdicts")) {
        auto ev = vj.get<AnnotationEvent>();
        ps.verdicts.emplace(ev.annotator_id, std::move(ev));
      }
      for (const auto& [a, t] : pj.at("claims").items()) ps.claims[a] = parse_timestamp(t.get<std::string>());
      auto key = ps.pair.key;
      e.pairs_.emplace(key, std::move(ps));
      e.index_pair(key);
    }
    e.negatives_ = j.at("negatives").get<std::set<PairKey>>();
    e.conflicted_ = j.at("conflicted").get<std::set<PairKey>>();
    for (const auto& cj : j.at("conflicts")) {
      e.conflicts_.push_back({cj.at("event_id").get<std::uint64_t>(), PairKey::parse(cj.at("pair_key").get<std::string>()),
                              cj.at("cluster_id").get<std::string>(), cj.at("detail").get<std::string>()});
    }
    e.idempotency_ = j.at("idempotency").get<std::map<std::string, nlohmann::json>>();
    e.corpus_ = CorpusStore::from_json(j.at("corpus"));
    return e;
  }

 private:
  template <class Body>
  ApplyResult commit(Body body, Timestamp now) {
    Event e{last_seq_ + 1, now, EventBody{std::move(body)}};
    if (sink_) sink_->append(e);
    return apply(e);
  }

  void check_submit(const AnnotatorId& id, const PairKey& key, Timestamp now) const {
    const auto& a = annotator(id);
    const auto& ps = pair(key);
    auto claim = ps.claims.find(id);
    bool live_claim = claim != ps.claims.end() && claim->second > now;
    if (ps.pair.iaa) {
      bool resubmission = ps.verdicts.count(id) != 0;
      if (!resubmission) {
        if (a.iaa_completed(iso_week(now)) >= config_.weekly_iaa_cap) {
          throw Error(ErrorCode::cap_reached, id + " reached the weekly IAA cap");
        }
        if (!live_claim && ps.pair.status == PairStatus::resolved) {
          throw Error(ErrorCode::stale_claim, key.str() + " is already resolved");
        }
      }
      return;
    }
    if (!live_claim) {
      throw Error(ErrorCode::stale_claim, id + " holds no live claim on " + key.str());
    }
  }

  std::optional<PairKey> overlapping_annotated(const PairId& pair_id, const Mention& kept, const DocId& alt_doc,
                                               const CharRange& alt_range) const {
    for (const auto& [key, ps] : pairs_) {
      if (ps.pair.pair_id != pair_id || !(ps.answered() || ps.pair.status == PairStatus::resolved)) continue;
      const auto& a = corpus_.mention(key.first());
      const auto& b = corpus_.mention(key.second());
      const Mention& same_doc_as_kept = a.doc_id == kept.doc_id ? a : b;
      const Mention& same_doc_as_alt = a.doc_id == alt_doc ? a : b;
      if (span_overlap(same_doc_as_kept.range, kept.range) && span_overlap(same_doc_as_alt.range, alt_range)) {
        return key;
      }
    }
    return std::nullopt;
  }

  std::optional<double> score(const PairKey& key) const {
    const auto& a = corpus_.mention(key.first());
    const auto* table = corpus_.embedding_table(corpus_.pair_id_of(a.doc_id));
    if (!table) return std::nullopt;
    try {
      return cosine_similarity(span_vector(a, *table), span_vector(corpus_.mention(key.second()), *table));
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  // ---- indexes ---------------------------------------------------------------

  std::set<PairKey> index_lookup(const MentionId& m) const {
    auto it = by_mention_.find(m);
    return it == by_mention_.end() ? std::set<PairKey>{} : it->second;
  }

  void index_pair(const PairKey& key) {
    const auto& ps = pairs_.at(key);
    by_mention_[key.first()].insert(key);
    by_mention_[key.second()].insert(key);
    if (ps.pair.status == PairStatus::resolved) return;
    if (ps.pair.iaa) {
      iaa_queue_[ps.queue_pos] = key;
    } else if (!ps.answered()) {
      open_queue_[ps.queue_pos] = key;
    }
  }

  void unindex_pair(const PairKey& key) {
    const auto& ps = pairs_.at(key);
    by_mention_[key.first()].erase(key);
    by_mention_[key.second()].erase(key);
    iaa_queue_.erase(ps.queue_pos);
    open_queue_.erase(ps.queue_pos);
  }

  void insert_pair(CandidatePair c) {
    PairState ps;
    c.iaa = sample_iaa(c.key, config_);
    ps.pair = std::move(c);
    ps.queue_pos = next_pos_++;
    auto key = ps.pair.key;
    pairs_.emplace(key, std::move(ps));
    index_pair(key);
  }

  void release_claim(AnnotatorState& a) {
    if (!a.claim) return;
    if (auto it = pairs_.find(a.claim->key); it != pairs_.end()) {
      it->second.claims.erase(a.annotator_id);
      if (it->second.pair.status == PairStatus::claimed && it->second.claims.empty()) {
        it->second.pair.status = PairStatus::pending;
      }
    }
    a.claim.reset();
  }

  void claim(const AnnotatorId& id, const PairKey& key, Timestamp at) {
    auto& a = annotators_.at(id);
    release_claim(a);
    auto& ps = pairs_.at(key);
    auto expires = at + config_.claim_lease;
    ps.claims[id] = expires;
    if (ps.pair.status != PairStatus::resolved) ps.pair.status = PairStatus::claimed;
    a.claim = Claim{key, expires};
  }

  static ConsensusResult tally(const PairState& ps) {
    ConsensusResult r;
    for (const auto& [a, ev] : ps.verdicts) ++(ev.verdict == Verdict::yes ? r.yes : r.no);
    if (r.yes > r.no) {
      r.gold = Gold::coreferent;
    } else if (r.no > r.yes) {
      r.gold = Gold::not_coreferent;
    } else {
      r.gold = Gold::unresolved;
      r.difficult = true;
    }
    return r;
  }

  void resolve(PairState& ps, Gold gold, std::uint64_t event_id, StateDelta& delta) {
    ps.pair.gold = gold;
    ps.pair.status = PairStatus::resolved;
    iaa_queue_.erase(ps.queue_pos);
    open_queue_.erase(ps.queue_pos);
    delta.resolved = true;
    delta.gold = gold;
    const auto& key = ps.pair.key;
    auto& clusters = corpus_.clusters();
    if (gold == Gold::coreferent) {
      auto outcome = clusters.merge(key.first(), key.second());
      delta.clusters_changed = outcome.changed;
      delta.cluster_id = outcome.cluster_id;
      delta.absorbed_clusters = outcome.absorbed;
      if (outcome.changed) {
        for (const auto& neg : negatives_) {
          if (!conflicted_.count(neg) && clusters.co_clustered(neg.first(), neg.second())) {
            report_conflict(neg, event_id, "merge through " + key.str() + " joins a pair judged not coreferent",
                            delta);
          }
        }
      }
    } else if (gold == Gold::not_coreferent) {
      negatives_.insert(key);
      if (clusters.co_clustered(key.first(), key.second())) {
        report_conflict(key, event_id, "pair judged not coreferent is already linked through the cluster", delta);
      }
    } else {
      ps.pair.difficult = true;
    }
  }

  void report_conflict(const PairKey& neg, std::uint64_t event_id, std::string detail, StateDelta& delta) {
    conflicted_.insert(neg);
    ConflictReport r{event_id, neg, *corpus_.clusters().cluster_of(neg.first()), std::move(detail)};
    conflicts_.push_back(r);
    delta.conflicts.push_back(std::move(r));
  }

  static StateDelta delta_from_json(const nlohmann::json& j) {
    StateDelta d;
    d.event_id = j.at("event_id").get<std::uint64_t>();
    d.key = PairKey::parse(j.at("pair_key").get<std::string>());
    d.iaa = j.at("iaa").get<bool>();
    d.resolved = j.at("resolved").get<bool>();
    if (!j.at("gold").is_null()) d.gold = j["gold"].get<Gold>();
    d.clusters_changed = j.at("clusters_changed").get<bool>();
    if (!j.at("cluster_id").is_null()) d.cluster_id = j["cluster_id"].get<std::string>();
    d.absorbed_clusters = j.at("absorbed_clusters").get<std::vector<std::string>>();
    for (const auto& c : j.at("conflicts")) {
      d.conflicts.push_back({c.at("event_id").get<std::uint64_t>(), PairKey::parse(c.at("pair_key").get<std::string>()),
                             c.at("cluster_id").get<std::string>(), c.at("detail").get<std::string>()});
    }
    return d;
  }

  // ---- appliers ----------------------------------------------------------------

  ApplyResult apply_body(const Event&, const events::ConfigSet& b) {
    b.config.validate();
    config_ = b.config;
    return {};
  }

  ApplyResult apply_body(const Event&, const events::AnnotatorRegistered& b) {
    annotators_.try_emplace(b.annotator, AnnotatorState{b.annotator, {}, std::nullopt});
    return {};
  }

  ApplyResult apply_body(const Event&, const events::DocumentPairAdded& b) {
    corpus_.add_document_pair(b.pair);
    return {};
  }

  ApplyResult apply_body(const Event&, const events::MentionAdded& b) {
    corpus_.add_mention(b.doc_id, b.range);
    return {};
  }

  ApplyResult apply_body(const Event&, const events::EmbeddingsLoaded& b) {
    corpus_.set_embedding_table(b.table);
    return {};
  }

  ApplyResult apply_body(const Event&, const events::CandidatesGenerated& b) {
    auto batch = cdcr::generate_candidates(corpus_, b.pair_id, keys_for(b.pair_id));
    for (auto& c : rank_candidates(std::move(batch.pairs), {config_.stratified_ranking})) insert_pair(std::move(c));
    return {};
  }

  ApplyResult apply_body(const Event& e, const events::TaskClaimed& b) {
    claim(b.annotator, b.key, e.at);
    return {};
  }

  ApplyResult apply_body(const Event& e, const events::AnnotationSubmitted& b) {
    auto& ps = pairs_.at(b.key);
    auto& a = annotators_.at(b.annotator);
    bool first_answer = !ps.verdicts.count(b.annotator);
    bool was_answered = ps.answered();

    AnnotationEvent ev{e.seq, b.annotator, b.key, b.verdict, b.difficult, b.span_edit, e.at};
    ps.verdicts[b.annotator] = ev;
    ps.claims.erase(b.annotator);
    if (a.claim && a.claim->key == b.key) a.claim.reset();
    ps.pair.difficult = ps.pair.difficult || b.difficult;

    StateDelta delta;
    delta.event_id = e.seq;
    delta.key = b.key;
    delta.iaa = ps.pair.iaa;
    if (ps.pair.iaa) {
      if (first_answer) ++a.iaa_by_week[iso_week(e.at)];
      bool everyone = true;
      for (const auto& [id, st] : annotators_) everyone = everyone && ps.verdicts.count(id);
      bool enough = ps.verdicts.size() >= 2 || annotators_.size() == 1;
      if (ps.pair.status != PairStatus::resolved && everyone && enough) {
        auto consensus = tally(ps);
        if (ps.verdicts.size() == 1) consensus.gold = b.verdict == Verdict::yes ? Gold::coreferent : Gold::not_coreferent;
        resolve(ps, consensus.gold, e.seq, delta);
      }
    } else if (!was_answered) {
      resolve(ps, b.verdict == Verdict::yes ? Gold::coreferent : Gold::not_coreferent, e.seq, delta);
    }
    if (ps.pair.status != PairStatus::resolved) {
      ps.pair.status = ps.claims.empty() ? PairStatus::pending : PairStatus::claimed;
    }
    if (b.idempotency_token) idempotency_[*b.idempotency_token] = cdcr::to_json(delta);
    return delta;
  }

  ApplyResult apply_body(const Event& e, const events::PairProposed& b) {
    auto [alt, added] = corpus_.add_mention(b.doc_id, b.range);
    auto alt_id = alt->mention_id;
    if (corpus_.mention(alt_id).superseded_by) corpus_.set_superseded(alt_id, std::nullopt);
    PairKey key(b.keep, alt_id);
    if (!pairs_.count(key)) {
      CandidatePair c;
      c.key = key;
      c.pair_id = corpus_.pair_id_of(b.doc_id);
      c.similarity = score(key);
      insert_pair(std::move(c));
    }
    claim(b.annotator, key, e.at);
    return {};
  }

  ApplyResult apply_body(const Event&, const events::SpanAdjusted& b) {
    auto doc_id = corpus_.mention(b.mention_id).doc_id;
    auto [fresh, added] = corpus_.add_mention(doc_id, b.range);
    auto new_id = fresh->mention_id;
    if (corpus_.mention(new_id).superseded_by) corpus_.set_superseded(new_id, std::nullopt);
    corpus_.set_superseded(b.mention_id, new_id);

    for (const auto& old_key : index_lookup(b.mention_id)) {
      auto& ps = pairs_.at(old_key);
      if (ps.answered() || ps.pair.status == PairStatus::resolved) continue;
      PairKey new_key(old_key.other(b.mention_id), new_id);
      PairState moved = ps;
      unindex_pair(old_key);
      pairs_.erase(old_key);
      for (auto& [aid, st] : annotators_) {
        if (st.claim && st.claim->key == old_key) {
          if (pairs_.count(new_key)) {
            st.claim.reset();
          } else {
            st.claim->key = new_key;
          }
        }
      }
      if (pairs_.count(new_key)) continue;
      moved.pair.key = new_key;
      moved.pair.similarity = score(new_key);
      moved.pair.iaa = sample_iaa(new_key, config_);
      pairs_.emplace(new_key, std::move(moved));
      index_pair(new_key);
    }
    return {};
  }

  QueueConfig config_;
  EventSink* sink_ = nullptr;
  std::uint64_t last_seq_ = 0;
  std::uint64_t next_pos_ = 0;
  CorpusStore corpus_;
  std::map<AnnotatorId, AnnotatorState> annotators_;
  std::map<PairKey, PairState> pairs_;
  std::map<std::uint64_t, PairKey> iaa_queue_;
  std::map<std::uint64_t, PairKey> open_queue_;
  std::map<MentionId, std::set<PairKey>> by_mention_;
  std::set<PairKey> negatives_;
  std::set<PairKey> conflicted_;
  std::vector<ConflictReport> conflicts_;
  std::map<std::string, nlohmann::json> idempotency_;
};

}  // namespace cdcr
