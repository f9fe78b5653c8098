#pragma once

// Cross-document candidate pairs scored by cosine similarity of mean-pooled
// token vectors, and their ranking for the annotation queue.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cdcr/corpus_store.hpp"
#include "cdcr/embedding.hpp"

namespace cdcr {

// Mean of the token vectors covered by the mention.
inline std::vector<double> span_vector(const Mention& mention, const EmbeddingTable& table) {
  auto span = resolve_token_span(table, mention.doc_id, mention.range);
  if (!span) throw Error(ErrorCode::empty_span, "mention " + mention.mention_id + " covers no tokens");
  std::vector<double> mean(table.dim, 0.0);
  for (std::size_t r = span->first; r <= span->last; ++r) {
    auto row = table.row(r);
    for (std::size_t i = 0; i < table.dim; ++i) mean[i] += row[i];
  }
  double n = static_cast<double>(span->last - span->first + 1);
  for (auto& x : mean) x /= n;
  return mean;
}

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "vectors of dimension " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) {
      throw Error(ErrorCode::degenerate_vector, "non-finite vector component");
    }
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::degenerate_vector, "zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

struct CandidateBatch {
  std::vector<CandidatePair> pairs;
  std::vector<std::string> warnings;
};

// All news x science mention pairs of one document pair that are not already
// in `existing`. Pairs are scored when the pair has an embedding table and
// both mentions yield a usable span vector.
inline CandidateBatch generate_candidates(const CorpusStore& store, const PairId& pair_id,
                                          const std::set<PairKey>& existing = {}) {
  CandidateBatch batch;
  const auto& dp = store.pair(pair_id);
  auto news = store.active_mentions(dp.news.doc_id);
  auto sci = store.active_mentions(dp.science.doc_id);
  if (news.empty() || sci.empty()) {
    batch.warnings.push_back("pair " + pair_id + ": no mentions loaded for " +
                             (news.empty() ? dp.news.doc_id : dp.science.doc_id));
    return batch;
  }

  const EmbeddingTable* table = store.embedding_table(pair_id);
  auto vectors_for = [&](const std::vector<const Mention*>& ms) {
    std::vector<std::optional<std::vector<double>>> out;
    for (const auto* m : ms) {
      if (!table) {
        out.emplace_back();
        continue;
      }
      try {
        out.emplace_back(span_vector(*m, *table));
      } catch (const Error& e) {
        batch.warnings.push_back(e.what());
        out.emplace_back();
      }
    }
    return out;
  };
  auto news_vecs = vectors_for(news);
  auto sci_vecs = vectors_for(sci);

  for (std::size_t i = 0; i < news.size(); ++i) {
    for (std::size_t j = 0; j < sci.size(); ++j) {
      CandidatePair c;
      c.key = pair_key(*news[i], *sci[j]);
      if (existing.count(c.key)) continue;
      c.pair_id = pair_id;
      if (news_vecs[i] && sci_vecs[j]) {
        try {
          c.similarity = cosine_similarity(*news_vecs[i], *sci_vecs[j]);
        } catch (const Error& e) {
          batch.warnings.push_back(c.key.str() + ": " + e.what());
        }
      }
      batch.pairs.push_back(std::move(c));
    }
  }
  return batch;
}

// Descending similarity, ties by ascending key, unscored pairs last in key
// order.
inline bool rank_before(const CandidatePair& a, const CandidatePair& b) {
  if (a.similarity.has_value() != b.similarity.has_value()) return a.similarity.has_value();
  if (a.similarity && *a.similarity != *b.similarity) return *a.similarity > *b.similarity;
  return a.key < b.key;
}

struct RankOptions {
  // Interleave the top, middle and bottom thirds of the scored pairs.
  bool stratified = false;
};

inline std::vector<CandidatePair> rank_candidates(std::vector<CandidatePair> pairs, RankOptions opts = {}) {
  std::sort(pairs.begin(), pairs.end(), rank_before);
  if (!opts.stratified) return pairs;

  auto first_unscored = std::find_if(pairs.begin(), pairs.end(),
                                     [](const CandidatePair& c) { return !c.similarity; });
  auto scored = static_cast<std::size_t>(first_unscored - pairs.begin());
  std::size_t third = (scored + 2) / 3;
  std::vector<CandidatePair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < third; ++i) {
    for (std::size_t stratum = 0; stratum < 3; ++stratum) {
      std::size_t idx = stratum * third + i;
      if (idx < scored) out.push_back(pairs[idx]);
    }
  }
  for (std::size_t i = scored; i < pairs.size(); ++i) out.push_back(pairs[i]);
  return out;
}

// One audit record per ranked pair.
inline nlohmann::json ranked_pair_record(const CorpusStore& store, const CandidatePair& c) {
  nlohmann::json j{{"pair_key", c.key.str()},
                   {"mentions", {store.mention(c.key.first()).surface, store.mention(c.key.second()).surface}}};
  j["similarity"] = c.similarity ? nlohmann::json(*c.similarity) : nlohmann::json(nullptr);
  return j;
}

}  // namespace cdcr
