#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/corpus.hpp"

namespace cdcr {

struct TokenRecord {
  DocId doc_id;
  CharRange range;
  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

// Token vectors for one document pair, rows in "news summary [SEP] abstract"
// order. Values are 32-bit, row-major.
struct EmbeddingTable {
  PairId pair_id;
  std::size_t dim = 0;
  std::string encoder_tag;
  std::vector<TokenRecord> tokens;
  std::vector<float> values;

  std::size_t rows() const { return tokens.size(); }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * dim, dim);
  }

  std::map<DocId, std::size_t> token_counts() const {
    std::map<DocId, std::size_t> counts;
    for (const auto& t : tokens) ++counts[t.doc_id];
    return counts;
  }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

// Every token whose character range intersects the mention range, as an
// inclusive row range. Rows of one document are contiguous and sorted.
inline std::optional<TokenSpan> resolve_token_span(const EmbeddingTable& table, const DocId& doc_id,
                                                   const CharRange& range) {
  std::optional<TokenSpan> span;
  for (std::size_t i = 0; i < table.tokens.size(); ++i) {
    const auto& tok = table.tokens[i];
    if (tok.doc_id != doc_id || !span_overlap(tok.range, range)) continue;
    if (!span) {
      span = TokenSpan{i, i};
    } else {
      span->last = i;
    }
  }
  return span;
}

inline void to_json(nlohmann::json& j, const EmbeddingTable& t) {
  auto tokens = nlohmann::json::array();
  for (const auto& tok : t.tokens) tokens.push_back({tok.doc_id, tok.range.start, tok.range.end});
  j = nlohmann::json{{"pair_id", t.pair_id},
                     {"dim", t.dim},
                     {"encoder_tag", t.encoder_tag},
                     {"tokens", tokens},
                     {"values", t.values}};
}

inline void from_json(const nlohmann::json& j, EmbeddingTable& t) {
  t.pair_id = j.at("pair_id").get<std::string>();
  t.dim = j.at("dim").get<std::size_t>();
  t.encoder_tag = j.at("encoder_tag").get<std::string>();
  t.tokens.clear();
  for (const auto& tok : j.at("tokens")) {
    t.tokens.push_back({tok.at(0).get<std::string>(),
                        {tok.at(1).get<std::size_t>(), tok.at(2).get<std::size_t>()}});
  }
  t.values = j.at("values").get<std::vector<float>>();
}

}  // namespace cdcr
