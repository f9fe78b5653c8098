#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cdcr/cdcr.hpp"

namespace fixture {

using namespace cdcr;

inline const Timestamp t0 = make_timestamp(2020, 3, 2, 9);  // a Monday

inline std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

// Code-point ranges of the whitespace tokens of an ASCII text.
inline std::vector<CharRange> word_ranges(const std::string& s) {
  std::vector<CharRange> out;
  for (const auto& t : text::whitespace_tokens(s)) out.push_back({t.start_char, t.end_char});
  return out;
}

inline Document doc(DocId id, DocKind kind, std::string summary) {
  Document d;
  d.doc_id = std::move(id);
  d.kind = kind;
  d.title = "title of " + d.doc_id;
  d.summary_text = std::move(summary);
  return d;
}

inline DocumentPair doc_pair(const PairId& id, const std::string& news_text, const std::string& sci_text,
                             std::optional<std::string> split = std::nullopt) {
  DocumentPair p;
  p.pair_id = id;
  p.split = std::move(split);
  p.news = doc("n-" + id, DocKind::news, news_text);
  p.science = doc("s-" + id, DocKind::science, sci_text);
  p.created_at = t0;
  return p;
}

// Adds a document pair with one mention per word, optional stub vectors, and
// its candidate pairs.
inline void add_worded_pair(AnnotationEngine& e, const DocumentPair& p, bool embed = true, std::size_t dim = 32) {
  e.add_document_pair(p, t0);
  for (const auto* d : {&p.news, &p.science}) {
    for (auto r : word_ranges(d->summary_text)) e.add_mention(d->doc_id, r, t0);
  }
  if (embed) e.load_embedding_table(stub_embed(p, dim, 7), t0);
  e.generate_candidates(p.pair_id, t0);
}

inline std::vector<std::string> random_words(std::mt19937_64& rng, std::size_t n, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(pick(rng)));
  return out;
}

// `pairs` document pairs with `per_doc` distinct words in each summary.
inline void synthetic_corpus(AnnotationEngine& e, std::size_t pairs, std::size_t per_doc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < pairs; ++i) {
    std::vector<std::string> news, sci;
    for (std::size_t k = 0; k < per_doc; ++k) {
      news.push_back("n" + std::to_string(i) + "x" + std::to_string(k));
      sci.push_back("s" + std::to_string(i) + "x" + std::to_string(k));
    }
    // A shared word per document pair gives each some similar candidates.
    news[rng() % per_doc] = "shared" + std::to_string(i);
    sci[rng() % per_doc] = "shared" + std::to_string(i);
    add_worded_pair(e, doc_pair("p" + std::to_string(i), join(news), join(sci)));
  }
}

inline Mention mention_of(const AnnotationEngine& e, const MentionId& id) { return e.corpus().mention(id); }

// Claims `key` for `annotator` through a counter-proposal that reproduces it.
inline void claim_key(AnnotationEngine& e, const AnnotatorId& annotator, const PairKey& key, Timestamp now) {
  const auto& second = e.corpus().mention(key.second());
  e.propose_pair(annotator, key, second.doc_id, second.range, now, key.first());
}

inline StateDelta answer(AnnotationEngine& e, const AnnotatorId& annotator, const PairKey& key, Verdict v,
                         Timestamp now, bool difficult = false) {
  if (!e.pair(key).pair.iaa) claim_key(e, annotator, key, now);
  return e.submit_annotation(annotator, key, v, difficult, now);
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace fixture
