#pragma once

// Line-oriented file readers for document pairs, mentions and token
// embeddings; news/science metadata matching; and a deterministic stub
// encoder used in place of a real transformer.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdcr/corpus_store.hpp"
#include "cdcr/embedding.hpp"
#include "cdcr/text.hpp"

namespace cdcr {

struct IngestReport {
  std::size_t records = 0;
  std::size_t added = 0;
  std::size_t unchanged = 0;
  std::vector<RecordError> errors;
};

inline nlohmann::json to_json(const IngestReport& r) {
  auto errors = nlohmann::json::array();
  for (const auto& e : r.errors) {
    errors.push_back({{"line", e.line}, {"code", to_string(e.code)}, {"message", e.message}});
  }
  return {{"records", r.records}, {"added", r.added}, {"unchanged", r.unchanged}, {"errors", errors}};
}

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::storage, "cannot open " + path);
  return in;
}

// Replaces bare NaN / Infinity / -Infinity literals (as written by common
// JSON emitters) with null so the row can be rejected by index instead of
// failing to parse.
inline std::string null_out_nonfinite(const std::string& line) {
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < line.size()) {
        out.push_back(line[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    bool replaced = false;
    for (const char* lit : {"-Infinity", "Infinity", "NaN", "-NaN", "nan", "-nan", "inf", "-inf"}) {
      std::string_view v(lit);
      if (line.compare(i, v.size(), v) == 0) {
        std::size_t after = i + v.size();
        bool boundary = after >= line.size() || !std::isalnum(static_cast<unsigned char>(line[after]));
        if (boundary) {
          out += "null";
          i = after - 1;
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(c);
  }
  return out;
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

inline Document read_document(const nlohmann::json& j, DocKind kind, const char* side) {
  if (!j.is_object()) throw Error(ErrorCode::schema, std::string(side) + " must be an object");
  for (const char* field : {"doc_id", "summary_text"}) {
    if (!j.contains(field) || !j[field].is_string()) {
      throw Error(ErrorCode::schema, std::string(side) + "." + field + " missing or not a string");
    }
  }
  Document d;
  d.kind = kind;
  d.doc_id = j["doc_id"].get<std::string>();
  d.summary_text = j["summary_text"].get<std::string>();
  if (d.summary_text.empty()) throw Error(ErrorCode::schema, std::string(side) + ".summary_text is empty");
  text::decode_utf8(d.summary_text);
  d.title = j.value("title", std::string{});
  d.authors = j.value("authors", std::vector<std::string>{});
  d.affiliations = j.value("affiliations", std::vector<std::string>{});
  get_optional(j, "full_text", d.full_text);
  get_optional(j, "doi", d.doi);
  get_optional(j, "url", d.url);
  if (j.contains("published") && !j["published"].is_null()) {
    d.published = parse_date(j["published"].get<std::string>());
  }
  return d;
}

}  // namespace detail

struct ParsedPair {
  std::size_t line = 0;
  DocumentPair pair;
};

// Reads the document-pair file. `created_at` stamps records that carry no
// timestamp of their own.
inline std::vector<ParsedPair> parse_document_pairs(std::istream& in, Timestamp created_at,
                                                    std::vector<RecordError>& errors) {
  std::vector<ParsedPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw Error(ErrorCode::schema, "record is not an object");
      if (!j.contains("pair_id") || !j["pair_id"].is_string()) {
        throw Error(ErrorCode::schema, "pair_id missing or not a string");
      }
      if (!j.contains("news") || !j.contains("science")) {
        throw Error(ErrorCode::schema, "record needs both news and science documents");
      }
      DocumentPair p;
      p.pair_id = j["pair_id"].get<std::string>();
      p.news = detail::read_document(j["news"], DocKind::news, "news");
      p.science = detail::read_document(j["science"], DocKind::science, "science");
      detail::get_optional(j, "split", p.split);
      p.created_at = j.contains("created_at") ? parse_timestamp(j["created_at"].get<std::string>()) : created_at;
      out.push_back({lineno, std::move(p)});
    } catch (const Error& e) {
      errors.push_back({lineno, e.code(), e.what()});
    } catch (const nlohmann::json::exception& e) {
      errors.push_back({lineno, ErrorCode::schema, e.what()});
    }
  }
  return out;
}

inline IngestReport ingest_document_pairs(CorpusStore& store, std::istream& in, Timestamp now) {
  IngestReport report;
  auto records = parse_document_pairs(in, now, report.errors);
  for (auto& rec : records) {
    ++report.records;
    try {
      if (store.add_document_pair(std::move(rec.pair)) == AddStatus::added) {
        ++report.added;
      } else {
        ++report.unchanged;
      }
    } catch (const Error& e) {
      report.errors.push_back({rec.line, e.code(), e.what()});
    }
  }
  return report;
}

inline IngestReport ingest_document_pairs(CorpusStore& store, const std::string& path, Timestamp now) {
  auto in = detail::open_input(path);
  return ingest_document_pairs(store, in, now);
}

struct ParsedMention {
  std::size_t line = 0;
  DocId doc_id;
  CharRange range;
};

inline std::vector<ParsedMention> parse_mentions(std::istream& in, std::vector<RecordError>& errors) {
  std::vector<ParsedMention> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("doc_id") || !j.contains("start_char") || !j.contains("end_char")) {
        throw Error(ErrorCode::schema, "mention record needs doc_id, start_char, end_char");
      }
      auto start = j["start_char"].get<std::int64_t>();
      auto end = j["end_char"].get<std::int64_t>();
      if (start < 0 || end <= start) {
        throw Error(ErrorCode::validation, "invalid range [" + std::to_string(start) + "," +
                                               std::to_string(end) + ")");
      }
      out.push_back({lineno, j["doc_id"].get<std::string>(),
                     {static_cast<std::size_t>(start), static_cast<std::size_t>(end)}});
    } catch (const Error& e) {
      errors.push_back({lineno, e.code(), e.what()});
    } catch (const nlohmann::json::exception& e) {
      errors.push_back({lineno, ErrorCode::schema, e.what()});
    }
  }
  return out;
}

inline IngestReport load_mentions(CorpusStore& store, std::istream& in) {
  IngestReport report;
  auto records = parse_mentions(in, report.errors);
  for (const auto& rec : records) {
    ++report.records;
    try {
      if (!store.has_document(rec.doc_id)) {
        throw Error(ErrorCode::unknown_mention, "unknown doc_id " + rec.doc_id);
      }
      auto [m, added] = store.add_mention(rec.doc_id, rec.range);
      ++(added ? report.added : report.unchanged);
    } catch (const Error& e) {
      report.errors.push_back({rec.line, e.code(), e.what()});
    }
  }
  return report;
}

inline IngestReport load_mentions(CorpusStore& store, const std::string& path) {
  auto in = detail::open_input(path);
  return load_mentions(store, in);
}

struct EmbeddingParseResult {
  std::vector<EmbeddingTable> tables;
  std::vector<RecordError> errors;
};

// A file holds one or more sections: a header line followed by one line per
// token. A section with any bad row is rejected whole.
inline EmbeddingParseResult parse_embeddings(std::istream& in) {
  EmbeddingParseResult result;
  std::string line;
  std::size_t lineno = 0;

  struct Section {
    std::size_t header_line = 0;
    EmbeddingTable table;
    std::map<DocId, std::size_t> declared;
    std::size_t expected = 0;
    std::optional<RecordError> failure;
  };
  std::optional<Section> current;

  auto finish = [&](Section& s, std::size_t at_line) {
    if (!s.failure && s.table.rows() != s.expected) {
      s.failure = RecordError{at_line, ErrorCode::format,
                              "table " + s.table.pair_id + " declares " + std::to_string(s.expected) +
                                  " tokens but has " + std::to_string(s.table.rows())};
    }
    if (!s.failure && s.table.token_counts() != s.declared) {
      s.failure = RecordError{s.header_line, ErrorCode::format,
                              "table " + s.table.pair_id + " per-document token counts differ from header"};
    }
    if (s.failure) {
      result.errors.push_back(*s.failure);
    } else {
      result.tables.push_back(std::move(s.table));
    }
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::null_out_nonfinite(line));
    } catch (const nlohmann::json::exception& e) {
      RecordError err{lineno, ErrorCode::format, e.what()};
      if (current) {
        if (!current->failure) current->failure = err;
      } else {
        result.errors.push_back(err);
      }
      continue;
    }
    if (j.is_object() && j.contains("pair_id")) {
      if (current) finish(*current, lineno - 1);
      current.emplace();
      current->header_line = lineno;
      try {
        current->table.pair_id = j.at("pair_id").get<std::string>();
        auto dim = j.at("dim").get<std::int64_t>();
        if (dim <= 0) throw Error(ErrorCode::format, "dim must be positive");
        current->table.dim = static_cast<std::size_t>(dim);
        current->table.encoder_tag = j.value("encoder_tag", std::string{});
        current->declared = j.at("token_counts").get<std::map<DocId, std::size_t>>();
        for (const auto& [doc, n] : current->declared) current->expected += n;
      } catch (const Error& e) {
        current->failure = RecordError{lineno, e.code(), e.what()};
      } catch (const nlohmann::json::exception& e) {
        current->failure = RecordError{lineno, ErrorCode::format, e.what()};
      }
      continue;
    }
    if (!current) {
      result.errors.push_back({lineno, ErrorCode::format, "token line before any header"});
      continue;
    }
    if (current->failure) continue;
    auto& t = current->table;
    std::size_t row = t.rows();
    try {
      TokenRecord tok{j.at("doc_id").get<std::string>(),
                      {j.at("start_char").get<std::size_t>(), j.at("end_char").get<std::size_t>()}};
      const auto& vec = j.at("vector");
      if (!vec.is_array() || vec.size() != t.dim) {
        throw Error(ErrorCode::dimension_mismatch, "row " + std::to_string(row) + " has " +
                                                       std::to_string(vec.is_array() ? vec.size() : 0) +
                                                       " values, header dim is " + std::to_string(t.dim));
      }
      if (!tok.range.valid()) throw Error(ErrorCode::format, "row " + std::to_string(row) + " has empty range");
      if (!t.tokens.empty()) {
        const auto& prev = t.tokens.back();
        if (prev.doc_id == tok.doc_id && prev.range.start >= tok.range.start) {
          throw Error(ErrorCode::format, "row " + std::to_string(row) + " out of order within " + tok.doc_id);
        }
        if (prev.doc_id != tok.doc_id) {
          for (const auto& earlier : t.tokens) {
            if (earlier.doc_id == tok.doc_id) {
              throw Error(ErrorCode::format, "rows of " + tok.doc_id + " are not contiguous");
            }
          }
        }
      }
      for (const auto& v : vec) {
        if (v.is_null()) throw Error(ErrorCode::format, "non-finite value in row " + std::to_string(row));
        auto f = static_cast<float>(v.get<double>());
        if (!std::isfinite(f)) throw Error(ErrorCode::format, "non-finite value in row " + std::to_string(row));
        t.values.push_back(f);
      }
      t.tokens.push_back(std::move(tok));
    } catch (const Error& e) {
      current->failure = RecordError{lineno, e.code(), e.what()};
    } catch (const nlohmann::json::exception& e) {
      current->failure = RecordError{lineno, ErrorCode::format, "row " + std::to_string(row) + ": " + e.what()};
    }
  }
  if (current) finish(*current, lineno);
  return result;
}

inline EmbeddingParseResult load_embeddings(CorpusStore& store, std::istream& in) {
  auto parsed = parse_embeddings(in);
  EmbeddingParseResult out;
  out.errors = std::move(parsed.errors);
  for (auto& t : parsed.tables) {
    try {
      store.set_embedding_table(t);
      out.tables.push_back(std::move(t));
    } catch (const Error& e) {
      out.errors.push_back({0, e.code(), e.what()});
    }
  }
  return out;
}

inline EmbeddingParseResult load_embeddings(CorpusStore& store, const std::string& path) {
  auto in = detail::open_input(path);
  return load_embeddings(store, in);
}

inline std::string write_embedding_table(const EmbeddingTable& t) {
  std::ostringstream os;
  nlohmann::json header{{"pair_id", t.pair_id},
                        {"dim", t.dim},
                        {"encoder_tag", t.encoder_tag},
                        {"token_counts", t.token_counts()}};
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto row = t.row(i);
    nlohmann::json line{{"doc_id", t.tokens[i].doc_id},
                        {"start_char", t.tokens[i].range.start},
                        {"end_char", t.tokens[i].range.end},
                        {"vector", std::vector<float>(row.begin(), row.end())}};
    os << line.dump() << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Document matching

struct MatchScore {
  bool doi_exact = false;
  double author_overlap = 0.0;
  std::optional<int> date_gap_days;
};

struct MatchOptions {
  int date_window_days = 14;
  double author_overlap_threshold = 0.5;
};

struct MatchResult {
  bool matched = false;
  MatchScore score;
};

// Lowercased, punctuation- and diacritic-free name tokens. "Smith, John" is
// read as "John Smith".
inline std::vector<std::string> normalize_author(std::string_view name) {
  std::string reordered(name);
  if (auto comma = reordered.find(','); comma != std::string::npos) {
    reordered = reordered.substr(comma + 1) + " " + reordered.substr(0, comma);
  }
  std::string folded;
  for (char32_t cp : text::decode_utf8(reordered)) {
    if (cp >= 0x300 && cp <= 0x36F) continue;  // combining marks
    if (cp == U'\'' || cp == U'\u2019') continue;
    if ((cp >= U'a' && cp <= U'z') || (cp >= U'0' && cp <= U'9')) {
      folded.push_back(static_cast<char>(cp));
    } else if (cp >= U'A' && cp <= U'Z') {
      folded.push_back(static_cast<char>(cp - U'A' + U'a'));
    } else if (char base = text::fold_diacritic(cp)) {
      folded.push_back(static_cast<char>(base >= 'A' && base <= 'Z' ? base - 'A' + 'a' : base));
    } else if (cp > 0x7F && !text::is_space(cp)) {
      text::append_utf8(folded, cp);
    } else {
      folded.push_back(' ');
    }
  }
  std::vector<std::string> tokens;
  for (auto& t : text::whitespace_tokens(folded)) tokens.push_back(std::move(t.surface));
  return tokens;
}

inline bool author_names_match(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty() || a.back() != b.back()) return false;
  const auto& fa = a.front();
  const auto& fb = b.front();
  if (fa == fb) return true;
  auto is_initial_of = [](const std::string& initial, const std::string& full) {
    return initial.size() == 1 && !full.empty() && full.front() == initial.front();
  };
  return is_initial_of(fa, fb) || is_initial_of(fb, fa);
}

// |maximum one-to-one matching of equivalent names| / min(|a|, |b|).
inline double author_overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::vector<std::string>> na, nb;
  for (const auto& n : a) {
    if (auto t = normalize_author(n); !t.empty()) na.insert(std::move(t));
  }
  for (const auto& n : b) {
    if (auto t = normalize_author(n); !t.empty()) nb.insert(std::move(t));
  }
  if (na.empty() || nb.empty()) return 0.0;
  std::vector<std::vector<std::string>> left(na.begin(), na.end()), right(nb.begin(), nb.end());
  std::vector<std::vector<std::size_t>> adj(left.size());
  for (std::size_t i = 0; i < left.size(); ++i) {
    for (std::size_t j = 0; j < right.size(); ++j) {
      if (author_names_match(left[i], right[j])) adj[i].push_back(j);
    }
  }
  std::vector<std::ptrdiff_t> match_right(right.size(), -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t u, std::vector<bool>& seen) {
    for (auto v : adj[u]) {
      if (seen[v]) continue;
      seen[v] = true;
      if (match_right[v] < 0 || augment(static_cast<std::size_t>(match_right[v]), seen)) {
        match_right[v] = static_cast<std::ptrdiff_t>(u);
        return true;
      }
    }
    return false;
  };
  std::size_t matched = 0;
  for (std::size_t u = 0; u < left.size(); ++u) {
    std::vector<bool> seen(right.size(), false);
    if (augment(u, seen)) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(std::min(left.size(), right.size()));
}

inline std::string normalize_doi(std::string_view doi) {
  std::string d = text::ascii_lower(doi);
  for (const char* prefix : {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/",
                             "http://dx.doi.org/", "doi:"}) {
    std::string_view p(prefix);
    if (d.rfind(p, 0) == 0) {
      d.erase(0, p.size());
      break;
    }
  }
  auto b = d.find_first_not_of(" \t");
  auto e = d.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : d.substr(b, e - b + 1);
}

// Affiliations are carried on documents but not scored.
inline MatchResult match_documents(const Document& news, const Document& sci, MatchOptions opts = {}) {
  for (const Document* d : {&news, &sci}) {
    bool has_doi = d->doi && !normalize_doi(*d->doi).empty();
    if (!has_doi && d->authors.empty()) {
      throw Error(ErrorCode::insufficient_metadata, "document " + d->doc_id + " has neither DOI nor authors");
    }
  }
  MatchResult r;
  if (news.doi && sci.doi) {
    auto a = normalize_doi(*news.doi);
    r.score.doi_exact = !a.empty() && a == normalize_doi(*sci.doi);
  }
  r.score.author_overlap = author_overlap(news.authors, sci.authors);
  if (news.published && sci.published) {
    r.score.date_gap_days = static_cast<int>(std::abs((*news.published - *sci.published).count()));
  }
  r.matched = r.score.doi_exact ||
              (r.score.author_overlap >= opts.author_overlap_threshold && r.score.date_gap_days &&
               *r.score.date_gap_days <= opts.date_window_days);
  return r;
}

// ---------------------------------------------------------------------------
// Stub encoder

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic unit vector for a token surface (case-insensitive).
inline std::vector<float> stub_vector(std::string_view surface, std::size_t dim, std::uint64_t seed) {
  std::uint64_t state = detail::fnv1a(text::ascii_lower(surface)) ^ (seed * 0xD1B54A32D192ED03ULL);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (std::size_t i = 0; i < dim; i += 2) {
      // Box-Muller from two uniforms in (0, 1].
      double u1 = (static_cast<double>(detail::splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
      double u2 = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
      double r = std::sqrt(-2.0 * std::log(u1));
      v[i] = r * std::cos(2.0 * std::numbers::pi * u2);
      if (i + 1 < dim) v[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
    }
    for (double x : v) norm2 += x * x;
  } while (norm2 == 0.0);
  double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

inline EmbeddingTable stub_embed(const DocumentPair& pair, std::size_t dim, std::uint64_t seed = 0) {
  if (dim < 2) throw Error(ErrorCode::validation, "stub embedding dimension must be >= 2");
  EmbeddingTable t;
  t.pair_id = pair.pair_id;
  t.dim = dim;
  t.encoder_tag = "stub:seed=" + std::to_string(seed);
  for (const Document* d : {&pair.news, &pair.science}) {
    for (const auto& tok : text::whitespace_tokens(d->summary_text)) {
      t.tokens.push_back({d->doc_id, {tok.start_char, tok.end_char}});
      auto v = stub_vector(tok.surface, dim, seed);
      t.values.insert(t.values.end(), v.begin(), v.end());
    }
  }
  return t;
}

}  // namespace cdcr
