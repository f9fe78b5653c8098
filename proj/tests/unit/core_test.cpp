#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "cdcr/cdcr.hpp"
#include "fixtures.hpp"

using namespace cdcr;
using fixture::t0;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::storage;
}

Mention make_mention(const DocId& doc, std::size_t s, std::size_t e) {
  Mention m;
  m.doc_id = doc;
  m.range = {s, e};
  m.mention_id = make_mention_id(doc, m.range);
  return m;
}

}  // namespace

TEST(Spans, OverlapIsEndExclusive) {
  EXPECT_FALSE(span_overlap({0, 5}, {5, 9}));
  EXPECT_TRUE(span_overlap({0, 5}, {3, 9}));
  EXPECT_TRUE(span_overlap({2, 4}, {2, 4}));
  EXPECT_EQ(code_of([] { span_overlap({4, 4}, {0, 9}); }), ErrorCode::validation);
  EXPECT_EQ(code_of([] { span_overlap({0, 3}, {5, 2}); }), ErrorCode::validation);
}

TEST(Spans, OverlapMatchesDefinitionOnRandomRanges) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pos(0, 30);
  for (int i = 0; i < 5000; ++i) {
    std::size_t a = pos(rng), b = pos(rng), c = pos(rng), d = pos(rng);
    if (a == b || c == d) continue;
    CharRange x{std::min(a, b), std::max(a, b)}, y{std::min(c, d), std::max(c, d)};
    bool shared = false;
    for (std::size_t k = x.start; k < x.end; ++k) shared = shared || (k >= y.start && k < y.end);
    EXPECT_EQ(span_overlap(x, y), shared);
    EXPECT_EQ(span_overlap(x, y), span_overlap(y, x));
  }
}

TEST(PairKeys, SymmetricAndInjective) {
  auto m1 = make_mention("news", 0, 5), m2 = make_mention("sci", 3, 9), m3 = make_mention("sci", 10, 12);
  EXPECT_EQ(pair_key(m1, m2), pair_key(m2, m1));
  EXPECT_NE(pair_key(m1, m2), pair_key(m1, m3));
  auto m1b = make_mention("news", 6, 8);
  EXPECT_EQ(code_of([&] { pair_key(m1, m1b); }), ErrorCode::cross_document);
}

TEST(PairKeys, SymmetryOverRandomMentions) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pos(0, 200);
  std::set<std::string> seen;
  std::set<std::pair<MentionId, MentionId>> unordered;
  for (int i = 0; i < 2000; ++i) {
    auto s1 = pos(rng), s2 = pos(rng);
    auto a = make_mention("d" + std::to_string(rng() % 3), s1, s1 + 1 + rng() % 9);
    auto b = make_mention("e" + std::to_string(rng() % 3), s2, s2 + 1 + rng() % 9);
    auto k = pair_key(a, b);
    EXPECT_EQ(k, pair_key(b, a));
    EXPECT_EQ(PairKey::parse(k.str()), k);
    seen.insert(k.str());
    unordered.insert(std::minmax(a.mention_id, b.mention_id));
  }
  EXPECT_EQ(seen.size(), unordered.size());
}

TEST(PairKeys, ParseRejectsMalformed) {
  EXPECT_EQ(code_of([] { PairKey::parse("no-bar"); }), ErrorCode::format);
  EXPECT_EQ(code_of([] { PairKey::parse("a|b|c"); }), ErrorCode::format);
}

TEST(Text, CodePointOffsets) {
  std::string s = "Caf\xC3\xA9 au lait";  // "Café au lait"
  EXPECT_EQ(text::length(s), 12u);
  EXPECT_EQ(text::substr(s, 0, 4), "Caf\xC3\xA9");
  auto toks = text::whitespace_tokens(s);
  ASSERT_EQ(toks.size(), 3u);
  EXPECT_EQ(toks[1].start_char, 5u);
  EXPECT_EQ(toks[1].end_char, 7u);
}

TEST(Time, IsoWeeks) {
  EXPECT_EQ(iso_week(make_date(2020, 3, 2)), (IsoWeek{2020, 10}));
  EXPECT_EQ(iso_week(make_date(2021, 1, 3)), (IsoWeek{2020, 53}));
  EXPECT_EQ(iso_week(make_date(2019, 12, 30)), (IsoWeek{2020, 1}));
  auto ts = parse_timestamp("2020-03-08T23:59:59Z");
  EXPECT_EQ(iso_week(ts), (IsoWeek{2020, 10}));
  EXPECT_EQ(iso_week(ts + std::chrono::seconds(1)), (IsoWeek{2020, 11}));
  EXPECT_EQ(format_timestamp(ts), "2020-03-08T23:59:59Z");
}

TEST(Store, EmptyCorpusValidates) {
  CorpusStore store;
  auto r = validate_corpus(store);
  EXPECT_EQ(r.documents, 0u);
  EXPECT_EQ(r.mentions, 0u);
  EXPECT_EQ(r.clusters, 0u);
  EXPECT_TRUE(r.ok());
}

TEST(Store, MentionSurfaceAndDedup) {
  CorpusStore store;
  store.add_document_pair(fixture::doc_pair("p", "blood from the heart", "the blood test"));
  auto [m, added] = store.add_mention("n-p", {0, 5});
  EXPECT_TRUE(added);
  EXPECT_EQ(m->surface, "blood");
  auto [again, added_again] = store.add_mention("n-p", {0, 5});
  EXPECT_FALSE(added_again);
  EXPECT_EQ(again->mention_id, m->mention_id);
  EXPECT_EQ(store.mentions().size(), 1u);
  EXPECT_EQ(code_of([&] { store.add_mention("n-p", {15, 40}); }), ErrorCode::validation);
  EXPECT_EQ(code_of([&] { store.add_mention("n-p", {3, 3}); }), ErrorCode::validation);
  EXPECT_EQ(code_of([&] { store.add_mention("nope", {0, 1}); }), ErrorCode::validation);
}

TEST(Store, OutOfBoundsMentionIsAViolation) {
  CorpusStore store;
  store.add_document_pair(fixture::doc_pair("p", "short text", "other text"));
  store.add_mention("n-p", {0, 5});
  auto j = store.to_json();
  auto m = j["mentions"][0].get<Mention>();
  m.range.end = 99;
  j["mentions"][0] = m;
  auto r = validate_corpus(CorpusStore::from_json(j));
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].find("outside summary"), std::string::npos);
}

TEST(Store, ClusterCountsExcludeSingletons) {
  CorpusStore store;
  store.add_document_pair(fixture::doc_pair("p", "a b c", "d e f", "train"));
  for (auto r : fixture::word_ranges("a b c")) store.add_mention("n-p", r);
  for (auto r : fixture::word_ranges("d e f")) store.add_mention("s-p", r);
  store.clusters().merge("n-p:0-1", "s-p:0-1");
  store.clusters().merge("n-p:2-3", "n-p:2-3");
  auto r = validate_corpus(store);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.documents, 2u);
  EXPECT_EQ(r.mentions, 6u);
  EXPECT_EQ(r.clusters, 1u);
  EXPECT_EQ(r.splits["train"].clusters, 1u);
}

TEST(Store, ConflictingPairContent) {
  CorpusStore store;
  auto p = fixture::doc_pair("p", "one", "two");
  EXPECT_EQ(store.add_document_pair(p), AddStatus::added);
  EXPECT_EQ(store.add_document_pair(p), AddStatus::unchanged);
  p.news.summary_text = "changed";
  EXPECT_EQ(code_of([&] { store.add_document_pair(p); }), ErrorCode::conflict);
}

namespace {

const char* kPairsFile =
    R"({"pair_id":"p1","split":"train","news":{"doc_id":"n1","title":"T","summary_text":"Monarch butterflies migrate.","authors":["J. Smith"]},"science":{"doc_id":"s1","title":"U","summary_text":"Danaus plexippus migration.","authors":["John Smith"]}})"
    "\n"
    R"({"pair_id":"p2","news":{"doc_id":"n2","title":"T","summary_text":"Bears sleep.","authors":[]},"science":{"doc_id":"s2","title":"U","summary_text":"Ursid torpor.","authors":[]}})"
    "\n";

}  // namespace

TEST(Ingest, PairsAreIdempotent) {
  CorpusStore store;
  std::istringstream a(kPairsFile), b(kPairsFile);
  auto first = ingest_document_pairs(store, a, t0);
  EXPECT_EQ(first.added, 2u);
  EXPECT_TRUE(first.errors.empty());
  auto before = store.to_json();
  auto second = ingest_document_pairs(store, b, t0 + std::chrono::hours(5));
  EXPECT_EQ(second.added, 0u);
  EXPECT_EQ(second.unchanged, 2u);
  EXPECT_EQ(store.to_json(), before);
}

TEST(Ingest, BadRecordsReportLineAndContinue) {
  std::string file = std::string(kPairsFile) +
                     R"({"pair_id":"p3","news":{"doc_id":"n3","title":"T"},"science":{"doc_id":"s3","title":"U","summary_text":"x"}})"
                     "\nnot json\n";
  CorpusStore store;
  std::istringstream in(file);
  auto r = ingest_document_pairs(store, in, t0);
  EXPECT_EQ(r.added, 2u);
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line, 3u);
  EXPECT_EQ(r.errors[0].code, ErrorCode::schema);
  EXPECT_NE(r.errors[0].message.find("summary_text"), std::string::npos);
  EXPECT_EQ(r.errors[1].line, 4u);
}

TEST(Ingest, DuplicatePairIdWithNewContentIsConflict) {
  CorpusStore store;
  std::istringstream a(kPairsFile);
  ingest_document_pairs(store, a, t0);
  std::string changed = kPairsFile;
  changed.replace(changed.find("Bears sleep."), 12, "Bears nap!!.");
  std::istringstream b(changed);
  auto r = ingest_document_pairs(store, b, t0);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].code, ErrorCode::conflict);
}

TEST(Ingest, MentionsLoadWithPerRecordErrors) {
  CorpusStore store;
  std::istringstream pairs(kPairsFile);
  ingest_document_pairs(store, pairs, t0);
  std::istringstream mentions(
      R"({"doc_id":"n1","start_char":0,"end_char":7})"
      "\n"
      R"({"doc_id":"n1","start_char":0,"end_char":400})"
      "\n"
      R"({"doc_id":"zz","start_char":0,"end_char":1})"
      "\n"
      R"({"doc_id":"n1","start_char":0,"end_char":7,"surface":"ignored"})"
      "\n");
  auto r = load_mentions(store, mentions);
  EXPECT_EQ(r.added, 1u);
  EXPECT_EQ(r.unchanged, 1u);
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line, 2u);
  EXPECT_EQ(r.errors[1].line, 3u);
  EXPECT_EQ(store.mention("n1:0-7").surface, "Monarch");
}

TEST(Match, DoiOnly) {
  auto n = fixture::doc("n", DocKind::news, "x");
  auto s = fixture::doc("s", DocKind::science, "y");
  n.doi = "10.1000/ABC";
  s.doi = "https://doi.org/10.1000/abc";
  auto r = match_documents(n, s);
  EXPECT_TRUE(r.matched);
  EXPECT_TRUE(r.score.doi_exact);
}

TEST(Match, InitialMatchesFullName) {
  auto n = fixture::doc("n", DocKind::news, "x");
  auto s = fixture::doc("s", DocKind::science, "y");
  n.authors = {"J. Smith"};
  s.authors = {"John Smith"};
  n.published = make_date(2020, 3, 1);
  s.published = make_date(2020, 3, 4);
  auto r = match_documents(n, s, {14, 0.5});
  EXPECT_TRUE(r.matched);
  EXPECT_DOUBLE_EQ(r.score.author_overlap, 1.0);
  EXPECT_EQ(r.score.date_gap_days, 3);
}

TEST(Match, DisjointAuthorsDoNotMatch) {
  auto n = fixture::doc("n", DocKind::news, "x");
  auto s = fixture::doc("s", DocKind::science, "y");
  n.authors = {"Ada Lovelace"};
  s.authors = {"Alan Turing"};
  n.published = make_date(2020, 3, 1);
  s.published = make_date(2020, 3, 4);
  auto r = match_documents(n, s);
  EXPECT_FALSE(r.matched);
  EXPECT_DOUBLE_EQ(r.score.author_overlap, 0.0);
}

TEST(Match, NeedsSomeMetadata) {
  auto n = fixture::doc("n", DocKind::news, "x");
  auto s = fixture::doc("s", DocKind::science, "y");
  EXPECT_EQ(code_of([&] { match_documents(n, s); }), ErrorCode::insufficient_metadata);
}

TEST(Match, NormalizationRules) {
  EXPECT_EQ(normalize_author("Smith, John"), (std::vector<std::string>{"john", "smith"}));
  EXPECT_EQ(normalize_author("Jos\xC3\xA9 O'Neil"), (std::vector<std::string>{"jose", "oneil"}));
  EXPECT_TRUE(author_names_match(normalize_author("J. Smith"), normalize_author("john smith")));
  EXPECT_FALSE(author_names_match(normalize_author("J. Smith"), normalize_author("K. Smith")));
  EXPECT_FALSE(author_names_match(normalize_author("John Smith"), normalize_author("John Smyth")));
}

TEST(Match, OverlapSymmetricAndMonotone) {
  std::vector<std::string> first = {"Ada", "Alan", "Grace", "John", "Jane", "A."};
  std::vector<std::string> last = {"Lovelace", "Turing", "Hopper", "Smith", "Doe"};
  std::mt19937_64 rng(5);
  auto random_set = [&](std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(first[rng() % first.size()] + " " + last[rng() % last.size()]);
    return out;
  };
  for (int i = 0; i < 500; ++i) {
    auto a = random_set(1 + rng() % 4), b = random_set(1 + rng() % 4);
    double ab = author_overlap(a, b);
    EXPECT_DOUBLE_EQ(ab, author_overlap(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    std::string shared = "Zed Shared";
    auto a2 = a, b2 = b;
    a2.push_back(shared);
    b2.push_back(shared);
    EXPECT_GE(author_overlap(a2, b2) + 1e-12, ab);
  }
}

namespace {

std::string embedding_file(const std::string& rows) {
  return R"({"pair_id":"p2","dim":4,"encoder_tag":"t","token_counts":{"n2":2}})"
         "\n" +
         rows;
}

}  // namespace

TEST(Embeddings, AcceptsFiniteRows) {
  std::istringstream in(embedding_file(
      R"({"doc_id":"n2","start_char":0,"end_char":5,"vector":[1,2,3,4]})"
      "\n"
      R"({"doc_id":"n2","start_char":6,"end_char":12,"vector":[0.5,0.5,0.5,0.5]})"
      "\n"));
  auto r = parse_embeddings(in);
  ASSERT_TRUE(r.errors.empty());
  ASSERT_EQ(r.tables.size(), 1u);
  EXPECT_EQ(r.tables[0].rows(), 2u);
  EXPECT_FLOAT_EQ(r.tables[0].row(1)[2], 0.5f);
}

TEST(Embeddings, NanRowRejectedWithIndex) {
  std::istringstream in(embedding_file(
      R"({"doc_id":"n2","start_char":0,"end_char":5,"vector":[1,2,3,4]})"
      "\n"
      R"({"doc_id":"n2","start_char":6,"end_char":12,"vector":[NaN,NaN,NaN,NaN]})"
      "\n"));
  auto r = parse_embeddings(in);
  EXPECT_TRUE(r.tables.empty());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 3u);
  EXPECT_NE(r.errors[0].message.find("row 1"), std::string::npos);
}

TEST(Embeddings, DimensionMismatchIsFormatError) {
  std::istringstream in(embedding_file(
      R"({"doc_id":"n2","start_char":0,"end_char":5,"vector":[1,2,3,4]})"
      "\n"
      R"({"doc_id":"n2","start_char":6,"end_char":12,"vector":[1,2,3]})"
      "\n"));
  auto r = parse_embeddings(in);
  EXPECT_TRUE(r.tables.empty());
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].code, ErrorCode::dimension_mismatch);
}

TEST(Embeddings, WriteThenParseRoundTrips) {
  auto p = fixture::doc_pair("p", "blood flows", "blood cells");
  auto t = stub_embed(p, 8, 1);
  std::istringstream in(write_embedding_table(t));
  auto r = parse_embeddings(in);
  ASSERT_EQ(r.tables.size(), 1u);
  EXPECT_EQ(r.tables[0], t);
}

TEST(Embeddings, StubIsDeterministicUnitAndSeeded) {
  auto p = fixture::doc_pair("p", "blood and Blood", "the blood test");
  auto t = stub_embed(p, 16, 42);
  ASSERT_EQ(t.rows(), 6u);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double n2 = 0;
    for (float x : t.row(i)) n2 += double(x) * x;
    EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-6);
  }
  auto same = [&](std::size_t i, std::size_t j) {
    return std::equal(t.row(i).begin(), t.row(i).end(), t.row(j).begin());
  };
  EXPECT_TRUE(same(0, 2));
  EXPECT_TRUE(same(0, 4));
  EXPECT_FALSE(same(0, 1));
  EXPECT_NE(stub_vector("blood", 16, 42), stub_vector("blood", 16, 43));
  EXPECT_EQ(code_of([&] { stub_embed(p, 1); }), ErrorCode::validation);
}

TEST(Embeddings, TokenCoverageUsesIntersection) {
  CorpusStore store;
  auto p = fixture::doc_pair("p", "heart disease risk", "cardiac risk");
  store.add_document_pair(p);
  store.set_embedding_table(stub_embed(p, 4));
  auto [m, added] = store.add_mention("n-p", {3, 10});  // "rt dise"
  ASSERT_TRUE(m->token_span);
  EXPECT_EQ(m->token_span->first, 0u);
  EXPECT_EQ(m->token_span->last, 1u);
}

TEST(Embeddings, CoverageProperty) {
  std::mt19937_64 rng(9);
  CorpusStore store;
  auto p = fixture::doc_pair("p", "alpha beta  gamma delta epsilon zeta", "eta theta iota");
  store.add_document_pair(p);
  auto table = stub_embed(p, 4);
  store.set_embedding_table(table);
  auto len = text::length(p.news.summary_text);
  for (int i = 0; i < 300; ++i) {
    std::size_t s = rng() % len, e = s + 1 + rng() % (len - s);
    auto [m, added] = store.add_mention("n-p", {s, e});
    std::set<std::size_t> covered;
    if (m->token_span) {
      for (auto r = m->token_span->first; r <= m->token_span->last; ++r) {
        for (auto c = table.tokens[r].range.start; c < table.tokens[r].range.end; ++c) covered.insert(c);
      }
    }
    for (auto c = s; c < e; ++c) {
      bool whitespace = p.news.summary_text[c] == ' ';
      if (!whitespace) {
        EXPECT_TRUE(covered.count(c)) << "char " << c << " of [" << s << "," << e << ")";
      }
    }
  }
  EXPECT_TRUE(validate_corpus(store).ok());
}

TEST(Vectors, SpanVectorIsMean) {
  EmbeddingTable t;
  t.pair_id = "p";
  t.dim = 2;
  t.tokens = {{"d", {0, 1}}, {"d", {2, 3}}};
  t.values = {1, 2, 3, 4};
  Mention one;
  one.doc_id = "d";
  one.range = {0, 1};
  EXPECT_EQ(span_vector(one, t), (std::vector<double>{1, 2}));
  Mention both = one;
  both.range = {0, 3};
  EXPECT_EQ(span_vector(both, t), (std::vector<double>{2, 3}));
  Mention none = one;
  none.range = {5, 6};
  EXPECT_EQ(code_of([&] { span_vector(none, t); }), ErrorCode::empty_span);
}

TEST(Vectors, CosineExamples) {
  std::vector<double> u{0.3, 0.7};
  EXPECT_DOUBLE_EQ(cosine_similarity(u, u), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 1}), 0.70710678, 1e-8);
  EXPECT_EQ(code_of([] { cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 1}); }),
            ErrorCode::degenerate_vector);
  EXPECT_EQ(code_of([] { cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 1, 1}); }),
            ErrorCode::dimension_mismatch);
}

TEST(Vectors, CosineScaleInvariantAndClamped) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> u(8), v(8);
    for (auto& x : u) x = g(rng);
    for (auto& x : v) x = g(rng);
    double base = cosine_similarity(u, v);
    double a = scale(rng), b = scale(rng);
    auto su = u, sv = v;
    for (auto& x : su) x *= a;
    for (auto& x : sv) x *= b;
    EXPECT_NEAR(cosine_similarity(su, sv), base, 1e-12);
    EXPECT_LE(std::abs(base), 1.0);
    EXPECT_LE(cosine_similarity(su, u), 1.0);
  }
}

TEST(Candidates, CardinalityDedupAndIdenticalSurfaces) {
  CorpusStore store;
  auto p = fixture::doc_pair("p", "blood heart lung", "blood vessel cell tissue");
  store.add_document_pair(p);
  for (const auto* d : {&p.news, &p.science}) {
    for (auto r : fixture::word_ranges(d->summary_text)) store.add_mention(d->doc_id, r);
  }
  store.set_embedding_table(stub_embed(p, 16, 3));
  auto batch = generate_candidates(store, "p");
  ASSERT_EQ(batch.pairs.size(), 12u);
  std::set<PairKey> existing;
  for (const auto& c : batch.pairs) {
    existing.insert(c.key);
    EXPECT_NE(store.mention(c.key.first()).doc_id, store.mention(c.key.second()).doc_id);
    ASSERT_TRUE(c.similarity);
  }
  EXPECT_TRUE(generate_candidates(store, "p", existing).pairs.empty());
  auto blood = std::find_if(batch.pairs.begin(), batch.pairs.end(),
                            [](const auto& c) { return c.key == PairKey("n-p:0-5", "s-p:0-5"); });
  ASSERT_NE(blood, batch.pairs.end());
  EXPECT_NEAR(*blood->similarity, 1.0, 1e-9);

  std::set<PairKey> some(existing.begin(), std::next(existing.begin(), 5));
  EXPECT_EQ(generate_candidates(store, "p", some).pairs.size(), 7u);
}

TEST(Candidates, WithoutTableUnscoredAndWithoutMentionsWarns) {
  CorpusStore store;
  auto p = fixture::doc_pair("p", "a b", "c");
  store.add_document_pair(p);
  store.add_mention("n-p", {0, 1});
  auto empty = generate_candidates(store, "p");
  EXPECT_TRUE(empty.pairs.empty());
  EXPECT_EQ(empty.warnings.size(), 1u);
  store.add_mention("s-p", {0, 1});
  auto batch = generate_candidates(store, "p");
  ASSERT_EQ(batch.pairs.size(), 1u);
  EXPECT_FALSE(batch.pairs[0].similarity);
}

namespace {

CandidatePair cand(const std::string& a, const std::string& b, std::optional<double> sim) {
  CandidatePair c;
  c.key = PairKey(a, b);
  c.similarity = sim;
  return c;
}

std::vector<std::string> keys_of(const std::vector<CandidatePair>& v) {
  std::vector<std::string> out;
  for (const auto& c : v) out.push_back(c.key.str());
  return out;
}

}  // namespace

TEST(Ranking, DescendingWithKeyTies) {
  auto r = rank_candidates({cand("a", "x", 0.9), cand("b", "x", 0.2), cand("c", "x", 0.5)});
  EXPECT_EQ(keys_of(r), (std::vector<std::string>{"a|x", "c|x", "b|x"}));
  auto tie = rank_candidates({cand("b", "x", 0.5), cand("a", "x", 0.5)});
  EXPECT_EQ(keys_of(tie), (std::vector<std::string>{"a|x", "b|x"}));
  auto unscored = rank_candidates({cand("c", "x", {}), cand("a", "x", {}), cand("b", "x", 0.1)});
  EXPECT_EQ(keys_of(unscored), (std::vector<std::string>{"b|x", "a|x", "c|x"}));
}

TEST(Ranking, PermutationInvariant) {
  std::mt19937_64 rng(23);
  std::vector<CandidatePair> pairs;
  for (int i = 0; i < 60; ++i) {
    std::optional<double> sim;
    if (i % 7) sim = static_cast<double>(rng() % 10) / 10.0;
    pairs.push_back(cand("m" + std::to_string(i), "z", sim));
  }
  auto expected = keys_of(rank_candidates(pairs));
  auto strat = keys_of(rank_candidates(pairs, {true}));
  for (int i = 0; i < 50; ++i) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    EXPECT_EQ(keys_of(rank_candidates(pairs)), expected);
    EXPECT_EQ(keys_of(rank_candidates(pairs, {true})), strat);
  }
  auto sorted_strat = strat;
  std::sort(sorted_strat.begin(), sorted_strat.end());
  auto sorted_exp = expected;
  std::sort(sorted_exp.begin(), sorted_exp.end());
  EXPECT_EQ(sorted_strat, sorted_exp);
}

TEST(Ranking, StratifiedInterleavesThirds) {
  std::vector<CandidatePair> pairs;
  for (int i = 0; i < 6; ++i) pairs.push_back(cand("m" + std::to_string(i), "z", 0.9 - 0.1 * i));
  auto r = keys_of(rank_candidates(pairs, {true}));
  EXPECT_EQ(r, (std::vector<std::string>{"m0|z", "m2|z", "m4|z", "m1|z", "m3|z", "m5|z"}));
}

TEST(Candidates, CountEqualsProductMinusExisting) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t nn = 1 + rng() % 6, ns = 1 + rng() % 6;
    std::vector<std::string> nw, sw;
    for (std::size_t i = 0; i < nn; ++i) nw.push_back("a" + std::to_string(i));
    for (std::size_t i = 0; i < ns; ++i) sw.push_back("b" + std::to_string(i));
    AnnotationEngine e;
    auto p = fixture::doc_pair("p", fixture::join(nw), fixture::join(sw));
    e.add_document_pair(p, t0);
    for (auto r : fixture::word_ranges(p.news.summary_text)) e.add_mention("n-p", r, t0);
    auto sr = fixture::word_ranges(p.science.summary_text);
    std::size_t half = sr.size() / 2;
    for (std::size_t i = 0; i < half; ++i) e.add_mention("s-p", sr[i], t0);
    EXPECT_EQ(e.generate_candidates("p", t0), nn * half);
    for (std::size_t i = half; i < sr.size(); ++i) e.add_mention("s-p", sr[i], t0);
    EXPECT_EQ(e.generate_candidates("p", t0), nn * (ns - half));
    EXPECT_EQ(e.pairs().size(), nn * ns);
    EXPECT_EQ(e.generate_candidates("p", t0), 0u);
  }
}
