// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "cdcr/cdcr.hpp"
#include "cdcr/service.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cdcr;
using fixture::t0;
using std::chrono::minutes;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::vector<std::string> letters(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
  return out;
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- partition metrics ------------------------------------------------------

// Feeds (gold, system) pairs over universes of up to 8 mentions: every pair of
// partitions for n <= 6, every gold partition against random systems for
// n = 7 and 8, then 1,000 random cases.
std::size_t for_each_case(const std::function<void(const Clustering&, const Clustering&)>& f) {
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    auto parts = oracle::all_partitions(letters(n));
    for (const auto& g : parts) {
      for (const auto& s : parts) {
        f(g, s);
        ++cases;
      }
    }
  }
  std::mt19937_64 rng(8);
  for (std::size_t n : {7, 8}) {
    auto ids = letters(n);
    for (const auto& g : oracle::all_partitions(ids)) {
      for (int k = 0; k < 2; ++k) {
        f(g, oracle::random_partition(ids, rng));
        ++cases;
      }
    }
  }
  for (int i = 0; i < 1000; ++i) {
    auto ids = letters(1 + rng() % 8);
    f(oracle::random_partition(ids, rng), oracle::random_partition(ids, rng));
    ++cases;
  }
  return cases;
}

Check muc_equivalence() {
  Check c;
  auto start = std::chrono::steady_clock::now();
  double worst = 0;
  auto cases = for_each_case([&](const Clustering& g, const Clustering& s) {
    auto got = muc_score(g, s);
    auto want = oracle::muc(g, s);
    worst = std::max({worst, std::fabs(got.precision - want.p), std::fabs(got.recall - want.r),
                      std::fabs(got.f1 - want.f)});
  });
  c.require(worst <= 1e-9, "max deviation from oracle " + fmt(worst));
  auto w = muc_score({{"A", "B", "C"}, {"D", "E"}}, {{"A", "B"}, {"C", "D", "E"}});
  c.require(w.precision == 2.0 / 3.0 && w.recall == 2.0 / 3.0 && std::fabs(w.f1 - 2.0 / 3.0) < 1e-15,
            "worked case gave " + fmt(w.precision) + "/" + fmt(w.recall) + "/" + fmt(w.f1));
  double secs = elapsed_s(start);
  c.require(secs < 60, "took " + fmt(secs) + " s");
  if (c.ok) c.detail = std::to_string(cases) + " cases, max deviation " + fmt(worst) + ", " + fmt(secs) + " s";
  return c;
}

Check b3_equivalence() {
  Check c;
  auto start = std::chrono::steady_clock::now();
  double worst = 0;
  std::size_t undefined_mismatch = 0;
  auto cases = for_each_case([&](const Clustering& g, const Clustering& s) {
    for (bool remove : {false, true}) {
      auto want = oracle::b3(g, s, remove);
      if (!want) {
        try {
          b3_score(g, s, remove);
          ++undefined_mismatch;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::undefined_statistic) ++undefined_mismatch;
        }
        continue;
      }
      auto got = b3_score(g, s, remove);
      worst = std::max({worst, std::fabs(got.precision - want->p), std::fabs(got.recall - want->r),
                        std::fabs(got.f1 - want->f)});
    }
  });
  c.require(worst <= 1e-9, "max deviation from oracle " + fmt(worst));
  c.require(undefined_mismatch == 0, std::to_string(undefined_mismatch) + " empty-universe cases disagree");
  auto w = b3_score({{"A", "B", "C"}, {"D", "E"}}, {{"A", "B"}, {"C", "D", "E"}}, false);
  c.require(std::fabs(w.precision - 11.0 / 15.0) < 1e-15 && std::fabs(w.recall - 11.0 / 15.0) < 1e-15,
            "worked case gave " + fmt(w.precision) + "/" + fmt(w.recall));
  auto r = b3_score({{"A", "B"}, {"C"}}, {{"A", "B"}, {"C"}}, true);
  c.require(r.precision == 1.0 && r.recall == 1.0 && r.f1 == 1.0, "singleton removal case not 1/1/1");
  double secs = elapsed_s(start);
  c.require(secs < 60, "took " + fmt(secs) + " s");
  if (c.ok) c.detail = std::to_string(cases) + " cases x 2 modes, max deviation " + fmt(worst) + ", " + fmt(secs) + " s";
  return c;
}

// ---- agreement ---------------------------------------------------------------

Check kappa_checks() {
  Check c;
  double cohen = cohen_kappa(20, 5, 5, 70);
  c.require(std::fabs(cohen - 0.7333) <= 1e-4, "cohen " + fmt(cohen));
  std::vector<std::array<std::size_t, 2>> rows{{3, 0}, {2, 1}, {0, 3}};
  double fleiss = fleiss_kappa(rows);
  c.require(std::fabs(fleiss - 0.550) <= 1e-3, "fleiss " + fmt(fleiss));
  auto moderate = interpret_kappa(0.554), fair = interpret_kappa(0.399);
  c.require(moderate.rfind("moderate", 0) == 0, "0.554 -> " + moderate);
  c.require(fair.rfind("fair", 0) == 0, "0.399 -> " + fair);
  if (c.ok) c.detail = "cohen " + fmt(cohen) + ", fleiss " + fmt(fleiss) + ", " + moderate + ", " + fair;
  return c;
}

// ---- threshold baseline ----------------------------------------------------------

Check bcos_semantics() {
  Check c;
  QueueConfig qc;
  qc.iaa_fraction = 0.0;
  AnnotationEngine e(qc);
  e.configure(qc, t0);
  std::mt19937_64 rng(31);

  // Each document pair has four entities, each named by one repeated word in
  // both summaries, plus distractor words that occur once.
  for (int i = 0; i < 6; ++i) {
    std::vector<std::string> news, sci;
    for (int k = 0; k < 4; ++k) {
      auto w = "e" + std::to_string(i) + "x" + std::to_string(k);
      news.push_back(w);
      sci.push_back(w);
      if (k == 0) news.push_back(w);
      if (k == 1) sci.push_back(w);
    }
    for (int d = 0; d < 3; ++d) {
      news.push_back("nd" + std::to_string(i) + "x" + std::to_string(d));
      sci.push_back("sd" + std::to_string(i) + "x" + std::to_string(d));
    }
    std::shuffle(news.begin(), news.end(), rng);
    std::shuffle(sci.begin(), sci.end(), rng);
    fixture::add_worded_pair(e, fixture::doc_pair("p" + std::to_string(i), fixture::join(news), fixture::join(sci)),
                             true, 64);
  }

  const auto& corpus = e.corpus();
  std::map<std::string, std::set<std::string>> by_entity;
  std::vector<std::string> universe;
  for (const auto& [id, m] : corpus.mentions()) {
    universe.push_back(id);
    by_entity[m.surface].insert(id);
  }
  Clustering planted;
  for (auto& [w, members] : by_entity) planted.push_back(members);
  planted = canonical(planted);

  std::vector<ScoredPair> scored;
  std::vector<double> sims;
  std::vector<bool> gold;
  double max_cross = -2, min_within = 2;
  for (const auto& [key, ps] : e.pairs()) {
    bool same = corpus.mention(key.first()).surface == corpus.mention(key.second()).surface;
    double s = *ps.pair.similarity;
    scored.push_back({key, s, same});
    sims.push_back(s);
    gold.push_back(same);
    (same ? min_within : max_cross) = same ? std::min(min_within, s) : std::max(max_cross, s);
  }
  c.require(max_cross < min_within, "planted set is not separable");

  auto recovered = [&](double t) {
    auto labels = threshold_classify(scored, t);
    std::vector<PairKey> positives;
    for (std::size_t i = 0; i < scored.size(); ++i) {
      if (labels[i]) positives.push_back(scored[i].key);
    }
    return canonical(transitive_inference(positives, universe)) == planted;
  };
  for (double t : {min_within, (max_cross + min_within) / 2, std::nextafter(max_cross, 2.0)}) {
    c.require(recovered(t), "planted clusters not recovered at t=" + fmt(t));
  }
  c.require(!recovered(max_cross), "recovered below the margin at t=" + fmt(max_cross));

  auto grid = threshold_grid(0.30, 0.80, 0.01);
  auto r = sweep_threshold(scored);
  auto [best_t, best_acc] = oracle::best_threshold(sims, gold, grid);
  c.require(r.curve.size() == 51, "sweep evaluated " + std::to_string(r.curve.size()) + " thresholds");
  c.require(r.best_threshold == best_t && r.best_accuracy == best_acc,
            "sweep chose " + fmt(r.best_threshold) + ", oracle " + fmt(best_t));

  // Overlapping classes: the lowest optimal threshold must still match.
  std::uniform_real_distribution<double> u(0.2, 0.9);
  for (int trial = 0; trial < 300 && c.ok; ++trial) {
    std::vector<ScoredPair> dev;
    std::vector<double> s;
    std::vector<bool> g;
    std::size_t n = 1 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      double x = std::round(u(rng) * 100) / 100;
      bool y = rng() % 3 == 0 ? x < 0.5 : x >= 0.5;
      dev.push_back({PairKey("m" + std::to_string(i), "z"), x, y});
      s.push_back(x);
      g.push_back(y);
    }
    auto got = sweep_threshold(dev);
    auto want = oracle::best_threshold(s, g, grid);
    c.require(got.best_threshold == want.first && got.best_accuracy == want.second,
              "trial " + std::to_string(trial) + ": sweep " + fmt(got.best_threshold) + " vs " + fmt(want.first));
  }
  if (c.ok) {
    c.detail = std::to_string(planted.size()) + " planted clusters recovered for t in (" + fmt(max_cross) + ", " +
               fmt(min_within) + "]; 51 thresholds, lowest optimum " + fmt(r.best_threshold);
  }
  return c;
}

// ---- annotation protocol --------------------------------------------------------

struct SimStats {
  std::size_t served = 0, submitted = 0, rejected = 0;
  std::size_t iaa_first_violations = 0;
  std::size_t served_past_cap = 0;  // non-IAA tasks served while IAA work waited behind the cap
  std::int64_t max_weekly = 0;
  std::int64_t max_engine_weekly = 0;
};

const std::vector<AnnotatorId> sim_annotators{"ann1", "ann2", "ann3"};

void seed_corpus(Workbench& bench, std::uint64_t seed) {
  bench.write([&](AnnotationEngine& e) {
    for (const auto& a : sim_annotators) e.register_annotator(a, t0);
    fixture::synthetic_corpus(e, 40, 6, seed);
  });
}

SimStats simulate(Workbench& bench, std::uint64_t seed, std::size_t steps) {
  SimStats st;
  std::mt19937_64 rng(seed);
  // Starts late on a Sunday so the run crosses an ISO week boundary.
  Timestamp now = t0 + std::chrono::days(6) + std::chrono::hours(14);
  std::map<std::pair<AnnotatorId, IsoWeek>, std::int64_t> weekly;
  std::int64_t cap = bench.read([](const AnnotationEngine& e) { return e.config().weekly_iaa_cap; });

  for (std::size_t step = 0; step < steps; ++step) {
    const auto& a = sim_annotators[rng() % sim_annotators.size()];
    now += minutes(rng() % 6);
    bench.write([&](AnnotationEngine& e) {
      bool iaa_waiting = false;
      for (const auto& [key, ps] : e.pairs()) {
        if (ps.pair.iaa && ps.pair.status != PairStatus::resolved && !ps.verdicts.count(a)) {
          iaa_waiting = true;
          break;
        }
      }
      bool under_cap = weekly[{a, iso_week(now)}] < cap;
      auto task = e.next_task(a, now);
      if (iaa_waiting && under_cap && (!task || !task->iaa)) ++st.iaa_first_violations;
      if (iaa_waiting && !under_cap && task && !task->iaa) ++st.served_past_cap;
      if (!task) return;
      ++st.served;
      auto roll = rng() % 10;
      if (roll == 8) return;  // walk away; the lease lapses on its own
      auto at = roll == 9 ? now + minutes(20) : now;
      try {
        e.submit_annotation(a, task->key, rng() % 2 ? Verdict::yes : Verdict::no, rng() % 20 == 0, at);
        ++st.submitted;
        if (task->iaa) ++weekly[{a, iso_week(at)}];
      } catch (const Error& err) {
        if (err.code() != ErrorCode::stale_claim && err.code() != ErrorCode::cap_reached) throw;
        ++st.rejected;
      }
    });
  }
  for (const auto& [k, n] : weekly) st.max_weekly = std::max(st.max_weekly, n);
  bench.read([&](const AnnotationEngine& e) {
    for (const auto& a : sim_annotators) {
      for (const auto& [w, n] : e.annotator(a).iaa_by_week) st.max_engine_weekly = std::max(st.max_engine_weekly, n);
    }
  });
  return st;
}

QueueConfig protocol_config(double fraction, std::int64_t cap) {
  QueueConfig c;
  c.iaa_fraction = fraction;
  c.weekly_iaa_cap = cap;
  c.sampling_seed = 20200302;
  return c;
}

Check protocol_properties() {
  Check c;
  fixture::TempDir dir("cdcr-acceptance");
  auto config = protocol_config(0.05, 150);
  SimStats st;
  nlohmann::json final_state, final_clusters;
  std::size_t total = 0, iaa = 0;
  {
    Workbench bench(dir.path, config, t0, 200);
    seed_corpus(bench, 5);
    st = simulate(bench, 77, 1000);
    bench.read([&](const AnnotationEngine& e) {
      final_state = e.to_json();
      final_clusters = e.corpus().clusters().to_json();
      for (const auto& [k, ps] : e.pairs()) {
        ++total;
        iaa += ps.pair.iaa ? 1 : 0;
      }
    });
    auto replayed = replay(bench.events());
    c.require(replayed.corpus().clusters().to_json() == final_clusters, "replay changed the cluster state");
    c.require(replayed.to_json() == final_state, "replay changed the engine state");
  }
  Workbench reopened(dir.path, config, t0);
  c.require(reopened.read([](const AnnotationEngine& e) { return e.to_json(); }) == final_state,
            "reopened log differs from the live state");

  double p = 0.05, frac = static_cast<double>(iaa) / static_cast<double>(total);
  double sigma = std::sqrt(p * (1 - p) / static_cast<double>(total));
  c.require(std::fabs(frac - p) <= 3 * sigma, "IAA fraction " + fmt(frac) + " outside 3 sigma " + fmt(3 * sigma));
  c.require(st.iaa_first_violations == 0, std::to_string(st.iaa_first_violations) + " non-IAA serves with IAA waiting");
  c.require(st.max_weekly <= 150 && st.max_engine_weekly <= 150, "weekly IAA count " + std::to_string(st.max_weekly));
  c.require(st.submitted > 500, "only " + std::to_string(st.submitted) + " submissions");

  // A cap that binds: half the pairs are IAA and each annotator may answer 4
  // of them per week.
  Workbench capped(protocol_config(0.5, 4), t0);
  seed_corpus(capped, 6);
  auto cs = simulate(capped, 78, 1000);
  c.require(cs.iaa_first_violations == 0, "capped run: IAA-first violated");
  c.require(cs.max_weekly == 4 && cs.max_engine_weekly == 4,
            "capped run: weekly max " + std::to_string(cs.max_weekly) + "/" + std::to_string(cs.max_engine_weekly));
  c.require(cs.served_past_cap > 0, "capped run never reached the cap");

  // 16 concurrent claimers against one workbench at a fixed instant.
  Workbench shared(protocol_config(0.0, 150), t0);
  std::vector<AnnotatorId> crowd;
  for (int i = 0; i < 16; ++i) crowd.push_back("c" + std::to_string(i));
  shared.write([&](AnnotationEngine& e) {
    for (const auto& a : crowd) e.register_annotator(a, t0);
    fixture::synthetic_corpus(e, 10, 6, 9);
  });
  std::mutex seen_mu;
  std::map<PairKey, std::set<AnnotatorId>> served_to;
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < crowd.size(); ++i) {
    threads.emplace_back([&, i] {
      std::mt19937_64 local(100 + i);
      for (int k = 0; k < 40; ++k) {
        auto task = shared.write([&](AnnotationEngine& e) { return e.next_task(crowd[i], t0); });
        if (!task) break;
        {
          std::lock_guard lock(seen_mu);
          served_to[task->key].insert(crowd[i]);
        }
        if (local() % 10 < 7) {
          shared.write([&](AnnotationEngine& e) {
            e.submit_annotation(crowd[i], task->key, local() % 2 ? Verdict::yes : Verdict::no, false, t0);
          });
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  std::size_t doubly_served = 0;
  for (const auto& [k, who] : served_to) doubly_served += who.size() > 1 ? 1 : 0;
  std::size_t double_claims = shared.read([](const AnnotationEngine& e) {
    std::size_t n = 0;
    for (const auto& [k, ps] : e.pairs()) {
      std::size_t live = 0;
      for (const auto& [who, expires] : ps.claims) live += expires > t0 ? 1 : 0;
      n += !ps.pair.iaa && live > 1 ? 1 : 0;
    }
    return n;
  });
  c.require(doubly_served == 0 && double_claims == 0,
            std::to_string(doubly_served) + " pairs served to two claimers, " + std::to_string(double_claims) +
                " with two live claims");
  c.require(served_to.size() > 100, "concurrent run served only " + std::to_string(served_to.size()) + " pairs");

  if (c.ok) {
    c.detail = "IAA " + std::to_string(iaa) + "/" + std::to_string(total) + " (" + fmt(frac) + "), " +
               std::to_string(st.submitted) + " submissions, weekly max " + std::to_string(st.max_weekly) +
               ", capped weekly max " + std::to_string(cs.max_weekly) + ", " + std::to_string(served_to.size()) +
               " pairs claimed by 16 threads, replay and reopen identical";
  }
  return c;
}

// ---- transitivity ---------------------------------------------------------------

Clustering engine_clusters(const AnnotationEngine& e) {
  Clustering out;
  for (const auto& cl : e.corpus().clusters().clusters()) {
    if (cl.mention_ids.size() > 1) out.push_back(cl.mention_ids);
  }
  return canonical(out);
}

Check transitivity() {
  Check c;
  std::mt19937_64 rng(41);
  QueueConfig qc;
  qc.iaa_fraction = 0.0;
  std::size_t conflicts_checked = 0;
  for (int trial = 0; trial < 60 && c.ok; ++trial) {
    AnnotationEngine e(qc);
    e.configure(qc, t0);
    e.register_annotator("ann", t0);
    fixture::add_worded_pair(e, fixture::doc_pair("p", "a0 a1 a2 a3 a4", "b0 b1 b2 b3 b4"));
    std::vector<std::string> names;
    for (const auto& [id, m] : e.corpus().mentions()) names.push_back(id);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;

    std::vector<PairKey> keys;
    for (const auto& [k, ps] : e.pairs()) keys.push_back(k);
    std::shuffle(keys.begin(), keys.end(), rng);
    double p_yes = 0.15 + 0.3 * static_cast<double>(rng() % 100) / 100.0;
    std::vector<std::pair<std::size_t, std::size_t>> yes_edges;
    auto now = t0;
    for (const auto& key : keys) {
      now += minutes(1);
      bool yes = std::bernoulli_distribution(p_yes)(rng);
      bool linked = e.corpus().clusters().co_clustered(key.first(), key.second());
      auto before = e.corpus().clusters().to_json();
      auto delta = fixture::answer(e, "ann", key, yes ? Verdict::yes : Verdict::no, now);
      if (yes) {
        yes_edges.emplace_back(index[key.first()], index[key.second()]);
      } else if (linked) {
        ++conflicts_checked;
        c.require(!delta.conflicts.empty(), "no conflict for " + key.str());
        c.require(e.corpus().clusters().to_json() == before, "clusters changed after a conflicting no");
      }
      Clustering want;
      for (const auto& comp : oracle::closure_components(names.size(), yes_edges, names)) {
        if (comp.size() > 1) want.push_back(comp);
      }
      c.require(engine_clusters(e) == canonical(want), "clusters differ from the closure of yes verdicts");
    }
  }

  // The chain a0-b0, a1-b0, a1-b1 links a0 with b1; a later a0-b1 "no" conflicts.
  AnnotationEngine e(qc);
  e.configure(qc, t0);
  e.register_annotator("ann", t0);
  fixture::add_worded_pair(e, fixture::doc_pair("p", "a0 a1", "b0 b1"));
  auto news = [](std::size_t i) { return make_mention_id("n-p", {3 * i, 3 * i + 2}); };
  auto sci = [](std::size_t i) { return make_mention_id("s-p", {3 * i, 3 * i + 2}); };
  fixture::answer(e, "ann", PairKey(news(0), sci(0)), Verdict::yes, t0);
  fixture::answer(e, "ann", PairKey(news(1), sci(0)), Verdict::yes, t0);
  c.require(e.corpus().clusters().co_clustered(news(0), news(1)), "a0 and a1 not co-clustered");
  fixture::answer(e, "ann", PairKey(news(1), sci(1)), Verdict::yes, t0);
  auto before = e.corpus().clusters().to_json();
  auto delta = fixture::answer(e, "ann", PairKey(news(0), sci(1)), Verdict::no, t0);
  c.require(delta.conflicts.size() == 1 && !delta.clusters_changed, "chain conflict not reported");
  c.require(e.corpus().clusters().to_json() == before, "chain conflict changed clusters");
  c.require(e.conflicts().size() == 1, "conflict not retained");

  if (c.ok) c.detail = "60 random sequences match the closure oracle; " + std::to_string(conflicts_checked) +
                       " conflicting no verdicts left clusters unchanged";
  return c;
}

// ---- capability harness ------------------------------------------------------------

Check capability_arithmetic() {
  Check c;
  // 34 anaphora cases expected coreferent; the system links 16 of them.
  std::ostringstream file;
  Clustering system;
  for (int i = 0; i < 34; ++i) {
    auto a = "n:" + std::to_string(i) + "-" + std::to_string(i + 1);
    auto b = "s:" + std::to_string(i) + "-" + std::to_string(i + 1);
    file << nlohmann::json{{"category", "anaphora_exophora"}, {"expected", "coreferent"}, {"mention_id_a", a},
                           {"mention_id_b", b}}
                .dump()
         << "\n";
    if (i < 16) {
      system.push_back({a, b});
    } else {
      system.push_back({a});
      system.push_back({b});
    }
  }
  std::istringstream in(file.str());
  auto cases = parse_capability_cases(in);
  c.require(cases.errors.empty() && cases.cases.size() == 34, "case file did not parse");
  predict_from_clusters(cases.cases, system);
  auto cells = capability_report(cases.cases);
  c.require(cells.size() == 6, "expected 6 cells");
  c.require(cells[0].passes == 16 && cells[0].total == 34 && cells[0].pass_rate_text() == "47.1%",
            "cell reads " + cells[0].pass_rate_text());

  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 500 && c.ok; ++trial) {
    std::vector<CapabilityCase> random_cases;
    std::map<std::pair<int, bool>, std::size_t> expected_total;
    std::size_t n = rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      int cat = static_cast<int>(rng() % 3);
      bool exp = rng() % 2;
      random_cases.push_back(
          {static_cast<CapabilityCategory>(cat), exp, PairKey("a" + std::to_string(i), "b"), rng() % 2 == 0});
      ++expected_total[{cat, exp}];
    }
    auto r = capability_report(random_cases);
    std::size_t sum = 0;
    for (const auto& cell : r) {
      sum += cell.total;
      c.require(cell.total == expected_total[{static_cast<int>(cell.category), cell.expected_coreferent}],
                "cell total disagrees with a direct count");
      c.require(cell.passes <= cell.total, "passes exceed total");
    }
    c.require(sum == n, "cell totals do not partition the cases");
  }
  if (c.ok) c.detail = "16/34 -> " + cells[0].pass_rate_text() + "; 500 random case sets partitioned";
  return c;
}

// ---- export round trip -----------------------------------------------------------

std::string run_command(const std::string& cmd) {
  std::string out;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  ::pclose(p);
  return out;
}

Check export_round_trip() {
  Check c;
  QueueConfig qc;
  qc.iaa_fraction = 0.0;
  Workbench bench(qc, t0);
  bench.write([&](AnnotationEngine& e) {
    e.register_annotator("ann", t0);
    fixture::synthetic_corpus(e, 4, 5, 3);
    std::mt19937_64 rng(5);
    auto now = t0;
    for (int i = 0; i < 40; ++i) {
      now += minutes(1);
      auto t = e.next_task("ann", now);
      if (!t) break;
      e.submit_annotation("ann", t->key, rng() % 3 == 0 ? Verdict::yes : Verdict::no, false, now);
    }
  });

  httplib::Server server;
  Service service(bench, [] { return t0; });
  service.mount(server);
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/api/export/clusters");
  server.stop();
  th.join();
  c.require(res && res->status == 200, "export request failed");
  if (!c.ok) return c;

  fixture::TempDir dir("cdcr-export");
  auto path = dir.path / "clusters.jsonl";
  std::ofstream(path) << res->body;
  auto file = read_cluster_file(path.string());
  c.require(file.errors.empty() && file.records > 0, "export did not re-ingest cleanly");
  c.require(file.clustering.size() < file.records, "export holds no multi-mention cluster");
  for (auto metric : {Metric::muc, Metric::b3}) {
    auto r = score(metric, file.clustering, file.clustering);
    c.require(r.precision == 1.0 && r.recall == 1.0 && r.f1 == 1.0, to_string(metric) + " self-score is not 1/1/1");
  }

#ifdef CDCR_CLI_PATH
  auto out = run_command(std::string(CDCR_CLI_PATH) + " score --gold " + path.string() + " --system " + path.string() +
                         " --metric all");
  std::istringstream lines(out);
  std::string line;
  std::size_t perfect = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j["precision"] == 1.0 && j["recall"] == 1.0 && j["f1"] == 1.0) ++perfect;
  }
  c.require(perfect == 2, "score command output: " + out);
#endif
  if (c.ok) c.detail = std::to_string(file.records) + " exported mentions in " +
                       std::to_string(file.clustering.size()) + " clusters score 1/1/1 on muc and b3";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"muc-oracle-equivalence", muc_equivalence},
      {"b3-oracle-equivalence", b3_equivalence},
      {"kappa-checks", kappa_checks},
      {"threshold-baseline-semantics", bcos_semantics},
      {"protocol-properties", protocol_properties},
      {"transitivity", transitivity},
      {"capability-arithmetic", capability_arithmetic},
      {"export-round-trip", export_round_trip},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    failed += c.ok ? 0 : 1;
    std::cout << (c.ok ? "PASS " : "FAIL ") << name << ": " << c.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
