#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cdcr/cdcr.hpp"
#include "cdcr/service.hpp"

using namespace cdcr;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string data_dir;
  std::optional<std::uint64_t> seed;
};

AppConfig resolve_config(const Common& c) {
  auto cfg = load_config(c.config_path);
  if (!c.data_dir.empty()) cfg.data_dir = c.data_dir;
  if (c.seed) cfg.queue.sampling_seed = *c.seed;
  return cfg;
}

std::unique_ptr<Workbench> open_workbench(const AppConfig& cfg) {
  auto now = now_utc();
  auto bench = std::make_unique<Workbench>(cfg.data_dir, cfg.queue, now, cfg.snapshot_every);
  if (bench->discarded_bytes() > 0) {
    std::cerr << "recovered log: discarded " << bench->discarded_bytes() << " bytes of torn tail\n";
  }
  bench->write([&](AnnotationEngine& e) {
    for (const auto& a : cfg.annotators) e.register_annotator(a, now);
  });
  return bench;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--data-dir", c.data_dir, "override data_dir");
  cmd->add_option("--seed", c.seed, "override sampling_seed");
}

std::ifstream open_file(const std::string& path) { return detail::open_input(path); }

template <class Write>
void with_output(const std::string& path, Write&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::storage, "cannot write " + path);
  write(out);
}

void report_errors(const std::vector<RecordError>& errors, const std::string& source) {
  for (const auto& e : errors) {
    std::cerr << source << ":" << e.line << ": " << to_string(e.code) << ": " << e.message << "\n";
  }
}

// Resolved pairs with a coreferent / not_coreferent gold label.
std::vector<ScoredPair> labeled_pairs(const AnnotationEngine& e, const std::optional<std::string>& split) {
  std::vector<ScoredPair> out;
  for (const auto& [key, ps] : e.pairs()) {
    if (!ps.pair.gold || *ps.pair.gold == Gold::unresolved) continue;
    if (split && e.corpus().pair(ps.pair.pair_id).split != split) continue;
    out.push_back({key, ps.pair.similarity, *ps.pair.gold == Gold::coreferent});
  }
  return out;
}

std::vector<ScoredPair> read_pairs(const std::string& path) {
  auto in = open_file(path);
  auto parsed = parse_scored_pairs(in);
  report_errors(parsed.errors, path);
  return parsed.pairs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-document coreference annotation workbench"};
  app.require_subcommand(1);

  Common common;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "load document pairs, mentions and embeddings");
  add_common(ingest, common);
  std::string pairs_path, mentions_path, embeddings_path;
  bool stub = false, check_match = false;
  std::optional<std::size_t> stub_dim;
  ingest->add_option("--pairs", pairs_path, "document-pair JSONL")->check(CLI::ExistingFile);
  ingest->add_option("--mentions", mentions_path, "mention JSONL")->check(CLI::ExistingFile);
  ingest->add_option("--embeddings", embeddings_path, "token embedding JSONL")->check(CLI::ExistingFile);
  ingest->add_flag("--stub-embeddings", stub, "generate deterministic stand-in vectors for pairs without embeddings");
  ingest->add_option("--stub-dim", stub_dim, "dimension of stand-in vectors");
  ingest->add_flag("--check-match", check_match, "report metadata matching for every document pair");

  // gen-pairs
  auto* gen = app.add_subcommand("gen-pairs", "generate and rank candidate mention pairs");
  add_common(gen, common);
  std::vector<std::string> gen_ids;
  std::string audit_path;
  gen->add_option("--pair-id", gen_ids, "restrict to these document pairs");
  gen->add_option("--audit", audit_path, "write ranked pair records to this file");

  // serve
  auto* serve = app.add_subcommand("serve", "run the annotation HTTP service");
  add_common(serve, common);
  std::optional<std::string> host;
  std::optional<int> port;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "listen port");

  // kappa
  auto* kappa = app.add_subcommand("kappa", "inter-annotator agreement report");
  add_common(kappa, common);
  bool kappa_json = false;
  kappa->add_flag("--json", kappa_json, "print only the machine-readable record");

  // score
  auto* score_cmd = app.add_subcommand("score", "score a system cluster file against gold");
  std::string gold_path, system_path, metric = "all";
  bool keep_singletons = false;
  score_cmd->add_option("--gold", gold_path, "gold cluster file")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--system", system_path, "system cluster file")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--metric", metric, "muc, b3 or all")->check(CLI::IsMember({"muc", "b3", "all"}));
  score_cmd->add_flag("--keep-singletons", keep_singletons, "score gold singletons with B3");

  // sweep-threshold
  auto* sweep = app.add_subcommand("sweep-threshold", "pairwise accuracy of similarity thresholds");
  Common sweep_common;
  std::string sweep_pairs, sweep_split = "dev";
  double t_min = 0.30, t_max = 0.80, step = 0.01;
  sweep->add_option("--pairs", sweep_pairs, "labeled pair JSONL")->check(CLI::ExistingFile);
  sweep->add_option("-c,--config", sweep_common.config_path, "use resolved pairs from the workbench");
  sweep->add_option("--split", sweep_split, "split to use with --config");
  sweep->add_option("--t-min", t_min);
  sweep->add_option("--t-max", t_max);
  sweep->add_option("--step", step);

  // cluster-scores
  auto* cluster = app.add_subcommand("cluster-scores", "cluster pairwise scores into a cluster file");
  Common cluster_common;
  std::string scores_path, method = "agglomerative", linkage = "average", cluster_out, cluster_split = "test";
  double tau = 0.5, threshold = 0.65;
  cluster->add_option("--scores", scores_path, "external score JSONL {mention_id_a, mention_id_b, score}")
      ->check(CLI::ExistingFile);
  cluster->add_option("-c,--config", cluster_common.config_path, "use candidate similarities from the workbench");
  cluster->add_option("--split", cluster_split, "split to use with --config");
  cluster->add_option("--method", method, "agglomerative or threshold")
      ->check(CLI::IsMember({"agglomerative", "threshold"}));
  cluster->add_option("--tau", tau, "agglomerative stop threshold");
  cluster->add_option("--linkage", linkage, "average, single or complete")
      ->check(CLI::IsMember({"average", "single", "complete"}));
  cluster->add_option("--threshold", threshold, "similarity threshold for --method threshold");
  cluster->add_option("-o,--out", cluster_out, "output cluster file (default stdout)");

  // capability-test
  auto* cap = app.add_subcommand("capability-test", "per-category pass rates");
  std::string cases_path, cap_system;
  cap->add_option("--cases", cases_path, "case JSONL")->required()->check(CLI::ExistingFile);
  cap->add_option("--system", cap_system, "system cluster file")->required()->check(CLI::ExistingFile);

  // histogram
  auto* hist = app.add_subcommand("histogram", "similarity histogram by gold label (CSV)");
  Common hist_common;
  std::string hist_pairs, hist_out;
  std::optional<std::string> hist_split;
  double bin_width = 0.05;
  hist->add_option("--pairs", hist_pairs, "labeled pair JSONL")->check(CLI::ExistingFile);
  hist->add_option("-c,--config", hist_common.config_path, "use resolved pairs from the workbench");
  hist->add_option("--split", hist_split, "restrict to one split with --config");
  hist->add_option("--bin-width", bin_width);
  hist->add_option("-o,--out", hist_out, "output CSV (default stdout)");

  // export
  auto* exp = app.add_subcommand("export", "export clusters in cluster-file format");
  add_common(exp, common);
  std::optional<std::string> export_split;
  std::string export_out;
  bool export_difficult = false;
  exp->add_option("--split", export_split, "train, dev or test")->check(CLI::IsMember({"train", "dev", "test"}));
  exp->add_option("-o,--out", export_out, "output file (default stdout)");
  exp->add_flag("--difficult", export_difficult, "export pairs flagged difficult instead");

  CLI11_PARSE(app, argc, argv);

  try {
    auto now = now_utc();

    if (*ingest) {
      auto cfg = resolve_config(common);
      auto bench = open_workbench(cfg);
      json out = json::object();
      bench->write([&](AnnotationEngine& e) {
        if (!pairs_path.empty()) {
          auto in = open_file(pairs_path);
          auto r = ingest_pairs(e, in, now);
          report_errors(r.errors, pairs_path);
          out["pairs"] = to_json(r);
        }
        if (!mentions_path.empty()) {
          auto in = open_file(mentions_path);
          auto r = ingest_mentions(e, in, now);
          report_errors(r.errors, mentions_path);
          out["mentions"] = to_json(r);
        }
        if (!embeddings_path.empty()) {
          auto in = open_file(embeddings_path);
          auto r = ingest_embeddings(e, in, now);
          report_errors(r.errors, embeddings_path);
          out["embeddings"] = to_json(r);
        }
        if (stub) {
          out["stub_embeddings"] = to_json(ingest_stub_embeddings(e, stub_dim.value_or(cfg.stub_dim),
                                                                 cfg.queue.sampling_seed, now));
        }
        if (check_match) {
          auto& matches = out["matches"] = json::array();
          for (const auto& [id, p] : e.corpus().pairs()) {
            json m{{"pair_id", id}};
            try {
              auto r = match_documents(p.news, p.science, cfg.match);
              m["matched"] = r.matched;
              m["doi_exact"] = r.score.doi_exact;
              m["author_overlap"] = r.score.author_overlap;
              m["date_gap_days"] = r.score.date_gap_days ? json(*r.score.date_gap_days) : json(nullptr);
            } catch (const Error& err) {
              m["error"] = err.what();
            }
            matches.push_back(std::move(m));
          }
        }
      });
      out["corpus"] = bench->read([](const AnnotationEngine& e) { return to_json(validate_corpus(e.corpus())); });
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (*gen) {
      auto cfg = resolve_config(common);
      auto bench = open_workbench(cfg);
      json out = json::object();
      bench->write([&](AnnotationEngine& e) {
        std::vector<std::string> ids = gen_ids;
        if (ids.empty()) {
          for (const auto& [id, p] : e.corpus().pairs()) ids.push_back(id);
        }
        for (const auto& id : ids) {
          auto batch = cdcr::generate_candidates(e.corpus(), id, e.keys_for(id));
          for (const auto& w : batch.warnings) std::cerr << "warning: " << w << "\n";
          out[id] = e.generate_candidates(id, now);
        }
      });
      if (!audit_path.empty()) {
        with_output(audit_path, [&](std::ostream& os) {
          bench->read([&](const AnnotationEngine& e) {
            std::vector<CandidatePair> all;
            for (const auto& [k, ps] : e.pairs()) all.push_back(ps.pair);
            std::sort(all.begin(), all.end(), [&](const CandidatePair& a, const CandidatePair& b) {
              return e.pair(a.key).queue_pos < e.pair(b.key).queue_pos;
            });
            for (const auto& c : all) os << ranked_pair_record(e.corpus(), c).dump() << "\n";
            return 0;
          });
        });
      }
      std::cout << json{{"new_pairs", out}}.dump(2) << "\n";
      return 0;
    }

    if (*serve) {
      auto cfg = resolve_config(common);
      if (host) cfg.host = *host;
      if (port) cfg.port = *port;

      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);

      auto bench = open_workbench(cfg);
      httplib::Server server;
      Service service(*bench);
      service.mount(server);
      if (!server.bind_to_port(cfg.host, cfg.port)) {
        throw Error(ErrorCode::storage, "cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
      }
      std::thread stopper([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
      });
      std::cerr << "listening on http://" << cfg.host << ":" << cfg.port << "\n";
      server.listen_after_bind();
      bench->snapshot();
      stopper.join();
      return 0;
    }

    if (*kappa) {
      auto cfg = resolve_config(common);
      auto bench = open_workbench(cfg);
      auto report = bench->read([](const AnnotationEngine& e) { return agreement_report(e); });
      if (!kappa_json) std::cout << format_table(report) << "\n";
      std::cout << to_json(report).dump() << "\n";
      return 0;
    }

    if (*score_cmd) {
      auto gold = read_cluster_file(gold_path);
      auto system = read_cluster_file(system_path);
      report_errors(gold.errors, gold_path);
      report_errors(system.errors, system_path);
      for (const char* m : {"muc", "b3"}) {
        if (metric != "all" && metric != m) continue;
        auto r = score(parse_metric(m), gold.clustering, system.clustering, !keep_singletons);
        std::cout << to_json(r).dump() << "\n";
      }
      return 0;
    }

    if (*sweep) {
      std::vector<ScoredPair> dev;
      if (!sweep_pairs.empty()) {
        dev = read_pairs(sweep_pairs);
      } else if (!sweep_common.config_path.empty()) {
        auto bench = open_workbench(resolve_config(sweep_common));
        dev = bench->read([&](const AnnotationEngine& e) { return labeled_pairs(e, sweep_split); });
      } else {
        throw Error(ErrorCode::validation, "sweep-threshold needs --pairs or --config");
      }
      auto r = sweep_threshold(dev, t_min, t_max, step);
      json curve = json::array();
      for (const auto& p : r.curve) curve.push_back({{"threshold", p.threshold}, {"accuracy", p.accuracy}});
      std::cout << json{{"best_threshold", r.best_threshold},
                        {"best_accuracy", r.best_accuracy},
                        {"evaluated", r.curve.size()},
                        {"pairs", dev.size()},
                        {"curve", curve}}
                       .dump()
                << "\n";
      return 0;
    }

    if (*cluster) {
      Clustering result;
      if (!scores_path.empty()) {
        auto loaded = load_external_scores(scores_path);
        report_errors(loaded.errors, scores_path);
        if (method == "agglomerative") {
          result = agglomerative_cluster(loaded.matrix, tau, parse_linkage(linkage));
        } else {
          std::vector<PairKey> positives;
          const auto& m = loaded.matrix;
          for (std::size_t i = 0; i < m.size(); ++i) {
            for (std::size_t j = i + 1; j < m.size(); ++j) {
              if (m.at(i, j) >= threshold) positives.emplace_back(m.ids()[i], m.ids()[j]);
            }
          }
          result = transitive_inference(positives, m.ids());
        }
      } else if (!cluster_common.config_path.empty()) {
        if (method != "threshold") throw Error(ErrorCode::validation, "--config supports --method threshold only");
        auto bench = open_workbench(resolve_config(cluster_common));
        result = bench->read([&](const AnnotationEngine& e) {
          std::vector<ScoredPair> pairs;
          std::vector<std::string> universe;
          for (const auto& [id, p] : e.corpus().pairs()) {
            if (p.split != cluster_split) continue;
            for (const auto* doc : {&p.news, &p.science}) {
              for (const auto* m : e.corpus().active_mentions(doc->doc_id)) universe.push_back(m->mention_id);
            }
            for (const auto& k : e.keys_for(id)) pairs.push_back({k, e.pair(k).pair.similarity, std::nullopt});
          }
          auto labels = threshold_classify(pairs, threshold);
          std::vector<PairKey> positives;
          for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (labels[i]) positives.push_back(pairs[i].key);
          }
          return transitive_inference(positives, universe);
        });
      } else {
        throw Error(ErrorCode::validation, "cluster-scores needs --scores or --config");
      }
      with_output(cluster_out, [&](std::ostream& os) { write_cluster_file(os, cluster_records(result)); });
      return 0;
    }

    if (*cap) {
      auto in = open_file(cases_path);
      auto cases = parse_capability_cases(in);
      report_errors(cases.errors, cases_path);
      auto system = read_cluster_file(cap_system);
      report_errors(system.errors, cap_system);
      predict_from_clusters(cases.cases, system.clustering);
      std::size_t total = 0;
      for (const auto& cell : capability_report(cases.cases)) {
        total += cell.total;
        std::cout << to_json(cell).dump() << "\n";
      }
      std::cerr << "cases: " << total << "\n";
      return 0;
    }

    if (*hist) {
      std::vector<ScoredPair> pairs;
      if (!hist_pairs.empty()) {
        pairs = read_pairs(hist_pairs);
      } else if (!hist_common.config_path.empty()) {
        auto bench = open_workbench(resolve_config(hist_common));
        pairs = bench->read([&](const AnnotationEngine& e) { return labeled_pairs(e, hist_split); });
      } else {
        throw Error(ErrorCode::validation, "histogram needs --pairs or --config");
      }
      std::vector<LabeledSimilarity> labeled;
      for (const auto& p : pairs) {
        if (p.similarity && p.coreferent) labeled.push_back({*p.similarity, *p.coreferent});
      }
      auto bins = similarity_histogram(labeled, bin_width);
      with_output(hist_out, [&](std::ostream& os) { write_histogram_csv(os, bins); });
      return 0;
    }

    if (*exp) {
      auto bench = open_workbench(resolve_config(common));
      with_output(export_out, [&](std::ostream& os) {
        if (export_difficult) {
          for (const auto& l : bench->read([](const AnnotationEngine& e) { return e.difficult_export(); })) {
            os << l.dump() << "\n";
          }
        } else {
          auto records =
              bench->read([&](const AnnotationEngine& e) { return export_cluster_records(e.corpus(), export_split); });
          write_cluster_file(os, records);
        }
      });
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
