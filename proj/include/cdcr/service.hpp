#pragma once

// HTTP surface of the workbench. Bodies are JSON; the cluster export is
// newline-delimited JSON in the evaluation cluster-file format.

#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cdcr/evaluation.hpp"
#include "cdcr/workbench.hpp"

namespace cdcr {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_pair:
    case ErrorCode::unknown_mention:
    case ErrorCode::unknown_annotator:
      return 404;
    case ErrorCode::stale_claim:
    case ErrorCode::duplicate_pair:
    case ErrorCode::conflict:
    case ErrorCode::cap_reached:
      return 409;
    case ErrorCode::storage:
      return 503;
    case ErrorCode::insufficient_data:
    case ErrorCode::undefined_statistic:
      return 422;
    default:
      return 400;
  }
}

inline Verdict parse_verdict(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>() ? Verdict::yes : Verdict::no;
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "yes") return Verdict::yes;
    if (s == "no") return Verdict::no;
  }
  throw Error(ErrorCode::validation, "verdict must be \"yes\" or \"no\"");
}

inline nlohmann::json mention_view(const Mention& m) {
  return {{"mention_id", m.mention_id}, {"doc_id", m.doc_id}, {"start_char", m.range.start},
          {"end_char", m.range.end},    {"surface", m.surface}};
}

inline std::string task_question(const std::string& x, const std::string& y) {
  return "Are " + x + " and " + y + " mentions of the same entity?";
}

// Everything the annotation screen needs for one pair: both summaries, the
// pair's own spans, and the spans already co-clustered with either of them in
// the two documents.
inline nlohmann::json task_view(const AnnotationEngine& engine, const PairKey& key, const AnnotatorId& annotator) {
  const auto& corpus = engine.corpus();
  const auto& ps = engine.pair(key);
  const auto& dp = corpus.pair(ps.pair.pair_id);
  const auto& a = corpus.mention(key.first());
  const auto& b = corpus.mention(key.second());
  const Mention& news = a.doc_id == dp.news.doc_id ? a : b;
  const Mention& sci = a.doc_id == dp.news.doc_id ? b : a;

  nlohmann::json co = nlohmann::json::array();
  std::set<MentionId> shown;
  for (const auto* m : {&news, &sci}) {
    for (const auto& id : corpus.clusters().members_with(m->mention_id)) {
      if (key.contains(id) || !shown.insert(id).second) continue;
      const auto& other = corpus.mention(id);
      if (other.doc_id != dp.news.doc_id && other.doc_id != dp.science.doc_id) continue;
      auto v = mention_view(other);
      v["linked_to"] = m->mention_id;
      co.push_back(std::move(v));
    }
  }
  auto doc_view = [](const Document& d) {
    return nlohmann::json{{"doc_id", d.doc_id}, {"kind", d.kind}, {"title", d.title}, {"summary_text", d.summary_text}};
  };
  nlohmann::json j{{"pair_key", key.str()},
                   {"pair_id", dp.pair_id},
                   {"iaa", ps.pair.iaa},
                   {"difficult", ps.pair.difficult},
                   {"question", task_question(news.surface, sci.surface)},
                   {"news", doc_view(dp.news)},
                   {"science", doc_view(dp.science)},
                   {"mentions", {mention_view(news), mention_view(sci)}},
                   {"co_clustered", co},
                   {"queue_position", ps.queue_pos}};
  j["similarity"] = ps.pair.similarity ? nlohmann::json(*ps.pair.similarity) : nlohmann::json(nullptr);
  if (auto it = ps.claims.find(annotator); it != ps.claims.end()) j["lease_expires"] = format_timestamp(it->second);
  return j;
}

class Service {
 public:
  using Clock = std::function<Timestamp()>;

  explicit Service(Workbench& bench, Clock clock = now_utc) : bench_(bench), clock_(std::move(clock)) {}

  void mount(httplib::Server& server) {
    server.Get("/api/task", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto annotator = req.get_param_value("annotator");
        if (annotator.empty()) throw Error(ErrorCode::validation, "annotator parameter is required");
        auto now = clock_();
        auto body = bench_.write([&](AnnotationEngine& e) -> std::optional<nlohmann::json> {
          auto task = e.next_task(annotator, now);
          if (!task) return std::nullopt;
          return task_view(e, task->key, annotator);
        });
        if (!body) {
          res.status = 204;
          return;
        }
        reply(res, 200, *body);
      });
    });

    server.Post("/api/annotator", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto j = body_of(req);
        auto id = j.at("annotator").get<std::string>();
        bench_.write([&](AnnotationEngine& e) { e.register_annotator(id, clock_()); });
        reply(res, 200, {{"annotator", id}});
      });
    });

    server.Post("/api/annotation", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto j = body_of(req);
        auto annotator = j.at("annotator").get<std::string>();
        auto key = PairKey::parse(j.at("pair_key").get<std::string>());
        auto verdict = parse_verdict(j.at("verdict"));
        bool difficult = j.value("difficult", false);
        std::optional<std::string> token;
        if (j.contains("idempotency_token") && !j["idempotency_token"].is_null()) {
          token = j["idempotency_token"].get<std::string>();
        }
        std::optional<SpanEdit> edit;
        if (j.contains("span_edit") && !j["span_edit"].is_null()) {
          const auto& s = j["span_edit"];
          edit = SpanEdit{s.at("mention_id").get<std::string>(),
                          CharRange{s.at("start_char").get<std::size_t>(), s.at("end_char").get<std::size_t>()}};
        }
        auto delta = bench_.write([&](AnnotationEngine& e) {
          return e.submit_annotation(annotator, key, verdict, difficult, clock_(), token, edit);
        });
        reply(res, 200, to_json(delta));
      });
    });

    server.Post("/api/pair", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto j = body_of(req);
        auto annotator = j.at("annotator").get<std::string>();
        auto shown = PairKey::parse(j.at("shown_pair_key").get<std::string>());
        auto doc = j.at("doc_id").get<std::string>();
        CharRange range{j.at("start_char").get<std::size_t>(), j.at("end_char").get<std::size_t>()};
        std::optional<MentionId> keep;
        if (j.contains("keep_mention_id")) keep = j["keep_mention_id"].get<std::string>();
        auto body = bench_.write([&](AnnotationEngine& e) {
          auto c = e.propose_pair(annotator, shown, doc, range, clock_(), keep);
          return task_view(e, c.key, annotator);
        });
        reply(res, 201, body);
      });
    });

    server.Post("/api/span", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto j = body_of(req);
        auto annotator = j.at("annotator").get<std::string>();
        auto mention = j.at("mention_id").get<std::string>();
        CharRange range{j.at("start_char").get<std::size_t>(), j.at("end_char").get<std::size_t>()};
        auto m = bench_.write([&](AnnotationEngine& e) { return e.adjust_span(annotator, mention, range, clock_()); });
        reply(res, 200, mention_view(m));
      });
    });

    server.Get("/api/stats/agreement", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        auto report = bench_.read([](const AnnotationEngine& e) { return agreement_report(e); });
        reply(res, 200, to_json(report));
      });
    });

    server.Get("/api/stats/corpus", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        auto report = bench_.read([](const AnnotationEngine& e) { return validate_corpus(e.corpus()); });
        reply(res, 200, to_json(report));
      });
    });

    server.Get("/api/export/clusters", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::optional<std::string> split;
        if (req.has_param("split")) {
          split = req.get_param_value("split");
          if (*split != "train" && *split != "dev" && *split != "test") {
            throw Error(ErrorCode::validation, "split must be train, dev or test");
          }
        }
        auto records = bench_.read([&](const AnnotationEngine& e) { return export_cluster_records(e.corpus(), split); });
        std::ostringstream out;
        write_cluster_file(out, records);
        res.status = 200;
        res.set_content(out.str(), "application/x-ndjson");
      });
    });

    server.Get("/api/export/difficult", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        auto lines = bench_.read([](const AnnotationEngine& e) { return e.difficult_export(); });
        std::string out;
        for (const auto& l : lines) out += l.dump() + "\n";
        res.status = 200;
        res.set_content(out, "application/x-ndjson");
      });
    });
  }

 private:
  static nlohmann::json body_of(const httplib::Request& req) {
    try {
      auto j = nlohmann::json::parse(req.body);
      if (!j.is_object()) throw Error(ErrorCode::schema, "request body must be an object");
      return j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::format, std::string("malformed request body: ") + e.what());
    }
  }

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      reply(res, http_status(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
    } catch (const nlohmann::json::exception& e) {
      reply(res, 400, {{"error", "schema"}, {"message", e.what()}});
    }
  }

  Workbench& bench_;
  Clock clock_;
};

}  // namespace cdcr
