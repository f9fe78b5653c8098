#pragma once

// The engine behind one writer lock, bound to its event log. Reads share the
// lock; every mutation holds it exclusively, so claiming a task is atomic.

#include <filesystem>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <utility>
#include <vector>

#include "cdcr/agreement.hpp"
#include "cdcr/annotation_engine.hpp"
#include "cdcr/event_log.hpp"

namespace cdcr {

inline AnnotationEngine replay(const std::vector<Event>& events, AnnotationEngine engine = AnnotationEngine{}) {
  for (const auto& e : events) {
    if (e.seq <= engine.last_seq()) continue;
    engine.apply(e);
  }
  return engine;
}

// Items rated by two or more annotators, for agreement statistics.
inline std::vector<RatedItem> rated_items(const AnnotationEngine& engine) {
  std::vector<RatedItem> out;
  for (const auto& [key, ps] : engine.pairs()) {
    if (ps.verdicts.size() < 2) continue;
    RatedItem item;
    for (const auto& [a, ev] : ps.verdicts) {
      item.verdicts[a] = ev.verdict;
      item.difficult = item.difficult || ev.difficult;
    }
    out.push_back(std::move(item));
  }
  return out;
}

inline AgreementReport agreement_report(const AnnotationEngine& engine) {
  std::vector<AnnotatorId> ids;
  for (const auto& [id, a] : engine.annotators()) ids.push_back(id);
  return agreement_report(rated_items(engine), ids);
}

// Loaders that route every record through the engine so it lands in the log.
inline IngestReport ingest_pairs(AnnotationEngine& engine, std::istream& in, Timestamp now) {
  IngestReport report;
  for (auto& rec : parse_document_pairs(in, now, report.errors)) {
    ++report.records;
    try {
      ++(engine.add_document_pair(std::move(rec.pair), now) == AddStatus::added ? report.added : report.unchanged);
    } catch (const Error& e) {
      report.errors.push_back({rec.line, e.code(), e.what()});
    }
  }
  return report;
}

inline IngestReport ingest_mentions(AnnotationEngine& engine, std::istream& in, Timestamp now) {
  IngestReport report;
  for (const auto& rec : parse_mentions(in, report.errors)) {
    ++report.records;
    try {
      ++(engine.add_mention(rec.doc_id, rec.range, now).second ? report.added : report.unchanged);
    } catch (const Error& e) {
      report.errors.push_back({rec.line, e.code(), e.what()});
    }
  }
  return report;
}

inline IngestReport ingest_embeddings(AnnotationEngine& engine, std::istream& in, Timestamp now) {
  IngestReport report;
  auto parsed = parse_embeddings(in);
  report.errors = std::move(parsed.errors);
  for (auto& table : parsed.tables) {
    ++report.records;
    try {
      engine.load_embedding_table(std::move(table), now);
      ++report.added;
    } catch (const Error& e) {
      report.errors.push_back({0, e.code(), e.what()});
    }
  }
  return report;
}

// Deterministic stand-in vectors for every document pair without a table.
inline IngestReport ingest_stub_embeddings(AnnotationEngine& engine, std::size_t dim, std::uint64_t seed,
                                           Timestamp now) {
  IngestReport report;
  std::vector<DocumentPair> todo;
  for (const auto& [id, p] : engine.corpus().pairs()) {
    if (!engine.corpus().embedding_table(id)) todo.push_back(p);
  }
  for (const auto& p : todo) {
    ++report.records;
    engine.load_embedding_table(stub_embed(p, dim, seed), now);
    ++report.added;
  }
  return report;
}

class Workbench {
 public:
  // Volatile workbench; events are kept in memory.
  Workbench(QueueConfig config, Timestamp now) : memory_(std::make_unique<MemoryLog>()) {
    engine_.set_sink(memory_.get());
    engine_.configure(config, now);
  }

  // Durable workbench in `dir`: restores the latest snapshot, replays the log
  // past it, then records `config` if it differs from the stored one.
  Workbench(const std::filesystem::path& dir, QueueConfig config, Timestamp now, std::size_t snapshot_every = 1000)
      : snapshot_path_(dir / "snapshot.json"), snapshot_every_(snapshot_every) {
    std::filesystem::create_directories(dir);
    file_ = std::make_unique<FileLog>(dir / "events.log");
    const auto& events = file_->recovered();
    auto snap = read_snapshot(snapshot_path_);
    if (snap && snap->value("last_seq", std::uint64_t{0}) <= file_->last_seq()) {
      engine_ = replay(events, AnnotationEngine::from_json(*snap));
    } else {
      engine_ = replay(events);
    }
    last_snapshot_seq_ = snap ? snap->value("last_seq", std::uint64_t{0}) : 0;
    engine_.set_sink(file_.get());
    engine_.configure(config, now);
  }

  template <class F>
  decltype(auto) write(F&& f) {
    std::unique_lock lock(mu_);
    struct AfterWrite {
      Workbench* self;
      ~AfterWrite() { self->maybe_snapshot(); }
    } after{this};
    return f(engine_);
  }

  template <class F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mu_);
    return f(static_cast<const AnnotationEngine&>(engine_));
  }

  // All events so far, in order.
  std::vector<Event> events() const {
    std::shared_lock lock(mu_);
    if (memory_) return memory_->events();
    return read_log(file_->path()).events;
  }

  std::uintmax_t discarded_bytes() const { return file_ ? file_->discarded_bytes() : 0; }

  void snapshot() {
    std::unique_lock lock(mu_);
    take_snapshot();
  }

 private:
  void maybe_snapshot() {
    if (!file_ || engine_.last_seq() < last_snapshot_seq_ + snapshot_every_) return;
    try {
      take_snapshot();
    } catch (const std::exception&) {
    }
  }

  void take_snapshot() {
    if (!file_) return;
    write_snapshot(snapshot_path_, engine_.to_json());
    last_snapshot_seq_ = engine_.last_seq();
  }

  mutable std::shared_mutex mu_;
  std::unique_ptr<MemoryLog> memory_;
  std::unique_ptr<FileLog> file_;
  std::filesystem::path snapshot_path_;
  std::size_t snapshot_every_ = 1000;
  std::uint64_t last_snapshot_seq_ = 0;
  AnnotationEngine engine_;
};

}  // namespace cdcr
