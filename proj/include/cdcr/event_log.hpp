#pragma once

// Append-only event storage. On disk each record is one line
//   <seq>\t<crc32 of json, 8 hex digits>\t<json>\n
// A record is durable once its newline has been flushed and synced. Reading
// stops at the first record that is incomplete, fails its checksum or breaks
// the sequence; everything from there on is a torn tail and gets truncated.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include "cdcr/errors.hpp"
#include "cdcr/events.hpp"

namespace cdcr {

inline std::uint32_t crc32(const std::string& data) {
  boost::crc_32_type crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

inline std::string encode_log_record(const Event& e) {
  auto payload = event_to_json(e).dump();
  char head[48];
  std::snprintf(head, sizeof head, "%llu\t%08x\t", static_cast<unsigned long long>(e.seq), crc32(payload));
  return head + payload + "\n";
}

// Decodes one line (without its newline); nullopt when damaged.
inline std::optional<Event> decode_log_record(const std::string& line) {
  auto t1 = line.find('\t');
  if (t1 == std::string::npos) return std::nullopt;
  auto t2 = line.find('\t', t1 + 1);
  if (t2 == std::string::npos || t2 - t1 - 1 != 8) return std::nullopt;
  auto payload = line.substr(t2 + 1);
  std::uint32_t stored = 0;
  try {
    stored = static_cast<std::uint32_t>(std::stoul(line.substr(t1 + 1, 8), nullptr, 16));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (stored != crc32(payload)) return std::nullopt;
  try {
    auto e = event_from_json(nlohmann::json::parse(payload));
    if (std::to_string(e.seq) != line.substr(0, t1)) return std::nullopt;
    return e;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct LogContents {
  std::vector<Event> events;
  std::uintmax_t valid_bytes = 0;
  std::uintmax_t discarded_bytes = 0;
};

inline LogContents read_log(const std::filesystem::path& path) {
  LogContents out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (pos < data.size()) {
    auto nl = data.find('\n', pos);
    if (nl == std::string::npos) break;
    auto e = decode_log_record(data.substr(pos, nl - pos));
    std::uint64_t expected = out.events.empty() ? 1 : out.events.back().seq + 1;
    if (!e || e->seq != expected) break;
    out.events.push_back(std::move(*e));
    pos = nl + 1;
  }
  out.valid_bytes = pos;
  out.discarded_bytes = data.size() - pos;
  return out;
}

// Keeps events in memory; `fail_appends` simulates a storage fault.
class MemoryLog : public EventSink {
 public:
  void append(const Event& e) override {
    if (fail_appends) throw Error(ErrorCode::storage, "simulated storage failure");
    events_.push_back(e);
  }
  const std::vector<Event>& events() const { return events_; }
  bool fail_appends = false;

 private:
  std::vector<Event> events_;
};

class FileLog : public EventSink {
 public:
  // Opens (creating if needed) and truncates any torn tail.
  explicit FileLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    auto contents = read_log(path_);
    recovered_ = std::move(contents.events);
    discarded_ = contents.discarded_bytes;
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT, 0644);
    if (fd_ < 0) throw Error(ErrorCode::storage, "cannot open log " + path_.string());
    if (::ftruncate(fd_, static_cast<off_t>(contents.valid_bytes)) != 0 ||
        ::lseek(fd_, 0, SEEK_END) < 0) {
      ::close(fd_);
      throw Error(ErrorCode::storage, "cannot truncate log " + path_.string());
    }
    size_ = static_cast<off_t>(contents.valid_bytes);
    last_seq_ = recovered_.empty() ? 0 : recovered_.back().seq;
  }

  FileLog(const FileLog&) = delete;
  FileLog& operator=(const FileLog&) = delete;
  ~FileLog() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void append(const Event& e) override {
    if (e.seq != last_seq_ + 1) {
      throw Error(ErrorCode::storage, "log expects sequence " + std::to_string(last_seq_ + 1));
    }
    auto record = encode_log_record(e);
    std::size_t written = 0;
    while (written < record.size()) {
      auto n = ::write(fd_, record.data() + written, record.size() - written);
      if (n <= 0) {
        rollback();
        throw Error(ErrorCode::storage, "write to " + path_.string() + " failed");
      }
      written += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd_) != 0) {
      rollback();
      throw Error(ErrorCode::storage, "sync of " + path_.string() + " failed");
    }
    size_ += static_cast<off_t>(record.size());
    last_seq_ = e.seq;
  }

  // Events found when the log was opened.
  const std::vector<Event>& recovered() const { return recovered_; }
  std::uintmax_t discarded_bytes() const { return discarded_; }
  std::uint64_t last_seq() const { return last_seq_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  void rollback() {
    if (::ftruncate(fd_, size_) == 0) ::lseek(fd_, 0, SEEK_END);
  }

  std::filesystem::path path_;
  int fd_ = -1;
  off_t size_ = 0;
  std::uint64_t last_seq_ = 0;
  std::vector<Event> recovered_;
  std::uintmax_t discarded_ = 0;
};

// Snapshot files hold {"crc": ..., "state": ...}; written to a temporary name
// and renamed into place.
inline void write_snapshot(const std::filesystem::path& path, const nlohmann::json& state) {
  auto body = state.dump();
  nlohmann::json doc{{"crc", crc32(body)}, {"state", state}};
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump();
    out.flush();
    if (!out) throw Error(ErrorCode::storage, "cannot write snapshot " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::optional<nlohmann::json> read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    auto doc = nlohmann::json::parse(in);
    auto state = doc.at("state");
    if (doc.at("crc").get<std::uint32_t>() != crc32(state.dump())) return std::nullopt;
    return state;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace cdcr
