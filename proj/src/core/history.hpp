#pragma once

#include <cstddef>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace sertier {

// Raised by parse_history_record on any deviation from the line format.
class MalformedRecord : public Error {
 public:
  MalformedRecord(size_t position, const std::string& reason)
      : Error("malformed history record at position " + std::to_string(position) + ": " + reason),
        position_(position),
        reason_(reason) {}

  size_t position() const { return position_; }
  const std::string& reason() const { return reason_; }

 private:
  size_t position_;
  std::string reason_;
};

// One JSON object per line, field names and order fixed so golden files are
// bit-exact:
//   txn_id, template, level, begin_seq, end_seq, outcome, abort_reason, ops
// with ops entries carrying mode, relation, id, version.
std::string serialize_history_record(const HistoryRecord& rec);

HistoryRecord parse_history_record(const std::string& line);

std::vector<HistoryRecord> read_history_file(const std::string& path);
void write_history_file(const std::string& path, const std::vector<HistoryRecord>& records);

// Serialized appender shared by all sessions in a run. Keeps records in
// memory; an optional sink writes each line through as it arrives.
class HistoryLog {
 public:
  using AppendHook = std::function<void(size_t count)>;

  void append(HistoryRecord rec);
  std::vector<HistoryRecord> snapshot() const;
  size_t size() const;
  void set_append_hook(AppendHook hook);

 private:
  mutable std::mutex mu_;
  std::vector<HistoryRecord> records_;
  AppendHook hook_;
};

}  // namespace sertier
