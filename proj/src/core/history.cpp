#include "core/history.hpp"

#include <fstream>
#include <json.hpp>

namespace sertier {

namespace {

void append_json_string(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

}  // namespace

std::string serialize_history_record(const HistoryRecord& rec) {
  std::string out;
  out.reserve(128 + rec.ops.size() * 64);
  out += "{\"txn_id\":";
  out += std::to_string(rec.txn_id);
  out += ",\"template\":";
  append_json_string(out, rec.template_name);
  out += ",\"level\":\"";
  out += to_string(rec.level);
  out += "\",\"begin_seq\":";
  out += std::to_string(rec.begin_seq);
  out += ",\"end_seq\":";
  out += std::to_string(rec.end_seq);
  out += ",\"outcome\":\"";
  out += to_string(rec.outcome);
  out += "\",\"abort_reason\":";
  if (rec.abort_reason) {
    append_json_string(out, *rec.abort_reason);
  } else {
    out += "null";
  }
  out += ",\"ops\":[";
  bool first = true;
  for (const HistoryOp& op : rec.ops) {
    if (!first) out += ',';
    first = false;
    out += "{\"mode\":\"";
    out += to_string(op.mode);
    out += "\",\"relation\":";
    append_json_string(out, op.key.relation);
    out += ",\"id\":";
    out += std::to_string(op.key.id);
    out += ",\"version\":";
    out += std::to_string(op.version);
    out += '}';
  }
  out += "]}";
  return out;
}

namespace {

using ojson = nlohmann::ordered_json;

const ojson& require_field(const ojson& obj, const char* name, size_t pos) {
  auto it = obj.find(name);
  if (it == obj.end()) throw MalformedRecord(pos, std::string("missing field '") + name + "'");
  return *it;
}

uint64_t require_uint(const ojson& obj, const char* name, size_t pos) {
  const ojson& v = require_field(obj, name, pos);
  if (!v.is_number_unsigned()) throw MalformedRecord(pos, std::string("field '") + name + "' is not an unsigned integer");
  return v.get<uint64_t>();
}

std::string require_string(const ojson& obj, const char* name, size_t pos) {
  const ojson& v = require_field(obj, name, pos);
  if (!v.is_string()) throw MalformedRecord(pos, std::string("field '") + name + "' is not a string");
  return v.get<std::string>();
}

}  // namespace

HistoryRecord parse_history_record(const std::string& line) {
  ojson obj;
  try {
    obj = ojson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedRecord(e.byte, e.what());
  }
  if (!obj.is_object()) throw MalformedRecord(0, "line is not a JSON object");

  static const std::vector<std::string> kFields = {"txn_id", "template", "level",        "begin_seq",
                                                   "end_seq", "outcome",  "abort_reason", "ops"};
  if (obj.size() != kFields.size()) throw MalformedRecord(0, "record must have exactly 8 fields");
  size_t idx = 0;
  for (auto it = obj.begin(); it != obj.end(); ++it, ++idx) {
    if (it.key() != kFields[idx])
      throw MalformedRecord(idx, "unexpected field '" + it.key() + "', expected '" + kFields[idx] + "'");
  }

  HistoryRecord rec;
  rec.txn_id = require_uint(obj, "txn_id", 0);
  rec.template_name = require_string(obj, "template", 1);

  const std::string level = require_string(obj, "level", 2);
  auto lvl = isolation_from_string(level);
  if (!lvl || (level != "RC" && level != "SI" && level != "SER"))
    throw MalformedRecord(2, "unknown isolation level '" + level + "'");
  rec.level = *lvl;

  rec.begin_seq = require_uint(obj, "begin_seq", 3);
  rec.end_seq = require_uint(obj, "end_seq", 4);
  if (rec.begin_seq >= rec.end_seq) throw MalformedRecord(4, "begin_seq must be < end_seq");

  const std::string outcome = require_string(obj, "outcome", 5);
  if (outcome == "Committed") {
    rec.outcome = TxnOutcome::Committed;
  } else if (outcome == "Aborted") {
    rec.outcome = TxnOutcome::Aborted;
  } else {
    throw MalformedRecord(5, "unknown outcome '" + outcome + "'");
  }

  const ojson& reason = require_field(obj, "abort_reason", 6);
  if (reason.is_null()) {
    rec.abort_reason = std::nullopt;
  } else if (reason.is_string()) {
    rec.abort_reason = reason.get<std::string>();
    if (!abort_reason::is_known(*rec.abort_reason))
      throw MalformedRecord(6, "unknown abort_reason '" + *rec.abort_reason + "'");
  } else {
    throw MalformedRecord(6, "abort_reason must be a string or null");
  }
  if (rec.outcome == TxnOutcome::Committed && rec.abort_reason)
    throw MalformedRecord(6, "committed record carries an abort_reason");
  if (rec.outcome == TxnOutcome::Aborted && !rec.abort_reason)
    throw MalformedRecord(6, "aborted record lacks an abort_reason");

  const ojson& ops = require_field(obj, "ops", 7);
  if (!ops.is_array()) throw MalformedRecord(7, "ops must be an array");
  size_t op_idx = 0;
  for (const ojson& entry : ops) {
    if (!entry.is_object() || entry.size() != 4) throw MalformedRecord(op_idx, "op must have exactly 4 fields");
    static const std::vector<std::string> kOpFields = {"mode", "relation", "id", "version"};
    size_t f = 0;
    for (auto it = entry.begin(); it != entry.end(); ++it, ++f) {
      if (it.key() != kOpFields[f])
        throw MalformedRecord(op_idx, "unexpected op field '" + it.key() + "'");
    }
    HistoryOp op;
    const std::string mode = require_string(entry, "mode", op_idx);
    if (mode == "Read") {
      op.mode = AccessMode::Read;
    } else if (mode == "Write") {
      op.mode = AccessMode::Write;
    } else {
      throw MalformedRecord(op_idx, "unknown op mode '" + mode + "'");
    }
    op.key.relation = require_string(entry, "relation", op_idx);
    op.key.id = require_uint(entry, "id", op_idx);
    op.version = require_uint(entry, "version", op_idx);
    rec.ops.push_back(std::move(op));
    ++op_idx;
  }
  return rec;
}

std::vector<HistoryRecord> read_history_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open history file: " + path);
  std::vector<HistoryRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(parse_history_record(line));
  }
  return records;
}

void write_history_file(const std::string& path, const std::vector<HistoryRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open history file for writing: " + path);
  for (const HistoryRecord& rec : records) out << serialize_history_record(rec) << '\n';
}

void HistoryLog::append(HistoryRecord rec) {
  size_t count = 0;
  {
    std::lock_guard<std::mutex> lock(mu_);
    records_.push_back(std::move(rec));
    count = records_.size();
  }
  if (hook_) hook_(count);
}

std::vector<HistoryRecord> HistoryLog::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

size_t HistoryLog::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

void HistoryLog::set_append_hook(AppendHook hook) { hook_ = std::move(hook); }

}  // namespace sertier
