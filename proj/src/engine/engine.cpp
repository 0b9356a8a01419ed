#include "engine/engine.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

namespace sertier {

void Engine::load_key(const Key& key, int64_t value) {
  std::unique_lock<std::shared_mutex> lock(map_mu_);
  auto [it, inserted] = keys_.try_emplace(key, std::make_unique<KeyState>());
  if (!inserted) throw Error("key loaded twice: " + key.relation + "/" + std::to_string(key.id));
  it->second->chain.push_back({0, value, 0, 0});
}

bool Engine::has_key(const Key& key) const {
  std::shared_lock<std::shared_mutex> lock(map_mu_);
  return keys_.count(key) > 0;
}

Engine::KeyState* Engine::find_key(const Key& key) const {
  std::shared_lock<std::shared_mutex> lock(map_mu_);
  auto it = keys_.find(key);
  if (it == keys_.end()) throw KeyNotFound(key);
  return it->second.get();
}

Engine::Txn* Engine::begin(uint64_t txn_id, IsolationLevel level) {
  uint64_t snapshot = 0;
  {
    // Snapshots are taken under the commit guard so a transaction never
    // observes a half-installed write set.
    std::lock_guard<std::mutex> commit_lock(commit_mu_);
    snapshot = clock_.tick();
  }
  auto txn = std::make_unique<Txn>();
  txn->id = txn_id;
  txn->level = level;
  txn->snapshot_seq = snapshot;
  Txn* out = txn.get();
  std::lock_guard<std::mutex> lock(txn_mu_);
  txns_.emplace(txn_id, std::move(txn));
  return out;
}

ReadResult Engine::read(Txn& txn, const Key& key) {
  if (!txn.active) throw Error("read on finished transaction");
  auto ws = txn.write_set.find(key);
  if (ws != txn.write_set.end()) {
    return {ws->second, txn.write_base.at(key) + 1, true};
  }

  KeyState* ks = find_key(key);
  std::lock_guard<std::mutex> lock(ks->mu);
  const VersionEntry* entry = nullptr;
  if (txn.level == IsolationLevel::RC) {
    entry = &ks->chain.back();
  } else {
    for (auto it = ks->chain.rbegin(); it != ks->chain.rend(); ++it) {
      if (it->commit_seq <= txn.snapshot_seq) {
        entry = &*it;
        break;
      }
    }
    if (!entry) throw Error("no version visible at snapshot");  // unreachable: version 0 has seq 0
  }
  txn.read_set.try_emplace(key, entry->version);
  return {entry->value, entry->version, false};
}

bool Engine::acquire_write_lock(Txn& txn, KeyState& ks) {
  std::unique_lock<std::mutex> lock(ks.mu);
  if (ks.write_holder == txn.id) return true;
  if (ks.write_holder == 0 && ks.wait_queue.empty()) {
    ks.write_holder = txn.id;
    return true;
  }
  ks.wait_queue.push_back(txn.id);
  uint64_t waited = 0;
  while (true) {
    if (ks.write_holder == 0 && ks.wait_queue.front() == txn.id) {
      ks.wait_queue.pop_front();
      ks.write_holder = txn.id;
      return true;
    }
    if (waited >= write_wait_budget_) {
      ks.wait_queue.erase(std::find(ks.wait_queue.begin(), ks.wait_queue.end(), txn.id));
      ks.cv.notify_all();
      return false;
    }
    clock_.tick();
    ++waited;
    ks.cv.wait_for(lock, std::chrono::microseconds(200));
  }
}

WriteResult Engine::write(Txn& txn, const Key& key, int64_t value) {
  if (!txn.active) throw Error("write on finished transaction");
  KeyState* ks = find_key(key);

  if (txn.write_set.count(key)) {
    txn.write_set[key] = value;
    return {WriteStatus::Ok, txn.write_base.at(key)};
  }

  if (!acquire_write_lock(txn, *ks)) return {WriteStatus::Timeout, 0};

  Version latest;
  uint64_t latest_seq;
  {
    std::lock_guard<std::mutex> lock(ks->mu);
    latest = ks->chain.back().version;
    latest_seq = ks->chain.back().commit_seq;
  }
  if (txn.level != IsolationLevel::RC && latest_seq > txn.snapshot_seq) {
    // First-committer-wins: a conflicting write committed after our snapshot.
    std::lock_guard<std::mutex> lock(ks->mu);
    ks->write_holder = 0;
    ks->cv.notify_all();
    return {WriteStatus::Conflict, 0};
  }
  txn.write_set.emplace(key, value);
  txn.write_base.emplace(key, latest);
  return {WriteStatus::Ok, latest};
}

void Engine::release_write_locks(Txn& txn) {
  for (const auto& [key, value] : txn.write_set) {
    KeyState* ks = find_key(key);
    std::lock_guard<std::mutex> lock(ks->mu);
    if (ks->write_holder == txn.id) {
      ks->write_holder = 0;
      ks->cv.notify_all();
    }
  }
}

bool Engine::certify_ser(const Txn& txn, const std::map<Key, Version>& prospective) const {
  // Nodes: retained committed SER transactions plus the committing one. The
  // committing transaction aborts if it would close a cycle.
  std::map<Key, std::map<Version, uint64_t>> installer;
  std::vector<std::tuple<uint64_t, Key, Version>> reads;

  for (const CertRecord& rec : cert_records_) {
    for (const auto& [k, v] : rec.writes) installer[k][v] = rec.txn_id;
    for (const auto& [k, v] : rec.reads) reads.push_back({rec.txn_id, k, v});
  }
  for (const auto& [k, v] : prospective) installer[k][v] = txn.id;
  for (const auto& [k, v] : txn.read_set) reads.push_back({txn.id, k, v});

  std::map<uint64_t, std::set<uint64_t>> adj;
  auto add_edge = [&](uint64_t from, uint64_t to) {
    if (from != to) adj[from].insert(to);
  };
  for (const auto& [k, versions] : installer) {
    for (auto it = versions.begin(); it != versions.end(); ++it) {
      auto next = std::next(it);
      if (next != versions.end() && next->first == it->first + 1) add_edge(it->second, next->second);
    }
  }
  for (const auto& [reader, k, v] : reads) {
    auto ki = installer.find(k);
    if (ki == installer.end()) continue;
    auto vi = ki->second.find(v);
    if (vi != ki->second.end()) add_edge(vi->second, reader);  // wr
    auto wi = ki->second.find(v + 1);
    if (wi != ki->second.end()) add_edge(reader, wi->second);  // rw
  }

  // Cycle through txn.id: DFS from its successors back to it.
  std::set<uint64_t> visited;
  std::vector<uint64_t> stack(adj[txn.id].begin(), adj[txn.id].end());
  while (!stack.empty()) {
    uint64_t node = stack.back();
    stack.pop_back();
    if (node == txn.id) return false;
    if (!visited.insert(node).second) continue;
    auto it = adj.find(node);
    if (it != adj.end()) stack.insert(stack.end(), it->second.begin(), it->second.end());
  }
  return true;
}

void Engine::prune_cert_records() {
  // Read-write edges can point backwards in commit order, so a dependency
  // path may route through transactions that no longer overlap anything
  // live. A prefix of the records (they are kept in commit order) can only
  // be dropped once every snapshot outside the prefix is newer than the
  // prefix's newest commit; then no edge can enter the prefix again.
  uint64_t active_min = UINT64_MAX;
  {
    std::lock_guard<std::mutex> lock(txn_mu_);
    for (const auto& [id, t] : txns_) {
      if (t->active) active_min = std::min(active_min, t->snapshot_seq);
    }
  }
  size_t n = cert_records_.size();
  std::vector<uint64_t> suffix_min(n + 1, active_min);
  for (size_t i = n; i-- > 0;)
    suffix_min[i] = std::min(suffix_min[i + 1], cert_records_[i].snapshot_seq);
  size_t cut = 0;
  for (size_t k = n; k >= 1; --k) {
    if (cert_records_[k - 1].commit_seq < suffix_min[k]) {
      cut = k;
      break;
    }
  }
  if (cut > 0)
    cert_records_.erase(cert_records_.begin(),
                        cert_records_.begin() + static_cast<long>(cut));
}

CommitResult Engine::commit(Txn& txn) {
  if (!txn.active) throw Error("commit on finished transaction");
  std::lock_guard<std::mutex> commit_lock(commit_mu_);

  std::map<Key, Version> prospective;
  for (const auto& [key, value] : txn.write_set) {
    KeyState* ks = find_key(key);
    std::lock_guard<std::mutex> lock(ks->mu);
    prospective[key] = ks->chain.back().version + 1;
  }

  if (txn.level == IsolationLevel::SER && !certify_ser(txn, prospective)) {
    txn.active = false;
    release_write_locks(txn);
    return {false, 0, {}};
  }

  CommitResult result;
  result.committed = true;
  result.commit_seq = clock_.tick();
  for (const auto& [key, value] : txn.write_set) {
    KeyState* ks = find_key(key);
    std::lock_guard<std::mutex> lock(ks->mu);
    Version v = ks->chain.back().version + 1;
    ks->chain.push_back({v, value, txn.id, result.commit_seq});
    result.installed.push_back({key, v});
  }
  txn.active = false;

  if (txn.level == IsolationLevel::SER) {
    CertRecord rec;
    rec.txn_id = txn.id;
    rec.snapshot_seq = txn.snapshot_seq;
    rec.commit_seq = result.commit_seq;
    rec.reads = txn.read_set;
    for (const auto& [k, v] : result.installed) rec.writes[k] = v;
    cert_records_.push_back(std::move(rec));
    prune_cert_records();
  }

  release_write_locks(txn);
  return result;
}

void Engine::rollback(Txn& txn) {
  if (!txn.active) return;
  txn.active = false;
  release_write_locks(txn);
}

void Engine::release(uint64_t txn_id) {
  std::lock_guard<std::mutex> lock(txn_mu_);
  txns_.erase(txn_id);
}

Version Engine::latest_version(const Key& key) const {
  KeyState* ks = find_key(key);
  std::lock_guard<std::mutex> lock(ks->mu);
  return ks->chain.back().version;
}

int64_t Engine::latest_value(const Key& key) const {
  KeyState* ks = find_key(key);
  std::lock_guard<std::mutex> lock(ks->mu);
  return ks->chain.back().value;
}

std::string Engine::dump_chains(std::vector<Key> keys) const {
  if (keys.empty()) {
    std::shared_lock<std::shared_mutex> lock(map_mu_);
    for (const auto& [k, state] : keys_) keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());
  std::ostringstream out;
  for (const Key& key : keys) {
    KeyState* ks = find_key(key);
    std::lock_guard<std::mutex> lock(ks->mu);
    out << key.relation << "/" << key.id << ":";
    for (const VersionEntry& e : ks->chain) {
      out << " v" << e.version << "=" << e.value << "@" << e.commit_seq;
      if (e.installer_txn != 0) out << "(txn " << e.installer_txn << ")";
    }
    out << "\n";
  }
  return out.str();
}

void Engine::check_chain_invariants() const {
  std::shared_lock<std::shared_mutex> lock(map_mu_);
  for (const auto& [key, ks] : keys_) {
    std::lock_guard<std::mutex> kl(ks->mu);
    uint64_t prev_seq = 0;
    for (size_t i = 0; i < ks->chain.size(); ++i) {
      if (ks->chain[i].version != i)
        throw Error("version chain not consecutive for " + key.relation + "/" +
                    std::to_string(key.id));
      if (i > 0 && ks->chain[i].commit_seq <= prev_seq)
        throw Error("commit_seq not increasing for " + key.relation + "/" + std::to_string(key.id));
      prev_seq = ks->chain[i].commit_seq;
    }
  }
}

}  // namespace sertier
