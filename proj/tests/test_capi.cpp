#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <string>

#include "sertier.h"

namespace {

std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  sertier_string_free(s);
  return out;
}

const char* kBalance =
    R"({"name":"balance","arity":1,"steps":[{"mode":"Read","relation":"checking","key_param":0},
        {"mode":"Read","relation":"savings","key_param":0}]})";
const char* kDeposit =
    R"({"name":"deposit","arity":1,"steps":[{"mode":"Read","relation":"checking","key_param":0},
        {"mode":"Write","relation":"checking","key_param":0}]})";

}  // namespace

TEST_CASE("coordinator lifecycle through the C surface") {
  sertier_coord* coord = nullptr;
  REQUIRE(sertier_coord_create(R"({"initial_level":"rc"})", &coord) == SERTIER_OK);

  int32_t id = -1;
  CHECK(sertier_register(coord, kBalance, &id) == SERTIER_OK);
  CHECK(id == 0);
  CHECK(sertier_register(coord, kDeposit, &id) == SERTIER_OK);
  CHECK(id == 1);
  CHECK(sertier_register(coord, kBalance, &id) == SERTIER_ERR_STATE);  // duplicate
  CHECK(std::strlen(sertier_last_error()) > 0);

  REQUIRE(sertier_analysis(coord) == SERTIER_OK);
  REQUIRE(sertier_load_key(coord, "checking", 1, 100) == SERTIER_OK);
  REQUIRE(sertier_load_key(coord, "savings", 1, 100) == SERTIER_OK);

  sertier_txn* txn = nullptr;
  REQUIRE(sertier_begin(coord, "deposit", &txn) == SERTIER_OK);
  CHECK(sertier_txn_id(txn) > 0);
  uint64_t args[1] = {1};
  int64_t value = 0;
  REQUIRE(sertier_execute(txn, 0, args, 1, nullptr, &value) == SERTIER_OK);
  CHECK(value == 100);
  int64_t deposit = value + 25;
  REQUIRE(sertier_execute(txn, 1, args, 1, &deposit, nullptr) == SERTIER_OK);
  CHECK(sertier_commit(txn) == SERTIER_OK);
  CHECK(sertier_txn_abort_reason(txn) == nullptr);
  sertier_txn_close(txn);

  char* history = nullptr;
  REQUIRE(sertier_history_json(coord, &history) == SERTIER_OK);
  std::string jsonl = take(history);
  CHECK(jsonl.find("\"outcome\":\"Committed\"") != std::string::npos);

  char* dump = nullptr;
  REQUIRE(sertier_dump_engine(coord, &dump) == SERTIER_OK);
  CHECK(take(dump).find("checking/1: v0=100@0 v1=125@") != std::string::npos);

  CHECK(sertier_request_transition(coord, "si") == SERTIER_OK);
  CHECK(sertier_request_transition(coord, "si") == SERTIER_REJECTED);

  sertier_coord_destroy(coord);
}

TEST_CASE("rollback and abort reporting") {
  sertier_coord* coord = nullptr;
  REQUIRE(sertier_coord_create(nullptr, &coord) == SERTIER_OK);
  REQUIRE(sertier_register(coord, kDeposit, nullptr) == SERTIER_OK);
  REQUIRE(sertier_analysis(coord) == SERTIER_OK);
  REQUIRE(sertier_load_key(coord, "checking", 2, 10) == SERTIER_OK);

  sertier_txn* txn = nullptr;
  REQUIRE(sertier_begin(coord, "deposit", &txn) == SERTIER_OK);
  uint64_t args[1] = {2};
  REQUIRE(sertier_execute(txn, 0, args, 1, nullptr, nullptr) == SERTIER_OK);
  CHECK(sertier_rollback(txn) == SERTIER_OK);
  CHECK(std::string(sertier_txn_abort_reason(txn)) == "user");
  sertier_txn_close(txn);
  sertier_coord_destroy(coord);
}

TEST_CASE("bad configs are reported") {
  sertier_coord* coord = nullptr;
  CHECK(sertier_coord_create("{not json", &coord) == SERTIER_ERR_CONFIG);
  CHECK(sertier_coord_create(R"({"initial_level":"weird"})", &coord) == SERTIER_ERR_CONFIG);
}

TEST_CASE("workload run plus oracle check through files") {
  const char* history_path = "/tmp/sertier_capi_history.jsonl";
  char* metrics = nullptr;
  sertier_status status = sertier_run_workload(
      "benchmark = smallbank\n"
      "sessions = 2\n"
      "duration_ops = 80\n"
      "accounts = 10\n"
      "skew = 0.9\n"
      "seed = 5\n"
      "level_mode = si\n",
      history_path, &metrics);
  REQUIRE(status == SERTIER_OK);
  CHECK(take(metrics).find("\"committed\"") != std::string::npos);

  char* verdict = nullptr;
  CHECK(sertier_check_history(history_path, "si", 1, &verdict) == SERTIER_OK);
  std::string v = take(verdict);
  CHECK(v.find("\"serializable\": true") != std::string::npos);
  CHECK(v.find("\"vulnerable_violations\": []") != std::string::npos);

  char* prediction = nullptr;
  CHECK(sertier_predict(history_path, 64, 1, nullptr, &prediction) == SERTIER_OK);
  CHECK(take(prediction).find("\"chosen\"") != std::string::npos);

  char* chains = nullptr;
  CHECK(sertier_dump_history_chains(history_path, "checking:0,savings:0", &chains) == SERTIER_OK);
  std::string text = take(chains);
  CHECK(text.find("checking/0: v0(initial)") != std::string::npos);

  std::remove(history_path);
  CHECK(sertier_check_history("/tmp/definitely_missing.jsonl", nullptr, 0, &verdict) ==
        SERTIER_ERR_STATE);
}

TEST_CASE("analyzer over a registry document") {
  const char* registry = R"([
    {"name":"reader","arity":1,"steps":[{"mode":"Read","relation":"r","key_param":0}]},
    {"name":"writer","arity":1,"steps":[{"mode":"Write","relation":"r","key_param":0}]}
  ])";
  char* report = nullptr;
  char* dot = nullptr;
  REQUIRE(sertier_analyze_templates(registry, "rc", &report, &dot) == SERTIER_OK);
  std::string r = take(report);
  CHECK(r.find("\"dangerous_structures\"") != std::string::npos);
  CHECK(r.find("\"safe\": false") != std::string::npos);
  CHECK(take(dot).find("digraph") != std::string::npos);

  CHECK(sertier_analyze_templates(registry, "ser", &report, nullptr) == SERTIER_ERR_CONFIG);
  CHECK(sertier_analyze_templates("[]", "rc", &report, nullptr) == SERTIER_ERR_STATE);
}

TEST_CASE("transition demo statuses") {
  char* out = nullptr;
  CHECK(sertier_transition_demo(1, 1, &out) == SERTIER_OK);
  CHECK(take(out).find("T1 aborted (civ_version_mismatch)") != std::string::npos);

  CHECK(sertier_transition_demo(0, 1, &out) == SERTIER_NOT_SERIALIZABLE);
  std::string naive = take(out);
  CHECK(naive.find("T1 committed") != std::string::npos);
  CHECK(naive.find("\"serializable\": false") != std::string::npos);
}
