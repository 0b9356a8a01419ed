// Command-line front end for the sertier shared library.
//
// Exit codes: 0 success, 2 oracle violation, 3 configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sertier.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 2;
constexpr int kExitConfig = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void print_and_free(char* s) {
  if (!s) return;
  std::cout << s;
  if (*s && s[strlen(s) - 1] != '\n') std::cout << '\n';
  sertier_string_free(s);
}

int status_to_exit(sertier_status status) {
  switch (status) {
    case SERTIER_OK: return kExitOk;
    case SERTIER_NOT_SERIALIZABLE: return kExitViolation;
    case SERTIER_ERR_CONFIG: return kExitConfig;
    default:
      std::cerr << "error: " << sertier_last_error() << "\n";
      return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"middle-tier transaction coordinator with adaptive isolation levels"};
  app.require_subcommand(1);
  app.fallthrough();

  uint64_t seed = 0;
  std::string out_path;
  app.add_option("--seed", seed, "random seed override")->group("Global");
  app.add_option("--out", out_path, "output path override")->group("Global");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "static dependency analysis of a template registry");
  std::string templates_path, analyze_level = "rc", dot_path;
  analyze->add_option("--templates", templates_path, "registry JSON file")->required();
  analyze->add_option("--level", analyze_level, "rc|si");
  analyze->add_option("--dot", dot_path, "write a GraphViz file");

  // run
  auto* run = app.add_subcommand("run", "drive a workload and write its history");
  std::string run_config;
  run->add_option("--config", run_config, "key=value workload config file")->required();

  // check
  auto* check = app.add_subcommand("check", "certify a history file");
  std::string check_history, check_level;
  bool witness = false;
  check->add_option("--history", check_history, "JSONL history file")->required();
  check->add_option("--level", check_level, "also scan rc|si vulnerable violations");
  check->add_flag("--witness", witness, "include a cycle witness");

  // predict
  auto* predict = app.add_subcommand("predict", "isolation-level prediction from a history");
  std::string predict_history, weights_path;
  uint32_t batch = 512;
  predict->add_option("--history", predict_history, "JSONL history file")->required();
  predict->add_option("--batch", batch, "sample size");
  predict->add_option("--weights", weights_path, "predictor weights file");

  // transition-demo
  auto* demo = app.add_subcommand("transition-demo", "replay the cross-isolation switch scenario");
  std::string demo_from = "ser", demo_to = "rc", scenario = "example3", civ = "on";
  demo->add_option("--from", demo_from, "level before the switch");
  demo->add_option("--to", demo_to, "level after the switch");
  demo->add_option("--scenario", scenario, "scenario name");
  demo->add_option("--civ", civ, "on|off");

  // dump
  auto* dump = app.add_subcommand("dump", "print version chains reconstructed from a history");
  std::string dump_history, dump_keys;
  dump->add_option("--history", dump_history, "JSONL history file")->required();
  dump->add_option("--keys", dump_keys, "relation:id[,relation:id...]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  sertier_status status = SERTIER_OK;
  char* out = nullptr;

  if (*analyze) {
    char* dot = nullptr;
    std::string templates = slurp(templates_path);
    status = sertier_analyze_templates(templates.c_str(), analyze_level.c_str(), &out,
                                       dot_path.empty() ? nullptr : &dot);
    print_and_free(out);
    if (status == SERTIER_OK && dot) {
      std::ofstream dot_out(dot_path, std::ios::trunc);
      dot_out << dot;
    }
    sertier_string_free(dot);
  } else if (*run) {
    std::string config = slurp(run_config);
    if (seed != 0) config += "\nseed=" + std::to_string(seed) + "\n";
    status = sertier_run_workload(config.c_str(), out_path.empty() ? nullptr : out_path.c_str(),
                                  &out);
    print_and_free(out);
  } else if (*check) {
    status = sertier_check_history(check_history.c_str(),
                                   check_level.empty() ? nullptr : check_level.c_str(),
                                   witness ? 1 : 0, &out);
    print_and_free(out);
  } else if (*predict) {
    status = sertier_predict(predict_history.c_str(), batch, seed,
                             weights_path.empty() ? nullptr : weights_path.c_str(), &out);
    print_and_free(out);
  } else if (*demo) {
    if (scenario != "example3") {
      std::cerr << "unknown scenario: " << scenario << "\n";
      return kExitConfig;
    }
    status = sertier_transition_demo(civ == "on" ? 1 : 0, 1, &out);
    print_and_free(out);
  } else if (*dump) {
    status = sertier_dump_history_chains(dump_history.c_str(),
                                         dump_keys.empty() ? nullptr : dump_keys.c_str(), &out);
    print_and_free(out);
  }

  return status_to_exit(status);
}
