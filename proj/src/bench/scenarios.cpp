#include "bench/workload.hpp"
#include "oracle/oracle.hpp"

namespace sertier {
namespace bench {

namespace {

std::string outcome_line(const std::string& name, const RuntimeTransaction& txn) {
  if (txn.outcome == TxnOutcome::Committed) return name + " committed";
  return name + " aborted (" + txn.abort_reason.value_or("?") + ")";
}

void finish_result(ScenarioResult& result, Coordinator& coord) {
  result.history = coord.history().snapshot();
  OracleVerdict verdict = check_serializable(build_dsg(result.history));
  result.serializable = verdict.serializable;
  result.lines.push_back(verdict.serializable ? "serializable" : "cycle found");
}

}  // namespace

ScenarioResult scenario_write_skew(IsolationLevel level) {
  CoordinatorConfig cc;
  cc.initial_level = level;
  cc.cc_enabled = false;
  cc.civ_enabled = false;
  Coordinator coord(cc);
  coord.register_template({"withdraw_x",
                           2,
                           {{AccessMode::Read, "account", 0},
                            {AccessMode::Read, "account", 1},
                            {AccessMode::Write, "account", 0}}});
  coord.register_template({"withdraw_y",
                           2,
                           {{AccessMode::Read, "account", 0},
                            {AccessMode::Read, "account", 1},
                            {AccessMode::Write, "account", 1}}});
  coord.analysis();
  coord.load_key({"account", 0}, 50);
  coord.load_key({"account", 1}, 50);

  auto t1 = coord.begin("withdraw_x");
  auto t2 = coord.begin("withdraw_y");
  std::vector<uint64_t> args{0, 1};
  int64_t x1 = coord.execute_step(*t1, 0, args).value;
  coord.execute_step(*t1, 1, args);
  coord.execute_step(*t2, 0, args);
  int64_t y2 = coord.execute_step(*t2, 1, args).value;
  coord.execute_step(*t1, 2, args, x1 - 60);
  coord.execute_step(*t2, 2, args, y2 - 60);
  coord.commit(*t1);
  coord.commit(*t2);

  ScenarioResult result;
  result.lines.push_back(outcome_line("T1", *t1));
  result.lines.push_back(outcome_line("T2", *t2));
  finish_result(result, coord);
  return result;
}

ScenarioResult scenario_example1(bool cc_enabled) {
  CoordinatorConfig cc;
  cc.initial_level = IsolationLevel::RC;
  cc.cc_enabled = cc_enabled;
  cc.civ_enabled = cc_enabled;
  Coordinator coord(cc);
  TemplateRegistry bank = smallbank_templates();
  for (const TransactionTemplate& tpl : bank.all()) coord.register_template(tpl);
  coord.analysis();
  coord.load_key({"checking", 7}, 100);
  coord.load_key({"savings", 7}, 100);

  std::vector<uint64_t> args{7};
  auto wc = coord.begin("write_check");
  int64_t c = coord.execute_step(*wc, 0, args).value;
  int64_t s = coord.execute_step(*wc, 1, args).value;

  auto ts = coord.begin("transact_savings");
  int64_t ts_s = coord.execute_step(*ts, 0, args).value;
  coord.execute_step(*ts, 1, args, ts_s + 20);
  coord.commit(*ts);

  auto bal = coord.begin("balance");
  coord.execute_step(*bal, 0, args);
  coord.execute_step(*bal, 1, args);
  coord.commit(*bal);

  int64_t amount = 5;
  StepResult write = coord.execute_step(*wc, 2, args, c - amount - ((c + s) < amount ? 1 : 0));
  if (write.ok) coord.commit(*wc);

  ScenarioResult result;
  result.lines.push_back(outcome_line("T_ts", *ts));
  result.lines.push_back(outcome_line("T_bal", *bal));
  result.lines.push_back(outcome_line("T_wc", *wc));
  finish_result(result, coord);
  return result;
}

ScenarioResult scenario_fig_processing() {
  CoordinatorConfig cc;
  cc.initial_level = IsolationLevel::SI;
  Coordinator coord(cc);
  TemplateRegistry bank = smallbank_templates();
  for (const TransactionTemplate& tpl : bank.all()) coord.register_template(tpl);
  coord.analysis();
  coord.load_key({"checking", 3}, 100);
  coord.load_key({"savings", 3}, 100);

  std::vector<uint64_t> args{3};
  auto ts = coord.begin("transact_savings");  // older
  auto wc = coord.begin("write_check");
  int64_t c = coord.execute_step(*wc, 0, args).value;
  int64_t s = coord.execute_step(*wc, 1, args).value;
  int64_t ts_s = coord.execute_step(*ts, 0, args).value;
  coord.execute_step(*ts, 1, args, ts_s + 20);
  coord.execute_step(*wc, 2, args, c - 5 - ((c + s) < 5 ? 1 : 0));

  coord.commit(*wc);
  coord.commit(*ts);

  ScenarioResult result;
  result.lines.push_back(outcome_line("T_wc", *wc));
  result.lines.push_back(outcome_line("T_ts", *ts));
  finish_result(result, coord);
  return result;
}

ScenarioResult scenario_example3(bool civ_enabled, bool fire_transition) {
  CoordinatorConfig cc;
  cc.initial_level = IsolationLevel::SER;
  cc.civ_enabled = civ_enabled;
  Coordinator coord(cc);
  coord.register_template(
      {"t1", 1, {{AccessMode::Read, "xrel", 0}, {AccessMode::Write, "wrel", 0}}});
  coord.register_template(
      {"t2", 1, {{AccessMode::Write, "xrel", 0}, {AccessMode::Write, "zrel", 0}}});
  coord.register_template(
      {"t3", 1, {{AccessMode::Read, "zrel", 0}, {AccessMode::Read, "wrel", 0}}});
  coord.analysis();
  coord.load_key({"xrel", 0}, 10);
  coord.load_key({"zrel", 0}, 10);
  coord.load_key({"wrel", 0}, 10);

  std::vector<uint64_t> args{0};
  ScenarioResult result;

  if (!fire_transition) {
    auto t1 = coord.begin("t1");
    coord.execute_step(*t1, 0, args);
    coord.execute_step(*t1, 1, args, 99);
    coord.commit(*t1);
    auto t2 = coord.begin("t2");
    coord.execute_step(*t2, 0, args, 11);
    coord.execute_step(*t2, 1, args, 11);
    coord.commit(*t2);
    auto t3 = coord.begin("t3");
    coord.execute_step(*t3, 0, args);
    coord.execute_step(*t3, 1, args);
    coord.commit(*t3);
    result.lines.push_back(outcome_line("T1", *t1));
    result.lines.push_back(outcome_line("T2", *t2));
    result.lines.push_back(outcome_line("T3", *t3));
    finish_result(result, coord);
    return result;
  }

  auto t1 = coord.begin("t1");
  coord.execute_step(*t1, 0, args);  // reads x before T2 overwrites it

  auto t2 = coord.begin("t2");
  coord.execute_step(*t2, 0, args, 11);
  coord.execute_step(*t2, 1, args, 11);
  coord.commit(*t2);

  coord.request_transition(IsolationLevel::RC);

  auto t3 = coord.begin("t3");
  coord.execute_step(*t3, 0, args);
  coord.execute_step(*t3, 1, args);
  coord.commit(*t3);

  coord.execute_step(*t1, 1, args, 99);
  coord.commit(*t1);

  result.lines.push_back(outcome_line("T2", *t2));
  result.lines.push_back(outcome_line("T3", *t3));
  result.lines.push_back(outcome_line("T1", *t1));
  finish_result(result, coord);
  return result;
}

}  // namespace bench
}  // namespace sertier
