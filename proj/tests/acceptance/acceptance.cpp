// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "deld/checkpoint.hpp"
#include "deld/error.hpp"
#include "deld/harness.hpp"
#include "deld/llm_client.hpp"
#include "deld/trainer.hpp"
#include "httplib.h"
#include "unit/test_util.hpp"

using namespace deld;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string bytes_of(const std::vector<const Parameter*>& params) {
  std::string out;
  for (const Parameter* p : params) {
    out.append(reinterpret_cast<const char*>(p->value.data.data()), p->value.data.size() * sizeof(double));
  }
  return out;
}

// ---- A1 --------------------------------------------------------------------

Outcome a1_gradients() {
  EncoderConfig c;
  c.d = 8;
  c.layers = 2;
  c.heads = 2;
  c.ffn_dim = 16;
  c.vocab_size = 50;
  c.n_max = 6;
  c.prompt_capacity = 2;
  c.seed = 11;
  ModelState model{init_encoder(c), PromptBank{}, Classifier::zeros(8)};
  model.bank.add(init_prompt("g", 2, model.encoder, 3));
  std::mt19937_64 rng(17);
  model.classifier.weight.value = testing::random_tensor({1, 8}, rng, 0.5);
  model.classifier.bias.value.data[0] = 0.1;
  const std::vector<int> ids{7, 12, 3, 44, 29, 18};

  std::vector<Parameter*> params = model.encoder.parameters();
  params.push_back(&model.bank.at(0).matrix);
  params.push_back(&model.classifier.weight);
  params.push_back(&model.classifier.bias);
  double worst = 0.0;
  std::size_t checked = 0;
  for (int label : {0, 1}) {
    const auto r = testing::check_gradients(params, [&](Graph& g) {
      return bce_loss(forward_probability(g, model, ids), label);
    });
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  return {worst < 1e-4, fmt("max rel err %.3g over %.0f components", worst, static_cast<double>(checked))};
}

// ---- shared synthetic suite ------------------------------------------------

RunConfig suite_config() {
  RunConfig cfg;
  cfg.resolve();
  cfg.validate();
  return cfg;
}

struct Suite {
  RunConfig cfg;
  std::vector<GeneratorDataset> datasets;
  Backbone backbone;
};

Suite& suite() {
  static Suite s = [] {
    Suite out;
    out.cfg = suite_config();
    out.datasets = load_datasets(out.cfg);
    out.backbone = prepare_backbone(out.cfg, out.datasets);
    return out;
  }();
  return s;
}

// ---- A2 --------------------------------------------------------------------

Outcome a2_frozen() {
  const Suite& s = suite();
  RunConfig cfg = s.cfg;
  cfg.data.scale = 0.2;
  const auto data = load_datasets(cfg);
  std::vector<TaskData> tasks = prepare_tasks(data, s.backbone.vocab, cfg.encoder.n_max, 0, cfg.seed);
  tasks.resize(3);
  TrainConfig tc = cfg.train;
  tc.epochs = 2;

  const std::string encoder_before = bytes_of(std::as_const(s.backbone.encoder).parameters());
  std::vector<std::string> prompt_snapshots;
  const SequentialResult r = run_deld_seq(s.backbone.encoder, tasks, tc, [&](const StageEvent& ev) {
    prompt_snapshots.push_back(bytes_of({&ev.model.bank.prompts().back().matrix}));
  });
  const bool encoder_ok = bytes_of(std::as_const(r.model.encoder).parameters()) == encoder_before;
  bool prompts_ok = r.model.bank.size() == 3 && prompt_snapshots.size() == 3;
  for (std::size_t i = 0; prompts_ok && i < 2; ++i) {
    prompts_ok = bytes_of({&r.model.bank.at(i).matrix}) == prompt_snapshots[i];
  }
  return {encoder_ok && prompts_ok,
          std::string("encoder ") + (encoder_ok ? "identical" : "CHANGED") + ", P_1/P_2 " +
              (prompts_ok ? "identical" : "CHANGED")};
}

// ---- A3 --------------------------------------------------------------------

Outcome a3_shapes() {
  const Suite& s = suite();
  RunConfig cfg = s.cfg;
  cfg.data.scale = 0.05;
  const auto data = load_datasets(cfg);
  const auto tasks = prepare_tasks(data, s.backbone.vocab, cfg.encoder.n_max, 0, cfg.seed);
  TrainConfig tc = cfg.train;
  tc.prompt_len = 12;
  tc.epochs = 1;
  const std::size_t n = 128;
  std::vector<std::size_t> rows;
  bool ok = true;
  run_deld_seq(s.backbone.encoder, tasks, tc, [&](const StageEvent& ev) {
    const ComposedInput in = compose_input(ev.model.bank, Tensor({n, cfg.encoder.d}));
    rows.push_back(in.rows.rows());
    ok = ok && in.rows.rows() == 12 * (ev.stage + 1) + n && in.mask.size() == in.rows.rows();
  });
  std::string detail = "rows";
  for (std::size_t r : rows) detail += " " + std::to_string(r);
  return {ok && rows.size() == 4, detail + " (expected 140 152 164 176)"};
}

// ---- A4 / A6 ---------------------------------------------------------------

struct OrderRuns {
  std::vector<ExperimentReport> deld, ftseq;  // per study order
};

OrderRuns& order_runs() {
  static OrderRuns runs = [] {
    const Suite& s = suite();
    OrderRuns out;
    for (const NamedOrder& order : study_orders()) {
      const auto ordered = apply_order(s.datasets, order.generators);
      out.deld.push_back(run_regime(s.cfg, Regime::kDeldSeq, true, s.backbone, ordered).report);
      out.ftseq.push_back(run_regime(s.cfg, Regime::kFtSeq, false, s.backbone, ordered).report);
      std::printf("  %s: DELD avg %.2f fgt %.2f | FT-Seq avg %.2f fgt %.2f\n", order.name.c_str(),
                  out.deld.back().average(), *out.deld.back().fgt, out.ftseq.back().average(),
                  *out.ftseq.back().fgt);
      std::fflush(stdout);
    }
    return out;
  }();
  return runs;
}

Outcome a4_forgetting() {
  const OrderRuns& runs = order_runs();
  const ExperimentReport& d = runs.deld.front();
  const ExperimentReport& f = runs.ftseq.front();
  const bool ok = *f.fgt >= 15.0 && *d.fgt <= *f.fgt - 10.0 && d.average() >= f.average() + 5.0;
  return {ok, fmt("FT-Seq Fgt %.2f avg %.2f; DELD Fgt %.2f avg %.2f", *f.fgt, f.average(), *d.fgt, d.average())};
}

Outcome a6_orders() {
  const OrderRuns& runs = order_runs();
  std::vector<OrderResult> d, f;
  bool beats = true;
  for (std::size_t i = 0; i < runs.deld.size(); ++i) {
    const std::string name = study_orders()[i].name;
    d.push_back({name, runs.deld[i].datasets, runs.deld[i].accuracies});
    f.push_back({name, runs.ftseq[i].datasets, runs.ftseq[i].accuracies});
    beats = beats && runs.deld[i].average() > runs.ftseq[i].average();
  }
  const OrderRobustness rd = order_robustness(d), rf = order_robustness(f);
  std::cout << render_order_table({runs.deld[0].label(), runs.ftseq[0].label()}, {rd, rf});
  return {beats && rd.spread <= rf.spread,
          fmt("spread DELD %.2f vs FT-Seq %.2f; DELD wins every order: ", rd.spread, rf.spread) +
              (beats ? "yes" : "no")};
}

// ---- A5 --------------------------------------------------------------------

Outcome a5_fgt() {
  AccuracyMatrix a(2);
  a.set(0, 0, 90);
  a.set(0, 1, 80);
  a.set(1, 1, 75);
  AccuracyMatrix b(2);
  b.set(0, 0, 70);
  b.set(0, 1, 85);
  b.set(1, 1, 60);
  AccuracyMatrix c(4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = i; k < 4; ++k) c.set(i, k, 66.5);
  }
  const double fa = forgetting(a), fb = forgetting(b), fc = forgetting(c);
  return {fa == 10.0 && fb == -15.0 && fc == 0.0, fmt("%.17g, %.17g, %.17g", fa, fb, fc)};
}

// ---- A7 --------------------------------------------------------------------

Outcome a7_ablation() {
  const Suite& s = suite();
  RunConfig cfg = s.cfg;
  cfg.data.scale = 0.2;
  const auto data = load_datasets(cfg);
  const auto cells = ablate_prompts(cfg, s.backbone, data);
  bool ok = cells.size() == 10;
  for (const auto& c : cells) ok = ok && c.average_accuracy >= 0.0 && c.average_accuracy <= 100.0;
  const std::string table = render_ablation_table(cells);
  std::cout << table;
  for (const char* needle : {"Prompt Length", "Prepend", "Append"}) ok = ok && table.find(needle) != std::string::npos;
  // One row per prompt length, both positions filled.
  std::vector<std::string> row_keys;
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) {
    std::istringstream words(line);
    std::string first, cell;
    words >> first;
    std::size_t filled = 0;
    while (words >> cell) filled += cell != "-";
    if (filled == 2) row_keys.push_back(first);
  }
  for (std::size_t m : kStandardPromptLengths) {
    ok = ok && std::count(row_keys.begin(), row_keys.end(), std::to_string(m)) == 1;
  }
  return {ok, std::to_string(cells.size()) + " cells in [0,100], table rendered"};
}

// ---- A8 --------------------------------------------------------------------

Outcome a8_zero_shot() {
  const std::string golden_system =
      "Act as a disinformation detector. Given the following news piece, which category does this "
      "news belong to? Return \"1\" if you think the news piece is disinformation; otherwise, return "
      "\"0\". Note that there is no need for an explanation.";
  const ChatPrompt p = build_prompt("Officials confirmed the bridge reopened.");
  const bool golden = p.system == golden_system && p.user == "news: Officials confirmed the bridge reopened.";

  // Mock verdict from the article length: a refusal when divisible by 7,
  // otherwise "1" for odd and a padded "0" for even lengths.
  auto verdict = [](const std::string& article) -> std::string {
    if (article.size() % 7 == 0) return "I cannot determine that.";
    return article.size() % 2 == 1 ? "1" : " 0\n";
  };
  httplib::Server server;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string user = body["messages"][1]["content"];
    nlohmann::json out;
    out["choices"] = nlohmann::json::array(
        {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", verdict(user.substr(6))}}}}});
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RunConfig cfg = suite().cfg;
  cfg.data.scale = 0.05;
  const auto data = load_datasets(cfg);
  cfg.zero_shot.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.zero_shot.parallelism = 4;
  ExperimentReport r;
  try {
    r = evaluate_zero_shot(cfg.zero_shot, data);
  } catch (...) {
    server.stop();
    th.join();
    throw;
  }
  server.stop();
  th.join();

  bool exact = r.accuracies.size() == data.size();
  for (std::size_t i = 0; exact && i < data.size(); ++i) {
    std::size_t hits = 0;
    for (const auto& e : data[i].examples) {
      const std::size_t len = e.text.size();
      if (len % 7 == 0) continue;
      hits += static_cast<int>(len % 2 == 1) == e.label;
    }
    exact = r.accuracies[i] == 100.0 * static_cast<double>(hits) / static_cast<double>(data[i].examples.size());
  }
  return {golden && exact, std::string("golden strings ") + (golden ? "match" : "DIFFER") + ", mock accuracy " +
                               (exact ? "exact" : "MISMATCH") + fmt(" (avg %.2f)", r.average())};
}

// ---- A9 --------------------------------------------------------------------

std::string report_without_clock(const fs::path& p) {
  std::ifstream in(p);
  auto j = nlohmann::ordered_json::parse(in);
  j.erase("wall_clock_seconds");
  return j.dump();
}

Outcome a9_determinism() {
  RunConfig cfg = suite().cfg;
  cfg.data.scale = 0.2;
  cfg.train.epochs = 2;
  cfg.pretrain.steps = 100;
  const fs::path root = fs::temp_directory_path() / ("deld_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  cfg.out_dir = root / "a";
  const std::string first = report_without_clock(cmd_run(cfg));
  cfg.out_dir = root / "b";
  const std::string second = report_without_clock(cmd_run(cfg));
  fs::remove_all(root);
  return {first == second && !first.empty(),
          first == second ? "reports byte-identical (" + std::to_string(first.size()) + " bytes)" : "reports differ"};
}

// ---- A10 -------------------------------------------------------------------

Outcome a10_bench() {
  EncoderConfig c = RunConfig::desk_encoder();
  c.d = 64;
  c.heads = 4;
  c.ffn_dim = 128;
  c.n_max = 256;
  const auto cells = bench_forward(c, {{128, 2}, {128, 4}, {256, 2}});
  const double depth = cells[1].median_seconds / cells[0].median_seconds;
  const double length = cells[2].median_seconds / cells[0].median_seconds;
  return {depth >= 1.6 && depth <= 2.6 && length >= 2.0,
          fmt("L 2->4 ratio %.2f (need 1.6-2.6), n 128->256 ratio %.2f (need >= 2)", depth, length)};
}

}  // namespace

int main() {
  report("A1", "gradient correctness", a1_gradients);
  report("A2", "frozen-state discipline", a2_frozen);
  report("A3", "shape law", a3_shapes);
  report("A4", "forgetting reduction", a4_forgetting);
  report("A5", "forgetting oracle", a5_fgt);
  report("A6", "order robustness", a6_orders);
  report("A7", "ablation grid", a7_ablation);
  report("A8", "zero-shot plumbing", a8_zero_shot);
  report("A9", "determinism", a9_determinism);
  report("A10", "complexity smoke", a10_bench);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
