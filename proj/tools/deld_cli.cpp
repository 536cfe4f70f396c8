// deld: command-line front end for the continual prompt-tuning experiments.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "deld/error.hpp"
#include "deld/harness.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string regime;
  bool with_deld = false;
  std::string order;
  std::optional<std::size_t> prompt_len;
  std::string position;
  std::optional<std::size_t> repeats;
  std::string endpoint;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

deld::RunConfig resolve_config(const Overrides& o) {
  deld::RunConfig cfg = o.config.empty() ? deld::RunConfig{} : deld::RunConfig::load(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.regime.empty()) cfg.regime = deld::parse_regime(o.regime);
  if (o.with_deld) cfg.with_deld = true;
  if (!o.order.empty()) cfg.order = split_csv(o.order);
  if (o.prompt_len) cfg.train.prompt_len = *o.prompt_len;
  if (!o.position.empty()) cfg.train.position = deld::parse_position_mode(o.position);
  if (o.repeats) cfg.repeats = *o.repeats;
  if (!o.endpoint.empty()) cfg.zero_shot.endpoint = o.endpoint;
  cfg.resolve();
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual soft-prompt tuning for multi-generator disinformation detection"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--regime", o.regime, "deld-seq | ft-seq | ft-all | ft-per | zero-shot");
  app.add_flag("--with-deld", o.with_deld, "prompt-tune over the frozen encoder instead of full fine-tuning");
  app.add_option("--order", o.order, "comma-separated generator ids, training order");
  app.add_option("--prompt-len", o.prompt_len, "soft prompt length m");
  app.add_option("--position", o.position, "prepend | append");
  app.add_option("--repeats", o.repeats, "number of 80/20 split repeats");
  app.add_option("--endpoint", o.endpoint, "chat-completion endpoint URL");

  using Command = std::filesystem::path (*)(const deld::RunConfig&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"synth", "generate the synthetic corpus as JSONL", deld::cmd_synth},
      {"pretrain", "pre-train and save the frozen backbone", deld::cmd_pretrain},
      {"run", "run one training regime", deld::cmd_run},
      {"ablate", "prompt length x position grid", deld::cmd_ablate},
      {"orders", "training-order robustness study", deld::cmd_orders},
      {"zero-shot", "zero-shot baseline against a chat endpoint", deld::cmd_zero_shot},
      {"bench", "forward-pass timing across sequence lengths and depths", deld::cmd_bench},
      {"characterize", "rank vocabulary tokens against the learned prompts", deld::cmd_characterize},
  };
  Command selected = nullptr;
  for (const auto& [name, help, fn] : commands) {
    app.add_subcommand(name, help)->callback([&selected, f = fn] { selected = f; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const deld::RunConfig cfg = resolve_config(o);
    const auto report = selected(cfg);
    std::cout << report.string() << '\n';
    return 0;
  } catch (const deld::ConfigError& e) {
    std::cerr << "deld: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "deld: " << e.what() << '\n';
    return 1;
  }
}
