// Command-line entry point. Each experiment is a subcommand; `report`
// consolidates run directories.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "muellertf/config.hpp"
#include "muellertf/runner.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> overrides;
};

int run_command(mtf::Command cmd, const Common& o) {
  mtf::ExperimentConfig c;
  try {
    if (!o.config.empty()) c = mtf::load_config(o.config);
    c.command = cmd;
    for (const auto& kv : o.overrides) mtf::apply_override(c, kv);
    if (!o.out.empty()) c.out = o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    c.validate();
  } catch (const mtf::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return mtf::exit_code::invalid_config;
  }
  return mtf::run(c, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mueller functional and Thomas-Fermi screening experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mtf::code_version());

  std::vector<std::pair<CLI::App*, mtf::Command>> commands;
  Common opts;
  for (auto cmd : {mtf::Command::TfSolve, mtf::Command::ExteriorTf, mtf::Command::SommerfeldCheck,
                   mtf::Command::MuellerSolve, mtf::Command::IonizationSweep, mtf::Command::ScreenCompare,
                   mtf::Command::LemmaReport, mtf::Command::SemiclassicsCheck}) {
    auto* sub = app.add_subcommand(mtf::to_string(cmd));
    sub->add_option("--config", opts.config, "INI configuration file");
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--seed", opts.seed, "random seed");
    sub->add_option("--threads", opts.threads, "worker threads");
    sub->add_option("overrides", opts.overrides, "key=value or section.key=value");
    commands.emplace_back(sub, cmd);
  }

  std::string report_dir, pins, write_pins;
  auto* rep = app.add_subcommand("report", "summarize run directories");
  rep->add_option("dir", report_dir, "directory containing manifests")->required();
  rep->add_option("--pins", pins, "pinned metrics (default DIR/pins.json)");
  rep->add_option("--write-pins", write_pins, "store current metrics as pins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return mtf::exit_code::invalid_config;
  }

  if (rep->parsed()) {
    std::optional<std::filesystem::path> p, w;
    if (!pins.empty()) p = pins;
    if (!write_pins.empty()) w = write_pins;
    return mtf::report(report_dir, std::cerr, p, w);
  }
  for (const auto& [sub, cmd] : commands) {
    if (sub->parsed()) return run_command(cmd, opts);
  }
  return mtf::exit_code::failure;
}
