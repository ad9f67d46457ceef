// dtp: train, verify and study differential target propagation networks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dtp/config.hpp"
#include "dtp/errors.hpp"
#include "dtp/experiments.hpp"
#include "dtp/serialization.hpp"
#include "dtp/trainer.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int finish(const dtp::ExperimentReport& report, const std::string& out,
           const std::string& summary_path) {
  write_lines(out, report.metrics);
  if (!summary_path.empty()) write_text(summary_path, report.summary);
  std::cout << report.summary;
  return report.ok ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential target propagation: training, identity checks and studies"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out = "metrics.jsonl";
  std::string summary_path;
  std::string save_path;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out, "metrics file (JSON lines)")->capture_default_str();
    cmd->add_option("--summary", summary_path, "also write the summary to this file");
  };

  CLI::App* train = app.add_subcommand("train", "train a network with the configured scheme");
  train->add_option("--config", config_path, "JSON config file")->required();
  train->add_option("--save", save_path, "write the trained network to this file");
  add_common(train);

  CLI::App* verify = app.add_subcommand("verify", "run the seeded identity suite");
  verify->add_option("--seed", seed, "suite seed")->capture_default_str();
  add_common(verify);

  CLI::App* alpha = app.add_subcommand("alpha-study", "measure inverse-iteration contraction rates");
  alpha->add_option("--config", config_path, "JSON config file")->required();
  add_common(alpha);

  CLI::App* gn = app.add_subcommand("gn-compare", "compare target changes with Gauss-Newton steps");
  gn->add_option("--config", config_path, "JSON config file")->required();
  add_common(gn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*verify) return finish(dtp::run_verify(seed), out, summary_path);

    const dtp::TrainConfig config = dtp::load_config(config_path);
    if (*train) {
      dtp::Network net = dtp::make_network(config);
      const dtp::ExperimentReport report = dtp::run_train(config, &net);
      if (!save_path.empty()) dtp::save_network(save_path, net);
      return finish(report, out, summary_path);
    }
    if (*alpha) return finish(dtp::run_alpha_study(config), out, summary_path);
    return finish(dtp::run_gn_compare(config), out, summary_path);
  } catch (const dtp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const dtp::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
}
