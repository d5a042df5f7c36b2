#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "strkit/error.hpp"
#include "strkit/harness.hpp"

namespace {

struct Args {
  std::string config;
  int threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Args& args) {
  cmd->add_option("--config", args.config, "experiment config file")->required();
  cmd->add_option("--threads", args.threads, "worker threads")
      ->check(CLI::Range(1, 4096));
  cmd->add_option("--out", args.out, "output directory (overrides config)");
}

int run_report(const strkit::ExperimentConfig& cfg, const Args& args) {
  namespace fs = std::filesystem;
  const fs::path outdir = args.out.empty() ? cfg.output_dir : args.out;
  const fs::path csv_path = outdir / "eval.csv";
  std::ifstream in(csv_path, std::ios::binary);
  if (!in)
    throw strkit::Error(strkit::ErrorKind::IoError,
                        "cannot open " + csv_path.string() + " (run eval first)");
  const std::string csv((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  const std::string table = strkit::render_csv_as_table(csv);
  std::ofstream out(outdir / "eval_table.txt", std::ios::binary);
  out.write(table.data(), static_cast<std::streamsize>(table.size()));
  if (!out)
    throw strkit::Error(strkit::ErrorKind::IoError,
                        "cannot write eval_table.txt");
  std::fputs(table.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prompt ordering and emphasis toolkit"};
  app.require_subcommand(1);

  Args args;
  CLI::App* eval = app.add_subcommand(
      "eval", "run the dataset x order x method x target grid");
  CLI::App* profile =
      app.add_subcommand("profile", "score attention heads and pick k");
  CLI::App* partition =
      app.add_subcommand("partition", "split examples into known/unknown");
  CLI::App* report =
      app.add_subcommand("report", "re-render eval.csv as an aligned table");
  for (CLI::App* cmd : {eval, profile, partition, report})
    add_common(cmd, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  strkit::ExperimentConfig cfg;
  try {
    cfg = strkit::load_experiment_config(args.config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  try {
    const strkit::RunOptions run{args.threads, args.out};
    if (eval->parsed())
      std::printf("%s\n", strkit::cmd_eval(cfg, run).c_str());
    else if (profile->parsed())
      std::printf("%s\n", strkit::cmd_profile(cfg, run).c_str());
    else if (partition->parsed())
      std::printf("%s\n", strkit::cmd_partition(cfg, run).c_str());
    else if (report->parsed())
      return run_report(cfg, args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
