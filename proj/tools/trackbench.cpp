// trackbench: generate synthetic sequences, run tracker-error experiments,
// and re-draw plots from a report.
//
//   trackbench generate <gen.json> -o <dir>
//   trackbench run <spec.json> -o <dir>
//   trackbench plot <report.json> -o <dir>
//
// Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trackbench/experiment.hpp"
#include "trackbench/sequence.hpp"
#include "trackbench/synth.hpp"

namespace fs = std::filesystem;
using namespace trackbench;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingStream("cannot read " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

int generate(const fs::path& config, const fs::path& out, std::optional<std::uint64_t> seed, int workers) {
  GeneratorConfig g = generator_config_from_json(read_json(config));
  if (seed) g.seed = *seed;
  const SequenceBundle seq = generate_sequence(g, workers);
  save_sequence(seq, out);
  if (g.noise) {
    const auto planted = plant_grid_points(seq, 20);
    std::ofstream tracks(out / "oracle_tracks.csv");
    write_tracks_csv(tracks, oracle_tracker(seq, planted, *g.noise));
  }
  std::cout << "wrote " << seq.size() << " frames to " << out.string() << '\n';
  return 0;
}

int run(const fs::path& spec_path, std::optional<fs::path> out, std::optional<std::uint64_t> seed, int workers) {
  ExperimentSpec spec = validate_spec(spec_path);
  if (seed) spec.seed = *seed;
  if (out) spec.output = out->string();
  if (spec.output.empty()) throw InvalidSpec("no output directory: pass -o or set 'output' in the spec");
  const ExperimentReport report = run_experiment(spec, workers);
  write_experiment(report, spec.output);
  std::cout << "config " << report.config_hash << ": " << report.cells.size() << " cells written to " << spec.output
            << '\n';
  return 0;
}

int plot(const fs::path& report, const fs::path& out) {
  write_plots(read_json(report), out);
  std::cout << "plots written to " << (out / "plots").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-tracker error characterization"};
  app.require_subcommand(1);
  int workers = 0;
  std::optional<std::uint64_t> seed;
  app.add_option("--workers", workers, "Worker threads (default: TRACKBENCH_WORKERS or 1)");
  app.add_option("--seed", seed, "Override the seed from the input file");

  fs::path gen_config, gen_out;
  auto* gen = app.add_subcommand("generate", "Render a synthetic sequence directory");
  gen->add_option("config", gen_config, "Generator config JSON")->required();
  gen->add_option("-o,--output", gen_out, "Output sequence directory")->required();

  fs::path run_spec;
  std::optional<fs::path> run_out;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment spec");
  run_cmd->add_option("spec", run_spec, "Experiment spec JSON")->required();
  run_cmd->add_option("-o,--output", run_out, "Output directory");

  fs::path plot_report, plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "Draw plots from a report.json");
  plot_cmd->add_option("report", plot_report, "report.json")->required();
  plot_cmd->add_option("-o,--output", plot_out, "Output directory")->required();

  for (auto* sub : {gen, run_cmd, plot_cmd}) {
    sub->add_option("--workers", workers, "Worker threads (default: TRACKBENCH_WORKERS or 1)");
    sub->add_option("--seed", seed, "Override the seed from the input file");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const int w = resolve_workers(workers);
    if (*gen) return generate(gen_config, gen_out, seed, w);
    if (*run_cmd) return run(run_spec, run_out, seed, w);
    return plot(plot_report, plot_out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
