#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "hybeam/cli.hpp"

namespace {

hybeam::RunConfig load_or_default(const std::string& path) {
  if (path.empty()) return hybeam::parse_config(hybeam::json::object());
  return hybeam::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace-hybrid multichannel speech enhancement"};
  app.require_subcommand(1);

  std::string config_path, out_dir, training_dir;
  std::string dict_path, wav_path, doa_path, out_base, scene_dir, enhanced_dir;

  CLI::App* sim = app.add_subcommand("simulate", "Render synthetic scene segments");
  sim->add_option("--config,-c", config_path, "JSON run configuration")
      ->check(CLI::ExistingFile)
      ->required();
  sim->add_option("--out,-o", out_dir, "Output directory (overrides config)");

  CLI::App* build = app.add_subcommand("build-dict", "Precalculate a weight dictionary");
  build->add_option("--config,-c", config_path, "JSON run configuration")
      ->check(CLI::ExistingFile)
      ->required();
  build->add_option("output", dict_path, "Dictionary file to write")->required();
  build->add_option("--training,-t", training_dir,
                    "Directory of *_gtnoise.wav files (datadriven mode)")
      ->check(CLI::ExistingDirectory);

  CLI::App* enh = app.add_subcommand("enhance", "Run the two-stage enhancer on a WAV");
  enh->add_option("--config,-c", config_path, "JSON run configuration")
      ->check(CLI::ExistingFile)
      ->required();
  enh->add_option("dict", dict_path, "Weight dictionary")->check(CLI::ExistingFile)->required();
  enh->add_option("input", wav_path, "Multichannel input WAV")
      ->check(CLI::ExistingFile)
      ->required();
  enh->add_option("doa", doa_path, "Per-frame target DOA track (JSON)")
      ->check(CLI::ExistingFile)
      ->required();
  enh->add_option("out", out_base, "Output basename (writes <out>.wav and diagnostics)")
      ->required();

  CLI::App* eval = app.add_subcommand("evaluate", "Score enhanced output against ground truth");
  eval->add_option("--config,-c", config_path, "JSON run configuration")
      ->check(CLI::ExistingFile)
      ->required();
  eval->add_option("scenes", scene_dir, "Directory with simulate output")
      ->check(CLI::ExistingDirectory)
      ->required();
  eval->add_option("enhanced", enhanced_dir, "Directory with enhance output")
      ->check(CLI::ExistingDirectory)
      ->required();
  eval->add_option("out", out_base, "Report basename (writes <out>.csv and <out>.json)")
      ->required();

  CLI::App* inspect = app.add_subcommand("inspect-dict", "Print dictionary facts");
  inspect->add_option("dict", dict_path, "Weight dictionary")
      ->check(CLI::ExistingFile)
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      hybeam::RunConfig cfg = load_or_default(config_path);
      hybeam::SimulateResult res = hybeam::cmd_simulate(cfg, out_dir);
      std::printf("%zu segments -> %s\n", res.scene_ids.size(), res.manifest_path.c_str());
    } else if (build->parsed()) {
      hybeam::RunConfig cfg = load_or_default(config_path);
      std::string summary = hybeam::cmd_build_dict(cfg, dict_path, training_dir);
      std::printf("%s -> %s\n", summary.c_str(), dict_path.c_str());
    } else if (enh->parsed()) {
      hybeam::RunConfig cfg = load_or_default(config_path);
      hybeam::cmd_enhance(cfg, dict_path, wav_path, doa_path, out_base);
      std::printf("wrote %s.wav (+ _iso, _hyb, _diag.json)\n", out_base.c_str());
    } else if (eval->parsed()) {
      hybeam::RunConfig cfg = load_or_default(config_path);
      hybeam::cmd_evaluate(cfg, scene_dir, enhanced_dir, out_base);
      std::printf("wrote %s.csv and %s.json\n", out_base.c_str(), out_base.c_str());
    } else if (inspect->parsed()) {
      std::fputs(hybeam::cmd_inspect_dict(dict_path).c_str(), stdout);
    }
  } catch (const hybeam::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", hybeam::error_code(e), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
