#pragma once

#include "blindloom/dae.hpp"
#include "blindloom/denoiser.hpp"
#include "blindloom/fixtures.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace blindloom {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Flat `key = value` lines; `#` starts a comment. Order is preserved.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

struct ExperimentConfig {
  // Input: a directory of frames, or a generated fixture when empty.
  std::string sequence;
  FixtureSpec fixture;

  std::string noise = "awgn:20";
  std::uint64_t seed = 0;

  SamplerMode sampler = SamplerMode::kTwin;
  OcclusionMode occlusion = OcclusionMode::kConsistency;
  bool lighting = true;
  bool online_denoise = true;
  bool refine_flow = false;
  bool dae = false;

  double alpha1 = 0.0064;
  double alpha2 = 1.4;
  double alpha3 = 5.0;
  double lambda = 0.06;

  std::size_t batches = 100;
  double lr = 2e-4;
  std::size_t batch_size = 32;
  Eigen::Index crop = 96;
  std::size_t flow_refresh = 1;
  DenoiserArchitecture arch;
  FlowSettings flow;

  // Initial model: a checkpoint, or AWGN pretraining on a generated corpus.
  std::string init;
  PretrainConfig pretrain;
  std::size_t corpus_count = 16;
  Eigen::Index corpus_size = 64;

  std::string dae_checkpoint;
  DaeTrainConfig dae_train;

  void set(const std::string& key, const std::string& value);
  void apply(const KeyValues& kv);
  // Every key with its current value, in a fixed order.
  KeyValues echo() const;

  SamplerConfig sampler_config() const;
  FinetuneConfig finetune_config() const;
};

ExperimentConfig load_config(const std::filesystem::path& path, const KeyValues& overrides = {});

struct RunReport {
  KeyValues config;
  std::uint64_t seed = 0;
  std::vector<double> psnr;
  std::vector<double> ssim;
  std::vector<double> noisy_psnr;
  std::vector<double> initial_psnr;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_noisy_psnr = 0.0;
  double mean_initial_psnr = 0.0;
  std::vector<double> loss;
  std::optional<SelectionReport> selection;
  double wall_seconds = 0.0;
  std::vector<std::string> stages;  // completed stages, in order
};

class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(std::string stage, const std::string& what, RunReport partial)
      : std::runtime_error("stage '" + stage + "': " + what), stage(std::move(stage)), partial(std::move(partial)) {}
  std::string stage;
  RunReport partial;
};

// Pre-built models shared across runs; null members are built from the config.
struct ExperimentResources {
  const DenoiserModel* initial = nullptr;
  const DaeModel* dae = nullptr;
};

struct LoadedInput {
  FrameSequence clean;
  std::optional<Fixture> fixture;
};

LoadedInput load_input(const ExperimentConfig& config);
DenoiserModel build_initial_model(const ExperimentConfig& config);
DaeModel build_dae(const ExperimentConfig& config);

// load -> noise -> init -> finetune -> denoise -> select -> metrics.
RunReport run_experiment(const ExperimentConfig& config, const ExperimentResources& resources = {});

// report.csv (per-frame rows plus a mean row), summary.txt, curves.dat.
void emit_report(const RunReport& report, const std::filesystem::path& directory);
std::string report_csv(const RunReport& report);
std::string curves_dat(const RunReport& report);
std::string summary_text(const RunReport& report);

// Cartesian grid over `ablate.<key> = v1,v2,...` axes and `seeds = s1,s2,...`.
struct AblationSpec {
  ExperimentConfig base;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  std::vector<std::uint64_t> seeds;
};

AblationSpec parse_ablation(const KeyValues& kv);

struct AblationRun {
  std::string arm;  // "key=value;key=value"
  std::uint64_t seed = 0;
  RunReport report;
};

std::vector<AblationRun> run_ablation(const AblationSpec& spec, const ExperimentResources& resources = {});
std::string ablation_csv(const std::vector<AblationRun>& runs);
// ablation.csv plus one emit_report directory per run.
void emit_ablation(const std::vector<AblationRun>& runs, const std::filesystem::path& directory);

}  // namespace blindloom
