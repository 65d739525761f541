#pragma once

#include "blindloom/conv_stack.hpp"
#include "blindloom/denoiser.hpp"
#include "blindloom/image.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace blindloom {

// Residual conv autoencoder r(y) = y + f(y), single frame in and out.
struct DaeModel {
  ConvStackSpec spec{1, 16, 1, 4, 3};
  ParamSet<float> params;
  double sigma = 5.0;

  // f starts at zero, so a fresh model reconstructs its input exactly.
  static DaeModel create(std::size_t channels, std::uint64_t seed, std::size_t hidden = 16, std::size_t layers = 4);
  static DaeModel from_params(ParamSet<float> params);
};

void save_dae(const std::filesystem::path& path, const DaeModel& dae);
DaeModel load_dae(const std::filesystem::path& path);

Frame reconstruct(const DaeModel& dae, const Frame& frame);

struct DaeTrainConfig {
  double sigma = 5.0;
  std::size_t steps = 200;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  Eigen::Index crop = 32;
  std::uint64_t seed = 0;
  std::size_t hidden = 16;
  std::size_t layers = 4;
};

// L2 training of r on AWGN(sigma)-corrupted crops with the clean crop as target.
DaeModel train_dae(const std::vector<Frame>& corpus, const DaeTrainConfig& config);
DaeModel train_dae(DaeModel dae, const std::vector<Frame>& corpus, const DaeTrainConfig& config);

// Mean over frames of the root-mean-square of r(y) - y (0-255 scale).
double reconstruction_error(const DaeModel& dae, const FrameSequence& seq);

enum class ModelChoice { kInitial, kFinetuned };

struct SelectionReport {
  double error_before = 0.0;
  double error_after = 0.0;
  ModelChoice choice = ModelChoice::kInitial;
};

// Fine-tuned wins only when the error drops strictly below half.
ModelChoice decide(double error_before, double error_after);

SelectionReport select_model(const DaeModel& dae, const FrameSequence& denoised_before,
                             const FrameSequence& denoised_after);

// Returns the chosen model of the two and fills `report` when given.
const DenoiserModel& select_model(const DaeModel& dae, const FrameSequence& denoised_before,
                                  const FrameSequence& denoised_after, const DenoiserModel& initial,
                                  const DenoiserModel& finetuned, SelectionReport* report = nullptr);

std::string to_string(ModelChoice c);

}  // namespace blindloom
