#pragma once

#include "blindloom/conv_stack.hpp"
#include "blindloom/noise.hpp"
#include "blindloom/tensor.hpp"
#include "blindloom/twin_sampler.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace blindloom {

struct DenoiserArchitecture {
  std::size_t window = 5;
  std::size_t frame_channels = 1;
  std::size_t hidden_channels = 32;
  std::size_t layers = 6;

  ConvStackSpec stack() const {
    return ConvStackSpec{window * frame_channels, hidden_channels, frame_channels, layers, 3};
  }
};

// Multi-frame residual CNN: output = centre frame + conv stack(window stack).
// The network sees intensities divided by 255.
struct DenoiserModel {
  DenoiserArchitecture arch;
  ParamSet<float> params;
  std::vector<double> loss_log;

  // Output layer starts at zero, so a fresh model is the identity on the centre frame.
  static DenoiserModel create(const DenoiserArchitecture& arch, std::uint64_t seed);
  // Rebuilds the architecture from parameter shapes; `frame_channels` is the
  // output channel count of the last layer.
  static DenoiserModel from_params(ParamSet<float> params);
};

void save_model(const std::filesystem::path& path, const DenoiserModel& model);
DenoiserModel load_model(const std::filesystem::path& path);

// (1, window * C, H, W) network input on the [0, 1] scale.
Tensor4<float> stack_tensor(std::span<const Frame> stack);

Frame denoise_stack(const DenoiserModel& model, std::span<const Frame> stack);

// Per-frame denoise_stack with edge-replicated windows.
FrameSequence denoise_sequence(const DenoiserModel& model, const FrameSequence& seq);

// Frame source yielding g(Y_i), memoised per index (the model is captured by
// reference and must outlive the source).
FrameSource denoised_source(const DenoiserModel& model, const FrameSequence& seq);
FrameSource raw_source(const FrameSequence& seq);

// Mean over samples of masked L1 between (centre + net) * gamma and
// target * gamma on the [0, 1] scale. Fills `grads` when given.
double batch_loss(const DenoiserModel& model, std::span<const TwinPair> batch, Gradients<float>* grads);

// One Adam step on `batch`; returns the loss before the update.
double train_step(DenoiserModel& model, std::span<const TwinPair> batch, double lr);

struct PretrainConfig {
  double sigma = 20.0;
  std::size_t steps = 200;
  double lr = 1e-3;
  std::size_t batch_size = 8;
  Eigen::Index crop = 48;
  std::uint64_t seed = 0;
};

// Supervised AWGN pretraining: each sample stacks `window` independently
// noised copies of a random crop of a still image (a static video) with the
// clean crop as target.
DenoiserModel pretrain(DenoiserModel model, const std::vector<Frame>& corpus, const PretrainConfig& config);

struct FinetuneConfig {
  SamplerConfig sampler;
  std::size_t batches = 100;
  double lr = 2e-4;
  std::uint64_t seed = 0;
  // Denoised frames (and hence flows) are refreshed every `flow_refresh` batches.
  std::size_t flow_refresh = 1;
  std::optional<std::filesystem::path> diagnostic_checkpoint;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Self-supervised fine-tuning on one noisy sequence: every batch is assembled
// with the current model's online-denoised frames, then one Adam step is
// taken on the masked L1 loss.
DenoiserModel finetune(DenoiserModel model, const FrameSequence& noisy, const FinetuneConfig& config);

}  // namespace blindloom
