#include "blindloom/denoiser.hpp"

#include "blindloom/checkpoint.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>

namespace blindloom {

DenoiserModel DenoiserModel::create(const DenoiserArchitecture& arch, std::uint64_t seed) {
  if (arch.window == 0 || arch.window % 2 == 0) throw std::invalid_argument("denoiser window must be odd");
  DenoiserModel m;
  m.arch = arch;
  m.params = init_conv_stack<float>(arch.stack(), seed, /*zero_output=*/true);
  return m;
}

DenoiserModel DenoiserModel::from_params(ParamSet<float> params) {
  const ConvStackSpec spec = infer_conv_stack(params);
  if (spec.out_channels == 0 || spec.in_channels % spec.out_channels != 0) {
    throw ShapeError("checkpoint input channels are not a multiple of its output channels");
  }
  DenoiserModel m;
  m.arch.frame_channels = spec.out_channels;
  m.arch.window = spec.in_channels / spec.out_channels;
  m.arch.hidden_channels = spec.hidden_channels;
  m.arch.layers = spec.layers;
  m.params = std::move(params);
  return m;
}

void save_model(const std::filesystem::path& path, const DenoiserModel& model) { write_checkpoint(path, model.params); }

DenoiserModel load_model(const std::filesystem::path& path) { return DenoiserModel::from_params(read_checkpoint(path)); }

Tensor4<float> stack_tensor(std::span<const Frame> stack) {
  if (stack.empty()) throw std::invalid_argument("empty frame stack");
  const std::size_t c = stack.front().channels();
  const auto rows = static_cast<std::size_t>(stack.front().rows());
  const auto cols = static_cast<std::size_t>(stack.front().cols());
  Tensor4<float> t({1, stack.size() * c, rows, cols});
  auto s = t.sample(0);
  for (std::size_t k = 0; k < stack.size(); ++k) {
    if (!stack[k].same_shape(stack.front())) throw ShapeError("frame stack members differ in shape");
    for (std::size_t ch = 0; ch < c; ++ch) {
      const Image& p = stack[k].planes[ch];
      s.row(static_cast<Eigen::Index>(k * c + ch)) =
          (Eigen::Map<const Eigen::RowVectorXd>(p.data(), p.size()) / 255.0).cast<float>();
    }
  }
  return t;
}

namespace {

void check_window(const DenoiserModel& model, std::span<const Frame> stack) {
  if (stack.size() != model.arch.window) {
    throw std::invalid_argument("denoiser expects a window of " + std::to_string(model.arch.window) + " frames, got " +
                                std::to_string(stack.size()));
  }
  if (stack.front().channels() != model.arch.frame_channels) {
    throw std::invalid_argument("denoiser expects " + std::to_string(model.arch.frame_channels) +
                                "-channel frames, got " + std::to_string(stack.front().channels()));
  }
}

// Centre frame of the stack as a (1, C, H, W) tensor on the [0, 1] scale.
Tensor4<float> center_tensor(const Tensor4<float>& input, std::size_t window, std::size_t channels) {
  Tensor4<float> c({1, channels, input.rows(), input.cols()});
  c.sample(0) = input.sample(0).middleRows(static_cast<Eigen::Index>((window / 2) * channels),
                                           static_cast<Eigen::Index>(channels));
  return c;
}

Tensor4<float> frame_tensor(const Frame& f) {
  Tensor4<float> t({1, f.channels(), static_cast<std::size_t>(f.rows()), static_cast<std::size_t>(f.cols())});
  for (std::size_t ch = 0; ch < f.channels(); ++ch) {
    t.sample(0).row(static_cast<Eigen::Index>(ch)) =
        (Eigen::Map<const Eigen::RowVectorXd>(f.planes[ch].data(), f.planes[ch].size()) / 255.0).cast<float>();
  }
  return t;
}

Tensor4<float> weight_tensor(const Image& gamma, std::size_t channels) {
  Tensor4<float> t({1, channels, static_cast<std::size_t>(gamma.rows()), static_cast<std::size_t>(gamma.cols())});
  const auto row = Eigen::Map<const Eigen::RowVectorXd>(gamma.data(), gamma.size()).cast<float>().eval();
  for (std::size_t ch = 0; ch < channels; ++ch) t.sample(0).row(static_cast<Eigen::Index>(ch)) = row;
  return t;
}

}  // namespace

Frame denoise_stack(const DenoiserModel& model, std::span<const Frame> stack) {
  check_window(model, stack);
  const Tensor4<float> input = stack_tensor(stack);
  const Tensor4<float> residual = conv_stack_forward(model.arch.stack(), model.params, input);
  Frame out = stack[model.arch.window / 2];
  for (std::size_t ch = 0; ch < model.arch.frame_channels; ++ch) {
    Eigen::Map<Eigen::RowVectorXd> v(out.planes[ch].data(), out.planes[ch].size());
    v = (v + residual.sample(0).row(static_cast<Eigen::Index>(ch)).cast<double>() * 255.0).cwiseMax(0.0).cwiseMin(255.0);
  }
  return out;
}

namespace {

Frame denoise_index(const DenoiserModel& model, const FrameSequence& seq, std::size_t i) {
  const auto idx = window_indices(seq.size(), i, model.arch.window);
  std::vector<Frame> stack;
  stack.reserve(idx.size());
  for (std::size_t k : idx) stack.push_back(seq[k]);
  return denoise_stack(model, stack);
}

}  // namespace

FrameSequence denoise_sequence(const DenoiserModel& model, const FrameSequence& seq) {
  FrameSequence out;
  out.frame_rate = seq.frame_rate;
  out.frames.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) out.frames.push_back(denoise_index(model, seq, i));
  return out;
}

FrameSource denoised_source(const DenoiserModel& model, const FrameSequence& seq) {
  auto cache = std::make_shared<std::map<std::size_t, Frame>>();
  return [&model, &seq, cache](std::size_t i) -> Frame {
    auto it = cache->find(i);
    if (it == cache->end()) it = cache->emplace(i, denoise_index(model, seq, i)).first;
    return it->second;
  };
}

FrameSource raw_source(const FrameSequence& seq) {
  return [&seq](std::size_t i) -> Frame { return seq[i]; };
}

double batch_loss(const DenoiserModel& model, std::span<const TwinPair> batch, Gradients<float>* grads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const ConvStackSpec spec = model.arch.stack();
  const std::size_t channels = model.arch.frame_channels;
  const float inv_batch = 1.0f / static_cast<float>(batch.size());
  double total = 0.0;
  ConvStackCache<float> cache;
  for (const TwinPair& pair : batch) {
    check_window(model, pair.input_stack);
    const Tensor4<float> input = stack_tensor(pair.input_stack);
    const Tensor4<float> residual = conv_stack_forward(spec, model.params, input, grads ? &cache : nullptr);
    const Tensor4<float> prediction = add(center_tensor(input, model.arch.window, channels), residual);
    const LossResult<float> l = masked_l1(prediction, frame_tensor(pair.target), weight_tensor(pair.weight, channels));
    total += static_cast<double>(l.loss);
    if (grads) {
      Tensor4<float> g = l.grad;
      g.data() *= inv_batch;
      conv_stack_backward(spec, model.params, cache, g, *grads);
    }
  }
  return total / static_cast<double>(batch.size());
}

double train_step(DenoiserModel& model, std::span<const TwinPair> batch, double lr) {
  Gradients<float> grads = model.params.zero_gradients();
  const double loss = batch_loss(model, batch, &grads);
  adam_step(model.params, grads, lr);
  return loss;
}

DenoiserModel pretrain(DenoiserModel model, const std::vector<Frame>& corpus, const PretrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
  for (const Frame& f : corpus) {
    if (f.channels() != model.arch.frame_channels) throw std::invalid_argument("pretrain: corpus channel mismatch");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<TwinPair> batch;
    batch.reserve(cfg.batch_size);
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const Frame& image = corpus[pick(rng)];
      const CropWindow w = random_crop(image.rows(), image.cols(), std::min(cfg.crop, image.rows()),
                                       std::min(cfg.crop, image.cols()), rng);
      const Frame clean = crop(image, w);
      const NoiseModel noise{Awgn{cfg.sigma}, rng()};
      TwinPair sample;
      for (std::size_t k = 0; k < model.arch.window; ++k) {
        sample.input_stack.push_back(apply_noise(noise, clean, k));
        sample.provenance.push_back(k);
      }
      sample.target = clean;
      sample.target_source = model.arch.window;
      sample.weight = Image::Ones(clean.rows(), clean.cols());
      batch.push_back(std::move(sample));
    }
    const double loss = train_step(model, batch, cfg.lr);
    if (!std::isfinite(loss)) throw TrainingAborted("pretrain: non-finite loss at step " + std::to_string(step));
    model.loss_log.push_back(loss);
  }
  return model;
}

DenoiserModel finetune(DenoiserModel model, const FrameSequence& noisy, const FinetuneConfig& cfg) {
  model.loss_log.clear();
  if (cfg.batches == 0) return model;
  // Each fine-tuning run starts a fresh optimizer, whether the model was
  // just pretrained or loaded from a checkpoint.
  model.params.reset_optimizer();
  if (noisy.size() < 2) throw std::invalid_argument("finetune: sequence needs at least 2 frames");
  std::mt19937_64 rng(cfg.seed);
  const std::size_t refresh = std::max<std::size_t>(cfg.flow_refresh, 1);
  // The frozen copy feeds online denoising between refreshes.
  DenoiserModel snapshot = model;
  FrameSource estimates = cfg.sampler.online_denoise ? denoised_source(snapshot, noisy) : raw_source(noisy);
  for (std::size_t b = 0; b < cfg.batches; ++b) {
    if (b > 0 && b % refresh == 0 && cfg.sampler.online_denoise) {
      snapshot.params = model.params;
      estimates = denoised_source(snapshot, noisy);
    }
    const MiniBatch batch = assemble_batch(noisy, estimates, cfg.sampler, rng);
    Gradients<float> grads = model.params.zero_gradients();
    const double loss = batch_loss(model, batch.pairs, &grads);
    if (!std::isfinite(loss)) {
      if (cfg.diagnostic_checkpoint) save_model(*cfg.diagnostic_checkpoint, model);
      throw TrainingAborted("finetune: non-finite loss at batch " + std::to_string(b));
    }
    try {
      adam_step(model.params, grads, cfg.lr);
    } catch (const std::domain_error& e) {
      if (cfg.diagnostic_checkpoint) save_model(*cfg.diagnostic_checkpoint, model);
      throw TrainingAborted(std::string("finetune: ") + e.what());
    }
    model.loss_log.push_back(loss);
  }
  return model;
}

}  // namespace blindloom
