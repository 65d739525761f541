#include "blindloom/dae.hpp"

#include "blindloom/checkpoint.hpp"
#include "blindloom/noise.hpp"
#include "blindloom/twin_sampler.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace blindloom {

DaeModel DaeModel::create(std::size_t channels, std::uint64_t seed, std::size_t hidden, std::size_t layers) {
  DaeModel d;
  d.spec = ConvStackSpec{channels, hidden, channels, layers, 3};
  d.params = init_conv_stack<float>(d.spec, seed, /*zero_output=*/true);
  return d;
}

DaeModel DaeModel::from_params(ParamSet<float> params) {
  DaeModel d;
  d.spec = infer_conv_stack(params);
  if (d.spec.in_channels != d.spec.out_channels) throw ShapeError("autoencoder input and output channels differ");
  d.params = std::move(params);
  return d;
}

void save_dae(const std::filesystem::path& path, const DaeModel& dae) { write_checkpoint(path, dae.params); }

DaeModel load_dae(const std::filesystem::path& path) { return DaeModel::from_params(read_checkpoint(path)); }

Frame reconstruct(const DaeModel& dae, const Frame& frame) {
  if (frame.channels() != dae.spec.in_channels) throw std::invalid_argument("autoencoder channel mismatch");
  const Tensor4<float> x = to_tensor(frame);
  Tensor4<float> scaled = x;
  scaled.data() /= 255.0f;
  const Tensor4<float> f = conv_stack_forward(dae.spec, dae.params, scaled);
  Frame out = frame;
  for (std::size_t c = 0; c < frame.channels(); ++c) {
    const auto row = f.sample(0).row(static_cast<Eigen::Index>(c)).cast<double>() * 255.0;
    Eigen::Map<Eigen::RowVectorXd>(out.planes[c].data(), out.planes[c].size()) += row;
  }
  return out;
}

DaeModel train_dae(const std::vector<Frame>& corpus, const DaeTrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("train_dae: empty corpus");
  return train_dae(DaeModel::create(corpus.front().channels(), cfg.seed, cfg.hidden, cfg.layers), corpus, cfg);
}

DaeModel train_dae(DaeModel dae, const std::vector<Frame>& corpus, const DaeTrainConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("train_dae: empty corpus");
  dae.sigma = cfg.sigma;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  ConvStackCache<float> cache;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Gradients<float> grads = dae.params.zero_gradients();
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const Frame& image = corpus[pick(rng)];
      const CropWindow w = random_crop(image.rows(), image.cols(), std::min(cfg.crop, image.rows()),
                                       std::min(cfg.crop, image.cols()), rng);
      const Frame clean = crop(image, w);
      const Frame noisy = apply_noise(NoiseModel{Awgn{cfg.sigma}, rng()}, clean, 0);
      Tensor4<float> x = to_tensor(noisy);
      x.data() /= 255.0f;
      Tensor4<float> t = to_tensor(clean);
      t.data() /= 255.0f;
      const Tensor4<float> f = conv_stack_forward(dae.spec, dae.params, x, &cache);
      // d/df of mean((x + f - t)^2), averaged over the batch.
      Tensor4<float> g = f;
      const auto n = static_cast<float>(f.size() * cfg.batch_size);
      g.data() = (x.data() + f.data() - t.data()) * (2.0f / n);
      conv_stack_backward(dae.spec, dae.params, cache, g, grads);
    }
    adam_step(dae.params, grads, cfg.lr);
  }
  return dae;
}

double reconstruction_error(const DaeModel& dae, const FrameSequence& seq) {
  if (seq.empty()) return 0.0;
  double total = 0.0;
  for (const Frame& y : seq.frames) {
    const Frame r = reconstruct(dae, y);
    double sq = 0.0;
    double count = 0.0;
    for (std::size_t c = 0; c < y.channels(); ++c) {
      sq += (r.planes[c] - y.planes[c]).square().sum();
      count += static_cast<double>(y.planes[c].size());
    }
    total += std::sqrt(sq / count);
  }
  return total / static_cast<double>(seq.size());
}

ModelChoice decide(double error_before, double error_after) {
  return error_after < 0.5 * error_before ? ModelChoice::kFinetuned : ModelChoice::kInitial;
}

SelectionReport select_model(const DaeModel& dae, const FrameSequence& denoised_before,
                             const FrameSequence& denoised_after) {
  if (denoised_before.size() != denoised_after.size()) {
    throw std::invalid_argument("select_model: sequences differ in length");
  }
  SelectionReport r;
  r.error_before = reconstruction_error(dae, denoised_before);
  r.error_after = reconstruction_error(dae, denoised_after);
  r.choice = decide(r.error_before, r.error_after);
  return r;
}

const DenoiserModel& select_model(const DaeModel& dae, const FrameSequence& denoised_before,
                                  const FrameSequence& denoised_after, const DenoiserModel& initial,
                                  const DenoiserModel& finetuned, SelectionReport* report) {
  const SelectionReport r = select_model(dae, denoised_before, denoised_after);
  if (report) *report = r;
  return r.choice == ModelChoice::kFinetuned ? finetuned : initial;
}

std::string to_string(ModelChoice c) { return c == ModelChoice::kFinetuned ? "finetuned" : "initial"; }

}  // namespace blindloom
