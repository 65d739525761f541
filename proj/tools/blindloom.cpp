#include "blindloom/checkpoint.hpp"
#include "blindloom/correspondence.hpp"
#include "blindloom/dae.hpp"
#include "blindloom/denoiser.hpp"
#include "blindloom/experiment.hpp"
#include "blindloom/fixtures.hpp"
#include "blindloom/flow.hpp"
#include "blindloom/frame_io.hpp"
#include "blindloom/metrics.hpp"
#include "blindloom/noise.hpp"
#include "blindloom/twin_sampler.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace blindloom;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeAbort = 3;

KeyValues parse_overrides(const std::vector<std::string>& sets) {
  KeyValues kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return kv;
}

ExperimentConfig make_config(const std::string& file, const std::vector<std::string>& sets) {
  ExperimentConfig cfg;
  if (!file.empty()) cfg.apply(read_key_values(file));
  cfg.apply(parse_overrides(sets));
  return cfg;
}

Frame mask_frame(const Image& m, double scale = 255.0) { return Frame(std::vector<Image>{m * scale}); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blindloom: self-supervised temporal video denoising"};
  app.require_subcommand(1);

  // noise
  std::string in_dir, out_dir, noise_spec = "awgn:20";
  std::uint64_t seed = 0;
  auto* noise = app.add_subcommand("noise", "Corrupt a frame sequence");
  noise->add_option("--in", in_dir, "Input frame directory")->required();
  noise->add_option("--out", out_dir, "Output frame directory")->required();
  noise->add_option("--model", noise_spec, "awgn:S | mg:S | cg:S | ir:P | jpeg:S:Q");
  noise->add_option("--seed", seed);

  // flow
  std::string frame_a, frame_b, out_file;
  FlowSettings flow_settings;
  auto* flow = app.add_subcommand("flow", "Estimate dense flow from frame A to frame B");
  flow->add_option("--a", frame_a)->required();
  flow->add_option("--b", frame_b)->required();
  flow->add_option("--out", out_file, "BLTT1 tensor (1, 2, H, W)")->required();
  flow->add_option("--levels", flow_settings.levels);
  flow->add_option("--smoothness", flow_settings.smoothness);
  flow->add_option("--warps", flow_settings.warps);
  flow->add_option("--iterations", flow_settings.iterations);

  // corr
  std::string seq_dir, config_file, wf_file, wb_file, prev_file, cur_file, emit = "occ,light,gamma";
  std::vector<std::string> sets;
  auto* corr = app.add_subcommand("corr", "Occlusion, lighting and weight maps from a flow pair");
  corr->add_option("--wf", wf_file, "Forward flow (frame i-1 to i), BLTT1")->required();
  corr->add_option("--wb", wb_file, "Backward flow (frame i to i-1), BLTT1")->required();
  corr->add_option("--prev", prev_file, "Clean estimate of frame i-1 (for lighting)");
  corr->add_option("--cur", cur_file, "Clean estimate of frame i (for lighting)");
  corr->add_option("--emit", emit, "Comma list of occ, light, gamma");
  corr->add_option("--out", out_dir)->required();
  corr->add_option("--config", config_file);
  corr->add_option("--set", sets, "key=value override");

  // pretrain
  std::string model_out, dae_out;
  std::size_t channels = 1;
  auto* pre = app.add_subcommand("pretrain", "Supervised AWGN pretraining on a generated corpus");
  pre->add_option("--out", model_out, "Denoiser checkpoint")->required();
  pre->add_option("--dae-out", dae_out, "Also train and write an autoencoder checkpoint");
  pre->add_option("--config", config_file);
  pre->add_option("--set", sets, "key=value override");
  pre->add_option("--channels", channels);

  // train
  std::string init_ckpt;
  std::size_t batches = 100;
  auto* train = app.add_subcommand("train", "Fine-tune on one noisy sequence");
  train->add_option("--seq", seq_dir)->required();
  train->add_option("--init", init_ckpt)->required();
  train->add_option("--batches", batches);
  train->add_option("--config", config_file);
  train->add_option("--set", sets, "key=value override");
  train->add_option("--out", model_out)->required();
  train->add_option("--curve", out_file, "Write (step, loss) pairs");

  // denoise
  std::string model_in;
  auto* denoise = app.add_subcommand("denoise", "Denoise a sequence with a checkpoint");
  denoise->add_option("--model", model_in)->required();
  denoise->add_option("--seq", seq_dir)->required();
  denoise->add_option("--out", out_dir)->required();

  // select
  std::string dae_ckpt, before_dir, after_dir;
  auto* select = app.add_subcommand("select", "Autoencoder gate between initial and fine-tuned output");
  select->add_option("--dae", dae_ckpt)->required();
  select->add_option("--before", before_dir)->required();
  select->add_option("--after", after_dir)->required();

  // eval
  std::string clean_dir, test_dir;
  auto* eval = app.add_subcommand("eval", "Per-frame PSNR/SSIM of a sequence against a reference");
  eval->add_option("--ref", clean_dir)->required();
  eval->add_option("--test", test_dir)->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  ablate->add_option("--config", config_file)->required();
  ablate->add_option("--set", sets, "key=value override");
  ablate->add_option("--out", out_dir)->required();

  // run
  auto* run = app.add_subcommand("run", "Run one experiment end to end");
  run->add_option("--config", config_file);
  run->add_option("--set", sets, "key=value override");
  run->add_option("--out", out_dir)->required();

  // fixture
  std::string kind = "static-texture";
  FixtureSpec fspec;
  auto* fixture = app.add_subcommand("fixture", "Write a synthetic sequence with ground truth");
  fixture->add_option("--kind", kind, "static-texture | translating-texture | occluder-square | lighting-ramp");
  fixture->add_option("--size", fspec.size);
  fixture->add_option("--frames", fspec.frames);
  fixture->add_option("--seed", fspec.seed);
  fixture->add_option("--channels", fspec.channels);
  fixture->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*noise) {
      const NoiseModel model{parse_noise(noise_spec), seed};
      validate(model);
      save_sequence(apply_noise(model, load_sequence(in_dir)), out_dir);
    } else if (*flow) {
      write_tensor(out_file, to_tensor(estimate_flow(read_pnm(frame_a), read_pnm(frame_b), flow_settings)));
    } else if (*corr) {
      const ExperimentConfig cfg = make_config(config_file, sets);
      const SamplerConfig sc = cfg.sampler_config();
      const FlowField wf = flow_from_tensor(read_tensor(wf_file), FlowDirection::kForward);
      const FlowField wb = flow_from_tensor(read_tensor(wb_file), FlowDirection::kBackward);
      auto mask = [&](const FlowField& toward, const FlowField& back) {
        if (sc.occlusion == OcclusionMode::kDivergence) {
          return occlusion_divergence(back, sc.correspondence.divergence_threshold);
        }
        if (sc.occlusion == OcclusionMode::kNone) return OcclusionMask{Image::Zero(back.rows(), back.cols())};
        return occlusion_consistency(toward, back, sc.correspondence);
      };
      const OcclusionMask o_cur = mask(wf, wb);
      const OcclusionMask o_prev = mask(wb, wf);
      LightingMap l_cur{Image::Zero(wb.rows(), wb.cols())};
      LightingMap l_prev = l_cur;
      if (!prev_file.empty() && !cur_file.empty() && sc.lighting) {
        const Frame prev = read_pnm(prev_file);
        const Frame cur = read_pnm(cur_file);
        const CleanEstimates e_cur = clean_estimates(prev, cur, wb);
        const CleanEstimates e_prev = clean_estimates(cur, prev, wf);
        l_cur = lighting_variation(e_cur.current, e_cur.aligned, o_cur, sc.correspondence);
        l_prev = lighting_variation(e_prev.current, e_prev.aligned, o_prev, sc.correspondence);
      }
      fs::create_directories(out_dir);
      const fs::path out(out_dir);
      for (const auto& what : std::vector<std::string>{"occ", "light", "gamma"}) {
        if (emit.find(what) == std::string::npos) continue;
        if (what == "occ") {
          write_tensor(out / "occ_current.bltt", to_tensor(o_cur.occluded));
          write_tensor(out / "occ_previous.bltt", to_tensor(o_prev.occluded));
        } else if (what == "light") {
          write_tensor(out / "light_current.bltt", to_tensor(l_cur.value));
          write_tensor(out / "light_previous.bltt", to_tensor(l_prev.value));
        } else {
          const double a3 = sc.correspondence.alpha3;
          write_tensor(out / "gamma_current.bltt", to_tensor(weight_map(o_cur, l_cur, a3).gamma));
          write_tensor(out / "gamma_previous.bltt", to_tensor(weight_map(o_prev, l_prev, a3).gamma));
        }
      }
    } else if (*pre) {
      ExperimentConfig cfg = make_config(config_file, sets);
      cfg.fixture.channels = channels;
      cfg.sequence.clear();
      save_model(model_out, build_initial_model(cfg));
      if (!dae_out.empty()) save_dae(dae_out, build_dae(cfg));
    } else if (*train) {
      ExperimentConfig cfg = make_config(config_file, sets);
      cfg.batches = batches;
      FinetuneConfig ft = cfg.finetune_config();
      ft.diagnostic_checkpoint = fs::path(model_out).concat(".diag");
      const DenoiserModel tuned = finetune(load_model(init_ckpt), load_sequence(seq_dir), ft);
      save_model(model_out, tuned);
      if (!out_file.empty()) {
        RunReport r;
        r.loss = tuned.loss_log;
        std::ofstream(out_file) << curves_dat(r);
      }
    } else if (*denoise) {
      save_sequence(denoise_sequence(load_model(model_in), load_sequence(seq_dir)), out_dir);
    } else if (*select) {
      const SelectionReport r = select_model(load_dae(dae_ckpt), load_sequence(before_dir), load_sequence(after_dir));
      std::cout << "e0=" << format_metric(r.error_before) << " e1=" << format_metric(r.error_after)
                << " choice=" << to_string(r.choice) << '\n';
    } else if (*eval) {
      const FrameSequence ref = load_sequence(clean_dir);
      const FrameSequence test = load_sequence(test_dir);
      RunReport r;
      r.psnr = psnr_per_frame(test, ref);
      r.ssim = ssim_per_frame(test, ref);
      r.mean_psnr = mean(r.psnr);
      r.mean_ssim = mean(r.ssim);
      std::cout << report_csv(r);
    } else if (*ablate) {
      KeyValues kv = read_key_values(config_file);
      for (auto& o : parse_overrides(sets)) kv.push_back(std::move(o));
      const auto runs = run_ablation(parse_ablation(kv));
      emit_ablation(runs, out_dir);
      std::cout << ablation_csv(runs);
    } else if (*run) {
      const RunReport r = run_experiment(make_config(config_file, sets));
      emit_report(r, out_dir);
      std::cout << summary_text(r);
    } else if (*fixture) {
      fspec.kind = parse_fixture_kind(kind);
      const Fixture fx = make_fixture(fspec);
      save_sequence(fx.clean, out_dir);
      const fs::path gt = fs::path(out_dir) / "gt";
      fs::create_directories(gt);
      for (std::size_t i = 0; i < fx.forward.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "pair_%05zu", i + 1);
        write_tensor(gt / (std::string(name) + "_forward.bltt"), to_tensor(fx.forward[i]));
        write_tensor(gt / (std::string(name) + "_backward.bltt"), to_tensor(fx.backward[i]));
        write_pnm(gt / (std::string(name) + "_occlusion.pgm"), mask_frame(fx.occlusion_current[i]));
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ExperimentError& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return kRuntimeAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeAbort;
  }
  return 0;
}
