#include "blindloom/experiment.hpp"

#include "blindloom/frame_io.hpp"
#include "blindloom/metrics.hpp"
#include "blindloom/noise.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

namespace blindloom {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1" || value == "yes") return true;
  if (value == "off" || value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean '" + value + "' for key '" + key + "'");
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string flag(bool b) { return b ? "on" : "off"; }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "sequence") sequence = value;
    else if (key == "fixture") fixture.kind = parse_fixture_kind(value);
    else if (key == "fixture_size") fixture.size = parse_number<Eigen::Index>(key, value);
    else if (key == "fixture_frames") fixture.frames = parse_number<std::size_t>(key, value);
    else if (key == "fixture_seed") fixture.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "fixture_channels") fixture.channels = parse_number<std::size_t>(key, value);
    else if (key == "noise") { parse_noise(value); noise = value; }
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "sampler") sampler = parse_sampler_mode(value);
    else if (key == "occlusion") occlusion = parse_occlusion_mode(value);
    else if (key == "lighting") lighting = parse_bool(key, value);
    else if (key == "online_denoise") online_denoise = parse_bool(key, value);
    else if (key == "refine_flow") refine_flow = parse_bool(key, value);
    else if (key == "dae") dae = parse_bool(key, value);
    else if (key == "alpha1") alpha1 = parse_number<double>(key, value);
    else if (key == "alpha2") alpha2 = parse_number<double>(key, value);
    else if (key == "alpha3") alpha3 = parse_number<double>(key, value);
    else if (key == "lambda") lambda = parse_number<double>(key, value);
    else if (key == "batches") batches = parse_number<std::size_t>(key, value);
    else if (key == "lr") lr = parse_number<double>(key, value);
    else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
    else if (key == "crop") crop = parse_number<Eigen::Index>(key, value);
    else if (key == "flow_refresh") flow_refresh = parse_number<std::size_t>(key, value);
    else if (key == "window") arch.window = parse_number<std::size_t>(key, value);
    else if (key == "hidden") arch.hidden_channels = parse_number<std::size_t>(key, value);
    else if (key == "layers") arch.layers = parse_number<std::size_t>(key, value);
    else if (key == "flow_levels") flow.levels = parse_number<int>(key, value);
    else if (key == "flow_smoothness") flow.smoothness = parse_number<double>(key, value);
    else if (key == "flow_warps") flow.warps = parse_number<int>(key, value);
    else if (key == "flow_iterations") flow.iterations = parse_number<int>(key, value);
    else if (key == "init") init = value;
    else if (key == "pretrain_steps") pretrain.steps = parse_number<std::size_t>(key, value);
    else if (key == "pretrain_lr") pretrain.lr = parse_number<double>(key, value);
    else if (key == "pretrain_sigma") pretrain.sigma = parse_number<double>(key, value);
    else if (key == "pretrain_batch") pretrain.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "pretrain_crop") pretrain.crop = parse_number<Eigen::Index>(key, value);
    else if (key == "pretrain_seed") pretrain.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "corpus_count") corpus_count = parse_number<std::size_t>(key, value);
    else if (key == "corpus_size") corpus_size = parse_number<Eigen::Index>(key, value);
    else if (key == "dae_checkpoint") dae_checkpoint = value;
    else if (key == "dae_steps") dae_train.steps = parse_number<std::size_t>(key, value);
    else if (key == "dae_sigma") dae_train.sigma = parse_number<double>(key, value);
    else if (key == "dae_lr") dae_train.lr = parse_number<double>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

void ExperimentConfig::apply(const KeyValues& kv) {
  for (const auto& [k, v] : kv) set(k, v);
}

KeyValues ExperimentConfig::echo() const {
  return {
      {"sequence", sequence},
      {"fixture", to_string(fixture.kind)},
      {"fixture_size", std::to_string(fixture.size)},
      {"fixture_frames", std::to_string(fixture.frames)},
      {"fixture_seed", std::to_string(fixture.seed)},
      {"fixture_channels", std::to_string(fixture.channels)},
      {"noise", noise},
      {"seed", std::to_string(seed)},
      {"sampler", to_string(sampler)},
      {"occlusion", to_string(occlusion)},
      {"lighting", flag(lighting)},
      {"online_denoise", flag(online_denoise)},
      {"refine_flow", flag(refine_flow)},
      {"dae", flag(dae)},
      {"alpha1", num(alpha1)},
      {"alpha2", num(alpha2)},
      {"alpha3", num(alpha3)},
      {"lambda", num(lambda)},
      {"batches", std::to_string(batches)},
      {"lr", num(lr)},
      {"batch_size", std::to_string(batch_size)},
      {"crop", std::to_string(crop)},
      {"flow_refresh", std::to_string(flow_refresh)},
      {"window", std::to_string(arch.window)},
      {"hidden", std::to_string(arch.hidden_channels)},
      {"layers", std::to_string(arch.layers)},
      {"flow_levels", std::to_string(flow.levels)},
      {"flow_smoothness", num(flow.smoothness)},
      {"flow_warps", std::to_string(flow.warps)},
      {"flow_iterations", std::to_string(flow.iterations)},
      {"init", init},
      {"pretrain_steps", std::to_string(pretrain.steps)},
      {"pretrain_lr", num(pretrain.lr)},
      {"pretrain_sigma", num(pretrain.sigma)},
      {"pretrain_batch", std::to_string(pretrain.batch_size)},
      {"pretrain_crop", std::to_string(pretrain.crop)},
      {"pretrain_seed", std::to_string(pretrain.seed)},
      {"corpus_count", std::to_string(corpus_count)},
      {"corpus_size", std::to_string(corpus_size)},
      {"dae_checkpoint", dae_checkpoint},
      {"dae_steps", std::to_string(dae_train.steps)},
      {"dae_sigma", num(dae_train.sigma)},
      {"dae_lr", num(dae_train.lr)},
  };
}

SamplerConfig ExperimentConfig::sampler_config() const {
  SamplerConfig s;
  s.window = arch.window;
  s.batch_size = batch_size;
  s.crop = crop;
  s.occlusion = occlusion;
  s.lighting = lighting;
  s.online_denoise = online_denoise;
  s.sampler = sampler;
  s.refine_flow = refine_flow;
  s.flow = flow;
  s.refine.lambda = lambda;
  s.correspondence.alpha1 = alpha1;
  s.correspondence.alpha2 = alpha2;
  s.correspondence.alpha3 = alpha3;
  return s;
}

FinetuneConfig ExperimentConfig::finetune_config() const {
  FinetuneConfig f;
  f.sampler = sampler_config();
  f.batches = batches;
  f.lr = lr;
  f.seed = seed;
  f.flow_refresh = flow_refresh;
  return f;
}

ExperimentConfig load_config(const std::filesystem::path& path, const KeyValues& overrides) {
  ExperimentConfig cfg;
  cfg.apply(read_key_values(path));
  cfg.apply(overrides);
  return cfg;
}

LoadedInput load_input(const ExperimentConfig& cfg) {
  LoadedInput in;
  if (!cfg.sequence.empty()) {
    in.clean = load_sequence(cfg.sequence);
  } else {
    in.fixture = make_fixture(cfg.fixture);
    in.clean = in.fixture->clean;
  }
  return in;
}

DenoiserModel build_initial_model(const ExperimentConfig& cfg) {
  if (!cfg.init.empty()) return load_model(cfg.init);
  DenoiserArchitecture arch = cfg.arch;
  arch.frame_channels = cfg.sequence.empty() ? cfg.fixture.channels : load_sequence(cfg.sequence)[0].channels();
  const auto corpus = make_corpus(cfg.corpus_count, cfg.corpus_size, cfg.pretrain.seed, arch.frame_channels);
  return pretrain(DenoiserModel::create(arch, cfg.pretrain.seed), corpus, cfg.pretrain);
}

DaeModel build_dae(const ExperimentConfig& cfg) {
  if (!cfg.dae_checkpoint.empty()) return load_dae(cfg.dae_checkpoint);
  const std::size_t channels = cfg.sequence.empty() ? cfg.fixture.channels : load_sequence(cfg.sequence)[0].channels();
  const auto corpus = make_corpus(cfg.corpus_count, cfg.corpus_size, cfg.pretrain.seed, channels);
  return train_dae(corpus, cfg.dae_train);
}

RunReport run_experiment(const ExperimentConfig& cfg, const ExperimentResources& resources) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.config = cfg.echo();
  report.seed = cfg.seed;
  std::string stage;
  auto done = [&] { report.stages.push_back(stage); };
  try {
    stage = "load";
    const LoadedInput input = load_input(cfg);
    done();

    stage = "noise";
    const NoiseModel noise{parse_noise(cfg.noise), cfg.seed};
    const FrameSequence noisy = apply_noise(noise, input.clean);
    report.noisy_psnr = psnr_per_frame(noisy, input.clean);
    done();

    stage = "init";
    std::optional<DenoiserModel> built;
    if (!resources.initial) built = build_initial_model(cfg);
    const DenoiserModel& initial = resources.initial ? *resources.initial : *built;
    const FrameSequence before = denoise_sequence(initial, noisy);
    report.initial_psnr = psnr_per_frame(before, input.clean);
    done();

    stage = "finetune";
    const DenoiserModel tuned = finetune(initial, noisy, cfg.finetune_config());
    report.loss = tuned.loss_log;
    done();

    stage = "denoise";
    FrameSequence output = denoise_sequence(tuned, noisy);
    done();

    if (cfg.dae) {
      stage = "select";
      std::optional<DaeModel> dae_built;
      if (!resources.dae) dae_built = build_dae(cfg);
      const DaeModel& dae = resources.dae ? *resources.dae : *dae_built;
      report.selection = select_model(dae, before, output);
      if (report.selection->choice == ModelChoice::kInitial) output = before;
      done();
    }

    stage = "metrics";
    report.psnr = psnr_per_frame(output, input.clean);
    report.ssim = ssim_per_frame(output, input.clean);
    report.mean_psnr = mean(report.psnr);
    report.mean_ssim = mean(report.ssim);
    report.mean_noisy_psnr = mean(report.noisy_psnr);
    report.mean_initial_psnr = mean(report.initial_psnr);
    done();
  } catch (const std::exception& e) {
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    throw ExperimentError(stage, e.what(), std::move(report));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string report_csv(const RunReport& r) {
  std::ostringstream os;
  os << "frame,psnr,ssim,noisy_psnr,initial_psnr\n";
  auto at = [](const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? format_metric(v[i]) : std::string("nan");
  };
  for (std::size_t i = 0; i < r.psnr.size(); ++i) {
    os << i << ',' << at(r.psnr, i) << ',' << at(r.ssim, i) << ',' << at(r.noisy_psnr, i) << ','
       << at(r.initial_psnr, i) << '\n';
  }
  if (!r.psnr.empty()) {
    auto m = [](const std::vector<double>& v, double value) {
      return v.empty() ? std::string("nan") : format_metric(value);
    };
    os << "mean," << m(r.psnr, r.mean_psnr) << ',' << m(r.ssim, r.mean_ssim) << ','
       << m(r.noisy_psnr, r.mean_noisy_psnr) << ',' << m(r.initial_psnr, r.mean_initial_psnr) << '\n';
  }
  return os.str();
}

std::string curves_dat(const RunReport& r) {
  std::ostringstream os;
  os << "# step loss\n";
  for (std::size_t i = 0; i < r.loss.size(); ++i) os << i << ' ' << format_metric(r.loss[i]) << '\n';
  return os.str();
}

std::string summary_text(const RunReport& r) {
  std::ostringstream os;
  os << "seed " << r.seed << '\n';
  os << "frames " << r.psnr.size() << '\n';
  os << "mean_psnr " << format_metric(r.mean_psnr) << '\n';
  os << "mean_ssim " << format_metric(r.mean_ssim) << '\n';
  os << "noisy_psnr " << format_metric(r.mean_noisy_psnr) << '\n';
  os << "initial_psnr " << format_metric(r.mean_initial_psnr) << '\n';
  os << "batches " << r.loss.size() << '\n';
  if (r.selection) {
    os << "dae e0=" << format_metric(r.selection->error_before) << " e1=" << format_metric(r.selection->error_after)
       << " choice=" << to_string(r.selection->choice) << '\n';
  }
  os << "wall_seconds " << format_metric(r.wall_seconds) << '\n';
  os << "\n[config]\n";
  for (const auto& [k, v] : r.config) os << k << " = " << v << '\n';
  return os.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void make_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

}  // namespace

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  make_directory(dir);
  write_text(dir / "report.csv", report_csv(report));
  write_text(dir / "summary.txt", summary_text(report));
  write_text(dir / "curves.dat", curves_dat(report));
}

AblationSpec parse_ablation(const KeyValues& kv) {
  AblationSpec spec;
  KeyValues base;
  for (const auto& [k, v] : kv) {
    if (k.rfind("ablate.", 0) == 0) {
      const std::string key = k.substr(7);
      auto values = split_list(v);
      if (values.empty()) throw ConfigError("ablation axis '" + key + "' has no values");
      ExperimentConfig probe;
      for (const auto& value : values) probe.set(key, value);
      spec.axes.emplace_back(key, std::move(values));
    } else if (k == "seeds") {
      for (const auto& s : split_list(v)) spec.seeds.push_back(parse_number<std::uint64_t>(k, s));
    } else {
      base.emplace_back(k, v);
    }
  }
  spec.base.apply(base);
  if (spec.seeds.empty()) spec.seeds.push_back(spec.base.seed);
  return spec;
}

std::vector<AblationRun> run_ablation(const AblationSpec& spec, const ExperimentResources& resources) {
  std::vector<KeyValues> arms{{}};
  for (const auto& [key, values] : spec.axes) {
    std::vector<KeyValues> next;
    for (const auto& arm : arms) {
      for (const auto& v : values) {
        KeyValues a = arm;
        a.emplace_back(key, v);
        next.push_back(std::move(a));
      }
    }
    arms = std::move(next);
  }
  // Build shared models once when the config does not pin them per arm.
  std::optional<DenoiserModel> initial;
  std::optional<DaeModel> dae;
  ExperimentResources shared = resources;
  bool per_arm_init = false;
  for (const auto& axis : spec.axes) {
    const std::string& k = axis.first;
    if (k == "window" || k == "hidden" || k == "layers" || k == "init" || k == "fixture_channels" ||
        k == "sequence" || k.rfind("pretrain_", 0) == 0 || k.rfind("corpus_", 0) == 0) {
      per_arm_init = true;
    }
  }
  if (!shared.initial && !per_arm_init) {
    initial = build_initial_model(spec.base);
    shared.initial = &*initial;
  }
  std::vector<AblationRun> runs;
  for (const auto& arm : arms) {
    std::string label;
    for (const auto& [k, v] : arm) label += (label.empty() ? "" : ";") + k + "=" + v;
    if (label.empty()) label = "base";
    for (std::uint64_t seed : spec.seeds) {
      ExperimentConfig cfg = spec.base;
      cfg.apply(arm);
      cfg.seed = seed;
      if (cfg.dae && !shared.dae) {
        dae = build_dae(spec.base);
        shared.dae = &*dae;
      }
      runs.push_back(AblationRun{label, seed, run_experiment(cfg, shared)});
    }
  }
  return runs;
}

std::string ablation_csv(const std::vector<AblationRun>& runs) {
  std::ostringstream os;
  os << "arm,seed,mean_psnr,mean_ssim,noisy_psnr,initial_psnr,final_loss,choice\n";
  for (const auto& r : runs) {
    const RunReport& p = r.report;
    os << '"' << r.arm << '"' << ',' << r.seed << ',' << format_metric(p.mean_psnr) << ','
       << format_metric(p.mean_ssim) << ',' << format_metric(p.mean_noisy_psnr) << ','
       << format_metric(p.mean_initial_psnr) << ',' << (p.loss.empty() ? "nan" : format_metric(p.loss.back())) << ','
       << (p.selection ? to_string(p.selection->choice) : "none") << '\n';
  }
  return os.str();
}

void emit_ablation(const std::vector<AblationRun>& runs, const std::filesystem::path& dir) {
  make_directory(dir);
  write_text(dir / "ablation.csv", ablation_csv(runs));
  for (std::size_t i = 0; i < runs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%03zu", i);
    emit_report(runs[i].report, dir / name);
  }
}

}  // namespace blindloom
