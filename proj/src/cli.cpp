// Copyright 2026 The PAD Distillation Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pad/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "pad/config.hpp"
#include "pad/significance.hpp"
#include "pad/tensor_io.hpp"

namespace pad::cli {
namespace {

namespace fs = std::filesystem;

class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> named;
};

void addConfigFlags(CLI::App& cmd, ConfigFlags& flags, bool config_required) {
  auto* opt = cmd.add_option("--config", flags.config_path, "Key-value run configuration file");
  if (config_required) opt->required();
  cmd.add_option("--set", flags.sets, "Override a config key: --set key=value (repeatable)");
  for (const auto& key : configKeys()) {
    std::string flag = "--" + key;
    std::replace(flag.begin() + 2, flag.end(), '_', '-');
    cmd.add_option_function<std::string>(
        flag, [&flags, key](const std::string& v) { flags.named[key] = v; }, "Override config key " + key);
  }
}

TrainConfig resolveConfig(const ConfigFlags& flags) {
  TrainConfig cfg = flags.config_path.empty() ? TrainConfig{} : loadConfig(flags.config_path);
  for (const auto& s : flags.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    applySetting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, value] : flags.named) applySetting(cfg, key, value);
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeFailure("write failed for " + path.string());
}

void makeDirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
}

std::string manifestText(const TrainConfig& cfg, const fs::path& out_dir) {
  std::ostringstream os;
  os << "# run_id = " << runId(cfg) << "\n";
  os << "# output_dir = " << out_dir.string() << "\n";
  os << serializeConfig(cfg);
  return os.str();
}

TrainResult runTraining(const TrainConfig& cfg, const fs::path& dir, std::ostream& out) {
  makeDirs(dir);
  writeText(dir / "manifest.txt", manifestText(cfg, dir));
  auto result = runExperiment(cfg, [&out](const EpochMetrics& m) {
    out << "epoch " << m.epoch << " train_loss=" << m.train_loss << " dev_loss=" << m.dev_loss
        << " retrieval_acc=" << m.retrieval_acc << " frame_acc=" << m.frame_acc << "\n";
  });
  if (result.teacher_digest_before != result.teacher_digest_after) {
    throw RuntimeFailure("teacher parameters changed during training");
  }
  std::ostringstream csv;
  writeMetricsCsv(result.history, csv);
  writeText(dir / "metrics.csv", csv.str());
  return result;
}

int cmdTrain(const ConfigFlags& flags, const std::string& out_flag, std::ostream& out) {
  const auto cfg = resolveConfig(flags);
  const fs::path dir = out_flag.empty() ? defaultOutputRoot() / runId(cfg) : fs::path(out_flag);
  out << "run " << runId(cfg) << " variant " << formatLossSpec(cfg.loss) << " seed " << cfg.seed << " -> "
      << dir.string() << "\n";
  runTraining(cfg, dir, out);
  return kExitOk;
}

int cmdAblate(const ConfigFlags& flags, const std::string& out_flag, std::ostream& out) {
  const auto base = resolveConfig(flags);
  const fs::path root = out_flag.empty() ? defaultOutputRoot() / ("ablate-" + runId(base)) : fs::path(out_flag);
  makeDirs(root);
  std::ostringstream summary;
  summary << "cell,variant,first_dev_loss,final_dev_loss,dev_loss_reduction,retrieval_acc,frame_acc\n"
          << std::setprecision(9);
  for (const auto& cell : ablationGrid(base)) {
    out << "cell " << cell.name << "\n";
    const auto result = runTraining(cell.config, root / cell.name, out);
    const auto& first = result.history.front();
    const auto& last = result.history.back();
    summary << cell.name << ',' << formatLossSpec(cell.config.loss) << ',' << first.dev_loss << ',' << last.dev_loss
            << ',' << first.dev_loss - last.dev_loss << ',' << last.retrieval_acc << ',' << last.frame_acc << "\n";
  }
  writeText(root / "summary.csv", summary.str());
  out << "wrote " << (root / "summary.csv").string() << "\n";
  return kExitOk;
}

const io::NamedTensor& attentionTensor(const io::TensorBundle& bundle, const std::string& name) {
  const auto* t = name.empty() ? io::findRole(bundle, io::TensorRole::Attention) : io::find(bundle, name);
  if (!t) throw RuntimeFailure(name.empty() ? "bundle has no attention tensor" : "bundle has no tensor '" + name + "'");
  if (t->role != io::TensorRole::Attention) throw RuntimeFailure("tensor '" + t->name + "' is not an attention tensor");
  return *t;
}

struct InspectOptions {
  std::string what;
  std::string bundle;
  std::string tensor;
  std::string layer_mode = "all";
  int xi = SpanConfig{}.base_scale;
  int num_scales = SpanConfig{}.num_scales;
  std::string anchor_mode = "prior";
  bool fixed_scale = false;
};

int cmdInspect(const InspectOptions& o, std::ostream& out) {
  TrainConfig scratch;
  applySetting(scratch, "layer_mode", o.layer_mode);
  applySetting(scratch, "anchor_mode", o.anchor_mode);
  SpanConfig span = scratch.loss_options.span;
  span.base_scale = o.xi;
  span.num_scales = o.num_scales;
  span.multi_scale = !o.fixed_scale;
  try {
    span.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  const auto bundle = io::readBundle(o.bundle);
  const auto stack = io::toAttentionStack(attentionTensor(bundle, o.tensor));
  AttentionStack<double> maps;
  for (const auto& m : stack) maps.push_back(m.cast<double>());
  const auto prior = asp(maps, scratch.loss_options.layer_mode);
  out << std::setprecision(9);
  if (o.what == "asp") {
    out << "position,weight\n";
    for (Eigen::Index i = 0; i < prior.weights.size(); ++i) out << i << ',' << prior.weights(i) << "\n";
    return kExitOk;
  }
  const auto anchors = selectAnchors(prior, span);
  const auto widths = span.halfWidths();
  const int n = int(prior.weights.size());
  out << "rank,anchor,scale_index,half_width,lo,hi\n";
  for (std::size_t m = 0; m < anchors.size(); ++m) {
    for (std::size_t q = 0; q < widths.size(); ++q) {
      const int lo = std::max(0, anchors[m] - widths[q]);
      const int hi = std::min(n - 1, anchors[m] + widths[q]);
      out << m << ',' << anchors[m] << ',' << q << ',' << widths[q] << ',' << lo << ',' << hi << "\n";
    }
  }
  return kExitOk;
}

int cmdGenData(const ConfigFlags& flags, const std::string& out_path, std::ostream& out) {
  const auto cfg = resolveConfig(flags);
  const auto ex = prepareExperiment(cfg);
  Dataset all = ex.data.train;
  all.insert(all.end(), ex.data.dev.begin(), ex.data.dev.end());
  auto bundle = io::datasetToBundle(all);
  bundle.push_back(io::fromMatrix("teacher.embedding", ex.teacher.input, io::TensorRole::Hidden));
  std::vector<int> split(ex.data.train.size(), 0);
  split.resize(all.size(), 1);
  bundle.push_back(io::fromInts("split", split, io::TensorRole::Tokens));
  io::writeBundle(bundle, out_path);
  writeText(fs::path(out_path) / "config.txt", manifestText(cfg, out_path));
  out << "wrote " << all.size() << " examples (" << ex.data.train.size() << " train, " << ex.data.dev.size()
      << " dev) to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

std::string runId(const TrainConfig& cfg) {
  const auto text = serializeConfig(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(12) << std::setfill('0') << (h & 0xffffffffffffull);
  return os.str();
}

fs::path defaultOutputRoot() {
  const char* env = std::getenv("PAD_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

std::vector<AblationCell> ablationGrid(const TrainConfig& base) {
  std::vector<AblationCell> cells;
  auto add = [&](std::string name, LossSpec loss, auto tweak) {
    TrainConfig c = base;
    c.loss = std::move(loss);
    tweak(c.loss_options);
    cells.push_back({std::move(name), std::move(c)});
  };
  auto none = [](LossOptions&) {};
  const auto G = LossSpec::single(Variant::PadGlob);
  const auto T = LossSpec::single(Variant::PadTLocal);
  const auto S = LossSpec::single(Variant::PadSLocal);
  add("pad_glob", G, none);
  add("pad_glob-no_speech_prior", G, [](LossOptions& o) { o.speech_prior = false; });
  add("pad_glob-no_text_prior", G, [](LossOptions& o) { o.text_prior = false; });
  add("pad_glob-no_priors", G, [](LossOptions& o) { o.speech_prior = o.text_prior = false; });
  add("pad_tlocal", T, none);
  add("pad_tlocal-no_prior", T, [](LossOptions& o) { o.text_prior = false; });
  add("pad_slocal", S, none);
  add("pad_slocal-no_prior", S, [](LossOptions& o) { o.speech_prior = o.text_prior = false; });
  add("pad_slocal-no_span_pool", S, [](LossOptions& o) { o.span.multi_scale = false; });
  add("pad_slocal-no_anchor_pts", S, [](LossOptions& o) { o.span.anchor_mode = AnchorMode::EvenStride; });
  auto joint = [](std::vector<Variant> vs) {
    LossSpec s;
    for (auto v : vs) s.components.emplace_back(v, 1.0);
    return s;
  };
  add("joint-g_t", joint({Variant::PadGlob, Variant::PadTLocal}), none);
  add("joint-g_s", joint({Variant::PadGlob, Variant::PadSLocal}), none);
  add("joint-t_s", joint({Variant::PadTLocal, Variant::PadSLocal}), none);
  add("joint-all", joint({Variant::PadGlob, Variant::PadTLocal, Variant::PadSLocal}), none);
  return cells;
}

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prior-informed adaptive knowledge distillation engine", "pad"};
  app.require_subcommand(1);

  ConfigFlags train_flags, ablate_flags, gen_flags;
  std::string train_out, ablate_out, gen_out;
  auto* train_cmd = app.add_subcommand("train", "Train a student against the frozen teacher");
  addConfigFlags(*train_cmd, train_flags, false);
  train_cmd->add_option("--out", train_out, "Run directory (default: $PAD_OUT_DIR/<run id>)");

  auto* ablate_cmd = app.add_subcommand("ablate", "Run the prior/span/anchor ablations and joint-loss grid");
  addConfigFlags(*ablate_cmd, ablate_flags, true);
  ablate_cmd->add_option("--out", ablate_out, "Output root (default: $PAD_OUT_DIR/ablate-<run id>)");

  InspectOptions inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print priors or anchors/scales of an attention bundle as CSV");
  inspect_cmd->add_option("what", inspect.what, "asp or aasa")->required()->check(CLI::IsMember({"asp", "aasa"}));
  inspect_cmd->add_option("--bundle", inspect.bundle, "Bundle directory or manifest")->required();
  inspect_cmd->add_option("--tensor", inspect.tensor, "Attention tensor name (default: first attention tensor)");
  inspect_cmd->add_option("--layer-mode", inspect.layer_mode, "all or last");
  inspect_cmd->add_option("--xi", inspect.xi, "Base span scale (even, >= 2)");
  inspect_cmd->add_option("--num-scales", inspect.num_scales, "Number of span scales");
  inspect_cmd->add_option("--anchor-mode", inspect.anchor_mode, "prior or even_stride");
  inspect_cmd->add_flag("--fixed-scale", inspect.fixed_scale, "Use a single half-width");

  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic paired dataset bundle");
  addConfigFlags(*gen_cmd, gen_flags, true);
  gen_cmd->add_option("--out", gen_out, "Bundle directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmdTrain(train_flags, train_out, out);
    if (ablate_cmd->parsed()) return cmdAblate(ablate_flags, ablate_out, out);
    if (inspect_cmd->parsed()) return cmdInspect(inspect, out);
    if (gen_cmd->parsed()) return cmdGenData(gen_flags, gen_out, out);
  } catch (const UnknownVariant& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace pad::cli
