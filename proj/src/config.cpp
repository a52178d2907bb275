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

#include "pad/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace pad {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double toDouble(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

template <typename Int>
Int toInt(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool toBool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string choice(std::string_view key, std::string_view v, const std::vector<std::pair<std::string, T>>& options,
                   T& out) {
  for (const auto& [name, value] : options) {
    if (name == v) {
      out = value;
      return name;
    }
  }
  std::string valid;
  for (const auto& [name, value] : options) valid += (valid.empty() ? "" : ", ") + name;
  throw ConfigError(std::string(key) + ": expected one of " + valid + ", got '" + std::string(v) + "'");
}

template <typename T>
std::string nameOf(const std::vector<std::pair<std::string, T>>& options, T value) {
  for (const auto& [name, v] : options) {
    if (v == value) return name;
  }
  return "unknown";
}

const std::vector<std::pair<std::string, OptimizerKind>> kOptimizers = {{"sgd", OptimizerKind::Sgd},
                                                                         {"adam", OptimizerKind::Adam}};
const std::vector<std::pair<std::string, LayerMode>> kLayerModes = {{"all", LayerMode::All}, {"last", LayerMode::Last}};
const std::vector<std::pair<std::string, SpanPooling>> kPoolings = {{"mean", SpanPooling::Mean},
                                                                    {"max", SpanPooling::Max}};
const std::vector<std::pair<std::string, AnchorMode>> kAnchorModes = {{"prior", AnchorMode::Prior},
                                                                      {"even_stride", AnchorMode::EvenStride}};

struct Field {
  std::function<void(TrainConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename Member>
Field numberField(Member member) {
  using T = std::remove_reference_t<decltype(std::declval<TrainConfig&>().*member)>;
  return {[member](TrainConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*member = toDouble(k, v);
            } else {
              c.*member = toInt<T>(k, v);
            }
          },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(double(c.*member));
            } else {
              return std::to_string(c.*member);
            }
          }};
}

template <typename Get>
Field nested(Get get) {
  using T = std::remove_reference_t<decltype(get(std::declval<TrainConfig&>()))>;
  return {[get](TrainConfig& c, std::string_view k, std::string_view v) {
            T& ref = get(c);
            if constexpr (std::is_same_v<T, bool>) {
              ref = toBool(k, v);
            } else if constexpr (std::is_floating_point_v<T>) {
              ref = toDouble(k, v);
            } else {
              ref = toInt<T>(k, v);
            }
          },
          [get](const TrainConfig& c) {
            const T& ref = get(const_cast<TrainConfig&>(c));
            if constexpr (std::is_same_v<T, bool>) {
              return fmt(ref);
            } else if constexpr (std::is_floating_point_v<T>) {
              return fmt(double(ref));
            } else {
              return std::to_string(ref);
            }
          }};
}

template <typename T, typename Get>
Field enumField(const std::vector<std::pair<std::string, T>>& options, Get get) {
  return {[&options, get](TrainConfig& c, std::string_view k, std::string_view v) { choice(k, v, options, get(c)); },
          [&options, get](const TrainConfig& c) { return nameOf(options, get(const_cast<TrainConfig&>(c))); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    t.emplace_back("variant", Field{[](TrainConfig& c, std::string_view, std::string_view v) { c.loss = parseLossSpec(v); },
                                    [](const TrainConfig& c) { return formatLossSpec(c.loss); }});
    t.emplace_back("optimizer", enumField(kOptimizers, [](TrainConfig& c) -> OptimizerKind& { return c.optimizer; }));
    t.emplace_back("lr", numberField(&TrainConfig::learning_rate));
    t.emplace_back("adam_beta1", nested([](TrainConfig& c) -> double& { return c.adam.beta1; }));
    t.emplace_back("adam_beta2", nested([](TrainConfig& c) -> double& { return c.adam.beta2; }));
    t.emplace_back("adam_eps", nested([](TrainConfig& c) -> double& { return c.adam.epsilon; }));
    t.emplace_back("epochs", numberField(&TrainConfig::epochs));
    t.emplace_back("batch_size", numberField(&TrainConfig::batch_size));
    t.emplace_back("seed", numberField(&TrainConfig::seed));
    t.emplace_back("layer_mode",
                   enumField(kLayerModes, [](TrainConfig& c) -> LayerMode& { return c.loss_options.layer_mode; }));
    t.emplace_back("prior_gradient", nested([](TrainConfig& c) -> bool& { return c.loss_options.prior_gradient; }));
    t.emplace_back("speech_prior", nested([](TrainConfig& c) -> bool& { return c.loss_options.speech_prior; }));
    t.emplace_back("text_prior", nested([](TrainConfig& c) -> bool& { return c.loss_options.text_prior; }));
    t.emplace_back("blank_logit", nested([](TrainConfig& c) -> double& { return c.loss_options.blank_logit; }));
    t.emplace_back("xi", nested([](TrainConfig& c) -> int& { return c.loss_options.span.base_scale; }));
    t.emplace_back("num_scales", nested([](TrainConfig& c) -> int& { return c.loss_options.span.num_scales; }));
    t.emplace_back("multi_scale", nested([](TrainConfig& c) -> bool& { return c.loss_options.span.multi_scale; }));
    t.emplace_back("span_pooling",
                   enumField(kPoolings, [](TrainConfig& c) -> SpanPooling& { return c.loss_options.span.pooling; }));
    t.emplace_back("anchor_mode",
                   enumField(kAnchorModes, [](TrainConfig& c) -> AnchorMode& { return c.loss_options.span.anchor_mode; }));
    t.emplace_back("num_pairs", numberField(&TrainConfig::num_pairs));
    t.emplace_back("dev_fraction", numberField(&TrainConfig::dev_fraction));
    t.emplace_back("vocab_size", nested([](TrainConfig& c) -> int& { return c.data.vocab_size; }));
    t.emplace_back("min_text_len", nested([](TrainConfig& c) -> int& { return c.data.min_text_len; }));
    t.emplace_back("max_text_len", nested([](TrainConfig& c) -> int& { return c.data.max_text_len; }));
    t.emplace_back("min_repeat", nested([](TrainConfig& c) -> int& { return c.data.min_repeat; }));
    t.emplace_back("max_repeat", nested([](TrainConfig& c) -> int& { return c.data.max_repeat; }));
    t.emplace_back("blank_prob", nested([](TrainConfig& c) -> double& { return c.data.blank_prob; }));
    t.emplace_back("noise_std", nested([](TrainConfig& c) -> double& { return c.data.noise_std; }));
    t.emplace_back("blank_std", nested([](TrainConfig& c) -> double& { return c.data.blank_std; }));
    t.emplace_back("model_dim", Field{[](TrainConfig& c, std::string_view k, std::string_view v) {
                                        c.teacher.model_dim = c.student.model_dim = toInt<int>(k, v);
                                      },
                                      [](const TrainConfig& c) { return std::to_string(c.teacher.model_dim); }});
    for (const auto& [prefix, pick] :
         std::vector<std::pair<std::string, EncoderConfig& (*)(TrainConfig&)>>{
             {"teacher", [](TrainConfig& c) -> EncoderConfig& { return c.teacher; }},
             {"student", [](TrainConfig& c) -> EncoderConfig& { return c.student; }}}) {
      t.emplace_back(prefix + "_layers", nested([pick](TrainConfig& c) -> int& { return pick(c).num_layers; }));
      t.emplace_back(prefix + "_heads", nested([pick](TrainConfig& c) -> int& { return pick(c).num_heads; }));
      t.emplace_back(prefix + "_ffn_dim", nested([pick](TrainConfig& c) -> int& { return pick(c).ffn_dim; }));
      t.emplace_back(prefix + "_init_scale", nested([pick](TrainConfig& c) -> double& { return pick(c).init_scale; }));
    }
    return t;
  }();
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

LossSpec parseLossSpec(std::string_view text) {
  LossSpec spec;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (item.empty()) throw ConfigError("variant: empty component in '" + std::string(text) + "'");
    const auto colon = item.find(':');
    const auto name = trim(item.substr(0, colon));
    const double weight = colon == std::string_view::npos ? 1.0 : toDouble("variant weight", trim(item.substr(colon + 1)));
    spec.components.emplace_back(parseVariant(name), weight);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  try {
    spec.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("variant: ") + e.what());
  }
  return spec;
}

std::string formatLossSpec(const LossSpec& spec) {
  if (spec.components.size() == 1 && spec.components.front().second == 1.0) {
    return std::string(variantName(spec.components.front().first));
  }
  std::string out;
  for (const auto& [v, w] : spec.components) {
    if (!out.empty()) out += ",";
    out += std::string(variantName(v)) + ":" + fmt(w);
  }
  return out;
}

void applySetting(TrainConfig& cfg, std::string_view key, std::string_view value) {
  field(key).set(cfg, key, trim(value));
}

std::string getSetting(const TrainConfig& cfg, std::string_view key) { return field(key).get(cfg); }

const std::vector<std::string>& configKeys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return keys;
}

TrainConfig parseConfig(std::string_view text, const std::string& source, TrainConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (value.empty()) throw ConfigError(where + "missing value for '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) throw ConfigError(where + "duplicate key '" + std::string(key) + "'");
    try {
      applySetting(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const UnknownVariant& e) {
      throw UnknownVariant(where + e.what());
    }
  }
  return base;
}

TrainConfig loadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parseConfig(buf.str(), path.string());
}

std::string serializeConfig(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace pad
