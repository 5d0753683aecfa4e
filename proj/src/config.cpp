// Copyright 2026 The SOPE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sope/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace sope {
namespace {

std::string position(int line, int column) {
  if (line <= 0) return "";
  return " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")";
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) {
  const YAML::Mark mark = node.Mark();
  if (mark.is_null()) throw ConfigError(what);
  throw ConfigError(what, mark.line + 1, mark.column + 1);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail(node, key + ": expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, key + ": cannot read '" + node.Scalar() + "'");
  }
}

std::vector<int> int_list(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence()) fail(node, key + ": expected a list of integers");
  std::vector<int> out;
  for (const auto& item : node) out.push_back(scalar<int>(item, key));
  return out;
}

template <typename Enum, std::size_t N>
Enum choice(const YAML::Node& node, const std::string& key,
            const std::pair<const char*, Enum> (&options)[N]) {
  const std::string value = scalar<std::string>(node, key);
  std::string allowed;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  }
  fail(node, key + ": '" + value + "' is not one of " + allowed);
}

constexpr std::pair<const char*, EnvironmentConfig::Kind> kEnvKinds[] = {
    {"graph", EnvironmentConfig::Kind::kGraph},
    {"toy_mc", EnvironmentConfig::Kind::kToyMc}};
constexpr std::pair<const char*, RatioSource> kRatioSources[] = {
    {"oracle", RatioSource::kOracle},
    {"model-based", RatioSource::kModelBased},
    {"minmax-tabular", RatioSource::kMinmaxTabular}};
constexpr std::pair<const char*, RatioMode> kRatioModes[] = {
    {"average", RatioMode::kAverage}, {"truncated", RatioMode::kTruncated}};
constexpr std::pair<const char*, QSource::Kind> kQSources[] = {
    {"exact", QSource::Kind::kExact},
    {"perturbed", QSource::Kind::kPerturbed},
    {"estimated", QSource::Kind::kEstimated}};
constexpr std::pair<const char*, NextAction> kNextActions[] = {
    {"expectation", NextAction::kExpectation},
    {"sampled", NextAction::kSampled}};

void read_environment(const YAML::Node& node, EnvironmentConfig& env) {
  if (!node.IsMap()) fail(node, "environment: expected a mapping");
  bool has_chain_len = false;
  YAML::Node chain_node;
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string path = "environment." + key;
    if (key == "kind") {
      env.kind = choice(kv.second, path, kEnvKinds);
    } else if (key == "chain_len") {
      env.chain_len = scalar<int>(kv.second, path);
      has_chain_len = true;
      chain_node = kv.first;
    } else if (key == "gamma") {
      env.gamma = scalar<double>(kv.second, path);
    } else {
      fail(kv.first, "unknown key '" + key + "' in environment");
    }
  }
  if (has_chain_len && env.kind != EnvironmentConfig::Kind::kGraph) {
    fail(chain_node, "environment.chain_len: only valid for kind graph");
  }
  if (env.kind == EnvironmentConfig::Kind::kToyMc && !node["gamma"]) {
    env.gamma = 0.99;
  }
}

ExperimentConfig decode(const YAML::Node& root) {
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  if (!root.IsMap()) fail(root, "configuration must be a mapping");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    const YAML::Node& v = kv.second;
    if (key == "environment") {
      read_environment(v, c.environment);
    } else if (key == "pi_e_p") {
      c.pi_e_p = scalar<double>(v, key);
    } else if (key == "pi_b_p") {
      c.pi_b_p = scalar<double>(v, key);
    } else if (key == "n_values") {
      if (v.IsScalar() && v.Scalar() == "all") {
        c.n_values.clear();
      } else {
        c.n_values = int_list(v, key);
      }
    } else if (key == "batch_sizes") {
      c.batch_sizes = int_list(v, key);
    } else if (key == "trials") {
      c.trials = scalar<int>(v, key);
    } else if (key == "base_seed") {
      c.base_seed = scalar<std::int64_t>(v, key);
    } else if (key == "families") {
      if (!v.IsSequence()) fail(v, "families: expected a list");
      c.families.clear();
      for (const auto& item : v) {
        try {
          c.families.push_back(parse_family(scalar<std::string>(item, key)));
        } catch (const InvalidArgument& e) {
          fail(item, std::string("families: ") + e.what());
        }
      }
    } else if (key == "ratio_method") {
      c.ratio_method = choice(v, key, kRatioSources);
    } else if (key == "ratio_mode") {
      c.ratio_mode = choice(v, key, kRatioModes);
    } else if (key == "dr_q_source") {
      c.dr_q_source.kind = choice(v, key, kQSources);
    } else if (key == "dr_q_epsilon") {
      c.dr_q_source.epsilon = scalar<double>(v, key);
    } else if (key == "dr_next_action") {
      c.dr_next_action = choice(v, key, kNextActions);
    } else if (key == "bootstrap_resamples") {
      c.bootstrap_resamples = scalar<int>(v, key);
    } else if (key == "threads") {
      c.threads = scalar<int>(v, key);
    } else {
      fail(kv.first, "unknown key '" + key + "'");
    }
  }
  return c;
}

void set_path(YAML::Node node, const std::vector<std::string>& parts,
              std::size_t depth, const YAML::Node& value) {
  const std::string& key = parts[depth];
  if (depth + 1 == parts.size()) {
    node[key] = value;
    return;
  }
  YAML::Node child = node[key];
  if (!child.IsMap()) {
    YAML::Node fresh(YAML::NodeType::Map);
    set_path(fresh, parts, depth + 1, value);
    node[key] = fresh;
    return;
  }
  set_path(child, parts, depth + 1, value);
}

void apply_override(YAML::Node& root, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + text + "' is not key=value");
  }
  const std::string key = text.substr(0, eq);
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    parts.push_back(part);
  }
  YAML::Node value;
  try {
    value = YAML::Load(text.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError("override '" + text + "': " + e.msg);
  }
  if (!root.IsMap()) root = YAML::Node(YAML::NodeType::Map);
  set_path(root, parts, 0, value);
}

ExperimentConfig finish(YAML::Node root, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) apply_override(root, o);
  ExperimentConfig c = decode(root);
  try {
    validate(c);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace

ConfigError::ConfigError(const std::string& what, int line, int column)
    : Error("config: " + what + position(line, column)),
      message_(what),
      line_(line),
      column_(column) {}

ExperimentConfig parse_config_string(const std::string& text,
                                     const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  return finish(root, overrides);
}

ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config_string(buffer.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.message(), e.line(), e.column());
  }
}

std::string format_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "environment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(c.environment.kind);
  if (c.environment.kind == EnvironmentConfig::Kind::kGraph) {
    out << YAML::Key << "chain_len" << YAML::Value << c.environment.chain_len;
  }
  out << YAML::Key << "gamma" << YAML::Value << format_double(c.environment.gamma);
  out << YAML::EndMap;
  out << YAML::Key << "pi_e_p" << YAML::Value << format_double(c.pi_e_p);
  out << YAML::Key << "pi_b_p" << YAML::Value << format_double(c.pi_b_p);
  out << YAML::Key << "n_values" << YAML::Value;
  if (c.n_values.empty()) {
    out << "all";
  } else {
    out << YAML::Flow << c.n_values;
  }
  out << YAML::Key << "batch_sizes" << YAML::Value << YAML::Flow << c.batch_sizes;
  out << YAML::Key << "trials" << YAML::Value << c.trials;
  out << YAML::Key << "base_seed" << YAML::Value << c.base_seed;
  out << YAML::Key << "families" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (Family f : c.families) out << to_string(f);
  out << YAML::EndSeq;
  out << YAML::Key << "ratio_method" << YAML::Value << to_string(c.ratio_method);
  out << YAML::Key << "ratio_mode" << YAML::Value << to_string(c.ratio_mode);
  out << YAML::Key << "dr_q_source" << YAML::Value << to_string(c.dr_q_source.kind);
  out << YAML::Key << "dr_q_epsilon" << YAML::Value
      << format_double(c.dr_q_source.epsilon);
  out << YAML::Key << "dr_next_action" << YAML::Value << to_string(c.dr_next_action);
  out << YAML::Key << "bootstrap_resamples" << YAML::Value << c.bootstrap_resamples;
  out << YAML::Key << "threads" << YAML::Value << c.threads;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace sope
