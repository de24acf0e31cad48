/*
 * Copyright 2026 The nafkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// JSON checkpoints: an architecture header plus every named parameter
// tensor as {shape, data} in row-major order. Orders are stored 0-based.

#ifndef NAFKIT_CHECKPOINT_HPP
#define NAFKIT_CHECKPOINT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nafkit/csv.hpp"
#include "nafkit/errors.hpp"
#include "nafkit/flow.hpp"

namespace nafkit {

inline nlohmann::json parameters_to_json(const ParameterList& params) {
  nlohmann::json out = nlohmann::json::object();
  for (const Parameter* p : params) out[p->name] = {{"shape", p->value.shape}, {"data", p->value.data}};
  return out;
}

/// Copies values by name; every parameter must be present with its shape.
inline void parameters_from_json(const nlohmann::json& j, const ParameterList& params) {
  for (Parameter* p : params) {
    if (!j.contains(p->name)) throw DataError("checkpoint: missing parameter " + p->name);
    const auto& e = j.at(p->name);
    const auto shape = e.at("shape").get<Shape>();
    auto data = e.at("data").get<std::vector<double>>();
    if (shape != p->value.shape || data.size() != p->value.size())
      throw DataError("checkpoint: shape mismatch for " + p->name + ": " + shape_str(shape) + " vs " +
                      shape_str(p->value.shape));
    p->value.data = std::move(data);
  }
}

/// Which way the stack was trained: "density" (data -> noise, sampled by
/// inversion) or "energy" (noise -> samples, evaluated by inversion).
enum class Direction { kDensity, kEnergy };

inline const char* direction_name(Direction d) { return d == Direction::kEnergy ? "energy" : "density"; }

inline Direction parse_direction(const std::string& s) {
  if (s == "density") return Direction::kDensity;
  if (s == "energy") return Direction::kEnergy;
  throw DataError("checkpoint: unknown direction '" + s + "'");
}

inline nlohmann::json checkpoint_json(const FlowStack& stack, Direction dir = Direction::kDensity) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : stack.layers())
    layers.push_back({{"kind", kind_name(l.spec().kind)}, {"order", l.order()}, {"d", l.spec().d},
                      {"L", l.spec().layers}});
  return {{"version", 1},
          {"m", stack.dim()},
          {"base", base_name(stack.base())},
          {"direction", direction_name(dir)},
          {"hidden", stack.hidden_sizes()},
          {"layers", layers},
          {"parameters", parameters_to_json(stack.parameters())}};
}

inline FlowStack stack_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw DataError("checkpoint: unsupported version");
    const auto m = j.at("m").get<std::size_t>();
    std::vector<FlowStack::LayerConfig> cfg;
    for (const auto& l : j.at("layers")) {
      TransformerSpec spec;
      spec.kind = parse_kind(l.at("kind").get<std::string>());
      spec.d = l.at("d").get<std::size_t>();
      spec.layers = l.at("L").get<std::size_t>();
      cfg.push_back({spec, l.at("order").get<std::vector<std::size_t>>()});
    }
    FlowStack stack(m, std::move(cfg), j.at("hidden").get<std::vector<std::size_t>>(),
                    parse_base(j.at("base").get<std::string>()));
    parameters_from_json(j.at("parameters"), stack.parameters());
    return stack;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const FlowStack& stack, const std::filesystem::path& path,
                            Direction dir = Direction::kDensity) {
  write_file_atomic(path, checkpoint_json(stack, dir).dump(1) + "\n");
}

struct Model {
  FlowStack stack;
  Direction direction = Direction::kDensity;

  /// Log-density of points under the model distribution.
  std::vector<double> log_prob(const Tensor& pts) const {
    if (direction == Direction::kDensity) return stack.log_density(pts);
    const Tensor x = stack.inverse(pts);
    Graph g;
    NoiseOutput out = stack.transform_noise(g, g.constant(x));
    return out.log_q.data().data;
  }

  Tensor sample(std::size_t n, std::uint64_t seed) const {
    if (direction == Direction::kDensity) return stack.sample(n, seed);
    std::mt19937_64 rng(seed);
    Graph g;
    return stack.forward(g, g.constant(stack.sample_base(n, rng))).y.data();
  }
};

inline FlowStack load_checkpoint(const std::filesystem::path& path);

inline Model load_model(const std::filesystem::path& path) {
  Model m{load_checkpoint(path), Direction::kDensity};
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (!j.is_discarded() && j.contains("direction")) m.direction = parse_direction(j.at("direction").get<std::string>());
  return m;
}

inline FlowStack load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return stack_from_json(j);
}

}  // namespace nafkit

#endif  // NAFKIT_CHECKPOINT_HPP
