#include "adisep/config.hpp"

#include <fmt/format.h>

#include <nlohmann/json.hpp>

#include "adisep/errors.hpp"

namespace adisep {

void Config::validate() const {
  if (intervals < 1) throw ParameterError("n_d must be >= 1");
  if (!(d_max > 0.0)) throw ParameterError("D_max must be > 0");
  if (!(tau > 0.0)) throw ParameterError("tau must be > 0");
  if (pad_width < 4 || pad_height < 4 || pad_width % 4 != 0 || pad_height % 4 != 0) {
    throw ParameterError("padding target must be positive multiples of 4");
  }
  if (feature_channels < 1) throw ParameterError("feature_channels must be >= 1");
  for (const auto& [cls, t] : iou_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw ParameterError(fmt::format("IoU threshold for {} must be in (0, 1]", cls));
  }
  for (const auto& d : difficulties) {
    if (d != "Easy" && d != "Moderate" && d != "Hard") throw ParameterError("unknown difficulty '" + d + "'");
  }
  for (int n : sweep_intervals) {
    if (n < 1) throw ParameterError("sweep interval counts must be >= 1");
  }
}

Config parse_config_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  Config c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "nd") c.intervals = value.get<int>();
      else if (key == "dmax") c.d_max = value.get<double>();
      else if (key == "tau") c.tau = value.get<double>();
      else if (key == "iou_thresholds") c.iou_thresholds = value.get<std::map<std::string, double>>();
      else if (key == "difficulties") c.difficulties = value.get<std::vector<std::string>>();
      else if (key == "padding") {
        const auto p = value.get<std::vector<int>>();
        if (p.size() != 2) throw ParameterError("padding must be [width, height]");
        c.pad_width = p[0];
        c.pad_height = p[1];
      } else if (key == "feature_channels") c.feature_channels = value.get<int>();
      else if (key == "sweep_nd") c.sweep_intervals = value.get<std::vector<int>>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ParameterError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const Config& c) {
  nlohmann::json j;
  j["nd"] = c.intervals;
  j["dmax"] = c.d_max;
  j["tau"] = c.tau;
  j["iou_thresholds"] = c.iou_thresholds;
  j["difficulties"] = c.difficulties;
  j["padding"] = {c.pad_width, c.pad_height};
  j["feature_channels"] = c.feature_channels;
  j["sweep_nd"] = c.sweep_intervals;
  j["seed"] = c.seed;
  return j.dump(2);
}

}  // namespace adisep
