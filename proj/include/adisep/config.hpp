#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace adisep {

/// Run configuration shared by every command. Loaded from JSON, then
/// overridden by command-line flags.
struct Config {
  int intervals = 8;         // n_d
  double d_max = 80.0;       // meters
  double tau = 0.5;          // soft-separation temperature, meters
  std::map<std::string, double> iou_thresholds{{"Car", 0.7}, {"Pedestrian", 0.5}, {"Cyclist", 0.5}};
  std::vector<std::string> difficulties{"Easy", "Moderate", "Hard"};
  int pad_width = 1760;
  int pad_height = 512;
  int feature_channels = 4;
  std::vector<int> sweep_intervals{4, 8, 16, 32};
  std::uint64_t seed = 0;

  /// Throws ParameterError on the first violated invariant.
  void validate() const;
};

Config parse_config_json(std::string_view text);
std::string config_to_json(const Config& config);

}  // namespace adisep
