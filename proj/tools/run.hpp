#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gwmodel::cli {

struct RunConfig {
  std::string command;
  std::string input;
  std::string x = "x";
  std::string y = "y";
  bool geographic = false;
  std::optional<std::string> dependent;
  std::vector<std::string> vars;
  std::string kernel = "bisquare";
  /// A number, or "auto" to select it by the command's criterion.
  std::string bw = "auto";
  bool adaptive = false;
  std::optional<std::string> criterion;
  int k = 0;
  std::string robust = "none";
  double cn_thresh = 30.0;
  bool adjust = false;
  bool quantiles = false;
  std::string predict_input;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 42;
  unsigned threads = 0;
  std::string dist_cache;
  std::optional<double> earth_radius;
  double power = 2.0;
};

inline const std::vector<std::string>& commands()
{
  static const std::vector<std::string> names{"dist",     "gwss",       "gwpca",      "gwr",
                                              "gwr-select", "gwr-lcr", "gwr-collin", "gwr-predict"};
  return names;
}

/// Runs one command. Returns 0 on success, 1 on invalid input, 2 on a numerical failure.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses flags (and an optional --config file) and runs the command.
int main_with_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace gwmodel::cli
