#pragma once

#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <panerf/augment.hpp>

namespace panerf::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Entry point of the `panerf` tool. Never throws; failures are reported on
/// `err` and mapped to an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int exit_code_for(const std::exception& e);

// Pseudo-view cache: <dir>/pseudo.json plus images/, validity/ and saliency/
// PNGs, one file of each per view.
inline constexpr int kPseudoCacheVersion = 1;

struct PseudoCacheInfo {
  double alpha_deg = 0.0;
  double step_deg = 0.0;
  std::string saliency;
  std::vector<std::string> sources;  // frame name per source_id
};

void write_pseudo_cache(const std::filesystem::path& dir, const std::vector<PseudoView>& views,
                        const PseudoCacheInfo& info);
/// Throws DataError on a missing or inconsistent cache.
std::vector<PseudoView> read_pseudo_cache(const std::filesystem::path& dir,
                                          PseudoCacheInfo* info = nullptr);

// SVG plots. Every data point becomes one element carrying data-x/data-y
// (lines) or data-label/data-value (bars) attributes.
struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<Series>& series);
/// Non-finite values are drawn at the top of the axis and labelled "inf".
std::string svg_bar_plot(const std::string& title, const std::string& y_label,
                         const std::vector<std::pair<std::string, double>>& bars);

}  // namespace panerf::cli
