#pragma once

#include <string>
#include <vector>

namespace ia2u::cli {

struct Series {
    std::string label;
    std::vector<double> values;  // y per epoch, x = index
};

/// Renders one or more series as a static line chart PNG. Throws IoError on write failure.
void write_line_plot(const std::string& path, const std::string& title, const std::vector<Series>& series);

}  // namespace ia2u::cli
