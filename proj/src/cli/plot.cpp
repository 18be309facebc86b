#include "ia2u/cli/plot.hpp"

#include "ia2u/core/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ia2u::cli {
namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMargin = 56;

const cv::Scalar kPalette[] = {{200, 80, 30}, {40, 140, 230}, {60, 170, 60}, {160, 60, 170}};

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title, const std::vector<Series>& series) {
    cv::Mat canvas(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    size_t longest = 0;
    for (const auto& s : series) {
        for (const double v : s.values) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        longest = std::max(longest, s.values.size());
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        hi = lo + 1.0;
    }
    const cv::Point origin(kMargin, kHeight - kMargin);
    const int plot_w = kWidth - 2 * kMargin;
    const int plot_h = kHeight - 2 * kMargin;
    cv::rectangle(canvas, {kMargin, kMargin}, {kWidth - kMargin, kHeight - kMargin}, cv::Scalar(0, 0, 0), 1);
    cv::putText(canvas, title, {kMargin, kMargin - 20}, cv::FONT_HERSHEY_SIMPLEX, 0.55, cv::Scalar(0, 0, 0), 1,
                cv::LINE_AA);
    cv::putText(canvas, tick_label(hi), {4, kMargin + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.38, cv::Scalar(0, 0, 0), 1,
                cv::LINE_AA);
    cv::putText(canvas, tick_label(lo), {4, kHeight - kMargin}, cv::FONT_HERSHEY_SIMPLEX, 0.38,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(canvas, "epoch", {kWidth / 2 - 20, kHeight - 16}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);

    auto to_pixel = [&](size_t i, double v) {
        const double fx = longest > 1 ? static_cast<double>(i) / static_cast<double>(longest - 1) : 0.5;
        const double fy = (v - lo) / (hi - lo);
        return cv::Point(origin.x + static_cast<int>(std::lround(fx * plot_w)),
                         origin.y - static_cast<int>(std::lround(fy * plot_h)));
    };
    for (size_t k = 0; k < series.size(); ++k) {
        const auto& color = kPalette[k % std::size(kPalette)];
        const auto& values = series[k].values;
        for (size_t i = 0; i < values.size(); ++i) {
            const auto p = to_pixel(i, values[i]);
            cv::circle(canvas, p, 3, color, cv::FILLED, cv::LINE_AA);
            if (i > 0) {
                cv::line(canvas, to_pixel(i - 1, values[i - 1]), p, color, 2, cv::LINE_AA);
            }
        }
        cv::putText(canvas, series[k].label, {kWidth - kMargin - 150, kMargin + 18 + 18 * static_cast<int>(k)},
                    cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1, cv::LINE_AA);
    }
    bool ok = false;
    try {
        ok = cv::imwrite(path, canvas);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write plot '" + path + "': " + e.what());
    }
    if (!ok) {
        throw IoError("cannot write plot '" + path + "'");
    }
}

}  // namespace ia2u::cli
