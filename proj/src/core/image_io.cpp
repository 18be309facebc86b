#include "ia2u/core/image_io.hpp"

#include "ia2u/core/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ia2u {

torch::Tensor read_png(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw IoError("cannot read image '" + path + "'");
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    auto hwc = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
    return hwc.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0).contiguous();
}

void write_png(const std::string& path, const torch::Tensor& chw) {
    if (chw.dim() != 3 || (chw.size(0) != 3 && chw.size(0) != 1)) {
        throw ValidationError("write_png expects a (3, H, W) or (1, H, W) tensor");
    }
    torch::NoGradGuard no_grad;
    auto codes = quantize_8bit(chw.detach().to(torch::kCPU, torch::kFloat32))
                     .mul(255.0)
                     .round()
                     .to(torch::kUInt8)
                     .permute({1, 2, 0})
                     .contiguous();
    const int rows = static_cast<int>(codes.size(0));
    const int cols = static_cast<int>(codes.size(1));
    cv::Mat img;
    if (chw.size(0) == 3) {
        cv::Mat rgb(rows, cols, CV_8UC3, codes.data_ptr<uint8_t>());
        cv::cvtColor(rgb, img, cv::COLOR_RGB2BGR);
    } else {
        img = cv::Mat(rows, cols, CV_8UC1, codes.data_ptr<uint8_t>()).clone();
    }
    bool ok = false;
    try {
        ok = cv::imwrite(path, img);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write image '" + path + "': " + e.what());
    }
    if (!ok) {
        throw IoError("cannot write image '" + path + "'");
    }
}

torch::Tensor quantize_8bit(const torch::Tensor& x) {
    return torch::clamp(x, 0.0, 1.0).mul(255.0).round().div(255.0);
}

}  // namespace ia2u
