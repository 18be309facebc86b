#pragma once

#include <torch/torch.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace ia2u::testing {

/// Uniform [0, 1) images from a private generator.
inline torch::Tensor random_images(int64_t n, int64_t h, int64_t w, uint64_t seed) {
    auto gen = at::detail::createCPUGenerator(seed);
    return torch::rand({n, 3, h, w}, gen, torch::TensorOptions().dtype(torch::kFloat32));
}

inline torch::Tensor randn(std::vector<int64_t> shape, uint64_t seed, torch::Dtype dtype = torch::kFloat32) {
    auto gen = at::detail::createCPUGenerator(seed);
    return torch::randn(shape, gen, torch::TensorOptions().dtype(dtype));
}

inline double max_abs(const torch::Tensor& t) {
    return t.numel() == 0 ? 0.0 : t.abs().max().item<double>();
}

/// Entrywise |a - n| / max(|a|, |n|, floor), maximized over every entry of
/// every input. The floor keeps entries whose true gradient is ~0 from
/// dividing finite-difference noise by nothing.
inline constexpr double kGradFloor = 1e-4;

/// Compares autograd gradients of scalar `f` with central differences
/// (step h) for every entry of every tensor in `inputs`. Inputs must be
/// float64 leaves with requires_grad set. Returns the maximum relative error.
inline double gradcheck_max_rel_error(const std::function<torch::Tensor()>& f, std::vector<torch::Tensor> inputs,
                                      double h = 1e-4) {
    for (auto& t : inputs) {
        if (t.grad().defined()) {
            t.mutable_grad().zero_();
        }
    }
    f().backward();
    std::vector<torch::Tensor> analytic;
    for (auto& t : inputs) {
        analytic.push_back(t.grad().defined() ? t.grad().clone() : torch::zeros_like(t));
    }
    torch::NoGradGuard no_grad;
    double worst = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        auto flat = inputs[k].view(-1);
        auto grad = analytic[k].view(-1);
        for (int64_t i = 0; i < flat.numel(); ++i) {
            const double orig = flat[i].item<double>();
            flat[i] = orig + h;
            const double up = f().item<double>();
            flat[i] = orig - h;
            const double down = f().item<double>();
            flat[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = grad[i].item<double>();
            const double denom = std::max({std::abs(a), std::abs(numeric), kGradFloor});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ia2u-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& child = "") const {
        return child.empty() ? path_.string() : (path_ / child).string();
    }

private:
    std::filesystem::path path_;
};

}  // namespace ia2u::testing
