#include "ia2u/core/checkpoint.hpp"

#include "ia2u/core/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace ia2u {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'I', 'A', '2', 'U', 'C', 'K', 'P', 'T'};
constexpr uint32_t kMaxDims = 8;

uint64_t fnv1a(const char* data, size_t n) {
    uint64_t h = 1469598103934665603ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ull;
    }
    return h;
}

class Writer {
public:
    template <typename T>
    void pod(T v) {
        char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        buf_.append(raw, sizeof(T));
    }
    void str(const std::string& s) {
        pod<uint32_t>(static_cast<uint32_t>(s.size()));
        buf_.append(s);
    }
    void bytes(const void* p, size_t n) { buf_.append(static_cast<const char*>(p), n); }
    std::string& buffer() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const std::string& buf, size_t end) : buf_(buf), end_(end) {}

    template <typename T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        const auto n = pod<uint32_t>();
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void bytes(void* out, size_t n) {
        need(n);
        std::memcpy(out, buf_.data() + pos_, n);
        pos_ += n;
    }
    bool done() const { return pos_ == end_; }

private:
    void need(size_t n) const {
        if (n > end_ - pos_) {
            throw CheckpointError("corrupt checkpoint: unexpected end of data");
        }
    }

    const std::string& buf_;
    size_t end_;
    size_t pos_ = 0;
};

}  // namespace

Checkpoint snapshot(const torch::nn::Module& module, const std::string& component,
                    const RunConfig& cfg, uint64_t step) {
    Checkpoint ckpt;
    ckpt.version = kCheckpointVersion;
    ckpt.component = component;
    ckpt.config = cfg;
    ckpt.step = step;
    torch::NoGradGuard no_grad;
    for (const auto& item : module.named_parameters(/*recurse=*/true)) {
        ckpt.tensors.emplace_back(item.key(), item.value().detach().to(torch::kCPU, torch::kFloat32).clone());
    }
    for (const auto& item : module.named_buffers(/*recurse=*/true)) {
        ckpt.tensors.emplace_back(item.key(), item.value().detach().to(torch::kCPU, torch::kFloat32).clone());
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.str(ckpt.version);
    w.str(ckpt.component);
    w.pod<uint64_t>(ckpt.step);
    w.str(format_config(ckpt.config));
    w.pod<uint32_t>(static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        const auto t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
        w.str(name);
        w.pod<uint32_t>(static_cast<uint32_t>(t.dim()));
        for (const auto d : t.sizes()) {
            w.pod<int64_t>(d);
        }
        w.bytes(t.data_ptr<float>(), static_cast<size_t>(t.numel()) * sizeof(float));
    }
    const uint64_t sum = fnv1a(w.buffer().data(), w.buffer().size());
    w.pod<uint64_t>(sum);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open checkpoint '" + path + "' for writing");
    }
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) {
        throw IoError("failed writing checkpoint '" + path + "'");
    }
}

void save_checkpoint(const torch::nn::Module& module, const std::string& component,
                     const RunConfig& cfg, uint64_t step, const std::string& path) {
    save_checkpoint(snapshot(module, component, cfg, step), path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();

    if (buf.size() < sizeof(kMagic) + sizeof(uint64_t) ||
        std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("'" + path + "' is not an IA2U checkpoint (bad magic or truncated)");
    }
    const size_t body = buf.size() - sizeof(uint64_t);
    uint64_t stored = 0;
    std::memcpy(&stored, buf.data() + body, sizeof(stored));
    if (stored != fnv1a(buf.data(), body)) {
        throw CheckpointError("corrupt checkpoint '" + path + "': checksum mismatch (truncated or modified)");
    }

    Reader r(buf, body);
    char magic[sizeof(kMagic)];
    r.bytes(magic, sizeof(magic));
    Checkpoint ckpt;
    ckpt.version = r.str();
    if (ckpt.version != kCheckpointVersion) {
        throw CheckpointError("checkpoint version mismatch: file has '" + ckpt.version +
                              "', expected '" + kCheckpointVersion + "'");
    }
    ckpt.component = r.str();
    ckpt.step = r.pod<uint64_t>();
    ckpt.config = parse_config(r.str());
    const auto count = r.pod<uint32_t>();
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const auto ndim = r.pod<uint32_t>();
        if (ndim > kMaxDims) {
            throw CheckpointError("corrupt checkpoint: tensor '" + name + "' has " +
                                  std::to_string(ndim) + " dimensions");
        }
        std::vector<int64_t> dims(ndim);
        int64_t numel = 1;
        for (auto& d : dims) {
            d = r.pod<int64_t>();
            if (d < 0) {
                throw CheckpointError("corrupt checkpoint: negative dimension in '" + name + "'");
            }
            numel *= d;
        }
        auto t = torch::empty(dims, torch::kFloat32);
        r.bytes(t.data_ptr<float>(), static_cast<size_t>(numel) * sizeof(float));
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (!r.done()) {
        throw CheckpointError("corrupt checkpoint: trailing bytes after tensor table");
    }
    return ckpt;
}

void restore(torch::nn::Module& module, const Checkpoint& ckpt) {
    std::map<std::string, torch::Tensor> stored;
    for (const auto& [name, t] : ckpt.tensors) {
        stored.emplace(name, t);
    }
    auto copy_into = [&](const std::string& name, torch::Tensor& dst) {
        const auto it = stored.find(name);
        if (it == stored.end()) {
            throw CheckpointError("checkpoint is missing tensor '" + name + "'");
        }
        if (it->second.sizes() != dst.sizes()) {
            std::ostringstream os;
            os << "shape mismatch for '" << name << "': checkpoint " << it->second.sizes()
               << ", model " << dst.sizes();
            throw CheckpointError(os.str());
        }
        dst.copy_(it->second);
        stored.erase(it);
    };
    torch::NoGradGuard no_grad;
    for (auto& item : module.named_parameters(true)) {
        copy_into(item.key(), item.value());
    }
    for (auto& item : module.named_buffers(true)) {
        copy_into(item.key(), item.value());
    }
    if (!stored.empty()) {
        throw CheckpointError("checkpoint has unexpected tensor '" + stored.begin()->first + "'");
    }
}

void require_component(const Checkpoint& ckpt, const std::string& expected) {
    if (ckpt.component != expected) {
        throw CheckpointError("checkpoint component is '" + ckpt.component + "', expected '" +
                              expected + "'");
    }
}

}  // namespace ia2u
