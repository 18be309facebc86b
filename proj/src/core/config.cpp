#include "ia2u/core/config.hpp"

#include "ia2u/core/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

namespace ia2u {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw ConfigError("invalid boolean '" + value + "' for key '" + key + "'");
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// "epoch:size,epoch:size"
std::vector<ProgressiveStage> parse_stages(const std::string& key, const std::string& value) {
    std::vector<ProgressiveStage> stages;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("invalid progressive stage '" + item + "' for key '" + key +
                              "' (expected epoch:size)");
        }
        stages.push_back({parse_number<int>(key, trim(item.substr(0, colon))),
                          parse_number<int>(key, trim(item.substr(colon + 1)))});
    }
    return stages;
}

std::string format_stages(const std::vector<ProgressiveStage>& stages) {
    std::string out;
    for (const auto& s : stages) {
        if (!out.empty()) {
            out += ',';
        }
        out += std::to_string(s.epoch) + ':' + std::to_string(s.image_size);
    }
    return out;
}

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define IA2U_INT_FIELD(name)                                                             \
    Field{#name, [](RunConfig& c, const std::string& v) { c.name = parse_number<decltype(c.name)>(#name, v); }, \
          [](const RunConfig& c) { return std::to_string(c.name); }}
#define IA2U_REAL_FIELD(name)                                                            \
    Field{#name, [](RunConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); }, \
          [](const RunConfig& c) { return format_double(c.name); }}
#define IA2U_BOOL_FIELD(name)                                                            \
    Field{#name, [](RunConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }, \
          [](const RunConfig& c) { return std::string(c.name ? "true" : "false"); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        IA2U_INT_FIELD(seed),
        IA2U_INT_FIELD(channels),
        IA2U_INT_FIELD(fen_blocks),
        IA2U_INT_FIELD(attention_segments),
        IA2U_BOOL_FIELD(enable_water_prior),
        IA2U_BOOL_FIELD(enable_degrad_prior),
        IA2U_BOOL_FIELD(enable_sample_prior),
        IA2U_BOOL_FIELD(enable_full_scale),
        IA2U_INT_FIELD(anchor_scale),
        IA2U_REAL_FIELD(min_lr),
        IA2U_REAL_FIELD(max_lr),
        IA2U_INT_FIELD(warmup_steps),
        IA2U_INT_FIELD(total_steps),
        IA2U_REAL_FIELD(weight_decay),
        IA2U_REAL_FIELD(beta1),
        IA2U_REAL_FIELD(beta2),
        IA2U_REAL_FIELD(momentum),
        IA2U_REAL_FIELD(plugin_lr_scale),
        IA2U_INT_FIELD(epochs),
        IA2U_INT_FIELD(batch_size),
        IA2U_REAL_FIELD(lambda_l1),
        IA2U_REAL_FIELD(lambda_ssim),
        Field{"progressive_sizes",
              [](RunConfig& c, const std::string& v) { c.progressive_sizes = parse_stages("progressive_sizes", v); },
              [](const RunConfig& c) { return format_stages(c.progressive_sizes); }},
    };
    return table;
}

#undef IA2U_INT_FIELD
#undef IA2U_REAL_FIELD
#undef IA2U_BOOL_FIELD

}  // namespace

void RunConfig::validate() const {
    if (channels <= 0 || fen_blocks <= 0 || attention_segments <= 0) {
        throw ConfigError("channels, fen_blocks and attention_segments must be positive");
    }
    if (channels % attention_segments != 0) {
        throw ConfigError("attention_segments (" + std::to_string(attention_segments) +
                          ") must divide channels (" + std::to_string(channels) + ")");
    }
    if (anchor_scale != 1 && anchor_scale != 2 && anchor_scale != 4) {
        throw ConfigError("anchor_scale must be one of 1, 2, 4");
    }
    if (!(min_lr >= 0.0) || !(max_lr >= min_lr)) {
        throw ConfigError("learning rates must satisfy 0 <= min_lr <= max_lr");
    }
    if (warmup_steps < 0 || total_steps < 0 || warmup_steps > total_steps) {
        throw ConfigError("schedule must satisfy 0 <= warmup_steps <= total_steps");
    }
    if (!(plugin_lr_scale > 0.0)) {
        throw ConfigError("plugin_lr_scale must be positive");
    }
    if (epochs <= 0 || batch_size <= 0) {
        throw ConfigError("epochs and batch_size must be positive");
    }
    if (lambda_l1 < 0.0 || lambda_ssim < 0.0) {
        throw ConfigError("loss weights must be non-negative");
    }
    for (size_t i = 0; i < progressive_sizes.size(); ++i) {
        const auto& s = progressive_sizes[i];
        if (s.epoch < 0 || s.image_size < 32 || s.image_size % 32 != 0) {
            throw ConfigError("progressive stage sizes must be positive multiples of 32");
        }
        if (i > 0 && s.epoch <= progressive_sizes[i - 1].epoch) {
            throw ConfigError("progressive stages must have increasing epochs");
        }
    }
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

std::string format_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& extra_keys,
                       std::map<std::string, std::string>* extras, const RunConfig& base) {
    RunConfig cfg = base;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (std::find(extra_keys.begin(), extra_keys.end(), key) != extra_keys.end()) {
            if (extras != nullptr) {
                (*extras)[key] = value;
            }
            continue;
        }
        set_config_value(cfg, key, value);
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path, const std::vector<std::string>& extra_keys,
                           std::map<std::string, std::string>* extras, const RunConfig& base) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), extra_keys, extras, base);
}

double cosine_warmup_lr(int step, const RunConfig& cfg) {
    if (step < 0 || step > cfg.total_steps) {
        throw ValidationError("learning-rate step " + std::to_string(step) + " outside [0, " +
                              std::to_string(cfg.total_steps) + "]");
    }
    const double lo = cfg.min_lr;
    const double hi = cfg.max_lr;
    if (step < cfg.warmup_steps) {
        return lo + (hi - lo) * static_cast<double>(step) / cfg.warmup_steps;
    }
    const int decay_steps = cfg.total_steps - cfg.warmup_steps;
    if (decay_steps == 0) {
        return hi;
    }
    const double progress = static_cast<double>(step - cfg.warmup_steps) / decay_steps;
    return lo + (hi - lo) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace ia2u
