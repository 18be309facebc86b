#include "ia2u/cli/artifacts.hpp"

#include "ia2u/core/checkpoint.hpp"
#include "ia2u/core/error.hpp"
#include "ia2u/core/rng.hpp"

namespace ia2u::cli {
namespace {

constexpr const char* kFenPrefix = "fen.";
constexpr const char* kHeadPrefix = "head.";

bool starts_with(const std::string& s, const std::string& prefix) {
    return s.rfind(prefix, 0) == 0;
}

// Tensors under `prefix`, renamed without it.
Checkpoint sub_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
    Checkpoint out{ckpt.version, ckpt.component, ckpt.config, ckpt.step, {}};
    for (const auto& [name, t] : ckpt.tensors) {
        if (starts_with(name, prefix)) {
            out.tensors.emplace_back(name.substr(prefix.size()), t);
        }
    }
    return out;
}

bool has_prefix(const Checkpoint& ckpt, const std::string& prefix) {
    for (const auto& item : ckpt.tensors) {
        if (starts_with(item.first, prefix)) {
            return true;
        }
    }
    return false;
}

fen::FENModel fen_from(const Checkpoint& ckpt) {
    fen::FENModel m(ckpt.config, classifier::freeze(classifier::ClassifierWeights()));
    restore(*m, ckpt);
    m->eval();
    return m;
}

std::shared_ptr<torch::nn::Module> bundle(const TaskModel& m) {
    auto root = std::make_shared<torch::nn::Module>("TaskModel");
    if (m.fen) {
        root->register_module("fen", *m.fen);
    }
    if (m.task == Task::Uie) {
        root->register_module("head", m.uie.ptr());
    } else {
        root->register_module("head", m.det.ptr());
    }
    return root;
}

}  // namespace

const char* task_name(Task t) {
    return t == Task::Uie ? "uie" : "det";
}

Task parse_task(const std::string& name) {
    if (name == "uie") {
        return Task::Uie;
    }
    if (name == "det") {
        return Task::Det;
    }
    throw ValidationError("unknown task '" + name + "' (expected uie or det)");
}

classifier::ClassifierWeights load_frozen_classifier(const std::string& path) {
    const auto ckpt = load_checkpoint(path);
    require_component(ckpt, "classifier");
    classifier::ClassifierWeights w;
    restore(*w.net(), ckpt);
    return classifier::freeze(w);
}

fen::FENModel make_fen(const RunConfig& cfg, const classifier::ClassifierWeights& frozen) {
    seed_parameters(cfg.seed + 1);
    return fen::FENModel(cfg, frozen);
}

void save_fen(const fen::FENModel& m, uint64_t step, const std::string& path) {
    save_checkpoint(*m, "fen", m->config(), step, path);
}

fen::FENModel load_fen(const std::string& path) {
    const auto ckpt = load_checkpoint(path);
    if (ckpt.component == "fen") {
        return fen_from(ckpt);
    }
    if ((ckpt.component == "uie" || ckpt.component == "det") && has_prefix(ckpt, kFenPrefix)) {
        return fen_from(sub_checkpoint(ckpt, kFenPrefix));
    }
    throw CheckpointError("checkpoint '" + path + "' holds no enhancement plugin (component '" +
                          ckpt.component + "')");
}

TaskModel make_task_model(Task task, const RunConfig& cfg,
                          const std::optional<classifier::ClassifierWeights>& frozen, bool with_plugin) {
    cfg.validate();
    TaskModel m;
    m.task = task;
    m.cfg = cfg;
    seed_parameters(cfg.seed);
    if (task == Task::Uie) {
        m.uie = tasks::UIEHead();
    } else {
        m.det = tasks::DetHead();
    }
    if (with_plugin) {
        if (!frozen) {
            throw ConfigError("the plugin arm needs a classifier checkpoint");
        }
        m.fen = make_fen(cfg, *frozen);
    }
    return m;
}

void save_task_model(const TaskModel& m, uint64_t step, const std::string& path) {
    save_checkpoint(*bundle(m), task_name(m.task), m.cfg, step, path);
}

TaskModel load_task_model(const std::string& path) {
    const auto ckpt = load_checkpoint(path);
    if (ckpt.component != "uie" && ckpt.component != "det") {
        throw CheckpointError("checkpoint '" + path + "' has component '" + ckpt.component +
                              "', expected uie or det");
    }
    TaskModel m;
    m.task = parse_task(ckpt.component);
    m.cfg = ckpt.config;
    if (has_prefix(ckpt, kFenPrefix)) {
        m.fen = fen_from(sub_checkpoint(ckpt, kFenPrefix));
    }
    const auto head = sub_checkpoint(ckpt, kHeadPrefix);
    if (m.task == Task::Uie) {
        m.uie = tasks::UIEHead();
        restore(*m.uie, head);
        m.uie->eval();
    } else {
        m.det = tasks::DetHead();
        restore(*m.det, head);
        m.det->eval();
    }
    return m;
}

}  // namespace ia2u::cli
