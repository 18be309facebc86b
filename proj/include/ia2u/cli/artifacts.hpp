#pragma once

#include "ia2u/classifier/classifier.hpp"
#include "ia2u/core/config.hpp"
#include "ia2u/fen/fen.hpp"
#include "ia2u/tasks/tasks.hpp"

#include <optional>
#include <string>

namespace ia2u::cli {

enum class Task { Uie, Det };

const char* task_name(Task t);
/// Throws ValidationError for anything but "uie" or "det".
Task parse_task(const std::string& name);

/// Loads a "classifier" checkpoint and freezes it.
classifier::ClassifierWeights load_frozen_classifier(const std::string& path);

/// A downstream head with its optional plugin. Checkpoints store the head
/// under "head." and the plugin (classifier included) under "fen.".
struct TaskModel {
    Task task = Task::Uie;
    RunConfig cfg;
    std::optional<fen::FENModel> fen;
    tasks::UIEHead uie{nullptr};
    tasks::DetHead det{nullptr};
};

/// Fresh model for one experimental arm. The head is initialized from
/// cfg.seed and the plugin from cfg.seed + 1, so arms that differ only in
/// `with_plugin` start from the same head weights.
TaskModel make_task_model(Task task, const RunConfig& cfg,
                          const std::optional<classifier::ClassifierWeights>& frozen, bool with_plugin);

void save_task_model(const TaskModel& m, uint64_t step, const std::string& path);
TaskModel load_task_model(const std::string& path);

/// Fresh plugin initialized from cfg.seed + 1.
fen::FENModel make_fen(const RunConfig& cfg, const classifier::ClassifierWeights& frozen);
void save_fen(const fen::FENModel& m, uint64_t step, const std::string& path);
/// Accepts a "fen" checkpoint or a task checkpoint that carries a plugin.
fen::FENModel load_fen(const std::string& path);

}  // namespace ia2u::cli
