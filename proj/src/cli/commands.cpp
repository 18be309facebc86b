#include "ia2u/cli/commands.hpp"

#include "ia2u/cli/artifacts.hpp"
#include "ia2u/cli/plot.hpp"
#include "ia2u/core/checkpoint.hpp"
#include "ia2u/core/error.hpp"
#include "ia2u/core/image_io.hpp"
#include "ia2u/core/training.hpp"
#include "ia2u/tasks/report.hpp"
#include "ia2u/watersim/corpus.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>

namespace ia2u::cli {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kPathKeys = {"corpus_dir", "output_dir", "classifier_checkpoint", "checkpoint",
                                            "input_dir"};

// Flags shared by the training commands. Empty strings / zeros mean "not given".
struct TrainFlags {
    std::string config;
    std::string corpus;
    std::string out;
    std::string classifier;
    bool no_plugin = false;
    std::vector<std::string> disable_prior;
    bool no_full_scale = false;
    std::optional<uint64_t> seed;
    std::optional<int> epochs;
    int limit_train = 0;
    int limit_val = 0;
    std::vector<std::string> set;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool plugin_flags) {
    cmd->add_option("--config", f.config, "key=value config file");
    cmd->add_option("--corpus", f.corpus, "corpus directory (overrides corpus_dir)");
    cmd->add_option("--out", f.out, "output directory (overrides output_dir)");
    cmd->add_option("--seed", f.seed, "run seed");
    cmd->add_option("--epochs", f.epochs, "epoch budget")->check(CLI::PositiveNumber);
    cmd->add_option("--limit-train", f.limit_train, "use only the first N training samples")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--limit-val", f.limit_val, "use only the first N validation samples")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--set", f.set, "extra key=value override (repeatable)");
    if (plugin_flags) {
        cmd->add_option("--classifier", f.classifier, "frozen classifier checkpoint");
        cmd->add_flag("--no-plugin", f.no_plugin, "train the bare head");
        cmd->add_option("--disable-prior", f.disable_prior, "priors to disable: w, d, s")
            ->check(CLI::IsMember({"w", "d", "s"}))
            ->expected(1, 3);
        cmd->add_flag("--no-full-scale", f.no_full_scale, "align to the anchor scale only");
    }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    }
    set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

struct Resolved {
    RunConfig cfg;
    std::map<std::string, std::string> paths;

    std::string path(const std::string& key, const std::string& flag) const {
        const auto it = paths.find(key);
        if (it == paths.end() || it->second.empty()) {
            throw ConfigError("missing " + flag + " (or " + key + " in the config file)");
        }
        return it->second;
    }
};

// defaults <- config file <- flags.
Resolved resolve(const TrainFlags& f, const RunConfig& defaults) {
    Resolved r;
    r.cfg = f.config.empty() ? defaults : load_config_file(f.config, kPathKeys, &r.paths, defaults);
    for (const auto& s : f.set) {
        apply_override(r.cfg, s);
    }
    if (!f.corpus.empty()) {
        r.paths["corpus_dir"] = f.corpus;
    }
    if (!f.out.empty()) {
        r.paths["output_dir"] = f.out;
    }
    if (!f.classifier.empty()) {
        r.paths["classifier_checkpoint"] = f.classifier;
    }
    if (f.seed) {
        r.cfg.seed = *f.seed;
    }
    if (f.epochs) {
        r.cfg.epochs = *f.epochs;
    }
    if (f.no_plugin && (!f.disable_prior.empty() || f.no_full_scale)) {
        throw ConfigError("--disable-prior and --no-full-scale configure the plugin and conflict with --no-plugin");
    }
    for (const auto& p : f.disable_prior) {
        (p == "w" ? r.cfg.enable_water_prior : p == "d" ? r.cfg.enable_degrad_prior : r.cfg.enable_sample_prior) =
            false;
    }
    if (f.no_full_scale) {
        r.cfg.enable_full_scale = false;
    }
    if (!f.no_plugin && !fen::toggles_from(r.cfg).any()) {
        throw ValidationError("no prior signal: water, degradation and sample priors are all disabled");
    }
    r.cfg.validate();
    return r;
}

watersim::LoadedSplit load_checked(const std::string& corpus, watersim::Split split, int limit) {
    if (!fs::is_directory(corpus)) {
        throw IoError("corpus directory '" + corpus + "' does not exist");
    }
    auto loaded = watersim::load_split(corpus, split, limit);
    if (loaded.size() == 0) {
        throw ValidationError(std::string("corpus '") + corpus + "' has no " + watersim::split_name(split) +
                              " samples");
    }
    return loaded;
}

void require_boxes(const watersim::LoadedSplit& split, const std::string& corpus) {
    for (const auto& r : split.records) {
        if (!r.boxes.empty()) {
            return;
        }
    }
    throw ValidationError("corpus '" + corpus + "' has no object boxes; generate it with --objects");
}

void prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir + "'");
    }
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// One row per epoch with the mean training loss.
tasks::MetricReport loss_report(const std::vector<double>& loss) {
    tasks::MetricReport r;
    r.columns = {"train_loss"};
    for (size_t i = 0; i < loss.size(); ++i) {
        r.add("epoch_" + std::to_string(i), {loss[i]});
    }
    return r;
}

std::vector<double> column(const tasks::MetricReport& r, size_t c) {
    std::vector<double> v;
    for (const auto& row : r.rows) {
        v.push_back(row.values[c]);
    }
    return v;
}

int cmd_gen_data(const watersim::CorpusOptions& opts, const std::string& out_dir, std::ostream& out) {
    prepare_dir(out_dir);
    const auto records = watersim::generate_corpus(opts, out_dir);
    out << "wrote " << records.size() << " samples to " << out_dir << "\n";
    return 0;
}

int cmd_train_classifier(const TrainFlags& f, std::ostream& out) {
    const auto r = resolve(f, tasks::classifier_defaults());
    const auto corpus = r.path("corpus_dir", "--corpus");
    const auto dir = r.path("output_dir", "--out");
    const auto train = load_checked(corpus, watersim::Split::Train, f.limit_train);
    const auto val = load_checked(corpus, watersim::Split::Val, f.limit_val);
    prepare_dir(dir);
    auto result = classifier::train_classifier(train, val, r.cfg, [&](const classifier::ClassifierEpoch& e) {
        out << "epoch " << e.epoch << " loss " << tasks::format_metric(e.train_loss) << " val_top1 "
            << tasks::format_metric(e.val_top1) << "\n";
    });
    tasks::MetricReport report;
    report.columns = {"val_top1"};
    std::vector<double> losses;
    for (const auto& e : result.epochs) {
        report.add("epoch_" + std::to_string(e.epoch), {e.val_top1});
        losses.push_back(e.train_loss);
    }
    const uint64_t steps = result.step_losses.size();
    save_checkpoint(*result.weights.net(), "classifier", r.cfg, steps, join(dir, "classifier.ckpt"));
    report.write_csv(join(dir, "metrics.csv"));
    loss_report(losses).write_csv(join(dir, "train_loss.csv"));
    write_line_plot(join(dir, "loss_curve.png"), "classifier training loss", {{"train loss", losses}});
    write_line_plot(join(dir, "val_curve.png"), "classifier val top-1", {{"val top-1", column(report, 0)}});
    out << "saved " << join(dir, "classifier.ckpt") << "\n";
    return 0;
}

int cmd_train_task(Task task, const TrainFlags& f, std::ostream& out) {
    const auto r = resolve(f, task == Task::Uie ? tasks::uie_defaults() : tasks::det_defaults());
    const auto corpus = r.path("corpus_dir", "--corpus");
    const auto dir = r.path("output_dir", "--out");
    std::optional<classifier::ClassifierWeights> frozen;
    if (!f.no_plugin) {
        frozen = load_frozen_classifier(r.path("classifier_checkpoint", "--classifier"));
    }
    const auto train = load_checked(corpus, watersim::Split::Train, f.limit_train);
    const auto val = load_checked(corpus, watersim::Split::Val, f.limit_val);
    if (task == Task::Det) {
        require_boxes(train, corpus);
    }
    prepare_dir(dir);
    auto model = make_task_model(task, r.cfg, frozen, !f.no_plugin);
    const auto log = [&](const tasks::EpochLog& e) {
        out << "epoch " << e.epoch << " loss " << tasks::format_metric(e.train_loss);
        for (const double v : e.val_metrics) {
            out << " " << tasks::format_metric(v);
        }
        out << "\n";
    };
    const auto result = task == Task::Uie ? tasks::train_uie(model.fen, model.uie, train, val, r.cfg, log)
                                          : tasks::train_det(model.fen, model.det, train, val, r.cfg, log);
    const auto& report = result.per_epoch;
    const uint64_t steps =
        static_cast<uint64_t>(r.cfg.epochs) * static_cast<uint64_t>(batches_per_epoch(train.size(), r.cfg.batch_size));
    save_task_model(model, steps, join(dir, "model.ckpt"));
    if (model.fen) {
        save_fen(*model.fen, steps, join(dir, "fen.ckpt"));
    }
    report.write_csv(join(dir, "metrics.csv"));
    loss_report(result.train_loss).write_csv(join(dir, "train_loss.csv"));
    write_line_plot(join(dir, "loss_curve.png"), std::string(task_name(task)) + " training loss",
                    {{"train loss", result.train_loss}});
    write_line_plot(join(dir, "val_curve.png"),
                    task == Task::Uie ? "validation PSNR (dB)" : "validation mAP50",
                    {{report.columns[0], column(report, 0)}});
    out << "saved " << join(dir, "model.ckpt") << "\n";
    return 0;
}

int cmd_init_fen(const TrainFlags& f, std::ostream& out) {
    const auto r = resolve(f, tasks::uie_defaults());
    const auto frozen = load_frozen_classifier(r.path("classifier_checkpoint", "--classifier"));
    const auto path = r.path("output_dir", "--out");
    if (fs::path(path).has_parent_path()) {
        prepare_dir(fs::path(path).parent_path().string());
    }
    save_fen(make_fen(r.cfg, frozen), 0, path);
    out << "saved " << path << "\n";
    return 0;
}

std::vector<fs::path> list_pngs(const std::string& dir) {
    if (!fs::is_directory(dir)) {
        throw IoError("input directory '" + dir + "' does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

// Channels of a (C, H, W) map tiled on a near-square grid, each min-max scaled.
torch::Tensor channel_mosaic(const torch::Tensor& chw) {
    const int64_t c = chw.size(0);
    const int64_t h = chw.size(1);
    const int64_t w = chw.size(2);
    const auto cols = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(c))));
    const int64_t rows = (c + cols - 1) / cols;
    auto mosaic = torch::zeros({1, rows * h, cols * w});
    for (int64_t k = 0; k < c; ++k) {
        auto ch = chw[k];
        const double lo = ch.min().item<double>();
        const double hi = ch.max().item<double>();
        auto scaled = hi > lo ? (ch - lo) / (hi - lo) : torch::zeros_like(ch);
        mosaic[0].slice(0, (k / cols) * h, (k / cols + 1) * h).slice(1, (k % cols) * w, (k % cols + 1) * w).copy_(scaled);
    }
    return mosaic;
}

int cmd_enhance(const std::string& checkpoint, const std::string& input_dir, const std::string& out_dir,
                bool dump_features, std::ostream& out) {
    auto model = load_fen(checkpoint);
    const auto files = list_pngs(input_dir);
    prepare_dir(out_dir);
    const auto feature_dir = join(out_dir, "features");
    if (dump_features) {
        prepare_dir(feature_dir);
    }
    torch::NoGradGuard no_grad;
    for (const auto& file : files) {
        const ImageTensor x(read_png(file.string()).unsqueeze(0));
        write_png(join(out_dir, file.filename().string()), enhance(x, model).data()[0]);
        if (dump_features) {
            const auto f = enhance_features(x, model).data();
            write_png(join(feature_dir, file.stem().string() + "_features.png"), channel_mosaic(f[0]));
        }
    }
    out << "enhanced " << files.size() << " images into " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& corpus, const std::string& split_name,
             const std::string& task_flag, std::string out_csv, int limit, std::ostream& out, std::ostream& err) {
    const auto task = parse_task(task_flag);
    const auto split = watersim::parse_split(split_name);
    auto model = load_task_model(checkpoint);
    if (model.task != task) {
        throw ValidationError("checkpoint '" + checkpoint + "' is a " + task_name(model.task) +
                              " model, not " + task_name(task));
    }
    const auto data = load_checked(corpus, split, limit);
    tasks::MetricReport report;
    if (task == Task::Uie) {
        report = tasks::evaluate_uie(model.fen, model.uie, data);
    } else {
        require_boxes(data, corpus);
        const auto eval = tasks::evaluate_det(model.fen, model.det, data);
        report = eval.per_image;
        err << "dataset map50 " << tasks::format_metric(eval.dataset_map50) << "\n";
    }
    if (out_csv.empty()) {
        out_csv = join(fs::path(checkpoint).parent_path().string(),
                       std::string("eval_") + task_name(task) + "_" + split_name + ".csv");
    }
    report.write_csv(out_csv);
    out << report.to_csv();
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"IA2U underwater feature-enhancement plugin", "ia2u"};
    app.require_subcommand(1);

    watersim::CorpusOptions corpus_opts;
    corpus_opts.n_train = 900;
    corpus_opts.n_val = 180;
    corpus_opts.n_test = 90;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "render a synthetic underwater corpus");
    gen->add_option("--out", gen_out, "corpus directory")->required();
    gen->add_option("--n-train", corpus_opts.n_train)->check(CLI::PositiveNumber);
    gen->add_option("--n-val", corpus_opts.n_val)->check(CLI::PositiveNumber);
    gen->add_option("--n-test", corpus_opts.n_test)->check(CLI::PositiveNumber);
    gen->add_option("--size", corpus_opts.image_size, "image side (multiple of 32)");
    gen->add_flag("--objects", corpus_opts.with_objects, "paint detection objects and write boxes");
    gen->add_option("--seed", corpus_opts.seed);

    TrainFlags cls_flags;
    auto* cls = app.add_subcommand("train-classifier", "train the water-type classifier");
    add_train_flags(cls, cls_flags, false);

    TrainFlags uie_flags;
    auto* uie = app.add_subcommand("train-uie", "train the enhancement head, with or without the plugin");
    add_train_flags(uie, uie_flags, true);

    TrainFlags det_flags;
    auto* det = app.add_subcommand("train-det", "train the toy detector, with or without the plugin");
    add_train_flags(det, det_flags, true);

    TrainFlags init_flags;
    auto* init = app.add_subcommand("init-fen", "write an untrained plugin checkpoint (--out is the file)");
    add_train_flags(init, init_flags, true);

    std::string enh_ckpt;
    std::string enh_in;
    std::string enh_out;
    bool dump_features = false;
    auto* enh = app.add_subcommand("enhance", "enhance a directory of PNG images");
    enh->add_option("--checkpoint", enh_ckpt, "fen.ckpt or a task model.ckpt with a plugin")->required();
    enh->add_option("--input-dir", enh_in)->required();
    enh->add_option("--out-dir", enh_out)->required();
    enh->add_flag("--dump-features", dump_features, "also write channel mosaics of the enhanced features");

    std::string ev_ckpt;
    std::string ev_corpus;
    std::string ev_split = "test";
    std::string ev_task;
    std::string ev_out;
    int ev_limit = 0;
    auto* ev = app.add_subcommand("eval", "evaluate a task checkpoint on a corpus split");
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--corpus", ev_corpus)->required();
    ev->add_option("--split", ev_split)->check(CLI::IsMember({"train", "val", "test"}));
    ev->add_option("--task", ev_task)->required()->check(CLI::IsMember({"uie", "det"}));
    ev->add_option("--out", ev_out, "CSV path (default: next to the checkpoint)");
    ev->add_option("--limit", ev_limit, "evaluate only the first N samples")->check(CLI::NonNegativeNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*gen) {
            return cmd_gen_data(corpus_opts, gen_out, out);
        }
        if (*cls) {
            return cmd_train_classifier(cls_flags, out);
        }
        if (*uie) {
            return cmd_train_task(Task::Uie, uie_flags, out);
        }
        if (*det) {
            return cmd_train_task(Task::Det, det_flags, out);
        }
        if (*init) {
            return cmd_init_fen(init_flags, out);
        }
        if (*enh) {
            return cmd_enhance(enh_ckpt, enh_in, enh_out, dump_features, out);
        }
        if (*ev) {
            return cmd_eval(ev_ckpt, ev_corpus, ev_split, ev_task, ev_out, ev_limit, out, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace ia2u::cli
