#ifndef GCPA_CLI_CONFIG_HPP
#define GCPA_CLI_CONFIG_HPP

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "gcpa/data/dataset.hpp"
#include "gcpa/train/trainer.hpp"
#include "json.hpp"

namespace gcpa {

// Everything one run needs, loadable from a single JSON file. The snapshot
// written into output_dir round-trips losslessly through save/load.
struct RunConfig {
    NetworkConfig model;
    TrainConfig train;
    long checkpoint_every = 0;
    DataConfig data;
    std::string data_root = "data";
    std::string train_dataset = "duts-tr";
    std::vector<std::string> eval_datasets;
    double eval_alpha = 0.5;
    double eval_beta2 = 0.3;
    std::string output_dir = "runs/gcpa";
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const char* section,
                                std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok)
            throw std::runtime_error("unknown key '" + key + "' in " + section +
                                     " section of run config");
    }
}

template <typename T>
T pull(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["model"] = {{"backbone", c.model.backbone.kind},
                  {"pretrained", c.model.backbone.pretrained_weights_path},
                  {"d", c.model.d},
                  {"reduction", c.model.reduction},
                  {"ablation",
                   {{"use_fia", c.model.ablation.use_fia},
                    {"use_sr", c.model.ablation.use_sr},
                    {"use_ha", c.model.ablation.use_ha},
                    {"use_gcf", c.model.ablation.use_gcf},
                    {"gcf_shared", c.model.ablation.gcf_shared}}}};
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"momentum", c.train.momentum},
                  {"weight_decay", c.train.weight_decay},
                  {"max_lr_backbone", c.train.max_lr_backbone},
                  {"max_lr_head", c.train.max_lr_head},
                  {"warmup_fraction", c.train.warmup_fraction},
                  {"seed", c.train.seed},
                  {"lambda", {c.train.loss.lambda[0], c.train.loss.lambda[1],
                              c.train.loss.lambda[2]}},
                  {"checkpoint_every", c.checkpoint_every}};
    j["data"] = {{"root", c.data_root},
                 {"train_dataset", c.train_dataset},
                 {"eval_datasets", c.eval_datasets},
                 {"resize", c.data.resize},
                 {"crop", c.data.crop}};
    j["eval"] = {{"alpha", c.eval_alpha}, {"beta2", c.eval_beta2}};
    j["output_dir"] = c.output_dir;
    return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    detail::reject_unknown_keys(j, "top-level",
                                {"model", "train", "data", "eval", "output_dir"});
    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::reject_unknown_keys(m, "model",
                                    {"backbone", "pretrained", "d", "reduction", "ablation"});
        c.model.backbone.kind = detail::pull<std::string>(m, "backbone", c.model.backbone.kind);
        c.model.backbone.pretrained_weights_path =
            detail::pull<std::string>(m, "pretrained", "");
        c.model.d = detail::pull<long>(m, "d", c.model.d);
        c.model.reduction = detail::pull<long>(m, "reduction", c.model.reduction);
        if (m.contains("ablation")) {
            const auto& a = m.at("ablation");
            detail::reject_unknown_keys(
                a, "model.ablation", {"use_fia", "use_sr", "use_ha", "use_gcf", "gcf_shared"});
            AblationFlags& f = c.model.ablation;
            f.use_fia = detail::pull<bool>(a, "use_fia", f.use_fia);
            f.use_sr = detail::pull<bool>(a, "use_sr", f.use_sr);
            f.use_ha = detail::pull<bool>(a, "use_ha", f.use_ha);
            f.use_gcf = detail::pull<bool>(a, "use_gcf", f.use_gcf);
            f.gcf_shared = detail::pull<bool>(a, "gcf_shared", f.gcf_shared);
        }
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown_keys(
            t, "train", {"epochs", "batch_size", "momentum", "weight_decay", "max_lr_backbone",
                         "max_lr_head", "warmup_fraction", "seed", "lambda", "checkpoint_every"});
        c.train.epochs = detail::pull<long>(t, "epochs", c.train.epochs);
        c.train.batch_size = detail::pull<long>(t, "batch_size", c.train.batch_size);
        c.train.momentum = detail::pull<double>(t, "momentum", c.train.momentum);
        c.train.weight_decay = detail::pull<double>(t, "weight_decay", c.train.weight_decay);
        c.train.max_lr_backbone =
            detail::pull<double>(t, "max_lr_backbone", c.train.max_lr_backbone);
        c.train.max_lr_head = detail::pull<double>(t, "max_lr_head", c.train.max_lr_head);
        c.train.warmup_fraction =
            detail::pull<double>(t, "warmup_fraction", c.train.warmup_fraction);
        c.train.seed = detail::pull<long>(t, "seed", c.train.seed);
        if (t.contains("lambda")) {
            const auto& l = t.at("lambda");
            if (l.size() != 3)
                throw std::runtime_error("train.lambda must list exactly 3 weights");
            for (int i = 0; i < 3; ++i) c.train.loss.lambda[size_t(i)] = l[size_t(i)];
        }
        c.checkpoint_every = detail::pull<long>(t, "checkpoint_every", 0);
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::reject_unknown_keys(d, "data",
                                    {"root", "train_dataset", "eval_datasets", "resize", "crop"});
        c.data_root = detail::pull<std::string>(d, "root", c.data_root);
        c.train_dataset = detail::pull<std::string>(d, "train_dataset", c.train_dataset);
        c.eval_datasets =
            detail::pull<std::vector<std::string>>(d, "eval_datasets", c.eval_datasets);
        c.data.resize = detail::pull<long>(d, "resize", c.data.resize);
        c.data.crop = detail::pull<long>(d, "crop", c.data.crop);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        detail::reject_unknown_keys(e, "eval", {"alpha", "beta2"});
        c.eval_alpha = detail::pull<double>(e, "alpha", c.eval_alpha);
        c.eval_beta2 = detail::pull<double>(e, "beta2", c.eval_beta2);
    }
    c.output_dir = detail::pull<std::string>(j, "output_dir", c.output_dir);
    return c;
}

inline void validate_run_config(const RunConfig& c) {
    if (c.model.backbone.kind != "tiny" && c.model.backbone.kind != "resnet50")
        throw std::runtime_error("model.backbone must be 'tiny' or 'resnet50', got '" +
                                 c.model.backbone.kind + "'");
    if (c.model.d < 1 || c.model.reduction < 1)
        throw std::runtime_error("model.d and model.reduction must be >= 1");
    validate_ablation(c.model.ablation);
    validate_train(c.train);
    validate_data(c.data);
    if (c.checkpoint_every < 0)
        throw std::runtime_error("train.checkpoint_every must be >= 0");
    if (c.data_root.empty() || c.train_dataset.empty())
        throw std::runtime_error("data.root and data.train_dataset must be set");
    if (!(c.eval_alpha >= 0 && c.eval_alpha <= 1))
        throw std::runtime_error("eval.alpha must be in [0, 1]");
    if (!(c.eval_beta2 > 0)) throw std::runtime_error("eval.beta2 must be > 0");
    if (c.output_dir.empty()) throw std::runtime_error("output_dir must be set");
}

// GCPA_DATA_ROOT overrides the configured dataset root when set.
inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config " + path + " is not valid JSON: " + e.what());
    }
    RunConfig c;
    try {
        c = run_config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }
    if (const char* env = std::getenv("GCPA_DATA_ROOT"); env && *env) c.data_root = env;
    validate_run_config(c);
    return c;
}

inline void save_run_config(const RunConfig& c, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write config " + path);
    f << run_config_to_json(c).dump(2) << '\n';
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
    return run_config_to_json(a) == run_config_to_json(b);
}

}  // namespace gcpa

#endif
