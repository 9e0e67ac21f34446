#ifndef GCPA_TRAIN_TRAINER_HPP
#define GCPA_TRAIN_TRAINER_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gcpa/core/archive.hpp"
#include "gcpa/core/kernels.hpp"
#include "gcpa/data/dataset.hpp"
#include "gcpa/net/network.hpp"

namespace gcpa {

struct TrainConfig {
    long epochs = 30;
    long batch_size = 32;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double max_lr_backbone = 5e-3;
    double max_lr_head = 0.05;
    double warmup_fraction = 1.0 / 30.0;  // one epoch of ramp by default
    uint64_t seed = 1;
    LossConfig loss;
};

// Strict form used when configs come from files; the trainer itself also
// accepts zero learning rates so a null update stays expressible in tests.
inline void validate_train(const TrainConfig& cfg) {
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("epochs and batch_size must be >= 1");
    if (!(cfg.warmup_fraction > 0.0 && cfg.warmup_fraction < 1.0))
        throw std::invalid_argument("warmup_fraction must lie in (0,1)");
    if (cfg.max_lr_backbone <= 0.0 || cfg.max_lr_head <= 0.0)
        throw std::invalid_argument("learning rates must be > 0");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw std::invalid_argument("momentum must lie in [0,1)");
    if (cfg.weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    validate_loss(cfg.loss);
}

// One shared shape for both groups: linear ramp 0 -> 1 over the first
// ceil(warmup_fraction * total) steps, then linear decay 1 -> 0 at total.
// Both branches meet at exactly 1, so the junction is continuous.
inline std::pair<double, double> lr_at(long step, long total_steps, const TrainConfig& cfg) {
    if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
    if (step < 0 || step >= total_steps)
        throw std::out_of_range("step " + std::to_string(step) + " outside [0, " +
                                std::to_string(total_steps) + ")");
    if (!(cfg.warmup_fraction > 0.0 && cfg.warmup_fraction < 1.0))
        throw std::invalid_argument("warmup_fraction must lie in (0,1)");
    long warm = long(std::ceil(cfg.warmup_fraction * double(total_steps)));
    double s = step <= warm ? double(step) / double(warm)
                            : double(total_steps - step) / double(total_steps - warm);
    return {cfg.max_lr_backbone * s, cfg.max_lr_head * s};
}

struct StepLog {
    long step = 0;
    double lr_backbone = 0, lr_head = 0;
    double loss_dom = 0;
    std::array<double, 3> loss_aux{0, 0, 0};
    double loss_total = 0;
};

struct Checkpoint {
    TensorArchive archive;  // param/<name>, momentum/<name>, buffer/<name>
    long step = 0;
    nlohmann::json config;
};

inline void save_checkpoint(Checkpoint& ck, const std::string& path) {
    ck.archive.meta() = {{"format", "gcpa-checkpoint"},
                         {"version", 1},
                         {"step", ck.step},
                         {"config", ck.config}};
    ck.archive.save(path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    Checkpoint ck;
    ck.archive = TensorArchive::load(path);
    const nlohmann::json& meta = ck.archive.meta();
    if (meta.value("format", "") != "gcpa-checkpoint")
        throw std::runtime_error("not a training checkpoint: " + path);
    if (meta.value("version", 0) != 1)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    ck.step = meta.at("step").get<long>();
    ck.config = meta.value("config", nlohmann::json::object());
    return ck;
}

struct RunOptions {
    std::string log_csv;          // per-step loss log, empty = no file
    std::string checkpoint_path;  // empty = no checkpointing
    long checkpoint_every = 0;    // extra periodic saves in steps, 0 = final only
    long max_steps = 0;           // pause after this many steps of this call; 0 = schedule end
};

namespace detail {

template <typename T>
Tensor<T> cast_tensor(const Tensor<float>& src) {
    if constexpr (std::is_same_v<T, float>) {
        return src;
    } else {
        Tensor<T> out(src.shape());
        for (long i = 0; i < src.numel(); ++i) out[i] = T(src[i]);
        return out;
    }
}

}  // namespace detail

// Owns the optimizer state for one model: momentum buffers, the two
// learning-rate groups (split on the "backbone." name prefix), and the step
// counter. The model's parameter handles are shared, so updates land in place.
template <typename T>
class Trainer {
public:
    Trainer(GCPANet<T>& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)) {
        if (cfg_.epochs < 1 || cfg_.batch_size < 1)
            throw std::invalid_argument("epochs and batch_size must be >= 1");
        if (!(cfg_.warmup_fraction > 0.0 && cfg_.warmup_fraction < 1.0))
            throw std::invalid_argument("warmup_fraction must lie in (0,1)");
        if (cfg_.max_lr_backbone < 0.0 || cfg_.max_lr_head < 0.0)
            throw std::invalid_argument("learning rates must be >= 0");
        if (cfg_.momentum < 0.0 || cfg_.momentum >= 1.0)
            throw std::invalid_argument("momentum must lie in [0,1)");
        if (cfg_.weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
        validate_loss(cfg_.loss);

        params_ = model_.params();
        backbone_.reserve(params_.size());
        momentum_.reserve(params_.size());
        for (const auto& p : params_) {
            backbone_.push_back(p.name.rfind("backbone.", 0) == 0);
            momentum_.emplace_back(p.var.shape());  // zero-initialized
        }
    }

    const TrainConfig& config() const { return cfg_; }
    long step_count() const { return step_; }
    const ParamList<T>& params() const { return params_; }
    bool in_backbone_group(size_t i) const { return backbone_.at(i); }
    const Tensor<T>& momentum_buffer(size_t i) const { return momentum_.at(i); }

    // One optimizer application with the gradients currently on the graph;
    // absent gradients count as zero. Split out so the update rule is
    // testable without a forward pass.
    void sgd_update(double lr_backbone, double lr_head) {
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& node = *params_[i].var.node();
            node.ensure_grad();  // zero-filled when this step never touched it
            T lr = T(backbone_[i] ? lr_backbone : lr_head);
            T wd = params_[i].decay ? T(cfg_.weight_decay) : T(0);
            kern::sgd_momentum(node.value.data(), momentum_[i].data(), node.grad.data(), lr,
                               T(cfg_.momentum), wd, node.value.numel());
        }
    }

    // forward(train) -> loss -> backward -> SGD on one prepared batch.
    StepLog step(const Tensor<T>& images, const Tensor<T>& masks, double lr_backbone,
                 double lr_head) {
        auto out = model_.forward(Var<T>::leaf(images, false), true);
        auto lb = training_loss(out, masks, cfg_.loss);
        StepLog log;
        log.step = step_;
        log.lr_backbone = lr_backbone;
        log.lr_head = lr_head;
        log.loss_dom = lb.dom;
        log.loss_aux = lb.aux;
        log.loss_total = double(lb.total.value()[0]);
        if (!std::isfinite(log.loss_total))
            throw std::runtime_error("non-finite loss at step " + std::to_string(step_));
        backward(lb.total);
        sgd_update(lr_backbone, lr_head);
        for (auto& p : params_) p.var.node()->zero_grad();
        ++step_;
        return log;
    }

    // Full schedule over the dataset. Resumable: a restored trainer picks up
    // at its saved step and reproduces the uninterrupted run exactly, because
    // batch composition and augmentation draws depend only on (seed, epoch,
    // sample), never on optimizer history.
    std::vector<StepLog> run(const DatasetIndex& data, const DataConfig& dcfg,
                             const RunOptions& opt = {}) {
        if (!data.labeled || data.samples.empty())
            throw std::invalid_argument("training needs a labeled, non-empty split");
        validate_data(dcfg);
        long n = long(data.samples.size());
        long per_epoch = (n + cfg_.batch_size - 1) / cfg_.batch_size;
        long total = cfg_.epochs * per_epoch;

        std::ofstream csv;
        if (!opt.log_csv.empty()) {
            csv.open(opt.log_csv, step_ == 0 ? std::ios::trunc : std::ios::app);
            if (!csv) throw std::runtime_error("cannot open loss log " + opt.log_csv);
            if (step_ == 0)
                csv << "step,lr_backbone,lr_head,loss_dom,loss_aux1,loss_aux2,loss_aux3,"
                       "loss_total\n";
            csv.precision(10);
        }

        std::vector<StepLog> logs;
        long cached_epoch = -1;
        std::vector<std::vector<long>> batches;
        while (step_ < total && (opt.max_steps == 0 || long(logs.size()) < opt.max_steps)) {
            long epoch = step_ / per_epoch;
            if (epoch != cached_epoch) {
                batches = epoch_batches(n, cfg_.batch_size, cfg_.seed, epoch);
                cached_epoch = epoch;
            }
            TrainBatch batch =
                make_train_batch(data, batches[size_t(step_ % per_epoch)], dcfg, cfg_.seed, epoch);
            auto [lr_b, lr_h] = lr_at(step_, total, cfg_);
            StepLog log = step(detail::cast_tensor<T>(batch.images),
                               detail::cast_tensor<T>(batch.masks), lr_b, lr_h);
            if (csv.is_open())
                csv << log.step << ',' << log.lr_backbone << ',' << log.lr_head << ','
                    << log.loss_dom << ',' << log.loss_aux[0] << ',' << log.loss_aux[1] << ','
                    << log.loss_aux[2] << ',' << log.loss_total << '\n';
            logs.push_back(log);
            if (!opt.checkpoint_path.empty() && opt.checkpoint_every > 0 &&
                step_ % opt.checkpoint_every == 0 && step_ < total) {
                Checkpoint ck = snapshot();
                save_checkpoint(ck, opt.checkpoint_path);
            }
        }
        if (!opt.checkpoint_path.empty()) {
            Checkpoint ck = snapshot();
            save_checkpoint(ck, opt.checkpoint_path);
        }
        return logs;
    }

    // Everything needed to continue: parameters, running statistics,
    // momentum buffers, the step counter and a config echo.
    Checkpoint snapshot() {
        Checkpoint ck;
        for (const auto& p : params_) ck.archive.put("param/" + p.name, p.var.value());
        for (size_t i = 0; i < params_.size(); ++i)
            ck.archive.put("momentum/" + params_[i].name, momentum_[i]);
        for (const auto& b : model_.buffers()) ck.archive.put("buffer/" + b.name, *b.tensor);
        ck.step = step_;
        ck.config = config_json();
        return ck;
    }

    void restore(const Checkpoint& ck) {
        std::set<std::string> want;
        for (const auto& p : params_) {
            want.insert("param/" + p.name);
            want.insert("momentum/" + p.name);
        }
        for (const auto& b : model_.buffers()) want.insert("buffer/" + b.name);

        std::vector<std::string> have = ck.archive.names();
        std::string missing, unexpected;
        for (const auto& w : want)
            if (!ck.archive.contains(w)) append_name(missing, w);
        for (const auto& h : have)
            if (!want.count(h)) append_name(unexpected, h);
        if (!missing.empty() || !unexpected.empty()) {
            std::string msg = "checkpoint does not match model:";
            if (!missing.empty()) msg += " missing " + missing;
            if (!unexpected.empty()) msg += (missing.empty() ? " " : "; ") + ("extra " + unexpected);
            throw std::runtime_error(msg);
        }

        for (const auto& p : params_) {
            Tensor<T> t = ck.archive.template get<T>("param/" + p.name);
            require_shape(t, p.var.shape(), "param/" + p.name);
            p.var.node()->value = std::move(t);
        }
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor<T> t = ck.archive.template get<T>("momentum/" + params_[i].name);
            require_shape(t, momentum_[i].shape(), "momentum/" + params_[i].name);
            momentum_[i] = std::move(t);
        }
        for (const auto& b : model_.buffers()) {
            Tensor<T> t = ck.archive.template get<T>("buffer/" + b.name);
            require_shape(t, b.tensor->shape(), "buffer/" + b.name);
            *b.tensor = std::move(t);
        }
        step_ = ck.step;
    }

private:
    static void append_name(std::string& list, const std::string& name) {
        if (std::count(list.begin(), list.end(), ',') >= 4) return;  // keep messages bounded
        list += (list.empty() ? "'" : ", '") + name + "'";
    }

    nlohmann::json config_json() const {
        const NetworkConfig& nc = model_.config();
        return {{"epochs", cfg_.epochs},
                {"batch_size", cfg_.batch_size},
                {"momentum", cfg_.momentum},
                {"weight_decay", cfg_.weight_decay},
                {"max_lr_backbone", cfg_.max_lr_backbone},
                {"max_lr_head", cfg_.max_lr_head},
                {"warmup_fraction", cfg_.warmup_fraction},
                {"seed", cfg_.seed},
                {"lambda", {cfg_.loss.lambda[0], cfg_.loss.lambda[1], cfg_.loss.lambda[2]}},
                {"network",
                 {{"backbone", nc.backbone.kind},
                  {"d", nc.d},
                  {"reduction", nc.reduction},
                  {"ablation",
                   {{"use_fia", nc.ablation.use_fia},
                    {"use_sr", nc.ablation.use_sr},
                    {"use_ha", nc.ablation.use_ha},
                    {"use_gcf", nc.ablation.use_gcf},
                    {"gcf_shared", nc.ablation.gcf_shared}}}}}};
    }

    GCPANet<T>& model_;
    TrainConfig cfg_;
    ParamList<T> params_;
    std::vector<bool> backbone_;
    std::vector<Tensor<T>> momentum_;
    long step_ = 0;
};

// Ablation-table entry point: the flag set decides which modules exist.
template <typename T>
GCPANet<T> build_variant(Rng& rng, NetworkConfig cfg, const AblationFlags& flags) {
    cfg.ablation = flags;
    return GCPANet<T>(rng, cfg);
}

}  // namespace gcpa

#endif
