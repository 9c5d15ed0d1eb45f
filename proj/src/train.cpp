#include "specx/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <variant>

#include "specx/checkpoint.hpp"
#include "specx/metrics.hpp"
#include "specx/optim.hpp"
#include "specx/rng.hpp"

namespace specx {

namespace {

std::vector<int> batch_labels(const Dataset& ds, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(ds.labels[i]);
    return out;
}

// p(class 1) per row via the stable two-logit form.
void append_scores(const Tensor& logits, std::vector<double>& scores) {
    const std::size_t n = logits.shape[0], k = logits.shape[1];
    for (std::size_t i = 0; i < n; ++i) {
        const double gap = logits.data[i * k + 0] - logits.data[i * k + 1];
        scores.push_back(1.0 / (1.0 + std::exp(gap)));
    }
}

std::string metrics_row(int epoch, const char* split, double loss, double acc, double auc_v,
                        double map_v, double lr) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", epoch, split, loss, acc,
                  auc_v, map_v, lr);
    return buf;
}

}  // namespace

EvalResult evaluate_model(SpecXNet& model, const Dataset& ds, int batch) {
    if (batch < 1) throw std::invalid_argument("evaluate: batch must be >= 1");
    if (model.cfg.classes != 2)
        throw std::invalid_argument("evaluate: metrics are defined for 2 classes");
    const std::size_t n = ds.images.size();
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(n);
    labels.reserve(n);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch)) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(n, start + static_cast<std::size_t>(batch)); ++i)
            idx.push_back(i);
        Tape tape(false);
        Var x = tape.input(make_batch(ds, idx, static_cast<std::size_t>(model.cfg.in_channels)));
        Var logits = model.forward(tape, x, false, false);
        std::vector<int> lb = batch_labels(ds, idx);
        Var loss = tape.cross_entropy(logits, lb);
        loss_sum += tape.val(loss).data[0] * static_cast<double>(idx.size());
        append_scores(tape.val(logits), scores);
        labels.insert(labels.end(), lb.begin(), lb.end());
    }
    EvalResult r;
    r.loss = loss_sum / static_cast<double>(n);
    r.accuracy = accuracy(scores, labels);
    r.auc = auc(scores, labels);
    r.map = mean_average_precision(scores, labels);
    return r;
}

TrainResult train_model(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                        const std::string& out_dir) {
    cfg.validate();
    if (cfg.model.classes != 2)
        throw std::invalid_argument("train: the pipeline is binary (classes = 2)");
    for (int l : train.labels)
        if (l != 0 && l != 1) throw std::invalid_argument("train: labels must be 0/1");

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("train: cannot create " + out_dir + ": " + ec.message());

    SpecXNet model(cfg.model);
    ParamList params = model.params();
    std::variant<SgdMomentum, Adam> opt =
        cfg.optimizer == "sgd" ? std::variant<SgdMomentum, Adam>(SgdMomentum(params, cfg.momentum))
                               : std::variant<SgdMomentum, Adam>(Adam(params));

    const ScheduleSpec sched = cfg.schedule();
    const std::size_t n = train.images.size();
    const std::size_t channels = static_cast<std::size_t>(cfg.model.in_channels);

    TrainResult result;
    result.metrics_path = out_dir + "/metrics.csv";
    result.checkpoint_path = out_dir + "/best.ckpt";
    std::ofstream log(result.metrics_path, std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("train: cannot open " + result.metrics_path);
    log << "epoch,split,loss,accuracy,auc,map,lr\n";

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, sched);

        Rng shuffle(hash_mix(cfg.model.seed, static_cast<std::uint64_t>(epoch), 40));
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[shuffle.below(i + 1)]);

        double loss_sum = 0.0;
        std::vector<double> scores;
        std::vector<int> seen_labels;
        scores.reserve(n);
        seen_labels.reserve(n);
        int step = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch)) {
            std::vector<std::size_t> idx(
                order.begin() + static_cast<std::ptrdiff_t>(start),
                order.begin() +
                    static_cast<std::ptrdiff_t>(std::min(n, start + static_cast<std::size_t>(cfg.batch))));
            std::vector<int> lb = batch_labels(train, idx);

            Tape tape;
            Var x = tape.input(make_batch(train, idx, channels));
            Var logits = model.forward(tape, x, true, true);
            Var loss = tape.cross_entropy(logits, lb);
            const double objective =
                tape.val(loss).data[0] + l2_penalty(params, cfg.weight_decay);
            if (!std::isfinite(objective))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step));
            tape.backward(loss);
            add_l2_gradient(params, cfg.weight_decay);
            std::visit([&](auto& o) { o.step(params, lr); }, opt);

            loss_sum += objective * static_cast<double>(idx.size());
            append_scores(tape.val(logits), scores);
            seen_labels.insert(seen_labels.end(), lb.begin(), lb.end());
            ++step;
        }

        const double train_loss = loss_sum / static_cast<double>(n);
        log << metrics_row(epoch, "train", train_loss, accuracy(scores, seen_labels),
                           auc(scores, seen_labels), mean_average_precision(scores, seen_labels),
                           lr);

        EvalResult v = evaluate_model(model, val, cfg.batch);
        log << metrics_row(epoch, "val", v.loss, v.accuracy, v.auc, v.map, lr);
        log.flush();

        if (v.accuracy > result.best_val_accuracy || result.best_epoch < 0) {
            result.best_val_accuracy = v.accuracy;
            result.best_epoch = epoch;
            save_checkpoint(result.checkpoint_path, serialize_train_config(cfg), params,
                            cfg.model.dtype);
        }
    }
    return result;
}

}  // namespace specx
