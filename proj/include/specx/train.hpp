#pragma once

#include <string>

#include "specx/backbone.hpp"
#include "specx/config.hpp"
#include "specx/data.hpp"

namespace specx {

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    double auc = 0.0;  // NaN when undefined (single-class split)
    double map = 0.0;
};

// Eval-mode pass over the whole dataset in minibatches. AUC/mAP need exactly
// two classes; they come back NaN otherwise.
EvalResult evaluate_model(SpecXNet& model, const Dataset& ds, int batch);

struct TrainResult {
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
    std::string checkpoint_path;  // best-val weights
    std::string metrics_path;
};

// Minibatch SGD (or Adam) with the composite schedule. Writes
// out_dir/metrics.csv (`epoch,split,loss,accuracy,auc,map,lr`, one train and
// one val row per epoch) and out_dir/best.ckpt. Deterministic given the config
// seed; aborts on a non-finite loss naming the offending step.
TrainResult train_model(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                        const std::string& out_dir);

}  // namespace specx
