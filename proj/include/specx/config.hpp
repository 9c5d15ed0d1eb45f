#pragma once

#include <string>
#include <utility>
#include <vector>

#include "specx/backbone.hpp"
#include "specx/optim.hpp"

namespace specx {

// `key = value` lines, `#` comments, blank lines ignored. Malformed lines and
// unknown keys are errors naming the source and line.
std::vector<std::pair<std::string, std::string>> parse_kv(const std::string& text,
                                                          const std::string& source);

struct TrainConfig {
    ModelConfig model = preset_model("desk-small");
    int epochs = 30;
    int batch = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::string optimizer = "sgd";  // sgd | adam
    int warmup = 5;
    int horizon = 0;  // 0 resolves to epochs
    std::vector<int> decay_epochs = {30, 60, 80};
    double decay_factor = 0.1;

    ScheduleSpec schedule() const;
    void validate() const;
};

// Applies keys in file order on top of the defaults; a `preset` key resets the
// whole model section, so it belongs before any model override.
TrainConfig parse_train_config(const std::string& text, const std::string& source);
TrainConfig load_train_config(const std::string& path);

// Round-trippable: serializes the model explicitly (no preset reference).
std::string serialize_train_config(const TrainConfig& cfg);

}  // namespace specx
