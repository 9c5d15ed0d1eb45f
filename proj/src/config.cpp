#include "specx/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace specx {

namespace {

// Shortest representation that parses back to the same double.
std::string fmt_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("config: cannot format double");
    return std::string(buf, end);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
    throw std::invalid_argument("config: key '" + key + "' = '" + value + "': " + why);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception& e) {
        bad(key, value, std::string("not an integer (") + e.what() + ")");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception& e) {
        bad(key, value, std::string("not a number (") + e.what() + ")");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad(key, value, "expected true/false");
}

std::vector<BlockConfig> parse_blocks(const std::string& key, const std::string& value) {
    std::vector<BlockConfig> out;
    for (const std::string& item : split_list(value, ',')) {
        std::vector<std::string> f = split_list(item, ':');
        if (f.size() != 5) bad(key, item, "expected c_in:c_out:kernel:pool:alpha");
        BlockConfig b;
        b.c_in = static_cast<int>(parse_int(key, f[0]));
        b.c_out = static_cast<int>(parse_int(key, f[1]));
        b.kernel = static_cast<int>(parse_int(key, f[2]));
        b.pool = static_cast<int>(parse_int(key, f[3]));
        b.alpha = parse_double(key, f[4]);
        out.push_back(b);
    }
    return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv(const std::string& text,
                                                          const std::string& source) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(source + " line " + std::to_string(lineno) +
                                        ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument(source + " line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

ScheduleSpec TrainConfig::schedule() const {
    ScheduleSpec s;
    s.base_lr = lr;
    s.warmup_epochs = warmup;
    s.horizon = horizon > 0 ? horizon : epochs;
    s.decay_epochs = decay_epochs;
    s.decay_factor = decay_factor;
    return s;
}

void TrainConfig::validate() const {
    model.validate();
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
    if (!(momentum >= 0.0 && momentum <= 1.0))
        throw std::invalid_argument("config: momentum outside [0,1]");
    if (weight_decay < 0.0) throw std::invalid_argument("config: negative weight_decay");
    if (optimizer != "sgd" && optimizer != "adam")
        throw std::invalid_argument("config: optimizer must be sgd or adam, got " + optimizer);
    schedule().validate();
}

TrainConfig parse_train_config(const std::string& text, const std::string& source) {
    TrainConfig cfg;
    for (const auto& [key, value] : parse_kv(text, source)) {
        if (key == "preset") {
            std::uint64_t keep_seed = cfg.model.seed;
            cfg.model = preset_model(value);
            cfg.model.seed = keep_seed;
        } else if (key == "alpha") {
            double a = parse_double(key, value);
            if (!(a >= 0.0 && a <= 1.0)) bad(key, value, "outside [0,1]");
            cfg.model.set_alpha(a);
        } else if (key == "input_channels") {
            cfg.model.in_channels = static_cast<int>(parse_int(key, value));
        } else if (key == "input_h") {
            cfg.model.in_h = static_cast<int>(parse_int(key, value));
        } else if (key == "input_w") {
            cfg.model.in_w = static_cast<int>(parse_int(key, value));
        } else if (key == "stem") {
            cfg.model.stem_channels = static_cast<int>(parse_int(key, value));
        } else if (key == "blocks") {
            cfg.model.blocks = parse_blocks(key, value);
        } else if (key == "classes") {
            cfg.model.classes = static_cast<int>(parse_int(key, value));
        } else if (key == "dtype") {
            cfg.model.dtype = value;
        } else if (key == "seed") {
            cfg.model.seed = static_cast<std::uint64_t>(parse_int(key, value));
        } else if (key == "dfa_reduction") {
            cfg.model.dfa.reduction = static_cast<int>(parse_int(key, value));
        } else if (key == "per_bin") {
            cfg.model.ddfc.spectral.per_bin = parse_bool(key, value);
        } else if (key == "epochs") {
            cfg.epochs = static_cast<int>(parse_int(key, value));
        } else if (key == "batch") {
            cfg.batch = static_cast<int>(parse_int(key, value));
        } else if (key == "lr") {
            cfg.lr = parse_double(key, value);
        } else if (key == "momentum") {
            cfg.momentum = parse_double(key, value);
        } else if (key == "weight_decay") {
            cfg.weight_decay = parse_double(key, value);
        } else if (key == "optimizer") {
            cfg.optimizer = value;
        } else if (key == "warmup") {
            cfg.warmup = static_cast<int>(parse_int(key, value));
        } else if (key == "horizon") {
            cfg.horizon = static_cast<int>(parse_int(key, value));
        } else if (key == "decay_epochs") {
            cfg.decay_epochs.clear();
            if (!trim(value).empty())
                for (const std::string& item : split_list(value, ','))
                    cfg.decay_epochs.push_back(static_cast<int>(parse_int(key, item)));
        } else if (key == "decay_factor") {
            cfg.decay_factor = parse_double(key, value);
        } else {
            throw std::invalid_argument(source + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_train_config(text, path);
}

std::string serialize_train_config(const TrainConfig& cfg) {
    std::ostringstream out;
    out << "input_channels = " << cfg.model.in_channels << "\n";
    out << "input_h = " << cfg.model.in_h << "\n";
    out << "input_w = " << cfg.model.in_w << "\n";
    out << "stem = " << cfg.model.stem_channels << "\n";
    out << "blocks = ";
    for (std::size_t i = 0; i < cfg.model.blocks.size(); ++i) {
        const BlockConfig& b = cfg.model.blocks[i];
        if (i) out << ",";
        out << b.c_in << ":" << b.c_out << ":" << b.kernel << ":" << b.pool << ":"
            << fmt_double(b.alpha);
    }
    out << "\n";
    out << "classes = " << cfg.model.classes << "\n";
    out << "dtype = " << cfg.model.dtype << "\n";
    out << "seed = " << cfg.model.seed << "\n";
    out << "dfa_reduction = " << cfg.model.dfa.reduction << "\n";
    out << "per_bin = " << (cfg.model.ddfc.spectral.per_bin ? "true" : "false") << "\n";
    out << "epochs = " << cfg.epochs << "\n";
    out << "batch = " << cfg.batch << "\n";
    out << "lr = " << fmt_double(cfg.lr) << "\n";
    out << "momentum = " << fmt_double(cfg.momentum) << "\n";
    out << "weight_decay = " << fmt_double(cfg.weight_decay) << "\n";
    out << "optimizer = " << cfg.optimizer << "\n";
    out << "warmup = " << cfg.warmup << "\n";
    out << "horizon = " << cfg.horizon << "\n";
    out << "decay_epochs = ";
    for (std::size_t i = 0; i < cfg.decay_epochs.size(); ++i)
        out << (i ? "," : "") << cfg.decay_epochs[i];
    out << "\n";
    out << "decay_factor = " << fmt_double(cfg.decay_factor) << "\n";
    return out.str();
}

}  // namespace specx
