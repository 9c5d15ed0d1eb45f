#include "specx/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "specx/backbone.hpp"
#include "specx/checkpoint.hpp"
#include "specx/complexity.hpp"
#include "specx/config.hpp"
#include "specx/data.hpp"
#include "specx/ddfc.hpp"
#include "specx/fft.hpp"
#include "specx/gradcheck_targets.hpp"
#include "specx/train.hpp"

namespace specx::cli {

namespace {

std::uint64_t env_seed() {
    const char* env = std::getenv("SPECX_SEED");
    if (!env || !*env) return 0;
    try {
        std::size_t used = 0;
        std::uint64_t v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string("SPECX_SEED is not an unsigned integer: ") + env);
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    return flag ? *flag : env_seed();
}

std::vector<double> parse_alphas(const std::string& list) {
    std::vector<double> out;
    std::istringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        double a = std::stod(item, &used);
        if (used != item.size() || !(a >= 0.0 && a <= 1.0))
            throw std::invalid_argument("bad alpha '" + item + "' (need values in [0,1])");
        out.push_back(a);
    }
    if (out.empty()) throw std::invalid_argument("empty alpha list");
    return out;
}

std::string trim_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::pair<TrainConfig, std::unique_ptr<SpecXNet>> model_from_checkpoint(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    TrainConfig cfg = parse_train_config(ck.meta, path + " (meta)");
    auto model = std::make_unique<SpecXNet>(cfg.model);
    ParamList params = model->params();
    load_into(ck, params);
    return {std::move(cfg), std::move(model)};
}

double eval_checkpoint_accuracy(const std::string& ckpt, const std::string& data,
                                const std::string& split, int batch) {
    auto [cfg, model] = model_from_checkpoint(ckpt);
    Dataset ds = load_split(data, split);
    return evaluate_model(*model, ds, batch).accuracy;
}

struct GenerateArgs {
    int n = 0;
    std::string mode = "grid";
    int freq = 12;
    double amp = 0.15;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t height = 64, width = 64;
    double phase_jitter = 1.0;
    double noise = 0.02;
    double contrast_lo = 0.8, contrast_hi = 1.2;
};

int cmd_generate(const GenerateArgs& a) {
    GeneratorOptions opt;
    opt.n_per_class = a.n;
    opt.h = a.height;
    opt.w = a.width;
    opt.artifact = {a.mode, a.freq, a.amp, a.phase_jitter};
    opt.seed = resolve_seed(a.seed);
    opt.out_dir = a.out;
    opt.noise = a.noise;
    opt.contrast_lo = a.contrast_lo;
    opt.contrast_hi = a.contrast_hi;
    Manifest m = generate_dataset(opt);
    int counts[3][2] = {};
    for (const ManifestEntry& e : m.entries) {
        const int s = e.split == "train" ? 0 : (e.split == "val" ? 1 : 2);
        ++counts[s][e.label];
    }
    std::cout << "wrote " << m.entries.size() << " images under " << a.out << " (seed "
              << opt.seed << ")\n";
    std::cout << "split,real,fake\n";
    const char* names[3] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s)
        std::cout << names[s] << "," << counts[s][0] << "," << counts[s][1] << "\n";
    return 0;
}

struct TrainArgs {
    std::string config, data, out;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
};

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg = load_train_config(a.config);
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.seed) cfg.model.seed = *a.seed;
    if (a.alpha) cfg.model.set_alpha(*a.alpha);
    cfg.validate();
    Dataset train = load_split(a.data, "train");
    Dataset val = load_split(a.data, "val");
    std::cerr << "training " << cfg.epochs << " epochs on " << train.images.size()
              << " samples (val " << val.images.size() << ", seed " << cfg.model.seed << ")\n";
    TrainResult r = train_model(cfg, train, val, a.out);
    std::cout << "best epoch " << r.best_epoch << " val accuracy " << r.best_val_accuracy << "\n";
    std::cout << "checkpoint " << r.checkpoint_path << "\n";
    std::cout << "metrics " << r.metrics_path << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint, data, split = "test";
    int batch = 64;
};

int cmd_eval(const EvalArgs& a) {
    auto [cfg, model] = model_from_checkpoint(a.checkpoint);
    Dataset ds = load_split(a.data, a.split);
    EvalResult r = evaluate_model(*model, ds, a.batch);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g", r.accuracy, r.auc, r.map, r.loss);
    std::cout << "split=" << a.split << " n=" << ds.images.size() << "\n";
    std::cout << "accuracy,auc,map,loss\n" << buf << "\n";
    return 0;
}

struct GradcheckArgs {
    std::string module = "all";
    std::optional<std::uint64_t> seed;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    bool ok = true;
    for (const NamedGradcheck& g : run_gradcheck_targets(a.module, resolve_seed(a.seed))) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-8s max_rel=%.3e coords=%zu refined=%zu worst=%s %s\n",
                      g.name.c_str(), g.report.max_rel_error, g.report.coords_checked,
                      g.report.coords_refined, g.report.worst_param.c_str(),
                      g.report.pass ? "PASS" : "FAIL");
        std::cout << buf;
        ok = ok && g.report.pass;
    }
    if (!ok) throw std::runtime_error("gradient check failed");
    return 0;
}

struct FlopsArgs {
    int c1 = 64, c2 = 64, h = 56, w = 56, k = 3;
    double alpha = 0.5;
    std::string format = "text";
};

int cmd_flops(const FlopsArgs& a) {
    std::cout << format_report(analytic_complexity(a.c1, a.c2, a.h, a.w, a.k, a.alpha),
                               a.format == "csv");
    return 0;
}

struct SpectrumArgs {
    std::string input, out;
};

int cmd_spectrum(const SpectrumArgs& a) {
    save_image(a.out, log_magnitude_spectrum(load_image(a.input)));
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

struct BenchArgs {
    std::string preset = "desk";
    int repeats = 20;
    std::string format = "text";
};

int cmd_bench(const BenchArgs& a) {
    if (a.repeats < 1) throw std::invalid_argument("bench: repeats must be >= 1");
    const bool csv = a.format == "csv";
    std::ostringstream out;
    if (csv)
        out << "name,shape,median_ms,ratio\n";
    else
        out << "name                        shape            median_ms   ratio\n";
    auto emit = [&](const std::string& name, const std::string& shape, double ms, double ratio) {
        if (csv) {
            out << name << "," << shape << "," << ms << "," << (ratio > 0 ? trim_double(ratio) : "")
                << "\n";
        } else {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%-27s %-16s %9.3f   %s\n", name.c_str(),
                          shape.c_str(), ms, ratio > 0 ? trim_double(ratio).c_str() : "-");
            out << buf;
        }
    };

    // spectral stage cost vs grid size; the ratio column tracks the doubling cost
    {
        Rng rng(1);
        SpectralTransform spec(16, 16, {}, rng);
        double prev = 0.0;
        for (std::size_t hdim : {16u, 32u, 64u}) {
            Tensor x({1, 16, hdim, hdim});
            for (double& v : x.data) v = rng.uniform();
            const double ns = median_ns(
                [&] {
                    Tape t(false);
                    spec.forward(t, t.input(x), false, false);
                },
                3, a.repeats);
            emit("spectral transform", "16x" + std::to_string(hdim) + "x" + std::to_string(hdim),
                 ns / 1e6, prev > 0 ? ns / prev : 0.0);
            prev = ns;
        }
    }

    // one backbone stage vs its dense counterpart at the preset's entry width
    {
        ModelConfig cfg = preset_model(a.preset);
        BlockConfig bc = cfg.blocks.front();
        const std::size_t side = static_cast<std::size_t>(cfg.in_h);
        Rng rng(2);
        SfBlock fused(bc, cfg.ddfc, cfg.dfa, rng);
        BlockConfig plain_cfg = bc;
        plain_cfg.alpha = 0.0;
        Rng rng2(2);
        SfBlock degenerate(plain_cfg, cfg.ddfc, cfg.dfa, rng2);
        BaselineBlock baseline = BaselineBlock::from_block(degenerate);
        Tensor x({1, static_cast<std::size_t>(bc.c_in), side, side});
        for (double& v : x.data) v = rng.uniform();
        const std::string shape = std::to_string(bc.c_in) + "x" + std::to_string(side) + "x" +
                                  std::to_string(side);
        const double t_fused = median_ns(
            [&] {
                Tape t(false);
                fused.forward(t, t.input(x), false, false);
            },
            3, a.repeats);
        const double t_degen = median_ns(
            [&] {
                Tape t(false);
                degenerate.forward(t, t.input(x), false, false);
            },
            3, a.repeats);
        const double t_plain = median_ns(
            [&] {
                Tape t(false);
                baseline.forward(t, t.input(x), false, false);
            },
            3, a.repeats);
        emit("block alpha=0.5", shape, t_fused / 1e6, t_fused / t_plain);
        emit("block alpha=0", shape, t_degen / 1e6, t_degen / t_plain);
        emit("baseline block", shape, t_plain / 1e6, 1.0);
    }
    std::cout << out.str();
    return 0;
}

struct AblateArgs {
    std::string data;
    std::string alphas = "0,0.5";
    int epochs = 30;
    std::optional<std::uint64_t> seed;
    std::string preset = "desk-small";
    std::string out;
    int batch = 32;
    double lr = 0.05;
    std::optional<int> warmup;
    std::vector<int> decay_epochs;
    bool per_bin = false;
};

int cmd_ablate(const AblateArgs& a) {
    const std::uint64_t seed = resolve_seed(a.seed);
    const std::string out_root = a.out.empty() ? a.data + "/ablation" : a.out;
    std::vector<std::pair<double, double>> results;
    Dataset train = load_split(a.data, "train");
    Dataset val = load_split(a.data, "val");
    for (double alpha : parse_alphas(a.alphas)) {
        TrainConfig cfg;
        cfg.model = preset_model(a.preset);
        cfg.model.seed = seed;
        cfg.model.ddfc.spectral.per_bin = a.per_bin;
        cfg.model.set_alpha(alpha);
        cfg.epochs = a.epochs;
        cfg.batch = a.batch;
        cfg.lr = a.lr;
        if (a.warmup) cfg.warmup = *a.warmup;
        if (!a.decay_epochs.empty()) cfg.decay_epochs = a.decay_epochs;
        cfg.validate();
        const std::string dir = out_root + "/alpha_" + trim_double(alpha);
        std::cerr << "[alpha " << trim_double(alpha) << "] training " << cfg.epochs
                  << " epochs...\n";
        TrainResult r = train_model(cfg, train, val, dir);
        const double acc = eval_checkpoint_accuracy(r.checkpoint_path, a.data, "test", 64);
        std::cerr << "[alpha " << trim_double(alpha) << "] test accuracy " << acc << "\n";
        results.emplace_back(alpha, acc);
    }
    std::cout << "alpha,accuracy\n";
    for (auto [alpha, acc] : results) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s,%.9g\n", trim_double(alpha).c_str(), acc);
        std::cout << buf;
    }
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"dual-domain spectral image classifier toolkit"};
    app.require_subcommand(1);
    int code = 0;

    GenerateArgs gen;
    CLI::App* g = app.add_subcommand("generate", "synthesize a labeled spectral-artifact dataset");
    g->add_option("--n", gen.n, "images per class")->required();
    g->add_option("--mode", gen.mode, "grid | radial-peaks | checkerboard-upsample");
    g->add_option("--freq", gen.freq, "artifact radial frequency bin");
    g->add_option("--amp", gen.amp, "artifact spatial amplitude");
    g->add_option("--seed", gen.seed, "generator seed (default $SPECX_SEED or 0)");
    g->add_option("--out", gen.out, "output directory")->required();
    g->add_option("--height", gen.height, "image height");
    g->add_option("--width", gen.width, "image width");
    g->add_option("--phase-jitter", gen.phase_jitter, "artifact phase randomization in [0,1]");
    g->add_option("--noise", gen.noise, "additive pixel noise sigma");
    g->add_option("--contrast-lo", gen.contrast_lo, "contrast jitter lower bound");
    g->add_option("--contrast-hi", gen.contrast_hi, "contrast jitter upper bound");
    g->callback([&] { code = cmd_generate(gen); });

    TrainArgs tr;
    CLI::App* t = app.add_subcommand("train", "train a classifier from a config file");
    t->add_option("--config", tr.config, "key = value config file")->required();
    t->add_option("--data", tr.data, "dataset directory (with manifest.csv)")->required();
    t->add_option("--out", tr.out, "output directory for checkpoint + metrics")->required();
    t->add_option("--epochs", tr.epochs, "override epoch count");
    t->add_option("--seed", tr.seed, "override seed");
    t->add_option("--alpha", tr.alpha, "override split ratio for every block");
    t->callback([&] { code = cmd_train(tr); });

    EvalArgs ev;
    CLI::App* e = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
    e->add_option("--data", ev.data, "dataset directory")->required();
    e->add_option("--split", ev.split, "train | val | test");
    e->add_option("--batch", ev.batch, "evaluation batch size");
    e->callback([&] { code = cmd_eval(ev); });

    GradcheckArgs gc;
    CLI::App* gch = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gch->add_option("--module", gc.module, "all | ddfc | dfa | backbone");
    gch->add_option("--seed", gc.seed, "check seed (default $SPECX_SEED or 0)");
    gch->callback([&] { code = cmd_gradcheck(gc); });

    FlopsArgs fl;
    CLI::App* f = app.add_subcommand("flops", "closed-form parameter and FLOP accounting");
    f->set_help_flag("--help", "print help");  // frees -h/--h for the height option
    f->add_option("--c1", fl.c1, "input channels");
    f->add_option("--c2", fl.c2, "output channels");
    f->add_option("--h", fl.h, "feature height");
    f->add_option("--w", fl.w, "feature width");
    f->add_option("--k", fl.k, "spatial kernel size");
    f->add_option("--alpha", fl.alpha, "split ratio");
    f->add_option("--format", fl.format, "text | csv");
    f->callback([&] { code = cmd_flops(fl); });

    SpectrumArgs sp;
    CLI::App* s = app.add_subcommand("spectrum", "write an image's log-magnitude spectrum");
    s->add_option("--input", sp.input, "input PGM/PPM")->required();
    s->add_option("--out", sp.out, "output PGM")->required();
    s->callback([&] { code = cmd_spectrum(sp); });

    BenchArgs be;
    CLI::App* b = app.add_subcommand("bench", "micro-benchmark block forward passes");
    b->add_option("--preset", be.preset, "desk | desk-small | xception-full");
    b->add_option("--repeats", be.repeats, "timed repetitions per row");
    b->add_option("--format", be.format, "text | csv");
    b->callback([&] { code = cmd_bench(be); });

    AblateArgs ab;
    CLI::App* al = app.add_subcommand("ablate-alpha", "train per split ratio and compare accuracy");
    al->add_option("--data", ab.data, "dataset directory")->required();
    al->add_option("--alphas", ab.alphas, "comma-separated ratios, e.g. 0,0.25,0.5");
    al->add_option("--epochs", ab.epochs, "epochs per run");
    al->add_option("--seed", ab.seed, "run seed (default $SPECX_SEED or 0)");
    al->add_option("--preset", ab.preset, "model preset");
    al->add_option("--out", ab.out, "output root (default DATA/ablation)");
    al->add_option("--batch", ab.batch, "batch size");
    al->add_option("--lr", ab.lr, "base learning rate");
    al->add_option("--warmup", ab.warmup, "warmup epochs");
    al->add_option("--decay-epochs", ab.decay_epochs, "lr step-decay epochs")->delimiter(',');
    al->add_flag("--per-bin", ab.per_bin, "bin-resolved spectral modulation weights");
    al->callback([&] { code = cmd_ablate(ab); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return code;
}

}  // namespace specx::cli
