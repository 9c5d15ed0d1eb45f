#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "specx/checkpoint.hpp"
#include "specx/optim.hpp"
#include "specx/rng.hpp"
#include "specx/train.hpp"

using namespace specx;

namespace {

struct TempDir {
    std::string path;
    explicit TempDir(const std::string& name) : path("/tmp/specx_train_" + name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

ModelConfig tiny_model(std::uint64_t seed) {
    ModelConfig cfg;
    cfg.in_channels = 1;
    cfg.in_h = cfg.in_w = 8;
    cfg.stem_channels = 4;
    cfg.blocks = {{4, 4, 3, 2, 0.5}};
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

Dataset tiny_dataset(std::size_t n, std::uint64_t seed) {
    Dataset ds;
    ds.channels = 1;
    ds.h = ds.w = 8;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor img({1, 8, 8});
        for (double& v : img.data) v = rng.uniform();
        ds.images.push_back(std::move(img));
        ds.labels.push_back(static_cast<int>(i % 2));
    }
    return ds;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("train") {
    TEST_CASE("a single example is memorized in a few hundred steps") {
        SpecXNet model(tiny_model(31));
        ParamList params = model.params();
        SgdMomentum opt(params, 0.9);

        Tensor x({1, 1, 8, 8});
        Rng rng(32);
        for (double& v : x.data) v = rng.uniform();
        const std::vector<int> label = {1};

        // lr 0 must not move any trainable weight
        std::vector<std::vector<double>> before;
        for (const ParamRef& p : params) before.push_back(p.tensor->data);
        {
            Tape tape;
            Var loss = tape.cross_entropy(model.forward(tape, tape.input(x), true, false), label);
            tape.backward(loss);
            opt.step(params, 0.0);
        }
        for (std::size_t i = 0; i < params.size(); ++i)
            if (is_trainable(params[i].kind)) CHECK(params[i].tensor->data == before[i]);

        double loss_val = 1e9;
        int steps = 0;
        Tensor rm_before = model.stem_bn.running_mean;
        for (; steps < 200 && loss_val > 1e-3; ++steps) {
            Tape tape;
            Var loss = tape.cross_entropy(model.forward(tape, tape.input(x), true, true), label);
            loss_val = tape.val(loss).data[0];
            REQUIRE(std::isfinite(loss_val));
            tape.backward(loss);
            opt.step(params, 0.05);
        }
        CHECK(loss_val < 1e-3);
        CHECK(steps < 200);
        CHECK(model.stem_bn.running_mean.data != rm_before.data);  // stats did update
    }

    TEST_CASE("training runs are reproducible byte for byte") {
        TempDir a("runa"), b("runb");
        TrainConfig cfg;
        cfg.model = tiny_model(5);
        cfg.epochs = 2;
        cfg.batch = 4;
        cfg.lr = 0.05;
        cfg.warmup = 1;
        cfg.validate();
        Dataset train = tiny_dataset(8, 6), val = tiny_dataset(4, 7);

        TrainResult ra = train_model(cfg, train, val, a.path);
        TrainResult rb = train_model(cfg, train, val, b.path);
        CHECK(slurp(ra.metrics_path) == slurp(rb.metrics_path));
        CHECK(slurp(ra.checkpoint_path) == slurp(rb.checkpoint_path));
        CHECK(ra.best_epoch == rb.best_epoch);
        CHECK(ra.best_val_accuracy == rb.best_val_accuracy);

        SUBCASE("metrics log shape") {
            std::istringstream log(slurp(ra.metrics_path));
            std::string line;
            REQUIRE(std::getline(log, line));
            CHECK(line == "epoch,split,loss,accuracy,auc,map,lr");
            int rows = 0;
            while (std::getline(log, line)) {
                ++rows;
                const bool train_row = line.find(",train,") != std::string::npos;
                const bool val_row = line.find(",val,") != std::string::npos;
                CHECK((train_row || val_row));
            }
            CHECK(rows == 2 * cfg.epochs);
        }

        SUBCASE("best checkpoint restores into a fresh model") {
            Checkpoint ckpt = read_checkpoint(ra.checkpoint_path);
            TrainConfig meta_cfg = parse_train_config(ckpt.meta, "ckpt meta");
            CHECK(meta_cfg.model.stem_channels == cfg.model.stem_channels);
            SpecXNet fresh(cfg.model);
            CHECK_NOTHROW(load_into(ckpt, fresh.params()));
            EvalResult ev = evaluate_model(fresh, val, 2);
            CHECK(ev.accuracy == ra.best_val_accuracy);
        }
        CHECK(ra.best_epoch >= 0);
        CHECK(ra.best_epoch < cfg.epochs);
        CHECK(ra.best_val_accuracy >= 0.0);
        CHECK(ra.best_val_accuracy <= 1.0);
    }

    TEST_CASE("evaluation is deterministic and batch-size invariant") {
        SpecXNet model(tiny_model(41));
        Dataset ds = tiny_dataset(6, 42);
        EvalResult one = evaluate_model(model, ds, 1);
        EvalResult six = evaluate_model(model, ds, 6);
        EvalResult again = evaluate_model(model, ds, 6);
        CHECK(six.loss == again.loss);
        CHECK(six.accuracy == again.accuracy);
        CHECK(one.loss == doctest::Approx(six.loss).epsilon(1e-9));
        CHECK(one.accuracy == six.accuracy);
        CHECK(one.auc == doctest::Approx(six.auc).epsilon(1e-12));
        CHECK(one.map == doctest::Approx(six.map).epsilon(1e-12));
        CHECK(std::isfinite(six.loss));
        CHECK(six.loss > 0.0);
        CHECK_THROWS_AS(evaluate_model(model, ds, 0), std::invalid_argument);
    }

    TEST_CASE("a non-finite objective aborts with the failing step named") {
        TempDir dir("nan");
        TrainConfig cfg;
        cfg.model = tiny_model(51);
        cfg.epochs = 1;
        cfg.batch = 2;
        cfg.warmup = 0;
        // an overflowing penalty term turns the very first objective infinite
        cfg.weight_decay = 1e308;
        Dataset train = tiny_dataset(4, 52), val = tiny_dataset(2, 53);
        try {
            train_model(cfg, train, val, dir.path);
            FAIL("expected throw");
        } catch (const std::runtime_error& e) {
            const std::string what = e.what();
            CHECK(what.find("non-finite") != std::string::npos);
            CHECK(what.find("epoch 0 step 0") != std::string::npos);
        }
    }

    TEST_CASE("label validation") {
        TempDir dir("labels");
        TrainConfig cfg;
        cfg.model = tiny_model(61);
        cfg.epochs = 1;
        cfg.warmup = 0;
        Dataset train = tiny_dataset(4, 62), val = tiny_dataset(2, 63);
        train.labels[1] = 2;
        CHECK_THROWS_AS(train_model(cfg, train, val, dir.path), std::invalid_argument);
    }
}
