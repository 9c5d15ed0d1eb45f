#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "specx/config.hpp"

using namespace specx;

namespace {

bool mentions(const std::exception& e, const std::string& needle) {
    return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("key value parser") {
        const std::string text =
            "# top comment\n"
            "\n"
            "a = 1\n"
            "  b=  two words  # trailing comment\n"
            "c =\n";
        auto kv = parse_kv(text, "demo.cfg");
        REQUIRE(kv.size() == 3);
        CHECK(kv[0] == std::pair<std::string, std::string>{"a", "1"});
        CHECK(kv[1] == std::pair<std::string, std::string>{"b", "two words"});
        CHECK(kv[2] == std::pair<std::string, std::string>{"c", ""});

        SUBCASE("errors carry the source and line") {
            try {
                parse_kv("ok = 1\nnot a pair\n", "demo.cfg");
                FAIL("expected throw");
            } catch (const std::invalid_argument& e) {
                CHECK(mentions(e, "demo.cfg"));
                CHECK(mentions(e, "line 2"));
            }
            CHECK_THROWS_AS(parse_kv(" = 5\n", "x"), std::invalid_argument);
        }
    }

    TEST_CASE("defaults and key application") {
        TrainConfig cfg = parse_train_config("", "empty");
        CHECK(cfg.epochs == 30);
        CHECK(cfg.batch == 32);
        CHECK(cfg.optimizer == "sgd");
        CHECK(cfg.model.stem_channels == 8);  // desk-small

        cfg = parse_train_config(
            "epochs = 10\n"
            "batch = 4\n"
            "lr = 0.25\n"
            "optimizer = adam\n"
            "alpha = 0.75\n"
            "decay_epochs = 3, 7\n",
            "t");
        CHECK(cfg.epochs == 10);
        CHECK(cfg.batch == 4);
        CHECK(cfg.lr == 0.25);
        CHECK(cfg.optimizer == "adam");
        CHECK(cfg.decay_epochs == std::vector<int>{3, 7});
        for (const BlockConfig& b : cfg.model.blocks) CHECK(b.alpha == 0.75);
    }

    TEST_CASE("preset resets the model but keeps the seed") {
        TrainConfig cfg = parse_train_config("seed = 9\npreset = desk\n", "t");
        CHECK(cfg.model.stem_channels == 16);
        CHECK(cfg.model.seed == 9);
        // later keys override the preset
        cfg = parse_train_config("preset = desk\nstem = 16\ninput_h = 64\n", "t");
        CHECK(cfg.model.in_h == 64);
    }

    TEST_CASE("explicit block list") {
        TrainConfig cfg = parse_train_config(
            "stem = 8\nblocks = 8:16:3:2:0.5, 16:32:5:2:0.25\n", "t");
        REQUIRE(cfg.model.blocks.size() == 2);
        CHECK(cfg.model.blocks[0].c_in == 8);
        CHECK(cfg.model.blocks[0].c_out == 16);
        CHECK(cfg.model.blocks[1].kernel == 5);
        CHECK(cfg.model.blocks[1].alpha == 0.25);
        CHECK_THROWS_AS(parse_train_config("blocks = 8:16:3:2\n", "t"), std::invalid_argument);
    }

    TEST_CASE("bad inputs are named") {
        try {
            parse_train_config("wat = 1\n", "my.cfg");
            FAIL("expected throw");
        } catch (const std::invalid_argument& e) {
            CHECK(mentions(e, "my.cfg"));
            CHECK(mentions(e, "wat"));
        }
        try {
            parse_train_config("lr = fast\n", "t");
            FAIL("expected throw");
        } catch (const std::invalid_argument& e) {
            CHECK(mentions(e, "lr"));
        }
        CHECK_THROWS_AS(parse_train_config("alpha = 1.5\n", "t"), std::invalid_argument);
        CHECK_THROWS_AS(parse_train_config("epochs = 0\n", "t"), std::invalid_argument);
        CHECK_THROWS_AS(parse_train_config("batch = -1\n", "t"), std::invalid_argument);
        CHECK_THROWS_AS(parse_train_config("optimizer = rmsprop\n", "t"), std::invalid_argument);
        CHECK_THROWS_AS(parse_train_config("momentum = 2\n", "t"), std::invalid_argument);
        CHECK_THROWS_AS(parse_train_config("weight_decay = -0.1\n", "t"),
                        std::invalid_argument);
    }

    TEST_CASE("schedule resolution") {
        TrainConfig cfg = parse_train_config("epochs = 12\nwarmup = 2\n", "t");
        CHECK(cfg.schedule().horizon == 12);  // horizon 0 falls back to epochs
        cfg = parse_train_config("epochs = 12\nhorizon = 40\n", "t");
        CHECK(cfg.schedule().horizon == 40);
        CHECK(cfg.schedule().base_lr == cfg.lr);
    }

    TEST_CASE("serialize and parse reach a fixed point") {
        TrainConfig cfg = parse_train_config(
            "preset = desk\nalpha = 0.375\nepochs = 7\nlr = 0.012\nseed = 42\n"
            "decay_epochs = \n",
            "t");
        const std::string s1 = serialize_train_config(cfg);
        TrainConfig back = parse_train_config(s1, "round");
        const std::string s2 = serialize_train_config(back);
        CHECK(s1 == s2);
        CHECK(back.epochs == 7);
        CHECK(back.lr == 0.012);
        CHECK(back.model.seed == 42);
        CHECK(back.decay_epochs.empty());
        REQUIRE(back.model.blocks.size() == cfg.model.blocks.size());
        for (std::size_t i = 0; i < back.model.blocks.size(); ++i)
            CHECK(back.model.blocks[i].alpha == cfg.model.blocks[i].alpha);
    }

    TEST_CASE("per-bin modulation key") {
        CHECK_FALSE(parse_train_config("", "t").model.ddfc.spectral.per_bin);
        TrainConfig cfg = parse_train_config("per_bin = true\n", "t");
        CHECK(cfg.model.ddfc.spectral.per_bin);
        CHECK(parse_train_config("per_bin = 1\n", "t").model.ddfc.spectral.per_bin);
        CHECK_FALSE(parse_train_config("per_bin = 0\n", "t").model.ddfc.spectral.per_bin);
        const std::string s = serialize_train_config(cfg);
        CHECK(s.find("per_bin = true") != std::string::npos);
        CHECK(parse_train_config(s, "round").model.ddfc.spectral.per_bin);
        CHECK_THROWS_AS(parse_train_config("per_bin = maybe\n", "t"), std::invalid_argument);
    }

    TEST_CASE("config files load from disk") {
        const std::string path = "/tmp/specx_cfg_test.cfg";
        {
            std::ofstream out(path);
            out << "epochs = 3\nwarmup = 0\nlr = 0.5\n";
        }
        TrainConfig cfg = load_train_config(path);
        CHECK(cfg.epochs == 3);
        CHECK(cfg.lr == 0.5);
        std::remove(path.c_str());
        CHECK_THROWS_AS(load_train_config("/tmp/specx_cfg_missing.cfg"), std::runtime_error);
    }
}
