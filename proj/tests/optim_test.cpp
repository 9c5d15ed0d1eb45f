#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "specx/optim.hpp"

using namespace specx;

TEST_SUITE("optim") {
    TEST_CASE("learning rate schedule matches the closed form") {
        ScheduleSpec spec;
        spec.base_lr = 0.1;
        spec.warmup_epochs = 5;
        spec.horizon = 90;
        spec.decay_epochs = {30, 60, 80};
        spec.decay_factor = 0.1;

        // Independent evaluation: linear ramp over the first five epochs,
        // then a half cosine over the remaining span, scaled by one factor
        // of 0.1 per decay boundary already passed.
        auto cosine = [&](int e) {
            double p = static_cast<double>(e - 5) / 85.0;
            if (p > 1.0) p = 1.0;
            return 0.1 * 0.5 * (1.0 + std::cos(M_PI * p));
        };
        CHECK(lr_at(0, spec) == doctest::Approx(0.1 * 1.0 / 5.0).epsilon(1e-12));
        CHECK(lr_at(4, spec) == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(lr_at(5, spec) == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(lr_at(30, spec) == doctest::Approx(cosine(30) * 0.1).epsilon(1e-12));
        CHECK(lr_at(60, spec) == doctest::Approx(cosine(60) * 0.01).epsilon(1e-12));
        CHECK(lr_at(80, spec) == doctest::Approx(cosine(80) * 0.001).epsilon(1e-12));
        // warmup is monotone, cosine segment decays between boundaries
        for (int e = 1; e < 5; ++e) CHECK(lr_at(e, spec) > lr_at(e - 1, spec));
        for (int e = 6; e < 30; ++e) CHECK(lr_at(e, spec) < lr_at(e - 1, spec));
        CHECK(lr_at(200, spec) == doctest::Approx(0.0).epsilon(1e-12));

        SUBCASE("validation") {
            ScheduleSpec bad = spec;
            bad.base_lr = 0.0;
            CHECK_THROWS_AS(lr_at(0, bad), std::invalid_argument);
            bad = spec;
            bad.horizon = 5;
            CHECK_THROWS_AS(lr_at(0, bad), std::invalid_argument);
            bad = spec;
            bad.decay_factor = 1.0;
            CHECK_THROWS_AS(lr_at(0, bad), std::invalid_argument);
            CHECK_THROWS_AS(lr_at(-1, spec), std::invalid_argument);
        }
    }

    TEST_CASE("sgd with momentum follows the hand unrolled recurrence") {
        Tensor w({1});
        w.data[0] = 1.0;
        ParamList params = {{"w", &w, ParamKind::linear_weight}};
        SgdMomentum opt(params, 0.9);
        // gradient of f(w) = w^2 / 2 is w itself; velocity update is
        // v <- mu v - lr g, w <- w + v
        const double expected[] = {0.9, 0.72, 0.486};
        for (int s = 0; s < 3; ++s) {
            w.ensure_grad();
            w.grad[0] = w.data[0];
            opt.step(params, 0.1);
            CHECK(w.data[0] == doctest::Approx(expected[s]).epsilon(1e-12));
        }
    }

    TEST_CASE("sgd refuses a parameter without a gradient") {
        Tensor w({2, 2});
        ParamList params = {{"w", &w, ParamKind::conv_weight}};
        SgdMomentum opt(params, 0.9);
        CHECK_THROWS_AS(opt.step(params, 0.1), std::runtime_error);
    }

    TEST_CASE("sgd skips running statistics") {
        Tensor w({2}), stat({2});
        w.data = {1.0, 2.0};
        stat.data = {3.0, 4.0};
        ParamList params = {{"w", &w, ParamKind::linear_weight},
                            {"rm", &stat, ParamKind::bn_stat}};
        SgdMomentum opt(params, 0.0);
        w.ensure_grad();
        w.grad = {1.0, 1.0};
        opt.step(params, 0.5);
        CHECK(w.data == std::vector<double>{0.5, 1.5});
        CHECK(stat.data == std::vector<double>{3.0, 4.0});  // untouched, no grad required
    }

    TEST_CASE("l2 penalty and its gradient") {
        Tensor w({2}), b({2}), g({2});
        w.data = {3.0, 4.0};
        b.data = {10.0, 10.0};
        g.data = {10.0, 10.0};
        ParamList params = {{"w", &w, ParamKind::conv_weight},
                            {"b", &b, ParamKind::bias},
                            {"bn.g", &g, ParamKind::bn_gamma}};
        CHECK(l2_penalty(params, 0.0) == 0.0);
        // only the weight contributes: 0.01 * (9 + 16)
        CHECK(l2_penalty(params, 0.01) == doctest::Approx(0.25).epsilon(1e-12));
        CHECK_THROWS_AS(l2_penalty(params, -1.0), std::invalid_argument);

        w.ensure_grad();
        b.ensure_grad();
        g.ensure_grad();
        add_l2_gradient(params, 0.01);
        CHECK(w.grad[0] == doctest::Approx(2.0 * 0.01 * 3.0).epsilon(1e-12));
        CHECK(w.grad[1] == doctest::Approx(2.0 * 0.01 * 4.0).epsilon(1e-12));
        CHECK(b.grad == std::vector<double>{0.0, 0.0});  // biases and BN are exempt
        CHECK(g.grad == std::vector<double>{0.0, 0.0});
    }

    TEST_CASE("adam first steps match the bias corrected formula") {
        Tensor w({1});
        w.data[0] = 1.0;
        ParamList params = {{"w", &w, ParamKind::linear_weight}};
        Adam opt(params);
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.01;
        double m = 0.0, v = 0.0, ref = 1.0;
        for (int t = 1; t <= 3; ++t) {
            const double grad = ref;  // d/dw of w^2/2 at the reference point
            w.ensure_grad();
            w.grad[0] = w.data[0];
            opt.step(params, lr);
            m = b1 * m + (1.0 - b1) * grad;
            v = b2 * v + (1.0 - b2) * grad * grad;
            const double mhat = m / (1.0 - std::pow(b1, t));
            const double vhat = v / (1.0 - std::pow(b2, t));
            ref -= lr * mhat / (std::sqrt(vhat) + eps);
            CHECK(w.data[0] == doctest::Approx(ref).epsilon(1e-12));
        }
        // the first step is close to a pure sign update of size lr
        CHECK(std::abs((1.0 - 0.01) - 0.990000005) < 1e-6);
    }

    TEST_CASE("optimizer constructor rejects bad hyperparameters") {
        Tensor w({1});
        ParamList params = {{"w", &w, ParamKind::linear_weight}};
        CHECK_THROWS_AS(SgdMomentum(params, 1.5), std::invalid_argument);
        CHECK_THROWS_AS(Adam(params, 1.0, 0.999, 1e-8), std::invalid_argument);
        CHECK_THROWS_AS(Adam(params, 0.9, 0.999, 0.0), std::invalid_argument);
    }
}
