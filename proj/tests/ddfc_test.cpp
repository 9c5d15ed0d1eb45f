#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "specx/complexity.hpp"
#include "specx/ddfc.hpp"
#include "specx/gradcheck_targets.hpp"
#include "specx/rng.hpp"

using namespace specx;

namespace {

Tensor rand_tensor(const std::vector<std::size_t>& shape, std::uint64_t seed, double lo = -1.0,
                   double hi = 1.0) {
    Tensor t(shape);
    Rng rng(seed);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_SUITE("ddfc") {
    TEST_CASE("channel split arithmetic") {
        CHECK(global_channels(64, 0.5) == 32);
        CHECK(local_channels(64, 0.5) == 32);
        CHECK(global_channels(64, 0.0) == 0);
        CHECK(local_channels(64, 0.0) == 64);
        CHECK(global_channels(64, 1.0) == 64);
        // floor(0.75*10)=7 global, remainder local
        CHECK(global_channels(10, 0.75) == 7);
        CHECK(local_channels(10, 0.75) == 3);
    }

    TEST_CASE("split then merge restores the input") {
        for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            for (std::size_t c : {std::size_t{1}, std::size_t{7}, std::size_t{10}}) {
                Tensor x = rand_tensor({2, c, 3, 3}, 100 + c);
                auto [lo, go] = split_channels(x, alpha);
                CHECK(lo.dim(1) + go.dim(1) == c);
                CHECK(lo.dim(1) == static_cast<std::size_t>(local_channels(static_cast<int>(c), alpha)));
                Tensor back = merge_channels(lo, go);
                CHECK(back.data == x.data);
            }
        }
    }

    TEST_CASE("alpha=0 local output equals a hand-composed conv-bn-relu chain") {
        Rng rng(5);
        Ddfc ddfc(6, 8, 0.0, {}, rng);
        Tensor x = rand_tensor({2, 6, 5, 5}, 6, 0.0, 1.0);

        Tape t(false);
        Ddfc::Out out = ddfc.forward(t, t.input(x), true, false);
        CHECK(out.local.valid());
        CHECK(!out.global.valid());

        BnParams bn;  // same affine params, fresh statistics path
        bn.gamma = ddfc.bn_l.gamma;
        bn.beta = ddfc.bn_l.beta;
        bn.running_mean = ddfc.bn_l.running_mean;
        bn.running_var = ddfc.bn_l.running_var;
        Tensor want = relu(batch_norm(conv2d(x, ddfc.ll.weight, {}, 1, 1, 1), bn, true, false));
        CHECK(t.val(out.local).data == want.data);
    }

    TEST_CASE("zero input with fresh parameters yields zero local output") {
        Rng rng(7);
        Ddfc ddfc(4, 4, 0.0, {}, rng);
        Tensor x = Tensor::zeros({1, 4, 4, 4});
        Tape t(false);
        Ddfc::Out out = ddfc.forward(t, t.input(x), true, false);
        for (double v : t.val(out.local).data) CHECK(v == 0.0);
    }

    TEST_CASE("spectral transform inner stages invert") {
        // identity modulation + no residual leaves only pre -> fft -> ifft -> post,
        // which must match the same chain without the transforms to 1e-9
        Rng rng(8);
        SpectralTransform st(4, 4, {}, rng);
        Tensor x = rand_tensor({2, 4, 8, 8}, 9, 0.0, 1.0);
        SpectralHooks hooks;
        hooks.identity_modulation = true;
        hooks.skip_residual = true;

        Tape t(false);
        Var y = st.forward(t, t.input(x), true, false, &hooks);

        BnParams bn;
        bn.gamma = st.pre_bn.gamma;
        bn.beta = st.pre_bn.beta;
        bn.running_mean = st.pre_bn.running_mean;
        bn.running_var = st.pre_bn.running_var;
        Tensor mid = relu(batch_norm(conv2d(x, st.pre.weight, {}, 1, 0, 1), bn, true, false));
        Tensor want = conv2d(mid, st.post.weight, {}, 1, 0, 1);
        const Tensor& got = t.val(y);
        REQUIRE(got.same_shape(want));
        for (std::size_t i = 0; i < got.numel(); ++i)
            CHECK(std::abs(got.data[i] - want.data[i]) < 1e-9);
    }

    TEST_CASE("constant input stays spatially constant per channel") {
        Rng rng(10);
        SpectralTransform st(3, 6, {}, rng);
        Tensor x = Tensor::full({1, 3, 8, 8}, 0.6);
        Tape t(false);
        // eval mode: fresh running stats keep zero spectrum bins at zero
        Var y = st.forward(t, t.input(x), false, false);
        const Tensor& out = t.val(y);
        CHECK(out.dim(1) == 6);
        bool any_nonzero = false;
        for (std::size_t c = 0; c < 6; ++c) {
            double lo = 1e300, hi = -1e300;
            for (std::size_t h = 0; h < 8; ++h)
                for (std::size_t w = 0; w < 8; ++w) {
                    const double v = out.data[out.idx4(0, c, h, w)];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            CHECK(hi - lo < 1e-9);
            any_nonzero = any_nonzero || std::abs(hi) > 1e-12;
        }
        CHECK(any_nonzero);
    }

    TEST_CASE("spectral transform output dims and stride recovery") {
        Rng rng(11);
        SpectralOptions opt;
        opt.stride = 2;
        SpectralTransform st(4, 6, opt, rng);
        Tensor x = rand_tensor({1, 4, 8, 8}, 12, 0.0, 1.0);
        Tape t(false);
        Var y = st.forward(t, t.input(x), true, false);
        CHECK(t.val(y).shape == std::vector<std::size_t>{1, 6, 8, 8});
    }

    TEST_CASE("per-bin modulation") {
        Rng rng(13);
        SpectralOptions opt;
        opt.per_bin = true;
        opt.per_bin_h = 8;
        opt.per_bin_w = 8;
        SpectralTransform st(4, 4, opt, rng);
        Tensor x = rand_tensor({1, 4, 8, 8}, 14, 0.0, 1.0);
        Tape t(false);
        CHECK(t.val(st.forward(t, t.input(x), true, false)).shape ==
              std::vector<std::size_t>{1, 4, 8, 8});
        // a mis-sized spectrum is rejected
        Tensor bad = rand_tensor({1, 4, 6, 6}, 15, 0.0, 1.0);
        Tape t2(false);
        CHECK_THROWS_AS(st.forward(t2, t2.input(bad), true, false), std::invalid_argument);
    }

    TEST_CASE("per-bin modulation gradients") {
        Rng rng(26);
        SpectralOptions opt;
        opt.per_bin = true;
        opt.per_bin_h = 6;
        opt.per_bin_w = 6;
        SpectralTransform st(4, 4, opt, rng);
        Tensor x = rand_tensor({2, 4, 6, 6}, 27, 0.0, 1.0);
        ParamList params;
        st.collect("spec", params);
        ParamList trainable;
        for (const ParamRef& p : params)
            if (is_trainable(p.kind)) trainable.push_back(p);
        Tensor probe = rand_tensor({2, 4, 6, 6}, 28);
        auto eval = [&](bool with_grad) {
            Tape t(with_grad);
            Var y = st.forward(t, t.input(x), true, false);
            Var loss = t.sum(t.mul(y, t.input(probe)));
            if (with_grad) t.backward(loss);
            return t.val(loss).data[0];
        };
        GradcheckReport r = gradcheck(eval, trainable, 29);
        CHECK(r.pass);
    }

    TEST_CASE("spectral transform gradients") {
        Rng rng(16);
        SpectralTransform st(4, 4, {}, rng);
        Tensor x = rand_tensor({1, 4, 8, 8}, 17, 0.0, 1.0);
        ParamList params;
        st.collect("spec", params);
        ParamList trainable;
        for (const ParamRef& p : params)
            if (is_trainable(p.kind)) trainable.push_back(p);
        Tensor probe = rand_tensor({1, 4, 8, 8}, 18);
        auto eval = [&](bool with_grad) {
            Tape t(with_grad);
            Var y = st.forward(t, t.input(x), true, false);
            Var loss = t.sum(t.mul(y, t.input(probe)));
            if (with_grad) t.backward(loss);
            return t.val(loss).data[0];
        };
        GradcheckReport r = gradcheck(eval, trainable, 19);
        CHECK(r.pass);
    }

    TEST_CASE("four-path weight count matches the analytic accounting") {
        Rng rng(20);
        Ddfc ddfc(32, 32, 0.5, {}, rng);
        ComplexityReport rep = analytic_complexity(32, 32, 8, 8, 3, 0.5);
        CHECK(static_cast<double>(ddfc.weight_count()) == rep.ddfc_params());
    }

    TEST_CASE("unfeedable global output is rejected") {
        Rng rng(21);
        DdfcOptions opt;
        opt.cross_paths = false;
        // alpha=0.1 on 4 input channels: no global input; 16 outputs: 1 global
        CHECK_THROWS_AS(Ddfc(4, 16, 0.1, opt, rng), std::invalid_argument);
        // cross paths make it constructible (local->global feeds it)
        DdfcOptions with_cross;
        CHECK_NOTHROW(Ddfc(4, 16, 0.1, with_cross, rng));
    }

    TEST_CASE("configuration validation") {
        Rng rng(22);
        DdfcOptions even_kernel;
        even_kernel.kernel = 2;
        CHECK_THROWS_AS(Ddfc(4, 4, 0.5, even_kernel, rng), std::invalid_argument);
        CHECK_THROWS_AS(Ddfc(4, 4, -0.1, {}, rng), std::invalid_argument);
        CHECK_THROWS_AS(Ddfc(4, 4, 1.5, {}, rng), std::invalid_argument);
    }

    TEST_CASE("module gradient target") {
        std::vector<NamedGradcheck> reports = run_gradcheck_targets("ddfc", 4);
        REQUIRE(reports.size() == 1);
        CHECK(reports[0].report.pass);
        CHECK(reports[0].report.max_rel_error < 1e-4);
    }
}
