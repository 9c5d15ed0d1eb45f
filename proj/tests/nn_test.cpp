#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "specx/nn.hpp"
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

// Six nested loops straight from the definition of strided, padded, grouped
// cross-correlation.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding,
                   int groups) {
    const std::size_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Cout = w.dim(0), Cg = w.dim(1), K = w.dim(2);
    const std::size_t Ho = (H + 2 * padding - K) / stride + 1;
    const std::size_t Wo = (W + 2 * padding - K) / stride + 1;
    const std::size_t in_per_group = Cin / groups, out_per_group = Cout / groups;
    Tensor y({N, Cout, Ho, Wo});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t co = 0; co < Cout; ++co) {
            const std::size_t g = co / out_per_group;
            for (std::size_t ho = 0; ho < Ho; ++ho)
                for (std::size_t wo = 0; wo < Wo; ++wo) {
                    double acc = b.numel() ? b.data[co] : 0.0;
                    for (std::size_t ci = 0; ci < Cg; ++ci)
                        for (std::size_t kh = 0; kh < K; ++kh)
                            for (std::size_t kw = 0; kw < K; ++kw) {
                                const long long hi = static_cast<long long>(ho * stride + kh) -
                                                     padding;
                                const long long wi = static_cast<long long>(wo * stride + kw) -
                                                     padding;
                                if (hi < 0 || wi < 0 || hi >= static_cast<long long>(H) ||
                                    wi >= static_cast<long long>(W))
                                    continue;
                                acc += x.data[x.idx4(n, g * in_per_group + ci,
                                                     static_cast<std::size_t>(hi),
                                                     static_cast<std::size_t>(wi))] *
                                       w.data[w.idx4(co, ci, kh, kw)];
                            }
                    y.data[y.idx4(n, co, ho, wo)] = acc;
                }
        }
    return y;
}

double max_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

BnParams make_bn(std::size_t c) {
    BnParams p;
    p.gamma = Tensor::full({c}, 1.0);
    p.beta = Tensor::zeros({c});
    p.running_mean = Tensor::zeros({c});
    p.running_var = Tensor::full({c}, 1.0);
    return p;
}

}  // namespace

TEST_SUITE("nn") {
    TEST_CASE("gemm matches triple loop") {
        const std::size_t M = 5, N = 7, K = 4;
        Tensor a = rand_tensor({M, K}, 1), b = rand_tensor({K, N}, 2);
        std::vector<double> c(M * N, 0.5), want(M * N, 0.5);
        gemm_nn(M, N, K, a.data.data(), b.data.data(), c.data(), true);
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t k = 0; k < K; ++k) want[i * N + j] += a.data[i * K + k] * b.data[k * N + j];
        for (std::size_t i = 0; i < M * N; ++i) CHECK(c[i] == doctest::Approx(want[i]).epsilon(1e-12));
        // non-accumulating overwrite
        gemm_nn(M, N, K, a.data.data(), b.data.data(), c.data(), false);
        for (std::size_t i = 0; i < M * N; ++i)
            CHECK(c[i] == doctest::Approx(want[i] - 0.5).epsilon(1e-12));
    }

    TEST_CASE("conv2d overlap counting") {
        Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
        Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
        Tensor y = conv2d(x, w, {}, 1, 1, 1);
        CHECK(y.data[y.idx4(0, 0, 1, 1)] == 9.0);
        CHECK(y.data[y.idx4(0, 0, 0, 0)] == 4.0);
        CHECK(y.data[y.idx4(0, 0, 2, 2)] == 4.0);
        CHECK(y.data[y.idx4(0, 0, 0, 1)] == 6.0);
    }

    TEST_CASE("conv2d identity kernel") {
        Tensor x = rand_tensor({2, 3, 5, 5}, 3);
        Tensor w = Tensor::zeros({3, 3, 1, 1});
        for (std::size_t c = 0; c < 3; ++c) w.data[w.idx4(c, c, 0, 0)] = 1.0;
        Tensor y = conv2d(x, w, {}, 1, 0, 1);
        CHECK(max_diff(x, y) == 0.0);
    }

    TEST_CASE("conv2d matches naive loops") {
        Tensor x = rand_tensor({2, 4, 8, 8}, 11);
        Tensor w = rand_tensor({6, 4, 3, 3}, 12);
        Tensor b = rand_tensor({6}, 13);
        SUBCASE("pad 1 stride 1") {
            CHECK(max_diff(conv2d(x, w, b, 1, 1, 1), conv_oracle(x, w, b, 1, 1, 1)) < 1e-12);
        }
        SUBCASE("pad 0 stride 2") {
            CHECK(max_diff(conv2d(x, w, b, 2, 0, 1), conv_oracle(x, w, b, 2, 0, 1)) < 1e-12);
        }
        SUBCASE("grouped") {
            Tensor wg = rand_tensor({6, 2, 3, 3}, 14);
            CHECK(max_diff(conv2d(x, wg, b, 1, 1, 2), conv_oracle(x, wg, b, 1, 1, 2)) < 1e-12);
        }
        SUBCASE("depthwise") {
            Tensor wd = rand_tensor({4, 1, 3, 3}, 15);
            CHECK(max_diff(conv2d(x, wd, {}, 1, 1, 4), conv_oracle(x, wd, {}, 1, 1, 4)) < 1e-12);
        }
    }

    TEST_CASE("conv2d is linear in its input") {
        Tensor x = rand_tensor({1, 2, 6, 6}, 21), y = rand_tensor({1, 2, 6, 6}, 22);
        Tensor w = rand_tensor({3, 2, 3, 3}, 23);
        const double a = 0.3, b = -1.7;
        Tensor mix({1, 2, 6, 6});
        for (std::size_t i = 0; i < mix.numel(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
        Tensor lhs = conv2d(mix, w, {}, 1, 1, 1);
        Tensor cx = conv2d(x, w, {}, 1, 1, 1), cy = conv2d(y, w, {}, 1, 1, 1);
        for (std::size_t i = 0; i < lhs.numel(); ++i)
            CHECK(std::abs(lhs.data[i] - (a * cx.data[i] + b * cy.data[i])) < 1e-10);
    }

    TEST_CASE("conv2d shape errors") {
        Tensor x = rand_tensor({1, 3, 4, 4}, 31);
        Tensor w = rand_tensor({2, 4, 3, 3}, 32);  // wants 4 input channels
        CHECK_THROWS_AS(conv2d(x, w, {}, 1, 1, 1), std::invalid_argument);
        Tensor w5 = rand_tensor({2, 3, 5, 5}, 33);  // kernel larger than padded input
        CHECK_THROWS_AS(conv2d(x, w5, {}, 1, 0, 1), std::invalid_argument);
    }

    TEST_CASE("batch_norm training normalizes") {
        Tensor x = rand_tensor({4, 3, 5, 5}, 41, 0.0, 10.0);
        BnParams p = make_bn(3);
        Tensor y = batch_norm(x, p, true, false);
        const std::size_t per = 4 * 5 * 5;
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0.0, var = 0.0, invar = 0.0, imean = 0.0;
            for (std::size_t n = 0; n < 4; ++n)
                for (std::size_t h = 0; h < 5; ++h)
                    for (std::size_t w = 0; w < 5; ++w) {
                        mean += y.data[y.idx4(n, c, h, w)];
                        imean += x.data[x.idx4(n, c, h, w)];
                    }
            mean /= per;
            imean /= per;
            for (std::size_t n = 0; n < 4; ++n)
                for (std::size_t h = 0; h < 5; ++h)
                    for (std::size_t w = 0; w < 5; ++w) {
                        var += (y.data[y.idx4(n, c, h, w)] - mean) * (y.data[y.idx4(n, c, h, w)] - mean);
                        invar += (x.data[x.idx4(n, c, h, w)] - imean) * (x.data[x.idx4(n, c, h, w)] - imean);
                    }
            var /= per;
            invar /= per;
            CHECK(std::abs(mean) < 1e-10);
            CHECK(var == doctest::Approx(invar / (invar + p.eps)).epsilon(1e-6));
        }
    }

    TEST_CASE("batch_norm affine transform") {
        // pre-normalized input, gamma=2 beta=3 -> mean 3, std ~ 2
        Tensor x({2, 1, 4, 4});
        Rng rng(43);
        for (double& v : x.data) v = rng.normal();
        double m = 0.0;
        for (double v : x.data) m += v;
        m /= x.numel();
        double s2 = 0.0;
        for (double& v : x.data) {
            v -= m;
            s2 += v * v;
        }
        s2 /= x.numel();
        for (double& v : x.data) v /= std::sqrt(s2);
        BnParams p = make_bn(1);
        p.gamma.data[0] = 2.0;
        p.beta.data[0] = 3.0;
        Tensor y = batch_norm(x, p, true, false);
        double ym = 0.0;
        for (double v : y.data) ym += v;
        ym /= y.numel();
        double ys = 0.0;
        for (double v : y.data) ys += (v - ym) * (v - ym);
        ys = std::sqrt(ys / y.numel());
        CHECK(ym == doctest::Approx(3.0).epsilon(1e-10));
        CHECK(ys == doctest::Approx(2.0).epsilon(1e-4));
    }

    TEST_CASE("batch_norm matches two-pass statistics") {
        Tensor x = rand_tensor({3, 2, 4, 6}, 44, -2.0, 5.0);
        BnParams p = make_bn(2);
        p.gamma.data[0] = 1.3;
        p.gamma.data[1] = -0.2;
        p.beta.data[0] = 0.4;
        p.beta.data[1] = 2.0;
        Tensor y = batch_norm(x, p, true, false);
        const std::size_t per = 3 * 4 * 6;
        for (std::size_t c = 0; c < 2; ++c) {
            double mu = 0.0;
            for (std::size_t n = 0; n < 3; ++n)
                for (std::size_t h = 0; h < 4; ++h)
                    for (std::size_t w = 0; w < 6; ++w) mu += x.data[x.idx4(n, c, h, w)];
            mu /= per;
            double var = 0.0;
            for (std::size_t n = 0; n < 3; ++n)
                for (std::size_t h = 0; h < 4; ++h)
                    for (std::size_t w = 0; w < 6; ++w)
                        var += (x.data[x.idx4(n, c, h, w)] - mu) * (x.data[x.idx4(n, c, h, w)] - mu);
            var /= per;
            for (std::size_t n = 0; n < 3; ++n)
                for (std::size_t h = 0; h < 4; ++h)
                    for (std::size_t w = 0; w < 6; ++w) {
                        const double want = p.gamma.data[c] *
                                                (x.data[x.idx4(n, c, h, w)] - mu) /
                                                std::sqrt(var + p.eps) +
                                            p.beta.data[c];
                        CHECK(std::abs(y.data[y.idx4(n, c, h, w)] - want) < 1e-12);
                    }
        }
    }

    TEST_CASE("batch_norm eval uses running stats") {
        Tensor x = rand_tensor({2, 2, 3, 3}, 45);
        BnParams p = make_bn(2);
        p.running_mean.data[0] = 0.5;
        p.running_mean.data[1] = -1.0;
        p.running_var.data[0] = 4.0;
        p.running_var.data[1] = 0.25;
        Tensor y = batch_norm(x, p, false, false);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            const std::size_t c = (i / 9) % 2;
            const double want = (x.data[i] - p.running_mean.data[c]) /
                                std::sqrt(p.running_var.data[c] + p.eps);
            CHECK(std::abs(y.data[i] - want) < 1e-12);
        }
    }

    TEST_CASE("batch_norm running update blends with momentum") {
        Tensor x = rand_tensor({2, 1, 2, 2}, 46, 1.0, 3.0);
        BnParams p = make_bn(1);
        p.running_mean.data[0] = 10.0;
        p.running_var.data[0] = 7.0;
        double mu = 0.0;
        for (double v : x.data) mu += v;
        mu /= x.numel();
        double var = 0.0;
        for (double v : x.data) var += (v - mu) * (v - mu);
        var /= x.numel();
        batch_norm(x, p, true, true);
        CHECK(p.running_mean.data[0] == doctest::Approx(0.9 * 10.0 + 0.1 * mu).epsilon(1e-12));
        CHECK(p.running_var.data[0] == doctest::Approx(0.9 * 7.0 + 0.1 * var).epsilon(1e-12));
        // update_running=false leaves them alone
        BnParams q = make_bn(1);
        q.running_mean.data[0] = 10.0;
        batch_norm(x, q, true, false);
        CHECK(q.running_mean.data[0] == 10.0);
    }

    TEST_CASE("activations") {
        Tensor x({5});
        x.data = {-2.0, -0.5, 0.0, 0.5, 2.0};
        Tensor r = relu(x);
        CHECK(r.data[0] == 0.0);
        CHECK(r.data[1] == 0.0);
        CHECK(r.data[2] == 0.0);
        CHECK(r.data[3] == 0.5);
        CHECK(r.data[4] == 2.0);
        Tensor s = sigmoid(x);
        CHECK(s.data[2] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(s.data[0] == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-12));
        CHECK(s.data[4] + s.data[0] == doctest::Approx(1.0).epsilon(1e-12));
        // stable on extreme inputs
        Tensor big({2});
        big.data = {800.0, -800.0};
        Tensor sb = sigmoid(big);
        CHECK(sb.data[0] == doctest::Approx(1.0));
        CHECK(sb.data[1] == doctest::Approx(0.0));
        CHECK(std::isfinite(sb.data[1]));
    }

    TEST_CASE("softmax") {
        Tensor x({2, 2});
        x.data = {3.7, 3.7, -1.0, 2.0};
        Tensor y = softmax(x, 1);
        CHECK(y.data[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(y.data[1] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(y.data[2] + y.data[3] == doctest::Approx(1.0).epsilon(1e-12));
        // shift invariance along the axis
        Tensor xs({2, 2});
        for (std::size_t i = 0; i < 4; ++i) xs.data[i] = x.data[i] + 123.456;
        Tensor ys = softmax(xs, 1);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(ys.data[i] - y.data[i]) < 1e-10);
    }

    TEST_CASE("max_pool2d") {
        SUBCASE("tiny window") {
            Tensor x({1, 1, 2, 2});
            x.data = {1.0, 2.0, 3.0, 4.0};
            Tensor y = max_pool2d(x, 2, 2);
            CHECK(y.numel() == 1);
            CHECK(y.data[0] == 4.0);
        }
        SUBCASE("constant input") {
            Tensor x = Tensor::full({1, 2, 4, 4}, 0.3);
            Tensor y = max_pool2d(x, 2, 2);
            for (double v : y.data) CHECK(v == 0.3);
        }
        SUBCASE("matches naive loops") {
            Tensor x = rand_tensor({2, 3, 6, 8}, 51);
            PoolSaved saved;
            Tensor y = max_pool2d(x, 2, 2, &saved);
            CHECK(y.dim(2) == 3);
            CHECK(y.dim(3) == 4);
            std::size_t oi = 0;
            for (std::size_t n = 0; n < 2; ++n)
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t ho = 0; ho < 3; ++ho)
                        for (std::size_t wo = 0; wo < 4; ++wo, ++oi) {
                            double best = -1e300;
                            for (std::size_t dh = 0; dh < 2; ++dh)
                                for (std::size_t dw = 0; dw < 2; ++dw)
                                    best = std::max(best,
                                                    x.data[x.idx4(n, c, 2 * ho + dh, 2 * wo + dw)]);
                            CHECK(y.data[oi] == best);
                            const std::size_t src = saved.argmax[oi];
                            CHECK(x.data[x.idx4(n, c, src / 8, src % 8)] == best);
                        }
        }
        SUBCASE("tie goes to the first in scan order") {
            Tensor x = Tensor::full({1, 1, 2, 2}, 5.0);
            PoolSaved saved;
            max_pool2d(x, 2, 2, &saved);
            CHECK(saved.argmax[0] == 0);
        }
        SUBCASE("oversized window fails") {
            Tensor x({1, 1, 2, 2});
            CHECK_THROWS_AS(max_pool2d(x, 3, 3), std::invalid_argument);
        }
    }

    TEST_CASE("adaptive_avg_pool2d") {
        SUBCASE("1x1 is the global mean") {
            Tensor x = rand_tensor({2, 3, 5, 7}, 61);
            Tensor y = adaptive_avg_pool2d(x, 1, 1);
            for (std::size_t n = 0; n < 2; ++n)
                for (std::size_t c = 0; c < 3; ++c) {
                    double mean = 0.0;
                    for (std::size_t h = 0; h < 5; ++h)
                        for (std::size_t w = 0; w < 7; ++w) mean += x.data[x.idx4(n, c, h, w)];
                    mean /= 35.0;
                    CHECK(std::abs(y.data[y.idx4(n, c, 0, 0)] - mean) < 1e-12);
                }
        }
        SUBCASE("identity size") {
            Tensor x = rand_tensor({1, 2, 4, 4}, 62);
            CHECK(max_diff(adaptive_avg_pool2d(x, 4, 4), x) == 0.0);
        }
        SUBCASE("4x4 to 2x2 quadrant means") {
            Tensor x({1, 1, 4, 4});
            for (std::size_t i = 0; i < 16; ++i) x.data[i] = static_cast<double>(i);
            Tensor y = adaptive_avg_pool2d(x, 2, 2);
            CHECK(y.data[0] == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
            CHECK(y.data[1] == doctest::Approx((2 + 3 + 6 + 7) / 4.0));
            CHECK(y.data[2] == doctest::Approx((8 + 9 + 12 + 13) / 4.0));
            CHECK(y.data[3] == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
        }
        SUBCASE("uneven regions follow the floor/ceil window rule") {
            Tensor x = rand_tensor({1, 1, 5, 5}, 63);
            Tensor y = adaptive_avg_pool2d(x, 2, 2);
            auto cell = [&](std::size_t i, std::size_t j) {
                const std::size_t h0 = i * 5 / 2, h1 = ((i + 1) * 5 + 1) / 2;
                const std::size_t w0 = j * 5 / 2, w1 = ((j + 1) * 5 + 1) / 2;
                double acc = 0.0;
                for (std::size_t h = h0; h < h1; ++h)
                    for (std::size_t w = w0; w < w1; ++w) acc += x.data[x.idx4(0, 0, h, w)];
                return acc / static_cast<double>((h1 - h0) * (w1 - w0));
            };
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j)
                    CHECK(std::abs(y.data[y.idx4(0, 0, i, j)] - cell(i, j)) < 1e-12);
        }
    }

    TEST_CASE("bilinear_resize") {
        SUBCASE("constant stays constant") {
            Tensor x = Tensor::full({1, 2, 3, 3}, 0.8);
            Tensor y = bilinear_resize(x, 7, 5);
            for (double v : y.data) CHECK(v == doctest::Approx(0.8).epsilon(1e-12));
        }
        SUBCASE("identity size") {
            Tensor x = rand_tensor({1, 1, 4, 6}, 71);
            CHECK(max_diff(bilinear_resize(x, 4, 6), x) < 1e-15);
        }
        SUBCASE("2x2 to 4x4 half-pixel values") {
            Tensor x({1, 1, 2, 2});
            x.data = {0.0, 1.0, 1.0, 2.0};
            Tensor y = bilinear_resize(x, 4, 4);
            const double want[4][4] = {{0.0, 0.25, 0.75, 1.0},
                                       {0.25, 0.5, 1.0, 1.25},
                                       {0.75, 1.0, 1.5, 1.75},
                                       {1.0, 1.25, 1.75, 2.0}};
            for (std::size_t h = 0; h < 4; ++h)
                for (std::size_t w = 0; w < 4; ++w)
                    CHECK(y.data[y.idx4(0, 0, h, w)] == doctest::Approx(want[h][w]).epsilon(1e-12));
        }
    }

    TEST_CASE("center_crop") {
        SUBCASE("same size is identity") {
            Tensor x = rand_tensor({1, 2, 3, 3}, 81);
            CHECK(max_diff(center_crop(x, 3, 3), x) == 0.0);
        }
        SUBCASE("4x4 to 2x2 keeps rows and cols 1..2") {
            Tensor x({1, 1, 4, 4});
            for (std::size_t i = 0; i < 16; ++i) x.data[i] = static_cast<double>(i);
            Tensor y = center_crop(x, 2, 2);
            CHECK(y.data[0] == 5.0);
            CHECK(y.data[1] == 6.0);
            CHECK(y.data[2] == 9.0);
            CHECK(y.data[3] == 10.0);
        }
        SUBCASE("odd sizes use floor offsets") {
            Tensor x({1, 1, 5, 5});
            for (std::size_t i = 0; i < 25; ++i) x.data[i] = static_cast<double>(i);
            Tensor y = center_crop(x, 2, 2);  // offset floor(3/2)=1
            CHECK(y.data[0] == 6.0);
            CHECK(y.data[1] == 7.0);
            CHECK(y.data[2] == 11.0);
            CHECK(y.data[3] == 12.0);
        }
        SUBCASE("oversized crop fails") {
            Tensor x({1, 1, 2, 2});
            CHECK_THROWS_AS(center_crop(x, 3, 3), std::invalid_argument);
        }
    }

    TEST_CASE("linear") {
        SUBCASE("identity weight") {
            Tensor x = rand_tensor({3, 4}, 91);
            Tensor w = Tensor::zeros({4, 4});
            for (std::size_t i = 0; i < 4; ++i) w.data[w.idx2(i, i)] = 1.0;
            CHECK(max_diff(linear(x, w, {}), x) == 0.0);
        }
        SUBCASE("zero weight broadcasts the bias") {
            Tensor x = rand_tensor({3, 4}, 92);
            Tensor w = Tensor::zeros({2, 4});
            Tensor b({2});
            b.data = {5.0, -1.0};
            Tensor y = linear(x, w, b);
            for (std::size_t n = 0; n < 3; ++n) {
                CHECK(y.data[y.idx2(n, 0)] == 5.0);
                CHECK(y.data[y.idx2(n, 1)] == -1.0);
            }
        }
        SUBCASE("matches triple-loop matmul") {
            Tensor x = rand_tensor({4, 6}, 93);
            Tensor w = rand_tensor({3, 6}, 94);
            Tensor b = rand_tensor({3}, 95);
            Tensor y = linear(x, w, b);
            for (std::size_t n = 0; n < 4; ++n)
                for (std::size_t o = 0; o < 3; ++o) {
                    double acc = b.data[o];
                    for (std::size_t i = 0; i < 6; ++i)
                        acc += x.data[x.idx2(n, i)] * w.data[w.idx2(o, i)];
                    CHECK(std::abs(y.data[y.idx2(n, o)] - acc) < 1e-12);
                }
        }
        SUBCASE("dimension mismatch fails") {
            Tensor x({2, 3}), w({4, 5});
            CHECK_THROWS_AS(linear(x, w, {}), std::invalid_argument);
        }
    }

    TEST_CASE("global_avg_pool matches the 1x1 adaptive pool") {
        Tensor x = rand_tensor({2, 4, 3, 5}, 96);
        Tensor g = global_avg_pool(x);
        Tensor a = adaptive_avg_pool2d(x, 1, 1);
        CHECK(g.rank() == 2);
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t c = 0; c < 4; ++c)
                CHECK(g.data[g.idx2(n, c)] == doctest::Approx(a.data[a.idx4(n, c, 0, 0)]).epsilon(1e-15));
    }
}
