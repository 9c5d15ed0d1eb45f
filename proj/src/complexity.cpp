#include "specx/complexity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace specx {

namespace {

std::string fmt_count(double v) {
    char buf[64];
    if (std::fabs(v - std::round(v)) < 1e-6 && std::fabs(v) < 9e15)
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::llround(v)));
    else
        std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

ComplexityReport analytic_complexity(int c1, int c2, int h, int w, int k, double alpha) {
    if (c1 < 1 || c2 < 1 || k < 1 || h < 1 || w < 1)
        throw std::invalid_argument("complexity: dimensions must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("complexity: alpha outside [0,1]");
    const double C1 = c1, C2 = c2, K = k, HW = static_cast<double>(h) * static_cast<double>(w);
    const double a = alpha;

    ComplexityReport r;
    r.c1 = c1;
    r.c2 = c2;
    r.h = h;
    r.w = w;
    r.k = k;
    r.alpha = alpha;

    r.baseline = {"baseline", C1 * C2 * K * K, C1 * C2 * K * K * HW};
    r.local_local = {"local->local", (1 - a) * (1 - a) * C1 * C2 * K * K,
                     (1 - a) * (1 - a) * C1 * C2 * K * K * HW};
    r.local_global = {"local->global", a * (1 - a) * C1 * C2 * K * K,
                      a * (1 - a) * C1 * C2 * K * K * HW};
    r.global_local = {"global->local", a * (1 - a) * C1 * C2 * K * K,
                      a * (1 - a) * C1 * C2 * K * K * HW};
    r.spectral = {"global->global (spectral)", a * a * C2 * (0.5 * C1 + 1.5 * C2),
                  a * a * C2 * HW * (0.5 * C1 + 13.0 / 16.0 * C2)};
    r.dfa = {"attention fusion", 2.0 * (C1 + C2) * (C1 + C2),
             2.0 * (C1 + C2) * (C1 + C2) + (C1 + C2) * HW};

    r.total_params = (1 - a * a) * C1 * C2 * K * K + a * a * C2 * (0.5 * C1 + 1.5 * C2) +
                     2.0 * (C1 + C2) * (C1 + C2);
    r.total_flops = (1 - a * a) * C1 * C2 * K * K * HW +
                    a * a * C2 * HW * (0.5 * C1 + 13.0 / 16.0 * C2) +
                    2.0 * (C1 + C2) * (C1 + C2) + (C1 + C2) * HW;

    r.params_residual = r.total_params - (r.ddfc_params() + r.dfa.params);
    r.flops_residual = r.total_flops - (r.ddfc_flops() + r.dfa.flops);
    return r;
}

std::string format_report(const ComplexityReport& r, bool csv) {
    const ComplexityRow* rows[] = {&r.baseline,     &r.local_local, &r.local_global,
                                   &r.global_local, &r.spectral,    &r.dfa};
    std::ostringstream out;
    if (csv) {
        out << "name,params,flops\n";
        for (const ComplexityRow* row : rows)
            out << row->name << "," << fmt_count(row->params) << "," << fmt_count(row->flops)
                << "\n";
        out << "coupler subtotal," << fmt_count(r.ddfc_params()) << "," << fmt_count(r.ddfc_flops())
            << "\n";
        out << "total (closed form)," << fmt_count(r.total_params) << ","
            << fmt_count(r.total_flops) << "\n";
        out << "residual vs row sum," << fmt_count(r.params_residual) << ","
            << fmt_count(r.flops_residual) << "\n";
        return out.str();
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "config: C1=%d C2=%d H=%d W=%d K=%d alpha=%g\n", r.c1, r.c2,
                  r.h, r.w, r.k, r.alpha);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-28s %16s %20s\n", "path", "params", "flops");
    out << buf;
    auto line = [&](const std::string& name, double p, double f) {
        std::snprintf(buf, sizeof(buf), "%-28s %16s %20s\n", name.c_str(), fmt_count(p).c_str(),
                      fmt_count(f).c_str());
        out << buf;
    };
    for (const ComplexityRow* row : rows) line(row->name, row->params, row->flops);
    line("coupler subtotal", r.ddfc_params(), r.ddfc_flops());
    line("total (closed form)", r.total_params, r.total_flops);
    line("residual vs row sum", r.params_residual, r.flops_residual);
    out << "convention: 1 MAC = 1 FLOP; biases and norm affine terms excluded\n";
    if (r.params_residual != 0.0 || r.flops_residual != 0.0)
        out << "WARNING: closed-form total does not match the row sum at this config\n";
    return out.str();
}

ParamBreakdown walk_params(const ParamList& params) {
    ParamBreakdown b;
    for (const ParamRef& p : params) {
        const long long n = static_cast<long long>(p.tensor->numel());
        switch (p.kind) {
            case ParamKind::conv_weight:
            case ParamKind::linear_weight: b.weights += n; break;
            case ParamKind::bias: b.biases += n; break;
            case ParamKind::bn_gamma:
            case ParamKind::bn_beta: b.bn_affine += n; break;
            case ParamKind::bn_stat: b.bn_stats += n; break;
        }
    }
    return b;
}

long long expected_model_params(const ModelConfig& cfg) {
    cfg.validate();
    long long total = 0;
    total += static_cast<long long>(cfg.in_channels) * cfg.stem_channels * 9;  // stem 3x3
    total += 2LL * cfg.stem_channels;                                          // stem bn
    int h = cfg.in_h, w = cfg.in_w;  // stem is stride-1, padding-preserving
    for (const BlockConfig& b : cfg.blocks) {
        h /= b.pool;
        w /= b.pool;
        const long long k2 = static_cast<long long>(b.kernel) * b.kernel;
        total += static_cast<long long>(b.c_in) * k2;       // depthwise
        total += static_cast<long long>(b.c_in) * b.c_in;   // pointwise
        const int c_gi = global_channels(b.c_in, b.alpha), c_li = b.c_in - c_gi;
        const int c_go = global_channels(b.c_out, b.alpha), c_lo = b.c_out - c_go;
        if (c_li > 0 && c_lo > 0) total += static_cast<long long>(c_lo) * c_li * k2;
        if (cfg.ddfc.cross_paths && c_li > 0 && c_go > 0)
            total += static_cast<long long>(c_go) * c_li * k2;
        if (cfg.ddfc.cross_paths && c_gi > 0 && c_lo > 0)
            total += static_cast<long long>(c_lo) * c_gi * k2;
        if (c_gi > 0 && c_go > 0) {
            const long long mid = std::max(1, c_go / 2);
            total += mid * c_gi;        // pre 1x1
            total += 2 * mid;           // pre bn
            if (cfg.ddfc.spectral.per_bin) {
                const int s = cfg.ddfc.spectral.stride;
                total += 2 * mid * ((h - 1) / s + 1) * ((w - 1) / s + 1);  // bin-resolved mask
            } else {
                total += 4 * mid * mid;  // modulation 1x1 on stacked re/im
            }
            total += 4 * mid;           // modulation bn
            total += static_cast<long long>(c_go) * mid;  // post 1x1
        }
        if (c_lo > 0) total += 2LL * c_lo;
        if (c_go > 0) total += 2LL * c_go;
        if (c_lo > 0 && c_go > 0) {
            const long long ha = std::max(cfg.dfa.min_hidden, c_go / cfg.dfa.reduction);
            const long long hb = std::max(cfg.dfa.min_hidden, c_lo / cfg.dfa.reduction);
            total += ha * c_go + ha + static_cast<long long>(c_lo) * ha + c_lo;
            total += hb * c_lo + hb + static_cast<long long>(c_go) * hb + c_go;
            total += 2LL * (c_lo + c_go) + 2;
            total += static_cast<long long>(b.c_out) * c_lo;
            total += static_cast<long long>(b.c_out) * c_go;
        }
    }
    total += static_cast<long long>(cfg.classes) * cfg.blocks.back().c_out;  // head
    total += cfg.classes;
    return total;
}

double median_ns(const std::function<void()>& fn, int warmup, int repeats) {
    if (repeats < 1) throw std::invalid_argument("median_ns: repeats must be >= 1");
    warmup = std::max(warmup, 3);
    for (int i = 0; i < warmup; ++i) fn();
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(repeats));
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(
            static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    }
    const std::size_t mid = times.size() / 2;
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(mid), times.end());
    return times[mid];
}

}  // namespace specx
