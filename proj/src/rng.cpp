#include "specx/rng.hpp"

#include <cmath>

namespace specx {

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t hash_mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    Rng r(seed ^ (a * 0x9e3779b97f4a7c15ull) ^ (b * 0xd1b54a32d192ed03ull));
    r.next_u64();
    return r.next_u64();
}

void kaiming_uniform_fill(Tensor& t, std::size_t fan_in, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

}  // namespace specx
