#ifndef DAB_SPILLOVER_HPP
#define DAB_SPILLOVER_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "dab/bits.hpp"

namespace dab {

// Spillover code for an index in [set_size]: (k, m) in [K] x {0,1}^M with
// K in [r, 2r] when set_size >= r, else K = set_size and M = 0.
struct small_set_code {
    uint64_t set_size = 0;
    uint64_t refinement = 0;   // r
    uint64_t spill_universe = 0;  // K
    uint32_t mem_bits = 0;        // M
};

small_set_code small_set_params(uint64_t set_size, uint64_t r);
std::pair<uint64_t, uint64_t> small_set_encode(const small_set_code& c, uint64_t u);  // (k, m)
uint64_t small_set_decode(const small_set_code& c, uint64_t k, uint64_t m);

// Exact rational distribution p'(x) = weight[x] / denom with
// p'(x) >= 1/(2r|X|) and (1/p')^r <= 4 (1/p)^r.
struct perturbed_distribution {
    std::vector<mpz_class> weights;
    mpz_class denom = 1;
};

// p'(x) = (1 - 1/r) p(x) + 1/(r |X|), exact; requires r >= 4 and the input
// weights to sum to the stated denominator.
perturbed_distribution perturb(const std::vector<mpz_class>& weights, const mpz_class& denom,
                               uint64_t r);

struct fusion_item {
    uint32_t mem_bits = 0;        // M(x)
    uint64_t spill_universe = 1;  // K(x)
};

// Aligned-interval injective code fusing a discrete variable x, its spill
// y_k in [K(x)] and M(x) verbatim memory bits into one (k*, m*) pair.
// Items are laid out by M(x) descending (ties by item index), so every
// interval start is a multiple of 2^{M(x)}; M* is the smallest value with
// ceil(T / 2^{M*}) <= 2r and K* = ceil(T / 2^{M*}).
class fusion_code {
public:
    fusion_code(std::vector<fusion_item> items, perturbed_distribution p_prime, uint64_t r);

    struct encoded {
        uint64_t spill;  // k* in [K*]
        bit_buf mem;     // m*, M* bits
    };
    struct decoded {
        uint32_t x;
        bit_buf y_m;     // M(x) bits
        uint64_t y_k;    // in [K(x)]
    };

    encoded encode(uint32_t x, const bit_buf& y_m, uint64_t y_k) const;
    decoded decode(uint64_t k_star, const bit_buf& m_star) const;

    uint64_t spill_universe() const { return k_star_; }    // K*
    uint32_t mem_bits() const { return m_star_bits_; }     // M*
    uint64_t refinement() const { return r_; }
    const mpz_class& total() const { return total_; }      // T
    size_t item_count() const { return items_.size(); }
    const fusion_item& item(uint32_t x) const { return items_.at(x); }
    const mpz_class& interval_start(uint32_t x) const { return starts_.at(x); }
    const mpz_class& weight(uint32_t x) const { return weights_.at(x); }
    const perturbed_distribution& p_prime() const { return p_prime_; }

private:
    std::vector<fusion_item> items_;
    perturbed_distribution p_prime_;
    uint64_t r_;
    std::vector<uint32_t> order_;       // item indices, M desc then index asc
    std::vector<mpz_class> starts_;     // interval_start per item index
    std::vector<mpz_class> weights_;    // A(x) = K(x) * 2^{M(x)}
    mpz_class total_ = 0;
    uint64_t k_star_ = 1;
    uint32_t m_star_bits_ = 0;
};

}  // namespace dab

#endif
