#include "dab/spillover.hpp"

#include <algorithm>
#include <stdexcept>

namespace dab {

small_set_code small_set_params(uint64_t set_size, uint64_t r) {
    if (set_size == 0 || r == 0) throw std::invalid_argument("small_set_params: zero argument");
    small_set_code c;
    c.set_size = set_size;
    c.refinement = r;
    if (set_size < r) {
        c.spill_universe = set_size;
        c.mem_bits = 0;
        return c;
    }
    // M = floor(log2(set_size / r)), the largest M with r * 2^M <= set_size
    uint32_t m = floor_log2(set_size / r);
    c.mem_bits = m;
    c.spill_universe = ceil_div(set_size, uint64_t(1) << m);
    return c;
}

std::pair<uint64_t, uint64_t> small_set_encode(const small_set_code& c, uint64_t u) {
    if (u >= c.set_size) throw std::out_of_range("small_set_encode: index out of range");
    return {u >> c.mem_bits, u & low_mask(c.mem_bits)};
}

uint64_t small_set_decode(const small_set_code& c, uint64_t k, uint64_t m) {
    if (k >= c.spill_universe) throw std::out_of_range("small_set_decode: spill out of range");
    if (m > low_mask(c.mem_bits)) throw std::out_of_range("small_set_decode: memory out of range");
    uint64_t u = (k << c.mem_bits) | m;
    if (u >= c.set_size) throw std::out_of_range("small_set_decode: corrupt codeword");
    return u;
}

perturbed_distribution perturb(const std::vector<mpz_class>& weights, const mpz_class& denom,
                               uint64_t r) {
    if (r < 4) throw std::invalid_argument("perturb: refinement must be >= 4");
    if (weights.empty()) throw std::invalid_argument("perturb: empty support");
    mpz_class sum = 0;
    for (const auto& w : weights) {
        if (w < 0) throw std::invalid_argument("perturb: negative weight");
        sum += w;
    }
    if (sum != denom) throw std::invalid_argument("perturb: distribution not normalized");
    // p'(x) = ((r-1) |X| w_x + denom) / (r |X| denom)
    perturbed_distribution out;
    uint64_t n = weights.size();
    out.denom = mpz_class(r) * n * denom;
    out.weights.reserve(n);
    for (const auto& w : weights) out.weights.push_back(mpz_class(r - 1) * n * w + denom);
    return out;
}

fusion_code::fusion_code(std::vector<fusion_item> items, perturbed_distribution p_prime,
                         uint64_t r)
    : items_(std::move(items)), p_prime_(std::move(p_prime)), r_(r) {
    if (items_.empty()) throw std::invalid_argument("fusion_code: empty item list");
    if (r_ == 0) throw std::invalid_argument("fusion_code: refinement must be positive");
    size_t n = items_.size();
    if (!p_prime_.weights.empty() && p_prime_.weights.size() != n)
        throw std::invalid_argument("fusion_code: distribution/item size mismatch");
    weights_.resize(n);
    for (size_t i = 0; i < n; ++i) {
        if (items_[i].spill_universe == 0)
            throw std::invalid_argument("fusion_code: K(x) must be >= 1");
        mpz_class w = items_[i].spill_universe;
        mpz_mul_2exp(w.get_mpz_t(), w.get_mpz_t(), items_[i].mem_bits);
        weights_[i] = w;
    }
    order_.resize(n);
    for (size_t i = 0; i < n; ++i) order_[i] = static_cast<uint32_t>(i);
    std::stable_sort(order_.begin(), order_.end(), [&](uint32_t a, uint32_t b) {
        if (items_[a].mem_bits != items_[b].mem_bits)
            return items_[a].mem_bits > items_[b].mem_bits;
        return a < b;
    });
    starts_.resize(n);
    mpz_class acc = 0;
    for (uint32_t x : order_) {
        starts_[x] = acc;
        acc += weights_[x];
    }
    total_ = acc;
    // M* = smallest M >= 0 with ceil(T / 2^M) <= 2r
    mpz_class two_r = 2 * mpz_class(r_);
    uint32_t m = 0;
    while (true) {
        mpz_class q = (total_ + (mpz_class(1) << m) - 1) >> m;
        if (q <= two_r) {
            k_star_ = q.get_ui();
            m_star_bits_ = m;
            break;
        }
        ++m;
    }
}

fusion_code::encoded fusion_code::encode(uint32_t x, const bit_buf& y_m, uint64_t y_k) const {
    if (x >= items_.size()) throw std::out_of_range("fusion_encode: item out of range");
    const auto& it = items_[x];
    if (y_k >= it.spill_universe) throw std::out_of_range("fusion_encode: spill out of range");
    if (y_m.size() != it.mem_bits) throw std::invalid_argument("fusion_encode: y_m width mismatch");
    mpz_class value = mpz_class(y_k);
    mpz_mul_2exp(value.get_mpz_t(), value.get_mpz_t(), it.mem_bits);
    value += y_m.to_mpz();
    value += starts_[x];
    encoded out;
    mpz_class spill = value >> m_star_bits_;
    out.spill = spill.get_ui();
    mpz_class rem = value - (spill << m_star_bits_);
    out.mem = bit_buf::from_mpz(rem, m_star_bits_);
    return out;
}

fusion_code::decoded fusion_code::decode(uint64_t k_star, const bit_buf& m_star) const {
    if (m_star.size() != m_star_bits_)
        throw std::invalid_argument("fusion_decode: m* width mismatch");
    if (k_star >= k_star_) throw std::out_of_range("fusion_decode: spill out of range");
    mpz_class value = k_star;
    mpz_mul_2exp(value.get_mpz_t(), value.get_mpz_t(), m_star_bits_);
    value += m_star.to_mpz();
    if (value >= total_) throw std::out_of_range("fusion_decode: corrupt codeword");
    // last interval with start <= value, in layout order
    size_t lo = 0, hi = order_.size();
    while (hi - lo > 1) {
        size_t mid = (lo + hi) / 2;
        if (starts_[order_[mid]] <= value) lo = mid; else hi = mid;
    }
    uint32_t x = order_[lo];
    decoded out;
    out.x = x;
    mpz_class off = value - starts_[x];
    mpz_class yk = off >> items_[x].mem_bits;
    out.y_k = yk.get_ui();
    mpz_class ym = off - (yk << items_[x].mem_bits);
    out.y_m = bit_buf::from_mpz(ym, items_[x].mem_bits);
    return out;
}

}  // namespace dab
