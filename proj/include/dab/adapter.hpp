#ifndef DAB_ADAPTER_HPP
#define DAB_ADAPTER_HPP

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "dab/bits.hpp"

namespace dab {

// Comparison key for the circle position h(x) = (0.x_0 x_1 ...)_2: the
// integer whose width-t binary representation reverses x's. Ordering these
// keys orders the circle positions.
uint64_t bit_reversal_key(uint64_t x, unsigned width_t);

struct adapter_key {
    uint64_t l1 = 0, l2 = 0;
    uint64_t total() const { return l1 + l2; }
    friend auto operator<=>(const adapter_key&, const adapter_key&) = default;
};

// element (i, j): j-th word of sub-VM i, i in {1, 2}
struct adapter_elem {
    uint8_t side;    // 1 or 2
    uint32_t index;  // j, 1-based
    friend auto operator<=>(const adapter_elem&, const adapter_elem&) = default;
};

// Bijection {(i, j)} -> [L] for one (l1, l2), plus the number of matching
// rounds the construction used. Immutable once built.
struct adapter_map {
    adapter_key key;
    std::vector<uint32_t> fwd1, fwd2;  // fwd_i[j-1] = position of (i, j)
    std::vector<adapter_elem> inv;     // inv[pos-1] = element
    uint32_t rounds = 0;

    uint32_t pos(uint8_t side, uint32_t j) const {
        const auto& f = side == 1 ? fwd1 : fwd2;
        if (j == 0 || j > f.size()) throw std::out_of_range("adapter: word index out of range");
        return f[j - 1];
    }
    adapter_elem elem(uint32_t position) const {
        if (position == 0 || position > inv.size())
            throw std::out_of_range("adapter: position out of range");
        return inv[position - 1];
    }
};

// Deterministic matching: in each round every surviving element is matched
// to the bin that is its immediate clockwise successor among all surviving
// points. Computed via the equivalent parenthesis matching (cut at minimum
// excess, stack match; a pair's round is 1 + max round directly nested).
// lmax = 0 selects auto_lmax(key); any larger power of two yields the same
// bijection (the auto value already sits in the stable regime).
adapter_map build_bijection(adapter_key key, uint64_t lmax = 0);

// smallest Lmax at which the bijection provably stops depending on Lmax
uint64_t auto_lmax(adapter_key key);

// matching core on an already-sorted circle: is_bin[i] says whether the
// i-th point (in circle order) is a bin; fills partner[] and returns the
// number of rounds
uint32_t match_circle(const std::vector<uint8_t>& is_bin, std::vector<uint32_t>& partner);

struct resize_op {
    uint8_t side;   // 1 or 2
    bool allocate;  // false = release
};

struct relocation_move {
    adapter_elem elem;
    std::optional<uint32_t> from;  // empty for the element being added
    std::optional<uint32_t> to;    // empty for the element being removed
};

struct relocation_delta {
    adapter_key from_key, to_key;
    std::vector<relocation_move> moves;
};

relocation_delta make_delta(const adapter_map& from, const adapter_map& to);

// Memoizes adapter_map (and deltas) per key. Capped by lmax when nonzero;
// keys with a side beyond the cap raise a capacity error. Lookups lock a
// mutex so a shared table set can serve concurrent readers.
class adapter_cache {
public:
    explicit adapter_cache(uint64_t lmax = 0) : lmax_(lmax) {}

    const adapter_map& get(adapter_key key);
    relocation_delta delta(adapter_key key, resize_op op);

    uint32_t sigma(adapter_key key, uint8_t side, uint32_t j) { return get(key).pos(side, j); }
    adapter_elem sigma_inverse(adapter_key key, uint32_t position) { return get(key).elem(position); }

    uint64_t lmax() const { return lmax_; }
    size_t size() const { return maps_.size(); }

private:
    void check_cap(adapter_key key) const;
    uint64_t lmax_;
    std::mutex mu_;
    std::map<adapter_key, adapter_map> maps_;
};

// apply a resize to a key
adapter_key apply_resize(adapter_key key, resize_op op);

// gamma excess profile: (reversal key, gamma after the event) for every
// event point, scanning hash keys in increasing order. Openings are
// elements of A (the sub-VM words), closings are bins.
std::vector<std::pair<uint64_t, int64_t>> excess_profile(adapter_key key, uint64_t lmax = 0);

// Frozen by the exhaustive L <= 1024 calibration sweep (bench adapter):
// max observed |moves| / (floor(log2 L') + 2) is exactly 1 (attained e.g.
// at (2,9) -> (3,9): 5 moves, L' = 12); deltas obey
// |moves| <= kRelocConstant * (floor(log2 L') + 2) with L' = max(old, new L).
inline constexpr uint32_t kRelocConstant = 1;

inline uint64_t reloc_bound(uint64_t l_after_or_max) {
    return l_after_or_max == 0 ? kRelocConstant * 2
                               : kRelocConstant * (floor_log2(l_after_or_max) + 2);
}

// rounds <= 2 * (floor(log2 L) + 1) for L >= 1
inline uint64_t rounds_bound(uint64_t l) { return l == 0 ? 0 : 2 * (floor_log2(l) + 1); }

}  // namespace dab

#endif
