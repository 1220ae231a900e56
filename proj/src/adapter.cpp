#include "dab/adapter.hpp"

#include <algorithm>
#include <stdexcept>

namespace dab {

uint64_t bit_reversal_key(uint64_t x, unsigned width_t) {
    if (width_t > 63) throw std::invalid_argument("bit_reversal_key: width too large");
    if (x >> width_t) throw std::out_of_range("bit_reversal_key: x >= 2^t");
    uint64_t r = 0;
    for (unsigned i = 0; i < width_t; ++i) r |= ((x >> i) & 1) << (width_t - 1 - i);
    return r;
}

uint64_t auto_lmax(adapter_key key) {
    // The hash places side-1 words 3/2^{t} below and side-2 words 3/2^{t}
    // above their limiting circle positions; those limits are dyadics with
    // denominator at most 2^{bitlen(L)}. Once Lmax >= 8*L the shifts are
    // smaller than every gap, so the order (hence the bijection) no longer
    // depends on Lmax. 16 * next_pow2(max side) clears that threshold.
    return 16 * next_pow2(std::max<uint64_t>({key.l1, key.l2, 1}));
}

namespace {

struct point {
    uint64_t rev;    // reversal key = circle position
    bool is_bin;     // true: element of B = [1, L]; false: sub-VM word
    adapter_elem e;  // valid when !is_bin
    uint32_t bin;    // valid when is_bin
};

// All active points for `key`, sorted by circle position. Distinct integers
// reverse to distinct keys at width t, so ties cannot occur.
std::vector<point> sorted_points(adapter_key key, uint64_t lmax) {
    if (lmax == 0) lmax = auto_lmax(key);
    if (!is_pow2(lmax)) lmax = next_pow2(lmax);
    if (key.l1 > lmax || key.l2 > lmax)
        throw std::out_of_range("adapter: key exceeds Lmax cap");
    unsigned t = bit_length(4 * lmax);
    uint64_t L = key.total();
    std::vector<point> pts;
    pts.reserve(2 * L);
    for (uint64_t b = 1; b <= L; ++b)
        pts.push_back({bit_reversal_key(b, t), true, {}, static_cast<uint32_t>(b)});
    // (1, j) represented as 3*Lmax - j + 1, (2, j) as 3*Lmax + j
    for (uint32_t j = 1; j <= key.l1; ++j)
        pts.push_back({bit_reversal_key(3 * lmax - j + 1, t), false, {1, j}, 0});
    for (uint32_t j = 1; j <= key.l2; ++j)
        pts.push_back({bit_reversal_key(3 * lmax + j, t), false, {2, j}, 0});
    std::sort(pts.begin(), pts.end(), [](const point& a, const point& b) { return a.rev < b.rev; });
    for (size_t i = 1; i < pts.size(); ++i)
        if (pts[i].rev == pts[i - 1].rev) throw std::logic_error("adapter: duplicate hash key");
    return pts;
}

}  // namespace

uint32_t match_circle(const std::vector<uint8_t>& is_bin, std::vector<uint32_t>& partner) {
    size_t n = is_bin.size();
    partner.assign(n, 0);
    if (n == 0) return 0;
    // Cut the circle where the excess is minimal; the rotated sequence is a
    // valid parenthesis sequence (elements open, bins close), and the
    // round-based matching equals parenthesis matching on it: a pair is
    // matched in round 1 + max(rounds of the pairs directly nested in it).
    int64_t excess = 0, best = INT64_MAX;
    size_t cut = 0;  // first index attaining the minimal prefix excess
    for (size_t i = 0; i < n; ++i) {
        excess += is_bin[i] ? -1 : +1;
        if (excess < best) {
            best = excess;
            cut = i;
        }
    }
    struct frame {
        uint32_t elem_idx;
        uint32_t max_child_round;
    };
    std::vector<frame> stack;
    stack.reserve(n / 2);
    uint32_t rounds = 0;
    for (size_t step = 0; step < n; ++step) {
        uint32_t i = static_cast<uint32_t>((cut + 1 + step) % n);
        if (!is_bin[i]) {
            stack.push_back({i, 0});
        } else {
            if (stack.empty()) throw std::logic_error("match_circle: unbalanced sequence");
            frame f = stack.back();
            stack.pop_back();
            partner[f.elem_idx] = i;
            partner[i] = f.elem_idx;
            uint32_t round = f.max_child_round + 1;
            rounds = std::max(rounds, round);
            if (!stack.empty())
                stack.back().max_child_round = std::max(stack.back().max_child_round, round);
        }
    }
    if (!stack.empty()) throw std::logic_error("match_circle: unbalanced sequence");
    return rounds;
}

adapter_map build_bijection(adapter_key key, uint64_t lmax) {
    adapter_map out;
    out.key = key;
    out.fwd1.assign(key.l1, 0);
    out.fwd2.assign(key.l2, 0);
    out.inv.assign(key.total(), adapter_elem{});
    if (key.total() == 0) return out;

    auto pts = sorted_points(key, lmax);
    std::vector<uint8_t> is_bin(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) is_bin[i] = pts[i].is_bin;
    std::vector<uint32_t> partner;
    out.rounds = match_circle(is_bin, partner);
    for (size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].is_bin) continue;
        const auto& e = pts[i].e;
        uint32_t position = pts[partner[i]].bin;
        (e.side == 1 ? out.fwd1 : out.fwd2)[e.index - 1] = position;
        out.inv[position - 1] = e;
    }
    return out;
}

relocation_delta make_delta(const adapter_map& from, const adapter_map& to) {
    relocation_delta d;
    d.from_key = from.key;
    d.to_key = to.key;
    for (uint8_t side : {uint8_t(1), uint8_t(2)}) {
        const auto& f = side == 1 ? from.fwd1 : from.fwd2;
        const auto& t = side == 1 ? to.fwd1 : to.fwd2;
        size_t common = std::min(f.size(), t.size());
        for (uint32_t j = 0; j < common; ++j)
            if (f[j] != t[j])
                d.moves.push_back({{side, j + 1}, f[j], t[j]});
        for (size_t j = common; j < t.size(); ++j)  // allocated element
            d.moves.push_back({{side, static_cast<uint32_t>(j + 1)}, std::nullopt, t[j]});
        for (size_t j = common; j < f.size(); ++j)  // released element
            d.moves.push_back({{side, static_cast<uint32_t>(j + 1)}, f[j], std::nullopt});
    }
    return d;
}

adapter_key apply_resize(adapter_key key, resize_op op) {
    uint64_t& l = op.side == 1 ? key.l1 : key.l2;
    if (op.allocate) {
        ++l;
    } else {
        if (l == 0) throw std::out_of_range("adapter: release from empty side");
        --l;
    }
    return key;
}

void adapter_cache::check_cap(adapter_key key) const {
    if (lmax_ != 0 && (key.l1 > lmax_ || key.l2 > lmax_))
        throw std::out_of_range("adapter cache: key exceeds Lmax cap");
}

const adapter_map& adapter_cache::get(adapter_key key) {
    check_cap(key);
    std::lock_guard<std::mutex> lk(mu_);
    auto it = maps_.find(key);
    if (it == maps_.end()) it = maps_.emplace(key, build_bijection(key)).first;
    return it->second;
}

relocation_delta adapter_cache::delta(adapter_key key, resize_op op) {
    adapter_key to = apply_resize(key, op);
    check_cap(to);
    return make_delta(get(key), get(to));
}

std::vector<std::pair<uint64_t, int64_t>> excess_profile(adapter_key key, uint64_t lmax) {
    std::vector<std::pair<uint64_t, int64_t>> out;
    if (key.total() == 0) return out;
    auto pts = sorted_points(key, lmax);
    int64_t gamma = 0;
    for (const auto& p : pts) {
        gamma += p.is_bin ? -1 : +1;
        out.push_back({p.rev, gamma});
    }
    return out;
}

}  // namespace dab
