#include "dab/harddist.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "dab/adapter.hpp"

namespace dab {

uint64_t default_lambda(uint64_t n) {
    uint64_t lg = n <= 1 ? 1 : floor_log2(n) + (is_pow2(n) ? 0 : 1);
    return std::max<uint64_t>(2, lg * lg);
}

bool harddist_valid_n(uint64_t n, uint64_t lambda) {
    if (n == 0 || lambda < 2) return false;
    uint64_t m = n;
    while (m >= lambda) {
        if (m % lambda) return false;
        m /= lambda;
    }
    return true;
}

namespace {

void sample_node(uint64_t m, uint64_t lambda, std::mt19937_64& rng, std::vector<uint8_t>& out) {
    if (m < lambda) {  // leaf: left-to-right fixed order
        out.insert(out.end(), m, 1);
        out.insert(out.end(), m, 2);
        return;
    }
    uint64_t child = m / lambda;  // insertions per side per child
    uint64_t r = rng() & 1;
    for (uint64_t v = 0; v < lambda; ++v) {
        if (v == 0) {
            out.insert(out.end(), 2 * r * child, 1);
            out.insert(out.end(), (2 - 2 * r) * child, 2);
        } else if (v == lambda - 1) {
            out.insert(out.end(), (2 - 2 * r) * child, 1);
            out.insert(out.end(), 2 * r * child, 2);
        } else {
            sample_node(child, lambda, rng, out);
        }
    }
}

}  // namespace

std::vector<uint8_t> sample_hard_instance(const harddist_params& p) {
    uint64_t lambda = p.lambda ? p.lambda : default_lambda(p.n);
    if (!harddist_valid_n(p.n, lambda))
        throw std::invalid_argument("hard distribution: n must be lambda^j * k with k < lambda");
    std::mt19937_64 rng(p.seed);
    std::vector<uint8_t> out;
    out.reserve(2 * p.n);
    sample_node(p.n, lambda, rng, out);
    if (out.size() != 2 * p.n) throw std::logic_error("hard distribution: bad instance length");
    return out;
}

// ---------------------------------------------------------------------------
// incremental allocation walk
// ---------------------------------------------------------------------------

namespace {

// Incremental evaluator for pure-allocation walks. Point ids:
//   bins:    value b in [1, 2n]      -> id b - 1
//   side 1:  word j, value 3L-j+1    -> id 2n + j - 1
//   side 2:  word j, value 3L+j      -> id 3n + j - 1
// All sorted positions are precomputed once at a fixed Lmax in the stable
// regime; per op, the two new points enter a doubly-linked circle at
// offline-precomputed neighbors and the matching is rebuilt in O(L).
struct walk_state {
    uint64_t n;     // insertions per side
    uint64_t lmax;  // fixed global Lmax
    unsigned t;     // hash width
    std::vector<uint32_t> order;     // sorted position -> id
    std::vector<uint32_t> rank_of;   // id -> sorted position
    std::vector<uint32_t> nxt, prv;  // linked list over sorted positions
    std::vector<uint8_t> active;
    std::vector<std::pair<uint32_t, uint32_t>> neighbors;  // per op: ball, then bin
    uint32_t head = 0;

    explicit walk_state(const std::vector<uint8_t>& ops, uint64_t n_cap) : n(n_cap) {
        lmax = 16 * next_pow2(std::max<uint64_t>(n, 1));
        t = bit_length(4 * lmax);
        uint64_t total = 4 * n;
        std::vector<uint64_t> value(total);
        for (uint64_t b = 1; b <= 2 * n; ++b) value[b - 1] = b;
        for (uint64_t j = 1; j <= n; ++j) value[2 * n + j - 1] = 3 * lmax - j + 1;
        for (uint64_t j = 1; j <= n; ++j) value[3 * n + j - 1] = 3 * lmax + j;
        order.resize(total);
        for (uint64_t i = 0; i < total; ++i) order[i] = static_cast<uint32_t>(i);
        std::vector<uint64_t> key(total);
        for (uint64_t i = 0; i < total; ++i) key[i] = bit_reversal_key(value[i], t);
        std::sort(order.begin(), order.end(),
                  [&](uint32_t a, uint32_t b) { return key[a] < key[b]; });
        rank_of.resize(total);
        for (uint64_t pos = 0; pos < total; ++pos) rank_of[order[pos]] = static_cast<uint32_t>(pos);

        // activation pairs: op k inserts one ball and bin k+1 (id = k)
        std::vector<std::pair<uint32_t, uint32_t>> act(ops.size());
        uint64_t c1 = 0, c2 = 0;
        for (uint64_t k = 0; k < ops.size(); ++k) {
            if (ops[k] != 1 && ops[k] != 2) throw std::invalid_argument("walk: bad op");
            uint32_t ball = ops[k] == 1 ? static_cast<uint32_t>(2 * n + c1++)
                                        : static_cast<uint32_t>(3 * n + c2++);
            act[k] = {ball, static_cast<uint32_t>(k)};
        }
        if (c1 > n || c2 > n) throw std::invalid_argument("walk: side exceeds capacity");

        // offline neighbors: start fully linked, drop never-activated points,
        // then delete in reverse op order recording neighbors at deletion time
        nxt.resize(total);
        prv.resize(total);
        for (uint64_t pos = 0; pos < total; ++pos) {
            nxt[pos] = static_cast<uint32_t>((pos + 1) % total);
            prv[pos] = static_cast<uint32_t>((pos + total - 1) % total);
        }
        auto unlink = [&](uint32_t pos) {
            nxt[prv[pos]] = nxt[pos];
            prv[nxt[pos]] = prv[pos];
        };
        std::vector<uint8_t> used(total, 0);
        for (auto [ball, bin] : act) used[ball] = used[bin] = 1;
        for (uint64_t id = 0; id < total; ++id)
            if (!used[id]) unlink(rank_of[id]);
        neighbors.resize(2 * ops.size());
        for (uint64_t k = ops.size(); k-- > 0;) {
            uint32_t bin_pos = rank_of[act[k].second];
            neighbors[2 * k + 1] = {prv[bin_pos], nxt[bin_pos]};
            unlink(bin_pos);
            uint32_t ball_pos = rank_of[act[k].first];
            neighbors[2 * k] = {prv[ball_pos], nxt[ball_pos]};
            unlink(ball_pos);
        }
        active.assign(total, 0);
    }

    void insert(uint32_t id, std::pair<uint32_t, uint32_t> nb) {
        uint32_t pos = rank_of[id];
        prv[pos] = nb.first;
        nxt[pos] = nb.second;
        nxt[nb.first] = pos;
        prv[nb.second] = pos;
        active[pos] = 1;
        if (!active[head])
            head = pos;
        else
            head = std::min(head, pos);
    }
};

struct walk_runner {
    walk_state ws;
    const std::vector<uint8_t>& ops;
    std::vector<uint32_t> placement;  // elem id -> bin value (0 = none)
    std::vector<uint32_t> ids_buf, stack;
    uint64_t c1 = 0, c2 = 0;

    walk_runner(const std::vector<uint8_t>& o, uint64_t n_cap)
        : ws(o, n_cap), ops(o), placement(4 * n_cap, 0) {}

    // run op k; `moved` receives ids of elements whose bin changed,
    // including the newly inserted one. This is the cut-at-minimum-excess
    // parenthesis matching of match_circle with the placement diff fused
    // into the stack pass.
    void step(uint64_t k, std::vector<uint32_t>& moved) {
        uint64_t n = ws.n;
        uint32_t ball = ops[k] == 1 ? static_cast<uint32_t>(2 * n + c1++)
                                    : static_cast<uint32_t>(3 * n + c2++);
        uint32_t bin = static_cast<uint32_t>(k);
        ws.insert(ball, ws.neighbors[2 * k]);
        ws.insert(bin, ws.neighbors[2 * k + 1]);

        uint64_t len = 2 * (k + 1);
        ids_buf.resize(len);
        uint32_t pos = ws.head;
        int64_t excess = 0, best = INT64_MAX;
        uint64_t cut = 0;
        for (uint64_t i = 0; i < len; ++i, pos = ws.nxt[pos]) {
            uint32_t id = ws.order[pos];
            ids_buf[i] = id;
            excess += id < 2 * n ? -1 : +1;
            if (excess < best) {
                best = excess;
                cut = i;
            }
        }
        moved.clear();
        stack.clear();
        for (uint64_t s = 0; s < len; ++s) {
            uint32_t id = ids_buf[(cut + 1 + s) % len];
            if (id >= 2 * n) {
                stack.push_back(id);
            } else {
                uint32_t elem = stack.back();
                stack.pop_back();
                uint32_t bin_value = id + 1;
                if (placement[elem] != bin_value) {
                    placement[elem] = bin_value;
                    moved.push_back(elem);
                }
            }
        }
    }
};

}  // namespace

std::vector<uint32_t> allocation_walk_moves(const std::vector<uint8_t>& ops) {
    uint64_t n_cap = std::max<uint64_t>(ops.size(), 1);
    walk_runner runner(ops, n_cap);
    std::vector<uint32_t> counts;
    counts.reserve(ops.size());
    std::vector<uint32_t> moved;
    for (uint64_t k = 0; k < ops.size(); ++k) {
        runner.step(k, moved);
        counts.push_back(static_cast<uint32_t>(moved.size()));
    }
    return counts;
}

harddist_report run_hard_distribution(const harddist_params& p) {
    harddist_report rep;
    rep.n = p.n;
    rep.lambda = p.lambda ? p.lambda : default_lambda(p.n);
    rep.seed = p.seed;
    auto ops = sample_hard_instance({p.n, rep.lambda, p.seed});

    walk_runner runner(ops, p.n);
    std::vector<uint32_t> moved;
    std::vector<uint32_t> last_move(4 * p.n, 0);  // op index + 1 of the last move

    // segment sizes of the lambda-ary tree levels over 2n operations
    std::vector<uint64_t> seg_size;
    for (uint64_t seg = 2 * p.n;; seg /= rep.lambda) {
        seg_size.push_back(std::max<uint64_t>(seg, 1));
        if (seg < 2 * rep.lambda) break;
    }
    rep.level_relocations.assign(seg_size.size(), 0);

    for (uint64_t k = 0; k < ops.size(); ++k) {
        runner.step(k, moved);
        rep.total_relocations += moved.size();
        rep.max_per_op = std::max<uint64_t>(rep.max_per_op, moved.size());
        if (moved.size() > reloc_bound(k + 1)) rep.per_op_bound_ok = false;
        for (uint32_t elem : moved) {
            if (last_move[elem] == 0) {
                ++rep.unattributed;
            } else {
                uint64_t t1 = last_move[elem] - 1, t2 = k;
                size_t lvl = 0;
                for (size_t L = 0; L < seg_size.size(); ++L)
                    if (t1 / seg_size[L] == t2 / seg_size[L]) lvl = L;
                ++rep.level_relocations[lvl];
            }
            last_move[elem] = static_cast<uint32_t>(k + 1);
        }
    }
    rep.amortized = ops.empty() ? 0.0 : double(rep.total_relocations) / double(ops.size());
    return rep;
}

std::string harddist_report::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["n"] = n;
    j["lambda"] = lambda;
    j["seed"] = seed;
    j["total_relocations"] = total_relocations;
    j["amortized_relocations"] = amortized;
    j["max_per_op"] = max_per_op;
    j["per_op_bound_ok"] = per_op_bound_ok;
    j["per_level_relocations"] = level_relocations;
    j["unattributed_first_moves"] = unattributed;
    return j.dump();
}

}  // namespace dab
