#include "dab/oracle.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dab::oracle {

namespace {

// circle position of integer x as its LSB-first digit string padded to t:
// lexicographic order on these strings is the circle order
std::string circle_digits(uint64_t x, unsigned t) {
    std::string s;
    for (unsigned i = 0; i < t; ++i) {
        s.push_back(char('0' + (x & 1)));
        x >>= 1;
    }
    if (x) throw std::out_of_range("naive_bijection: value wider than t");
    return s;
}

struct npoint {
    std::string h;
    bool is_bin;
    adapter_elem e;
    uint32_t bin;
    bool matched = false;
};

}  // namespace

adapter_map naive_bijection(uint64_t l1, uint64_t l2, uint64_t lmax) {
    uint64_t need = std::max<uint64_t>({l1, l2, 1});
    if (lmax == 0) {
        // same Lmax policy as the production adapter, derived independently:
        // 16 times the smallest power of two holding either side
        lmax = 16;
        while (lmax < 16 * need) lmax *= 2;
    }
    while (lmax < need || (lmax & (lmax - 1)) != 0) lmax = lmax * 2;
    unsigned t = 0;
    while ((uint64_t(1) << t) <= 4 * lmax) ++t;  // values live in [1, 4*lmax]

    adapter_map out;
    out.key = {l1, l2};
    out.fwd1.assign(l1, 0);
    out.fwd2.assign(l2, 0);
    out.inv.assign(l1 + l2, adapter_elem{});
    uint64_t L = l1 + l2;
    if (L == 0) return out;

    std::vector<npoint> pts;
    for (uint64_t b = 1; b <= L; ++b) pts.push_back({circle_digits(b, t), true, {}, (uint32_t)b});
    for (uint32_t j = 1; j <= l1; ++j)
        pts.push_back({circle_digits(3 * lmax - j + 1, t), false, {1, j}, 0});
    for (uint32_t j = 1; j <= l2; ++j)
        pts.push_back({circle_digits(3 * lmax + j, t), false, {2, j}, 0});

    uint32_t rounds = 0;
    size_t unmatched_elems = l1 + l2;
    while (unmatched_elems > 0) {
        ++rounds;
        // for every surviving element, scan all surviving points for the
        // cyclically-next position; match if it is a bin
        std::vector<std::pair<size_t, size_t>> pairs;
        for (size_t a = 0; a < pts.size(); ++a) {
            if (pts[a].matched || pts[a].is_bin) continue;
            ssize_t best = -1;
            bool wrap_best = false;
            for (size_t b = 0; b < pts.size(); ++b) {
                if (pts[b].matched || b == a) continue;
                bool after = pts[b].h > pts[a].h;  // same side of the cut
                if (best == -1) {
                    best = (ssize_t)b;
                    wrap_best = !after;
                    continue;
                }
                if (after) {
                    if (wrap_best || pts[b].h < pts[best].h) {
                        best = (ssize_t)b;
                        wrap_best = false;
                    }
                } else if (wrap_best && pts[b].h < pts[best].h) {
                    best = (ssize_t)b;
                }
            }
            if (best >= 0 && pts[best].is_bin) pairs.push_back({a, (size_t)best});
        }
        if (pairs.empty()) throw std::logic_error("naive_bijection: stalled");
        for (auto [a, b] : pairs) {
            pts[a].matched = pts[b].matched = true;
            const auto& e = pts[a].e;
            (e.side == 1 ? out.fwd1 : out.fwd2)[e.index - 1] = pts[b].bin;
            out.inv[pts[b].bin - 1] = e;
            --unmatched_elems;
        }
    }
    out.rounds = rounds;
    return out;
}

namespace {

label_t fold_label(const dab_params& p, std::span<const symbol_t> a) {
    if (a.size() == 1) return p.leaf_label(a[0]);
    uint64_t half = a.size() / 2;
    return p.combine(fold_label(p, a.subspan(0, half)), fold_label(p, a.subspan(half)),
                     a.size());
}

}  // namespace

injectivity_report exhaustive_injectivity(const std::shared_ptr<const dab_tables>& tables) {
    const dab_params& p = tables->params();
    injectivity_report rep;
    double arrays = std::pow(double(p.sigma_size), double(p.n));
    if (arrays > double(1 << 24)) {
        rep.detail = "alphabet too large to enumerate";
        return rep;
    }
    std::map<label_t, std::set<std::string>> seen;
    std::vector<symbol_t> a(p.n, 0);
    for (;;) {
        label_t phi = fold_label(p, a);
        dab_state st = dab_state::encode(tables, a);
        if (st.root_label() != phi) {
            rep.detail = "encoder root label disagrees with direct fold";
            return rep;
        }
        if (!seen[phi].insert(st.logical_key()).second) {
            rep.detail = "two arrays with the same label share an encoding";
            return rep;
        }
        // odometer
        size_t i = 0;
        while (i < p.n && ++a[i] == p.sigma_size) a[i++] = 0;
        if (i == p.n) break;
    }
    for (auto& [phi, keys] : seen) {
        rep.per_label_count[phi] = keys.size();
        if (mpz_class(static_cast<unsigned long>(keys.size())) != tables->count(p.n, phi)) {
            std::ostringstream os;
            os << "label " << phi << ": " << keys.size() << " encodings, N = "
               << tables->count(p.n, phi).get_str();
            rep.detail = os.str();
            return rep;
        }
    }
    rep.pass = true;
    return rep;
}

}  // namespace dab::oracle
