#include "dab/dabtree.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <stdexcept>

namespace dab {

// ---------------------------------------------------------------------------
// params
// ---------------------------------------------------------------------------

uint32_t dab_params::beta() const {
    uint64_t need = floor_log2(n) + ceil_log2(std::max<uint64_t>(phi_size, 2)) +
                    ceil_log2(std::max<uint64_t>(sigma_size, 2)) + slack;
    uint32_t b = static_cast<uint32_t>(std::max<uint64_t>(1, ceil_div(need, word_bits)));
    // the construction additionally needs beta*w >= log(2r) + log|Phi| + log|Sigma|
    uint64_t cond = ceil_log2(2 * refinement()) + ceil_log2(std::max<uint64_t>(phi_size, 2)) +
                    ceil_log2(std::max<uint64_t>(sigma_size, 2));
    while (uint64_t(b) * word_bits < cond) ++b;
    return b;
}

dab_params popcount_params(uint64_t n, uint32_t word_bits, uint32_t slack) {
    dab_params p;
    p.n = n;
    p.sigma_size = 2;
    p.phi_size = n + 1;
    p.leaf_label = [](symbol_t s) { return static_cast<label_t>(s); };
    p.combine = [](label_t a, label_t b, uint64_t) { return a + b; };
    p.word_bits = word_bits;
    p.slack = slack;
    return p;
}

dab_params max_label_params(uint64_t n, uint32_t sigma, uint32_t word_bits, uint32_t slack) {
    dab_params p;
    p.n = n;
    p.sigma_size = sigma;
    p.phi_size = sigma + 1;  // labels 1..sigma (0 unused)
    p.leaf_label = [](symbol_t s) { return static_cast<label_t>(s + 1); };
    p.combine = [](label_t a, label_t b, uint64_t) { return std::max(a, b); };
    p.word_bits = word_bits;
    p.slack = slack;
    return p;
}

dab_params count_vector_params(uint64_t n, uint32_t sigma, uint32_t word_bits, uint32_t slack) {
    dab_params p;
    uint64_t base = n + 1;
    p.n = n;
    p.sigma_size = sigma;
    uint64_t phi = 1;
    for (uint32_t i = 0; i < sigma; ++i) {
        if (phi > (uint64_t(1) << 32) / base)
            throw std::invalid_argument("count_vector_params: label space exceeds 32 bits");
        phi *= base;
    }
    p.phi_size = phi;
    p.leaf_label = [base](symbol_t s) {
        label_t l = 1;
        for (uint32_t i = 0; i < s; ++i) l = static_cast<label_t>(l * base);
        return l;  // unit vector e_s in base (n+1)
    };
    p.combine = [](label_t a, label_t b, uint64_t) { return a + b; };  // digitwise, no carries
    p.word_bits = word_bits;
    p.slack = slack;
    return p;
}

// ---------------------------------------------------------------------------
// tables
// ---------------------------------------------------------------------------

std::shared_ptr<const dab_tables> dab_tables::build(dab_params params) {
    if (!is_pow2(params.n)) throw std::invalid_argument("dab_tables: n must be a power of two");
    if (params.sigma_size == 0 || params.phi_size == 0)
        throw std::invalid_argument("dab_tables: empty alphabet or label set");
    if (params.word_bits < 8 || params.word_bits > 64)
        throw std::invalid_argument("dab_tables: word size must be in [8, 64]");
    if (!params.leaf_label || !params.combine)
        throw std::invalid_argument("dab_tables: label functions required");

    auto t = std::shared_ptr<dab_tables>(new dab_tables());
    t->params_ = std::move(params);
    const auto& p = t->params_;
    t->beta_ = p.beta();
    t->phi_field_ = p.phi_size <= 1 ? 0 : ceil_log2(p.phi_size);
    t->spill_field_ = ceil_log2(2 * p.refinement());
    t->size_field_ = ceil_log2(p.n * p.word_bits * std::max<uint32_t>(t->phi_field_, 1) + 1);
    if (2 + 2ull * t->phi_field_ + 2ull * t->spill_field_ + 2ull * t->size_field_ >
        t->record_bits())
        throw std::invalid_argument("dab_tables: relaxed record fields exceed 6*beta*w bits");

    uint32_t depth = floor_log2(p.n);
    t->levels_.resize(depth + 1);
    t->level_labels_.resize(depth + 1);
    uint64_t r = p.refinement();

    // leaves
    t->leaf_rank_.assign(p.sigma_size, 0);
    for (symbol_t s = 0; s < p.sigma_size; ++s) {
        label_t phi = p.leaf_label(s);
        if (phi >= p.phi_size) throw std::invalid_argument("dab_tables: leaf label outside Phi");
        t->levels_[0][phi].symbols.push_back(s);
    }
    for (auto& [phi, e] : t->levels_[0]) {
        std::sort(e.symbols.begin(), e.symbols.end());
        for (uint32_t i = 0; i < e.symbols.size(); ++i) t->leaf_rank_[e.symbols[i]] = i;
        e.count = static_cast<unsigned long>(e.symbols.size());
        e.leaf = small_set_params(e.symbols.size(), r);
        e.spill_universe = e.leaf.spill_universe;
        e.mem = e.leaf.mem_bits;
        e.m_left = 0;
        e.m_max = e.mem;
        t->level_labels_[0].push_back(phi);
    }

    // internal levels, bottom up
    for (uint32_t lv = 1; lv <= depth; ++lv) {
        uint64_t size = uint64_t(1) << lv;
        auto& below = t->levels_[lv - 1];
        auto& here = t->levels_[lv];
        for (auto& [phi1, e1] : below)
            for (auto& [phi2, e2] : below) {
                label_t phi = p.combine(phi1, phi2, size);
                if (phi >= p.phi_size)
                    throw std::invalid_argument("dab_tables: combine label outside Phi");
                auto& e = here[phi];
                e.count += e1.count * e2.count;
                e.pairs.push_back({phi1, phi2});
            }
        for (auto& [phi, e] : here) {
            std::sort(e.pairs.begin(), e.pairs.end());
            std::vector<fusion_item> items;
            std::vector<mpz_class> weights;
            items.reserve(e.pairs.size());
            e.m_max = 0;
            for (auto [phi1, phi2] : e.pairs)
                e.m_max = std::max(e.m_max, below.at(phi1).mem + below.at(phi2).mem);
            uint64_t guard = 4ull * t->beta_ * p.word_bits;
            e.m_left = e.m_max > guard ? e.m_max - guard : 0;
            for (uint32_t i = 0; i < e.pairs.size(); ++i) {
                auto [phi1, phi2] = e.pairs[i];
                const auto& e1 = below.at(phi1);
                const auto& e2 = below.at(phi2);
                uint64_t mcat = e1.mem + e2.mem;
                items.push_back({static_cast<uint32_t>(mcat > e.m_left ? mcat - e.m_left : 0),
                                 e1.spill_universe * e2.spill_universe});
                weights.push_back(e1.count * e2.count);
                e.pair_idx[{phi1, phi2}] = i;
            }
            e.fusion = std::make_unique<fusion_code>(std::move(items),
                                                     perturb(weights, e.count, r), r);
            e.mem = e.m_left + e.fusion->mem_bits();
            e.spill_universe = e.fusion->spill_universe();
            // encode/decode values must fit the bounded multiword width:
            // M* + log K* <= H + 4/r with H <= 4*beta*w + 2 log|Phi| + 2 log(2r) + 1
            // (log N <= 2 log|Phi| + M_max + 2 log 2r since N_i <= K_i 2^{M_i})
            uint64_t width = e.fusion->mem_bits() + ceil_log2(e.fusion->spill_universe() + 1);
            uint64_t cap = std::max<uint64_t>((4ull * t->beta_ + 2) * p.word_bits,
                                              4ull * t->beta_ * p.word_bits +
                                                  2ull * t->phi_field_ +
                                                  3ull * t->spill_field_ + 3);
            if (width > cap)
                throw std::logic_error("dab_tables: fusion values exceed the multiword cap");
            t->level_labels_[lv].push_back(phi);
        }
    }
    return t;
}

const dab_tables::entry& dab_tables::at(uint64_t size, label_t phi) const {
    if (!is_pow2(size) || floor_log2(size) >= levels_.size())
        throw std::out_of_range("dab_tables: bad subtree size");
    const auto& lv = levels_[floor_log2(size)];
    auto it = lv.find(phi);
    if (it == lv.end()) throw std::out_of_range("dab_tables: label not realizable at this size");
    return it->second;
}

bool dab_tables::realizable(uint64_t size, label_t phi) const {
    if (!is_pow2(size) || floor_log2(size) >= levels_.size()) return false;
    return levels_[floor_log2(size)].count(phi) != 0;
}
const mpz_class& dab_tables::count(uint64_t size, label_t phi) const { return at(size, phi).count; }
uint64_t dab_tables::spill_universe(uint64_t size, label_t phi) const {
    return at(size, phi).spill_universe;
}
uint64_t dab_tables::mem_bits(uint64_t size, label_t phi) const { return at(size, phi).mem; }
uint64_t dab_tables::m_left(uint64_t size, label_t phi) const { return at(size, phi).m_left; }
uint64_t dab_tables::m_max(uint64_t size, label_t phi) const { return at(size, phi).m_max; }
const fusion_code& dab_tables::fusion(uint64_t size, label_t phi) const {
    const auto& e = at(size, phi);
    if (!e.fusion) throw std::out_of_range("dab_tables: no fusion code at leaves");
    return *e.fusion;
}
const std::vector<std::pair<label_t, label_t>>& dab_tables::pairs(uint64_t size,
                                                                  label_t phi) const {
    return at(size, phi).pairs;
}
uint32_t dab_tables::pair_index(uint64_t size, label_t phi, label_t phi1, label_t phi2) const {
    const auto& e = at(size, phi);
    auto it = e.pair_idx.find({phi1, phi2});
    if (it == e.pair_idx.end()) throw std::out_of_range("dab_tables: pair not realizable");
    return it->second;
}
const small_set_code& dab_tables::leaf_code(label_t phi) const { return at(1, phi).leaf; }
const std::vector<symbol_t>& dab_tables::leaf_symbols(label_t phi) const {
    return at(1, phi).symbols;
}
uint32_t dab_tables::leaf_rank(symbol_t s) const {
    if (s >= leaf_rank_.size()) throw std::out_of_range("dab_tables: symbol out of range");
    return leaf_rank_[s];
}
const std::vector<label_t>& dab_tables::labels_at(uint64_t size) const {
    if (!is_pow2(size) || floor_log2(size) >= level_labels_.size())
        throw std::out_of_range("dab_tables: bad subtree size");
    return level_labels_[floor_log2(size)];
}
uint64_t dab_tables::relax_threshold() const {
    return (record_bits() + 1) * floor_log2(params_.n);
}

// ---------------------------------------------------------------------------
// shared node-layout helpers
// ---------------------------------------------------------------------------

namespace {

struct child_info {
    label_t phi = 0;
    bool relaxed = false;
    uint64_t spill = 0;
    uint64_t mem_bits = 0;
    uint64_t inc = 0;  // trailing mem_bits % w bits
};

// scheme choice for an internal node with child states known
bool choose_relaxed(const dab_tables& t, uint64_t size, label_t phi, const child_info ch[2]) {
    if (ch[0].relaxed || ch[1].relaxed) return true;
    uint64_t mcat = ch[0].mem_bits + ch[1].mem_bits;
    return mcat + t.relax_threshold() < t.m_left(size, phi);
}

bit_buf make_record(const dab_tables& t, const child_info ch[2]) {
    bit_buf rec(t.record_bits());
    uint64_t pos = 0;
    rec.set_bit(pos++, ch[0].relaxed);
    rec.set_bit(pos++, ch[1].relaxed);
    for (int i = 0; i < 2; ++i) {
        rec.set_bits(pos, t.phi_field_bits(), ch[i].phi);
        pos += t.phi_field_bits();
    }
    for (int i = 0; i < 2; ++i) {
        rec.set_bits(pos, t.spill_field_bits(), ch[i].relaxed ? 0 : ch[i].spill);
        pos += t.spill_field_bits();
    }
    for (int i = 0; i < 2; ++i) {
        if (!ch[i].relaxed) continue;
        if (bit_length(ch[i].mem_bits) > t.size_field_bits())
            throw std::logic_error("dabtree: relaxed size field overflow");
        rec.set_bits(pos, t.size_field_bits(), ch[i].mem_bits);
        pos += t.size_field_bits();
    }
    return rec;
}

// fills phi/relaxed/spill/mem_bits (incomplete words left to the caller)
void parse_record(const dab_tables& t, uint64_t child_size, const bit_buf& rec, child_info ch[2]) {
    uint64_t pos = 0;
    ch[0].relaxed = rec.get_bit(pos++);
    ch[1].relaxed = rec.get_bit(pos++);
    for (int i = 0; i < 2; ++i) {
        ch[i].phi = static_cast<label_t>(rec.get_bits(pos, t.phi_field_bits()));
        pos += t.phi_field_bits();
    }
    for (int i = 0; i < 2; ++i) {
        ch[i].spill = rec.get_bits(pos, t.spill_field_bits());
        pos += t.spill_field_bits();
    }
    for (int i = 0; i < 2; ++i) {
        if (!ch[i].relaxed) {
            ch[i].mem_bits = t.mem_bits(child_size, ch[i].phi);
            continue;
        }
        ch[i].spill = 0;
        ch[i].mem_bits = rec.get_bits(pos, t.size_field_bits());
        pos += t.size_field_bits();
    }
}

uint64_t combine_spills(const dab_tables& t, uint64_t child_size, const child_info ch[2]) {
    return ch[0].spill * t.spill_universe(child_size, ch[1].phi) + ch[1].spill;
}

struct node_ctx {
    uint64_t size = 1;
    label_t phi = 0;
    bool relaxed = false;
    uint64_t mem_bits = 0;
    uint64_t spill = 0;
    uint64_t cut = 0;  // succinct: M_left; relaxed: M_cat
    child_info ch[2];
    bit_buf m_right;  // succinct: decoded y_m; relaxed: empty
    int child_taken = -1;

    uint64_t mcat_bits() const { return ch[0].mem_bits + ch[1].mem_bits; }
    adapter_key key(uint32_t w) const { return {ch[0].mem_bits / w, ch[1].mem_bits / w}; }
};

// new-content patch for one node, handed to its parent
struct child_patch {
    label_t phi = 0;
    bool relaxed = false;
    uint64_t spill = 0;
    uint64_t mem_bits = 0;
    std::map<uint64_t, uint64_t> word_writes;  // 1-based word index -> value
    uint64_t suffix_start = 0;                 // w-aligned bit offset
    bit_buf suffix;                            // bits [suffix_start, mem_bits)
};

}  // namespace

// ---------------------------------------------------------------------------
// walker: path state + Algorithm-2 style bit access
// ---------------------------------------------------------------------------

struct walker {
    const dab_tables& t;
    const dab_state& s;
    std::vector<node_ctx> path;
    access_stats* astats = nullptr;

    explicit walker(const dab_state& st) : t(st.tables()), s(st) {}

    uint32_t w() const { return t.w(); }

    void count_read(size_t level) {
        if (astats) {
            if (astats->word_reads_per_level.size() <= level)
                astats->word_reads_per_level.resize(level + 1, 0);
            ++astats->word_reads_per_level[level];
        }
    }

    // --- reads of a node's memory --------------------------------------

    uint64_t root_read(uint64_t lo, unsigned len) {
        if (len == 0) return 0;
        uint64_t complete = s.vm().size() * w();
        uint64_t res = 0;
        unsigned got = 0;
        while (got < len) {
            uint64_t at = lo + got;
            unsigned take;
            uint64_t piece;
            if (at < complete) {
                uint64_t j = at / w() + 1;
                unsigned off = static_cast<unsigned>(at % w());
                take = std::min<unsigned>(len - got, w() - off);
                count_read(0);
                piece = (s.vm().read(j) >> off) & low_mask(take);
            } else {
                unsigned off = static_cast<unsigned>(at - complete);
                take = len - got;
                piece = (s.incomplete_value() >> off) & low_mask(take);
            }
            res |= piece << got;
            got += take;
        }
        return res;
    }

    // bits of child `side`'s memory under node path[pd]
    uint64_t read_child_mem(size_t pd, int side, uint64_t lo, unsigned len) {
        if (len == 0) return 0;
        const node_ctx& u = path[pd];
        const child_info& ci = u.ch[side];
        uint64_t complete = (ci.mem_bits / w()) * w();
        uint64_t res = 0;
        unsigned got = 0;
        while (got < len) {
            uint64_t at = lo + got;
            unsigned take;
            uint64_t piece;
            if (at < complete) {
                uint64_t j = at / w() + 1;
                unsigned off = static_cast<unsigned>(at % w());
                take = std::min<unsigned>(len - got, w() - off);
                uint32_t q = t.adapters().get(u.key(w())).pos(side + 1, static_cast<uint32_t>(j));
                count_read(pd + 1);
                piece = read_mcat(pd, uint64_t(q - 1) * w() + off, take);
            } else {
                unsigned off = static_cast<unsigned>(at - complete);
                take = len - got;
                piece = (ci.inc >> off) & low_mask(take);
            }
            res |= piece << got;
            got += take;
        }
        return res;
    }

    uint64_t read_mem(size_t d, uint64_t lo, unsigned len) {
        if (d == 0) return root_read(lo, len);
        return read_child_mem(d - 1, path[d - 1].child_taken, lo, len);
    }

    // bits of the concatenated memory of node path[d]
    uint64_t read_mcat(size_t d, uint64_t lo, unsigned len) {
        if (len == 0) return 0;
        const node_ctx& u = path[d];
        uint64_t identity = std::min(u.cut, u.mcat_bits());
        uint64_t res = 0;
        unsigned got = 0;
        while (got < len) {
            uint64_t at = lo + got;
            unsigned take;
            uint64_t piece;
            if (at < identity) {
                take = static_cast<unsigned>(std::min<uint64_t>(len - got, identity - at));
                piece = read_mem(d, at, take);
            } else {
                take = len - got;
                piece = u.m_right.get_bits(at - u.cut, take);
            }
            res |= piece << got;
            got += take;
        }
        return res;
    }

    bit_buf read_mem_range(size_t d, uint64_t lo, uint64_t len) {
        bit_buf out(len);
        uint64_t got = 0;
        while (got < len) {
            unsigned take = static_cast<unsigned>(std::min<uint64_t>(64, len - got));
            out.set_bits(got, take, read_mem(d, lo + got, take));
            got += take;
        }
        return out;
    }

    // --- opening nodes ---------------------------------------------------

    // path[d]'s basic fields are set; decode its tail and children info
    void open_common(size_t d) {
        node_ctx& u = path[d];
        uint64_t half = u.size / 2;
        if (!u.relaxed) {
            const fusion_code& fc = t.fusion(u.size, u.phi);
            bit_buf m_star = read_mem_range(d, u.mem_bits - fc.mem_bits(), fc.mem_bits());
            auto dec = fc.decode(u.spill, m_star);
            auto [phi1, phi2] = t.pairs(u.size, u.phi)[dec.x];
            u.ch[0] = {phi1, false, 0, t.mem_bits(half, phi1), 0};
            u.ch[1] = {phi2, false, 0, t.mem_bits(half, phi2), 0};
            uint64_t k2 = t.spill_universe(half, phi2);
            u.ch[0].spill = dec.y_k / k2;
            u.ch[1].spill = dec.y_k % k2;
            u.cut = t.m_left(u.size, u.phi);
            u.m_right = std::move(dec.y_m);
        } else {
            bit_buf rec = read_mem_range(d, u.mem_bits - t.record_bits(), t.record_bits());
            parse_record(t, half, rec, u.ch);
            u.cut = u.mem_bits - t.record_bits();  // = M_cat
            u.m_right = bit_buf();
        }
        // recover both children's incomplete words from the concatenated memory
        uint64_t lw = (u.ch[0].mem_bits / w() + u.ch[1].mem_bits / w()) * w();
        uint32_t w0 = static_cast<uint32_t>(u.ch[0].mem_bits % w());
        uint32_t w1 = static_cast<uint32_t>(u.ch[1].mem_bits % w());
        u.ch[0].inc = read_mcat(d, lw, w0);
        u.ch[1].inc = read_mcat(d, lw + w0, w1);
    }

    void open_root() {
        node_ctx u;
        u.size = t.params().n;
        u.phi = s.root_label();
        u.relaxed = s.root_relaxed();
        u.mem_bits = s.node_mem_bits();
        u.spill = s.root_spill();
        path.push_back(std::move(u));
        open_common(0);
    }

    // requires path[pd].child_taken set; child must be internal (size >= 2)
    void open_child(size_t pd) {
        const node_ctx& parent = path[pd];
        const child_info& ci = parent.ch[parent.child_taken];
        node_ctx u;
        u.size = parent.size / 2;
        u.phi = ci.phi;
        u.relaxed = ci.relaxed;
        u.mem_bits = ci.mem_bits;
        u.spill = ci.spill;
        path.push_back(std::move(u));
        open_common(pd + 1);
    }

    // leaf symbol of side `side` under path[pd] (node of size 2)
    symbol_t read_leaf(size_t pd, int side) {
        const child_info& ci = path[pd].ch[side];
        const small_set_code& code = t.leaf_code(ci.phi);
        uint64_t m = read_child_mem(pd, side, 0, code.mem_bits);
        uint64_t u = small_set_decode(code, ci.spill, m);
        return t.leaf_symbols(ci.phi)[u];
    }
};

// ---------------------------------------------------------------------------
// fresh encoding (bottom-up, Steps 1-4 + scheme selection)
// ---------------------------------------------------------------------------

namespace {

struct encoded_node {
    bit_buf mem;
    label_t phi = 0;
    uint64_t spill = 0;
    bool relaxed = false;
};

child_info info_of(const encoded_node& e, uint32_t w) {
    child_info ci{e.phi, e.relaxed, e.spill, e.mem.size(), 0};
    uint64_t lw = (ci.mem_bits / w) * w;
    ci.inc = e.mem.get_bits(lw, static_cast<unsigned>(ci.mem_bits - lw));
    return ci;
}

encoded_node encode_node(const dab_tables& t, std::span<const symbol_t> a) {
    uint32_t w = t.w();
    if (a.size() == 1) {
        symbol_t s = a[0];
        if (s >= t.params().sigma_size) throw std::out_of_range("encode: symbol out of range");
        label_t phi = t.params().leaf_label(s);
        const auto& code = t.leaf_code(phi);
        auto [k, m] = small_set_encode(code, t.leaf_rank(s));
        encoded_node out;
        out.phi = phi;
        out.spill = k;
        out.mem = bit_buf(code.mem_bits);
        if (code.mem_bits) out.mem.set_bits(0, code.mem_bits, m);
        return out;
    }
    uint64_t half = a.size() / 2;
    encoded_node left = encode_node(t, a.subspan(0, half));
    encoded_node right = encode_node(t, a.subspan(half));
    uint64_t size = a.size();
    label_t phi = t.params().combine(left.phi, right.phi, size);

    child_info ch[2] = {info_of(left, w), info_of(right, w)};
    // Step 1: adapter layout plus the two incomplete words at the end
    adapter_key key{ch[0].mem_bits / w, ch[1].mem_bits / w};
    uint64_t mcat_bits = ch[0].mem_bits + ch[1].mem_bits;
    bit_buf mcat(mcat_bits);
    const adapter_map& sigma = t.adapters().get(key);
    const bit_buf* mems[2] = {&left.mem, &right.mem};
    for (int i = 0; i < 2; ++i)
        for (uint64_t j = 1; j <= (i == 0 ? key.l1 : key.l2); ++j) {
            uint32_t q = sigma.pos(i + 1, static_cast<uint32_t>(j));
            mcat.copy_in(uint64_t(q - 1) * w, *mems[i], (j - 1) * w, w);
        }
    uint64_t lw = key.total() * w;
    mcat.copy_in(lw, left.mem, key.l1 * w, ch[0].mem_bits - key.l1 * w);
    mcat.copy_in(lw + (ch[0].mem_bits - key.l1 * w), right.mem, key.l2 * w,
                 ch[1].mem_bits - key.l2 * w);

    encoded_node out;
    out.phi = phi;
    out.relaxed = choose_relaxed(t, size, phi, ch);
    if (out.relaxed) {
        out.mem = std::move(mcat);
        out.mem.append(make_record(t, ch));
        out.spill = 0;
        return out;
    }
    // Steps 2-4: cut at M_left, fuse labels/spills/m_right, concatenate
    uint64_t cut = t.m_left(size, phi);
    const fusion_code& fc = t.fusion(size, phi);
    uint32_t x = t.pair_index(size, phi, ch[0].phi, ch[1].phi);
    bit_buf m_right;
    if (mcat_bits > cut) m_right = mcat.slice(cut, mcat_bits - cut);
    auto enc = fc.encode(x, m_right, combine_spills(t, half, ch));
    out.mem = mcat_bits >= cut ? mcat.slice(0, cut) : std::move(mcat);
    out.mem.resize(cut);  // zero padding when M_cat < M_left
    out.mem.append(enc.mem);
    out.spill = enc.spill;
    if (out.mem.size() != t.mem_bits(size, phi))
        throw std::logic_error("encode: memory size disagrees with tables");
    return out;
}

}  // namespace

dab_state dab_state::encode(std::shared_ptr<const dab_tables> t, std::span<const symbol_t> a) {
    virtual_memory vm(t->w());
    return encode(std::move(t), a, std::move(vm));
}

dab_state dab_state::encode(std::shared_ptr<const dab_tables> t, std::span<const symbol_t> a,
                            virtual_memory vm) {
    if (a.size() != t->params().n) throw std::invalid_argument("encode: |A| != n");
    if (vm.word_bits() != t->w()) throw std::invalid_argument("encode: VM word size mismatch");
    encoded_node root = encode_node(*t, a);
    dab_state st(std::move(t), std::move(vm));
    st.phi_ = root.phi;
    st.relaxed_ = root.relaxed;
    st.spill_ = root.spill;
    st.mem_bits_ = root.mem.size();
    uint32_t w = st.t_->w();
    uint64_t words = st.mem_bits_ / w;
    while (st.vm_.size() > words) st.vm_.resize(-1);
    while (st.vm_.size() < words) st.vm_.resize(+1);
    for (uint64_t j = 1; j <= words; ++j) st.vm_.write(j, root.mem.get_bits((j - 1) * w, w));
    st.inc_ = root.mem.get_bits(words * w, static_cast<unsigned>(st.mem_bits_ - words * w));
    return st;
}

dab_state dab_state::restore(std::shared_ptr<const dab_tables> t, virtual_memory vm, label_t phi,
                             bool relaxed, uint64_t spill, uint64_t mem_bits, uint64_t inc) {
    if (vm.word_bits() != t->w()) throw std::invalid_argument("restore: VM word size mismatch");
    if (vm.size() != mem_bits / t->w())
        throw std::invalid_argument("restore: VM length disagrees with the bit count");
    dab_state st(std::move(t), std::move(vm));
    st.phi_ = phi;
    st.relaxed_ = relaxed;
    st.spill_ = spill;
    st.mem_bits_ = mem_bits;
    st.inc_ = inc;
    return st;
}

uint64_t dab_state::total_bits() const {
    uint64_t extra = 1;  // scheme bit
    if (!relaxed_) extra += ceil_log2(t_->spill_universe(t_->params().n, phi_));
    return mem_bits_ + extra;
}

dab_state::logical_state dab_state::logical() const {
    logical_state ls;
    ls.words.reserve(vm_.size());
    for (uint64_t j = 1; j <= vm_.size(); ++j) ls.words.push_back(vm_.read(j));
    ls.inc = inc_;
    ls.inc_width = incomplete_width();
    ls.relaxed = relaxed_;
    ls.spill = spill_;
    ls.label = phi_;
    ls.total = total_bits();
    return ls;
}

std::string dab_state::logical_key() const {
    auto ls = logical();
    std::string out;
    out.reserve(ls.words.size() * 8 + 48);
    auto put = [&out](uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); };
    for (uint64_t v : ls.words) put(v);
    put(ls.inc);
    put(ls.inc_width);
    put(ls.relaxed ? 1 : 0);
    put(ls.spill);
    put(ls.label);
    put(ls.total);
    return out;
}

// ---------------------------------------------------------------------------
// queries
// ---------------------------------------------------------------------------

uint64_t dab_state::query(const navigator_t& nav, const finalizer_t& fin, uint64_t acc0) const {
    uint64_t n = t_->params().n;
    if (n == 1) {
        const auto& code = t_->leaf_code(phi_);
        walker wk(*this);
        uint64_t m = wk.root_read(0, code.mem_bits);
        uint64_t u = small_set_decode(code, spill_, m);
        return fin(acc0, t_->leaf_symbols(phi_)[u]);
    }
    walker wk(*this);
    wk.open_root();
    uint64_t acc = acc0;
    for (size_t d = 0;; ++d) {
        node_ctx& u = wk.path[d];
        auto [choice, acc2] = nav(acc, u.size, u.ch[0].phi, u.ch[1].phi);
        if (choice != 0 && choice != 1)
            throw std::invalid_argument("query: navigator returned an invalid child");
        acc = acc2;
        u.child_taken = choice;
        if (u.size == 2) return fin(acc, wk.read_leaf(d, choice));
        wk.open_child(d);
    }
}

symbol_t dab_state::get(uint64_t i) const {
    if (i == 0 || i > t_->params().n) throw std::out_of_range("get: leaf index out of range");
    uint64_t idx = i - 1;
    auto nav = [&idx](uint64_t acc, uint64_t n_u, label_t, label_t) -> std::pair<int, uint64_t> {
        if (idx < n_u / 2) return {0, acc};
        idx -= n_u / 2;
        return {1, acc};
    };
    auto fin = [](uint64_t, symbol_t s) -> uint64_t { return s; };
    return static_cast<symbol_t>(query(nav, fin));
}

// ---------------------------------------------------------------------------
// update
// ---------------------------------------------------------------------------

namespace {

// reads a <=64-bit slice of the taken child's NEW memory through a patch,
// falling back to the old physical placement for untouched words
struct patch_reader {
    walker& wk;
    size_t d;  // parent level
    int side;
    const child_patch& cp;

    uint64_t read(uint64_t lo, unsigned len) const {
        if (len == 0) return 0;
        uint64_t res = 0;
        unsigned got = 0;
        uint32_t w = wk.w();
        const node_ctx& u = wk.path[d];
        const adapter_map& old_map = wk.t.adapters().get(u.key(w));
        while (got < len) {
            uint64_t at = lo + got;
            unsigned take;
            uint64_t piece;
            if (at >= cp.suffix_start) {
                take = len - got;
                piece = cp.suffix.get_bits(at - cp.suffix_start, take);
            } else {
                uint64_t j = at / w + 1;
                unsigned off = static_cast<unsigned>(at % w);
                take = std::min<unsigned>(
                    len - got,
                    static_cast<unsigned>(std::min<uint64_t>(w - off, cp.suffix_start - at)));
                auto it = cp.word_writes.find(j);
                if (it != cp.word_writes.end()) {
                    piece = (it->second >> off) & low_mask(take);
                } else {
                    uint32_t q = old_map.pos(side + 1, static_cast<uint32_t>(j));
                    piece = wk.read_mcat(d, uint64_t(q - 1) * w + off, take);
                }
            }
            res |= piece << got;
            got += take;
        }
        return res & low_mask(len);
    }
};

}  // namespace

struct tree_updater {
    walker& wk;
    update_stats& stats;

    // integrate the patch for path[d]'s taken child, producing path[d]'s patch
    child_patch integrate(size_t d, const child_patch& cp) {
        const dab_tables& t = wk.t;
        uint32_t w = wk.w();
        node_ctx& u = wk.path[d];
        int c = u.child_taken;
        int sb = 1 - c;

        patch_reader creader{wk, d, c, cp};

        child_info chn[2];
        chn[sb] = u.ch[sb];
        chn[c] = {cp.phi, cp.relaxed, cp.spill, cp.mem_bits, 0};
        uint64_t lcw = (cp.mem_bits / w) * w;
        chn[c].inc = creader.read(lcw, static_cast<unsigned>(cp.mem_bits - lcw));

        label_t phi2 = t.params().combine(chn[0].phi, chn[1].phi, u.size);
        bool relaxed2 = choose_relaxed(t, u.size, phi2, chn);
        uint64_t mcat2 = chn[0].mem_bits + chn[1].mem_bits;
        uint64_t cut2 = relaxed2 ? mcat2 : t.m_left(u.size, phi2);
        uint64_t mem2 = relaxed2 ? mcat2 + t.record_bits() : t.mem_bits(u.size, phi2);

        adapter_key key_old = u.key(w);
        adapter_key key_new{chn[0].mem_bits / w, chn[1].mem_bits / w};

        // issue adapter deltas step by step (instrumented cost)
        {
            adapter_key cur = key_old;
            uint64_t lc_old = c == 0 ? key_old.l1 : key_old.l2;
            uint64_t lc_new = c == 0 ? key_new.l1 : key_new.l2;
            bool grow = lc_new > lc_old;
            uint64_t steps = grow ? lc_new - lc_old : lc_old - lc_new;
            for (uint64_t sidx = 0; sidx < steps; ++sidx) {
                auto delta = t.adapters().delta(cur, {static_cast<uint8_t>(c + 1), grow});
                stats.relocated_words += delta.moves.size();
                if (grow)
                    ++stats.allocations;
                else
                    ++stats.releases;
                cur = delta.to_key;
            }
        }

        const adapter_map& map_old = t.adapters().get(key_old);
        const adapter_map& map_new = t.adapters().get(key_new);
        uint64_t l_old = key_old.total(), l_new = key_new.total();

        // resolver over the new concatenated memory
        auto mcat_new = [&](uint64_t lo, unsigned len) -> uint64_t {
            uint64_t res = 0;
            unsigned got = 0;
            while (got < len) {
                uint64_t at = lo + got;
                unsigned take;
                uint64_t piece;
                if (at < l_new * w) {
                    uint64_t q = at / w + 1;
                    unsigned off = static_cast<unsigned>(at % w);
                    take = std::min<unsigned>(len - got, w - off);
                    adapter_elem e = map_new.elem(static_cast<uint32_t>(q));
                    int side = e.side - 1;
                    uint64_t bit = uint64_t(e.index - 1) * w + off;
                    if (side == c) {
                        piece = creader.read(bit, take);
                    } else {
                        uint32_t qo = map_old.pos(e.side, e.index);
                        piece = wk.read_mcat(d, uint64_t(qo - 1) * w + off, take);
                    }
                } else {
                    uint64_t at2 = at - l_new * w;
                    uint32_t w0 = static_cast<uint32_t>(chn[0].mem_bits % w);
                    uint32_t w1 = static_cast<uint32_t>(chn[1].mem_bits % w);
                    if (at2 < w0) {
                        take = std::min<unsigned>(len - got, w0 - static_cast<unsigned>(at2));
                        piece = (chn[0].inc >> at2) & low_mask(take);
                    } else {
                        unsigned off = static_cast<unsigned>(at2 - w0);
                        take = std::min<unsigned>(len - got, w1 - off);
                        piece = (chn[1].inc >> off) & low_mask(take);
                    }
                }
                res |= piece << got;
                got += take;
            }
            return res & low_mask(len);
        };

        child_patch out;
        out.phi = phi2;
        out.relaxed = relaxed2;
        out.mem_bits = mem2;
        out.suffix_start = (std::min({u.cut, cut2, l_old * w, l_new * w}) / w) * w;

        // dirty word positions of the new layout, below the suffix region
        std::set<uint64_t> dirty;
        for (uint64_t q = 1; q <= l_new; ++q) {
            if (q > l_old ||
                map_new.elem(static_cast<uint32_t>(q)) != map_old.elem(static_cast<uint32_t>(q)))
                dirty.insert(q);
        }
        uint64_t lc_new_words = c == 0 ? key_new.l1 : key_new.l2;
        for (const auto& [j, v] : cp.word_writes)
            if (j <= lc_new_words) dirty.insert(map_new.pos(c + 1, static_cast<uint32_t>(j)));
        for (uint64_t j = cp.suffix_start / w + 1; j <= lc_new_words; ++j)
            dirty.insert(map_new.pos(c + 1, static_cast<uint32_t>(j)));

        for (uint64_t q : dirty) {
            if (q * w <= out.suffix_start) {
                out.word_writes[q] = mcat_new((q - 1) * w, w);
                ++stats.word_writes;
            }
            // positions at or beyond the suffix start are rebuilt below
        }

        // assemble the suffix [suffix_start, mem2)
        uint64_t identity2 = std::min(cut2, mcat2);
        bit_buf suffix(mem2 - out.suffix_start);
        uint64_t pos = out.suffix_start;
        while (pos < identity2) {
            unsigned take = static_cast<unsigned>(std::min<uint64_t>(64, identity2 - pos));
            suffix.set_bits(pos - out.suffix_start, take, mcat_new(pos, take));
            pos += take;
        }
        // zero padding over [mcat2, cut2) is implicit in the zeroed buffer
        if (!relaxed2) {
            const fusion_code& fc = t.fusion(u.size, phi2);
            bit_buf m_right2;
            if (mcat2 > cut2) {
                m_right2 = bit_buf(mcat2 - cut2);
                uint64_t got = 0;
                while (got < m_right2.size()) {
                    unsigned take =
                        static_cast<unsigned>(std::min<uint64_t>(64, m_right2.size() - got));
                    m_right2.set_bits(got, take, mcat_new(cut2 + got, take));
                    got += take;
                }
            }
            uint32_t x = t.pair_index(u.size, phi2, chn[0].phi, chn[1].phi);
            auto enc = fc.encode(x, m_right2, combine_spills(t, u.size / 2, chn));
            suffix.copy_in(cut2 - out.suffix_start, enc.mem, 0, enc.mem.size());
            out.spill = enc.spill;
        } else {
            bit_buf rec = make_record(t, chn);
            suffix.copy_in(cut2 - out.suffix_start, rec, 0, rec.size());
            out.spill = 0;
        }
        out.suffix = std::move(suffix);
        stats.suffix_words += ceil_div(out.suffix.size(), w);
        return out;
    }
};

namespace {

// apply a finished root patch to the state
void apply_root_patch(virtual_memory& vm, const child_patch& cp, update_stats& stats,
                      label_t& phi, bool& relaxed, uint64_t& spill, uint64_t& mem_bits,
                      uint64_t& inc) {
    uint32_t w = vm.word_bits();
    uint64_t words = cp.mem_bits / w;
    while (vm.size() > words) {
        vm.resize(-1);
        ++stats.releases;
    }
    while (vm.size() < words) {
        vm.resize(+1);
        ++stats.allocations;
    }
    for (const auto& [j, v] : cp.word_writes)
        if (j <= words) vm.write(j, v);
    for (uint64_t j = cp.suffix_start / w + 1; j <= words; ++j)
        vm.write(j, cp.suffix.get_bits((j - 1) * w - cp.suffix_start, w));
    inc = cp.suffix.get_bits(words * w - cp.suffix_start,
                             static_cast<unsigned>(cp.mem_bits - words * w));
    phi = cp.phi;
    relaxed = cp.relaxed;
    spill = cp.spill;
    mem_bits = cp.mem_bits;
}

}  // namespace

update_stats dab_state::update(uint64_t i, symbol_t s_new) {
    const dab_tables& t = *t_;
    uint64_t n = t.params().n;
    uint32_t w = t.w();
    if (i == 0 || i > n) throw std::out_of_range("update: leaf index out of range");
    if (s_new >= t.params().sigma_size) throw std::out_of_range("update: symbol out of range");
    update_stats stats;

    if (n == 1) {
        if (get(1) == s_new) return stats;
        label_t phi = t.params().leaf_label(s_new);
        const auto& code = t.leaf_code(phi);
        auto [k, m] = small_set_encode(code, t.leaf_rank(s_new));
        child_patch cp;
        cp.phi = phi;
        cp.relaxed = false;
        cp.spill = k;
        cp.mem_bits = code.mem_bits;
        cp.suffix_start = 0;
        cp.suffix = bit_buf(code.mem_bits);
        if (code.mem_bits) cp.suffix.set_bits(0, code.mem_bits, m);
        apply_root_patch(vm_, cp, stats, phi_, relaxed_, spill_, mem_bits_, inc_);
        return stats;
    }

    // descend by index, recording the path
    walker wk(*this);
    wk.open_root();
    uint64_t idx = i - 1;
    for (;;) {
        node_ctx& u = wk.path.back();
        int choice = idx < u.size / 2 ? 0 : 1;
        if (choice == 1) idx -= u.size / 2;
        u.child_taken = choice;
        if (u.size == 2) break;
        wk.open_child(wk.path.size() - 1);
    }
    size_t leaf_parent = wk.path.size() - 1;
    if (wk.read_leaf(leaf_parent, wk.path[leaf_parent].child_taken) == s_new) return stats;

    // leaf patch
    child_patch cp;
    {
        label_t phi = t.params().leaf_label(s_new);
        const auto& code = t.leaf_code(phi);
        auto [k, m] = small_set_encode(code, t.leaf_rank(s_new));
        cp.phi = phi;
        cp.relaxed = false;
        cp.spill = k;
        cp.mem_bits = code.mem_bits;
        cp.suffix_start = 0;
        cp.suffix = bit_buf(code.mem_bits);
        if (code.mem_bits) cp.suffix.set_bits(0, code.mem_bits, m);
    }

    tree_updater up{wk, stats};
    for (size_t d = leaf_parent + 1; d-- > 0;) cp = up.integrate(d, cp);
    apply_root_patch(vm_, cp, stats, phi_, relaxed_, spill_, mem_bits_, inc_);
    return stats;
}

// ---------------------------------------------------------------------------
// debug access surface (Algorithm 2 on explicit nodes)
// ---------------------------------------------------------------------------

namespace {

walker descend_path(const dab_state& s, std::span<const int> child_path) {
    walker wk(s);
    if (s.tables().params().n == 1) {
        if (!child_path.empty()) throw std::out_of_range("node path too deep");
        return wk;
    }
    wk.open_root();
    for (size_t d = 0; d < child_path.size(); ++d) {
        int c = child_path[d];
        if (c != 0 && c != 1) throw std::invalid_argument("bad child path");
        wk.path[d].child_taken = c;
        if (wk.path[d].size == 2) {
            if (d + 1 != child_path.size()) throw std::out_of_range("node path too deep");
            return wk;  // leaf reached; caller handles via parent ctx
        }
        wk.open_child(d);
    }
    return wk;
}

}  // namespace

uint64_t dab_state::read_node_word(std::span<const int> child_path, uint64_t j,
                                   access_stats* stats) const {
    walker wk = descend_path(*this, child_path);
    wk.astats = stats;
    size_t d = child_path.size();
    if (t_->params().n == 1) {
        if (j == 0 || j > mem_bits_ / t_->w())
            throw std::out_of_range("read_node_word: address beyond the node's length");
        return wk.root_read((j - 1) * t_->w(), t_->w());
    }
    if (d < wk.path.size()) {  // internal node (or root)
        const node_ctx& u = wk.path[d];
        if (j == 0 || j > u.mem_bits / t_->w())
            throw std::out_of_range("read_node_word: address beyond the node's length");
        return wk.read_mem(d, (j - 1) * t_->w(), t_->w());
    }
    // leaf under the last internal node
    size_t pd = wk.path.size() - 1;
    int side = wk.path[pd].child_taken;
    const child_info& ci = wk.path[pd].ch[side];
    if (j == 0 || j > ci.mem_bits / t_->w())
        throw std::out_of_range("read_node_word: address beyond the node's length");
    return wk.read_child_mem(pd, side, (j - 1) * t_->w(), t_->w());
}

void dab_state::write_node_word(std::span<const int> child_path, uint64_t j, uint64_t value) {
    uint32_t w = t_->w();
    if (value > low_mask(w)) throw std::invalid_argument("write_node_word: value too wide");
    walker wk = descend_path(*this, child_path);
    size_t d = child_path.size();
    update_stats stats;

    if (d == 0) {  // root: direct VM write
        if (j == 0 || j > mem_bits_ / w)
            throw std::out_of_range("write_node_word: address beyond the node's length");
        vm_.write(j, value);
        return;
    }
    // stage the write as a patch at level d and re-encode upward
    size_t pd = d - 1;
    int side = wk.path[pd].child_taken;
    child_info ci;
    if (d < wk.path.size()) {
        const node_ctx& u = wk.path[d];
        ci = child_info{u.phi, u.relaxed, u.spill, u.mem_bits, 0};
    } else {
        ci = wk.path[pd].ch[side];
    }
    if (j == 0 || j > ci.mem_bits / w)
        throw std::out_of_range("write_node_word: address beyond the node's length");
    child_patch cp;
    cp.phi = ci.phi;
    cp.relaxed = ci.relaxed;
    cp.spill = ci.spill;
    cp.mem_bits = ci.mem_bits;
    cp.word_writes[j] = value;
    cp.suffix_start = (ci.mem_bits / w) * w;
    cp.suffix = bit_buf(ci.mem_bits - cp.suffix_start);
    if (cp.suffix.size())  // keep the node's incomplete word unchanged
        cp.suffix.set_bits(0, static_cast<unsigned>(cp.suffix.size()),
                           wk.read_child_mem(pd, side, cp.suffix_start,
                                             static_cast<unsigned>(cp.suffix.size())));
    tree_updater up{wk, stats};
    for (size_t lvl = d; lvl-- > 0;) cp = up.integrate(lvl, cp);
    apply_root_patch(vm_, cp, stats, phi_, relaxed_, spill_, mem_bits_, inc_);
}

dab_state::node_probe dab_state::probe_node(std::span<const int> child_path) const {
    walker wk = descend_path(*this, child_path);
    size_t d = child_path.size();
    if (d >= wk.path.size()) throw std::out_of_range("probe_node: leaves have no children");
    const node_ctx& u = wk.path[d];
    node_probe p;
    p.phi = u.phi;
    p.relaxed = u.relaxed;
    p.mem_bits = u.mem_bits;
    p.phi1 = u.ch[0].phi;
    p.phi2 = u.ch[1].phi;
    p.child_relaxed[0] = u.ch[0].relaxed;
    p.child_relaxed[1] = u.ch[1].relaxed;
    p.child_mem_bits[0] = u.ch[0].mem_bits;
    p.child_mem_bits[1] = u.ch[1].mem_bits;
    return p;
}

}  // namespace dab
