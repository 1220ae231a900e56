#include "dab/apps.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dab {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
    unsigned char b[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char b[sizeof(T)];
    in.read(reinterpret_cast<char*>(b), sizeof(T));
    if (!in) throw std::runtime_error("snapshot: truncated stream");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= T(b[i]) << (8 * i);
    return v;
}

void check_block_params(uint64_t n, uint64_t r) {
    if (r == 0 || !is_pow2(r)) throw std::invalid_argument("block size must be a power of two");
    if (n == 0 || n % r != 0) throw std::invalid_argument("block size must divide n");
}

struct block_registers {
    label_t phi;
    uint8_t relaxed;
    uint64_t spill;
    uint64_t mem_bits;
    uint64_t inc;
};

void save_block(std::ostream& out, const dab_state& st) {
    put_le<uint32_t>(out, st.root_label());
    put_le<uint8_t>(out, st.root_relaxed() ? 1 : 0);
    put_le<uint64_t>(out, st.root_spill());
    put_le<uint64_t>(out, st.node_mem_bits());
    put_le<uint64_t>(out, st.incomplete_value());
}

block_registers load_block(std::istream& in) {
    block_registers r;
    r.phi = get_le<uint32_t>(in);
    r.relaxed = get_le<uint8_t>(in);
    r.spill = get_le<uint64_t>(in);
    r.mem_bits = get_le<uint64_t>(in);
    r.inc = get_le<uint64_t>(in);
    return r;
}

}  // namespace

double log2_mpz(const mpz_class& v) {
    if (v <= 0) throw std::domain_error("log2_mpz: nonpositive");
    signed long exp;
    double mant = mpz_get_d_2exp(&exp, v.get_mpz_t());
    return std::log2(mant) + double(exp);
}

double log2_binomial(uint64_t n, uint64_t m) {
    if (m > n) throw std::domain_error("log2_binomial: m > n");
    mpz_class b;
    mpz_bin_uiui(b.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(m));
    return log2_mpz(b);
}

double log2_multinomial(uint64_t n, const std::vector<uint64_t>& f) {
    uint64_t sum = 0;
    mpz_class total = 1;
    for (uint64_t fi : f) {
        sum += fi;
        mpz_class c;
        mpz_bin_uiui(c.get_mpz_t(), static_cast<unsigned long>(sum),
                     static_cast<unsigned long>(fi));
        total *= c;
    }
    if (sum != n) throw std::domain_error("log2_multinomial: frequencies do not sum to n");
    return log2_mpz(total);
}

std::string space_report::to_json() const {
    nlohmann::json j;
    j["payload_bits"] = payload_bits;
    j["redundancy_bits"] = redundancy_bits;
    j["total_bits"] = total_bits;
    j["overhead_breakdown"] = {{"chunk_store_bits", chunk_store_bits},
                               {"inter_tree_bits", inter_tree_bits},
                               {"block_register_bits", block_register_bits},
                               {"block_encoding_bits", block_encoding_bits}};
    return j.dump();
}

// ---------------------------------------------------------------------------
// FID
// ---------------------------------------------------------------------------

fid_state::fid_state(uint64_t n, uint64_t block_size, uint32_t word_bits, uint32_t slack)
    : fid_state(from_bits(std::vector<uint8_t>(n, 0), block_size, word_bits, slack)) {}

fid_state fid_state::from_bits(const std::vector<uint8_t>& bits, uint64_t block_size,
                               uint32_t word_bits, uint32_t slack) {
    check_block_params(bits.size(), block_size);
    fid_state f;
    f.n_ = bits.size();
    f.r_ = block_size;
    f.slack_ = slack;
    f.tables_ = dab_tables::build(popcount_params(block_size, word_bits, slack));
    uint64_t nblocks = f.n_ / f.r_;
    // per-VM cap per the application bound: a block never exceeds r + 3 bits
    f.store_ = std::make_unique<chunk_store>(static_cast<uint32_t>(nblocks), f.r_ + 3, word_bits);
    f.blocks_.reserve(nblocks);
    std::vector<symbol_t> slice(f.r_);
    for (uint64_t b = 0; b < nblocks; ++b) {
        for (uint64_t i = 0; i < f.r_; ++i) slice[i] = bits[b * f.r_ + i] ? 1 : 0;
        f.blocks_.push_back(dab_state::encode(f.tables_, slice,
                                              virtual_memory(*f.store_, static_cast<uint32_t>(b))));
    }
    f.rebuild_inter();
    return f;
}

void fid_state::rebuild_inter() {
    inter_ = fenwick(blocks_.size());
    for (uint64_t b = 0; b < blocks_.size(); ++b)
        inter_.add(b, static_cast<int64_t>(blocks_[b].root_label()));
}

uint64_t fid_state::rank(uint64_t k) const {
    if (k > n_) throw std::out_of_range("fid rank: k out of range");
    if (k == 0) return 0;
    uint64_t b = (k - 1) / r_;
    uint64_t within = k - b * r_;
    uint64_t acc = inter_.prefix(b);
    // in-block rank: descend by index, adding left-child counts when going right
    uint64_t idx = within - 1;
    auto nav = [&idx](uint64_t a, uint64_t n_u, label_t phi1, label_t) -> std::pair<int, uint64_t> {
        if (idx < n_u / 2) return {0, a};
        idx -= n_u / 2;
        return {1, a + phi1};
    };
    auto fin = [](uint64_t a, symbol_t s) { return a + s; };
    if (r_ == 1) return acc + blocks_[b].get(1);
    return acc + blocks_[b].query(nav, fin);
}

uint64_t fid_state::select(uint64_t k) const {
    if (k == 0 || k > ones()) throw std::out_of_range("fid select: k exceeds the number of ones");
    uint64_t b = inter_.lower_bound(k);
    uint64_t rem = k - inter_.prefix(b);
    // in-block select: state packs (remaining k, position offset)
    auto nav = [](uint64_t st, uint64_t n_u, label_t phi1, label_t) -> std::pair<int, uint64_t> {
        uint64_t kk = st >> 32, pos = st & 0xFFFFFFFF;
        if (kk <= phi1) return {0, st};
        return {1, ((kk - phi1) << 32) | (pos + n_u / 2)};
    };
    auto fin = [](uint64_t st, symbol_t) { return st & 0xFFFFFFFF; };
    uint64_t within = r_ == 1 ? 0 : blocks_[b].query(nav, fin, rem << 32);
    return b * r_ + within + 1;
}

bool fid_state::get_bit(uint64_t k) const {
    if (k == 0 || k > n_) throw std::out_of_range("fid get: k out of range");
    uint64_t b = (k - 1) / r_;
    return blocks_[b].get(k - b * r_) != 0;
}

update_stats fid_state::update(uint64_t k, bool bit) {
    if (k == 0 || k > n_) throw std::out_of_range("fid update: k out of range");
    uint64_t b = (k - 1) / r_;
    uint64_t within = k - b * r_;
    label_t before = blocks_[b].root_label();
    update_stats st = blocks_[b].update(within, bit ? 1 : 0);
    label_t after = blocks_[b].root_label();
    if (after != before) inter_.add(b, int64_t(after) - int64_t(before));
    return st;
}

space_report fid_state::report() const {
    space_report rep;
    rep.chunk_store_bits = store_->space().total_bits();
    // Fenwick array of B w-bit counters plus one size register
    rep.inter_tree_bits = (blocks_.size() + 1) * tables_->w();
    // four w-bit registers per block: label, total bit count, incomplete
    // word, spill + scheme flag
    rep.block_register_bits = 4ull * tables_->w() * blocks_.size();
    for (const auto& blk : blocks_) rep.block_encoding_bits += blk.total_bits();
    rep.total_bits = rep.chunk_store_bits + rep.inter_tree_bits + rep.block_register_bits;
    rep.payload_bits = ones() == 0 ? 0.0 : log2_binomial(n_, ones());
    rep.redundancy_bits = double(rep.total_bits) - rep.payload_bits;
    return rep;
}

void fid_state::save(std::ostream& out) const {
    out.write("DABFID1", 7);
    put_le<uint64_t>(out, n_);
    put_le<uint64_t>(out, r_);
    put_le<uint32_t>(out, tables_->w());
    put_le<uint32_t>(out, slack_);
    for (const auto& blk : blocks_) save_block(out, blk);
    store_->save(out);
}

fid_state fid_state::load(std::istream& in) {
    char magic[7];
    in.read(magic, 7);
    if (!in || std::string(magic, 7) != "DABFID1") throw std::runtime_error("snapshot: bad magic");
    uint64_t n = get_le<uint64_t>(in);
    uint64_t r = get_le<uint64_t>(in);
    uint32_t w = get_le<uint32_t>(in);
    uint32_t slack = get_le<uint32_t>(in);
    fid_state f(n, r, w, slack);
    std::vector<block_registers> regs(f.blocks_.size());
    for (auto& rg : regs) rg = load_block(in);
    *f.store_ = chunk_store::load(in);
    f.blocks_.clear();
    for (uint64_t b = 0; b < n / r; ++b)
        f.blocks_.push_back(dab_state::restore(
            f.tables_, virtual_memory(*f.store_, static_cast<uint32_t>(b)), regs[b].phi,
            regs[b].relaxed != 0, regs[b].spill, regs[b].mem_bits, regs[b].inc));
    f.rebuild_inter();
    return f;
}

// ---------------------------------------------------------------------------
// AC
// ---------------------------------------------------------------------------

namespace {

std::vector<uint64_t> decode_counts(label_t phi, uint64_t base, uint32_t sigma) {
    std::vector<uint64_t> c(sigma);
    uint64_t v = phi;
    for (uint32_t i = 0; i < sigma; ++i) {
        c[i] = v % base;
        v /= base;
    }
    return c;
}

}  // namespace

ac_state::ac_state(uint64_t n, uint64_t block_size, uint32_t sigma, uint32_t word_bits,
                   uint32_t slack)
    : ac_state(from_symbols(std::vector<symbol_t>(n, 0), block_size, sigma, word_bits, slack)) {}

ac_state ac_state::from_symbols(const std::vector<symbol_t>& a, uint64_t block_size,
                                uint32_t sigma, uint32_t word_bits, uint32_t slack) {
    check_block_params(a.size(), block_size);
    if (sigma < 2) throw std::invalid_argument("ac: alphabet must have at least 2 symbols");
    ac_state s;
    s.n_ = a.size();
    s.r_ = block_size;
    s.sigma_ = sigma;
    s.slack_ = slack;
    s.tables_ = dab_tables::build(count_vector_params(block_size, sigma, word_bits, slack));
    uint64_t nblocks = s.n_ / s.r_;
    s.store_ = std::make_unique<chunk_store>(static_cast<uint32_t>(nblocks),
                                             2 * s.r_ * ceil_log2(sigma) + 3 + word_bits,
                                             word_bits);
    s.freq_.assign(sigma, 0);
    s.blocks_.reserve(nblocks);
    std::vector<symbol_t> slice(s.r_);
    for (uint64_t b = 0; b < nblocks; ++b) {
        for (uint64_t i = 0; i < s.r_; ++i) {
            symbol_t sym = a[b * s.r_ + i];
            if (sym >= sigma) throw std::out_of_range("ac: symbol out of range");
            slice[i] = sym;
            ++s.freq_[sym];
        }
        s.blocks_.push_back(dab_state::encode(s.tables_, slice,
                                              virtual_memory(*s.store_, static_cast<uint32_t>(b))));
    }
    return s;
}

symbol_t ac_state::get(uint64_t i) const {
    if (i == 0 || i > n_) throw std::out_of_range("ac get: index out of range");
    uint64_t b = (i - 1) / r_;
    return blocks_[b].get(i - b * r_);
}

std::vector<uint64_t> ac_state::block_counts(uint64_t b) const {
    return decode_counts(blocks_.at(b).root_label(), r_ + 1, sigma_);
}

update_stats ac_state::set(uint64_t i, symbol_t s) {
    if (i == 0 || i > n_) throw std::out_of_range("ac set: index out of range");
    if (s >= sigma_) throw std::out_of_range("ac set: symbol out of range");
    uint64_t b = (i - 1) / r_;
    symbol_t old = blocks_[b].get(i - b * r_);
    update_stats st = blocks_[b].update(i - b * r_, s);
    if (old != s) {
        --freq_[old];
        ++freq_[s];
    }
    return st;
}

space_report ac_state::report() const {
    space_report rep;
    rep.chunk_store_bits = store_->space().total_bits();
    rep.inter_tree_bits = 0;  // positional access needs no inter-block aggregate
    rep.block_register_bits = 4ull * tables_->w() * blocks_.size();
    for (const auto& blk : blocks_) rep.block_encoding_bits += blk.total_bits();
    rep.total_bits = rep.chunk_store_bits + rep.inter_tree_bits + rep.block_register_bits;
    rep.payload_bits = log2_multinomial(n_, freq_);
    rep.redundancy_bits = double(rep.total_bits) - rep.payload_bits;
    return rep;
}

void ac_state::save(std::ostream& out) const {
    out.write("DABAC1", 6);
    put_le<uint64_t>(out, n_);
    put_le<uint64_t>(out, r_);
    put_le<uint32_t>(out, sigma_);
    put_le<uint32_t>(out, tables_->w());
    put_le<uint32_t>(out, slack_);
    for (uint64_t f : freq_) put_le<uint64_t>(out, f);
    for (const auto& blk : blocks_) save_block(out, blk);
    store_->save(out);
}

ac_state ac_state::load(std::istream& in) {
    char magic[6];
    in.read(magic, 6);
    if (!in || std::string(magic, 6) != "DABAC1") throw std::runtime_error("snapshot: bad magic");
    uint64_t n = get_le<uint64_t>(in);
    uint64_t r = get_le<uint64_t>(in);
    uint32_t sigma = get_le<uint32_t>(in);
    uint32_t w = get_le<uint32_t>(in);
    uint32_t slack = get_le<uint32_t>(in);
    ac_state s(n, r, sigma, w, slack);
    for (auto& f : s.freq_) f = get_le<uint64_t>(in);
    std::vector<block_registers> regs(s.blocks_.size());
    for (auto& rg : regs) rg = load_block(in);
    *s.store_ = chunk_store::load(in);
    s.blocks_.clear();
    for (uint64_t b = 0; b < n / r; ++b)
        s.blocks_.push_back(dab_state::restore(
            s.tables_, virtual_memory(*s.store_, static_cast<uint32_t>(b)), regs[b].phi,
            regs[b].relaxed != 0, regs[b].spill, regs[b].mem_bits, regs[b].inc));
    return s;
}

}  // namespace dab
