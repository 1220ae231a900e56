#ifndef DAB_APPS_HPP
#define DAB_APPS_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dab/dabtree.hpp"
#include "dab/vmem.hpp"

namespace dab {

// Fenwick tree over the per-block aggregates: prefix sums, point updates and
// rank search, all O(log B).
class fenwick {
public:
    explicit fenwick(uint64_t n) : n_(n), t_(n + 1, 0) {}
    uint64_t size() const { return n_; }
    void add(uint64_t i, int64_t d) {  // 0-based
        for (uint64_t x = i + 1; x <= n_; x += x & (~x + 1)) t_[x] += d;
    }
    uint64_t prefix(uint64_t count) const {  // sum of the first `count` entries
        uint64_t s = 0;
        for (uint64_t x = count; x; x -= x & (~x + 1)) s += t_[x];
        return s;
    }
    // largest p with prefix(p) < k (the 0-based index holding the k-th unit)
    uint64_t lower_bound(uint64_t k) const {
        uint64_t pos = 0;
        uint64_t step = n_ == 0 ? 0 : uint64_t(1) << floor_log2(n_);
        for (; step; step >>= 1)
            if (pos + step <= n_ && t_[pos + step] < k) {
                pos += step;
                k -= t_[pos];
            }
        return pos;
    }

private:
    uint64_t n_;
    std::vector<uint64_t> t_;
};

struct space_report {
    double payload_bits = 0;     // information-theoretic benchmark
    double redundancy_bits = 0;  // total - payload
    uint64_t total_bits = 0;
    uint64_t chunk_store_bits = 0;
    uint64_t inter_tree_bits = 0;
    uint64_t block_register_bits = 0;
    uint64_t block_encoding_bits = 0;  // sum of per-block total_bits_M
    std::string to_json() const;
};

// Dynamic fully indexable dictionary: n bits split into n/r blocks, one
// daB-tree per block hosted in a chunk store, and a Fenwick tree over the
// block one-counts.
class fid_state {
public:
    fid_state(uint64_t n, uint64_t block_size, uint32_t word_bits, uint32_t slack = 100);
    static fid_state from_bits(const std::vector<uint8_t>& bits, uint64_t block_size,
                               uint32_t word_bits, uint32_t slack = 100);

    uint64_t size() const { return n_; }
    uint64_t block_size() const { return r_; }
    uint64_t ones() const { return inter_.prefix(blocks_.size()); }

    uint64_t rank(uint64_t k) const;    // ones in A[1..k], 0 <= k <= n
    uint64_t select(uint64_t k) const;  // position of the k-th one, 1 <= k <= ones
    bool get_bit(uint64_t k) const;
    update_stats update(uint64_t k, bool bit);

    space_report report() const;
    std::shared_ptr<const dab_tables> tables() const { return tables_; }
    const chunk_store& store() const { return *store_; }
    const dab_state& block(uint64_t b) const { return blocks_[b]; }
    uint64_t block_count() const { return blocks_.size(); }

    void save(std::ostream& out) const;
    static fid_state load(std::istream& in);

private:
    fid_state() = default;
    void rebuild_inter();
    uint64_t n_ = 0, r_ = 0;
    uint32_t slack_ = 100;
    std::shared_ptr<const dab_tables> tables_;
    std::unique_ptr<chunk_store> store_;
    std::vector<dab_state> blocks_;
    fenwick inter_{0};
};

// Dynamic arithmetic coding with constant alphabet: per-block daB-trees with
// occurrence-count-vector labels; the symbol frequencies f_sigma live in
// plain registers outside the space benchmark.
class ac_state {
public:
    ac_state(uint64_t n, uint64_t block_size, uint32_t sigma, uint32_t word_bits,
             uint32_t slack = 100);
    static ac_state from_symbols(const std::vector<symbol_t>& a, uint64_t block_size,
                                 uint32_t sigma, uint32_t word_bits, uint32_t slack = 100);

    uint64_t size() const { return n_; }
    uint32_t sigma() const { return sigma_; }
    uint64_t frequency(symbol_t s) const { return freq_.at(s); }

    symbol_t get(uint64_t i) const;
    update_stats set(uint64_t i, symbol_t s);
    // per-symbol counts of one block, decoded from its root label
    std::vector<uint64_t> block_counts(uint64_t b) const;

    space_report report() const;
    std::shared_ptr<const dab_tables> tables() const { return tables_; }
    const chunk_store& store() const { return *store_; }
    const dab_state& block(uint64_t b) const { return blocks_[b]; }
    uint64_t block_count() const { return blocks_.size(); }

    void save(std::ostream& out) const;
    static ac_state load(std::istream& in);

private:
    ac_state() = default;
    uint64_t n_ = 0, r_ = 0;
    uint32_t sigma_ = 0, slack_ = 100;
    std::shared_ptr<const dab_tables> tables_;
    std::unique_ptr<chunk_store> store_;
    std::vector<dab_state> blocks_;
    std::vector<uint64_t> freq_;
};

// exact log2 of a big integer, via the 53-bit mantissa (relative error ~2^-52)
double log2_mpz(const mpz_class& v);
// log2 of binomial(n, m), exact big-integer binomial under the log
double log2_binomial(uint64_t n, uint64_t m);
// log2 of the multinomial n! / prod(f_i!)
double log2_multinomial(uint64_t n, const std::vector<uint64_t>& f);

}  // namespace dab

#endif
