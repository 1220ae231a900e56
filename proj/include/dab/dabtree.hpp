#ifndef DAB_DABTREE_HPP
#define DAB_DABTREE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include <gmpxx.h>

#include "dab/adapter.hpp"
#include "dab/bits.hpp"
#include "dab/spillover.hpp"
#include "dab/vmem.hpp"

namespace dab {

using label_t = uint32_t;
using symbol_t = uint32_t;

// Tree shape and label algebra. Labels and symbols are dense integers:
// symbols in [0, sigma_size), labels in [0, phi_size).
struct dab_params {
    uint64_t n = 1;            // leaves, a power of two
    uint32_t sigma_size = 2;   // |Sigma|
    uint64_t phi_size = 2;     // |Phi|
    std::function<label_t(symbol_t)> leaf_label;
    std::function<label_t(label_t, label_t, uint64_t)> combine;  // (phi1, phi2, n_u)
    uint32_t word_bits = 16;   // w
    uint32_t slack = 100;      // additive constant in the beta condition

    uint64_t refinement() const { return 12 * n; }  // r, fixed for the whole tree
    uint32_t beta() const;
};

// popcount labeling over Sigma = {0, 1}: phi = number of ones
dab_params popcount_params(uint64_t n, uint32_t word_bits = 16, uint32_t slack = 100);
// max labeling over Sigma = {1..sigma} stored as symbols {0..sigma-1},
// phi = max symbol value + 1 (labels 1..sigma)
dab_params max_label_params(uint64_t n, uint32_t sigma, uint32_t word_bits = 8,
                            uint32_t slack = 100);
// occurrence-count-vector labeling for |Sigma| = sigma: label encodes the
// per-symbol counts in base (n+1)
dab_params count_vector_params(uint64_t n, uint32_t sigma, uint32_t word_bits = 16,
                               uint32_t slack = 100);

// Precomputed per-(subtree size, label) tables: instance counts N, spillover
// parameters (K, M), cut positions M_left, leaf codes and fusion codes.
// Immutable after build; shared between any number of tree instances.
class dab_tables {
public:
    static std::shared_ptr<const dab_tables> build(dab_params params);

    const dab_params& params() const { return params_; }
    uint32_t w() const { return params_.word_bits; }
    uint32_t beta() const { return beta_; }
    uint64_t r() const { return params_.refinement(); }

    bool realizable(uint64_t size, label_t phi) const;
    const mpz_class& count(uint64_t size, label_t phi) const;      // N[size, phi]
    uint64_t spill_universe(uint64_t size, label_t phi) const;     // K
    uint64_t mem_bits(uint64_t size, label_t phi) const;           // M
    uint64_t m_left(uint64_t size, label_t phi) const;             // cut for succinct nodes
    uint64_t m_max(uint64_t size, label_t phi) const;
    const fusion_code& fusion(uint64_t size, label_t phi) const;   // size >= 2
    const std::vector<std::pair<label_t, label_t>>& pairs(uint64_t size, label_t phi) const;
    uint32_t pair_index(uint64_t size, label_t phi, label_t phi1, label_t phi2) const;
    const small_set_code& leaf_code(label_t phi) const;
    const std::vector<symbol_t>& leaf_symbols(label_t phi) const;  // Sigma_phi ascending
    uint32_t leaf_rank(symbol_t s) const;  // index of s within its Sigma_phi
    const std::vector<label_t>& labels_at(uint64_t size) const;    // realizable labels

    // relaxed-scheme layout constants
    uint64_t record_bits() const { return 6ull * beta_ * params_.word_bits; }
    uint64_t relax_threshold() const;                  // (6 beta w + 1) * log2 n
    uint32_t phi_field_bits() const { return phi_field_; }
    uint32_t spill_field_bits() const { return spill_field_; }
    uint32_t size_field_bits() const { return size_field_; }

    adapter_cache& adapters() const { return adapters_; }

private:
    struct entry {
        mpz_class count;
        uint64_t spill_universe = 1;
        uint64_t mem = 0;
        uint64_t m_left = 0;
        uint64_t m_max = 0;
        std::vector<std::pair<label_t, label_t>> pairs;
        std::map<std::pair<label_t, label_t>, uint32_t> pair_idx;
        std::unique_ptr<fusion_code> fusion;
        small_set_code leaf;
        std::vector<symbol_t> symbols;
    };
    const entry& at(uint64_t size, label_t phi) const;

    dab_params params_;
    uint32_t beta_ = 1;
    uint32_t phi_field_ = 0, spill_field_ = 0, size_field_ = 0;
    std::vector<std::map<label_t, entry>> levels_;  // index = log2(size)
    std::vector<std::vector<label_t>> level_labels_;
    std::vector<uint32_t> leaf_rank_;  // per symbol
    mutable adapter_cache adapters_;
};

struct update_stats {
    uint64_t allocations = 0;      // adapter allocate steps + root VM grows
    uint64_t releases = 0;         // adapter release steps + root VM shrinks
    uint64_t relocated_words = 0;  // sum of |moves| over issued adapter deltas
    uint64_t word_writes = 0;      // scattered word rewrites applied
    uint64_t suffix_words = 0;     // words rewritten as tail suffixes
};

struct access_stats {
    std::vector<uint64_t> word_reads_per_level;  // index 0 = root
};

// One compressed daB-tree instance: complete words in a VM plus the
// incomplete word, root spill, scheme flag, root label and exact bit count
// kept as registers. The stored representation is a pure function of the
// array (strongly history-independent at the logical level).
class dab_state {
public:
    using navigator_t =
        std::function<std::pair<int, uint64_t>(uint64_t acc, uint64_t n_u, label_t phi1,
                                               label_t phi2)>;
    using finalizer_t = std::function<uint64_t(uint64_t acc, symbol_t leaf)>;

    static dab_state encode(std::shared_ptr<const dab_tables> t, std::span<const symbol_t> a);
    static dab_state encode(std::shared_ptr<const dab_tables> t, std::span<const symbol_t> a,
                            virtual_memory vm);
    // rebind a state to an already-populated VM plus its registers (snapshots)
    static dab_state restore(std::shared_ptr<const dab_tables> t, virtual_memory vm, label_t phi,
                             bool relaxed, uint64_t spill, uint64_t mem_bits, uint64_t inc);

    uint64_t query(const navigator_t& nav, const finalizer_t& fin, uint64_t acc0 = 0) const;
    symbol_t get(uint64_t i) const;  // 1-based leaf index
    update_stats update(uint64_t i, symbol_t s);

    label_t root_label() const { return phi_; }
    bool root_relaxed() const { return relaxed_; }
    uint64_t root_spill() const { return spill_; }
    uint64_t node_mem_bits() const { return mem_bits_; }
    uint64_t incomplete_value() const { return inc_; }
    uint32_t incomplete_width() const { return static_cast<uint32_t>(mem_bits_ % t_->w()); }
    // M + ceil(log2 K) + 1 scheme bit (succinct), or M~ + 1 (relaxed)
    uint64_t total_bits() const;
    const virtual_memory& vm() const { return vm_; }
    const dab_tables& tables() const { return *t_; }

    struct logical_state {
        std::vector<uint64_t> words;
        uint64_t inc = 0;
        uint32_t inc_width = 0;
        bool relaxed = false;
        uint64_t spill = 0;
        label_t label = 0;
        uint64_t total = 0;
        bool operator==(const logical_state&) const = default;
    };
    logical_state logical() const;
    std::string logical_key() const;  // fingerprint for set membership

    // Algorithm-2 style debug surface: access word j of the node reached by
    // the child path (0 = left, 1 = right); stats gets per-level access
    // counts when provided.
    uint64_t read_node_word(std::span<const int> child_path, uint64_t j,
                            access_stats* stats = nullptr) const;
    void write_node_word(std::span<const int> child_path, uint64_t j, uint64_t value);
    struct node_probe {
        label_t phi;
        bool relaxed;
        uint64_t mem_bits;
        label_t phi1, phi2;
        bool child_relaxed[2];
        uint64_t child_mem_bits[2];
    };
    node_probe probe_node(std::span<const int> child_path) const;

private:
    friend struct walker;
    dab_state(std::shared_ptr<const dab_tables> t, virtual_memory vm)
        : t_(std::move(t)), vm_(std::move(vm)) {}
    std::shared_ptr<const dab_tables> t_;
    virtual_memory vm_;
    label_t phi_ = 0;
    bool relaxed_ = false;
    uint64_t spill_ = 0;
    uint64_t mem_bits_ = 0;
    uint64_t inc_ = 0;
};

}  // namespace dab

#endif
