#ifndef DAB_ORACLE_HPP
#define DAB_ORACLE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dab/adapter.hpp"
#include "dab/dabtree.hpp"

namespace dab::oracle {

// Independent re-implementation of the matching algorithm: circle positions
// as LSB-first digit strings, O(L^2)-per-round successor scans, no linked
// lists, no caching. Shares no code with adapter::build_bijection.
adapter_map naive_bijection(uint64_t l1, uint64_t l2, uint64_t lmax = 0);

// plain bitset reference for rank/select
struct naive_bitset {
    std::vector<uint8_t> bits;
    explicit naive_bitset(uint64_t n) : bits(n, 0) {}
    uint64_t rank(uint64_t k) const {  // ones in [1..k]
        uint64_t c = 0;
        for (uint64_t i = 0; i < k; ++i) c += bits[i];
        return c;
    }
    // position of the k-th one, 0 if none
    uint64_t select(uint64_t k) const {
        uint64_t c = 0;
        for (uint64_t i = 0; i < bits.size(); ++i)
            if (bits[i] && ++c == k) return i + 1;
        return 0;
    }
    uint64_t ones() const { return rank(bits.size()); }
};

struct injectivity_report {
    bool pass = false;
    std::string detail;
    std::map<label_t, uint64_t> per_label_count;
};

// Enumerates every array in Sigma^n (n small), encodes each, and checks that
// arrays sharing a root label get pairwise-distinct logical encodings whose
// count per label equals N[n, phi]. Root labels are recomputed here by
// folding the label functions directly, independent of the table recurrence.
injectivity_report exhaustive_injectivity(const std::shared_ptr<const dab_tables>& tables);

}  // namespace dab::oracle

#endif
