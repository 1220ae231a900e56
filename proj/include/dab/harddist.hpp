#ifndef DAB_HARDDIST_HPP
#define DAB_HARDDIST_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace dab {

struct harddist_params {
    uint64_t n = 0;       // insertions per side
    uint64_t lambda = 0;  // branching; 0 = ceil(log2(n)^2), clamped to >= 2
    uint64_t seed = 0;
};

uint64_t default_lambda(uint64_t n);
bool harddist_valid_n(uint64_t n, uint64_t lambda);

// One instance of the hard distribution: a sequence of 2n insertions (1 =
// side one, 2 = side two), n per side. The "arbitrarily insert" choices are
// fixed left-to-right: all side-one insertions of a segment precede its
// side-two insertions.
std::vector<uint8_t> sample_hard_instance(const harddist_params& p);

struct harddist_report {
    uint64_t n = 0, lambda = 0, seed = 0;
    uint64_t total_relocations = 0;
    uint64_t max_per_op = 0;
    double amortized = 0;
    bool per_op_bound_ok = true;            // kRelocConstant * (floor(log2 L) + 2)
    std::vector<uint64_t> level_relocations;  // LCA-attributed, index = tree level
    uint64_t unattributed = 0;                // first placements
    std::string to_json() const;
};

// Drives the two-way adapter with an insertion sequence (allocations only),
// measuring relocations per operation. Evaluates the same bijections as
// build_bijection (cross-checked in tests) via an incremental sorted circle,
// so walks of 10^5+ operations stay affordable.
harddist_report run_hard_distribution(const harddist_params& p);

// raw per-op move counts for an arbitrary allocation sequence
std::vector<uint32_t> allocation_walk_moves(const std::vector<uint8_t>& ops);

}  // namespace dab

#endif
