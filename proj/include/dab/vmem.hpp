#ifndef DAB_VMEM_HPP
#define DAB_VMEM_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dab/bits.hpp"

namespace dab {

class chunk_store;

// A tape of w-bit words, addressed 1..L, resizable by +-1 word at the tail.
// Newly allocated words read as zero. Backed either by a private growable
// buffer or by one slot-mapped VM of a chunk_store.
class virtual_memory {
public:
    explicit virtual_memory(uint32_t word_bits);
    virtual_memory(chunk_store& store, uint32_t vm_index);

    uint64_t read(uint64_t addr) const;
    void write(uint64_t addr, uint64_t value);
    void resize(int delta);  // +1 or -1

    uint64_t size() const;  // L, in words
    uint32_t word_bits() const { return w_; }

    bool operator==(const virtual_memory& o) const;

private:
    uint32_t w_;
    chunk_store* store_ = nullptr;  // chunked backing when non-null
    uint32_t vm_ = 0;
    uint64_t len_ = 0;                // plain backing
    std::vector<uint64_t> words_;
};

struct chunk_space_report {
    uint64_t payload_slot_bits;     // slots_used * s
    uint64_t slot_map_bits;         // B * ceil(L/s) * w
    uint64_t free_list_bits;        // (slot_universe + 1) * w
    uint64_t length_register_bits;  // B * w
    uint64_t total_bits() const {
        return payload_slot_bits + slot_map_bits + free_list_bits + length_register_bits;
    }
};

// Packs B variable-length VMs into fixed slots of s bits, s the smallest
// multiple of w at least ceil(sqrt(L*w)). Each VM keeps a fixed-capacity
// slot map of ceil(L/s) entries; unused slots sit on a free list. Slot
// placement is history-dependent; logical VM contents are not.
class chunk_store {
public:
    // total_cap_bits == 0 selects the default cap S = B*L.
    chunk_store(uint32_t vm_count, uint64_t per_vm_cap_bits, uint32_t word_bits,
                uint64_t total_cap_bits = 0);

    uint32_t vm_count() const { return vm_count_; }
    uint32_t word_bits() const { return w_; }
    uint64_t chunk_bits() const { return s_; }
    uint64_t per_vm_cap_bits() const { return cap_; }
    uint64_t total_cap_bits() const { return total_cap_; }
    uint64_t slot_universe() const { return slots_.size() / words_per_slot(); }
    uint64_t free_slot_count() const { return free_slots_.size(); }
    uint64_t vm_length_bits(uint32_t i) const { return len_bits_.at(i); }
    uint64_t vm_length_words(uint32_t i) const { return len_bits_.at(i) / w_; }

    uint64_t read(uint32_t i, uint64_t addr) const;
    void write(uint32_t i, uint64_t addr, uint64_t value);
    void resize(uint32_t i, int delta);

    // Exact accounting; every term is derived from the layout constants
    // documented next to chunk_space_report.
    chunk_space_report space() const;

    // instrumentation for the O(1)-resize-cost property
    uint32_t last_resize_slots_touched() const { return last_slots_touched_; }
    uint32_t last_resize_map_entries_touched() const { return last_map_entries_touched_; }

    void save(std::ostream& out) const;
    static chunk_store load(std::istream& in);

    bool operator==(const chunk_store& o) const;  // logical contents, not placement

private:
    uint64_t words_per_slot() const { return s_ / w_; }
    uint64_t slot_of(uint32_t i, uint64_t addr) const;

    uint32_t vm_count_;
    uint64_t cap_;        // L: per-VM bit cap
    uint32_t w_;
    uint64_t s_;          // chunk size in bits
    uint64_t total_cap_;  // S
    std::vector<uint64_t> len_bits_;
    std::vector<std::vector<uint32_t>> slot_map_;
    std::vector<uint32_t> free_slots_;
    std::vector<uint64_t> slots_;  // one uint64 per w-bit word, slot-major
    uint32_t last_slots_touched_ = 0;
    uint32_t last_map_entries_touched_ = 0;
};

}  // namespace dab

#endif
