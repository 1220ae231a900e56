#include "dab/vmem.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dab {

namespace {

void check_word_bits(uint32_t w) {
    if (w < 8 || w > 64) throw std::invalid_argument("word size must be in [8, 64]");
}

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

constexpr char kMagic[6] = {'D', 'A', 'B', 'V', 'M', '1'};

}  // namespace

// ---------------------------------------------------------------------------
// virtual_memory
// ---------------------------------------------------------------------------

virtual_memory::virtual_memory(uint32_t word_bits) : w_(word_bits) {
    check_word_bits(word_bits);
}

virtual_memory::virtual_memory(chunk_store& store, uint32_t vm_index)
    : w_(store.word_bits()), store_(&store), vm_(vm_index) {
    if (vm_index >= store.vm_count()) throw std::out_of_range("vm index out of range");
}

uint64_t virtual_memory::size() const {
    return store_ ? store_->vm_length_words(vm_) : len_;
}

uint64_t virtual_memory::read(uint64_t addr) const {
    if (store_) return store_->read(vm_, addr);
    if (addr == 0 || addr > len_) throw std::out_of_range("vm_read: address out of range");
    return words_[addr - 1];
}

void virtual_memory::write(uint64_t addr, uint64_t value) {
    if (value > low_mask(w_)) throw std::invalid_argument("vm_write: value wider than w bits");
    if (store_) {
        store_->write(vm_, addr, value);
        return;
    }
    if (addr == 0 || addr > len_) throw std::out_of_range("vm_write: address out of range");
    words_[addr - 1] = value;
}

void virtual_memory::resize(int delta) {
    if (delta != 1 && delta != -1) throw std::invalid_argument("vm_resize: delta must be +-1");
    if (store_) {
        store_->resize(vm_, delta);
        return;
    }
    if (delta == 1) {
        words_.push_back(0);
        ++len_;
    } else {
        if (len_ == 0) throw std::out_of_range("vm_resize: release on empty VM");
        words_.pop_back();
        --len_;
    }
}

bool virtual_memory::operator==(const virtual_memory& o) const {
    if (w_ != o.w_ || size() != o.size()) return false;
    for (uint64_t a = 1; a <= size(); ++a)
        if (read(a) != o.read(a)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// chunk_store
// ---------------------------------------------------------------------------

chunk_store::chunk_store(uint32_t vm_count, uint64_t per_vm_cap_bits, uint32_t word_bits,
                         uint64_t total_cap_bits)
    : vm_count_(vm_count), cap_(per_vm_cap_bits), w_(word_bits) {
    check_word_bits(word_bits);
    if (vm_count == 0) throw std::invalid_argument("chunk_store: B >= 1 required");
    if (cap_ < w_) throw std::invalid_argument("chunk_store: per-VM cap must be >= w");
    // s: smallest multiple of w that is >= ceil(sqrt(L*w))
    s_ = ceil_div(ceil_sqrt(cap_ * w_), w_) * w_;
    total_cap_ = total_cap_bits == 0 ? uint64_t(vm_count_) * cap_ : total_cap_bits;
    if (total_cap_ > uint64_t(vm_count_) * cap_)
        throw std::invalid_argument("chunk_store: S cap exceeds B*L");
    uint64_t universe = ceil_div(total_cap_, s_) + vm_count_;
    slots_.assign(universe * words_per_slot(), 0);
    len_bits_.assign(vm_count_, 0);
    slot_map_.assign(vm_count_, {});
    free_slots_.reserve(universe);
    for (uint64_t i = universe; i > 0; --i) free_slots_.push_back(static_cast<uint32_t>(i - 1));
}

uint64_t chunk_store::slot_of(uint32_t i, uint64_t addr) const {
    if (i >= vm_count_) throw std::out_of_range("chunk_store: vm index");
    if (addr == 0 || addr * w_ > len_bits_[i])
        throw std::out_of_range("chunk_store: address out of range");
    uint64_t word = addr - 1;
    uint64_t wps = words_per_slot();
    uint64_t slot = slot_map_[i][word / wps];
    return slot * wps + word % wps;
}

uint64_t chunk_store::read(uint32_t i, uint64_t addr) const {
    return slots_[slot_of(i, addr)];
}

void chunk_store::write(uint32_t i, uint64_t addr, uint64_t value) {
    if (value > low_mask(w_)) throw std::invalid_argument("chunk_store: value wider than w bits");
    slots_[slot_of(i, addr)] = value;
}

void chunk_store::resize(uint32_t i, int delta) {
    if (i >= vm_count_) throw std::out_of_range("chunk_store: vm index");
    if (delta != 1 && delta != -1) throw std::invalid_argument("chunk_store: delta must be +-1");
    last_slots_touched_ = 0;
    last_map_entries_touched_ = 0;
    uint64_t old_bits = len_bits_[i];
    if (delta == 1) {
        uint64_t new_bits = old_bits + w_;
        if (new_bits > cap_) throw std::out_of_range("chunk_store: per-VM cap exceeded");
        uint64_t total = 0;
        for (uint64_t b : len_bits_) total += b;
        if (total + w_ > total_cap_) throw std::out_of_range("chunk_store: S cap exceeded");
        if (ceil_div(new_bits, s_) > ceil_div(old_bits, s_)) {
            if (free_slots_.empty()) throw std::runtime_error("chunk_store: slots exhausted");
            uint32_t slot = free_slots_.back();
            free_slots_.pop_back();
            slot_map_[i].push_back(slot);
            ++last_map_entries_touched_;
        }
        len_bits_[i] = new_bits;
        // new word must read as zero
        slots_[slot_of(i, new_bits / w_)] = 0;
        ++last_slots_touched_;
    } else {
        if (old_bits == 0) throw std::out_of_range("chunk_store: release on empty VM");
        uint64_t new_bits = old_bits - w_;
        if (ceil_div(new_bits, s_) < ceil_div(old_bits, s_)) {
            free_slots_.push_back(slot_map_[i].back());
            slot_map_[i].pop_back();
            ++last_map_entries_touched_;
            ++last_slots_touched_;
        }
        len_bits_[i] = new_bits;
    }
}

chunk_space_report chunk_store::space() const {
    chunk_space_report r{};
    uint64_t used = 0;
    for (uint32_t i = 0; i < vm_count_; ++i) used += ceil_div(len_bits_[i], s_);
    r.payload_slot_bits = used * s_;
    r.slot_map_bits = uint64_t(vm_count_) * ceil_div(cap_, s_) * w_;
    r.free_list_bits = (slot_universe() + 1) * w_;
    r.length_register_bits = uint64_t(vm_count_) * w_;
    return r;
}

void chunk_store::save(std::ostream& out) const {
    out.write(kMagic, sizeof(kMagic));
    put_le<uint32_t>(out, w_);
    put_le<uint32_t>(out, vm_count_);
    put_le<uint64_t>(out, s_);
    put_le<uint64_t>(out, cap_);
    put_le<uint64_t>(out, total_cap_);
    for (uint64_t b : len_bits_) put_le<uint64_t>(out, b);
    for (const auto& m : slot_map_) {
        put_le<uint32_t>(out, static_cast<uint32_t>(m.size()));
        for (uint32_t s : m) put_le<uint32_t>(out, s);
    }
    put_le<uint32_t>(out, static_cast<uint32_t>(free_slots_.size()));
    for (uint32_t s : free_slots_) put_le<uint32_t>(out, s);
    put_le<uint64_t>(out, slots_.size());
    for (uint64_t v : slots_) put_le<uint64_t>(out, v);
}

chunk_store chunk_store::load(std::istream& in) {
    char magic[6];
    in.read(magic, 6);
    if (!in || !std::equal(magic, magic + 6, kMagic))
        throw std::runtime_error("snapshot: bad magic");
    uint32_t w = get_le<uint32_t>(in);
    uint32_t b = get_le<uint32_t>(in);
    uint64_t s = get_le<uint64_t>(in);
    uint64_t cap = get_le<uint64_t>(in);
    uint64_t total = get_le<uint64_t>(in);
    chunk_store st(b, cap, w, total);
    if (st.s_ != s) throw std::runtime_error("snapshot: chunk size mismatch");
    for (uint32_t i = 0; i < b; ++i) st.len_bits_[i] = get_le<uint64_t>(in);
    for (uint32_t i = 0; i < b; ++i) {
        uint32_t n = get_le<uint32_t>(in);
        st.slot_map_[i].resize(n);
        for (uint32_t j = 0; j < n; ++j) st.slot_map_[i][j] = get_le<uint32_t>(in);
    }
    uint32_t nf = get_le<uint32_t>(in);
    st.free_slots_.resize(nf);
    for (uint32_t j = 0; j < nf; ++j) st.free_slots_[j] = get_le<uint32_t>(in);
    uint64_t ns = get_le<uint64_t>(in);
    if (ns != st.slots_.size()) throw std::runtime_error("snapshot: slot payload size mismatch");
    for (uint64_t j = 0; j < ns; ++j) st.slots_[j] = get_le<uint64_t>(in);
    return st;
}

bool chunk_store::operator==(const chunk_store& o) const {
    if (vm_count_ != o.vm_count_ || w_ != o.w_ || s_ != o.s_ || cap_ != o.cap_) return false;
    if (len_bits_ != o.len_bits_) return false;
    for (uint32_t i = 0; i < vm_count_; ++i)
        for (uint64_t a = 1; a <= vm_length_words(i); ++a)
            if (read(i, a) != o.read(i, a)) return false;
    return true;
}

}  // namespace dab
