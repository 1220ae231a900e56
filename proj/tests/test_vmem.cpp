#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <sstream>

#include "dab/vmem.hpp"
#include "doctest.h"

using namespace dab;

TEST_CASE("vm read after write, boundaries") {
    virtual_memory vm(8);
    vm.resize(+1);
    vm.write(1, 0xAB);
    CHECK(vm.read(1) == 0xAB);
    CHECK_THROWS_AS(vm.read(2), std::out_of_range);           // addr = L+1
    CHECK_THROWS_AS(vm.write(1, 0x100), std::invalid_argument);  // 2^w
}

TEST_CASE("vm write locality") {
    virtual_memory vm(16);
    for (int i = 0; i < 5; ++i) vm.resize(+1);
    for (uint64_t a = 1; a <= 5; ++a) vm.write(a, a * 11);
    vm.write(3, 5);
    for (uint64_t a = 1; a <= 5; ++a) CHECK(vm.read(a) == (a == 3 ? 5 : a * 11));
}

TEST_CASE("vm resize semantics") {
    virtual_memory vm(8);
    CHECK(vm.size() == 0);
    vm.resize(+1);
    CHECK(vm.size() == 1);
    CHECK(vm.read(1) == 0);
    vm.resize(-1);
    CHECK_THROWS_AS(vm.resize(-1), std::out_of_range);
}

TEST_CASE("zero-initialized tail after shrink and regrow") {
    virtual_memory plain(8);
    chunk_store cs(1, 512, 8);
    virtual_memory hosted(cs, 0);
    for (virtual_memory* vm : {&plain, &hosted}) {
        vm->resize(+1);
        vm->write(1, 77);
        vm->resize(+1);
        vm->write(2, 99);
        vm->resize(-1);
        vm->resize(+1);
        CHECK(vm->read(2) == 0);
        CHECK(vm->read(1) == 77);
    }
}

TEST_CASE("chunk size formula") {
    // B=1, L=w: s = w (degenerate one-chunk granularity)
    chunk_store a(1, 16, 16);
    CHECK(a.chunk_bits() == 16);
    // B=4, L=256, w=16: ceil(sqrt(256*16)) = 64, already a multiple of 16
    chunk_store b(4, 256, 16);
    CHECK(b.chunk_bits() == 64);
    // non-multiple rounds up: L=67, w=16 -> ceil(sqrt(1072)) = 33 -> 48
    chunk_store c(4, 67, 16);
    CHECK(c.chunk_bits() == 48);
}

TEST_CASE("full fill never exhausts slots; slot conservation") {
    const uint32_t B = 4, w = 16;
    const uint64_t L = 256;
    chunk_store cs(B, L, w);
    uint64_t universe = cs.slot_universe();
    for (uint32_t i = 0; i < B; ++i)
        for (uint64_t k = 0; k < L / w; ++k) {
            cs.resize(i, +1);
            uint64_t used = 0;
            for (uint32_t j = 0; j < B; ++j) used += ceil_div(cs.vm_length_bits(j), cs.chunk_bits());
            CHECK(used + cs.free_slot_count() == universe);
        }
    for (uint32_t i = 0; i < B; ++i) CHECK(cs.vm_length_bits(i) == L);
}

TEST_CASE("space report: empty store and one-chunk VM") {
    chunk_store cs(2, 256, 16);
    auto r0 = cs.space();
    CHECK(r0.payload_slot_bits == 0);
    CHECK(r0.total_bits() == r0.slot_map_bits + r0.free_list_bits + r0.length_register_bits);
    // grow VM 0 to exactly one chunk (s = 64 bits = 4 words)
    for (int i = 0; i < 4; ++i) cs.resize(0, +1);
    auto r1 = cs.space();
    CHECK(r1.payload_slot_bits == cs.chunk_bits());
    CHECK(r1.total_bits() == r0.total_bits() + cs.chunk_bits());
}

TEST_CASE("space bound with frozen constants over random fills") {
    // total <= sum(l_i) + c1*B*sqrt(L*w) + c2*B*w with c1 = 3, c2 = 5:
    // payload rounding <= B*s <= B*(sqrt(Lw)+w); slot map B*ceil(L/s)*w
    // <= B*(sqrt(Lw)+w); free list (S/s+B+1)*w <= B*sqrt(Lw)+(B+2)*w;
    // length registers B*w. Sum of word terms <= 5Bw for B >= 1.
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 20; ++iter) {
        uint32_t B = 1 + rng() % 6;
        uint32_t w = 8 + 8 * (rng() % 3);
        uint64_t L = w * (4 + rng() % 60);
        chunk_store cs(B, L, w);
        std::vector<uint64_t> len(B, 0);
        for (int step = 0; step < 400; ++step) {
            uint32_t i = rng() % B;
            if (len[i] + w <= L && (len[i] == 0 || rng() % 2)) {
                cs.resize(i, +1);
                len[i] += w;
            } else if (len[i] > 0) {
                cs.resize(i, -1);
                len[i] -= w;
            }
        }
        uint64_t sum = 0;
        for (auto b : len) sum += b;
        double bound = double(sum) + 3.0 * B * std::sqrt(double(L) * w) + 5.0 * B * w;
        CHECK(double(cs.space().total_bits()) <= bound);
    }
}

TEST_CASE("replay equivalence against growable-array oracle, interleaved VMs") {
    const uint32_t B = 3, w = 8;
    chunk_store cs(B, 2048, w);
    std::vector<virtual_memory> vms;
    for (uint32_t i = 0; i < B; ++i) vms.emplace_back(cs, i);
    std::vector<std::vector<uint64_t>> oracle(B);
    std::mt19937_64 rng(42);
    for (int step = 0; step < 100000; ++step) {
        uint32_t i = rng() % B;
        auto& vm = vms[i];
        auto& ora = oracle[i];
        int op = rng() % 4;
        if (op == 0 || ora.empty()) {
            if (ora.size() * w < 2048) {
                vm.resize(+1);
                ora.push_back(0);
            }
        } else if (op == 1 && !ora.empty()) {
            vm.resize(-1);
            ora.pop_back();
        } else if (op == 2) {
            uint64_t a = 1 + rng() % ora.size();
            uint64_t v = rng() & low_mask(w);
            vm.write(a, v);
            ora[a - 1] = v;
        } else {
            uint64_t a = 1 + rng() % ora.size();
            CHECK(vm.read(a) == ora[a - 1]);
        }
    }
    for (uint32_t i = 0; i < B; ++i) {
        REQUIRE(vms[i].size() == oracle[i].size());
        for (uint64_t a = 1; a <= vms[i].size(); ++a) CHECK(vms[i].read(a) == oracle[i][a - 1]);
    }
}

TEST_CASE("resize touches O(1) slots and map entries") {
    chunk_store cs(2, 4096, 16);
    std::mt19937_64 rng(1);
    uint64_t len = 0;
    for (int step = 0; step < 2000; ++step) {
        if (len == 0 || (rng() % 2 && len + 16 <= 4096)) {
            cs.resize(0, +1);
            len += 16;
        } else {
            cs.resize(0, -1);
            len -= 16;
        }
        CHECK(cs.last_resize_slots_touched() <= 1);
        CHECK(cs.last_resize_map_entries_touched() <= 1);
    }
}

TEST_CASE("snapshot round-trips bit-exactly") {
    chunk_store cs(3, 512, 16);
    std::mt19937_64 rng(5);
    for (int step = 0; step < 300; ++step) {
        uint32_t i = rng() % 3;
        if (cs.vm_length_bits(i) == 0 || (rng() % 3 && cs.vm_length_bits(i) + 16 <= 512))
            cs.resize(i, +1);
        else
            cs.resize(i, -1);
        if (cs.vm_length_words(i) > 0)
            cs.write(i, 1 + rng() % cs.vm_length_words(i), rng() & 0xFFFF);
    }
    std::ostringstream out;
    cs.save(out);
    std::istringstream in(out.str());
    chunk_store back = chunk_store::load(in);
    CHECK(back == cs);
    std::ostringstream out2;
    back.save(out2);
    CHECK(out.str() == out2.str());
}

TEST_CASE("tight S cap is enforced") {
    chunk_store cs(2, 256, 16, 256);  // S = 256 < B*L
    for (int i = 0; i < 16; ++i) cs.resize(0, +1);
    CHECK_THROWS(cs.resize(1, +1));
}
