#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "dab/spillover.hpp"
#include "doctest.h"

using namespace dab;

namespace {

mpz_class pow2(uint64_t e) { return mpz_class(1) << e; }

// exact redundancy check (K * 2^M)^r <= 4 * size^r
bool small_set_redundancy_ok(const small_set_code& c) {
    mpz_class lhs, rhs;
    mpz_pow_ui(lhs.get_mpz_t(), mpz_class(c.spill_universe * pow2(c.mem_bits)).get_mpz_t(),
               static_cast<unsigned long>(c.refinement));
    mpz_pow_ui(rhs.get_mpz_t(), mpz_class(c.set_size).get_mpz_t(),
               static_cast<unsigned long>(c.refinement));
    return lhs <= 4 * rhs;
}

}  // namespace

TEST_CASE("small set parameters") {
    auto a = small_set_params(5, 2);
    CHECK(a.mem_bits == 1);
    CHECK(a.spill_universe == 3);
    CHECK(small_set_redundancy_ok(a));  // (3*2)^2 = 36 <= 4*25
    auto b = small_set_params(16, 4);
    CHECK(b.mem_bits == 2);
    CHECK(b.spill_universe == 4);  // 16 = 4*4, zero redundancy
    auto c = small_set_params(1, 8);
    CHECK(c.spill_universe == 1);
    CHECK(c.mem_bits == 0);
}

TEST_CASE("small set code ranges and redundancy across sizes") {
    for (uint64_t r : {1, 2, 4, 16, 48, 1000}) {
        for (uint64_t size : {uint64_t(1), uint64_t(2), uint64_t(5), uint64_t(16), uint64_t(100),
                              uint64_t(4096)}) {
            auto c = small_set_params(size, r);
            if (size >= r) {
                CHECK(c.spill_universe >= r);
                CHECK(c.spill_universe <= 2 * r);
            } else {
                CHECK(c.spill_universe == size);
                CHECK(c.mem_bits == 0);
            }
            CHECK(c.spill_universe * pow2(c.mem_bits) >= size);
            CHECK(small_set_redundancy_ok(c));
        }
    }
}

TEST_CASE("small set encode/decode") {
    auto c = small_set_params(5, 2);
    auto [k, m] = small_set_encode(c, 4);
    CHECK(k == 2);
    CHECK(m == 0);
    CHECK(small_set_encode(c, 0) == std::pair<uint64_t, uint64_t>{0, 0});
    CHECK(small_set_decode(c, 2, 0) == 4);
    CHECK(small_set_decode(c, 0, 0) == 0);
    CHECK_THROWS_AS(small_set_encode(c, 5), std::out_of_range);
    CHECK_THROWS_AS(small_set_decode(c, 2, 1), std::out_of_range);  // 5 >= size

    for (uint64_t r : {1, 2, 4, 16}) {
        for (uint64_t size = 1; size <= 4096; size = size < 8 ? size + 1 : size * 3 + 1) {
            auto code = small_set_params(size, r);
            for (uint64_t u = 0; u < size; ++u) {
                auto [kk, mm] = small_set_encode(code, u);
                REQUIRE(kk < code.spill_universe);
                REQUIRE(mm < pow2(code.mem_bits));
                REQUIRE(small_set_decode(code, kk, mm) == u);
            }
        }
    }
}

TEST_CASE("perturbation formula and guarantees") {
    // uniform over 2 stays uniform
    auto u = perturb({1, 1}, 2, 4);
    CHECK(u.weights[0] == u.weights[1]);
    // p = (1, 0), r = 4 -> p' = ((1 - 1/4) + 1/8, 1/8) = (7/8, 1/8)
    auto p = perturb({1, 0}, 1, 4);
    CHECK(mpz_class(p.weights[0]) * 8 == mpz_class(7) * p.denom);
    CHECK(mpz_class(p.weights[1]) * 8 == mpz_class(1) * p.denom);
    // p'(x) >= 1/(2 r |X|) = 1/16
    CHECK(p.weights[1] * 16 >= p.denom);
    CHECK_THROWS_AS(perturb({1, 1}, 3, 4), std::invalid_argument);
    CHECK_THROWS_AS(perturb({1}, 1, 2), std::invalid_argument);
}

TEST_CASE("perturbation invariants on random rational distributions") {
    std::mt19937_64 rng(9);
    for (int iter = 0; iter < 1000; ++iter) {
        uint64_t r = iter % 2 ? 4 : 48;
        size_t n = 1 + rng() % 8;
        std::vector<mpz_class> w(n);
        mpz_class denom = 0;
        for (auto& x : w) {
            x = rng() % 100;
            denom += x;
        }
        if (denom == 0) {
            w[0] = 1;
            denom = 1;
        }
        auto pp = perturb(w, denom, r);
        mpz_class sum = 0;
        for (const auto& x : pp.weights) sum += x;
        REQUIRE(sum == pp.denom);
        for (size_t i = 0; i < n; ++i) {
            // p'(x) >= 1/(2 r n)
            REQUIRE(pp.weights[i] * 2 * r * n >= pp.denom);
            // (1/p')^r <= 4 (1/p)^r  <=>  (denom' / w')^r <= 4 (denom / w)^r
            // cross-multiplied: (denom' * w)^r <= 4 (denom * w')^r
            mpz_class lhs, rhs;
            mpz_pow_ui(lhs.get_mpz_t(), mpz_class(pp.denom * w[i]).get_mpz_t(),
                       static_cast<unsigned long>(r));
            mpz_pow_ui(rhs.get_mpz_t(), mpz_class(denom * pp.weights[i]).get_mpz_t(),
                       static_cast<unsigned long>(r));
            REQUIRE(lhs <= 4 * rhs);
        }
    }
}

TEST_CASE("fusion build: the two-item worked example") {
    // X = {x1, x2}, M = (1, 2), K = (2, 1); r = 1 makes M* = 2 the smallest
    // width with ceil(T / 2^{M*}) <= 2r
    perturbed_distribution uniform{{1, 1}, 2};
    fusion_code fc({{1, 2}, {2, 1}}, uniform, 1);
    // descending M: x2 (M=2, A=4) first, then x1 (M=1, A=4); T = 8
    CHECK(fc.total() == 8);
    CHECK(fc.interval_start(1) == 0);
    CHECK(fc.interval_start(0) == 4);
    CHECK(fc.mem_bits() == 2);        // M* = 2: ceil(8/4) = 2 <= 2r
    CHECK(fc.spill_universe() == 2);  // K* = 2; M* + log2 K* = 3 = H budget

    // encode (x1, y_m = 1, y_k = 1): value = 4 + 1*2 + 1 = 7 -> (k*=1, m*=0b11)
    bit_buf ym1(1);
    ym1.set_bit(0, 1);
    auto enc = fc.encode(0, ym1, 1);
    CHECK(enc.spill == 1);
    CHECK(enc.mem.get_bits(0, 2) == 0b11);
    // encode (x2, y_m = 00, y_k = 0): value = 0
    auto enc2 = fc.encode(1, bit_buf(2), 0);
    CHECK(enc2.spill == 0);
    CHECK(enc2.mem.get_bits(0, 2) == 0);
    // decode both
    auto dec = fc.decode(1, enc.mem);
    CHECK(dec.x == 0);
    CHECK(dec.y_k == 1);
    CHECK(dec.y_m.get_bits(0, 1) == 1);
    auto dec2 = fc.decode(0, enc2.mem);
    CHECK(dec2.x == 1);
    CHECK(dec2.y_k == 0);

    CHECK_THROWS_AS(fc.encode(0, ym1, 2), std::out_of_range);
    bit_buf bad(2);
    bad.set_bits(0, 2, 3);
    // value = 2*4+3 = 11 >= T = 8 is unreachable: K* = 2 means spill 2 is out of range
    CHECK_THROWS_AS(fc.decode(2, bad), std::out_of_range);
}

TEST_CASE("fusion decode rejects values in the rounding gap") {
    // T = 7, r = 2: M* = 1, K* = 4, so codeword value 7 is representable
    // but unused
    perturbed_distribution one{{1}, 1};
    fusion_code fc({{0, 7}}, one, 2);
    CHECK(fc.total() == 7);
    CHECK(fc.mem_bits() == 1);
    CHECK(fc.spill_universe() == 4);
    bit_buf m(1);
    m.set_bit(0, 1);
    CHECK_THROWS_AS(fc.decode(3, m), std::out_of_range);  // value 7 >= T
    m.set_bit(0, 0);
    CHECK(fc.decode(3, m).y_k == 6);  // value 6 is the last codeword
}

TEST_CASE("fusion single item is a relabeling") {
    perturbed_distribution one{{1}, 1};
    fusion_code fc({{3, 5}}, one, 16);
    CHECK(fc.total() == 40);
    for (uint64_t yk = 0; yk < 5; ++yk)
        for (uint64_t ym = 0; ym < 8; ++ym) {
            bit_buf b(3);
            b.set_bits(0, 3, ym);
            auto e = fc.encode(0, b, yk);
            auto d = fc.decode(e.spill, e.mem);
            REQUIRE(d.x == 0);
            REQUIRE(d.y_k == yk);
            REQUIRE(d.y_m.get_bits(0, 3) == ym);
        }
}

namespace {

// Generate a random code shaped like the daB-tree uses them: K(x) is a
// product of two child universes, each either a footnote universe (< r,
// with M = 0 contribution) or a regular one in (r, 2r].
fusion_code random_childlike_code(std::mt19937_64& rng, uint64_t r, uint32_t max_m) {
    size_t n = 1 + rng() % 6;
    std::vector<fusion_item> items(n);
    std::vector<mpz_class> w(n);
    mpz_class denom = 0;
    for (size_t i = 0; i < n; ++i) {
        bool foot1 = rng() % 3 == 0, foot2 = rng() % 3 == 0;
        uint64_t k1 = foot1 ? 1 + rng() % (r - 1) : r + 1 + rng() % r;
        uint64_t k2 = foot2 ? 1 + rng() % (r - 1) : r + 1 + rng() % r;
        uint32_t m1 = foot1 ? 0 : rng() % (max_m / 2);
        uint32_t m2 = foot2 ? 0 : rng() % (max_m / 2);
        items[i] = {m1 + m2, k1 * k2};
        w[i] = 1 + rng() % 50;
        denom += w[i];
    }
    return fusion_code(items, perturb(w, denom, r), r);
}

}  // namespace

TEST_CASE("fusion alignment, verbatim low bits, and exhaustive round-trip") {
    std::mt19937_64 rng(17);
    for (int iter = 0; iter < 1000; ++iter) {
        uint64_t r = 12 * (1 + rng() % 16);
        auto fc = random_childlike_code(rng, r, 12);
        uint32_t max_m = 0;
        for (uint32_t x = 0; x < fc.item_count(); ++x) {
            // alignment: every interval start is a multiple of 2^{M(x)}
            mpz_class q = fc.interval_start(x) & ((mpz_class(1) << fc.item(x).mem_bits) - 1);
            REQUIRE(q == 0);
            max_m = std::max(max_m, fc.item(x).mem_bits);
        }
        REQUIRE(fc.mem_bits() >= max_m);  // holds for all child-shaped codes
        REQUIRE(fc.spill_universe() * pow2(fc.mem_bits()) < fc.total() + pow2(fc.mem_bits()));
        if (fc.total() >= r) {
            REQUIRE(fc.spill_universe() >= r);
            REQUIRE(fc.spill_universe() <= 2 * r);
        }
        // sample codewords: verbatim property + round trip
        for (int probe = 0; probe < 20; ++probe) {
            uint32_t x = rng() % fc.item_count();
            const auto& it = fc.item(x);
            uint64_t yk = rng() % it.spill_universe;
            bit_buf ym(it.mem_bits);
            for (uint32_t b = 0; b < it.mem_bits; ++b) ym.set_bit(b, rng() & 1);
            auto enc = fc.encode(x, ym, yk);
            for (uint32_t b = 0; b < it.mem_bits; ++b)
                REQUIRE(enc.mem.get_bit(b) == ym.get_bit(b));  // low M(x) bits verbatim
            auto dec = fc.decode(enc.spill, enc.mem);
            REQUIRE(dec.x == x);
            REQUIRE(dec.y_k == yk);
            REQUIRE(dec.y_m == ym);
        }
    }
}

TEST_CASE("fusion injectivity: full codeword space for small T") {
    std::mt19937_64 rng(23);
    for (int iter = 0; iter < 50; ++iter) {
        uint64_t r = 12 * (1 + rng() % 8);
        auto fc = random_childlike_code(rng, r, 6);
        if (fc.total() > 65536) continue;
        std::set<std::pair<uint64_t, std::string>> seen;
        uint64_t count = 0;
        for (uint32_t x = 0; x < fc.item_count(); ++x) {
            const auto& it = fc.item(x);
            for (uint64_t yk = 0; yk < it.spill_universe; ++yk)
                for (uint64_t ymv = 0; ymv < (uint64_t(1) << it.mem_bits); ++ymv) {
                    bit_buf ym(it.mem_bits);
                    if (it.mem_bits) ym.set_bits(0, it.mem_bits, ymv);
                    auto enc = fc.encode(x, ym, yk);
                    REQUIRE(seen.insert({enc.spill, enc.mem.to_key()}).second);
                    auto dec = fc.decode(enc.spill, enc.mem);
                    REQUIRE(dec.x == x);
                    REQUIRE(dec.y_k == yk);
                    REQUIRE(dec.y_m == ym);
                    ++count;
                }
        }
        REQUIRE(mpz_class(count) == fc.total());
    }
}

TEST_CASE("fusion redundancy certificate against supplied H") {
    // With H the max over x of log(1/p') + M(x) + log K(x) (dyadic form),
    // the construction satisfies (K* 2^{M*})^r <= 16 * 2^{H r}. We take H
    // as the exact maximum, encoded via the per-item certificate
    // 2^{H} = max_x denom * K(x) * 2^{M(x)} / weight(x) -- cross-multiplied.
    std::mt19937_64 rng(31);
    for (int iter = 0; iter < 200; ++iter) {
        uint64_t r = 12 * (1 + rng() % 8);
        auto fc = random_childlike_code(rng, r, 10);
        const auto& pp = fc.p_prime();
        // 2^H = max_x (1/p'(x)) A(x) as the rational best_num/best_den
        mpz_class best_num = 0, best_den = 1;
        for (uint32_t x = 0; x < fc.item_count(); ++x) {
            mpz_class num = pp.denom * fc.weight(x);
            const mpz_class& den = pp.weights[x];
            if (num * best_den > best_num * den) {
                best_num = num;
                best_den = den;
            }
        }
        mpz_class lhs, rhs;
        mpz_pow_ui(lhs.get_mpz_t(),
                   mpz_class(fc.spill_universe() * pow2(fc.mem_bits()) * best_den).get_mpz_t(),
                   static_cast<unsigned long>(r));
        mpz_pow_ui(rhs.get_mpz_t(), best_num.get_mpz_t(), static_cast<unsigned long>(r));
        REQUIRE(lhs <= 16 * rhs);
    }
}
