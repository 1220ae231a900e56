#ifndef DAB_BITS_HPP
#define DAB_BITS_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

namespace dab {

inline uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

// bit length of x: number of bits needed to write x (0 -> 0)
inline unsigned bit_length(uint64_t x) {
    return x == 0 ? 0 : 64 - std::countl_zero(x);
}

inline unsigned floor_log2(uint64_t x) {
    if (x == 0) throw std::domain_error("floor_log2(0)");
    return bit_length(x) - 1;
}

inline unsigned ceil_log2(uint64_t x) {
    if (x == 0) throw std::domain_error("ceil_log2(0)");
    return x == 1 ? 0 : bit_length(x - 1);
}

inline uint64_t next_pow2(uint64_t x) {
    if (x <= 1) return 1;
    return uint64_t(1) << ceil_log2(x);
}

inline bool is_pow2(uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }

// mask of the low `n` bits, n <= 64
inline uint64_t low_mask(unsigned n) {
    return n >= 64 ? ~uint64_t(0) : (uint64_t(1) << n) - 1;
}

// integer ceil(sqrt(x))
inline uint64_t ceil_sqrt(uint64_t x) {
    if (x == 0) return 0;
    uint64_t r = static_cast<uint64_t>(std::sqrt(static_cast<double>(x)));
    while (r > 0 && (r - 1) * (r - 1) >= x) --r;
    while (r * r < x) ++r;
    return r;
}

// Growable little-endian bit string: bit i of the buffer is bit (i % 64) of
// limb i/64. Integers are stored LSB-first, so get_bits/set_bits round-trip
// plain uint64_t values.
class bit_buf {
public:
    bit_buf() = default;
    explicit bit_buf(uint64_t nbits) : nbits_(nbits), limbs_(ceil_div(nbits, 64), 0) {}

    uint64_t size() const { return nbits_; }
    bool empty() const { return nbits_ == 0; }

    bool get_bit(uint64_t i) const {
        check(i, 1);
        return (limbs_[i >> 6] >> (i & 63)) & 1;
    }
    void set_bit(uint64_t i, bool v) {
        check(i, 1);
        uint64_t m = uint64_t(1) << (i & 63);
        if (v) limbs_[i >> 6] |= m; else limbs_[i >> 6] &= ~m;
    }

    // read `len` (<= 64) bits starting at bit `lo`
    uint64_t get_bits(uint64_t lo, unsigned len) const {
        if (len == 0) return 0;
        if (len > 64) throw std::invalid_argument("bit_buf::get_bits: len > 64");
        check(lo, len);
        uint64_t word = lo >> 6, off = lo & 63;
        uint64_t v = limbs_[word] >> off;
        if (off + len > 64) v |= limbs_[word + 1] << (64 - off);
        return v & low_mask(len);
    }

    void set_bits(uint64_t lo, unsigned len, uint64_t v) {
        if (len == 0) return;
        if (len > 64) throw std::invalid_argument("bit_buf::set_bits: len > 64");
        check(lo, len);
        v &= low_mask(len);
        uint64_t word = lo >> 6, off = lo & 63;
        limbs_[word] = (limbs_[word] & ~(low_mask(len) << off)) | (v << off);
        if (off + len > 64) {
            unsigned hi = static_cast<unsigned>(off + len - 64);
            limbs_[word + 1] = (limbs_[word + 1] & ~low_mask(hi)) | (v >> (64 - off));
        }
    }

    void append_bits(uint64_t v, unsigned len) {
        resize(nbits_ + len);
        set_bits(nbits_ - len, len, v);
    }

    void append(const bit_buf& other) {
        uint64_t base = nbits_;
        resize(nbits_ + other.nbits_);
        copy_in(base, other, 0, other.nbits_);
    }

    // copy `len` bits from src[src_lo..) into this[dst_lo..)
    void copy_in(uint64_t dst_lo, const bit_buf& src, uint64_t src_lo, uint64_t len) {
        uint64_t done = 0;
        while (done < len) {
            unsigned chunk = static_cast<unsigned>(std::min<uint64_t>(64, len - done));
            set_bits(dst_lo + done, chunk, src.get_bits(src_lo + done, chunk));
            done += chunk;
        }
    }

    bit_buf slice(uint64_t lo, uint64_t len) const {
        bit_buf out(len);
        out.copy_in(0, *this, lo, len);
        return out;
    }

    void resize(uint64_t nbits) {
        limbs_.resize(ceil_div(nbits, 64), 0);
        if (nbits < nbits_) {
            // clear dropped tail so equality stays content-based
            uint64_t keep = nbits;
            if (keep & 63) limbs_[keep >> 6] &= low_mask(keep & 63);
            for (uint64_t i = ceil_div(keep, 64); i < limbs_.size(); ++i) limbs_[i] = 0;
        }
        nbits_ = nbits;
    }

    mpz_class to_mpz() const {
        mpz_class z = 0;
        if (!limbs_.empty())
            mpz_import(z.get_mpz_t(), limbs_.size(), -1, sizeof(uint64_t), 0, 0, limbs_.data());
        return z;
    }

    // value -> `nbits` wide buffer (value must fit)
    static bit_buf from_mpz(const mpz_class& v, uint64_t nbits) {
        if (sgn(v) < 0) throw std::invalid_argument("bit_buf::from_mpz: negative");
        if (mpz_sizeinbase(v.get_mpz_t(), 2) > std::max<uint64_t>(nbits, 1) && v != 0)
            throw std::invalid_argument("bit_buf::from_mpz: value too wide");
        bit_buf out(nbits);
        if (v != 0) {
            size_t count = 0;
            mpz_export(out.limbs_.data(), &count, -1, sizeof(uint64_t), 0, 0, v.get_mpz_t());
        }
        return out;
    }

    bool operator==(const bit_buf& o) const {
        return nbits_ == o.nbits_ && limbs_ == o.limbs_;
    }
    bool operator!=(const bit_buf& o) const { return !(*this == o); }

    // stable fingerprint for set membership in tests
    std::string to_key() const {
        std::string s;
        s.reserve(limbs_.size() * 8 + 8);
        uint64_t n = nbits_;
        s.append(reinterpret_cast<const char*>(&n), 8);
        s.append(reinterpret_cast<const char*>(limbs_.data()), limbs_.size() * 8);
        return s;
    }

    const std::vector<uint64_t>& limbs() const { return limbs_; }

private:
    void check(uint64_t lo, unsigned len) const {
        if (lo + len > nbits_) throw std::out_of_range("bit_buf: range out of bounds");
    }
    uint64_t nbits_ = 0;
    std::vector<uint64_t> limbs_;
};

}  // namespace dab

#endif
