#pragma once

// Range coder over bounded integer alphabets with 16-bit cumulative
// frequency tables.
//
// State is 64 bits wide with a 56-bit coding window: the range is kept in
// (2^48, 2^56] and renormalized a byte at a time, with carries resolved
// through a one-byte cache plus a run of pending 0xFF bytes. The flush emits
// only as many bytes as are needed to pin a value inside the final interval;
// the decoder reads zeros past the end of the stream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mdq/error.hpp"
#include "mdq/laplace.hpp"

namespace mdq {

inline constexpr int kCdfBits = 16;
inline constexpr std::uint32_t kCdfTotal = 1u << kCdfBits;

struct CdfTable {
    std::int32_t alphabet_min = 0;
    std::int32_t alphabet_max = 0;
    std::vector<std::uint32_t> cumulative; // alphabet size + 1 entries

    std::size_t size() const { return cumulative.size() - 1; }
    bool contains(std::int64_t s) const { return s >= alphabet_min && s <= alphabet_max; }
    std::uint32_t low(std::int32_t s) const { return cumulative[static_cast<std::size_t>(s - alphabet_min)]; }
    std::uint32_t mass(std::int32_t s) const {
        const auto i = static_cast<std::size_t>(s - alphabet_min);
        return cumulative[i + 1] - cumulative[i];
    }

    void validate() const {
        require(alphabet_max > alphabet_min, Errc::invalid_argument, "CDF alphabet needs at least two symbols");
        require(cumulative.size() == static_cast<std::size_t>(alphabet_max - alphabet_min) + 2,
                Errc::shape_mismatch, "CDF length does not match alphabet");
        require(cumulative.front() == 0 && cumulative.back() == kCdfTotal, Errc::invalid_argument,
                "CDF must run from 0 to 2^16");
        for (std::size_t i = 0; i + 1 < cumulative.size(); ++i)
            require(cumulative[i + 1] > cumulative[i], Errc::invalid_argument, "CDF must be strictly increasing");
    }
};

// Quantizes non-negative weights to integer masses summing to 2^16, every
// symbol at least 1. The spare counts go out by largest remainder; a group
// of exactly tied remainders is served whole or skipped, and anything left
// after that goes to the heaviest symbol. Mirrored weights therefore always
// receive mirrored masses.
inline CdfTable quantize_masses(std::int32_t alphabet_min, std::span<const double> weights) {
    const std::size_t n = weights.size();
    require(n >= 2, Errc::invalid_argument, "CDF alphabet needs at least two symbols");
    if (n > kCdfTotal) fail(Errc::invalid_argument, "alphabet of " + std::to_string(n) + " symbols exceeds the 16-bit table");
    double total = 0.0;
    for (double w : weights) {
        require(std::isfinite(w) && w >= 0.0, Errc::invalid_argument, "CDF weights must be finite and >= 0");
        total += w;
    }

    std::vector<std::uint32_t> mass(n, 1);
    const std::uint32_t spare = kCdfTotal - static_cast<std::uint32_t>(n);
    std::uint32_t left = spare;
    std::size_t heaviest = 0;
    if (total > 0.0) {
        std::vector<double> remainder(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double share = weights[i] / total * spare;
            const double whole = std::floor(share);
            mass[i] += static_cast<std::uint32_t>(whole);
            left -= static_cast<std::uint32_t>(whole);
            remainder[i] = share - whole;
            if (weights[i] > weights[heaviest]) heaviest = i;
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t g = 0; g < n && left > 0;) {
            std::size_t end = g + 1;
            while (end < n && remainder[order[end]] == remainder[order[g]]) ++end;
            if (end - g <= left) {
                for (std::size_t i = g; i < end; ++i) ++mass[order[i]];
                left -= static_cast<std::uint32_t>(end - g);
            }
            g = end;
        }
    } else {
        // No information: spread evenly, remainder to the lowest symbols.
        for (std::size_t i = 0; i < n; ++i) mass[i] += spare / static_cast<std::uint32_t>(n);
        left = spare % static_cast<std::uint32_t>(n);
        for (std::size_t i = 0; left > 0; ++i, --left) ++mass[i];
    }
    mass[heaviest] += left;

    CdfTable t;
    t.alphabet_min = alphabet_min;
    t.alphabet_max = alphabet_min + static_cast<std::int32_t>(n) - 1;
    t.cumulative.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) t.cumulative[i + 1] = t.cumulative[i] + mass[i];
    return t;
}

// Laplace(mu, b) interval masses over [alphabet_min, alphabet_max].
inline CdfTable build_cdf(double mu, double b, std::int32_t alphabet_min, std::int32_t alphabet_max) {
    require(alphabet_min < alphabet_max, Errc::invalid_argument, "CDF alphabet needs at least two symbols");
    require(b > 0.0, Errc::invalid_argument, "Laplace scale must be positive");
    require(static_cast<std::int64_t>(alphabet_max) - alphabet_min + 1 <= kCdfTotal, Errc::invalid_argument,
            "alphabet exceeds the 16-bit table");
    std::vector<double> w(static_cast<std::size_t>(alphabet_max - alphabet_min) + 1);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double s = static_cast<double>(alphabet_min) + static_cast<double>(i);
        w[i] = laplace_interval(s - 0.5, s + 0.5, mu, b);
    }
    return quantize_masses(alphabet_min, w);
}

// Bits a table spends on one symbol.
inline double symbol_cost(const CdfTable& t, std::int32_t s) {
    return kCdfBits - std::log2(static_cast<double>(t.mass(s)));
}

class RangeEncoder {
public:
    void encode(const CdfTable& t, std::int32_t symbol) {
        if (!t.contains(symbol))
            fail(Errc::out_of_alphabet, "symbol " + std::to_string(symbol) + " outside [" +
                                            std::to_string(t.alphabet_min) + ", " + std::to_string(t.alphabet_max) + "]");
        put(t.low(symbol), t.mass(symbol));
    }

    // `bits` raw bits of value, most significant first.
    void encode_bits(std::uint64_t value, int bits) {
        require(bits >= 0 && bits <= 64, Errc::invalid_argument, "bit count out of range");
        for (int i = bits - 1; i >= 0; --i) put(((value >> i) & 1u) ? kCdfTotal / 2 : 0, kCdfTotal / 2);
    }

    std::vector<std::uint8_t> finish() {
        // Lowest multiple of 2^shift inside [low, low + range), for the
        // largest whole-byte shift.
        int shift = kWindowBits;
        std::uint64_t value = 0;
        for (; shift > 0; shift -= 8) {
            const std::uint64_t unit = std::uint64_t{1} << shift;
            const std::uint64_t round_up = (low_ + unit - 1) & ~(unit - 1);
            if (round_up - low_ < range_) {
                value = round_up;
                break;
            }
        }
        if (shift == 0) value = low_;
        low_ = value;
        for (int emitted = 0; emitted < (kWindowBits - shift) / 8 + 1; ++emitted) shift_low();
        return std::move(out_);
    }

private:
    static constexpr int kWindowBits = 56;
    static constexpr std::uint64_t kTop = std::uint64_t{1} << kWindowBits;
    static constexpr std::uint64_t kBottom = std::uint64_t{1} << (kWindowBits - 8);

    void put(std::uint32_t cum, std::uint32_t freq) {
        const std::uint64_t r = range_ >> kCdfBits;
        low_ += r * cum;
        range_ = r * freq;
        while (range_ <= kBottom) {
            range_ <<= 8;
            shift_low();
        }
    }

    void shift_low() {
        const bool carry = low_ >= kTop;
        if (low_ < (std::uint64_t{0xFF} << (kWindowBits - 8)) || carry) {
            // The first cached byte can never receive a carry and is always 0.
            if (!first_) out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
            first_ = false;
            for (; pending_ > 0; --pending_) out_.push_back(static_cast<std::uint8_t>(0xFF + carry));
            cache_ = static_cast<std::uint8_t>(low_ >> (kWindowBits - 8));
        } else {
            ++pending_;
        }
        low_ = (low_ << 8) & (kTop - 1);
    }

    std::uint64_t low_ = 0;
    std::uint64_t range_ = kTop;
    std::uint8_t cache_ = 0;
    bool first_ = true;
    std::size_t pending_ = 0;
    std::vector<std::uint8_t> out_;

    friend class RangeDecoder;
};

class RangeDecoder {
public:
    explicit RangeDecoder(std::span<const std::uint8_t> bytes) : in_(bytes) {
        for (int i = 0; i < kWindowBits / 8; ++i) code_ = (code_ << 8) | next_byte();
    }

    std::int32_t decode(const CdfTable& t) {
        const std::uint64_t r = range_ >> kCdfBits;
        const std::uint64_t target = code_ / r;
        require(target < kCdfTotal, Errc::truncated, "corrupt range-coded stream");
        const auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), static_cast<std::uint32_t>(target));
        const auto index = static_cast<std::size_t>(it - t.cumulative.begin()) - 1;
        take(r, t.cumulative[index], t.cumulative[index + 1] - t.cumulative[index]);
        return t.alphabet_min + static_cast<std::int32_t>(index);
    }

    std::uint64_t decode_bits(int bits) {
        require(bits >= 0 && bits <= 64, Errc::invalid_argument, "bit count out of range");
        std::uint64_t v = 0;
        for (int i = 0; i < bits; ++i) {
            const std::uint64_t r = range_ >> kCdfBits;
            const bool one = code_ / r >= kCdfTotal / 2;
            require(code_ / r < kCdfTotal, Errc::truncated, "corrupt range-coded stream");
            take(r, one ? kCdfTotal / 2 : 0, kCdfTotal / 2);
            v = (v << 1) | (one ? 1u : 0u);
        }
        return v;
    }

    // Bytes of real input consumed so far.
    std::size_t consumed() const { return std::min(pos_, in_.size()); }

private:
    static constexpr int kWindowBits = RangeEncoder::kWindowBits;
    static constexpr std::uint64_t kBottom = RangeEncoder::kBottom;

    // A valid stream never needs more phantom zero bytes than the coder's
    // window; needing more means the stream was cut short.
    std::uint64_t next_byte() {
        if (pos_ < in_.size()) return in_[pos_++];
        ++pos_;
        require(pos_ - in_.size() <= kWindowBits / 8, Errc::truncated, "range-coded stream ended early");
        return 0;
    }

    void take(std::uint64_t r, std::uint32_t cum, std::uint32_t freq) {
        code_ -= r * cum;
        range_ = r * freq;
        require(code_ < range_, Errc::truncated, "corrupt range-coded stream");
        while (range_ <= kBottom) {
            range_ <<= 8;
            code_ = (code_ << 8) | next_byte();
        }
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    std::uint64_t code_ = 0;
    std::uint64_t range_ = RangeEncoder::kTop;
};

// A provider maps (index, symbols coded so far) to the table for that
// index, so tables may depend on earlier symbols. The decoder hands the
// provider exactly the prefix the encoder saw.
template <typename Provider>
std::vector<std::uint8_t> encode_symbols(std::span<const std::int32_t> symbols, Provider&& provider) {
    RangeEncoder enc;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const CdfTable& t = provider(i, symbols.first(i));
        if (!t.contains(symbols[i]))
            fail(Errc::out_of_alphabet, "symbol " + std::to_string(symbols[i]) + " at index " + std::to_string(i) +
                                            " outside [" + std::to_string(t.alphabet_min) + ", " +
                                            std::to_string(t.alphabet_max) + "]");
        enc.encode(t, symbols[i]);
    }
    return enc.finish();
}

template <typename Provider>
std::vector<std::int32_t> decode_symbols(std::span<const std::uint8_t> bytes, std::size_t count, Provider&& provider) {
    std::vector<std::int32_t> out;
    if (count == 0) return out;
    out.reserve(count);
    RangeDecoder dec(bytes);
    for (std::size_t i = 0; i < count; ++i) {
        const CdfTable& t = provider(i, std::span<const std::int32_t>(out.data(), i));
        out.push_back(dec.decode(t));
    }
    return out;
}

template <typename Provider>
double ideal_codelength(std::span<const std::int32_t> symbols, Provider&& provider) {
    double bits = 0.0;
    for (std::size_t i = 0; i < symbols.size(); ++i) bits += symbol_cost(provider(i, symbols.first(i)), symbols[i]);
    return bits;
}

} // namespace mdq
