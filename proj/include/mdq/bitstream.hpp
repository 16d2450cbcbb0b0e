#pragma once

// Description serialization and decoding.
//
// Layout (all multi-byte fields little-endian):
//
//   "IMDQ" | version u8 | description id u8 | W u16 | H u16 | C u8 | N u8 |
//   C_ctx u8 | step_theta f32 | step_psi f32 | sigma_theta f32 |
//   sigma_psi f32 | N x latent step f32 | theta bytes u32 | psi bytes u32 |
//   N x latent bytes u32 (indexed by level) |
//   theta payload | psi payload | level N-1 payload ... level 0 payload
//
// Parameters use a static zero-mean Laplace table with escapes; latent
// levels are coded coarsest first, each in raster order, with every symbol's
// table predicted by the autoregressive model from already decoded symbols.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "mdq/arm.hpp"
#include "mdq/error.hpp"
#include "mdq/image.hpp"
#include "mdq/latents.hpp"
#include "mdq/param_quant.hpp"
#include "mdq/range_coder.hpp"
#include "mdq/synthesis.hpp"

namespace mdq {

inline constexpr char kMagic[4] = {'I', 'M', 'D', 'Q'};
inline constexpr std::uint8_t kVersion = 1;

struct Header {
    std::uint8_t version = kVersion;
    std::uint8_t description_id = 1;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::uint8_t channels = 0;
    std::uint8_t levels = 0;
    std::uint8_t context_count = 0;
    float step_theta = 0.0f;
    float step_psi = 0.0f;
    float sigma_theta = 0.0f;
    float sigma_psi = 0.0f;
    std::vector<float> latent_steps;
    std::uint32_t theta_bytes = 0;
    std::uint32_t psi_bytes = 0;
    std::vector<std::uint32_t> latent_bytes; // by level index

    std::size_t size_bytes() const { return 4 + 1 + 1 + 2 + 2 + 1 + 1 + 1 + 4 * 4 + 4 * levels + 4 + 4 + 4 * levels; }
    bool operator==(const Header&) const = default;
};

struct Description {
    Header header;
    std::vector<std::uint8_t> theta_payload;
    std::vector<std::uint8_t> psi_payload;
    std::vector<std::vector<std::uint8_t>> latent_payloads; // by level index

    std::size_t size_bytes() const {
        std::size_t n = header.size_bytes() + theta_payload.size() + psi_payload.size();
        for (const auto& p : latent_payloads) n += p.size();
        return n;
    }
};

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { out.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { out.insert(out.end(), b.begin(), b.end()); }

    std::vector<std::uint8_t> out;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() {
        const auto b = take(2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        const auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > in_.size() - pos_)
            fail(Errc::truncated, "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                                      ", stream has " + std::to_string(in_.size()));
        const auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

} // namespace detail

// Parameter symbols: ranks |s| < kParamEscape sit in a Laplace table; the
// two end symbols escape to an order-k exp-Golomb code of |s| - kParamEscape
// sent as raw bits, with k following the table's scale.
inline constexpr std::int32_t kParamEscape = 255;

inline int param_golomb_order(double b) {
    if (!(b > 1.0)) return 0;
    return static_cast<int>(std::min(40.0, std::floor(std::log2(b))));
}

namespace detail {

inline void put_exp_golomb(RangeEncoder& enc, std::uint64_t v, int k) {
    const std::uint64_t x = v + (std::uint64_t{1} << k);
    const int width = std::bit_width(x);
    enc.encode_bits(0, width - 1 - k);
    enc.encode_bits(x, width);
}

inline std::uint64_t get_exp_golomb(RangeDecoder& dec, int k) {
    int zeros = 0;
    while (dec.decode_bits(1) == 0) {
        ++zeros;
        require(zeros <= 62 - k, Errc::truncated, "corrupt parameter escape code");
    }
    const int width = zeros + k + 1;
    const std::uint64_t x = (std::uint64_t{1} << (width - 1)) | dec.decode_bits(width - 1);
    return x - (std::uint64_t{1} << k);
}

} // namespace detail

inline std::vector<std::uint8_t> encode_params(std::span<const std::int64_t> symbols, double step, double sigma) {
    const double b = param_scale(step, sigma);
    const CdfTable table = build_cdf(0.0, b, -kParamEscape, kParamEscape);
    const int k = param_golomb_order(b);
    RangeEncoder enc;
    for (std::int64_t s : symbols) {
        if (std::abs(s) < kParamEscape) {
            enc.encode(table, static_cast<std::int32_t>(s));
            continue;
        }
        enc.encode(table, s < 0 ? -kParamEscape : kParamEscape);
        detail::put_exp_golomb(enc, static_cast<std::uint64_t>(std::abs(s) - kParamEscape), k);
    }
    return enc.finish();
}

inline std::vector<std::int64_t> decode_params(std::span<const std::uint8_t> bytes, std::size_t count, double step,
                                               double sigma) {
    const double b = param_scale(step, sigma);
    const CdfTable table = build_cdf(0.0, b, -kParamEscape, kParamEscape);
    const int k = param_golomb_order(b);
    RangeDecoder dec(bytes);
    std::vector<std::int64_t> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::int32_t s = dec.decode(table);
        if (std::abs(s) < kParamEscape) {
            out.push_back(s);
            continue;
        }
        const auto extra = detail::get_exp_golomb(dec, k);
        require(extra < static_cast<std::uint64_t>(kParamSymbolLimit), Errc::truncated, "parameter symbol overflow");
        const auto mag = static_cast<std::int64_t>(extra) + kParamEscape;
        out.push_back(s < 0 ? -mag : mag);
    }
    return out;
}

// Table source for one latent level: the autoregressive model evaluated on
// the causal context read from the symbols coded so far.
class LatentTableProvider {
public:
    LatentTableProvider(const ArmParams& psi, const ContextSpec& spec, std::size_t rows, std::size_t cols)
        : eval_(psi), spec_(spec), rows_(rows), cols_(cols), ctx_(spec.size()) {}

    const CdfTable& operator()(std::size_t index, std::span<const std::int32_t> prefix) {
        const std::size_t r = index / cols_, c = index % cols_;
        for (std::size_t i = 0; i < spec_.size(); ++i) {
            const long long rr = static_cast<long long>(r) + spec_.offsets[i].first;
            const long long cc = static_cast<long long>(c) + spec_.offsets[i].second;
            ctx_[i] = (rr < 0 || cc < 0 || cc >= static_cast<long long>(cols_))
                          ? 0.0
                          : static_cast<double>(prefix[static_cast<std::size_t>(rr) * cols_ + static_cast<std::size_t>(cc)]);
        }
        const auto [mu, b] = eval_(ctx_);
        table_ = build_cdf(mu, b, kLatentMin, kLatentMax);
        return table_;
    }

private:
    ArmEvaluator eval_;
    const ContextSpec& spec_;
    std::size_t rows_, cols_;
    std::vector<double> ctx_;
    CdfTable table_;
};

inline std::vector<std::uint8_t> encode_latent_level(const Grid<std::int32_t>& symbols, const ArmParams& psi,
                                                     const ContextSpec& spec) {
    LatentTableProvider provider(psi, spec, symbols.rows, symbols.cols);
    return encode_symbols(std::span<const std::int32_t>(symbols.values), provider);
}

inline Grid<std::int32_t> decode_latent_level(std::span<const std::uint8_t> bytes, std::size_t rows, std::size_t cols,
                                              const ArmParams& psi, const ContextSpec& spec) {
    LatentTableProvider provider(psi, spec, rows, cols);
    return Grid<std::int32_t>(rows, cols, decode_symbols(bytes, rows * cols, provider));
}

struct StreamMeta {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::size_t context_count = 12;
};

// Description j (1-based) from quantized parameters and a quantized pyramid.
inline Description write_description(const QuantizedParams& q, const LatentPyramid& pyramid, const StreamMeta& meta) {
    pyramid.validate();
    const int j = pyramid.description_id;
    require(static_cast<std::size_t>(j) <= q.psi.size(), Errc::invalid_argument, "no parameters for description");
    require(meta.width > 0 && meta.width <= 0xFFFF && meta.height > 0 && meta.height <= 0xFFFF, Errc::invalid_argument,
            "image dimensions must fit 16 bits");
    require(meta.channels > 0 && meta.channels <= 0xFF && pyramid.level_count() <= 0xFF &&
                meta.context_count > 0 && meta.context_count <= 0xFF,
            Errc::invalid_argument, "header counts must fit 8 bits");
    require(pyramid.levels[0].rows == meta.height && pyramid.levels[0].cols == meta.width, Errc::shape_mismatch,
            "pyramid does not match the image size");
    const QuantizedGroup& psi_q = q.psi[static_cast<std::size_t>(j - 1)];
    require(q.theta.symbols.size() ==
                Mlp::zeros(SynthesisParams::widths(pyramid.level_count(), meta.channels), false).parameter_count(),
            Errc::shape_mismatch, "synthesis parameter count does not match the header");
    require(psi_q.symbols.size() == Mlp::zeros(ArmParams::widths(meta.context_count), false).parameter_count(),
            Errc::shape_mismatch, "autoregressive parameter count does not match the header");
    for (double s : {q.theta.step, psi_q.step, q.theta.sigma, psi_q.sigma})
        require(as_float32(s) == s && s > 0.0, Errc::invalid_argument, "steps and sigmas must be positive float32 values");
    for (double s : pyramid.steps)
        require(as_float32(s) == s, Errc::invalid_argument, "latent steps must be float32 values");

    Description d;
    Header& h = d.header;
    h.description_id = static_cast<std::uint8_t>(j);
    h.width = static_cast<std::uint16_t>(meta.width);
    h.height = static_cast<std::uint16_t>(meta.height);
    h.channels = static_cast<std::uint8_t>(meta.channels);
    h.levels = static_cast<std::uint8_t>(pyramid.level_count());
    h.context_count = static_cast<std::uint8_t>(meta.context_count);
    h.step_theta = static_cast<float>(q.theta.step);
    h.step_psi = static_cast<float>(psi_q.step);
    h.sigma_theta = static_cast<float>(q.theta.sigma);
    h.sigma_psi = static_cast<float>(psi_q.sigma);
    for (double s : pyramid.steps) h.latent_steps.push_back(static_cast<float>(s));

    d.theta_payload = encode_params(q.theta.symbols, q.theta.step, q.theta.sigma);
    d.psi_payload = encode_params(psi_q.symbols, psi_q.step, psi_q.sigma);
    const ArmParams psi = q.arm(static_cast<std::size_t>(j - 1), meta.context_count);
    const ContextSpec spec = ContextSpec::with_count(meta.context_count);
    const auto symbols = pyramid_symbols(pyramid);
    d.latent_payloads.resize(symbols.size());
    for (std::size_t k = symbols.size(); k-- > 0;) d.latent_payloads[k] = encode_latent_level(symbols[k], psi, spec);

    h.theta_bytes = static_cast<std::uint32_t>(d.theta_payload.size());
    h.psi_bytes = static_cast<std::uint32_t>(d.psi_payload.size());
    for (const auto& p : d.latent_payloads) h.latent_bytes.push_back(static_cast<std::uint32_t>(p.size()));
    return d;
}

inline std::vector<std::uint8_t> to_bytes(const Description& d) {
    const Header& h = d.header;
    detail::ByteWriter w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u8(h.version);
    w.u8(h.description_id);
    w.u16(h.width);
    w.u16(h.height);
    w.u8(h.channels);
    w.u8(h.levels);
    w.u8(h.context_count);
    w.f32(h.step_theta);
    w.f32(h.step_psi);
    w.f32(h.sigma_theta);
    w.f32(h.sigma_psi);
    for (float s : h.latent_steps) w.f32(s);
    w.u32(h.theta_bytes);
    w.u32(h.psi_bytes);
    for (auto n : h.latent_bytes) w.u32(n);
    w.bytes(d.theta_payload);
    w.bytes(d.psi_payload);
    for (std::size_t k = d.latent_payloads.size(); k-- > 0;) w.bytes(d.latent_payloads[k]);
    return std::move(w.out);
}

inline Description parse_description(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    Description d;
    Header& h = d.header;
    const auto magic = r.take(4);
    require(std::memcmp(magic.data(), kMagic, 4) == 0, Errc::bad_magic, "stream does not start with IMDQ");
    h.version = r.u8();
    require(h.version == kVersion, Errc::bad_version, "version " + std::to_string(h.version));
    h.description_id = r.u8();
    h.width = r.u16();
    h.height = r.u16();
    h.channels = r.u8();
    h.levels = r.u8();
    h.context_count = r.u8();
    require(h.description_id == 1 || h.description_id == 2, Errc::invalid_argument, "description id must be 1 or 2");
    require(h.width > 0 && h.height > 0 && h.channels > 0 && h.levels > 0 && h.context_count > 0,
            Errc::invalid_argument, "header counts must be positive");
    require(h.levels <= 16, Errc::invalid_argument, "too many levels");
    h.step_theta = r.f32();
    h.step_psi = r.f32();
    h.sigma_theta = r.f32();
    h.sigma_psi = r.f32();
    for (float s : {h.step_theta, h.step_psi, h.sigma_theta, h.sigma_psi})
        require(std::isfinite(s) && s > 0.0f, Errc::invalid_argument, "header steps and sigmas must be positive");
    for (std::size_t k = 0; k < h.levels; ++k) {
        h.latent_steps.push_back(r.f32());
        require(std::isfinite(h.latent_steps.back()) && h.latent_steps.back() > 0.0f, Errc::invalid_argument,
                "latent steps must be positive");
    }
    h.theta_bytes = r.u32();
    h.psi_bytes = r.u32();
    std::uint64_t payload = std::uint64_t{h.theta_bytes} + h.psi_bytes;
    for (std::size_t k = 0; k < h.levels; ++k) {
        h.latent_bytes.push_back(r.u32());
        payload += h.latent_bytes.back();
    }
    require(payload <= r.remaining(), Errc::truncated,
            "payload lengths sum to " + std::to_string(payload) + " bytes, " + std::to_string(r.remaining()) + " present");
    require(payload == r.remaining(), Errc::length_mismatch,
            std::to_string(r.remaining() - payload) + " trailing bytes after the payloads");
    auto copy = [&](std::size_t n) {
        const auto s = r.take(n);
        return std::vector<std::uint8_t>(s.begin(), s.end());
    };
    d.theta_payload = copy(h.theta_bytes);
    d.psi_payload = copy(h.psi_bytes);
    d.latent_payloads.resize(h.levels);
    for (std::size_t k = h.levels; k-- > 0;) d.latent_payloads[k] = copy(h.latent_bytes[k]);
    return d;
}

struct DecodedDescription {
    Header header;
    QuantizedGroup theta;
    QuantizedGroup psi;
    LatentPyramid pyramid;

    SynthesisParams synthesis() const {
        return {Mlp::unflatten(SynthesisParams::widths(header.levels, header.channels), theta.dequantized())};
    }
};

inline DecodedDescription decode_description(const Description& d) {
    const Header& h = d.header;
    DecodedDescription out;
    out.header = h;
    const auto theta_widths = SynthesisParams::widths(h.levels, h.channels);
    const auto psi_widths = ArmParams::widths(h.context_count);
    const ContextSpec spec = ContextSpec::with_count(h.context_count);

    out.theta.step = h.step_theta;
    out.theta.sigma = h.sigma_theta;
    out.theta.symbols = decode_params(d.theta_payload, Mlp::zeros(theta_widths, false).parameter_count(), h.step_theta,
                                      h.sigma_theta);
    out.psi.step = h.step_psi;
    out.psi.sigma = h.sigma_psi;
    out.psi.symbols =
        decode_params(d.psi_payload, Mlp::zeros(psi_widths, false).parameter_count(), h.step_psi, h.sigma_psi);
    const ArmParams psi{Mlp::unflatten(psi_widths, out.psi.dequantized())};

    std::vector<Grid<std::int32_t>> levels(h.levels);
    for (std::size_t k = h.levels; k-- > 0;) {
        const auto s = level_shape(h.height, h.width, k);
        levels[k] = decode_latent_level(d.latent_payloads[k], s.rows, s.cols, psi, spec);
    }
    std::vector<double> steps(h.latent_steps.begin(), h.latent_steps.end());
    out.pyramid = pyramid_from_symbols(levels, steps, h.description_id);
    return out;
}

inline DecodedDescription read_description(std::span<const std::uint8_t> bytes) {
    return decode_description(parse_description(bytes));
}

enum class ReconstructionMode { side1, side2, central };

inline const char* mode_name(ReconstructionMode m) {
    switch (m) {
    case ReconstructionMode::side1: return "side1";
    case ReconstructionMode::side2: return "side2";
    case ReconstructionMode::central: return "central";
    }
    return "?";
}

struct DecodedImage {
    Image image; // unclamped synthesis output
    ReconstructionMode mode;
};

inline DecodedImage decode_image(const std::vector<DecodedDescription>& received) {
    require(received.size() == 1 || received.size() == 2, Errc::invalid_argument, "need one or two descriptions");
    const auto& a = received[0];
    if (received.size() == 1) {
        return {synthesize(a.synthesis(), a.pyramid.levels, a.header.height, a.header.width),
                a.header.description_id == 1 ? ReconstructionMode::side1 : ReconstructionMode::side2};
    }
    const auto& b = received[1];
    const Header &ha = a.header, &hb = b.header;
    require(ha.width == hb.width && ha.height == hb.height && ha.channels == hb.channels && ha.levels == hb.levels &&
                ha.context_count == hb.context_count,
            Errc::inconsistent_pair, "descriptions disagree on image geometry");
    require(ha.step_theta == hb.step_theta && ha.sigma_theta == hb.sigma_theta && a.theta.symbols == b.theta.symbols,
            Errc::inconsistent_pair, "descriptions carry different synthesis parameters");
    // Two copies of one description interleave to that description itself.
    const auto& d1 = hb.description_id == 1 && ha.description_id == 2 ? b : a;
    const auto& d2 = &d1 == &a ? b : a;
    const auto central = interleave(d1.pyramid, d2.pyramid).as_pyramid();
    return {synthesize(d1.synthesis(), central.levels, ha.height, ha.width), ReconstructionMode::central};
}

} // namespace mdq
