#pragma once

#include <stdexcept>
#include <string>

namespace mdq {

enum class Errc {
    invalid_argument,
    shape_mismatch,
    out_of_alphabet,
    non_finite,
    truncated,
    bad_magic,
    bad_version,
    length_mismatch,
    inconsistent_pair,
    io,
};

inline const char* errc_name(Errc code) {
    switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::out_of_alphabet: return "symbol outside alphabet";
    case Errc::non_finite: return "non-finite value";
    case Errc::truncated: return "truncated stream";
    case Errc::bad_magic: return "unrecognized format";
    case Errc::bad_version: return "unsupported version";
    case Errc::length_mismatch: return "length mismatch";
    case Errc::inconsistent_pair: return "inconsistent description pair";
    case Errc::io: return "i/o error";
    }
    return "unknown error";
}

// Every failure in the library is reported through this type; code() lets
// callers tell bitstream failures apart without parsing messages.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, Errc code, const std::string& what) {
    if (!condition) fail(code, what);
}

} // namespace mdq
