#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "camel/ctensor.hpp"
#include "camel/episode.hpp"
#include "camel/errors.hpp"
#include "camel/rng.hpp"

namespace camel::signals {

enum class Scheme : std::uint8_t { BPSK, QPSK, PSK8, PAM4, QAM16, CPFSK, GFSK };

inline constexpr std::size_t kSchemeCount = 7;
inline constexpr double kCpfskIndex = 0.5;
inline constexpr double kGfskBT = 0.35;

const char* scheme_name(Scheme s);
/// Throws FormatError(UnknownScheme) for names outside the supported set.
Scheme parse_scheme(const std::string& name);
std::vector<Scheme> all_schemes();

struct SchemeSpec {
    Scheme id = Scheme::BPSK;
    std::string name;
    std::size_t bits_per_symbol = 1;
    std::size_t samples_per_symbol = 8;
    /// Unit-power constellation indexed by the symbol's bit pattern; empty for FSK schemes.
    std::vector<cplx> constellation;
};

SchemeSpec scheme_spec(Scheme s, std::size_t sps = 8);

struct SignalFrame {
    std::vector<cplx> samples;
    int label = 0;
    double snr_db = 0.0;
    friend bool operator==(const SignalFrame&, const SignalFrame&) = default;
};

/// Bits consumed by modulate() for one frame.
std::size_t bits_needed(Scheme s, std::size_t sps, std::size_t frame_len);

/// Clean unit-power frame. Constellation schemes use rectangular pulses of `sps` samples;
/// CPFSK and GFSK integrate the (Gaussian-filtered, for GFSK) frequency pulse into a
/// continuous phase. label is the scheme's enum value, snr_db is +inf.
SignalFrame modulate(std::span<const std::uint8_t> bits, Scheme s, std::size_t sps, std::size_t frame_len);
/// Same with uniformly random bits drawn from rng.
SignalFrame modulate(Scheme s, std::size_t sps, std::size_t frame_len, Rng& rng);

/// Adds circular complex Gaussian noise of variance 10^(-snr_db/10) per sample.
SignalFrame add_awgn(const SignalFrame& frame, double snr_db, Rng& rng);

/// Labelled frames; frame.label indexes `schemes`.
struct FramePool {
    std::vector<std::string> schemes;
    std::vector<SignalFrame> frames;
    friend bool operator==(const FramePool&, const FramePool&) = default;
};

struct GenSpec {
    std::vector<Scheme> schemes = all_schemes();
    std::vector<double> snrs_db = {0.0, 10.0, 20.0};
    std::size_t frames_per_cell = 100;
    std::size_t frame_len = 128;
    std::size_t sps = 8;
    std::uint64_t seed = 0;
};

/// Frames for every (scheme, SNR) cell. Samples and SNR tags are rounded to f32 so the pool
/// survives the file format unchanged.
FramePool generate_pool(const GenSpec& spec);

/// n_way distinct schemes with at least k_shot + q_size frames in [snr_lo, snr_hi], then
/// disjoint support and query frames per scheme. Labels are remapped to draw order.
Episode sample_episode(const FramePool& pool, std::size_t n_way, std::size_t k_shot, std::size_t q_size,
                       double snr_lo, double snr_hi, Rng& rng);
/// Same, also reporting the pool indices used (support first, then query).
Episode sample_episode(const FramePool& pool, std::size_t n_way, std::size_t k_shot, std::size_t q_size,
                       double snr_lo, double snr_hi, Rng& rng, std::vector<std::size_t>* used);

enum class Scenario : std::uint8_t { SnrGe0, SnrEq0, PO };
const char* scenario_name(Scenario s);
Scenario parse_scenario(const std::string& s);

struct Split {
    FramePool train;
    FramePool test;
    std::vector<std::size_t> train_ids;  // indices into the source pool
    std::vector<std::size_t> test_ids;
};

/// SnrGe0 / SnrEq0: 75 % of the matching frames train, the rest test.
/// PO: among SNR >= 0 frames, set P is `p_classes` (default: the first five scheme ids, or
/// all but one when fewer exist); training gets every O frame plus 5 % of P, testing the
/// remaining 95 % of P.
Split scenario_split(const FramePool& pool, Scenario kind, std::uint64_t seed,
                     std::vector<int> p_classes = {});

/// Frames whose SNR lies in [lo, hi].
FramePool filter_snr(const FramePool& pool, double lo, double hi);

// CSIG binary layout (little-endian): "CSIG", u32 version, u32 n_schemes, per scheme
// (u16 length + UTF-8 name), u64 n_frames, per frame (u32 scheme id, f32 snr_db,
// u32 frame_len, frame_len x (f32 I, f32 Q)).
inline constexpr std::uint32_t kCsigVersion = 1;

std::vector<std::uint8_t> encode_frames(const FramePool& pool);
FramePool decode_frames(std::span<const std::uint8_t> bytes);
void save_frames(const std::string& path, const FramePool& pool);
FramePool load_frames(const std::string& path);

}  // namespace camel::signals
