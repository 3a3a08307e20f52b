#include "camel/signals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>

#include "camel/bytes.hpp"

namespace camel {

namespace bytes {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatError::Kind::Io, "cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw FormatError(FormatError::Kind::Io, "error reading '" + path + "'");
    return data;
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::Io, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw FormatError(FormatError::Kind::Io, "error writing '" + path + "'");
}

}  // namespace bytes

namespace signals {

namespace {

constexpr const char* kNames[kSchemeCount] = {"BPSK", "QPSK", "8PSK", "PAM4", "QAM16", "CPFSK", "GFSK"};

constexpr std::size_t gray(std::size_t k) { return k ^ (k >> 1); }

bool is_fsk(Scheme s) { return s == Scheme::CPFSK || s == Scheme::GFSK; }

/// Gaussian frequency pulse of a GFSK modulator, normalized to unit sum.
std::vector<double> gaussian_taps(std::size_t sps, double bt) {
    const double sigma = std::sqrt(std::log(2.0)) / (2.0 * std::numbers::pi * bt);  // in symbols
    const std::size_t half = 2 * sps;                                               // +-2 symbols
    std::vector<double> g(2 * half + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = (static_cast<double>(i) - static_cast<double>(half)) / static_cast<double>(sps);
        g[i] = std::exp(-t * t / (2.0 * sigma * sigma));
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
}

}  // namespace

const char* scheme_name(Scheme s) { return kNames[static_cast<std::size_t>(s)]; }

Scheme parse_scheme(const std::string& name) {
    for (std::size_t i = 0; i < kSchemeCount; ++i)
        if (name == kNames[i]) return static_cast<Scheme>(i);
    throw FormatError(FormatError::Kind::UnknownScheme, "unknown modulation scheme '" + name + "'");
}

std::vector<Scheme> all_schemes() {
    std::vector<Scheme> v;
    for (std::size_t i = 0; i < kSchemeCount; ++i) v.push_back(static_cast<Scheme>(i));
    return v;
}

SchemeSpec scheme_spec(Scheme s, std::size_t sps) {
    SchemeSpec spec;
    spec.id = s;
    spec.name = scheme_name(s);
    spec.samples_per_symbol = sps;
    const double r2 = std::sqrt(2.0), r5 = std::sqrt(5.0), r10 = std::sqrt(10.0);
    auto& c = spec.constellation;
    switch (s) {
        case Scheme::BPSK:
            spec.bits_per_symbol = 1;
            c = {1.0, -1.0};
            break;
        case Scheme::QPSK:
            spec.bits_per_symbol = 2;
            c.resize(4);
            for (std::size_t b = 0; b < 4; ++b) {
                c[b] = cplx(1.0 - 2.0 * static_cast<double>(b >> 1), 1.0 - 2.0 * static_cast<double>(b & 1)) / r2;
            }
            break;
        case Scheme::PSK8:
            spec.bits_per_symbol = 3;
            c.resize(8);
            for (std::size_t k = 0; k < 8; ++k) c[gray(k)] = std::polar(1.0, 2.0 * std::numbers::pi * k / 8.0);
            break;
        case Scheme::PAM4:
            spec.bits_per_symbol = 2;
            c.resize(4);
            for (std::size_t k = 0; k < 4; ++k) c[gray(k)] = (2.0 * static_cast<double>(k) - 3.0) / r5;
            break;
        case Scheme::QAM16: {
            spec.bits_per_symbol = 4;
            double level[4];
            for (std::size_t k = 0; k < 4; ++k) level[gray(k)] = 2.0 * static_cast<double>(k) - 3.0;
            c.resize(16);
            for (std::size_t b = 0; b < 16; ++b) c[b] = cplx(level[b >> 2], level[b & 3]) / r10;
            break;
        }
        case Scheme::CPFSK:
        case Scheme::GFSK:
            spec.bits_per_symbol = 1;
            break;
    }
    return spec;
}

std::size_t bits_needed(Scheme s, std::size_t sps, std::size_t frame_len) {
    if (sps == 0) throw std::invalid_argument("modulate: samples per symbol must be positive");
    const std::size_t symbols = (frame_len + sps - 1) / sps;
    return symbols * scheme_spec(s, sps).bits_per_symbol;
}

SignalFrame modulate(std::span<const std::uint8_t> bits, Scheme s, std::size_t sps, std::size_t frame_len) {
    if (static_cast<std::size_t>(s) >= kSchemeCount) {
        throw std::invalid_argument("modulate: unsupported scheme id " + std::to_string(static_cast<int>(s)));
    }
    const std::size_t need = bits_needed(s, sps, frame_len);
    if (bits.size() < need) {
        throw std::invalid_argument(std::string("modulate: ") + scheme_name(s) + " needs " + std::to_string(need) +
                                    " bits for " + std::to_string(frame_len) + " samples, got " +
                                    std::to_string(bits.size()));
    }
    const SchemeSpec spec = scheme_spec(s, sps);
    const std::size_t nsym = (frame_len + sps - 1) / sps;
    std::vector<std::size_t> sym(nsym);
    for (std::size_t i = 0; i < nsym; ++i) {
        std::size_t v = 0;
        for (std::size_t b = 0; b < spec.bits_per_symbol; ++b) v = (v << 1) | (bits[i * spec.bits_per_symbol + b] & 1u);
        sym[i] = v;
    }

    SignalFrame f;
    f.label = static_cast<int>(s);
    f.snr_db = std::numeric_limits<double>::infinity();
    f.samples.resize(frame_len);
    if (!is_fsk(s)) {
        for (std::size_t n = 0; n < frame_len; ++n) f.samples[n] = spec.constellation[sym[n / sps]];
        return f;
    }

    // Continuous phase: each symbol a = +-1 advances the phase by pi h a in total.
    std::vector<double> freq(nsym * sps);
    for (std::size_t n = 0; n < freq.size(); ++n) freq[n] = sym[n / sps] ? 1.0 : -1.0;
    if (s == Scheme::GFSK) {
        const auto g = gaussian_taps(sps, kGfskBT);
        const auto half = static_cast<std::ptrdiff_t>(g.size() / 2);
        std::vector<double> shaped(freq.size(), 0.0);
        for (std::size_t n = 0; n < freq.size(); ++n) {
            for (std::size_t k = 0; k < g.size(); ++k) {
                const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(n) + static_cast<std::ptrdiff_t>(k) - half;
                if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(freq.size())) shaped[n] += g[k] * freq[idx];
            }
        }
        freq = std::move(shaped);
    }
    const double step = std::numbers::pi * kCpfskIndex / static_cast<double>(sps);
    double phase = 0.0;
    for (std::size_t n = 0; n < frame_len; ++n) {
        f.samples[n] = std::polar(1.0, phase);
        phase += step * freq[n];
    }
    return f;
}

SignalFrame modulate(Scheme s, std::size_t sps, std::size_t frame_len, Rng& rng) {
    std::vector<std::uint8_t> bits(bits_needed(s, sps, frame_len));
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next_u64() >> 63);
    return modulate(bits, s, sps, frame_len);
}

SignalFrame add_awgn(const SignalFrame& frame, double snr_db, Rng& rng) {
    SignalFrame out = frame;
    const double sd = std::sqrt(std::pow(10.0, -snr_db / 10.0) / 2.0);
    for (auto& z : out.samples) {
        const double re = rng.normal();
        const double im = rng.normal();
        z += cplx(sd * re, sd * im);
    }
    out.snr_db = snr_db;
    return out;
}

FramePool generate_pool(const GenSpec& spec) {
    FramePool pool;
    for (auto s : spec.schemes) pool.schemes.emplace_back(scheme_name(s));
    const Rng base(spec.seed);
    std::uint64_t cell = 0;
    for (std::size_t si = 0; si < spec.schemes.size(); ++si) {
        for (double snr : spec.snrs_db) {
            Rng rng = base.split(cell++);
            const auto snr32 = static_cast<double>(static_cast<float>(snr));
            for (std::size_t i = 0; i < spec.frames_per_cell; ++i) {
                SignalFrame f = add_awgn(modulate(spec.schemes[si], spec.sps, spec.frame_len, rng), snr32, rng);
                f.label = static_cast<int>(si);
                for (auto& z : f.samples) {
                    z = cplx(static_cast<float>(z.real()), static_cast<float>(z.imag()));
                }
                pool.frames.push_back(std::move(f));
            }
        }
    }
    return pool;
}

namespace {

CTensor stack(const FramePool& pool, const std::vector<std::size_t>& ids) {
    const std::size_t L = pool.frames.at(ids.front()).samples.size();
    CTensor t({ids.size(), 1, L});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& s = pool.frames[ids[i]].samples;
        if (s.size() != L) throw ShapeError("sample_episode: frames of different lengths in one episode");
        std::copy(s.begin(), s.end(), t.data().begin() + static_cast<std::ptrdiff_t>(i * L));
    }
    return t;
}

}  // namespace

Episode sample_episode(const FramePool& pool, std::size_t n_way, std::size_t k_shot, std::size_t q_size,
                       double snr_lo, double snr_hi, Rng& rng) {
    return sample_episode(pool, n_way, k_shot, q_size, snr_lo, snr_hi, rng, nullptr);
}

Episode sample_episode(const FramePool& pool, std::size_t n_way, std::size_t k_shot, std::size_t q_size,
                       double snr_lo, double snr_hi, Rng& rng, std::vector<std::size_t>* used) {
    if (n_way == 0 || k_shot == 0 || q_size == 0) throw std::invalid_argument("sample_episode: counts must be positive");
    std::vector<std::vector<std::size_t>> by_class(pool.schemes.size());
    for (std::size_t i = 0; i < pool.frames.size(); ++i) {
        const auto& f = pool.frames[i];
        if (f.snr_db >= snr_lo && f.snr_db <= snr_hi) by_class.at(static_cast<std::size_t>(f.label)).push_back(i);
    }
    std::vector<int> eligible;
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].size() >= k_shot + q_size) eligible.push_back(static_cast<int>(c));
    if (eligible.size() < n_way) {
        throw std::invalid_argument("sample_episode: only " + std::to_string(eligible.size()) + " schemes have " +
                                    std::to_string(k_shot + q_size) + " frames in the SNR range, need " +
                                    std::to_string(n_way));
    }
    for (std::size_t i = 0; i < n_way; ++i) {
        std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
    }
    Episode ep;
    ep.n_way = n_way;
    ep.k_shot = k_shot;
    ep.classes.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n_way));
    std::vector<std::size_t> sup, qry;
    for (std::size_t w = 0; w < n_way; ++w) {
        auto& ids = by_class[static_cast<std::size_t>(ep.classes[w])];
        for (std::size_t i = 0; i < k_shot + q_size; ++i) std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);
        for (std::size_t i = 0; i < k_shot; ++i) {
            sup.push_back(ids[i]);
            ep.support_y.push_back(static_cast<int>(w));
        }
        for (std::size_t i = 0; i < q_size; ++i) {
            qry.push_back(ids[k_shot + i]);
            ep.query_y.push_back(static_cast<int>(w));
        }
    }
    ep.support_x = stack(pool, sup);
    ep.query_x = stack(pool, qry);
    if (used) {
        used->assign(sup.begin(), sup.end());
        used->insert(used->end(), qry.begin(), qry.end());
    }
    return ep;
}

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::SnrGe0: return "snr_ge0";
        case Scenario::SnrEq0: return "snr_eq0";
        case Scenario::PO: return "p_o";
    }
    return "?";
}

Scenario parse_scenario(const std::string& s) {
    if (s == "snr_ge0") return Scenario::SnrGe0;
    if (s == "snr_eq0") return Scenario::SnrEq0;
    if (s == "p_o") return Scenario::PO;
    throw std::invalid_argument("unknown scenario '" + s + "' (expected snr_ge0, snr_eq0 or p_o)");
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

FramePool subset(const FramePool& pool, const std::vector<std::size_t>& ids) {
    FramePool out;
    out.schemes = pool.schemes;
    for (auto i : ids) out.frames.push_back(pool.frames[i]);
    return out;
}

std::size_t share(std::size_t n, double frac) { return static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))); }

}  // namespace

Split scenario_split(const FramePool& pool, Scenario kind, std::uint64_t seed, std::vector<int> p_classes) {
    Rng rng(seed);
    Split sp;
    if (kind == Scenario::PO) {
        const std::size_t nc = pool.schemes.size();
        if (nc < 2) throw std::invalid_argument("scenario_split: p_o needs at least two schemes");
        if (p_classes.empty()) {
            for (std::size_t c = 0; c < std::min<std::size_t>(5, nc - 1); ++c) p_classes.push_back(static_cast<int>(c));
        }
        std::vector<bool> in_p(nc, false);
        for (int c : p_classes) in_p.at(static_cast<std::size_t>(c)) = true;
        std::vector<std::size_t> p, o;
        for (std::size_t i = 0; i < pool.frames.size(); ++i) {
            const auto& f = pool.frames[i];
            if (f.snr_db < 0.0) continue;
            (in_p[static_cast<std::size_t>(f.label)] ? p : o).push_back(i);
        }
        if (p.empty() || o.empty()) throw std::invalid_argument("scenario_split: p_o needs SNR >= 0 frames in both P and O");
        shuffle(p, rng);
        const std::size_t np = share(p.size(), 0.05);
        sp.train_ids = o;
        sp.train_ids.insert(sp.train_ids.end(), p.begin(), p.begin() + static_cast<std::ptrdiff_t>(np));
        sp.test_ids.assign(p.begin() + static_cast<std::ptrdiff_t>(np), p.end());
    } else {
        std::vector<std::size_t> ids;
        for (std::size_t i = 0; i < pool.frames.size(); ++i) {
            const double s = pool.frames[i].snr_db;
            if (kind == Scenario::SnrGe0 ? s >= 0.0 : s == 0.0) ids.push_back(i);
        }
        if (ids.empty()) {
            throw std::invalid_argument(std::string("scenario_split: no frames match ") + scenario_name(kind));
        }
        shuffle(ids, rng);
        const std::size_t nt = share(ids.size(), 0.75);
        sp.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(nt));
        sp.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(nt), ids.end());
    }
    std::sort(sp.train_ids.begin(), sp.train_ids.end());
    std::sort(sp.test_ids.begin(), sp.test_ids.end());
    sp.train = subset(pool, sp.train_ids);
    sp.test = subset(pool, sp.test_ids);
    return sp;
}

FramePool filter_snr(const FramePool& pool, double lo, double hi) {
    FramePool out;
    out.schemes = pool.schemes;
    for (const auto& f : pool.frames)
        if (f.snr_db >= lo && f.snr_db <= hi) out.frames.push_back(f);
    return out;
}

std::vector<std::uint8_t> encode_frames(const FramePool& pool) {
    bytes::Writer w;
    w.raw("CSIG", 4);
    w.put<std::uint32_t>(kCsigVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(pool.schemes.size()));
    for (const auto& n : pool.schemes) w.str16(n);
    w.put<std::uint64_t>(pool.frames.size());
    for (const auto& f : pool.frames) {
        if (f.label < 0 || static_cast<std::size_t>(f.label) >= pool.schemes.size()) {
            throw FormatError(FormatError::Kind::Invalid, "encode_frames: frame label outside the scheme table");
        }
        w.put<std::uint32_t>(static_cast<std::uint32_t>(f.label));
        w.put<float>(static_cast<float>(f.snr_db));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(f.samples.size()));
        for (const auto& z : f.samples) {
            w.put<float>(static_cast<float>(z.real()));
            w.put<float>(static_cast<float>(z.imag()));
        }
    }
    return std::move(w.buffer());
}

FramePool decode_frames(std::span<const std::uint8_t> data) {
    if (data.size() < 4 || std::memcmp(data.data(), "CSIG", 4) != 0) {
        throw FormatError(FormatError::Kind::BadMagic, "not a CSIG frame file (bad magic)");
    }
    bytes::Reader r(data.subspan(4), "CSIG");
    const auto version = r.get<std::uint32_t>();
    if (version != kCsigVersion) {
        throw FormatError(FormatError::Kind::BadVersion, "unsupported CSIG version " + std::to_string(version));
    }
    FramePool pool;
    const auto ns = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < ns; ++i) {
        std::string name = r.str16();
        parse_scheme(name);
        pool.schemes.push_back(std::move(name));
    }
    const auto nf = r.get<std::uint64_t>();
    // Each frame needs at least 12 header bytes; reject absurd counts before reserving.
    if (nf > r.remaining() / 12 + 1) throw FormatError(FormatError::Kind::Truncated, "CSIG: frame count exceeds file size");
    pool.frames.reserve(static_cast<std::size_t>(nf));
    for (std::uint64_t i = 0; i < nf; ++i) {
        SignalFrame f;
        const auto id = r.get<std::uint32_t>();
        if (id >= ns) {
            throw FormatError(FormatError::Kind::Invalid,
                              "CSIG: frame " + std::to_string(i) + " has scheme id " + std::to_string(id));
        }
        f.label = static_cast<int>(id);
        f.snr_db = r.get<float>();
        const auto len = r.get<std::uint32_t>();
        if (len > r.remaining() / 8) throw FormatError(FormatError::Kind::Truncated, "CSIG: truncated frame samples");
        f.samples.resize(len);
        for (auto& z : f.samples) {
            const float re = r.get<float>();
            const float im = r.get<float>();
            z = cplx(re, im);
        }
        pool.frames.push_back(std::move(f));
    }
    if (r.remaining() != 0) throw FormatError(FormatError::Kind::Invalid, "CSIG: trailing bytes after last frame");
    return pool;
}

void save_frames(const std::string& path, const FramePool& pool) { bytes::write_file(path, encode_frames(pool)); }

FramePool load_frames(const std::string& path) {
    try {
        return decode_frames(bytes::read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path + ": " + e.what());
    }
}

}  // namespace signals
}  // namespace camel
