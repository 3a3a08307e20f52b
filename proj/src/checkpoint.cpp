#include "camel/checkpoint.hpp"

#include <charconv>
#include <cstring>
#include <sstream>

#include "camel/bytes.hpp"
#include "camel/config.hpp"

namespace camel::cli {

namespace {

constexpr const char* kHistoryHeader = "iteration,meta_loss,query_acc";

}  // namespace

std::string history_csv(const std::vector<meta::HistoryRow>& rows) {
    std::string out = kHistoryHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.iteration);
        out += ',';
        out += format_double(r.meta_loss);
        out += ',';
        out += format_double(r.query_acc);
        out += '\n';
    }
    return out;
}

std::vector<meta::HistoryRow> parse_history_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kHistoryHeader) {
        throw FormatError(FormatError::Kind::Invalid, "history CSV: missing header");
    }
    std::vector<meta::HistoryRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = "history CSV line " + std::to_string(lineno);
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos) throw FormatError(FormatError::Kind::Invalid, where + ": expected 3 fields");
        meta::HistoryRow r;
        const std::string it = line.substr(0, c1);
        const auto res = std::from_chars(it.data(), it.data() + it.size(), r.iteration);
        if (res.ec != std::errc() || res.ptr != it.data() + it.size()) {
            throw FormatError(FormatError::Kind::Invalid, where + ": bad iteration '" + it + "'");
        }
        r.meta_loss = parse_double(line.substr(c1 + 1, c2 - c1 - 1), where);
        r.query_acc = parse_double(line.substr(c2 + 1), where);
        rows.push_back(r);
    }
    return rows;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
    bytes::Writer w;
    w.raw("CAML", 4);
    w.put<std::uint32_t>(kCamlVersion);
    w.str32(arch_to_text(ck.arch));
    w.put<std::uint64_t>(ck.iteration);
    w.put<std::uint64_t>(ck.rng.key);
    w.put<std::uint64_t>(ck.rng.counter);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.theta.size()));
    for (const auto& [name, t] : ck.theta) {
        w.str16(name);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        for (const auto& z : t.data()) {
            w.put<double>(z.real());
            w.put<double>(z.imag());
        }
    }
    w.str32(history_csv(ck.history));
    return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> data) {
    if (data.size() < 4 || std::memcmp(data.data(), "CAML", 4) != 0) {
        throw FormatError(FormatError::Kind::BadMagic, "not a CAML checkpoint (bad magic)");
    }
    bytes::Reader r(data.subspan(4), "CAML");
    const auto version = r.get<std::uint32_t>();
    if (version != kCamlVersion) {
        throw FormatError(FormatError::Kind::BadVersion, "unsupported CAML version " + std::to_string(version));
    }
    Checkpoint ck;
    try {
        ck.arch = arch_from_text(r.str32());
    } catch (const ConfigError& e) {
        throw FormatError(FormatError::Kind::Invalid, e.what());
    }
    ck.iteration = r.get<std::uint64_t>();
    ck.rng.key = r.get<std::uint64_t>();
    ck.rng.counter = r.get<std::uint64_t>();
    const auto np = r.get<std::uint32_t>();
    for (std::uint32_t p = 0; p < np; ++p) {
        std::string name = r.str16();
        const auto rank = r.get<std::uint32_t>();
        if (rank > 8) throw FormatError(FormatError::Kind::Invalid, "CAML: parameter '" + name + "' has rank " + std::to_string(rank));
        Shape shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = r.get<std::uint32_t>();
            n *= d;
        }
        if (n > r.remaining() / 16) throw FormatError(FormatError::Kind::Truncated, "CAML: truncated parameter '" + name + "'");
        CTensor t(shape);
        for (auto& z : t.data()) {
            const double re = r.get<double>();
            const double im = r.get<double>();
            z = cplx(re, im);
        }
        ck.theta.add(std::move(name), std::move(t));
    }
    ck.history = parse_history_csv(r.str32());
    if (r.remaining() != 0) throw FormatError(FormatError::Kind::Invalid, "CAML: trailing bytes after history");
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) { bytes::write_file(path, encode_checkpoint(ck)); }

Checkpoint load_checkpoint(const std::string& path) {
    try {
        return decode_checkpoint(bytes::read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path + ": " + e.what());
    }
}

}  // namespace camel::cli
