#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "camel/errors.hpp"
#include "camel/layers.hpp"
#include "camel/meta.hpp"
#include "camel/paramset.hpp"
#include "camel/rng.hpp"

namespace camel::cli {

struct Checkpoint {
    layers::ArchConfig arch;
    ParamSet theta;
    std::uint64_t iteration = 0;
    Rng::State rng;
    std::vector<meta::HistoryRow> history;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCamlVersion = 1;

// CAML layout (little-endian): "CAML", u32 version, u32 length + arch key=value text,
// u64 iteration, u64 rng key, u64 rng counter, u32 parameter count, per parameter
// (u16 length + name, u32 rank, u32 x rank dims, interleaved f64 re/im), then
// u32 length + history CSV.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

/// "iteration,meta_loss,query_acc" followed by one row per entry, doubles in shortest
/// round-trip form.
std::string history_csv(const std::vector<meta::HistoryRow>& rows);
std::vector<meta::HistoryRow> parse_history_csv(const std::string& text);

}  // namespace camel::cli
