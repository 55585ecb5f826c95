#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "memstream/memory.hpp"

namespace memstream {

// JSON Lines snapshot of a MemoryState. The first line is a header object
// (schema, policy, capacity, ingest_failures, next_id, entry count); each
// following line is one entry. Round-trips are lossless: serializing a loaded
// snapshot reproduces the original bytes.

std::string snapshot_to_string(const MemoryState& state);
MemoryState snapshot_from_string(std::string_view text);

void save_snapshot(const MemoryState& state, const std::filesystem::path& path);
MemoryState load_snapshot(const std::filesystem::path& path);

}  // namespace memstream
