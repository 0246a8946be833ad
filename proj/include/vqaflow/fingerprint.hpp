#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqaflow/types.hpp"

namespace vqaflow {

/// SHA-256 of arbitrary bytes, lowercase hex.
std::string sha256_hex(const std::uint8_t* data, std::size_t len);
std::string sha256_hex(const std::string& data);

/// Stable cassette key for an agent request. The payload must be the
/// canonical serialized request (sorted keys, no timestamps) and must embed
/// the kind, which keeps fingerprints distinct across agent kinds; the kind
/// argument itself is bookkeeping and does not enter the hash.
std::string fingerprint_request(AgentKind kind, const std::string& canonical_payload);

}  // namespace vqaflow
