// include/protospk/textio.hpp

// Copyright 2026  The Protospk Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef PROTOSPK_TEXTIO_HPP_
#define PROTOSPK_TEXTIO_HPP_

#include <charconv>
#include <cstdint>
#include <string>

#include "protospk/error.hpp"
#include "protospk/rng.hpp"

namespace protospk {

/// Shortest decimal string that round-trips to the same double. Used by all
/// text report writers so reruns are byte-identical.
inline std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

/// FNV-1a 64-bit digest of a file's bytes, as fixed-width hex. Used for
/// manifest input digests and fold-plan hashes.
std::string fnv1a64_file_hex(const std::string &path);

/// Fixed-width lowercase hex of a 64-bit value.
std::string hex_u64(std::uint64_t value);

}  // namespace protospk

#endif  // PROTOSPK_TEXTIO_HPP_
