// include/protospk/error.hpp

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

#ifndef PROTOSPK_ERROR_HPP_
#define PROTOSPK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace protospk {

/// Data or validation failure (bad file, violated invariant, unusable
/// configuration). The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

}  // namespace protospk

#endif  // PROTOSPK_ERROR_HPP_
