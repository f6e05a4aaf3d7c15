// Copyright 2026 The ngcc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

namespace ngcc {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitIncompatible = 4,
};

/// Entry point of the `ngcc` binary. Subcommands: simulate, train, eval,
/// extract, gradcheck. Verbosity comes from NGCC_VERBOSE (0, 1 or 2).
int run_cli(int argc, const char* const* argv);

}  // namespace ngcc
