/*
 * Copyright 2026 The nafkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef NAFKIT_TOOLS_SELFTEST_HPP
#define NAFKIT_TOOLS_SELFTEST_HPP

#include <cstdint>
#include <ostream>
#include <string>

// Runs the named suite ("all" for every suite); prints one row per property
// and returns 0 iff all pass, 4 on a failed property, 2 for an unknown suite.
int run_selftest(const std::string& suite, std::uint64_t seed, std::ostream& out);

std::string selftest_suite_listing();

#endif  // NAFKIT_TOOLS_SELFTEST_HPP
