/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <span>

#include "cqlflow/engine/engine.hpp"

namespace cqlflow::engine::detail {

// Same as the public semi-join, over borrowed codes.
SemiJoinResult semi_join_valueset(std::span<const CodeRef* const> codes, const catalog::CompiledValueSet& vs,
                                  planner::JoinMode mode);

}  // namespace cqlflow::engine::detail
