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

namespace cqlflow::frontend {

template <typename F>
void walk(const Expr& expr, F&& fn) {
  fn(expr);
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Exists>) {
          walk(*n.operand, fn);
        } else if constexpr (std::is_same_v<T, Where>) {
          walk(*n.source, fn);
          walk(*n.predicate, fn);
        } else if constexpr (std::is_same_v<T, Compare>) {
          walk(*n.lhs, fn);
          walk(*n.rhs, fn);
        } else if constexpr (std::is_same_v<T, AgeInYearsAt>) {
          walk(*n.date, fn);
        } else if constexpr (std::is_same_v<T, CoverageContinuity> ||
                             std::is_same_v<T, DateRef>) {
          walk(*n.window, fn);
        } else if constexpr (std::is_same_v<T, Logical> || std::is_same_v<T, Unsupported>) {
          const auto& kids = [&]() -> const std::vector<Expr>& {
            if constexpr (std::is_same_v<T, Logical>) return n.operands;
            else return n.args;
          }();
          for (const auto& k : kids) walk(k, fn);
        }
      },
      expr.node);
}

}  // namespace cqlflow::frontend
