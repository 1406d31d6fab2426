/*
 * Copyright 2026 The fhe-fedsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace fhe_fedsim::audit {

// Protocol roles a thread can act under.
enum class Role : std::size_t { unassigned = 0, central, client, key_dealer };

inline constexpr std::size_t kRoleCount = 4;

inline std::string_view role_name(Role r) noexcept {
  switch (r) {
    case Role::central:
      return "central";
    case Role::client:
      return "client";
    case Role::key_dealer:
      return "key_dealer";
    default:
      return "unassigned";
  }
}

namespace detail {

inline Role& current_role() noexcept {
  thread_local Role role = Role::unassigned;
  return role;
}

inline std::array<std::atomic<std::uint64_t>, kRoleCount>& counters() noexcept {
  static std::array<std::atomic<std::uint64_t>, kRoleCount> c{};
  return c;
}

}  // namespace detail

inline Role current_role() noexcept { return detail::current_role(); }

// Binds the calling thread to a role for the scope's lifetime.
class RoleScope {
 public:
  explicit RoleScope(Role role) noexcept : previous_(detail::current_role()) {
    detail::current_role() = role;
  }
  ~RoleScope() { detail::current_role() = previous_; }
  RoleScope(const RoleScope&) = delete;
  RoleScope& operator=(const RoleScope&) = delete;

 private:
  Role previous_;
};

// Called by every read of secret key material.
inline void note_secret_key_access() noexcept {
  detail::counters()[static_cast<std::size_t>(detail::current_role())]
      .fetch_add(1, std::memory_order_relaxed);
}

inline std::uint64_t secret_key_accesses(Role r) noexcept {
  return detail::counters()[static_cast<std::size_t>(r)].load();
}

}  // namespace fhe_fedsim::audit
