#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "asdvid/errors.hpp"

namespace asdvid {

// Strict-config policy: a key we do not understand is a typo, not an
// extension point.
inline void reject_unknown_fields(const nlohmann::json& j,
                                  std::initializer_list<std::string_view> known,
                                  const std::string& where) {
  if (!j.is_object())
    fail(ErrorKind::ConfigError, where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const auto& k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok)
      fail(ErrorKind::ConfigError, where + ": unknown field '" + key + "'");
  }
}

}  // namespace asdvid
