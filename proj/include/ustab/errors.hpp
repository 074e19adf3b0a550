#pragma once

#include <stdexcept>
#include <string>

namespace ustab {

// A rejected input, tagged with the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, std::string reason)
      : std::invalid_argument(field + ": " + reason),
        field_(std::move(field)),
        reason_(std::move(reason)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string field_;
  std::string reason_;
};

class FellerViolation : public ConfigError {
 public:
  explicit FellerViolation(const std::string& reason)
      : ConfigError("feller", reason) {}
};

// The affine transform blew up before the horizon.
class MomentExplosion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ustab
