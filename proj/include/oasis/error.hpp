#pragma once

#include <stdexcept>
#include <string>

namespace oasis {

// Every failure carries a module-qualified code, e.g. "geometry.UNRESOLVED_DOMAIN".
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string code, const std::string& message)
      : std::runtime_error(module + "." + code + ": " + message),
        module_(std::move(module)),
        code_(std::move(code)) {}

  const std::string& module() const { return module_; }
  const std::string& code() const { return code_; }
  std::string qualified_code() const { return module_ + "." + code_; }

 private:
  std::string module_;
  std::string code_;
};

}  // namespace oasis
