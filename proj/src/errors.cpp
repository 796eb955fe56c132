#include "fk/errors.hpp"

namespace fk {

ConfigError::ConfigError(const std::string& field, const std::string& what)
    : Error(field.empty() ? what : field + ": " + what), field_(field) {}

ConfigError::ConfigError(const std::string& what, int line, int column)
    : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

}  // namespace fk
