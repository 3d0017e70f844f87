#pragma once

#include <string>
#include <vector>

namespace bendcell {

enum class Severity { Warning, Error };

/// One validation or parse finding. `code` is a stable machine-readable
/// identifier (e.g. "MalformedLabel", "UnmappablePose"); `line`/`column`
/// are 1-based and 0 when the finding has no text location.
struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  int line = 0;
  int column = 0;
};

inline Diagnostic make_error(std::string code, std::string message, int line = 0, int column = 0) {
  return Diagnostic{Severity::Error, std::move(code), std::move(message), line, column};
}

inline Diagnostic make_warning(std::string code, std::string message, int line = 0, int column = 0) {
  return Diagnostic{Severity::Warning, std::move(code), std::move(message), line, column};
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    if (d.severity == Severity::Error) return true;
  }
  return false;
}

std::string format_diagnostic(const Diagnostic& d);

}  // namespace bendcell
