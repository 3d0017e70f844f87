#include "bendcell/diagnostics.hpp"

#include <sstream>

namespace bendcell {

std::string format_diagnostic(const Diagnostic& d) {
  std::ostringstream out;
  out << (d.severity == Severity::Error ? "error" : "warning");
  out << " [" << d.code << "]";
  if (d.line > 0) {
    out << " at line " << d.line;
    if (d.column > 0) out << ", column " << d.column;
  }
  out << ": " << d.message;
  return out.str();
}

}  // namespace bendcell
