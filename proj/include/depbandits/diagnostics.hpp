#pragma once

#include <functional>
#include <string>
#include <utility>

namespace depbandits {

enum class DiagnosticKind { ball_empty_fallback, projection_at_boundary, infeasible_sentinel };

inline const char* to_string(DiagnosticKind k) {
  switch (k) {
    case DiagnosticKind::ball_empty_fallback: return "ball_empty_fallback";
    case DiagnosticKind::projection_at_boundary: return "projection_at_boundary";
    case DiagnosticKind::infeasible_sentinel: return "infeasible_sentinel";
  }
  return "?";
}

using DiagnosticSink = std::function<void(DiagnosticKind, const std::string&)>;

namespace detail {
inline DiagnosticSink& diagnostic_sink() {
  thread_local DiagnosticSink sink;
  return sink;
}
}  // namespace detail

/// Installs `sink` for the current thread and restores the previous one on scope exit.
class ScopedDiagnosticSink {
 public:
  explicit ScopedDiagnosticSink(DiagnosticSink sink) : previous_(std::exchange(detail::diagnostic_sink(), std::move(sink))) {}
  ~ScopedDiagnosticSink() { detail::diagnostic_sink() = std::move(previous_); }
  ScopedDiagnosticSink(const ScopedDiagnosticSink&) = delete;
  ScopedDiagnosticSink& operator=(const ScopedDiagnosticSink&) = delete;

 private:
  DiagnosticSink previous_;
};

inline bool diagnostics_enabled() { return static_cast<bool>(detail::diagnostic_sink()); }

inline void emit_diagnostic(DiagnosticKind kind, const std::string& message) {
  if (auto& sink = detail::diagnostic_sink()) sink(kind, message);
}

}  // namespace depbandits
