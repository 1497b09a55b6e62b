#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sml2coq {

// Byte range [begin, end) into the source buffer.
struct Span {
  uint32_t begin = 0;
  uint32_t end = 0;

  bool operator==(const Span&) const = default;
};

inline Span join(Span a, Span b) {
  return Span{a.begin < b.begin ? a.begin : b.begin, a.end > b.end ? a.end : b.end};
}

enum class Stage { Lex, Parse, Elaborate, Evaluate, Translate, Emit };

inline const char* stageName(Stage s) {
  switch (s) {
    case Stage::Lex: return "lex";
    case Stage::Parse: return "parse";
    case Stage::Elaborate: return "elaborate";
    case Stage::Evaluate: return "evaluate";
    case Stage::Translate: return "translate";
    case Stage::Emit: return "emit";
  }
  return "?";
}

struct Diag {
  Stage stage = Stage::Parse;
  Span span;
  std::string message;
  // Unsupported-construct rejections exit with a distinct status.
  bool unsupported = false;
};

// Thrown for fatal diagnostics; the driver formats and maps to an exit code.
class CompileError : public std::runtime_error {
 public:
  explicit CompileError(Diag d) : std::runtime_error(d.message), diag(std::move(d)) {}
  Diag diag;
};

[[noreturn]] inline void fail(Stage stage, Span span, std::string msg, bool unsupported = false) {
  throw CompileError(Diag{stage, span, std::move(msg), unsupported});
}

// Resolves byte offsets to 1-based line:col for diagnostics.
class SourceMap {
 public:
  SourceMap() = default;
  SourceMap(std::string filename, std::string_view text) : filename_(std::move(filename)) {
    lineStarts_.assign(1, 0);
    for (uint32_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') lineStarts_.push_back(i + 1);
  }

  std::pair<uint32_t, uint32_t> lineCol(uint32_t offset) const {
    size_t lo = 0, hi = lineStarts_.size();
    while (lo + 1 < hi) {
      size_t mid = (lo + hi) / 2;
      if (lineStarts_[mid] <= offset) lo = mid; else hi = mid;
    }
    return {uint32_t(lo + 1), offset - lineStarts_[lo] + 1};
  }

  std::string format(const Diag& d) const {
    auto [line, col] = lineCol(d.span.begin);
    return filename_ + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
           stageName(d.stage) + ": " + d.message;
  }

  const std::string& filename() const { return filename_; }

 private:
  std::string filename_ = "<input>";
  std::vector<uint32_t> lineStarts_ = {0};
};

}  // namespace sml2coq
