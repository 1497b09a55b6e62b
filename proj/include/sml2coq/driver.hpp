#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "sml2coq/diagnostics.hpp"
#include "sml2coq/elaborate.hpp"
#include "sml2coq/emit.hpp"
#include "sml2coq/evaluate.hpp"
#include "sml2coq/gallina_check.hpp"
#include "sml2coq/shims.hpp"
#include "sml2coq/translate.hpp"

namespace sml2coq {

struct RunConfig {
  std::string inputPath;
  std::string outputPath;  // empty: standard output
  bool skipEval = false;
  long long fuel = 1000000;
  bool noHeader = false;
  bool normalizeNames = false;
  std::string shimDir;  // install the shim .v files here when non-empty
};

// Exit statuses: 0 ok, 1 parse/elaboration error, 2 evaluation gate failure,
// 3 unsupported construct.
enum ExitStatus {
  ExitOk = 0,
  ExitFrontendError = 1,
  ExitEvalGate = 2,
  ExitUnsupported = 3,
};

namespace driver_detail {

inline bool writeFile(const std::string& path, const std::string& content, std::ostream& err) {
  namespace fs = std::filesystem;
  fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary);
  if (!out.good()) {
    err << "error: cannot write '" << path << "'\n";
    return false;
  }
  out << content;
  return true;
}

}  // namespace driver_detail

inline bool installShims(const std::string& dir, std::ostream& err = std::cerr) {
  for (const ShimFile& shim : shimFiles()) {
    if (!driver_detail::writeFile(
            (std::filesystem::path(dir) / (shim.name + ".v")).string(), shim.content, err))
      return false;
  }
  return true;
}

// Runs the full pipeline: parse -> elaborate -> evaluate (gate) -> translate
// -> emit. No output file is written on a nonzero status.
inline int run(const RunConfig& cfg, std::ostream& err = std::cerr) {
  std::ifstream in(cfg.inputPath, std::ios::binary);
  if (!in.good()) {
    err << "error: cannot read '" << cfg.inputPath << "'\n";
    return ExitFrontendError;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  std::string source = buf.str();
  SourceMap map(cfg.inputPath, source);

  auto report = [&](const Diag& d) { err << map.format(d) << "\n"; };

  Elaboration el;
  try {
    el = elaborate(parseText(source));
  } catch (const CompileError& e) {
    report(e.diag);
    return e.diag.unsupported ? ExitUnsupported : ExitFrontendError;
  }
  for (auto& w : el.warnings) err << map.format(w) << " (warning)\n";

  if (!cfg.skipEval) {
    EvalOutcome outcome = evaluate(el, cfg.fuel);
    switch (outcome.kind) {
      case EvalOutcome::Kind::Ok:
        break;
      case EvalOutcome::Kind::BindFailure:
        report(Diag{Stage::Evaluate, outcome.span,
                    "binding failed (" + outcome.detail + "); translation aborted"});
        return ExitEvalGate;
      case EvalOutcome::Kind::FuelExhausted:
        report(Diag{Stage::Evaluate, outcome.span,
                    "fuel exhausted after " + std::to_string(cfg.fuel) +
                        " applications; translation aborted"});
        return ExitEvalGate;
      case EvalOutcome::Kind::Stuck:
        report(Diag{Stage::Evaluate, outcome.span, "evaluation got stuck: " + outcome.detail});
        return ExitEvalGate;
    }
  }

  TranslateResult tr;
  try {
    tr = translateProgram(el);
  } catch (const CompileError& e) {
    report(e.diag);
    return e.diag.unsupported ? ExitUnsupported : ExitFrontendError;
  }
  for (auto& w : tr.warnings) err << map.format(w) << " (warning)\n";

  // Every emitted sentence must be well formed.
  std::vector<Diag> wf = wellFormedProgram(tr.sentences);
  if (!wf.empty()) {
    for (auto& d : wf) report(d);
    err << "internal error: translator produced ill-formed sentences\n";
    return ExitFrontendError;
  }

  EmitConfig ecfg;
  ecfg.headerEnabled = !cfg.noHeader;
  ecfg.normalizeFreshNames = cfg.normalizeNames;
  std::string text = emit(tr.sentences, ecfg);

  for (auto& d : validateShims(collectFreeIdents(tr.sentences)))
    err << map.format(d) << " (warning)\n";

  if (!cfg.shimDir.empty() && !installShims(cfg.shimDir, err)) return ExitFrontendError;

  if (cfg.outputPath.empty()) {
    std::cout << text;
  } else if (!driver_detail::writeFile(cfg.outputPath, text, err)) {
    return ExitFrontendError;
  }
  return ExitOk;
}

// Translation without the file plumbing; used by tests and the acceptance
// suite. Throws CompileError on frontend/translation failures.
struct Translated {
  Elaboration el;
  std::vector<GSentencePtr> sentences;
  std::vector<Diag> warnings;
  std::string text;
};

inline Translated translateText(std::string_view source, bool header = false,
                                bool normalize = false) {
  Translated t;
  t.el = elaborate(parseText(source));
  TranslateResult tr = translateProgram(t.el);
  t.sentences = std::move(tr.sentences);
  t.warnings = std::move(tr.warnings);
  EmitConfig cfg;
  cfg.headerEnabled = header;
  cfg.normalizeFreshNames = normalize;
  t.text = emit(t.sentences, cfg);
  return t;
}

}  // namespace sml2coq
