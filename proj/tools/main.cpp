#include <CLI11.hpp>

#include "sml2coq/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sml2coq - translate a pure Standard ML subset with contracts into "
               "Coq/Gallina specifications (Equations style)"};

  sml2coq::RunConfig cfg;
  app.add_option("input", cfg.inputPath, "input .sml file")->required();
  app.add_option("-o,--output", cfg.outputPath, "output .v path (default: stdout)");
  app.add_flag("--no-eval", cfg.skipEval, "skip the evaluation gate");
  app.add_option("--fuel", cfg.fuel, "evaluation fuel in function applications")
      ->check(CLI::PositiveNumber)
      ->default_val(1000000);
  app.add_flag("--no-header", cfg.noHeader, "omit the Require Import header");
  app.add_flag("--normalize-names", cfg.normalizeNames,
               "rewrite fresh names (rid_N, _'N, mid_N) to positional form; "
               "intended for golden-file comparison");
  app.add_option("--shim-dir", cfg.shimDir,
                 "install the Coq shim files (intSml.v, ...) into this directory");

  CLI11_PARSE(app, argc, argv);
  return sml2coq::run(cfg);
}
