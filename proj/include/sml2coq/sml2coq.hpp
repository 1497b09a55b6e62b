#pragma once

// Umbrella header: the full SML-to-Gallina translation pipeline.

#include "sml2coq/ast.hpp"
#include "sml2coq/diagnostics.hpp"
#include "sml2coq/driver.hpp"
#include "sml2coq/elaborate.hpp"
#include "sml2coq/emit.hpp"
#include "sml2coq/evaluate.hpp"
#include "sml2coq/gallina.hpp"
#include "sml2coq/gallina_check.hpp"
#include "sml2coq/parser.hpp"
#include "sml2coq/pattern.hpp"
#include "sml2coq/shims.hpp"
#include "sml2coq/sml_print.hpp"
#include "sml2coq/token.hpp"
#include "sml2coq/translate.hpp"
#include "sml2coq/types.hpp"
