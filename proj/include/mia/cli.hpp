#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mia::cli {

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit status (0 on success).
///
///   mia [--config FILE] [--threads N] synth    --out traces.jsonl ...
///   mia [--config FILE] [--threads N] signals  --input traces.jsonl --out features.csv ...
///   mia [--config FILE] [--threads N] attack   --features features.csv --out-dir DIR --mode M ...
///   mia [--config FILE]               evaluate --scores DIR/scores_*.csv --out-dir DIR ...
///
/// The config file is INI: one [section] per subcommand whose keys are the
/// long flag names, e.g. "[attack]\nmode = [edgington, lr_gpca]".
/// MIA_LOG_LEVEL (quiet | info | debug) controls diagnostics on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mia::cli
