#pragma once

// Experiment drivers: each configured kind maps onto the module layer and
// produces (a) per-field diagnostic CSV streams with a fixed schema, (b) a
// machine-readable key = value summary whose every number is a reduction of
// the CSV rows, and (c) for the PDE-driving kinds, periodic checkpoints
// that resume to byte-identical artifacts (at a fixed thread count).

#include <string>
#include <vector>

#include "flab/config.hpp"

namespace flab {

struct ExperimentResult {
  bool ok = true;                      // the experiment's pass/fail contract
  std::string summary;                 // full summary text, also on disk
  std::vector<std::string> artifacts;  // files written, summary first
};

// Runs cfg, writing artifacts under out_dir (created if missing).  A
// non-empty resume_path must point at a checkpoint written by the same
// config; the matching sub-run continues from it, the others run fresh.
// Module aborts (hyperbolicity loss, boundary leak, NaN) do not throw out
// of here: they are serialized into the summary and flip ok to false.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                const std::string& resume_path = "");

// The fixed header of the per-field diagnostic streams.
const char* diagnostics_csv_header();

}  // namespace flab
