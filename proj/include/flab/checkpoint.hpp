#pragma once

// Binary checkpoints for the experiment runner.  A file carries everything
// a run needs to continue exactly where it stopped: the integrator state,
// the co-evolved background, the history ring, named scalar accumulators
// (ghost-budget integrals and the like), and the CSV text emitted so far,
// so a resumed run finishes with byte-identical artifacts.
//
// Layout: magic "FLABCKPT", format version, the FNV-1a hash of the owning
// config echo plus a sub-run tag, then a length-prefixed, hash-guarded
// payload.  Loads refuse on any mismatch (wrong version, wrong config,
// corrupted payload) and say which hash disagreed.

#include <cstdint>
#include <map>
#include <string>

#include "flab/state.hpp"

namespace flab {

struct CheckpointData {
  StateSnapshot state;
  BackgroundState bg;
  StateHistory hist;
  long step_index = 0;
  double dt = 0.0;
  double leak_max = 0.0;
  std::map<std::string, double> accum;     // named scalar accumulators
  std::map<std::string, std::string> text; // named text buffers (CSV streams)
  std::string tag;                         // sub-run label, part of the hash

  explicit CheckpointData(const Grid& g) : state(g), bg(g) {}
};

void save_checkpoint(const std::string& path, std::uint64_t config_hash,
                     const CheckpointData& d);

// `grid` is the grid the loaded fields are re-homed onto; its descriptor
// (kind, dim, h, L) must match the stored one.
CheckpointData load_checkpoint(const std::string& path, std::uint64_t config_hash,
                               const Grid& grid);

}  // namespace flab
