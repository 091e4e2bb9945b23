#include "flab/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flab {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

[[noreturn]] void refuse(const std::string& why) {
  throw std::runtime_error("checkpoint: " + why);
}

struct ByteSink {
  std::string buf;
  void raw(const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
  }
  template <class T>
  void pod(T x) {
    raw(&x, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    raw(s.data(), s.size());
  }
  void field(const ScalarField& f) {
    pod<std::int32_t>(f.parity);
    pod<double>(f.time_tag);
    pod<std::uint64_t>(f.v.size());
    raw(f.v.data(), f.v.size() * sizeof(double));
  }
};

struct ByteSource {
  const std::string& buf;
  std::size_t pos = 0;
  void raw(void* p, std::size_t n) {
    if (pos + n > buf.size()) refuse("payload truncated");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  template <class T>
  T pod() {
    T x;
    raw(&x, sizeof(T));
    return x;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (pos + n > buf.size()) refuse("payload truncated");
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
  void field(ScalarField& f) {
    f.parity = pod<std::int32_t>();
    f.time_tag = pod<double>();
    const auto n = pod<std::uint64_t>();
    if (n != f.v.size())
      refuse("field length " + std::to_string(n) + " does not match the grid (" +
             std::to_string(f.v.size()) + " nodes)");
    raw(f.v.data(), n * sizeof(double));
  }
};

}  // namespace

void save_checkpoint(const std::string& path, std::uint64_t config_hash,
                     const CheckpointData& d) {
  const Grid& g = *d.state.theta.grid;
  ByteSink p;
  p.str(d.tag);
  p.pod<std::uint8_t>(g.kind == GridKind::Radial3d ? 1 : 0);
  p.pod<std::int32_t>(g.dim);
  p.pod<double>(g.h);
  p.pod<double>(g.L);
  p.pod<double>(d.state.t);
  p.pod<std::int64_t>(d.step_index);
  p.pod<double>(d.dt);
  p.pod<double>(d.leak_max);
  p.field(d.state.theta);
  p.field(d.state.theta_t);
  p.field(d.state.phi);
  p.field(d.state.phi_t);
  p.field(d.bg.bg);
  p.field(d.bg.bg_t);
  p.pod<std::uint32_t>(static_cast<std::uint32_t>(d.hist.size()));
  for (std::size_t k = 0; k < d.hist.size(); ++k) {
    const StateSnapshot& s = d.hist.snap(k);
    const BackgroundState& b = d.hist.background(k);
    p.pod<double>(s.t);
    p.field(s.theta);
    p.field(s.theta_t);
    p.field(s.phi);
    p.field(s.phi_t);
    p.field(b.bg);
    p.field(b.bg_t);
  }
  p.pod<std::uint32_t>(static_cast<std::uint32_t>(d.accum.size()));
  for (const auto& kv : d.accum) {
    p.str(kv.first);
    p.pod<double>(kv.second);
  }
  p.pod<std::uint32_t>(static_cast<std::uint32_t>(d.text.size()));
  for (const auto& kv : d.text) {
    p.str(kv.first);
    p.str(kv.second);
  }

  ByteSink h;
  h.raw(kMagic, sizeof(kMagic));
  h.pod<std::uint32_t>(kVersion);
  h.pod<std::uint64_t>(config_hash);
  h.pod<std::uint64_t>(p.buf.size());
  h.pod<std::uint64_t>(fnv64(p.buf));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) refuse("cannot open '" + tmp + "' for writing");
    f.write(h.buf.data(), static_cast<std::streamsize>(h.buf.size()));
    f.write(p.buf.data(), static_cast<std::streamsize>(p.buf.size()));
    if (!f) refuse("write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    refuse("cannot move '" + tmp + "' into place");
}

CheckpointData load_checkpoint(const std::string& path, std::uint64_t config_hash,
                               const Grid& grid) {
  std::ifstream f(path, std::ios::binary);
  if (!f) refuse("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();

  const std::size_t head = sizeof(kMagic) + 4 + 8 + 8 + 8;
  if (bytes.size() < head) refuse("file too short to be a checkpoint");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    refuse("bad magic, not a checkpoint file");
  std::size_t off = sizeof(kMagic);
  const auto rd = [&](auto& x) {
    std::memcpy(&x, bytes.data() + off, sizeof(x));
    off += sizeof(x);
  };
  std::uint32_t version;
  std::uint64_t stored_cfg, payload_size, payload_hash;
  rd(version);
  rd(stored_cfg);
  rd(payload_size);
  rd(payload_hash);
  if (version != kVersion)
    refuse("format version " + std::to_string(version) + ", this build reads " +
           std::to_string(kVersion));
  if (stored_cfg != config_hash)
    refuse("config hash mismatch: stored " + hex16(stored_cfg) + ", expected " +
           hex16(config_hash) + " (the file belongs to a different run setup)");
  if (bytes.size() - head != payload_size)
    refuse("payload size mismatch: header says " + std::to_string(payload_size) +
           ", file carries " + std::to_string(bytes.size() - head));
  const std::string payload = bytes.substr(head);
  const std::uint64_t got = fnv64(payload);
  if (got != payload_hash)
    refuse("payload hash mismatch: stored " + hex16(payload_hash) + ", recomputed " +
           hex16(got) + " (file corrupted)");

  ByteSource s{payload};
  CheckpointData d(grid);
  d.tag = s.str();
  const auto kind = s.pod<std::uint8_t>();
  const auto dim = s.pod<std::int32_t>();
  const double h = s.pod<double>();
  const double L = s.pod<double>();
  const bool radial = grid.kind == GridKind::Radial3d;
  if ((kind == 1) != radial || dim != grid.dim || h != grid.h || L != grid.L)
    refuse("grid descriptor mismatch (stored kind/dim/h/L differ from the run's grid)");
  d.state.t = s.pod<double>();
  d.step_index = static_cast<long>(s.pod<std::int64_t>());
  d.dt = s.pod<double>();
  d.leak_max = s.pod<double>();
  s.field(d.state.theta);
  s.field(d.state.theta_t);
  s.field(d.state.phi);
  s.field(d.state.phi_t);
  s.field(d.bg.bg);
  s.field(d.bg.bg_t);
  const auto hist_n = s.pod<std::uint32_t>();
  if (hist_n > StateHistory::kDepth) refuse("history ring longer than the depth limit");
  for (std::uint32_t k = 0; k < hist_n; ++k) {
    StateSnapshot snap(grid);
    BackgroundState bg(grid);
    snap.t = s.pod<double>();
    s.field(snap.theta);
    s.field(snap.theta_t);
    s.field(snap.phi);
    s.field(snap.phi_t);
    s.field(bg.bg);
    s.field(bg.bg_t);
    d.hist.push(snap, bg);
  }
  const auto accum_n = s.pod<std::uint32_t>();
  for (std::uint32_t k = 0; k < accum_n; ++k) {
    const std::string name = s.str();
    d.accum[name] = s.pod<double>();
  }
  const auto text_n = s.pod<std::uint32_t>();
  for (std::uint32_t k = 0; k < text_n; ++k) {
    const std::string name = s.str();
    d.text[name] = s.str();
  }
  if (s.pos != payload.size()) refuse("trailing bytes after the payload");
  return d;
}

}  // namespace flab
