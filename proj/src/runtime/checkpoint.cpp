#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "brace/ir.hpp"
#include "brace/runtime.hpp"

namespace brace::runtime {

namespace {

constexpr char kMagic[4] = {'B', 'R', 'C', 'K'};

class Writer {
public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::string buf;
};

class Reader {
public:
  Reader(const std::string &b, std::size_t end) : buf(b), end(end) {}

  std::uint64_t take(int bytes) {
    if (pos + bytes > end) throw ChecksumMismatch("checkpoint ends early");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += bytes;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  double f64() { return std::bit_cast<double>(take(8)); }

  const std::string &buf;
  std::size_t end;
  std::size_t pos = 0;
};

std::uint32_t crc_of(const char *data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, reinterpret_cast<const Bytef *>(data), static_cast<uInt>(n)));
}

}  // namespace

Checkpoint snapshot(const Cluster &cluster) {
  Checkpoint cp;
  cp.seed = cluster.config().seed;
  cp.tick = cluster.current_tick();
  if (cluster.partitioning().dim() > 0) cp.cuts = cluster.partitioning().cuts[0];
  cp.state_count = static_cast<std::uint32_t>(cluster.script().states.size());
  for (const auto &w : cluster.workers()) {
    std::vector<AgentRecord> part;
    for (const auto &a : w.owned) part.push_back({a.oid, a.s, {}});
    cp.partitions.push_back(std::move(part));
  }
  return cp;
}

void checkpoint_write(const Checkpoint &cp, std::ostream &out) {
  Writer w;
  w.buf.append(kMagic, 4);
  w.u32(cp.version);
  w.u64(cp.seed);
  w.u64(cp.tick);
  w.u32(static_cast<std::uint32_t>(cp.cuts.size()));
  for (double c : cp.cuts) w.f64(c);
  w.u32(cp.state_count);
  w.u32(static_cast<std::uint32_t>(cp.partitions.size()));
  for (const auto &part : cp.partitions) {
    w.u64(part.size());
    for (const auto &a : part) {
      w.u64(a.oid);
      for (double v : a.s) w.f64(v);
    }
  }
  w.u32(crc_of(w.buf.data(), w.buf.size()));
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
}

void checkpoint_write(const Cluster &cluster, const std::string &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  checkpoint_write(snapshot(cluster), out);
  if (!out) throw Error("cannot write checkpoint " + path);
}

Checkpoint checkpoint_read(std::istream &in) {
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw ChecksumMismatch("not a checkpoint file");
  }
  const std::size_t body = buf.size() - 4;
  Reader tail(buf, buf.size());
  tail.pos = body;
  if (tail.u32() != crc_of(buf.data(), body)) throw ChecksumMismatch("checkpoint CRC does not match");

  Reader r(buf, body);
  r.pos = 4;
  Checkpoint cp;
  cp.version = r.u32();
  if (cp.version != kCheckpointVersion) {
    throw VersionMismatch("checkpoint version " + std::to_string(cp.version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  cp.seed = r.u64();
  cp.tick = r.u64();
  cp.cuts.resize(r.u32());
  for (double &c : cp.cuts) c = r.f64();
  cp.state_count = r.u32();
  cp.partitions.resize(r.u32());
  for (auto &part : cp.partitions) {
    const std::uint64_t n = r.u64();
    if (n > body) throw ChecksumMismatch("checkpoint agent count is implausible");
    part.resize(n);
    for (auto &a : part) {
      a.oid = r.u64();
      a.s.resize(cp.state_count);
      for (double &v : a.s) v = r.f64();
    }
  }
  if (r.pos != body) throw ChecksumMismatch("trailing bytes in checkpoint");
  return cp;
}

Checkpoint checkpoint_read(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return checkpoint_read(in);
}

Cluster checkpoint_restore(const CheckedScript &script, ClusterConfig cfg, const Checkpoint &cp) {
  if (cp.state_count != script.states.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(cp.state_count) + " state fields, the script has " +
                      std::to_string(script.states.size()));
  }
  cfg.seed = cp.seed;
  std::vector<AgentRecord> agents;
  const auto theta = ir::theta_vector(script);
  for (const auto &part : cp.partitions) {
    for (const auto &a : part) agents.push_back({a.oid, a.s, theta});
  }
  std::optional<std::vector<double>> cuts;
  if (static_cast<int>(cp.cuts.size()) == cfg.workers - 1) cuts = cp.cuts;
  return Cluster(script, std::move(cfg), std::move(agents), cp.tick, std::move(cuts));
}

}  // namespace brace::runtime
