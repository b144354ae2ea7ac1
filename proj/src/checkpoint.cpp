// Sampler checkpoints. Layout (all integers little-endian, doubles as their
// IEEE-754 bit pattern in a u64):
//
//   "PTCK"  u32 version
//   params   f64 J h beta g omega_p, u32 L, cluster (i32 row, i32 col, f64 radius)
//   config   u32 algorithm, u64 sweeps burn_in thinning seed, u8 symmetrize,
//            u32 blocks, u8 translation_average, u32 chains threads marginal_cap
//   clusters u32 count, then (i32 row, i32 col, f64 radius) each
//   chains   u32 count, then per chain:
//              u64 burn_done sweeps_done measurements accepted attempts wolff_steps
//              u64[4] rng state, u32 N, u8[N] spin bits, u32 len, u64[len] mag_hist
//              u32 blocks, per block: u64 measurements, i64 sum_bond sum_mag sum_bond2,
//                u32 clusters, per cluster: u32 len, u64[len] count,
//                i64[len] sum_bond, i64[len] sum_mag, u8 has_marginal,
//                [u32 n, u32 cells, (u32 key, u64 count, i64 sum_bond, i64 sum_mag)...]
//   u64 FNV-1a hash of every preceding byte

#include <bit>
#include <fstream>
#include <iterator>

#include "phasetherm/montecarlo.hpp"

namespace phasetherm {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr char kMagic[4] = {'P', 'T', 'C', 'K'};

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : buf_(b) {}
  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) throw ConfigError("checkpoint is truncated");
  }
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

void write_cluster(Writer& w, const ClusterSpec& c) {
  w.i32(c.center.row);
  w.i32(c.center.col);
  w.f64(c.radius);
}

ClusterSpec read_cluster(Reader& r, const Lattice& lattice) {
  const int row = r.i32();
  const int col = r.i32();
  const double radius = r.f64();
  return make_disk_cluster(lattice, {row, col}, radius);
}

}  // namespace

struct CheckpointAccess {
  static std::vector<ChainState>& chains(Sampler& s) { return s.chains_; }
};

void Sampler::save(const std::string& path) const {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kVersion);

  w.f64(params_.J);
  w.f64(params_.h);
  w.f64(params_.beta);
  w.f64(params_.g);
  w.f64(params_.omega_p);
  w.u32(static_cast<std::uint32_t>(params_.L));
  write_cluster(w, params_.cluster);

  w.u32(static_cast<std::uint32_t>(cfg_.algorithm));
  w.u64(cfg_.sweeps);
  w.u64(cfg_.burn_in);
  w.u64(cfg_.thinning);
  w.u64(cfg_.seed);
  w.u8(cfg_.symmetrize ? 1 : 0);
  w.u32(cfg_.blocks);
  w.u8(cfg_.translation_average ? 1 : 0);
  w.u32(cfg_.chains);
  w.u32(cfg_.threads);
  w.u32(cfg_.marginal_cap);

  w.u32(static_cast<std::uint32_t>(clusters_.size()));
  for (const auto& c : clusters_) write_cluster(w, c);

  w.u32(static_cast<std::uint32_t>(chains_.size()));
  for (const auto& ch : chains_) {
    w.u64(ch.burn_done);
    w.u64(ch.sweeps_done);
    w.u64(ch.measurements);
    w.u64(ch.accepted);
    w.u64(ch.attempts);
    w.u64(ch.wolff_steps);
    for (auto s : ch.rng.state()) w.u64(s);
    w.u32(static_cast<std::uint32_t>(ch.spins.size()));
    for (auto b : ch.spins.bits()) w.u8(b);
    w.u32(static_cast<std::uint32_t>(ch.mag_hist.size()));
    for (auto v : ch.mag_hist) w.u64(v);
    w.u32(static_cast<std::uint32_t>(ch.blocks.size()));
    for (const auto& blk : ch.blocks) {
      w.u64(blk.measurements);
      w.i64(blk.sum_bond);
      w.i64(blk.sum_mag);
      w.i64(blk.sum_bond2);
      w.u32(static_cast<std::uint32_t>(blk.clusters.size()));
      for (const auto& acc : blk.clusters) {
        w.u32(static_cast<std::uint32_t>(acc.count.size()));
        for (auto v : acc.count) w.u64(v);
        for (auto v : acc.sum_bond) w.i64(v);
        for (auto v : acc.sum_mag) w.i64(v);
        w.u8(acc.has_marginal ? 1 : 0);
        if (!acc.has_marginal) continue;
        const auto cells = acc.marginal.cells();
        w.u32(static_cast<std::uint32_t>(acc.marginal.n()));
        w.u32(static_cast<std::uint32_t>(cells.size()));
        for (const auto& [key, c] : cells) {
          w.u32(key);
          w.u64(c.count);
          w.i64(c.sum_bond);
          w.i64(c.sum_mag);
        }
      }
    }
  }
  auto& bytes = w.bytes();
  w.u64(fnv1a(bytes, bytes.size()));

  // Write-then-rename so an interrupted save never clobbers the last good file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("failed writing checkpoint " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ConfigError("cannot move checkpoint into place at " + path);
}

Sampler Sampler::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw ConfigError("checkpoint is truncated");
  for (int i = 0; i < 4; ++i)
    if (bytes[static_cast<std::size_t>(i)] != static_cast<std::uint8_t>(kMagic[i]))
      throw ConfigError("not a phasetherm checkpoint: " + path);
  {
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
      stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + static_cast<std::size_t>(i)])
                << (8 * i);
    if (stored != fnv1a(bytes, bytes.size() - 8))
      throw ConfigError("checkpoint checksum mismatch: " + path);
  }

  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));

  ThermoParams params;
  params.J = r.f64();
  params.h = r.f64();
  params.beta = r.f64();
  params.g = r.f64();
  params.omega_p = r.f64();
  params.L = static_cast<int>(r.u32());
  const Lattice lattice(params.L);
  params.cluster = read_cluster(r, lattice);

  SamplerConfig cfg;
  cfg.algorithm = static_cast<Algorithm>(r.u32());
  if (cfg.algorithm != Algorithm::metropolis && cfg.algorithm != Algorithm::wolff &&
      cfg.algorithm != Algorithm::automatic)
    throw ConfigError("checkpoint names an unknown algorithm");
  cfg.sweeps = r.u64();
  cfg.burn_in = r.u64();
  cfg.thinning = r.u64();
  cfg.seed = r.u64();
  cfg.symmetrize = r.u8() != 0;
  cfg.blocks = r.u32();
  cfg.translation_average = r.u8() != 0;
  cfg.chains = r.u32();
  cfg.threads = r.u32();
  cfg.marginal_cap = r.u32();

  std::vector<ClusterSpec> clusters(r.u32());
  for (auto& c : clusters) c = read_cluster(r, lattice);

  Sampler s(params, clusters, cfg);
  auto& chains = CheckpointAccess::chains(s);
  if (r.u32() != chains.size()) throw ConfigError("checkpoint chain count mismatch");
  for (auto& ch : chains) {
    ch.burn_done = r.u64();
    ch.sweeps_done = r.u64();
    ch.measurements = r.u64();
    ch.accepted = r.u64();
    ch.attempts = r.u64();
    ch.wolff_steps = r.u64();
    std::array<std::uint64_t, 4> st{};
    for (auto& v : st) v = r.u64();
    ch.rng.set_state(st);
    if (static_cast<int>(r.u32()) != ch.spins.size())
      throw ConfigError("checkpoint spin count mismatch");
    for (int i = 0; i < ch.spins.size(); ++i) ch.spins.set_bit(i, r.u8() & 1u);
    if (r.u32() != ch.mag_hist.size()) throw ConfigError("checkpoint histogram mismatch");
    for (auto& v : ch.mag_hist) v = r.u64();
    if (r.u32() != ch.blocks.size()) throw ConfigError("checkpoint block count mismatch");
    for (auto& blk : ch.blocks) {
      blk.measurements = r.u64();
      blk.sum_bond = r.i64();
      blk.sum_mag = r.i64();
      blk.sum_bond2 = r.i64();
      if (r.u32() != blk.clusters.size()) throw ConfigError("checkpoint cluster mismatch");
      for (auto& acc : blk.clusters) {
        if (r.u32() != acc.count.size()) throw ConfigError("checkpoint cluster size mismatch");
        for (auto& v : acc.count) v = r.u64();
        for (auto& v : acc.sum_bond) v = r.i64();
        for (auto& v : acc.sum_mag) v = r.i64();
        const bool has = r.u8() != 0;
        if (has != acc.has_marginal) throw ConfigError("checkpoint marginal mismatch");
        if (!has) continue;
        if (static_cast<int>(r.u32()) != acc.marginal.n())
          throw ConfigError("checkpoint marginal size mismatch");
        const std::uint32_t cells = r.u32();
        for (std::uint32_t k = 0; k < cells; ++k) {
          const std::uint32_t key = r.u32();
          MarginalCell c;
          c.count = r.u64();
          c.sum_bond = r.i64();
          c.sum_mag = r.i64();
          if (acc.marginal.n() < 32 && (key >> acc.marginal.n()) != 0)
            throw ConfigError("checkpoint marginal key out of range");
          acc.marginal.insert(key, c);
        }
      }
    }
  }
  if (r.pos() != bytes.size() - 8) throw ConfigError("checkpoint has trailing bytes");
  return s;
}

}  // namespace phasetherm
