#include "quadnav/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "quadnav/serial.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace quadnav::checkpoint {
namespace {

constexpr char kMagic[6] = {'Q', 'N', 'C', 'K', 'P', 'T'};

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

template <typename T>
void put(std::string& out, T v) {
  put_bytes(out, &v, sizeof(v));
}

void put_section(std::string& out, const char tag[4], const std::string& payload) {
  out.append(tag, 4);
  put<std::uint64_t>(out, payload.size());
  out += payload;
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw CheckpointError("checkpoint truncated");
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  template <typename T>
  T get() {
    T v;
    raw(&v, sizeof(v));
    return v;
  }
  std::string section(const char tag[4]) {
    need(4);
    if (std::memcmp(buf.data() + pos, tag, 4) != 0)
      throw CheckpointError(std::string("expected section ") + std::string(tag, 4) +
                            ", found " + buf.substr(pos, 4));
    pos += 4;
    const auto len = get<std::uint64_t>();
    need(len);
    std::string payload = buf.substr(pos, len);
    pos += len;
    return payload;
  }
};

std::string floats_payload(const std::vector<float>& v) {
  std::string out;
  out.resize(v.size() * sizeof(float));
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

std::vector<float> floats_from(const std::string& payload, const char* what) {
  if (payload.size() % sizeof(float) != 0)
    throw CheckpointError(std::string(what) + " section has a ragged length");
  std::vector<float> v(payload.size() / sizeof(float));
  std::memcpy(v.data(), payload.data(), payload.size());
  return v;
}

}  // namespace

std::string serialize(const Checkpoint& ckpt) {
  std::string out;
  put_bytes(out, kMagic, sizeof(kMagic));
  put<std::uint16_t>(out, ckpt.version);

  put_section(out, "CONF", config::canonical_text(ckpt.config));
  put_section(out, "SPEC", serial::spec_to_json(ckpt.spec).dump());
  put_section(out, "THHL", floats_payload(ckpt.params.theta_hl));
  put_section(out, "THLL", floats_payload(ckpt.params.theta_ll));
  put_section(out, "FRZE", std::string(1, ckpt.params.freeze_ll ? '\1' : '\0'));

  std::string arst;
  put<std::uint64_t>(arst, ckpt.iteration);
  put<std::uint64_t>(arst, ckpt.rng_seed);
  put<double>(arst, ckpt.best_return);
  put_section(out, "ARST", arst);

  std::string tlog;
  put<std::uint64_t>(tlog, ckpt.log.size());
  for (const TrainLogRow& r : ckpt.log) {
    put<std::uint64_t>(tlog, r.iteration);
    put<double>(tlog, r.mean_return);
    put<double>(tlog, r.max_return);
    put<double>(tlog, r.min_return);
    put<double>(tlog, r.sigma);
    put<std::uint64_t>(tlog, r.episodes_so_far);
  }
  put_section(out, "TLOG", tlog);
  return out;
}

Checkpoint deserialize(const std::string& bytes) {
  Reader r{bytes};
  char magic[6];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  Checkpoint ckpt;
  ckpt.version = r.get<std::uint16_t>();
  if (ckpt.version != kFormatVersion)
    throw CheckpointError("unsupported checkpoint format version " +
                          std::to_string(ckpt.version) + " (this build reads " +
                          std::to_string(kFormatVersion) + ")");

  ckpt.config = config::parse_config_text(r.section("CONF"));
  {
    const auto j = nlohmann::json::parse(r.section("SPEC"), nullptr, false);
    if (j.is_discarded()) throw CheckpointError("SPEC section is not valid JSON");
    ckpt.spec = serial::spec_from_json(j);
  }
  ckpt.params.theta_hl = floats_from(r.section("THHL"), "THHL");
  ckpt.params.theta_ll = floats_from(r.section("THLL"), "THLL");
  {
    const std::string f = r.section("FRZE");
    if (f.size() != 1) throw CheckpointError("FRZE section has wrong length");
    ckpt.params.freeze_ll = f[0] != '\0';
  }
  {
    const std::string arst = r.section("ARST");
    Reader a{arst};
    ckpt.iteration = a.get<std::uint64_t>();
    ckpt.rng_seed = a.get<std::uint64_t>();
    ckpt.best_return = a.get<double>();
  }
  {
    const std::string tlog = r.section("TLOG");
    Reader t{tlog};
    const auto n = t.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
      TrainLogRow row;
      row.iteration = t.get<std::uint64_t>();
      row.mean_return = t.get<double>();
      row.max_return = t.get<double>();
      row.min_return = t.get<double>();
      row.sigma = t.get<double>();
      row.episodes_so_far = t.get<std::uint64_t>();
      ckpt.log.push_back(row);
    }
  }
  if (r.pos != bytes.size()) throw CheckpointError("trailing bytes after last section");

  if (ckpt.params.theta_hl.size() != ckpt.spec.hl_size() ||
      ckpt.params.theta_ll.size() != ckpt.spec.ll_size())
    throw CheckpointError("parameter vectors do not match the stored architecture");
  return ckpt;
}

void save(const Checkpoint& ckpt, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }

  const std::string bytes = serialize(ckpt);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
      throw CheckpointError("cannot write checkpoint: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place: " + ec.message());

  std::ofstream meta(path + ".meta", std::ios::trunc);
  meta << "format_version: " << ckpt.version << "\n"
       << "task: " << world::task_name(ckpt.spec.task) << "\n"
       << "hl_mode: " << policy::hl_mode_name(ckpt.spec.hl_mode) << "\n"
       << "flat_baseline: " << (ckpt.spec.flat_baseline ? "true" : "false") << "\n"
       << "hl_params: " << ckpt.params.theta_hl.size() << "\n"
       << "ll_params: " << ckpt.params.theta_ll.size() << "\n"
       << "freeze_ll: " << (ckpt.params.freeze_ll ? "true" : "false") << "\n"
       << "iteration: " << ckpt.iteration << "\n"
       << "log_rows: " << ckpt.log.size() << "\n";
  char best[40];
  std::snprintf(best, sizeof(best), "%.17g", ckpt.best_return);
  meta << "best_return: " << best << "\n";
  if (!meta) throw CheckpointError("cannot write checkpoint sidecar: " + path + ".meta");
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace quadnav::checkpoint
