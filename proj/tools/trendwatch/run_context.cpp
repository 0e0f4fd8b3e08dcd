#include "run_context.hpp"

#include <array>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "trendwatch/error.hpp"

namespace trendwatch::cli {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }
  void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return out.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string utc_stamp(std::chrono::system_clock::time_point t, const char* format) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, format);
  return out.str();
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("io", "cannot read " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string sha256_text(const std::string& text) {
  Sha256 h;
  h.update(text.data(), text.size());
  return h.hex();
}

RunContext::RunContext(std::string command, std::string config_snapshot, std::optional<std::uint64_t> seed)
    : command_(std::move(command)),
      config_(std::move(config_snapshot)),
      seed_(seed),
      started_(std::chrono::system_clock::now()),
      clock_start_(std::chrono::steady_clock::now()) {}

void RunContext::add_input(const std::string& role, const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw DataError("io", "input file not found: " + path.string());
  inputs_.push_back({{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}});
}

void RunContext::open(const std::optional<std::filesystem::path>& explicit_dir, const std::filesystem::path& root) {
  if (explicit_dir) {
    dir_ = *explicit_dir;
  } else {
    std::string key = command_ + "\n" + config_;
    for (const auto& in : inputs_) key += "\n" + in["sha256"].get<std::string>();
    dir_ = root / (utc_stamp(started_, "%Y%m%dT%H%M%SZ") + "-" + sha256_text(key).substr(0, 12));
  }
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw DataError("io", "cannot create run directory " + dir_.string() + ": " + ec.message());
}

void RunContext::write(const std::string& name, const std::function<void(std::ostream&)>& body) {
  const auto path = dir_ / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("io", "cannot write " + path.string());
  body(out);
  out.close();
  if (!out) throw DataError("io", "failed writing " + path.string());
  outputs_.push_back({{"path", name}, {"sha256", sha256_file(path)}});
}

void RunContext::write_text(const std::string& name, const std::string& text) {
  write(name, [&](std::ostream& out) { out << text << '\n'; });
}

void RunContext::warn(const std::string& message) {
  warnings_.push_back(message);
  std::cerr << "warning: " << message << '\n';
}

void RunContext::record_stage(const std::string& name, std::chrono::steady_clock::time_point t0) {
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  stages_.push_back({{"stage", name}, {"seconds", dt.count()}});
}

void RunContext::finish() {
  const std::chrono::duration<double> total = std::chrono::steady_clock::now() - clock_start_;
  nlohmann::ordered_json m;
  m["command"] = command_;
  m["version"] = TRENDWATCH_VERSION;
  m["started_utc"] = utc_stamp(started_, "%Y-%m-%dT%H:%M:%SZ");
  m["wall_seconds"] = total.count();
  m["seed"] = seed_ ? nlohmann::ordered_json(*seed_) : nlohmann::ordered_json();
  m["config"] = config_;
  m["inputs"] = inputs_;
  m["stages"] = stages_;
  m["outputs"] = outputs_;
  m["warnings"] = warnings_;
  for (auto& [k, v] : extra_.items()) m[k] = v;
  const auto path = dir_ / "manifest.json";
  std::ofstream out(path);
  out << m.dump(2) << '\n';
  if (!out) throw DataError("io", "cannot write " + path.string());
}

}  // namespace trendwatch::cli
