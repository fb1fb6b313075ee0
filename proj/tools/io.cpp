#include "io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "robayes/npmle.hpp"

#ifndef ROBAYES_VERSION
#define ROBAYES_VERSION "0.0.0"
#endif

namespace robayes::cli {

namespace fs = std::filesystem;

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::malformed_file, where + ": '" + s + "' is not a number");
  }
}

std::vector<double> number_array(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(Errc::malformed_file, where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(Errc::malformed_file, where + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

}  // namespace

Grid parse_grid_arg(const std::string& text, const std::string& flag) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw Error(Errc::invalid_argument, flag + " expects lo,hi,n");
  const double lo = to_double(parts[0], flag), hi = to_double(parts[1], flag), n = to_double(parts[2], flag);
  if (!(n >= 3) || n != std::floor(n)) throw Error(Errc::invalid_argument, flag + ": n must be an integer >= 3");
  return make_uniform_grid(lo, hi, std::size_t(n));
}

json grid_json(const Grid& g) {
  if (g.uniform()) return json{{"lo", g.front()}, {"hi", g.back()}, {"n", g.size()}};
  return json{{"points", g.points()}};
}

Grid grid_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::malformed_file, where + ": expected a grid object");
  if (j.contains("points")) return Grid(number_array(j["points"], where + ".points"));
  for (const char* k : {"lo", "hi", "n"})
    if (!j.contains(k) || !j[k].is_number()) throw Error(Errc::malformed_file, where + "." + k + ": missing or not a number");
  return make_uniform_grid(j["lo"].get<double>(), j["hi"].get<double>(), j["n"].get<std::size_t>());
}

json distribution_json(const DiscreteDistribution& d) {
  return json{{"support", d.support()}, {"weights", d.weights()}};
}

DiscreteDistribution distribution_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("support") || !j.contains("weights"))
    throw Error(Errc::malformed_file, where + ": expected {support, weights}");
  try {
    return DiscreteDistribution(number_array(j["support"], where + ".support"),
                                number_array(j["weights"], where + ".weights"));
  } catch (const Error& e) {
    if (e.code() == Errc::malformed_file) throw;
    throw Error(Errc::malformed_file, where + ": " + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::malformed_file, path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(Errc::malformed_file,
                path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
  }
}

bool looks_like_file(const std::string& arg) {
  return arg.find('/') != std::string::npos || (arg.size() > 5 && arg.substr(arg.size() - 5) == ".json") ||
         fs::exists(arg);
}

PriorArg load_prior(const std::string& arg) {
  if (!looks_like_file(arg)) return PriorArg{PriorSpec::parse(arg), json(arg)};
  const json j = read_json_file(arg);
  const json* d = &j;
  if (j.is_object() && j.contains("mixing"))
    d = &j["mixing"];
  else if (j.is_object() && j.contains("least_favorable_prior"))
    d = &j["least_favorable_prior"];
  else if (j.is_object() && j.contains("prior") && j["prior"].is_string())
    return PriorArg{PriorSpec::parse(j["prior"].get<std::string>()), j["prior"]};
  DiscreteDistribution dist = distribution_from_json(*d, arg);
  json echo = distribution_json(dist);
  return PriorArg{PriorSpec::from_distribution(std::move(dist), arg), std::move(echo)};
}

NoiseKernel parse_kernel(const std::string& text, const SolverConfig& solver) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "gauss" && arg.empty()) return NoiseKernel::gaussian();
  if (head == "tukey" && arg.empty()) return NoiseKernel::contaminated_normal(0.2, 3.0);
  if (head == "laplace") return NoiseKernel::laplace(arg.empty() ? NoiseSpec{}.laplace_scale : to_double(arg, "--kernel"));
  if ((head == "huber" || head == "mallows") && !arg.empty()) {
    const double eps = to_double(arg, "--kernel");
    if (!(eps > 0.0 && eps < 1.0)) throw Error(Errc::invalid_epsilon, "kernel eps must lie in (0, 1)");
    return head == "huber" ? huber_noise_kernel(eps) : mallows_noise_kernel(eps, solver);
  }
  throw Error(Errc::invalid_argument, "unknown kernel '" + text + "' (gauss|laplace[:s]|tukey|huber:eps|mallows:eps)");
}

std::vector<double> read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::malformed_file, path + ": cannot open");
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string field = line.substr(0, line.find(','));
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      if (used != field.size() || !std::isfinite(v)) throw std::invalid_argument("bad");
      out.push_back(v);
    } catch (const std::exception&) {
      if (out.empty() && lineno == 1) continue;  // header
      throw Error(Errc::malformed_file, path + ":" + std::to_string(lineno) + ": field 1 '" + field + "' is not a finite number");
    }
  }
  if (out.empty()) throw Error(Errc::malformed_file, path + ": no data rows");
  return out;
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw Error(Errc::length_mismatch, "CSV row width differs from header");
  rows_.push_back(std::move(row));
}

std::string CsvTable::render(const std::string& manifest_name) const {
  std::string out = "# manifest=" + manifest_name + "\n";
  for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
  out += '\n';
  for (const auto& r : rows_) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += '\n';
  }
  return out;
}

RunContext::RunContext(std::string command, std::vector<std::string> argv, std::string out_dir,
                       std::string manifest_name)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      out_dir_(std::move(out_dir)),
      manifest_name_(std::move(manifest_name)),
      start_(std::chrono::steady_clock::now()) {}

void RunContext::write_file(const std::string& rel, const std::string& bytes) {
  const fs::path p = fs::path(out_dir_) / rel;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::invalid_argument, "cannot write " + p.string());
  out << bytes;
  artifacts_.push_back(json{{"path", rel}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
}

void RunContext::write_csv(const std::string& rel, const CsvTable& t) { write_file(rel, t.render(manifest_name_)); }

void RunContext::write_json(const std::string& rel, json j) {
  j["manifest"] = manifest_name_;
  write_file(rel, j.dump(2) + "\n");
}

void RunContext::finish() {
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  json m{{"command", command_}, {"argv", argv_},           {"config", config_},
         {"seeds", seeds_},     {"artifacts", artifacts_}, {"wall_seconds", wall},
         {"version", ROBAYES_VERSION}};
  const fs::path p = fs::path(out_dir_) / manifest_name_;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::invalid_argument, "cannot write " + p.string());
  out << m.dump(2) << "\n";
}

std::string manifest_for(const std::string& out_path) {
  const fs::path p(out_path);
  return (p.parent_path() / (p.stem().string() + ".manifest.json")).string();
}

}  // namespace robayes::cli
