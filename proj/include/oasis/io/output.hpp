#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oasis/error.hpp"
#include "oasis/geometry.hpp"
#include "oasis/io/config.hpp"

namespace oasis::io {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + csv_field(cells[i]);
  return s + "\n";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cli", "IO_ERROR", "cannot write " + path.string());
  f << text;
  if (!f) throw Error("cli", "IO_ERROR", "write failed for " + path.string());
}

// Rows accumulate in memory and hit the disk once, in a fixed order.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  std::size_t size() const { return rows_.size(); }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const {
    std::string s = csv_line(header_);
    for (const auto& r : rows_) s += csv_line(r);
    return s;
  }
  void write(const std::filesystem::path& path) const { write_text(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// 16-bit binary graymap. Image row 0 is the top grid row (largest y); nodes
// outside `mask` are 0. The header comment carries min and max of the inside
// values so pixels invert exactly up to quantization.
inline void emit_heatmap(const Field& f, const DomainMask* mask, const std::filesystem::path& path) {
  const Grid2D& g = f.grid();
  auto inside = [&](int n) { return !mask || mask->inside(n); };
  double lo = INFINITY, hi = -INFINITY;
  for (int n = 0; n < g.size(); ++n) {
    if (!inside(n)) continue;
    if (!std::isfinite(f[n])) throw Error("cli", "IO_ERROR", "heatmap of a non-finite field");
    lo = std::min(lo, f[n]);
    hi = std::max(hi, f[n]);
  }
  if (!(lo <= hi)) lo = hi = 0.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cli", "IO_ERROR", "cannot write " + path.string());
  out << "P5\n# min=" << fmt17(lo) << " max=" << fmt17(hi) << "\n"
      << g.nx() << " " << g.ny() << "\n65535\n";
  for (int j = g.ny() - 1; j >= 0; --j)
    for (int i = 0; i < g.nx(); ++i) {
      const int n = g.index(i, j);
      std::uint16_t v = 0;
      if (inside(n))
        v = hi > lo ? static_cast<std::uint16_t>(std::lround((f[n] - lo) / (hi - lo) * 65535.0))
                    : 32768;
      const char b[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
      out.write(b, 2);
    }
  if (!out) throw Error("cli", "IO_ERROR", "write failed for " + path.string());
}

struct Heatmap {
  int width = 0, height = 0;
  double min = 0.0, max = 0.0;
  std::vector<std::uint16_t> pixels;  // row-major, top row first

  double value(int px) const {
    return max > min ? min + (max - min) * pixels[px] / 65535.0 : min;
  }
};

inline Heatmap read_heatmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cli", "IO_ERROR", "cannot read " + path.string());
  std::string magic, comment;
  std::getline(in, magic);
  std::getline(in, comment);
  if (magic != "P5" || comment.rfind("# min=", 0) != 0)
    throw Error("cli", "IO_ERROR", "not a heatmap: " + path.string());
  Heatmap h;
  std::sscanf(comment.c_str(), "# min=%lf max=%lf", &h.min, &h.max);
  int maxval = 0;
  in >> h.width >> h.height >> maxval;
  in.get();
  h.pixels.resize(static_cast<std::size_t>(h.width) * h.height);
  for (auto& p : h.pixels) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    p = static_cast<std::uint16_t>(b[0] << 8 | b[1]);
  }
  if (!in) throw Error("cli", "IO_ERROR", "truncated heatmap: " + path.string());
  return h;
}

// Runs task(i) for i in [0, n) on up to `workers` threads; rethrows the
// first failure by index.
inline void parallel_for(int n, int workers, const std::function<void(int)>& task) {
  std::vector<std::exception_ptr> err(n);
  std::atomic<int> next{0};
  auto loop = [&] {
    for (int i; (i = next++) < n;) {
      try {
        task(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  const int w = std::max(1, std::min(workers, n));
  if (w == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
}

}  // namespace oasis::io
