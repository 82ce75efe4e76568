#include "ptycho/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ptycho {

namespace {

constexpr char kMagic[12] = {'P', 'T', 'Y', 'A', 'F', '.', 'T', 'E', 'N', 'S', 'O', 'R'};
constexpr std::uint32_t kVersion = 1;

void write_header(std::ofstream& out, std::uint32_t blocks, std::uint32_t side, std::uint32_t flag) {
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t v = kVersion;
  out.write(reinterpret_cast<const char*>(&v), 4);
  const std::uint32_t dims[4] = {blocks, side, side, flag};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
}

struct Header {
  std::uint32_t blocks, side, flag;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[12];
  std::uint32_t version = 0;
  std::uint32_t dims[4];
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("tensor file has wrong magic: " + path.string());
  if (version != kVersion) throw std::runtime_error("tensor file has unknown version: " + path.string());
  if (dims[1] != dims[2]) throw std::runtime_error("tensor file is not square: " + path.string());
  return {dims[0], dims[1], dims[3]};
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const BlockVector& stack) {
  auto out = open_out(path);
  write_header(out, static_cast<std::uint32_t>(stack.blocks()), static_cast<std::uint32_t>(stack.side()), 1);
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const double re = stack[i].real(), im = stack[i].imag();
    out.write(reinterpret_cast<const char*>(&re), 8);
    out.write(reinterpret_cast<const char*>(&im), 8);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

BlockVector read_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.flag != 1) throw std::runtime_error("tensor file is not complex: " + path.string());
  BlockVector stack(static_cast<int>(h.blocks), static_cast<int>(h.side));
  for (std::size_t i = 0; i < stack.size(); ++i) {
    double re = 0.0, im = 0.0;
    in.read(reinterpret_cast<char*>(&re), 8);
    in.read(reinterpret_cast<char*>(&im), 8);
    stack[i] = cplx(re, im);
  }
  if (!in) throw std::runtime_error("tensor file truncated: " + path.string());
  return stack;
}

void write_real_tensor(const std::filesystem::path& path, std::span<const double> values, int count,
                       int side) {
  if (values.size() != static_cast<std::size_t>(count) * side * side)
    throw std::invalid_argument("write_real_tensor: size mismatch");
  auto out = open_out(path);
  write_header(out, static_cast<std::uint32_t>(count), static_cast<std::uint32_t>(side), 0);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RealTensor read_real_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.flag != 0) throw std::runtime_error("tensor file is not real: " + path.string());
  RealTensor t;
  t.count = static_cast<int>(h.blocks);
  t.side = static_cast<int>(h.side);
  t.values.resize(static_cast<std::size_t>(t.count) * t.side * t.side);
  in.read(reinterpret_cast<char*>(t.values.data()),
          static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("tensor file truncated: " + path.string());
  return t;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> values, int rows, int cols) {
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("write_pgm: size mismatch");
  double lo = values.empty() ? 0.0 : values[0], hi = lo;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  auto out = open_out(path);
  out << "P5\n" << cols << " " << rows << "\n255\n";
  for (double v : values) {
    const double norm = span > 0.0 ? (v - lo) / span : 0.0;
    const unsigned char byte = static_cast<unsigned char>(std::lround(norm * 255.0));
    out.write(reinterpret_cast<const char*>(&byte), 1);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void export_stack_images(const std::filesystem::path& dir, const std::string& prefix,
                         const BlockVector& stack) {
  std::filesystem::create_directories(dir);
  const int n = stack.side();
  std::vector<double> channel(stack.grid_size());
  for (int l = 0; l < stack.blocks(); ++l) {
    auto block = stack.block(l);
    const std::string base = prefix + "_l" + std::to_string(l);
    for (std::size_t i = 0; i < channel.size(); ++i) channel[i] = block[i].real();
    write_pgm(dir / (base + "_re.pgm"), channel, n, n);
    for (std::size_t i = 0; i < channel.size(); ++i) channel[i] = block[i].imag();
    write_pgm(dir / (base + "_im.pgm"), channel, n, n);
    for (std::size_t i = 0; i < channel.size(); ++i) channel[i] = std::abs(block[i]);
    write_pgm(dir / (base + "_mag.pgm"), channel, n, n);
  }
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "outer,sub,variable,objective,data_loss,grad_sq,step,rel_err_raw,rel_err_aligned,wall_ms\n";
  out.precision(17);
  for (const TraceRow& r : trace.rows) {
    out << r.outer << ',' << r.sub << ',' << r.variable << ',' << r.objective << ',' << r.data_loss
        << ',' << r.grad_sq << ',' << r.step << ',' << r.rel_err_raw << ',' << r.rel_err_aligned
        << ',' << r.wall_ms << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RunTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("trace file is empty: " + path.string());
  const std::string expected =
      "outer,sub,variable,objective,data_loss,grad_sq,step,rel_err_raw,rel_err_aligned,wall_ms";
  if (line != expected) throw std::runtime_error("trace schema mismatch: " + path.string());

  RunTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    TraceRow row;
    auto next = [&]() -> std::string {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("trace row truncated: " + path.string());
      return field;
    };
    row.outer = std::stoi(next());
    row.sub = std::stoi(next());
    row.variable = next().at(0);
    row.objective = std::stod(next());
    row.data_loss = std::stod(next());
    row.grad_sq = std::stod(next());
    row.step = std::stod(next());
    row.rel_err_raw = std::stod(next());
    row.rel_err_aligned = std::stod(next());
    row.wall_ms = std::stod(next());
    trace.rows.push_back(row);
  }
  return trace;
}

}  // namespace ptycho
