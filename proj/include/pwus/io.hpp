// Copyright (c) 2026 pwus contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwus/image.hpp"

// File formats. Both start with a one-line text header followed by raw
// little-endian 32-bit floats:
//   PWIMG v1 <n_z> <n_x>\n                      pixels, axial-major
//   PWRF  v1 <r> <L> <theta_microradians>\n     samples, sample-major

namespace pwus {

namespace detail {

inline void write_f32(std::ofstream& os, const std::vector<double>& v) {
  std::vector<float> buf(v.begin(), v.end());
  os.write(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
}

inline void read_f32(std::ifstream& is, std::vector<double>& v, std::size_t n) {
  std::vector<float> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()), n * sizeof(float));
  if (!is) throw std::runtime_error("pwus io: truncated payload");
  v.assign(buf.begin(), buf.end());
}

inline std::string read_header_line(std::ifstream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("pwus io: missing header");
  return line;
}

}  // namespace detail

inline void write_pwimg(const Image& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pwimg: cannot open " + path);
  os << "PWIMG v1 " << img.nz << " " << img.nx << "\n";
  detail::write_f32(os, img.pixels);
}

inline Image read_pwimg(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_pwimg: cannot open " + path);
  std::istringstream hdr(detail::read_header_line(is));
  std::string magic, version;
  int nz = 0, nx = 0;
  hdr >> magic >> version >> nz >> nx;
  if (magic != "PWIMG" || version != "v1" || nz <= 0 || nx <= 0)
    throw std::runtime_error("read_pwimg: bad header in " + path);
  Image img(nz, nx);
  detail::read_f32(is, img.pixels, img.size());
  return img;
}

inline void write_pwrf(const RfFrame& frame, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pwrf: cannot open " + path);
  const long long micro = std::llround(frame.steering_angle * 1e6);
  os << "PWRF v1 " << frame.sample_count << " " << frame.element_count << " " << micro << "\n";
  detail::write_f32(os, frame.samples);
}

inline RfFrame read_pwrf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_pwrf: cannot open " + path);
  std::istringstream hdr(detail::read_header_line(is));
  std::string magic, version;
  int r = 0, L = 0;
  long long micro = 0;
  hdr >> magic >> version >> r >> L >> micro;
  if (magic != "PWRF" || version != "v1" || r <= 0 || L <= 0)
    throw std::runtime_error("read_pwrf: bad header in " + path);
  RfFrame frame(r, L, micro * 1e-6);
  detail::read_f32(is, frame.samples, frame.size());
  return frame;
}

}  // namespace pwus
