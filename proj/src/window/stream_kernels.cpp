// Copyright 2026 The Sagekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sage/window/stream_kernels.hpp"

#include <cstring>

#include "sage/common/error.hpp"
#include "sage/simd/kernels.hpp"

namespace sage::window {
namespace {

std::vector<double> to_doubles(ByteView b) {
  std::vector<double> out(b.size() / 8);
  std::memcpy(out.data(), b.data(), out.size() * 8);
  return out;
}

ByteView as_view(std::span<const double> v) {
  return {reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * 8};
}

// Reference kernels over plain arrays.
void reference(Kernel k, std::vector<double>& a, std::vector<double>& b, std::vector<double>& c, double q) {
  const std::size_t n = a.size();
  switch (k) {
    case Kernel::copy:
      for (std::size_t i = 0; i < n; ++i) c[i] = a[i];
      break;
    case Kernel::scale:
      for (std::size_t i = 0; i < n; ++i) b[i] = q * c[i];
      break;
    case Kernel::add:
      for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
      break;
    case Kernel::triad:
      for (std::size_t i = 0; i < n; ++i) a[i] = b[i] + q * c[i];
      break;
  }
}

}  // namespace

std::string_view to_string(Kernel k) noexcept {
  switch (k) {
    case Kernel::copy: return "copy";
    case Kernel::scale: return "scale";
    case Kernel::add: return "add";
    case Kernel::triad: return "triad";
  }
  return "?";
}

std::vector<double> read_doubles(IoCtx& ctx, Windows& windows, WindowId id, std::uint64_t n) {
  return to_doubles(windows.get(ctx, id, 0, n * 8));
}

void write_doubles(IoCtx& ctx, Windows& windows, WindowId id, std::span<const double> values) {
  windows.put(ctx, id, 0, as_view(values));
}

StreamResult run_stream(IoCtx& ctx, Windows& windows, WindowId a, WindowId b, WindowId c, double q, std::uint64_t n,
                        std::uint64_t chunk) {
  if (n == 0 || chunk == 0) raise(Errc::invalid_argument, "n and chunk must be positive");
  for (WindowId w : {a, b, c})
    if (windows.info(w).size != n * 8)
      raise(Errc::size_mismatch, "window " + std::to_string(w) + " holds " + std::to_string(windows.info(w).size) +
                                     " bytes, expected " + std::to_string(n * 8));

  // Oracle state from the windows' initial contents; reading it is not timed.
  IoCtx probe = ctx;
  std::vector<double> ra = read_doubles(probe, windows, a, n);
  std::vector<double> rb = read_doubles(probe, windows, b, n);
  std::vector<double> rc = read_doubles(probe, windows, c, n);

  const auto& k = simd::kernels();
  StreamResult result;
  result.verified = true;
  std::vector<double> x, y, out;
  for (Kernel kernel : {Kernel::copy, Kernel::scale, Kernel::add, Kernel::triad}) {
    const VTime t0 = ctx.now;
    WindowId in1 = a, in2 = b, dst = c;
    switch (kernel) {
      case Kernel::copy: in1 = a, dst = c; break;
      case Kernel::scale: in1 = c, dst = b; break;
      case Kernel::add: in1 = a, in2 = b, dst = c; break;
      case Kernel::triad: in1 = b, in2 = c, dst = a; break;
    }
    const bool two_inputs = kernel == Kernel::add || kernel == Kernel::triad;
    for (std::uint64_t i = 0; i < n; i += chunk) {
      const std::uint64_t m = std::min(chunk, n - i);
      x = to_doubles(windows.get(ctx, in1, i * 8, m * 8));
      if (two_inputs) y = to_doubles(windows.get(ctx, in2, i * 8, m * 8));
      out.resize(m);
      switch (kernel) {
        case Kernel::copy: k.copy(out.data(), x.data(), m); break;
        case Kernel::scale: k.scale(out.data(), x.data(), q, m); break;
        case Kernel::add: k.add(out.data(), x.data(), y.data(), m); break;
        case Kernel::triad: k.triad(out.data(), x.data(), y.data(), q, m); break;
      }
      windows.put(ctx, dst, i * 8, as_view(out));
    }
    windows.sync(ctx, dst);

    KernelResult& r = result.kernels[static_cast<std::size_t>(kernel)];
    r.kernel = kernel;
    r.bytes = kernel_bytes(kernel, n);
    r.time = ctx.now - t0;
    r.bandwidth = r.time > 0 ? static_cast<double>(r.bytes) / r.time : 0;

    reference(kernel, ra, rb, rc, q);
    const std::vector<double>& expect = dst == a ? ra : dst == b ? rb : rc;
    IoCtx check = ctx;
    const auto got = read_doubles(check, windows, dst, n);
    r.verified = std::memcmp(got.data(), expect.data(), n * 8) == 0;
    result.verified = result.verified && r.verified;
  }
  return result;
}

}  // namespace sage::window
