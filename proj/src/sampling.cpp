#include "torusmix/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace torusmix {

namespace {

constexpr double kPi = std::numbers::pi;

void check_kappa(double k) {
  if (!std::isfinite(k) || k < 0.0) throw DomainError("concentration must be finite and non-negative");
}

struct Exponent {
  bool cosine;
  double k1, k2, k3;

  double value(double x, double y) const {
    const double g = cosine ? std::cos(x - y) : std::sin(x) * std::sin(y);
    return k1 * std::cos(x) + k2 * std::cos(y) + k3 * g;
  }

  // Gradient and Hessian of value().
  void derivs(double x, double y, std::array<double, 2>& g, std::array<double, 3>& h) const {
    const double cx = std::cos(x), sx = std::sin(x), cy = std::cos(y), sy = std::sin(y);
    if (cosine) {
      const double sd = std::sin(x - y), cd = std::cos(x - y);
      g = {-k1 * sx - k3 * sd, -k2 * sy + k3 * sd};
      h = {-k1 * cx - k3 * cd, k3 * cd, -k2 * cy - k3 * cd};
    } else {
      g = {-k1 * sx + k3 * cx * sy, -k2 * sy + k3 * sx * cy};
      h = {-k1 * cx - k3 * sx * sy, k3 * cx * cy, -k2 * cy - k3 * sx * sy};
    }
  }
};

// Newton ascent from (x, y); returns the best value seen.
double refine(const Exponent& e, double x, double y) {
  double best = e.value(x, y);
  for (int it = 0; it < 20; ++it) {
    std::array<double, 2> g{};
    std::array<double, 3> h{};
    e.derivs(x, y, g, h);
    const double det = h[0] * h[2] - h[1] * h[1];
    double dx, dy;
    if (h[0] < 0.0 && det > 0.0) {
      dx = -(h[2] * g[0] - h[1] * g[1]) / det;
      dy = -(-h[1] * g[0] + h[0] * g[1]) / det;
    } else {
      const double scale = 1.0 / (std::abs(e.k1) + std::abs(e.k2) + 2.0 * std::abs(e.k3) + 1e-12);
      dx = scale * g[0];
      dy = scale * g[1];
    }
    double step = 1.0;
    double next = e.value(x + dx, y + dy);
    while (next < best && step > 1e-6) {
      step *= 0.5;
      next = e.value(x + step * dx, y + step * dy);
    }
    if (next < best) break;
    const double gain = next - best;
    x += step * dx;
    y += step * dy;
    best = next;
    if (gain < 1e-10) break;
  }
  return best;
}

AngleData bivariate_rejection(bool cosine, std::size_t n, const ComponentParams& p, RngStream& rng,
                              RejectionStats* stats) {
  check_kappa(p.kappa1);
  check_kappa(p.kappa2);
  if (!std::isfinite(p.kappa3)) throw DomainError("kappa3 must be finite");
  const Exponent e{cosine, p.kappa1, p.kappa2, p.kappa3};
  const double hmax = bivariate_vm_log_majorant(cosine, p.kappa1, p.kappa2, p.kappa3);
  if (!std::isfinite(hmax)) throw NumericError("non-finite rejection majorant");
  std::vector<double> out;
  out.reserve(2 * n);
  std::size_t proposals = 0;
  while (out.size() < 2 * n) {
    const double x = kTwoPi * rng.uniform();
    const double y = kTwoPi * rng.uniform();
    ++proposals;
    if (std::log(rng.uniform_open()) < e.value(x, y) - hmax) {
      out.push_back(wrap_angle(x + p.mu1));
      out.push_back(wrap_angle(y + p.mu2));
    }
  }
  if (stats) {
    stats->proposals += proposals;
    stats->accepted += n;
  }
  return AngleData(2, std::move(out));
}

}  // namespace

double bivariate_vm_log_majorant(bool cosine, double k1, double k2, double k3) {
  const Exponent e{cosine, k1, k2, k3};
  constexpr int grid = 100;
  const double h = kTwoPi / grid;
  std::vector<double> v(grid * grid);
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) v[i * grid + j] = e.value(i * h, j * h);
  // Refine from the best few grid-local maxima.
  std::vector<std::pair<double, int>> peaks;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const double c = v[i * grid + j];
      bool peak = true;
      for (int di = -1; di <= 1 && peak; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          if (v[((i + di + grid) % grid) * grid + (j + dj + grid) % grid] > c) {
            peak = false;
            break;
          }
        }
      if (peak) peaks.emplace_back(c, i * grid + j);
    }
  std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double best = *std::max_element(v.begin(), v.end());
  for (std::size_t k = 0; k < std::min<std::size_t>(peaks.size(), 4); ++k) {
    const int idx = peaks[k].second;
    best = std::max(best, refine(e, (idx / grid) * h, (idx % grid) * h));
  }
  return best + 1e-10;
}

std::vector<double> rwnorm(std::size_t n, const ComponentParams& p, RngStream& rng) {
  check_kappa(p.kappa1);
  std::vector<double> out(n);
  if (p.kappa1 == 0.0) {
    for (double& x : out) x = kTwoPi * rng.uniform();
    return out;
  }
  const double sd = 1.0 / std::sqrt(p.kappa1);
  for (double& x : out) x = wrap_angle(p.mu1 + sd * rng.normal());
  return out;
}

AngleData rwnorm2(std::size_t n, const ComponentParams& p, RngStream& rng) {
  check_kappa(p.kappa1);
  check_kappa(p.kappa2);
  std::vector<double> out(2 * n);
  if (p.kappa1 == 0.0 && p.kappa2 == 0.0 && p.kappa3 == 0.0) {
    for (double& x : out) x = kTwoPi * rng.uniform();
    return AngleData(2, std::move(out));
  }
  const double det = p.kappa1 * p.kappa2 - p.kappa3 * p.kappa3;
  if (!(det > 0.0)) throw DomainError("wnorm2 sampling needs a non-singular precision matrix");
  const double s11 = p.kappa2 / det, s22 = p.kappa1 / det, s12 = -p.kappa3 / det;
  const double l11 = std::sqrt(s11);
  const double l21 = s12 / l11;
  const double l22 = std::sqrt(std::max(0.0, s22 - l21 * l21));
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = rng.normal(), z2 = rng.normal();
    out[2 * i] = wrap_angle(p.mu1 + l11 * z1);
    out[2 * i + 1] = wrap_angle(p.mu2 + l21 * z1 + l22 * z2);
  }
  return AngleData(2, std::move(out));
}

std::vector<double> rvm(std::size_t n, const ComponentParams& p, RngStream& rng, RejectionStats* stats) {
  check_kappa(p.kappa1);
  std::vector<double> out(n);
  const double k = p.kappa1;
  if (k == 0.0) {
    for (double& x : out) x = kTwoPi * rng.uniform();
    if (stats) {
      stats->proposals += n;
      stats->accepted += n;
    }
    return out;
  }
  const double s = std::sqrt(1.0 + 4.0 * k * k);
  const double tau = 1.0 + s;
  const double rho = 2.0 * k * tau / ((s + 1.0) * (tau + std::sqrt(2.0 * tau)));
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  const double one_minus_rho2 = (1.0 - rho) * (1.0 + rho);
  const double c_scale = k * one_minus_rho2 * one_minus_rho2 / (4.0 * rho * rho);
  std::size_t proposals = 0;
  for (double& x : out) {
    for (;;) {
      ++proposals;
      const double u1 = rng.uniform(), u2 = rng.uniform_open(), u3 = rng.uniform();
      const double z = std::cos(kPi * u1);
      const double f = std::clamp((1.0 + r * z) / (r + z), -1.0, 1.0);
      // c = kappa (r - f), written to avoid cancellation.
      const double c = c_scale / (r + z);
      if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
        const double theta = std::acos(f);
        x = wrap_angle(p.mu1 + (u3 < 0.5 ? -theta : theta));
        break;
      }
    }
  }
  if (stats) {
    stats->proposals += proposals;
    stats->accepted += n;
  }
  return out;
}

AngleData rvmsin(std::size_t n, const ComponentParams& p, RngStream& rng, RejectionStats* stats) {
  return bivariate_rejection(false, n, p, rng, stats);
}

AngleData rvmcos(std::size_t n, const ComponentParams& p, RngStream& rng, RejectionStats* stats) {
  return bivariate_rejection(true, n, p, rng, stats);
}

AngleData sample_component(ModelKind kind, std::size_t n, const ComponentParams& p, RngStream& rng) {
  switch (kind) {
    case ModelKind::WN: return AngleData(1, rwnorm(n, p, rng));
    case ModelKind::VM: return AngleData(1, rvm(n, p, rng));
    case ModelKind::WN2: return rwnorm2(n, p, rng);
    case ModelKind::VMSIN: return rvmsin(n, p, rng);
    case ModelKind::VMCOS: return rvmcos(n, p, rng);
  }
  throw DomainError("unknown model");
}

MixtureDraw rmix(std::size_t n, ModelKind kind, const MixtureState& state, RngStream& rng) {
  validate_state(state);
  for (const auto& c : state.comps) validate_params(kind, c);
  const int dim = data_dim(kind);
  const std::size_t k = state.ncomp();
  MixtureDraw out{AngleData(dim, std::vector<double>(n * dim)), std::vector<int>(n)};
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = static_cast<int>(rng.categorical(state.pmix));
    ++counts[static_cast<std::size_t>(out.labels[i])];
  }
  std::vector<AngleData> draws;
  draws.reserve(k);
  for (std::size_t j = 0; j < k; ++j) draws.push_back(sample_component(kind, counts[j], state.comps[j], rng));
  std::vector<std::size_t> next(k, 0);
  std::vector<double> values(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(out.labels[i]);
    const auto row = draws[j][next[j]++];
    for (int c = 0; c < dim; ++c) values[i * dim + c] = row[c];
  }
  out.data = AngleData(dim, std::move(values));
  return out;
}

}  // namespace torusmix
