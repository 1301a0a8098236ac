#include "mmce/channel.hpp"

#include <algorithm>
#include <cmath>

namespace mmce {

VectorXcd steering_vector(double angle, int n) {
  if (n < 1) throw ConfigError("steering_vector: antenna count must be >= 1");
  VectorXcd a(n);
  const double c = std::cos(angle);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    const double phase = kPi * c * i;
    a(i) = cxd(scale * std::cos(phase), scale * std::sin(phase));
  }
  return a;
}

namespace {

VectorXcd steering_from_cos(double cos_angle, int n) {
  VectorXcd a(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    const double phase = kPi * cos_angle * i;
    a(i) = cxd(scale * std::cos(phase), scale * std::sin(phase));
  }
  return a;
}

// Grid cosines over {2*pi*i/g}. Entries i and g-i are made bitwise equal,
// which cos(2*pi - x) = cos(x) licenses; duplicate dictionary columns then
// compare exactly equal and argmax tie-breaking picks the lower index.
VectorXd grid_cosines(int g) {
  VectorXd c(g);
  for (int i = 0; i <= g / 2; ++i) c(i) = std::cos(2.0 * kPi * i / g);
  for (int i = g / 2 + 1; i < g; ++i) c(i) = c(g - i);
  return c;
}

MatrixXcd steering_grid(int n, int g) {
  const VectorXd cosines = grid_cosines(g);
  MatrixXcd a(n, g);
  for (int j = 0; j < g; ++j) a.col(j) = steering_from_cos(cosines(j), n);
  return a;
}

int nearest_grid_index(double angle, int g) {
  // Angles are drawn from [0, pi]; rounding lands in [0, g/2].
  int idx = static_cast<int>(std::lround(angle * g / (2.0 * kPi)));
  return std::clamp(idx, 0, g / 2);
}

}  // namespace

double raised_cosine(double t, double rolloff, double ts) {
  if (rolloff < 0.0 || rolloff > 1.0) throw ConfigError("raised_cosine: rolloff must be in [0, 1]");
  const double x = t / ts;
  const double sinc = (std::abs(x) < 1e-12) ? 1.0 : std::sin(kPi * x) / (kPi * x);
  if (rolloff == 0.0) return sinc;
  const double denom = 1.0 - 4.0 * rolloff * rolloff * x * x;
  if (std::abs(denom) < 1e-9) {
    // t = +-ts/(2*rolloff): limit of cos(pi*b*x)/(1 - (2*b*x)^2) is pi/4.
    return sinc * kPi / 4.0;
  }
  return sinc * std::cos(kPi * rolloff * x) / denom;
}

Dictionary build_dictionary(int n_t, int n_r, int g_t, int g_r) {
  if (n_t < 1 || n_r < 1 || g_t < 1 || g_r < 1)
    throw ConfigError("build_dictionary: all dimensions must be >= 1");
  if (g_t < n_t || g_r < n_r)
    throw ConfigError("build_dictionary: grid sizes must be at least the antenna counts");
  Dictionary d;
  d.a_tx = steering_grid(n_t, g_t);
  d.a_rx = steering_grid(n_r, g_r);
  d.grid_aod.resize(g_t);
  for (int i = 0; i < g_t; ++i) d.grid_aod(i) = 2.0 * kPi * i / g_t;
  d.grid_aoa.resize(g_r);
  for (int i = 0; i < g_r; ++i) d.grid_aoa(i) = 2.0 * kPi * i / g_r;
  return d;
}

Dictionary refine_dictionary(const Dictionary& base, int factor) {
  if (factor < 1) throw ConfigError("refine_dictionary: factor must be >= 1");
  return build_dictionary(base.n_t(), base.n_r(), base.g_t() * factor, base.g_r() * factor);
}

PathSet sample_paths(Rng& rng, int l, int nc, double ts, bool on_grid,
                     const Dictionary* dict, double rolloff) {
  if (l < 1) throw ConfigError("sample_paths: need at least one path");
  if (nc < 1) throw ConfigError("sample_paths: need at least one delay tap");
  if (on_grid && dict == nullptr)
    throw ConfigError("sample_paths: on-grid snapping requires a dictionary");
  PathSet ps;
  ps.ts = ts;
  ps.nc = nc;
  ps.rolloff = rolloff;
  ps.paths.resize(l);
  for (auto& p : ps.paths) {
    p.alpha = rng.cgaussian();
    p.tau = rng.uniform() * (nc - 1) * ts;
    p.aoa = rng.uniform() * kPi;
    p.aod = rng.uniform() * kPi;
    if (on_grid) {
      p.aoa = dict->grid_aoa(nearest_grid_index(p.aoa, dict->g_r()));
      p.aod = dict->grid_aod(nearest_grid_index(p.aod, dict->g_t()));
    }
  }
  return ps;
}

ChannelTaps channel_taps(const PathSet& ps, int n_t, int n_r) {
  const double scale = std::sqrt(n_t * n_r / (ps.l() * ps.rho_l));
  ChannelTaps out;
  out.taps.assign(ps.nc, MatrixXcd::Zero(n_r, n_t));
  for (const auto& p : ps.paths) {
    const MatrixXcd outer = steering_vector(p.aoa, n_r) * steering_vector(p.aod, n_t).adjoint();
    for (int d = 0; d < ps.nc; ++d) {
      const double pulse = raised_cosine(d * ps.ts - p.tau, ps.rolloff, ps.ts);
      if (pulse != 0.0) out.taps[d] += (scale * p.alpha * pulse) * outer;
    }
  }
  return out;
}

FreqChannel channel_freq(const ChannelTaps& taps, int k) {
  if (k < 1) throw ConfigError("channel_freq: need at least one subcarrier");
  const int nc = static_cast<int>(taps.taps.size());
  FreqChannel out;
  out.h.reserve(k);
  for (int kk = 0; kk < k; ++kk) {
    MatrixXcd hk = MatrixXcd::Zero(taps.taps[0].rows(), taps.taps[0].cols());
    for (int d = 0; d < nc; ++d) {
      const double phase = -2.0 * kPi * kk * d / k;
      hk += taps.taps[d] * cxd(std::cos(phase), std::sin(phase));
    }
    out.h.push_back(std::move(hk));
  }
  return out;
}

FreqChannel make_channel(const PathSet& paths, int n_t, int n_r, int k) {
  return channel_freq(channel_taps(paths, n_t, n_r), k);
}

namespace {

int on_grid_index(double angle, const VectorXd& grid) {
  const int g = static_cast<int>(grid.size());
  const int idx = static_cast<int>(std::lround(angle * g / (2.0 * kPi)));
  if (idx < 0 || idx >= g || std::abs(grid(idx) - angle) > 1e-12) return -1;
  return idx;
}

}  // namespace

VirtualGains virtual_gains(const PathSet& ps, const Dictionary& dict, int k) {
  VirtualGains vg;
  vg.g_r = dict.g_r();
  vg.g_t = dict.g_t();
  const double scale = std::sqrt(dict.n_t() * dict.n_r() / (ps.l() * ps.rho_l));

  std::vector<int> cells(ps.paths.size());
  for (size_t i = 0; i < ps.paths.size(); ++i) {
    const int i_aoa = on_grid_index(ps.paths[i].aoa, dict.grid_aoa);
    const int i_aod = on_grid_index(ps.paths[i].aod, dict.grid_aod);
    if (i_aoa < 0 || i_aod < 0)
      throw ConfigError("virtual_gains: PathSet has off-grid angles; labels are undefined");
    cells[i] = i_aod * vg.g_r + i_aoa;
  }
  vg.support = cells;
  std::sort(vg.support.begin(), vg.support.end());
  vg.support.erase(std::unique(vg.support.begin(), vg.support.end()), vg.support.end());

  vg.gains = MatrixXcd::Zero(static_cast<int>(vg.support.size()), k);
  for (size_t i = 0; i < ps.paths.size(); ++i) {
    const auto& p = ps.paths[i];
    const int row = static_cast<int>(
        std::lower_bound(vg.support.begin(), vg.support.end(), cells[i]) - vg.support.begin());
    for (int kk = 0; kk < k; ++kk) {
      // DFT of the pulse-shaped tap train for this path.
      cxd dft = 0.0;
      for (int d = 0; d < ps.nc; ++d) {
        const double pulse = raised_cosine(d * ps.ts - p.tau, ps.rolloff, ps.ts);
        if (pulse == 0.0) continue;
        const double phase = -2.0 * kPi * kk * d / k;
        dft += pulse * cxd(std::cos(phase), std::sin(phase));
      }
      vg.gains(row, kk) += scale * p.alpha * dft;
    }
  }
  return vg;
}

VirtualLabel virtual_label(const PathSet& ps, const Dictionary& dict, int k) {
  const VirtualGains vg = virtual_gains(ps, dict, k);
  VirtualLabel out;
  out.g.assign(k, MatrixXd::Zero(vg.g_r, vg.g_t));
  for (size_t s = 0; s < vg.support.size(); ++s) {
    const int i_aoa = vg.support[s] % vg.g_r;
    const int i_aod = vg.support[s] / vg.g_r;
    for (int kk = 0; kk < k; ++kk) out.g[kk](i_aoa, i_aod) = std::abs(vg.gains(s, kk));
  }
  return out;
}

std::vector<int> true_support(const PathSet& ps, const Dictionary& dict) {
  return virtual_gains(ps, dict, 1).support;
}

std::vector<int> true_support_refined(const PathSet& ps, const Dictionary& coarse,
                                      const Dictionary& refined) {
  if (refined.g_r() % coarse.g_r() != 0 || refined.g_t() % coarse.g_t() != 0)
    throw ConfigError("true_support_refined: refined grids must be multiples of the coarse grids");
  return virtual_gains(ps, refined, 1).support;
}

std::vector<int> nearest_support(const PathSet& ps, const Dictionary& dict) {
  std::vector<int> cells;
  cells.reserve(ps.paths.size());
  for (const auto& p : ps.paths) {
    const int i_aoa = nearest_grid_index(p.aoa, dict.g_r());
    const int i_aod = nearest_grid_index(p.aod, dict.g_t());
    cells.push_back(i_aod * dict.g_r() + i_aoa);
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

}  // namespace mmce
